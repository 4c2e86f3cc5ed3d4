//! Assemble a prompt under the token budget and parse model outputs.
//!
//! cargo run --example prompt_parse

use jurisrag::corpus::CaseFacts;
use jurisrag::generation::{
    assemble_prompt, parse_structured_output, render_target, InferenceParams, PromptBundle, PromptTemplateId,
    StructuredReasoning, TargetRecord,
};
use jurisrag::text::{TokenCounter, WordPunctCounter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = PromptBundle {
        facts: CaseFacts::new("The plaintiff claims exclusive possession of the plots as khudkasht.")?,
        statutes: vec![],
        precedents: vec![],
    };
    let prompt = assemble_prompt(PromptTemplateId::Qwen35, &bundle, &InferenceParams::default(), &WordPunctCounter)?;
    println!("prompt {} tokens, hash {}", WordPunctCounter.count(&prompt.text()), prompt.hash());

    let record = TargetRecord {
        reasoning: StructuredReasoning {
            legal_issue: "whether possession of one co-sharer is exclusive".into(),
            petitioner_arguments: "the plaintiff cultivated the plots alone".into(),
            respondent_arguments: "possession of one co-sharer is possession of all".into(),
            deliberation: String::new(),
        },
        prediction: "0".into(),
        explanation: "the plaintiff could not show exclusive possession".into(),
    };
    for template in PromptTemplateId::ALL {
        let parsed = parse_structured_output(&render_target(&record, template));
        println!("{:<12} {:?} {:?}", template.as_str(), parsed.parse_quality, parsed.decision);
    }

    for text in ["##PREDICTION: 1\n##EXPLANATION:", "no markers at all"] {
        let parsed = parse_structured_output(text);
        println!("{text:?}: {:?} {:?}", parsed.parse_quality, parsed.decision);
    }
    Ok(())
}
