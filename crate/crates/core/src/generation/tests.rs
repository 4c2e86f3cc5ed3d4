use std::collections::BTreeMap;
use std::time::Duration;

use proptest::prelude::*;

use super::*;
use crate::corpus::CollectionKind;
use crate::test_support::MockServer;
use crate::text::{TokenCounter, WordPunctCounter};

fn doc(id: &str, kind: CollectionKind, text: &str) -> Document {
    Document {
        id: id.to_string(),
        kind,
        text: text.to_string(),
        metadata: BTreeMap::new(),
    }
}

fn bundle(statutes: Vec<Document>, precedents: Vec<Document>) -> PromptBundle {
    PromptBundle {
        facts: CaseFacts::new("the plaintiff claims possession of the plots").unwrap(),
        statutes,
        precedents,
    }
}

#[test]
fn inference_defaults() {
    let p = InferenceParams::default();
    assert_eq!((p.max_new_tokens, p.no_repeat_ngram, p.input_budget_tokens), (4096, 6, 16_384));
    assert_eq!(p.repetition_penalty, 1.1);
    p.validate().unwrap();
}

#[test]
fn empty_slots_keep_all_instructions() {
    for t in PromptTemplateId::ALL {
        let p = assemble_prompt(t, &bundle(vec![], vec![]), &InferenceParams::default(), &WordPunctCounter).unwrap();
        let text = p.text();
        for needle in [
            "Case Proceedings: the plaintiff claims possession of the plots",
            "Relevant Statutes:\n",
            "Cited Cases Reference:\n",
            PREDICTION_LINE,
            EXPLANATION_LINE,
            SYSTEM_MESSAGE,
            "Just provide the final judgment and explanation.",
        ] {
            assert!(text.contains(needle), "{t}: missing {needle:?}");
        }
        assert!(p.dropped.is_empty());
    }
}

#[test]
fn template_delimiters() {
    let b = bundle(vec![], vec![]);
    let render = |t| assemble_prompt(t, &b, &InferenceParams::default(), &WordPunctCounter).unwrap();

    let d = render(PromptTemplateId::DeepSeekR1);
    assert!(d.system.starts_with("SYSTEM:\n"));
    assert!(d.user.starts_with("USER:\n"));
    assert_eq!(d.assistant, "ASSISTANT:\n### Response:\n");
    assert!(d.text().lines().any(|l| l == "##PREDICTION: [Insert your prediction here]"));

    let m = render(PromptTemplateId::Phi4Mini);
    assert!(m.system.starts_with("<|system|> ") && m.system.ends_with("<|end|>"));
    assert!(m.user.starts_with("<|user|> ") && m.user.ends_with("<|end|>"));
    assert_eq!(m.assistant, "<|assistant|>");

    let p = render(PromptTemplateId::Phi4);
    assert!(p.system.starts_with("<|im_start|>system<|im_sep|>") && p.system.ends_with("<|im_end|>"));
    assert!(p.user.starts_with("<|im_start|>user<|im_sep|>") && p.user.ends_with("<|im_end|>"));
    assert_eq!(p.assistant, "<|im_start|>assistant<|im_sep|>");

    let q = render(PromptTemplateId::Qwen35);
    assert!(q.system.starts_with("<|im_start|><|system|>") && q.system.ends_with("<|im_end|>"));
    assert!(q.user.starts_with("<|im_start|><|user|> ") && q.user.ends_with("<|im_end|>"));
    assert_eq!(q.assistant, "<|im_start|><|assistant|>");

    for t in PromptTemplateId::ALL {
        assert_eq!(t.as_str().parse::<PromptTemplateId>().unwrap(), t);
        assert_eq!(serde_json::to_value(t).unwrap(), t.as_str());
    }
}

#[test]
fn slots_hold_documents_in_rank_order() {
    let b = bundle(
        vec![doc("s1", CollectionKind::CentralActs, "first statute"), doc("s2", CollectionKind::StateActs, "second statute")],
        vec![doc("p1", CollectionKind::SupremeCourtJudgments, "leading precedent")],
    );
    let p = assemble_prompt(PromptTemplateId::DeepSeekR1, &b, &InferenceParams::default(), &WordPunctCounter).unwrap();
    assert!(p.user.contains("Relevant Statutes:\nfirst statute\n\nsecond statute\n\nCited Cases Reference:\nleading precedent\n"));
}

#[test]
fn one_precedent_over_budget_is_dropped() {
    let words = |n: usize, tag: &str| (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ");
    let b = bundle(
        vec![doc("s1", CollectionKind::CentralActs, &words(3000, "s"))],
        vec![
            doc("p1", CollectionKind::SupremeCourtJudgments, &words(6000, "a")),
            doc("p2", CollectionKind::HighCourtJudgments, &words(6000, "b")),
            doc("p3", CollectionKind::HighCourtJudgments, &words(2000, "c")),
        ],
    );
    let counter = WordPunctCounter;
    let params = InferenceParams::default();
    let all = assemble_prompt(
        PromptTemplateId::Qwen35,
        &b,
        &InferenceParams {
            input_budget_tokens: usize::MAX,
            ..params
        },
        &counter,
    )
    .unwrap();
    let full = counter.count(&all.text());
    assert!(full > params.input_budget_tokens && full - 2000 < params.input_budget_tokens);

    let p = assemble_prompt(PromptTemplateId::Qwen35, &b, &params, &counter).unwrap();
    assert_eq!(p.dropped, ["p3"]);
    assert!(counter.count(&p.text()) <= params.input_budget_tokens);
    assert!(p.user.contains("a5999") && p.user.contains("b5999") && !p.user.contains("c0"));
}

#[test]
fn oversized_facts_are_an_error() {
    let facts = "a ".repeat(17_000);
    let b = PromptBundle {
        facts: CaseFacts::new(&facts).unwrap(),
        statutes: vec![],
        precedents: vec![],
    };
    let err = assemble_prompt(PromptTemplateId::Phi4, &b, &InferenceParams::default(), &WordPunctCounter).unwrap_err();
    assert!(matches!(err, GenerationError::Budget { budget: 16_384, .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn assembled_prompts_fit_the_budget(
        statutes in proptest::collection::vec(1usize..400, 0..6),
        precedents in proptest::collection::vec(1usize..400, 0..6),
        budget in 300usize..2000,
        t in 0usize..4,
    ) {
        let mk = |lens: &[usize], kind, tag: &str| -> Vec<Document> {
            lens.iter().enumerate().map(|(i, &n)| {
                let text = (0..n).map(|j| format!("{tag}{i}x{j}")).collect::<Vec<_>>().join(" ");
                doc(&format!("{tag}{i}"), kind, &text)
            }).collect()
        };
        let b = bundle(mk(&statutes, CollectionKind::CentralActs, "s"), mk(&precedents, CollectionKind::SupremeCourtJudgments, "p"));
        let params = InferenceParams { input_budget_tokens: budget, ..InferenceParams::default() };
        let template = PromptTemplateId::ALL[t];
        match assemble_prompt(template, &b, &params, &WordPunctCounter) {
            Ok(p) => {
                prop_assert!(WordPunctCounter.count(&p.text()) <= budget);
                // precedents go first, lowest rank first
                let kept_p = precedents.len() - p.dropped.iter().filter(|d| d.starts_with('p')).count();
                let kept_s = statutes.len() - p.dropped.iter().filter(|d| d.starts_with('s')).count();
                prop_assert!(kept_p == 0 || kept_s == statutes.len());
                for i in 0..kept_p { let id = format!("p{}", i); prop_assert!(!p.dropped.contains(&id)); }
                for i in 0..kept_s { let id = format!("s{}", i); prop_assert!(!p.dropped.contains(&id)); }
            }
            Err(GenerationError::Budget { tokens, .. }) => prop_assert!(tokens > budget),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

fn record(issue: &str, pet: &str, resp: &str, delib: &str, pred: &str, expl: &str) -> TargetRecord {
    TargetRecord {
        reasoning: StructuredReasoning {
            legal_issue: issue.into(),
            petitioner_arguments: pet.into(),
            respondent_arguments: resp.into(),
            deliberation: delib.into(),
        },
        prediction: pred.into(),
        explanation: expl.into(),
    }
}

fn assert_round_trip(r: &TargetRecord, t: PromptTemplateId) {
    let out = parse_structured_output(&render_target(r, t));
    assert_eq!(out.reasoning, r.reasoning);
    assert_eq!(out.prediction_text, r.prediction);
    assert_eq!(out.explanation, r.explanation);
    assert_eq!(out.parse_quality, ParseQuality::Full);
}

#[test]
fn target_shape() {
    let r = record("issue", "pet line one\npet line two", "resp", DEFAULT_DELIBERATION, "0", "because");
    for t in PromptTemplateId::ALL {
        let text = render_target(&r, t);
        assert!(text.starts_with("<think>\n**Legal Issue Analysis:**\n"));
        assert_eq!(text.matches("**Deliberation:**").count(), 1);
        assert!(text.contains("\npet line one\npet line two"));
        assert!(text.ends_with("</think>\n##PREDICTION: 0\n##EXPLANATION: because"));
        assert_round_trip(&r, t);
    }
}

fn section_text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 .,;:'()\n-]{1,80}"
        .prop_map(|s| s.trim().to_string())
        .prop_filter("non-empty, no markers", |s| !s.is_empty() && !contains_reserved_marker(s))
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(
        issue in section_text(), pet in section_text(), resp in section_text(), delib in section_text(),
        pred in section_text(), expl in section_text(), t in 0usize..4,
    ) {
        let r = record(&issue, &pet, &resp, &delib, &pred, &expl);
        let out = parse_structured_output(&render_target(&r, PromptTemplateId::ALL[t]));
        prop_assert_eq!(out.reasoning, r.reasoning);
        prop_assert_eq!(out.prediction_text, r.prediction);
        prop_assert_eq!(out.explanation, r.explanation);
        prop_assert_eq!(out.parse_quality, ParseQuality::Full);
    }

    #[test]
    fn parser_is_total_on_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let text = String::from_utf8_lossy(&bytes);
        let out = parse_structured_output(&text);
        if out.parse_quality == ParseQuality::Failed {
            prop_assert_eq!(out.decision, Decision::Abstain);
        }
        if out.decision != Decision::Abstain {
            prop_assert!(!out.prediction_text.is_empty());
        }
    }

    #[test]
    fn parser_is_total_on_marker_soup(parts in proptest::collection::vec(prop_oneof![
        Just("<think>".to_string()), Just("</think>".to_string()), Just("##PREDICTION:".to_string()),
        Just("## explanation".to_string()), Just("**Deliberation:**".to_string()), Just("\n".to_string()),
        Just("**Legal Issue Analysis:**".to_string()), Just("é".to_string()), "[a-z01 ]{0,8}",
    ], 0..30)) {
        let out = parse_structured_output(&parts.concat());
        prop_assert!(out.parse_quality != ParseQuality::Failed || out.decision == Decision::Abstain);
    }
}

#[test]
fn output_shapes() {
    let well_formed = "<think>\n** Legal Issue Analysis:**\nIs the appellant considered to be in \"possession\" of the lands as khudkasht?\n\n\
        **Arguments of Petitioner:**\nIt can be contended by learned counsel for the appellant that possession was exclusive.\n\n\
        **Arguments of Respondent:**\nThe respondent's arguments could be that the appellant may not be able to challenge the final decree.\n\n\
        **Deliberation:**\nWeighing the arguments against the relevant statutes and cited cases to form a decision.\n</think>\n\
        ##PREDICTION: The appeal can be set aside.\n##EXPLANATION: It can be inferred that the normal principle of possession by one co-sharer applies.";
    let out = parse_structured_output(well_formed);
    assert_eq!(out.parse_quality, ParseQuality::Full);
    assert_eq!(out.decision, Decision::Accepted);
    assert!(out.reasoning.legal_issue.starts_with("Is the appellant"));

    let no_think = "Alright, I'm trying to figure out whether the appeal in this case should be accepted or rejected.\n\
        First, looking at the case proceedings, the plaintiff, Kailashrai...\n##PREDICTION: 0\n##EXPLANATION:\n\
        The High Court correctly determined that the plaintiff was not in cultivatory possession.";
    let out = parse_structured_output(no_think);
    assert_eq!(out.parse_quality, ParseQuality::Partial);
    assert_eq!(out.decision, Decision::Rejected);
    assert!(out.explanation.starts_with("The High Court"));

    let missing_issue = "**Arguments of Petitioner:**\nP\n**Arguments of Respondent:**\nR\n##PREDICTION: 0\n##EXPLANATION: E";
    assert_eq!(parse_structured_output(missing_issue).parse_quality, ParseQuality::Partial);

    let prose = "The court notes the submissions of both parties and reserves its view on the possession question.";
    let out = parse_structured_output(prose);
    assert_eq!(out.parse_quality, ParseQuality::Failed);
    assert_eq!(out.decision, Decision::Abstain);
}

#[test]
fn variant_markers() {
    let qwen = "**Legal Issue Analysis:** What are the grounds?\n**Arguments of Petitioner:** The petitioner may contend.\n\
        **Arguments of Respondent:** The respondent's arguments could be.\n##PREDICTIONS:\n12. The appeal may be dismissed.\n\
        ## EXPLANATION: It can be inferred that a person...";
    let out = parse_structured_output(qwen);
    assert_eq!(out.parse_quality, ParseQuality::Full);
    assert_eq!(out.reasoning.deliberation, "");
    assert_eq!(out.decision, Decision::Rejected);
    assert_eq!(out.reasoning.legal_issue, "What are the grounds?");
    assert_eq!(out.explanation, "It can be inferred that a person...");

    let no_bold = "<think>\nlegal issue analysis:\nX\narguments of petitioner:\nY\narguments of respondent:\nZ\ndeliberation:\nW\n</think>\n\
        ## prediction 1\n## explanation: E";
    let out = parse_structured_output(no_bold);
    assert_eq!(out.parse_quality, ParseQuality::Full);
    assert_eq!(out.decision, Decision::Accepted);
    assert_eq!(out.reasoning.deliberation, "W");
}

#[test]
fn decisions() {
    assert_eq!(normalize_decision("0"), Decision::Rejected);
    assert_eq!(normalize_decision("1"), Decision::Accepted);
    assert_eq!(normalize_decision(" 0 (rejected) "), Decision::Rejected);
    assert_eq!(normalize_decision("The appeal may be dismissed."), Decision::Rejected);
    assert_eq!(normalize_decision("16. The appeal may be dismissed."), Decision::Rejected);
    assert_eq!(normalize_decision("The appeal can be dismissed with costs"), Decision::Rejected);
    assert_eq!(normalize_decision("We may hold that the appeal can be set aside."), Decision::Accepted);
    assert_eq!(normalize_decision("The APPEAL is ALLOWED"), Decision::Accepted);
    assert_eq!(normalize_decision("The court notes the submissions."), Decision::Abstain);
    assert_eq!(normalize_decision("Appeal allowed in part, cross appeal dismissed"), Decision::Abstain);
    assert_eq!(normalize_decision(""), Decision::Abstain);
    assert_eq!(normalize_decision("disallowed"), Decision::Abstain);
}

#[test]
fn scripted_backend() {
    let b = bundle(vec![], vec![]);
    let params = InferenceParams::default();
    let prompt = assemble_prompt(PromptTemplateId::DeepSeekR1, &b, &params, &WordPunctCounter).unwrap();
    let line = serde_json::json!({"prompt_hash": prompt.hash(), "completion": "##PREDICTION: 1\n##EXPLANATION: e"});
    let backend = ScriptedBackend::from_jsonl(&format!("{line}\n")).unwrap();
    let c = complete(&backend, &prompt, &params, &WordPunctCounter).unwrap();
    assert_eq!(c.source, CompletionSource::Scripted);
    assert_eq!(c.text, "##PREDICTION: 1\n##EXPLANATION: e");

    let other = assemble_prompt(PromptTemplateId::Phi4, &b, &params, &WordPunctCounter).unwrap();
    let c = complete(&backend, &other, &params, &WordPunctCounter).unwrap();
    assert_eq!(c.source, CompletionSource::Fallback);
    assert_eq!(c, complete(&backend, &other, &params, &WordPunctCounter).unwrap());
    assert_eq!(parse_structured_output(&c.text).parse_quality, ParseQuality::Failed);

    assert_eq!(prompt.hash().len(), 64);
    assert_eq!(
        prompt_hash("abc"),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
    assert!(ScriptedBackend::from_jsonl("not json").is_err());
}

#[test]
fn remote_failures_report_attempts() {
    let server = MockServer::start(vec![(500, "boom".into()), (503, "boom".into())]);
    let backend = HttpLlmBackend::new(server.url.clone(), None, Duration::from_secs(5), 1);
    let prompt = assemble_prompt(PromptTemplateId::Phi4, &bundle(vec![], vec![]), &InferenceParams::default(), &WordPunctCounter).unwrap();
    let err = backend.complete(&prompt, &InferenceParams::default()).unwrap_err();
    assert!(matches!(err, GenerationError::Backend { attempts: 2, .. }), "{err}");
    assert!(err.to_string().contains("2 attempt"));
    assert_eq!(server.join().len(), 2);
}

#[test]
fn remote_success_passes_params() {
    let server = MockServer::start(vec![
        (500, String::new()),
        (200, r###"{"choices":[{"message":{"content":"##PREDICTION: 0"}}]}"###.into()),
        (200, "plain body".into()),
    ]);
    let backend = HttpLlmBackend::new(server.url.clone(), Some("m".into()), Duration::from_secs(5), 2);
    let prompt = assemble_prompt(PromptTemplateId::Qwen35, &bundle(vec![], vec![]), &InferenceParams::default(), &WordPunctCounter).unwrap();
    let c = backend.complete(&prompt, &InferenceParams::default()).unwrap();
    assert_eq!((c.text.as_str(), c.source), ("##PREDICTION: 0", CompletionSource::Remote));
    let c = backend.complete(&prompt, &InferenceParams::default()).unwrap();
    assert_eq!(c.text, "plain body");
    let requests = server.join();
    let body: serde_json::Value = serde_json::from_str(&requests[1]).unwrap();
    assert_eq!(body["max_tokens"], 4096);
    assert_eq!(body["no_repeat_ngram_size"], 6);
    assert_eq!(body["repetition_penalty"], 1.1);
    assert_eq!(body["model"], "m");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], prompt.system);

    let fatal = MockServer::start(vec![(400, "bad".into())]);
    let backend = HttpLlmBackend::new(fatal.url.clone(), None, Duration::from_secs(5), 3);
    assert!(matches!(
        backend.complete(&prompt, &InferenceParams::default()),
        Err(GenerationError::Backend { attempts: 1, .. })
    ));
    fatal.join();
}
