//! Split a statute with both chunk profiles and re-chunk by characters.
//!
//! cargo run --example chunking

use jurisrag::chunking::{rechunk_characters, split_text, ChunkProfile, RECHUNK_OVERLAP, RECHUNK_SIZE};
use jurisrag::text::{normalize_text, WordPunctCounter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let section = "Sale is a transfer of ownership in exchange for a price paid or promised. \
        Such transfer, in the case of tangible immovable property of the value of one hundred rupees and upwards, \
        can be made only by a registered instrument.\n\n\
        A contract for the sale of immovable property is a contract that a sale of such property shall take place \
        on terms settled between the parties. It does not, of itself, create any interest in such property.";
    let text = normalize_text(&section.repeat(40));

    for profile in [ChunkProfile::standard(), ChunkProfile::long_context()] {
        let chunks = split_text("ca-tpa-54", &text, &profile, &WordPunctCounter);
        println!("max {} overlap {}: {} chunks", profile.max_tokens(), profile.overlap_tokens(), chunks.len());
    }

    let small = ChunkProfile::new(60, 10, jurisrag::chunking::default_separators())?;
    for c in split_text("ca-tpa-54", &normalize_text(section), &small, &WordPunctCounter) {
        println!("{} tokens {}..{} overlap {}", c.chunk_id(), c.start_token, c.end_token, c.overlap_prev);
    }

    let segments = rechunk_characters(&text, RECHUNK_SIZE, RECHUNK_OVERLAP);
    println!("{} character segments of up to {RECHUNK_SIZE}", segments.len());
    Ok(())
}
