//! Regenerates `fixtures/listing1/oracle.jsonl` after a template change.
//!
//! Records one first-turn answer per task: the correct contract for
//! `Listing1.java` and a wrong one for `Thrice.java`.
//!
//!     cargo run -p specloop-core --example record_listing_fixture -- fixtures/listing1

use std::path::PathBuf;

use specloop_core::oracle::{format_answer, FixtureStore, OracleReply};
use specloop_core::prompting::{Conversation, PromptSet};
use specloop_core::source_model::parse_document;

const ANSWERS: [(&str, &str, &str); 2] = [
    (
        "Listing1.java",
        "g",
        "/*@ normal_behavior ensures \\result == 2*x; assignable \\nothing; @*/",
    ),
    ("Thrice.java", "k", "/*@ normal_behavior ensures \\result == x; @*/"),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures/listing1".into()));
    let out = dir.join("oracle.jsonl");
    if out.exists() {
        std::fs::remove_file(&out)?;
    }
    let store = FixtureStore::open(&out)?;
    let prompts = PromptSet::bundled();
    for (file, hint, jml) in ANSWERS {
        let text = std::fs::read_to_string(dir.join(file))?;
        let doc = parse_document(&text, Some(hint))?;
        let conv = Conversation::new(
            doc.kind(),
            prompts.render_system(doc.kind()),
            prompts.render_initial(doc.kind(), &doc)?,
        );
        store.record(&conv, &OracleReply::estimated(&conv, format_answer(jml)))?;
    }
    println!("wrote {} entries to {}", store.len(), out.display());
    Ok(())
}
