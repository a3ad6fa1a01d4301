//! Groups a ranked list under its parent documents and renders a prompt.
//!
//!     cargo run --example prompt_assembly

use hashrag::corpus::{Corpus, Document, Proposition};
use hashrag::pgcc::{apply_hybrid_scores, assemble_context, render_prompt, PromptTemplate};

fn doc(id: &str, title: &str, text: &str) -> Document {
    Document {
        doc_id: id.into(),
        title: title.into(),
        text: text.into(),
    }
}

fn prop(id: &str, doc: &str, ordinal: u32, text: &str) -> Proposition {
    Proposition {
        prop_id: id.into(),
        doc_id: doc.into(),
        ordinal,
        text: text.into(),
    }
}

fn main() -> hashrag::Result<()> {
    let corpus = Corpus::new(
        vec![
            doc("rhine", "Rhine", "The Rhine flows from the Alps to the North Sea."),
            doc("danube", "Danube", "The Danube flows east into the Black Sea."),
        ],
        vec![
            prop("r0", "rhine", 0, "The Rhine rises in the Swiss Alps."),
            prop("r1", "rhine", 1, "The Rhine reaches the North Sea in the Netherlands."),
            prop("d0", "danube", 0, "The Danube passes through Vienna."),
        ],
    )?;
    let ranked = [("r1", 9.0), ("d0", 6.0), ("r0", 2.0)];
    let ids: Vec<&str> = ranked.iter().map(|(id, _)| *id).collect();
    let mut bundle = assemble_context(&corpus, &ids, 2)?.with_question("Where does the Rhine end?");
    let scores: Vec<(String, f64)> = ranked.iter().map(|(id, s)| (id.to_string(), *s)).collect();
    apply_hybrid_scores(&mut bundle, &scores, 0.5)?;
    print!("{}", render_prompt(&bundle, &PromptTemplate::open_domain_qa())?);
    Ok(())
}
