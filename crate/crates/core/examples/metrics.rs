//! Recall, average precision and exact match on hand-made rankings.
//!
//!     cargo run --example metrics

use std::collections::BTreeSet;

use hashrag::eval::{average_precision, exact_match, normalize_answer, recall_at_k};

fn main() {
    let relevant: BTreeSet<String> = ["b", "d"].iter().map(|s| s.to_string()).collect();
    let ranked = ["a", "b", "c", "d"];
    for k in [1, 2, 4] {
        println!("recall@{k} = {}", recall_at_k(&ranked, &relevant, k));
    }
    // (1/2 + 2/4) / 2
    println!("AP = {}", average_precision(&ranked, &relevant));

    let prediction = "It is Mount Everest, in Nepal.";
    println!("normalized: {:?}", normalize_answer(prediction));
    println!("EM = {}", exact_match(prediction, &["Mount Everest"]));
}
