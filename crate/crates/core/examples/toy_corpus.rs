//! Generate a synthetic substitution corpus and summarize it.

use rxn_seq2seq::toychem::{corpus_stats, generate_dataset, grammar_vocabulary, ToyGrammar};

fn main() {
    let grammar = ToyGrammar::default();
    let lines = generate_dataset(2000, 42, &grammar);
    for line in lines.iter().take(5) {
        println!("{line}");
    }
    println!("{:#?}", corpus_stats(&lines));
    println!("grammar vocabulary: {} tokens", grammar_vocabulary(&grammar).len());
}
