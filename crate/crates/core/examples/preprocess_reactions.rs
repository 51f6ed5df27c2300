//! Turn raw reaction lines into tokenized source/target pairs.

use rxn_seq2seq::reaction::{preprocess_lines, PreprocessOptions};
use rxn_seq2seq::toychem::{generate_dataset, ToyGrammar};

const MAPPED: &str = "[Cl:1][c:2]1[cH:3][c:4]([CH3:8])[n:5][n:6]1[CH3:7].[OH:14][N+:15]([O-:16])=[O:17].[S:9](=[O:10])(=[O:11])([OH:12])[OH:13]>>[Cl:1][c:2]1[c:3]([N+:15](=[O:14])[O-:16])[c:4]([CH3:8])[n:5][n:6]1[CH3:7]";

fn main() {
    let data = preprocess_lines([MAPPED], &PreprocessOptions::default());
    for (src, tgt) in data.train.iter().chain(&data.valid).chain(&data.test) {
        println!("source: {}\ntarget: {}", src.join(" "), tgt.join(" "));
    }

    let lines = generate_dataset(500, 1, &ToyGrammar::default());
    let data = preprocess_lines(lines.iter().map(String::as_str), &PreprocessOptions::default());
    println!("\n{:#?}", data.report);
    println!("vocabulary: {} tokens, reagent set: {} entries", data.vocab.len(), data.reagents.len());
}
