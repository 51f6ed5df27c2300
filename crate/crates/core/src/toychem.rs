//! Synthetic substitution reactions: a halide on a scaffold is replaced by
//! a nucleophile's fragment. Small, deterministic and chemically valid, so
//! end-to-end learning can be checked in minutes.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::ModelConfig;
use crate::numerics::derive_seed;
use crate::reaction::{parse_reaction, Vocabulary, RESERVED};
use crate::smiles::{canonicalize, tokenize, SmilesError};

/// Scaffolds with a `{}` substitution site and the halide that fills it in
/// the starting material. Fragments are written attachment atom first, so
/// the site must be at the end of the string or inside a branch.
pub const SCAFFOLDS: [(&str, &str); 40] = [
    ("Brc1cncc(c1){}", "Br"),
    ("c1ccccc1{}", "Br"),
    ("Cc1ccc(cc1){}", "Br"),
    ("COc1ccc(cc1){}", "Br"),
    ("O=[N+]([O-])c1ccc(cc1){}", "Cl"),
    ("N#Cc1ccc(cc1){}", "Br"),
    ("FC(F)(F)c1ccc(cc1){}", "Cl"),
    ("c1ccc2ccccc2c1{}", "Br"),
    ("c1ccncc1{}", "Br"),
    ("c1ccnc(c1){}", "Cl"),
    ("c1cnc(nc1){}", "Cl"),
    ("Cc1cc(C)nc(n1){}", "Cl"),
    ("c1csc(c1){}", "Br"),
    ("c1ccc(o1){}", "Br"),
    ("O=C(O)c1ccc(cc1){}", "Br"),
    ("CC(=O)c1ccc(cc1){}", "Br"),
    ("Clc1ccc(cc1){}", "I"),
    ("Fc1ccc(cc1){}", "Br"),
    ("CS(=O)(=O)c1ccc(cc1){}", "Cl"),
    ("c1ccc2ncccc2c1{}", "Br"),
    ("COC(=O)c1ccc(cc1){}", "Br"),
    ("Cc1ccccc1{}", "Br"),
    ("Cc1cccc(c1){}", "Br"),
    ("Nc1ccc(cc1){}", "I"),
    ("OC(=O)c1cccnc1{}", "Cl"),
    ("c1cc(ncn1){}", "Cl"),
    ("Cn1ccnc1{}", "Br"),
    ("Brc1ccc(nc1){}", "Cl"),
    ("FC(F)(F)c1ccc(nc1){}", "Cl"),
    ("N#Cc1cccnc1{}", "Cl"),
    ("CCCC{}", "Br"),
    ("CC(C)C{}", "Br"),
    ("c1ccccc1C{}", "Br"),
    ("CCOC(=O)C{}", "Br"),
    ("CCCCCC{}", "Br"),
    ("C1CCC(CC1){}", "Br"),
    ("CC(=O)C{}", "Cl"),
    ("N#CC{}", "Br"),
    ("COCC{}", "Br"),
    ("ClCCC{}", "I"),
];

/// (reacting species, fragment it leaves on the scaffold).
pub const NUCLEOPHILES: [(&str, &str); 8] = [
    ("C[O-]", "OC"),
    ("CC[O-]", "OCC"),
    ("N", "N"),
    ("CN", "NC"),
    ("CNC", "N(C)C"),
    ("C1COCCN1", "N1CCOCC1"),
    ("[C-]#N", "C#N"),
    ("C[S-]", "SC"),
];

pub const DISTRACTORS: [&str; 6] = ["CN(C)C=O", "[Na+]", "C1CCOC1", "ClCCl", "CS(C)=O", "CC#N"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyGrammar {
    pub scaffolds: Vec<(String, String)>,
    pub nucleophiles: Vec<(String, String)>,
    pub distractors: Vec<String>,
    /// Relative weights of adding 0, 1 or 2 distractor reagents.
    pub distractor_weights: [f64; 3],
}

impl Default for ToyGrammar {
    fn default() -> Self {
        let own = |v: &[(&str, &str)]| v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        ToyGrammar {
            scaffolds: own(&SCAFFOLDS),
            nucleophiles: own(&NUCLEOPHILES),
            distractors: DISTRACTORS.iter().map(|s| s.to_string()).collect(),
            distractor_weights: [0.4, 0.4, 0.2],
        }
    }
}

/// Canonical (reactants, product) of one scaffold/nucleophile pair.
pub fn instantiate(scaffold: &(String, String), nucleophile: &(String, String)) -> Result<(Vec<String>, String), SmilesError> {
    let (template, halide) = scaffold;
    let (species, fragment) = nucleophile;
    let mut reactants = vec![canonicalize(&template.replace("{}", halide))?, canonicalize(species)?];
    reactants.sort();
    let product = canonicalize(&template.replace("{}", fragment))?;
    Ok((reactants, product))
}

impl ToyGrammar {
    /// Checks that every instantiation is a valid molecule.
    pub fn validate(&self) -> Result<(), String> {
        if self.scaffolds.is_empty() || self.nucleophiles.is_empty() {
            return Err("grammar needs at least one scaffold and one nucleophile".into());
        }
        for s in &self.scaffolds {
            for n in &self.nucleophiles {
                instantiate(s, n).map_err(|e| format!("{} + {}: {e}", s.0, n.0))?;
            }
        }
        for d in &self.distractors {
            canonicalize(d).map_err(|e| format!("distractor {d}: {e}"))?;
        }
        Ok(())
    }
}

/// `n` reaction lines `reactants>reagents>product`, drawn with replacement.
/// Line `i` depends only on (`seed`, `i`).
///
/// # Panics
/// If the grammar fails [`ToyGrammar::validate`].
pub fn generate_dataset(n: usize, seed: u64, grammar: &ToyGrammar) -> Vec<String> {
    if let Err(e) = grammar.validate() {
        panic!("invalid toy grammar: {e}");
    }
    let distractors: Vec<String> = grammar.distractors.iter().map(|d| canonicalize(d).expect("validated")).collect();
    let total: f64 = grammar.distractor_weights.iter().sum();
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
            let s = rng.gen_range(0..grammar.scaffolds.len());
            let nu = rng.gen_range(0..grammar.nucleophiles.len());
            let (reactants, product) = instantiate(&grammar.scaffolds[s], &grammar.nucleophiles[nu]).expect("validated");
            let mut u = rng.gen::<f64>() * total;
            let mut k = 0;
            while k < 2 && u >= grammar.distractor_weights[k] {
                u -= grammar.distractor_weights[k];
                k += 1;
            }
            let mut reagents: Vec<String> = distractors.choose_multiple(&mut rng, k.min(distractors.len())).cloned().collect();
            reagents.sort();
            format!("{}>{}>{}", reactants.join("."), reagents.join("."), product)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub size: usize,
    /// Reserved tokens plus distinct SMILES tokens over all fields.
    pub vocab_size: usize,
    /// Mean token count of reactants plus reagents.
    pub mean_source_len: f64,
    pub mean_target_len: f64,
    pub distinct_reactant_keys: usize,
    pub unparsable: usize,
}

fn tokens(smiles: &str) -> Vec<String> {
    tokenize(smiles).map(|t| t.into_iter().map(|t| t.into_string()).collect()).unwrap_or_default()
}

pub fn corpus_stats<S: AsRef<str>>(lines: &[S]) -> CorpusStats {
    let mut vocab = BTreeSet::new();
    let mut keys = BTreeSet::new();
    let (mut src, mut tgt, mut ok) = (0usize, 0usize, 0usize);
    for line in lines {
        let line = line.as_ref();
        let fields: Vec<&str> = line.split('>').collect();
        if fields.len() != 3 || parse_reaction(line).is_err() {
            continue;
        }
        ok += 1;
        let source: Vec<String> = [fields[0], fields[1]].iter().filter(|f| !f.is_empty()).flat_map(|f| tokens(f)).collect();
        let target = tokens(fields[2]);
        src += source.len();
        tgt += target.len();
        vocab.extend(source);
        vocab.extend(target);
        keys.insert(fields[0].to_string());
    }
    let mean = |t: usize| if ok == 0 { 0.0 } else { t as f64 / ok as f64 };
    CorpusStats {
        size: lines.len(),
        vocab_size: RESERVED.len() + vocab.iter().filter(|t| !RESERVED.contains(&t.as_str())).count(),
        mean_source_len: mean(src),
        mean_target_len: mean(tgt),
        distinct_reactant_keys: keys.len(),
        unparsable: lines.len() - ok,
    }
}

/// A vocabulary over every token the grammar can produce, including the
/// `.` that joins molecules.
pub fn grammar_vocabulary(grammar: &ToyGrammar) -> Vocabulary {
    let mut all = BTreeSet::from([".".to_string()]);
    for s in &grammar.scaffolds {
        for n in &grammar.nucleophiles {
            if let Ok((r, p)) = instantiate(s, n) {
                r.iter().chain(std::iter::once(&p)).for_each(|m| all.extend(tokens(m)));
            }
        }
    }
    grammar.distractors.iter().for_each(|d| all.extend(tokens(d)));
    Vocabulary::from_tokens(all)
}

/// A desk-scale model for the default grammar: 64-unit two-layer BLSTM
/// encoder with Luong attention, trained for 30 epochs with small batches
/// and output dropout.
pub fn desk_config() -> ModelConfig {
    ModelConfig { batch_size: 2, lr0: 0.7, decay: 0.9, output_dropout: 0.3, ..ModelConfig::default() }
}
