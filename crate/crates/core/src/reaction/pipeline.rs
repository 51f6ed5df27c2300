use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    build_reagent_vocab, build_token_vocab, deduplicate, encode_example, normalize, parse_reaction_with,
    separate_reagents, split_dataset, ReactionError, ReagentSet, Vocabulary,
};
use crate::smiles::{ParseOptions, StereoPolicy};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub ratios: (u32, u32, u32),
    pub seed: u64,
    pub reagent_set_size: usize,
    pub max_source_len: usize,
    pub max_target_len: usize,
    pub ignore_stereo: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            ratios: (18, 1, 1),
            seed: 42,
            reagent_set_size: 76,
            max_source_len: 256,
            max_target_len: 160,
            ignore_stereo: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub input_lines: usize,
    pub duplicates_removed: usize,
    pub parse_failures: usize,
    pub multi_product_dropped: usize,
    pub too_long_dropped: usize,
    /// Lines without product atom maps; their fields were taken as given.
    pub unmapped_kept: usize,
    pub split_sizes: SplitSizes,
}

pub type TokenPair = (Vec<String>, Vec<String>);

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Vec<TokenPair>,
    pub valid: Vec<TokenPair>,
    pub test: Vec<TokenPair>,
    pub reagents: ReagentSet,
    pub vocab: Vocabulary,
    pub report: PreprocessReport,
    /// `(line number, message)` for every line that could not be used.
    pub failures: Vec<(usize, String)>,
}

/// Runs the full preparation: parse, reagent separation, map stripping and
/// canonicalization, deduplication, single-product filter, grouped split,
/// reagent set and token encoding. Only the first whitespace-separated field
/// of each line is read; blank lines are skipped.
pub fn preprocess_lines<'a, I>(lines: I, options: &PreprocessOptions) -> PreparedData
where
    I: IntoIterator<Item = &'a str>,
{
    let parse_options = ParseOptions {
        stereo: if options.ignore_stereo { StereoPolicy::Ignore } else { StereoPolicy::Reject },
    };
    let mut report = PreprocessReport::default();
    let mut failures = Vec::new();
    let mut normalized = Vec::new();

    for (line_no, line) in lines.into_iter().enumerate() {
        let Some(text) = line.split_whitespace().next() else { continue };
        report.input_lines += 1;
        let result = parse_reaction_with(text, parse_options).and_then(|rxn| {
            let rxn = match separate_reagents(&rxn) {
                Ok(sep) => sep,
                Err(ReactionError::MissingAtomMaps) => {
                    report.unmapped_kept += 1;
                    rxn
                }
                Err(e) => return Err(e),
            };
            normalize(&rxn)
        });
        match result {
            Ok(r) => normalized.push(r),
            Err(e) => {
                report.parse_failures += 1;
                failures.push((line_no + 1, e.to_string()));
            }
        }
    }

    let before = normalized.len();
    let unique: Vec<_> = deduplicate(normalized).collect();
    report.duplicates_removed = before - unique.len();

    let (single, multi): (Vec<_>, Vec<_>) = unique.into_iter().partition(|r| r.products.len() == 1);
    report.multi_product_dropped = multi.len();

    let split = split_dataset(single, options.ratios, options.seed);
    let reagents = build_reagent_vocab(&split.train, options.reagent_set_size);

    let mut encode_part = |part: &[super::CanonicalReaction]| -> Vec<TokenPair> {
        let mut out = Vec::new();
        for rxn in part {
            match encode_example(rxn, &reagents) {
                Ok((src, tgt)) if src.len() <= options.max_source_len && tgt.len() <= options.max_target_len => {
                    out.push((src, tgt))
                }
                Ok(_) => report.too_long_dropped += 1,
                Err(e) => {
                    report.parse_failures += 1;
                    failures.push((0, format!("{}: {e}", rxn.key())));
                }
            }
        }
        out
    };
    let train = encode_part(&split.train);
    let valid = encode_part(&split.valid);
    let test = encode_part(&split.test);

    let vocab = build_token_vocab(train.iter().flat_map(|(s, t)| [s.as_slice(), t.as_slice()]));
    report.split_sizes = SplitSizes { train: train.len(), valid: valid.len(), test: test.len() };

    PreparedData { train, valid, test, reagents, vocab, report, failures }
}

fn write_lines(path: &Path, rows: impl Iterator<Item = String>) -> io::Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(path, text)
}

impl PreparedData {
    /// Writes `src-{split}.txt`/`tgt-{split}.txt`, `vocab.txt`,
    /// `reagents.txt`, `report.json` and `failures.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, part) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            write_lines(&dir.join(format!("src-{name}.txt")), part.iter().map(|(s, _)| s.join(" ")))?;
            write_lines(&dir.join(format!("tgt-{name}.txt")), part.iter().map(|(_, t)| t.join(" ")))?;
        }
        self.vocab.save(&dir.join("vocab.txt"))?;
        write_lines(&dir.join("reagents.txt"), self.reagents.as_slice().iter().cloned())?;
        let report = serde_json::to_string_pretty(&self.report).map_err(io::Error::other)?;
        std::fs::write(dir.join("report.json"), report + "\n")?;
        write_lines(&dir.join("failures.txt"), self.failures.iter().map(|(n, m)| format!("{n}\t{m}")))
    }
}
