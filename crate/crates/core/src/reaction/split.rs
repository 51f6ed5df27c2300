use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CanonicalReaction;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

/// Random group-level partition. Items sharing a key always land in the same
/// part; parts keep the input order. Groups are shuffled and assigned by the
/// running item count against the cumulative ratio boundaries.
pub fn split_by_key<T, K, F>(items: Vec<T>, key: F, ratios: (u32, u32, u32), seed: u64) -> DatasetSplit<T>
where
    K: std::hash::Hash + Eq,
    F: Fn(&T) -> K,
{
    assert!(ratios.0 > 0 && ratios.1 > 0 && ratios.2 > 0, "split ratios must be positive");
    let mut group_of = Vec::with_capacity(items.len());
    let mut groups: HashMap<K, usize> = HashMap::new();
    let mut sizes: Vec<usize> = Vec::new();
    for item in &items {
        let next = groups.len();
        let g = *groups.entry(key(item)).or_insert(next);
        if g == sizes.len() {
            sizes.push(0);
        }
        sizes[g] += 1;
        group_of.push(g);
    }

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n = items.len() as f64;
    let total = (ratios.0 + ratios.1 + ratios.2) as f64;
    let train_end = (n * ratios.0 as f64 / total).round() as usize;
    let valid_end = (n * (ratios.0 + ratios.1) as f64 / total).round() as usize;

    let mut part_of_group = vec![0u8; sizes.len()];
    let mut assigned = 0;
    for g in order {
        part_of_group[g] = if assigned < train_end {
            0
        } else if assigned < valid_end {
            1
        } else {
            2
        };
        assigned += sizes[g];
    }

    let mut split = DatasetSplit { train: Vec::new(), valid: Vec::new(), test: Vec::new() };
    for (item, g) in items.into_iter().zip(group_of) {
        match part_of_group[g] {
            0 => split.train.push(item),
            1 => split.valid.push(item),
            _ => split.test.push(item),
        }
    }
    split
}

/// Splits reactions so that reactions with the same reactants share a part.
pub fn split_dataset(reactions: Vec<CanonicalReaction>, ratios: (u32, u32, u32), seed: u64) -> DatasetSplit<CanonicalReaction> {
    split_by_key(reactions, CanonicalReaction::reactant_key, ratios, seed)
}
