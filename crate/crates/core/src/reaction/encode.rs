use std::collections::HashMap;

use super::{CanonicalReaction, ReactionError};
use crate::smiles::tokenize;
use crate::reaction::Field;

/// Prefix that turns a whole reagent SMILES into one source token.
pub const REAGENT_PREFIX: &str = "A_";

/// The most frequent training reagents, most frequent first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReagentSet {
    ordered: Vec<String>,
    rank: HashMap<String, usize>,
}

impl ReagentSet {
    pub fn new(ordered: Vec<String>) -> Self {
        let rank = ordered.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        ReagentSet { ordered, rank }
    }

    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    pub fn contains(&self, smiles: &str) -> bool {
        self.rank.contains_key(smiles)
    }

    pub fn rank(&self, smiles: &str) -> Option<usize> {
        self.rank.get(smiles).copied()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.ordered
    }
}

/// Top-`k` reagents by frequency over `train`; ties break lexicographically.
pub fn build_reagent_vocab(train: &[CanonicalReaction], k: usize) -> ReagentSet {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for rxn in train {
        for r in &rxn.reagents {
            *counts.entry(r.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ReagentSet::new(ranked.into_iter().take(k).map(|(s, _)| s.to_string()).collect())
}

fn tokens_of(smiles: &str, field: Field) -> Result<Vec<String>, ReactionError> {
    tokenize(smiles)
        .map(|t| t.into_iter().map(|t| t.into_string()).collect())
        .map_err(|source| ReactionError::Molecule { field, index: 0, source })
}

/// Source: atom tokens of the reactants, ">", then one token per known
/// reagent in reagent-set order. Target: atom tokens of the single product.
/// Reagents outside the set are dropped.
pub fn encode_example(rxn: &CanonicalReaction, reagents: &ReagentSet) -> Result<(Vec<String>, Vec<String>), ReactionError> {
    if rxn.products.len() != 1 {
        return Err(ReactionError::MultipleProducts { count: rxn.products.len() });
    }
    let mut source = tokens_of(&rxn.reactants.join("."), Field::Reactants)?;
    source.push(">".to_string());
    let mut known: Vec<(usize, &str)> = rxn
        .reagents
        .iter()
        .filter_map(|r| reagents.rank(r).map(|k| (k, r.as_str())))
        .collect();
    known.sort_unstable();
    known.dedup();
    source.extend(known.into_iter().map(|(_, r)| format!("{REAGENT_PREFIX}{r}")));
    let target = tokens_of(&rxn.products[0], Field::Products)?;
    Ok((source, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rxn(reactants: &[&str], reagents: &[&str], products: &[&str]) -> CanonicalReaction {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        CanonicalReaction { reactants: own(reactants), reagents: own(reagents), products: own(products) }
    }

    #[test]
    fn frequency_ranking() {
        let train = vec![
            rxn(&["C"], &["O=S(=O)(O)O", "O"], &["C"]),
            rxn(&["C"], &["O=S(=O)(O)O"], &["C"]),
            rxn(&["C"], &["CCO", "O"], &["C"]),
        ];
        // "O" and "O=S(=O)(O)O" tie at two; lexicographic order decides
        assert_eq!(build_reagent_vocab(&train, 1).as_slice(), ["O"]);
        assert_eq!(build_reagent_vocab(&train, 10).as_slice(), ["O", "O=S(=O)(O)O", "CCO"]);
        assert!(build_reagent_vocab(&train, 0).is_empty());
    }

    #[test]
    fn table_source_and_target() {
        let r = rxn(&["Cc1cc(Cl)n(C)n1", "O=[N+]([O-])O"], &["O=S(=O)(O)O"], &["Cc1nn(C)c(Cl)c1[N+](=O)[O-]"]);
        let set = ReagentSet::new(vec!["O=S(=O)(O)O".into()]);
        let (src, tgt) = encode_example(&r, &set).unwrap();
        assert_eq!(src.join(" "), "C c 1 c c ( Cl ) n ( C ) n 1 . O = [N+] ( [O-] ) O > A_O=S(=O)(O)O");
        assert_eq!(tgt.join(" "), "C c 1 n n ( C ) c ( Cl ) c 1 [N+] ( = O ) [O-]");
    }

    #[test]
    fn unknown_or_absent_reagents() {
        let set = ReagentSet::new(vec!["O".into()]);
        let (src, _) = encode_example(&rxn(&["CC"], &[], &["CC"]), &set).unwrap();
        assert_eq!(src.last().unwrap(), ">");
        let (src2, _) = encode_example(&rxn(&["CC"], &["ClCCl"], &["CC"]), &set).unwrap();
        assert_eq!(src, src2);
        assert_eq!(
            encode_example(&rxn(&["CC"], &[], &["C", "C"]), &set),
            Err(ReactionError::MultipleProducts { count: 2 })
        );
    }

    #[test]
    fn reagents_follow_set_order() {
        let set = ReagentSet::new(vec!["O".into(), "CCO".into()]);
        let (src, _) = encode_example(&rxn(&["C"], &["CCO", "O"], &["C"]), &set).unwrap();
        assert_eq!(src[src.len() - 2..], ["A_O", "A_CCO"]);
    }
}
