//! Canonical atom ranking and SMILES emission.
//!
//! Atoms are first ordered by a local invariant (degree, atomic number,
//! isotope, hydrogen count, charge, aromaticity, atom map) and the classes
//! are refined by the sorted ranks of their neighbors until stable. Ties that
//! survive refinement are broken by promoting one member of the lowest tied
//! class and refining again. Every tie-breaking branch is explored (up to a
//! leaf budget) and the lexicographically smallest emitted string wins, so
//! the result does not depend on the input atom order.

use std::collections::BTreeSet;

use super::graph::{BondOrder, MolecularGraph};
use super::parse::{parse_with, ParseOptions};
use super::valence::validate_valence;
use super::SmilesError;

/// Tie-breaking leaves explored before falling back to the first branch.
const LEAF_BUDGET: usize = 4096;

/// Clears atom maps. Bracket atoms that then carry only their default
/// hydrogen count lose their explicit count so they print without brackets.
pub fn strip_atom_maps(graph: &MolecularGraph) -> MolecularGraph {
    let mut out = graph.clone();
    for i in 0..graph.atom_count() {
        let implicit = graph.default_implicit_h(i);
        let atom = &mut out.atoms_mut()[i];
        atom.atom_map = None;
        if atom.element.is_organic_subset()
            && atom.charge == 0
            && atom.isotope.is_none()
            && atom.explicit_h == Some(implicit)
        {
            atom.explicit_h = None;
        }
    }
    out
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|a, b| keys[*a].cmp(&keys[*b]));
    let mut ranks = vec![0; keys.len()];
    let mut class = 0;
    for w in 0..order.len() {
        if w > 0 && keys[order[w]] != keys[order[w - 1]] {
            class += 1;
        }
        ranks[order[w]] = class;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

fn initial_ranks(graph: &MolecularGraph) -> Vec<usize> {
    let keys: Vec<_> = graph
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (
                graph.degree(i),
                a.element.atomic_number(),
                a.isotope.unwrap_or(0),
                graph.hydrogen_count(i),
                // negative charges sort after positive ones
                a.charge as i32 as u32,
                a.aromatic,
                a.atom_map.unwrap_or(0),
            )
        })
        .collect();
    dense_ranks(&keys)
}

fn refine(graph: &MolecularGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let before = class_count(&ranks);
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..graph.atom_count())
            .map(|i| {
                let mut nbrs: Vec<(usize, u8)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|(n, b)| (ranks[*n], graph.bonds()[*b].order.code()))
                    .collect();
                nbrs.sort_unstable();
                (ranks[i], nbrs)
            })
            .collect();
        ranks = dense_ranks(&keys);
        if class_count(&ranks) == before {
            return ranks;
        }
    }
}

struct TieSearch<'a> {
    graph: &'a MolecularGraph,
    best: Option<(String, Vec<usize>)>,
    leaves: usize,
}

impl TieSearch<'_> {
    fn explore(&mut self, ranks: Vec<usize>) {
        let n = self.graph.atom_count();
        let classes = class_count(&ranks);
        if classes == n {
            self.leaves += 1;
            let s = write_smiles(self.graph, &ranks);
            if self.best.as_ref().is_none_or(|(b, _)| s < *b) {
                self.best = Some((s, ranks));
            }
            return;
        }
        let mut counts = vec![0usize; classes];
        for r in &ranks {
            counts[*r] += 1;
        }
        let tied = counts.iter().position(|c| *c > 1).expect("some class is tied");
        let members: Vec<usize> = (0..n).filter(|i| ranks[*i] == tied).collect();
        for (k, &m) in members.iter().enumerate() {
            if k > 0 && self.leaves >= LEAF_BUDGET {
                break;
            }
            let keys: Vec<(usize, bool)> = (0..n).map(|i| (ranks[i], i != m)).collect();
            self.explore(refine(self.graph, dense_ranks(&keys)));
        }
    }
}

/// Returns the canonical emission together with the rank of every atom.
fn canonical_form(graph: &MolecularGraph) -> (String, Vec<usize>) {
    if graph.is_empty() {
        return (String::new(), Vec::new());
    }
    let ranks = refine(graph, initial_ranks(graph));
    let mut search = TieSearch { graph, best: None, leaves: 0 };
    search.explore(ranks);
    search.best.expect("at least one leaf is visited")
}

/// A total order of the atoms (ranks `0..n`) that is invariant under
/// renumbering of the input atoms.
pub fn canonical_ranks(graph: &MolecularGraph) -> Vec<usize> {
    canonical_form(graph).1
}

/// Canonical SMILES of a single connected graph.
pub fn canonical_smiles(graph: &MolecularGraph) -> String {
    canonical_form(graph).0
}

pub fn canonicalize(smiles: &str) -> Result<String, SmilesError> {
    canonicalize_with(smiles, ParseOptions::default())
}

/// Parses, validates and re-emits every component canonically. Components
/// are sorted lexicographically and joined with ".".
pub fn canonicalize_with(smiles: &str, options: ParseOptions) -> Result<String, SmilesError> {
    let graphs = parse_with(smiles, options)?;
    canonicalize_graphs(&graphs)
}

pub fn canonicalize_graphs(graphs: &[MolecularGraph]) -> Result<String, SmilesError> {
    let mut parts = Vec::with_capacity(graphs.len());
    for g in graphs {
        validate_valence(g).map_err(SmilesError::Valence)?;
        parts.push(canonical_smiles(g));
    }
    parts.sort();
    Ok(parts.join("."))
}

fn atom_text(graph: &MolecularGraph, i: usize) -> String {
    let atom = &graph.atoms()[i];
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    let h = graph.hydrogen_count(i);
    if atom.element.is_organic_subset()
        && atom.charge == 0
        && atom.isotope.is_none()
        && atom.atom_map.is_none()
        && h == graph.default_implicit_h(i)
    {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = atom.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&symbol);
    match h {
        0 => {}
        1 => s.push('H'),
        n => s.push_str(&format!("H{n}")),
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{c}")),
        c => s.push_str(&format!("-{}", -c)),
    }
    if let Some(map) = atom.atom_map {
        s.push_str(&format!(":{map}"));
    }
    s.push(']');
    s
}

fn bond_text(graph: &MolecularGraph, bond: usize) -> &'static str {
    let b = &graph.bonds()[bond];
    let both_aromatic = graph.atoms()[b.atoms.0].aromatic && graph.atoms()[b.atoms.1].aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn ring_label(d: usize) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d}")
    }
}

struct Writer<'a> {
    graph: &'a MolecularGraph,
    children: Vec<Vec<(usize, usize)>>,
    openings: Vec<Vec<(usize, usize)>>,
    closings: Vec<Vec<usize>>,
    labels: Vec<usize>,
    in_use: BTreeSet<usize>,
    out: String,
}

impl Writer<'_> {
    fn emit(&mut self, u: usize) {
        self.out.push_str(&atom_text(self.graph, u));
        let mut closing: Vec<usize> = self.closings[u].clone();
        closing.sort_by_key(|b| self.labels[*b]);
        for b in &closing {
            self.out.push_str(&ring_label(self.labels[*b]));
        }
        for (_, b) in self.openings[u].clone() {
            let label = (1..).find(|d| !self.in_use.contains(d)).expect("unbounded labels");
            self.in_use.insert(label);
            self.labels[b] = label;
            self.out.push_str(bond_text(self.graph, b));
            self.out.push_str(&ring_label(label));
        }
        for b in &closing {
            self.in_use.remove(&self.labels[*b]);
        }
        let children = self.children[u].clone();
        for (k, (v, b)) in children.iter().enumerate() {
            let branch = k + 1 < children.len();
            if branch {
                self.out.push('(');
            }
            self.out.push_str(bond_text(self.graph, *b));
            self.emit(*v);
            if branch {
                self.out.push(')');
            }
        }
    }
}

/// Writes one connected graph as SMILES, starting from the lowest-ranked
/// atom and visiting neighbors in ascending rank. `ranks` must order the
/// atoms totally; any permutation yields a valid (non-canonical) string.
pub fn write_smiles(graph: &MolecularGraph, ranks: &[usize]) -> String {
    let n = graph.atom_count();
    if n == 0 {
        return String::new();
    }
    assert_eq!(ranks.len(), n, "one rank per atom");
    let start = (0..n).min_by_key(|i| ranks[*i]).expect("non-empty");

    let mut visited = vec![false; n];
    let mut ring_seen = vec![false; graph.bonds().len()];
    let mut children = vec![Vec::new(); n];
    let mut openings = vec![Vec::new(); n];
    let mut closings = vec![Vec::new(); n];

    // iterative DFS that mirrors the recursive visiting order
    let sorted_nbrs = |u: usize| {
        let mut nbrs = graph.neighbors(u).to_vec();
        nbrs.sort_by_key(|(v, _)| ranks[*v]);
        nbrs
    };
    let mut stack: Vec<(usize, Option<usize>, Vec<(usize, usize)>, usize)> = Vec::new();
    visited[start] = true;
    stack.push((start, None, sorted_nbrs(start), 0));
    while let Some(frame) = stack.last_mut() {
        let (u, parent_bond) = (frame.0, frame.1);
        if frame.3 == frame.2.len() {
            stack.pop();
            continue;
        }
        let (v, b) = frame.2[frame.3];
        frame.3 += 1;
        if Some(b) == parent_bond {
            continue;
        }
        if !visited[v] {
            visited[v] = true;
            children[u].push((v, b));
            stack.push((v, Some(b), sorted_nbrs(v), 0));
        } else if !ring_seen[b] {
            ring_seen[b] = true;
            openings[v].push((u, b));
            closings[u].push(b);
        }
    }
    for list in &mut openings {
        list.sort_by_key(|(partner, _)| ranks[*partner]);
    }

    let mut writer = Writer {
        graph,
        children,
        openings,
        closings,
        labels: vec![0; graph.bonds().len()],
        in_use: BTreeSet::new(),
        out: String::new(),
    };
    writer.emit(start);
    writer.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    fn graph(s: &str) -> MolecularGraph {
        parse(s).unwrap().remove(0)
    }

    #[test]
    fn single_atom() {
        assert_eq!(canonicalize("C").unwrap(), "C");
        assert_eq!(canonical_ranks(&graph("C")), vec![0]);
    }

    #[test]
    fn ethanol_orders_agree() {
        assert_eq!(canonicalize("OCC").unwrap(), canonicalize("CCO").unwrap());
        let ranks = canonical_ranks(&graph("CCO"));
        let distinct: BTreeSet<_> = ranks.iter().collect();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn benzene_is_deterministic() {
        let g = graph("c1ccccc1");
        let first = canonical_ranks(&g);
        assert_eq!(canonical_ranks(&g), first);
        let mut sorted = first.clone();
        sorted.sort();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        assert_eq!(canonicalize("c1ccccc1").unwrap(), "c1ccccc1");
    }

    #[test]
    fn printed_canonical_forms_are_fixed_points() {
        for s in [
            "Cc1cc(Cl)n(C)n1",
            "O=[N+]([O-])O",
            "O=S(=O)(O)O",
            "Cc1nn(C)c(Cl)c1[N+](=O)[O-]",
            "COc1cncc(Br)c1",
        ] {
            assert_eq!(canonicalize(s).unwrap(), s);
        }
    }

    #[test]
    fn mapped_nitric_acid_matches_plain_form() {
        let mapped = strip_atom_maps(&graph("[OH:14][N+:15]([O-:16])=[O:17]"));
        let plain = canonicalize("O=[N+]([O-])O").unwrap();
        assert_eq!(canonicalize_graphs(&[mapped]).unwrap(), plain);
    }

    #[test]
    fn strip_maps_unbrackets_where_possible() {
        let g = strip_atom_maps(&graph("[CH3:8][O-:16]"));
        assert_eq!(canonical_smiles(&g), "C[O-]");
        let plain = graph("CCO");
        assert_eq!(strip_atom_maps(&plain), plain);
    }

    #[test]
    fn components_are_sorted() {
        assert_eq!(canonicalize("[Na+].OCC").unwrap(), "CCO.[Na+]");
    }

    #[test]
    fn aromatic_single_bond_and_rings() {
        let biphenyl = canonicalize("c1ccc(cc1)-c1ccccc1").unwrap();
        assert!(biphenyl.contains('-'), "{biphenyl}");
        assert_eq!(canonicalize(&biphenyl).unwrap(), biphenyl);
        let spiro = canonicalize("C1CCC2(CC1)CCCC2").unwrap();
        assert_eq!(canonicalize(&spiro).unwrap(), spiro);
    }

    #[test]
    fn valence_errors_propagate() {
        assert!(matches!(canonicalize("CN(=O)=O"), Err(SmilesError::Valence(_))));
        assert!(matches!(canonicalize("C("), Err(SmilesError::UnbalancedParenthesis { .. })));
    }
}
