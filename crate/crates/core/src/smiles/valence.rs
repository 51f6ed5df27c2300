use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::MolecularGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValenceViolation {
    pub atom: usize,
    pub element: String,
    pub charge: i8,
    pub valence: u8,
    pub max_valence: u8,
}

/// Atoms whose explicit valence exceeds what the element permits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValenceReport {
    pub violations: Vec<ValenceViolation>,
}

impl fmt::Display for ValenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(
                f,
                "atom {} ({}, charge {}) has valence {} > {}",
                v.atom, v.element, v.charge, v.valence, v.max_valence
            )?;
        }
        Ok(())
    }
}

/// Checks every atom's bond orders plus hydrogens against the maximum
/// valence for its element and charge.
///
/// Aromatic bonds count as one each. Without kekulization the pi share of an
/// aromatic atom is unknown, so this is a lower bound on the true valence.
pub fn validate_valence(graph: &MolecularGraph) -> Result<(), ValenceReport> {
    let violations: Vec<_> = graph
        .atoms()
        .iter()
        .enumerate()
        .filter_map(|(i, atom)| {
            let max = atom.element.max_valence(atom.charge)?;
            let valence = graph.bond_valence(i) + graph.hydrogen_count(i);
            (valence > max).then(|| ValenceViolation {
                atom: i,
                element: atom.element.symbol().to_string(),
                charge: atom.charge,
                valence,
                max_valence: max,
            })
        })
        .collect();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ValenceReport { violations })
    }
}
