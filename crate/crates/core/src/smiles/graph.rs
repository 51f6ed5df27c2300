use super::element::Element;
use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's valence. Aromatic bonds count as one; the
    /// extra pi electron is accounted for per atom.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i8,
    /// `None` means the hydrogen count is implied by the default valence.
    pub explicit_h: Option<u8>,
    pub isotope: Option<u16>,
    pub atom_map: Option<u32>,
}

impl Atom {
    /// An unbracketed organic-subset atom.
    pub fn organic(element: Element, aromatic: bool) -> Atom {
        Atom { element, aromatic, charge: 0, explicit_h: None, isotope: None, atom_map: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub atoms: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.atoms.0 == atom {
            self.atoms.1
        } else {
            self.atoms.0
        }
    }
}

/// Atoms and bonds of one connected molecule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, SmilesError> {
        let mut graph = MolecularGraph::new();
        for atom in atoms {
            graph.add_atom(atom);
        }
        for bond in bonds {
            graph.add_bond(bond.atoms.0, bond.atoms.1, bond.order)?;
        }
        Ok(graph)
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Vec::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, SmilesError> {
        if a == b || a >= self.atoms.len() || b >= self.atoms.len() || self.bond_between(a, b).is_some() {
            return Err(SmilesError::InvalidBond { a, b });
        }
        let id = self.bonds.len();
        self.bonds.push(Bond { atoms: (a, b), order });
        self.adjacency[a].push((b, id));
        self.adjacency[b].push((a, id));
        Ok(id)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atoms_mut(&mut self) -> &mut [Atom] {
        &mut self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|(_, id)| &self.bonds[*id])
    }

    /// Sum of bond valences with aromatic bonds counted as one.
    pub fn bond_valence(&self, atom: usize) -> u8 {
        self.adjacency[atom].iter().map(|(_, id)| self.bonds[*id].order.valence()).sum()
    }

    /// Hydrogens an unbracketed atom at this position would carry.
    pub fn default_implicit_h(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        let mut used = self.bond_valence(atom);
        if a.aromatic {
            used += 1;
        }
        a.element
            .default_valences()
            .iter()
            .find(|v| **v >= used)
            .map_or(0, |v| v - used)
    }

    pub fn hydrogen_count(&self, atom: usize) -> u8 {
        self.atoms[atom].explicit_h.unwrap_or_else(|| self.default_implicit_h(atom))
    }

    /// Returns a copy with atom `i` moved to index `perm[i]`. Bonds keep
    /// their relative order.
    pub fn permuted(&self, perm: &[usize]) -> MolecularGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![None; self.atoms.len()];
        for (i, atom) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = Some(atom.clone());
        }
        let mut graph = MolecularGraph::new();
        for atom in atoms {
            graph.add_atom(atom.expect("perm must be a permutation"));
        }
        for bond in &self.bonds {
            graph
                .add_bond(perm[bond.atoms.0], perm[bond.atoms.1], bond.order)
                .expect("permutation preserves bond validity");
        }
        graph
    }

    /// Splits into connected components, preserving atom order within each.
    pub(crate) fn into_components(self) -> Vec<MolecularGraph> {
        let n = self.atoms.len();
        let mut component = vec![usize::MAX; n];
        let mut count = 0;
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            component[start] = count;
            while let Some(a) = stack.pop() {
                for &(b, _) in &self.adjacency[a] {
                    if component[b] == usize::MAX {
                        component[b] = count;
                        stack.push(b);
                    }
                }
            }
            count += 1;
        }
        if count <= 1 {
            return if n == 0 { Vec::new() } else { vec![self] };
        }
        let mut local = vec![0; n];
        let mut parts: Vec<MolecularGraph> = (0..count).map(|_| MolecularGraph::new()).collect();
        for (i, atom) in self.atoms.into_iter().enumerate() {
            local[i] = parts[component[i]].add_atom(atom);
        }
        for bond in &self.bonds {
            let c = component[bond.atoms.0];
            parts[c]
                .add_bond(local[bond.atoms.0], local[bond.atoms.1], bond.order)
                .expect("component bonds are valid");
        }
        parts
    }

    pub(crate) fn remove_atoms(&self, remove: &[bool]) -> MolecularGraph {
        let mut local = vec![usize::MAX; self.atoms.len()];
        let mut graph = MolecularGraph::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if !remove[i] {
                local[i] = graph.add_atom(atom.clone());
            }
        }
        for bond in &self.bonds {
            let (a, b) = bond.atoms;
            if !remove[a] && !remove[b] {
                graph.add_bond(local[a], local[b], bond.order).expect("subgraph bonds are valid");
            }
        }
        graph
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_and_duplicate_bonds() {
        let mut g = MolecularGraph::new();
        let a = g.add_atom(Atom::organic(Element::C, false));
        let b = g.add_atom(Atom::organic(Element::C, false));
        assert!(g.add_bond(a, a, BondOrder::Single).is_err());
        g.add_bond(a, b, BondOrder::Single).unwrap();
        assert!(g.add_bond(b, a, BondOrder::Double).is_err());
    }

    #[test]
    fn implicit_hydrogens() {
        let mut g = MolecularGraph::new();
        let c = g.add_atom(Atom::organic(Element::C, false));
        assert_eq!(g.hydrogen_count(c), 4);
        let o = g.add_atom(Atom::organic(Element::O, false));
        g.add_bond(c, o, BondOrder::Double).unwrap();
        assert_eq!(g.hydrogen_count(c), 2);
        assert_eq!(g.hydrogen_count(o), 0);
    }
}
