use std::collections::BTreeMap;

use super::element::Element;
use super::graph::{Atom, BondOrder, MolecularGraph};
use super::token::tokenize_spans;
use super::SmilesError;

/// How stereo descriptors ("/", "\\", "@", "@@") are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StereoPolicy {
    #[default]
    Reject,
    /// Drop stereo marks and parse the constitution only.
    Ignore,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub stereo: StereoPolicy,
}

pub fn parse(smiles: &str) -> Result<Vec<MolecularGraph>, SmilesError> {
    parse_with(smiles, ParseOptions::default())
}

struct RingOpen {
    atom: usize,
    bond: Option<BondOrder>,
}

pub fn parse_with(smiles: &str, options: ParseOptions) -> Result<Vec<MolecularGraph>, SmilesError> {
    let tokens = tokenize_spans(smiles)?;
    let mut graph = MolecularGraph::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(usize, BondOrder)> = None;
    let mut branches: Vec<(usize, Option<usize>)> = Vec::new();
    let mut rings: BTreeMap<u32, RingOpen> = BTreeMap::new();

    for &(pos, tok) in &tokens {
        let unexpected = || SmilesError::UnexpectedToken { position: pos, token: tok.to_string() };
        let first = tok.as_bytes()[0];
        match first {
            b'[' => {
                let atom = parse_bracket(tok, pos, options)?;
                let id = graph.add_atom(atom);
                connect(&mut graph, &mut prev, &mut pending, id)?;
            }
            b'B' | b'C' | b'N' | b'O' | b'S' | b'P' | b'F' | b'I' => {
                let element = Element::from_symbol(tok).ok_or_else(unexpected)?;
                let id = graph.add_atom(Atom::organic(element, false));
                connect(&mut graph, &mut prev, &mut pending, id)?;
            }
            b'b' | b'c' | b'n' | b'o' | b's' | b'p' => {
                let upper = tok.to_ascii_uppercase();
                let element = Element::from_symbol(&upper).ok_or_else(unexpected)?;
                let id = graph.add_atom(Atom::organic(element, true));
                connect(&mut graph, &mut prev, &mut pending, id)?;
            }
            b'(' => {
                if prev.is_none() || pending.is_some() {
                    return Err(unexpected());
                }
                branches.push((pos, prev));
            }
            b')' => {
                if pending.is_some() {
                    return Err(unexpected());
                }
                match branches.pop() {
                    Some((_, atom)) => prev = atom,
                    None => return Err(SmilesError::UnbalancedParenthesis { position: pos }),
                }
            }
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                let order = match first {
                    b'-' => BondOrder::Single,
                    b'=' => BondOrder::Double,
                    b'#' => BondOrder::Triple,
                    b':' => BondOrder::Aromatic,
                    _ => {
                        if options.stereo == StereoPolicy::Reject {
                            return Err(SmilesError::UnsupportedStereo { position: pos });
                        }
                        BondOrder::Single
                    }
                };
                if prev.is_none() || pending.is_some() {
                    return Err(unexpected());
                }
                pending = Some((pos, order));
            }
            b'0'..=b'9' | b'%' => {
                let digits = tok.trim_start_matches('%');
                let ring: u32 = digits.parse().map_err(|_| unexpected())?;
                let atom = prev.ok_or_else(unexpected)?;
                let bond = pending.take().map(|(_, o)| o);
                match rings.remove(&ring) {
                    Some(open) => {
                        let order = match (open.bond, bond) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(SmilesError::InvalidBond { a: open.atom, b: atom })
                            }
                            (Some(a), _) | (None, Some(a)) => a,
                            (None, None) => default_order(&graph, open.atom, atom),
                        };
                        graph.add_bond(open.atom, atom, order)?;
                    }
                    None => {
                        rings.insert(ring, RingOpen { atom, bond });
                    }
                }
            }
            b'.' => {
                if prev.is_none() || pending.is_some() {
                    return Err(SmilesError::EmptyComponent { position: pos });
                }
                if let Some(&(open, _)) = branches.last() {
                    return Err(SmilesError::UnbalancedParenthesis { position: open });
                }
                prev = None;
            }
            _ => {
                return Err(SmilesError::UnsupportedToken { position: pos, token: tok.to_string() });
            }
        }
    }

    if let Some(&(open, _)) = branches.last() {
        return Err(SmilesError::UnbalancedParenthesis { position: open });
    }
    if let Some((&ring, _)) = rings.iter().next() {
        return Err(SmilesError::UnmatchedRingClosure { ring });
    }
    if let Some((pos, _)) = pending {
        return Err(SmilesError::UnexpectedToken { position: pos, token: smiles[pos..].to_string() });
    }
    if prev.is_none() && !smiles.is_empty() {
        return Err(SmilesError::EmptyComponent { position: smiles.len() });
    }

    Ok(fold_hydrogens(graph).into_components())
}

fn default_order(graph: &MolecularGraph, a: usize, b: usize) -> BondOrder {
    if graph.atoms()[a].aromatic && graph.atoms()[b].aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

fn connect(
    graph: &mut MolecularGraph,
    prev: &mut Option<usize>,
    pending: &mut Option<(usize, BondOrder)>,
    atom: usize,
) -> Result<(), SmilesError> {
    if let Some(p) = *prev {
        let order = pending.take().map_or_else(|| default_order(graph, p, atom), |(_, o)| o);
        graph.add_bond(p, atom, order)?;
    }
    *prev = Some(atom);
    Ok(())
}

fn parse_bracket(tok: &str, pos: usize, options: ParseOptions) -> Result<Atom, SmilesError> {
    let malformed = || SmilesError::MalformedBracketAtom { position: pos };
    let inner = &tok[1..tok.len() - 1];
    let bytes = inner.as_bytes();
    let mut i = 0;

    let digits_at = |start: usize| bytes[start..].iter().take_while(|b| b.is_ascii_digit()).count();

    let n = digits_at(0);
    let isotope = if n > 0 {
        Some(inner[..n].parse::<u16>().map_err(|_| malformed())?)
    } else {
        None
    };
    i += n;

    let rest = &inner[i..];
    let (element, aromatic, len) = if rest.starts_with('*') {
        return Err(SmilesError::UnsupportedToken { position: pos, token: tok.to_string() });
    } else if let Some(c) = rest.chars().next().filter(char::is_ascii_uppercase) {
        let two = rest.get(..2).filter(|s| s.as_bytes()[1].is_ascii_lowercase());
        match two.and_then(Element::from_symbol) {
            Some(e) => (e, false, 2),
            None => (Element::from_symbol(&c.to_string()).ok_or_else(malformed)?, false, 1),
        }
    } else if let Some(c) = rest.chars().next().filter(char::is_ascii_lowercase) {
        let e = Element::from_symbol(&c.to_ascii_uppercase().to_string())
            .filter(|e| e.may_be_aromatic())
            .ok_or_else(malformed)?;
        (e, true, 1)
    } else {
        return Err(malformed());
    };
    i += len;

    if bytes.get(i) == Some(&b'@') {
        if options.stereo == StereoPolicy::Reject {
            return Err(SmilesError::UnsupportedStereo { position: pos + 1 + i });
        }
        while bytes.get(i) == Some(&b'@') {
            i += 1;
        }
        for class in ["TH", "AL", "SP", "TB", "OH"] {
            if inner[i..].starts_with(class) {
                i += 2 + digits_at(i + 2);
                break;
            }
        }
    }

    let mut explicit_h = 0u8;
    if bytes.get(i) == Some(&b'H') {
        i += 1;
        let n = digits_at(i);
        explicit_h = if n > 0 { inner[i..i + n].parse().map_err(|_| malformed())? } else { 1 };
        i += n;
    }

    let mut charge: i8 = 0;
    if let Some(&sign @ (b'+' | b'-')) = bytes.get(i) {
        let unit: i8 = if sign == b'+' { 1 } else { -1 };
        i += 1;
        let n = digits_at(i);
        if n > 0 {
            let magnitude: i8 = inner[i..i + n].parse().map_err(|_| malformed())?;
            charge = unit * magnitude;
            i += n;
        } else {
            charge = unit;
            while bytes.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
    }

    let mut atom_map = None;
    if bytes.get(i) == Some(&b':') {
        i += 1;
        let n = digits_at(i);
        if n == 0 {
            return Err(malformed());
        }
        atom_map = Some(inner[i..i + n].parse().map_err(|_| malformed())?);
        i += n;
    }

    if i != bytes.len() {
        return Err(malformed());
    }
    Ok(Atom { element, aromatic, charge, explicit_h: Some(explicit_h), isotope, atom_map })
}

/// Removes plain explicit hydrogen atoms and adds them to their heavy-atom
/// neighbor's hydrogen count.
fn fold_hydrogens(graph: MolecularGraph) -> MolecularGraph {
    let n = graph.atom_count();
    let foldable = |i: usize| {
        let a = &graph.atoms()[i];
        a.element == Element::H
            && a.charge == 0
            && a.isotope.is_none()
            && a.explicit_h.unwrap_or(0) == 0
            && graph.degree(i) == 1
            && graph.atoms()[graph.neighbors(i)[0].0].element != Element::H
    };
    let remove: Vec<bool> = (0..n).map(foldable).collect();
    if !remove.iter().any(|r| *r) {
        return graph;
    }
    let mut totals: Vec<u8> = (0..n).map(|i| graph.hydrogen_count(i)).collect();
    for i in (0..n).filter(|i| remove[*i]) {
        totals[graph.neighbors(i)[0].0] += 1;
    }
    let mut updated = graph.clone();
    for i in 0..n {
        if !remove[i] && graph.neighbors(i).iter().any(|(nb, _)| remove[*nb]) {
            updated.atoms_mut()[i].explicit_h = Some(totals[i]);
        }
    }
    updated.remove_atoms(&remove)
}
