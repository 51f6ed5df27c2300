//! Reaction strings, reagent separation, deduplication, splitting and the
//! token encoding fed to the model.

mod encode;
mod pipeline;
mod split;
mod vocab;

pub use encode::{build_reagent_vocab, encode_example, ReagentSet, REAGENT_PREFIX};
pub use pipeline::{preprocess_lines, PreparedData, PreprocessOptions, PreprocessReport, SplitSizes};
pub use split::{split_by_key, split_dataset, DatasetSplit};
pub use vocab::{build_token_vocab, EncodedExample, Vocabulary, BOS, EOS, PAD, RESERVED, UNK};

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::smiles::{canonical_smiles, parse_with, strip_atom_maps, validate_valence, MolecularGraph, ParseOptions, SmilesError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Reactants,
    Reagents,
    Products,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Reactants => "reactants",
            Field::Reagents => "reagents",
            Field::Products => "products",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReactionError {
    #[error("expected two '>' separators, found {separators}")]
    MalformedReaction { separators: usize },
    #[error("reaction has no product")]
    NoProduct,
    #[error("{field} molecule {index}: {source}")]
    Molecule { field: Field, index: usize, source: SmilesError },
    #[error("no product atom carries an atom map")]
    MissingAtomMaps,
    #[error("expected a single product, found {count}")]
    MultipleProducts { count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reaction {
    pub reactants: Vec<MolecularGraph>,
    pub reagents: Vec<MolecularGraph>,
    pub products: Vec<MolecularGraph>,
    pub raw: String,
}

fn parse_field(text: &str, field: Field, options: ParseOptions) -> Result<Vec<MolecularGraph>, ReactionError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (index, part) in text.split('.').enumerate() {
        let wrap = |source| ReactionError::Molecule { field, index, source };
        if part.is_empty() {
            return Err(wrap(SmilesError::EmptyComponent { position: 0 }));
        }
        out.extend(parse_with(part, options).map_err(wrap)?);
    }
    Ok(out)
}

pub fn parse_reaction(line: &str) -> Result<Reaction, ReactionError> {
    parse_reaction_with(line, ParseOptions::default())
}

/// Parses "reactants>reagents>products"; an empty middle field means no
/// reagents.
pub fn parse_reaction_with(line: &str, options: ParseOptions) -> Result<Reaction, ReactionError> {
    let fields: Vec<&str> = line.split('>').collect();
    if fields.len() != 3 {
        return Err(ReactionError::MalformedReaction { separators: fields.len() - 1 });
    }
    let products = parse_field(fields[2], Field::Products, options)?;
    if products.is_empty() {
        return Err(ReactionError::NoProduct);
    }
    Ok(Reaction {
        reactants: parse_field(fields[0], Field::Reactants, options)?,
        reagents: parse_field(fields[1], Field::Reagents, options)?,
        products,
        raw: line.to_string(),
    })
}

fn atom_maps(graph: &MolecularGraph) -> impl Iterator<Item = u32> + '_ {
    graph.atoms().iter().filter_map(|a| a.atom_map)
}

/// Reclassifies input-side molecules: those sharing an atom map with the
/// product are reactants, all others are reagents.
pub fn separate_reagents(rxn: &Reaction) -> Result<Reaction, ReactionError> {
    let product_maps: HashSet<u32> = rxn.products.iter().flat_map(atom_maps).collect();
    if product_maps.is_empty() {
        return Err(ReactionError::MissingAtomMaps);
    }
    let (reactants, reagents) = rxn
        .reactants
        .iter()
        .chain(&rxn.reagents)
        .cloned()
        .partition(|g| atom_maps(g).any(|m| product_maps.contains(&m)));
    Ok(Reaction { reactants, reagents, products: rxn.products.clone(), raw: rxn.raw.clone() })
}

/// A reaction with maps stripped and every molecule canonicalized; each
/// field is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalReaction {
    pub reactants: Vec<String>,
    pub reagents: Vec<String>,
    pub products: Vec<String>,
}

impl CanonicalReaction {
    pub fn reactant_key(&self) -> String {
        self.reactants.join(".")
    }

    /// Full reaction string, used as the deduplication key.
    pub fn key(&self) -> String {
        format!("{}>{}>{}", self.reactants.join("."), self.reagents.join("."), self.products.join("."))
    }
}

fn canonical_field(graphs: &[MolecularGraph], field: Field) -> Result<Vec<String>, ReactionError> {
    let mut out = graphs
        .iter()
        .enumerate()
        .map(|(index, g)| {
            let stripped = strip_atom_maps(g);
            validate_valence(&stripped)
                .map_err(|r| ReactionError::Molecule { field, index, source: SmilesError::Valence(r) })?;
            Ok(canonical_smiles(&stripped))
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.sort();
    Ok(out)
}

pub fn normalize(rxn: &Reaction) -> Result<CanonicalReaction, ReactionError> {
    Ok(CanonicalReaction {
        reactants: canonical_field(&rxn.reactants, Field::Reactants)?,
        reagents: canonical_field(&rxn.reagents, Field::Reagents)?,
        products: canonical_field(&rxn.products, Field::Products)?,
    })
}

/// Keeps the first reaction for every normalized key, preserving order.
pub fn deduplicate<I>(reactions: I) -> impl Iterator<Item = CanonicalReaction>
where
    I: IntoIterator<Item = CanonicalReaction>,
{
    let mut seen = BTreeSet::new();
    reactions.into_iter().filter(move |r| seen.insert(r.key()))
}
