//! SMILES lexing, parsing, valence checks and canonicalization.

mod canon;
mod element;
mod graph;
mod parse;
mod token;
mod valence;

pub use canon::{
    canonical_ranks, canonical_smiles, canonicalize, canonicalize_graphs, canonicalize_with,
    strip_atom_maps, write_smiles,
};
pub use element::Element;
pub use graph::{Atom, Bond, BondOrder, MolecularGraph};
pub use parse::{parse, parse_with, ParseOptions, StereoPolicy};
pub use token::{detokenize, tokenize, Token, TOKEN_PATTERN};
pub use valence::{validate_valence, ValenceReport, ValenceViolation};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("unrecognized character {ch:?} at byte {position}")]
    UnrecognizedCharacter { position: usize, ch: char },
    #[error("unbalanced parenthesis at byte {position}")]
    UnbalancedParenthesis { position: usize },
    #[error("ring closure {ring} is never closed")]
    UnmatchedRingClosure { ring: u32 },
    #[error("empty component at byte {position}")]
    EmptyComponent { position: usize },
    #[error("malformed bracket atom at byte {position}")]
    MalformedBracketAtom { position: usize },
    #[error("stereochemistry at byte {position} is not supported")]
    UnsupportedStereo { position: usize },
    #[error("unsupported token {token:?} at byte {position}")]
    UnsupportedToken { position: usize, token: String },
    #[error("unexpected token {token:?} at byte {position}")]
    UnexpectedToken { position: usize, token: String },
    #[error("invalid bond between atoms {a} and {b}")]
    InvalidBond { a: usize, b: usize },
    #[error("valence violation: {0}")]
    Valence(ValenceReport),
}
