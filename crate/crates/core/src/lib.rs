pub mod cli;
pub mod decoding;
pub mod hyperopt;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod reaction;
pub mod smiles;
pub mod toychem;
