//! Inference: beam search and greedy decoding, post-processing of decoded
//! token sequences, prediction confidence and attention export.

mod beam;
mod output;

pub use beam::{beam_search, beam_search_many, greedy_decode, BeamHypothesis, DecodeOptions, StepModel, StepScores};
pub use output::{
    confidence_curve, curve_to_csv, default_thresholds, export_attention, format_prediction_line, parse_prediction_line,
    postprocess_prediction, AttentionDocument, Candidate, CurvePoint, Postprocessed, PredictionRecord,
};
