//! Compare the analytic gradient of the teacher-forced loss with finite
//! differences in double precision.

use rxn_seq2seq::model::{ModelConfig, Seq2Seq};
use rxn_seq2seq::numerics::{grad_check, DEFAULT_EPS};
use rxn_seq2seq::reaction::EncodedExample;

fn main() {
    let config = ModelConfig { encoder_units: 4, decoder_units: 8, embedding_dim: 5, init_scale: 0.5, ..ModelConfig::default() };
    let model = Seq2Seq::<f64>::new(config, 9).expect("valid config");
    let batch = vec![
        EncodedExample { source_ids: vec![4, 5, 6], target_ids: vec![1, 7, 8, 2] },
        EncodedExample { source_ids: vec![8, 4], target_ids: vec![1, 5, 2] },
    ];
    let (loss, tokens, grads) = model.loss_and_grads(&batch, None).expect("forward/backward");
    let mut params = model.params().clone();
    let report = grad_check(
        &mut params,
        &grads,
        |p| {
            let mut m = model.clone();
            *m.params_mut() = p.clone();
            m.teacher_forced_loss(&batch).unwrap().0
        },
        DEFAULT_EPS,
        Some(500),
        1,
    );
    println!("loss {loss:.6} over {tokens} tokens");
    println!("{} coordinates, max relative error {:.2e} at {:?}", report.coords_checked, report.max_relative_error, report.worst);
}
