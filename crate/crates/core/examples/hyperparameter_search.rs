//! Tree-surrogate search over the model space with a closed-form objective
//! standing in for training.

use rxn_seq2seq::hyperopt::{leaderboard, run_search, synthetic_objective, SearchOptions, SearchSpace};

fn main() {
    let space = SearchSpace::default();
    let options = SearchOptions { budget: 16, seed: 7, ..SearchOptions::default() };
    let result = run_search(&space, &options, None, |config, _epochs| Ok(synthetic_objective(config))).expect("valid space");
    print!("{}", leaderboard(&result.history, 5));
    let best = &result.best.config;
    println!("best: {} units, lr {:.3}, objective {:.4}", best.encoder_units, best.lr0, result.best.objective);
}
