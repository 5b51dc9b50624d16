//! Per-sample online training: a briefly trained network is refined on each
//! test network for a fixed number of Adam steps.
//!
//!     cargo run --release --example online_finetune -- [steps]

use cellfree::config::ExperimentConfig;
use cellfree::dnn::{online_finetune, AdamConfig};
use cellfree::harness::{gen_dataset, train_checkpoint, GenerationMode, SplitCounts};
use cellfree::solver::solve_maxmin;

fn main() -> cellfree::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let mut cfg = ExperimentConfig::default();
    cfg.train.iterations = 1000;
    let counts = SplitCounts { train: 5000, validation: 500, test: 10 };
    let splits = gen_dataset(&cfg.system, 3, GenerationMode::RandomStatic, counts)?;
    let ck = train_checkpoint(&splits.train, &splits.validation, &cfg)?;

    let adam = AdamConfig::from(&cfg.train);
    println!("{:>6} {:>9} {:>9} {:>9} {:>5}", "sample", "offline", "online", "exact", "best");
    for (i, sample) in splits.test.training_samples(&cfg.system)?.iter().enumerate() {
        let out = online_finetune(&ck.model, sample, steps, cfg.train.finetune_learning_rate, adam)?;
        let exact = solve_maxmin(&sample.coeffs)?;
        println!(
            "{:>6} {:>9.4} {:>9.4} {:>9.4} {:>5}",
            i,
            out.initial_min_rate,
            out.min_rate,
            exact.rate_star,
            out.best_iteration
        );
    }
    Ok(())
}
