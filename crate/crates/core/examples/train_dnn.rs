//! Trains the power-control network on random networks and compares it with
//! the exact solver on held-out samples.
//!
//!     cargo run --release --example train_dnn -- [train_samples] [iterations]
//!
//! The defaults (20000 samples, 3000 iterations) finish in seconds; the full
//! protocol is 100000 and 10000.

use cellfree::config::ExperimentConfig;
use cellfree::harness::{
    evaluate, gen_dataset, summary_table, train_checkpoint, EvalOptions, GenerationMode, Method,
    SplitCounts,
};

fn main() -> cellfree::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let train = args.next().flatten().unwrap_or(20_000);
    let iterations = args.next().flatten().unwrap_or(3_000);

    let mut cfg = ExperimentConfig::default();
    cfg.train.iterations = iterations;
    let counts = SplitCounts { train, validation: 1000, test: 1000 };
    let splits = gen_dataset(&cfg.system, 7, GenerationMode::RandomStatic, counts)?;

    let ck = train_checkpoint(&splits.train, &splits.validation, &cfg)?;
    let best = ck.history.best_iteration;
    println!(
        "best validation loss {:.4} at iteration {best} of {iterations}",
        ck.history.best_validation_loss().unwrap_or(f64::NAN)
    );

    let mut docs = Vec::new();
    for method in [Method::Baseline, Method::Dnn, Method::MaxPower] {
        let options = EvalOptions::new(&cfg).with_checkpoint(&ck);
        docs.push(evaluate(method, &splits.test, &cfg, options)?.document());
    }
    print!("{}", summary_table(&docs));
    Ok(())
}
