//! Single-threaded per-sample cost of the exact solver, network inference
//! and online training for two network sizes.
//!
//!     cargo run --release --example timing

use cellfree::config::{ExperimentConfig, SystemConfig};
use cellfree::harness::{bench_timing, gen_dataset, train_checkpoint, GenerationMode, SplitCounts};

fn main() -> cellfree::Result<()> {
    for (m, k) in [(30, 5), (50, 10)] {
        let mut cfg = ExperimentConfig { system: SystemConfig::reference(m, k), ..Default::default() };
        // only the cost matters here, so a barely trained model will do
        cfg.train.iterations = 100;
        let counts = SplitCounts { train: 1000, validation: 100, test: 100 };
        let splits = gen_dataset(&cfg.system, 5, GenerationMode::RandomStatic, counts)?;
        let ck = train_checkpoint(&splits.train, &splits.validation, &cfg)?;
        print!("{}", bench_timing(&splits.test, &ck, &cfg, 100)?.render());
        println!();
    }
    Ok(())
}
