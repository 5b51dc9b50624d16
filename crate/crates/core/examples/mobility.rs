//! Moving users over grid-placed APs: generates a short trajectory, trains
//! on its first part and evaluates all methods on the rest.
//!
//!     cargo run --release --example mobility -- [seconds]

use cellfree::config::ExperimentConfig;
use cellfree::harness::{
    evaluate, gen_dataset, summary_table, train_checkpoint, EvalOptions, GenerationMode, Method,
    SplitCounts,
};

fn main() -> cellfree::Result<()> {
    let seconds: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let mut cfg = ExperimentConfig::default();
    cfg.train.iterations = 2000;
    let test = (seconds / 12).max(10);
    let counts = SplitCounts { train: seconds - 2 * test, validation: test, test };
    let splits = gen_dataset(&cfg.system, 11, GenerationMode::GridMobile, counts)?;

    for i in [0, 1, 2, 10] {
        if let Some(p) = splits.train.user_positions(i) {
            let users: Vec<String> = p.iter().map(|u| format!("({:.0}, {:.0})", u[0], u[1])).collect();
            println!("t = {i:>2} s: {}", users.join(" "));
        }
    }

    let ck = train_checkpoint(&splits.train, &splits.validation, &cfg)?;
    let mut docs = Vec::new();
    for method in [Method::Baseline, Method::Dnn, Method::DnnOnline] {
        let options = EvalOptions::new(&cfg).with_checkpoint(&ck);
        docs.push(evaluate(method, &splits.test, &cfg, options)?.document());
    }
    print!("{}", summary_table(&docs));
    Ok(())
}
