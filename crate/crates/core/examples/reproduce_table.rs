//! Full static protocol at 30 APs / 5 users: data generation, training,
//! every method on the test split, reports written to an output directory.
//!
//!     cargo run --release --example reproduce_table -- [out_dir]
//!
//! Takes a few minutes; the summary table is printed and saved as table.md.

use std::path::PathBuf;

use cellfree::config::ExperimentConfig;
use cellfree::harness::{
    evaluate, gen_dataset, summary_table, train_checkpoint, EvalOptions, GenerationMode, Method,
    SplitCounts,
};

fn main() -> cellfree::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "table-run".into()));
    let cfg = ExperimentConfig::default();
    let mode = GenerationMode::RandomStatic;
    let splits = gen_dataset(&cfg.system, 7, mode, SplitCounts::default_for(mode))?;
    splits.save(&out, true)?;

    let ck = train_checkpoint(&splits.train, &splits.validation, &cfg)?;
    ck.save(&out.join("model.cfck"), true)?;

    let mut docs = Vec::new();
    for method in [Method::Baseline, Method::Dnn, Method::DnnOnline, Method::MaxPower] {
        let options = EvalOptions::new(&cfg).with_checkpoint(&ck);
        let report = evaluate(method, &splits.test, &cfg, options)?;
        report.save(&out, true)?;
        println!("{method}: {:.1} s", report.timing.total_seconds);
        docs.push(report.document());
    }
    let table = summary_table(&docs);
    print!("{table}");
    std::fs::write(out.join("table.md"), table)?;
    Ok(())
}
