use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellfree::config::ExperimentConfig;
use cellfree::harness::{
    audit, bench_timing, evaluate, gen_dataset, load_document, summary_table, train_checkpoint,
    Checkpoint, Dataset, EvalOptions, GenerationMode, Method, RunReport, SplitCounts, SplitKind,
};
use cellfree::{Error, Result};

/// Cell-free massive MIMO uplink max-min power control lab.
#[derive(Parser)]
#[command(name = "cellfree", version)]
struct Cli {
    /// TOML experiment file ([system] and [train] tables).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset seed for gen-data; overrides train.seed for train.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Worker threads for evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/validation/test datasets.
    GenData {
        #[arg(long, default_value = "random-static")]
        mode: GenerationMode,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        validation: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
    },
    /// Train the power-control network; writes model.cfck and history.csv.
    Train {
        /// Directory holding the datasets (defaults to --out).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Evaluate one method on a dataset split.
    Eval {
        #[arg(long)]
        method: Method,
        #[command(flatten)]
        target: Target,
    },
    /// Evaluate the network with per-sample online training.
    Finetune {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Solve max-min power control exactly on a dataset split.
    SolveBaseline {
        #[command(flatten)]
        target: Target,
        /// Solve every training sample instead of the first --limit.
        #[arg(long)]
        full_train: bool,
    },
    /// Time baseline, DNN and online DNN on the test split (single thread).
    Bench {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Tabulate every report summary in --out.
    Report,
    /// Recompute the rates of a report through the rate model.
    Audit {
        /// Report summary (.json); the .csv beside it is read too.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Target {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: SplitKind,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Use only the first N samples.
    #[arg(long)]
    limit: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    let out = cli.out.as_path();
    let data_dir = |d: &Option<PathBuf>| d.clone().unwrap_or_else(|| out.to_path_buf());
    let checkpoint_at = |c: &Option<PathBuf>| c.clone().unwrap_or_else(|| out.join("model.cfck"));
    let ctx = Ctx {
        out,
        threads: cli.threads,
        force: cli.force,
    };

    match cli.command {
        Command::GenData {
            mode,
            train,
            validation,
            test,
        } => {
            let d = SplitCounts::default_for(mode);
            let counts = SplitCounts {
                train: train.unwrap_or(d.train),
                validation: validation.unwrap_or(d.validation),
                test: test.unwrap_or(d.test),
            };
            let splits = gen_dataset(&cfg.system, cli.seed.unwrap_or(0), mode, counts)?;
            for path in splits.save(out, cli.force)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Train { data, iterations } => {
            if let Some(n) = iterations {
                cfg.train.iterations = n;
            }
            let dir = data_dir(&data);
            let train = Dataset::load(&SplitKind::Train.file_in(&dir))?;
            let validation = Dataset::load(&SplitKind::Validation.file_in(&dir))?;
            let path = out.join("model.cfck");
            if !cli.force && path.exists() {
                return Err(Error::AlreadyExists(path));
            }
            let ck = train_checkpoint(&train, &validation, &cfg)?;
            ck.save(&path, true)?;
            std::fs::write(out.join("history.csv"), ck.history_csv())?;
            println!(
                "wrote {} (best validation loss {:.4} at iteration {})",
                path.display(),
                ck.history.best_validation_loss().unwrap_or(f64::NAN),
                ck.history.best_iteration
            );
        }
        Command::Eval { method, target } => run_eval(&ctx, &cfg, method, &target, data_dir, checkpoint_at)?,
        Command::Finetune {
            target,
            iterations,
            learning_rate,
        } => {
            if let Some(n) = iterations {
                cfg.train.finetune_iterations = n;
            }
            if let Some(lr) = learning_rate {
                cfg.train.finetune_learning_rate = lr;
            }
            run_eval(&ctx, &cfg, Method::DnnOnline, &target, data_dir, checkpoint_at)?
        }
        Command::SolveBaseline { mut target, full_train } => {
            if target.split == SplitKind::Train {
                if full_train {
                    eprintln!("warning: solving every training sample exactly can take a long time");
                    target.limit = None;
                } else {
                    target.limit = Some(target.limit.unwrap_or(1000));
                }
            }
            run_eval(&ctx, &cfg, Method::Baseline, &target, data_dir, checkpoint_at)?
        }
        Command::Bench {
            data,
            checkpoint,
            samples,
        } => {
            let test = Dataset::load(&SplitKind::Test.file_in(&data_dir(&data)))?;
            let ck = Checkpoint::load(&checkpoint_at(&checkpoint))?;
            let table = bench_timing(&test, &ck, &cfg, samples)?;
            print!("{}", table.render());
            let path = out.join(format!("timing-m{}-k{}.json", cfg.system.num_aps, cfg.system.num_users));
            write_new(&path, serde_json::to_string_pretty(&table).expect("serializable").as_bytes(), cli.force)?;
            println!("wrote {}", path.display());
        }
        Command::Report => {
            let mut docs = Vec::new();
            let mut entries: Vec<PathBuf> = std::fs::read_dir(out)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json") && p.with_extension("csv").exists())
                .collect();
            entries.sort();
            for p in entries {
                docs.push(load_document(&p)?);
            }
            if docs.is_empty() {
                return Err(Error::MissingArtifact(format!("run reports in {}", out.display())));
            }
            let table = summary_table(&docs);
            print!("{table}");
            std::fs::write(out.join("table.md"), table)?;
        }
        Command::Audit { report, data } => {
            let rep = RunReport::load(&report)?;
            let split: SplitKind = rep.provenance.split.parse()?;
            let ds = Dataset::load(&split.file_in(&data_dir(&data)))?;
            let outcome = audit(&rep, &ds, &rep.provenance.config)?;
            println!(
                "audited {} samples: max relative rate error {:e}, throughput error {:e}",
                outcome.samples, outcome.max_rate_error, outcome.max_throughput_error
            );
            if !outcome.passed() {
                return Err(Error::Format {
                    what: "run report",
                    reason: "stored rates disagree with the rate model".into(),
                });
            }
        }
    }
    Ok(())
}

struct Ctx<'a> {
    out: &'a Path,
    threads: usize,
    force: bool,
}

fn run_eval(
    ctx: &Ctx<'_>,
    cfg: &ExperimentConfig,
    method: Method,
    target: &Target,
    data_dir: impl Fn(&Option<PathBuf>) -> PathBuf,
    checkpoint_at: impl Fn(&Option<PathBuf>) -> PathBuf,
) -> Result<()> {
    let mut ds = Dataset::load(&target.split.file_in(&data_dir(&target.data)))?;
    if let Some(n) = target.limit {
        ds = ds.head(n);
    }
    let ck = if method.needs_model() {
        Some(Checkpoint::load(&checkpoint_at(&target.checkpoint))?)
    } else {
        None
    };
    let mut options = EvalOptions::new(cfg).with_threads(ctx.threads);
    if let Some(c) = &ck {
        options = options.with_checkpoint(c);
    }
    let report = evaluate(method, &ds, cfg, options)?;
    let (csv, json) = report.save(ctx.out, ctx.force)?;
    println!(
        "{} on {} ({} samples): average min-rate {:.4} bit/s/Hz, 95%-likely net throughput {:.3} Mbit/s",
        method,
        report.provenance.split,
        report.summary.samples,
        report.summary.average_min_rate,
        report.summary.p5_net_throughput / 1e6
    );
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn write_new(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::AlreadyExists(path.to_path_buf()));
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
