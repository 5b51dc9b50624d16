use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checkpoint::Checkpoint;
use super::dataset::Dataset;
use super::report::{FinetuneSettings, Method, Provenance, RunReport, SampleRecord, CONSISTENCY_TOL};
use crate::config::{hex, ExperimentConfig, SystemConfig};
use crate::dnn::{online_finetune, AdamConfig, Mlp, TrainingSample};
use crate::error::{Error, Result};
use crate::rate::{self, PowerAllocation, RateContext};
use crate::solver::{max_power_allocation, solve_maxmin, SinrCoefficients};

/// Everything `evaluate` may need besides the dataset.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions<'a> {
    pub checkpoint: Option<&'a Checkpoint>,
    /// Worker threads; `0` uses rayon's default.
    pub threads: usize,
    pub finetune_iterations: usize,
    pub finetune_learning_rate: f64,
}

impl<'a> EvalOptions<'a> {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        EvalOptions {
            checkpoint: None,
            threads: 0,
            finetune_iterations: cfg.train.finetune_iterations,
            finetune_learning_rate: cfg.train.finetune_learning_rate,
        }
    }

    pub fn with_checkpoint(mut self, checkpoint: &'a Checkpoint) -> Self {
        self.checkpoint = Some(checkpoint);
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }
}

/// Power allocation for one `beta` by `method`.
pub fn allocate(
    method: Method,
    ctx: &RateContext,
    model: Option<&Mlp>,
    finetune: (usize, f64),
    adam: AdamConfig,
) -> Result<PowerAllocation> {
    let model_for = |m: Method| {
        model.ok_or_else(|| Error::MissingArtifact(format!("checkpoint (required by method {m})")))
    };
    match method {
        Method::Baseline => Ok(solve_maxmin(&SinrCoefficients::from_context(ctx))?.q_star),
        Method::MaxPower => Ok(max_power_allocation(ctx.num_users())),
        Method::Dnn => {
            let flat: Vec<f64> = ctx.beta.iter().copied().collect();
            model_for(method)?.forward(&flat)
        }
        Method::DnnOnline => {
            let sample = TrainingSample::from_context(ctx);
            Ok(online_finetune(model_for(method)?, &sample, finetune.0, finetune.1, adam)?.q)
        }
    }
}

fn run_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs `method` on every sample of `dataset`. Rates always come from the
/// rate model evaluated at the method's allocation; samples are processed in
/// parallel and collected in dataset order.
pub fn evaluate(
    method: Method,
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    options: EvalOptions<'_>,
) -> Result<RunReport> {
    let sys = &cfg.system;
    sys.validate()?;
    dataset.check_dims(sys)?;
    if dataset.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    let checkpoint = if method.needs_model() {
        let c = options
            .checkpoint
            .ok_or_else(|| Error::MissingArtifact(format!("checkpoint (required by method {method})")))?;
        c.check_dims(sys.num_aps, sys.num_users)?;
        Some(c)
    } else {
        None
    };
    let model = checkpoint.map(|c| &c.model);
    let adam = AdamConfig::from(&cfg.train);
    let finetune = (options.finetune_iterations, options.finetune_learning_rate);

    let one = |i: usize| -> Result<SampleRecord> {
        let start = Instant::now();
        let ctx = RateContext::from_config(dataset.beta(i).to_owned(), sys)?;
        let q = allocate(method, &ctx, model, finetune, adam)?;
        let seconds = start.elapsed().as_secs_f64();
        let rates = rate::user_rate(&ctx, &q)?;
        Ok(SampleRecord::new(i, seconds, q.into_inner(), rates, sys))
    };
    let records = run_pool(options.threads, || {
        (0..dataset.len()).into_par_iter().map(one).collect::<Result<Vec<_>>>()
    })??;

    let provenance = Provenance {
        method,
        split: dataset.header.split.tag().to_string(),
        dataset_mode: dataset.header.mode.tag().to_string(),
        dataset_seed: dataset.header.seed,
        config_digest: hex(&sys.digest()),
        config: sys.clone(),
        checkpoint_digest: checkpoint.map(|c| hex(&Sha256::digest(c.to_bytes()))),
        input_transform: checkpoint.map(|c| c.model.normalizer.transform.tag().to_string()),
        finetune: (method == Method::DnnOnline).then_some(FinetuneSettings {
            iterations: finetune.0,
            learning_rate: finetune.1,
        }),
    };
    let threads = if options.threads == 0 {
        rayon::current_num_threads()
    } else {
        options.threads
    };
    RunReport::new(provenance, records, threads)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: Method,
    pub total_seconds: f64,
    pub per_sample_seconds: f64,
    /// Baseline total divided by this method's total.
    pub speedup_vs_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub num_aps: usize,
    pub num_users: usize,
    pub samples: usize,
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub fn row(&self, method: Method) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn speedup(&self, method: Method) -> Option<f64> {
        self.row(method).map(|r| r.speedup_vs_baseline)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "timing over {} samples, M={}, K={} (single thread)\n",
            self.samples, self.num_aps, self.num_users
        );
        for r in &self.rows {
            out.push_str(&format!(
                "  {:<11} total {:>10.4} s  per sample {:>10.3e} s  speed-up vs baseline {:>8.2}x\n",
                r.method.tag(),
                r.total_seconds,
                r.per_sample_seconds,
                r.speedup_vs_baseline
            ));
        }
        out
    }
}

/// Wall-clock comparison of baseline, DNN and DNN-online on the first
/// `n_samples` of `dataset`, all on the calling thread.
///
/// Each method starts from the raw `beta` matrices. The baseline and the
/// online variant include building the SINR coefficients; the DNN runs one
/// batched forward pass over all samples (normalization included). Every
/// method is first warmed up on a few samples.
pub fn bench_timing(
    dataset: &Dataset,
    checkpoint: &Checkpoint,
    cfg: &ExperimentConfig,
    n_samples: usize,
) -> Result<TimingTable> {
    let sys = &cfg.system;
    dataset.check_dims(sys)?;
    checkpoint.check_dims(sys.num_aps, sys.num_users)?;
    let n = n_samples.min(dataset.len());
    if n == 0 {
        return Err(Error::Config("timing needs at least one sample".into()));
    }
    let data = dataset.head(n);
    let model = &checkpoint.model;
    let adam = AdamConfig::from(&cfg.train);
    let finetune = (cfg.train.finetune_iterations, cfg.train.finetune_learning_rate);

    let per_sample = |method: Method, count: usize| -> Result<f64> {
        let start = Instant::now();
        for i in 0..count {
            let ctx = RateContext::from_config(data.beta(i).to_owned(), sys)?;
            std::hint::black_box(allocate(method, &ctx, Some(model), finetune, adam)?);
        }
        Ok(start.elapsed().as_secs_f64())
    };
    let batched = |rows: ndarray::ArrayView2<'_, f64>| -> Result<f64> {
        let start = Instant::now();
        std::hint::black_box(model.forward_batch(rows)?);
        Ok(start.elapsed().as_secs_f64())
    };

    let warm = n.min(3);
    per_sample(Method::Baseline, warm)?;
    per_sample(Method::DnnOnline, warm.min(1))?;
    batched(data.raw_rows())?;

    let baseline = per_sample(Method::Baseline, n)?;
    let dnn = batched(data.raw_rows())?;
    let online = per_sample(Method::DnnOnline, n)?;
    let row = |method, total: f64| TimingRow {
        method,
        total_seconds: total,
        per_sample_seconds: total / n as f64,
        speedup_vs_baseline: baseline / total,
    };
    Ok(TimingTable {
        num_aps: sys.num_aps,
        num_users: sys.num_users,
        samples: n,
        rows: vec![
            row(Method::Baseline, baseline),
            row(Method::Dnn, dnn),
            row(Method::DnnOnline, online),
        ],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOutcome {
    pub samples: usize,
    /// Largest relative deviation between stored and recomputed rates.
    pub max_rate_error: f64,
    pub max_throughput_error: f64,
}

impl AuditOutcome {
    pub fn passed(&self) -> bool {
        self.max_rate_error <= CONSISTENCY_TOL && self.max_throughput_error <= CONSISTENCY_TOL
    }
}

/// Recomputes every stored per-user rate, minimum and net throughput of
/// `report` from its allocations through the rate model.
pub fn audit(report: &RunReport, dataset: &Dataset, sys: &SystemConfig) -> Result<AuditOutcome> {
    dataset.check_dims(sys)?;
    report.check_consistency()?;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let mut out = AuditOutcome {
        samples: report.records.len(),
        max_rate_error: 0.0,
        max_throughput_error: 0.0,
    };
    for r in &report.records {
        if r.index >= dataset.len() {
            return Err(Error::dimension("audited sample index", format!("< {}", dataset.len()), r.index));
        }
        let ctx = RateContext::from_config(dataset.beta(r.index).to_owned(), sys)?;
        let rates = rate::user_rate(&ctx, &r.q)?;
        let worst = rate::argmin(&rates);
        if rates.len() != r.rates.len() || worst.user != r.worst_user {
            out.max_rate_error = f64::INFINITY;
            continue;
        }
        for (k, (fresh, stored)) in rates.iter().zip(&r.rates).enumerate() {
            out.max_rate_error = out.max_rate_error.max(rel(*fresh, *stored));
            let net = rate::net_throughput(*fresh, sys);
            out.max_throughput_error = out.max_throughput_error.max(rel(net, r.net_throughput[k]));
        }
        out.max_rate_error = out.max_rate_error.max(rel(worst.value, r.min_rate));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnn::TrainingHistory;
    use crate::harness::dataset::{gen_dataset, GenerationMode, SplitCounts};

    fn setup() -> (ExperimentConfig, Dataset, Checkpoint) {
        let mut cfg = ExperimentConfig {
            system: SystemConfig::reference(8, 3),
            ..Default::default()
        };
        cfg.train.finetune_iterations = 5;
        let counts = SplitCounts {
            train: 1,
            validation: 1,
            test: 12,
        };
        let splits = gen_dataset(&cfg.system, 4, GenerationMode::RandomStatic, counts).unwrap();
        let samples = splits.test.training_samples(&cfg.system).unwrap();
        let mut model = Mlp::build(8, 3, 1);
        let raw = crate::dnn::stack_raw(&samples, 24).unwrap();
        model.normalizer = crate::dnn::Normalizer::fit(raw.view(), cfg.train.input_transform).unwrap();
        let ck = Checkpoint {
            model,
            history: TrainingHistory::default(),
            config_digest: cfg.system.digest(),
        };
        (cfg, splits.test, ck)
    }

    #[test]
    fn methods_are_ordered_per_sample() {
        let (cfg, test, ck) = setup();
        let opts = EvalOptions::new(&cfg).with_checkpoint(&ck).with_threads(2);
        let base = evaluate(Method::Baseline, &test, &cfg, opts).unwrap();
        let maxp = evaluate(Method::MaxPower, &test, &cfg, opts).unwrap();
        let dnn = evaluate(Method::Dnn, &test, &cfg, opts).unwrap();
        let online = evaluate(Method::DnnOnline, &test, &cfg, opts).unwrap();
        for i in 0..test.len() {
            let b = base.records[i].min_rate;
            assert!(maxp.records[i].min_rate <= b * (1.0 + 1e-6));
            assert!(dnn.records[i].min_rate <= online.records[i].min_rate);
            assert!(online.records[i].min_rate <= b * (1.0 + 1e-6));
        }
        assert_eq!(online.provenance.input_transform.as_deref(), Some("linear"));
        assert!(base.provenance.checkpoint_digest.is_none());
    }

    #[test]
    fn evaluation_is_deterministic_across_thread_counts() {
        let (cfg, test, ck) = setup();
        let one = evaluate(Method::DnnOnline, &test, &cfg, EvalOptions::new(&cfg).with_checkpoint(&ck).with_threads(1)).unwrap();
        let three = evaluate(Method::DnnOnline, &test, &cfg, EvalOptions::new(&cfg).with_checkpoint(&ck).with_threads(3)).unwrap();
        assert_eq!(one.summary, three.summary);
        for (a, b) in one.records.iter().zip(&three.records) {
            assert_eq!((&a.q, &a.rates), (&b.q, &b.rates));
        }
    }

    #[test]
    fn neural_methods_need_a_checkpoint() {
        let (cfg, test, _) = setup();
        let err = evaluate(Method::Dnn, &test, &cfg, EvalOptions::new(&cfg)).unwrap_err();
        assert!(matches!(err, Error::MissingArtifact(_)));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (mut cfg, test, ck) = setup();
        let opts = EvalOptions::new(&cfg).with_checkpoint(&ck);
        cfg.system = SystemConfig::reference(8, 2);
        assert!(matches!(evaluate(Method::Baseline, &test, &cfg, opts), Err(Error::Dimension { .. })));
    }

    #[test]
    fn audit_passes_and_detects_tampering() {
        let (cfg, test, ck) = setup();
        let report = evaluate(Method::Dnn, &test, &cfg, EvalOptions::new(&cfg).with_checkpoint(&ck)).unwrap();
        let out = audit(&report, &test, &cfg.system).unwrap();
        assert!(out.passed(), "{out:?}");
        assert_eq!(out.samples, 12);
        let mut bad = report.clone();
        bad.records[3].rates[1] *= 1.001;
        assert!(!audit(&bad, &test, &cfg.system).unwrap().passed());
    }

    #[test]
    fn bench_reports_positive_times() {
        let (cfg, test, ck) = setup();
        let t = bench_timing(&test, &ck, &cfg, 4).unwrap();
        assert_eq!(t.samples, 4);
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows.iter().all(|r| r.total_seconds > 0.0));
        assert_eq!(t.speedup(Method::Baseline), Some(1.0));
        assert!(t.render().contains("dnn-online"));
    }
}
