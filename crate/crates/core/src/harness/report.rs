use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::codec::write_file;
use super::stats::{mean, EmpiricalCdf};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rate;

/// Number of points in each stored CDF curve.
pub const CDF_POINTS: usize = 101;
/// Tolerance for recomputed summaries and audited rates.
pub const CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Baseline,
    MaxPower,
    Dnn,
    DnnOnline,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Baseline, Method::MaxPower, Method::Dnn, Method::DnnOnline];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::MaxPower => "max-power",
            Method::Dnn => "dnn",
            Method::DnnOnline => "dnn-online",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Method::Dnn | Method::DnnOnline)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?} (baseline, max-power, dnn, dnn-online)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub index: usize,
    /// Wall-clock time spent producing `q`.
    pub seconds: f64,
    pub q: Vec<f64>,
    pub rates: Vec<f64>,
    pub min_rate: f64,
    pub worst_user: usize,
    /// bits/s
    pub net_throughput: Vec<f64>,
}

impl SampleRecord {
    pub fn new(index: usize, seconds: f64, q: Vec<f64>, rates: Vec<f64>, cfg: &SystemConfig) -> Self {
        let worst = rate::argmin(&rates);
        let net_throughput = rates.iter().map(|r| rate::net_throughput(*r, cfg)).collect();
        SampleRecord {
            index,
            seconds,
            q,
            rates,
            min_rate: worst.value,
            worst_user: worst.user,
            net_throughput,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneSettings {
    pub iterations: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: Method,
    pub split: String,
    pub dataset_mode: String,
    pub dataset_seed: u64,
    pub config_digest: String,
    pub config: SystemConfig,
    /// sha256 of the checkpoint file contents (neural methods).
    pub checkpoint_digest: Option<String>,
    /// `log` or `linear` feature domain (neural methods).
    pub input_transform: Option<String>,
    pub finetune: Option<FinetuneSettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub samples: usize,
    pub average_min_rate: f64,
    /// 5th percentile of all users' net throughput pooled over samples (bits/s).
    pub p5_net_throughput: f64,
    pub mean_net_throughput: f64,
    /// `(min-rate, probability)` pairs.
    pub min_rate_cdf: Vec<(f64, f64)>,
    /// `(net throughput, probability)` pairs over the pooled users.
    pub net_throughput_cdf: Vec<(f64, f64)>,
}

impl Summary {
    pub fn from_records(records: &[SampleRecord]) -> Result<Self> {
        let mins: Vec<f64> = records.iter().map(|r| r.min_rate).collect();
        let pooled: Vec<f64> = records.iter().flat_map(|r| r.net_throughput.iter().copied()).collect();
        let min_cdf = EmpiricalCdf::new(&mins)?;
        let net_cdf = EmpiricalCdf::new(&pooled)?;
        Ok(Summary {
            samples: records.len(),
            average_min_rate: mean(&mins),
            p5_net_throughput: net_cdf.percentile(0.05),
            mean_net_throughput: mean(&pooled),
            min_rate_cdf: min_cdf.points(CDF_POINTS),
            net_throughput_cdf: net_cdf.points(CDF_POINTS),
        })
    }

    /// Largest absolute difference in the scalar statistics and CDF curves.
    fn max_difference(&self, other: &Summary) -> f64 {
        if self.samples != other.samples
            || self.min_rate_cdf.len() != other.min_rate_cdf.len()
            || self.net_throughput_cdf.len() != other.net_throughput_cdf.len()
        {
            return f64::INFINITY;
        }
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        let mut d = rel(self.average_min_rate, other.average_min_rate)
            .max(rel(self.p5_net_throughput, other.p5_net_throughput))
            .max(rel(self.mean_net_throughput, other.mean_net_throughput));
        for (a, b) in self
            .min_rate_cdf
            .iter()
            .zip(&other.min_rate_cdf)
            .chain(self.net_throughput_cdf.iter().zip(&other.net_throughput_cdf))
        {
            d = d.max(rel(a.0, b.0)).max((a.1 - b.1).abs());
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub threads: usize,
}

/// The JSON document written next to the per-sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub provenance: Provenance,
    pub summary: Summary,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub provenance: Provenance,
    pub records: Vec<SampleRecord>,
    pub summary: Summary,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(provenance: Provenance, records: Vec<SampleRecord>, threads: usize) -> Result<Self> {
        let summary = Summary::from_records(&records)?;
        let total_seconds = records.iter().map(|r| r.seconds).sum();
        Ok(RunReport {
            provenance,
            records,
            summary,
            timing: Timing {
                total_seconds,
                threads,
            },
        })
    }

    pub fn method(&self) -> Method {
        self.provenance.method
    }

    /// `<method>-<split>`
    pub fn stem(&self) -> String {
        format!("{}-{}", self.provenance.method.tag(), self.provenance.split)
    }

    /// Fails if the stored summary differs from one recomputed from the
    /// records by more than `CONSISTENCY_TOL`.
    pub fn check_consistency(&self) -> Result<()> {
        let recomputed = Summary::from_records(&self.records)?;
        let d = self.summary.max_difference(&recomputed);
        if d > CONSISTENCY_TOL {
            return Err(Error::format(
                "run report",
                format!("summary differs from per-sample records by {d:e}"),
            ));
        }
        Ok(())
    }

    pub fn csv(&self) -> String {
        let k = self.records.first().map_or(0, |r| r.q.len());
        let mut out = String::from("sample,seconds,min_rate,worst_user");
        for prefix in ["q", "rate", "net"] {
            for j in 0..k {
                write!(out, ",{prefix}_{j}").unwrap();
            }
        }
        out.push('\n');
        for r in &self.records {
            write!(out, "{},{},{},{}", r.index, r.seconds, r.min_rate, r.worst_user).unwrap();
            for v in r.q.iter().chain(&r.rates).chain(&r.net_throughput) {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Vec<SampleRecord>> {
        let bad = |line: usize, why: &str| Error::format("report csv", format!("line {line}: {why}"));
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "empty file"))?.split(',').collect();
        if header.len() < 4 || header[..4] != ["sample", "seconds", "min_rate", "worst_user"] || !(header.len() - 4).is_multiple_of(3) {
            return Err(bad(1, "unexpected header"));
        }
        let k = (header.len() - 4) / 3;
        let mut records = Vec::new();
        for (n, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(bad(n + 2, "wrong field count"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n + 2, "not a number"));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(n + 2, "not an integer"));
            let values: Vec<f64> = fields[4..].iter().map(|s| num(s)).collect::<Result<_>>()?;
            records.push(SampleRecord {
                index: int(fields[0])?,
                seconds: num(fields[1])?,
                min_rate: num(fields[2])?,
                worst_user: int(fields[3])?,
                q: values[..k].to_vec(),
                rates: values[k..2 * k].to_vec(),
                net_throughput: values[2 * k..].to_vec(),
            });
        }
        Ok(records)
    }

    pub fn document(&self) -> ReportDocument {
        ReportDocument {
            provenance: self.provenance.clone(),
            summary: self.summary.clone(),
            timing: self.timing.clone(),
        }
    }

    /// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`; returns both paths.
    pub fn save(&self, dir: &Path, force: bool) -> Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{}.csv", self.stem()));
        let json = dir.join(format!("{}.json", self.stem()));
        if !force {
            if let Some(p) = [&csv, &json].into_iter().find(|p| p.exists()) {
                return Err(Error::AlreadyExists(p.clone()));
            }
        }
        let doc = serde_json::to_string_pretty(&self.document()).expect("report serializes");
        write_file(&csv, self.csv().as_bytes(), true)?;
        write_file(&json, doc.as_bytes(), true)?;
        Ok((csv, json))
    }

    /// Loads a report from its JSON document; the CSV is expected beside it.
    pub fn load(json_path: &Path) -> Result<Self> {
        let doc = load_document(json_path)?;
        let csv_path = json_path.with_extension("csv");
        let text = std::fs::read_to_string(&csv_path)
            .map_err(|_| Error::MissingArtifact(format!("report records {}", csv_path.display())))?;
        let records = Self::parse_csv(&text)?;
        let report = RunReport {
            provenance: doc.provenance,
            records,
            summary: doc.summary,
            timing: doc.timing,
        };
        report.check_consistency()?;
        Ok(report)
    }
}

pub fn load_document(json_path: &Path) -> Result<ReportDocument> {
    let text = std::fs::read_to_string(json_path)
        .map_err(|_| Error::MissingArtifact(format!("report {}", json_path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::format("report summary", e.to_string()))
}

/// Markdown table of average minimum rate and 95%-likely net throughput,
/// one row per report.
pub fn summary_table(docs: &[ReportDocument]) -> String {
    let mut out = String::from(
        "| method | split | M | K | samples | avg min-rate (bit/s/Hz) | 95%-likely net throughput (Mbit/s) | input |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for d in docs {
        let p = &d.provenance;
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {:.4} | {:.3} | {} |",
            p.method,
            p.split,
            p.config.num_aps,
            p.config.num_users,
            d.summary.samples,
            d.summary.average_min_rate,
            d.summary.p5_net_throughput / 1e6,
            p.input_transform.as_deref().unwrap_or("-"),
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> RunReport {
        let cfg = SystemConfig::reference(4, 2);
        let records = (0..5)
            .map(|i| {
                let r = 0.1 + i as f64 / 7.0;
                SampleRecord::new(i, 1e-4, vec![0.5, 1.0 / 3.0], vec![r, 2.0 * r + 0.01], &cfg)
            })
            .collect();
        let provenance = Provenance {
            method: Method::Baseline,
            split: "test".into(),
            dataset_mode: "random-static".into(),
            dataset_seed: 3,
            config_digest: "ab".into(),
            config: cfg,
            checkpoint_digest: None,
            input_transform: None,
            finetune: None,
        };
        RunReport::new(provenance, records, 1).unwrap()
    }

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!("cvx".parse::<Method>().is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = report();
        let parsed = RunReport::parse_csv(&r.csv()).unwrap();
        assert_eq!(parsed, r.records);
    }

    #[test]
    fn summary_matches_records() {
        let r = report();
        r.check_consistency().unwrap();
        let mean: f64 = r.records.iter().map(|x| x.min_rate).sum::<f64>() / 5.0;
        assert!((r.summary.average_min_rate - mean).abs() < 1e-15);
        let mut tampered = r.clone();
        tampered.summary.average_min_rate += 1e-6;
        assert!(tampered.check_consistency().is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let r = report();
        let (_, json) = r.save(dir.path(), false).unwrap();
        assert!(r.save(dir.path(), false).is_err());
        let back = RunReport::load(&json).unwrap();
        assert_eq!(back, r);
        let table = summary_table(&[back.document()]);
        assert!(table.contains("| baseline | test | 4 | 2 | 5 |"));
    }

    #[test]
    fn malformed_csv_is_format_error() {
        assert!(matches!(RunReport::parse_csv("a,b\n"), Err(Error::Format { .. })));
        let mut text = report().csv();
        text.push_str("1,2,3\n");
        assert!(RunReport::parse_csv(&text).is_err());
    }
}
