use std::path::{Path, PathBuf};

use ndarray::ArrayView2;

use super::codec::{read_file, write_file, Reader, Writer};
use crate::config::SystemConfig;
use crate::dnn::TrainingSample;
use crate::error::{Error, Result};
use crate::geometry::{
    grid_ap_positions, large_scale_fading, realization_from_rng, sample_rng, shadow_draws,
    MobilityState, Placement, Point,
};

const MAGIC: &[u8; 4] = b"CFMM";
const VERSION: u32 = 1;
/// Stream reserved for the mobility trajectory.
const MOBILITY_STREAM: u64 = 3 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMode {
    /// Independent uniform AP and user placement per sample.
    RandomStatic,
    /// Grid APs, users following one mobility trajectory sampled every second.
    GridMobile,
}

impl GenerationMode {
    pub fn tag(self) -> &'static str {
        match self {
            GenerationMode::RandomStatic => "random-static",
            GenerationMode::GridMobile => "grid-mobile",
        }
    }

    fn code(self) -> u8 {
        match self {
            GenerationMode::RandomStatic => 0,
            GenerationMode::GridMobile => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GenerationMode::RandomStatic),
            1 => Some(GenerationMode::GridMobile),
            _ => None,
        }
    }
}

impl std::str::FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-static" | "random_static" => Ok(GenerationMode::RandomStatic),
            "grid-mobile" | "grid_mobile" => Ok(GenerationMode::GridMobile),
            other => Err(Error::Config(format!("unknown generation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitKind {
    Train,
    Validation,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Train, SplitKind::Validation, SplitKind::Test];

    pub fn tag(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Validation => "validation",
            SplitKind::Test => "test",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        SplitKind::ALL.get(code as usize).copied()
    }

    /// `<dir>/<split>.cfmm`
    pub fn file_in(self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.cfmm", self.tag()))
    }
}

impl std::str::FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SplitKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown split {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub num_aps: usize,
    pub num_users: usize,
    pub count: usize,
    pub mode: GenerationMode,
    pub split: SplitKind,
    pub seed: u64,
    pub config_digest: [u8; 32],
}

/// A split of `beta` matrices, stored flat (sample, AP, user).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    betas: Vec<f64>,
    /// `count x K x 2` user coordinates (mobility datasets).
    positions: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(header: DatasetHeader, betas: Vec<f64>, positions: Option<Vec<f64>>) -> Result<Self> {
        let per = header.num_aps * header.num_users;
        if betas.len() != header.count * per {
            return Err(Error::dimension("dataset beta payload", header.count * per, betas.len()));
        }
        if let Some(p) = &positions {
            let want = header.count * header.num_users * 2;
            if p.len() != want {
                return Err(Error::dimension("dataset positions", want, p.len()));
            }
        }
        Ok(Dataset {
            header,
            betas,
            positions,
        })
    }

    pub fn len(&self) -> usize {
        self.header.count
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    pub fn beta(&self, i: usize) -> ArrayView2<'_, f64> {
        let (m, k) = (self.header.num_aps, self.header.num_users);
        ArrayView2::from_shape((m, k), &self.betas[i * m * k..(i + 1) * m * k]).expect("sample shape")
    }

    /// All samples as rows of flattened `beta`.
    pub fn raw_rows(&self) -> ArrayView2<'_, f64> {
        let per = self.header.num_aps * self.header.num_users;
        ArrayView2::from_shape((self.header.count, per), &self.betas).expect("payload shape")
    }

    pub fn user_positions(&self, i: usize) -> Option<Vec<Point>> {
        let k = self.header.num_users;
        self.positions.as_ref().map(|p| {
            p[i * k * 2..(i + 1) * k * 2]
                .chunks_exact(2)
                .map(|c| [c[0], c[1]])
                .collect()
        })
    }

    /// The first `n` samples (all if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let per = self.header.num_aps * self.header.num_users;
        let k2 = self.header.num_users * 2;
        Dataset {
            header: DatasetHeader {
                count: n,
                ..self.header
            },
            betas: self.betas[..n * per].to_vec(),
            positions: self.positions.as_ref().map(|p| p[..n * k2].to_vec()),
        }
    }

    /// Fails unless the dataset was generated for `cfg`'s dimensions.
    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        if (self.header.num_aps, self.header.num_users) != (cfg.num_aps, cfg.num_users) {
            return Err(Error::dimension(
                "dataset",
                format!("M={}, K={}", cfg.num_aps, cfg.num_users),
                format!("M={}, K={}", self.header.num_aps, self.header.num_users),
            ));
        }
        Ok(())
    }

    pub fn training_samples(&self, cfg: &SystemConfig) -> Result<Vec<TrainingSample>> {
        self.check_dims(cfg)?;
        (0..self.len())
            .map(|i| TrainingSample::new(&self.beta(i).to_owned(), cfg))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut w = Writer::new(MAGIC, VERSION);
        w.u32(h.num_aps as u32);
        w.u32(h.num_users as u32);
        w.u64(h.count as u64);
        w.u8(h.mode.code());
        w.u8(h.split.code());
        w.u8(self.positions.is_some() as u8);
        w.u64(h.seed);
        w.bytes(&h.config_digest);
        w.f64s(&self.betas);
        if let Some(p) = &self.positions {
            w.f64s(p);
        }
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::open("dataset", data, MAGIC, VERSION)?;
        let num_aps = r.u32()? as usize;
        let num_users = r.u32()? as usize;
        let count = r.len(usize::MAX)?;
        let mode = GenerationMode::from_code(r.u8()?).ok_or_else(|| r.error("unknown generation mode"))?;
        let split = SplitKind::from_code(r.u8()?).ok_or_else(|| r.error("unknown split"))?;
        let has_positions = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(r.error("bad positions flag")),
        };
        let seed = r.u64()?;
        let config_digest = r.array::<32>()?;
        let per = num_aps
            .checked_mul(num_users)
            .and_then(|p| p.checked_mul(count))
            .ok_or_else(|| r.error("sample count overflow"))?;
        let betas = r.f64s(per)?;
        let positions = if has_positions {
            Some(r.f64s(count * num_users * 2)?)
        } else {
            None
        };
        r.finish()?;
        let header = DatasetHeader {
            num_aps,
            num_users,
            count,
            mode,
            split,
            seed,
            config_digest,
        };
        Dataset::new(header, betas, positions)
    }

    pub fn save(&self, path: &Path, force: bool) -> Result<()> {
        write_file(path, &self.to_bytes(), force)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path, "dataset")?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }

    pub fn get(&self, split: SplitKind) -> usize {
        match split {
            SplitKind::Train => self.train,
            SplitKind::Validation => self.validation,
            SplitKind::Test => self.test,
        }
    }

    /// 100000 / 1000 / 1000 for static data, 10000 / 1000 / 1000 for the
    /// 12000-second mobility trajectory.
    pub fn default_for(mode: GenerationMode) -> Self {
        match mode {
            GenerationMode::RandomStatic => SplitCounts {
                train: 100_000,
                validation: 1000,
                test: 1000,
            },
            GenerationMode::GridMobile => SplitCounts {
                train: 10_000,
                validation: 1000,
                test: 1000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

impl DatasetSplits {
    pub fn get(&self, split: SplitKind) -> &Dataset {
        match split {
            SplitKind::Train => &self.train,
            SplitKind::Validation => &self.validation,
            SplitKind::Test => &self.test,
        }
    }

    /// Writes `train.cfmm`, `validation.cfmm` and `test.cfmm` into `dir`.
    /// Nothing is written if any target exists and `force` is unset.
    pub fn save(&self, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
        let paths: Vec<PathBuf> = SplitKind::ALL.iter().map(|s| s.file_in(dir)).collect();
        if !force {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                return Err(Error::AlreadyExists(p.clone()));
            }
        }
        for (split, path) in SplitKind::ALL.iter().zip(&paths) {
            self.get(*split).save(path, true)?;
        }
        Ok(paths)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(DatasetSplits {
            train: Dataset::load(&SplitKind::Train.file_in(dir))?,
            validation: Dataset::load(&SplitKind::Validation.file_in(dir))?,
            test: Dataset::load(&SplitKind::Test.file_in(dir))?,
        })
    }
}

/// Generates the three splits.
///
/// Static mode draws sample `i` of split `s` from its own stream
/// `(s << 40) | i`, so splits are independent of each other's sizes. Mobility
/// mode runs one trajectory of `counts.total()` one-second steps with fresh
/// shadowing per sample and cuts it into train, validation and test in
/// temporal order.
pub fn gen_dataset(
    cfg: &SystemConfig,
    seed: u64,
    mode: GenerationMode,
    counts: SplitCounts,
) -> Result<DatasetSplits> {
    cfg.validate()?;
    let digest = cfg.digest();
    let header = |split: SplitKind, count: usize| DatasetHeader {
        num_aps: cfg.num_aps,
        num_users: cfg.num_users,
        count,
        mode,
        split,
        seed,
        config_digest: digest,
    };
    match mode {
        GenerationMode::RandomStatic => {
            let build = |split: SplitKind| -> Result<Dataset> {
                let n = counts.get(split);
                let mut betas = Vec::with_capacity(n * cfg.num_aps * cfg.num_users);
                for i in 0..n {
                    let stream = ((split.code() as u64) << 40) | i as u64;
                    let r = realization_from_rng(cfg, Placement::UniformRandom, seed, &mut sample_rng(seed, stream))?;
                    betas.extend(r.beta.iter());
                }
                Dataset::new(header(split, n), betas, None)
            };
            Ok(DatasetSplits {
                train: build(SplitKind::Train)?,
                validation: build(SplitKind::Validation)?,
                test: build(SplitKind::Test)?,
            })
        }
        GenerationMode::GridMobile => {
            let aps = grid_ap_positions(cfg)?;
            let mut rng = sample_rng(seed, MOBILITY_STREAM);
            let mut state = MobilityState::new(cfg, &mut rng);
            let (m, k) = (cfg.num_aps, cfg.num_users);
            let total = counts.total();
            let mut betas = Vec::with_capacity(total * m * k);
            let mut positions = Vec::with_capacity(total * k * 2);
            for _ in 0..total {
                let z = shadow_draws(m, k, &mut rng);
                let beta = large_scale_fading(cfg, &aps, &state.user_positions, &z)?;
                betas.extend(beta.iter());
                positions.extend(state.user_positions.iter().flatten());
                state.step(1.0, cfg, &mut rng);
            }
            let mut start = 0;
            let mut cut = |split: SplitKind| -> Result<Dataset> {
                let n = counts.get(split);
                let b = betas[start * m * k..(start + n) * m * k].to_vec();
                let p = positions[start * k * 2..(start + n) * k * 2].to_vec();
                start += n;
                Dataset::new(header(split, n), b, Some(p))
            };
            Ok(DatasetSplits {
                train: cut(SplitKind::Train)?,
                validation: cut(SplitKind::Validation)?,
                test: cut(SplitKind::Test)?,
            })
        }
    }
}
