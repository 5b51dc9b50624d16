use std::path::Path;

use ndarray::{Array1, Array2};

use super::codec::{read_file, write_file, Reader, Writer};
use crate::config::InputTransform;
use crate::dnn::{Activation, DenseLayer, HistoryRecord, Mlp, Normalizer, TrainingHistory};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CFCK";
const VERSION: u32 = 1;
/// Sanity bound on any stored dimension.
const MAX_DIM: usize = 1 << 24;

/// A trained model with its training history.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Mlp,
    pub history: TrainingHistory,
    /// Digest of the system configuration the model was trained under.
    pub config_digest: [u8; 32],
}

fn transform_code(t: InputTransform) -> u8 {
    match t {
        InputTransform::Log => 0,
        InputTransform::Linear => 1,
    }
}

impl Checkpoint {
    /// Layout: `M u32 | K u32 | transform u8 | layers u32 | per layer
    /// (out u32, in u32, activation u8, weights row-major, bias) | normalizer
    /// mean, std | best iteration u64 | records u64 | (iteration u64, train
    /// loss, validation loss)* | config digest`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut w = Writer::new(MAGIC, VERSION);
        w.u32(m.num_aps as u32);
        w.u32(m.num_users as u32);
        w.u8(transform_code(m.normalizer.transform));
        w.u32(m.layers.len() as u32);
        for layer in &m.layers {
            w.u32(layer.output_dim() as u32);
            w.u32(layer.input_dim() as u32);
            w.u8(layer.activation.tag());
            w.f64s(layer.weights.iter());
            w.f64s(layer.bias.iter());
        }
        w.f64s(m.normalizer.mean.iter());
        w.f64s(m.normalizer.std.iter());
        w.u64(self.history.best_iteration);
        w.u64(self.history.records.len() as u64);
        for r in &self.history.records {
            w.u64(r.iteration);
            w.f64(r.train_loss);
            w.f64(r.validation_loss);
        }
        w.bytes(&self.config_digest);
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::open("checkpoint", data, MAGIC, VERSION)?;
        let num_aps = r.u32()? as usize;
        let num_users = r.u32()? as usize;
        let transform = match r.u8()? {
            0 => InputTransform::Log,
            1 => InputTransform::Linear,
            _ => return Err(r.error("unknown input transform")),
        };
        let n_layers = r.u32()? as usize;
        if n_layers == 0 || n_layers > 64 {
            return Err(r.error(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let out = r.u32()? as usize;
            let inp = r.u32()? as usize;
            if out > MAX_DIM || inp > MAX_DIM {
                return Err(r.error("layer dimension out of range"));
            }
            let activation = Activation::from_tag(r.u8()?).ok_or_else(|| r.error("unknown activation"))?;
            let weights = Array2::from_shape_vec((out, inp), r.f64s(out * inp)?).expect("sized read");
            let bias = Array1::from(r.f64s(out)?);
            layers.push(DenseLayer {
                weights,
                bias,
                activation,
            });
        }
        let dim = num_aps * num_users;
        let chained = layers.windows(2).all(|w| w[0].output_dim() == w[1].input_dim());
        if layers[0].input_dim() != dim || !chained || layers.last().unwrap().output_dim() != num_users {
            return Err(r.error("layer shapes do not chain from M*K inputs to K outputs"));
        }
        let normalizer = Normalizer {
            transform,
            mean: Array1::from(r.f64s(dim)?),
            std: Array1::from(r.f64s(dim)?),
        };
        let best_iteration = r.u64()?;
        let n_records = r.len(r.remaining() / 24)?;
        let mut records = Vec::with_capacity(n_records);
        for _ in 0..n_records {
            records.push(HistoryRecord {
                iteration: r.u64()?,
                train_loss: r.f64()?,
                validation_loss: r.f64()?,
            });
        }
        let config_digest = r.array::<32>()?;
        r.finish()?;
        Ok(Checkpoint {
            model: Mlp {
                num_aps,
                num_users,
                layers,
                normalizer,
            },
            history: TrainingHistory {
                records,
                best_iteration,
            },
            config_digest,
        })
    }

    pub fn save(&self, path: &Path, force: bool) -> Result<()> {
        write_file(path, &self.to_bytes(), force)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path, "checkpoint")?)
    }

    /// Fails unless the stored model matches `(M, K)`.
    pub fn check_dims(&self, num_aps: usize, num_users: usize) -> Result<()> {
        if (self.model.num_aps, self.model.num_users) != (num_aps, num_users) {
            return Err(Error::dimension(
                "checkpoint",
                format!("M={num_aps}, K={num_users}"),
                format!("M={}, K={}", self.model.num_aps, self.model.num_users),
            ));
        }
        Ok(())
    }

    /// Training history as CSV (`iteration,train_loss,validation_loss`).
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iteration,train_loss,validation_loss\n");
        for r in &self.history.records {
            out.push_str(&format!("{},{},{}\n", r.iteration, r.train_loss, r.validation_loss));
        }
        out
    }
}
