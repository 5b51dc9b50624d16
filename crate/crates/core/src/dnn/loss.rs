use ndarray::{Array2, ArrayView2};

use super::model::{Gradients, Mlp};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rate::{self, MinRate, RateContext};
use crate::solver::SinrCoefficients;

/// One network realization prepared for training: the flattened `beta`
/// (AP-major) and the SINR coefficients derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub beta: Vec<f64>,
    pub coeffs: SinrCoefficients,
}

impl TrainingSample {
    pub fn new(beta: &Array2<f64>, cfg: &SystemConfig) -> Result<Self> {
        let ctx = RateContext::from_config(beta.clone(), cfg)?;
        Ok(TrainingSample {
            beta: beta.iter().copied().collect(),
            coeffs: SinrCoefficients::from_context(&ctx),
        })
    }

    pub fn from_context(ctx: &RateContext) -> Self {
        TrainingSample {
            beta: ctx.beta.iter().copied().collect(),
            coeffs: SinrCoefficients::from_context(ctx),
        }
    }
}

/// Stacks raw `beta` vectors of `samples` as rows.
pub fn stack_raw<'a, I>(samples: I, dim: usize) -> Result<Array2<f64>>
where
    I: IntoIterator<Item = &'a TrainingSample>,
{
    let mut flat = Vec::new();
    let mut rows = 0;
    for s in samples {
        if s.beta.len() != dim {
            return Err(Error::dimension("training sample", dim, s.beta.len()));
        }
        flat.extend_from_slice(&s.beta);
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, dim), flat).expect("consistent rows"))
}

/// Minimum rate at `q` and its gradient with respect to `q`.
///
/// The gradient follows the subgradient of the minimum: only the worst
/// user (lowest index on ties) contributes.
pub fn min_rate_gradient(q: &[f64], coeffs: &SinrCoefficients) -> (MinRate, Vec<f64>) {
    let den = coeffs.interference(q);
    let rates: Vec<f64> = (0..q.len())
        .map(|k| crate::solver::sinr_to_rate(q[k] * coeffs.a[k] / den[k]))
        .collect();
    let worst = rate::argmin(&rates);
    let k = worst.user;
    let sinr = q[k] * coeffs.a[k] / den[k];
    let outer = 1.0 / (std::f64::consts::LN_2 * (1.0 + sinr));
    let grad = (0..q.len())
        .map(|j| {
            let mut d = -q[k] * coeffs.a[k] * coeffs.b[[k, j]] / (den[k] * den[k]);
            if j == k {
                d += coeffs.a[k] / den[k];
            }
            outer * d
        })
        .collect();
    (worst, grad)
}

/// Mean negative minimum rate over a batch.
pub fn batch_loss(model: &Mlp, batch: &[&TrainingSample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let raw = stack_raw(batch.iter().copied(), model.input_dim())?;
    let features = model.normalizer.apply(raw.view());
    let coeffs: Vec<&SinrCoefficients> = batch.iter().map(|s| &s.coeffs).collect();
    Ok(features_loss(model, features.view(), &coeffs))
}

pub(crate) fn features_loss(
    model: &Mlp,
    features: ArrayView2<'_, f64>,
    coeffs: &[&SinrCoefficients],
) -> f64 {
    let q = model.forward_features(features);
    let total: f64 = q
        .rows()
        .into_iter()
        .zip(coeffs)
        .map(|(row, c)| -c.min_rate(row.as_slice().expect("contiguous row")).value)
        .sum();
    total / coeffs.len() as f64
}

/// Loss and reverse-mode gradient over a batch.
pub fn loss_and_gradients(model: &Mlp, batch: &[&TrainingSample]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let raw = stack_raw(batch.iter().copied(), model.input_dim())?;
    let features = model.normalizer.apply(raw.view());
    let coeffs: Vec<&SinrCoefficients> = batch.iter().map(|s| &s.coeffs).collect();
    Ok(features_loss_and_gradients(model, features, &coeffs))
}

pub(crate) fn features_loss_and_gradients(
    model: &Mlp,
    features: Array2<f64>,
    coeffs: &[&SinrCoefficients],
) -> (f64, Gradients) {
    let cache = model.forward_cached(features);
    let (loss, d_out) = output_loss_gradient(cache.output(), coeffs);
    (loss, model.backward(&cache, d_out))
}

/// Batch loss and `d loss / d q` for network outputs `q` (one row per sample).
pub(crate) fn output_loss_gradient(q: &Array2<f64>, coeffs: &[&SinrCoefficients]) -> (f64, Array2<f64>) {
    let n = coeffs.len() as f64;
    let mut d_out = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for ((row, mut d_row), c) in q.rows().into_iter().zip(d_out.rows_mut()).zip(coeffs) {
        let (worst, grad) = min_rate_gradient(row.as_slice().expect("contiguous row"), c);
        loss -= worst.value;
        for (d, g) in d_row.iter_mut().zip(grad) {
            *d = -g / n;
        }
    }
    (loss / n, d_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::PilotSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(rng: &mut ChaCha8Rng, m: usize, k: usize) -> TrainingSample {
        let beta = Array2::from_shape_simple_fn((m, k), || 10f64.powf(rng.random_range(-13.0..-9.0)));
        let ctx = RateContext::new(beta, PilotSet::orthogonal(k), 1.58e11, 1.58e11).unwrap();
        TrainingSample::from_context(&ctx)
    }

    #[test]
    fn rate_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = random_sample(&mut rng, 5, 3);
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..0.9)).collect();
            let (worst, grad) = min_rate_gradient(&q, &s.coeffs);
            let rates = s.coeffs.rates(&q);
            let mut sorted = rates.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted[1] - sorted[0] < 1e-4 {
                continue;
            }
            for j in 0..3 {
                let h = 1e-7;
                let mut up = q.clone();
                up[j] += h;
                let mut dn = q.clone();
                dn[j] -= h;
                let fd = (s.coeffs.rates(&up)[worst.user] - s.coeffs.rates(&dn)[worst.user]) / (2.0 * h);
                assert!((fd - grad[j]).abs() <= 1e-6 * grad[j].abs().max(1e-3));
            }
            // non-worst users do not appear: own-power derivative of the worst user is positive
            assert!(grad[worst.user] > 0.0);
        }
    }

    #[test]
    fn batch_loss_is_mean_of_singles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<_> = (0..4).map(|_| random_sample(&mut rng, 3, 2)).collect();
        let mut model = Mlp::build(3, 2, 1);
        let raw = stack_raw(&samples, 6).unwrap();
        model.normalizer = super::super::Normalizer::fit(raw.view(), crate::config::InputTransform::Log).unwrap();
        let refs: Vec<&TrainingSample> = samples.iter().collect();
        let whole = batch_loss(&model, &refs).unwrap();
        let singles: f64 = refs.iter().map(|s| batch_loss(&model, &[*s]).unwrap()).sum::<f64>() / 4.0;
        assert!((whole - singles).abs() < 1e-14);
        let (l2, _) = loss_and_gradients(&model, &refs).unwrap();
        assert!((whole - l2).abs() < 1e-14);
        assert!(batch_loss(&model, &[]).is_err());
    }

    #[test]
    fn symmetric_sample_loss_is_common_rate() {
        let beta = Array2::from_elem((3, 2), 2e-11);
        let ctx = RateContext::new(beta, PilotSet::orthogonal(2), 1.58e11, 1.58e11).unwrap();
        let sample = TrainingSample::from_context(&ctx);
        let mut model = Mlp::build(3, 2, 0);
        for layer in &mut model.layers {
            layer.weights.fill(0.0);
        }
        let loss = batch_loss(&model, &[&sample]).unwrap();
        let r = rate::user_rate(&ctx, &[0.5, 0.5]).unwrap();
        assert!((loss + r[0]).abs() < 1e-12);
        assert!((r[0] - r[1]).abs() < 1e-14);
    }
}
