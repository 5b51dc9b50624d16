use super::model::{Gradients, Mlp};
use crate::config::TrainConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl From<&TrainConfig> for AdamConfig {
    fn from(cfg: &TrainConfig) -> Self {
        AdamConfig {
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            epsilon: cfg.adam_epsilon,
        }
    }
}

/// First and second moment estimates, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &Mlp) -> Self {
        AdamState {
            first: Gradients::zeros_like(model),
            second: Gradients::zeros_like(model),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `model` in place.
pub fn adam_step(
    model: &mut Mlp,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    cfg: AdamConfig,
) -> Result<()> {
    if !grads.shape_matches(model) || !state.first.shape_matches(model) {
        return Err(Error::dimension(
            "adam step",
            "gradients shaped like the model",
            "mismatched shapes",
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    };
    for (l, layer) in model.layers.iter_mut().enumerate() {
        let (gw, gb) = &grads.layers[l];
        let (mw, mb) = &mut state.first.layers[l];
        let (vw, vb) = &mut state.second.layers[l];
        ndarray::Zip::from(&mut layer.weights)
            .and(gw)
            .and(mw)
            .and(vw)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut layer.bias)
            .and(gb)
            .and(mb)
            .and(vb)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}
