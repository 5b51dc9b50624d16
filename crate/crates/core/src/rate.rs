//! Closed-form uplink rates from large-scale statistics.
//!
//! With MMSE estimation from pilots and matched filtering at the APs, user
//! `k` sees
//!
//! ```text
//! SINR_k = q_k (Σ_m γ_mk)² / ( Σ_{k'≠k} q_k' (Σ_m γ_mk β_mk'/β_mk)² |φ_kᴴφ_k'|²
//!                             + Σ_k' q_k' Σ_m γ_mk β_mk'
//!                             + (1/ρ) Σ_m γ_mk )
//! ```
//!
//! and `R_k = log2(1 + SINR_k)` bits/s/Hz. No small-scale fading enters.

use std::ops::Deref;

use ndarray::Array2;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Squared magnitudes of pilot inner products, `|φ_kᴴ φ_k'|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    gram: Array2<f64>,
    tau: usize,
}

impl PilotSet {
    /// One unique orthogonal pilot per user, `tau = k`.
    pub fn orthogonal(k: usize) -> Self {
        PilotSet {
            gram: Array2::eye(k),
            tau: k,
        }
    }

    pub fn from_gram(gram: Array2<f64>, tau: usize) -> Result<Self> {
        let (r, c) = gram.dim();
        if r != c || r == 0 {
            return Err(Error::dimension("pilot gram", "square K x K", format!("{r}x{c}")));
        }
        if tau == 0 {
            return Err(Error::Config("pilot length must be at least 1".into()));
        }
        for i in 0..r {
            if (gram[[i, i]] - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("pilot {i} is not unit-norm")));
            }
            for j in 0..r {
                let g = gram[[i, j]];
                if !(0.0..=1.0 + 1e-12).contains(&g) || (g - gram[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "pilot gram entry ({i},{j}) = {g} must be symmetric and in [0, 1]"
                    )));
                }
            }
        }
        Ok(PilotSet { gram, tau })
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn num_users(&self) -> usize {
        self.gram.nrows()
    }
}

/// Power control coefficients, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        check_range(&q)?;
        Ok(PowerAllocation(q))
    }

    /// Every user at full power.
    pub fn full(k: usize) -> Self {
        PowerAllocation(vec![1.0; k])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PowerAllocation {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_range(q: &[f64]) -> Result<()> {
    match q.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(Error::PowerOutOfRange {
            index,
            value: q[index],
        }),
        None => Ok(()),
    }
}

/// `c_mk = √(τρ_p) β_mk / (τρ_p Σ_k' β_mk' |φ_kᴴφ_k'|² + 1)`.
pub fn c_coeff(beta: &Array2<f64>, pilots: &PilotSet, rho_p: f64) -> Array2<f64> {
    let tau_rho = pilots.tau as f64 * rho_p;
    let scale = tau_rho.sqrt();
    let gram = &pilots.gram;
    let (m, k) = beta.dim();
    Array2::from_shape_fn((m, k), |(i, j)| {
        let contaminated: f64 = (0..k).map(|l| beta[[i, l]] * gram[[j, l]]).sum();
        scale * beta[[i, j]] / (tau_rho * contaminated + 1.0)
    })
}

/// `γ_mk = √(τρ_p) β_mk c_mk`, the mean-square of the channel estimate.
pub fn gamma_coeff(beta: &Array2<f64>, c: &Array2<f64>, tau: usize, rho_p: f64) -> Array2<f64> {
    let scale = (tau as f64 * rho_p).sqrt();
    beta * c * scale
}

/// Everything the rate expression needs for one network realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RateContext {
    pub beta: Array2<f64>,
    pub c: Array2<f64>,
    pub gamma: Array2<f64>,
    pub rho: f64,
    pub pilots: PilotSet,
}

impl RateContext {
    pub fn new(beta: Array2<f64>, pilots: PilotSet, rho: f64, rho_p: f64) -> Result<Self> {
        if beta.ncols() != pilots.num_users() {
            return Err(Error::dimension(
                "beta columns vs pilots",
                pilots.num_users(),
                beta.ncols(),
            ));
        }
        if beta.nrows() == 0 {
            return Err(Error::dimension("beta rows", ">= 1", 0));
        }
        if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Config(format!("large-scale fading must be positive, got {b}")));
        }
        if !(rho > 0.0 && rho_p > 0.0) {
            return Err(Error::Config("normalized SNRs must be positive".into()));
        }
        let c = c_coeff(&beta, &pilots, rho_p);
        let gamma = gamma_coeff(&beta, &c, pilots.tau, rho_p);
        Ok(RateContext {
            beta,
            c,
            gamma,
            rho,
            pilots,
        })
    }

    /// Orthogonal pilots and SNRs taken from `cfg`.
    pub fn from_config(beta: Array2<f64>, cfg: &SystemConfig) -> Result<Self> {
        if beta.dim() != (cfg.num_aps, cfg.num_users) {
            return Err(Error::dimension(
                "beta",
                format!("{}x{}", cfg.num_aps, cfg.num_users),
                format!("{:?}", beta.dim()),
            ));
        }
        if cfg.pilot_length < cfg.num_users {
            return Err(Error::Config(format!(
                "{} orthogonal pilots need pilot_length >= {}, got {}",
                cfg.num_users, cfg.num_users, cfg.pilot_length
            )));
        }
        let snr = cfg.normalized_snr();
        let mut pilots = PilotSet::orthogonal(cfg.num_users);
        pilots.tau = cfg.pilot_length;
        RateContext::new(beta, pilots, snr.data, snr.pilot)
    }

    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.beta.ncols()
    }
}

/// Numerator and the three denominator groups of each user's SINR.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTerms {
    pub signal: Vec<f64>,
    /// Coherent interference through shared pilots.
    pub contamination: Vec<f64>,
    /// Beamforming uncertainty, including the user's own power.
    pub uncertainty: Vec<f64>,
    pub noise: Vec<f64>,
}

impl SinrTerms {
    pub fn sinr(&self) -> Vec<f64> {
        (0..self.signal.len())
            .map(|k| self.signal[k] / (self.contamination[k] + self.uncertainty[k] + self.noise[k]))
            .collect()
    }
}

pub fn sinr_terms(ctx: &RateContext, q: &[f64]) -> Result<SinrTerms> {
    let k_users = ctx.num_users();
    if q.len() != k_users {
        return Err(Error::dimension("power allocation", k_users, q.len()));
    }
    check_range(q)?;
    let (gamma, beta, gram) = (&ctx.gamma, &ctx.beta, &ctx.pilots.gram);
    let m_aps = ctx.num_aps();
    let mut terms = SinrTerms {
        signal: vec![0.0; k_users],
        contamination: vec![0.0; k_users],
        uncertainty: vec![0.0; k_users],
        noise: vec![0.0; k_users],
    };
    for k in 0..k_users {
        let gamma_sum: f64 = (0..m_aps).map(|m| gamma[[m, k]]).sum();
        terms.signal[k] = q[k] * gamma_sum * gamma_sum;
        terms.noise[k] = gamma_sum / ctx.rho;
        for j in 0..k_users {
            let cross: f64 = (0..m_aps).map(|m| gamma[[m, k]] * beta[[m, j]]).sum();
            terms.uncertainty[k] += q[j] * cross;
            if j != k && gram[[k, j]] != 0.0 {
                let ratio: f64 = (0..m_aps)
                    .map(|m| gamma[[m, k]] * beta[[m, j]] / beta[[m, k]])
                    .sum();
                terms.contamination[k] += q[j] * ratio * ratio * gram[[k, j]];
            }
        }
    }
    Ok(terms)
}

/// Per-user rates in bits/s/Hz.
pub fn user_rate(ctx: &RateContext, q: &[f64]) -> Result<Vec<f64>> {
    Ok(sinr_terms(ctx, q)?.sinr().into_iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect())
}

/// Smallest rate and the user attaining it (lowest index on ties).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinRate {
    pub value: f64,
    pub user: usize,
}

pub fn argmin(values: &[f64]) -> MinRate {
    let mut best = MinRate {
        value: f64::INFINITY,
        user: 0,
    };
    for (user, &value) in values.iter().enumerate() {
        if value < best.value {
            best = MinRate { value, user };
        }
    }
    best
}

pub fn min_rate(ctx: &RateContext, q: &[f64]) -> Result<MinRate> {
    Ok(argmin(&user_rate(ctx, q)?))
}

/// Net throughput in bit/s after pilot and duplexing overhead.
pub fn net_throughput(rate: f64, cfg: &SystemConfig) -> f64 {
    cfg.bandwidth_hz * cfg.overhead_factor() * rate
}
