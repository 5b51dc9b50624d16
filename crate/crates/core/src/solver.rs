//! Exact max-min power control.
//!
//! The rate expression regroups as `SINR_k(q) = q_k A_k / ((B q)_k + C_k)`
//! with non-negative coefficients. For a common SINR target `t` the map
//! `q ↦ min(1, (t / A_k)((B q)_k + C_k))` is a standard interference
//! function: iterating it from zero climbs monotonically to the
//! minimal-power solution, which either meets the target (feasible) or
//! pins some user at full power short of it (infeasible). Bisection on `t`
//! then recovers the max-min optimum.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::rate::{self, PowerAllocation, RateContext};

/// Relative width at which bisection on the SINR target stops.
pub const BISECTION_REL_TOL: f64 = 1e-4;
/// Relative SINR slack accepted when certifying feasibility.
pub const FEASIBILITY_REL_TOL: f64 = 1e-9;
/// Fixed-point convergence threshold on the per-iteration change.
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// `SINR_k = q_k A_k / ((B q)_k + C_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrCoefficients {
    /// `(Σ_m γ_mk)²`
    pub a: Vec<f64>,
    /// Pilot contamination (off-diagonal) plus beamforming uncertainty.
    pub b: Array2<f64>,
    /// `(1/ρ) Σ_m γ_mk`
    pub c: Vec<f64>,
}

impl SinrCoefficients {
    pub fn from_context(ctx: &RateContext) -> Self {
        let (m_aps, k_users) = ctx.beta.dim();
        let (gamma, beta, gram) = (&ctx.gamma, &ctx.beta, ctx.pilots.gram());
        let mut a = vec![0.0; k_users];
        let mut c = vec![0.0; k_users];
        let mut b = Array2::zeros((k_users, k_users));
        for k in 0..k_users {
            let gamma_sum: f64 = gamma.column(k).sum();
            a[k] = gamma_sum * gamma_sum;
            c[k] = gamma_sum / ctx.rho;
            for j in 0..k_users {
                let mut cross = 0.0;
                let mut ratio = 0.0;
                for m in 0..m_aps {
                    cross += gamma[[m, k]] * beta[[m, j]];
                    ratio += gamma[[m, k]] * beta[[m, j]] / beta[[m, k]];
                }
                let contamination = if j != k { ratio * ratio * gram[[k, j]] } else { 0.0 };
                b[[k, j]] = contamination + cross;
            }
        }
        SinrCoefficients { a, b, c }
    }

    pub fn num_users(&self) -> usize {
        self.a.len()
    }

    /// `(B q)_k + C_k` for every user.
    pub fn interference(&self, q: &[f64]) -> Vec<f64> {
        (0..self.num_users())
            .map(|k| {
                let row = self.b.row(k);
                row.iter().zip(q).map(|(b, q)| b * q).sum::<f64>() + self.c[k]
            })
            .collect()
    }

    pub fn sinr(&self, q: &[f64]) -> Vec<f64> {
        self.interference(q)
            .into_iter()
            .enumerate()
            .map(|(k, den)| q[k] * self.a[k] / den)
            .collect()
    }

    pub fn rates(&self, q: &[f64]) -> Vec<f64> {
        self.sinr(q).into_iter().map(sinr_to_rate).collect()
    }

    /// Every SINR at least `t` up to `FEASIBILITY_REL_TOL`.
    pub fn meets_target(&self, q: &[f64], t: f64) -> bool {
        self.sinr(q).iter().all(|s| *s >= t * (1.0 - FEASIBILITY_REL_TOL))
    }

    pub fn min_rate(&self, q: &[f64]) -> rate::MinRate {
        rate::argmin(&self.rates(q))
    }

    /// Interference-free full-power bound `max_k A_k / C_k`.
    pub fn t_max(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.c)
            .map(|(a, c)| a / c)
            .fold(0.0, f64::max)
    }
}

pub fn sinr_to_rate(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

pub fn sinr_coefficients(ctx: &RateContext) -> SinrCoefficients {
    SinrCoefficients::from_context(ctx)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// Minimal-power allocation meeting the target.
    Feasible(PowerAllocation),
    Infeasible,
    /// The iteration cap was hit before convergence.
    Undecided,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOutcome {
    pub feasibility: Feasibility,
    pub iterations: usize,
}

pub fn feasibility_fixed_point(t: f64, coeffs: &SinrCoefficients) -> Feasibility {
    feasibility_fixed_point_with(t, coeffs, FixedPointOptions::default()).feasibility
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Iterations after which the uncapped linear system is solved directly
    /// instead; `None` keeps iterating up to `max_iter`.
    pub direct_solve_after: Option<usize>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            max_iter: FIXED_POINT_MAX_ITER,
            direct_solve_after: Some(64),
        }
    }
}

impl FixedPointOptions {
    /// Plain iteration without the direct solve.
    pub fn iterate_only(max_iter: usize) -> Self {
        FixedPointOptions {
            max_iter,
            direct_solve_after: None,
        }
    }
}

/// Runs `q ← min(1, (t/A)(Bq + C))` from `q = 0`.
///
/// Iterates never decrease, so once some user's uncapped update exceeds
/// `1 / (1 - FEASIBILITY_REL_TOL)` the limit is certified infeasible and
/// the iteration stops early. Convergence requires every component to
/// change by less than `FIXED_POINT_TOL` relative to its value (hence also
/// absolutely, as `q <= 1`).
///
/// Near the feasibility boundary the contraction factor approaches 1. After
/// `direct_solve_after` iterations the uncapped fixed point is computed from
/// `(I - T) q = c` with `T = t A⁻¹ B`, `c = t A⁻¹ C`: a non-negative
/// solution certifies `ρ(T) < 1` and is the minimal fixed point, so the
/// target is feasible iff that solution is at most 1.
pub fn feasibility_fixed_point_with(
    t: f64,
    coeffs: &SinrCoefficients,
    options: FixedPointOptions,
) -> FixedPointOutcome {
    let k_users = coeffs.num_users();
    if t <= 0.0 {
        return FixedPointOutcome {
            feasibility: Feasibility::Feasible(PowerAllocation::new(vec![0.0; k_users]).unwrap()),
            iterations: 0,
        };
    }
    let overshoot = 1.0 / (1.0 - FEASIBILITY_REL_TOL);
    let scale: Vec<f64> = coeffs.a.iter().map(|a| t / a).collect();
    let mut q = vec![0.0; k_users];
    let mut next = vec![0.0; k_users];
    let mut direct_tried = false;
    for iteration in 1..=options.max_iter {
        if !direct_tried && options.direct_solve_after.is_some_and(|n| iteration > n) {
            direct_tried = true;
            match direct_fixed_point(&scale, coeffs) {
                DirectSolve::Infeasible => {
                    return FixedPointOutcome {
                        feasibility: Feasibility::Infeasible,
                        iterations: iteration,
                    }
                }
                DirectSolve::Candidate(candidate) => {
                    if coeffs.meets_target(&candidate, t) {
                        return FixedPointOutcome {
                            feasibility: Feasibility::Feasible(
                                PowerAllocation::new(candidate).expect("clamped to [0, 1]"),
                            ),
                            iterations: iteration,
                        };
                    }
                }
                DirectSolve::Inconclusive => {}
            }
        }
        let mut converged = true;
        for k in 0..k_users {
            let row = coeffs.b.row(k);
            let load: f64 = row.iter().zip(&q).map(|(b, q)| b * q).sum::<f64>() + coeffs.c[k];
            let raw = scale[k] * load;
            if raw > overshoot {
                return FixedPointOutcome {
                    feasibility: Feasibility::Infeasible,
                    iterations: iteration,
                };
            }
            let v = raw.min(1.0);
            debug_assert!(v >= q[k] * (1.0 - 1e-12), "fixed-point iterate decreased");
            if (v - q[k]).abs() > FIXED_POINT_TOL * v {
                converged = false;
            }
            next[k] = v;
        }
        std::mem::swap(&mut q, &mut next);
        if converged {
            let feasibility = if coeffs.meets_target(&q, t) {
                Feasibility::Feasible(PowerAllocation::new(q).expect("iterates stay in [0, 1]"))
            } else {
                Feasibility::Infeasible
            };
            return FixedPointOutcome {
                feasibility,
                iterations: iteration,
            };
        }
    }
    FixedPointOutcome {
        feasibility: Feasibility::Undecided,
        iterations: options.max_iter,
    }
}

enum DirectSolve {
    Infeasible,
    Candidate(Vec<f64>),
    Inconclusive,
}

fn direct_fixed_point(scale: &[f64], coeffs: &SinrCoefficients) -> DirectSolve {
    let k_users = scale.len();
    let mut lhs = Array2::<f64>::eye(k_users);
    let mut rhs = vec![0.0; k_users];
    for k in 0..k_users {
        for j in 0..k_users {
            lhs[[k, j]] -= scale[k] * coeffs.b[[k, j]];
        }
        rhs[k] = scale[k] * coeffs.c[k];
    }
    let Some(q) = solve_dense(lhs, rhs) else {
        // singular I - T: spectral radius reached 1
        return DirectSolve::Infeasible;
    };
    if q.iter().any(|v| !v.is_finite()) {
        return DirectSolve::Inconclusive;
    }
    if q.iter().any(|v| *v < 0.0) {
        // no non-negative solution, so rho(T) >= 1
        return DirectSolve::Infeasible;
    }
    if q.iter().any(|v| *v > 1.0 / (1.0 - FEASIBILITY_REL_TOL)) {
        return DirectSolve::Infeasible;
    }
    DirectSolve::Candidate(q.into_iter().map(|v| v.min(1.0)).collect())
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut a: Array2<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))?;
        if a[[pivot, col]].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap([col, j], [pivot, j]);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[[row, col]] / a[[col, col]];
            if f != 0.0 {
                for j in col..n {
                    a[[row, j]] -= f * a[[col, j]];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|j| a[[row, j]] * x[j]).sum();
        x[row] = (b[row] - tail) / a[[row, row]];
    }
    Some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinSolution {
    pub q_star: PowerAllocation,
    /// Largest SINR target certified feasible.
    pub t_star: f64,
    /// Minimum rate achieved by `q_star`, bits/s/Hz.
    pub rate_star: f64,
    pub bisection_iterations: usize,
    /// Every probed target with its verdict, in probe order.
    pub trace: Vec<(f64, bool)>,
}

pub fn solve_maxmin_bisection(ctx: &RateContext) -> Result<MaxMinSolution> {
    solve_maxmin(&SinrCoefficients::from_context(ctx))
}

/// Bisection on the common SINR target over `[0, t_max]`.
///
/// The minimal-power allocation at the last feasible target is rescaled so
/// that its largest entry is 1; scaling all powers up raises every SINR, so
/// this never lowers the minimum rate.
pub fn solve_maxmin(coeffs: &SinrCoefficients) -> Result<MaxMinSolution> {
    let k_users = coeffs.num_users();
    let mut lo = 0.0;
    let mut hi = coeffs.t_max();
    let mut q_lo = vec![0.0; k_users];
    let mut trace = Vec::new();
    while (hi - lo) / hi >= BISECTION_REL_TOL {
        let mid = 0.5 * (lo + hi);
        match feasibility_fixed_point(mid, coeffs) {
            Feasibility::Feasible(q) => {
                trace.push((mid, true));
                lo = mid;
                q_lo = q.into_inner();
            }
            Feasibility::Infeasible => {
                trace.push((mid, false));
                hi = mid;
            }
            Feasibility::Undecided => {
                return Err(Error::Undecided {
                    target: mid,
                    iterations: FIXED_POINT_MAX_ITER,
                    trace,
                })
            }
        }
    }
    let peak = q_lo.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        q_lo.iter_mut().for_each(|v| *v = (*v / peak).min(1.0));
    }
    let rate_star = coeffs.min_rate(&q_lo).value;
    Ok(MaxMinSolution {
        q_star: PowerAllocation::new(q_lo)?,
        t_star: lo,
        rate_star,
        bisection_iterations: trace.len(),
        trace,
    })
}

/// Exhaustive search over a `resolution`-point grid per axis of `[0,1]^K`,
/// scored with the direct rate expression.
pub fn brute_force_maxmin(ctx: &RateContext, resolution: usize) -> Result<PowerAllocation> {
    let k_users = ctx.num_users();
    if k_users > 3 {
        return Err(Error::Config(format!("brute force supports K <= 3, got {k_users}")));
    }
    if resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let total = resolution.pow(k_users as u32);
    let mut best = (f64::NEG_INFINITY, vec![0.0; k_users]);
    let mut q = vec![0.0; k_users];
    for mut idx in 0..total {
        for v in q.iter_mut() {
            *v = (idx % resolution) as f64 * step;
            idx /= resolution;
        }
        let value = rate::min_rate(ctx, &q)?.value;
        if value > best.0 {
            best = (value, q.clone());
        }
    }
    PowerAllocation::new(best.1)
}

pub fn max_power_allocation(k: usize) -> PowerAllocation {
    PowerAllocation::full(k)
}
