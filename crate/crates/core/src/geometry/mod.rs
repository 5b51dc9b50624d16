//! Network layouts and the large-scale fading they induce.
//!
//! Distances are measured on the torus `[0, D)²` so that the square area
//! behaves as if it were wrapped around at its edges. Pathloss follows the
//! three-slope model built on the COST-231 Hata constant; log-normal
//! shadowing multiplies it in the linear domain.

mod mobility;

pub use mobility::{Direction, MobilityState, DIRECTION_HOLD_S, MAX_SPEED_MPS};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Distances below this are clamped before evaluating the pathloss.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Deterministic generator for one `(seed, stream)` pair.
///
/// Dataset sample `i` of split `s` draws from stream `(s << 40) | i`, so any
/// sample can be regenerated on its own and samples can be produced in
/// parallel.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn torus_distance(a: Point, b: Point, side: f64) -> f64 {
    let wrap = |delta: f64| {
        let d = delta.abs();
        d.min(side - d)
    };
    let dx = wrap(a[0] - b[0]);
    let dy = wrap(a[1] - b[1]);
    dx.hypot(dy)
}

/// COST-231 Hata constant `L` in dB (frequency in MHz, heights in metres).
pub fn hata_constant_db(cfg: &SystemConfig) -> f64 {
    let f = (cfg.carrier_freq_hz / 1e6).log10();
    46.3 + 33.9 * f - 13.82 * cfg.ap_height_m.log10() - (1.1 * f - 0.7) * cfg.user_height_m
        + (1.56 * f - 0.8)
}

/// Three-slope pathloss in dB (a negative number: it is a gain).
pub fn path_loss_db(distance_m: f64, cfg: &SystemConfig) -> f64 {
    path_loss_db_with(distance_m, cfg, hata_constant_db(cfg))
}

fn path_loss_db_with(distance_m: f64, cfg: &SystemConfig, hata_db: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M) / 1000.0;
    let d0 = cfg.d0_m / 1000.0;
    let d1 = cfg.d1_m / 1000.0;
    if d > d1 {
        -hata_db - 35.0 * d.log10()
    } else if d > d0 {
        -hata_db - 15.0 * d1.log10() - 20.0 * d.log10()
    } else {
        -hata_db - 15.0 * d1.log10() - 20.0 * d0.log10()
    }
}

/// `beta[m][k] = PL(d_mk) * 10^(sigma_sh * z[m][k] / 10)` in linear scale.
pub fn large_scale_fading(
    cfg: &SystemConfig,
    ap_positions: &[Point],
    user_positions: &[Point],
    shadow_draws: &Array2<f64>,
) -> Result<Array2<f64>> {
    let (m, k) = (ap_positions.len(), user_positions.len());
    if shadow_draws.dim() != (m, k) {
        return Err(Error::dimension(
            "shadow draws",
            format!("{m}x{k}"),
            format!("{:?}", shadow_draws.dim()),
        ));
    }
    let hata = hata_constant_db(cfg);
    Ok(Array2::from_shape_fn((m, k), |(i, j)| {
        let d = torus_distance(ap_positions[i], user_positions[j], cfg.area_side_m);
        let db = path_loss_db_with(d, cfg, hata) + cfg.shadow_std_db * shadow_draws[[i, j]];
        10f64.powf(db / 10.0)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// APs and users uniform on the square.
    UniformRandom,
    /// APs on the configured grid, users uniform.
    GridAps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    pub ap_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// `M x K`, linear scale.
    pub beta: Array2<f64>,
    pub seed: u64,
}

/// AP coordinates on a `cols x rows` grid with half-spacing margins.
pub fn grid_ap_positions(cfg: &SystemConfig) -> Result<Vec<Point>> {
    let grid = cfg
        .ap_grid
        .ok_or_else(|| Error::Config("grid placement needs ap_grid".into()))?;
    if grid.cols * grid.rows != cfg.num_aps {
        return Err(Error::Config(format!(
            "ap_grid {}x{} does not hold {} APs",
            grid.cols, grid.rows, cfg.num_aps
        )));
    }
    let sx = cfg.area_side_m / grid.cols as f64;
    let sy = cfg.area_side_m / grid.rows as f64;
    let mut out = Vec::with_capacity(cfg.num_aps);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            out.push([(c as f64 + 0.5) * sx, (r as f64 + 0.5) * sy]);
        }
    }
    Ok(out)
}

pub fn uniform_positions<R: Rng + ?Sized>(n: usize, side: f64, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect()
}

pub fn shadow_draws<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((m, k), || rng.sample(StandardNormal))
}

/// Draws one realization from `rng`. Order of draws: AP positions (random
/// placement only), user positions, then shadowing in row-major order.
pub fn realization_from_rng<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    placement: Placement,
    seed: u64,
    rng: &mut R,
) -> Result<NetworkRealization> {
    let ap_positions = match placement {
        Placement::UniformRandom => uniform_positions(cfg.num_aps, cfg.area_side_m, rng),
        Placement::GridAps => grid_ap_positions(cfg)?,
    };
    let user_positions = uniform_positions(cfg.num_users, cfg.area_side_m, rng);
    let z = shadow_draws(cfg.num_aps, cfg.num_users, rng);
    let beta = large_scale_fading(cfg, &ap_positions, &user_positions, &z)?;
    Ok(NetworkRealization {
        ap_positions,
        user_positions,
        beta,
        seed,
    })
}

pub fn generate_realization(
    cfg: &SystemConfig,
    seed: u64,
    placement: Placement,
) -> Result<NetworkRealization> {
    cfg.validate()?;
    realization_from_rng(cfg, placement, seed, &mut sample_rng(seed, 0))
}
