//! Uplink max-min power control for cell-free massive MIMO.
//!
//! APs and users share a wrapped square; [`geometry`] draws positions,
//! three-slope pathloss and log-normal shadowing into the large-scale
//! fading matrix `beta`. [`rate`] turns `beta` and a power allocation
//! `q ∈ [0, 1]^K` into closed-form per-user rates under conjugate
//! beamforming. [`solver`] finds the max-min allocation exactly by bisection
//! on a common SINR target, and [`dnn`] trains a small network to predict it
//! from `beta` alone with the negative minimum rate as the loss. [`harness`]
//! holds datasets, checkpoints, evaluation and reports; the `cellfree`
//! binary drives it from the command line.
//!
//! ```
//! use cellfree::config::SystemConfig;
//! use cellfree::geometry::{generate_realization, Placement};
//! use cellfree::rate::{min_rate, RateContext};
//! use cellfree::solver::solve_maxmin_bisection;
//!
//! let cfg = SystemConfig::reference(30, 5);
//! let net = generate_realization(&cfg, 1, Placement::UniformRandom)?;
//! let ctx = RateContext::from_config(net.beta, &cfg)?;
//! let best = solve_maxmin_bisection(&ctx)?;
//! assert!(best.rate_star >= min_rate(&ctx, &[1.0; 5])?.value);
//! # Ok::<(), cellfree::Error>(())
//! ```
//!
//! Runnable examples, one per capability:
//!
//! | example | shows |
//! |---|---|
//! | `pathloss_fading` | pathloss curve and a fading realization |
//! | `rate_model` | SINR terms and rates for chosen allocations |
//! | `maxmin_baseline` | bisection against grid search and full power |
//! | `train_dnn` | offline training and a test-set comparison |
//! | `online_finetune` | per-sample refinement of a trained network |
//! | `mobility` | moving users over grid APs |
//! | `timing` | single-thread cost of each method |
//! | `reproduce_table` | the full static protocol with saved reports |

pub mod config;
pub mod dnn;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod rate;
pub mod solver;

pub use error::{Error, Result};
