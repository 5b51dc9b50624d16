//! Exact max-min power control by bisection, checked against a grid search
//! on a two-user network and against full power on the reference network.
//!
//!     cargo run --release --example maxmin_baseline

use cellfree::config::SystemConfig;
use cellfree::geometry::{generate_realization, Placement};
use cellfree::rate::{min_rate, RateContext};
use cellfree::solver::{brute_force_maxmin, max_power_allocation, solve_maxmin_bisection};

fn main() -> cellfree::Result<()> {
    let small = SystemConfig::reference(3, 2);
    let r = generate_realization(&small, 42, Placement::UniformRandom)?;
    let ctx = RateContext::from_config(r.beta, &small)?;
    let sol = solve_maxmin_bisection(&ctx)?;
    let grid = brute_force_maxmin(&ctx, 200)?;
    println!(
        "3 APs, 2 users: bisection {:.6} in {} steps at q = {:.4?}; grid {:.6} at q = {:.4?}",
        sol.rate_star,
        sol.bisection_iterations,
        &sol.q_star[..],
        min_rate(&ctx, &grid)?.value,
        &grid[..]
    );

    let cfg = SystemConfig::reference(30, 5);
    for seed in 0..5 {
        let r = generate_realization(&cfg, seed, Placement::UniformRandom)?;
        let ctx = RateContext::from_config(r.beta, &cfg)?;
        let sol = solve_maxmin_bisection(&ctx)?;
        let full = min_rate(&ctx, &max_power_allocation(cfg.num_users))?.value;
        println!(
            "seed {seed}: max-min {:.4} vs full power {:.4} bit/s/Hz, t* = {:.4}, q* = {:.3?}",
            sol.rate_star,
            full,
            sol.t_star,
            &sol.q_star[..]
        );
    }
    Ok(())
}
