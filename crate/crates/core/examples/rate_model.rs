//! Per-user uplink rates of one network under full power and a few
//! hand-picked allocations, with the SINR split into its terms.
//!
//!     cargo run --release --example rate_model

use cellfree::config::SystemConfig;
use cellfree::geometry::{generate_realization, Placement};
use cellfree::rate::{min_rate, net_throughput, sinr_terms, user_rate, RateContext};

fn main() -> cellfree::Result<()> {
    let cfg = SystemConfig::reference(30, 5);
    let r = generate_realization(&cfg, 3, Placement::UniformRandom)?;
    let ctx = RateContext::from_config(r.beta, &cfg)?;

    let full = vec![1.0; cfg.num_users];
    let terms = sinr_terms(&ctx, &full)?;
    println!("full power:");
    for (k, sinr) in terms.sinr().iter().enumerate() {
        println!(
            "  user {k}: signal {:.3e}, pilot contamination {:.3e}, uncertainty {:.3e}, noise {:.3e}, SINR {sinr:.4}",
            terms.signal[k], terms.contamination[k], terms.uncertainty[k], terms.noise[k]
        );
    }

    for q in [full.clone(), vec![0.5; cfg.num_users], vec![1.0, 0.2, 1.0, 0.2, 1.0]] {
        let rates = user_rate(&ctx, &q)?;
        let worst = min_rate(&ctx, &q)?;
        println!(
            "q = {q:?}\n  rates {:.4?}\n  min {:.4} bit/s/Hz (user {}), {:.2} Mbit/s net",
            rates,
            worst.value,
            worst.user,
            net_throughput(worst.value, &cfg) / 1e6
        );
    }
    Ok(())
}
