//! Three-slope pathloss curve and one large-scale fading realization.
//!
//!     cargo run --release --example pathloss_fading -- [seed]

use cellfree::config::SystemConfig;
use cellfree::geometry::{generate_realization, hata_constant_db, path_loss_db, Placement};

fn main() -> cellfree::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = SystemConfig::reference(30, 5);
    println!("Hata constant L = {:.4} dB", hata_constant_db(&cfg));
    println!("{:>10} {:>12}", "d (m)", "PL (dB)");
    for d in [1.0, 5.0, 10.0, 25.0, 50.0, 100.0, 200.0, 400.0, 700.0] {
        println!("{d:>10.0} {:>12.2}", path_loss_db(d, &cfg));
    }

    let r = generate_realization(&cfg, seed, Placement::UniformRandom)?;
    println!("\nbeta for seed {seed} (dB), strongest AP per user:");
    for k in 0..cfg.num_users {
        let column = r.beta.column(k);
        let (m, best) = column
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (m, &b)| if b > acc.1 { (m, b) } else { acc });
        let mean_db = column.iter().map(|b| 10.0 * b.log10()).sum::<f64>() / column.len() as f64;
        println!(
            "user {k} at ({:.0}, {:.0}) m: AP {m} at {:.1} dB, mean {:.1} dB",
            r.user_positions[k][0],
            r.user_positions[k][1],
            10.0 * best.log10(),
            mean_db
        );
    }
    Ok(())
}
