//! The full cross-system pipeline at toy size: a double-pendulum campaign,
//! models on `log10 S` and `S`, and accuracy tables for Hénon-Heiles and the
//! Standard Map. Outputs go to `chaos_ld_reproduce/` in the temp directory;
//! pass `--release`, the double pendulum is expensive.

use chaos_ld::cli::{reproduce, ReproduceParams};

fn main() -> chaos_ld::Result<()> {
    let params = ReproduceParams {
        dp_n: 1,
        dp_levels: 6,
        hh_n: 20,
        sm_n: 100,
        epochs: 1000,
        train_fraction: 0.5,
        ..ReproduceParams::default()
    };
    let dir = std::env::temp_dir().join("chaos_ld_reproduce");
    let report = reproduce(&params, &dir)?;
    println!(
        "{} training rows, boundary log10 S = {:?}",
        report.training_rows, report.boundary_log_s
    );
    for (name, rows) in [("H", &report.henon_heiles), ("K", &report.standard_map)] {
        for r in rows {
            println!(
                "{name} = {:<9.6} rows {:>4}  log10 S {:>6.1}%  S {:>6.1}%",
                r.parameter,
                r.rows,
                100.0 * r.log_s,
                100.0 * r.s
            );
        }
    }
    println!("outputs in {}", dir.display());
    Ok(())
}
