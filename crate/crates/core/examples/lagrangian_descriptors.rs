//! Lagrangian descriptors and the D, R, C, S indicators along a line of
//! Standard Map initial conditions, next to the SALI label of each point.

use chaos_ld::indicators::{measure_point, IndicatorConfig};
use chaos_ld::systems::{SystemKind, SystemSpec};

fn main() -> chaos_ld::Result<()> {
    let map = SystemSpec::standard_map(1.5)?;
    let cfg = IndicatorConfig::for_kind(SystemKind::StandardMap);
    println!("{:>6} {:>12} {:>10} {:>10} {:>10} {:>9} {:>9}  label", "q", "LD", "D", "R", "C", "log10 S", "SALI");
    for i in 0..=20 {
        let q = 0.025 + 0.0475 * i as f64;
        let rec = measure_point(&map, None, [q, 0.1], None, &cfg)?;
        println!(
            "{:>6.3} {:>12.5e} {:>10.3e} {:>10.3e} {:>10.3e} {:>9.3} {:>9.2}  {:?}",
            q,
            rec.ld_center,
            rec.indicators.d,
            rec.indicators.r,
            rec.indicators.c,
            rec.log10_s.unwrap_or(f64::NEG_INFINITY),
            rec.sali_log10,
            rec.label
        );
    }

    let hh = SystemSpec::henon_heiles();
    let mut cfg = IndicatorConfig::for_kind(SystemKind::HenonHeiles);
    cfg.sali_horizon = 1e4;
    cfg.sali_integrator = cfg.sali_integrator.with_tolerance(1e-10);
    for p in [chaos_ld::reference::HENON_HEILES_REGULAR, chaos_ld::reference::HENON_HEILES_CHAOTIC] {
        let rec = measure_point(&hh, None, p, Some(chaos_ld::reference::HENON_HEILES_ENERGY), &cfg)?;
        println!(
            "henon-heiles {p:?}: log10 S {:.3}, log10 SALI {:.2}, {:?}",
            rec.log10_s.unwrap_or(f64::NEG_INFINITY),
            rec.sali_log10,
            rec.label
        );
    }
    Ok(())
}
