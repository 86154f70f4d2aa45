//! SALI of one regular and one chaotic reference orbit for the Standard Map
//! and for Hénon-Heiles, with the fitted asymptotic behaviour.

use chaos_ld::indicators::{default_sali_threshold, fit_sali_asymptote, label_series};
use chaos_ld::propagation::{iterate_map_sali, propagate_sali, IntegratorConfig, SaliSeries};
use chaos_ld::reference::*;
use chaos_ld::systems::SystemSpec;

fn report(name: &str, sys: &SystemSpec, series: &SaliSeries) -> chaos_ld::Result<()> {
    let fit = fit_sali_asymptote(series, sys.kind())?;
    println!(
        "{name:<22} final log10 SALI {:>7.2}  label {:?}  fit {:?} {:.3}",
        series.final_log10(),
        label_series(series, default_sali_threshold(sys.kind())),
        fit.kind,
        fit.value
    );
    Ok(())
}

fn main() -> chaos_ld::Result<()> {
    let map = SystemSpec::standard_map(STANDARD_MAP_K)?;
    for (name, x0) in [("map regular", STANDARD_MAP_REGULAR), ("map chaotic", STANDARD_MAP_CHAOTIC)] {
        report(name, &map, &iterate_map_sali(&map, x0, 100_000, 1.2)?)?;
    }

    let hh = SystemSpec::henon_heiles();
    let section = hh.default_section()?;
    let cfg = IntegratorConfig::default().with_tolerance(1e-10);
    for (name, p) in [
        ("henon-heiles regular", HENON_HEILES_REGULAR),
        ("henon-heiles chaotic", HENON_HEILES_CHAOTIC),
    ] {
        let s0 = hh.solve_constrained_momentum(&section, p, HENON_HEILES_ENERGY)?;
        report(name, &hh, &propagate_sali(&hh, &s0, 1e4, 1.2, &cfg)?)?;
    }
    Ok(())
}
