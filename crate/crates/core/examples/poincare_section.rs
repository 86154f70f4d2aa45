//! Poincaré section of the Hénon-Heiles reference orbits, written as CSV
//! (`orbit_id,y,p_y`) to standard output.

use chaos_ld::propagation::{poincare_section, IntegratorConfig};
use chaos_ld::reference::*;
use chaos_ld::systems::SystemSpec;

fn main() -> chaos_ld::Result<()> {
    let hh = SystemSpec::henon_heiles();
    let section = hh.default_section()?;
    let cfg = IntegratorConfig::default().with_tolerance(1e-10);
    println!("orbit_id,y,p_y");
    for (id, p) in [HENON_HEILES_REGULAR, HENON_HEILES_CHAOTIC].into_iter().enumerate() {
        let s0 = hh.solve_constrained_momentum(&section, p, HENON_HEILES_ENERGY)?;
        let points = poincare_section(&hh, &s0, &section, 500, 1e5, &cfg)?;
        let drift = points
            .iter()
            .map(|&q| hh.solve_constrained_momentum(&section, q, HENON_HEILES_ENERGY).is_ok())
            .filter(|ok| !ok)
            .count();
        eprintln!("orbit {id}: {} crossings, {drift} outside the energy shell", points.len());
        for [y, py] in points {
            println!("{id},{y:.10},{py:.10}");
        }
    }
    Ok(())
}
