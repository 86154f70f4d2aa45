//! The four model systems: potential minima, energies of sample states and
//! a Standard Map round trip through its inverse.

use chaos_ld::systems::SystemSpec;

fn main() -> chaos_ld::Result<()> {
    let flows = [
        SystemSpec::double_pendulum(1.0, 1.0)?,
        SystemSpec::four_well(1.0, 1.0, 0.5)?,
        SystemSpec::henon_heiles(),
    ];
    for sys in flows {
        let flow = sys.flow("example")?;
        let (v_min, q_min) = flow.potential_minimum();
        let s = [q_min[0] + 0.1, q_min[1] - 0.05, 0.2, 0.1];
        println!(
            "{:<16} V_min = {v_min:>8.4} at ({:.3}, {:.3})   H(s) = {:.6}",
            sys.kind().name(),
            q_min[0],
            q_min[1],
            sys.energy(&s)?
        );
    }

    let map = SystemSpec::standard_map(1.5)?;
    let x0 = [0.3, 0.7];
    let x1 = map.map_step(x0)?;
    let back = map.map_inverse(x1)?;
    let t = map.map_tangent(x0)?;
    println!(
        "standard-map     {x0:?} -> {x1:.6?} -> {back:.6?}   det T = {:.15}",
        t[0][0] * t[1][1] - t[0][1] * t[1][0]
    );
    Ok(())
}
