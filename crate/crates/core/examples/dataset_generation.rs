//! Sample a Standard Map ensemble, label it by SALI and write the CSV and
//! its JSON sidecar to the temp directory, then read it back.

use chaos_ld::ensembles::{generate_dataset, read_rows, EnsembleSpec};
use chaos_ld::indicators::Label;

fn main() -> chaos_ld::Result<()> {
    let spec = EnsembleSpec::standard_map(&[0.5, 1.5], 200, 7)?;
    let data = generate_dataset(&spec)?;
    println!(
        "{} records ({} regular, {} chaotic), {} discarded",
        data.records.len(),
        data.count(Label::Regular),
        data.count(Label::Chaotic),
        data.discarded
    );
    let path = std::env::temp_dir().join("chaos_ld_example_dataset.csv");
    data.write(&path)?;
    let rows = read_rows(&path)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    for r in rows.iter().take(5) {
        println!("K={:?} q=({:.4}, {:.4}) log10 S={:?} SALI={:.2}", r.param_k, r.q1, r.q2, r.log10_s, r.sali_log10);
    }
    Ok(())
}
