//! Valley threshold of the pooled `log10 S` histogram of a Standard Map
//! ensemble, compared with the SALI labels.

use chaos_ld::ensembles::{find_threshold, generate_dataset, EnsembleSpec, ThresholdConfig};
use chaos_ld::indicators::Label;

fn main() -> chaos_ld::Result<()> {
    let data = generate_dataset(&EnsembleSpec::standard_map(&[0.971635, 1.5], 500, 3)?)?;
    let pairs: Vec<(f64, Label)> = data.records.iter().filter_map(|r| Some((r.log10_s?, r.label))).collect();
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();

    let result = find_threshold(&values, &ThresholdConfig::default())?;
    println!(
        "threshold log10 S = {:.3} (peaks at {:.2} and {:.2}, {} iterations, converged {})",
        result.threshold, result.peaks[0], result.peaks[1], result.iterations, result.converged
    );
    let agree = pairs
        .iter()
        .filter(|(v, l)| (*v > result.threshold) == (*l == Label::Chaotic))
        .count();
    println!("agreement with SALI labels: {:.1}%", 100.0 * agree as f64 / pairs.len() as f64);

    let h = &result.histogram;
    let peak = h.counts.iter().copied().max().unwrap_or(1).max(1);
    for (i, &c) in h.counts.iter().enumerate().step_by(4) {
        println!("{:>7.2} {}", h.center(i), "#".repeat((60 * c / peak) as usize));
    }
    Ok(())
}
