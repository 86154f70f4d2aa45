//! Train a linear classifier on `log10 S` of Standard Map orbits at one
//! nonlinearity and score it on other nonlinearities and on Hénon-Heiles.

use chaos_ld::ensembles::{generate_dataset, EnsembleSpec};
use chaos_ld::svm::{evaluate, fit, FeatureRecipe, LinearSvmModel, TrainConfig, TrainingSet};

fn main() -> chaos_ld::Result<()> {
    let train = generate_dataset(&EnsembleSpec::standard_map(&[1.5], 400, 11)?)?.rows();
    let recipe = FeatureRecipe::LogSOnly;
    let cfg = TrainConfig {
        epochs: 500,
        ..TrainConfig::default()
    };
    let (model, loss) = fit(&TrainingSet::from_rows(&train, recipe)?, recipe, &cfg)?;
    println!(
        "trained on {} rows: loss {:.4} -> {:.4}, boundary log10 S = {:.3}",
        train.len(),
        loss[0],
        loss[loss.len() - 1],
        model.boundary().unwrap_or(f64::NAN)
    );

    let json = model.to_json()?;
    let model = LinearSvmModel::from_json(&json)?;

    let sm = generate_dataset(&EnsembleSpec::standard_map(&[0.5, 0.971635], 300, 12)?)?.rows();
    let report = evaluate(&model, &sm)?;
    for case in &report.per_case {
        println!("{:<32} accuracy {:.1}%", case.case, 100.0 * case.accuracy);
    }

    let mut hh_spec = EnsembleSpec::henon_heiles(&[1.0 / 8.0], 40, 13)?;
    hh_spec.indicators.sali_horizon = 1e4;
    hh_spec.indicators.sali_integrator = hh_spec.indicators.sali_integrator.with_tolerance(1e-10);
    let hh = generate_dataset(&hh_spec)?.rows();
    let report = evaluate(&model, &hh)?;
    println!(
        "henon-heiles E=1/8: accuracy {:.1}% (tp {}, tn {}, fp {}, fn {})",
        100.0 * report.accuracy,
        report.confusion.tp,
        report.confusion.tn,
        report.confusion.fp,
        report.confusion.fn_
    );
    Ok(())
}
