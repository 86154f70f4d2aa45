use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_json, Outputs};
use crate::ensembles::dataset::sig17;
use crate::ensembles::{
    find_threshold, generate_dataset, read_rows, sample_ensemble, DatasetRow, EnsembleCase, EnsembleSpec,
    ThresholdConfig, ThresholdResult,
};
use crate::error::{Error, Result};
use crate::indicators::{default_sali_threshold, fit_sali_asymptote, AsymptoteFit, Label};
use crate::propagation::{iterate_map_sali, poincare_section, propagate_sali, IntegratorConfig};
use crate::svm::{evaluate as evaluate_model, fit, EvalReport, FeatureRecipe, LinearSvmModel, TrainConfig, TrainingSet};
use crate::systems::{PhaseState, SystemKind, SystemSpec};

fn is_false(b: &bool) -> bool {
    !*b
}

/// Builds a system from the command's kind and parameter flags. The double
/// pendulum defaults to `α = σ = 1`; the four-well potential needs all three.
fn system_spec(
    kind: Option<SystemKind>,
    alpha: Option<f64>,
    sigma: Option<f64>,
    beta: Option<f64>,
    delta: Option<f64>,
    k: Option<f64>,
) -> Result<SystemSpec> {
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Error::InvalidParameter(format!("missing --{flag}")));
    match kind.ok_or_else(|| Error::InvalidParameter("missing --system".into()))? {
        SystemKind::DoublePendulum => SystemSpec::double_pendulum(alpha.unwrap_or(1.0), sigma.unwrap_or(1.0)),
        SystemKind::FourWell => SystemSpec::four_well(need(alpha, "alpha")?, need(beta, "beta")?, need(delta, "delta")?),
        SystemKind::HenonHeiles => Ok(SystemSpec::henon_heiles()),
        SystemKind::StandardMap => SystemSpec::standard_map(need(k, "K")?),
    }
}

/// Writes `rows` with an explicit header, so an empty table still has one.
fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(std::io::BufWriter::new(file));
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<DatasetRow>> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("missing --dataset".into()));
    }
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_rows(p)?);
    }
    Ok(rows)
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Standard Map nonlinearities, comma separated.
    #[arg(long = "K", value_delimiter = ',')]
    #[serde(rename = "K", skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<f64>,
    /// Energies, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub energy: Vec<f64>,
    /// Evenly spaced energy levels per parameter case instead of --energy.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Use the four double-pendulum parameter cases of the training campaign.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub campaign: bool,
    /// Initial conditions per case.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Descriptor iterations for the map.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<u64>,
    /// Descriptor integration time for flows.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_ld: Option<f64>,
    /// SALI horizon: time for flows, iterations for the map.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_sali: Option<f64>,
    /// Integrator tolerance of the SALI runs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sali_tol: Option<f64>,
    /// Neighbour spacing of the descriptor stencil.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stencil: Option<f64>,
    /// Output file stem.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateParams {
    pub system: Option<SystemKind>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub energy: Vec<f64>,
    pub levels: Option<usize>,
    pub campaign: bool,
    pub n: usize,
    pub seed: u64,
    pub iters: Option<u64>,
    pub tau_ld: Option<f64>,
    pub t_sali: Option<f64>,
    pub sali_tol: Option<f64>,
    pub stencil: Option<f64>,
    pub name: String,
}

impl Default for GenerateParams {
    fn default() -> Self {
        GenerateParams {
            system: None,
            alpha: None,
            sigma: None,
            beta: None,
            delta: None,
            k: Vec::new(),
            energy: Vec::new(),
            levels: None,
            campaign: false,
            n: 1000,
            seed: 0,
            iters: None,
            tau_ld: None,
            t_sali: None,
            sali_tol: None,
            stencil: None,
            name: "dataset".into(),
        }
    }
}

impl GenerateParams {
    /// The ensemble these parameters describe.
    pub fn ensemble_spec(&self) -> Result<EnsembleSpec> {
        let kind = self
            .system
            .ok_or_else(|| Error::InvalidParameter("missing --system".into()))?;
        if self.campaign && kind != SystemKind::DoublePendulum {
            return Err(Error::InvalidParameter("--campaign applies to the double pendulum only".into()));
        }
        if kind.is_map() && (!self.energy.is_empty() || self.levels.is_some()) {
            return Err(Error::InvalidParameter("the standard map takes --K, not energies".into()));
        }
        if !kind.is_map() && !self.k.is_empty() {
            return Err(Error::InvalidParameter(format!("{kind} does not take --K")));
        }
        let mut spec = match kind {
            SystemKind::StandardMap => {
                if self.k.is_empty() {
                    return Err(Error::InvalidParameter("the standard map needs --K".into()));
                }
                EnsembleSpec::standard_map(&self.k, self.n, self.seed)?
            }
            _ => {
                let systems = if self.campaign {
                    super::DESK_DOUBLE_PENDULUM_CASES
                        .iter()
                        .map(|&(a, s)| SystemSpec::double_pendulum(a, s))
                        .collect::<Result<Vec<_>>>()?
                } else {
                    vec![system_spec(Some(kind), self.alpha, self.sigma, self.beta, self.delta, None)?]
                };
                let mut cases = Vec::new();
                for system in systems {
                    let energies = if self.energy.is_empty() {
                        ladder(&system, self.levels)?
                    } else {
                        self.energy.clone()
                    };
                    cases.extend(energies.into_iter().map(|e| EnsembleCase {
                        system,
                        energy: Some(e),
                    }));
                }
                EnsembleSpec::new(cases, self.n, self.seed)?
            }
        };
        let ind = &mut spec.indicators;
        match (kind.is_map(), self.iters, self.tau_ld) {
            (true, _, Some(_)) => return Err(Error::InvalidParameter("the map takes --iters, not --tau-ld".into())),
            (false, Some(_), _) => return Err(Error::InvalidParameter("flows take --tau-ld, not --iters".into())),
            (_, Some(n), _) => ind.ld_horizon = n as f64,
            (_, _, Some(t)) => ind.ld_horizon = t,
            _ => {}
        }
        if let Some(t) = self.t_sali {
            ind.sali_horizon = t;
        }
        if let Some(tol) = self.sali_tol {
            ind.sali_integrator = ind.sali_integrator.with_tolerance(tol);
        }
        if let Some(s) = self.stencil {
            if !(s > 0.0) {
                return Err(Error::InvalidParameter("--stencil must be positive".into()));
            }
            ind.sigma = [s; 2];
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn ladder(system: &SystemSpec, levels: Option<usize>) -> Result<Vec<f64>> {
    let levels = levels.ok_or_else(|| Error::InvalidParameter(format!("{} needs --energy or --levels", system.kind())))?;
    match *system {
        SystemSpec::DoublePendulum { alpha, sigma } => {
            Ok(crate::ensembles::double_pendulum_energies(alpha, sigma, levels))
        }
        SystemSpec::FourWell { .. } => crate::ensembles::four_well_energies(system, levels),
        _ => Err(Error::InvalidParameter(format!("{} needs --energy", system.kind()))),
    }
}

pub(crate) fn generate(p: &GenerateParams, out: &mut Outputs) -> Result<()> {
    let spec = p.ensemble_spec()?;
    out.echo("generate", &p.name, p)?;
    let start = Instant::now();
    let data = generate_dataset(&spec)?;
    let csv = out.file(&format!("{}.csv", p.name));
    out.file(&format!("{}.spec.json", p.name));
    data.write(&csv)?;
    println!(
        "{}: {} records ({} regular, {} chaotic), {} discarded, {} failures, {:.1} s",
        csv.display(),
        data.records.len(),
        data.count(Label::Regular),
        data.count(Label::Chaotic),
        data.discarded,
        data.failures.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

// ---------------------------------------------------------------- threshold

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// `log10_S` or `sali_log10`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdParams {
    pub dataset: Option<PathBuf>,
    pub column: String,
    pub bins: usize,
    pub smoothing: usize,
    pub name: String,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        let cfg = ThresholdConfig::default();
        ThresholdParams {
            dataset: None,
            column: "log10_S".into(),
            bins: cfg.bins,
            smoothing: cfg.smoothing,
            name: "threshold".into(),
        }
    }
}

/// Which side of the threshold is chaotic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdColumn {
    /// Chaotic above the threshold; rows with `S = 0` count as regular.
    Log10S,
    /// Chaotic below the threshold.
    SaliLog10,
}

impl ThresholdColumn {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "log10_S" => Ok(ThresholdColumn::Log10S),
            "sali_log10" => Ok(ThresholdColumn::SaliLog10),
            other => Err(Error::InvalidParameter(format!(
                "column `{other}` is neither log10_S nor sali_log10"
            ))),
        }
    }

    pub fn values(self, rows: &[DatasetRow]) -> Vec<f64> {
        match self {
            ThresholdColumn::Log10S => rows.iter().filter_map(|r| r.log10_s).collect(),
            ThresholdColumn::SaliLog10 => rows.iter().map(|r| r.sali_log10).collect(),
        }
    }

    pub fn classify(self, row: &DatasetRow, threshold: f64) -> Label {
        let chaotic = match self {
            ThresholdColumn::Log10S => row.log10_s.is_some_and(|v| v > threshold),
            ThresholdColumn::SaliLog10 => row.sali_log10 < threshold,
        };
        Label::from_bit(chaotic as u8).expect("0 or 1")
    }

    /// Fraction of rows whose thresholded class equals the stored label.
    pub fn agreement(self, rows: &[DatasetRow], threshold: f64) -> Result<f64> {
        let mut same = 0;
        for r in rows {
            if self.classify(r, threshold) == r.label()? {
                same += 1;
            }
        }
        Ok(same as f64 / rows.len() as f64)
    }
}

#[derive(Debug, Clone, Serialize)]
struct ThresholdReport<'a> {
    column: &'a str,
    values: usize,
    agreement: f64,
    result: &'a ThresholdResult,
}

#[derive(Serialize)]
struct HistogramRow {
    #[serde(serialize_with = "sig17::serialize")]
    bin_lo: f64,
    #[serde(serialize_with = "sig17::serialize")]
    bin_hi: f64,
    count: u64,
    #[serde(serialize_with = "sig17::serialize")]
    smoothed: f64,
}

pub(crate) fn threshold(p: &ThresholdParams, out: &mut Outputs) -> Result<()> {
    let column = ThresholdColumn::parse(&p.column)?;
    let dataset = p
        .dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("missing --dataset".into()))?;
    out.echo("threshold", &p.name, p)?;
    let rows = read_rows(dataset)?;
    let values = column.values(&rows);
    let cfg = ThresholdConfig {
        bins: p.bins,
        smoothing: p.smoothing,
        ..ThresholdConfig::default()
    };
    let result = find_threshold(&values, &cfg)?;
    let agreement = column.agreement(&rows, result.threshold)?;
    let h = &result.histogram;
    let table: Vec<HistogramRow> = (0..h.counts.len())
        .map(|i| HistogramRow {
            bin_lo: h.edges[i],
            bin_hi: h.edges[i + 1],
            count: h.counts[i],
            smoothed: h.smoothed[i],
        })
        .collect();
    let hist_path = out.file(&format!("{}.histogram.csv", p.name));
    write_table(&hist_path, &["bin_lo", "bin_hi", "count", "smoothed"], &table)?;
    let report = ThresholdReport {
        column: &p.column,
        values: values.len(),
        agreement,
        result: &result,
    };
    write_json(&out.file(&format!("{}.json", p.name)), &report)?;
    println!(
        "{}: threshold {:.4} between peaks {:.4} and {:.4} ({}converged after {} refinements); agrees with SALI labels on {:.2}%",
        p.column,
        result.threshold,
        result.peaks[0],
        result.peaks[1],
        if result.converged { "" } else { "not " },
        result.iterations,
        100.0 * agreement
    );
    Ok(())
}

// ---------------------------------------------------------------- train

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainArgs {
    /// Training dataset; repeat for several.
    #[arg(long)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dataset: Vec<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recipe: Option<FeatureRecipe>,
    /// Fraction of the rows used for training; the rest are held out.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub dataset: Vec<PathBuf>,
    pub recipe: FeatureRecipe,
    pub train_fraction: f64,
    pub epochs: usize,
    pub lr0: f64,
    pub decay: f64,
    pub batch: usize,
    pub seed: u64,
    pub name: String,
}

impl Default for TrainParams {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainParams {
            dataset: Vec::new(),
            recipe: FeatureRecipe::LogSOnly,
            train_fraction: 1.0,
            epochs: t.epochs,
            lr0: t.lr0,
            decay: t.decay,
            batch: t.batch,
            seed: t.seed,
            name: "model".into(),
        }
    }
}

impl TrainParams {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr0: self.lr0,
            decay: self.decay,
            batch: self.batch,
            seed: self.seed,
        }
    }
}

/// Seeded split into `(training, held out)`, each in the original order.
pub fn split_rows(rows: &[DatasetRow], fraction: f64, seed: u64) -> Result<(Vec<DatasetRow>, Vec<DatasetRow>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {fraction} is not in (0, 1]")));
    }
    let take = (fraction * rows.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = vec![false; rows.len()];
    for &i in &order[..take] {
        chosen[i] = true;
    }
    let (train, held): (Vec<_>, Vec<_>) = rows.iter().zip(&chosen).partition(|(_, c)| **c);
    Ok((
        train.into_iter().map(|(r, _)| *r).collect(),
        held.into_iter().map(|(r, _)| *r).collect(),
    ))
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    #[serde(serialize_with = "sig17::serialize")]
    loss: f64,
}

pub(crate) fn write_loss(path: &Path, curve: &[f64]) -> Result<()> {
    let rows: Vec<LossRow> = curve
        .iter()
        .enumerate()
        .map(|(i, l)| LossRow { epoch: i + 1, loss: *l })
        .collect();
    write_table(path, &["epoch", "loss"], &rows)
}

#[derive(Debug, Clone, Serialize)]
struct TrainSummary {
    recipe: FeatureRecipe,
    train_rows: usize,
    heldout_rows: usize,
    train_accuracy: f64,
    heldout_accuracy: Option<f64>,
    boundary: Option<f64>,
    final_loss: f64,
}

/// Fits a model on the training share and scores both shares.
pub(crate) fn train_rows(
    rows: &[DatasetRow],
    p: &TrainParams,
) -> Result<(LinearSvmModel, Vec<f64>, EvalReport, Option<EvalReport>)> {
    let (train, held) = split_rows(rows, p.train_fraction, p.seed)?;
    let set = TrainingSet::from_rows(&train, p.recipe)?;
    let (model, curve) = fit(&set, p.recipe, &p.train_config())?;
    let own = evaluate_model(&model, &train)?;
    let held = if held.is_empty() {
        None
    } else {
        Some(evaluate_model(&model, &held)?)
    };
    Ok((model, curve, own, held))
}

pub(crate) fn train(p: &TrainParams, out: &mut Outputs) -> Result<()> {
    let rows = read_all(&p.dataset)?;
    out.echo("train", &p.name, p)?;
    let (model, curve, own, held) = train_rows(&rows, p)?;
    write_json(&out.file(&format!("{}.json", p.name)), &model)?;
    write_loss(&out.file(&format!("{}.loss.csv", p.name)), &curve)?;
    let summary = TrainSummary {
        recipe: p.recipe,
        train_rows: own.confusion.total(),
        heldout_rows: held.as_ref().map_or(0, |h| h.confusion.total()),
        train_accuracy: own.accuracy,
        heldout_accuracy: held.as_ref().map(|h| h.accuracy),
        boundary: model.boundary(),
        final_loss: curve.last().copied().unwrap_or(f64::NAN),
    };
    write_json(&out.file(&format!("{}.summary.json", p.name)), &summary)?;
    print!(
        "{}: {} on {} rows, training accuracy {:.2}%",
        p.name,
        p.recipe,
        summary.train_rows,
        100.0 * summary.train_accuracy
    );
    if let Some(h) = summary.heldout_accuracy {
        print!(", held-out accuracy {:.2}% on {} rows", 100.0 * h, summary.heldout_rows);
    }
    if let Some(b) = summary.boundary {
        print!(", boundary at {b:.4}");
    }
    println!();
    Ok(())
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Dataset to score; repeat for several.
    #[arg(long)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub dataset: Vec<PathBuf>,
    /// Expected feature recipe; a different model recipe is an error.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recipe: Option<FeatureRecipe>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateParams {
    pub model: Option<PathBuf>,
    pub dataset: Vec<PathBuf>,
    pub recipe: Option<FeatureRecipe>,
    pub name: String,
}

impl Default for EvaluateParams {
    fn default() -> Self {
        EvaluateParams {
            model: None,
            dataset: Vec::new(),
            recipe: None,
            name: "evaluation".into(),
        }
    }
}

#[derive(Serialize)]
struct MisclassifiedRow {
    #[serde(serialize_with = "sig17::serialize")]
    q1: f64,
    #[serde(serialize_with = "sig17::serialize")]
    q2: f64,
    #[serde(serialize_with = "sig17::serialize")]
    margin: f64,
    true_label: u8,
}

pub(crate) fn write_misclassified(path: &Path, report: &EvalReport) -> Result<()> {
    let rows: Vec<MisclassifiedRow> = report
        .misclassified
        .iter()
        .map(|m| MisclassifiedRow {
            q1: m.q1,
            q2: m.q2,
            margin: m.margin,
            true_label: m.true_label,
        })
        .collect();
    write_table(path, &["q1", "q2", "margin", "true_label"], &rows)
}

pub(crate) fn load_model(path: &Path) -> Result<LinearSvmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LinearSvmModel::from_json(&text)
}

pub(crate) fn evaluate(p: &EvaluateParams, out: &mut Outputs) -> Result<()> {
    let model_path = p
        .model
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("missing --model".into()))?;
    let model = load_model(model_path)?;
    if let Some(r) = p.recipe {
        if r != model.recipe {
            return Err(Error::RecipeMismatch {
                model: model.recipe.to_string(),
                requested: r.to_string(),
            });
        }
    }
    let rows = read_all(&p.dataset)?;
    out.echo("evaluate", &p.name, p)?;
    let report = evaluate_model(&model, &rows)?;
    write_json(&out.file(&format!("{}.json", p.name)), &report)?;
    write_misclassified(&out.file(&format!("{}.misclassified.csv", p.name)), &report)?;
    println!("{:<48} {:>6} {:>9}", "case", "rows", "accuracy");
    for c in &report.per_case {
        println!("{:<48} {:>6} {:>8.2}%", c.case, c.confusion.total(), 100.0 * c.accuracy);
    }
    println!(
        "{:<48} {:>6} {:>8.2}%  ({} misclassified, {} rows without features)",
        "all",
        report.confusion.total(),
        100.0 * report.accuracy,
        report.misclassified.len(),
        report.skipped
    );
    Ok(())
}

// ---------------------------------------------------------------- poincare

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct PoincareArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// Number of sampled orbits when no --ic is given.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Explicit slice point `q1,q2`; repeat for several orbits.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ic: Vec<f64>,
    /// Crossings (or iterates) per orbit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossings: Option<usize>,
    /// Integration time limit per orbit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoincareParams {
    pub system: Option<SystemKind>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub energy: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub ic: Vec<f64>,
    pub crossings: usize,
    pub t_max: f64,
    pub tol: f64,
    pub name: String,
}

impl Default for PoincareParams {
    fn default() -> Self {
        PoincareParams {
            system: None,
            alpha: None,
            sigma: None,
            beta: None,
            delta: None,
            k: None,
            energy: None,
            n: 30,
            seed: 0,
            ic: Vec::new(),
            crossings: 200,
            t_max: 1e6,
            tol: 1e-10,
            name: "poincare".into(),
        }
    }
}

fn pairs(flat: &[f64]) -> Result<Vec<[f64; 2]>> {
    if !flat.len().is_multiple_of(2) {
        return Err(Error::InvalidParameter("--ic takes coordinate pairs q1,q2".into()));
    }
    Ok(flat.chunks(2).map(|c| [c[0], c[1]]).collect())
}

#[derive(Serialize)]
struct SectionRow {
    orbit_id: usize,
    #[serde(serialize_with = "sig17::serialize")]
    q1: f64,
    #[serde(serialize_with = "sig17::serialize")]
    q2: f64,
}

/// Initial states of the orbits: the explicit points, or `n` seeded draws.
fn initial_states(
    system: SystemSpec,
    energy: Option<f64>,
    ics: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<PhaseState>> {
    let section = (!system.kind().is_map()).then(|| system.default_section()).transpose()?;
    if system.kind().is_map() && energy.is_some() {
        return Err(Error::InvalidParameter("the standard map takes no --energy".into()));
    }
    let ics = pairs(ics)?;
    if ics.is_empty() {
        let spec = EnsembleSpec::new(vec![EnsembleCase { system, energy }], n, seed)?;
        return Ok(sample_ensemble(&spec)?.into_iter().map(|s| s.state).collect());
    }
    ics.into_iter()
        .map(|p| match section {
            None => Ok(PhaseState::Map([crate::systems::wrap_unit(p[0]), crate::systems::wrap_unit(p[1])])),
            Some(sec) => {
                let e = energy.ok_or_else(|| Error::InvalidParameter("missing --energy".into()))?;
                Ok(PhaseState::Flow(system.solve_constrained_momentum(&sec, p, e)?))
            }
        })
        .collect()
}

pub(crate) fn poincare(p: &PoincareParams, out: &mut Outputs) -> Result<()> {
    use rayon::prelude::*;

    let system = system_spec(p.system, p.alpha, p.sigma, p.beta, p.delta, p.k)?;
    let states = initial_states(system, p.energy, &p.ic, p.n, p.seed)?;
    out.echo("poincare", &p.name, p)?;
    let cfg = IntegratorConfig::default().with_tolerance(p.tol);
    cfg.validate()?;
    let section = (!system.kind().is_map()).then(|| system.default_section()).transpose()?;
    let orbits: Vec<Vec<[f64; 2]>> = states
        .par_iter()
        .enumerate()
        .map(|(id, state)| {
            let points = match (state, &section) {
                (PhaseState::Map(s), _) => {
                    let mut s = *s;
                    (0..p.crossings)
                        .map(|_| {
                            s = system.map_step(s)?;
                            Ok(s)
                        })
                        .collect::<Result<Vec<_>>>()
                }
                (PhaseState::Flow(s), Some(sec)) => poincare_section(&system, s, sec, p.crossings, p.t_max, &cfg),
                (PhaseState::Flow(_), None) => unreachable!("flows always have a section"),
            };
            points.unwrap_or_else(|e| {
                log::warn!("orbit {id}: {e}");
                Vec::new()
            })
        })
        .collect();
    let rows: Vec<SectionRow> = orbits
        .iter()
        .enumerate()
        .flat_map(|(id, pts)| pts.iter().map(move |q| SectionRow { orbit_id: id, q1: q[0], q2: q[1] }))
        .collect();
    let path = out.file(&format!("{}.csv", p.name));
    write_table(&path, &["orbit_id", "q1", "q2"], &rows)?;
    println!("{}: {} orbits, {} points", path.display(), orbits.len(), rows.len());
    Ok(())
}

// ---------------------------------------------------------------- sali-trace

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SaliTraceArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// Slice point `q1,q2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ic: Vec<f64>,
    /// Horizon: time for flows, iterations for the map.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Growth factor between sample times.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaliTraceParams {
    pub system: Option<SystemKind>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub energy: Option<f64>,
    pub ic: Vec<f64>,
    /// Defaults to 10⁴ time units for flows and 10⁵ iterations for the map.
    pub t_max: Option<f64>,
    pub ratio: f64,
    pub tol: f64,
    pub name: String,
}

impl Default for SaliTraceParams {
    fn default() -> Self {
        SaliTraceParams {
            system: None,
            alpha: None,
            sigma: None,
            beta: None,
            delta: None,
            k: None,
            energy: None,
            ic: Vec::new(),
            t_max: None,
            ratio: 1.2,
            tol: 1e-10,
            name: "sali_trace".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TraceReport {
    final_log10: f64,
    threshold: f64,
    label: Label,
    floor_hit: bool,
    fit: Option<AsymptoteFit>,
    fit_error: Option<String>,
}

#[derive(Serialize)]
struct TraceRow {
    #[serde(serialize_with = "sig17::serialize")]
    t: f64,
    #[serde(serialize_with = "sig17::serialize")]
    log10_sali: f64,
}

pub(crate) fn sali_trace(p: &SaliTraceParams, out: &mut Outputs) -> Result<()> {
    let system = system_spec(p.system, p.alpha, p.sigma, p.beta, p.delta, p.k)?;
    if p.ic.len() != 2 {
        return Err(Error::InvalidParameter("--ic takes one slice point q1,q2".into()));
    }
    let state = initial_states(system, p.energy, &p.ic, 1, 0)?[0];
    out.echo("sali-trace", &p.name, p)?;
    let kind = system.kind();
    let t_max = p.t_max.unwrap_or(if kind.is_map() { 1e5 } else { 1e4 });
    let series = match state {
        PhaseState::Flow(s) => {
            let cfg = IntegratorConfig::default().with_tolerance(p.tol);
            propagate_sali(&system, &s, t_max, p.ratio, &cfg)?
        }
        PhaseState::Map(s) => {
            if !(t_max >= 1.0 && t_max.fract() == 0.0) {
                return Err(Error::InvalidParameter(format!("--t-max {t_max} is not a whole number of iterations")));
            }
            iterate_map_sali(&system, s, t_max as u64, p.ratio)?
        }
    };
    let rows: Vec<TraceRow> = series
        .times
        .iter()
        .zip(&series.log10_sali)
        .map(|(t, v)| TraceRow { t: *t, log10_sali: *v })
        .collect();
    write_table(&out.file(&format!("{}.csv", p.name)), &["t", "log10_sali"], &rows)?;
    let threshold = default_sali_threshold(kind);
    let (fit, fit_error) = match fit_sali_asymptote(&series, kind) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = TraceReport {
        final_log10: series.final_log10(),
        threshold,
        label: crate::indicators::label_series(&series, threshold),
        floor_hit: series.floor_hit,
        fit,
        fit_error,
    };
    write_json(&out.file(&format!("{}.fit.json", p.name)), &report)?;
    print!("final log10 SALI {:.3} ({:?})", report.final_log10, report.label);
    if let Some(f) = &report.fit {
        print!(", {:?} fit {:.4}", f.kind, f.value);
    }
    println!();
    Ok(())
}
