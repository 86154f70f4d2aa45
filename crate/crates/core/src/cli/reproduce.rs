//! Desk-scale cross-system pipeline: a double-pendulum training campaign,
//! models on `log10 S` and raw `S`, scored on Hénon-Heiles energies and
//! Standard Map nonlinearities.

use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::commands::{train_rows, write_loss, write_misclassified, GenerateParams, TrainParams};
use super::{write_json, Outputs};
use crate::ensembles::{generate_dataset, read_rows, read_sidecar, sidecar_path, DatasetRow};
use crate::error::Result;
use crate::svm::{evaluate, FeatureRecipe, LinearSvmModel};
use crate::systems::SystemKind;

/// `(α, σ)` pairs of the double-pendulum training campaign.
pub const DESK_DOUBLE_PENDULUM_CASES: [(f64, f64); 4] = [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (0.5, 0.5)];

pub const HENON_HEILES_ENERGIES: [f64; 5] = [1.0 / 20.0, 1.0 / 15.0, 1.0 / 12.0, 1.0 / 10.0, 1.0 / 8.0];

pub const STANDARD_MAP_KS: [f64; 3] = [0.5, 0.971635, 1.5];

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ReproduceArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Double-pendulum initial conditions per (parameter case, energy).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_n: Option<usize>,
    /// Double-pendulum energy levels per parameter case.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dp_levels: Option<usize>,
    /// Hénon-Heiles initial conditions per energy.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hh_n: Option<usize>,
    /// Standard Map initial conditions per nonlinearity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sm_n: Option<usize>,
    /// SALI horizon for the flows.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_sali: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sali_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReproduceParams {
    pub seed: u64,
    pub dp_n: usize,
    pub dp_levels: usize,
    pub hh_n: usize,
    pub sm_n: usize,
    pub t_sali: f64,
    pub sali_tol: f64,
    pub train_fraction: f64,
    pub epochs: usize,
}

impl Default for ReproduceParams {
    fn default() -> Self {
        ReproduceParams {
            seed: 1,
            dp_n: 500,
            dp_levels: 20,
            hh_n: 1000,
            sm_n: 1000,
            t_sali: 1e4,
            sali_tol: 1e-10,
            train_fraction: 0.1,
            epochs: 5000,
        }
    }
}

impl ReproduceParams {
    fn dataset(&self, system: SystemKind, n: usize, seed: u64, name: &str) -> GenerateParams {
        let mut g = GenerateParams {
            system: Some(system),
            n,
            seed,
            name: name.into(),
            ..GenerateParams::default()
        };
        match system {
            SystemKind::StandardMap => g.k = STANDARD_MAP_KS.to_vec(),
            SystemKind::HenonHeiles => g.energy = HENON_HEILES_ENERGIES.to_vec(),
            _ => {
                g.campaign = true;
                g.levels = Some(self.dp_levels);
            }
        }
        if !system.is_map() {
            g.t_sali = Some(self.t_sali);
            g.sali_tol = Some(self.sali_tol);
        }
        g
    }

    pub fn double_pendulum(&self) -> GenerateParams {
        self.dataset(SystemKind::DoublePendulum, self.dp_n, self.seed, "double_pendulum")
    }

    pub fn henon_heiles(&self) -> GenerateParams {
        self.dataset(SystemKind::HenonHeiles, self.hh_n, self.seed + 1, "henon_heiles")
    }

    pub fn standard_map(&self) -> GenerateParams {
        self.dataset(SystemKind::StandardMap, self.sm_n, self.seed + 2, "standard_map")
    }

    fn train(&self, recipe: FeatureRecipe) -> TrainParams {
        TrainParams {
            recipe,
            train_fraction: self.train_fraction,
            epochs: self.epochs,
            seed: self.seed,
            name: format!("model_{recipe}"),
            ..TrainParams::default()
        }
    }
}

/// Accuracy of both models on one case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    /// Energy (Hénon-Heiles) or nonlinearity (Standard Map).
    pub parameter: f64,
    pub rows: usize,
    pub log_s: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    pub training_rows: usize,
    pub heldout_log_s: Option<f64>,
    pub heldout_s: Option<f64>,
    pub boundary_log_s: Option<f64>,
    pub henon_heiles: Vec<AccuracyRow>,
    pub standard_map: Vec<AccuracyRow>,
}

impl ReproduceReport {
    pub fn henon_heiles_at(&self, energy: f64) -> Option<&AccuracyRow> {
        self.henon_heiles.iter().find(|r| (r.parameter - energy).abs() < 1e-12)
    }

    pub fn standard_map_at(&self, k: f64) -> Option<&AccuracyRow> {
        self.standard_map.iter().find(|r| (r.parameter - k).abs() < 1e-12)
    }
}

/// Reads `<dir>/<name>.csv` if its sidecar records the same spec, otherwise
/// generates and writes it.
pub(crate) fn cached_dataset(p: &GenerateParams, dir: &Path) -> Result<Vec<DatasetRow>> {
    let spec = p.ensemble_spec()?;
    let csv = dir.join(format!("{}.csv", p.name));
    if let Ok(side) = read_sidecar(&sidecar_path(&csv)) {
        if side.spec == spec {
            if let Ok(rows) = read_rows(&csv) {
                if rows.len() == side.records {
                    log::info!("reusing {}", csv.display());
                    return Ok(rows);
                }
            }
        }
    }
    let start = std::time::Instant::now();
    let data = generate_dataset(&spec)?;
    data.write(&csv)?;
    log::info!(
        "{}: {} records in {:.0} s",
        csv.display(),
        data.records.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(data.rows())
}

fn table(
    rows: &[DatasetRow],
    parameter: impl Fn(&DatasetRow) -> Option<f64>,
    cases: &[f64],
    models: [&LinearSvmModel; 2],
) -> Result<Vec<AccuracyRow>> {
    cases
        .iter()
        .map(|&c| {
            let subset: Vec<DatasetRow> = rows.iter().filter(|r| parameter(r) == Some(c)).copied().collect();
            Ok(AccuracyRow {
                parameter: c,
                rows: subset.len(),
                log_s: evaluate(models[0], &subset)?.accuracy,
                s: evaluate(models[1], &subset)?.accuracy,
            })
        })
        .collect()
}

/// Runs the pipeline with outputs in `dir`; datasets already there with a
/// matching spec are reused.
pub fn reproduce(p: &ReproduceParams, dir: &Path) -> Result<ReproduceReport> {
    let mut out = Outputs::new(dir)?;
    let result = run_inner(p, &mut out);
    if result.is_err() {
        out.discard();
    }
    result
}

pub(crate) fn run(p: &ReproduceParams, out: &mut Outputs) -> Result<()> {
    let report = run_inner(p, out)?;
    println!("double-pendulum held-out accuracy: log10 S {}, S {}", pct(report.heldout_log_s), pct(report.heldout_s));
    println!("{:>10} {:>6} {:>9} {:>9}", "H", "rows", "log10 S", "S");
    for r in &report.henon_heiles {
        println!("{:>10.6} {:>6} {:>8.2}% {:>8.2}%", r.parameter, r.rows, 100.0 * r.log_s, 100.0 * r.s);
    }
    println!("{:>10} {:>6} {:>9} {:>9}", "K", "rows", "log10 S", "S");
    for r in &report.standard_map {
        println!("{:>10.6} {:>6} {:>8.2}% {:>8.2}%", r.parameter, r.rows, 100.0 * r.log_s, 100.0 * r.s);
    }
    Ok(())
}

fn pct(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{:.2}%", 100.0 * v))
}

fn run_inner(p: &ReproduceParams, out: &mut Outputs) -> Result<ReproduceReport> {
    out.echo("reproduce", "reproduce", p)?;
    let dp = cached_dataset(&p.double_pendulum(), out.dir())?;
    let hh = cached_dataset(&p.henon_heiles(), out.dir())?;
    let sm = cached_dataset(&p.standard_map(), out.dir())?;

    let mut models = Vec::new();
    let mut heldout = Vec::new();
    for recipe in [FeatureRecipe::LogSOnly, FeatureRecipe::SOnly] {
        let tp = p.train(recipe);
        let (model, curve, _, held) = train_rows(&dp, &tp)?;
        write_json(&out.file(&format!("{}.json", tp.name)), &model)?;
        write_loss(&out.file(&format!("{}.loss.csv", tp.name)), &curve)?;
        heldout.push(held.map(|h| h.accuracy));
        models.push(model);
    }
    let pair = [&models[0], &models[1]];
    for (name, rows) in [("henon_heiles", &hh), ("standard_map", &sm)] {
        let report = evaluate(&models[0], rows)?;
        write_json(&out.file(&format!("evaluation_{name}.json")), &report)?;
        write_misclassified(&out.file(&format!("evaluation_{name}.misclassified.csv")), &report)?;
    }
    let report = ReproduceReport {
        training_rows: (p.train_fraction * dp.len() as f64).ceil() as usize,
        heldout_log_s: heldout[0],
        heldout_s: heldout[1],
        boundary_log_s: models[0].boundary(),
        henon_heiles: table(&hh, |r| r.energy, &HENON_HEILES_ENERGIES, pair)?,
        standard_map: table(&sm, |r| r.param_k, &STANDARD_MAP_KS, pair)?,
    };
    write_json(&out.file("reproduce.json"), &report)?;
    Ok(report)
}
