//! Linear classifier over indicator features: a single linear layer trained
//! with the hinge loss `max(0, 1 − y f(x))` by mini-batch SGD.
//!
//! Labels are −1 (regular) and +1 (chaotic) inside this module. Features are
//! z-scored with statistics of the training set before descent; the affine
//! is stored in the model and applied at prediction time.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::DatasetRow;
use crate::error::{Error, Result};
use crate::indicators::Label;

pub const MODEL_VERSION: u32 = 1;
pub const MODEL_KIND: &str = "linear_svm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureRecipe {
    #[serde(rename = "S_only")]
    SOnly,
    #[serde(rename = "logS_only")]
    LogSOnly,
    #[serde(rename = "S_and_energy")]
    SAndEnergy,
    #[serde(rename = "logS_and_energy")]
    LogSAndEnergy,
}

impl FeatureRecipe {
    pub const ALL: [FeatureRecipe; 4] = [
        FeatureRecipe::SOnly,
        FeatureRecipe::LogSOnly,
        FeatureRecipe::SAndEnergy,
        FeatureRecipe::LogSAndEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureRecipe::SOnly => "S_only",
            FeatureRecipe::LogSOnly => "logS_only",
            FeatureRecipe::SAndEnergy => "S_and_energy",
            FeatureRecipe::LogSAndEnergy => "logS_and_energy",
        }
    }

    pub fn dimension(self) -> usize {
        if self.uses_energy() {
            2
        } else {
            1
        }
    }

    pub fn uses_energy(self) -> bool {
        matches!(self, FeatureRecipe::SAndEnergy | FeatureRecipe::LogSAndEnergy)
    }

    pub fn uses_log(self) -> bool {
        matches!(self, FeatureRecipe::LogSOnly | FeatureRecipe::LogSAndEnergy)
    }

    /// The same recipe without the energy feature.
    pub fn without_energy(self) -> Self {
        match self {
            FeatureRecipe::SAndEnergy => FeatureRecipe::SOnly,
            FeatureRecipe::LogSAndEnergy => FeatureRecipe::LogSOnly,
            other => other,
        }
    }

    /// Feature vector of a row; `None` when the row cannot supply it
    /// (`S = 0` under a log recipe, or no energy under an energy recipe).
    pub fn features(self, row: &DatasetRow) -> Option<Vec<f64>> {
        let s = if self.uses_log() { row.log10_s? } else { row.s };
        if self.uses_energy() {
            Some(vec![s, row.energy?])
        } else {
            Some(vec![s])
        }
    }
}

impl fmt::Display for FeatureRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureRecipe::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature recipe `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    /// Mean and standard deviation per feature; a constant feature gets scale 1.
    pub fn fit(features: &[Vec<f64>]) -> Self {
        let dim = features[0].len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in features {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut scale = vec![0.0; dim];
        for x in features {
            for k in 0..dim {
                scale[k] += (x[k] - mean[k]).powi(2);
            }
        }
        for s in &mut scale {
            *s = (*s / n).sqrt();
            if !(*s > 0.0 && s.is_finite()) {
                *s = 1.0;
            }
        }
        Normalization { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Full passes over the shuffled training set.
    pub epochs: usize,
    pub lr0: f64,
    /// Step size is `lr0 / (1 + t / decay)` at update `t`.
    pub decay: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5000,
            lr0: 0.1,
            decay: 1e4,
            batch: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub lr0: f64,
    pub batch: usize,
    pub seed: u64,
    pub dataset_sha: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub version: u32,
    pub kind: String,
    pub recipe: FeatureRecipe,
    pub w: Vec<f64>,
    pub b: f64,
    pub normalization: Normalization,
    pub training: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub margin: f64,
}

/// Feature vectors with their labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl TrainingSet {
    /// Rows that can supply the recipe's features; the rest are dropped.
    pub fn from_rows(rows: &[DatasetRow], recipe: FeatureRecipe) -> Result<Self> {
        let mut set = TrainingSet::default();
        for row in rows {
            if let Some(x) = recipe.features(row) {
                set.features.push(x);
                set.labels.push(row.label()?);
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// SHA-256 over the features and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (x, y) in self.features.iter().zip(&self.labels) {
            for v in x {
                h.update(v.to_le_bytes());
            }
            h.update([y.as_bit()]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn margin(w: &[f64], b: f64, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b
}

/// Mean hinge loss of `(w, b)` over a batch.
pub fn hinge_loss(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * margin(w, b, x)).max(0.0))
        .sum();
    total / xs.len() as f64
}

/// Subgradient of [`hinge_loss`] in `(w, b)`.
pub fn hinge_gradient(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64]) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        if y * margin(w, b, x) < 1.0 {
            for (g, v) in gw.iter_mut().zip(x) {
                *g -= y * v / n;
            }
            gb -= y / n;
        }
    }
    (gw, gb)
}

/// Trains a model; returns it with the mean hinge loss after every epoch.
pub fn fit(set: &TrainingSet, recipe: FeatureRecipe, cfg: &TrainConfig) -> Result<(LinearSvmModel, Vec<f64>)> {
    if cfg.epochs == 0 || cfg.batch == 0 || !(cfg.lr0 > 0.0) || !(cfg.decay > 0.0) {
        return Err(Error::InvalidParameter(format!("invalid training configuration {cfg:?}")));
    }
    if set.is_empty() {
        return Err(Error::Untrainable("no usable samples".into()));
    }
    if set.features.iter().any(|x| x.len() != recipe.dimension()) {
        return Err(Error::DimensionMismatch {
            expected: recipe.dimension(),
            got: set.features.iter().map(Vec::len).find(|l| *l != recipe.dimension()).unwrap_or(0),
        });
    }
    let chaotic = set.labels.iter().filter(|l| **l == Label::Chaotic).count();
    if chaotic == 0 || chaotic == set.len() {
        return Err(Error::Untrainable("the training set holds a single class".into()));
    }
    let norm = Normalization::fit(&set.features);
    let xs: Vec<Vec<f64>> = set.features.iter().map(|x| norm.apply(x)).collect();
    let ys: Vec<f64> = set.labels.iter().map(|l| l.sign()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut w = vec![0.0; recipe.dimension()];
    let mut b = 0.0;
    let mut t = 0u64;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut bx = Vec::with_capacity(cfg.batch);
    let mut by = Vec::with_capacity(cfg.batch);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.push(xs[i].clone());
                by.push(ys[i]);
            }
            let (gw, gb) = hinge_gradient(&w, b, &bx, &by);
            let eta = cfg.lr0 / (1.0 + t as f64 / cfg.decay);
            for (wk, g) in w.iter_mut().zip(&gw) {
                *wk -= eta * g;
            }
            b -= eta * gb;
            t += 1;
        }
        curve.push(hinge_loss(&w, b, &xs, &ys));
    }
    let model = LinearSvmModel {
        version: MODEL_VERSION,
        kind: MODEL_KIND.into(),
        recipe,
        w,
        b,
        normalization: norm,
        training: TrainingMeta {
            epochs: cfg.epochs,
            lr0: cfg.lr0,
            batch: cfg.batch,
            seed: cfg.seed,
            dataset_sha: set.fingerprint(),
        },
    };
    Ok((model, curve))
}

impl LinearSvmModel {
    /// Chaotic iff the margin on normalised features is strictly positive.
    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        if features.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                got: features.len(),
            });
        }
        let m = margin(&self.w, self.b, &self.normalization.apply(features));
        let label = if m > 0.0 { Label::Chaotic } else { Label::Regular };
        Ok(Prediction { label, margin: m })
    }

    /// For one-feature models, the raw feature value where the margin is zero.
    pub fn boundary(&self) -> Option<f64> {
        (self.w.len() == 1 && self.w[0] != 0.0)
            .then(|| self.normalization.mean[0] - self.b * self.normalization.scale[0] / self.w[0])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedModel(e.to_string()))?;
        let version = value
            .get("version")
            .ok_or_else(|| Error::MalformedModel("missing `version`".into()))?
            .as_u64()
            .ok_or_else(|| Error::MalformedModel("`version` is not an unsigned integer".into()))?;
        if version != u64::from(MODEL_VERSION) {
            return Err(Error::VersionMismatch {
                expected: MODEL_VERSION,
                found: version.try_into().unwrap_or(u32::MAX),
            });
        }
        let model: LinearSvmModel =
            serde_json::from_value(value).map_err(|e| Error::MalformedModel(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let dim = self.recipe.dimension();
        let n = &self.normalization;
        if self.kind != MODEL_KIND {
            return Err(Error::MalformedModel(format!("kind `{}` is not `{MODEL_KIND}`", self.kind)));
        }
        if self.w.len() != dim || n.mean.len() != dim || n.scale.len() != dim {
            return Err(Error::MalformedModel(format!(
                "recipe {} needs {dim} weights and normalisation entries",
                self.recipe
            )));
        }
        if !n.scale.iter().all(|s| *s > 0.0) {
            return Err(Error::MalformedModel("normalisation scales must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    fn add(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Chaotic, Label::Chaotic) => self.tp += 1,
            (Label::Regular, Label::Regular) => self.tn += 1,
            (Label::Regular, Label::Chaotic) => self.fp += 1,
            (Label::Chaotic, Label::Regular) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            f64::NAN
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: String,
    pub accuracy: f64,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Misclassified {
    pub q1: f64,
    pub q2: f64,
    pub margin: f64,
    pub true_label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recipe: FeatureRecipe,
    pub accuracy: f64,
    pub confusion: Confusion,
    /// Rows that could not supply the recipe's features.
    pub skipped: usize,
    pub per_case: Vec<CaseReport>,
    pub misclassified: Vec<Misclassified>,
}

/// Predicts every row and compares with its SALI label.
pub fn evaluate(model: &LinearSvmModel, rows: &[DatasetRow]) -> Result<EvalReport> {
    if model.recipe.uses_energy() && rows.iter().any(|r| r.energy.is_none()) {
        return Err(Error::RecipeMismatch {
            model: model.recipe.to_string(),
            requested: model.recipe.without_energy().to_string(),
        });
    }
    let mut confusion = Confusion::default();
    let mut cases: BTreeMap<String, (usize, Confusion)> = BTreeMap::new();
    let mut misclassified = Vec::new();
    let mut skipped = 0;
    for row in rows {
        let Some(x) = model.recipe.features(row) else {
            skipped += 1;
            continue;
        };
        let truth = row.label()?;
        let p = model.predict(&x)?;
        confusion.add(truth, p.label);
        let next = cases.len();
        cases.entry(row.case_key()).or_insert((next, Confusion::default())).1.add(truth, p.label);
        if p.label != truth {
            misclassified.push(Misclassified {
                q1: row.q1,
                q2: row.q2,
                margin: p.margin,
                true_label: truth.as_bit(),
            });
        }
    }
    let mut per_case: Vec<(usize, CaseReport)> = cases
        .into_iter()
        .map(|(case, (order, c))| {
            (
                order,
                CaseReport {
                    case,
                    accuracy: c.accuracy(),
                    confusion: c,
                },
            )
        })
        .collect();
    per_case.sort_by_key(|(order, _)| *order);
    Ok(EvalReport {
        recipe: model.recipe,
        accuracy: confusion.accuracy(),
        confusion,
        skipped,
        per_case: per_case.into_iter().map(|(_, c)| c).collect(),
        misclassified,
    })
}
