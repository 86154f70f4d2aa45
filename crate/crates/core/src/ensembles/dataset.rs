//! CSV table and JSON sidecar of a labelled dataset.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EnsembleSpec;
use crate::error::{Error, Result};
use crate::indicators::{IndicatorRecord, Label};
use crate::systems::{SystemKind, SystemSpec};

pub(crate) const FORMAT_VERSION: u32 = 1;

/// Floats are written with 17 significant digits.
pub(crate) mod sig17 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:.16e}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        s.trim().parse().map_err(D::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_str(""),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            let s = String::deserialize(d)?;
            let s = s.trim();
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(D::Error::custom)
            }
        }
    }
}

/// One CSV row. Parameters that do not apply to the system, the energy of
/// map rows and `log10_S` when `S = 0` are empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub system: SystemKind,
    #[serde(with = "sig17::opt")]
    pub param_alpha: Option<f64>,
    #[serde(with = "sig17::opt")]
    pub param_sigma: Option<f64>,
    #[serde(with = "sig17::opt")]
    pub param_beta: Option<f64>,
    #[serde(with = "sig17::opt")]
    pub param_delta: Option<f64>,
    #[serde(rename = "param_K", with = "sig17::opt")]
    pub param_k: Option<f64>,
    #[serde(with = "sig17::opt")]
    pub energy: Option<f64>,
    #[serde(with = "sig17")]
    pub q1: f64,
    #[serde(with = "sig17")]
    pub q2: f64,
    #[serde(with = "sig17")]
    pub ld_center: f64,
    #[serde(rename = "D", with = "sig17")]
    pub d: f64,
    #[serde(rename = "R", with = "sig17")]
    pub r: f64,
    #[serde(rename = "C", with = "sig17")]
    pub c: f64,
    #[serde(rename = "S", with = "sig17")]
    pub s: f64,
    #[serde(rename = "log10_S", with = "sig17::opt")]
    pub log10_s: Option<f64>,
    #[serde(with = "sig17")]
    pub sali_log10: f64,
    pub label: u8,
}

impl From<&IndicatorRecord> for DatasetRow {
    fn from(r: &IndicatorRecord) -> Self {
        let (mut alpha, mut sigma, mut beta, mut delta, mut k) = (None, None, None, None, None);
        match r.system {
            SystemSpec::DoublePendulum { alpha: a, sigma: s } => {
                alpha = Some(a);
                sigma = Some(s);
            }
            SystemSpec::FourWell {
                alpha: a,
                beta: b,
                delta: d,
            } => {
                alpha = Some(a);
                beta = Some(b);
                delta = Some(d);
            }
            SystemSpec::HenonHeiles => {}
            SystemSpec::StandardMap { k: kk } => k = Some(kk),
        }
        DatasetRow {
            system: r.system.kind(),
            param_alpha: alpha,
            param_sigma: sigma,
            param_beta: beta,
            param_delta: delta,
            param_k: k,
            energy: r.energy,
            q1: r.slice_point[0],
            q2: r.slice_point[1],
            ld_center: r.ld_center,
            d: r.indicators.d,
            r: r.indicators.r,
            c: r.indicators.c,
            s: r.indicators.s,
            log10_s: r.log10_s,
            sali_log10: r.sali_log10,
            label: r.label.as_bit(),
        }
    }
}

impl DatasetRow {
    pub fn label(&self) -> Result<Label> {
        Label::from_bit(self.label)
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParameter(format!("{} row lacks param_{name}", self.system)))
        };
        match self.system {
            SystemKind::DoublePendulum => {
                SystemSpec::double_pendulum(need(self.param_alpha, "alpha")?, need(self.param_sigma, "sigma")?)
            }
            SystemKind::FourWell => SystemSpec::four_well(
                need(self.param_alpha, "alpha")?,
                need(self.param_beta, "beta")?,
                need(self.param_delta, "delta")?,
            ),
            SystemKind::HenonHeiles => Ok(SystemSpec::henon_heiles()),
            SystemKind::StandardMap => SystemSpec::standard_map(need(self.param_k, "K")?),
        }
    }

    /// Key identifying the row's case: the system parameters and energy.
    pub fn case_key(&self) -> String {
        let f = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v}"));
        match self.system {
            SystemKind::StandardMap => format!("{} K={}", self.system, f(self.param_k)),
            SystemKind::HenonHeiles => format!("{} E={}", self.system, f(self.energy)),
            SystemKind::DoublePendulum => format!(
                "{} alpha={} sigma={} E={}",
                self.system,
                f(self.param_alpha),
                f(self.param_sigma),
                f(self.energy)
            ),
            SystemKind::FourWell => format!(
                "{} alpha={} beta={} delta={} E={}",
                self.system,
                f(self.param_alpha),
                f(self.param_beta),
                f(self.param_delta),
                f(self.energy)
            ),
        }
    }
}

/// Generation settings and bookkeeping stored beside the CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub format_version: u32,
    pub spec: EnsembleSpec,
    pub records: usize,
    #[serde(rename = "discarded_count", alias = "discarded")]
    pub discarded: usize,
    pub failures: Vec<String>,
}

/// `data.csv` → `data.spec.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("spec.json")
}

pub fn write_rows(path: &Path, rows: &[DatasetRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    if rows.is_empty() {
        w.write_record(HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) const HEADER: [&str; 17] = [
    "system",
    "param_alpha",
    "param_sigma",
    "param_beta",
    "param_delta",
    "param_K",
    "energy",
    "q1",
    "q2",
    "ld_center",
    "D",
    "R",
    "C",
    "S",
    "log10_S",
    "sali_log10",
    "label",
];

pub fn read_rows(path: &Path) -> Result<Vec<DatasetRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(Error::InvalidParameter(format!(
            "{} does not have the dataset columns; found {header:?}",
            path.display()
        )));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<DatasetRow>, _>>()?;
    for row in &rows {
        row.label()?;
    }
    Ok(rows)
}

pub(crate) fn write_sidecar(path: &Path, sidecar: &DatasetSidecar) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, sidecar)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<DatasetSidecar> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
