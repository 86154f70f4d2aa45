//! Initial-condition ensembles, labelled dataset generation and the
//! histogram threshold finder.

pub(crate) mod dataset;
mod threshold;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use dataset::{read_rows, read_sidecar, sidecar_path, write_rows, DatasetRow, DatasetSidecar};
pub use threshold::{find_threshold, Histogram, ThresholdConfig, ThresholdResult};

use crate::error::{Error, Result};
use crate::indicators::{measure_point, IndicatorConfig, IndicatorRecord, Label};
use crate::systems::{PhaseState, SectionSpec, SystemKind, SystemSpec};

/// Size of the pilot run that estimates the feasible fraction of a slice.
const PILOT_DRAWS: usize = 100_000;

/// Feasible fraction below which an energy is degenerate.
const MIN_FEASIBLE_FRACTION: f64 = 1e-4;

/// Draws per sample slot before giving up on it.
const MAX_DRAWS: usize = 1_000_000;

/// Stencil re-draws per sample slot before the slot is given up.
const MAX_STENCIL_REDRAWS: usize = 1_000;

/// One system configuration and energy (`None` for the map).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCase {
    pub system: SystemSpec,
    pub energy: Option<f64>,
}

/// Everything that determines a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub cases: Vec<EnsembleCase>,
    pub n_per_case: usize,
    /// `None` selects each system's default section.
    pub section: Option<SectionSpec>,
    pub seed: u64,
    pub indicators: IndicatorConfig,
}

impl EnsembleSpec {
    /// A spec with the default indicator settings for the cases' system kind.
    pub fn new(cases: Vec<EnsembleCase>, n_per_case: usize, seed: u64) -> Result<Self> {
        let kind = cases
            .first()
            .map(|c| c.system.kind())
            .ok_or_else(|| Error::InvalidParameter("an ensemble needs at least one case".into()))?;
        let spec = EnsembleSpec {
            cases,
            n_per_case,
            section: None,
            seed,
            indicators: IndicatorConfig::for_kind(kind),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Hénon-Heiles at each of `energies`.
    pub fn henon_heiles(energies: &[f64], n_per_case: usize, seed: u64) -> Result<Self> {
        let cases = energies
            .iter()
            .map(|e| EnsembleCase {
                system: SystemSpec::henon_heiles(),
                energy: Some(*e),
            })
            .collect();
        Self::new(cases, n_per_case, seed)
    }

    /// The Standard Map at each nonlinearity in `ks`.
    pub fn standard_map(ks: &[f64], n_per_case: usize, seed: u64) -> Result<Self> {
        let cases = ks
            .iter()
            .map(|k| {
                Ok(EnsembleCase {
                    system: SystemSpec::standard_map(*k)?,
                    energy: None,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(cases, n_per_case, seed)
    }

    /// Double pendulum at each `(α, σ)` in `params`, with `levels` energies
    /// per parameter pair from [`double_pendulum_energies`].
    pub fn double_pendulum(params: &[(f64, f64)], levels: usize, n_per_case: usize, seed: u64) -> Result<Self> {
        let mut cases = Vec::new();
        for &(alpha, sigma) in params {
            let system = SystemSpec::double_pendulum(alpha, sigma)?;
            for e in double_pendulum_energies(alpha, sigma, levels) {
                cases.push(EnsembleCase { system, energy: Some(e) });
            }
        }
        Self::new(cases, n_per_case, seed)
    }

    /// Four-well potential at each `(α, β, δ)` with `levels` energies per
    /// case from [`four_well_energies`].
    pub fn four_well(params: &[(f64, f64, f64)], levels: usize, n_per_case: usize, seed: u64) -> Result<Self> {
        let mut cases = Vec::new();
        for &(alpha, beta, delta) in params {
            let system = SystemSpec::four_well(alpha, beta, delta)?;
            for e in four_well_energies(&system, levels)? {
                cases.push(EnsembleCase { system, energy: Some(e) });
            }
        }
        Self::new(cases, n_per_case, seed)
    }

    pub fn kind(&self) -> SystemKind {
        self.cases[0].system.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_case == 0 {
            return Err(Error::InvalidParameter("n_per_case must be at least 1".into()));
        }
        let Some(first) = self.cases.first() else {
            return Err(Error::InvalidParameter("an ensemble needs at least one case".into()));
        };
        let kind = first.system.kind();
        for case in &self.cases {
            if case.system.kind() != kind {
                return Err(Error::InvalidParameter(format!(
                    "all cases must share one system kind, found {kind} and {}",
                    case.system.kind()
                )));
            }
            match (kind.is_map(), case.energy) {
                (true, None) => {}
                (true, Some(_)) => {
                    return Err(Error::InvalidParameter("standard map cases take no energy".into()));
                }
                (false, None) => {
                    return Err(Error::InvalidParameter(format!("{kind} cases need an energy")));
                }
                (false, Some(e)) => {
                    let (vmin, _) = case.system.flow("validate")?.potential_minimum();
                    if !(e > vmin) {
                        return Err(Error::InvalidParameter(format!(
                            "energy {e} is not above the potential minimum {vmin}"
                        )));
                    }
                }
            }
        }
        let ind = &self.indicators;
        if !(ind.ld_horizon > 0.0 && ind.sali_horizon > 0.0) {
            return Err(Error::InvalidParameter("horizons must be positive".into()));
        }
        ind.ld_integrator.validate()?;
        ind.sali_integrator.validate()
    }

    fn section_for(&self, case: &EnsembleCase) -> Result<Option<SectionSpec>> {
        if case.system.kind().is_map() {
            Ok(None)
        } else {
            Ok(Some(match self.section {
                Some(s) => s,
                None => case.system.default_section()?,
            }))
        }
    }
}

/// Double-pendulum energy ladder with `levels` entries. About 40/170 of the
/// levels are spread evenly from just above the minimum `−α(1+σ) − 1` up to
/// the index-2 saddle `α(1+σ) + 1`; the rest climb in equal steps to 130
/// above the saddle. With 170 levels this is 40 levels up to the saddle and
/// 130 unit steps beyond it.
pub fn double_pendulum_energies(alpha: f64, sigma: f64, levels: usize) -> Vec<f64> {
    let saddle = alpha * (1.0 + sigma) + 1.0;
    let bottom = -saddle;
    if levels < 2 {
        return vec![saddle; levels];
    }
    let below = ((levels as f64 * 40.0 / 170.0).round() as usize).clamp(1, levels - 1);
    let above = levels - below;
    let lower = (1..=below).map(|k| bottom + (saddle - bottom) * k as f64 / below as f64);
    let upper = (1..=above).map(|k| saddle + DOUBLE_PENDULUM_RANGE_ABOVE_SADDLE * k as f64 / above as f64);
    lower.chain(upper).collect()
}

/// Energy span of the ladder above the index-2 saddle.
pub const DOUBLE_PENDULUM_RANGE_ABOVE_SADDLE: f64 = 130.0;

/// Evenly spaced four-well energies measured from the minimum, up to a
/// quarter beyond the level `V(0, 0) = 0` of the central hilltop.
pub fn four_well_energies(system: &SystemSpec, levels: usize) -> Result<Vec<f64>> {
    let (vmin, _) = system.flow("four_well_energies")?.potential_minimum();
    Ok(spread(vmin, 0.0, levels))
}

fn spread(bottom: f64, top: f64, levels: usize) -> Vec<f64> {
    let span = 1.25 * (top - bottom);
    (1..=levels).map(|k| bottom + span * k as f64 / levels as f64).collect()
}

/// One drawn initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub case: usize,
    pub index: usize,
    pub point: [f64; 2],
    pub state: PhaseState,
}

/// Per-slot random stream keyed by `(seed, case, index)`, so every slot is
/// reproducible on its own regardless of evaluation order.
fn slot_rng(seed: u64, case: usize, index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((case as u64).to_le_bytes());
    h.update((index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Uniform rejection sampler on one case's slice.
struct SliceSampler {
    system: SystemSpec,
    section: Option<SectionSpec>,
    energy: Option<f64>,
    bounds: [[f64; 2]; 2],
}

impl SliceSampler {
    fn new(system: SystemSpec, section: Option<SectionSpec>, energy: Option<f64>) -> Result<Self> {
        let bounds = match (section, energy) {
            (Some(sec), Some(e)) => system.flow("sample_ensemble")?.slice_bounds(&sec, e)?,
            _ => [[0.0, 1.0], [0.0, 1.0]],
        };
        let sampler = SliceSampler {
            system,
            section,
            energy,
            bounds,
        };
        sampler.check_feasible_fraction()?;
        Ok(sampler)
    }

    fn feasible(&self, p: [f64; 2]) -> Result<Option<PhaseState>> {
        let (Some(sec), Some(e)) = (&self.section, self.energy) else {
            return Ok(Some(PhaseState::Map(p)));
        };
        match self.system.solve_constrained_momentum(sec, p, e) {
            Ok(s) => Ok(Some(PhaseState::Flow(s))),
            Err(Error::Infeasible) => Ok(None),
            Err(err) => Err(err),
        }
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let b = self.bounds;
        [rng.gen_range(b[0][0]..b[0][1]), rng.gen_range(b[1][0]..b[1][1])]
    }

    /// Pilot draws on a fixed stream; stops as soon as enough hits show the
    /// fraction is above the minimum.
    fn check_feasible_fraction(&self) -> Result<()> {
        let needed = (MIN_FEASIBLE_FRACTION * PILOT_DRAWS as f64).ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut hits = 0;
        for _ in 0..PILOT_DRAWS {
            if self.feasible(self.uniform(&mut rng))?.is_some() {
                hits += 1;
                if hits >= needed {
                    return Ok(());
                }
            }
        }
        Err(Error::DegenerateEnergy {
            energy: self.energy.unwrap_or(f64::NAN),
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<([f64; 2], PhaseState)> {
        for _ in 0..MAX_DRAWS {
            let p = self.uniform(rng);
            if let Some(state) = self.feasible(p)? {
                return Ok((p, state));
            }
        }
        Err(Error::DegenerateEnergy {
            energy: self.energy.unwrap_or(f64::NAN),
        })
    }
}

fn samplers(spec: &EnsembleSpec) -> Result<Vec<SliceSampler>> {
    spec.cases
        .iter()
        .map(|c| SliceSampler::new(c.system, spec.section_for(c)?, c.energy))
        .collect()
}

/// `n_per_case` uniform draws from each case's energetically allowed slice
/// (the unit square for the map), in case-major order.
pub fn sample_ensemble(spec: &EnsembleSpec) -> Result<Vec<Sample>> {
    spec.validate()?;
    let samplers = samplers(spec)?;
    let slots: Vec<(usize, usize)> = (0..spec.cases.len())
        .flat_map(|c| (0..spec.n_per_case).map(move |i| (c, i)))
        .collect();
    slots
        .into_par_iter()
        .map(|(case, index)| {
            let mut rng = slot_rng(spec.seed, case, index);
            let (point, state) = samplers[case].draw(&mut rng)?;
            Ok(Sample {
                case,
                index,
                point,
                state,
            })
        })
        .collect()
}

/// A generated dataset with its spec.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub spec: EnsembleSpec,
    pub records: Vec<IndicatorRecord>,
    /// Draws rejected because the stencil left the energy shell, plus slots
    /// lost to failed propagations.
    pub discarded: usize,
    /// Slots lost to failed propagations, with their messages.
    pub failures: Vec<String>,
}

impl LabeledDataset {
    pub fn attempts(&self) -> usize {
        self.records.len() + self.discarded
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    pub fn rows(&self) -> Vec<DatasetRow> {
        self.records.iter().map(DatasetRow::from).collect()
    }

    pub fn sidecar(&self) -> DatasetSidecar {
        DatasetSidecar {
            format_version: dataset::FORMAT_VERSION,
            spec: self.spec.clone(),
            records: self.records.len(),
            discarded: self.discarded,
            failures: self.failures.clone(),
        }
    }

    /// Writes the CSV table and its JSON sidecar next to it.
    pub fn write(&self, csv_path: &std::path::Path) -> Result<()> {
        write_rows(csv_path, &self.rows())?;
        dataset::write_sidecar(&sidecar_path(csv_path), &self.sidecar())
    }
}

struct SlotOutcome {
    record: Option<IndicatorRecord>,
    discarded: usize,
    failure: Option<String>,
}

fn run_slot(spec: &EnsembleSpec, sampler: &SliceSampler, case: usize, index: usize) -> Result<SlotOutcome> {
    let mut rng = slot_rng(spec.seed, case, index);
    let mut discarded = 0;
    for _ in 0..MAX_STENCIL_REDRAWS {
        let (point, _) = sampler.draw(&mut rng)?;
        match measure_point(
            &sampler.system,
            sampler.section.as_ref(),
            point,
            sampler.energy,
            &spec.indicators,
        ) {
            Ok(record) => {
                return Ok(SlotOutcome {
                    record: Some(record),
                    discarded,
                    failure: None,
                })
            }
            Err(Error::StencilInfeasible) => discarded += 1,
            Err(err) => {
                log::warn!("case {case} sample {index} at {point:?}: {err}");
                return Ok(SlotOutcome {
                    record: None,
                    discarded: discarded + 1,
                    failure: Some(format!("case {case} sample {index} at {point:?}: {err}")),
                });
            }
        }
    }
    Ok(SlotOutcome {
        record: None,
        discarded,
        failure: Some(format!("case {case} sample {index}: no feasible stencil")),
    })
}

/// Samples the ensemble and measures every sample, in parallel. Records are
/// assembled in case-major sample order; the output depends only on `spec`.
pub fn generate_dataset(spec: &EnsembleSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let samplers = samplers(spec)?;
    let mut records = Vec::with_capacity(spec.cases.len() * spec.n_per_case);
    let mut discarded = 0;
    let mut failures = Vec::new();
    for (case, sampler) in samplers.iter().enumerate() {
        let start = Instant::now();
        let outcomes: Vec<SlotOutcome> = (0..spec.n_per_case)
            .into_par_iter()
            .map(|index| run_slot(spec, sampler, case, index))
            .collect::<Result<_>>()?;
        for o in outcomes {
            records.extend(o.record);
            discarded += o.discarded;
            failures.extend(o.failure);
        }
        log::info!(
            "case {}/{} ({}, energy {:?}) done in {:.1?}",
            case + 1,
            spec.cases.len(),
            sampler.system.kind(),
            sampler.energy,
            start.elapsed()
        );
    }
    let zero_s = records.iter().filter(|r| r.log10_s.is_none()).count();
    if zero_s > 0 {
        log::warn!("{zero_s} records have S = 0 and no log10_S; they are excluded from log-feature training");
    }
    Ok(LabeledDataset {
        spec: spec.clone(),
        records,
        discarded,
        failures,
    })
}
