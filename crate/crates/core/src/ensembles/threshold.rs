//! Valley search on a smoothed histogram of log-indicator values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub bins: usize,
    /// Moving-average window, in bins.
    pub smoothing: usize,
    /// Minimum distance between the two peaks, in bins.
    pub min_separation: usize,
    /// Minimum height of the second peak relative to the first, applied to
    /// both the smoothed peak heights and the counts on either side of the
    /// valley.
    pub min_peak_ratio: f64,
    /// The valley must fall below this fraction of the lower peak.
    pub max_valley_ratio: f64,
    /// The dip from the lower peak to the valley must exceed this many
    /// Poisson standard errors of the smoothed counts.
    pub min_dip_significance: f64,
    /// Refinement stops once the threshold moves less than this fraction of
    /// the data range.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            bins: 100,
            smoothing: 5,
            min_separation: 5,
            min_peak_ratio: 0.05,
            max_valley_ratio: 0.5,
            min_dip_significance: 3.0,
            tolerance: 0.01,
            max_iterations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub smoothed: Vec<f64>,
}

impl Histogram {
    fn build(values: &[f64], lo: f64, hi: f64, bins: usize, window: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0u64; bins];
        for &v in values {
            if v < lo || v > hi {
                continue;
            }
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let smoothed = moving_average(&counts, window);
        Histogram { edges, counts, smoothed }
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }
}

/// Centred moving average, truncated at the ends.
fn moving_average(counts: &[u64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..counts.len())
        .map(|i| {
            let a = i.saturating_sub(half);
            let b = (i + half + 1).min(counts.len());
            counts[a..b].iter().sum::<u64>() as f64 / (b - a) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub threshold: f64,
    /// Histogram over the full data range at the base resolution.
    pub histogram: Histogram,
    /// Centres of the two peaks, in increasing order.
    pub peaks: [f64; 2],
    pub converged: bool,
    pub iterations: usize,
    pub config: ThresholdConfig,
}

/// Indices of local maxima of `s`, plateaus reported once at their left end.
fn local_maxima(s: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let left_ok = i == 0 || s[i - 1] < s[i];
        let right_ok = j + 1 == s.len() || s[j + 1] < s[i];
        if left_ok && right_ok && s[i] > 0.0 {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Index of the smallest value in `s[a..b]`, taking the middle of a run of
/// equal minima.
fn valley(s: &[f64], a: usize, b: usize) -> usize {
    let m = s[a..b].iter().copied().fold(f64::INFINITY, f64::min);
    let first = (a..b).find(|&i| s[i] == m).unwrap_or(a);
    let mut last = first;
    while last + 1 < b && s[last + 1] == m {
        last += 1;
    }
    (first + last) / 2
}

/// Locates the valley between the two dominant populations of `values`.
///
/// Builds a smoothed histogram over the data range, takes the highest peak
/// and the highest other peak at least `min_separation` bins away, and
/// returns the centre of the lowest bin strictly between them. The valley is
/// then re-binned at doubled resolution in a shrinking window until the
/// threshold settles.
pub fn find_threshold(values: &[f64], cfg: &ThresholdConfig) -> Result<ThresholdResult> {
    let values: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if values.len() < 200 {
        return Err(Error::InsufficientData(format!(
            "{} finite values, the threshold search needs 200",
            values.len()
        )));
    }
    if cfg.bins < 2 * cfg.min_separation.max(1) || cfg.smoothing == 0 {
        return Err(Error::InvalidParameter(format!("unusable threshold configuration {cfg:?}")));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= 0.0 {
        return Err(Error::NoThreshold);
    }
    let hist = Histogram::build(&values, lo, hi, cfg.bins, cfg.smoothing);
    let s = &hist.smoothed;
    let maxima = local_maxima(s);
    let &first = maxima
        .iter()
        .max_by(|a, b| s[**a].total_cmp(&s[**b]).then(b.cmp(a)))
        .ok_or(Error::NoThreshold)?;
    // The second peak is the highest one far enough from the first, tall
    // enough, separated from it by a real dip, and holding enough of the
    // data on its side of that dip.
    let mut candidates: Vec<usize> = maxima
        .iter()
        .copied()
        .filter(|&i| i.abs_diff(first) >= cfg.min_separation)
        .filter(|&i| s[i] >= cfg.min_peak_ratio * s[first])
        .collect();
    candidates.sort_by(|a, b| s[*b].total_cmp(&s[*a]).then(a.cmp(b)));
    let (second, v) = candidates
        .into_iter()
        .find_map(|i| {
            let v = valley(s, first.min(i) + 1, first.max(i));
            let below: u64 = hist.counts[..v].iter().sum();
            let above: u64 = hist.counts[v + 1..].iter().sum();
            let (near, far) = if i > first { (below, above) } else { (above, below) };
            let heavy = far as f64 >= cfg.min_peak_ratio * near as f64;
            let noise = ((s[i] + s[v]) / cfg.smoothing as f64).sqrt();
            let significant = s[i] - s[v] > cfg.min_dip_significance * noise;
            (s[v] < cfg.max_valley_ratio * s[i] && heavy && significant).then_some((i, v))
        })
        .ok_or(Error::NoThreshold)?;
    let (p_lo, p_hi) = (first.min(second), first.max(second));
    let peaks = [hist.center(p_lo), hist.center(p_hi)];
    let mut threshold = hist.center(v);

    // Refinement: each pass doubles the resolution and halves the window
    // around the current valley, staying strictly between the peaks.
    let mut half_window = 0.5 * (peaks[1] - peaks[0]);
    let mut converged = false;
    let mut iterations = 0;
    let mut bins = cfg.bins;
    while iterations < cfg.max_iterations {
        iterations += 1;
        bins *= 2;
        half_window *= 0.5;
        let fine = Histogram::build(&values, lo, hi, bins, cfg.smoothing);
        let lo_b = fine.edges.partition_point(|e| *e <= (threshold - half_window).max(peaks[0]));
        let hi_b = fine.edges.partition_point(|e| *e < (threshold + half_window).min(peaks[1])) - 1;
        if hi_b <= lo_b {
            converged = true;
            break;
        }
        let next = fine.center(valley(&fine.smoothed, lo_b, hi_b));
        let moved = (next - threshold).abs();
        threshold = next;
        if moved < cfg.tolerance * range {
            converged = true;
            break;
        }
    }
    Ok(ThresholdResult {
        threshold,
        histogram: hist,
        peaks,
        converged,
        iterations,
        config: *cfg,
    })
}
