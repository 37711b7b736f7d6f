//! Distributions of the key-rate bounds over Haar-random triad pairs for a
//! family of Werner-state visibilities: positivity fractions, means,
//! post-selected means, extremes, and fixed-width histograms.
//!
//! # Example
//!
//! ```
//! use rfqkd::montecarlo::{run_distribution, McConfig, RateKind};
//!
//! let config = McConfig {
//!     n_samples: 2000,
//!     visibilities: vec![1.0],
//!     master_seed: 7,
//!     bin_width: 0.01,
//!     rates: vec![RateKind::Di1],
//! };
//! let summary = run_distribution(&config)?;
//! let cell = summary.cell(RateKind::Di1, 1.0).unwrap();
//! // most random triad pairs admit a positive device-independent rate, and
//! // none beats the planar optimum of about 0.450
//! assert!(cell.fraction_positive > 0.7);
//! assert!(cell.max_observed <= 0.451);
//! # Ok::<(), rfqkd::Error>(())
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellscan::chsh_value;
use crate::correlations::CorrelatorTable;
use crate::error::{Error, Result};
use crate::keyrates::{rate_dd_6state, rate_dd_bb84, rate_di1, rate_di2};
use crate::sampling::{random_triad, sample_rng};

/// Fixed work-unit size; parallel workers each process whole chunks and the
/// partial results are merged in chunk order, so the output is independent
/// of the worker count.
const CHUNK: u64 = 1024;

/// Which key-rate bounds to evaluate per sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Di1,
    Di2,
    Dd6,
    Bb84,
    Dd,
}

impl RateKind {
    pub const ALL: [RateKind; 5] =
        [RateKind::Di1, RateKind::Di2, RateKind::Dd6, RateKind::Bb84, RateKind::Dd];

    pub fn name(self) -> &'static str {
        match self {
            RateKind::Di1 => "di1",
            RateKind::Di2 => "di2",
            RateKind::Dd6 => "dd6",
            RateKind::Bb84 => "bb84",
            RateKind::Dd => "dd",
        }
    }
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "di1" => Ok(RateKind::Di1),
            "di2" => Ok(RateKind::Di2),
            "dd6" => Ok(RateKind::Dd6),
            "bb84" => Ok(RateKind::Bb84),
            "dd" => Ok(RateKind::Dd),
            other => Err(Error::Config(format!(
                "unknown rate '{other}' (expected di1, di2, dd6, bb84 or dd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub visibilities: Vec<f64>,
    pub master_seed: u64,
    pub bin_width: f64,
    pub rates: Vec<RateKind>,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.visibilities.is_empty() {
            return Err(Error::Config("at least one visibility is required".into()));
        }
        for &v in &self.visibilities {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("visibility {v} outside [0,1]")));
            }
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::Config(format!("bin_width {} must be > 0", self.bin_width)));
        }
        if self.rates.is_empty() {
            return Err(Error::Config("at least one rate must be enabled".into()));
        }
        Ok(())
    }
}

/// Fixed-width histogram; bin `i` covers `[i*w, (i+1)*w)`, and indices may
/// be negative (the DI sentinel -1 lands in a real bin).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: OrderedWidth,
    pub bins: BTreeMap<i64, u64>,
    pub total: u64,
}

/// Wrapper so `Histogram` can derive `Eq` (bin widths are config inputs,
/// never NaN).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedWidth(pub f64);

impl PartialEq for OrderedWidth {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}
impl Eq for OrderedWidth {}

impl Histogram {
    pub fn new(bin_width: f64) -> Self {
        Histogram { bin_width: OrderedWidth(bin_width), bins: BTreeMap::new(), total: 0 }
    }

    pub fn record(&mut self, value: f64) {
        let index = (value / self.bin_width.0).floor() as i64;
        *self.bins.entry(index).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.bin_width, other.bin_width);
        for (&i, &c) in &other.bins {
            *self.bins.entry(i).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn bin_center(&self, index: i64) -> f64 {
        (index as f64 + 0.5) * self.bin_width.0
    }

    /// Index of the most populated bin (smallest index on ties).
    pub fn mode_bin(&self) -> Option<i64> {
        self.bins.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&i, _)| i)
    }
}

/// Accumulated statistics for one (rate, visibility) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub rate: RateKind,
    pub visibility: f64,
    pub fraction_positive: f64,
    pub mean: f64,
    /// Mean over samples with rate > 0; absent when no sample is positive.
    pub mean_post_selected: Option<f64>,
    pub max_observed: f64,
    pub min_observed: f64,
    pub histogram: Histogram,
}

/// Per-visibility statistics of the largest CHSH parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChshCell {
    pub visibility: f64,
    pub mean_s_max: f64,
    pub fraction_s_above_2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub config: McConfig,
    /// Rate-major, visibility-minor, in config order.
    pub cells: Vec<CellSummary>,
    pub chsh: Vec<ChshCell>,
}

impl MonteCarloSummary {
    pub fn cell(&self, rate: RateKind, visibility: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.rate == rate && c.visibility == visibility)
    }
}

#[derive(Clone)]
struct CellAcc {
    positive: u64,
    sum: f64,
    sum_positive: f64,
    max: f64,
    min: f64,
    histogram: Histogram,
}

impl CellAcc {
    fn new(bin_width: f64) -> Self {
        CellAcc {
            positive: 0,
            sum: 0.0,
            sum_positive: 0.0,
            max: f64::NEG_INFINITY,
            min: f64::INFINITY,
            histogram: Histogram::new(bin_width),
        }
    }

    fn record(&mut self, value: f64) {
        if value > 0.0 {
            self.positive += 1;
            self.sum_positive += value;
        }
        self.sum += value;
        self.max = self.max.max(value);
        self.min = self.min.min(value);
        self.histogram.record(value);
    }

    fn merge(&mut self, other: &CellAcc) {
        self.positive += other.positive;
        self.sum += other.sum;
        self.sum_positive += other.sum_positive;
        self.max = self.max.max(other.max);
        self.min = self.min.min(other.min);
        self.histogram.merge(&other.histogram);
    }
}

#[derive(Clone)]
struct Partial {
    cells: Vec<CellAcc>,
    s_max_sum: Vec<f64>,
    s_above_2: Vec<u64>,
}

impl Partial {
    fn new(config: &McConfig) -> Self {
        let n_cells = config.rates.len() * config.visibilities.len();
        Partial {
            cells: vec![CellAcc::new(config.bin_width); n_cells],
            s_max_sum: vec![0.0; config.visibilities.len()],
            s_above_2: vec![0; config.visibilities.len()],
        }
    }

    fn merge(&mut self, other: &Partial) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.merge(b);
        }
        for (a, b) in self.s_max_sum.iter_mut().zip(&other.s_max_sum) {
            *a += b;
        }
        for (a, b) in self.s_above_2.iter_mut().zip(&other.s_above_2) {
            *a += b;
        }
    }
}

fn s_max_of(e: &[[f64; 3]; 3]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for x in 0..3 {
        for xp in (x + 1)..3 {
            for y in 0..3 {
                for yp in (y + 1)..3 {
                    // for fixed setting pairs the 4 orderings put the minus
                    // sign on each of the 4 correlators in turn
                    let a = chsh_value(e, x, xp, y, yp);
                    let b = chsh_value(e, xp, x, y, yp);
                    let c = chsh_value(e, x, xp, yp, y);
                    let d = chsh_value(e, xp, x, yp, y);
                    best = best.max(a.max(b)).max(c.max(d));
                }
            }
        }
    }
    best
}

fn process_chunk(config: &McConfig, chunk_index: u64) -> Partial {
    let mut partial = Partial::new(config);
    let start = chunk_index * CHUNK;
    let end = (start + CHUNK).min(config.n_samples);
    let n_vis = config.visibilities.len();
    for sample in start..end {
        let mut rng = sample_rng(config.master_seed, sample);
        let ta = random_triad(&mut rng);
        let tb = random_triad(&mut rng);
        // relative orientation enters only through the 9 dot products,
        // computed once and rescaled per visibility
        let mut d = [[0.0; 3]; 3];
        for x in 0..3 {
            for y in 0..3 {
                d[x][y] = ta.vector(x).dot(tb.vector(y));
            }
        }
        for (vi, &v) in config.visibilities.iter().enumerate() {
            let mut e = [[0.0; 3]; 3];
            for x in 0..3 {
                for y in 0..3 {
                    e[x][y] = -v * d[x][y];
                }
            }
            let s_max = s_max_of(&e);
            partial.s_max_sum[vi] += s_max;
            if s_max > 2.0 {
                partial.s_above_2[vi] += 1;
            }
            let table = CorrelatorTable::from_trusted(e);
            for (ri, &rate) in config.rates.iter().enumerate() {
                let value = match rate {
                    RateKind::Di1 => rate_di1(&table).0,
                    RateKind::Di2 => rate_di2(&table).0,
                    RateKind::Dd6 => rate_dd_6state(&table).0,
                    RateKind::Bb84 => rate_dd_bb84(&table).0,
                    RateKind::Dd => crate::keyrates::rate_dd_werner(&table, v)
                        .expect("visibility validated by config")
                        .0,
                };
                partial.cells[ri * n_vis + vi].record(value);
            }
        }
    }
    partial
}

/// Estimates the distribution of every enabled rate at every visibility.
///
/// Deterministic for a fixed config: each sample owns an independent RNG
/// stream keyed by its index, and chunk partials are merged in index order
/// regardless of how many workers processed them.
pub fn run_distribution(config: &McConfig) -> Result<MonteCarloSummary> {
    config.validate()?;
    let n_chunks = config.n_samples.div_ceil(CHUNK);
    let partials: Vec<Partial> =
        (0..n_chunks).into_par_iter().map(|c| process_chunk(config, c)).collect();
    let mut acc = Partial::new(config);
    for p in &partials {
        acc.merge(p);
    }

    let n = config.n_samples as f64;
    let n_vis = config.visibilities.len();
    let mut cells = Vec::with_capacity(acc.cells.len());
    for (ri, &rate) in config.rates.iter().enumerate() {
        for (vi, &v) in config.visibilities.iter().enumerate() {
            let cell = &acc.cells[ri * n_vis + vi];
            cells.push(CellSummary {
                rate,
                visibility: v,
                fraction_positive: cell.positive as f64 / n,
                mean: cell.sum / n,
                mean_post_selected: (cell.positive > 0)
                    .then(|| cell.sum_positive / cell.positive as f64),
                max_observed: cell.max,
                min_observed: cell.min,
                histogram: cell.histogram.clone(),
            });
        }
    }
    let chsh = config
        .visibilities
        .iter()
        .enumerate()
        .map(|(vi, &v)| ChshCell {
            visibility: v,
            mean_s_max: acc.s_max_sum[vi] / n,
            fraction_s_above_2: acc.s_above_2[vi] as f64 / n,
        })
        .collect();
    Ok(MonteCarloSummary { config: config.clone(), cells, chsh })
}

/// One plot-ready histogram row.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramRow {
    pub rate: RateKind,
    pub visibility: f64,
    pub bin_center: f64,
    pub count: u64,
}

/// Flattens every cell histogram into `(rate, visibility, bin_center, count)`
/// rows; counts sum to `n_samples` per cell.
pub fn histogram_emit(summary: &MonteCarloSummary) -> Vec<HistogramRow> {
    let mut rows = Vec::new();
    for cell in &summary.cells {
        for (&index, &count) in &cell.histogram.bins {
            rows.push(HistogramRow {
                rate: cell.rate,
                visibility: cell.visibility,
                bin_center: cell.histogram.bin_center(index),
                count,
            });
        }
    }
    rows
}
