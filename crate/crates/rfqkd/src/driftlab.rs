//! Synthetic time-series experiments: a free-drift run analyzed with a
//! sliding window, and independent runs with randomized channel rotations.
//!
//! Time is organized in 2-minute blocks; each block measures one of the 9
//! setting pairs, cycling Alice-major ((1,1), (1,2), (1,3), (2,1), ...), so
//! one full cycle takes 18 minutes. Sliding windows span one full cycle and
//! advance one block (2 minutes) at a time.
//!
//! # Example
//!
//! ```
//! use rfqkd::driftlab::{analyze_windows, simulate_free_drift, DriftRunConfig};
//! use rfqkd::sampling::DriftProcess;
//!
//! let config = DriftRunConfig {
//!     duration_minutes: 54,
//!     counts_per_block: 0, // 0 = record exact correlators, no sampling
//!     visibility: 0.95,
//!     seed: 7,
//! };
//! let drift = DriftProcess::new(0.01, 0.7);
//! let blocks = simulate_free_drift(&config, &drift)?;
//! // three full 18-minute cycles of 9 blocks each
//! assert_eq!(blocks.len(), 27);
//! let analysis = analyze_windows(&blocks)?;
//! assert_eq!(analysis.windows.len(), 19);
//! # Ok::<(), rfqkd::Error>(())
//! ```

use crate::bellscan::chsh_scan;
use crate::correlations::{
    estimate_correlators, sample_counts, sample_pair_counts, tomography_linear, CorrelatorTable,
    CountTable,
};
use crate::error::{Error, Result};
use crate::keyrates::{report_from_table, KeyRateReport};
use crate::qmath::{MeasurementTriad, Rotation3, TwoQubitState};
use crate::sampling::{apply_channel, drift_step, random_rotation, sample_rng, DriftProcess};

pub const BLOCK_MINUTES: u64 = 2;
pub const CYCLE_BLOCKS: usize = 9;
pub const WINDOW_MINUTES: u64 = BLOCK_MINUTES * CYCLE_BLOCKS as u64;

/// One 2-minute measurement block.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    pub block_index: usize,
    /// (Alice setting, Bob setting), 1-based.
    pub setting_pair: (u8, u8),
    /// Outcome counts (++, +-, -+, --); all zero in exact mode.
    pub counts: [u64; 4],
    /// Set in exact ("infinite statistics") mode: the true correlator for
    /// this block's setting pair under the block's channel rotation.
    pub exact_correlator: Option<f64>,
    pub channel_rotation: Rotation3,
}

/// One analyzed 18-minute window (or one randomized run).
#[derive(Debug, Clone)]
pub struct WindowRecord {
    pub window_index: usize,
    pub time_start_minutes: u64,
    pub time_end_minutes: u64,
    pub table: CorrelatorTable,
    pub s_max: f64,
    pub c_max: f64,
    pub report: KeyRateReport,
    pub tomo_state: TwoQubitState,
}

#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub windows: Vec<WindowRecord>,
    /// Start indices of windows skipped because some setting pair had no
    /// block.
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DriftRunConfig {
    pub duration_minutes: u64,
    /// 0 selects exact-correlator mode (asymptotic statistics).
    pub counts_per_block: u64,
    pub visibility: f64,
    pub seed: u64,
}

impl DriftRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_minutes < WINDOW_MINUTES {
            return Err(Error::Config(format!(
                "duration {} min is shorter than one full {} min cycle",
                self.duration_minutes, WINDOW_MINUTES
            )));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::Config(format!(
                "visibility {} outside [0,1]",
                self.visibility
            )));
        }
        Ok(())
    }
}

fn pair_of_block(block_index: usize) -> (usize, usize) {
    let slot = block_index % CYCLE_BLOCKS;
    (slot / 3, slot % 3)
}

fn exact_table(visibility: f64, rotation: &Rotation3) -> CorrelatorTable {
    let alice = MeasurementTriad::canonical();
    let bob = apply_channel(&MeasurementTriad::canonical(), rotation);
    let mut e = [[0.0; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            e[x][y] = -visibility * alice.vector(x).dot(bob.vector(y));
        }
    }
    CorrelatorTable::from_trusted(e)
}

/// Simulates a free-drifting channel, one block per drift step. Only whole
/// 18-minute cycles are kept: a 174-minute request truncates to 9 cycles
/// (162 minutes, 81 blocks), which the sliding window then turns into 73
/// windows.
pub fn simulate_free_drift(
    config: &DriftRunConfig,
    drift: &DriftProcess,
) -> Result<Vec<BlockRecord>> {
    config.validate()?;
    let n_blocks = (config.duration_minutes / WINDOW_MINUTES) as usize * CYCLE_BLOCKS;
    let mut rng = sample_rng(config.seed, 0);
    let mut process = drift.clone();
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let (x, y) = pair_of_block(b);
        let rotation = process.current_rotation;
        let table = exact_table(config.visibility, &rotation);
        let (counts, exact) = if config.counts_per_block == 0 {
            ([0; 4], Some(table.e[x][y]))
        } else {
            (
                sample_pair_counts(&table, x, y, config.counts_per_block, &mut rng)?,
                None,
            )
        };
        blocks.push(BlockRecord {
            block_index: b,
            setting_pair: (x as u8 + 1, y as u8 + 1),
            counts,
            exact_correlator: exact,
            channel_rotation: rotation,
        });
        process = drift_step(&process, &mut rng);
    }
    Ok(blocks)
}

fn analyze_one_window(
    window_index: usize,
    time_start: u64,
    table: &CorrelatorTable,
) -> Result<WindowRecord> {
    let scan = chsh_scan(table);
    let tomo_state = tomography_linear(table)?;
    let canonical = MeasurementTriad::canonical();
    let report = report_from_table(table, &tomo_state, &canonical, &canonical)?;
    Ok(WindowRecord {
        window_index,
        time_start_minutes: time_start,
        time_end_minutes: time_start + WINDOW_MINUTES,
        table: table.clone(),
        s_max: scan.s_max,
        c_max: scan.c_max,
        report,
        tomo_state,
    })
}

/// Slides an 18-minute window over the block list, one block at a time, and
/// analyzes each position independently: correlator estimation (most recent
/// block per setting pair), CHSH scan, tomography, and the full key-rate
/// report with the Holevo terms evaluated on the tomographic state.
pub fn analyze_windows(blocks: &[BlockRecord]) -> Result<WindowAnalysis> {
    if blocks.len() < CYCLE_BLOCKS {
        return Err(Error::Config(format!(
            "need at least {CYCLE_BLOCKS} blocks, got {}",
            blocks.len()
        )));
    }
    let mut windows = Vec::new();
    let mut skipped = Vec::new();
    for w in 0..=blocks.len() - CYCLE_BLOCKS {
        let slice = &blocks[w..w + CYCLE_BLOCKS];
        let mut latest: [[Option<&BlockRecord>; 3]; 3] = [[None; 3]; 3];
        for block in slice {
            let (x, y) = (
                block.setting_pair.0 as usize - 1,
                block.setting_pair.1 as usize - 1,
            );
            latest[x][y] = Some(block);
        }
        if latest.iter().flatten().any(|b| b.is_none()) {
            skipped.push(w);
            continue;
        }
        let exact_mode = slice.iter().all(|b| b.exact_correlator.is_some());
        let table = if exact_mode {
            let mut e = [[0.0; 3]; 3];
            for x in 0..3 {
                for y in 0..3 {
                    e[x][y] = latest[x][y].unwrap().exact_correlator.unwrap();
                }
            }
            CorrelatorTable::from_correlators(e)?
        } else if slice.iter().all(|b| b.exact_correlator.is_none()) {
            let mut counts = [[[0u64; 4]; 3]; 3];
            for x in 0..3 {
                for y in 0..3 {
                    counts[x][y] = latest[x][y].unwrap().counts;
                }
            }
            estimate_correlators(&CountTable { counts })?
        } else {
            return Err(Error::Config(
                "block list mixes exact and counted blocks".into(),
            ));
        };
        windows.push(analyze_one_window(w, BLOCK_MINUTES * w as u64, &table)?);
    }
    Ok(WindowAnalysis { windows, skipped })
}

/// Measures all 9 setting pairs under one fixed channel rotation and
/// analyzes the result as a single window.
pub fn randomized_run_with_rotation<R: rand::Rng + ?Sized>(
    run_index: usize,
    rotation: &Rotation3,
    counts_per_block: u64,
    visibility: f64,
    rng: &mut R,
) -> Result<WindowRecord> {
    let true_table = exact_table(visibility, rotation);
    let table = if counts_per_block == 0 {
        true_table
    } else {
        estimate_correlators(&sample_counts(&true_table, counts_per_block, rng)?)?
    };
    analyze_one_window(run_index, 0, &table)
}

/// Independent runs, each under a fresh Haar-random channel rotation; run
/// `r` uses RNG stream `r` of the seed, so the set of runs is deterministic
/// and order-independent.
pub fn simulate_randomized_runs(
    n_runs: usize,
    counts_per_block: u64,
    visibility: f64,
    seed: u64,
) -> Result<Vec<WindowRecord>> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::Config(format!("visibility {visibility} outside [0,1]")));
    }
    (0..n_runs)
        .map(|r| {
            let mut rng = sample_rng(seed, r as u64);
            let rotation = random_rotation(&mut rng);
            randomized_run_with_rotation(r, &rotation, counts_per_block, visibility, &mut rng)
        })
        .collect()
}
