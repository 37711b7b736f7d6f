//! Command-line interface: reproducible simulation and analysis workflows
//! over the library, with CSV/JSON outputs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rfqkd::bellscan::chsh_scan;
use rfqkd::correlations::{correlators_from_state, estimate_correlators, tomography_linear};
use rfqkd::driftlab::{
    analyze_windows, simulate_free_drift, simulate_randomized_runs, DriftRunConfig, WindowRecord,
};
use rfqkd::error::Error;
use rfqkd::io::{
    histogram_csv, parse_correlator_csv, parse_counts_csv, parse_state_json, scan_to_json,
    state_to_json, table_to_json, window_csv, write_atomic,
};
use rfqkd::keyrates::report_from_table;
use rfqkd::montecarlo::{histogram_emit, run_distribution, McConfig, RateKind};
use rfqkd::qmath::{BlochVector, MeasurementTriad, Rotation3};
use rfqkd::sampling::DriftProcess;
use rfqkd::Result;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "RFQKD_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "rfqkd",
    about = "Reference-frame-free QKD simulation and analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for parallel sections (default: all cores). Outputs
    /// are identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output path: a directory for `simulate`, a file otherwise. Defaults
    /// to the directory named by RFQKD_OUT_DIR (analysis commands print to
    /// stdout when no path is given).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format where a choice exists (drift/randomized windows).
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputKind {
    Auto,
    Correlators,
    Counts,
    State,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo distributions of the key-rate bounds over random triads.
    Simulate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,0.98,0.95")]
        visibilities: Vec<f64>,
        /// Comma-separated subset of di1,di2,dd6,bb84,dd.
        #[arg(long, value_delimiter = ',', default_value = "di1,di2,dd6,bb84,dd")]
        rates: Vec<String>,
        #[arg(long, default_value_t = 0.01)]
        bin_width: f64,
    },
    /// All key-rate bounds for a correlator table, count table, or state.
    Keyrates {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputKind::Auto)]
        input_kind: InputKind,
    },
    /// All 36 CHSH parameters with S_max and C_max.
    Scan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputKind::Auto)]
        input_kind: InputKind,
    },
    /// Linear-inversion state reconstruction from a table or counts.
    Tomography {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputKind::Auto)]
        input_kind: InputKind,
    },
    /// Free-drift time series with sliding-window analysis.
    Drift {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 174)]
        minutes: u64,
        /// Outcomes per 2-minute block; 0 means exact correlators.
        #[arg(long, default_value_t = 0)]
        counts_per_block: u64,
        #[arg(long, default_value_t = 0.95)]
        visibility: f64,
        /// Std of the half-normal per-block drift angle (radians).
        #[arg(long, default_value_t = 0.01)]
        step_std: f64,
        /// Correlation of successive drift axes in [0,1].
        #[arg(long, default_value_t = 0.7)]
        axis_corr: f64,
        /// Initial channel misalignment: rotation about z by this angle.
        #[arg(long, default_value_t = 0.0)]
        initial_angle: f64,
        /// Pin the drift axis to a fixed direction, e.g. "0,0,-1".
        #[arg(long)]
        pinned_axis: Option<String>,
    },
    /// Independent runs under randomized channel rotations.
    Randomized {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 17)]
        runs: usize,
        /// Outcomes per setting pair and run; 0 means exact correlators.
        #[arg(long, default_value_t = 0)]
        counts_per_block: u64,
        #[arg(long, default_value_t = 0.95)]
        visibility: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: could not configure {workers} workers: {err}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Invariant(_) | Error::Domain(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Output file for single-file commands; `None` means stdout.
fn out_file(cli: &Cli, default_name: &str, force_file: bool) -> Option<PathBuf> {
    if let Some(path) = &cli.out {
        return Some(path.clone());
    }
    let from_env = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match (from_env, force_file) {
        (Some(dir), _) => Some(dir.join(default_name)),
        (None, true) => Some(PathBuf::from(default_name)),
        (None, false) => None,
    }
}

fn emit(target: Option<&Path>, contents: &str) -> Result<()> {
    match target {
        Some(path) => {
            write_atomic(path, contents)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { seed, samples, visibilities, rates, bin_width } => {
            let rates = rates
                .iter()
                .map(|r| r.parse::<RateKind>())
                .collect::<Result<Vec<_>>>()?;
            let config = McConfig {
                n_samples: *samples,
                visibilities: visibilities.clone(),
                master_seed: *seed,
                bin_width: *bin_width,
                rates,
            };
            let summary = run_distribution(&config)?;
            let dir = out_dir(cli);
            std::fs::create_dir_all(&dir)?;
            let summary_json = serde_json::to_string_pretty(&summary)?;
            write_atomic(&dir.join("histograms.csv"), &histogram_csv(&histogram_emit(&summary)))?;
            write_atomic(&dir.join("summary.json"), &(summary_json + "\n"))?;
            eprintln!(
                "wrote {} and {}",
                dir.join("histograms.csv").display(),
                dir.join("summary.json").display()
            );
            Ok(())
        }
        Command::Keyrates { input, input_kind } => {
            let loaded = load_input(input, *input_kind)?;
            let report = keyrates_json(&loaded)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            emit(out_file(cli, "keyrates.json", false).as_deref(), &text)
        }
        Command::Scan { input, input_kind } => {
            let loaded = load_input(input, *input_kind)?;
            let scan = chsh_scan(&loaded.table);
            let text = serde_json::to_string_pretty(&scan_to_json(&scan))? + "\n";
            emit(out_file(cli, "scan.json", false).as_deref(), &text)
        }
        Command::Tomography { input, input_kind } => {
            let loaded = load_input(input, *input_kind)?;
            if !loaded.marginals_known {
                return Err(Error::Config(
                    "tomography needs marginals: provide MA/MB rows or counts".into(),
                ));
            }
            let state = tomography_linear(&loaded.table)?;
            let text = serde_json::to_string_pretty(&state_to_json(&state))? + "\n";
            emit(out_file(cli, "tomography.json", false).as_deref(), &text)
        }
        Command::Drift {
            seed,
            minutes,
            counts_per_block,
            visibility,
            step_std,
            axis_corr,
            initial_angle,
            pinned_axis,
        } => {
            let config = DriftRunConfig {
                duration_minutes: *minutes,
                counts_per_block: *counts_per_block,
                visibility: *visibility,
                seed: *seed,
            };
            let mut drift = DriftProcess::new(*step_std, *axis_corr).with_initial_rotation(
                Rotation3::from_axis_angle(BlochVector::new(0.0, 0.0, 1.0), *initial_angle),
            );
            if let Some(axis) = pinned_axis {
                drift = drift.with_initial_axis(parse_axis(axis)?);
            }
            let blocks = simulate_free_drift(&config, &drift)?;
            let analysis = analyze_windows(&blocks)?;
            for w in &analysis.skipped {
                eprintln!("notice: window {w} skipped (missing setting pairs)");
            }
            let meta = json!({
                "command": "drift",
                "seed": seed,
                "minutes": minutes,
                "counts_per_block": counts_per_block,
                "visibility": visibility,
                "step_std": step_std,
                "axis_corr": axis_corr,
                "initial_angle": initial_angle,
                "pinned_axis": pinned_axis,
                "windows": analysis.windows.len(),
                "skipped": analysis.skipped,
            });
            emit_windows(cli, "drift_windows", &analysis.windows, &meta)
        }
        Command::Randomized { seed, runs, counts_per_block, visibility } => {
            let windows = simulate_randomized_runs(*runs, *counts_per_block, *visibility, *seed)?;
            let meta = json!({
                "command": "randomized",
                "seed": seed,
                "runs": runs,
                "counts_per_block": counts_per_block,
                "visibility": visibility,
            });
            emit_windows(cli, "randomized_windows", &windows, &meta)
        }
    }
}

fn parse_axis(text: &str) -> Result<BlochVector> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("axis '{text}' must be three comma-separated numbers")));
    }
    let mut v = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("axis component '{p}' is not a number")))?;
    }
    BlochVector::new(v[0], v[1], v[2]).normalized()
}

fn window_json(w: &WindowRecord) -> Value {
    json!({
        "window_index": w.window_index,
        "t_start": w.time_start_minutes,
        "t_end": w.time_end_minutes,
        "s_max": w.s_max,
        "c_max": w.c_max,
        "r_di1": w.report.r_di1,
        "r_di2": w.report.r_di2,
        "r_dd6": w.report.r_dd_6state,
        "r_bb84": w.report.r_dd_bb84,
        "r_dd": w.report.r_dd,
    })
}

fn emit_windows(cli: &Cli, stem: &str, windows: &[WindowRecord], meta: &Value) -> Result<()> {
    match cli.format {
        OutputFormat::Csv => {
            // the CSV stays a plain RFC-4180 table; the full config echo
            // needed for reproduction lives in a sibling meta file
            let csv_path = out_file(cli, &format!("{stem}.csv"), true)
                .expect("force_file yields a path");
            let meta_path = csv_path.with_extension("meta.json");
            write_atomic(&csv_path, &window_csv(windows))?;
            write_atomic(&meta_path, &(serde_json::to_string_pretty(meta)? + "\n"))?;
            eprintln!("wrote {} and {}", csv_path.display(), meta_path.display());
            Ok(())
        }
        OutputFormat::Json => {
            let doc = json!({
                "config": meta,
                "windows": windows.iter().map(window_json).collect::<Vec<_>>(),
            });
            let text = serde_json::to_string_pretty(&doc)? + "\n";
            emit(out_file(cli, &format!("{stem}.json"), false).as_deref(), &text)
        }
    }
}

struct LoadedInput {
    table: rfqkd::correlations::CorrelatorTable,
    /// True when marginals were measured (counts or explicit MA/MB rows) or
    /// derived from a state; tomography is only offered then.
    marginals_known: bool,
    state: Option<rfqkd::qmath::TwoQubitState>,
    notices: Vec<String>,
}

fn load_input(path: &Path, kind: InputKind) -> Result<LoadedInput> {
    let text = std::fs::read_to_string(path)?;
    let kind = match kind {
        InputKind::Auto => detect_kind(&text),
        k => k,
    };
    match kind {
        InputKind::State => {
            let state = parse_state_json(&text)?;
            let canonical = MeasurementTriad::canonical();
            let table = correlators_from_state(&state, &canonical, &canonical);
            Ok(LoadedInput {
                table,
                marginals_known: true,
                state: Some(state),
                notices: vec!["correlators derived from the state with canonical triads".into()],
            })
        }
        InputKind::Counts => {
            let counts = parse_counts_csv(&text)?;
            let table = estimate_correlators(&counts)?;
            Ok(LoadedInput { table, marginals_known: true, state: None, notices: vec![] })
        }
        InputKind::Correlators => {
            let (table, has_marginals) = parse_correlator_csv(&text)?;
            let notices = if has_marginals {
                vec![]
            } else {
                vec![
                    "marginals not provided: tomographic state omitted; \
                     state-based quantities assume zero marginals"
                        .into(),
                ]
            };
            Ok(LoadedInput { table, marginals_known: has_marginals, state: None, notices })
        }
        InputKind::Auto => unreachable!("auto resolved above"),
    }
}

fn detect_kind(text: &str) -> InputKind {
    let head = text.trim_start();
    if head.starts_with('{') {
        InputKind::State
    } else if head
        .lines()
        .next()
        .map(|l| l.to_ascii_lowercase().starts_with("x,y,"))
        .unwrap_or(false)
    {
        InputKind::Counts
    } else {
        InputKind::Correlators
    }
}

fn keyrates_json(loaded: &LoadedInput) -> Result<Value> {
    let canonical = MeasurementTriad::canonical();
    let mut notices = loaded.notices.clone();
    // the Devetak-Winter bound needs a state; reconstruct one when the
    // input did not supply it
    let (state, tomographic) = match &loaded.state {
        Some(s) => (s.clone(), false),
        None => (tomography_linear(&loaded.table)?, true),
    };
    let report = report_from_table(&loaded.table, &state, &canonical, &canonical)?;
    let scan = chsh_scan(&loaded.table);
    if scan.tsirelson_exceeded {
        notices.push("S_max exceeds the Tsirelson bound (statistical noise)".into());
    }
    let emit_state = loaded.state.is_some() || (tomographic && loaded.marginals_known);
    Ok(json!({
        "table": table_to_json(&loaded.table),
        "s_max": scan.s_max,
        "s_max_tuple": scan.s_max_tuple,
        "c_max": scan.c_max,
        "c_max_pairing": scan.c_max_pairing,
        "tsirelson_exceeded": scan.tsirelson_exceeded,
        "report": report,
        "tomography": if emit_state { state_to_json(&state) } else { Value::Null },
        "notices": notices,
    }))
}
