//! File formats: histogram and window CSV emission, correlator/count CSV
//! parsing with line-numbered errors, and state JSON with complex entries
//! as `[re, im]` pairs.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::bellscan::ChshScan;
use crate::correlations::{CorrelatorTable, CountTable};
use crate::driftlab::WindowRecord;
use crate::error::{Error, Result};
use crate::montecarlo::HistogramRow;
use crate::qmath::{Mat4, TwoQubitState, C64};

/// Formats with 9 significant digits, the precision contract for every CSV
/// float in this crate.
pub fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// `rate,visibility,bin_center,count` rows.
pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("rate,visibility,bin_center,count\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.rate,
            format_float(row.visibility),
            format_float(row.bin_center),
            row.count
        ));
    }
    out
}

/// `window_index,t_start,t_end,s_max,c_max,r_di1,r_di2,r_dd6,r_bb84,r_dd`
/// rows, one per analyzed window.
pub fn window_csv(windows: &[WindowRecord]) -> String {
    let mut out =
        String::from("window_index,t_start,t_end,s_max,c_max,r_di1,r_di2,r_dd6,r_bb84,r_dd\n");
    for w in windows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            w.window_index,
            w.time_start_minutes,
            w.time_end_minutes,
            format_float(w.s_max),
            format_float(w.c_max),
            format_float(w.report.r_di1),
            format_float(w.report.r_di2),
            format_float(w.report.r_dd_6state),
            format_float(w.report.r_dd_bb84),
            format_float(w.report.r_dd),
        ));
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_index(field: &str, line: usize, what: &str) -> Result<usize> {
    let v: usize = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what} '{field}' is not an integer")))?;
    if !(1..=3).contains(&v) {
        return Err(parse_err(line, format!("{what} {v} outside 1..=3")));
    }
    Ok(v - 1)
}

fn parse_float(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what} '{field}' is not a number")))
}

/// Parses the correlator table format:
///
/// ```csv
/// kind,x,y,value
/// E,1,1,-0.95
/// MA,1,,0.01
/// MB,,2,0.0
/// ```
///
/// All 9 `E` rows are required. The 6 marginal rows (`MA` per Alice setting,
/// `MB` per Bob setting) are optional but all-or-nothing; when absent the
/// table carries zero marginals and the returned flag is false, signalling
/// that tomography would be unfounded.
pub fn parse_correlator_csv(text: &str) -> Result<(CorrelatorTable, bool)> {
    let mut e = [[None::<f64>; 3]; 3];
    let mut m_a = [None::<f64>; 3];
    let mut m_b = [None::<f64>; 3];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if line == 1 && trimmed.eq_ignore_ascii_case("kind,x,y,value") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, got {}", fields.len())));
        }
        let value = parse_float(fields[3], line, "value")?;
        match fields[0].trim() {
            "E" => {
                let x = parse_index(fields[1], line, "x")?;
                let y = parse_index(fields[2], line, "y")?;
                if e[x][y].replace(value).is_some() {
                    return Err(parse_err(line, format!("duplicate E ({}, {})", x + 1, y + 1)));
                }
            }
            "MA" => {
                let x = parse_index(fields[1], line, "x")?;
                if m_a[x].replace(value).is_some() {
                    return Err(parse_err(line, format!("duplicate MA {}", x + 1)));
                }
            }
            "MB" => {
                let y = parse_index(fields[2], line, "y")?;
                if m_b[y].replace(value).is_some() {
                    return Err(parse_err(line, format!("duplicate MB {}", y + 1)));
                }
            }
            other => {
                return Err(parse_err(line, format!("unknown kind '{other}' (E, MA or MB)")))
            }
        }
    }
    let mut e_full = [[0.0; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            e_full[x][y] = e[x][y].ok_or_else(|| {
                Error::Config(format!("missing correlator E ({}, {})", x + 1, y + 1))
            })?;
        }
    }
    let n_marginals =
        m_a.iter().filter(|m| m.is_some()).count() + m_b.iter().filter(|m| m.is_some()).count();
    match n_marginals {
        0 => Ok((CorrelatorTable::from_correlators(e_full)?, false)),
        6 => {
            let m_a = m_a.map(|m| m.unwrap());
            let m_b = m_b.map(|m| m.unwrap());
            Ok((CorrelatorTable::new(e_full, m_a, m_b)?, true))
        }
        n => Err(Error::Config(format!(
            "partial marginals: got {n} of 6 (provide all MA/MB rows or none)"
        ))),
    }
}

/// Parses per-pair outcome counts:
///
/// ```csv
/// x,y,n_pp,n_pm,n_mp,n_mm
/// 1,1,480,12,9,499
/// ```
///
/// All 9 setting pairs are required, each with a positive total.
pub fn parse_counts_csv(text: &str) -> Result<CountTable> {
    let mut counts = [[None::<[u64; 4]>; 3]; 3];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if line == 1 && trimmed.eq_ignore_ascii_case("x,y,n_pp,n_pm,n_mp,n_mm") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(line, format!("expected 6 fields, got {}", fields.len())));
        }
        let x = parse_index(fields[0], line, "x")?;
        let y = parse_index(fields[1], line, "y")?;
        let mut c = [0u64; 4];
        for (k, field) in fields[2..].iter().enumerate() {
            c[k] = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("count '{field}' is not a nonnegative integer")))?;
        }
        if c.iter().sum::<u64>() == 0 {
            return Err(parse_err(line, format!("pair ({}, {}) has zero total", x + 1, y + 1)));
        }
        if counts[x][y].replace(c).is_some() {
            return Err(parse_err(line, format!("duplicate pair ({}, {})", x + 1, y + 1)));
        }
    }
    let mut full = [[[0u64; 4]; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            full[x][y] = counts[x][y].ok_or_else(|| {
                Error::Config(format!("missing counts for pair ({}, {})", x + 1, y + 1))
            })?;
        }
    }
    Ok(CountTable { counts: full })
}

/// Row-major nested arrays with each entry as `[re, im]`.
pub fn mat4_to_json(m: &Mat4) -> Value {
    Value::Array(
        m.0.iter()
            .map(|row| Value::Array(row.iter().map(|c| json!([c.re, c.im])).collect()))
            .collect(),
    )
}

pub fn state_to_json(state: &TwoQubitState) -> Value {
    json!({
        "rho": mat4_to_json(state.matrix()),
        "spectrum": state.spectrum(),
    })
}

fn complex_from_json(v: &Value) -> Result<C64> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Config("matrix entry is not a [re, im] pair".into()))?;
    let re = pair[0]
        .as_f64()
        .ok_or_else(|| Error::Config("matrix entry real part is not a number".into()))?;
    let im = pair[1]
        .as_f64()
        .ok_or_else(|| Error::Config("matrix entry imaginary part is not a number".into()))?;
    Ok(C64::new(re, im))
}

pub fn mat4_from_json(v: &Value) -> Result<Mat4> {
    let rows = v
        .as_array()
        .filter(|a| a.len() == 4)
        .ok_or_else(|| Error::Config("matrix is not a 4-row array".into()))?;
    let mut m = Mat4::zeros();
    for (i, row) in rows.iter().enumerate() {
        let cols = row
            .as_array()
            .filter(|a| a.len() == 4)
            .ok_or_else(|| Error::Config(format!("matrix row {i} is not a 4-entry array")))?;
        for (j, entry) in cols.iter().enumerate() {
            m.0[i][j] = complex_from_json(entry)?;
        }
    }
    Ok(m)
}

/// Parses `{"rho": [[[re,im]; 4]; 4]}` and validates the state.
pub fn parse_state_json(text: &str) -> Result<TwoQubitState> {
    let v: Value = serde_json::from_str(text)?;
    let rho = v
        .get("rho")
        .ok_or_else(|| Error::Config("state JSON lacks a 'rho' field".into()))?;
    TwoQubitState::new(mat4_from_json(rho)?)
}

pub fn table_to_json(table: &CorrelatorTable) -> Value {
    json!({ "e": table.e, "m_a": table.m_a, "m_b": table.m_b })
}

pub fn scan_to_json(scan: &ChshScan) -> Value {
    json!({
        "values": scan
            .values
            .iter()
            .map(|(t, s)| json!({"x": t.x, "xp": t.xp, "y": t.y, "yp": t.yp, "s": s}))
            .collect::<Vec<_>>(),
        "s_max": scan.s_max,
        "s_max_tuple": scan.s_max_tuple,
        "c_max": scan.c_max,
        "c_max_pairing": scan.c_max_pairing,
        "tsirelson_exceeded": scan.tsirelson_exceeded,
    })
}

/// Writes via a sibling temp file and rename, so a failed run leaves no
/// partial output behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("invalid output path {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp.{}", std::process::id()));
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => std::path::PathBuf::from(&tmp_name),
    };
    if let Err(err) = fs::write(&tmp, contents) {
        let _ = fs::remove_file(&tmp);
        return Err(err.into());
    }
    if let Err(err) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(err.into());
    }
    Ok(())
}
