//! The four asymptotic secret-key-rate bounds: two device-independent (from
//! a CHSH violation), the 6-state device-dependent bound, its BB84 variant,
//! and the Devetak-Winter bound evaluated on a reconstructed state.
//!
//! Raw-key error terms use `h[(1-E)/2]`; since `h(p) = h(1-p)` this equals
//! `h[(1-|E|)/2]`, so anticorrelated raw data (as for a singlet) is credited
//! as if one party flipped their bits.
//!
//! # Example
//!
//! ```
//! use rfqkd::keyrates::full_report;
//! use rfqkd::qmath::{werner_state, MeasurementTriad};
//!
//! let rho = werner_state(0.95)?;
//! let triad = MeasurementTriad::canonical();
//! let report = full_report(&rho, &triad, &triad)?;
//! // aligned triads give no CHSH violation, so the device-independent
//! // bounds return the sentinel -1...
//! assert_eq!(report.r_di1, -1.0);
//! // ...while they are ideal for the device-dependent bounds
//! assert!((report.r_dd_6state - 0.7098).abs() < 1e-3);
//! assert!(report.r_dd >= report.r_dd_6state - 1e-9);
//! # Ok::<(), rfqkd::Error>(())
//! ```

use serde::{Deserialize, Serialize};

use crate::bellscan::{chsh_value, TSIRELSON};
use crate::correlations::{correlators_from_state, CorrelatorTable};
use crate::error::{Error, Result};
use crate::qmath::{
    binary_entropy_clamped, hermitian_eig, identity2, projector, psd_sqrt, shannon_entropy,
    spectrum_entropy, BlochVector, Mat4, MeasurementTriad, TwoQubitState,
};

/// DI rates take this value when no CHSH parameter exceeds 2.
pub const SENTINEL: f64 = -1.0;

/// Settings defining a DI rate: the CHSH tuple plus the raw-key pair.
/// All fields 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiChoice {
    pub x: u8,
    pub xp: u8,
    pub y: u8,
    pub yp: u8,
    pub x_raw: u8,
    pub y_raw: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bb84Choice {
    pub x: u8,
    pub y: u8,
    pub xp: u8,
    pub yp: u8,
}

/// The four bounds (plus the BB84 footnote variant) with their optimizing
/// setting choices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub r_di1: f64,
    pub r_di1_choice: Option<DiChoice>,
    pub r_di2: f64,
    pub r_di2_choice: Option<DiChoice>,
    pub r_dd_6state: f64,
    /// Bob setting paired with each Alice setting, 1-based.
    pub r_dd_6state_permutation: [u8; 3],
    pub r_dd_6state_signature: i8,
    pub r_dd_bb84: f64,
    pub r_dd_bb84_choice: Bb84Choice,
    pub r_dd: f64,
    /// Raw-key settings (x_raw, y_raw), 1-based.
    pub r_dd_choice: (u8, u8),
}

/// Eve's Holevo information for one measurement, with its pieces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolevoBreakdown {
    /// `S(rho_E) = S(rho_AB)` for a purifying eavesdropper.
    pub s_rho_e: f64,
    /// Per outcome: (outcome sign, probability, conditional entropy).
    pub conditional_entropies: Vec<(i8, f64, f64)>,
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

fn check_di_args(s: f64, e_raw: f64) -> Result<()> {
    if s <= 2.0 {
        return Err(Error::Domain(format!("CHSH value {s} does not violate the local bound")));
    }
    if s > TSIRELSON + 1e-9 {
        return Err(Error::Domain(format!("CHSH value {s} exceeds the Tsirelson bound")));
    }
    if e_raw.abs() > 1.0 + 1e-9 {
        return Err(Error::Domain(format!("|E_raw| = {} > 1", e_raw.abs())));
    }
    Ok(())
}

/// Collective-attack DI rate for a single CHSH value and raw correlator:
/// `1 - h[(1-E)/2] - h[(1+sqrt((S/2)^2-1))/2]`.
pub fn rate_di1_single(s: f64, e_raw: f64) -> Result<f64> {
    check_di_args(s, e_raw)?;
    let half = s / 2.0;
    let root = (half * half - 1.0).max(0.0).sqrt();
    Ok(1.0 - binary_entropy_clamped((1.0 - e_raw) / 2.0)
        - binary_entropy_clamped((1.0 + root) / 2.0))
}

/// Memoryless-device DI rate:
/// `-h[(1-E)/2] - log2[(1 + sqrt(2-(S/2)^2))/2]`.
pub fn rate_di2_single(s: f64, e_raw: f64) -> Result<f64> {
    check_di_args(s, e_raw)?;
    let half = s / 2.0;
    let root = (2.0 - half * half).max(0.0).sqrt();
    Ok(-binary_entropy_clamped((1.0 - e_raw) / 2.0) - ((1.0 + root) / 2.0).log2())
}

#[derive(Clone, Copy)]
enum DiKind {
    Di1,
    Di2,
}

/// Shared search over the 36 CHSH tuples and the raw pairs allowed by the
/// constraint `x_raw in {x,x'} or y_raw in {y,y'}`. Ties break to the
/// lexicographically smallest (x, x', y, y', x_raw, y_raw).
fn di_search(table: &CorrelatorTable, kind: DiKind) -> (f64, Option<DiChoice>) {
    let e = &table.e;
    let mut h_raw = [[0.0; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            h_raw[x][y] = binary_entropy_clamped((1.0 - e[x][y].abs()) / 2.0);
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut choice = None;
    for x in 0..3 {
        for xp in 0..3 {
            if xp == x {
                continue;
            }
            for y in 0..3 {
                for yp in 0..3 {
                    if yp == y {
                        continue;
                    }
                    let s = chsh_value(e, x, xp, y, yp);
                    if s <= 2.0 {
                        continue;
                    }
                    // noisy tables may poke past Tsirelson; clamp for the bound
                    let half = s.min(TSIRELSON) / 2.0;
                    let eve = match kind {
                        DiKind::Di1 => {
                            let root = (half * half - 1.0).max(0.0).sqrt();
                            binary_entropy_clamped((1.0 + root) / 2.0)
                        }
                        DiKind::Di2 => {
                            let root = (2.0 - half * half).max(0.0).sqrt();
                            ((1.0 + root) / 2.0).log2()
                        }
                    };
                    for xr in 0..3 {
                        for yr in 0..3 {
                            if !(xr == x || xr == xp || yr == y || yr == yp) {
                                continue;
                            }
                            let value = match kind {
                                DiKind::Di1 => 1.0 - h_raw[xr][yr] - eve,
                                DiKind::Di2 => -h_raw[xr][yr] - eve,
                            };
                            if value > best {
                                best = value;
                                choice = Some(DiChoice {
                                    x: x as u8 + 1,
                                    xp: xp as u8 + 1,
                                    y: y as u8 + 1,
                                    yp: yp as u8 + 1,
                                    x_raw: xr as u8 + 1,
                                    y_raw: yr as u8 + 1,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    match choice {
        Some(c) => (best, Some(c)),
        None => (SENTINEL, None),
    }
}

/// Optimized collective-attack DI bound; sentinel -1 when no violation.
pub fn rate_di1(table: &CorrelatorTable) -> (f64, Option<DiChoice>) {
    di_search(table, DiKind::Di1)
}

/// Optimized memoryless-device DI bound; sentinel -1 when no violation.
pub fn rate_di2(table: &CorrelatorTable) -> (f64, Option<DiChoice>) {
    di_search(table, DiKind::Di2)
}

// lexicographic order, with the signature of each permutation
const PERMS: [([usize; 3], i8); 6] = [
    ([0, 1, 2], 1),
    ([0, 2, 1], -1),
    ([1, 0, 2], -1),
    ([1, 2, 0], 1),
    ([2, 0, 1], 1),
    ([2, 1, 0], -1),
];

/// 6-state bound optimized over the pairing of Bob's settings with Alice's,
/// weighting the correlator sums by the permutation signature.
pub fn rate_dd_6state(table: &CorrelatorTable) -> (f64, [u8; 3], i8) {
    let e = &table.e;
    let mut best = f64::NEG_INFINITY;
    let mut best_perm = [1u8, 2, 3];
    let mut best_sig = 1i8;
    for (perm, sig) in PERMS {
        let s = sig as f64;
        let e1 = e[0][perm[0]];
        let e2 = e[1][perm[1]];
        let e3 = e[2][perm[2]];
        // guaranteed nonnegative only for physical tables; clamp before H
        let p = [
            ((1.0 + s * (e1 + e2 - e3)) / 4.0).clamp(0.0, 1.0),
            ((1.0 + s * (e1 - e2 + e3)) / 4.0).clamp(0.0, 1.0),
            ((1.0 + s * (-e1 + e2 + e3)) / 4.0).clamp(0.0, 1.0),
            ((1.0 - s * (e1 + e2 + e3)) / 4.0).clamp(0.0, 1.0),
        ];
        let h: f64 = p.iter().map(|&q| if q > 0.0 { -q * q.log2() } else { 0.0 }).sum();
        let value = 1.0 - h;
        if value > best {
            best = value;
            best_perm = [perm[0] as u8 + 1, perm[1] as u8 + 1, perm[2] as u8 + 1];
            best_sig = sig;
        }
    }
    (best, best_perm, best_sig)
}

/// BB84-style bound using two setting pairs:
/// `max 1 - h[(1-E_xy)/2] - h[(1-E_x'y')/2]` over x != x', y != y'.
pub fn rate_dd_bb84(table: &CorrelatorTable) -> (f64, Bb84Choice) {
    let mut h_raw = [[0.0; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            h_raw[x][y] = binary_entropy_clamped((1.0 - table.e[x][y].abs()) / 2.0);
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_choice = Bb84Choice { x: 1, y: 1, xp: 2, yp: 2 };
    for x in 0..3 {
        for y in 0..3 {
            for xp in 0..3 {
                if xp == x {
                    continue;
                }
                for yp in 0..3 {
                    if yp == y {
                        continue;
                    }
                    let value = 1.0 - h_raw[x][y] - h_raw[xp][yp];
                    if value > best {
                        best = value;
                        best_choice = Bb84Choice {
                            x: x as u8 + 1,
                            y: y as u8 + 1,
                            xp: xp as u8 + 1,
                            yp: yp as u8 + 1,
                        };
                    }
                }
            }
        }
    }
    (best, best_choice)
}

/// Closed-form Holevo information for a Werner state of visibility `v`,
/// identical for every measurement direction:
/// `H[{(1+3V)/4, (1-V)/4 x3}] - h[(1-V)/2]`.
pub fn holevo_werner(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("visibility {v} outside [0,1]")));
    }
    let p = [(1.0 + 3.0 * v) / 4.0, (1.0 - v) / 4.0, (1.0 - v) / 4.0, (1.0 - v) / 4.0];
    Ok(shannon_entropy(&p)? - binary_entropy_clamped((1.0 - v) / 2.0))
}

/// Eve's Holevo information for a projective measurement along `direction`
/// on the given party, against a purifying eavesdropper.
///
/// Uses `S(rho_E) = S(rho_AB)` and the fact that the nonzero spectrum of
/// Eve's conditional state equals that of
/// `M_a = sqrt(rho) (Pi_a (x) I) sqrt(rho)` (or `I (x) Pi_a` for Bob),
/// normalized by `p(a) = Tr M_a`; no purification is materialized.
pub fn holevo_general(
    rho: &TwoQubitState,
    direction: &BlochVector,
    party: Party,
) -> Result<HolevoBreakdown> {
    direction.check_unit()?;
    let s_rho_e = spectrum_entropy(&rho.spectrum());
    let root = psd_sqrt(rho.matrix());
    let id = identity2();
    let mut conditional = Vec::with_capacity(2);
    let mut weighted = 0.0;
    for outcome in [1i8, -1i8] {
        let pi2 = projector(direction, outcome);
        let pi4 = match party {
            Party::Alice => Mat4::kron2(&pi2, &id),
            Party::Bob => Mat4::kron2(&id, &pi2),
        };
        let m = root.mul(&pi4).mul(&root);
        let p = m.trace().re;
        if p < 1e-12 {
            conditional.push((outcome, 0.0, 0.0));
            continue;
        }
        let (evals, _) = hermitian_eig(&m.scale(1.0 / p));
        let s = spectrum_entropy(&evals);
        weighted += p * s;
        conditional.push((outcome, p, s));
    }
    Ok(HolevoBreakdown {
        s_rho_e,
        conditional_entropies: conditional,
        chi: s_rho_e - weighted,
    })
}

/// Devetak-Winter bound evaluated on a state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateDdOutcome {
    pub value: f64,
    /// Raw-key settings (x_raw, y_raw), 1-based.
    pub choice: (u8, u8),
    /// False when the supplied table disagreed with the state beyond 1e-6;
    /// the rate is then computed from the state-derived table.
    pub table_consistent: bool,
}

/// `max over (x_raw, y_raw) of 1 - h[(1-E)/2] - min[chi(A:E), chi(B:E)]`.
///
/// The supplied table is checked against the state; on disagreement beyond
/// 1e-6 the state-derived correlators are used instead.
pub fn rate_dd(
    rho: &TwoQubitState,
    table: &CorrelatorTable,
    triad_a: &MeasurementTriad,
    triad_b: &MeasurementTriad,
) -> Result<RateDdOutcome> {
    let derived = correlators_from_state(rho, triad_a, triad_b);
    let mut dev: f64 = 0.0;
    for x in 0..3 {
        for y in 0..3 {
            dev = dev.max((derived.e[x][y] - table.e[x][y]).abs());
        }
        dev = dev.max((derived.m_a[x] - table.m_a[x]).abs());
        dev = dev.max((derived.m_b[x] - table.m_b[x]).abs());
    }
    let consistent = dev <= 1e-6;
    let effective = if consistent { table } else { &derived };

    let mut chi_a = [0.0; 3];
    let mut chi_b = [0.0; 3];
    for x in 0..3 {
        chi_a[x] = holevo_general(rho, triad_a.vector(x), Party::Alice)?.chi;
        chi_b[x] = holevo_general(rho, triad_b.vector(x), Party::Bob)?.chi;
    }
    let mut best = f64::NEG_INFINITY;
    let mut best_choice = (1u8, 1u8);
    for xr in 0..3 {
        for yr in 0..3 {
            let mutual = 1.0 - binary_entropy_clamped((1.0 - effective.e[xr][yr].abs()) / 2.0);
            let value = mutual - chi_a[xr].min(chi_b[yr]);
            if value > best {
                best = value;
                best_choice = (xr as u8 + 1, yr as u8 + 1);
            }
        }
    }
    Ok(RateDdOutcome {
        value: best,
        choice: best_choice,
        table_consistent: consistent,
    })
}

/// Devetak-Winter bound using the Werner closed-form Holevo term; the fast
/// path for Monte Carlo loops where the state is a Werner state by
/// construction.
pub fn rate_dd_werner(table: &CorrelatorTable, v: f64) -> Result<(f64, (u8, u8))> {
    let chi = holevo_werner(v)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_choice = (1u8, 1u8);
    for xr in 0..3 {
        for yr in 0..3 {
            let value = 1.0 - binary_entropy_clamped((1.0 - table.e[xr][yr].abs()) / 2.0) - chi;
            if value > best {
                best = value;
                best_choice = (xr as u8 + 1, yr as u8 + 1);
            }
        }
    }
    Ok((best, best_choice))
}

/// Evaluates all five bounds for one (state, triads) configuration.
pub fn full_report(
    rho: &TwoQubitState,
    triad_a: &MeasurementTriad,
    triad_b: &MeasurementTriad,
) -> Result<KeyRateReport> {
    let table = correlators_from_state(rho, triad_a, triad_b);
    report_from_table(&table, rho, triad_a, triad_b)
}

/// Like [`full_report`] but with the table supplied by the caller (e.g. an
/// estimated table, with the state from tomography).
pub fn report_from_table(
    table: &CorrelatorTable,
    rho: &TwoQubitState,
    triad_a: &MeasurementTriad,
    triad_b: &MeasurementTriad,
) -> Result<KeyRateReport> {
    let (r_di1, r_di1_choice) = rate_di1(table);
    let (r_di2, r_di2_choice) = rate_di2(table);
    let (r_dd_6state, perm, sig) = rate_dd_6state(table);
    let (r_dd_bb84, bb84_choice) = rate_dd_bb84(table);
    let dd = rate_dd(rho, table, triad_a, triad_b)?;
    Ok(KeyRateReport {
        r_di1,
        r_di1_choice,
        r_di2,
        r_di2_choice,
        r_dd_6state,
        r_dd_6state_permutation: perm,
        r_dd_6state_signature: sig,
        r_dd_bb84,
        r_dd_bb84_choice: bb84_choice,
        r_dd: dd.value,
        r_dd_choice: dd.choice,
    })
}
