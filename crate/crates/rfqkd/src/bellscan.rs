//! CHSH parameters over all setting choices, plus the two figures of merit
//! `S_max` and `C_max`.
//!
//! # Example
//!
//! ```
//! use rfqkd::bellscan::{chsh_scan, TSIRELSON};
//! use rfqkd::correlations::correlators_from_state;
//! use rfqkd::qmath::{werner_state, MeasurementTriad};
//! use rfqkd::sampling::{random_triad, sample_rng};
//!
//! let rho = werner_state(1.0)?;
//! let triad = MeasurementTriad::canonical();
//! let scan = chsh_scan(&correlators_from_state(&rho, &triad, &triad));
//! // measuring along the same axes never violates CHSH...
//! assert!((scan.s_max - 2.0).abs() < 1e-9);
//! assert!((scan.c_max - 3.0).abs() < 1e-9);
//!
//! // ...but a typical pair of random triads does
//! let mut rng = sample_rng(42, 0);
//! let (a, b) = (random_triad(&mut rng), random_triad(&mut rng));
//! let scan = chsh_scan(&correlators_from_state(&rho, &a, &b));
//! assert!(scan.s_max > 2.0 && scan.s_max <= TSIRELSON + 1e-9);
//! # Ok::<(), rfqkd::Error>(())
//! ```

use serde::{Deserialize, Serialize};

use crate::correlations::CorrelatorTable;

pub const TSIRELSON: f64 = 2.0 * std::f64::consts::SQRT_2;

/// One of the 36 ordered CHSH index tuples, settings 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshTuple {
    pub x: u8,
    pub xp: u8,
    pub y: u8,
    pub yp: u8,
}

/// All 36 CHSH values for a table, with the maxima and the best
/// three-correlator pairing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChshScan {
    pub values: Vec<(ChshTuple, f64)>,
    pub s_max: f64,
    pub s_max_tuple: ChshTuple,
    pub c_max: f64,
    /// `c_max_pairing[x]` is the Bob setting matched with Alice setting x+1
    /// (entries 1-based).
    pub c_max_pairing: [u8; 3],
    /// Set when `s_max` exceeds the Tsirelson bound beyond 1e-6; statistical
    /// noise in ingested tables can do this, so it is a diagnostic, not an
    /// error.
    pub tsirelson_exceeded: bool,
}

/// `S_xx'yy' = |E_xy + E_xy' + E_x'y - E_x'y'|` for one index tuple
/// (arguments 0-based).
#[inline]
pub fn chsh_value(e: &[[f64; 3]; 3], x: usize, xp: usize, y: usize, yp: usize) -> f64 {
    (e[x][y] + e[x][yp] + e[xp][y] - e[xp][yp]).abs()
}

/// Computes all 36 CHSH parameters, `S_max` and `C_max`. Ties are broken by
/// the lexicographically smallest index tuple.
pub fn chsh_scan(table: &CorrelatorTable) -> ChshScan {
    let e = &table.e;
    let mut values = Vec::with_capacity(36);
    let mut s_max = f64::NEG_INFINITY;
    let mut s_max_tuple = ChshTuple { x: 1, xp: 2, y: 1, yp: 2 };
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
                    let tuple = ChshTuple {
                        x: x as u8 + 1,
                        xp: xp as u8 + 1,
                        y: y as u8 + 1,
                        yp: yp as u8 + 1,
                    };
                    if s > s_max {
                        s_max = s;
                        s_max_tuple = tuple;
                    }
                    values.push((tuple, s));
                }
            }
        }
    }
    let (c_max, c_max_pairing) = c_max(table);
    ChshScan {
        values,
        s_max,
        s_max_tuple,
        c_max,
        c_max_pairing,
        tsirelson_exceeded: s_max > TSIRELSON + 1e-6,
    }
}

/// Largest sum of three absolute correlators over disjoint setting pairings;
/// returns the maximum and the Bob setting matched to each Alice setting
/// (1-based).
pub fn c_max(table: &CorrelatorTable) -> (f64, [u8; 3]) {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = f64::NEG_INFINITY;
    let mut best_perm = [1u8, 2, 3];
    for perm in PERMS {
        let sum: f64 = (0..3).map(|x| table.e[x][perm[x]].abs()).sum();
        if sum > best {
            best = sum;
            best_perm = [perm[0] as u8 + 1, perm[1] as u8 + 1, perm[2] as u8 + 1];
        }
    }
    (best, best_perm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::CorrelatorTable;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn diag_table(v: f64) -> CorrelatorTable {
        let mut e = [[0.0; 3]; 3];
        for i in 0..3 {
            e[i][i] = -v;
        }
        CorrelatorTable::from_correlators(e).unwrap()
    }

    #[test]
    fn aligned_singlet_reaches_exactly_local_bound() {
        let scan = chsh_scan(&diag_table(1.0));
        assert_eq!(scan.values.len(), 36);
        assert_abs_diff_eq!(scan.s_max, 2.0, epsilon = 1e-12);
        assert!(!scan.tsirelson_exceeded);
        let scan = chsh_scan(&diag_table(0.95));
        assert_abs_diff_eq!(scan.s_max, 1.9, epsilon = 1e-12);
    }

    #[test]
    fn planar_optimum_hits_tsirelson() {
        // shared z axis, in-plane relative angle 135 degrees on the singlet:
        // E11 = E22 = -cos(theta), E12 = -E21 = sin(theta)
        let theta = 135f64.to_radians();
        let mut e = [[0.0; 3]; 3];
        e[0][0] = -theta.cos();
        e[1][1] = -theta.cos();
        e[0][1] = theta.sin();
        e[1][0] = -theta.sin();
        e[2][2] = -1.0;
        let table = CorrelatorTable::from_correlators(e).unwrap();
        let scan = chsh_scan(&table);
        assert_abs_diff_eq!(scan.s_max, TSIRELSON, epsilon = 1e-9);
    }

    #[test]
    fn c_max_cases() {
        let (c, pairing) = c_max(&diag_table(1.0));
        assert_abs_diff_eq!(c, 3.0, epsilon = 1e-12);
        assert_eq!(pairing, [1, 2, 3]);
        let (c, _) = c_max(&diag_table(0.95));
        assert_abs_diff_eq!(c, 2.85, epsilon = 1e-12);
    }

    fn random_table<R: Rng>(rng: &mut R) -> CorrelatorTable {
        // small entries keep the implied joint distributions nonnegative
        let mut e = [[0.0; 3]; 3];
        for row in &mut e {
            for v in row {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        CorrelatorTable::from_correlators(e).unwrap()
    }

    #[test]
    fn c_max_matches_exhaustive_matching_oracle() {
        let mut rng = crate::sampling::sample_rng(31, 0);
        for _ in 0..200 {
            let table = random_table(&mut rng);
            let (c, pairing) = c_max(&table);
            // brute force over all bijections {1,2,3} -> {1,2,3}
            let mut best = f64::NEG_INFINITY;
            for p0 in 0..3usize {
                for p1 in 0..3usize {
                    if p1 == p0 {
                        continue;
                    }
                    let p2 = 3 - p0 - p1;
                    let sum = table.e[0][p0].abs() + table.e[1][p1].abs() + table.e[2][p2].abs();
                    best = best.max(sum);
                }
            }
            assert_abs_diff_eq!(c, best, epsilon = 1e-12);
            let check: f64 = (0..3)
                .map(|x| table.e[x][pairing[x] as usize - 1].abs())
                .sum();
            assert_abs_diff_eq!(check, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn relabeling_leaves_maxima_unchanged() {
        let mut rng = crate::sampling::sample_rng(32, 0);
        for _ in 0..100 {
            let table = random_table(&mut rng);
            let scan = chsh_scan(&table);
            // permute Alice's labels
            let mut e = [[0.0; 3]; 3];
            let perm = [2usize, 0, 1];
            for x in 0..3 {
                for y in 0..3 {
                    e[x][y] = table.e[perm[x]][y];
                }
            }
            let permuted = chsh_scan(&CorrelatorTable::from_correlators(e).unwrap());
            assert_abs_diff_eq!(scan.s_max, permuted.s_max, epsilon = 1e-12);
            assert_abs_diff_eq!(scan.c_max, permuted.c_max, epsilon = 1e-12);
        }
    }

    #[test]
    fn sign_flip_leaves_maxima_unchanged() {
        let mut rng = crate::sampling::sample_rng(33, 0);
        for _ in 0..100 {
            let table = random_table(&mut rng);
            let scan = chsh_scan(&table);
            for flipped_setting in 0..3 {
                let mut e = table.e;
                for y in 0..3 {
                    e[flipped_setting][y] = -e[flipped_setting][y];
                }
                let flipped = chsh_scan(&CorrelatorTable::from_correlators(e).unwrap());
                assert_abs_diff_eq!(scan.s_max, flipped.s_max, epsilon = 1e-12);
                assert_abs_diff_eq!(scan.c_max, flipped.c_max, epsilon = 1e-12);
            }
        }
    }
}
