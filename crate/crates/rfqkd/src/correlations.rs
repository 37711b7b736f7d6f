//! Correlators, marginals and outcome probabilities for a state measured
//! along two triads; finite-count sampling; linear-inversion tomography.
//!
//! Outcomes are encoded as +/-1 throughout, so `E_xy = <ab>` literally.
//!
//! # Example
//!
//! ```
//! use rfqkd::correlations::correlators_from_state;
//! use rfqkd::qmath::{werner_state, MeasurementTriad};
//!
//! let rho = werner_state(0.95)?;
//! let triad = MeasurementTriad::canonical();
//! let table = correlators_from_state(&rho, &triad, &triad);
//! // for a Werner state, E_xy = -V * (a_x . b_y); aligned triads give a
//! // diagonal table
//! assert!((table.e[0][0] + 0.95).abs() < 1e-12);
//! assert!(table.e[0][1].abs() < 1e-12);
//! # Ok::<(), rfqkd::Error>(())
//! ```

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{
    identity2, pauli_dot, psd_project, Mat4, MeasurementTriad, TwoQubitState,
};

/// The nine correlators plus the six marginal expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTable {
    /// `e[x][y]` with settings indexed 0..3.
    pub e: [[f64; 3]; 3],
    pub m_a: [f64; 3],
    pub m_b: [f64; 3],
}

impl CorrelatorTable {
    pub fn new(e: [[f64; 3]; 3], m_a: [f64; 3], m_b: [f64; 3]) -> Result<Self> {
        let t = Self { e, m_a, m_b };
        t.validate()?;
        Ok(t)
    }

    /// Correlators only, zero marginals.
    pub fn from_correlators(e: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(e, [0.0; 3], [0.0; 3])
    }

    /// Validation-free constructor for hot loops where the table is valid
    /// by construction (e.g. `E = -V a.b` with unit vectors).
    pub(crate) fn from_trusted(e: [[f64; 3]; 3]) -> Self {
        Self { e, m_a: [0.0; 3], m_b: [0.0; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        for x in 0..3 {
            if self.m_a[x].abs() > 1.0 + 1e-9 {
                return Err(Error::Invariant(format!("|mA_{}| > 1", x + 1)));
            }
            if self.m_b[x].abs() > 1.0 + 1e-9 {
                return Err(Error::Invariant(format!("|mB_{}| > 1", x + 1)));
            }
        }
        for x in 0..3 {
            for y in 0..3 {
                if self.e[x][y].abs() > 1.0 + 1e-9 {
                    return Err(Error::Invariant(format!("|E_{}{}| > 1", x + 1, y + 1)));
                }
                for a in [1.0, -1.0] {
                    for b in [1.0, -1.0] {
                        let p = (1.0 + a * self.m_a[x] + b * self.m_b[y] + a * b * self.e[x][y]) / 4.0;
                        // empirical tables carry statistical noise, so only
                        // clearly unphysical probabilities are rejected here;
                        // the sampling path re-checks strictly
                        if p < -0.05 {
                            return Err(Error::Invariant(format!(
                                "implied P({a},{b}|{},{}) = {p:.3e} is negative",
                                x + 1,
                                y + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn max_abs_correlator(&self) -> f64 {
        let mut m: f64 = 0.0;
        for row in &self.e {
            for &v in row {
                m = m.max(v.abs());
            }
        }
        m
    }
}

/// Raw coincidence counts per setting pair, ordered (++, +-, -+, --).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub counts: [[[u64; 4]; 3]; 3],
}

impl CountTable {
    pub fn total(&self, x: usize, y: usize) -> u64 {
        self.counts[x][y].iter().sum()
    }
}

/// `E_xy = Tr[rho (a_x.sigma (x) b_y.sigma)]` plus the marginal expectations.
pub fn correlators_from_state(
    rho: &TwoQubitState,
    triad_a: &MeasurementTriad,
    triad_b: &MeasurementTriad,
) -> CorrelatorTable {
    let mut e = [[0.0; 3]; 3];
    let mut m_a = [0.0; 3];
    let mut m_b = [0.0; 3];
    let id = identity2();
    for x in 0..3 {
        let pa = pauli_dot(triad_a.vector(x));
        m_a[x] = Mat4::kron2(&pa, &id).mul(rho.matrix()).trace().re;
        for y in 0..3 {
            let pb = pauli_dot(triad_b.vector(y));
            e[x][y] = Mat4::kron2(&pa, &pb).mul(rho.matrix()).trace().re;
        }
    }
    for y in 0..3 {
        let pb = pauli_dot(triad_b.vector(y));
        m_b[y] = Mat4::kron2(&id, &pb).mul(rho.matrix()).trace().re;
    }
    // physical states give |E| <= 1 up to rounding; clamp the dust
    for x in 0..3 {
        for y in 0..3 {
            e[x][y] = e[x][y].clamp(-1.0, 1.0);
        }
        m_a[x] = m_a[x].clamp(-1.0, 1.0);
        m_b[x] = m_b[x].clamp(-1.0, 1.0);
    }
    CorrelatorTable { e, m_a, m_b }
}

/// `P(a,b|x,y) = (1 + a mA_x + b mB_y + ab E_xy)/4`, ordered (++, +-, -+, --).
pub fn joint_probabilities(table: &CorrelatorTable, x: usize, y: usize) -> Result<[f64; 4]> {
    let mut p = [0.0; 4];
    for (k, (a, b)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .enumerate()
    {
        let v = (1.0 + a * table.m_a[x] + b * table.m_b[y] + a * b * table.e[x][y]) / 4.0;
        if v < -1e-9 {
            return Err(Error::Invariant(format!(
                "inconsistent table: P = {v:.3e} for pair ({}, {})",
                x + 1,
                y + 1
            )));
        }
        p[k] = v.max(0.0);
    }
    Ok(p)
}

/// Draws `n_per_pair` outcomes for every setting pair. Multinomial sampling
/// is done by chained binomials so large `n` costs O(1) per pair.
pub fn sample_counts<R: Rng + ?Sized>(
    table: &CorrelatorTable,
    n_per_pair: u64,
    rng: &mut R,
) -> Result<CountTable> {
    if n_per_pair == 0 {
        return Err(Error::Config("n_per_pair must be >= 1".into()));
    }
    let mut counts = [[[0u64; 4]; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            let p = joint_probabilities(table, x, y)?;
            counts[x][y] = multinomial4(n_per_pair, &p, rng);
        }
    }
    Ok(CountTable { counts })
}

/// Draws `n` outcomes for a single setting pair (0-based indices); counts
/// ordered (++, +-, -+, --).
pub fn sample_pair_counts<R: Rng + ?Sized>(
    table: &CorrelatorTable,
    x: usize,
    y: usize,
    n: u64,
    rng: &mut R,
) -> Result<[u64; 4]> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let p = joint_probabilities(table, x, y)?;
    Ok(multinomial4(n, &p, rng))
}

fn multinomial4<R: Rng + ?Sized>(n: u64, p: &[f64; 4], rng: &mut R) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut remaining = n;
    let mut rest = 1.0;
    for k in 0..3 {
        if remaining == 0 {
            break;
        }
        let q = (p[k] / rest).clamp(0.0, 1.0);
        let c = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        out[k] = c;
        remaining -= c;
        rest -= p[k];
        if rest <= 0.0 {
            rest = 0.0;
        }
    }
    out[3] = remaining;
    out
}

/// Empirical correlators and marginals from counts; marginals pool the three
/// blocks sharing a setting.
pub fn estimate_correlators(counts: &CountTable) -> Result<CorrelatorTable> {
    let mut e = [[0.0; 3]; 3];
    for x in 0..3 {
        for y in 0..3 {
            let c = &counts.counts[x][y];
            let n: u64 = c.iter().sum();
            if n == 0 {
                return Err(Error::Invariant(format!(
                    "no counts for setting pair ({}, {})",
                    x + 1,
                    y + 1
                )));
            }
            e[x][y] = (c[0] as f64 + c[3] as f64 - c[1] as f64 - c[2] as f64) / n as f64;
        }
    }
    let mut m_a = [0.0; 3];
    let mut m_b = [0.0; 3];
    for x in 0..3 {
        let mut plus = 0i64;
        let mut total = 0i64;
        for y in 0..3 {
            let c = &counts.counts[x][y];
            plus += (c[0] + c[1]) as i64 - (c[2] + c[3]) as i64;
            total += c.iter().sum::<u64>() as i64;
        }
        m_a[x] = plus as f64 / total as f64;
    }
    for y in 0..3 {
        let mut plus = 0i64;
        let mut total = 0i64;
        for x in 0..3 {
            let c = &counts.counts[x][y];
            plus += (c[0] + c[2]) as i64 - (c[1] + c[3]) as i64;
            total += c.iter().sum::<u64>() as i64;
        }
        m_b[y] = plus as f64 / total as f64;
    }
    Ok(CorrelatorTable { e, m_a, m_b })
}

/// Linear-inversion tomography in the canonical frame (both triads mapped to
/// X, Y, Z), followed by a PSD projection.
pub fn tomography_linear(table: &CorrelatorTable) -> Result<TwoQubitState> {
    table.validate()?;
    let canonical = MeasurementTriad::canonical();
    let id = identity2();
    let mut rho = Mat4::identity().scale(0.25);
    for x in 0..3 {
        let sx = pauli_dot(canonical.vector(x));
        rho = rho.add(&Mat4::kron2(&sx, &id).scale(table.m_a[x] / 4.0));
        rho = rho.add(&Mat4::kron2(&id, &sx).scale(table.m_b[x] / 4.0));
        for y in 0..3 {
            let sy = pauli_dot(canonical.vector(y));
            rho = rho.add(&Mat4::kron2(&sx, &sy).scale(table.e[x][y] / 4.0));
        }
    }
    psd_project(&rho)
}

/// Brute-force correlator evaluation from +/-1-outcome projectors; test
/// oracle for [`correlators_from_state`].
pub fn correlators_projector_oracle(
    rho: &TwoQubitState,
    triad_a: &MeasurementTriad,
    triad_b: &MeasurementTriad,
) -> CorrelatorTable {
    use crate::qmath::projector;
    let mut e = [[0.0; 3]; 3];
    let mut m_a = [0.0; 3];
    let mut m_b = [0.0; 3];
    let id = identity2();
    for x in 0..3 {
        for a in [1i8, -1i8] {
            let pa = projector(triad_a.vector(x), a);
            m_a[x] += a as f64 * Mat4::kron2(&pa, &id).mul(rho.matrix()).trace().re;
            for y in 0..3 {
                for b in [1i8, -1i8] {
                    let pb = projector(triad_b.vector(y), b);
                    let w = Mat4::kron2(&pa, &pb).mul(rho.matrix()).trace().re;
                    e[x][y] += (a * b) as f64 * w;
                }
            }
        }
    }
    for y in 0..3 {
        for b in [1i8, -1i8] {
            let pb = projector(triad_b.vector(y), b);
            m_b[y] += b as f64 * Mat4::kron2(&id, &pb).mul(rho.matrix()).trace().re;
        }
    }
    CorrelatorTable { e, m_a, m_b }
}
