//! Simulation toolkit for entanglement-based quantum key distribution
//! between parties that share no aligned measurement frame.
//!
//! Each party measures along a triad of orthogonal directions; the library
//! evaluates CHSH-type Bell parameters and asymptotic secret-key-rate bounds
//! (device-independent and device-dependent) directly from the 3x3 correlator
//! table, estimates how often random uncalibrated triads still yield a
//! positive rate, and models slow frame drift over time.
//!
//! ```
//! use rfqkd::keyrates::full_report;
//! use rfqkd::qmath::{werner_state, MeasurementTriad};
//!
//! // perfectly aligned triads on a slightly noisy singlet
//! let state = werner_state(0.95)?;
//! let triad = MeasurementTriad::canonical();
//! let report = full_report(&state, &triad, &triad)?;
//!
//! // aligned settings never violate CHSH, so the DI bounds hit the sentinel,
//! // while the device-dependent bound stays comfortably positive
//! assert_eq!(report.r_di1, -1.0);
//! assert!(report.r_dd_6state > 0.70);
//! # Ok::<(), rfqkd::Error>(())
//! ```

pub mod bellscan;
pub mod correlations;
pub mod driftlab;
pub mod error;
pub mod io;
pub mod keyrates;
pub mod montecarlo;
pub mod qmath;
pub mod sampling;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod test_util {
    use num_complex::Complex64;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::keyrates::Party;
    use crate::qmath::{
        hermitian_eig, identity2, projector, spectrum_entropy, BlochVector, Mat4, TwoQubitState,
        C64,
    };

    /// Random full-rank density matrix via `G G^dagger / tr`.
    pub fn random_state<R: Rng>(rng: &mut R) -> TwoQubitState {
        let mut g = Mat4::zeros();
        for row in &mut g.0 {
            for v in row.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *v = Complex64::new(re, im);
            }
        }
        let rho = g.mul(&g.adjoint());
        let tr = rho.trace().re;
        TwoQubitState::new(rho.scale(1.0 / tr)).expect("Gram construction is a valid state")
    }

    /// Holevo information computed through the explicit eigenbasis
    /// purification `|psi> = sum_i sqrt(l_i) |v_i>|i>_E`: Eve's conditional
    /// operator has entries `sigma_a[i][j] = sqrt(l_i l_j) <v_j|Pi_a|v_i>`.
    /// Independent oracle for the square-root-conjugation fast path.
    pub fn holevo_purification_oracle(
        rho: &TwoQubitState,
        direction: &BlochVector,
        party: Party,
    ) -> f64 {
        let (evals, vecs) = hermitian_eig(rho.matrix());
        let s_e = spectrum_entropy(&evals);
        let id = identity2();
        let mut weighted = 0.0;
        for outcome in [1i8, -1i8] {
            let pi2 = projector(direction, outcome);
            let pi4 = match party {
                Party::Alice => Mat4::kron2(&pi2, &id),
                Party::Bob => Mat4::kron2(&id, &pi2),
            };
            let mut sigma = Mat4::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    // <v_j| Pi |v_i> with eigenvectors as columns of `vecs`
                    let mut inner = C64::new(0.0, 0.0);
                    for k in 0..4 {
                        for l in 0..4 {
                            inner += vecs.0[k][j].conj() * pi4.0[k][l] * vecs.0[l][i];
                        }
                    }
                    let w = (evals[i].max(0.0) * evals[j].max(0.0)).sqrt();
                    sigma.0[i][j] = inner * w;
                }
            }
            let p = sigma.trace().re;
            if p < 1e-12 {
                continue;
            }
            let (cond, _) = hermitian_eig(&sigma.scale(1.0 / p));
            weighted += p * spectrum_entropy(&cond);
        }
        s_e - weighted
    }
}
