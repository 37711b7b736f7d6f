//! Seeded generation of Haar-uniform rotations and measurement triads, and a
//! time-correlated drifting channel model.
//!
//! # Example
//!
//! ```
//! use rfqkd::qmath::Rotation3;
//! use rfqkd::sampling::{apply_channel, random_triad, sample_rng};
//!
//! // the same (master seed, sample index) pair always yields the same draw
//! let t1 = random_triad(&mut sample_rng(1, 5));
//! let t2 = random_triad(&mut sample_rng(1, 5));
//! assert_eq!(t1.vector(0).x, t2.vector(0).x);
//!
//! // an identity channel leaves a triad unchanged
//! let same = apply_channel(&t1, &Rotation3::identity());
//! assert!((same.vector(2).z - t1.vector(2).z).abs() < 1e-15);
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::qmath::{identity2, pauli_dot, BlochVector, MeasurementTriad, Rotation3, C64};

/// Generator for one Monte Carlo sample, derived from a master seed and a
/// sample index. Distinct indices map to distinct ChaCha streams, so results
/// do not depend on evaluation order or worker count.
pub fn sample_rng(master_seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sample_index);
    rng
}

/// Unit quaternion (w, x, y, z) uniform on S^3.
pub fn random_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    loop {
        let q: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if n > 1e-12 {
            return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        }
    }
}

/// SO(3) image of a unit quaternion.
pub fn rotation_from_quaternion(q: &[f64; 4]) -> Rotation3 {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Rotation3([
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ])
}

/// Haar-uniform proper rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3 {
    rotation_from_quaternion(&random_unit_quaternion(rng))
}

/// Haar-uniform measurement triad (proper rotation applied to the canonical
/// axes, handedness +1).
pub fn random_triad<R: Rng + ?Sized>(rng: &mut R) -> MeasurementTriad {
    MeasurementTriad::from_rotation(&random_rotation(rng))
}

/// Like [`random_triad`], but flips the third axis with probability 1/2 so
/// that left-handed triads occur too.
pub fn random_triad_any_handedness<R: Rng + ?Sized>(rng: &mut R) -> MeasurementTriad {
    let mut t = random_triad(rng);
    if rng.gen_bool(0.5) {
        t.vectors[2] = t.vectors[2].scaled(-1.0);
        t.handedness = -1;
    }
    t
}

/// SU(2) element implementing a given Bloch rotation:
/// `U (v.sigma) U^dag = (Rv).sigma`.
pub fn rotation_unitary(r: &Rotation3) -> [[C64; 2]; 2] {
    // axis-angle from the rotation matrix
    let m = &r.0;
    let tr = m[0][0] + m[1][1] + m[2][2];
    let cos_t = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos_t.acos();
    let axis = if theta < 1e-12 {
        BlochVector::new(0.0, 0.0, 1.0)
    } else if (std::f64::consts::PI - theta).abs() < 1e-6 {
        // near 180 degrees: axis from the symmetric part
        let xx = ((m[0][0] + 1.0) / 2.0).max(0.0).sqrt();
        let yy = ((m[1][1] + 1.0) / 2.0).max(0.0).sqrt();
        let zz = ((m[2][2] + 1.0) / 2.0).max(0.0).sqrt();
        // fix signs against the off-diagonal sums
        let (sx, sy, sz) = if xx >= yy && xx >= zz {
            (
                xx,
                (m[0][1] + m[1][0]) / (4.0 * xx.max(1e-12)),
                (m[0][2] + m[2][0]) / (4.0 * xx.max(1e-12)),
            )
        } else if yy >= zz {
            (
                (m[0][1] + m[1][0]) / (4.0 * yy.max(1e-12)),
                yy,
                (m[1][2] + m[2][1]) / (4.0 * yy.max(1e-12)),
            )
        } else {
            (
                (m[0][2] + m[2][0]) / (4.0 * zz.max(1e-12)),
                (m[1][2] + m[2][1]) / (4.0 * zz.max(1e-12)),
                zz,
            )
        };
        BlochVector::new(sx, sy, sz).normalized().unwrap()
    } else {
        let s = 2.0 * theta.sin();
        BlochVector::new(
            (m[2][1] - m[1][2]) / s,
            (m[0][2] - m[2][0]) / s,
            (m[1][0] - m[0][1]) / s,
        )
        .normalized()
        .unwrap()
    };
    let half = theta / 2.0;
    let (s, c) = half.sin_cos();
    let n_sigma = pauli_dot(&axis);
    let mut u = identity2();
    for i in 0..2 {
        for j in 0..2 {
            u[i][j] = u[i][j] * c - C64::new(0.0, s) * n_sigma[i][j];
        }
    }
    u
}

/// A random-walk channel rotation: each step composes a small rotation whose
/// angle is half-normal and whose axis is correlated with the previous axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftProcess {
    pub step_angle_std: f64,
    pub axis_correlation: f64,
    pub current_rotation: Rotation3,
    prev_axis: Option<BlochVector>,
}

impl DriftProcess {
    pub fn new(step_angle_std: f64, axis_correlation: f64) -> Self {
        Self {
            step_angle_std,
            axis_correlation: axis_correlation.clamp(0.0, 1.0),
            current_rotation: Rotation3::identity(),
            prev_axis: None,
        }
    }

    pub fn with_initial_rotation(mut self, r: Rotation3) -> Self {
        self.current_rotation = r;
        self
    }

    /// Pins the walk direction; with `axis_correlation = 1` every step then
    /// rotates about this fixed axis.
    pub fn with_initial_axis(mut self, axis: BlochVector) -> Self {
        self.prev_axis = Some(axis);
        self
    }
}

fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> BlochVector {
    loop {
        let v = BlochVector::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if v.norm() > 1e-12 {
            return v.scaled(1.0 / v.norm());
        }
    }
}

/// Advances the drift by one step and returns the new process state.
pub fn drift_step<R: Rng + ?Sized>(process: &DriftProcess, rng: &mut R) -> DriftProcess {
    let mut next = process.clone();
    let fresh = random_unit_vector(rng);
    let normal: f64 = rng.sample(StandardNormal);
    let angle = (normal * process.step_angle_std).abs();

    let rho = process.axis_correlation;
    let axis = match &process.prev_axis {
        Some(prev) => {
            let mixed = BlochVector::new(
                rho * prev.x + (1.0 - rho * rho).sqrt() * fresh.x,
                rho * prev.y + (1.0 - rho * rho).sqrt() * fresh.y,
                rho * prev.z + (1.0 - rho * rho).sqrt() * fresh.z,
            );
            if mixed.norm() > 1e-12 {
                mixed.scaled(1.0 / mixed.norm())
            } else {
                fresh
            }
        }
        None => fresh,
    };
    next.prev_axis = Some(axis);
    if process.step_angle_std > 0.0 && angle > 0.0 {
        let step = Rotation3::from_axis_angle(axis, angle);
        next.current_rotation = step.compose(&process.current_rotation).reorthonormalized();
    }
    next
}

/// Moves a channel rotation onto Bob's triad: each vector becomes `R^T v`.
pub fn apply_channel(triad: &MeasurementTriad, rotation: &Rotation3) -> MeasurementTriad {
    let rt = rotation.transpose();
    let vectors = [
        rt.apply(&triad.vectors[0]),
        rt.apply(&triad.vectors[1]),
        rt.apply(&triad.vectors[2]),
    ];
    let det_sign = if rotation.determinant() > 0.0 { 1 } else { -1 };
    MeasurementTriad {
        vectors,
        handedness: triad.handedness * det_sign,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn determinism_under_fixed_seed() {
        let t1 = random_triad(&mut sample_rng(42, 7));
        let t2 = random_triad(&mut sample_rng(42, 7));
        assert_eq!(t1, t2);
        let t3 = random_triad(&mut sample_rng(42, 8));
        assert_ne!(t1, t3);
    }

    #[test]
    fn rotations_are_proper_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            assert!(r.max_deviation_from_orthogonal() < 1e-9);
            assert_abs_diff_eq!(r.determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn triad_component_means_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut sum = [0.0f64; 3];
        for _ in 0..n {
            let t = random_triad(&mut rng);
            sum[0] += t.vectors[0].x;
            sum[1] += t.vectors[0].y;
            sum[2] += t.vectors[0].z;
        }
        for s in sum {
            assert!((s / n as f64).abs() < 0.01);
        }
    }

    #[test]
    fn first_axis_z_component_uniform() {
        // Kolmogorov-Smirnov against the uniform CDF on [-1, 1]
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut zs: Vec<f64> = (0..n)
            .map(|_| random_triad(&mut rng).vectors[0].z)
            .collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &z) in zs.iter().enumerate() {
            let cdf = (z + 1.0) / 2.0;
            let emp_hi = (i + 1) as f64 / n as f64;
            let emp_lo = i as f64 / n as f64;
            ks = ks.max((cdf - emp_lo).abs()).max((cdf - emp_hi).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn rotation_angle_follows_haar_density() {
        // histogram of theta against (1 - cos theta)/pi
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let bins = 20;
        let mut counts = vec![0u64; bins];
        for _ in 0..n {
            let r = random_rotation(&mut rng);
            let tr = r.0[0][0] + r.0[1][1] + r.0[2][2];
            let theta = (((tr - 1.0) / 2.0).clamp(-1.0, 1.0)).acos();
            let idx = ((theta / std::f64::consts::PI) * bins as f64).min(bins as f64 - 1.0);
            counts[idx as usize] += 1;
        }
        let w = std::f64::consts::PI / bins as f64;
        for (i, &c) in counts.iter().enumerate() {
            let mid = (i as f64 + 0.5) * w;
            let expected = (1.0 - mid.cos()) / std::f64::consts::PI * w * n as f64;
            let sigma = expected.sqrt().max(1.0);
            assert!(
                ((c as f64) - expected).abs() < 6.0 * sigma + 10.0,
                "bin {i}: count {c}, expected {expected:.1}"
            );
        }
    }

    #[test]
    fn rotation_unitary_conjugates_pauli() {
        use crate::qmath::Mat4;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let r = random_rotation(&mut rng);
            let u = rotation_unitary(&r);
            let v = random_unit_vector(&mut rng);
            let lhs2 = {
                let p = pauli_dot(&v);
                let mut tmp = [[C64::new(0.0, 0.0); 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            for l in 0..2 {
                                tmp[i][j] += u[i][k] * p[k][l] * u[j][l].conj();
                            }
                        }
                    }
                }
                tmp
            };
            let rhs2 = pauli_dot(&r.apply(&v));
            let lhs = Mat4::kron2(&lhs2, &identity2());
            let rhs = Mat4::kron2(&rhs2, &identity2());
            assert!(lhs.sub(&rhs).max_abs() < 1e-9);
        }
    }

    #[test]
    fn drift_zero_std_is_static() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p0 = DriftProcess::new(0.0, 0.9);
        let p1 = drift_step(&p0, &mut rng);
        assert_eq!(p0.current_rotation, p1.current_rotation);
    }

    #[test]
    fn drift_accumulated_angle_scales_with_sqrt_steps() {
        // mean accumulated angle at 4n steps should be ~2x that at n steps
        let mean_angle = |steps: usize, trials: u64| -> f64 {
            let mut total = 0.0;
            for t in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + t);
                let mut p = DriftProcess::new(0.01, 0.0);
                for _ in 0..steps {
                    p = drift_step(&p, &mut rng);
                }
                let tr = p.current_rotation.0[0][0]
                    + p.current_rotation.0[1][1]
                    + p.current_rotation.0[2][2];
                total += (((tr - 1.0) / 2.0).clamp(-1.0, 1.0)).acos();
            }
            total / trials as f64
        };
        let a1 = mean_angle(100, 400);
        let a2 = mean_angle(400, 400);
        let ratio = a2 / a1;
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn apply_channel_basics() {
        let t = MeasurementTriad::canonical();
        let same = apply_channel(&t, &Rotation3::identity());
        assert_eq!(t, same);
        let rz_pi = Rotation3::from_axis_angle(BlochVector::new(0.0, 0.0, 1.0), std::f64::consts::PI);
        let once = apply_channel(&t, &rz_pi);
        let twice = apply_channel(&once, &rz_pi);
        for (a, b) in t.vectors.iter().zip(twice.vectors.iter()) {
            assert_abs_diff_eq!(a.x, b.x, epsilon = 1e-12);
            assert_abs_diff_eq!(a.y, b.y, epsilon = 1e-12);
            assert_abs_diff_eq!(a.z, b.z, epsilon = 1e-12);
        }
    }
}
