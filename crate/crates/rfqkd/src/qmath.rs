//! Scalar entropies, Bloch-sphere geometry, Pauli algebra and small
//! complex-Hermitian eigendecompositions.
//!
//! Everything here operates on plain values; nothing allocates beyond the
//! fixed 4x4 matrices, and all functions are pure.
//!
//! # Example
//!
//! ```
//! use rfqkd::qmath::{concurrence, werner_state};
//!
//! // a singlet with 5% isotropic noise
//! let rho = werner_state(0.95)?;
//! // its largest eigenvalue is (1 + 3V) / 4
//! assert!((rho.spectrum()[0] - 0.9625).abs() < 1e-12);
//! // Werner states are entangled exactly when V > 1/3
//! assert!((concurrence(&rho) - 0.925).abs() < 1e-9);
//! assert_eq!(concurrence(&werner_state(0.2)?), 0.0);
//! # Ok::<(), rfqkd::Error>(())
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ORTHO_TOL: f64 = 1e-9;
pub const HERM_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;

/// A point on (or near) the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n < 1e-15 {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(1.0 / n))
    }

    /// Checks the unit-norm invariant used for measurement directions.
    pub fn check_unit(&self) -> Result<()> {
        if (self.norm() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::Invariant(format!(
                "Bloch vector norm {} deviates from 1",
                self.norm()
            )));
        }
        Ok(())
    }
}

/// A proper or improper rotation of Bloch space, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation3(pub [[f64; 3]; 3]);

impl Rotation3 {
    pub fn identity() -> Self {
        Self([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation by `angle` about the unit axis, via Rodrigues' formula.
    pub fn from_axis_angle(axis: BlochVector, angle: f64) -> Self {
        let (ux, uy, uz) = (axis.x, axis.y, axis.z);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Self([
            [c + ux * ux * t, ux * uy * t - uz * s, ux * uz * t + uy * s],
            [uy * ux * t + uz * s, c + uy * uy * t, uy * uz * t - ux * s],
            [uz * ux * t - uy * s, uz * uy * t + ux * s, c + uz * uz * t],
        ])
    }

    pub fn apply(&self, v: &BlochVector) -> BlochVector {
        let m = &self.0;
        BlochVector::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn compose(&self, other: &Self) -> Self {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += self.0[i][k] * other.0[k][j];
                }
            }
        }
        Self(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn max_deviation_from_orthogonal(&self) -> f64 {
        let p = self.compose(&self.transpose());
        let mut dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((p.0[i][j] - target).abs());
            }
        }
        dev
    }

    /// Re-orthonormalizes the rows by Gram-Schmidt, preserving handedness
    /// drift-free up to the accumulated numerical error.
    pub fn reorthonormalized(&self) -> Self {
        let r0 = BlochVector::new(self.0[0][0], self.0[0][1], self.0[0][2]);
        let r0 = r0.scaled(1.0 / r0.norm());
        let mut r1 = BlochVector::new(self.0[1][0], self.0[1][1], self.0[1][2]);
        let d = r1.dot(&r0);
        r1 = BlochVector::new(r1.x - d * r0.x, r1.y - d * r0.y, r1.z - d * r0.z);
        let r1 = r1.scaled(1.0 / r1.norm());
        let r2 = r0.cross(&r1);
        Self([
            [r0.x, r0.y, r0.z],
            [r1.x, r1.y, r1.z],
            [r2.x, r2.y, r2.z],
        ])
    }
}

/// Three mutually orthogonal measurement directions for one party.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTriad {
    pub vectors: [BlochVector; 3],
    /// +1 for a right-handed triad, -1 for a left-handed one.
    pub handedness: i8,
}

impl MeasurementTriad {
    pub fn new(v1: BlochVector, v2: BlochVector, v3: BlochVector) -> Result<Self> {
        let vectors = [v1, v2, v3];
        for v in &vectors {
            v.check_unit()?;
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                if vectors[i].dot(&vectors[j]).abs() >= ORTHO_TOL {
                    return Err(Error::Invariant(format!(
                        "triad vectors {i} and {j} are not orthogonal"
                    )));
                }
            }
        }
        let triple = v1.cross(&v2).dot(&v3);
        let handedness = if triple > 0.0 { 1 } else { -1 };
        Ok(Self { vectors, handedness })
    }

    /// The X, Y, Z axes.
    pub fn canonical() -> Self {
        Self {
            vectors: [
                BlochVector::new(1.0, 0.0, 0.0),
                BlochVector::new(0.0, 1.0, 0.0),
                BlochVector::new(0.0, 0.0, 1.0),
            ],
            handedness: 1,
        }
    }

    /// Triad whose vectors are the columns of a rotation matrix.
    pub fn from_rotation(r: &Rotation3) -> Self {
        let col = |j: usize| BlochVector::new(r.0[0][j], r.0[1][j], r.0[2][j]);
        let vectors = [col(0), col(1), col(2)];
        let handedness = if r.determinant() > 0.0 { 1 } else { -1 };
        Self { vectors, handedness }
    }

    pub fn vector(&self, setting: usize) -> &BlochVector {
        &self.vectors[setting]
    }
}

/// 4x4 complex matrix in the product basis |00>, |01>, |10>, |11>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat4 {
    pub fn zeros() -> Self {
        Self([[C64::new(0.0, 0.0); 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(d: &[f64; 4]) -> Self {
        let mut m = Self::zeros();
        for i in 0..4 {
            m.0[i][i] = C64::new(d[i], 0.0);
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..4 {
                    out.0[i][j] += a * other.0[k][j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] += other.0[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] -= other.0[i][j];
            }
        }
        out
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] *= k;
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2] + self.0[3][3]
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for row in &self.0 {
            for e in row {
                m = m.max(e.norm());
            }
        }
        m
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conj(&self) -> Self {
        let mut out = *self;
        for row in &mut out.0 {
            for e in row.iter_mut() {
                *e = e.conj();
            }
        }
        out
    }

    /// Kronecker product of two single-qubit operators.
    pub fn kron2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> Self {
        let mut out = Self::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out.0[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                    }
                }
            }
        }
        out
    }
}

/// `v . sigma` as a 2x2 operator.
pub fn pauli_dot(v: &BlochVector) -> [[C64; 2]; 2] {
    [
        [C64::new(v.z, 0.0), C64::new(v.x, -v.y)],
        [C64::new(v.x, v.y), C64::new(-v.z, 0.0)],
    ]
}

pub fn identity2() -> [[C64; 2]; 2] {
    [
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
    ]
}

/// Projector onto the +/-1 eigenspace of `v . sigma`.
pub fn projector(v: &BlochVector, outcome: i8) -> [[C64; 2]; 2] {
    let s = outcome as f64;
    let p = pauli_dot(v);
    let mut out = identity2();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (out[i][j] + p[i][j] * s) * 0.5;
        }
    }
    out
}

/// A two-qubit density matrix: Hermitian, unit trace, PSD within tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    rho: Mat4,
}

impl TwoQubitState {
    pub fn new(rho: Mat4) -> Result<Self> {
        if rho.hermiticity_defect() >= HERM_TOL {
            return Err(Error::Invariant(format!(
                "state is not Hermitian (defect {:.3e})",
                rho.hermiticity_defect()
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > HERM_TOL || tr.im.abs() > HERM_TOL {
            return Err(Error::Invariant(format!("state trace {} is not 1", tr)));
        }
        let (evals, _) = hermitian_eig(&rho);
        if evals[3] < -PSD_TOL {
            return Err(Error::Invariant(format!(
                "state has negative eigenvalue {:.3e}",
                evals[3]
            )));
        }
        Ok(Self { rho })
    }

    /// Skips validation; for constructors that guarantee the invariants.
    pub(crate) fn from_trusted(rho: Mat4) -> Self {
        Self { rho }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.rho
    }

    /// Descending spectrum.
    pub fn spectrum(&self) -> [f64; 4] {
        hermitian_eig(&self.rho).0
    }

    /// Partial trace over Bob's qubit, as a 2x2 matrix.
    pub fn partial_trace_b(&self) -> [[C64; 2]; 2] {
        let r = &self.rho.0;
        [
            [r[0][0] + r[1][1], r[0][2] + r[1][3]],
            [r[2][0] + r[3][1], r[2][2] + r[3][3]],
        ]
    }

    /// Partial trace over Alice's qubit.
    pub fn partial_trace_a(&self) -> [[C64; 2]; 2] {
        let r = &self.rho.0;
        [
            [r[0][0] + r[2][2], r[0][1] + r[2][3]],
            [r[1][0] + r[3][2], r[1][1] + r[3][3]],
        ]
    }
}

/// The singlet |Psi-><Psi-|.
pub fn singlet_projector() -> Mat4 {
    let mut m = Mat4::zeros();
    let h = C64::new(0.5, 0.0);
    m.0[1][1] = h;
    m.0[2][2] = h;
    m.0[1][2] = -h;
    m.0[2][1] = -h;
    m
}

/// Werner state `V |Psi-><Psi-| + (1-V) I/4`.
pub fn werner_state(v: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("visibility {v} outside [0,1]")));
    }
    let rho = singlet_projector()
        .scale(v)
        .add(&Mat4::identity().scale((1.0 - v) / 4.0));
    Ok(TwoQubitState::from_trusted(rho))
}

/// Binary entropy h(p) in bits, with the 0 log 0 := 0 convention.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::Domain(format!("binary entropy argument {p} outside [0,1]")));
    }
    let p = p.clamp(0.0, 1.0);
    Ok(xlog2(p) + xlog2(1.0 - p))
}

/// Binary entropy without the domain check; argument is clamped.
/// Hot-loop variant for callers that guarantee the range.
#[inline]
pub fn binary_entropy_clamped(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    xlog2(p) + xlog2(1.0 - p)
}

#[inline]
fn xlog2(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Shannon entropy of a probability vector, in bits.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    let mut h = 0.0;
    for &pi in p {
        if pi < -1e-9 {
            return Err(Error::Domain(format!("negative probability {pi}")));
        }
        sum += pi;
        h += xlog2(pi.max(0.0));
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(h)
}

/// Eigenvalues (descending) and a unitary whose columns are the matching
/// eigenvectors, by cyclic Jacobi sweeps on the Hermitian input.
pub fn hermitian_eig(m: &Mat4) -> ([f64; 4], Mat4) {
    let mut a = *m;
    // Symmetrize to suppress drift from the input's own defect.
    a = a.add(&a.adjoint()).scale(0.5);
    let mut vmat = Mat4::identity();

    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for p in 0..4 {
            for q in (p + 1)..4 {
                off = off.max(a.0[p][q].norm());
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                let apq = a.0[p][q];
                let r = apq.norm();
                if r < 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let alpha = a.0[p][p].re;
                let delta = a.0[q][q].re;
                let tau = (delta - alpha) / (2.0 * r);
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U has U[p][p]=U[q][q]=c, U[p][q]=-s*phase, U[q][p]=s*conj(phase).
                let sp = phase * s;
                // Rows p,q of A <- U^dagger A.
                for j in 0..4 {
                    let apj = a.0[p][j];
                    let aqj = a.0[q][j];
                    a.0[p][j] = apj * c + aqj * sp;
                    a.0[q][j] = -apj * sp.conj() + aqj * c;
                }
                // Columns p,q of A <- A U, and of V.
                for i in 0..4 {
                    let aip = a.0[i][p];
                    let aiq = a.0[i][q];
                    a.0[i][p] = aip * c + aiq * sp.conj();
                    a.0[i][q] = -aip * sp + aiq * c;
                    let vip = vmat.0[i][p];
                    let viq = vmat.0[i][q];
                    vmat.0[i][p] = vip * c + viq * sp.conj();
                    vmat.0[i][q] = -vip * sp + viq * c;
                }
            }
        }
    }

    let mut pairs: [(f64, usize); 4] = [
        (a.0[0][0].re, 0),
        (a.0[1][1].re, 1),
        (a.0[2][2].re, 2),
        (a.0[3][3].re, 3),
    ];
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let evals = [pairs[0].0, pairs[1].0, pairs[2].0, pairs[3].0];
    let mut sorted_v = Mat4::zeros();
    for (col, &(_, src)) in pairs.iter().enumerate() {
        for i in 0..4 {
            sorted_v.0[i][col] = vmat.0[i][src];
        }
    }
    (evals, sorted_v)
}

/// Eigenvalues of a Hermitian matrix, descending; rejects non-Hermitian input.
pub fn hermitian_eigenvalues(m: &Mat4) -> Result<[f64; 4]> {
    if m.hermiticity_defect() >= HERM_TOL {
        return Err(Error::Invariant(format!(
            "matrix is not Hermitian (defect {:.3e})",
            m.hermiticity_defect()
        )));
    }
    Ok(hermitian_eig(m).0)
}

/// Von Neumann entropy `-Tr(rho log2 rho)` of a unit-trace PSD matrix.
pub fn von_neumann_entropy(m: &Mat4) -> Result<f64> {
    let evals = hermitian_eigenvalues(m)?;
    let tr: f64 = evals.iter().sum();
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("trace {tr} is not 1")));
    }
    let mut h = 0.0;
    for &l in &evals {
        if l < -PSD_TOL {
            return Err(Error::Domain(format!("negative eigenvalue {l:.3e}")));
        }
        h += xlog2(l.max(0.0));
    }
    Ok(h)
}

/// Entropy of a spectrum that is already known to be (near-)PSD; eigenvalues
/// in [-1e-9, 0) are treated as 0.
pub fn spectrum_entropy(evals: &[f64]) -> f64 {
    evals.iter().map(|&l| xlog2(l.max(0.0))).sum()
}

/// Werner visibility implied by a tangle, `V = (2 sqrt(T) + 1)/3`.
pub fn visibility_from_tangle(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("tangle {t} outside [0,1]")));
    }
    Ok((2.0 * t.sqrt() + 1.0) / 3.0)
}

/// Tangle of a Werner state of visibility `v >= 1/3`, `[(3V-1)/2]^2`.
pub fn tangle_from_visibility(v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("visibility {v} outside [0,1]")));
    }
    let c = ((3.0 * v - 1.0) / 2.0).max(0.0);
    Ok(c * c)
}

/// Concurrence `max(0, sqrt(m1) - sqrt(m2) - sqrt(m3) - sqrt(m4))`, where
/// the `m_k` are the descending eigenvalues of the Hermitian matrix
/// `sqrt(rho) (Y(x)Y) rho* (Y(x)Y) sqrt(rho)`. Invariant under local
/// unitaries; for a Werner state it equals `max(0, (3V-1)/2)`.
pub fn concurrence(state: &TwoQubitState) -> f64 {
    let rho = state.matrix();
    let y = pauli_dot(&BlochVector::new(0.0, 1.0, 0.0));
    let yy = Mat4::kron2(&y, &y);
    let spin_flipped = yy.mul(&rho.conj()).mul(&yy);
    let root = psd_sqrt(rho);
    let (evals, _) = hermitian_eig(&root.mul(&spin_flipped).mul(&root));
    let s: Vec<f64> = evals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    (s[0] - s[1] - s[2] - s[3]).max(0.0)
}

/// Squared concurrence.
pub fn tangle(state: &TwoQubitState) -> f64 {
    let c = concurrence(state);
    c * c
}

/// Clips negative eigenvalues to 0 and renormalizes to unit trace. Returns
/// the input unchanged when it is already PSD.
pub fn psd_project(m: &Mat4) -> Result<TwoQubitState> {
    if m.hermiticity_defect() >= HERM_TOL {
        return Err(Error::Invariant("psd_project input is not Hermitian".into()));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > HERM_TOL || tr.im.abs() > HERM_TOL {
        return Err(Error::Invariant(format!("psd_project input trace {tr} is not 1")));
    }
    let (evals, vecs) = hermitian_eig(m);
    if evals[3] >= 0.0 {
        return Ok(TwoQubitState::from_trusted(*m));
    }
    let clipped: Vec<f64> = evals.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let mut out = Mat4::zeros();
    for (k, &l) in clipped.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        let w = l / total;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] += vecs.0[i][k] * vecs.0[j][k].conj() * w;
            }
        }
    }
    Ok(TwoQubitState::from_trusted(out))
}

/// Hermitian square root of a PSD matrix via its eigendecomposition.
pub fn psd_sqrt(m: &Mat4) -> Mat4 {
    let (evals, vecs) = hermitian_eig(m);
    let mut out = Mat4::zeros();
    for (k, &l) in evals.iter().enumerate() {
        let r = l.max(0.0).sqrt();
        if r == 0.0 {
            continue;
        }
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] += vecs.0[i][k] * vecs.0[j][k].conj() * r;
            }
        }
    }
    out
}
