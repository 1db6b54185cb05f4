//! Two-qubit pure-state simulator.
//!
//! Everything here works on fixed-size 4-vectors and 4x4 matrices; the
//! problem dimension never changes, so no general tensor machinery is used.
//! Measurement directions are restricted to the x-z plane of the Bloch
//! sphere, which is sufficient for optimal CHSH strategies on Schmidt-form
//! states.
//!
//! Outcome convention: outcome bit `a` corresponds to the projector
//! `(1 + (-1)^a n.sigma)/2`, i.e. outcome 0 is the +1 eigenvalue.

// Index loops over both sides of fixed 4x4 matrices read better than
// iterator chains here.
#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use thiserror::Error;

/// Tolerance for exact algebraic identities (normalization, distributions).
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for eigenvalue-based paths (density-matrix concurrence).
pub const EIGEN_TOL: f64 = 1e-9;

/// A 4x4 complex matrix in the computational basis |00>,|01>,|10>,|11>.
pub type DensityMatrix = [[Complex64; 4]; 4];

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("angle {0} outside [0, pi/4]")]
    AngleOutOfRange(f64),
    #[error("state is not normalized (|norm^2 - 1| = {0:e})")]
    NotNormalized(f64),
    #[error("matrix is not Hermitian within tolerance")]
    NotHermitian,
    #[error("matrix has eigenvalue {0:e} below -tolerance; not positive semidefinite")]
    NotPositive(f64),
    #[error("matrix trace deviates from 1 by {0:e}")]
    BadTrace(f64),
    #[error("conditioning on a zero-probability outcome")]
    ZeroProbability,
}

/// Which side of the pair a measurement acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

/// A normalized two-qubit pure state, amplitudes over |00>,|01>,|10>,|11>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitPureState {
    amps: [Complex64; 4],
}

impl TwoQubitPureState {
    pub fn new(amps: [Complex64; 4]) -> Result<Self, QsimError> {
        let n2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (n2 - 1.0).abs() > EXACT_TOL {
            return Err(QsimError::NotNormalized((n2 - 1.0).abs()));
        }
        Ok(Self { amps })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amps
    }

    pub fn amplitude(&self, basis_index: usize) -> Complex64 {
        self.amps[basis_index]
    }

    /// Projector |psi><psi| as a density matrix.
    pub fn density(&self) -> DensityMatrix {
        let mut rho = [[Complex64::ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = self.amps[i] * self.amps[j].conj();
            }
        }
        rho
    }
}

/// `cos(theta)|00> + sin(theta)|11>` for `theta` in `[0, pi/4]`.
pub fn make_partially_entangled(theta: f64) -> Result<TwoQubitPureState, QsimError> {
    if !(0.0..=FRAC_PI_4 + EXACT_TOL).contains(&theta) {
        return Err(QsimError::AngleOutOfRange(theta));
    }
    let z = Complex64::ZERO;
    TwoQubitPureState::new([theta.cos().into(), z, z, theta.sin().into()])
}

/// The Bell state `|phi+> = (|00> + |11>)/sqrt(2)`.
pub fn bell_phi_plus() -> TwoQubitPureState {
    make_partially_entangled(FRAC_PI_4).expect("pi/4 is in range")
}

/// A binary projective measurement direction in the x-z Bloch plane.
///
/// `angle` is the polar angle from the z-axis; the measured observable is
/// `n.sigma` with `n = (sin angle, 0, cos angle)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    angle: f64,
}

impl MeasurementSetting {
    /// Normalizes the angle to `(-pi, pi]`.
    pub fn new(angle: f64) -> Self {
        let mut a = angle.rem_euclid(2.0 * PI);
        if a > PI {
            a -= 2.0 * PI;
        }
        Self { angle: a }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// The 2x2 projector onto the eigenspace for outcome bit `a`.
    /// Real-valued because the direction lies in the x-z plane.
    fn projector(&self, outcome: u8) -> [[f64; 2]; 2] {
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        let (sx, cz) = self.angle.sin_cos();
        [
            [0.5 * (1.0 + sign * cz), 0.5 * sign * sx],
            [0.5 * sign * sx, 0.5 * (1.0 - sign * cz)],
        ]
    }
}

/// Joint outcome probabilities p(a,b), indexed in the order
/// (0,0),(0,1),(1,0),(1,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDistribution {
    p: [f64; 4],
}

impl JointDistribution {
    pub fn new(p: [f64; 4]) -> Self {
        debug_assert!(p.iter().all(|&x| x >= 0.0));
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() <= EXACT_TOL);
        Self { p }
    }

    pub fn prob(&self, a: u8, b: u8) -> f64 {
        self.p[(2 * a + b) as usize]
    }

    pub fn probs(&self) -> &[f64; 4] {
        &self.p
    }

    /// Marginal outcome distribution `[p(0), p(1)]` for one party.
    pub fn marginal(&self, party: Party) -> [f64; 2] {
        match party {
            Party::A => [self.p[0] + self.p[1], self.p[2] + self.p[3]],
            Party::B => [self.p[0] + self.p[2], self.p[1] + self.p[3]],
        }
    }

    /// The correlator `E = sum (-1)^(a xor b) p(a,b)`.
    pub fn correlator(&self) -> f64 {
        self.p[0] - self.p[1] - self.p[2] + self.p[3]
    }
}

/// Born-rule joint distribution for measuring `setting_a` on qubit A and
/// `setting_b` on qubit B.
pub fn joint_distribution(
    state: &TwoQubitPureState,
    setting_a: MeasurementSetting,
    setting_b: MeasurementSetting,
) -> JointDistribution {
    let mut p = [0.0; 4];
    for a in 0..2u8 {
        let pa = setting_a.projector(a);
        for b in 0..2u8 {
            let pb = setting_b.projector(b);
            p[(2 * a + b) as usize] = expect_kron(state, &pa, &pb);
        }
    }
    // Clamp float dust so downstream CDF sampling sees a clean distribution.
    for x in &mut p {
        if *x < 0.0 {
            debug_assert!(*x > -EXACT_TOL);
            *x = 0.0;
        }
    }
    JointDistribution::new(p)
}

/// `<psi| A (x) B |psi>` for real 2x2 operators A, B.
fn expect_kron(state: &TwoQubitPureState, a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    let v = state.amplitudes();
    let mut acc = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut w = Complex64::ZERO;
            for k in 0..2 {
                for l in 0..2 {
                    w += a[i][k] * b[j][l] * v[2 * k + l];
                }
            }
            acc += (v[2 * i + j].conj() * w).re;
        }
    }
    acc
}

/// Marginal outcome distribution `[p(0), p(1)]` for one party measuring
/// `setting`; independent of what (if anything) the other party measures.
pub fn marginal_distribution(
    state: &TwoQubitPureState,
    party: Party,
    setting: MeasurementSetting,
) -> [f64; 2] {
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let mut m = [0.0; 2];
    for out in 0..2u8 {
        let proj = setting.projector(out);
        m[out as usize] = match party {
            Party::A => expect_kron(state, &proj, &id),
            Party::B => expect_kron(state, &id, &proj),
        }
        .max(0.0);
    }
    m
}

/// Inverse-CDF sample over the fixed outcome order (0,0),(0,1),(1,0),(1,1).
pub fn sample_pair_outcomes(dist: &JointDistribution, randomness: f64) -> (u8, u8) {
    let mut acc = 0.0;
    for (idx, &p) in dist.probs().iter().enumerate() {
        acc += p;
        if randomness < acc {
            return ((idx / 2) as u8, (idx % 2) as u8);
        }
    }
    (1, 1)
}

/// Sample one bit from `[p0, p1]` (assumed to sum to 1) by inverse CDF.
pub fn sample_bit(marginal: &[f64; 2], randomness: f64) -> u8 {
    if randomness < marginal[0] {
        0
    } else {
        1
    }
}

/// Sample the remaining party's outcome conditioned on the fixed party
/// having already obtained `fixed_outcome`. Composing marginal sampling
/// with this reproduces `joint_distribution` exactly.
pub fn conditional_outcome(
    state: &TwoQubitPureState,
    setting_a: MeasurementSetting,
    setting_b: MeasurementSetting,
    fixed_party: Party,
    fixed_outcome: u8,
    randomness: f64,
) -> Result<u8, QsimError> {
    let cond =
        conditional_distribution(state, setting_a, setting_b, fixed_party, fixed_outcome)?;
    Ok(sample_bit(&cond, randomness))
}

/// Distribution of the remaining party's outcome given the fixed party's
/// setting and outcome.
pub fn conditional_distribution(
    state: &TwoQubitPureState,
    setting_a: MeasurementSetting,
    setting_b: MeasurementSetting,
    fixed_party: Party,
    fixed_outcome: u8,
) -> Result<[f64; 2], QsimError> {
    let joint = joint_distribution(state, setting_a, setting_b);
    let pm = joint.marginal(fixed_party)[fixed_outcome as usize];
    if pm <= 0.0 {
        return Err(QsimError::ZeroProbability);
    }
    Ok(match fixed_party {
        Party::A => [
            joint.prob(fixed_outcome, 0) / pm,
            joint.prob(fixed_outcome, 1) / pm,
        ],
        Party::B => [
            joint.prob(0, fixed_outcome) / pm,
            joint.prob(1, fixed_outcome) / pm,
        ],
    })
}

/// Pure-state concurrence, `2|a00*a11 - a01*a10|`.
pub fn concurrence_pure(state: &TwoQubitPureState) -> Result<f64, QsimError> {
    let n2: f64 = state.amplitudes().iter().map(|a| a.norm_sqr()).sum();
    if (n2 - 1.0).abs() > EXACT_TOL {
        return Err(QsimError::NotNormalized((n2 - 1.0).abs()));
    }
    let v = state.amplitudes();
    Ok(2.0 * (v[0] * v[3] - v[1] * v[2]).norm())
}

/// Mixed-state concurrence via the spin-flip eigenvalue formula:
/// `max{0, sqrt(l1) - sqrt(l2) - sqrt(l3) - sqrt(l4)}` with `l_i` the
/// decreasingly ordered eigenvalues of `rho (sy x sy) rho* (sy x sy)`.
pub fn concurrence_density(rho: &DensityMatrix) -> Result<f64, QsimError> {
    for i in 0..4 {
        for j in 0..4 {
            if (rho[i][j] - rho[j][i].conj()).norm() > EIGEN_TOL {
                return Err(QsimError::NotHermitian);
            }
        }
    }
    let tr: Complex64 = (0..4).map(|i| rho[i][i]).sum();
    if (tr - Complex64::ONE).norm() > EIGEN_TOL {
        return Err(QsimError::BadTrace((tr - Complex64::ONE).norm()));
    }

    let (mut evals, evecs) = hermitian_eigen(rho);
    if let Some(&low) = evals
        .iter()
        .filter(|&&l| l < -EIGEN_TOL)
        .min_by(|a, b| a.total_cmp(b))
    {
        return Err(QsimError::NotPositive(low));
    }
    for l in &mut evals {
        *l = l.max(0.0);
    }

    // sqrt(rho) from the eigendecomposition.
    let mut sqrt_rho = [[Complex64::ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for (k, &l) in evals.iter().enumerate() {
                sqrt_rho[i][j] += evecs[i][k] * l.sqrt() * evecs[j][k].conj();
            }
        }
    }

    // sy x sy is the real antidiagonal (-1, 1, 1, -1).
    let spin_flip = {
        let mut s = [[Complex64::ZERO; 4]; 4];
        s[0][3] = (-1.0).into();
        s[1][2] = 1.0.into();
        s[2][1] = 1.0.into();
        s[3][0] = (-1.0).into();
        s
    };
    let rho_star = {
        let mut m = [[Complex64::ZERO; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = rho[i][j].conj();
            }
        }
        m
    };

    // Hermitian form sqrt(rho) S rho* S sqrt(rho): same nonzero spectrum as
    // rho S rho* S, but amenable to the Hermitian eigensolver.
    let m = mat_mul(
        &mat_mul(&mat_mul(&mat_mul(&sqrt_rho, &spin_flip), &rho_star), &spin_flip),
        &sqrt_rho,
    );
    let (mut lambdas, _) = hermitian_eigen(&m);
    lambdas.sort_by(|a, b| b.total_cmp(a));
    // Eigenvalues at the solver's residual floor are numerically zero; the
    // square root would amplify a ~1e-14 residual to ~1e-7 in the result
    // (visible on pure states, where three eigenvalues vanish exactly).
    let cutoff = 1e-12;
    let roots: Vec<f64> = lambdas
        .iter()
        .map(|&l| if l < cutoff { 0.0 } else { l.sqrt() })
        .collect();
    Ok((roots[0] - roots[1] - roots[2] - roots[3]).max(0.0))
}

fn mat_mul(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    let mut c = [[Complex64::ZERO; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik == Complex64::ZERO {
                continue;
            }
            for j in 0..4 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// Cyclic Jacobi eigensolver for a 4x4 complex Hermitian matrix.
/// Returns (eigenvalues, eigenvector matrix with eigenvectors as columns).
fn hermitian_eigen(m: &DensityMatrix) -> ([f64; 4], DensityMatrix) {
    let mut a = *m;
    let mut v = [[Complex64::ZERO; 4]; 4];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = Complex64::ONE;
    }

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..4 {
            for q in (p + 1)..4 {
                off = off.max(a[p][q].norm());
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..4 {
            for q in (p + 1)..4 {
                let apq = a[p][q];
                let b = apq.norm();
                if b < 1e-18 {
                    continue;
                }
                let u = apq / b;
                let alpha = a[p][p].re;
                let delta = a[q][q].re;
                let t = 0.5 * (2.0 * b).atan2(delta - alpha);
                let (s, c) = t.sin_cos();

                // Unitary G: identity except the (p,q) block
                // [[c, s*u], [-s*conj(u), c]]; apply a <- G^H a G, v <- v G.
                let gpp = Complex64::from(c);
                let gpq = s * u;
                let gqp = -s * u.conj();
                let gqq = Complex64::from(c);

                for i in 0..4 {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = aip * gpp + aiq * gqp;
                    a[i][q] = aip * gpq + aiq * gqq;
                }
                for j in 0..4 {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = gpp.conj() * apj + gqp.conj() * aqj;
                    a[q][j] = gpq.conj() * apj + gqq.conj() * aqj;
                }
                for i in 0..4 {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = vip * gpp + viq * gqp;
                    v[i][q] = vip * gpq + viq * gqq;
                }
            }
        }
    }

    let mut evals = [0.0; 4];
    for i in 0..4 {
        evals[i] = a[i][i].re;
    }
    (evals, v)
}
