//! Entanglement measures and collective-spin witnesses.
//!
//! Concurrence follows the spin-flip construction: for a two-qubit density
//! matrix `rho`, `C = max(0, l1 - l2 - l3 - l4)` where `l_k` are the square
//! roots of the eigenvalues of `sqrt(rho) rho_tilde sqrt(rho)` in descending
//! order and `rho_tilde = (sy x sy) conj(rho) (sy x sy)`.

use crate::error::{CoreError, Result};
use crate::linalg::{CMatrix, CVector, HERMITICITY_TOL};
use crate::rng::RngStream;
use crate::scalar::{from_f64, Scalar};
use crate::spin::CollectiveOperators;
use num_complex::Complex;
use num_traits::Zero;

/// Tolerance on `| |psi| - 1 |` and `|tr(rho) - 1|` for state validation.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Density-matrix eigenvalues below `-PSD_TOL` are rejected; larger negative
/// rounding dust is clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

fn require_normalized<T: Scalar>(psi: &CVector<T>) -> Result<()> {
    let norm = psi.norm();
    if (norm - T::one()).abs() > from_f64::<T>(NORMALIZATION_TOL) {
        return Err(CoreError::NotNormalized {
            norm: norm.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

fn require_two_qubit_density<T: Scalar>(rho: &CMatrix<T>) -> Result<()> {
    if rho.dim() != 4 {
        return Err(CoreError::DimensionMismatch {
            expected: 4,
            got: rho.dim(),
        });
    }
    if !rho.is_hermitian(HERMITICITY_TOL) {
        return Err(CoreError::NotHermitian {
            max_asymmetry: rho.hermiticity_asymmetry().to_f64().unwrap_or(f64::NAN),
        });
    }
    let trace = rho.trace().re;
    if (trace - T::one()).abs() > from_f64::<T>(NORMALIZATION_TOL) {
        return Err(CoreError::TraceNotOne {
            trace: trace.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Spin-flip conjugation `(sy x sy) conj(rho) (sy x sy)`.
fn spin_flipped<T: Scalar>(rho: &CMatrix<T>) -> CMatrix<T> {
    // (sy x sy) is the antidiagonal (-1, 1, 1, -1); conjugating by it maps
    // entry (i, j) to sign * conj-free entry (3-i, 3-j).
    let sign = |k: usize| -> T {
        if k == 0 || k == 3 {
            -T::one()
        } else {
            T::one()
        }
    };
    CMatrix::from_fn(4, |i, j| {
        let z = rho.get(3 - i, 3 - j).conj();
        z.scale(sign(i) * sign(j))
    })
    .expect("dim 4 is supported")
}

/// Concurrence of a normalized two-qubit pure state
/// `psi = a|uu> + b|ud> + c|du> + d|dd>`: `C = 2 |a d - b c|`.
pub fn concurrence_pure<T: Scalar>(psi: &CVector<T>) -> Result<T> {
    if psi.dim() != 4 {
        return Err(CoreError::DimensionMismatch {
            expected: 4,
            got: psi.dim(),
        });
    }
    require_normalized(psi)?;
    let det = psi[0] * psi[3] - psi[1] * psi[2];
    Ok((det.norm() + det.norm()).min(T::one()))
}

/// Concurrence of a two-qubit density matrix.
pub fn concurrence_mixed<T: Scalar>(rho: &CMatrix<T>) -> Result<T> {
    require_two_qubit_density(rho)?;
    let (vals, vecs) = rho.hermitian_eig()?;
    let psd_floor = -from_f64::<T>(PSD_TOL) * T::one().max(rho.max_abs());
    for &v in &vals {
        if v < psd_floor {
            return Err(CoreError::NegativeEigenvalue {
                value: v.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    // sqrt(rho) from the clamped spectrum.
    let mut sqrt_rho = CMatrix::zeros(4)?;
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = Complex::zero();
            for k in 0..4 {
                let root = vals[k].max(T::zero()).sqrt();
                acc += vecs.get(i, k) * root * vecs.get(j, k).conj();
            }
            sqrt_rho.set_entry(i, j, acc);
        }
    }
    let m = sqrt_rho.matmul(&spin_flipped(rho)).matmul(&sqrt_rho);
    let (mu, _) = m.hermitian_eig()?;
    // Ascending eigenvalues: the largest root minus the other three.
    let root = |x: T| x.max(T::zero()).sqrt();
    let c = root(mu[3]) - root(mu[2]) - root(mu[1]) - root(mu[0]);
    Ok(c.max(T::zero()))
}

/// Concurrence between spins `i` and `j` of a pure `n`-spin state.
pub fn pairwise_concurrence<T: Scalar>(
    psi: &CVector<T>,
    n: usize,
    i: usize,
    j: usize,
) -> Result<T> {
    require_normalized(psi)?;
    let rho = crate::spin::pair_density_from_state(psi, n, i, j)?;
    concurrence_mixed(&rho)
}

/// Susceptibility witness `chi / beta = sum_a Var(M_a)` of a pure state.
pub fn susceptibility<T: Scalar>(psi: &CVector<T>, ops: &CollectiveOperators<T>) -> Result<T> {
    if psi.dim() != ops.mx.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: ops.mx.dim(),
            got: psi.dim(),
        });
    }
    require_normalized(psi)?;
    let mut total = T::zero();
    for m in [&ops.mx, &ops.my, &ops.mz] {
        let phi = m.mul_vec(psi);
        let mean = psi.dot(&phi).re;
        let second = phi.dot(&phi).re;
        total += second - mean * mean;
    }
    Ok(total)
}

/// Expectation of the total-spin operator `S^2` in a pure state.
pub fn s2_expectation<T: Scalar>(psi: &CVector<T>, ops: &CollectiveOperators<T>) -> Result<T> {
    if psi.dim() != ops.s2.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: ops.s2.dim(),
            got: psi.dim(),
        });
    }
    require_normalized(psi)?;
    Ok(psi.dot(&ops.s2.mul_vec(psi)).re)
}

/// Expectation of `S^2` in a density matrix.
pub fn s2_expectation_density<T: Scalar>(
    rho: &CMatrix<T>,
    ops: &CollectiveOperators<T>,
) -> Result<T> {
    if rho.dim() != ops.s2.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: ops.s2.dim(),
            got: rho.dim(),
        });
    }
    Ok(ops.s2.matmul(rho).trace().re)
}

/// Projective `S^2` measurement outcome (0 or 2) on a two-qubit pure state.
///
/// For two qubits `S^2 = 2 P_triplet`, so outcome 2 occurs with probability
/// `<S^2>/2` and outcome 0 otherwise.
pub fn s2_sample<T: Scalar>(
    psi: &CVector<T>,
    ops: &CollectiveOperators<T>,
    stream: &mut RngStream,
) -> Result<T> {
    if psi.dim() != 4 {
        return Err(CoreError::DimensionMismatch {
            expected: 4,
            got: psi.dim(),
        });
    }
    let p2 = s2_expectation(psi, ops)? * from_f64::<T>(0.5);
    let u: T = stream.uniform();
    Ok(if u < p2 { from_f64::<T>(2.0) } else { T::zero() })
}

/// Dampen coherences in the computational basis: keep the diagonal and
/// multiply every entry above the diagonal by the shared complex factor
/// `lambda` (`|lambda| <= 1`), conjugated below so the result stays
/// Hermitian. Real `lambda = 1` returns the pure projector, `lambda = 0`
/// its diagonal. A complex phase can push eigenvalues slightly negative;
/// positivity is the caller's concern.
pub fn phase_damped_density<T: Scalar>(
    psi: &CVector<T>,
    lambda: Complex<T>,
) -> Result<CMatrix<T>> {
    if lambda.norm_sqr() > T::one() + from_f64::<T>(1e-12) {
        return Err(CoreError::InvalidParameter {
            name: "lambda",
            value: lambda.norm().to_f64().unwrap_or(f64::NAN),
            constraint: "modulus must not exceed 1",
        });
    }
    require_normalized(psi)?;
    let pure = psi.outer();
    let dim = pure.dim();
    CMatrix::from_fn(dim, |i, j| {
        if i == j {
            pure.get(i, j)
        } else if i < j {
            pure.get(i, j) * lambda
        } else {
            pure.get(i, j) * lambda.conj()
        }
    })
}

/// Attempts before the positivity rejection loop gives up.
const SCATTER_REJECTION_CAP: usize = 10_000;

/// One scatter sample: a Haar-random two-qubit pure state with its
/// coherences damped by a complex factor drawn uniformly from the unit
/// disk. Candidates whose smallest eigenvalue drops below -1e-10 are
/// discarded and redrawn. Returns the density matrix with its S^2
/// expectation and concurrence.
pub fn random_witness_density<T: Scalar>(
    ops: &CollectiveOperators<T>,
    stream: &mut RngStream,
) -> Result<(CMatrix<T>, T, T)> {
    let two = from_f64::<T>(2.0);
    for _ in 0..SCATTER_REJECTION_CAP {
        let mut psi = CVector::zeros(4)?;
        for k in 0..4 {
            let re: T = stream.normal();
            let im: T = stream.normal();
            psi[k] = Complex::new(re, im);
        }
        let psi = psi.normalized()?;
        let lambda = loop {
            let u: T = stream.uniform::<T>() * two - T::one();
            let v: T = stream.uniform::<T>() * two - T::one();
            if u * u + v * v <= T::one() {
                break Complex::new(u, v);
            }
        };
        let rho = phase_damped_density(&psi, lambda)?;
        let (eigs, _) = rho.hermitian_eig()?;
        if eigs[0] < -from_f64::<T>(PSD_TOL) {
            continue;
        }
        let s2 = s2_expectation_density(&rho, ops)?;
        let c = concurrence_mixed(&rho)?;
        return Ok((rho, s2, c));
    }
    Err(CoreError::InvalidParameter {
        name: "scatter_rejection_cap",
        value: SCATTER_REJECTION_CAP as f64,
        constraint: "no positive semidefinite candidate found",
    })
}
