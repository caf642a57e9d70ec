//! Spin-chain Hamiltonians with distance-dependent flip-flop couplings.
//!
//! Basis convention: for `n` spins, computational basis index `x` assigns
//! spin `i` (1-based) the bit `(x >> (n - i)) & 1`, with bit value 0 meaning
//! "up". So index 0 is all-up and spin 1 owns the most significant bit.

use crate::error::{CoreError, Result};
use crate::linalg::{CMatrix, CVector, HERMITICITY_TOL};
use crate::scalar::{from_f64, Scalar};
use num_complex::Complex;

/// Chain of 2 or 3 spins on a line.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinChainSpec<T: Scalar> {
    /// Transition frequency of each spin (rotating-frame offsets).
    pub frequencies: Vec<T>,
    /// Position of each spin along the line, in the same unit as `length`.
    pub positions: Vec<T>,
    /// Coupling strength at separation `length`.
    pub g0: T,
    /// Reference separation for the coupling law.
    pub length: T,
}

impl<T: Scalar> SpinChainSpec<T> {
    /// Resonant pair at separation `length`.
    pub fn resonant_pair(g0: T, length: T) -> Self {
        Self {
            frequencies: vec![T::zero(); 2],
            positions: vec![T::zero(), length],
            g0,
            length,
        }
    }

    /// Pair of resonant spins at 0 and `length`, plus a third spin at `r3`
    /// whose frequency interpolates linearly with position: spin 2 carries
    /// offset `delta` and spin 3 carries `delta * r3 / length`.
    pub fn detuned_triple(delta: T, r3: T, g0: T, length: T) -> Self {
        Self {
            frequencies: vec![T::zero(), delta, delta * r3 / length],
            positions: vec![T::zero(), length, r3],
            g0,
            length,
        }
    }

    pub fn n_spins(&self) -> usize {
        self.frequencies.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_spins();
        if !(2..=3).contains(&n) || self.positions.len() != n {
            return Err(CoreError::DimensionMismatch {
                expected: n.clamp(2, 3),
                got: self.positions.len(),
            });
        }
        if !(self.g0 >= T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "g0",
                value: self.g0.to_f64().unwrap_or(f64::NAN),
                constraint: "must be non-negative",
            });
        }
        if !(self.length > T::zero()) {
            return Err(CoreError::InvalidParameter {
                name: "length",
                value: self.length.to_f64().unwrap_or(f64::NAN),
                constraint: "must be positive",
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if self.positions[i] == self.positions[j] {
                    return Err(CoreError::CoincidentPositions {
                        i: i + 1,
                        j: j + 1,
                        position: self.positions[i].to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Inverse-cube coupling `g(r) = g0 (length / r)^3`.
pub fn dipole_coupling<T: Scalar>(r: T, g0: T, length: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(CoreError::InvalidParameter {
            name: "separation",
            value: r.to_f64().unwrap_or(f64::NAN),
            constraint: "must be positive",
        });
    }
    let ratio = length / r;
    Ok(g0 * ratio * ratio * ratio)
}

#[inline]
fn spin_is_up(index: usize, spin: usize, n: usize) -> bool {
    (index >> (n - spin)) & 1 == 0
}

/// Full-space Hamiltonian
/// `H = sum_i (w_i/2) sz_i + sum_{i<j} (g(r_ij)/2)(s+_i s-_j + s-_i s+_j)`.
pub fn build_hamiltonian<T: Scalar>(spec: &SpinChainSpec<T>) -> Result<CMatrix<T>> {
    spec.validate()?;
    let n = spec.n_spins();
    let dim = 1 << n;
    let mut h = CMatrix::zeros(dim)?;
    let half = from_f64::<T>(0.5);
    for x in 0..dim {
        let mut diag = T::zero();
        for i in 1..=n {
            let sign = if spin_is_up(x, i, n) { T::one() } else { -T::one() };
            diag += spec.frequencies[i - 1] * half * sign;
        }
        h.set_entry(x, x, Complex::new(diag, T::zero()));
    }
    for i in 1..=n {
        for j in (i + 1)..=n {
            let r = (spec.positions[i - 1] - spec.positions[j - 1]).abs();
            let g = dipole_coupling(r, spec.g0, spec.length)?;
            let amp = Complex::new(g * half, T::zero());
            for x in 0..dim {
                // s+_i s-_j: spin i down and spin j up in |x>.
                if !spin_is_up(x, i, n) && spin_is_up(x, j, n) {
                    let y = x ^ (1 << (n - i)) ^ (1 << (n - j));
                    h.set_entry(y, x, amp);
                    h.set_entry(x, y, amp);
                }
            }
        }
    }
    Ok(h)
}

/// Basis indices with exactly one spin up, ordered by which spin is up.
pub fn single_excitation_indices(n: usize) -> Vec<usize> {
    let full = (1usize << n) - 1;
    (1..=n).map(|i| full ^ (1 << (n - i))).collect()
}

/// Project a full-space Hamiltonian onto the single-excitation sector.
///
/// Errors if any entry couples basis states with different excitation
/// numbers (beyond the Hermiticity tolerance).
pub fn single_excitation_block<T: Scalar>(h: &CMatrix<T>) -> Result<CMatrix<T>> {
    let dim = h.dim();
    let n = match dim {
        4 => 2,
        8 => 3,
        _ => return Err(CoreError::UnsupportedDimension { dim }),
    };
    let tol = from_f64::<T>(HERMITICITY_TOL) * T::one().max(h.max_abs());
    let mut leakage = T::zero();
    for x in 0..dim {
        for y in 0..dim {
            let up_x = n - (x as u32).count_ones() as usize;
            let up_y = n - (y as u32).count_ones() as usize;
            if up_x != up_y {
                leakage = leakage.max(h.get(x, y).norm());
            }
        }
    }
    if leakage > tol {
        return Err(CoreError::NotExcitationConserving {
            max_leakage: leakage.to_f64().unwrap_or(f64::NAN),
        });
    }
    let idx = single_excitation_indices(n);
    let mut block = CMatrix::zeros(n)?;
    for (a, &x) in idx.iter().enumerate() {
        for (b, &y) in idx.iter().enumerate() {
            block.set_entry(a, b, h.get(x, y));
        }
    }
    Ok(block)
}

/// Lift a single-excitation sector vector back into the full space.
pub fn embed_single_excitation<T: Scalar>(sector: &CVector<T>, n: usize) -> Result<CVector<T>> {
    let idx = single_excitation_indices(n);
    if sector.dim() != idx.len() {
        return Err(CoreError::DimensionMismatch {
            expected: idx.len(),
            got: sector.dim(),
        });
    }
    let mut full = CVector::zeros(1 << n)?;
    for (a, &x) in idx.iter().enumerate() {
        full[x] = sector[a];
    }
    Ok(full)
}

/// Collective spin components `M_a = sum_i s_a^i / 2` and total spin `S^2`.
#[derive(Clone, Debug)]
pub struct CollectiveOperators<T: Scalar> {
    pub mx: CMatrix<T>,
    pub my: CMatrix<T>,
    pub mz: CMatrix<T>,
    pub s2: CMatrix<T>,
}

/// Build the collective operators for `n` spins (2 or 3).
pub fn collective_operators<T: Scalar>(n: usize) -> Result<CollectiveOperators<T>> {
    if !(2..=3).contains(&n) {
        return Err(CoreError::UnsupportedDimension { dim: n });
    }
    let dim = 1 << n;
    let half = from_f64::<T>(0.5);
    let mut mx = CMatrix::zeros(dim)?;
    let mut my = CMatrix::zeros(dim)?;
    let mut mz = CMatrix::zeros(dim)?;
    for x in 0..dim {
        let mut diag = T::zero();
        for i in 1..=n {
            let flipped = x ^ (1 << (n - i));
            // sx: |up><down| + |down><up|, sy: i|down><up| - i|up><down|.
            mx.set_entry(flipped, x, mx.get(flipped, x) + Complex::new(half, T::zero()));
            let sy_sign = if spin_is_up(x, i, n) { half } else { -half };
            my.set_entry(flipped, x, my.get(flipped, x) + Complex::new(T::zero(), sy_sign));
            diag += if spin_is_up(x, i, n) { half } else { -half };
        }
        mz.set_entry(x, x, Complex::new(diag, T::zero()));
    }
    let s2 = mx.matmul(&mx).add(&my.matmul(&my)).add(&mz.matmul(&mz));
    Ok(CollectiveOperators { mx, my, mz, s2 })
}

/// Reduced density matrix of the ordered spin pair `(i, j)` of a pure state.
///
/// The result is 4x4 in the basis `{uu, ud, du, dd}` of spins `i` then `j`.
pub fn pair_density_from_state<T: Scalar>(
    psi: &CVector<T>,
    n: usize,
    i: usize,
    j: usize,
) -> Result<CMatrix<T>> {
    if psi.dim() != 1 << n {
        return Err(CoreError::DimensionMismatch {
            expected: 1 << n,
            got: psi.dim(),
        });
    }
    if i == j || i < 1 || j < 1 || i > n || j > n {
        return Err(CoreError::InvalidParameter {
            name: "pair",
            value: j as f64,
            constraint: "spin labels must be distinct and within the chain",
        });
    }
    let dim = 1 << n;
    let pair_code = |x: usize| -> usize {
        let bi = usize::from(!spin_is_up(x, i, n));
        let bj = usize::from(!spin_is_up(x, j, n));
        (bi << 1) | bj
    };
    let rest_mask = {
        let mask_i = 1usize << (n - i);
        let mask_j = 1usize << (n - j);
        (dim - 1) ^ mask_i ^ mask_j
    };
    let mut rho = CMatrix::zeros(4)?;
    for x in 0..dim {
        for y in 0..dim {
            if (x & rest_mask) != (y & rest_mask) {
                continue;
            }
            let a = pair_code(x);
            let b = pair_code(y);
            let add = psi[x] * psi[y].conj();
            rho.set_entry(a, b, rho.get(a, b) + add);
        }
    }
    Ok(rho)
}
