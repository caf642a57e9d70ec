//! Dense complex matrices and vectors for spin-system dimensions (2, 3, 4, 8),
//! with a cyclic Jacobi eigensolver for Hermitian matrices.
//!
//! Storage is a fixed inline buffer sized for the largest supported dimension,
//! so none of the per-step kernels touch the allocator.

use crate::error::{CoreError, Result};
use crate::scalar::{from_f64, Scalar};
use num_complex::Complex;
use num_traits::{One, Zero};

/// Largest supported matrix dimension (three spins).
pub const MAX_DIM: usize = 8;

/// Default tolerance for Hermiticity checks, relative to the largest entry.
pub const HERMITICITY_TOL: f64 = 1e-12;

const SUPPORTED_DIMS: [usize; 4] = [2, 3, 4, 8];

fn check_dim(dim: usize) -> Result<()> {
    if SUPPORTED_DIMS.contains(&dim) {
        Ok(())
    } else {
        Err(CoreError::UnsupportedDimension { dim })
    }
}

/// Dense complex column vector of dimension 2, 3, 4, or 8.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVector<T: Scalar> {
    dim: usize,
    data: [Complex<T>; MAX_DIM],
}

impl<T: Scalar> CVector<T> {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: [Complex::zero(); MAX_DIM],
        })
    }

    /// Computational basis vector `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        let mut v = Self::zeros(dim)?;
        if index >= dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                got: index,
            });
        }
        v.data[index] = Complex::one();
        Ok(v)
    }

    pub fn from_slice(entries: &[Complex<T>]) -> Result<Self> {
        let mut v = Self::zeros(entries.len())?;
        v.data[..entries.len()].copy_from_slice(entries);
        Ok(v)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        let dim = self.dim;
        &mut self.data[..dim]
    }

    pub fn norm(&self) -> T {
        self.as_slice()
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr())
            .sqrt()
    }

    /// Rescale to unit norm. Errors on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= T::zero() {
            return Err(CoreError::NotNormalized {
                norm: n.to_f64().unwrap_or(0.0),
            });
        }
        let mut out = *self;
        for z in out.as_mut_slice() {
            *z = z.unscale(n);
        }
        Ok(out)
    }

    /// Inner product `<self|other>`, conjugate-linear in `self`.
    pub fn dot(&self, other: &Self) -> Complex<T> {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b)
    }

    /// Projector `|self><self|`.
    pub fn outer(&self) -> CMatrix<T> {
        let mut m = CMatrix::zeros(self.dim).expect("vector dim is supported");
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i * self.dim + j] = self.data[i] * self.data[j].conj();
            }
        }
        m
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        let mut out = *self;
        for z in out.as_mut_slice() {
            *z *= factor;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (z, o) in out.as_mut_slice().iter_mut().zip(other.as_slice()) {
            *z += *o;
        }
        out
    }
}

impl<T: Scalar> std::ops::Index<usize> for CVector<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, i: usize) -> &Complex<T> {
        &self.data[..self.dim][i]
    }
}

impl<T: Scalar> std::ops::IndexMut<usize> for CVector<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut Complex<T> {
        &mut self.data[..self.dim][i]
    }
}

/// Dense complex square matrix of dimension 2, 3, 4, or 8 (row-major).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMatrix<T: Scalar> {
    dim: usize,
    data: [Complex<T>; MAX_DIM * MAX_DIM],
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: [Complex::zero(); MAX_DIM * MAX_DIM],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m.data[i * dim + i] = Complex::one();
        }
        Ok(m)
    }

    /// Build from a row-major slice of `dim * dim` entries.
    pub fn from_rows(dim: usize, entries: &[Complex<T>]) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        if entries.len() != dim * dim {
            return Err(CoreError::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        m.data[..dim * dim].copy_from_slice(entries);
        Ok(m)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data[..self.dim * self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set_entry(&mut self, i: usize, j: usize, value: Complex<T>) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i * self.dim + j] = value;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.dim).expect("same dim");
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i * self.dim + j] = self.data[j * self.dim + i].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (z, o) in out.data.iter_mut().zip(other.data.iter()) {
            *z += *o;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (z, o) in out.data.iter_mut().zip(other.data.iter()) {
            *z -= *o;
        }
        out
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        let mut out = *self;
        for z in out.data[..self.dim * self.dim].iter_mut() {
            *z *= factor;
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n).expect("same dim");
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVector<T>) -> CVector<T> {
        debug_assert_eq!(self.dim, v.dim());
        let n = self.dim;
        let mut out = CVector::zeros(n).expect("same dim");
        for i in 0..n {
            let mut acc = Complex::zero();
            for j in 0..n {
                acc += self.data[i * n + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        let mut acc = Complex::zero();
        for i in 0..self.dim {
            acc += self.data[i * self.dim + i];
        }
        acc
    }

    /// Largest entry magnitude (max norm).
    pub fn max_abs(&self) -> T {
        self.as_slice()
            .iter()
            .fold(T::zero(), |acc, z| acc.max(z.norm()))
    }

    /// Largest entry magnitude of `A - A^dag`.
    pub fn hermiticity_asymmetry(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = self.data[i * n + j] - self.data[j * n + i].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// Hermiticity check with tolerance relative to `max(1, largest entry)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = T::one().max(self.max_abs());
        self.hermiticity_asymmetry() <= from_f64::<T>(tol) * scale
    }

    fn require_hermitian(&self) -> Result<()> {
        if self.is_hermitian(HERMITICITY_TOL) {
            Ok(())
        } else {
            Err(CoreError::NotHermitian {
                max_asymmetry: self.hermiticity_asymmetry().to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    /// True when every entry has a zero imaginary part (bit-exact).
    fn is_real(&self) -> bool {
        self.as_slice().iter().all(|z| z.im == T::zero())
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the unitary of eigenvectors
    /// as columns, so that `A = V diag(w) V^dag`.
    pub fn hermitian_eig(&self) -> Result<(Vec<T>, CMatrix<T>)> {
        let mut values = vec![T::zero(); self.dim];
        let mut vectors = Self::zeros(self.dim)?;
        self.hermitian_eig_into(&mut values, &mut vectors)?;
        Ok((values, vectors))
    }

    /// Allocation-free variant of [`Self::hermitian_eig`] for hot loops.
    pub fn hermitian_eig_into(&self, values: &mut [T], vectors: &mut CMatrix<T>) -> Result<()> {
        self.require_hermitian()?;
        if values.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: values.len(),
            });
        }
        vectors.dim = self.dim;
        if self.is_real() {
            self.jacobi_real(values, vectors);
        } else {
            self.jacobi_complex(values, vectors);
        }
        sort_eigenpairs(self.dim, values, vectors);
        Ok(())
    }

    /// Jacobi sweeps in complex arithmetic.
    fn jacobi_complex(&self, values: &mut [T], vectors: &mut CMatrix<T>) {
        let n = self.dim;
        let mut a = *self;
        // Symmetrize so rotations see an exactly Hermitian matrix.
        for i in 0..n {
            for j in (i + 1)..n {
                let m = (a.data[i * n + j] + a.data[j * n + i].conj())
                    .scale(from_f64::<T>(0.5));
                a.data[i * n + j] = m;
                a.data[j * n + i] = m.conj();
            }
            a.data[i * n + i] = Complex::new(a.data[i * n + i].re, T::zero());
        }
        *vectors = Self::identity(n).expect("supported dim");
        let stop = off_diag_stop_threshold(&a);
        for _sweep in 0..MAX_JACOBI_SWEEPS {
            if off_diag_sq(&a) <= stop {
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a.data[p * n + q];
                    let mag = apq.norm();
                    if mag <= T::min_positive_value() {
                        a.data[p * n + q] = Complex::zero();
                        a.data[q * n + p] = Complex::zero();
                        continue;
                    }
                    // Phase of the off-diagonal entry and rotation angle.
                    let phase = apq.unscale(mag);
                    let app = a.data[p * n + p].re;
                    let aqq = a.data[q * n + q].re;
                    let (c, s) = jacobi_angle(app, aqq, mag);
                    let sp = phase.scale(s); // s * e^{i beta}
                    // A <- U^dag A U with U[[p,q],[p,q]] = [[c, -s e^{i b}], [s e^{-i b}, c]]
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = a.data[k * n + p];
                        let akq = a.data[k * n + q];
                        let new_kp = akp.scale(c) + akq * sp.conj();
                        let new_kq = akq.scale(c) - akp * sp;
                        a.data[k * n + p] = new_kp;
                        a.data[p * n + k] = new_kp.conj();
                        a.data[k * n + q] = new_kq;
                        a.data[q * n + k] = new_kq.conj();
                    }
                    let two = from_f64::<T>(2.0);
                    let new_pp = app * c * c + two * mag * s * c + aqq * s * s;
                    let new_qq = app * s * s - two * mag * s * c + aqq * c * c;
                    a.data[p * n + p] = Complex::new(new_pp, T::zero());
                    a.data[q * n + q] = Complex::new(new_qq, T::zero());
                    a.data[p * n + q] = Complex::zero();
                    a.data[q * n + p] = Complex::zero();
                    for k in 0..n {
                        let vkp = vectors.data[k * n + p];
                        let vkq = vectors.data[k * n + q];
                        vectors.data[k * n + p] = vkp.scale(c) + vkq * sp.conj();
                        vectors.data[k * n + q] = vkq.scale(c) - vkp * sp;
                    }
                }
            }
        }
        for i in 0..n {
            values[i] = a.data[i * n + i].re;
        }
    }

    /// Jacobi sweeps in real arithmetic for real symmetric input.
    fn jacobi_real(&self, values: &mut [T], vectors: &mut CMatrix<T>) {
        let n = self.dim;
        let mut a = [T::zero(); MAX_DIM * MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.data[i * n + j].re;
            }
        }
        // Symmetrize exactly.
        for i in 0..n {
            for j in (i + 1)..n {
                let m = (a[i * n + j] + a[j * n + i]) * from_f64::<T>(0.5);
                a[i * n + j] = m;
                a[j * n + i] = m;
            }
        }
        let mut v = [T::zero(); MAX_DIM * MAX_DIM];
        for i in 0..n {
            v[i * n + i] = T::one();
        }
        let mut scale_sq = T::zero();
        for i in 0..n {
            for j in 0..n {
                scale_sq += a[i * n + j] * a[i * n + j];
            }
        }
        let eps = T::epsilon();
        let stop = scale_sq * eps * eps * from_f64::<T>((MAX_DIM * MAX_DIM) as f64);
        for _sweep in 0..MAX_JACOBI_SWEEPS {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[i * n + j] * a[i * n + j];
                }
            }
            if off + off <= stop {
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let mag = apq.abs();
                    let sign = if apq >= T::zero() { T::one() } else { -T::one() };
                    let (c, s0) = jacobi_angle(a[p * n + p], a[q * n + q], mag);
                    let s = s0 * sign;
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        let new_kp = akp * c + akq * s;
                        let new_kq = akq * c - akp * s;
                        a[k * n + p] = new_kp;
                        a[p * n + k] = new_kp;
                        a[k * n + q] = new_kq;
                        a[q * n + k] = new_kq;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let two = from_f64::<T>(2.0);
                    a[p * n + p] = app * c * c + two * apq * s * c + aqq * s * s;
                    a[q * n + q] = app * s * s - two * apq * s * c + aqq * c * c;
                    a[p * n + q] = T::zero();
                    a[q * n + p] = T::zero();
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = vkp * c + vkq * s;
                        v[k * n + q] = vkq * c - vkp * s;
                    }
                }
            }
        }
        for i in 0..n {
            values[i] = a[i * n + i];
            for j in 0..n {
                vectors.data[i * n + j] = Complex::new(v[i * n + j], T::zero());
            }
        }
    }
}

const MAX_JACOBI_SWEEPS: usize = 50;

/// Stable Jacobi rotation angle for diagonal entries `(app, aqq)` and
/// off-diagonal magnitude `mag > 0`. Returns `(cos, sin)` with `cos > 0`;
/// the smaller-magnitude tangent root keeps the rotation well conditioned.
#[inline]
fn jacobi_angle<T: Scalar>(app: T, aqq: T, mag: T) -> (T, T) {
    let zeta = (app - aqq) / (mag + mag);
    let root = (zeta * zeta + T::one()).sqrt();
    let denom = if zeta >= T::zero() {
        zeta + root
    } else {
        zeta - root
    };
    let t = denom.recip();
    let c = (t * t + T::one()).sqrt().recip();
    (c, t * c)
}

/// Cyclic Jacobi specialized to a real symmetric 3x3 matrix, for per-step
/// propagation in tight trajectory loops. Same rotations and stopping rule
/// as `hermitian_eig`, but on plain arrays, without sorting the pairs.
/// Reads the upper triangle of `m`; returns eigenvalues and the orthogonal
/// eigenvector matrix `v[row][column]`.
pub(crate) fn sym3_eig<T: Scalar>(m: &[[T; 3]; 3]) -> ([T; 3], [[T; 3]; 3]) {
    let mut a = *m;
    a[1][0] = a[0][1];
    a[2][0] = a[0][2];
    a[2][1] = a[1][2];
    let mut v = [[T::zero(); 3]; 3];
    v[0][0] = T::one();
    v[1][1] = T::one();
    v[2][2] = T::one();
    let mut scale_sq = T::zero();
    for row in &a {
        for &x in row {
            scale_sq += x * x;
        }
    }
    let eps = T::epsilon();
    let stop = scale_sq * eps * eps * from_f64::<T>(9.0);
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off + off <= stop {
            break;
        }
        for &(p, q, r) in &[(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)] {
            let apq = a[p][q];
            if apq == T::zero() {
                continue;
            }
            let mag = apq.abs();
            let sign = if apq >= T::zero() { T::one() } else { -T::one() };
            let (c, s0) = jacobi_angle(a[p][p], a[q][q], mag);
            let s = s0 * sign;
            let arp = a[r][p];
            let arq = a[r][q];
            let new_rp = arp * c + arq * s;
            let new_rq = arq * c - arp * s;
            a[r][p] = new_rp;
            a[p][r] = new_rp;
            a[r][q] = new_rq;
            a[q][r] = new_rq;
            let app = a[p][p];
            let aqq = a[q][q];
            let two = from_f64::<T>(2.0);
            a[p][p] = app * c * c + two * apq * s * c + aqq * s * s;
            a[q][q] = app * s * s - two * apq * s * c + aqq * c * c;
            a[p][q] = T::zero();
            a[q][p] = T::zero();
            for row in &mut v {
                let vp = row[p];
                let vq = row[q];
                row[p] = vp * c + vq * s;
                row[q] = vq * c - vp * s;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

fn off_diag_sq<T: Scalar>(a: &CMatrix<T>) -> T {
    let n = a.dim;
    let mut off = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            off += a.data[i * n + j].norm_sqr();
        }
    }
    off + off
}

fn off_diag_stop_threshold<T: Scalar>(a: &CMatrix<T>) -> T {
    let mut total = T::zero();
    for z in a.as_slice() {
        total += z.norm_sqr();
    }
    let eps = T::epsilon();
    total * eps * eps * from_f64::<T>((MAX_DIM * MAX_DIM) as f64)
}

/// Sort eigenvalues ascending, permuting eigenvector columns to match.
fn sort_eigenpairs<T: Scalar>(n: usize, values: &mut [T], vectors: &mut CMatrix<T>) {
    let mut order: [usize; MAX_DIM] = [0, 1, 2, 3, 4, 5, 6, 7];
    order[..n].sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite eigenvalues"));
    let old_vals: [T; MAX_DIM] = {
        let mut buf = [T::zero(); MAX_DIM];
        buf[..n].copy_from_slice(values);
        buf
    };
    let old_vecs = vectors.data;
    for (new_col, &old_col) in order[..n].iter().enumerate() {
        values[new_col] = old_vals[old_col];
        for row in 0..n {
            vectors.data[row * n + new_col] = old_vecs[row * n + old_col];
        }
    }
}

/// Unitary time-step propagator `exp(-i H dt)` of a Hermitian generator,
/// computed through the eigendecomposition of `H`.
pub fn unitary_propagator<T: Scalar>(h: &CMatrix<T>, dt: T) -> Result<CMatrix<T>> {
    let n = h.dim();
    let mut values = [T::zero(); MAX_DIM];
    let mut vectors = CMatrix::zeros(n)?;
    h.hermitian_eig_into(&mut values[..n], &mut vectors)?;
    let mut u = CMatrix::zeros(n)?;
    // U = V diag(e^{-i w dt}) V^dag
    let mut phases = [Complex::<T>::zero(); MAX_DIM];
    for (k, phase) in phases[..n].iter_mut().enumerate() {
        let angle = -values[k] * dt;
        let (s, c) = angle.sin_cos();
        *phase = Complex::new(c, s);
    }
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex::zero();
            for k in 0..n {
                acc += vectors.data[i * n + k] * phases[k] * vectors.data[j * n + k].conj();
            }
            u.data[i * n + j] = acc;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix<f64> {
        let mut m = CMatrix::zeros(dim).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let z = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                m.data[i * dim + j] = z;
            }
        }
        let adj = m.adjoint();
        m.add(&adj).scale(c(0.5, 0.0))
    }

    #[test]
    fn rejects_unsupported_dimensions() {
        for dim in [0, 1, 5, 6, 7, 9, 16] {
            assert!(matches!(
                CMatrix::<f64>::zeros(dim),
                Err(CoreError::UnsupportedDimension { .. })
            ));
        }
    }

    #[test]
    fn fast_symmetric_3x3_path_matches_the_general_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let mut m = [[0.0f64; 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    let x = 4.0 * (rng.gen::<f64>() - 0.5);
                    m[i][j] = x;
                    m[j][i] = x;
                }
            }
            let (vals, v) = sym3_eig(&m);
            // Orthonormal columns.
            for a in 0..3 {
                for b in 0..3 {
                    let dot: f64 = (0..3).map(|i| v[i][a] * v[i][b]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-13);
                }
            }
            // Reconstruction m = v diag(vals) v^T.
            for i in 0..3 {
                for j in 0..3 {
                    let rec: f64 = (0..3).map(|k| v[i][k] * vals[k] * v[j][k]).sum();
                    assert!((rec - m[i][j]).abs() < 1e-12);
                }
            }
            // Spectrum agrees with the general Hermitian solver.
            let general = CMatrix::from_fn(3, |i, j| c(m[i][j], 0.0)).unwrap();
            let (gvals, _) = general.hermitian_eig().unwrap();
            let mut sorted = vals;
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for k in 0..3 {
                assert_relative_eq!(sorted[k], gvals[k], epsilon = 1e-12, max_relative = 1e-12);
            }
        }
        // Degenerate input: the identity stays put.
        let (vals, v) = sym3_eig(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(vals, [1.0, 1.0, 1.0]);
        assert_eq!(v, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn pauli_z_eigendecomposition() {
        let sz = CMatrix::from_rows(2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
            .unwrap();
        let (vals, vecs) = sz.hermitian_eig().unwrap();
        assert_relative_eq!(vals[0], -1.0, max_relative = 1e-14);
        assert_relative_eq!(vals[1], 1.0, max_relative = 1e-14);
        // Ascending order puts |1> (eigenvalue -1) first; row-major
        // entries 0 and 2 form the first column.
        assert_relative_eq!(vecs.as_slice()[0].norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(vecs.as_slice()[2].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pauli_x_eigendecomposition() {
        let sx = CMatrix::from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let (vals, vecs) = sx.hermitian_eig().unwrap();
        assert_relative_eq!(vals[0], -1.0, max_relative = 1e-14);
        assert_relative_eq!(vals[1], 1.0, max_relative = 1e-14);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        // Columns are (1, -1)/sqrt(2) and (1, 1)/sqrt(2) up to global phase.
        let minus = [vecs.as_slice()[0], vecs.as_slice()[2]];
        let plus = [vecs.as_slice()[1], vecs.as_slice()[3]];
        let overlap_minus = (minus[0] * inv_sqrt2 - minus[1] * inv_sqrt2).norm();
        let overlap_plus = (plus[0] * inv_sqrt2 + plus[1] * inv_sqrt2).norm();
        assert_relative_eq!(overlap_minus, 1.0, epsilon = 1e-13);
        assert_relative_eq!(overlap_plus, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn random_hermitian_eig_residuals_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &dim in &[2usize, 3, 4, 8] {
            for _ in 0..20 {
                let a = random_hermitian(dim, &mut rng);
                let (vals, vecs) = a.hermitian_eig().unwrap();
                for k in 0..dim {
                    assert!(k == 0 || vals[k] >= vals[k - 1]);
                    // Residual |A v - w v|.
                    let mut resid: f64 = 0.0;
                    for i in 0..dim {
                        let mut av = c(0.0, 0.0);
                        for j in 0..dim {
                            av += a.as_slice()[i * dim + j] * vecs.as_slice()[j * dim + k];
                        }
                        resid = resid.max((av - vecs.as_slice()[i * dim + k] * vals[k]).norm());
                    }
                    assert!(resid < 1e-12, "residual {resid} at dim {dim}");
                }
                let gram = vecs.adjoint().matmul(&vecs);
                let id = CMatrix::identity(dim).unwrap();
                assert!(gram.sub(&id).max_abs() < 1e-12);
                // Reconstruction A = V diag(w) V^dag.
                let mut rebuilt = CMatrix::zeros(dim).unwrap();
                for i in 0..dim {
                    for j in 0..dim {
                        let mut acc = c(0.0, 0.0);
                        for k in 0..dim {
                            acc += vecs.as_slice()[i * dim + k]
                                * vals[k]
                                * vecs.as_slice()[j * dim + k].conj();
                        }
                        rebuilt.data[i * dim + j] = acc;
                    }
                }
                assert!(rebuilt.sub(&a).max_abs() < 1e-11);
            }
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected_with_asymmetry() {
        let m = CMatrix::from_rows(2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
            .unwrap();
        match m.hermitian_eig() {
            Err(CoreError::NotHermitian { max_asymmetry }) => {
                assert_relative_eq!(max_asymmetry, 0.5, max_relative = 1e-12);
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn propagator_of_zero_hamiltonian_is_identity() {
        let h = CMatrix::<f64>::zeros(4).unwrap();
        let u = unitary_propagator(&h, 0.37).unwrap();
        assert!(u.sub(&CMatrix::identity(4).unwrap()).max_abs() < 1e-15);
    }

    #[test]
    fn propagator_of_half_pauli_z_at_pi() {
        // H = sigma_z / 2, dt = pi: U = diag(e^{-i pi/2}, e^{+i pi/2}) = diag(-i, i).
        let h = CMatrix::from_rows(2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)])
            .unwrap();
        let u = unitary_propagator(&h, std::f64::consts::PI).unwrap();
        assert!((u.as_slice()[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((u.as_slice()[3] - c(0.0, 1.0)).norm() < 1e-14);
        assert!(u.as_slice()[1].norm() < 1e-15);
        assert!(u.as_slice()[2].norm() < 1e-15);
    }

    #[test]
    fn propagator_is_unitary_and_a_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &dim in &[2usize, 3, 4, 8] {
            let h = random_hermitian(dim, &mut rng).scale(c(3.0, 0.0));
            let id = CMatrix::identity(dim).unwrap();
            let u = unitary_propagator(&h, 0.83).unwrap();
            assert!(u.adjoint().matmul(&u).sub(&id).max_abs() < 1e-12);
            let ua = unitary_propagator(&h, 0.31).unwrap();
            let ub = unitary_propagator(&h, 0.52).unwrap();
            assert!(ua.matmul(&ub).sub(&u).max_abs() < 1e-11);
        }
    }

    #[test]
    fn real_symmetric_path_matches_complex_path() {
        // A diagonal-unitary conjugate of a real symmetric matrix exercises
        // the complex path while sharing the real path's spectrum.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let mut m = CMatrix::<f64>::zeros(3).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    m.data[i * 3 + j] = c(rng.gen::<f64>() - 0.5, 0.0);
                }
            }
            let adj = m.adjoint();
            let real_sym = m.add(&adj).scale(c(0.5, 0.0));
            // Conjugate by a diagonal unitary: eigenvalues unchanged, matrix
            // becomes genuinely complex, so the complex path runs.
            let d = CMatrix::from_fn(3, |i, j| {
                if i == j {
                    let phi = 0.7 * (i as f64 + 1.0);
                    c(phi.cos(), phi.sin())
                } else {
                    c(0.0, 0.0)
                }
            })
            .unwrap();
            let rotated = d.adjoint().matmul(&real_sym).matmul(&d);
            let (vals_real, _) = real_sym.hermitian_eig().unwrap();
            let (vals_cplx, _) = rotated.hermitian_eig().unwrap();
            for k in 0..3 {
                assert_relative_eq!(vals_real[k], vals_cplx[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_spectrum_is_handled() {
        let h = CMatrix::from_rows(
            4,
            &[
                c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.5),
                c(0.0, 0.0), c(0.0, 0.0), c(0.5, -0.5), c(1.0, 0.0),
            ],
        )
        .unwrap();
        let (vals, vecs) = h.hermitian_eig().unwrap();
        let expected = [1.0 - 0.5_f64.sqrt(), 1.0 + 0.5_f64.sqrt(), 2.0, 2.0];
        let mut sorted = expected;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for k in 0..4 {
            assert_relative_eq!(vals[k], sorted[k], epsilon = 1e-13);
        }
        let gram = vecs.adjoint().matmul(&vecs);
        assert!(gram.sub(&CMatrix::identity(4).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn vector_basics() {
        let e1 = CVector::<f64>::basis(4, 1).unwrap();
        assert_relative_eq!(e1.norm(), 1.0);
        let v = CVector::from_slice(&[c(3.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert_relative_eq!(v.norm(), 5.0);
        let u = v.normalized().unwrap();
        assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-15);
        let p = u.outer();
        assert_relative_eq!(p.trace().re, 1.0, epsilon = 1e-15);
        assert!(p.is_hermitian(1e-12));
        // <v|v> = |v|^2, <e1|e1> real.
        assert_relative_eq!(v.dot(&v).re, 25.0, epsilon = 1e-12);
        assert_relative_eq!(v.dot(&v).im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn propagator_rejects_non_hermitian_generator() {
        let m = CMatrix::from_rows(2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert!(matches!(
            unitary_propagator(&m, 0.1),
            Err(CoreError::NotHermitian { .. })
        ));
    }
}
