//! Dense symmetric-matrix kernels: Cholesky, PSD square root, spectral
//! and diagonal extremes.
//!
//! The eigensolvers are the classic EISPACK routines (tred2/tql2 for
//! symmetric input, orthes/hqr for the general eigenvalues needed by the
//! Markov spectral gap), ported for plain row-major `f64` storage. Desk
//! scale only: dimensions up to a few hundred.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpectralError {
    /// A Cholesky pivot fell at or below the PSD tolerance.
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: OrderedF64 },
    /// An eigenvalue fell below `-tol_psd`.
    #[error("matrix is not positive semi-definite (lambda_min {lambda_min})")]
    NotPsd { lambda_min: OrderedF64 },
    /// Input dimensions disagree or data length is wrong.
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
    /// The iterative eigensolver hit its sweep limit.
    #[error("eigensolver failed to converge")]
    NoConvergence,
}

/// `f64` wrapper so error variants can derive `Eq` (values are only ever
/// compared in tests, never NaN).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedF64(pub f64);
impl Eq for OrderedF64 {}
impl core::fmt::Display for OrderedF64 {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Plain dense row-major matrix. Used for Cholesky factors, sample
/// blocks (rows = draws), and transition matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, SpectralError> {
        if data.len() != rows * cols {
            return Err(SpectralError::Dimension("row data length"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `self * x` for a square or rectangular matrix.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            *o = acc;
        }
    }
}

/// Dense symmetric real matrix with a PSD flag.
///
/// Symmetry is exact by construction: every constructor either mirrors
/// the lower triangle or averages `(a_ij + a_ji) / 2`. The `psd` flag
/// records that the matrix was built by a PSD-preserving path or passed
/// [`SymMatrix::validate_psd`]; it is advisory, the rooting routines
/// re-check eigenvalues regardless.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
    psd: bool,
}

impl SymMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
            psd: true,
        };
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
            psd: true,
        }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
            psd: diag.iter().all(|&v| v >= 0.0),
        };
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * dim + i] = v;
        }
        m
    }

    /// Build from row-major entries, enforcing exact symmetry by
    /// averaging mirror pairs. Rejects NaN and gross asymmetry.
    pub fn from_entries(dim: usize, entries: &[f64]) -> Result<Self, SpectralError> {
        if entries.len() != dim * dim {
            return Err(SpectralError::Dimension("entries length != dim^2"));
        }
        let scale = entries.iter().fold(0.0f64, |a, &v| a.max(libm::fabs(v)));
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                if a.is_nan() || b.is_nan() {
                    return Err(SpectralError::Dimension("NaN entry"));
                }
                if libm::fabs(a - b) > 1e-8 * (1.0 + scale) {
                    return Err(SpectralError::Dimension("asymmetric input"));
                }
                let v = 0.5 * (a + b);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Ok(SymMatrix { dim, data, psd: false })
    }

    /// 2x2 helper used all over the tests.
    pub fn from_2x2(a: f64, b: f64, d: f64) -> Self {
        SymMatrix {
            dim: 2,
            data: vec![a, b, b, d],
            psd: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Set the `(i, j)` and `(j, i)` entries together; drops the PSD flag.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
        self.psd = false;
    }

    pub fn psd_flag(&self) -> bool {
        self.psd
    }


    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(libm::fabs(v)))
    }

    /// Scale-aware PSD tolerance: `1e-10 * dim * max_abs`. Monte Carlo
    /// covariance estimates sit on the PSD boundary, so the rooting
    /// routines treat eigenvalues above `-tol_psd` as nonnegative.
    pub fn tol_psd(&self) -> f64 {
        1e-10 * self.dim as f64 * self.max_abs()
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        SymMatrix {
            dim: self.dim,
            data,
            psd: self.psd && other.psd,
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        SymMatrix {
            dim: self.dim,
            data,
            psd: false,
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
            psd: self.psd && c >= 0.0,
        }
    }

    /// `self + c * I`.
    pub fn add_scaled_identity(&self, c: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.dim {
            out.data[i * self.dim + i] += c;
        }
        out.psd = self.psd && c >= 0.0;
        out
    }

    pub fn add_assign(&mut self, other: &SymMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        self.psd = self.psd && other.psd;
    }

    /// Rank-one update `self += w * x * x^T`.
    pub fn add_outer(&mut self, x: &[f64], w: f64) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            let xi = x[i] * w;
            for j in 0..self.dim {
                self.data[i * self.dim + j] += xi * x[j];
            }
        }
        self.psd = self.psd && w >= 0.0;
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            out[i] = acc;
        }
    }

    /// Re-check PSD-ness from the spectrum and update the flag.
    pub fn validate_psd(&mut self) -> bool {
        let tol = self.tol_psd();
        let stats = spectral_stats(self);
        self.psd = stats.lambda_min >= -tol;
        self.psd
    }

    /// Operator norm of self (largest |eigenvalue|).
    pub fn op_norm(&self) -> f64 {
        spectral_stats(self).op_norm
    }
}

/// Eigenvalue and diagonal extremes of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralStats {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub op_norm: f64,
}

/// Eigen decomposition of a symmetric matrix: `m = V diag(values) V^T`,
/// eigenvalues ascending, eigenvectors in the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Householder reduction to tridiagonal form followed by implicit-shift
/// QL sweeps (EISPACK tred2 + tql2).
pub fn sym_eigen(m: &SymMatrix) -> Result<SymEigen, SpectralError> {
    let n = m.dim;
    let mut z = m.data.clone(); // becomes the eigenvector matrix
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    if n == 0 {
        return Ok(SymEigen {
            values: d,
            vectors: Matrix::zeros(0, 0),
        });
    }

    // tred2: reduce to tridiagonal, accumulating transformations in z.
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        let mut scale = 0.0;
        if l > 0 {
            for k in 0..=l {
                scale += libm::fabs(z[i * n + k]);
            }
            if scale == 0.0 {
                e[i] = z[i * n + l];
            } else {
                for k in 0..=l {
                    z[i * n + k] /= scale;
                    h += z[i * n + k] * z[i * n + k];
                }
                let mut f = z[i * n + l];
                let g = if f >= 0.0 { -libm::sqrt(h) } else { libm::sqrt(h) };
                e[i] = scale * g;
                h -= f * g;
                z[i * n + l] = f - g;
                f = 0.0;
                for j in 0..=l {
                    z[j * n + i] = z[i * n + j] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[j * n + k] * z[i * n + k];
                    }
                    for k in (j + 1)..=l {
                        g += z[k * n + j] * z[i * n + k];
                    }
                    e[j] = g / h;
                    f += e[j] * z[i * n + j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = z[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[j * n + k] -= f * e[k] + g * z[i * n + k];
                    }
                }
            }
        } else {
            e[i] = z[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        let l = i;
        if d[i] != 0.0 {
            for j in 0..l {
                let mut g = 0.0;
                for k in 0..l {
                    g += z[i * n + k] * z[k * n + j];
                }
                for k in 0..l {
                    z[k * n + j] -= g * z[k * n + i];
                }
            }
        }
        d[i] = z[i * n + i];
        z[i * n + i] = 1.0;
        for j in 0..l {
            z[j * n + i] = 0.0;
            z[i * n + j] = 0.0;
        }
    }

    // tql2: implicit-shift QL iterations on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = libm::fabs(d[mm]) + libm::fabs(d[mm + 1]);
                if libm::fabs(e[mm]) <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(SpectralError::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            let sign_r = if g >= 0.0 { libm::fabs(r) } else { -libm::fabs(r) };
            g = d[mm] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            for i in (l..mm).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
            }
            // r == 0 only on the early break above; retry the sweep
            if r == 0.0 {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }

    // sort ascending, permuting eigenvector columns alongside
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, z[row * n + old_col]);
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Eigenvalue extremes, diagonal extremes, and operator norm.
pub fn spectral_stats(m: &SymMatrix) -> SpectralStats {
    let eig = sym_eigen(m).expect("symmetric eigensolve always succeeds");
    let n = m.dim;
    let lambda_min = if n == 0 { 0.0 } else { eig.values[0] };
    let lambda_max = if n == 0 { 0.0 } else { eig.values[n - 1] };
    let mut d_min = f64::INFINITY;
    let mut d_max = f64::NEG_INFINITY;
    for i in 0..n {
        let v = m.get(i, i);
        d_min = d_min.min(v);
        d_max = d_max.max(v);
    }
    if n == 0 {
        d_min = 0.0;
        d_max = 0.0;
    }
    SpectralStats {
        lambda_min,
        lambda_max,
        d_min,
        d_max,
        op_norm: libm::fabs(lambda_min).max(libm::fabs(lambda_max)),
    }
}

/// Cholesky factor `L` (lower triangular, `L L^T = m`).
///
/// Fails with [`SpectralError::NotPositiveDefinite`] when a pivot is at
/// or below the scale-aware tolerance.
pub fn cholesky_factor(m: &SymMatrix) -> Result<Matrix, SpectralError> {
    let n = m.dim;
    let tol = m.tol_psd();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = m.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            pivot -= v * v;
        }
        if pivot <= tol {
            return Err(SpectralError::NotPositiveDefinite {
                index: j,
                pivot: OrderedF64(pivot),
            });
        }
        let root = libm::sqrt(pivot);
        l.set(j, j, root);
        for i in (j + 1)..n {
            let mut acc = m.get(i, j);
            for k in 0..j {
                acc -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, acc / root);
        }
    }
    Ok(l)
}

/// Symmetric PSD square root `s` with `s s = m`.
///
/// Eigenvalues in `[-tol_psd, 0)` are clamped to 0 before rooting, so
/// Monte Carlo covariance estimates on the PSD boundary are accepted.
pub fn psd_sqrt(m: &SymMatrix) -> Result<SymMatrix, SpectralError> {
    let tol = m.tol_psd();
    let eig = sym_eigen(m)?;
    if let Some(&lmin) = eig.values.first() {
        if lmin < -tol {
            return Err(SpectralError::NotPsd {
                lambda_min: OrderedF64(lmin),
            });
        }
    }
    let n = m.dim;
    let roots: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v < 0.0 { 0.0 } else { libm::sqrt(v) })
        .collect();
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.0;
            for k in 0..n {
                acc += eig.vectors.get(i, k) * roots[k] * eig.vectors.get(j, k);
            }
            out.data[i * n + j] = acc;
            out.data[j * n + i] = acc;
        }
    }
    out.psd = true;
    Ok(out)
}

/// Inverse of a positive definite symmetric matrix via its Cholesky
/// factorization.
pub fn sym_inverse(m: &SymMatrix) -> Result<SymMatrix, SpectralError> {
    let n = m.dim;
    let l = cholesky_factor(m)?;
    let mut inv = SymMatrix::zeros(n);
    let mut col = vec![0.0f64; n];
    for rhs in 0..n {
        // forward substitution L y = e_rhs
        for i in 0..n {
            let mut acc = if i == rhs { 1.0 } else { 0.0 };
            for k in 0..i {
                acc -= l.get(i, k) * col[k];
            }
            col[i] = acc / l.get(i, i);
        }
        // back substitution L^T x = y
        for i in (0..n).rev() {
            let mut acc = col[i];
            for k in (i + 1)..n {
                acc -= l.get(k, i) * col[k];
            }
            col[i] = acc / l.get(i, i);
        }
        for i in 0..n {
            inv.data[i * n + rhs] = col[i];
        }
    }
    // symmetrize away round-off
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv.data[i * n + j] + inv.data[j * n + i]);
            inv.data[i * n + j] = v;
            inv.data[j * n + i] = v;
        }
    }
    inv.psd = true;
    Ok(inv)
}

/// All eigenvalues of a general square real matrix as `(re, im)` pairs,
/// via orthogonal Hessenberg reduction and the Francis double-shift QR
/// sweep (EISPACK orthes + hqr, eigenvalues only).
///
/// Used for the `|lambda_2|` of row-stochastic transition matrices; the
/// returned order is unspecified.
pub fn eigenvalues_general(a: &Matrix) -> Result<Vec<(f64, f64)>, SpectralError> {
    if a.rows() != a.cols() {
        return Err(SpectralError::Dimension("square matrix required"));
    }
    let n = a.rows();
    let mut h = a.data.clone();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![(h[0], 0.0)]);
    }

    // orthes: Householder reduction to upper Hessenberg form.
    for m in 1..n.saturating_sub(1) {
        let mut scale = 0.0;
        for i in m..n {
            scale += libm::fabs(h[i * n + m - 1]);
        }
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        let mut ort = vec![0.0f64; n];
        for i in (m..n).rev() {
            ort[i] = h[i * n + m - 1] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = libm::sqrt(hsum);
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * h[i * n + j];
            }
            f /= hsum;
            for i in m..n {
                h[i * n + j] -= f * ort[i];
            }
        }
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * h[i * n + j];
            }
            f /= hsum;
            for j in m..n {
                h[i * n + j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m * n + m - 1] = scale * g;
    }

    // hqr: Francis double-shift QR on the Hessenberg matrix.
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += libm::fabs(h[i * n + j]);
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0f64;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // look for a small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let s = libm::fabs(h[(l - 1) as usize * n + (l - 1) as usize])
                    + libm::fabs(h[l as usize * n + l as usize]);
                let s = if s == 0.0 { anorm } else { s };
                if libm::fabs(h[l as usize * n + (l - 1) as usize]) <= f64::EPSILON * s {
                    h[l as usize * n + (l - 1) as usize] = 0.0;
                    break;
                }
                l -= 1;
            }
            let x = h[nn as usize * n + nn as usize];
            if l == nn {
                // one real root found
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let y = h[(nn - 1) as usize * n + (nn - 1) as usize];
            let w = h[nn as usize * n + (nn - 1) as usize] * h[(nn - 1) as usize * n + nn as usize];
            if l == nn - 1 {
                // two roots found
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = libm::sqrt(libm::fabs(q));
                let x = x + t;
                if q >= 0.0 {
                    let z = p + if p >= 0.0 { z } else { -z };
                    wr[(nn - 1) as usize] = x + z;
                    wr[nn as usize] = if z != 0.0 { x - w / z } else { x + z };
                    wi[(nn - 1) as usize] = 0.0;
                    wi[nn as usize] = 0.0;
                } else {
                    wr[(nn - 1) as usize] = x + p;
                    wr[nn as usize] = x + p;
                    wi[(nn - 1) as usize] = -z;
                    wi[nn as usize] = z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(SpectralError::NoConvergence);
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its != 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 0..=nn as usize {
                    h[i * n + i] -= x;
                }
                let s = libm::fabs(h[nn as usize * n + (nn - 1) as usize])
                    + libm::fabs(h[(nn - 1) as usize * n + (nn - 2) as usize]);
                y = 0.75 * s;
                x = y;
                w = -0.4375 * s * s;
            }
            its += 1;
            // form shift and look for two consecutive small subdiagonals
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
            while m >= l {
                let z = h[m as usize * n + m as usize];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h[(m + 1) as usize * n + m as usize]
                    + h[m as usize * n + (m + 1) as usize];
                q = h[(m + 1) as usize * n + (m + 1) as usize] - z - rr - ss;
                r = h[(m + 2) as usize * n + (m + 1) as usize];
                let s = libm::fabs(p) + libm::fabs(q) + libm::fabs(r);
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = libm::fabs(h[m as usize * n + (m - 1) as usize])
                    * (libm::fabs(q) + libm::fabs(r));
                let v = libm::fabs(p)
                    * (libm::fabs(h[(m - 1) as usize * n + (m - 1) as usize])
                        + libm::fabs(z)
                        + libm::fabs(h[(m + 1) as usize * n + (m + 1) as usize]));
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                h[i as usize * n + (i - 2) as usize] = 0.0;
                if i != m + 2 {
                    h[i as usize * n + (i - 3) as usize] = 0.0;
                }
            }
            // double QR step on rows l..nn, columns m..nn
            let mut k = m;
            while k <= nn - 1 {
                if k != m {
                    p = h[k as usize * n + (k - 1) as usize];
                    q = h[(k + 1) as usize * n + (k - 1) as usize];
                    r = if k != nn - 1 {
                        h[(k + 2) as usize * n + (k - 1) as usize]
                    } else {
                        0.0
                    };
                    x = libm::fabs(p) + libm::fabs(q) + libm::fabs(r);
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = {
                    let s = libm::sqrt(p * p + q * q + r * r);
                    if p >= 0.0 {
                        s
                    } else {
                        -s
                    }
                };
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            h[k as usize * n + (k - 1) as usize] =
                                -h[k as usize * n + (k - 1) as usize];
                        }
                    } else {
                        h[k as usize * n + (k - 1) as usize] = -s * x;
                    }
                    p += s;
                    let x2 = p / s;
                    let y2 = q / s;
                    let z2 = r / s;
                    q /= p;
                    r /= p;
                    // row modification
                    for j in k as usize..n {
                        let mut pp = h[k as usize * n + j] + q * h[(k + 1) as usize * n + j];
                        if k != nn - 1 {
                            pp += r * h[(k + 2) as usize * n + j];
                            h[(k + 2) as usize * n + j] -= pp * z2;
                        }
                        h[(k + 1) as usize * n + j] -= pp * y2;
                        h[k as usize * n + j] -= pp * x2;
                    }
                    // column modification
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in 0..=(mmin as usize) {
                        let mut pp =
                            x2 * h[i * n + k as usize] + y2 * h[i * n + (k + 1) as usize];
                        if k != nn - 1 {
                            pp += z2 * h[i * n + (k + 2) as usize];
                            h[i * n + (k + 2) as usize] -= pp * r;
                        }
                        h[i * n + (k + 1) as usize] -= pp * q;
                        h[i * n + k as usize] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}
