//! Dense complex linear algebra.
//!
//! Everything here is sized for desk-scale problems (dimensions up to a few
//! thousand). Matrices are stored row-major and are immutable once built;
//! all operations return new values.

use std::fmt;
use std::ops::Index;

use crate::error::{Error, Result};

pub type Complex = num_complex::Complex64;

/// Largest row or column count any constructor or product will produce.
pub const MAX_DIM: usize = 4096;

/// Default relative tolerance for decompositions.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Jacobi sweep cap.
pub const MAX_SWEEPS: usize = 100;

/// Singular values below this fraction of the largest are set to zero.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    for (what, n) in [("rows", rows), ("cols", cols)] {
        if n > MAX_DIM {
            return Err(Error::Capacity {
                what,
                requested: n as u128,
                limit: MAX_DIM as u128,
            });
        }
    }
    Ok(())
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Complex::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex::new(1.0, 0.0);
        }
        m
    }

    /// Column vector.
    pub fn column_vector(entries: &[Complex]) -> Result<Self> {
        Self::new(entries.len(), 1, entries.to_vec())
    }

    /// Matrix whose columns are the given vectors (all of equal length).
    pub fn from_columns(columns: &[Vec<Complex>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("columns of unequal length".into()));
        }
        let mut data = vec![Complex::new(0.0, 0.0); rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &z) in col.iter().enumerate() {
                data[i * cols + j] = z;
            }
        }
        Self::new(rows, cols, data)
    }

    pub(crate) fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn multiply(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in row.iter().enumerate() {
                if a == Complex::new(0.0, 0.0) {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> ComplexMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> ComplexMatrix {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(Complex) -> Complex) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: Complex) -> ComplexMatrix {
        self.map(|z| z * s)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &ComplexMatrix, f: impl Fn(Complex, Complex) -> Complex) -> Result<ComplexMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn trace(&self) -> Result<Complex> {
        if !self.is_square() {
            return Err(Error::Shape(format!(
                "trace of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> Result<f64> {
        Ok(self
            .sub(other)?
            .data
            .iter()
            .fold(0.0_f64, |acc, z| acc.max(z.norm())))
    }

    /// ‖m − m†‖_F / ‖m‖_F, or the absolute value for a zero matrix.
    pub fn hermiticity_defect(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Shape("hermiticity of a non-square matrix".into()));
        }
        let defect = self.sub(&self.adjoint())?.frobenius_norm();
        let norm = self.frobenius_norm();
        Ok(if norm > 0.0 { defect / norm } else { defect })
    }

    /// ‖V†V − I‖ as a maximum entrywise deviation.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.adjoint().multiply(self).expect("V†V shapes agree");
        gram.max_abs_diff(&ComplexMatrix::identity(self.cols))
            .expect("square gram")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex;

    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows as u128 * b.rows as u128;
    let cols = a.cols as u128 * b.cols as u128;
    for (what, n) in [("rows", rows), ("cols", cols)] {
        if n > MAX_DIM as u128 {
            return Err(Error::Capacity {
                what,
                requested: n,
                limit: MAX_DIM as u128,
            });
        }
    }
    let (rows, cols) = (rows as usize, cols as usize);
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    }))
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// V Λ V†.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        ComplexMatrix::from_fn(n, n, |i, j| {
            self.eigenvalues
                .iter()
                .enumerate()
                .map(|(k, &l)| v[(i, k)] * v[(j, k)].conj() * l)
                .sum()
        })
    }
}

/// Rotates `v` so that its first entry with modulus above 1e-12 is real and
/// positive.
fn fix_phase(v: &mut [Complex]) {
    if let Some(pivot) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.
///
/// `tol` bounds the accepted relative Hermiticity defect of the input and the
/// relative off-diagonal residual at which iteration gives up.
pub fn hermitian_eig(m: &ComplexMatrix, tol: f64) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "eigendecomposition of non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let defect = m.hermiticity_defect()?;
    if defect > tol {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian (relative defect {defect:e} > {tol:e})"
        )));
    }

    let n = m.rows();
    // Work on the symmetrised copy.
    let mut a: Vec<Complex> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        })
        .collect();
    let mut v = ComplexMatrix::identity(n).into_vec();
    let norm = m.frobenius_norm();

    let off_norm = |a: &[Complex]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= 4.0 * f64::EPSILON * norm || off == 0.0 {
            break;
        }
        if sweeps == MAX_SWEEPS {
            if off <= tol * norm {
                break;
            }
            return Err(Error::NonConvergence {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;

        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                // Skip rotations that cannot change the diagonal in floating point.
                if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    a[p * n + q] = Complex::new(0.0, 0.0);
                    a[q * n + p] = Complex::new(0.0, 0.0);
                    continue;
                }
                rotated = true;
                let phase = apq / mag;
                let tau = (aqq - app) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                let gpp = Complex::new(c, 0.0);
                let gpq = Complex::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;

                // A ← A G
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * gpp + akq * gqp;
                    a[k * n + q] = akp * gpq + akq * gqq;
                }
                // A ← G† A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = gpp.conj() * apk + gqp.conj() * aqk;
                    a[q * n + k] = gpq.conj() * apk + gqq.conj() * aqk;
                }
                a[p * n + q] = Complex::new(0.0, 0.0);
                a[q * n + p] = Complex::new(0.0, 0.0);
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
                // V ← V G
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * gpp + vkq * gqp;
                    v[k * n + q] = vkp * gpq + vkq * gqq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].re.total_cmp(&a[i * n + i].re));

    let eigenvalues = order.iter().map(|&k| a[k * n + k].re).collect();
    let columns: Vec<Vec<Complex>> = order
        .iter()
        .map(|&k| {
            let mut col: Vec<Complex> = (0..n).map(|i| v[i * n + k]).collect();
            fix_phase(&mut col);
            col
        })
        .collect();
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors: ComplexMatrix::from_columns(&columns)?,
    })
}

/// Thin singular value decomposition `m = U Σ V†`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows × k, orthonormal columns.
    pub u: ComplexMatrix,
    /// Length k = min(rows, cols), descending, non-negative.
    pub singular_values: Vec<f64>,
    /// cols × k, orthonormal columns.
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (u, v) = (&self.u, &self.v);
        ComplexMatrix::from_fn(u.rows(), v.rows(), |i, j| {
            self.singular_values
                .iter()
                .enumerate()
                .map(|(k, &s)| u[(i, k)] * v[(j, k)].conj() * s)
                .sum()
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values.iter().filter(|&&s| s > 0.0).count()
    }
}

fn dot(a: &[Complex], b: &[Complex]) -> Complex {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vec_norm(a: &[Complex]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonalises `v` against `basis` twice (classical Gram-Schmidt with
/// reorthogonalisation) and returns its remaining norm.
fn orthogonalize(v: &mut [Complex], basis: &[Vec<Complex>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let proj = dot(b, v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
    }
    vec_norm(v)
}

/// Extends `basis` with standard basis vectors until it holds `k` orthonormal
/// vectors of length `dim`.
fn complete_basis(basis: &mut Vec<Vec<Complex>>, dim: usize, k: usize) {
    let mut e = 0;
    while basis.len() < k && e < dim {
        let mut cand = vec![Complex::new(0.0, 0.0); dim];
        cand[e] = Complex::new(1.0, 0.0);
        e += 1;
        let norm = orthogonalize(&mut cand, basis);
        if norm > 1e-8 {
            cand.iter_mut().for_each(|z| *z /= norm);
            basis.push(cand);
        }
    }
}

/// One-sided (Hestenes) Jacobi SVD: column pairs of a working copy of `m`
/// are rotated until mutually orthogonal, so small singular values keep
/// their relative accuracy. `tol` caps the pair-orthogonality threshold.
pub fn svd(m: &ComplexMatrix, tol: f64) -> Result<Svd> {
    if m.rows() < m.cols() {
        // Work on the tall orientation so fewer column pairs are rotated.
        let t = svd(&m.adjoint(), tol)?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (rows, cols) = (m.rows(), m.cols());
    if cols == 0 {
        return Ok(Svd {
            u: ComplexMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            v: ComplexMatrix::zeros(0, 0),
        });
    }
    let mut a: Vec<Vec<Complex>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<Complex>> = (0..cols)
        .map(|j| {
            let mut e = vec![Complex::new(0.0, 0.0); cols];
            e[j] = Complex::new(1.0, 0.0);
            e
        })
        .collect();
    let threshold = tol.min(f64::EPSILON * rows as f64);
    // Pairs whose overlap is this small cannot move any entry above
    // rounding level of the matrix as a whole.
    let floor = f64::EPSILON * f64::EPSILON * m.frobenius_norm().powi(2);

    let mut converged = false;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            let residual = (0..cols)
                .flat_map(|p| (p + 1..cols).map(move |q| (p, q)))
                .map(|(p, q)| dot(&a[p], &a[q]).norm())
                .fold(0.0, f64::max);
            return Err(Error::NonConvergence { sweeps, residual });
        }
        sweeps += 1;
        converged = true;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = dot(&a[p], &a[p]).re;
                let beta = dot(&a[q], &a[q]).re;
                let gamma = dot(&a[p], &a[q]);
                let g = gamma.norm();
                if g <= floor || g <= threshold * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                // Rotate the phase out of γ, then apply a real rotation.
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols_of in [&mut a, &mut v] {
                    let (lo, hi) = cols_of.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let yq = *y * phase;
                        let xp = *x;
                        *x = xp * c - yq * s;
                        *y = xp * s + yq * c;
                    }
                }
            }
        }
    }

    let mut order: Vec<(f64, usize)> = a.iter().map(|col| vec_norm(col)).zip(0..).collect();
    // Stable descending sort keeps ties in column order.
    order.sort_by(|x, y| y.0.total_cmp(&x.0));
    let sigma_max = order[0].0;
    let mut sigma = Vec::with_capacity(cols);
    let mut u_cols: Vec<Vec<Complex>> = Vec::with_capacity(cols);
    let mut v_cols: Vec<Vec<Complex>> = Vec::with_capacity(cols);
    for &(norm, j) in &order {
        let mut vj = v[j].clone();
        let mut uj = a[j].clone();
        // Canonical phase: first significant component of each v column is
        // real and positive; u takes the same phase so u v† is unchanged.
        if let Some(z) = vj.iter().find(|z| z.norm() > 1e-12) {
            let ph = z.conj() / z.norm();
            vj.iter_mut().for_each(|x| *x *= ph);
            uj.iter_mut().for_each(|x| *x *= ph);
        }
        v_cols.push(vj);
        if norm > SINGULAR_CUTOFF * sigma_max && norm > 0.0 {
            let rest = orthogonalize(&mut uj, &u_cols);
            uj.iter_mut().for_each(|z| *z /= rest);
            u_cols.push(uj);
            sigma.push(norm);
        } else {
            sigma.push(0.0);
        }
    }
    complete_basis(&mut u_cols, rows, cols);

    Ok(Svd {
        u: ComplexMatrix::from_columns(&u_cols)?,
        singular_values: sigma,
        v: ComplexMatrix::from_columns(&v_cols)?,
    })
}
