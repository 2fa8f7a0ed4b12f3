//! Small dense linear algebra: row-major matrices, LU with partial pivoting,
//! power iteration for the largest singular value and cyclic Jacobi for
//! symmetric eigenvalues.
//!
//! Problem sizes here are desk-scale (a few hundred rows at most), so
//! everything is plain `Vec<f64>` storage with no blocking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivots at or below this magnitude are treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension { expected: c, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `selfᵀ x` without materializing the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_mul_vec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization `P A = L U` with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let lu = Self::factor_unchecked(a)?;
        let n = lu.lu.rows;
        for k in 0..n {
            let p = lu.lu[(k, k)];
            if p.abs() <= PIVOT_THRESHOLD {
                return Err(Error::Singular { column: k, pivot: p });
            }
        }
        Ok(lu)
    }

    /// Factorization that tolerates zero pivots; used for determinants.
    fn factor_unchecked(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension { expected: a.rows, got: a.cols });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let p = lu[(k, k)];
            if p == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let l = lu[(i, k)] / p;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= l * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n, "rhs dimension mismatch");
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        y
    }

    pub fn determinant(&self) -> f64 {
        (0..self.lu.rows).map(|i| self.lu[(i, i)]).product::<f64>() * self.sign
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lu.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Solves `A x = b`, returning the solution and the 1-norm condition number.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = Lu::factor(a)?;
    let x = lu.solve(b);
    let cond = a.norm_1() * lu.inverse().norm_1();
    Ok((x, cond))
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    Ok(Lu::factor_unchecked(a)?.determinant())
}

/// `‖A x − b‖∞`.
pub fn residual_inf(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| (ax - bi).abs()).fold(0.0, f64::max)
}

pub const POWER_MAX_ITER: usize = 10_000;

/// Largest singular value by power iteration on `MᵀM`.
///
/// Starts from the all-ones vector. If that start is (numerically)
/// annihilated by `MᵀM` while `M ≠ 0`, the iteration restarts from a fixed
/// non-symmetric vector. Stops once the eigen-residual
/// `‖MᵀM v − λ v‖ ≤ tol · λ`.
pub fn sigma_max_power(m: &Matrix, tol: f64) -> Result<f64> {
    if !m.all_finite() {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let scale = m.max_abs();
    if scale == 0.0 || m.rows == 0 || m.cols == 0 {
        return Ok(0.0);
    }
    let n = m.cols;
    let starts: [Box<dyn Fn(usize) -> f64>; 2] = [
        Box::new(|_| 1.0),
        Box::new(move |i| 1.0 + (i as f64 + 1.0) / (n as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.5 }),
    ];
    for start in starts.iter() {
        let mut v: Vec<f64> = (0..n).map(start).collect();
        normalize(&mut v);
        let mut collapsed = false;
        for _ in 0..POWER_MAX_ITER {
            // Work with M / scale to keep magnitudes near one.
            let mv: Vec<f64> = m.mul_vec(&v).into_iter().map(|x| x / scale).collect();
            let mut w: Vec<f64> = m.tr_mul_vec(&mv).into_iter().map(|x| x / scale).collect();
            let lambda = dot(&v, &w);
            let wn = norm2(&w);
            if wn <= 1e-300 {
                collapsed = true;
                break;
            }
            let resid = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            if resid <= tol * lambda.abs() {
                return Ok(lambda.max(0.0).sqrt() * scale);
            }
            w.iter_mut().for_each(|x| *x /= wn);
            v = w;
        }
        if !collapsed {
            return Err(Error::NonConvergence { method: "power iteration", iterations: POWER_MAX_ITER });
        }
    }
    // Both starts annihilated: MᵀM is numerically zero.
    Ok(0.0)
}

/// [`sigma_max_power`], falling back to [`sigma_max_jacobi`] when nearly
/// tied top singular values stall the iteration.
pub fn sigma_max(m: &Matrix, tol: f64) -> Result<f64> {
    match sigma_max_power(m, tol) {
        Err(Error::NonConvergence { .. }) => sigma_max_jacobi(m),
        r => r,
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix, tol: f64) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension { expected: a.rows, got: a.cols });
    }
    let n = a.rows;
    let mut m = a.clone();
    // Symmetrize away roundoff-level asymmetry.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    let scale = m.frobenius().max(f64::MIN_POSITIVE);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= tol * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence { method: "Jacobi", iterations: JACOBI_MAX_SWEEPS });
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Largest singular value through the Jacobi eigenvalues of `MᵀM`.
pub fn sigma_max_jacobi(m: &Matrix) -> Result<f64> {
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let gram = m.transpose().matmul(m);
    let eig = symmetric_eigenvalues(&gram, 1e-14)?;
    Ok(eig.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
