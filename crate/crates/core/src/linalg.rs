//! Small dense linear algebra over a generic [`Scalar`].
//!
//! Everything here is sized for control problems with a handful of states:
//! row-major storage, no blocking, no BLAS. Decompositions favour robustness
//! (Jacobi, pivoted Householder QR, partial-pivot LU) over speed.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data: data.to_vec(),
        })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        let data: Vec<T> = rows.iter().flatten().copied().collect();
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Column vector from a slice.
    pub fn column(v: &[T]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matrix-vector dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x` without forming the transpose.
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "matrix-vector dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * xi;
            }
        }
        out
    }

    /// Quadratic form `xᵀ M x`.
    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.mul_vec(x))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |s, &x| s + x * x).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |s, i| s + self[(i, i)])
    }

    /// Largest absolute asymmetry `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * half
        })
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix add dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sub dimension mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|x| -x)
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] = out.data[i * rhs.cols + j] + a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $method:ident) => {
        impl<T: Scalar> $tr for Matrix<T> {
            type Output = Matrix<T>;
            fn $method(self, rhs: Matrix<T>) -> Matrix<T> {
                (&self).$method(&rhs)
            }
        }
        impl<T: Scalar> $tr<&Matrix<T>> for Matrix<T> {
            type Output = Matrix<T>;
            fn $method(self, rhs: &Matrix<T>) -> Matrix<T> {
                (&self).$method(rhs)
            }
        }
        impl<T: Scalar> $tr<Matrix<T>> for &Matrix<T> {
            type Output = Matrix<T>;
            fn $method(self, rhs: Matrix<T>) -> Matrix<T> {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

/// Euclidean norm.
pub fn norm<T: Scalar>(x: &[T]) -> T {
    // scaled to avoid overflow on large states
    let big = x.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if big == T::zero() || !big.is_finite() {
        return big;
    }
    big * x.iter().fold(T::zero(), |s, &v| s + (v / big) * (v / big)).sqrt()
}

pub fn add_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn sub_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale_vec<T: Scalar>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors, stored as columns in the order of `values`.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    /// Unit eigenvector paired with the largest eigenvalue.
    pub fn top_vector(&self) -> Vec<T> {
        self.vectors.col(self.values.len() - 1)
    }
}

/// Cyclic Jacobi eigen-solver. Only the symmetric part of `m` is used.
pub fn symmetric_eigen<T: Scalar>(m: &Matrix<T>) -> SymmetricEigen<T> {
    assert!(m.is_square(), "eigen-decomposition needs a square matrix");
    let n = m.rows();
    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    let two = T::lit(2.0);

    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag = diag + a[(i, i)] * a[(i, i)];
            for j in 0..n {
                if i != j {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * (diag + off) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(i, i)]
            .partial_cmp(&a[(j, j)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymmetricEigen { values, vectors }
}

const POWER_MAX_ITERS: usize = 100_000;

/// Largest singular value `σ_max(m)` by power iteration on `mᵀm`.
///
/// The start vector is the first canonical basis vector with `1e-3` added to
/// every coordinate, so results are reproducible. If the iteration stalls
/// (nearly repeated top singular value) the Jacobi solver finishes the job.
pub fn spectral_norm<T: Scalar>(m: &Matrix<T>) -> T {
    if m.rows() == 0 || m.cols() == 0 {
        return T::zero();
    }
    let scale = m.max_abs();
    if scale == T::zero() {
        return T::zero();
    }
    // work on m / max|m| so the Gram matrix cannot overflow
    let ms = m.scale(T::one() / scale);
    let gram = &ms.transpose() * &ms;
    let n = gram.rows();

    let mut v = vec![T::lit(1e-3); n];
    v[0] = v[0] + T::one();
    let nv = norm(&v);
    v = scale_vec(&v, T::one() / nv);

    let tol = T::fixed_point_tol() * T::lit(10.0);
    for _ in 0..POWER_MAX_ITERS {
        let w = gram.mul_vec(&v);
        let lambda = dot(&v, &w);
        let nw = norm(&w);
        if nw == T::zero() {
            break;
        }
        let residual = norm(&sub_vec(&w, &scale_vec(&v, lambda)));
        if residual <= tol * lambda {
            return lambda.max(T::zero()).sqrt() * scale;
        }
        v = scale_vec(&w, T::one() / nw);
    }
    symmetric_eigen(&gram).max().max(T::zero()).sqrt() * scale
}

/// Spectral radius of a general square matrix via Gelfand's formula
/// `ρ(M) = lim ‖M^(2^j)‖^(1/2^j)`, with renormalized repeated squaring.
///
/// Every iterate is an upper estimate of `ρ`, so stability tests built on it
/// err on the conservative side near the unit circle.
pub fn spectral_radius<T: Scalar>(m: &Matrix<T>) -> T {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    if m.rows() == 0 {
        return T::zero();
    }
    let f0 = m.frobenius_norm();
    if f0 == T::zero() {
        return T::zero();
    }
    let mut s = m.scale(T::one() / f0);
    let mut log_norm = f0.ln();
    let mut power = T::one();
    let mut estimate = f0;
    let two = T::lit(2.0);
    for _ in 0..60 {
        let sq = &s * &s;
        let c = sq.frobenius_norm();
        if c == T::zero() || !c.is_finite() {
            return if c == T::zero() { T::zero() } else { estimate };
        }
        s = sq.scale(T::one() / c);
        log_norm = two * log_norm + c.ln();
        power = power * two;
        let next = (log_norm / power).exp();
        let done = (next - estimate).abs() <= T::epsilon() * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// Solves `a x = b` for square `a` by LU with partial pivoting.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if !a.is_square() || a.rows() != b.rows() {
        return Err(Error::InvalidArgument(format!(
            "solve: incompatible shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.rows();
    let k = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs();
    let tiny = T::epsilon() * T::from_usize(n.max(1)).unwrap() * scale;
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= tiny || pval == T::zero() {
            return Err(Error::InvalidArgument("solve: matrix is singular".into()));
        }
        if piv != col {
            for j in 0..n {
                let t = lu[(col, j)];
                lu[(col, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            for j in 0..k {
                let t = x[(col, j)];
                x[(col, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
        }
        for r in (col + 1)..n {
            let f = lu[(r, col)] / lu[(col, col)];
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                lu[(r, j)] = lu[(r, j)] - f * lu[(col, j)];
            }
            for j in 0..k {
                x[(r, j)] = x[(r, j)] - f * x[(col, j)];
            }
        }
    }
    for col in (0..n).rev() {
        for j in 0..k {
            let mut s = x[(col, j)];
            for c in (col + 1)..n {
                s = s - lu[(col, c)] * x[(c, j)];
            }
            x[(col, j)] = s / lu[(col, col)];
        }
    }
    Ok(x)
}

/// Lower Cholesky factor of a symmetric positive (semi)definite matrix.
/// Zero pivots are tolerated so that singular covariances still sample.
pub fn cholesky<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("cholesky: matrix not square".into()));
    }
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    let tol = T::epsilon() * T::lit(100.0) * m.max_abs().max(T::one());
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return Err(Error::InvalidArgument(
                "cholesky: matrix is not positive semidefinite".into(),
            ));
        }
        let djj = d.max(T::zero()).sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = if djj > T::zero() { s / djj } else { T::zero() };
        }
    }
    Ok(l)
}

/// Least-squares solution of `a x ≈ b` by Householder QR with column pivoting.
///
/// Returns the numerical rank in the error when `a` does not have full column
/// rank; there is no silent regularization.
pub fn lstsq<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows() != b.rows() {
        return Err(Error::InvalidArgument(format!(
            "lstsq: row mismatch {} vs {}",
            a.rows(),
            b.rows()
        )));
    }
    let (rows, n) = a.shape();
    let k = b.cols();
    let mut r = a.clone();
    let mut qb = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = rows.min(n);

    for j in 0..steps {
        // pivot on the largest remaining column norm
        let (p, _) = (j..n)
            .map(|c| {
                let s = (j..rows).fold(T::zero(), |s, i| s + r[(i, c)] * r[(i, c)]);
                (c, s)
            })
            .fold((j, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        r.swap_cols(j, p);
        perm.swap(j, p);

        let col: Vec<T> = (j..rows).map(|i| r[(i, j)]).collect();
        let alpha = norm(&col);
        if alpha == T::zero() {
            continue;
        }
        let sign = if col[0] >= T::zero() { T::one() } else { -T::one() };
        let mut v = col;
        v[0] = v[0] + sign * alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == T::zero() {
            continue;
        }
        let beta = T::lit(2.0) / vnorm2;
        for c in j..n {
            let s = (j..rows).fold(T::zero(), |s, i| s + v[i - j] * r[(i, c)]) * beta;
            for i in j..rows {
                r[(i, c)] = r[(i, c)] - s * v[i - j];
            }
        }
        for c in 0..k {
            let s = (j..rows).fold(T::zero(), |s, i| s + v[i - j] * qb[(i, c)]) * beta;
            for i in j..rows {
                qb[(i, c)] = qb[(i, c)] - s * v[i - j];
            }
        }
    }

    let lead = if steps > 0 { r[(0, 0)].abs() } else { T::zero() };
    let tol = T::epsilon() * T::from_usize(rows.max(n)).unwrap() * lead;
    let rank = (0..steps)
        .take_while(|&j| r[(j, j)].abs() > tol && lead > T::zero())
        .count();
    if rank < n {
        return Err(Error::UnderDetermined { rank, required: n });
    }

    let mut xp = Matrix::zeros(n, k);
    for c in 0..k {
        for i in (0..n).rev() {
            let mut s = qb[(i, c)];
            for j in (i + 1)..n {
                s = s - r[(i, j)] * xp[(j, c)];
            }
            xp[(i, c)] = s / r[(i, i)];
        }
    }
    let mut x = Matrix::zeros(n, k);
    for (i, &pi) in perm.iter().enumerate() {
        for c in 0..k {
            x[(pi, c)] = xp[(i, c)];
        }
    }
    Ok(x)
}

/// Solves the discrete Stein (Lyapunov) equation `X = C + aᵀ X a` by doubling:
/// `X_{j+1} = X_j + A_jᵀ X_j A_j`, `A_{j+1} = A_j²`, which sums the series
/// `Σ_t (aᵗ)ᵀ C aᵗ` in logarithmically many steps.
///
/// The caller is responsible for `ρ(a) < 1`; the iteration stops once the
/// increment is below `tol · max(1, max|X|)`.
pub fn stein_fixed_point<T: Scalar>(
    a: &Matrix<T>,
    c: &Matrix<T>,
    tol: T,
    max_doublings: usize,
) -> Result<Matrix<T>> {
    if !a.is_square() || a.shape() != c.shape() {
        return Err(Error::InvalidArgument(
            "stein: incompatible shapes".into(),
        ));
    }
    let mut x = c.symmetrize();
    let mut ak = a.clone();
    for _ in 0..max_doublings {
        let inc = &(&ak.transpose() * &x) * &ak;
        x = (&x + &inc).symmetrize();
        if !x.is_finite() {
            break;
        }
        if inc.max_abs() <= tol * x.max_abs().max(T::one()) {
            // one plain sweep polishes the residual of the original equation
            let polished = (c + &(&(&a.transpose() * &x) * a)).symmetrize();
            return Ok(polished);
        }
        ak = &ak * &ak;
    }
    Err(Error::NoConvergence(
        "Stein equation doubling did not settle".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn spectral_norm_diagonal_and_zero() {
        assert!((spectral_norm(&Matrix::diag(&[3.0_f64, 0.5])) - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&Matrix::<f64>::zeros(3, 2)), 0.0);
    }

    #[test]
    fn spectral_norm_repeated_top_value() {
        // identical singular values: any start vector is an eigenvector
        let q = m(&[&[0.6, -0.8], &[0.8, 0.6]]).scale(2.0);
        assert!((spectral_norm(&q) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_rotation_and_nilpotent() {
        let rot = m(&[&[0.0, -0.9], &[0.9, 0.0]]);
        assert!((spectral_radius(&rot) - 0.9).abs() < 1e-9);
        let nil = m(&[&[0.0, 5.0], &[0.0, 0.0]]);
        assert!(spectral_radius(&nil) < 1e-9);
        let jordan = m(&[&[0.5, 1.0], &[0.0, 0.5]]);
        assert!((spectral_radius(&jordan) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let s = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = symmetric_eigen(&s);
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let v = e.top_vector();
        assert!((v[0].abs() - v[1].abs()).abs() < 1e-14);
    }

    #[test]
    fn solve_and_singular() {
        let a = m(&[&[0.0, 2.0], &[1.0, 1.0]]);
        let x = solve(&a, &Matrix::column(&[4.0, 3.0])).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14 && (x[(1, 0)] - 2.0).abs() < 1e-14);
        let sing = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(solve(&sing, &Matrix::column(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn lstsq_reports_rank() {
        let a = m(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        let b = Matrix::column(&[1.0, 2.0, 3.0]);
        assert_eq!(
            lstsq(&a, &b),
            Err(Error::UnderDetermined {
                rank: 1,
                required: 2
            })
        );
        let a = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let b = Matrix::column(&[1.0, 2.0, 3.0]);
        let x = lstsq(&a, &b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-12 && (x[(1, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stein_scalar_geometric_series() {
        let a = Matrix::diag(&[0.5_f64, 0.5]);
        let x = stein_fixed_point(&a, &Matrix::identity(2), 1e-14, 64).unwrap();
        assert!((x[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let s = m(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&s).unwrap();
        let back = &l * &l.transpose();
        assert!((&back - &s).max_abs() < 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::<f32>::diag(&[3.0, 0.5]);
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-5);
        assert!((spectral_radius(&a) - 3.0).abs() < 1e-4);
    }
}
