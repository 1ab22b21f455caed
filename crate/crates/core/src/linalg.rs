//! Small dense matrices: LU, symmetric and general eigenvalues, matrix exponential.
//!
//! Everything here is sized for restrictions to `R[x]_{<=d}` (a few hundred rows
//! at most), so the algorithms favour accuracy and simplicity over blocking.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<F>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: F) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> F {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<F>())
            .fold(F::zero(), F::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> F {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<F>())
            .fold(F::zero(), F::max)
    }

    pub fn max_abs(&self) -> F {
        crate::scalar::max_abs(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> F {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn is_symmetric(&self, tol: F) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self^k` by repeated squaring.
    pub fn pow(&self, mut k: u32) -> Self {
        assert!(self.is_square());
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Leading `k x k` block.
    pub fn leading_block(&self, k: usize) -> Self {
        Self::from_fn(k, k, |i, j| self[(i, j)])
    }

    pub fn lu(&self) -> Lu<F> {
        Lu::new(self)
    }

    pub fn solve(&self, b: &[F]) -> Result<Vec<F>> {
        self.lu().solve(b)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.lu().inverse()
    }

    pub fn determinant(&self) -> F {
        self.lu().determinant()
    }

    /// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
    pub fn symmetric_eigenvalues(&self) -> Vec<F> {
        jacobi(self, false).0
    }

    /// Ascending eigenvalues and the matching orthonormal eigenvectors as columns.
    pub fn symmetric_eigen(&self) -> (Vec<F>, Self) {
        let (vals, vecs) = jacobi(self, true);
        (vals, vecs.expect("vectors requested"))
    }

    /// Eigenvalues of a general real matrix as `(re, im)` pairs, unordered.
    pub fn eigenvalues(&self) -> Result<Vec<(F, F)>> {
        assert!(self.is_square());
        let mut a = self.clone();
        balance(&mut a);
        to_hessenberg(&mut a);
        hqr(a)
    }

    /// Matrix exponential by Padé scaling and squaring.
    pub fn expm(&self) -> Self {
        expm(self)
    }
}

impl<F> Index<(usize, usize)> for Matrix<F> {
    type Output = F;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<F> IndexMut<(usize, usize)> for Matrix<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<F: Scalar> Mul for &Matrix<F> {
    type Output = Matrix<F>;
    fn mul(self, rhs: &Matrix<F>) -> Matrix<F> {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

impl<F: Scalar> Add for &Matrix<F> {
    type Output = Matrix<F>;
    fn add(self, rhs: &Matrix<F>) -> Matrix<F> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<F: Scalar> Sub for &Matrix<F> {
    type Output = Matrix<F>;
    fn sub(self, rhs: &Matrix<F>) -> Matrix<F> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<F> {
    lu: Matrix<F>,
    perm: Vec<usize>,
    sign: F,
    scale: F,
}

impl<F: Scalar> Lu<F> {
    pub fn new(a: &Matrix<F>) -> Self {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = F::one();
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if lu[(i, k)].abs() > lu[(p, k)].abs() {
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            if pivot == F::zero() {
                continue;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != F::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Lu {
            lu,
            perm,
            sign,
            scale: a.max_abs(),
        }
    }

    /// True when some pivot is negligible relative to the largest input entry.
    pub fn is_singular(&self) -> bool {
        let n = self.lu.rows;
        let tol = F::epsilon() * F::from_count(n.max(1) as u64) * self.scale;
        (0..n).any(|k| self.lu[(k, k)].abs() <= tol)
    }

    pub fn determinant(&self) -> F {
        (0..self.lu.rows).fold(self.sign, |d, k| d * self.lu[(k, k)])
    }

    pub fn solve(&self, b: &[F]) -> Result<Vec<F>> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        if self.is_singular() {
            return Err(Error::Singular);
        }
        let mut x: Vec<F> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix<F>> {
        let n = self.lu.rows;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![F::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = F::zero());
            e[j] = F::one();
            let col = self.solve(&e)?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix<F>) -> Result<Matrix<F>> {
        let n = self.lu.rows;
        assert_eq!(b.rows, n);
        let mut out = Matrix::zeros(n, b.cols);
        for j in 0..b.cols {
            let col = self.solve(&b.col(j))?;
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        Ok(out)
    }
}

fn jacobi<F: Scalar>(m: &Matrix<F>, want_vectors: bool) -> (Vec<F>, Option<Matrix<F>>) {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    let n = m.rows;
    // symmetrise so that tiny assembly asymmetries do not bias the result
    let mut a = Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)]) * F::lit(0.5));
    let mut v = want_vectors.then(|| Matrix::identity(n));
    let frob: F = a.data.iter().map(|x| *x * *x).sum::<F>().sqrt();
    if frob == F::zero() || n < 2 {
        let vals = (0..n).map(|i| a[(i, i)]).collect();
        return (vals, v);
    }
    let target = F::epsilon() * F::epsilon() * frob * frob * F::lit(1e-4);
    for _sweep in 0..100 {
        let mut off = F::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == F::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let t = if theta.abs() > F::lit(1e150) {
                    F::one() / (theta + theta)
                } else {
                    let t = F::one() / (theta.abs() + (theta * theta + F::one()).sqrt());
                    if theta < F::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = F::one() / (t * t + F::one()).sqrt();
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
                a[(p, q)] = F::zero();
                a[(q, p)] = F::zero();
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = idx.iter().map(|&i| a[(i, i)]).collect();
    let vecs = v.map(|v| Matrix::from_fn(n, n, |i, j| v[(i, idx[j])]));
    (vals, vecs)
}

/// Diagonal similarity with powers of two so row and column norms are comparable.
fn balance<F: Scalar>(a: &mut Matrix<F>) {
    let n = a.rows;
    let radix = F::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = F::zero();
            let mut c = F::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != F::zero() && r != F::zero() {
                let mut g = r / radix;
                let mut f = F::one();
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < F::lit(0.95) * s {
                    done = false;
                    let g = F::one() / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

/// Gaussian elimination with pivoting to upper Hessenberg form.
fn to_hessenberg<F: Scalar>(a: &mut Matrix<F>) {
    let n = a.rows;
    if n < 3 {
        return;
    }
    for m in 1..n - 1 {
        let mut x = F::zero();
        let mut i = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in m - 1..n {
                let t = a[(i, j)];
                a[(i, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 0..n {
                let t = a[(j, i)];
                a[(j, i)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != F::zero() {
            for i in m + 1..n {
                let mut y = a[(i, m - 1)];
                if y != F::zero() {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..n {
                        let amj = a[(m, j)];
                        a[(i, j)] -= y * amj;
                    }
                    for j in 0..n {
                        let aji = a[(j, i)];
                        a[(j, m)] += y * aji;
                    }
                }
            }
        }
    }
    for i in 2..n {
        for j in 0..i - 1 {
            a[(i, j)] = F::zero();
        }
    }
}

fn sign<F: Scalar>(a: F, b: F) -> F {
    if b >= F::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Shifted QR on an upper Hessenberg matrix. Indices are 1-based internally.
#[allow(unused_assignments)]
fn hqr<F: Scalar>(h: Matrix<F>) -> Result<Vec<(F, F)>> {
    let n = h.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = Matrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            a[(i + 1, j + 1)] = h[(i, j)];
        }
    }
    let mut wr = vec![F::zero(); n + 1];
    let mut wi = vec![F::zero(); n + 1];
    let mut anorm = F::zero();
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[(i, j)].abs();
        }
    }
    let zero = F::zero();
    let half = F::lit(0.5);
    let mut nn = n as isize;
    let mut t = zero;
    let (mut p, mut q, mut r, mut s, mut w, mut x, mut y, mut z) =
        (zero, zero, zero, zero, zero, zero, zero, zero);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let lu = l as usize;
                s = a[(lu - 1, lu - 1)].abs() + a[(lu, lu)].abs();
                if s == zero {
                    s = anorm;
                }
                if a[(lu, lu - 1)].abs() + s == s {
                    a[(lu, lu - 1)] = zero;
                    break;
                }
                l -= 1;
            }
            let nu = nn as usize;
            x = a[(nu, nu)];
            if l == nn {
                wr[nu] = x + t;
                wi[nu] = zero;
                nn -= 1;
            } else {
                y = a[(nu - 1, nu - 1)];
                w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
                if l == nn - 1 {
                    p = half * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= zero {
                        z = p + sign(z, p);
                        wr[nu - 1] = x + z;
                        wr[nu] = x + z;
                        if z != zero {
                            wr[nu] = x - w / z;
                        }
                        wi[nu - 1] = zero;
                        wi[nu] = zero;
                    } else {
                        wr[nu - 1] = x + p;
                        wr[nu] = x + p;
                        wi[nu - 1] = -z;
                        wi[nu] = z;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(Error::NoConvergence);
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 1..=nu {
                            a[(i, i)] -= x;
                        }
                        s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                        x = F::lit(0.75) * s;
                        y = x;
                        w = F::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    let lu = l as usize;
                    let mut m = nu - 2;
                    loop {
                        z = a[(m, m)];
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / a[(m + 1, m)] + a[(m, m + 1)];
                        q = a[(m + 1, m + 1)] - z - r - s;
                        r = a[(m + 2, m + 1)];
                        s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == lu {
                            break;
                        }
                        let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nu {
                        a[(i, i - 2)] = zero;
                        if i != m + 2 {
                            a[(i, i - 3)] = zero;
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a[(k, k - 1)];
                            q = a[(k + 1, k - 1)];
                            r = zero;
                            if k != nu - 1 {
                                r = a[(k + 2, k - 1)];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != zero {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != zero {
                            if k == m {
                                if lu != m {
                                    a[(k, k - 1)] = -a[(k, k - 1)];
                                }
                            } else {
                                a[(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a[(k, j)] + q * a[(k + 1, j)];
                                if k != nu - 1 {
                                    p += r * a[(k + 2, j)];
                                    a[(k + 2, j)] -= p * z;
                                }
                                a[(k + 1, j)] -= p * y;
                                a[(k, j)] -= p * x;
                            }
                            let mmin = nu.min(k + 3);
                            for i in lu..=mmin {
                                p = x * a[(i, k)] + y * a[(i, k + 1)];
                                if k != nu - 1 {
                                    p += z * a[(i, k + 2)];
                                    a[(i, k + 2)] -= p * r;
                                }
                                a[(i, k + 1)] -= p * q;
                                a[(i, k)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, &[f64]); 4] = [
    (1.495585217958292e-2, &PADE3),
    (2.539398330063230e-1, &PADE5),
    (9.504178996162932e-1, &PADE7),
    (2.097847961257068e0, &PADE9),
];
const THETA13: f64 = 5.371920351148152;

fn lincomb<F: Scalar>(terms: &[(f64, &Matrix<F>)]) -> Matrix<F> {
    let (r, c) = (terms[0].1.rows, terms[0].1.cols);
    let mut out = Matrix::zeros(r, c);
    for &(w, m) in terms {
        let w = F::lit(w);
        for (o, &v) in out.data.iter_mut().zip(&m.data) {
            *o += w * v;
        }
    }
    out
}

fn pade_solve<F: Scalar>(u: &Matrix<F>, v: &Matrix<F>) -> Matrix<F> {
    let p = v + u;
    let q = v - u;
    // Q is well conditioned for norms below theta_13, so this cannot be singular
    q.lu().solve_matrix(&p).expect("Padé denominator is nonsingular")
}

fn expm<F: Scalar>(a: &Matrix<F>) -> Matrix<F> {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.rows;
    let ident = Matrix::identity(n);
    let norm = a.norm_one().as_f64();
    if n == 0 || norm == 0.0 {
        return ident;
    }
    let a2 = a * a;
    for &(theta, b) in THETA.iter() {
        if norm <= theta {
            let mut powers = vec![ident.clone(), a2.clone()];
            while powers.len() * 2 < b.len() {
                let next = &powers[powers.len() - 1] * &a2;
                powers.push(next);
            }
            let odd: Vec<(f64, &Matrix<F>)> =
                powers.iter().enumerate().map(|(k, m)| (b[2 * k + 1], m)).collect();
            let even: Vec<(f64, &Matrix<F>)> =
                powers.iter().enumerate().map(|(k, m)| (b[2 * k], m)).collect();
            let u = a * &lincomb(&odd);
            let v = lincomb(&even);
            return pade_solve(&u, &v);
        }
    }
    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let scale = F::lit(2f64.powi(-s));
    let a1 = a.scale(scale);
    let b = &PADE13;
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = lincomb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)]);
    let u = &a1
        * &(&(&a6 * &inner_u) + &lincomb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &ident)]));
    let inner_v = lincomb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)]);
    let v = &(&a6 * &inner_v) + &lincomb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &ident)]);
    let mut r = pade_solve(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn symmetric_eigen_small() {
        let vals = m(&[&[1.0, 2.0], &[2.0, 1.0]]).symmetric_eigenvalues();
        assert_relative_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(vals[1], 3.0, epsilon = 1e-14);
        assert_eq!(Matrix::<f64>::identity(4).symmetric_eigenvalues(), vec![1.0; 4]);
    }

    #[test]
    fn lu_solve_and_singular() {
        let a = m(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let x = a.solve(&[3.0, 2.0, 4.0]).unwrap();
        for (xi, ei) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert_relative_eq!(*xi, ei, epsilon = 1e-14);
        }
        assert_relative_eq!(a.determinant(), -5.0, epsilon = 1e-13);
        let s = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(s.solve(&[1.0, 1.0]), Err(Error::Singular));
    }

    #[test]
    fn general_eigenvalues_companion() {
        // x^3 - 6x^2 + 11x - 6 = (x-1)(x-2)(x-3)
        let c = m(&[&[6.0, -11.0, 6.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let mut ev: Vec<f64> = c.eigenvalues().unwrap().iter().map(|e| e.0).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*e, want, epsilon = 1e-12);
        }
        // x^2 + 1
        let rot = m(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let ev = rot.eigenvalues().unwrap();
        assert!(ev.iter().all(|e| e.0.abs() < 1e-15 && (e.1.abs() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn expm_closed_forms() {
        let z = Matrix::<f64>::zeros(3, 3);
        assert_eq!(z.expm(), Matrix::identity(3));
        // nilpotent Jordan block
        let t = 3.5;
        let j = m(&[&[0.0, t, 0.0], &[0.0, 0.0, t], &[0.0, 0.0, 0.0]]);
        let want = m(&[&[1.0, t, t * t / 2.0], &[0.0, 1.0, t], &[0.0, 0.0, 1.0]]);
        assert!(j.expm().max_abs_diff(&want) < 1e-13);
        // rotation generator at several scales crosses every Padé branch
        for th in [1e-3, 0.2, 0.9, 2.0, 5.0, 40.0] {
            let r = m(&[&[0.0, -th], &[th, 0.0]]).expm();
            let want = m(&[&[th.cos(), -th.sin()], &[th.sin(), th.cos()]]);
            assert!(r.max_abs_diff(&want) < 1e-13 * th.max(1.0), "theta {th}");
        }
    }

    #[test]
    fn pow_matches_products() {
        let a = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert_eq!(a.pow(5), m(&[&[1.0, 5.0], &[0.0, 1.0]]));
        assert_eq!(a.pow(0), Matrix::identity(2));
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = Matrix<f64>> {
        prop::collection::vec(-3.0f64..3.0, n * n)
            .prop_map(move |v| Matrix::from_fn(n, n, |i, j| v[i * n + j]))
    }

    proptest! {
        #[test]
        fn jacobi_matches_nalgebra(a in arb_matrix(6)) {
            let s = &a + &a.transpose();
            let ours = s.symmetric_eigenvalues();
            let na = nalgebra::DMatrix::from_row_slice(6, 6, s.as_slice());
            let mut theirs: Vec<f64> = na.symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (x, y) in ours.iter().zip(&theirs) {
                prop_assert!((x - y).abs() <= 1e-12 * s.norm_inf().max(1.0));
            }
        }

        #[test]
        fn expm_matches_taylor_series(a in arb_matrix(5), scale in 0.01f64..4.0) {
            let a = a.scale(scale / a.norm_one().max(1e-300));
            // direct Taylor series converges fast for norm <= 4
            let mut term = Matrix::identity(5);
            let mut sum = term.clone();
            for k in 1..60 {
                term = (&term * &a).scale(1.0 / k as f64);
                sum = &sum + &term;
            }
            prop_assert!(a.expm().max_abs_diff(&sum) <= 1e-13 * sum.max_abs().max(1.0));
        }

        #[test]
        fn inverse_is_two_sided(a in arb_matrix(5)) {
            let b = &a + &Matrix::identity(5).scale(20.0);
            let inv = b.inverse().unwrap();
            prop_assert!((&b * &inv).max_abs_diff(&Matrix::identity(5)) < 1e-13);
            prop_assert!((&inv * &b).max_abs_diff(&Matrix::identity(5)) < 1e-13);
        }
    }
}
