//! Operators `T = Σ q_α ∂^α` acting on polynomials, through their exact
//! restrictions to `R[x]_{<=d}`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::momseq::MomentSeq;
use crate::multiindex::{BasisMap, MultiIndex};
use crate::poly::Poly;
use crate::scalar::Scalar;

/// How far the stored coefficient table is valid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    /// Every nonzero coefficient is stored; the operator acts on all of `R[x]`.
    Exact,
    /// Coefficients are known for `|α| <= D` only.
    UpTo(u32),
}

impl Truncation {
    pub fn covers(self, d: u32) -> bool {
        match self {
            Truncation::Exact => true,
            Truncation::UpTo(m) => d <= m,
        }
    }

    pub fn meet(self, other: Truncation) -> Truncation {
        match (self, other) {
            (Truncation::Exact, t) | (t, Truncation::Exact) => t,
            (Truncation::UpTo(a), Truncation::UpTo(b)) => Truncation::UpTo(a.min(b)),
        }
    }

    fn require(self, d: u32) -> Result<()> {
        match self {
            Truncation::UpTo(m) if m < d => Err(Error::Truncation {
                needed: d,
                available: m,
            }),
            _ => Ok(()),
        }
    }
}

/// Degree-violation tolerance used when reading an operator back from a matrix.
fn algebra_tol<F: Scalar>() -> F {
    F::lit(1e-9).max(F::epsilon() * F::lit(1e3))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp<F> {
    n: usize,
    truncation: Truncation,
    coeffs: BTreeMap<MultiIndex, Poly<F>>,
}

impl<F: Scalar> DiffOp<F> {
    /// Builds an element of the degree-preserving algebra; rejects `deg q_α > |α|`.
    pub fn new(
        n: usize,
        truncation: Truncation,
        coeffs: impl IntoIterator<Item = (MultiIndex, Poly<F>)>,
    ) -> Result<Self> {
        let op = Self::general(n, truncation, coeffs)?;
        if let Some((alpha, q)) = op.coeffs.iter().find(|(a, q)| q.degree() > Some(a.degree())) {
            return Err(Error::NotInAlgebra(format!(
                "coefficient of ∂^{alpha} has degree {} > {}",
                q.degree().unwrap_or(0),
                alpha.degree()
            )));
        }
        Ok(op)
    }

    /// Builds an operator without the degree bound on its coefficients.
    pub fn general(
        n: usize,
        truncation: Truncation,
        coeffs: impl IntoIterator<Item = (MultiIndex, Poly<F>)>,
    ) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (alpha, q) in coeffs {
            if alpha.n() != n || q.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: if alpha.n() != n { alpha.n() } else { q.n() },
                });
            }
            if !truncation.covers(alpha.degree()) {
                return Err(Error::Invalid(format!(
                    "coefficient of ∂^{alpha} lies beyond the truncation order"
                )));
            }
            if q.terms().any(|(_, c)| !c.is_finite()) {
                return Err(Error::Invalid(format!("non-finite coefficient of ∂^{alpha}")));
            }
            let entry: &mut Poly<F> = table.entry(alpha).or_insert_with(|| Poly::zero(n));
            *entry = &*entry + &q;
        }
        table.retain(|_, q: &mut Poly<F>| !q.is_zero());
        Ok(DiffOp {
            n,
            truncation,
            coeffs: table,
        })
    }

    pub fn zero(n: usize) -> Self {
        DiffOp {
            n,
            truncation: Truncation::Exact,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, F::one())
    }

    pub fn scalar(n: usize, c: F) -> Self {
        Self::constant(n, Truncation::Exact, [(MultiIndex::zero(n), c)])
    }

    /// `∂^α` with unit coefficient.
    pub fn partial(alpha: MultiIndex) -> Self {
        let n = alpha.n();
        Self::constant(n, Truncation::Exact, [(alpha, F::one())])
    }

    /// Constant-coefficient operator from scalar coefficients.
    pub fn constant(
        n: usize,
        truncation: Truncation,
        coeffs: impl IntoIterator<Item = (MultiIndex, F)>,
    ) -> Self {
        Self::new(
            n,
            truncation,
            coeffs.into_iter().map(|(a, c)| (a, Poly::constant(n, c))),
        )
        .expect("constant coefficients always preserve degree")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn with_truncation(mut self, truncation: Truncation) -> Self {
        if let Truncation::UpTo(d) = truncation {
            self.coeffs.retain(|a, _| a.degree() <= d);
        }
        self.truncation = self.truncation.meet(truncation);
        self
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Poly<F> {
        self.coeffs.get(alpha).cloned().unwrap_or_else(|| Poly::zero(self.n))
    }

    /// Nonzero coefficients in graded order.
    pub fn coeffs(&self) -> impl Iterator<Item = (&MultiIndex, &Poly<F>)> {
        self.coeffs.iter()
    }

    /// Scalar `q_0`, if the constant coefficient is constant.
    pub fn q0(&self) -> Option<F> {
        self.coeff(&MultiIndex::zero(self.n)).as_constant()
    }

    /// Largest `|α|` with a nonzero coefficient.
    pub fn order(&self) -> Option<u32> {
        self.coeffs.keys().map(MultiIndex::degree).max()
    }

    pub fn in_algebra(&self) -> bool {
        self.coeffs.iter().all(|(a, q)| q.degree() <= Some(a.degree()))
    }

    /// Group membership at finite truncation: `q_0` is a nonzero scalar.
    pub fn is_invertible(&self) -> bool {
        self.in_algebra() && self.q0().map_or(false, |c| c != F::zero())
    }

    pub fn is_constant_coefficient(&self) -> bool {
        self.coeffs.values().all(|q| q.degree() <= Some(0))
    }

    /// Constant-coefficient operator `Σ q_α(y) ∂^α`.
    pub fn freeze_at(&self, y: &[F]) -> Result<Self> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for (a, q) in &self.coeffs {
            out.push((a.clone(), q.eval(y)?));
        }
        Ok(Self::constant(self.n, self.truncation, out))
    }

    pub fn scale(&self, s: F) -> Self {
        DiffOp {
            n: self.n,
            truncation: self.truncation,
            coeffs: self
                .coeffs
                .iter()
                .map(|(a, q)| (a.clone(), q.scale(s)))
                .filter(|(_, q)| !q.is_zero())
                .collect(),
        }
    }

    /// `Σ_α q_α ∂^α p`.
    pub fn apply(&self, p: &Poly<F>) -> Result<Poly<F>> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.n(),
            });
        }
        let deg = match p.degree() {
            None => return Ok(Poly::zero(self.n)),
            Some(d) => d,
        };
        self.truncation.require(deg)?;
        let mut out = Poly::zero(self.n);
        for (alpha, q) in &self.coeffs {
            if alpha.degree() > deg {
                continue;
            }
            let dp = p.derive(alpha);
            if !dp.is_zero() {
                out = &out + &(q * &dp);
            }
        }
        Ok(out)
    }

    /// Matrix of the restriction to `R[x]_{<=d}`; column `j` holds `T(x^{α_j})`.
    pub fn matrix_rep(&self, d: u32) -> Result<OpMatrix<F>> {
        self.truncation.require(d)?;
        let basis = BasisMap::new(self.n, d);
        let dim = basis.dim();
        let mut m = Matrix::zeros(dim, dim);
        for (j, alpha) in basis.iter().enumerate() {
            let image = self.apply(&Poly::monomial(alpha.clone(), F::one()))?;
            if image.degree() > Some(d) {
                return Err(Error::NotInAlgebra(format!(
                    "T(x^{alpha}) has degree {} > {d}",
                    image.degree().unwrap_or(0)
                )));
            }
            for (i, v) in image.to_coords(&basis)?.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(OpMatrix { basis, matrix: m })
    }

    /// `T ∘ S` on `R[x]_{<=d}`.
    pub fn compose(&self, other: &Self, d: u32) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        self.truncation.require(d)?;
        other.truncation.require(d)?;
        if self.is_constant_coefficient() && other.is_constant_coefficient() {
            return Ok(self.compose_constant(other, d));
        }
        let a = self.matrix_rep(d)?;
        let b = other.matrix_rep(d)?;
        OpMatrix::new(a.basis.clone(), &a.matrix * &b.matrix)?.canonical_from_action()
    }

    // Products are summed after sorting so the result is symmetric in the operands.
    fn compose_constant(&self, other: &Self, d: u32) -> Self {
        let mut buckets: BTreeMap<MultiIndex, Vec<F>> = BTreeMap::new();
        for (a, p) in &self.coeffs {
            for (b, q) in &other.coeffs {
                let g = a.add(b);
                if g.degree() > d {
                    continue;
                }
                let pa = p.as_constant().unwrap_or_else(F::zero);
                let qb = q.as_constant().unwrap_or_else(F::zero);
                buckets.entry(g).or_default().push(pa * qb);
            }
        }
        let coeffs = buckets.into_iter().map(|(g, mut v)| {
            v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
            (g, v.into_iter().fold(F::zero(), |s, x| s + x))
        });
        Self::constant(self.n, Truncation::UpTo(d), coeffs)
    }

    // Functions of a constant-coefficient operator commute with translations,
    // so their coefficients are read off at the origin.
    fn read_back(&self, m: OpMatrix<F>) -> Result<Self> {
        if self.is_constant_coefficient() {
            Ok(m.constant_from_action())
        } else {
            m.canonical_from_action()
        }
    }

    /// Two-sided inverse on `R[x]_{<=d}`, coefficient by coefficient.
    ///
    /// Writing `T ∘ B = Σ c_μ ∂^μ`, the coefficient `c_μ` equals `T(b_μ)` plus terms
    /// built from `b_α` with `α < μ`. Each `b_μ` therefore solves
    /// `T(b_μ) = δ_{μ0} − c'_μ` in `R[x]_{<=|μ|}`.
    pub fn invert(&self, d: u32) -> Result<Self> {
        self.truncation.require(d)?;
        if !self.in_algebra() {
            return Err(Error::NotInAlgebra("inverse needs deg q_α <= |α|".into()));
        }
        let a0 = match self.q0() {
            Some(c) if c != F::zero() => c,
            _ => return Err(Error::NotInvertible("q_0 = 0".into())),
        };
        let n = self.n;
        let basis = BasisMap::new(n, d);
        let lowering = self
            .coeffs
            .iter()
            .all(|(a, q)| a.is_zero() || q.degree().map_or(true, |k| k < a.degree()));
        let tail = {
            let mut t = self.clone();
            t.coeffs.remove(&MultiIndex::zero(n));
            t
        };
        let mut restricted: BTreeMap<u32, crate::linalg::Lu<F>> = BTreeMap::new();
        let mut b: BTreeMap<MultiIndex, Poly<F>> = BTreeMap::new();
        for mu in basis.iter() {
            let mut rhs = if mu.is_zero() {
                Poly::one(n)
            } else {
                Poly::zero(n)
            };
            for alpha in mu.lower_set() {
                if &alpha == mu {
                    continue;
                }
                let b_alpha = match b.get(&alpha) {
                    Some(p) => p,
                    None => continue,
                };
                let delta = mu.checked_sub(&alpha).expect("alpha below mu");
                for (beta, q) in &self.coeffs {
                    if let Some(gamma) = beta.checked_sub(&delta) {
                        let dg = b_alpha.derive(&gamma);
                        if dg.is_zero() {
                            continue;
                        }
                        let w = beta.binomial_scalar::<F>(&gamma);
                        rhs = &rhs - &(q * &dg).scale(w);
                    }
                }
            }
            let k = mu.degree();
            let sol = if lowering {
                // T − q_0 strictly lowers degree, so the fixed point is reached in k+1 steps
                let inv = F::one() / a0;
                let mut x = rhs.scale(inv);
                for _ in 0..k {
                    x = (&rhs - &tail.apply(&x)?).scale(inv);
                }
                x
            } else {
                if !restricted.contains_key(&k) {
                    restricted.insert(k, self.matrix_rep(k)?.matrix.lu());
                }
                let lu = &restricted[&k];
                let sub = BasisMap::new(n, k);
                let coords = lu.solve(&rhs.to_coords(&sub)?).map_err(|_| {
                    Error::NotInvertible(format!("restriction to degree {k} is singular"))
                })?;
                Poly::from_coords(&sub, &coords)
            };
            if !sol.is_zero() {
                b.insert(mu.clone(), sol);
            }
        }
        Self::new(n, Truncation::UpTo(d), b)
    }

    /// Inverse through the dense inverse of the restriction; used as a cross-check.
    pub fn invert_via_matrix(&self, d: u32) -> Result<Self> {
        if self.q0().map_or(true, |c| c == F::zero()) {
            return Err(Error::NotInvertible("q_0 = 0".into()));
        }
        let m = self.matrix_rep(d)?;
        let inv = m
            .matrix
            .inverse()
            .map_err(|_| Error::NotInvertible(format!("restriction to degree {d} is singular")))?;
        self.read_back(OpMatrix::new(m.basis, inv)?)
    }

    /// `e^{tA}` on `R[x]_{<=d}`.
    pub fn exp_op(&self, t: F, d: u32) -> Result<Self> {
        let m = self.matrix_rep(d)?;
        let e = m.matrix.scale(t).expm();
        self.read_back(OpMatrix::new(m.basis, e)?)
    }

    /// Distance of `e^{tA_d}` from `(1 + tA_d/k)^k` and from `(1 − tA_d/k)^{-k}`.
    pub fn exp_limit_check(&self, t: F, d: u32, k: u32) -> Result<LimitDiscrepancy<F>> {
        if k == 0 {
            return Err(Error::Invalid("k must be at least 1".into()));
        }
        let m = self.matrix_rep(d)?.matrix;
        let dim = m.nrows();
        let exact = m.scale(t).expm();
        let step = m.scale(t / F::from_count(u64::from(k)));
        let ident = Matrix::identity(dim);
        let forward = (&ident + &step).pow(k);
        let resolvent = (&ident - &step).inverse()?;
        let backward = resolvent.pow(k);
        Ok(LimitDiscrepancy {
            forward: forward.max_abs_diff(&exact),
            backward: backward.max_abs_diff(&exact),
        })
    }

    /// Logarithm of a constant-coefficient operator with `q_0 > 0`.
    pub fn log_op(&self, d: u32) -> Result<Self> {
        if !self.is_constant_coefficient() {
            return Err(Error::Unsupported(
                "logarithm of a non-constant-coefficient operator".into(),
            ));
        }
        let a0 = self.q0().unwrap_or_else(F::zero);
        if !(a0 > F::zero()) {
            return Err(Error::Invalid(format!("logarithm needs q_0 > 0, got {a0}")));
        }
        let m = self.matrix_rep(d)?;
        let dim = m.matrix.nrows();
        let ident = Matrix::identity(dim);
        let nil = &m.matrix.scale(F::one() / a0) - &ident;
        let mut acc = ident.scale(a0.ln());
        let mut power = ident;
        for k in 1..=d {
            power = &power * &nil;
            let w = F::one() / F::from_count(u64::from(k));
            let w = if k % 2 == 1 { w } else { -w };
            acc = &acc + &power.scale(w);
        }
        self.read_back(OpMatrix::new(m.basis, acc)?)
    }

    /// `T = Σ_{|α|<=D} p^α s_α / α! ∂^α`. The result may leave the degree-preserving
    /// algebra; check [`DiffOp::in_algebra`].
    pub fn build_substitution_preserver(p: &[Poly<F>], s: &MomentSeq<F>, order: u32) -> Result<Self> {
        let n = s.n();
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        if s.order() < order {
            return Err(Error::Truncation {
                needed: order,
                available: s.order(),
            });
        }
        let m = p.first().map_or(n, Poly::n);
        if p.iter().any(|q| q.n() != m) || m != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m,
            });
        }
        let basis = BasisMap::new(n, order);
        let mut coeffs = Vec::new();
        for alpha in basis.iter() {
            let sa = s.get(alpha)?;
            if sa == F::zero() {
                continue;
            }
            let mut q = Poly::constant(n, sa / alpha.factorial_scalar::<F>());
            for (pi, &e) in p.iter().zip(alpha.exponents()) {
                if e > 0 {
                    q = &q * &pi.pow(e);
                }
            }
            coeffs.push((alpha.clone(), q));
        }
        Self::general(n, Truncation::UpTo(order), coeffs)
    }
}

fn combine<F: Scalar>(a: &DiffOp<F>, b: &DiffOp<F>, sign: F) -> DiffOp<F> {
    assert_eq!(a.n, b.n, "operators act on different variable counts");
    let truncation = a.truncation.meet(b.truncation);
    let mut coeffs = a.coeffs.clone();
    for (k, q) in &b.coeffs {
        let entry = coeffs.entry(k.clone()).or_insert_with(|| Poly::zero(a.n));
        *entry = &*entry + &q.scale(sign);
    }
    coeffs.retain(|k, q| !q.is_zero() && truncation.covers(k.degree()));
    DiffOp {
        n: a.n,
        truncation,
        coeffs,
    }
}

impl<F: Scalar> Add for &DiffOp<F> {
    type Output = DiffOp<F>;
    fn add(self, rhs: &DiffOp<F>) -> DiffOp<F> {
        combine(self, rhs, F::one())
    }
}

impl<F: Scalar> Sub for &DiffOp<F> {
    type Output = DiffOp<F>;
    fn sub(self, rhs: &DiffOp<F>) -> DiffOp<F> {
        combine(self, rhs, -F::one())
    }
}

impl<F: Scalar> fmt::Display for DiffOp<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (i, (a, q)) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({q}) ∂^{a}")?;
        }
        Ok(())
    }
}

/// Discrepancies returned by [`DiffOp::exp_limit_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitDiscrepancy<F> {
    pub forward: F,
    pub backward: F,
}

impl<F: Scalar> LimitDiscrepancy<F> {
    pub fn max(&self) -> F {
        self.forward.max(self.backward)
    }
}

/// A linear map on `R[x]_{<=d}` in the graded basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OpMatrix<F> {
    basis: BasisMap,
    matrix: Matrix<F>,
}

impl<F: Scalar> OpMatrix<F> {
    pub fn new(basis: BasisMap, matrix: Matrix<F>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(OpMatrix { basis, matrix })
    }

    pub fn basis(&self) -> &BasisMap {
        &self.basis
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<F> {
        self.matrix
    }

    pub fn apply(&self, p: &Poly<F>) -> Result<Poly<F>> {
        let v = self.matrix.mul_vec(&p.to_coords(&self.basis)?);
        Ok(Poly::from_coords(&self.basis, &v))
    }

    /// Constant coefficients `q_α = T(x^α)(0) / α!`, valid when the map commutes with translations.
    pub fn constant_from_action(&self) -> DiffOp<F> {
        let n = self.basis.n();
        DiffOp::constant(
            n,
            Truncation::UpTo(self.basis.degree()),
            self.basis
                .iter()
                .enumerate()
                .map(|(j, a)| (a.clone(), self.matrix[(0, j)] / a.factorial_scalar::<F>())),
        )
    }

    /// Reads off `q_α = (T x^α − Σ_{β<α} q_β ∂^β x^α) / α!` in graded order.
    pub fn canonical_from_action(&self) -> Result<DiffOp<F>> {
        let n = self.basis.n();
        let d = self.basis.degree();
        let tol = algebra_tol::<F>() * F::one().max(self.matrix.max_abs());
        let mut q: BTreeMap<MultiIndex, Poly<F>> = BTreeMap::new();
        for (j, alpha) in self.basis.iter().enumerate() {
            let mut r = Poly::from_coords(&self.basis, &self.matrix.col(j));
            let mono = Poly::monomial(alpha.clone(), F::one());
            for beta in alpha.lower_set() {
                if &beta == alpha {
                    continue;
                }
                if let Some(qb) = q.get(&beta) {
                    r = &r - &(qb * &mono.derive(&beta));
                }
            }
            let r = r.scale(F::one() / alpha.factorial_scalar::<F>());
            let k = alpha.degree();
            if let Some((bad, c)) = r.terms().find(|(b, c)| b.degree() > k && c.abs() > tol) {
                return Err(Error::NotInAlgebra(format!(
                    "coefficient of ∂^{alpha} has a degree-{} term {c}",
                    bad.degree()
                )));
            }
            let r = r.truncate(k);
            if !r.is_zero() {
                q.insert(alpha.clone(), r);
            }
        }
        DiffOp::new(n, Truncation::UpTo(d), q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momseq::DiscreteMeasure;
    use proptest::prelude::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn p1(s: &str) -> Poly<f64> {
        Poly::parse(s, 1).unwrap()
    }

    fn drift_generator(a: f64) -> DiffOp<f64> {
        DiffOp::new(
            1,
            Truncation::Exact,
            [(mi(&[1]), p1(&a.to_string())), (mi(&[2]), p1("0.5 x^2 - 0.5"))],
        )
        .unwrap()
    }

    fn coeff_diff(a: &DiffOp<f64>, b: &DiffOp<f64>) -> f64 {
        let keys: std::collections::BTreeSet<_> =
            a.coeffs().map(|(k, _)| k.clone()).chain(b.coeffs().map(|(k, _)| k.clone())).collect();
        keys.iter()
            .map(|k| (&a.coeff(k) - &b.coeff(k)).max_abs_coeff())
            .fold(0.0, f64::max)
    }

    #[test]
    fn apply_examples() {
        let p = p1("3 x^5 - x + 2");
        assert_eq!(DiffOp::identity(1).apply(&p).unwrap(), p);
        assert_eq!(DiffOp::<f64>::partial(mi(&[2])).apply(&p1("x^4")).unwrap(), p1("12 x^2"));
        let euler = DiffOp::new(1, Truncation::Exact, [(mi(&[1]), p1("x"))]).unwrap();
        for m in 0..8u32 {
            let xm = Poly::monomial(mi(&[m]), 1.0);
            assert_eq!(euler.apply(&xm).unwrap(), xm.scale(m as f64));
        }
    }

    #[test]
    fn truncation_is_enforced() {
        let t = DiffOp::constant(1, Truncation::UpTo(2), [(mi(&[0]), 1.0)]);
        assert!(matches!(
            t.apply(&p1("x^3")),
            Err(Error::Truncation { needed: 3, available: 2 })
        ));
        assert!(t.matrix_rep(3).is_err());
        assert!(t.apply(&p1("x^2")).is_ok());
    }

    #[test]
    fn degree_bound_rejected() {
        let err = DiffOp::new(1, Truncation::Exact, [(mi(&[0]), p1("x"))]).unwrap_err();
        assert!(matches!(err, Error::NotInAlgebra(_)));
        let g = DiffOp::general(1, Truncation::Exact, [(mi(&[0]), p1("x"))]).unwrap();
        assert!(!g.in_algebra());
        assert!(matches!(g.matrix_rep(2), Err(Error::NotInAlgebra(_))));
        let d = DiffOp::<f64>::partial(mi(&[1]));
        assert!(matches!(d.compose(&g, 2), Err(Error::NotInAlgebra(_))));
    }

    #[test]
    fn drift_matrix_matches_hand_computation() {
        let a = 0.7;
        let m = drift_generator(a).matrix_rep(2).unwrap();
        let want = Matrix::from_rows(&[
            vec![0.0, a, -1.0],
            vec![0.0, 0.0, 2.0 * a],
            vec![0.0, 0.0, 1.0],
        ]);
        assert_eq!(m.matrix(), &want);
        assert_eq!(DiffOp::<f64>::identity(2).matrix_rep(3).unwrap().into_matrix(), Matrix::identity(10));
    }

    #[test]
    fn matrix_and_apply_agree() {
        let t = DiffOp::new(
            2,
            Truncation::Exact,
            [
                (mi(&[0, 0]), Poly::<f64>::parse("2", 2).unwrap()),
                (mi(&[1, 0]), Poly::parse("x2 - 1", 2).unwrap()),
                (mi(&[1, 1]), Poly::parse("x1 x2 + 3", 2).unwrap()),
                (mi(&[0, 3]), Poly::parse("x1^3 - x2", 2).unwrap()),
            ],
        )
        .unwrap();
        let m = t.matrix_rep(4).unwrap();
        let p = Poly::parse("x1^4 - 2 x1 x2^3 + 0.5 x2^2 - 7", 2).unwrap();
        let via_matrix = m.apply(&p).unwrap();
        let direct = t.apply(&p).unwrap();
        assert!((&via_matrix - &direct).max_abs_coeff() < 1e-13);
    }

    #[test]
    fn shift_operator_matrix_is_taylor_shift() {
        let c = [0.3, -1.2];
        let s = MomentSeq::from_measure(&DiscreteMeasure::dirac(c.to_vec()), 3);
        let shift = crate::momseq::dop_from_seq(&s);
        let m = shift.matrix_rep(3).unwrap();
        for alpha in m.basis().iter() {
            let mono = Poly::monomial(alpha.clone(), 1.0);
            let diff = &m.apply(&mono).unwrap() - &mono.taylor_shift(&c).unwrap();
            assert!(diff.max_abs_coeff() < 1e-14);
        }
        // reading the operator back recovers c^α/α!
        let back = m.canonical_from_action().unwrap();
        for alpha in m.basis().iter() {
            let want = alpha.monomial_value(&c) / alpha.factorial_scalar::<f64>();
            let got = back.coeff(alpha).as_constant().unwrap();
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn canonical_recovers_drift_generator() {
        let a = 1.3;
        let g = drift_generator(a);
        let back = g.matrix_rep(2).unwrap().canonical_from_action().unwrap();
        assert!(coeff_diff(&back, &g) < 1e-15);
        assert_eq!(
            OpMatrix::new(BasisMap::new(1, 3), Matrix::<f64>::identity(4))
                .unwrap()
                .canonical_from_action()
                .unwrap(),
            DiffOp::identity(1).with_truncation(Truncation::UpTo(3))
        );
        // multiplication by x is not degree preserving
        let mut mx = Matrix::zeros(3, 3);
        mx[(1, 0)] = 1.0;
        mx[(2, 1)] = 1.0;
        let err = OpMatrix::new(BasisMap::new(1, 2), mx).unwrap().canonical_from_action();
        assert!(matches!(err, Err(Error::NotInAlgebra(_))));
    }

    #[test]
    fn compose_examples() {
        let t = drift_generator(0.4);
        let id = DiffOp::identity(1);
        assert!(coeff_diff(&t.compose(&id, 5).unwrap(), &t) < 1e-15);
        let mu = DiscreteMeasure::new(1, vec![(vec![1.0], 0.5), (vec![-2.0], 0.25)]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![(vec![0.5], 1.0), (vec![3.0], 0.1)]).unwrap();
        let s = MomentSeq::from_measure(&mu, 6);
        let u = MomentSeq::from_measure(&nu, 6);
        let ds = crate::momseq::dop_from_seq(&s);
        let du = crate::momseq::dop_from_seq(&u);
        let lhs = ds.compose(&du, 6).unwrap();
        let rhs = crate::momseq::dop_from_seq(&crate::momseq::convolve(&s, &u).unwrap());
        assert!(coeff_diff(&lhs, &rhs) < 1e-11);
        assert_eq!(ds.compose(&du, 6).unwrap(), du.compose(&ds, 6).unwrap());
    }

    #[test]
    fn invert_examples() {
        let id = DiffOp::<f64>::identity(1);
        assert!(coeff_diff(&id.invert(4).unwrap(), &id) < 1e-15);
        let d = 7;
        let one_plus = DiffOp::constant(1, Truncation::Exact, [(mi(&[0]), 1.0), (mi(&[1]), 1.0)]);
        let inv = one_plus.invert(d).unwrap();
        let geometric = DiffOp::constant(
            1,
            Truncation::UpTo(d),
            (0..=d).map(|k| (mi(&[k]), if k % 2 == 0 { 1.0 } else { -1.0 })),
        );
        assert!(coeff_diff(&inv, &geometric) < 1e-13);
        assert!(coeff_diff(&one_plus.invert_via_matrix(d).unwrap(), &geometric) < 1e-12);
        let lam: f64 = 0.3;
        let heat_res = DiffOp::constant(1, Truncation::Exact, [(mi(&[0]), 1.0), (mi(&[2]), -lam)]);
        let inv = heat_res.invert(8).unwrap();
        let series = DiffOp::constant(
            1,
            Truncation::UpTo(8),
            (0..=4).map(|k| (mi(&[2 * k]), lam.powi(k as i32))),
        );
        assert!(coeff_diff(&inv, &series) < 1e-14);
        let no = DiffOp::<f64>::partial(mi(&[1]));
        assert!(matches!(no.invert(3), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn invert_non_lowering_operator() {
        // 2 + x∂ keeps degree; its inverse is diagonal with entries 1/(2+m)
        let t = DiffOp::new(
            1,
            Truncation::Exact,
            [(mi(&[0]), p1("2")), (mi(&[1]), p1("x")), (mi(&[2]), p1("x^2 + 1"))],
        )
        .unwrap();
        for d in [3, 6] {
            let inv = t.invert(d).unwrap();
            let left = t.compose(&inv, d).unwrap();
            let right = inv.compose(&t, d).unwrap();
            let id = DiffOp::identity(1);
            assert!(coeff_diff(&left, &id) < 1e-10);
            assert!(coeff_diff(&right, &id) < 1e-10);
            assert!(coeff_diff(&inv, &t.invert_via_matrix(d).unwrap()) < 1e-10);
        }
        // 1 − x∂ annihilates x, so no inverse exists
        let sing = DiffOp::new(1, Truncation::Exact, [(mi(&[0]), p1("1")), (mi(&[1]), p1("-x"))]).unwrap();
        assert!(matches!(sing.invert(2), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn exp_examples() {
        let g = drift_generator(0.9);
        let e0 = g.exp_op(0.0, 4).unwrap();
        assert!(coeff_diff(&e0, &DiffOp::identity(1)) < 1e-15);
        let (a, t) = (0.8, 0.6);
        let scaling = DiffOp::new(1, Truncation::Exact, [(mi(&[1]), p1(&format!("{a} x")))]).unwrap();
        let e = scaling.exp_op(t, 6).unwrap();
        for m in 0..=6u32 {
            let xm = Poly::monomial(mi(&[m]), 1.0);
            let got = e.apply(&xm).unwrap();
            let want = xm.scale((a * t * m as f64).exp());
            assert!((&got - &want).max_abs_coeff() < 1e-12 * want.max_abs_coeff());
        }
        let c = -1.7;
        let shift = DiffOp::constant(1, Truncation::Exact, [(mi(&[1]), c)]).exp_op(1.0, 6).unwrap();
        let p = p1("x^6 - 3 x^2 + 1");
        let diff = &shift.apply(&p).unwrap() - &p.taylor_shift(&[c]).unwrap();
        assert!(diff.max_abs_coeff() < 1e-12 * 100.0);
    }

    #[test]
    fn semigroup_law() {
        let g = drift_generator(0.45);
        for s in [0.1, 0.7] {
            for t in [0.1, 0.7] {
                let lhs = g.exp_op(s + t, 5).unwrap();
                let rhs = g.exp_op(s, 5).unwrap().compose(&g.exp_op(t, 5).unwrap(), 5).unwrap();
                assert!(coeff_diff(&lhs, &rhs) < 1e-10);
            }
        }
    }

    #[test]
    fn limit_discrepancy_shrinks() {
        let zero = DiffOp::<f64>::zero(1);
        let z = zero.exp_limit_check(1.0, 4, 3).unwrap();
        assert_eq!(z.max(), 0.0);
        let heat = DiffOp::<f64>::partial(mi(&[2]));
        let d16 = heat.exp_limit_check(1.0, 4, 16).unwrap();
        let d1024 = heat.exp_limit_check(1.0, 4, 1024).unwrap();
        assert!(d1024.forward < d16.forward && d1024.backward < d16.backward);
        // resolvent of x∂ on monomials
        let euler = DiffOp::new(1, Truncation::Exact, [(mi(&[1]), p1("x"))]).unwrap();
        let (t, k, d) = (0.5f64, 4u32, 5u32);
        let m = euler.matrix_rep(d).unwrap().into_matrix();
        let step = m.scale(t / k as f64);
        let res = (&Matrix::identity(6) - &step).inverse().unwrap();
        for j in 0..=5 {
            let want = 1.0 / (1.0 - t * j as f64 / k as f64);
            assert!((res[(j, j)] - want).abs() < 1e-13 * want.abs());
        }
    }

    #[test]
    fn log_examples() {
        let id = DiffOp::<f64>::identity(1);
        assert!(id.log_op(5).unwrap().coeffs().all(|(_, q)| q.max_abs_coeff() < 1e-15));
        let c = 0.8;
        let shift = DiffOp::constant(1, Truncation::Exact, [(mi(&[1]), c)]).exp_op(1.0, 6).unwrap();
        let back = shift.log_op(6).unwrap();
        let want = DiffOp::constant(1, Truncation::UpTo(6), [(mi(&[1]), c)]);
        assert!(coeff_diff(&back, &want) < 1e-12);
        let heat = DiffOp::constant(1, Truncation::Exact, [(mi(&[0]), 1.0), (mi(&[2]), 1.0)]);
        let e = heat.exp_op(1.0, 6).unwrap();
        assert!((e.q0().unwrap() - std::f64::consts::E).abs() < 1e-14);
        assert!(coeff_diff(&e.log_op(6).unwrap(), &heat) < 1e-10);
        assert!(matches!(drift_generator(1.0).log_op(2), Err(Error::Unsupported(_))));
        assert!(DiffOp::<f64>::scalar(1, -1.0).log_op(2).is_err());
    }

    #[test]
    fn substitution_preserver_examples() {
        let x = vec![p1("x")];
        let delta0 = MomentSeq::from_measure(&DiscreteMeasure::dirac(vec![0.0]), 6);
        let t = DiffOp::build_substitution_preserver(&x, &delta0, 6).unwrap();
        assert!(coeff_diff(&t, &DiffOp::identity(1)) == 0.0);
        let mu = DiscreteMeasure::new(1, vec![(vec![2.0], 0.5), (vec![-1.0], 1.5)]).unwrap();
        let s = MomentSeq::from_measure(&mu, 5);
        let t = DiffOp::build_substitution_preserver(&[p1("1")], &s, 5).unwrap();
        assert!(coeff_diff(&t, &crate::momseq::dop_from_seq(&s)) < 1e-15);
        let delta1 = MomentSeq::from_measure(&DiscreteMeasure::dirac(vec![1.0]), 6);
        let t = DiffOp::build_substitution_preserver(&x, &delta1, 6).unwrap();
        assert!(t.in_algebra());
        let sq = DiffOp::build_substitution_preserver(&[p1("x^2")], &delta1, 6).unwrap();
        assert!(!sq.in_algebra());
        for y in [-2.0, 0.5, 3.0] {
            for k in 0..=6u32 {
                let a = mi(&[k]);
                let v = t.coeff(&a).eval(&[y]).unwrap() * a.factorial_scalar::<f64>();
                assert!((v - y.powi(k as i32)).abs() < 1e-12 * (1.0 + y.abs().powi(k as i32)));
            }
        }
    }

    fn arb_const_op(d: u32) -> impl Strategy<Value = DiffOp<f64>> {
        (0.2f64..3.0, prop::collection::vec(-1.0f64..1.0, d as usize)).prop_map(move |(a0, rest)| {
            DiffOp::constant(
                1,
                Truncation::Exact,
                std::iter::once((mi(&[0]), a0))
                    .chain(rest.into_iter().enumerate().map(|(k, c)| (mi(&[k as u32 + 1]), c))),
            )
        })
    }

    // diagonal entries q_0 + m c_2 + m(m-1) c_5 stay >= 1, keeping restrictions well conditioned
    fn arb_algebra_op() -> impl Strategy<Value = DiffOp<f64>> {
        prop::collection::vec(-1.0f64..1.0, 6).prop_map(|c| {
            DiffOp::new(
                1,
                Truncation::Exact,
                [
                    (mi(&[0]), Poly::constant(1, 1.0 + c[0].abs())),
                    (mi(&[1]), Poly::from_coeffs(&[c[1], c[2].abs()])),
                    (mi(&[2]), Poly::from_coeffs(&[c[3], c[4], c[5].abs()])),
                ],
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn degree_never_grows(t in arb_algebra_op(), p in prop::collection::vec(-2.0f64..2.0, 1..7)) {
            let p = Poly::from_coeffs(&p);
            prop_assert!(t.apply(&p).unwrap().degree() <= p.degree());
        }

        #[test]
        fn compose_is_matrix_product(t in arb_algebra_op(), s in arb_algebra_op()) {
            let d = 5;
            let ts = t.compose(&s, d).unwrap();
            let lhs = ts.matrix_rep(d).unwrap().into_matrix();
            let rhs = &t.matrix_rep(d).unwrap().into_matrix() * &s.matrix_rep(d).unwrap().into_matrix();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-11 * rhs.max_abs().max(1.0));
        }

        #[test]
        fn inverse_is_two_sided(t in arb_algebra_op()) {
            for d in [3u32, 6] {
                let inv = t.invert(d).unwrap();
                let id = DiffOp::identity(1);
                prop_assert!(coeff_diff(&t.compose(&inv, d).unwrap(), &id) < 1e-10);
                prop_assert!(coeff_diff(&inv.compose(&t, d).unwrap(), &id) < 1e-10);
                prop_assert!(coeff_diff(&inv, &t.invert_via_matrix(d).unwrap()) < 1e-9);
            }
        }

        #[test]
        fn constant_operators_commute(s in arb_const_op(6), t in arb_const_op(6)) {
            prop_assert_eq!(s.compose(&t, 6).unwrap(), t.compose(&s, 6).unwrap());
        }

        #[test]
        fn exp_log_round_trip(t in arb_const_op(5)) {
            let log = t.log_op(5).unwrap();
            let back = log.exp_op(1.0, 5).unwrap();
            let scale = t.coeffs().map(|(_, q)| q.max_abs_coeff()).fold(1.0, f64::max);
            prop_assert!(coeff_diff(&back, &t) < 1e-10 * scale);
        }
    }
}
