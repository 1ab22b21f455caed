//! Truncated multi-indexed sequences `(s_α)_{|α|<=M}` and their moment matrices.

use std::fmt;

use crate::diffop::{DiffOp, Truncation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::multiindex::{BasisMap, MultiIndex};
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Dense sequence indexed by the graded basis of `R[x]_{<=M}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSeq<F> {
    basis: BasisMap,
    values: Vec<F>,
}

impl<F: Scalar> MomentSeq<F> {
    /// `values` follow the graded order of [`BasisMap`].
    pub fn new(n: usize, order: u32, values: Vec<F>) -> Result<Self> {
        let basis = BasisMap::new(n, order);
        if values.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite moment at {}",
                basis.multiindex_at(i)?
            )));
        }
        Ok(MomentSeq { basis, values })
    }

    pub fn from_fn(n: usize, order: u32, mut f: impl FnMut(&MultiIndex) -> F) -> Result<Self> {
        let basis = BasisMap::new(n, order);
        let values = basis.iter().map(&mut f).collect();
        Self::new(n, order, values)
    }

    pub fn zeros(n: usize, order: u32) -> Self {
        let basis = BasisMap::new(n, order);
        let values = vec![F::zero(); basis.dim()];
        MomentSeq { basis, values }
    }

    /// Moments of `δ_0`, the unit for convolution.
    pub fn unit(n: usize, order: u32) -> Self {
        let mut s = Self::zeros(n, order);
        s.values[0] = F::one();
        s
    }

    /// `s_α = Σ w x^α` over the atoms, summed in atom order.
    pub fn from_measure(mu: &DiscreteMeasure<F>, order: u32) -> Self {
        let basis = BasisMap::new(mu.n(), order);
        let values = basis
            .iter()
            .map(|a| {
                mu.atoms()
                    .iter()
                    .fold(F::zero(), |acc, (x, w)| acc + *w * a.monomial_value(x))
            })
            .collect();
        MomentSeq { basis, values }
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn order(&self) -> u32 {
        self.basis.degree()
    }

    pub fn basis(&self) -> &BasisMap {
        &self.basis
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn get(&self, alpha: &MultiIndex) -> Result<F> {
        if alpha.n() == self.n() && alpha.degree() > self.order() {
            return Err(Error::Truncation {
                needed: alpha.degree(),
                available: self.order(),
            });
        }
        Ok(self.values[self.basis.index_of(alpha)?])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, F)> {
        self.basis.iter().zip(self.values.iter().copied())
    }

    pub fn truncate(&self, order: u32) -> Result<Self> {
        if order > self.order() {
            return Err(Error::Truncation {
                needed: order,
                available: self.order(),
            });
        }
        let len = self.basis.prefix_len(order);
        Ok(MomentSeq {
            basis: BasisMap::new(self.n(), order),
            values: self.values[..len].to_vec(),
        })
    }

    pub fn scale(&self, c: F) -> Self {
        MomentSeq {
            basis: self.basis.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    /// Entrywise sum at the smaller order.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let (a, b) = common(self, other)?;
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| x + y).collect();
        Ok(MomentSeq {
            basis: a.basis,
            values,
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> F {
        self.values
            .iter()
            .zip(&other.values)
            .fold(F::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl<F: Scalar> fmt::Display for MomentSeq<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, v)) in self.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{a} = {v}")?;
        }
        Ok(())
    }
}

fn common<F: Scalar>(s: &MomentSeq<F>, t: &MomentSeq<F>) -> Result<(MomentSeq<F>, MomentSeq<F>)> {
    if s.n() != t.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            found: t.n(),
        });
    }
    let order = s.order().min(t.order());
    Ok((s.truncate(order)?, t.truncate(order)?))
}

/// Finitely atomic positive measure.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<F> {
    n: usize,
    atoms: Vec<(Vec<F>, F)>,
}

impl<F: Scalar> DiscreteMeasure<F> {
    pub fn new(n: usize, atoms: Vec<(Vec<F>, F)>) -> Result<Self> {
        for (x, w) in &atoms {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: x.len(),
                });
            }
            if !(*w > F::zero()) || !w.is_finite() {
                return Err(Error::Invalid(format!("atom weight {w} is not positive")));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("non-finite atom location".into()));
            }
        }
        Ok(DiscreteMeasure { n, atoms })
    }

    pub fn empty(n: usize) -> Self {
        DiscreteMeasure {
            n,
            atoms: Vec::new(),
        }
    }

    /// Unit point mass at `c`.
    pub fn dirac(c: Vec<F>) -> Self {
        DiscreteMeasure {
            n: c.len(),
            atoms: vec![(c, F::one())],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[(Vec<F>, F)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> F {
        self.atoms.iter().map(|(_, w)| *w).sum()
    }

    /// `μ + ν` as the concatenation of atoms.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        Ok(DiscreteMeasure { n: self.n, atoms })
    }

    pub fn scale(&self, c: F) -> Result<Self> {
        Self::new(
            self.n,
            self.atoms.iter().map(|(x, w)| (x.clone(), *w * c)).collect(),
        )
    }
}

/// Free-function form of [`MomentSeq::from_measure`].
pub fn from_measure<F: Scalar>(mu: &DiscreteMeasure<F>, order: u32) -> MomentSeq<F> {
    MomentSeq::from_measure(mu, order)
}

/// `D(s) = Σ s_α / α! ∂^α`.
pub fn dop_from_seq<F: Scalar>(s: &MomentSeq<F>) -> DiffOp<F> {
    DiffOp::constant(
        s.n(),
        Truncation::UpTo(s.order()),
        s.iter().map(|(a, v)| (a.clone(), v / a.factorial_scalar::<F>())),
    )
}

/// `u_α = Σ_{β<=α} binom(α,β) s_β t_{α−β}`.
pub fn convolve<F: Scalar>(s: &MomentSeq<F>, t: &MomentSeq<F>) -> Result<MomentSeq<F>> {
    let (s, t) = common(s, t)?;
    let basis = s.basis.clone();
    let mut values = Vec::with_capacity(basis.dim());
    for alpha in basis.iter() {
        let mut acc = F::zero();
        for beta in alpha.lower_set() {
            let rest = alpha.checked_sub(&beta).expect("beta below alpha");
            acc += alpha.binomial_scalar::<F>(&beta)
                * s.values[basis.index_of(&beta)?]
                * t.values[basis.index_of(&rest)?];
        }
        values.push(acc);
    }
    Ok(MomentSeq { basis, values })
}

/// `(s_α t_α)`.
pub fn hadamard<F: Scalar>(s: &MomentSeq<F>, t: &MomentSeq<F>) -> Result<MomentSeq<F>> {
    let (s, t) = common(s, t)?;
    let values = s.values.iter().zip(&t.values).map(|(&a, &b)| a * b).collect();
    Ok(MomentSeq {
        basis: s.basis,
        values,
    })
}

/// Convolution exponential `Σ_k t^k/k! s^{*k}` at the truncation order of `s`.
///
/// Splitting `s = s_0 δ_0 + s̃` with `s̃_0 = 0`, the `k`-fold power of `s̃` vanishes
/// below degree `k`, so `e^{t s_0} Σ_{k<=M} t^k/k! s̃^{*k}` is exact.
pub fn conv_exp<F: Scalar>(s: &MomentSeq<F>, t: F) -> MomentSeq<F> {
    let order = s.order();
    let s0 = s.values[0];
    let mut tilde = s.clone();
    tilde.values[0] = F::zero();
    let mut term = MomentSeq::unit(s.n(), order);
    let mut sum = term.clone();
    for k in 1..=order {
        term = convolve(&term, &tilde)
            .expect("equal shapes")
            .scale(t / F::from_count(u64::from(k)));
        for (acc, v) in sum.values.iter_mut().zip(&term.values) {
            *acc += *v;
        }
    }
    sum.scale((t * s0).exp())
}

/// Symmetric matrix with entries `Σ_κ w_κ s_{β+γ+κ}`, rows indexed by `|β| <= d`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix<F> {
    basis: BasisMap,
    matrix: Matrix<F>,
}

impl<F: Scalar> MomentMatrix<F> {
    pub fn basis(&self) -> &BasisMap {
        &self.basis
    }

    pub fn matrix(&self) -> &Matrix<F> {
        &self.matrix
    }

    pub fn is_psd(&self, tol: F) -> PsdReport<F> {
        is_psd(&self.matrix, tol)
    }
}

pub fn moment_matrix<F: Scalar>(
    s: &MomentSeq<F>,
    d: u32,
    w: Option<&Poly<F>>,
) -> Result<MomentMatrix<F>> {
    let one = Poly::one(s.n());
    let w = w.unwrap_or(&one);
    if w.n() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            found: w.n(),
        });
    }
    let needed = 2 * d + w.degree().unwrap_or(0);
    if s.order() < needed {
        return Err(Error::Truncation {
            needed,
            available: s.order(),
        });
    }
    let basis = BasisMap::new(s.n(), d);
    let dim = basis.dim();
    let mut m = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let bg = basis.multiindex_at(i)?.add(basis.multiindex_at(j)?);
            let mut v = F::zero();
            for (kappa, c) in w.terms() {
                v += c * s.get(&bg.add(kappa))?;
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(MomentMatrix { basis, matrix: m })
}

/// Outcome of a semidefiniteness test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdReport<F> {
    pub psd: bool,
    pub min_eigenvalue: F,
    /// Eigenvalues at or above `-threshold` count as nonnegative.
    pub threshold: F,
}

/// `λ_min >= −tol · max(1, ‖M‖_∞)`.
pub fn is_psd<F: Scalar>(m: &Matrix<F>, tol: F) -> PsdReport<F> {
    let threshold = tol * F::one().max(m.norm_inf());
    let min_eigenvalue = m
        .symmetric_eigenvalues()
        .first()
        .copied()
        .unwrap_or_else(F::zero);
    PsdReport {
        psd: min_eigenvalue >= -threshold,
        min_eigenvalue,
        threshold,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CarlemanVerdict {
    DivergesLikely,
    ConvergesLikely,
    Unknown,
}

impl fmt::Display for CarlemanVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CarlemanVerdict::DivergesLikely => "DivergesLikely",
            CarlemanVerdict::ConvergesLikely => "ConvergesLikely",
            CarlemanVerdict::Unknown => "Unknown",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanMarginal<F> {
    /// `Σ_{k<=K} s_{2k}^{-1/2k}`; `None` when some even moment is not positive.
    pub partial_sum: Option<F>,
    /// Fitted exponent `p` in `s_{2k}^{1/2k} ~ k^p`.
    pub exponent: Option<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarlemanReport<F> {
    pub verdict: CarlemanVerdict,
    pub marginals: Vec<CarlemanMarginal<F>>,
}

/// Margin above 1 that the fitted exponent must clear before convergence is reported.
pub const CARLEMAN_MARGIN: f64 = 0.25;

/// Heuristic reading of the Carleman series from the first `terms` even marginal moments.
pub fn carleman_indicator<F: Scalar>(s: &MomentSeq<F>, terms: u32) -> Result<CarlemanReport<F>> {
    if terms < 2 {
        return Err(Error::Invalid("at least two terms are needed".into()));
    }
    let n = s.n();
    let mut marginals = Vec::with_capacity(n);
    for j in 0..n {
        let mut logs = Vec::with_capacity(terms as usize);
        let mut sum = F::zero();
        let mut positive = true;
        for k in 1..=terms {
            let m = s.get(&MultiIndex::axis(n, j, 2 * k))?;
            if !(m > F::zero()) {
                positive = false;
                continue;
            }
            let root_log = m.ln() / F::from_count(u64::from(2 * k));
            sum += (-root_log).exp();
            logs.push((F::from_count(u64::from(k)).ln(), root_log));
        }
        if !positive {
            marginals.push(CarlemanMarginal {
                partial_sum: None,
                exponent: None,
            });
            continue;
        }
        let start = ((terms + 1) / 2) as usize - 1;
        let tail = &logs[start..];
        let exponent = slope(tail);
        marginals.push(CarlemanMarginal {
            partial_sum: Some(sum),
            exponent: exponent.filter(|e| e.is_finite()),
        });
    }
    let exps: Option<Vec<F>> = marginals.iter().map(|m| m.exponent).collect();
    let verdict = match exps {
        None => CarlemanVerdict::Unknown,
        Some(e) => {
            if e.iter().any(|&p| p >= F::one() + F::lit(CARLEMAN_MARGIN)) {
                CarlemanVerdict::ConvergesLikely
            } else if e.iter().all(|&p| p <= F::one()) {
                CarlemanVerdict::DivergesLikely
            } else {
                CarlemanVerdict::Unknown
            }
        }
    };
    Ok(CarlemanReport { verdict, marginals })
}

fn slope<F: Scalar>(pts: &[(F, F)]) -> Option<F> {
    if pts.len() < 2 {
        return None;
    }
    let k = F::from_count(pts.len() as u64);
    let mx = pts.iter().map(|p| p.0).sum::<F>() / k;
    let my = pts.iter().map(|p| p.1).sum::<F>() / k;
    let sxy: F = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: F = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > F::zero()).then(|| sxy / sxx)
}
