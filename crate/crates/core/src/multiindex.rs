//! Multi-indices, exact integer combinatorics and the graded monomial basis.
//!
//! Monomials are ordered by total degree first; inside one degree the
//! exponent vectors are ordered lexicographically with `x1` largest, so for
//! two variables the basis of degree two reads `1, x1, x2, x1^2, x1 x2, x2^2`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Exponent vector `α ∈ ℕ₀ⁿ` with `n ≥ 1`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        assert!(!exponents.is_empty(), "multi-index needs at least one variable");
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![0; n])
    }

    /// `e_i` (zero based).
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Self::new(e)
    }

    /// `k·e_i`.
    pub fn axis(n: usize, i: usize, k: u32) -> Self {
        let mut e = vec![0; n];
        e[i] = k;
        Self::new(e)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Total degree `|α|`.
    #[inline]
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        debug_assert_eq!(self.n(), other.n());
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.n(), other.n());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self − other` when `other ≤ self` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        assert_eq!(self.n(), other.n());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    /// All `β` with `β ≤ self` componentwise, in graded order.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; self.n()];
        loop {
            out.push(MultiIndex(cur.clone()));
            let mut i = 0;
            loop {
                if i == cur.len() {
                    out.sort();
                    return out;
                }
                if cur[i] < self.0[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = 0;
                i += 1;
            }
        }
    }

    /// `x^α` evaluated at a point.
    pub fn monomial_value<F: Scalar>(&self, x: &[F]) -> F {
        self.0
            .iter()
            .zip(x)
            .fold(F::one(), |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }

    /// `α! = Π αᵢ!`, exact, `None` on 64-bit overflow.
    pub fn factorial(&self) -> Option<u64> {
        self.0
            .iter()
            .try_fold(1u64, |acc, &e| acc.checked_mul(factorial(e)?))
    }

    /// `binom(α, β) = Π binom(αᵢ, βᵢ)`, zero unless `β ≤ α`.
    pub fn binomial(&self, beta: &MultiIndex) -> Option<u64> {
        self.0
            .iter()
            .zip(&beta.0)
            .try_fold(1u64, |acc, (&a, &b)| acc.checked_mul(binomial(a, b)?))
    }

    /// `α!/(α−β)!`, the factor produced by `∂^β x^α`.
    pub fn falling(&self, beta: &MultiIndex) -> Option<u64> {
        self.0
            .iter()
            .zip(&beta.0)
            .try_fold(1u64, |acc, (&a, &b)| acc.checked_mul(falling(a, b)?))
    }

    pub fn factorial_scalar<F: Scalar>(&self) -> F {
        match self.factorial() {
            Some(v) => F::from_count(v),
            None => self
                .0
                .iter()
                .fold(F::one(), |acc, &e| acc * factorial_float::<F>(e)),
        }
    }

    pub fn binomial_scalar<F: Scalar>(&self, beta: &MultiIndex) -> F {
        match self.binomial(beta) {
            Some(v) => F::from_count(v),
            None => self.0.iter().zip(&beta.0).fold(F::one(), |acc, (&a, &b)| {
                acc * falling_float::<F>(a, b) / factorial_float::<F>(b)
            }),
        }
    }

    pub fn falling_scalar<F: Scalar>(&self, beta: &MultiIndex) -> F {
        match self.falling(beta) {
            Some(v) => F::from_count(v),
            None => self
                .0
                .iter()
                .zip(&beta.0)
                .fold(F::one(), |acc, (&a, &b)| acc * falling_float::<F>(a, b)),
        }
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "]")
    }
}

/// `k!` in 64 bits; `None` for `k > 20`.
pub fn factorial(k: u32) -> Option<u64> {
    (1..=k as u64).try_fold(1u64, |acc, i| acc.checked_mul(i))
}

/// `binom(n, k)`, zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1)
        let num = (acc as u128) * ((n - i) as u128);
        let v = num / ((i + 1) as u128);
        acc = u64::try_from(v).ok()?;
    }
    Some(acc)
}

/// `n (n−1) ⋯ (n−k+1)`, zero when `k > n`.
pub fn falling(n: u32, k: u32) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    ((n - k + 1) as u64..=n as u64).try_fold(1u64, |acc, i| acc.checked_mul(i))
}

fn factorial_float<F: Scalar>(k: u32) -> F {
    (1..=k).fold(F::one(), |acc, i| acc * F::from_count(i as u64))
}

fn falling_float<F: Scalar>(n: u32, k: u32) -> F {
    if k > n {
        return F::zero();
    }
    ((n - k + 1)..=n).fold(F::one(), |acc, i| acc * F::from_count(i as u64))
}

/// Enumerates `{α : |α| ≤ d}` in graded order and indexes it.
#[derive(Clone, Debug)]
pub struct BasisMap {
    n: usize,
    d: u32,
    order: Vec<MultiIndex>,
    index: HashMap<MultiIndex, usize>,
}

impl PartialEq for BasisMap {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }
}

impl BasisMap {
    pub fn new(n: usize, d: u32) -> Self {
        assert!(n >= 1, "basis needs at least one variable");
        let mut order = Vec::new();
        for k in 0..=d {
            push_degree(n, k, &mut Vec::with_capacity(n), &mut order);
        }
        let index = order
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        BasisMap { n, d, order, index }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn degree(&self) -> u32 {
        self.d
    }

    /// `binom(n + d, d)`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.order.len()
    }

    pub fn index_of(&self, alpha: &MultiIndex) -> Result<usize> {
        if alpha.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: alpha.n(),
            });
        }
        self.index
            .get(alpha)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("{alpha} has degree above {}", self.d)))
    }

    pub fn multiindex_at(&self, i: usize) -> Result<&MultiIndex> {
        self.order
            .get(i)
            .ok_or_else(|| Error::OutOfRange(format!("basis position {i} >= {}", self.dim())))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.order.iter()
    }

    pub fn as_slice(&self) -> &[MultiIndex] {
        &self.order
    }

    /// Number of basis elements of degree `≤ k`.
    pub fn prefix_len(&self, k: u32) -> usize {
        self.order.partition_point(|a| a.degree() <= k)
    }
}

fn push_degree(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == n {
        prefix.push(k);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in (0..=k).rev() {
        prefix.push(first);
        push_degree(n, k - first, prefix, out);
        prefix.pop();
    }
}
