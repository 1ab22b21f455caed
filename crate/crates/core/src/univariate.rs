//! Dense univariate polynomials: real roots and global minima on the real line.

use crate::error::Result;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Horner evaluation; `coeffs[k]` multiplies `x^k`.
pub fn horner<F: Scalar>(coeffs: &[F], x: F) -> F {
    coeffs.iter().rev().fold(F::zero(), |acc, &c| acc * x + c)
}

pub fn derivative<F: Scalar>(coeffs: &[F]) -> Vec<F> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * F::from_count(k as u64))
        .collect()
}

fn trimmed<F: Scalar>(coeffs: &[F]) -> &[F] {
    let len = coeffs.iter().rposition(|c| *c != F::zero()).map_or(0, |i| i + 1);
    &coeffs[..len]
}

/// All complex roots as `(re, im)` from the companion matrix.
pub fn roots<F: Scalar>(coeffs: &[F]) -> Result<Vec<(F, F)>> {
    let c = trimmed(coeffs);
    if c.len() <= 1 {
        return Ok(Vec::new());
    }
    let m = c.len() - 1;
    let lead = c[m];
    let comp = Matrix::from_fn(m, m, |i, j| {
        if i == 0 {
            -c[m - 1 - j] / lead
        } else if i == j + 1 {
            F::one()
        } else {
            F::zero()
        }
    });
    comp.eigenvalues()
}

/// Real roots, ascending. Roots with imaginary part below `1e-7 (1 + |z|)` count as real
/// and are polished by Newton steps.
pub fn real_roots<F: Scalar>(coeffs: &[F]) -> Result<Vec<F>> {
    let c = trimmed(coeffs);
    let dc = derivative(c);
    let tol = F::lit(1e-7);
    let mut out: Vec<F> = roots(c)?
        .into_iter()
        .filter(|&(re, im)| im.abs() <= tol * (F::one() + re.abs() + im.abs()))
        .map(|(re, _)| newton(c, &dc, re))
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

fn newton<F: Scalar>(c: &[F], dc: &[F], mut x: F) -> F {
    let mut fx = horner(c, x).abs();
    for _ in 0..8 {
        let d = horner(dc, x);
        if d == F::zero() {
            break;
        }
        let next = x - horner(c, x) / d;
        let fn_ = horner(c, next).abs();
        if !(fn_ < fx) {
            break;
        }
        x = next;
        fx = fn_;
    }
    x
}

/// Global minimum of a real polynomial over the real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GlobalMin<F> {
    Attained { value: F, at: F },
    /// Odd degree or negative leading coefficient.
    Unbounded,
}

pub fn global_minimum<F: Scalar>(coeffs: &[F]) -> Result<GlobalMin<F>> {
    let c = trimmed(coeffs);
    if c.is_empty() {
        return Ok(GlobalMin::Attained {
            value: F::zero(),
            at: F::zero(),
        });
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(GlobalMin::Attained {
            value: c[0],
            at: F::zero(),
        });
    }
    if deg % 2 == 1 || c[deg] < F::zero() {
        return Ok(GlobalMin::Unbounded);
    }
    let dc = derivative(c);
    let ddc = derivative(&dc);
    // every real part is a candidate: a superset of the critical points only sharpens the minimum
    let mut best: Option<(F, F)> = None;
    for (re, _) in roots(&dc)? {
        let x = newton(&dc, &ddc, re);
        for cand in [re, x] {
            let v = horner(c, cand);
            if best.map_or(true, |(bv, _)| v < bv) {
                best = Some((v, cand));
            }
        }
    }
    let (value, at) = best.expect("even degree >= 2 has a critical point");
    Ok(GlobalMin::Attained { value, at })
}
