//! Eventual positivity: threshold curves, bisection and closed forms for the
//! cubic Euler semigroup and the drift–diffusion example.

use crate::diffop::{DiffOp, Truncation};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::linalg::Matrix;
use crate::momseq::{self, MomentSeq};
use crate::multiindex::MultiIndex;
use crate::poly::Poly;
use crate::preserver::Grid;
use crate::scalar::Scalar;

/// Upper end of the automatic bracket search for the drift threshold.
pub const DRIFT_T_MAX: f64 = 50.0;

/// Sign bracket `curve(tau_lo) < 0 < curve(tau_hi)` with all evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdResult<F> {
    pub tau_lo: F,
    pub tau_hi: F,
    pub iterations: usize,
    pub curve: Vec<(F, F)>,
}

impl<F: Scalar> ThresholdResult<F> {
    pub fn midpoint(&self) -> F {
        (self.tau_lo + self.tau_hi) * F::lit(0.5)
    }

    pub fn width(&self) -> F {
        self.tau_hi - self.tau_lo
    }
}

/// Bisection of a sign change; the midpoint rule is `lo + (hi − lo)/2`.
pub fn find_tau<F: Scalar>(
    mut curve: impl FnMut(F) -> F,
    lo: F,
    hi: F,
    tol: F,
) -> Result<ThresholdResult<F>> {
    if !(tol > F::zero()) || !(lo < hi) {
        return Err(Error::Invalid("need lo < hi and tol > 0".into()));
    }
    let mut samples = Vec::new();
    let flo = curve(lo);
    let fhi = curve(hi);
    samples.push((lo, flo));
    samples.push((hi, fhi));
    if !(flo < F::zero() && fhi > F::zero()) {
        return Err(Error::NoSignChange {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = lo + (hi - lo) * F::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = curve(mid);
        samples.push((mid, v));
        iterations += 1;
        if v < F::zero() {
            lo = mid;
        } else if v > F::zero() {
            hi = mid;
        } else {
            lo = mid - tol * F::lit(0.25);
            hi = mid + tol * F::lit(0.25);
            break;
        }
    }
    Ok(ThresholdResult {
        tau_lo: lo,
        tau_hi: hi,
        iterations,
        curve: samples,
    })
}

/// `λ_k(t) = e^{t k^3}` for `k = 0..=4`.
pub fn sigma_lambda<F: Scalar>(t: F) -> MomentSeq<F> {
    MomentSeq::from_fn(1, 4, |a| {
        let k = F::from_count(u64::from(a.degree()));
        (t * k * k * k).exp()
    })
    .expect("univariate order 4")
}

// expm1(z) − z without cancellation for small z
fn phi<F: Scalar>(z: F) -> F {
    if z.abs() < F::lit(0.1) {
        let mut term = z * z * F::lit(0.5);
        let mut sum = term;
        for k in 3..30u64 {
            term = term * z / F::from_count(k);
            sum += term;
            if term.abs() <= F::epsilon() * sum.abs() {
                break;
            }
        }
        sum
    } else {
        z.exp_m1() - z
    }
}

/// `h_2(t) = e^{72t} − e^{66t} − e^{54t} + 2e^{36t} − e^{24t}`, evaluated as
/// `e^{24t}·Σ c_k (e^{kt} − 1 − kt)` to avoid cancellation near zero.
pub fn sigma_h2<F: Scalar>(t: F) -> F {
    (t * F::lit(24.0)).exp() * sigma_h2_reduced(t)
}

/// `e^{-24t} h_2(t)`; same sign as `h_2` and finite for all `t`.
pub fn sigma_h2_reduced<F: Scalar>(t: F) -> F {
    let c = |k: f64| phi(t * F::lit(k));
    c(48.0) - c(42.0) - c(30.0) + F::lit(2.0) * c(12.0)
}

/// One sample of the cubic Euler example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaPoint<F> {
    pub t: F,
    /// Closed form.
    pub h2: F,
    /// Determinant of the `3 x 3` Hankel matrix.
    pub h2_det: F,
    /// Smallest eigenvalue of the Hankel matrix.
    pub sigma3: F,
}

pub fn sigma_example_curve<F: Scalar>(t: F) -> Result<SigmaPoint<F>> {
    let h = momseq::moment_matrix(&sigma_lambda(t), 2, None)?;
    let m = h.matrix();
    // unit-diagonal rescaling keeps the determinant well conditioned for large t
    let diag: Vec<F> = (0..3).map(|i| m[(i, i)]).collect();
    let c = Matrix::from_fn(3, 3, |i, j| m[(i, j)] / (diag[i] * diag[j]).sqrt());
    let h2_det = c.determinant() * diag.iter().fold(F::one(), |acc, d| acc * *d);
    Ok(SigmaPoint {
        t,
        h2: sigma_h2(t),
        h2_det,
        sigma3: m.symmetric_eigenvalues()[0],
    })
}

/// Generator `(x∂)^3 = x∂ + 3x^2∂^2 + x^3∂^3`.
pub fn sigma_generator<F: Scalar>() -> DiffOp<F> {
    let q = |k: u32, c: f64| (MultiIndex::new(vec![k]), Poly::monomial(MultiIndex::new(vec![k]), F::lit(c)));
    DiffOp::new(1, Truncation::Exact, [q(1, 1.0), q(2, 3.0), q(3, 1.0)]).expect("degree preserving")
}

/// Threshold of the cubic Euler example on `[1e-4, 0.1]`.
pub fn find_tau_sigma<F: Scalar>(tol: F) -> Result<ThresholdResult<F>> {
    find_tau(sigma_h2_reduced, F::lit(1e-4), F::lit(0.1), tol)
}

/// Drift example generator `a∂ + (x^2 − 1)/2 ∂^2`.
pub fn drift_generator<F: Scalar>(a: F) -> DiffOp<F> {
    let half = F::lit(0.5);
    DiffOp::new(
        1,
        Truncation::Exact,
        [
            (MultiIndex::new(vec![1]), Poly::constant(1, a)),
            (MultiIndex::new(vec![2]), Poly::from_coeffs(&[-half, F::zero(), half])),
        ],
    )
    .expect("degree preserving")
}

/// Both evaluations of `exp(tÃ)` on `{1, x, x^2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftExpm<F> {
    pub closed: Matrix<F>,
    pub generic: Matrix<F>,
}

impl<F: Scalar> DriftExpm<F> {
    /// Largest entrywise relative difference (absolute below unit magnitude).
    pub fn max_rel_diff(&self) -> F {
        let mut worst = F::zero();
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (self.closed[(i, j)], self.generic[(i, j)]);
                worst = worst.max((a - b).abs() / a.abs().max(F::one()));
            }
        }
        worst
    }
}

/// `[[1, at, f], [0, 1, g], [0, 0, e^t]]` with `f = (2a^2 − 1)(e^t − 1) − 2a^2 t`,
/// `g = 2a(e^t − 1)`, alongside `expm(tÃ)`.
pub fn drift_example_expm<F: Scalar>(a: F, t: F) -> DriftExpm<F> {
    let e = t.exp_m1();
    let two = F::lit(2.0);
    let f = (two * a * a - F::one()) * e - two * a * a * t;
    let g = two * a * e;
    let closed = Matrix::from_rows(&[
        vec![F::one(), a * t, f],
        vec![F::zero(), F::one(), g],
        vec![F::zero(), F::zero(), e + F::one()],
    ]);
    let at = Matrix::from_rows(&[
        vec![F::zero(), a, -F::one()],
        vec![F::zero(), F::zero(), two * a],
        vec![F::zero(), F::zero(), F::one()],
    ])
    .scale(t);
    DriftExpm {
        closed,
        generic: at.expm(),
    }
}

fn positive_t<F: Scalar>(t: F) -> Result<()> {
    if t > F::zero() {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("t must be positive, got {t}")))
    }
}

/// Published closed form
/// `m = 1 − e^t + a^2 (5 + 8t + 4t^2 − (10 + 8t + t^2)e^t + 5e^{2t})/(e^t − 1)`,
/// evaluated as `(5a^2 − 1)E − a^2(t^2 + 8t) + 3a^2 t^2/E` with `E = e^t − 1`.
/// This is `h` at `x = +B/(2E)`, not its minimum; see [`h_min`].
pub fn m_min<F: Scalar>(a: F, t: F) -> Result<F> {
    positive_t(t)?;
    let e = t.exp_m1();
    let a2 = a * a;
    Ok((F::lit(5.0) * a2 - F::one()) * e - a2 * (t * t + F::lit(8.0) * t) + F::lit(3.0) * a2 * t * t / e)
}

/// `min_x h(x) = (a^2 − 1)E − a^2 t^2 (1 + 1/E)`, the determinant minimum of `exp(tA)`.
pub fn h_min<F: Scalar>(a: F, t: F) -> Result<F> {
    positive_t(t)?;
    let e = t.exp_m1();
    let a2 = a * a;
    Ok((a2 - F::one()) * e - a2 * t * t * (F::one() + F::one() / e))
}

fn bracket_and_bisect<F: Scalar>(
    curve: &dyn Fn(F) -> F,
    tol: F,
    t_max: F,
) -> Result<ThresholdResult<F>> {
    let mut lo = tol;
    if !(curve(lo) < F::zero()) {
        return Err(Error::NoSignChange {
            lo: 0.0,
            hi: lo.as_f64(),
        });
    }
    loop {
        let hi = (lo * F::lit(2.0)).min(t_max);
        if curve(hi) > F::zero() {
            return find_tau(curve, lo, hi, tol);
        }
        if hi >= t_max {
            return Err(Error::NoSignChange {
                lo: tol.as_f64(),
                hi: t_max.as_f64(),
            });
        }
        lo = hi;
    }
}

/// Threshold of the published closed form by geometric bracketing from `t = tol`
/// up to `t = 50`, then bisection; `a` and `−a` must agree.
pub fn find_tau_drift<F: Scalar>(a: F, tol: F) -> Result<ThresholdResult<F>> {
    drift_threshold(a, tol, &|a, t| m_min(a, t).expect("t > 0"))
}

/// Same search on the exact determinant minimum [`h_min`].
pub fn find_tau_drift_exact<F: Scalar>(a: F, tol: F) -> Result<ThresholdResult<F>> {
    drift_threshold(a, tol, &|a, t| h_min(a, t).expect("t > 0"))
}

fn drift_threshold<F: Scalar>(a: F, tol: F, m: &dyn Fn(F, F) -> F) -> Result<ThresholdResult<F>> {
    if !(tol > F::zero()) {
        return Err(Error::Invalid("tolerance must be positive".into()));
    }
    let t_max = F::lit(DRIFT_T_MAX);
    let plus = bracket_and_bisect(&|t| m(a, t), tol, t_max)?;
    let minus = bracket_and_bisect(&|t| m(-a, t), tol, t_max)?;
    if plus.tau_lo != minus.tau_lo || plus.tau_hi != minus.tau_hi {
        return Err(Error::Invalid(format!("thresholds for a = ±{a} differ")));
    }
    Ok(plus)
}

/// `t,h2,sigma3` rows.
pub fn sigma_curve_csv<F: Scalar>(ts: &[F]) -> Result<String> {
    let mut out = String::from("t,h2,sigma3\n");
    for &t in ts {
        let p = sigma_example_curve(t)?;
        out.push_str(&format!("{},{},{}\n", g17(t), g17(p.h2), g17(p.sigma3)));
    }
    Ok(out)
}

/// `t,m` rows of the published closed form.
pub fn drift_curve_csv<F: Scalar>(a: F, ts: &[F]) -> Result<String> {
    let mut out = String::from("t,m\n");
    for &t in ts {
        out.push_str(&format!("{},{}\n", g17(t), g17(m_min(a, t)?)));
    }
    Ok(out)
}

/// Smallest sampled `t` from which `e^{tA}p` stays nonnegative on the grid at every
/// later sample. Best effort: no termination guarantee beyond the samples.
pub fn tau_for_polynomial<F: Scalar>(
    a: &DiffOp<F>,
    p: &Poly<F>,
    ts: &[F],
    grid: &Grid<F>,
) -> Result<Option<F>> {
    let d = p.degree().unwrap_or(0);
    let points = grid.points();
    let mut ts = ts.to_vec();
    ts.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    let mut first_ok = None;
    for &t in &ts {
        let q = a.exp_op(t, d)?.apply(p)?;
        let mut ok = true;
        for x in &points {
            if q.eval(x)? < -F::lit(1e-12) * q.eval_abs(x)? {
                ok = false;
                break;
            }
        }
        if ok {
            first_ok.get_or_insert(t);
        } else {
            first_ok = None;
        }
    }
    Ok(first_ok)
}
