//! Lévy–Khinchin generator constructors and sampling checks for candidate generators.

use crate::diffop::{DiffOp, Truncation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::momseq::{self, DiscreteMeasure, MomentSeq};
use crate::multiindex::{BasisMap, MultiIndex};
use crate::poly::Poly;
use crate::preserver::{self, Grid, PreserverVerdict, Sampling, Status, Witness};
use crate::scalar::Scalar;
use crate::univariate::{self, GlobalMin};

pub const DEFAULT_TIMES: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_LAMBDAS: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Constant Lévy data `(a_0, Σ, b, ν)` with atomic `ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyTriple<F> {
    pub a0: F,
    pub sigma: Matrix<F>,
    pub b: Vec<F>,
    pub nu: DiscreteMeasure<F>,
}

impl<F: Scalar> LevyTriple<F> {
    pub fn new(a0: F, sigma: Matrix<F>, b: Vec<F>, nu: DiscreteMeasure<F>) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(Error::Invalid("drift vector must be nonempty".into()));
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: sigma.nrows(),
            });
        }
        if nu.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: nu.n(),
            });
        }
        if !sigma.is_symmetric(F::zero()) {
            return Err(Error::Invalid("sigma must be symmetric".into()));
        }
        let lam = sigma.symmetric_eigenvalues().first().copied().unwrap_or_else(F::zero);
        if lam < -F::lit(1e-12) * sigma.norm_inf() {
            return Err(Error::Invalid(format!("sigma has negative eigenvalue {lam}")));
        }
        Ok(LevyTriple { a0, sigma, b, nu })
    }

    /// Pure diffusion-drift data with no jumps.
    pub fn gaussian(a0: F, sigma: Matrix<F>, b: Vec<F>) -> Result<Self> {
        let n = b.len();
        Self::new(a0, sigma, b, DiscreteMeasure::empty(n))
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }
}

/// Symbol `a_α = α! q_α` of the generator built from a triple.
pub fn levy_symbol<F: Scalar>(tr: &LevyTriple<F>, order: u32) -> MomentSeq<F> {
    let n = tr.n();
    let moments = MomentSeq::from_measure(&tr.nu, order);
    MomentSeq::from_fn(n, order, |a| match a.degree() {
        0 => tr.a0,
        1 => {
            let i = a.exponents().iter().position(|e| *e == 1).expect("unit index");
            let big: F = tr
                .nu
                .atoms()
                .iter()
                .filter(|(x, _)| norm2(x) >= F::one())
                .map(|(x, w)| *w * x[i])
                .sum();
            tr.b[i] + big
        }
        2 => {
            let idx: Vec<usize> = a
                .exponents()
                .iter()
                .enumerate()
                .flat_map(|(i, e)| std::iter::repeat(i).take(*e as usize))
                .collect();
            tr.sigma[(idx[0], idx[1])] + moments.get(a).expect("within order")
        }
        _ => moments.get(a).expect("within order"),
    })
    .expect("shape from basis")
}

fn norm2<F: Scalar>(x: &[F]) -> F {
    x.iter().map(|v| *v * *v).sum::<F>().sqrt()
}

/// Constant-coefficient generator `Σ a_α/α! ∂^α` with the Lévy–Khinchin symbol.
/// Exact when `ν = 0`, otherwise truncated at `order`.
pub fn generator_from_levy<F: Scalar>(tr: &LevyTriple<F>, order: u32) -> DiffOp<F> {
    let trunc = if tr.nu.is_empty() {
        Truncation::Exact
    } else {
        Truncation::UpTo(order)
    };
    let order = if tr.nu.is_empty() { order.min(2) } else { order };
    let a = levy_symbol(tr, order);
    DiffOp::constant(
        tr.n(),
        trunc,
        a.iter()
            .filter(|(_, v)| *v != F::zero())
            .map(|(al, v)| (al.clone(), v / al.factorial_scalar::<F>())),
    )
}

/// Half-line generator: `a_1 = b + Σ w x`, `a_k = Σ w x^k` for `k >= 2`.
pub fn generator_from_levy_halfline<F: Scalar>(
    a0: F,
    b: F,
    nu: &DiscreteMeasure<F>,
    order: u32,
) -> Result<DiffOp<F>> {
    if nu.n() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: nu.n(),
        });
    }
    if b < F::zero() {
        return Err(Error::Invalid(format!("half-line drift must be >= 0, got {b}")));
    }
    if let Some((x, _)) = nu.atoms().iter().find(|(x, _)| x[0] <= F::zero()) {
        return Err(Error::Invalid(format!("jump {} does not lie in (0, ∞)", x[0])));
    }
    let m = MomentSeq::from_measure(nu, order);
    let trunc = if nu.is_empty() {
        Truncation::Exact
    } else {
        Truncation::UpTo(order)
    };
    let mut coeffs = vec![(MultiIndex::new(vec![0]), a0)];
    for k in 1..=order {
        let a = MultiIndex::new(vec![k]);
        let mut v = m.values()[k as usize];
        if k == 1 {
            v += b;
        }
        coeffs.push((a.clone(), v / a.factorial_scalar::<F>()));
    }
    Ok(DiffOp::constant(
        1,
        trunc,
        coeffs.into_iter().filter(|(_, v)| *v != F::zero()),
    ))
}

/// Moments of the representing measure `e^{a_0 t}·e^{*t s} * δ_{β t}` of `e^{tA}`
/// for `A = D(s) + β·∇ + a_0`.
pub fn semigroup_moments<F: Scalar>(a0: F, beta: &[F], s: &MomentSeq<F>, t: F) -> Result<MomentSeq<F>> {
    if beta.len() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            found: beta.len(),
        });
    }
    let jumps = momseq::conv_exp(s, t);
    let shift = MomentSeq::from_measure(
        &DiscreteMeasure::dirac(beta.iter().map(|b| *b * t).collect()),
        s.order(),
    );
    Ok(momseq::convolve(&jumps, &shift)?.scale((a0 * t).exp()))
}

fn require_order<F: Scalar>(a: &DiffOp<F>, needed: u32) -> Result<()> {
    match a.truncation() {
        Truncation::UpTo(m) if m < needed => Err(Error::Truncation {
            needed,
            available: m,
        }),
        _ => Ok(()),
    }
}

/// Freezes `A` at each `y`, exponentiates for each `t` and runs the full-space check.
/// A failure refutes that `A` generates a positivity-preserving semigroup.
pub fn check_generator_rn<F: Scalar>(
    a: &DiffOp<F>,
    d: u32,
    ys: &[Vec<F>],
    ts: &[F],
    tol: F,
) -> Result<PreserverVerdict<F>> {
    require_order(a, 2 * d)?;
    if !a.in_algebra() {
        return Err(Error::NotInAlgebra("generator must preserve degree".into()));
    }
    let mut parts = Vec::new();
    for y in ys {
        let ay = a.freeze_at(y)?;
        for &t in ts {
            let tt = ay.exp_op(t, 2 * d)?;
            let v = preserver::check_preserver_rn(&tt, d, std::slice::from_ref(y), tol)?;
            parts.push(preserver::tag_param(v, t));
        }
    }
    Ok(PreserverVerdict::combine(parts))
}

/// Half-line analogue of [`check_generator_rn`] with localizing matrices.
pub fn check_generator_halfline<F: Scalar>(
    a: &DiffOp<F>,
    d: u32,
    ys: &[F],
    ts: &[F],
    tol: F,
) -> Result<PreserverVerdict<F>> {
    require_order(a, 2 * d + 1)?;
    let mut parts = Vec::new();
    for &y in ys {
        let ay = a.freeze_at(&[y])?;
        for &t in ts {
            let tt = ay.exp_op(t, 2 * d + 1)?;
            let v = preserver::check_preserver_halfline(&tt, d, &[y], tol)?;
            parts.push(preserver::tag_param(v, t));
        }
    }
    Ok(PreserverVerdict::combine(parts))
}

/// Second-order coefficient matrix `σ_ij(y) = (e_i + e_j)! q_{e_i+e_j}(y)`.
pub fn diffusion_matrix<F: Scalar>(a: &DiffOp<F>, y: &[F]) -> Result<Matrix<F>> {
    let n = a.n();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let al = MultiIndex::unit(n, i).add(&MultiIndex::unit(n, j));
            let v = a.coeff(&al).eval(y)? * al.factorial_scalar::<F>();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Order at most two with a pointwise PSD diffusion matrix. In one variable the
/// sign of `q_2` is decided on all of `R`, not only at the samples.
pub fn check_finite_order_generator<F: Scalar>(
    a: &DiffOp<F>,
    ys: &[Vec<F>],
    tol: F,
) -> Result<PreserverVerdict<F>> {
    let n = a.n();
    let mut witnesses = Vec::new();
    let mut checked = Sampling::default();
    if let Some((al, _)) = a.coeffs().find(|(al, _)| al.degree() >= 3) {
        witnesses.push(Witness::Coefficient {
            y: Vec::new(),
            detail: format!("nonzero coefficient of order {} at {al}", al.degree()),
        });
    }
    if !a.in_algebra() {
        witnesses.push(Witness::Coefficient {
            y: Vec::new(),
            detail: "a coefficient exceeds its degree bound".into(),
        });
    }
    if n == 1 && witnesses.is_empty() {
        checked.tests += 1;
        let q2 = a.coeff(&MultiIndex::new(vec![2]));
        match univariate::global_minimum(&q2.univariate_coeffs()?)? {
            GlobalMin::Attained { value, at } if value < -tol * q2.max_abs_coeff().max(F::one()) => {
                witnesses.push(Witness::Coefficient {
                    y: vec![at],
                    detail: format!("second-order coefficient {value} < 0"),
                })
            }
            GlobalMin::Unbounded => witnesses.push(Witness::Coefficient {
                y: Vec::new(),
                detail: "second-order coefficient unbounded below".into(),
            }),
            _ => {}
        }
    }
    for y in ys {
        checked.points += 1;
        checked.tests += 1;
        let r = momseq::is_psd(&diffusion_matrix(a, y)?, tol);
        if !r.psd {
            witnesses.push(Witness::Eigen {
                y: y.clone(),
                d: 1,
                min_eigenvalue: r.min_eigenvalue,
                weight: None,
                param: None,
            });
        }
    }
    let status = if witnesses.is_empty() {
        Status::Inconclusive
    } else {
        Status::Fail
    };
    Ok(PreserverVerdict {
        status,
        witnesses,
        checked,
        tol,
    })
}

/// Outcome of a resolvent or `1 + λA` sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport<F> {
    pub verdict: PreserverVerdict<F>,
    /// Parameters at which every trial image stayed nonnegative.
    pub passed: Vec<F>,
    /// Parameters at which `1 − λA_d` was singular.
    pub singular: Vec<F>,
}

/// `q = (1 − λA_d)^{-1} p` on `R[x]_{<=d}`.
pub fn resolvent_apply<F: Scalar>(a: &DiffOp<F>, d: u32, lambda: F, p: &Poly<F>) -> Result<Poly<F>> {
    let m = a.matrix_rep(d)?;
    let basis = m.basis().clone();
    let dim = basis.dim();
    let sys = &Matrix::identity(dim) - &m.matrix().scale(lambda);
    let coords = sys.solve(&p.to_coords(&basis)?)?;
    Ok(Poly::from_coords(&basis, &coords))
}

fn sweep<F: Scalar>(
    lambdas: &[F],
    trials: &[Poly<F>],
    grid: &Grid<F>,
    mut image: impl FnMut(F, &Poly<F>) -> Result<Poly<F>>,
) -> Result<SweepReport<F>> {
    let points = grid.points();
    let mut parts = Vec::new();
    let mut passed = Vec::new();
    let mut singular = Vec::new();
    'lam: for &l in lambdas {
        let mut images = Vec::with_capacity(trials.len());
        for p in trials {
            match image(l, p) {
                Ok(q) => images.push(q),
                Err(Error::Singular) => {
                    singular.push(l);
                    continue 'lam;
                }
                Err(e) => return Err(e),
            }
        }
        let v = preserver::falsify_images(trials, &images, &points, Some(l));
        if v.witnesses.is_empty() {
            passed.push(l);
        }
        parts.push(v);
    }
    Ok(SweepReport {
        verdict: PreserverVerdict::combine(parts),
        passed,
        singular,
    })
}

/// Grid falsifier for `(1 − λA_d)^{-1} C_d ⊆ C_d`.
pub fn resolvent_check<F: Scalar>(
    a: &DiffOp<F>,
    d: u32,
    lambdas: &[F],
    trials: &[Poly<F>],
    grid: &Grid<F>,
) -> Result<SweepReport<F>> {
    if let Some(p) = trials.iter().find(|p| p.degree().unwrap_or(0) > d) {
        return Err(Error::OutOfRange(format!("trial {p} exceeds degree {d}")));
    }
    sweep(lambdas, trials, grid, |l, p| resolvent_apply(a, d, l, p))
}

/// Grid falsifier for `(1 + λA)C_d ⊆ C_d`.
pub fn one_plus_check<F: Scalar>(
    a: &DiffOp<F>,
    d: u32,
    lambdas: &[F],
    trials: &[Poly<F>],
    grid: &Grid<F>,
) -> Result<SweepReport<F>> {
    if let Some(p) = trials.iter().find(|p| p.degree().unwrap_or(0) > d) {
        return Err(Error::OutOfRange(format!("trial {p} exceeds degree {d}")));
    }
    require_order(a, d)?;
    sweep(lambdas, trials, grid, |l, p| Ok(p + &a.apply(p)?.scale(l)))
}

/// Lévy data with polynomial dependence on the base point.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyField<F> {
    pub a0: F,
    /// Symmetric matrix of polynomials of degree at most 2.
    pub sigma: Vec<Vec<Poly<F>>>,
    /// Drift polynomials of degree at most 1.
    pub b: Vec<Poly<F>>,
    /// Atoms `(x_k(y), w_k(y))` with polynomial positions and weights.
    pub nu: Vec<(Vec<Poly<F>>, Poly<F>)>,
}

impl<F: Scalar> LevyField<F> {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// Polynomial-coefficient generator with symbol `a_α(y)`. The drift field is taken
    /// relative to uncompensated jumps, so every atom contributes to first order.
    pub fn generator(&self, order: u32) -> Result<DiffOp<F>> {
        let n = self.n();
        if self.sigma.len() != n || self.sigma.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("sigma must be n x n".into()));
        }
        if self.nu.iter().any(|(x, _)| x.len() != n) {
            return Err(Error::Invalid("atom positions must have n components".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if self.sigma[i][j] != self.sigma[j][i] {
                    return Err(Error::Invalid("sigma must be symmetric".into()));
                }
                if self.sigma[i][j].degree().unwrap_or(0) > 2 {
                    return Err(Error::Invalid("sigma entries must have degree <= 2".into()));
                }
            }
            if self.b[i].degree().unwrap_or(0) > 1 {
                return Err(Error::Invalid("drift entries must have degree <= 1".into()));
            }
        }
        let order = if self.nu.is_empty() { order.min(2) } else { order };
        let mut coeffs = Vec::new();
        for al in BasisMap::new(n, order).iter() {
            let mut q = Poly::zero(n);
            for (x, w) in &self.nu {
                let mut m = w.clone();
                for (i, e) in al.exponents().iter().enumerate() {
                    m = &m * &x[i].pow(*e);
                }
                q = &q + &m;
            }
            match al.degree() {
                0 => q = Poly::constant(n, self.a0),
                1 => {
                    let i = al.exponents().iter().position(|e| *e == 1).expect("unit index");
                    q = &q + &self.b[i];
                }
                2 => {
                    let idx: Vec<usize> = al
                        .exponents()
                        .iter()
                        .enumerate()
                        .flat_map(|(i, e)| std::iter::repeat(i).take(*e as usize))
                        .collect();
                    q = &q + &self.sigma[idx[0]][idx[1]];
                }
                _ => {}
            }
            if !q.is_zero() {
                coeffs.push((al.clone(), q.scale(F::one() / al.factorial_scalar::<F>())));
            }
        }
        let trunc = if self.nu.is_empty() {
            Truncation::Exact
        } else {
            Truncation::UpTo(order)
        };
        DiffOp::new(n, trunc, coeffs)
    }
}

/// Result of the pointwise sufficiency test on a field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldReport<F> {
    pub verdict: PreserverVerdict<F>,
    /// Assembled generator when no sample failed.
    pub generator: Option<DiffOp<F>>,
}

/// At each `y`: `Σ(y)` PSD and `ν_y` with nonnegative weights.
pub fn check_generator_field_sufficient<F: Scalar>(
    field: &LevyField<F>,
    ys: &[Vec<F>],
    order: u32,
    tol: F,
) -> Result<FieldReport<F>> {
    let gen = field.generator(order)?;
    let n = field.n();
    let mut witnesses = Vec::new();
    let mut checked = Sampling::default();
    for y in ys {
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: y.len(),
            });
        }
        checked.points += 1;
        checked.tests += 1 + field.nu.len();
        let s = Matrix::from_fn(n, n, |i, j| field.sigma[i][j].eval(y).expect("dimension checked"));
        let r = momseq::is_psd(&s, tol);
        if !r.psd {
            witnesses.push(Witness::Eigen {
                y: y.clone(),
                d: 1,
                min_eigenvalue: r.min_eigenvalue,
                weight: None,
                param: None,
            });
        }
        for (k, (_, w)) in field.nu.iter().enumerate() {
            let wy = w.eval(y)?;
            if wy < F::zero() {
                witnesses.push(Witness::Coefficient {
                    y: y.clone(),
                    detail: format!("atom {k} has weight {wy} < 0"),
                });
            }
        }
    }
    let ok = witnesses.is_empty();
    Ok(FieldReport {
        verdict: PreserverVerdict {
            status: if ok { Status::Inconclusive } else { Status::Fail },
            witnesses,
            checked,
            tol,
        },
        generator: ok.then_some(gen),
    })
}
