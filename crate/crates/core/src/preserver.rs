//! Necessary-condition checks, grid falsifiers and constructive certificates for
//! `K`-positivity preservers, plus the `K ↦ K^♯` catalogue.

use std::fmt;
use std::str::FromStr;

use crate::diffop::{DiffOp, Truncation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::momseq::{self, DiscreteMeasure, MomentSeq};
use crate::multiindex::{BasisMap, MultiIndex};
use crate::poly::Poly;
use crate::scalar::Scalar;
use crate::univariate::{self, GlobalMin};

/// Default relative tolerance for semidefiniteness tests.
pub const DEFAULT_PSD_TOL: f64 = 1e-10;
/// Default number of Chebyshev samples per axis.
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 33;
/// Default evaluation grid: points per axis and half-width.
pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const DEFAULT_GRID_RADIUS: f64 = 10.0;
/// A grid value counts as negative below `-FALSIFY_REL_TOL * Σ|c_α x^α|`.
pub const FALSIFY_REL_TOL: f64 = 1e-12;

/// Closed sets `K ⊆ R^n` from the supported catalogue.
#[derive(Clone, Debug, PartialEq)]
pub enum KDescriptor<F> {
    FullSpace { n: usize },
    CompactBox { lower: Vec<F>, upper: Vec<F> },
    CompactBall { center: Vec<F>, radius: F },
    /// Cone generated by linearly independent rays.
    PolyhedralCone { rays: Vec<Vec<F>> },
    /// Box in the first `n-1` coordinates times `[0, ∞)` in the last.
    CompactTimesHalfline { lower: Vec<F>, upper: Vec<F> },
    /// Closed balls of radius `r <= 1/2` around the integer lattice.
    LatticeBalls { n: usize, radius: F },
    /// The integer lattice itself.
    Lattice { n: usize },
}

impl<F: Scalar> KDescriptor<F> {
    pub fn full(n: usize) -> Self {
        KDescriptor::FullSpace { n }
    }

    /// `[0, ∞) ⊂ R`.
    pub fn halfline() -> Self {
        KDescriptor::PolyhedralCone {
            rays: vec![vec![F::one()]],
        }
    }

    /// The one-point set `{0}`.
    pub fn origin(n: usize) -> Self {
        KDescriptor::CompactBall {
            center: vec![F::zero(); n],
            radius: F::zero(),
        }
    }

    pub fn validate(self) -> Result<Self> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        match &self {
            KDescriptor::FullSpace { n } | KDescriptor::Lattice { n } if *n == 0 => {
                return bad("dimension must be positive")
            }
            KDescriptor::CompactBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return bad("box bounds must pair up");
                }
                if lower.iter().zip(upper).any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u) {
                    return bad("box bounds must be finite and ordered");
                }
            }
            KDescriptor::CompactTimesHalfline { lower, upper } => {
                if lower.len() != upper.len() {
                    return bad("strip bounds must pair up");
                }
                if lower.iter().zip(upper).any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u) {
                    return bad("strip bounds must be finite and ordered");
                }
            }
            KDescriptor::CompactBall { center, radius } => {
                if center.is_empty() || !(*radius >= F::zero()) || !radius.is_finite() {
                    return bad("ball needs a center and a finite radius >= 0");
                }
            }
            KDescriptor::PolyhedralCone { rays } => {
                let n = rays.first().map_or(0, Vec::len);
                if n == 0 || rays.iter().any(|r| r.len() != n) {
                    return bad("cone rays must share a positive dimension");
                }
                if rays.iter().any(|r| r.iter().all(|v| *v == F::zero())) {
                    return bad("cone rays must be nonzero");
                }
                if rays.len() > n || gram(rays).lu().is_singular() {
                    return bad("cone rays must be linearly independent");
                }
            }
            KDescriptor::LatticeBalls { n, radius } => {
                if *n == 0 || !(*radius >= F::zero() && *radius <= F::lit(0.5)) {
                    return bad("lattice radius must lie in [0, 1/2]");
                }
            }
            _ => {}
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        match self {
            KDescriptor::FullSpace { n } | KDescriptor::LatticeBalls { n, .. } | KDescriptor::Lattice { n } => *n,
            KDescriptor::CompactBox { lower, .. } => lower.len(),
            KDescriptor::CompactBall { center, .. } => center.len(),
            KDescriptor::PolyhedralCone { rays } => rays[0].len(),
            KDescriptor::CompactTimesHalfline { lower, .. } => lower.len() + 1,
        }
    }

    pub fn is_compact(&self) -> bool {
        matches!(self, KDescriptor::CompactBox { .. } | KDescriptor::CompactBall { .. })
    }

    /// `K^♯ = {x : x + K ⊆ K}`.
    pub fn ksharp(&self) -> Self {
        let n = self.n();
        match self {
            KDescriptor::FullSpace { .. } => KDescriptor::FullSpace { n },
            KDescriptor::CompactBox { .. } | KDescriptor::CompactBall { .. } => Self::origin(n),
            KDescriptor::PolyhedralCone { rays } => KDescriptor::PolyhedralCone { rays: rays.clone() },
            KDescriptor::CompactTimesHalfline { .. } => {
                let mut e = vec![F::zero(); n];
                e[n - 1] = F::one();
                KDescriptor::PolyhedralCone { rays: vec![e] }
            }
            KDescriptor::LatticeBalls { .. } | KDescriptor::Lattice { .. } => KDescriptor::Lattice { n },
        }
    }

    /// Membership up to a relative slack of `1e-12`.
    pub fn contains(&self, x: &[F]) -> bool {
        if x.len() != self.n() {
            return false;
        }
        let tol = F::lit(1e-12) * (F::one() + crate::scalar::max_abs(x));
        match self {
            KDescriptor::FullSpace { .. } => true,
            KDescriptor::CompactBox { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= *l - tol && *v <= *u + tol),
            KDescriptor::CompactBall { center, radius } => {
                let d2: F = x.iter().zip(center).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
                d2.sqrt() <= *radius + tol
            }
            KDescriptor::PolyhedralCone { rays } => cone_coordinates(rays, x)
                .map_or(false, |(lam, resid)| resid <= tol && lam.iter().all(|l| *l >= -tol)),
            KDescriptor::CompactTimesHalfline { lower, upper } => {
                let m = lower.len();
                x[m] >= -tol
                    && x[..m]
                        .iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(v, (l, u))| *v >= *l - tol && *v <= *u + tol)
            }
            KDescriptor::LatticeBalls { radius, .. } => {
                let d2: F = x.iter().map(|v| (*v - v.round()) * (*v - v.round())).sum();
                d2.sqrt() <= *radius + tol
            }
            KDescriptor::Lattice { .. } => x.iter().all(|v| (*v - v.round()).abs() <= tol),
        }
    }

    /// Polynomials `g_i` with `K = {g_i >= 0}`.
    pub fn defining_inequalities(&self) -> Result<Vec<Poly<F>>> {
        let n = self.n();
        let var = |i: usize| Poly::var(n, i);
        let cst = |c: F| Poly::constant(n, c);
        Ok(match self {
            KDescriptor::FullSpace { .. } => Vec::new(),
            KDescriptor::CompactBox { lower, upper } => box_inequalities(n, lower, upper),
            KDescriptor::CompactBall { center, radius } => {
                let mut g = cst(*radius * *radius);
                for (i, c) in center.iter().enumerate() {
                    let d = &var(i) - &cst(*c);
                    g = &g - &(&d * &d);
                }
                vec![g]
            }
            KDescriptor::PolyhedralCone { rays } => {
                if rays.len() != n {
                    return Err(Error::Unsupported(
                        "localizing checks need a full-dimensional cone".into(),
                    ));
                }
                let r = Matrix::from_fn(n, n, |i, j| rays[j][i]);
                let inv = r.inverse()?;
                (0..n)
                    .map(|k| {
                        Poly::from_terms(n, (0..n).map(|i| (MultiIndex::unit(n, i), inv[(k, i)])))
                    })
                    .collect()
            }
            KDescriptor::CompactTimesHalfline { lower, upper } => {
                let mut g = box_inequalities(n, lower, upper);
                g.push(var(n - 1));
                g
            }
            KDescriptor::LatticeBalls { .. } | KDescriptor::Lattice { .. } => {
                return Err(Error::Unsupported(
                    "lattice sets are catalogue-only; no preserver checks".into(),
                ))
            }
        })
    }

    /// Natural evaluation grid: the set's bounding box, `[-10, 10]` along unbounded
    /// directions and `[0, 10]` along half-lines.
    pub fn default_grid(&self, per_axis: usize) -> Result<Grid<F>> {
        let r = F::lit(DEFAULT_GRID_RADIUS);
        let axes = match self {
            KDescriptor::FullSpace { n } => vec![(-r, r); *n],
            KDescriptor::CompactBox { lower, upper } => {
                lower.iter().copied().zip(upper.iter().copied()).collect()
            }
            KDescriptor::CompactBall { center, radius } => {
                center.iter().map(|c| (*c - *radius, *c + *radius)).collect()
            }
            KDescriptor::PolyhedralCone { rays } => {
                let n = rays[0].len();
                (0..n)
                    .map(|i| {
                        let lo = if rays.iter().any(|ray| ray[i] < F::zero()) { -r } else { F::zero() };
                        let hi = if rays.iter().any(|ray| ray[i] > F::zero()) { r } else { F::zero() };
                        (lo, hi)
                    })
                    .collect()
            }
            KDescriptor::CompactTimesHalfline { lower, upper } => {
                let mut a: Vec<(F, F)> = lower.iter().copied().zip(upper.iter().copied()).collect();
                a.push((F::zero(), r));
                a
            }
            KDescriptor::LatticeBalls { .. } | KDescriptor::Lattice { .. } => {
                return Err(Error::Unsupported("lattice sets are catalogue-only".into()))
            }
        };
        Ok(Grid::new(axes.into_iter().map(|(lo, hi)| (lo, hi, per_axis)).collect()))
    }
}

fn box_inequalities<F: Scalar>(n: usize, lower: &[F], upper: &[F]) -> Vec<Poly<F>> {
    let mut g = Vec::with_capacity(2 * lower.len());
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        g.push(&Poly::var(n, i) - &Poly::constant(n, *l));
        g.push(&Poly::constant(n, *u) - &Poly::var(n, i));
    }
    g
}

fn gram<F: Scalar>(rays: &[Vec<F>]) -> Matrix<F> {
    Matrix::from_fn(rays.len(), rays.len(), |i, j| {
        rays[i].iter().zip(&rays[j]).map(|(a, b)| *a * *b).sum()
    })
}

// Least-squares coordinates of x in the span of the rays and the residual norm.
fn cone_coordinates<F: Scalar>(rays: &[Vec<F>], x: &[F]) -> Option<(Vec<F>, F)> {
    let rhs: Vec<F> = rays.iter().map(|r| r.iter().zip(x).map(|(a, b)| *a * *b).sum()).collect();
    let lam = gram(rays).solve(&rhs).ok()?;
    let resid: F = (0..x.len())
        .map(|i| {
            let v = x[i] - rays.iter().zip(&lam).map(|(r, l)| r[i] * *l).sum::<F>();
            v * v
        })
        .sum::<F>()
        .sqrt();
    Some((lam, resid))
}

fn fmt_list<F: fmt::Display>(f: &mut fmt::Formatter<'_>, v: &[F]) -> fmt::Result {
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

fn fmt_bounds<F: fmt::Display>(f: &mut fmt::Formatter<'_>, lower: &[F], upper: &[F]) -> fmt::Result {
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        if i > 0 {
            write!(f, ";")?;
        }
        write!(f, "{l},{u}")?;
    }
    Ok(())
}

impl<F: Scalar> fmt::Display for KDescriptor<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KDescriptor::FullSpace { n } => write!(f, "full:{n}"),
            KDescriptor::CompactBox { lower, upper } => {
                write!(f, "box:")?;
                fmt_bounds(f, lower, upper)
            }
            KDescriptor::CompactBall { center, radius } => {
                write!(f, "ball:")?;
                fmt_list(f, center)?;
                write!(f, ",{radius}")
            }
            KDescriptor::PolyhedralCone { rays } => {
                write!(f, "cone:")?;
                for (i, r) in rays.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    fmt_list(f, r)?;
                }
                Ok(())
            }
            KDescriptor::CompactTimesHalfline { lower, upper } => {
                write!(f, "striphalf:")?;
                fmt_bounds(f, lower, upper)
            }
            KDescriptor::LatticeBalls { n, radius } => write!(f, "lattice:{radius}:{n}"),
            KDescriptor::Lattice { n } => write!(f, "integers:{n}"),
        }
    }
}

fn parse_nums<F: Scalar>(s: &str) -> Result<Vec<F>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<F>()
                .map_err(|_| Error::Invalid(format!("bad number `{}` in set descriptor", t.trim())))
        })
        .collect()
}

fn parse_bounds<F: Scalar>(s: &str) -> Result<(Vec<F>, Vec<F>)> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for part in s.split(';') {
        let v = parse_nums::<F>(part)?;
        if v.len() != 2 {
            return Err(Error::Invalid(format!("expected `lo,hi`, found `{part}`")));
        }
        lower.push(v[0]);
        upper.push(v[1]);
    }
    Ok((lower, upper))
}

impl<F: Scalar> KDescriptor<F> {
    /// Parses `full`, `box:-1,1`, `ball:0,1`, `cone:1,0;0,1`, `striphalf:-1,1`,
    /// `lattice:0.25`, `halfline`. Dimension-free forms take `n` from the caller.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let text = text.trim();
        let (head, body) = match text.split_once(':') {
            Some((h, b)) => (h.trim(), Some(b.trim())),
            None => (text, None),
        };
        fn need<'a>(head: &str, b: Option<&'a str>) -> Result<&'a str> {
            b.filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Invalid(format!("`{head}` needs parameters")))
        }
        let k = match head {
            "full" => match body {
                None | Some("") => KDescriptor::FullSpace { n },
                Some(b) => KDescriptor::FullSpace {
                    n: b.parse().map_err(|_| Error::Invalid(format!("bad dimension `{b}`")))?,
                },
            },
            "halfline" => Self::halfline(),
            "box" => {
                let (lower, upper) = parse_bounds(need(head, body)?)?;
                KDescriptor::CompactBox { lower, upper }
            }
            "striphalf" => {
                let (lower, upper) = parse_bounds(need(head, body)?)?;
                KDescriptor::CompactTimesHalfline { lower, upper }
            }
            "ball" => {
                let mut v = parse_nums::<F>(need(head, body)?)?;
                if v.len() < 2 {
                    return Err(Error::Invalid("ball needs a center and a radius".into()));
                }
                let radius = v.pop().expect("length checked");
                KDescriptor::CompactBall { center: v, radius }
            }
            "cone" => KDescriptor::PolyhedralCone {
                rays: need(head, body)?.split(';').map(parse_nums).collect::<Result<_>>()?,
            },
            "lattice" => {
                let b = need(head, body)?;
                let (r, dim) = match b.split_once(':') {
                    Some((r, d)) => (
                        r,
                        d.trim().parse().map_err(|_| Error::Invalid(format!("bad dimension `{d}`")))?,
                    ),
                    None => (b, n),
                };
                KDescriptor::LatticeBalls {
                    n: dim,
                    radius: r
                        .trim()
                        .parse()
                        .map_err(|_| Error::Invalid(format!("bad radius `{r}`")))?,
                }
            }
            "integers" => KDescriptor::Lattice {
                n: match body {
                    Some(b) if !b.is_empty() => {
                        b.parse().map_err(|_| Error::Invalid(format!("bad dimension `{b}`")))?
                    }
                    _ => n,
                },
            },
            other => return Err(Error::Invalid(format!("unknown set `{other}`"))),
        };
        k.validate()
    }
}

impl<F: Scalar> FromStr for KDescriptor<F> {
    type Err = Error;
    /// Dimension-free forms default to `n = 1`.
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Evidence attached to a failing verdict.
#[derive(Clone, Debug, PartialEq)]
pub enum Witness<F> {
    /// A moment or localizing matrix with a negative eigenvalue.
    Eigen {
        y: Vec<F>,
        d: u32,
        min_eigenvalue: F,
        /// Localizing weight, if any.
        weight: Option<Poly<F>>,
        /// Time or resolvent parameter of the sampled cell.
        param: Option<F>,
    },
    /// A trial polynomial nonnegative on `K` whose image is negative at `x`.
    Point {
        trial: Poly<F>,
        x: Vec<F>,
        value: F,
        param: Option<F>,
    },
    /// A coefficient-level violation (order, sign or definiteness).
    Coefficient { y: Vec<F>, detail: String },
}

impl<F: Scalar> Witness<F> {
    pub fn param(&self) -> Option<F> {
        match self {
            Witness::Eigen { param, .. } | Witness::Point { param, .. } => *param,
            Witness::Coefficient { .. } => None,
        }
    }

    fn with_param(mut self, p: F) -> Self {
        match &mut self {
            Witness::Eigen { param, .. } | Witness::Point { param, .. } => *param = Some(p),
            Witness::Coefficient { .. } => {}
        }
        self
    }
}

/// Counts of what a check examined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sampling {
    pub points: usize,
    pub tests: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreserverVerdict<F> {
    pub status: Status,
    pub witnesses: Vec<Witness<F>>,
    pub checked: Sampling,
    /// Tolerance used for the failure threshold.
    pub tol: F,
}

impl<F: Scalar> PreserverVerdict<F> {
    fn from_witnesses(witnesses: Vec<Witness<F>>, checked: Sampling, tol: F) -> Self {
        let status = if witnesses.is_empty() {
            Status::Inconclusive
        } else {
            Status::Fail
        };
        PreserverVerdict {
            status,
            witnesses,
            checked,
            tol,
        }
    }

    pub fn is_fail(&self) -> bool {
        self.status == Status::Fail
    }

    /// Merges several verdicts, keeping witnesses in input order.
    pub fn combine(parts: impl IntoIterator<Item = Self>) -> Self {
        let mut witnesses = Vec::new();
        let mut checked = Sampling::default();
        let mut tol = F::zero();
        let mut all_pass = true;
        let mut any = false;
        for p in parts {
            any = true;
            all_pass &= p.status == Status::Pass;
            witnesses.extend(p.witnesses);
            checked.points += p.checked.points;
            checked.tests += p.checked.tests;
            tol = tol.max(p.tol);
        }
        let mut v = Self::from_witnesses(witnesses, checked, tol);
        if any && all_pass {
            v.status = Status::Pass;
        }
        v
    }
}

/// `s(y)_α = α! q_α(y)` for `|α| <= order`.
pub fn symbol_sequence<F: Scalar>(t: &DiffOp<F>, y: &[F], order: u32) -> Result<MomentSeq<F>> {
    if !t.truncation().covers(order) {
        return Err(Error::Truncation {
            needed: order,
            available: match t.truncation() {
                Truncation::UpTo(m) => m,
                Truncation::Exact => order,
            },
        });
    }
    let n = t.n();
    let mut vals = Vec::with_capacity(BasisMap::new(n, order).dim());
    for a in BasisMap::new(n, order).iter() {
        vals.push(t.coeff(a).eval(y)? * a.factorial_scalar::<F>());
    }
    MomentSeq::new(n, order, vals)
}

/// Tests that `s(y)` is a `(K − y)`-moment sequence through its moment matrix and the
/// localizing matrices of the shifted defining inequalities of `K`.
pub fn check_preserver<F: Scalar>(
    t: &DiffOp<F>,
    k: &KDescriptor<F>,
    d: u32,
    ys: &[Vec<F>],
    tol: F,
) -> Result<PreserverVerdict<F>> {
    if k.n() != t.n() {
        return Err(Error::DimensionMismatch {
            expected: t.n(),
            found: k.n(),
        });
    }
    let g = k.defining_inequalities()?;
    let extra = g.iter().filter_map(Poly::degree).max().unwrap_or(0);
    let order = 2 * d + extra;
    if let Truncation::UpTo(m) = t.truncation() {
        if m < order {
            return Err(Error::Truncation {
                needed: order,
                available: m,
            });
        }
    }
    let mut witnesses = Vec::new();
    let mut checked = Sampling::default();
    for y in ys {
        if y.len() != t.n() {
            return Err(Error::DimensionMismatch {
                expected: t.n(),
                found: y.len(),
            });
        }
        if !k.contains(y) {
            continue;
        }
        checked.points += 1;
        let s = symbol_sequence(t, y, order)?;
        let mut weights: Vec<Option<Poly<F>>> = vec![None];
        for gi in &g {
            weights.push(Some(gi.taylor_shift(y)?));
        }
        for w in weights {
            checked.tests += 1;
            let r = momseq::moment_matrix(&s, d, w.as_ref())?.is_psd(tol);
            if !r.psd {
                witnesses.push(Witness::Eigen {
                    y: y.clone(),
                    d,
                    min_eigenvalue: r.min_eigenvalue,
                    weight: w,
                    param: None,
                });
            }
        }
    }
    Ok(PreserverVerdict::from_witnesses(witnesses, checked, tol))
}

/// Full-space check: `s(y)` must be a moment sequence for every sampled `y`.
pub fn check_preserver_rn<F: Scalar>(
    t: &DiffOp<F>,
    d: u32,
    ys: &[Vec<F>],
    tol: F,
) -> Result<PreserverVerdict<F>> {
    check_preserver(t, &KDescriptor::full(t.n()), d, ys, tol)
}

/// `K = [0, ∞)`: adds the localizing matrix with weight `x + y`.
pub fn check_preserver_halfline<F: Scalar>(
    t: &DiffOp<F>,
    d: u32,
    ys: &[F],
    tol: F,
) -> Result<PreserverVerdict<F>> {
    if t.n() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: t.n(),
        });
    }
    if let Some(bad) = ys.iter().find(|y| **y < F::zero()) {
        return Err(Error::OutOfRange(format!("sample {bad} lies outside [0, ∞)")));
    }
    let pts: Vec<Vec<F>> = ys.iter().map(|y| vec![*y]).collect();
    check_preserver(t, &KDescriptor::halfline(), d, &pts, tol)
}

/// Constructions whose preserver property is known, not sampled.
#[derive(Clone, Debug, PartialEq)]
pub enum Certificate<F> {
    /// `D(s)` with `s` the moments of `μ`; a `K`-preserver when `supp μ ⊆ K^♯`.
    MomentOperator(DiscreteMeasure<F>),
    /// `Σ p^α s_α/α! ∂^α` with `s` the moments of `μ`; a preserver on `R^n`.
    Substitution { p: Vec<Poly<F>>, mu: DiscreteMeasure<F> },
}

impl<F: Scalar> Certificate<F> {
    pub fn operator(&self, order: u32) -> Result<DiffOp<F>> {
        match self {
            Certificate::MomentOperator(mu) => {
                Ok(momseq::dop_from_seq(&MomentSeq::from_measure(mu, order)))
            }
            Certificate::Substitution { p, mu } => {
                DiffOp::build_substitution_preserver(p, &MomentSeq::from_measure(mu, order), order)
            }
        }
    }

    /// `Pass` when the construction's hypotheses hold for `K`, otherwise `Inconclusive`.
    pub fn verdict(&self, k: &KDescriptor<F>) -> PreserverVerdict<F> {
        let ok = match self {
            Certificate::MomentOperator(mu) => {
                let sharp = k.ksharp();
                mu.n() == k.n() && mu.atoms().iter().all(|(x, _)| sharp.contains(x))
            }
            Certificate::Substitution { p, mu } => {
                matches!(k, KDescriptor::FullSpace { .. }) && p.len() == mu.n() && mu.n() == k.n()
            }
        };
        PreserverVerdict {
            status: if ok { Status::Pass } else { Status::Inconclusive },
            witnesses: Vec::new(),
            checked: Sampling::default(),
            tol: F::zero(),
        }
    }
}

/// Pointwise data of an operator of order at most two on `R[x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Degree2Report<F> {
    /// `b_0 >= 0`, `b_2 >= 0` and `h >= 0` on all of `R`.
    pub nonnegative: bool,
    pub b0: F,
    /// Global minimum of `b_2 = 2 q_2`; `-∞` when unbounded below.
    pub b2_min: F,
    /// Global minimum of `h = b_0 b_2 − b_1^2`; `-∞` when unbounded below.
    pub min_value: F,
    pub argmin: Option<F>,
}

/// Exact global test of the `2 x 2` Hankel condition for `T = b_0 + b_1 ∂ + (b_2/2) ∂^2`.
pub fn check_degree2_pointwise<F: Scalar>(t: &DiffOp<F>) -> Result<Degree2Report<F>> {
    if t.n() != 1 {
        return Err(Error::Unsupported("pointwise degree-2 test is univariate".into()));
    }
    if t.order().map_or(false, |o| o > 2) {
        return Err(Error::Unsupported("operator has order above 2".into()));
    }
    let b0 = t
        .q0()
        .ok_or_else(|| Error::Unsupported("constant coefficient must be a scalar".into()))?;
    let b1 = t.coeff(&MultiIndex::new(vec![1]));
    let b2 = t.coeff(&MultiIndex::new(vec![2])).scale(F::lit(2.0));
    let h = &b2.scale(b0) - &(&b1 * &b1);
    let min_of = |p: &Poly<F>| -> Result<(F, Option<F>)> {
        Ok(match univariate::global_minimum(&p.univariate_coeffs()?)? {
            GlobalMin::Attained { value, at } => (value, Some(at)),
            GlobalMin::Unbounded => (F::neg_infinity(), None),
        })
    };
    let (b2_min, _) = min_of(&b2)?;
    let (min_value, argmin) = min_of(&h)?;
    Ok(Degree2Report {
        nonnegative: b0 >= F::zero() && b2_min >= F::zero() && min_value >= F::zero(),
        b0,
        b2_min,
        min_value,
        argmin,
    })
}

/// Tensor grid; points outside the set being checked are skipped by callers.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<F> {
    axes: Vec<(F, F, usize)>,
}

impl<F: Scalar> Grid<F> {
    pub fn new(axes: Vec<(F, F, usize)>) -> Self {
        Grid { axes }
    }

    /// `(lo, hi, points)` per axis.
    pub fn axes(&self) -> &[(F, F, usize)] {
        &self.axes
    }

    pub fn uniform(n: usize, lo: F, hi: F, per_axis: usize) -> Self {
        Grid::new(vec![(lo, hi, per_axis); n])
    }

    pub fn n(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.2).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_points(&self, i: usize) -> Vec<F> {
        let (lo, hi, m) = self.axes[i];
        linspace(lo, hi, m)
    }

    /// All points in row-major order.
    pub fn points(&self) -> Vec<Vec<F>> {
        let axes: Vec<Vec<F>> = (0..self.n()).map(|i| self.axis_points(i)).collect();
        tensor(&axes)
    }
}

pub fn linspace<F: Scalar>(lo: F, hi: F, m: usize) -> Vec<F> {
    match m {
        0 => Vec::new(),
        1 => vec![(lo + hi) * F::lit(0.5)],
        _ => {
            let step = (hi - lo) / F::from_count(m as u64 - 1);
            (0..m)
                .map(|i| if i == m - 1 { hi } else { lo + step * F::from_count(i as u64) })
                .collect()
        }
    }
}

/// Chebyshev points of the second kind on `[lo, hi]`, ascending.
pub fn chebyshev<F: Scalar>(lo: F, hi: F, m: usize) -> Vec<F> {
    if m == 1 {
        return vec![(lo + hi) * F::lit(0.5)];
    }
    let mid = (lo + hi) * F::lit(0.5);
    let half = (hi - lo) * F::lit(0.5);
    (0..m)
        .map(|i| {
            let theta = F::PI() * F::from_count((m - 1 - i) as u64) / F::from_count(m as u64 - 1);
            let c = theta.cos();
            // snap the symmetric middle node to the exact midpoint
            let c = if 2 * i + 1 == m { F::zero() } else { c };
            mid + half * c
        })
        .collect()
}

/// Chebyshev samples on a box, one list per axis combined as a tensor product.
pub fn chebyshev_box<F: Scalar>(lower: &[F], upper: &[F], per_axis: usize) -> Vec<Vec<F>> {
    let axes: Vec<Vec<F>> = lower
        .iter()
        .zip(upper)
        .map(|(l, u)| chebyshev(*l, *u, per_axis))
        .collect();
    tensor(&axes)
}

fn tensor<F: Scalar>(axes: &[Vec<F>]) -> Vec<Vec<F>> {
    let mut out: Vec<Vec<F>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for v in axis {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Trial polynomials nonnegative on `K` of degree at most `max_degree`:
/// even powers of shifted linear forms, squares of `(x_i − c_1)(x_i − c_2)`,
/// optionally times a defining inequality.
pub fn default_trials<F: Scalar>(k: &KDescriptor<F>, max_degree: u32) -> Result<Vec<Poly<F>>> {
    let n = k.n();
    let g = k.defining_inequalities()?;
    let centers = linspace(F::lit(-5.0), F::lit(5.0), 41);
    let mut forms: Vec<Poly<F>> = Vec::new();
    for i in 0..n {
        for c in &centers {
            forms.push(&Poly::var(n, i) - &Poly::constant(n, *c));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for c in &centers {
                let s = &Poly::var(n, i) + &Poly::var(n, j);
                let m = &Poly::var(n, i) - &Poly::var(n, j);
                forms.push(&s - &Poly::constant(n, *c));
                forms.push(&m - &Poly::constant(n, *c));
            }
        }
    }
    let mut trials = Vec::new();
    let mut m = 1;
    while 2 * m <= max_degree {
        for f in &forms {
            trials.push(f.pow(2 * m));
        }
        m += 1;
    }
    if max_degree >= 4 {
        let coarse = linspace(F::lit(-5.0), F::lit(5.0), 21);
        for i in 0..n {
            let x = Poly::var(n, i);
            for (a, c1) in coarse.iter().enumerate() {
                for c2 in &coarse[a + 1..] {
                    let q = &(&x - &Poly::constant(n, *c1)) * &(&x - &Poly::constant(n, *c2));
                    trials.push(q.pow(2));
                }
            }
        }
    }
    let squares: Vec<Poly<F>> = trials.clone();
    for gi in &g {
        let dg = gi.degree().unwrap_or(0);
        if dg <= max_degree {
            trials.push(gi.clone());
        }
        for sq in &squares {
            if sq.degree().unwrap_or(0) + dg <= max_degree {
                trials.push(gi * sq);
            }
        }
    }
    Ok(trials)
}

/// Evaluates `T p` on the grid points inside `K` for every trial `p`. Never returns `Pass`.
pub fn falsify_on_grid<F: Scalar>(
    t: &DiffOp<F>,
    k: &KDescriptor<F>,
    trials: &[Poly<F>],
    grid: &Grid<F>,
) -> Result<PreserverVerdict<F>> {
    if grid.n() != t.n() || k.n() != t.n() {
        return Err(Error::DimensionMismatch {
            expected: t.n(),
            found: if grid.n() != t.n() { grid.n() } else { k.n() },
        });
    }
    let points: Vec<Vec<F>> = grid.points().into_iter().filter(|x| k.contains(x)).collect();
    let images: Vec<Poly<F>> = trials.iter().map(|p| t.apply(p)).collect::<Result<_>>()?;
    Ok(falsify_images(trials, &images, &points, None))
}

pub(crate) fn falsify_images<F: Scalar>(
    trials: &[Poly<F>],
    images: &[Poly<F>],
    points: &[Vec<F>],
    param: Option<F>,
) -> PreserverVerdict<F> {
    let rel = F::lit(FALSIFY_REL_TOL);
    let mut witnesses = Vec::new();
    for (p, q) in trials.iter().zip(images) {
        let mut worst: Option<(F, &Vec<F>)> = None;
        for x in points {
            let v = q.eval(x).expect("dimension checked");
            let scale = q.eval_abs(x).expect("dimension checked");
            if v < -rel * scale && worst.map_or(true, |(w, _)| v < w) {
                worst = Some((v, x));
            }
        }
        if let Some((value, x)) = worst {
            let w = Witness::Point {
                trial: p.clone(),
                x: x.clone(),
                value,
                param: None,
            };
            witnesses.push(match param {
                Some(l) => w.with_param(l),
                None => w,
            });
        }
    }
    let checked = Sampling {
        points: points.len(),
        tests: trials.len() * points.len(),
    };
    PreserverVerdict::from_witnesses(witnesses, checked, rel)
}

/// True iff the constant-coefficient operator is `c·1` with `c >= 0`.
pub fn compact_rigidity_check<F: Scalar>(t: &DiffOp<F>) -> Result<bool> {
    if !t.is_constant_coefficient() {
        return Err(Error::Unsupported(
            "rigidity test applies to constant-coefficient operators".into(),
        ));
    }
    let zero = MultiIndex::zero(t.n());
    let only_scalar = t.coeffs().all(|(a, _)| *a == zero);
    Ok(only_scalar && t.q0().map_or(true, |c| c >= F::zero()))
}

pub(crate) fn tag_param<F: Scalar>(mut v: PreserverVerdict<F>, p: F) -> PreserverVerdict<F> {
    v.witnesses = v.witnesses.into_iter().map(|w| w.with_param(p)).collect();
    v
}
