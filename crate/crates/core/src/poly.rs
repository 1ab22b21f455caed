//! Sparse multivariate polynomials over the graded monomial basis.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::multiindex::{BasisMap, MultiIndex};
use crate::scalar::Scalar;

/// Polynomial in `n` variables. Exact zeros are never stored.
#[derive(Clone, PartialEq, Debug)]
pub struct Poly<F> {
    n: usize,
    terms: BTreeMap<MultiIndex, F>,
}

impl<F: Scalar> Poly<F> {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1);
        Poly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: F) -> Self {
        Self::monomial(MultiIndex::zero(n), c)
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, F::one())
    }

    pub fn monomial(alpha: MultiIndex, c: F) -> Self {
        let mut p = Self::zero(alpha.n());
        p.add_term(alpha, c);
        p
    }

    /// The coordinate function `x_{i+1}`.
    pub fn var(n: usize, i: usize) -> Self {
        Self::monomial(MultiIndex::unit(n, i), F::one())
    }

    /// Sums the given terms; repeated exponents accumulate.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (MultiIndex, F)>) -> Self {
        let mut p = Self::zero(n);
        for (a, c) in terms {
            assert_eq!(a.n(), n, "term has wrong variable count");
            p.add_term(a, c);
        }
        p
    }

    /// Univariate polynomial from ascending coefficients.
    pub fn from_coeffs(coeffs: &[F]) -> Self {
        Self::from_terms(
            1,
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| (MultiIndex::new(vec![k as u32]), c)),
        )
    }

    fn add_term(&mut self, alpha: MultiIndex, c: F) {
        use std::collections::btree_map::Entry;
        if c == F::zero() {
            return;
        }
        match self.terms.entry(alpha) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == F::zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `None` stands for `deg 0 = −∞`.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::degree).max()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> F {
        self.terms.get(alpha).copied().unwrap_or_else(F::zero)
    }

    /// Terms in graded order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, F)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_abs_coeff(&self) -> F {
        self.terms.values().fold(F::zero(), |m, c| m.max(c.abs()))
    }

    /// Constant term if the polynomial has degree `≤ 0`.
    pub fn as_constant(&self) -> Option<F> {
        match self.degree() {
            None => Some(F::zero()),
            Some(0) => Some(self.coeff(&MultiIndex::zero(self.n))),
            _ => None,
        }
    }

    pub fn scale(&self, s: F) -> Self {
        Self::from_terms(self.n, self.terms.iter().map(|(a, &c)| (a.clone(), c * s)))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.n);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Drops every term of degree above `d`.
    pub fn truncate(&self, d: u32) -> Self {
        Self::from_terms(
            self.n,
            self.terms
                .iter()
                .filter(|(a, _)| a.degree() <= d)
                .map(|(a, &c)| (a.clone(), c)),
        )
    }

    fn check_point(&self, y: &[F]) -> Result<()> {
        if y.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        Ok(())
    }

    /// `Σ c_α y^α`, summed in graded basis order.
    pub fn eval(&self, y: &[F]) -> Result<F> {
        self.check_point(y)?;
        Ok(self
            .terms
            .iter()
            .fold(F::zero(), |acc, (a, &c)| acc + c * a.monomial_value(y)))
    }

    /// `Σ |c_α| |y^α|`, the scale of rounding errors in [`Poly::eval`].
    pub fn eval_abs(&self, y: &[F]) -> Result<F> {
        self.check_point(y)?;
        Ok(self.terms.iter().fold(F::zero(), |acc, (a, &c)| {
            acc + (c * a.monomial_value(y)).abs()
        }))
    }

    /// `∂^α p` with exact falling-factorial factors.
    pub fn derive(&self, alpha: &MultiIndex) -> Self {
        assert_eq!(alpha.n(), self.n);
        Self::from_terms(
            self.n,
            self.terms.iter().filter_map(|(beta, &c)| {
                beta.checked_sub(alpha)
                    .map(|rest| (rest, c * beta.falling_scalar::<F>(alpha)))
            }),
        )
    }

    /// `q(x) = p(x + c)`.
    pub fn taylor_shift(&self, c: &[F]) -> Result<Self> {
        self.check_point(c)?;
        let mut out = Self::zero(self.n);
        for (beta, &coef) in &self.terms {
            for gamma in beta.lower_set() {
                let rest = beta.checked_sub(&gamma).expect("gamma below beta");
                let v = coef * beta.binomial_scalar::<F>(&gamma) * rest.monomial_value(c);
                out.add_term(gamma, v);
            }
        }
        Ok(out)
    }

    /// Substitutes `x_i ↦ y_i` for the listed polynomials.
    pub fn compose(&self, subs: &[Poly<F>]) -> Result<Self> {
        if subs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: subs.len(),
            });
        }
        let m = subs.first().map(Poly::n).unwrap_or(1);
        let mut out = Self::zero(m);
        for (alpha, &c) in &self.terms {
            let mut t = Self::constant(m, c);
            for (s, &e) in subs.iter().zip(alpha.exponents()) {
                t = &t * &s.pow(e);
            }
            out = &out + &t;
        }
        Ok(out)
    }

    /// Ascending coefficient vector of a univariate polynomial.
    pub fn univariate_coeffs(&self) -> Result<Vec<F>> {
        if self.n != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.n,
            });
        }
        let deg = self.degree().map_or(0, |d| d as usize + 1);
        let mut v = vec![F::zero(); deg];
        for (a, &c) in &self.terms {
            v[a.exponents()[0] as usize] = c;
        }
        Ok(v)
    }

    /// Coordinates in the graded basis of `R[x]_{<=d}`.
    pub fn to_coords(&self, basis: &BasisMap) -> Result<Vec<F>> {
        if basis.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: basis.n(),
                found: self.n,
            });
        }
        let mut v = vec![F::zero(); basis.dim()];
        for (a, &c) in &self.terms {
            v[basis.index_of(a)?] = c;
        }
        Ok(v)
    }

    pub fn from_coords(basis: &BasisMap, coords: &[F]) -> Self {
        assert_eq!(coords.len(), basis.dim());
        Self::from_terms(basis.n(), basis.iter().cloned().zip(coords.iter().copied()))
    }

    /// Parses the `c * x1^e1 x2^e2 + ...` grammar.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        Parser::new(text, n).parse_generic()
    }
}

impl<F: Scalar> Add for &Poly<F> {
    type Output = Poly<F>;
    fn add(self, rhs: &Poly<F>) -> Poly<F> {
        assert_eq!(self.n, rhs.n, "variable count mismatch");
        let mut out = self.clone();
        for (a, &c) in &rhs.terms {
            out.add_term(a.clone(), c);
        }
        out
    }
}

impl<F: Scalar> Sub for &Poly<F> {
    type Output = Poly<F>;
    fn sub(self, rhs: &Poly<F>) -> Poly<F> {
        assert_eq!(self.n, rhs.n, "variable count mismatch");
        let mut out = self.clone();
        for (a, &c) in &rhs.terms {
            out.add_term(a.clone(), -c);
        }
        out
    }
}

impl<F: Scalar> Mul for &Poly<F> {
    type Output = Poly<F>;
    fn mul(self, rhs: &Poly<F>) -> Poly<F> {
        assert_eq!(self.n, rhs.n, "variable count mismatch");
        let mut out = Poly::zero(self.n);
        for (a, &c) in &self.terms {
            for (b, &d) in &rhs.terms {
                out.add_term(a.add(b), c * d);
            }
        }
        out
    }
}

impl<F: Scalar> Neg for &Poly<F> {
    type Output = Poly<F>;
    fn neg(self) -> Poly<F> {
        self.scale(-F::one())
    }
}

impl<F: Scalar> fmt::Display for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (a, &c)) in self.terms.iter().enumerate() {
            let sign = c < F::zero();
            match (i, sign) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            write!(f, "{}", c.abs())?;
            if !a.is_zero() {
                write!(f, " *")?;
                for (v, &e) in a.exponents().iter().enumerate() {
                    match e {
                        0 => {}
                        1 => write!(f, " x{}", v + 1)?,
                        _ => write!(f, " x{}^{}", v + 1, e)?,
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, PartialEq)]
enum Token {
    Num(String),
    Var(usize),
    Caret,
    Star,
    Plus,
    Minus,
}

struct Parser<'a> {
    text: &'a str,
    n: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, n: usize) -> Self {
        Parser { text, n }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Invalid(format!("polynomial `{}`: {}", self.text.trim(), msg.into()))
    }

    fn tokenize(&self) -> Result<Vec<Token>> {
        let chars: Vec<char> = self.text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            match ch {
                c if c.is_whitespace() => i += 1,
                '^' => {
                    out.push(Token::Caret);
                    i += 1;
                }
                '*' => {
                    out.push(Token::Star);
                    i += 1;
                }
                '+' => {
                    out.push(Token::Plus);
                    i += 1;
                }
                '-' => {
                    out.push(Token::Minus);
                    i += 1;
                }
                'x' => {
                    i += 1;
                    let start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    let idx: String = chars[start..i].iter().collect();
                    let v = if idx.is_empty() {
                        if self.n != 1 {
                            return Err(self.err("bare `x` is only allowed for one variable"));
                        }
                        1
                    } else {
                        idx.parse::<usize>().map_err(|_| self.err("bad variable index"))?
                    };
                    if v == 0 || v > self.n {
                        return Err(self.err(format!("variable x{v} outside x1..x{}", self.n)));
                    }
                    out.push(Token::Var(v - 1));
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                        let mut j = i + 1;
                        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                            j += 1;
                        }
                        if j < chars.len() && chars[j].is_ascii_digit() {
                            while j < chars.len() && chars[j].is_ascii_digit() {
                                j += 1;
                            }
                            i = j;
                        }
                    }
                    out.push(Token::Num(chars[start..i].iter().collect()));
                }
                other => return Err(self.err(format!("unexpected character `{other}`"))),
            }
        }
        Ok(out)
    }

    fn parse_generic<F: Scalar>(&self) -> Result<Poly<F>> {
        let tokens = self.tokenize()?;
        if tokens.is_empty() {
            return Err(self.err("empty expression"));
        }
        let mut out = Poly::zero(self.n);
        let mut pos = 0;
        let mut first = true;
        while pos < tokens.len() {
            let mut sign = F::one();
            let mut saw_sign = false;
            while let Some(t) = tokens.get(pos) {
                match t {
                    Token::Plus => {}
                    Token::Minus => sign = -sign,
                    _ => break,
                }
                saw_sign = true;
                pos += 1;
            }
            if !first && !saw_sign {
                return Err(self.err("terms must be separated by `+` or `-`"));
            }
            first = false;
            let mut coef = sign;
            let mut exps = vec![0u32; self.n];
            let mut factors = 0;
            loop {
                match tokens.get(pos) {
                    Some(Token::Num(s)) => {
                        let v: F = s
                            .parse::<F>()
                            .map_err(|_| self.err(format!("bad number `{s}`")))?;
                        coef *= v;
                        pos += 1;
                    }
                    Some(Token::Var(v)) => {
                        pos += 1;
                        let mut e = 1u32;
                        if tokens.get(pos) == Some(&Token::Caret) {
                            pos += 1;
                            match tokens.get(pos) {
                                Some(Token::Num(s)) => {
                                    e = s
                                        .parse::<u32>()
                                        .map_err(|_| self.err(format!("bad exponent `{s}`")))?;
                                    pos += 1;
                                }
                                _ => return Err(self.err("expected exponent after `^`")),
                            }
                        }
                        exps[*v] += e;
                    }
                    _ => break,
                }
                factors += 1;
                if tokens.get(pos) == Some(&Token::Star) {
                    pos += 1;
                    if !matches!(tokens.get(pos), Some(Token::Num(_)) | Some(Token::Var(_))) {
                        return Err(self.err("dangling `*`"));
                    }
                }
            }
            if factors == 0 {
                return Err(self.err("expected a term"));
            }
            out.add_term(MultiIndex::new(exps), coef);
        }
        Ok(out)
    }
}
