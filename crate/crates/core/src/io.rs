//! Plain-text file formats. Every format accepts blank lines and `#` comments.
//! Writers print numbers with `%.17g`.
//!
//! ```text
//! # operator: one coefficient per line, optional truncation order
//! order = 4
//! [1] = 1
//! [2] = 0.5 * x1^2 - 0.5
//!
//! # sequence
//! [0] = 1
//! [1] = 0.5
//!
//! # measure
//! atom (0.5) 2
//!
//! # Lévy triple
//! a0 = 0
//! sigma = [[1]]
//! b = (0)
//! nu (2) 0.5
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diffop::{DiffOp, Truncation};
use crate::error::{Error, Result};
use crate::fmt::{self, g17};
use crate::levygen::LevyTriple;
use crate::linalg::Matrix;
use crate::momseq::{DiscreteMeasure, MomentSeq};
use crate::multiindex::MultiIndex;
use crate::poly::Poly;
use crate::scalar::Scalar;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn number<F: Scalar>(line: usize, s: &str) -> Result<F> {
    s.trim()
        .parse::<F>()
        .map_err(|_| Error::parse(line, format!("bad number `{}`", s.trim())))
}

fn numbers<F: Scalar>(line: usize, s: &str) -> Result<Vec<F>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|t| number(line, t)).collect()
}

fn delimited<'a>(line: usize, s: &'a str, open: char, close: char) -> Result<(&'a str, &'a str)> {
    let s = s.trim_start();
    let rest = s
        .strip_prefix(open)
        .ok_or_else(|| Error::parse(line, format!("expected `{open}`")))?;
    let end = rest
        .find(close)
        .ok_or_else(|| Error::parse(line, format!("missing `{close}`")))?;
    Ok((&rest[..end], &rest[end + close.len_utf8()..]))
}

fn multi_index(line: usize, s: &str) -> Result<MultiIndex> {
    let exps = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::parse(line, format!("bad exponent `{}`", t.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    if exps.is_empty() {
        return Err(Error::parse(line, "empty multi-index"));
    }
    Ok(MultiIndex::new(exps))
}

type IndexLine = (usize, MultiIndex, String);

fn index_lines(text: &str) -> Result<(Option<u32>, Vec<IndexLine>)> {
    let mut order = None;
    let mut entries: Vec<IndexLine> = Vec::new();
    for (ln, l) in content_lines(text) {
        if let Some(rest) = l.strip_prefix("order") {
            let v = rest
                .trim_start()
                .strip_prefix('=')
                .ok_or_else(|| Error::parse(ln, "expected `order = D`"))?;
            order = Some(
                v.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::parse(ln, format!("bad order `{}`", v.trim())))?,
            );
            continue;
        }
        let (idx, rest) = delimited(ln, l, '[', ']')?;
        let alpha = multi_index(ln, idx)?;
        let rhs = rest
            .trim_start()
            .strip_prefix('=')
            .ok_or_else(|| Error::parse(ln, "expected `=` after the multi-index"))?;
        if entries.iter().any(|(_, a, _)| *a == alpha) {
            return Err(Error::parse(ln, format!("duplicate entry {alpha}")));
        }
        if entries.first().map_or(false, |(_, a, _)| a.n() != alpha.n()) {
            return Err(Error::parse(ln, "multi-indices of different lengths"));
        }
        entries.push((ln, alpha, rhs.trim().to_string()));
    }
    Ok((order, entries))
}

/// Operator file; `n` comes from the multi-index length. Without an `order` line the
/// operator is exact.
pub fn parse_operator<F: Scalar>(text: &str) -> Result<DiffOp<F>> {
    let (order, entries) = index_lines(text)?;
    let n = entries
        .first()
        .map(|(_, a, _)| a.n())
        .ok_or_else(|| Error::parse(0, "operator file has no coefficients"))?;
    let mut coeffs = Vec::with_capacity(entries.len());
    for (ln, alpha, rhs) in entries {
        let q = Poly::parse(&rhs, n).map_err(|e| Error::parse(ln, e.to_string()))?;
        if let Some(d) = order {
            if alpha.degree() > d {
                return Err(Error::parse(ln, format!("{alpha} exceeds order {d}")));
            }
        }
        coeffs.push((alpha, q));
    }
    let trunc = order.map_or(Truncation::Exact, Truncation::UpTo);
    DiffOp::general(n, trunc, coeffs)
}

pub fn write_operator<F: Scalar>(op: &DiffOp<F>) -> String {
    let mut out = String::new();
    if let Truncation::UpTo(d) = op.truncation() {
        let _ = writeln!(out, "order = {d}");
    }
    for (alpha, q) in op.coeffs() {
        let _ = writeln!(out, "{} = {}", bracket(alpha), fmt::poly(q));
    }
    out
}

fn bracket(alpha: &MultiIndex) -> String {
    let parts: Vec<String> = alpha.exponents().iter().map(u32::to_string).collect();
    format!("[{}]", parts.join(","))
}

/// Sequence file; missing entries are zero. The order is the `order` line if present,
/// else the largest `|α|` listed.
pub fn parse_sequence<F: Scalar>(text: &str) -> Result<MomentSeq<F>> {
    let (order, entries) = index_lines(text)?;
    let n = entries
        .first()
        .map(|(_, a, _)| a.n())
        .ok_or_else(|| Error::parse(0, "sequence file has no entries"))?;
    let top = entries.iter().map(|(_, a, _)| a.degree()).max().unwrap_or(0);
    let order = order.unwrap_or(top);
    let mut vals = BTreeMap::new();
    for (ln, alpha, rhs) in entries {
        if alpha.degree() > order {
            return Err(Error::parse(ln, format!("{alpha} exceeds order {order}")));
        }
        vals.insert(alpha, number::<F>(ln, &rhs)?);
    }
    MomentSeq::from_fn(n, order, |a| vals.get(a).copied().unwrap_or_else(F::zero))
}

pub fn write_sequence<F: Scalar>(s: &MomentSeq<F>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "order = {}", s.order());
    for (alpha, v) in s.iter() {
        let _ = writeln!(out, "{} = {}", bracket(alpha), g17(v));
    }
    out
}

fn atom_line<F: Scalar>(ln: usize, rest: &str) -> Result<(Vec<F>, F)> {
    let (coords, tail) = delimited(ln, rest, '(', ')')?;
    let x = numbers(ln, coords)?;
    if x.is_empty() {
        return Err(Error::parse(ln, "atom needs coordinates"));
    }
    Ok((x, number(ln, tail)?))
}

fn measure_from_atoms<F: Scalar>(atoms: Vec<(usize, Vec<F>, F)>, n: Option<usize>) -> Result<DiscreteMeasure<F>> {
    let n = match (n, atoms.first()) {
        (Some(n), _) => n,
        (None, Some((_, x, _))) => x.len(),
        (None, None) => return Err(Error::parse(0, "measure file has no atoms")),
    };
    let mut list = Vec::with_capacity(atoms.len());
    for (ln, x, w) in atoms {
        if x.len() != n {
            return Err(Error::parse(ln, format!("atom has {} coordinates, expected {n}", x.len())));
        }
        if !(w > F::zero()) {
            return Err(Error::parse(ln, format!("weight {w} must be positive")));
        }
        list.push((x, w));
    }
    DiscreteMeasure::new(n, list)
}

pub fn parse_measure<F: Scalar>(text: &str) -> Result<DiscreteMeasure<F>> {
    let mut atoms = Vec::new();
    for (ln, l) in content_lines(text) {
        let rest = l
            .strip_prefix("atom")
            .ok_or_else(|| Error::parse(ln, "expected `atom (x..) w`"))?;
        let (x, w) = atom_line(ln, rest)?;
        atoms.push((ln, x, w));
    }
    measure_from_atoms(atoms, None)
}

fn write_atoms<F: Scalar>(out: &mut String, key: &str, mu: &DiscreteMeasure<F>) {
    for (x, w) in mu.atoms() {
        let _ = writeln!(out, "{key} ({}) {}", fmt::join(x, ","), g17(*w));
    }
}

pub fn write_measure<F: Scalar>(mu: &DiscreteMeasure<F>) -> String {
    let mut out = String::new();
    write_atoms(&mut out, "atom", mu);
    out
}

fn key_value<'a>(l: &'a str, key: &str) -> Option<&'a str> {
    let rest = l.strip_prefix(key)?.trim_start();
    rest.strip_prefix('=').map(str::trim)
}

pub fn parse_levy<F: Scalar>(text: &str) -> Result<LevyTriple<F>> {
    let mut a0 = None;
    let mut sigma: Option<(usize, Vec<Vec<F>>)> = None;
    let mut b: Option<Vec<F>> = None;
    let mut atoms = Vec::new();
    for (ln, l) in content_lines(text) {
        if let Some(v) = key_value(l, "a0") {
            a0 = Some(number(ln, v)?);
        } else if let Some(v) = key_value(l, "sigma") {
            let inner = v
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| Error::parse(ln, "expected `[[..],[..]]`"))?;
            let mut rows = Vec::new();
            let mut rest = inner.trim();
            while !rest.is_empty() {
                let (row, after) = delimited(ln, rest, '[', ']')?;
                rows.push(numbers(ln, row)?);
                rest = after.trim_start();
                rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
            }
            sigma = Some((ln, rows));
        } else if let Some(v) = key_value(l, "b") {
            let (inner, tail) = delimited(ln, v, '(', ')')?;
            if !tail.trim().is_empty() {
                return Err(Error::parse(ln, "trailing text after drift"));
            }
            b = Some(numbers(ln, inner)?);
        } else if let Some(rest) = l.strip_prefix("nu") {
            let (x, w) = atom_line(ln, rest)?;
            atoms.push((ln, x, w));
        } else {
            return Err(Error::parse(ln, format!("unrecognized line `{l}`")));
        }
    }
    let b = b.ok_or_else(|| Error::parse(0, "missing `b = (..)`"))?;
    let n = b.len();
    if n == 0 {
        return Err(Error::parse(0, "drift must have at least one component"));
    }
    let sigma = match sigma {
        Some((ln, rows)) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::parse(ln, format!("sigma must be {n} x {n}")));
            }
            Matrix::from_rows(&rows)
        }
        None => Matrix::zeros(n, n),
    };
    let nu = if atoms.is_empty() {
        DiscreteMeasure::empty(n)
    } else {
        measure_from_atoms(atoms, Some(n))?
    };
    LevyTriple::new(a0.unwrap_or_else(F::zero), sigma, b, nu)
}

pub fn write_levy<F: Scalar>(tr: &LevyTriple<F>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "a0 = {}", g17(tr.a0));
    let rows: Vec<String> = tr
        .sigma
        .to_rows()
        .iter()
        .map(|r| format!("[{}]", fmt::join(r, ",")))
        .collect();
    let _ = writeln!(out, "sigma = [{}]", rows.join(","));
    let _ = writeln!(out, "b = ({})", fmt::join(&tr.b, ","));
    write_atoms(&mut out, "nu", &tr.nu);
    out
}
