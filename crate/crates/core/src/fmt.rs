//! `%.17g` formatting for deterministic numeric output.

use crate::poly::Poly;
use crate::scalar::Scalar;

/// Formats like C's `printf("%.17g", x)`.
pub fn g17<F: Scalar>(x: F) -> String {
    g(x.as_f64(), 17)
}

/// Formats like C's `printf("%.{p}g", x)` for `p >= 1`.
pub fn g(x: f64, p: usize) -> String {
    let p = p.max(1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", p - 1, x);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let prec = (p as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{x:.prec$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Joins values with `sep`, each formatted by [`g17`].
pub fn join<F: Scalar>(xs: &[F], sep: &str) -> String {
    xs.iter().map(|x| g17(*x)).collect::<Vec<_>>().join(sep)
}

/// Polynomial in the parser's syntax with [`g17`] coefficients.
pub fn poly<F: Scalar>(p: &Poly<F>) -> String {
    let mut out = String::new();
    for (i, (a, c)) in p.terms().enumerate() {
        out.push_str(match (i, c < F::zero()) {
            (0, true) => "-",
            (0, false) => "",
            (_, true) => " - ",
            (_, false) => " + ",
        });
        out.push_str(&g17(c.abs()));
        if !a.is_zero() {
            out.push_str(" *");
            for (v, &e) in a.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => out.push_str(&format!(" x{}", v + 1)),
                    _ => out.push_str(&format!(" x{}^{}", v + 1, e)),
                }
            }
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}
