//! Batch front end for `polypos`.
//!
//! Exit codes: `0` pass or inconclusive, `1` refuted (witnesses printed), `2` usage,
//! parse or computation error. Output is buffered and written once, numbers as `%.17g`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use polypos::eventual;
use polypos::fmt::{g17, join, poly};
use polypos::io;
use polypos::levygen;
use polypos::momseq;
use polypos::preserver::{self, Grid, KDescriptor, PreserverVerdict, Status, Witness};
use polypos::{DiffOp, MomentSeq};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// `LO:HI:N` sampling range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected LO:HI:N, found `{s}`"));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number `{t}`"));
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad count `{}`", parts[2]))?;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || n == 0 {
            return Err(format!("need finite LO <= HI and N >= 1, found `{s}`"));
        }
        Ok(Range { lo, hi, n })
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "polypos",
    version,
    about = "Positivity-preserver checks for differential operators on polynomial spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Moment test of `T` at sampled base points of K, optionally with a grid falsifier.
    CheckPreserver(CheckPreserverArgs),
    /// Checks `e^{tA}` at sampled base points and times.
    CheckGenerator(CheckGeneratorArgs),
    /// Grid falsifier for `(1 - λA)^{-1}` on polynomials of degree <= d.
    Resolvent(ResolventArgs),
    /// Writes `e^{tA}` restricted to degree <= d.
    Exp(ExpArgs),
    /// Writes `log T` restricted to degree <= d.
    Log(OpDegreeArgs),
    /// Writes `T^{-1}` restricted to degree <= d.
    Invert(OpDegreeArgs),
    /// Writes `A∘B` restricted to degree <= d.
    Compose(ComposeArgs),
    /// Sequence operations.
    Seq {
        #[command(subcommand)]
        op: SeqCommand,
    },
    /// Threshold of the cubic Euler example.
    TauSigma(TauSigmaArgs),
    /// Threshold of the drift-diffusion example.
    TauDrift(TauDriftArgs),
    /// CSV samples of the threshold curves.
    Curve {
        #[command(subcommand)]
        which: CurveCommand,
    },
    /// Writes the generator of a Lévy triple.
    LevyBuild(LevyBuildArgs),
}

#[derive(Args, Debug)]
struct CheckPreserverArgs {
    #[arg(long)]
    op: PathBuf,
    #[arg(long = "K", default_value = "full")]
    k: String,
    #[arg(long)]
    d: u32,
    #[arg(long, allow_hyphen_values = true)]
    ys: Option<Range>,
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Range>,
    #[arg(long, default_value_t = preserver::DEFAULT_PSD_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct CheckGeneratorArgs {
    #[arg(long)]
    op: PathBuf,
    /// `full` or `halfline`.
    #[arg(long = "K", default_value = "full")]
    k: String,
    #[arg(long)]
    d: u32,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ys: Option<Range>,
    #[arg(long, default_value_t = preserver::DEFAULT_PSD_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ResolventArgs {
    #[arg(long)]
    op: PathBuf,
    #[arg(long)]
    d: u32,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Range>,
}

#[derive(Args, Debug)]
struct ExpArgs {
    #[arg(long)]
    op: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long)]
    d: u32,
}

#[derive(Args, Debug)]
struct OpDegreeArgs {
    #[arg(long)]
    op: PathBuf,
    #[arg(long)]
    d: u32,
}

#[derive(Args, Debug)]
struct ComposeArgs {
    /// Left then right factor.
    #[arg(long, num_args = 1, required = true)]
    op: Vec<PathBuf>,
    #[arg(long)]
    d: u32,
}

#[derive(Subcommand, Debug)]
enum SeqCommand {
    /// Binomial convolution.
    Conv(SeqPair),
    /// Entrywise product.
    Hadamard(SeqPair),
    /// Moment matrix and its smallest eigenvalue.
    Hankel(HankelArgs),
    /// Carleman series indicator.
    Carleman(CarlemanArgs),
}

#[derive(Args, Debug)]
struct SeqPair {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args, Debug)]
struct SeqSource {
    #[arg(long, conflicts_with = "measure", required_unless_present = "measure")]
    seq: Option<PathBuf>,
    #[arg(long)]
    measure: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HankelArgs {
    #[command(flatten)]
    src: SeqSource,
    #[arg(long)]
    d: u32,
    #[arg(long, default_value_t = preserver::DEFAULT_PSD_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct CarlemanArgs {
    #[command(flatten)]
    src: SeqSource,
    /// Number of even moments per axis; defaults to half the sequence order.
    #[arg(long)]
    d: Option<u32>,
}

#[derive(Args, Debug)]
struct TauSigmaArgs {
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

#[derive(Args, Debug)]
struct TauDriftArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Use the exact determinant minimum instead of the published closed form.
    #[arg(long)]
    exact: bool,
}

#[derive(Subcommand, Debug)]
enum CurveCommand {
    /// `t,h2,sigma3`.
    Sigma(CurveArgs),
    /// `t,m`.
    Drift(DriftCurveArgs),
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
    t: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Range>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DriftCurveArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[command(flatten)]
    curve: CurveArgs,
}

#[derive(Args, Debug)]
struct LevyBuildArgs {
    #[arg(long)]
    levy: PathBuf,
    /// Truncation order of the jump part.
    #[arg(long, default_value_t = 4)]
    d: u32,
}

enum Failure {
    Usage(String),
    Compute(polypos::Error),
}

impl From<polypos::Error> for Failure {
    fn from(e: polypos::Error) -> Self {
        Failure::Compute(e)
    }
}

type Outcome = Result<i32, Failure>;

/// Runs one command line; `argv[0]` is the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut buf = String::new();
    match dispatch(cli.command, &mut buf) {
        Ok(code) => {
            let _ = out.write_all(buf.as_bytes());
            let _ = out.flush();
            code
        }
        Err(f) => {
            let msg = match f {
                Failure::Usage(m) => m,
                Failure::Compute(e) => e.to_string(),
            };
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command, out: &mut String) -> Outcome {
    match cmd {
        Command::CheckPreserver(a) => check_preserver(a, out),
        Command::CheckGenerator(a) => check_generator(a, out),
        Command::Resolvent(a) => resolvent(a, out),
        Command::Exp(a) => {
            let op = read_op(&a.op)?;
            emit_op(&op.exp_op(a.t, a.d)?, out)
        }
        Command::Log(a) => emit_op(&read_op(&a.op)?.log_op(a.d)?, out),
        Command::Invert(a) => emit_op(&read_op(&a.op)?.invert(a.d)?, out),
        Command::Compose(a) => {
            if a.op.len() != 2 {
                return Err(Failure::Usage(format!(
                    "compose takes exactly two --op files, got {}",
                    a.op.len()
                )));
            }
            let (l, r) = (read_op(&a.op[0])?, read_op(&a.op[1])?);
            emit_op(&l.compose(&r, a.d)?, out)
        }
        Command::Seq { op } => seq(op, out),
        Command::TauSigma(a) => {
            let r = eventual::find_tau_sigma(a.tol)?;
            emit_threshold("tau-sigma", &r, out);
            Ok(EXIT_OK)
        }
        Command::TauDrift(a) => tau_drift(a, out),
        Command::Curve { which } => curve(which, out),
        Command::LevyBuild(a) => {
            let tr = io::parse_levy::<f64>(&read(&a.levy)?)?;
            emit_op(&levygen::generator_from_levy(&tr, a.d), out)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_op(path: &Path) -> Result<DiffOp<f64>, Failure> {
    io::parse_operator(&read(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_seq(src: &SeqSource, order: Option<u32>) -> Result<MomentSeq<f64>, Failure> {
    match (&src.seq, &src.measure) {
        (Some(p), _) => {
            io::parse_sequence(&read(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        }
        (None, Some(p)) => {
            let mu = io::parse_measure::<f64>(&read(p)?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            let order = order.ok_or_else(|| Failure::Usage("--measure needs --d".into()))?;
            Ok(MomentSeq::from_measure(&mu, order))
        }
        (None, None) => Err(Failure::Usage("one of --seq or --measure is required".into())),
    }
}

fn emit_op(op: &DiffOp<f64>, out: &mut String) -> Outcome {
    out.push_str(&io::write_operator(op));
    Ok(EXIT_OK)
}

fn check_tol(tol: f64) -> Result<(), Failure> {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--tol must be finite and >= 0, got {tol}")))
    }
}

fn samples(k: &KDescriptor<f64>, ys: Option<Range>) -> Result<Vec<Vec<f64>>, Failure> {
    let n = k.n();
    let (lower, upper): (Vec<f64>, Vec<f64>) = match ys {
        Some(r) => (vec![r.lo; n], vec![r.hi; n]),
        None => k
            .default_grid(preserver::DEFAULT_SAMPLES_PER_AXIS)?
            .axes()
            .iter()
            .map(|(lo, hi, _)| (*lo, *hi))
            .unzip(),
    };
    let per_axis = ys.map_or(preserver::DEFAULT_SAMPLES_PER_AXIS, |r| r.n);
    Ok(preserver::chebyshev_box(&lower, &upper, per_axis))
}

fn witness_line(w: &Witness<f64>, label: &str) -> String {
    let mut s = match w {
        Witness::Eigen {
            y,
            d,
            min_eigenvalue,
            weight,
            ..
        } => {
            let mut s = format!("FAIL y={} d={d} minEig={}", join(y, ","), g17(*min_eigenvalue));
            if let Some(g) = weight {
                let _ = write!(s, " weight={}", poly(g));
            }
            s
        }
        Witness::Point { trial, x, value, .. } => {
            format!("FAIL x={} value={} trial={}", join(x, ","), g17(*value), poly(trial))
        }
        Witness::Coefficient { y, detail } => format!("FAIL y={} detail={detail}", join(y, ",")),
    };
    if let Some(p) = w.param() {
        let _ = write!(s, " {label}={}", g17(p));
    }
    s
}

fn emit_verdict(v: &PreserverVerdict<f64>, label: &str, out: &mut String) -> i32 {
    let _ = writeln!(out, "points {}", v.checked.points);
    let _ = writeln!(out, "tests {}", v.checked.tests);
    for w in &v.witnesses {
        let _ = writeln!(out, "{}", witness_line(w, label));
    }
    let _ = writeln!(out, "verdict {}", v.status);
    if v.status == Status::Fail {
        EXIT_FAIL
    } else {
        EXIT_OK
    }
}

fn check_preserver(a: CheckPreserverArgs, out: &mut String) -> Outcome {
    check_tol(a.tol)?;
    let op = read_op(&a.op)?;
    let k = KDescriptor::parse(&a.k, op.n())?;
    let ys = samples(&k, a.ys)?;
    let _ = writeln!(out, "check-preserver K={k} d={} tol={}", a.d, g17(a.tol));
    let mut parts = vec![preserver::check_preserver(&op, &k, a.d, &ys, a.tol)?];
    if let Some(r) = a.grid {
        let trials = preserver::default_trials(&k, 2 * a.d)?;
        let grid = Grid::uniform(op.n(), r.lo, r.hi, r.n);
        parts.push(preserver::falsify_on_grid(&op, &k, &trials, &grid)?);
    }
    Ok(emit_verdict(&PreserverVerdict::combine(parts), "t", out))
}

fn check_generator(a: CheckGeneratorArgs, out: &mut String) -> Outcome {
    check_tol(a.tol)?;
    let op = read_op(&a.op)?;
    let ts = if a.t.is_empty() {
        levygen::DEFAULT_TIMES.to_vec()
    } else {
        a.t
    };
    if let Some(t) = ts.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Failure::Usage(format!("times must be finite and >= 0, got {t}")));
    }
    let k = match a.k.trim() {
        "full" => KDescriptor::full(op.n()),
        "halfline" => KDescriptor::halfline(),
        other => {
            return Err(Failure::Usage(format!(
                "check-generator supports --K full or halfline, got `{other}`"
            )))
        }
    };
    let ys = samples(&k, a.ys)?;
    let _ = writeln!(out, "check-generator K={k} d={} t={} tol={}", a.d, join(&ts, ","), g17(a.tol));
    let v = if matches!(k, KDescriptor::FullSpace { .. }) {
        levygen::check_generator_rn(&op, a.d, &ys, &ts, a.tol)?
    } else {
        let ys: Vec<f64> = ys.into_iter().map(|y| y[0]).collect();
        levygen::check_generator_halfline(&op, a.d, &ys, &ts, a.tol)?
    };
    Ok(emit_verdict(&v, "t", out))
}

fn resolvent(a: ResolventArgs, out: &mut String) -> Outcome {
    let op = read_op(&a.op)?;
    let n = op.n();
    let lambdas = if a.lambda.is_empty() {
        levygen::DEFAULT_LAMBDAS.to_vec()
    } else {
        a.lambda
    };
    let r = a.grid.unwrap_or(Range {
        lo: -preserver::DEFAULT_GRID_RADIUS,
        hi: preserver::DEFAULT_GRID_RADIUS,
        n: if n == 1 { preserver::DEFAULT_GRID_POINTS } else { 41 },
    });
    let trials = preserver::default_trials(&KDescriptor::full(n), a.d)?;
    let grid = Grid::uniform(n, r.lo, r.hi, r.n);
    let rep = levygen::resolvent_check(&op, a.d, &lambdas, &trials, &grid)?;
    let _ = writeln!(
        out,
        "resolvent d={} lambda={} grid={}:{}:{}",
        a.d,
        join(&lambdas, ","),
        g17(r.lo),
        g17(r.hi),
        r.n
    );
    for l in &rep.singular {
        let _ = writeln!(out, "singular lambda={}", g17(*l));
    }
    for l in &rep.passed {
        let _ = writeln!(out, "nonnegative lambda={}", g17(*l));
    }
    Ok(emit_verdict(&rep.verdict, "lambda", out))
}

fn seq(cmd: SeqCommand, out: &mut String) -> Outcome {
    match cmd {
        SeqCommand::Conv(p) => {
            let (s, t) = read_pair(&p)?;
            out.push_str(&io::write_sequence(&momseq::convolve(&s, &t)?));
            Ok(EXIT_OK)
        }
        SeqCommand::Hadamard(p) => {
            let (s, t) = read_pair(&p)?;
            out.push_str(&io::write_sequence(&momseq::hadamard(&s, &t)?));
            Ok(EXIT_OK)
        }
        SeqCommand::Hankel(h) => {
            check_tol(h.tol)?;
            let s = read_seq(&h.src, Some(2 * h.d))?;
            let m = momseq::moment_matrix(&s, h.d, None)?;
            for row in m.matrix().to_rows() {
                let _ = writeln!(out, "{}", join(&row, " "));
            }
            let r = m.is_psd(h.tol);
            let _ = writeln!(out, "minEig {}", g17(r.min_eigenvalue));
            if r.psd {
                let _ = writeln!(out, "verdict PSD");
                Ok(EXIT_OK)
            } else {
                let _ = writeln!(out, "FAIL d={} minEig={}", h.d, g17(r.min_eigenvalue));
                let _ = writeln!(out, "verdict FAIL");
                Ok(EXIT_FAIL)
            }
        }
        SeqCommand::Carleman(c) => {
            let s = read_seq(&c.src, c.d.map(|k| 2 * k))?;
            let terms = c.d.unwrap_or(s.order() / 2);
            let rep = momseq::carleman_indicator(&s, terms)?;
            let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), g17);
            for (i, m) in rep.marginals.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "axis {} partial_sum={} exponent={}",
                    i + 1,
                    opt(m.partial_sum),
                    opt(m.exponent)
                );
            }
            let _ = writeln!(out, "verdict {}", rep.verdict);
            Ok(EXIT_OK)
        }
    }
}

fn read_pair(p: &SeqPair) -> Result<(MomentSeq<f64>, MomentSeq<f64>), Failure> {
    let src = |path: &PathBuf| SeqSource {
        seq: Some(path.clone()),
        measure: None,
    };
    Ok((read_seq(&src(&p.a), None)?, read_seq(&src(&p.b), None)?))
}

fn emit_threshold(name: &str, r: &eventual::ThresholdResult<f64>, out: &mut String) {
    let _ = writeln!(out, "{name}");
    let _ = writeln!(out, "tau_lo {}", g17(r.tau_lo));
    let _ = writeln!(out, "tau_hi {}", g17(r.tau_hi));
    let _ = writeln!(out, "iterations {}", r.iterations);
}

fn tau_drift(a: TauDriftArgs, out: &mut String) -> Outcome {
    if !(a.tol > 0.0) {
        return Err(Failure::Usage(format!("--tol must be positive, got {}", a.tol)));
    }
    let found = if a.exact {
        eventual::find_tau_drift_exact(a.a, a.tol)
    } else {
        eventual::find_tau_drift(a.a, a.tol)
    };
    let name = format!("tau-drift a={} tol={}", g17(a.a), g17(a.tol));
    match found {
        Ok(r) => {
            emit_threshold(&name, &r, out);
            Ok(EXIT_OK)
        }
        Err(polypos::Error::NoSignChange { hi, .. }) => {
            let m = if a.exact {
                eventual::h_min(a.a, hi)?
            } else {
                eventual::m_min(a.a, hi)?
            };
            let _ = writeln!(out, "{name}");
            let _ = writeln!(out, "no sign change up to t={}", g17(hi));
            let _ = writeln!(out, "FAIL t={} m={}", g17(hi), g17(m));
            Ok(EXIT_FAIL)
        }
        Err(e) => Err(e.into()),
    }
}

fn curve_times(c: &CurveArgs) -> Result<Vec<f64>, Failure> {
    let ts = match c.grid {
        Some(r) => preserver::linspace(r.lo, r.hi, r.n),
        None if !c.t.is_empty() => c.t.clone(),
        None => return Err(Failure::Usage("curve needs --t LIST or --grid LO:HI:N".into())),
    };
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Failure::Usage(format!("curve times must be finite and > 0, got {t}")));
    }
    Ok(ts)
}

fn curve(which: CurveCommand, out: &mut String) -> Outcome {
    let (text, csv) = match which {
        CurveCommand::Sigma(c) => (eventual::sigma_curve_csv(&curve_times(&c)?)?, c.csv),
        CurveCommand::Drift(d) => (
            eventual::drift_curve_csv(d.a, &curve_times(&d.curve)?)?,
            d.curve.csv,
        ),
    };
    match csv {
        Some(path) => fs::write(&path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => out.push_str(&text),
    }
    Ok(EXIT_OK)
}
