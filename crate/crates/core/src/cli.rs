//! The `padic-cf` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::ergodic::{
    birkhoff_averages_at, birkhoff_precision, invariance_mc, iota_sum, mixing_exact, MiddleBlock,
    StatReport, SymbolicCylinder,
};
use crate::error::{Error, Result};
use crate::padic::{
    format_rational, haar_sample_rng, parse_rational, random_pzp, Ball, PadicApprox, PrimeCtx,
    ProductCylinder, Rational,
};
use crate::system::{parse_word_1d, Digit, Status, SystemSpec, Threshold, Variant};

#[derive(Debug, Parser)]
#[command(
    name = "padic-cf",
    version,
    about = "p-adic multidimensional continued fractions"
)]
pub struct Cli {
    /// Worker threads for Monte Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expand a point, one JSON line per digit and a final status line.
    Expand(ExpandArgs),
    /// Convergents of every prefix of a digit file.
    Convergents(ConvergentsArgs),
    /// List the branches with iota below a bound.
    Branches(BranchesArgs),
    /// Run a statistical or exact check and report CSV rows.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemKind {
    Schneider,
    Ruban,
    Tl,
    JacobiPerron,
    Brun,
}

#[derive(Debug, Args)]
struct SystemArgs {
    #[arg(long)]
    p: u64,

    #[arg(long, value_enum)]
    system: SystemKind,

    /// Threshold for tl and jacobi-perron: an integer or "inf".
    #[arg(long)]
    l: Option<String>,

    /// Dimension for jacobi-perron and brun.
    #[arg(long, default_value_t = 2)]
    m: usize,
}

impl SystemArgs {
    fn spec(&self) -> Result<SystemSpec> {
        let ctx = PrimeCtx::new(self.p)?;
        let l = self.l.as_deref().map(str::parse::<Threshold>).transpose()?;
        let variant = match self.system {
            SystemKind::Schneider => Variant::OneDim(Threshold::Finite(0)),
            SystemKind::Ruban => Variant::OneDim(Threshold::Infinite),
            SystemKind::Tl => Variant::OneDim(
                l.ok_or_else(|| Error::InvalidParams("--system tl needs --l".into()))?,
            ),
            SystemKind::JacobiPerron => Variant::MultiDim(l.unwrap_or(Threshold::Infinite), self.m),
            SystemKind::Brun => Variant::Brun(self.m),
        };
        SystemSpec::new(ctx, variant)
    }
}

#[derive(Debug, Args)]
struct ExpandArgs {
    #[command(flatten)]
    system: SystemArgs,

    /// Coordinates as num/den (separate arguments or comma separated), or
    /// random:N for a Haar sample with N digits per coordinate. Put negative
    /// values after `--`.
    #[arg(required = true)]
    input: Vec<String>,

    #[arg(long, default_value_t = 100)]
    steps: usize,

    #[arg(long, env = "PADIC_CF_SEED", default_value_t = 0)]
    seed: u64,

    /// Allow random:N with N < 4 * steps.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ConvergentsArgs {
    #[command(flatten)]
    system: SystemArgs,

    /// JSON lines of digits, as written by `expand`.
    digits: String,

    /// Also report ord(x - convergent) for this exact point.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
}

#[derive(Debug, Args)]
struct BranchesArgs {
    #[command(flatten)]
    system: SystemArgs,

    /// Largest iota, as p^E or an integer.
    #[arg(long)]
    bound: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    DigitMeans,
    IotaSum,
    Invariance,
    Mixing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    system: SystemArgs,

    #[arg(long, value_enum)]
    check: Check,

    #[arg(long, env = "PADIC_CF_SEED", default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 2000)]
    samples: u64,

    #[arg(long, default_value_t = 200)]
    steps: u64,

    /// Digits per sample for digit-means (default: chosen from --steps).
    #[arg(long)]
    precision: Option<usize>,

    /// Allow --precision below 4 * steps.
    #[arg(long)]
    force: bool,

    /// Largest iota, as p^E or an integer. For mixing, truncates the free
    /// middle block; without it the block is complete.
    #[arg(long)]
    bound: Option<String>,

    /// Cylinders for invariance, "center~level" per coordinate joined by
    /// ';'. Without any, random cylinders are drawn.
    #[arg(long, allow_hyphen_values = true)]
    cylinder: Vec<String>,

    /// Number of random cylinders for invariance.
    #[arg(long, default_value_t = 20)]
    count: usize,

    #[arg(long = "wordA", alias = "word-a", default_value = "")]
    word_a: String,

    #[arg(long = "wordB", alias = "word-b", default_value = "")]
    word_b: String,

    #[arg(long)]
    n: Option<usize>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

/// One line of a `stats` report.
#[derive(Debug, Clone, Serialize)]
struct Row {
    check: String,
    p: u64,
    l: String,
    m: usize,
    estimate: String,
    stderr: String,
    theoretical: String,
    pass: bool,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 when a check fails, 2 on bad input or configuration.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    if let Some(n) = cli.threads {
        // A pool may already exist when run twice in one process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result = match &cli.command {
        Command::Expand(a) => cmd_expand(a, out),
        Command::Convergents(a) => cmd_convergents(a, out),
        Command::Branches(a) => cmd_branches(a, out),
        Command::Stats(a) => cmd_stats(a, out),
    };
    match result {
        Ok(all_passed) => {
            if all_passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("write failed: {e}"))
}

/// A point given on the command line.
enum Point {
    Exact(Vec<Rational>),
    Sampled(Vec<PadicApprox>),
}

fn parse_point(spec: &SystemSpec, input: &[String], seed: u64) -> Result<Point> {
    let ctx = spec.ctx();
    let coords: Vec<&str> = input
        .iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if let [single] = coords.as_slice() {
        if let Some(n) = single.strip_prefix("random:") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::Parse(format!("bad digit count in {single:?}")))?;
            if n == 0 {
                return Err(Error::Parse("random:N needs N >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            return Ok(Point::Sampled(
                (0..spec.dim())
                    .map(|_| haar_sample_rng(ctx, n, &mut rng))
                    .collect(),
            ));
        }
    }
    if coords.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: coords.len(),
        });
    }
    let exact = coords
        .iter()
        .map(|c| {
            let x = parse_rational(c)?;
            if !x.is_zero() && ctx.ord(&x).finite().is_some_and(|d| d < 1) {
                return Err(Error::OutsideDomain(format!(
                    "{c} is not in pZ_{}",
                    ctx.p()
                )));
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Point::Exact(exact))
}

fn random_digit_count(input: &[String]) -> Option<usize> {
    match input {
        [single] => single.strip_prefix("random:")?.parse().ok(),
        _ => None,
    }
}

fn cmd_expand(a: &ExpandArgs, out: &mut dyn Write) -> Result<bool> {
    let spec = a.system.spec()?;
    if let Some(n) = random_digit_count(&a.input) {
        if n < 4 * a.steps && !a.force {
            return Err(Error::InvalidParams(format!(
                "random:{n} is below 4 * steps = {}; pass --force to run anyway",
                4 * a.steps
            )));
        }
    }
    let expansion = match parse_point(&spec, &a.input, a.seed)? {
        Point::Exact(x) => spec.expand(&x, a.steps)?,
        Point::Sampled(x) => spec.expand(&x, a.steps)?,
    };
    for step in &expansion.steps {
        writeln!(
            out,
            "{}",
            serde_json::to_string(step).expect("serializable")
        )
        .map_err(io_err)?;
    }
    let status = match expansion.status {
        Status::Running => json!({"status": "running", "steps": expansion.steps.len()}),
        Status::Terminated(j) => json!({"status": "terminated", "steps": j}),
        Status::PrecisionExhausted(j) => json!({"status": "precision_exhausted", "steps": j}),
    };
    writeln!(out, "{status}").map_err(io_err)?;
    Ok(true)
}

/// Digits from JSON lines: bare digit objects or `expand` step records.
fn parse_digit_lines(text: &str) -> Result<Vec<Digit>> {
    let mut digits = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?;
        if value.get("status").is_some() {
            continue;
        }
        let digit = value.get("digit").cloned().unwrap_or(value);
        let digit: Digit = serde_json::from_value(digit)
            .map_err(|e| Error::InvalidDigit(format!("line {}: {e}", i + 1)))?;
        digits.push(digit);
    }
    Ok(digits)
}

fn format_vector(v: &[Rational]) -> String {
    v.iter().map(format_rational).collect::<Vec<_>>().join(",")
}

fn cmd_convergents(a: &ConvergentsArgs, out: &mut dyn Write) -> Result<bool> {
    let spec = a.system.spec()?;
    let text = fs::read_to_string(&a.digits)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", a.digits)))?;
    let digits = parse_digit_lines(&text)?;
    for d in &digits {
        spec.validate_digit(d)?;
    }
    let target = match &a.target {
        Some(t) => match parse_point(&spec, std::slice::from_ref(t), 0)? {
            Point::Exact(x) => Some(x),
            Point::Sampled(_) => return Err(Error::Parse("--target must be exact".into())),
        },
        None => None,
    };
    let ctx = spec.ctx();
    for conv in spec.convergents(&digits)? {
        match &target {
            Some(x) => {
                let diff: Vec<Rational> = x.iter().zip(&conv).map(|(a, b)| a - b).collect();
                writeln!(out, "{}\t{}", format_vector(&conv), ctx.vector_ord(&diff))
            }
            None => writeln!(out, "{}", format_vector(&conv)),
        }
        .map_err(io_err)?;
    }
    Ok(true)
}

/// `E` with `p^E <= bound < p^(E+1)`, from `p^E`, `q^e` or an integer.
fn parse_bound(ctx: PrimeCtx, s: &str) -> Result<i64> {
    let bad = || {
        Error::Parse(format!(
            "bound {s:?} must be an integer, p^E or base^exponent"
        ))
    };
    let value: BigInt = match s.trim().split_once('^') {
        Some((base, exp)) => {
            let exp: u32 = exp.trim().parse().map_err(|_| bad())?;
            if base.trim() == "p" {
                return Ok(exp as i64);
            }
            let base: BigInt = base.trim().parse().map_err(|_| bad())?;
            if base == ctx.p_big() {
                return Ok(exp as i64);
            }
            num_traits::pow(base, exp as usize)
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if value < ctx.p_big() {
        return Err(Error::InvalidParams(format!(
            "bound {s} is below p = {}",
            ctx.p()
        )));
    }
    let mut e = 0;
    let mut power = BigInt::one();
    while &power * ctx.p_big() <= value {
        power *= ctx.p_big();
        e += 1;
    }
    Ok(e)
}

fn cmd_branches(a: &BranchesArgs, out: &mut dyn Write) -> Result<bool> {
    let spec = a.system.spec()?;
    let max_exp = parse_bound(spec.ctx(), &a.bound)?;
    for (d, f) in spec.enumerate_branches(max_exp)? {
        let line = json!({
            "digit": d,
            "iota": format_rational(&f.iota()),
            "lft": f.params().to_record(),
        });
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(true)
}

fn parse_word(spec: &SystemSpec, s: &str) -> Result<SymbolicCylinder> {
    let s = s.trim();
    let word = if s.starts_with('[') {
        serde_json::from_str::<Vec<Digit>>(s)
            .map_err(|e| Error::Parse(format!("word {s:?}: {e}")))?
    } else {
        parse_word_1d(s)?
    };
    SymbolicCylinder::new(*spec, word)
}

fn float(x: f64) -> String {
    format!("{x}")
}

fn threshold_label(spec: &SystemSpec) -> String {
    spec.threshold()
        .map_or_else(|| "-".to_string(), |l| l.to_string())
}

fn report_row(check: &str, spec: &SystemSpec, r: &StatReport) -> Row {
    Row {
        check: check.into(),
        p: spec.ctx().p(),
        l: threshold_label(spec),
        m: spec.dim(),
        estimate: float(r.estimate),
        stderr: float(r.stderr),
        theoretical: r
            .theoretical
            .as_ref()
            .map(format_rational)
            .unwrap_or_default(),
        pass: r.within(4.0).unwrap_or(false),
    }
}

fn exact_row(
    check: &str,
    spec: &SystemSpec,
    estimate: &Rational,
    slack: &Rational,
    theory: &Rational,
    pass: bool,
) -> Row {
    Row {
        check: check.into(),
        p: spec.ctx().p(),
        l: threshold_label(spec),
        m: spec.dim(),
        estimate: format_rational(estimate),
        stderr: format_rational(slack),
        theoretical: format_rational(theory),
        pass,
    }
}

/// Random cylinders of measure at least `p^-4`, deterministic in `seed`.
fn random_cylinders(spec: &SystemSpec, count: usize, seed: u64) -> Result<Vec<ProductCylinder>> {
    let ctx = spec.ctx();
    let m = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c71d);
    (0..count)
        .map(|_| {
            let mut budget = 4i64;
            let balls = (0..m)
                .map(|_| {
                    use rand::Rng;
                    let extra = rng.gen_range(0..=budget.min(3));
                    budget -= extra;
                    let center = random_pzp(ctx, &mut rng);
                    Ball::new(ctx, &center, 1 + extra)
                })
                .collect::<Result<Vec<_>>>()?;
            ProductCylinder::new(balls)
        })
        .collect()
}

fn cmd_stats(a: &StatsArgs, out: &mut dyn Write) -> Result<bool> {
    let spec = a.system.spec()?;
    let ctx = spec.ctx();
    let rows = match a.check {
        Check::DigitMeans => {
            let precision = a
                .precision
                .unwrap_or_else(|| birkhoff_precision(ctx.p(), a.steps));
            if (precision as u64) < 4 * a.steps && !a.force {
                return Err(Error::InvalidParams(format!(
                    "--precision {precision} is below 4 * steps = {}; pass --force to run anyway",
                    4 * a.steps
                )));
            }
            let (ra, rb) = birkhoff_averages_at(&spec, a.samples, a.steps, a.seed, precision)?;
            vec![
                report_row("mean_a", &spec, &ra),
                report_row("mean_b", &spec, &rb),
            ]
        }
        Check::IotaSum => {
            let bound = a
                .bound
                .as_deref()
                .ok_or_else(|| Error::InvalidParams("--check iota-sum needs --bound".into()))?;
            let max_exp = parse_bound(ctx, bound)?;
            let sum = iota_sum(&spec, max_exp)?;
            let one = Rational::one();
            let pass = sum <= one && sum.numer() > &BigInt::zero();
            vec![exact_row(
                "iota_sum",
                &spec,
                &sum,
                &(&one - &sum),
                &one,
                pass,
            )]
        }
        Check::Invariance => {
            let cylinders = if a.cylinder.is_empty() {
                random_cylinders(&spec, a.count, a.seed)?
            } else {
                a.cylinder
                    .iter()
                    .map(|c| {
                        let balls = c
                            .split(';')
                            .map(|b| Ball::parse(ctx, b))
                            .collect::<Result<Vec<_>>>()?;
                        ProductCylinder::new(balls)
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            cylinders
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let r = invariance_mc(
                        &spec,
                        c,
                        a.samples,
                        a.seed.wrapping_add(i as u64 * a.samples),
                    )?;
                    Ok(report_row(&format!("invariance {c}"), &spec, &r))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Check::Mixing => {
            let n =
                a.n.ok_or_else(|| Error::InvalidParams("--check mixing needs --n".into()))?;
            let wa = parse_word(&spec, &a.word_a)?;
            let wb = parse_word(&spec, &a.word_b)?;
            let middle = match &a.bound {
                Some(b) => MiddleBlock::Truncated(parse_bound(ctx, b)?),
                None => MiddleBlock::Complete,
            };
            let r = mixing_exact(&wa, &wb, n, middle)?;
            let gap = &r.rhs - &r.lhs;
            let pass = gap >= Rational::zero() && gap <= r.tail_bound;
            vec![exact_row(
                "mixing",
                &spec,
                &r.lhs,
                &r.tail_bound,
                &r.rhs,
                pass,
            )]
        }
    };
    write_rows(&rows, a.format, out)?;
    Ok(rows.iter().all(|r| r.pass))
}

fn write_rows(rows: &[Row], format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            // The header is fixed even when there are no rows.
            w.write_record([
                "check",
                "p",
                "l",
                "m",
                "estimate",
                "stderr",
                "theoretical",
                "pass",
            ])
            .map_err(|e| Error::Parse(e.to_string()))?;
            for r in rows {
                w.write_record([
                    r.check.clone(),
                    r.p.to_string(),
                    r.l.clone(),
                    r.m.to_string(),
                    r.estimate.clone(),
                    r.stderr.clone(),
                    r.theoretical.clone(),
                    r.pass.to_string(),
                ])
                .map_err(|e| Error::Parse(e.to_string()))?;
            }
            w.flush().map_err(io_err)?;
        }
        Format::Json => {
            let text = serde_json::to_string(rows).expect("serializable");
            writeln!(out, "{text}").map_err(io_err)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["padic-cf"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn bounds() {
        let c2 = PrimeCtx::new(2).unwrap();
        let c3 = PrimeCtx::new(3).unwrap();
        assert_eq!(parse_bound(c2, "2^20").unwrap(), 20);
        assert_eq!(parse_bound(c2, "1048576").unwrap(), 20);
        assert_eq!(parse_bound(c2, "1048575").unwrap(), 19);
        assert_eq!(parse_bound(c3, "3^10").unwrap(), 10);
        assert_eq!(parse_bound(c3, "2^5").unwrap(), 3);
        assert!(parse_bound(c3, "2").is_err());
        assert!(parse_bound(c3, "x^2").is_err());
    }

    #[test]
    fn expand_schneider() {
        let (code, out, _) = run_str(&["expand", "--p", "2", "--system", "schneider", "2/3"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(
            lines,
            vec![
                r#"{"j":0,"digit":{"k":1,"v":"1/1"},"ord_consumed":1}"#,
                r#"{"j":1,"digit":{"k":1,"v":"1/1"},"ord_consumed":1}"#,
                r#"{"status":"terminated","steps":2}"#,
            ]
        );
    }

    #[test]
    fn expand_errors() {
        assert_eq!(
            run_str(&["expand", "--p", "2", "--system", "schneider", "1/3"]).0,
            2
        );
        assert_eq!(
            run_str(&["expand", "--p", "2", "--system", "schneider", "x"]).0,
            2
        );
        assert_eq!(
            run_str(&["expand", "--p", "4", "--system", "schneider", "2/3"]).0,
            2
        );
        assert_eq!(
            run_str(&["expand", "--p", "2", "--system", "nope", "2/3"]).0,
            2
        );
        let (code, _, err) = run_str(&[
            "expand",
            "--p",
            "3",
            "--system",
            "ruban",
            "random:10",
            "--steps",
            "50",
        ]);
        assert_eq!(code, 2);
        assert!(err.contains("--force"));
    }

    #[test]
    fn expand_random_is_seeded() {
        let args = [
            "expand",
            "--p",
            "3",
            "--system",
            "jacobi-perron",
            "--m",
            "2",
            "random:500",
            "--steps",
            "50",
            "--seed",
            "3",
        ];
        let (code, first, _) = run_str(&args);
        assert_eq!(code, 0);
        assert_eq!(first, run_str(&args).1);
        let lines: Vec<&str> = first.lines().collect();
        let last = lines.last().unwrap();
        assert!(
            lines.len() == 51 || last.contains("precision_exhausted"),
            "{last}"
        );
    }

    #[test]
    fn stats_iota_sum_and_mixing() {
        let (code, out, _) = run_str(&[
            "stats",
            "--p",
            "2",
            "--system",
            "schneider",
            "--check",
            "iota-sum",
            "--bound",
            "2^20",
        ]);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "check,p,l,m,estimate,stderr,theoretical,pass\niota_sum,2,0,1,1048575/1048576,1/1048576,1/1,true\n"
        );
        let (code, out, _) = run_str(&[
            "stats",
            "--p",
            "2",
            "--system",
            "schneider",
            "--check",
            "mixing",
            "--wordA",
            "(1,1)",
            "--wordB",
            "(2,1)",
            "--n",
            "3",
        ]);
        assert_eq!(code, 0);
        assert!(out.ends_with("mixing,2,0,1,1/8,0/1,1/8,true\n"), "{out}");
    }

    #[test]
    fn stats_needs_its_options() {
        assert_eq!(
            run_str(&[
                "stats",
                "--p",
                "2",
                "--system",
                "schneider",
                "--check",
                "mixing"
            ])
            .0,
            2
        );
        assert_eq!(
            run_str(&[
                "stats",
                "--p",
                "2",
                "--system",
                "schneider",
                "--check",
                "iota-sum"
            ])
            .0,
            2
        );
        assert_eq!(
            run_str(&[
                "stats", "--p", "2", "--system", "brun", "--check", "iota-sum", "--bound", "8"
            ])
            .0,
            2
        );
    }

    #[test]
    fn digit_lines() {
        let text = "{\"j\":0,\"digit\":{\"k\":1,\"v\":\"1/1\"},\"ord_consumed\":1}\n\n{\"k\":0,\"v\":\"3/2\"}\n{\"status\":\"terminated\",\"steps\":1}\n";
        let digits = parse_digit_lines(text).unwrap();
        assert_eq!(digits.len(), 2);
        assert!(parse_digit_lines("{\"k\":1}").is_err());
    }
}
