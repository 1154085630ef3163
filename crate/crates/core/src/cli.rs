//! Command-line front end. Every subcommand is deterministic: repeated runs
//! with the same flags produce byte-identical output.

use crate::asymptotics::{self, mean_ladder, parse_checkpoints, MeanCheckpoint, PartialSum};
use crate::dense::{approximate_any, verify_certificate, DenseCertificate};
use crate::edf::{ClusterReport, EdfSample, Grid, GRID_CSV_HEADER};
use crate::error::Error;
use crate::moments::{
    decade_bounds, erdos_wintner_diagnostic, moment_growth_check, moment_via_binomial,
    wintner_condition_check, AdditiveFunction, EulerConfig, MomentLadder, SeriesDiagnostic,
    DEFAULT_EULER_NU, DEFAULT_EULER_PRIMES, GROWTH_CSV_HEADER, SERIES_CSV_HEADER,
};
use crate::numeric::{format_rational, parse_count, parse_rational};
use crate::sieve::{DivisorSieve, CSV_HEADER};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::json;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub const CLUSTER_CSV_HEADER: &str = "epsilon,max_window_density,argmax_center";
pub const DENSE_CSV_HEADER: &str = "step,B,q,ratio,gap";
pub const TERMS_CSV_HEADER: &str = "j,binom,sign,mean,tail";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "divsum", version, about = "Divisor-sum sieves, dense-value certificates and mean-value diagnostics for S_s(n)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

fn count(s: &str) -> Result<u64, String> {
    parse_count(s).map_err(|e| e.to_string())
}

fn small_count(s: &str) -> Result<u32, String> {
    let v = count(s)?;
    u32::try_from(v).map_err(|_| format!("{s} is too large"))
}

fn rational(s: &str) -> Result<BigRational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn real(s: &str) -> Result<f64, String> {
    parse_rational(s)
        .map(|r| crate::numeric::to_f64(&r))
        .map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact σ, s, S_σ, S_s and φ for 1 <= n <= limit.
    #[command(after_help = format!("CSV columns: {CSV_HEADER}\nJSON: array of objects with the same keys."))]
    Sieve {
        #[arg(long, value_parser = count)]
        limit: u64,
    },
    /// Empirical distribution of S_s(n)/n for n <= limit.
    #[command(after_help = format!(
        "With --grid, CSV columns: {GRID_CSV_HEADER}\nWith --eps, CSV columns: {CLUSTER_CSV_HEADER}"
    ))]
    Edf {
        #[arg(long, value_parser = count)]
        limit: u64,
        /// Evaluation grid lo:hi:step.
        #[arg(long, conflicts_with = "eps", default_value = "0:4:0.05")]
        grid: String,
        /// Comma-separated window half-widths for the cluster report.
        #[arg(long, value_parser = real, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Certificate that some S_s(N)/N lies within eps of target.
    #[command(after_help = format!(
        "JSON: the verifiable certificate.\nCSV columns: {DENSE_CSV_HEADER}"
    ))]
    Dense {
        #[arg(long, value_parser = rational)]
        target: BigRational,
        #[arg(long, value_parser = rational)]
        eps: BigRational,
    },
    /// Means of σ, S_σ, S_s and S_s(n)/n at checkpoints.
    #[command(after_help = format!(
        "CSV columns: {}\nJSON: array of objects with the same keys plus mode.",
        asymptotics::CSV_HEADER
    ))]
    Mean {
        /// Comma list (1e3,1e4) or decades:lo:hi.
        #[arg(long, conflicts_with = "limit")]
        checkpoints: Option<String>,
        /// Single checkpoint.
        #[arg(long, value_parser = count)]
        limit: Option<u64>,
    },
    /// k-th moment of S_s(n)/n by Euler product and by direct mean, or the
    /// growth table up to kmax.
    #[command(after_help = format!(
        "With --k, JSON: {{k, x, empirical, euler, terms:[{{j, binom, sign, mean, tail}}], truncation:{{P,V}}}}; CSV columns: {TERMS_CSV_HEADER}\nWith --kmax, CSV columns: {GROWTH_CSV_HEADER}"
    ))]
    Moments {
        #[arg(long, value_parser = small_count, required_unless_present = "kmax", conflicts_with = "kmax")]
        k: Option<u32>,
        #[arg(long, value_parser = small_count)]
        kmax: Option<u32>,
        /// Range of the empirical mean.
        #[arg(long, value_parser = count, default_value = "1e6")]
        limit: u64,
        #[arg(long, value_parser = count, default_value_t = DEFAULT_EULER_PRIMES)]
        euler_primes: u64,
        #[arg(long, value_parser = small_count, default_value_t = DEFAULT_EULER_NU)]
        euler_nu: u32,
    },
    /// Erdős–Wintner series of an additive function, or Wintner conditions
    /// for h_{k,j}, summed over primes up to limit.
    #[command(after_help = format!(
        "CSV columns: {SERIES_CSV_HEADER}\nFunctions: log_sigma, log_S_sigma, log_S_sigma_over_sigma, log_S_s"
    ))]
    Series {
        #[arg(long, value_parser = count, default_value = "1e6")]
        limit: u64,
        #[arg(long, default_value = "log_S_s", conflicts_with = "wintner")]
        function: String,
        /// Cutoff R of the three series.
        #[arg(long, value_parser = real, default_value = "1")]
        r: f64,
        /// Check the Wintner conditions for h_{k,j} instead.
        #[arg(long, requires_all = ["k", "j"])]
        wintner: bool,
        #[arg(long, value_parser = small_count)]
        k: Option<u32>,
        #[arg(long, value_parser = small_count)]
        j: Option<u32>,
    },
    /// Re-verify a certificate written by `dense --format json`.
    Verify {
        #[arg(long)]
        cert: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::InvalidArgument(_)
            | Error::UnknownFunction(_)
            | Error::InvalidRange { .. }
            | Error::NonPositiveTarget(_)
            | Error::NonPositiveTolerance(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Compute(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(format!("i/o: {e}"))
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            EXIT_FAILURE
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let work = || -> Result<i32, Failure> {
        let mut sink: Box<dyn Write> = match &cli.output.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        let code = dispatch(&cli.command, cli.output.format, &mut sink)?;
        sink.flush()?;
        Ok(code)
    };
    match cli.output.threads {
        Some(0) => Err(Failure::Usage("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Compute(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn dispatch(cmd: &Command, format: Format, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Sieve { limit } => sieve(*limit, format, out)?,
        Command::Edf { limit, grid, eps } => edf(*limit, grid, eps.as_deref(), format, out)?,
        Command::Dense { target, eps } => dense(target, eps, format, out)?,
        Command::Mean { checkpoints, limit } => {
            let cps = match (checkpoints, limit) {
                (Some(text), _) => parse_checkpoints(text)?,
                (None, Some(x)) => vec![*x],
                (None, None) => parse_checkpoints("decades:3:6")?,
            };
            mean(&cps, format, out)?
        }
        Command::Moments {
            k,
            kmax,
            limit,
            euler_primes,
            euler_nu,
        } => {
            let cfg = EulerConfig {
                primes: *euler_primes,
                nu: *euler_nu,
            };
            match (k, kmax) {
                (Some(k), _) => moments(*k, *limit, cfg, format, out)?,
                (None, Some(kmax)) => growth(*kmax, *limit, format, out)?,
                (None, None) => return Err(Failure::Usage("one of --k or --kmax is required".into())),
            }
        }
        Command::Series {
            limit,
            function,
            r,
            wintner,
            k,
            j,
        } => {
            let diags = if *wintner {
                let (k, j) = (k.expect("clap requires k"), j.expect("clap requires j"));
                let w = wintner_condition_check(k, j, *limit)?;
                if format == Format::Json {
                    writeln!(out, "{}", serde_json::to_string_pretty(&w).expect("serializes"))?;
                    return Ok(EXIT_OK);
                }
                vec![w.condition_i, w.condition_ii]
            } else {
                let f: AdditiveFunction = function.parse()?;
                erdos_wintner_diagnostic(f, *r, &decade_bounds(*limit))?.to_vec()
            };
            series(&diags, format, out)?
        }
        Command::Verify { cert } => return verify(cert, out),
    }
    Ok(EXIT_OK)
}

fn sieve(limit: u64, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    if limit == 0 {
        return Err(Failure::Usage("--limit must be >= 1".into()));
    }
    let sieve = DivisorSieve::new(limit);
    match format {
        Format::Csv => writeln!(out, "{CSV_HEADER}")?,
        Format::Json => write!(out, "[")?,
    }
    let mut first = true;
    for (a, b) in sieve.segments(1, limit) {
        let t = sieve.segment(a, b)?;
        for r in t.rows() {
            match format {
                Format::Csv => writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.n, r.sigma, r.s_little, r.big_s_sigma, r.big_s_s, r.phi
                )?,
                Format::Json => {
                    let sep = if first { "\n" } else { ",\n" };
                    write!(out, "{sep}  {}", serde_json::to_string(&r).expect("serializes"))?;
                }
            }
            first = false;
        }
    }
    if format == Format::Json {
        writeln!(out, "\n]")?;
    }
    Ok(())
}

fn cluster_json(r: &ClusterReport) -> serde_json::Value {
    json!({
        "epsilon": r.epsilon,
        "max_window_density": r.max_window_density,
        "argmax_center": r.argmax_center,
    })
}

fn edf(limit: u64, grid: &str, eps: Option<&[f64]>, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let grid: Grid = grid.parse()?;
    let sample = EdfSample::build(limit)?;
    match (eps, format) {
        (Some(eps), Format::Csv) => {
            writeln!(out, "{CLUSTER_CSV_HEADER}")?;
            for &e in eps {
                let r = sample.max_jump(e)?;
                writeln!(out, "{},{},{}", r.epsilon, r.max_window_density, r.argmax_center)?;
            }
        }
        (Some(eps), Format::Json) => {
            let reports = eps
                .iter()
                .map(|&e| sample.max_jump(e).map(|r| cluster_json(&r)))
                .collect::<Result<Vec<_>, _>>()?;
            let v = json!({ "limit": limit, "clusters": reports });
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("serializes"))?;
        }
        (None, Format::Csv) => sample.write_grid_csv(&grid, &mut *out)?,
        (None, Format::Json) => {
            let points: Vec<_> = grid
                .points()
                .map(|x| json!({ "x": x, "F_N": sample.edf_at(x) }))
                .collect();
            let v = json!({ "limit": limit, "grid": points });
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("serializes"))?;
        }
    }
    Ok(())
}

fn dense(target: &BigRational, eps: &BigRational, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let cert = approximate_any(target, eps)?;
    match format {
        Format::Json => writeln!(out, "{}", cert.to_json())?,
        Format::Csv => {
            writeln!(out, "{DENSE_CSV_HEADER}")?;
            for (i, s) in cert.steps.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    i + 1,
                    format_rational(&s.b),
                    s.q,
                    format_rational(&s.r_after),
                    format_rational(&s.gap_after)
                )?;
            }
        }
    }
    Ok(())
}

fn mean_json(r: &MeanCheckpoint) -> serde_json::Value {
    let mode = match r.partial_sum.mode() {
        asymptotics::SumMode::Exact => "exact",
        asymptotics::SumMode::Compensated => "compensated",
    };
    let sum = match &r.partial_sum {
        PartialSum::Compensated { .. } => json!(r.partial_sum.to_f64()),
        exact => json!(exact.to_string()),
    };
    json!({
        "x": r.x,
        "statistic": r.statistic.name(),
        "partial_sum": sum,
        "mode": mode,
        "mean": r.mean,
        "limit": r.limit_constant,
        "normalized_error": r.normalized_error,
    })
}

fn mean(cps: &[u64], format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let rows = mean_ladder(cps)?;
    match format {
        Format::Csv => asymptotics::write_csv(&rows, &mut *out)?,
        Format::Json => {
            let v: Vec<_> = rows.iter().map(mean_json).collect();
            writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("serializes"))?;
        }
    }
    Ok(())
}

fn moments(k: u32, x: u64, cfg: EulerConfig, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let ladder = MomentLadder::build(&[x], k.max(1))?;
    let empirical = ladder.ratio_moment(x, k).ok_or_else(|| Failure::Usage("--k must be >= 1".into()))?;
    let report = moment_via_binomial(k, cfg)?.with_empirical(x, empirical);
    match format {
        Format::Json => writeln!(out, "{}", report.to_json())?,
        Format::Csv => {
            writeln!(out, "{TERMS_CSV_HEADER}")?;
            for t in &report.terms {
                writeln!(out, "{},{},{},{},{}", t.j, t.binom, t.sign, t.mean, t.tail)?;
            }
        }
    }
    Ok(())
}

fn growth(kmax: u32, x: u64, format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    let table = moment_growth_check(kmax, x)?;
    match format {
        Format::Csv => table.write_csv(&mut *out)?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&table).expect("serializes"))?,
    }
    Ok(())
}

fn series(diags: &[SeriesDiagnostic], format: Format, out: &mut dyn Write) -> Result<(), Failure> {
    match format {
        Format::Csv => {
            writeln!(out, "{SERIES_CSV_HEADER}")?;
            for d in diags {
                d.write_csv_rows(&mut *out)?;
            }
        }
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(diags).expect("serializes"))?,
    }
    Ok(())
}

fn verify(path: &PathBuf, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let cert = DenseCertificate::from_json(&text).map_err(|e| Failure::Compute(e.to_string()))?;
    let v = verify_certificate(&cert);
    match &v.failure {
        None => {
            writeln!(out, "ok: {} steps verified", v.steps_checked)?;
            Ok(EXIT_OK)
        }
        Some(f) => {
            writeln!(out, "failed: {f}")?;
            Ok(EXIT_FAILURE)
        }
    }
}
