//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a computational check failed (or an input file
//! was unreadable), 2 usage error, 3 search found no violation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::frankl::{
    check_conjecture_exhaustive, check_conjecture_sampled, is_union_closed, max_frequency, union_closure, SetFamily,
    DEFAULT_SAMPLES,
};
use crate::gilmer::{
    analyze, counterexample_distribution, gap_closed_form, perturbed_distribution, scan_gap, verify_counterexample,
    FamilyParam,
};
use crate::search::{multistart_search, SearchConfig};
use crate::setdist::SetDistribution;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_FOUND: u8 = 3;

/// Significant digits for every float printed by the CLI.
pub const PRINT_DIGITS: usize = 12;

#[derive(Debug, Parser)]
#[command(
    name = "gilmer-gap",
    version,
    about = "Entropy gap of union distributions on the subset lattice"
)]
struct Cli {
    /// Write the main JSON document here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rebuild the x = 0.3 counterexample and check every claimed value.
    VerifyPaper {
        /// Also write the report to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Gap of the symmetric family at `x`, or of a distribution file.
    #[command(group(ArgGroup::new("source").required(true).args(["x", "dist"])))]
    Gap {
        #[arg(long, allow_negative_numbers = true)]
        x: Option<f64>,
        #[arg(long)]
        dist: Option<PathBuf>,
        #[arg(long, requires = "x", allow_negative_numbers = true)]
        epsilon: Option<f64>,
    },
    /// Tabulate the closed-form gap on a uniform grid, as JSON lines.
    Scan {
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Analyze a distribution file or a family file.
    #[command(group(ArgGroup::new("input").required(true).args(["dist", "family"])))]
    Eval {
        #[arg(long)]
        dist: Option<PathBuf>,
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Multistart local search for a violating distribution.
    Search {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SearchConfig::default().restarts)]
        restarts: usize,
        #[arg(long, default_value_t = SearchConfig::default().marginal_cap)]
        cap: f64,
        #[arg(long, default_value_t = SearchConfig::default().max_iters)]
        max_iters: usize,
        /// Write the best distribution in the distribution file format.
        #[arg(long)]
        out_dist: Option<PathBuf>,
    },
    /// Check union-closed families for an element in at least half the sets.
    Frankl {
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value_t = Mode::Exhaustive)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Sample,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Failed(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Failed(_) => EXIT_FAILED,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Failed(m) => m,
        }
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn failed(e: impl ToString) -> Failure {
    Failure::Failed(e.to_string())
}

/// Rounds to [`PRINT_DIGITS`] significant digits.
pub fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", PRINT_DIGITS - 1, v).parse().unwrap_or(v)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(num) if num.is_f64() => {
            if let Some(x) = num.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *num = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes with floats rounded for stable, byte-identical output.
pub fn to_printable<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("report types serialize");
    round_value(&mut v);
    v
}

struct Output<'a> {
    stdout: &'a mut dyn Write,
    file: Option<PathBuf>,
}

impl Output<'_> {
    fn document(&mut self, v: &Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(v).expect("json values serialize") + "\n";
        self.emit(&text)
    }

    fn lines(&mut self, vs: &[Value]) -> Result<(), Failure> {
        let text: String = vs.iter().map(|v| v.to_string() + "\n").collect();
        self.emit(&text)
    }

    fn emit(&mut self, text: &str) -> Result<(), Failure> {
        match &self.file {
            Some(path) => fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display()))),
            None => self.stdout.write_all(text.as_bytes()).map_err(failed),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn write_pretty(path: &Path, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("json values serialize") + "\n";
    fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

/// Parses `args` (program name first) and runs one subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut out = Output {
        stdout,
        file: cli.output,
    };
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(command: Command, out: &mut Output<'_>) -> Result<u8, Failure> {
    match command {
        Command::VerifyPaper { json } => cmd_verify_paper(json.as_deref(), out),
        Command::Gap { x, dist, epsilon } => cmd_gap(x, dist.as_deref(), epsilon, out),
        Command::Scan { from, to, steps } => cmd_scan(from, to, steps, out),
        Command::Eval { dist, family } => cmd_eval(dist.as_deref(), family.as_deref(), out),
        Command::Search {
            n,
            seed,
            restarts,
            cap,
            max_iters,
            out_dist,
        } => {
            let cfg = SearchConfig {
                n,
                seed,
                restarts,
                max_iters,
                marginal_cap: cap,
                ..SearchConfig::default()
            };
            cmd_search(&cfg, out_dist.as_deref(), out)
        }
        Command::Frankl { n, mode, samples, seed } => cmd_frankl(n, mode, samples, seed, out),
    }
}

fn cmd_verify_paper(json: Option<&Path>, out: &mut Output<'_>) -> Result<u8, Failure> {
    let verification = verify_counterexample();
    let doc = to_printable(&verification);
    if let Some(path) = json {
        write_pretty(path, &doc)?;
    }
    out.document(&doc)?;
    Ok(if verification.pass { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_gap(x: Option<f64>, dist: Option<&Path>, epsilon: Option<f64>, out: &mut Output<'_>) -> Result<u8, Failure> {
    if let Some(path) = dist {
        let p: SetDistribution = read_json(path)?;
        out.document(&to_printable(&analyze(&p)))?;
        return Ok(EXIT_OK);
    }
    let x = x.expect("clap enforces one source");
    let epsilon = epsilon.unwrap_or(0.0);
    let param = FamilyParam::new(x, epsilon).map_err(usage)?;
    let closed = gap_closed_form(x).map_err(usage)?;
    let p = if epsilon > 0.0 {
        perturbed_distribution(param)
    } else {
        counterexample_distribution(param)
    }
    .map_err(usage)?;
    let report = analyze(&p);
    let pipeline = report.gap.to_f64();
    let doc = json!({
        "x": x,
        "epsilon": epsilon,
        "closed_form_gap": closed,
        "pipeline_gap": report.gap,
        "difference": pipeline - closed,
        "report": report,
    });
    out.document(&to_printable(&doc))?;
    Ok(EXIT_OK)
}

fn cmd_scan(from: f64, to: f64, steps: usize, out: &mut Output<'_>) -> Result<u8, Failure> {
    let scan = scan_gap(from, to, steps).map_err(usage)?;
    let mut lines: Vec<Value> = scan.points.iter().map(to_printable).collect();
    lines.push(to_printable(
        &json!({ "sign_changes": scan.sign_changes, "zeros": scan.zeros }),
    ));
    out.lines(&lines)?;
    Ok(EXIT_OK)
}

fn cmd_eval(dist: Option<&Path>, family: Option<&Path>, out: &mut Output<'_>) -> Result<u8, Failure> {
    if let Some(path) = dist {
        let p: SetDistribution = read_json(path)?;
        out.document(&to_printable(&analyze(&p)))?;
        return Ok(EXIT_OK);
    }
    let path = family.expect("clap enforces one input");
    let f: SetFamily = read_json(path)?;
    let frequency = max_frequency(&f).ok();
    let doc = json!({
        "family": f,
        "size": f.len(),
        "union_closed": is_union_closed(&f),
        "closure_size": union_closure(&f).len(),
        "max_frequency": frequency.map(|(element, ratio)| json!({ "element": element, "ratio": ratio })),
    });
    out.document(&to_printable(&doc))?;
    Ok(EXIT_OK)
}

fn cmd_search(cfg: &SearchConfig, out_dist: Option<&Path>, out: &mut Output<'_>) -> Result<u8, Failure> {
    cfg.validate().map_err(usage)?;
    let result = multistart_search(cfg).map_err(failed)?;
    if let Some(path) = out_dist {
        let text = serde_json::to_string(&result.best.distribution).expect("distributions serialize") + "\n";
        fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    }
    out.document(&to_printable(&json!({ "config": cfg, "result": result })))?;
    Ok(if result.best.violates_conjecture {
        EXIT_OK
    } else {
        EXIT_NOT_FOUND
    })
}

fn cmd_frankl(n: u32, mode: Mode, samples: usize, seed: u64, out: &mut Output<'_>) -> Result<u8, Failure> {
    let report = match mode {
        Mode::Exhaustive => check_conjecture_exhaustive(n),
        Mode::Sample => check_conjecture_sampled(n, samples, seed),
    }
    .map_err(usage)?;
    out.document(&to_printable(&report))?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
}
