//! The `fockfit` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use fockfit_core::bootstrap::{fit_histogram, Estimate, IntervalMethod};
use fockfit_core::estimation::{fit, FockHistogram, Observations, PriorShape, WeightScheme};
use fockfit_core::model::{fidelity, fock_distribution, QuadratureVariances, SqueezedThermalState, DEFAULT_N_MAX};
use fockfit_core::sampling::{sample_histogram, SeedSpec};

use crate::error::{Error, Result};
use crate::formats::{self, CountsFile, EstimateFile, IntervalRecord};
use crate::parallel;
use crate::studies::{self, StudyConfig};

#[derive(Debug, Parser)]
#[command(
    name = "fockfit",
    version,
    about = "Estimate squeezing and temperature of squeezed thermal states from Fock counts",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the Fock distribution of a state as CSV
    Probs(ProbsArgs),
    /// Simulate a Fock-count histogram
    Simulate(SimulateArgs),
    /// Fit a counts file
    Estimate(EstimateArgs),
    /// Fit a counts file and add parametric-bootstrap confidence intervals
    Ci(CiArgs),
    /// Fidelity between two states
    Fidelity(FidelityArgs),
    /// Run a study described by a JSON config
    Study(StudyArgs),
}

/// A state given either as `--r/--nbar` or as `--vq/--vp`.
#[derive(Debug, Args)]
pub struct StateArgs {
    /// Squeezing parameter (default 0 when --nbar is given)
    #[arg(long)]
    pub r: Option<f64>,
    /// Mean thermal occupation (default 0 when --r is given)
    #[arg(long)]
    pub nbar: Option<f64>,
    /// Variance of the squeezed quadrature
    #[arg(long)]
    pub vq: Option<f64>,
    /// Variance of the anti-squeezed quadrature
    #[arg(long)]
    pub vp: Option<f64>,
}

impl StateArgs {
    pub fn variances(&self) -> Result<QuadratureVariances> {
        let by_state = self.r.is_some() || self.nbar.is_some();
        let by_variance = self.vq.is_some() || self.vp.is_some();
        match (by_state, by_variance) {
            (true, true) => Err(Error::Usage("give either --r/--nbar or --vq/--vp, not both".into())),
            (false, false) => Err(Error::Usage("a state is required: --r/--nbar or --vq/--vp".into())),
            (true, false) => {
                Ok(SqueezedThermalState::new(self.r.unwrap_or(0.0), self.nbar.unwrap_or(0.0))?.variances())
            }
            (false, true) => match (self.vq, self.vp) {
                (Some(vq), Some(vp)) => Ok(QuadratureVariances::new(vq, vp)?),
                _ => Err(Error::Usage("--vq and --vp must be given together".into())),
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct ProbsArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Largest resolved Fock number
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    pub nmax: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Number of Fock measurements
    #[arg(long)]
    pub shots: u64,
    #[arg(long, default_value_t = DEFAULT_N_MAX)]
    pub nmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write rounded expected counts N P(n) instead of a random draw
    #[arg(long)]
    pub from_exact: bool,
    /// Output counts file (standard output if absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Posterior,
    Mle,
    Uniform,
}

#[derive(Debug, Args)]
pub struct WeightArgs {
    #[arg(long, value_enum, default_value_t = WeightsArg::Posterior)]
    pub weights: WeightsArg,
    /// Beta prior shape for posterior weights
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
}

impl WeightArgs {
    pub fn scheme(&self) -> Result<WeightScheme> {
        Ok(match self.weights {
            WeightsArg::Posterior => WeightScheme::Posterior(PriorShape::new(self.nu, self.eta)?),
            WeightsArg::Mle => WeightScheme::Mle,
            WeightsArg::Uniform => WeightScheme::Uniform,
        })
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Counts file
    #[arg(long)]
    pub counts: PathBuf,
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Output estimate file (standard output if absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Exit 0 even if the fit did not converge
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Percentile,
    Bc,
}

impl From<MethodArg> for IntervalMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Percentile => IntervalMethod::Percentile,
            MethodArg::Bc => IntervalMethod::Bc,
        }
    }
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[arg(long)]
    pub counts: PathBuf,
    /// Bootstrap replicates N_B
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    /// Each tail; the interval level is 1 - 2 alpha
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Bc)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Beta prior shape for the posterior weights
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    /// State as "r=1,nbar=0.01" or "vq=0.3,vp=1.2"
    #[arg(long)]
    pub state1: String,
    #[arg(long)]
    pub state2: String,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV report; the JSON report is written next to it with a .json extension
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `r=..,nbar=..` or `vq=..,vp=..` (keys in any order; a missing
/// `r` or `nbar` is 0).
pub fn parse_state(s: &str) -> Result<QuadratureVariances> {
    let mut args = StateArgs {
        r: None,
        nbar: None,
        vq: None,
        vp: None,
    };
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("state {s:?}: expected key=value, got {part:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("state {s:?}: {value:?} is not a number")))?;
        let slot = match key.trim() {
            "r" => &mut args.r,
            "nbar" => &mut args.nbar,
            "vq" => &mut args.vq,
            "vp" => &mut args.vp,
            other => return Err(Error::Usage(format!("state {s:?}: unknown key {other:?}"))),
        };
        if slot.replace(value).is_some() {
            return Err(Error::Usage(format!("state {s:?}: key {key:?} repeated")));
        }
    }
    args.variances()
}

/// `x` with 12 significant digits.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Expected counts `round(N P(n))`; the overflow bin absorbs the remainder.
pub fn exact_histogram(v: &QuadratureVariances, shots: u64, n_max: usize) -> Result<FockHistogram> {
    let d = fock_distribution(v, n_max)?;
    let mut counts: Vec<u64> = d.probs().iter().map(|p| (p * shots as f64).round() as u64).collect();
    let sum: u64 = counts.iter().sum();
    let overflow = if sum <= shots {
        shots - sum
    } else {
        let excess = sum - shots;
        let largest = (0..counts.len()).max_by_key(|&i| counts[i]).unwrap_or(0);
        counts[largest] -= excess;
        0
    };
    Ok(FockHistogram::with_total(counts, overflow, shots)?)
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => formats::write_atomic(path, text.as_bytes()),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn json_report_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Executes a parsed command, writing terminal output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let out_err = |e| Error::io("<stdout>", e);
    match cli.command {
        Command::Probs(a) => {
            let v = a.state.variances()?;
            let d = fock_distribution(&v, a.nmax)?;
            let mut text = String::from("n,probability\n");
            for (n, p) in d.probs().iter().enumerate() {
                text.push_str(&format!("{n},{p}\n"));
            }
            text.push_str(&format!("overflow,{}\n", d.overflow()));
            stdout.write_all(text.as_bytes()).map_err(out_err)
        }
        Command::Simulate(a) => {
            let v = a.state.variances()?;
            let h = if a.from_exact {
                exact_histogram(&v, a.shots, a.nmax)?
            } else {
                sample_histogram(&fock_distribution(&v, a.nmax)?, a.shots, SeedSpec::new(a.seed, 0))?
            };
            emit(&a.out, &formats::to_json_string(&CountsFile::from(&h)), stdout)
        }
        Command::Estimate(a) => {
            let h = formats::read_counts(&a.counts)?;
            let scheme = a.weights.scheme()?;
            let obs = Observations::from(&h);
            let result = fit(&obs, &scheme.weights(&obs))?;
            emit(&a.out, &formats::to_json_string(&EstimateFile::new(&result, &scheme)), stdout)?;
            if !result.converged && !a.allow_nonconverged {
                return Err(Error::NotConverged("fit did not converge within the evaluation budget".into()));
            }
            Ok(())
        }
        Command::Ci(a) => {
            if !(a.alpha > 0.0 && a.alpha < 0.5) {
                return Err(fockfit_core::Error::InvalidAlpha(a.alpha).into());
            }
            if a.replicates < 2 {
                return Err(Error::Usage("--replicates must be at least 2".into()));
            }
            let h = formats::read_counts(&a.counts)?;
            let prior = PriorShape::new(a.nu, a.eta)?;
            let point = fit_histogram(&h, &prior)?;
            if !point.converged {
                return Err(Error::NotConverged("point estimate did not converge".into()));
            }
            let pool = parallel::pool_from_env()?;
            let set = pool.install(|| {
                parallel::parametric_bootstrap(&point, h.total(), a.replicates, &prior, SeedSpec::new(a.seed, 0))
            })?;
            let estimate = Estimate::from(&point);
            let mut file = EstimateFile::new(&point, &WeightScheme::Posterior(prior));
            file.intervals = set
                .intervals(a.method.into(), &estimate, a.alpha)?
                .iter()
                .map(IntervalRecord::from)
                .collect();
            emit(&a.out, &formats::to_json_string(&file), stdout)
        }
        Command::Fidelity(a) => {
            let f = fidelity(&parse_state(&a.state1)?, &parse_state(&a.state2)?);
            writeln!(stdout, "{}", format_significant(f)).map_err(out_err)
        }
        Command::Study(a) => {
            let cfg: StudyConfig = formats::read_json(&a.config)?;
            cfg.validate()?;
            let pool = parallel::pool_from_env()?;
            let report = pool.install(|| studies::run_study(&cfg))?;
            let csv = formats::to_csv(&report.rows, &a.out)?;
            formats::write_atomic(&a.out, &csv)?;
            formats::write_json(&json_report_path(&a.out), &report)?;
            let failed = report.total_failed();
            if failed > 0 {
                return Err(Error::NotConverged(format!("{failed} experiments failed to converge")));
            }
            Ok(())
        }
    }
}

/// Parses `args` and runs; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli, &mut std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fockfit: {e}");
            e.exit_code()
        }
    }
}
