//! Monte Carlo studies: fidelity and bias of point estimates, paired
//! weight-scheme comparisons, and bootstrap coverage.
//!
//! Experiment `e` for true state `s` and shot count index `k` draws its
//! data from `SeedSpec::new(master_seed, s).child(k).child(e)`. The weight
//! scheme and the bootstrap size never enter the seed, so every scheme and
//! every `n_b` sees the same simulated histograms.

use serde::{Deserialize, Serialize};

use fockfit_core::bootstrap::{tally_coverage, CoverageExperiment, CoverageSettings, Estimate, IntervalMethod, Parameter};
use fockfit_core::estimation::{fit, FitResult, Observations, PriorShape, WeightScheme};
use fockfit_core::model::{fidelity, fock_distribution, FockDistribution, SqueezedThermalState, MAX_N};
use fockfit_core::sampling::{sample_histogram, SeedSpec};

use crate::error::{Error, Result};
use crate::formats::FORMAT_VERSION;
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Fidelity,
    Bias,
    Coverage,
    WeightComparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub r: f64,
    pub nbar: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeSpec {
    Posterior {
        #[serde(default = "one")]
        nu: f64,
        #[serde(default = "one")]
        eta: f64,
    },
    Mle,
    Uniform,
}

impl SchemeSpec {
    pub fn to_scheme(self) -> Result<WeightScheme> {
        Ok(match self {
            SchemeSpec::Posterior { nu, eta } => WeightScheme::Posterior(PriorShape::new(nu, eta)?),
            SchemeSpec::Mle => WeightScheme::Mle,
            SchemeSpec::Uniform => WeightScheme::Uniform,
        })
    }
}

/// Shot counts `10^2, 10^2.5, ..., 10^5`, rounded to integers.
pub fn default_shot_counts() -> Vec<u64> {
    (0..7).map(|i| 10f64.powf(2.0 + 0.5 * i as f64).round() as u64).collect()
}

fn default_experiments() -> usize {
    100
}

fn default_n_b() -> Vec<usize> {
    vec![1000]
}

fn default_alpha() -> f64 {
    0.05
}

fn default_schemes() -> Vec<SchemeSpec> {
    vec![SchemeSpec::Posterior { nu: 1.0, eta: 1.0 }]
}

fn default_n_max() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub format_version: u32,
    pub kind: StudyKind,
    pub true_states: Vec<StateSpec>,
    #[serde(default = "default_shot_counts")]
    pub shot_counts: Vec<u64>,
    #[serde(default = "default_experiments")]
    pub n_experiments: usize,
    /// Bootstrap sizes, coverage studies only.
    #[serde(default = "default_n_b")]
    pub n_b: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<SchemeSpec>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Fit expected counts `N P(n)` instead of simulated histograms.
    #[serde(default)]
    pub exact: bool,
}

impl StudyConfig {
    pub fn new(kind: StudyKind, true_states: Vec<StateSpec>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind,
            true_states,
            shot_counts: default_shot_counts(),
            n_experiments: default_experiments(),
            n_b: default_n_b(),
            alpha: default_alpha(),
            schemes: default_schemes(),
            n_max: default_n_max(),
            master_seed: 0,
            exact: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(format!("study config: {msg}")));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.true_states.is_empty() {
            return bad("true_states is empty".into());
        }
        for (i, s) in self.true_states.iter().enumerate() {
            if SqueezedThermalState::new(s.r, s.nbar).is_err() {
                return bad(format!("true_states[{i}]: r and nbar must be finite and non-negative"));
            }
        }
        if self.shot_counts.is_empty() || self.shot_counts.contains(&0) {
            return bad("shot_counts must be a non-empty list of positive integers".into());
        }
        if self.n_experiments == 0 {
            return bad("n_experiments must be positive".into());
        }
        if !(1..=MAX_N).contains(&self.n_max) {
            return bad(format!("n_max must lie in 1..={MAX_N}"));
        }
        if self.schemes.is_empty() {
            return bad("schemes is empty".into());
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if s.to_scheme().is_err() {
                return bad(format!("schemes[{i}]: nu and eta must be positive"));
            }
        }
        match self.kind {
            StudyKind::WeightComparison if self.schemes.len() < 2 => {
                return bad("weight_comparison needs at least two schemes".into());
            }
            StudyKind::Coverage => {
                if self.exact {
                    return bad("coverage studies need simulated data (exact = false)".into());
                }
                if !(self.alpha > 0.0 && self.alpha < 0.5) {
                    return bad("alpha must lie in (0, 0.5)".into());
                }
                if self.n_b.is_empty() || self.n_b.iter().any(|&b| b < 2) {
                    return bad("n_b must be a non-empty list of values >= 2".into());
                }
                if self.schemes.iter().any(|s| !matches!(s, SchemeSpec::Posterior { .. })) {
                    return bad("coverage studies refit with posterior weights only".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn experiment_seed(&self, state: usize, shots: usize) -> SeedSpec {
        SeedSpec::new(self.master_seed, state as u64).child(shots as u64)
    }
}

/// One row per (state, shots, scheme) and, for coverage, per (n_b, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub state_r: f64,
    pub state_nbar: f64,
    pub shots: u64,
    pub scheme: String,
    pub nu: Option<f64>,
    pub eta: Option<f64>,
    pub n_experiments: usize,
    pub n_failed: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub mean_infidelity: f64,
    pub std_infidelity: f64,
    pub bias_vq: f64,
    pub std_vq: f64,
    pub bias_over_std_vq: Option<f64>,
    pub bias_vp: f64,
    pub std_vp: f64,
    pub bias_over_std_vp: Option<f64>,
    pub bias_r: f64,
    pub std_r: f64,
    pub bias_over_std_r: Option<f64>,
    pub bias_nbar: f64,
    pub std_nbar: f64,
    pub bias_over_std_nbar: Option<f64>,
    pub coverage_vq: Option<f64>,
    pub se_coverage_vq: Option<f64>,
    pub coverage_vp: Option<f64>,
    pub se_coverage_vp: Option<f64>,
    pub coverage_r: Option<f64>,
    pub se_coverage_r: Option<f64>,
    pub coverage_nbar: Option<f64>,
    pub se_coverage_nbar: Option<f64>,
    pub method: Option<String>,
    pub n_b: Option<usize>,
}

impl StudyRow {
    pub fn bias(&self, p: Parameter) -> (f64, f64, Option<f64>) {
        match p {
            Parameter::Vq => (self.bias_vq, self.std_vq, self.bias_over_std_vq),
            Parameter::Vp => (self.bias_vp, self.std_vp, self.bias_over_std_vp),
            Parameter::R => (self.bias_r, self.std_r, self.bias_over_std_r),
            Parameter::Nbar => (self.bias_nbar, self.std_nbar, self.bias_over_std_nbar),
        }
    }

    /// Coverage fraction and its standard error.
    pub fn coverage(&self, p: Parameter) -> Option<(f64, f64)> {
        let (c, se) = match p {
            Parameter::Vq => (self.coverage_vq, self.se_coverage_vq),
            Parameter::Vp => (self.coverage_vp, self.se_coverage_vp),
            Parameter::R => (self.coverage_r, self.se_coverage_r),
            Parameter::Nbar => (self.coverage_nbar, self.se_coverage_nbar),
        };
        c.zip(se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub format_version: u32,
    pub kind: StudyKind,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn total_failed(&self) -> usize {
        self.rows.iter().map(|r| r.n_failed).sum()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn row_from_estimates(
    truth: &SqueezedThermalState,
    shots: u64,
    scheme: &WeightScheme,
    estimates: &[Estimate],
    n_failed: usize,
) -> StudyRow {
    let t = Estimate::from_state(truth);
    let tv = truth.variances();
    let fids: Vec<f64> = estimates
        .iter()
        .map(|e| {
            let v = fockfit_core::model::QuadratureVariances::new(e.vq, e.vp)
                .expect("fitted variances satisfy the physical constraints");
            fidelity(&tv, &v)
        })
        .collect();
    let infids: Vec<f64> = fids.iter().map(|f| 1.0 - f).collect();
    let (mean_fidelity, std_fidelity) = mean_std(&fids);
    let (mean_infidelity, std_infidelity) = mean_std(&infids);
    let stats = Parameter::ALL.map(|p| {
        let xs: Vec<f64> = estimates.iter().map(|e| e.get(p)).collect();
        let (m, s) = mean_std(&xs);
        let bias = m - t.get(p);
        let ratio = if s > 0.0 { Some(bias / s) } else { None };
        (bias, s, ratio)
    });
    let (nu, eta) = match scheme {
        WeightScheme::Posterior(p) => (Some(p.nu()), Some(p.eta())),
        _ => (None, None),
    };
    StudyRow {
        state_r: truth.r(),
        state_nbar: truth.nbar(),
        shots,
        scheme: scheme.name().to_owned(),
        nu,
        eta,
        n_experiments: estimates.len() + n_failed,
        n_failed,
        mean_fidelity,
        std_fidelity,
        mean_infidelity,
        std_infidelity,
        bias_vq: stats[0].0,
        std_vq: stats[0].1,
        bias_over_std_vq: stats[0].2,
        bias_vp: stats[1].0,
        std_vp: stats[1].1,
        bias_over_std_vp: stats[1].2,
        bias_r: stats[2].0,
        std_r: stats[2].1,
        bias_over_std_r: stats[2].2,
        bias_nbar: stats[3].0,
        std_nbar: stats[3].1,
        bias_over_std_nbar: stats[3].2,
        coverage_vq: None,
        se_coverage_vq: None,
        coverage_vp: None,
        se_coverage_vp: None,
        coverage_r: None,
        se_coverage_r: None,
        coverage_nbar: None,
        se_coverage_nbar: None,
        method: None,
        n_b: None,
    }
}

/// Fits of one experiment's data under each scheme. The data are drawn
/// once and shared by all schemes.
pub fn point_experiment(
    model: &FockDistribution,
    shots: u64,
    schemes: &[WeightScheme],
    exact: bool,
    seed: SeedSpec,
) -> fockfit_core::Result<Vec<FitResult>> {
    let obs = if exact {
        Observations::expected(model, shots as f64)?
    } else {
        Observations::from(&sample_histogram(model, shots, seed)?)
    };
    schemes.iter().map(|s| fit(&obs, &s.weights(&obs))).collect()
}

/// Runs the study described by `cfg` on the current rayon pool.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let rows = match cfg.kind {
        StudyKind::Coverage => coverage_rows(cfg)?,
        _ => point_rows(cfg)?,
    };
    Ok(StudyReport {
        format_version: FORMAT_VERSION,
        kind: cfg.kind,
        rows,
    })
}

pub fn fidelity_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_study(&StudyConfig { kind: StudyKind::Fidelity, ..cfg.clone() })
}

pub fn bias_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_study(&StudyConfig { kind: StudyKind::Bias, ..cfg.clone() })
}

pub fn weight_comparison_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_study(&StudyConfig { kind: StudyKind::WeightComparison, ..cfg.clone() })
}

pub fn coverage_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_study(&StudyConfig { kind: StudyKind::Coverage, ..cfg.clone() })
}

fn point_rows(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    let schemes = cfg
        .schemes
        .iter()
        .map(|s| s.to_scheme())
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (si, spec) in cfg.true_states.iter().enumerate() {
        let truth = SqueezedThermalState::new(spec.r, spec.nbar)?;
        let model = fock_distribution(&truth.variances(), cfg.n_max)?;
        for (ki, &shots) in cfg.shot_counts.iter().enumerate() {
            let base = cfg.experiment_seed(si, ki);
            let fits = parallel::map_indexed(cfg.n_experiments, |e| {
                point_experiment(&model, shots, &schemes, cfg.exact, base.child(e as u64))
            })?;
            for (j, scheme) in schemes.iter().enumerate() {
                let estimates: Vec<Estimate> = fits
                    .iter()
                    .map(|f| &f[j])
                    .filter(|f| f.converged)
                    .map(Estimate::from)
                    .collect();
                let failed = fits.len() - estimates.len();
                rows.push(row_from_estimates(&truth, shots, scheme, &estimates, failed));
            }
        }
    }
    Ok(rows)
}

fn is_fit_failure(e: &fockfit_core::Error) -> bool {
    matches!(
        e,
        fockfit_core::Error::NotConverged | fockfit_core::Error::TooManyFailedRefits { .. }
    )
}

fn coverage_rows(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for (si, spec) in cfg.true_states.iter().enumerate() {
        let truth = SqueezedThermalState::new(spec.r, spec.nbar)?;
        for (ki, &shots) in cfg.shot_counts.iter().enumerate() {
            let base = cfg.experiment_seed(si, ki);
            for scheme_spec in &cfg.schemes {
                let scheme = scheme_spec.to_scheme()?;
                let WeightScheme::Posterior(prior) = scheme else {
                    unreachable!("validated: coverage uses posterior weights")
                };
                for &n_b in &cfg.n_b {
                    let settings = CoverageSettings {
                        n_shots: shots,
                        n_max: cfg.n_max,
                        n_b,
                        alpha: cfg.alpha,
                        prior,
                    };
                    let outcomes = parallel::coverage_experiments(&truth, &settings, cfg.n_experiments, base);
                    let mut done: Vec<CoverageExperiment> = Vec::new();
                    let mut failed = 0;
                    for o in outcomes {
                        match o {
                            Ok(x) => done.push(x),
                            Err(e) if is_fit_failure(&e) => failed += 1,
                            Err(e) => return Err(e.into()),
                        }
                    }
                    let estimates: Vec<Estimate> = done.iter().map(|x| x.estimate).collect();
                    for method in IntervalMethod::ALL {
                        let mut row = row_from_estimates(&truth, shots, &scheme, &estimates, failed);
                        if !done.is_empty() {
                            let cov = tally_coverage(&truth, &done, method);
                            let get = |p: Parameter| {
                                let c = &cov[p.index()];
                                (Some(c.fraction()), Some(c.standard_error()))
                            };
                            (row.coverage_vq, row.se_coverage_vq) = get(Parameter::Vq);
                            (row.coverage_vp, row.se_coverage_vp) = get(Parameter::Vp);
                            (row.coverage_r, row.se_coverage_r) = get(Parameter::R);
                            (row.coverage_nbar, row.se_coverage_nbar) = get(Parameter::Nbar);
                        }
                        row.method = Some(method.name().to_owned());
                        row.n_b = Some(n_b);
                        rows.push(row);
                    }
                }
            }
        }
    }
    Ok(rows)
}
