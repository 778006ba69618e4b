use super::config::{CovarianceSpec, DSpec, GenerativeConfig, NoiseDistribution, Spike};
use super::generate::{self, derive_seed};
use super::measure::{self, ReducedGaussian, TrialMetrics};
use super::predict::asymptotic_predictions;
use crate::baselines::{self, BaselineKind};
use crate::denoise::{denoise, DenoiseInput, Epsilon};
use crate::error::{Error, Result};
use crate::spectral::SpectralModel;
use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Materialize `Y` and the noise matrix for every trial.
    Direct,
    /// Exact reduced-form sampling; Gaussian noise and a single spike only.
    ReducedGaussian,
}

/// Convergence of the leading observed component to its limits as `p` grows
/// with `n = p / gamma` and `m = p / beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub seed: u64,
    pub n_trials: usize,
    pub gamma: f64,
    pub beta: f64,
    pub p_values: Vec<usize>,
    pub noise: Vec<NoiseDistribution>,
    pub cov: CovarianceSpec,
    pub d: DSpec,
    /// Effective intensity `sqrt(tau) sigma` as a multiple of the detection threshold.
    pub threshold_multiple: f64,
    pub sampler: Sampler,
}

/// Mean relative Frobenius error of several shrinkers on shared instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonConfig {
    pub seed: u64,
    pub n_trials: usize,
    pub p: usize,
    pub n: usize,
    pub m: usize,
    /// One spike per entry, `sqrt(tau) sigma` as a multiple of the detection threshold.
    pub threshold_multiples: Vec<f64>,
    /// Condition numbers of a linearly spaced noise covariance.
    pub kappas: Vec<f64>,
    pub noise: NoiseDistribution,
    pub methods: Vec<Method>,
    pub epsilon: Epsilon,
    /// Rank limit handed to the whitened shrinker; the baselines always get the true rank.
    pub rank_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wsc,
    OptShrink,
    TruncatedSvd,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Wsc => "wsc",
            Method::OptShrink => "opt_shrink",
            Method::TruncatedSvd => "truncated_svd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Theta,
    CosInner,
    CosOuterWhite,
    CosOuterUnwhite,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Theta, Metric::CosInner, Metric::CosOuterWhite, Metric::CosOuterUnwhite];

    pub fn label(&self) -> &'static str {
        match self {
            Metric::Theta => "theta",
            Metric::CosInner => "cos_inner",
            Metric::CosOuterWhite => "cos_outer_white",
            Metric::CosOuterUnwhite => "cos_outer_unwhite",
        }
    }

    fn of(&self, t: &TrialMetrics) -> f64 {
        match self {
            Metric::Theta => t.theta,
            Metric::CosInner => t.cos_inner,
            Metric::CosOuterWhite => t.cos_outer_white,
            Metric::CosOuterUnwhite => t.cos_outer_unwhite,
        }
    }
}

/// Mean and standard error, accumulated in the order given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n_trials: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, stderr, n_trials: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub p: usize,
    pub noise: NoiseDistribution,
    pub metric: Metric,
    /// Large-dimension limit the observations are compared against.
    pub limit: f64,
    /// Summary of `|observed - limit| / limit` over trials.
    pub error: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub kappa: f64,
    pub method: Method,
    /// Summary of `||X_hat - X||_F^2 / ||X||_F^2` over trials.
    pub error: Summary,
}

/// Evaluate `trial(i)` for `i in 0..n`, possibly in parallel, returning results in index order.
pub fn run_trials<T: Send>(n: usize, trial: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(trial).collect()
}

/// Run `f` on a dedicated pool of `threads` workers, or the global pool if `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn limits(model: &SpectralModel, sigma: f64, tau: f64) -> Result<[f64; 4]> {
    let pred = asymptotic_predictions(model, sigma, tau, 1.0)?;
    Ok([pred.y, pred.cbar_sq.sqrt(), pred.c_sq.sqrt(), pred.ctilde_sq.sqrt()])
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.p_values.is_empty() || self.noise.is_empty() {
            return Err(Error::Config("n_trials, p_values and noise must be non-empty".into()));
        }
        SpectralModel::new(self.gamma, self.beta)?;
        if !(self.beta > 0.0) {
            return Err(Error::Config("convergence study needs beta > 0".into()));
        }
        if !(self.threshold_multiple > 1.0) {
            return Err(Error::Config("threshold_multiple must exceed 1".into()));
        }
        for noise in &self.noise {
            noise.validate()?;
            if self.sampler == Sampler::ReducedGaussian && !measure::reduced_supports(*noise) {
                return Err(Error::Config(format!(
                    "the reduced sampler supports Gaussian noise only, got {}",
                    noise.label()
                )));
            }
        }
        Ok(())
    }

    /// Generative setup at one dimension, with the spike placed at the configured multiple.
    pub fn instance_at(&self, p: usize, noise: NoiseDistribution, seed: u64) -> Result<GenerativeConfig> {
        let model = SpectralModel::new(self.gamma, self.beta)?;
        let n = (p as f64 / self.gamma).round() as usize;
        let m = (p as f64 / self.beta).round() as usize;
        let mut config = GenerativeConfig {
            p,
            n,
            m,
            spikes: vec![Spike {
                sigma: 1.0,
                d: self.d.clone(),
            }],
            cov: self.cov.clone(),
            noise,
            seed,
        };
        let tau = generate::true_tau(&config)?[0];
        config.spikes[0].sigma = self.threshold_multiple * model.bulk.sigma_thresh / tau.sqrt();
        Ok(config)
    }
}

/// Metrics of one trial for every configured noise kind. All kinds share the
/// trial seed, so their Gaussian draws coincide.
fn convergence_trial(config: &ConvergenceConfig, p: usize, seed: u64) -> Result<Vec<TrialMetrics>> {
    config
        .noise
        .iter()
        .map(|&noise| {
            let gen = config.instance_at(p, noise, seed)?;
            match config.sampler {
                Sampler::Direct => {
                    let inst = generate::generate(&gen)?;
                    measure::measure_leading(
                        inst.y.as_ref(),
                        inst.noise.as_ref(),
                        inst.truth.u.col_as_slice(0),
                        inst.truth.v.col_as_slice(0),
                    )
                }
                Sampler::ReducedGaussian => {
                    ReducedGaussian::new(gen.p, gen.n, gen.m, gen.spikes[0].sigma, &gen.cov, &gen.spikes[0].d)?
                        .sample(seed)
                }
            }
        })
        .collect()
}

pub fn run_convergence_study(config: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    config.validate()?;
    let model = SpectralModel::new(config.gamma, config.beta)?;
    let mut rows = Vec::new();
    for &p in &config.p_values {
        let cell = derive_seed(config.seed, p as u64);
        let probe = config.instance_at(p, NoiseDistribution::Gaussian, cell)?;
        probe.validate()?;
        let tau = generate::true_tau(&probe)?[0];
        let limit = limits(&model, probe.spikes[0].sigma, tau)?;
        let trials = run_trials(config.n_trials, |i| convergence_trial(config, p, derive_seed(cell, i as u64)))?;
        for (k, &noise) in config.noise.iter().enumerate() {
            for (j, metric) in Metric::ALL.iter().enumerate() {
                let errors: Vec<f64> = trials
                    .iter()
                    .map(|t| (metric.of(&t[k]) - limit[j]).abs() / limit[j])
                    .collect();
                rows.push(ConvergenceRow {
                    p,
                    noise,
                    metric: *metric,
                    limit: limit[j],
                    error: Summary::of(&errors),
                });
            }
        }
    }
    Ok(rows)
}

impl ComparisonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.kappas.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("n_trials, kappas and methods must be non-empty".into()));
        }
        if self.threshold_multiples.is_empty() {
            return Err(Error::Config("comparison needs at least one spike".into()));
        }
        if self.threshold_multiples.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config("threshold_multiples must be positive".into()));
        }
        self.epsilon.resolve(1.0, self.n)?;
        self.noise.validate()
    }

    pub fn instance_at(&self, kappa: f64, seed: u64) -> Result<GenerativeConfig> {
        let model = SpectralModel::new(self.p as f64 / self.n as f64, self.p as f64 / self.m as f64)?;
        let cov = CovarianceSpec::lin_spaced(kappa);
        let probe = GenerativeConfig {
            p: self.p,
            n: self.n,
            m: self.m,
            spikes: vec![Spike {
                sigma: 1.0,
                d: DSpec::Identity,
            }],
            cov: cov.clone(),
            noise: self.noise,
            seed,
        };
        let tau = generate::true_tau(&probe)?[0];
        let spikes = self
            .threshold_multiples
            .iter()
            .map(|t| Spike {
                sigma: t * model.bulk.sigma_thresh / tau.sqrt(),
                d: DSpec::Identity,
            })
            .collect();
        Ok(GenerativeConfig { spikes, ..probe })
    }
}

fn relative_error(estimate: MatRef<'_, f64>, truth: MatRef<'_, f64>) -> f64 {
    let diff = Mat::from_fn(truth.nrows(), truth.ncols(), |i, j| estimate[(i, j)] - truth[(i, j)]);
    (diff.norm_l2() / truth.norm_l2()).powi(2)
}

fn comparison_trial(config: &ComparisonConfig, kappa: f64, seed: u64) -> Result<Vec<f64>> {
    let inst = generate::generate(&config.instance_at(kappa, seed)?)?;
    let r = config.threshold_multiples.len();
    config
        .methods
        .iter()
        .map(|method| {
            let estimate = match method {
                Method::Wsc => {
                    denoise(&DenoiseInput {
                        y: inst.y.as_ref(),
                        noise: inst.noise.as_ref(),
                        epsilon: config.epsilon,
                        rank_cap: config.rank_cap,
                    })?
                    .x_hat
                }
                Method::OptShrink => baselines::apply(BaselineKind::OptShrink, inst.y.as_ref(), r)?,
                Method::TruncatedSvd => baselines::apply(BaselineKind::TruncatedSvd, inst.y.as_ref(), r)?,
            };
            Ok(relative_error(estimate.as_ref(), inst.x.as_ref()))
        })
        .collect()
}

/// Every method sees the same instances; the trial seeds are also shared across `kappa`.
pub fn run_comparison(config: &ComparisonConfig) -> Result<Vec<ComparisonRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &kappa in &config.kappas {
        config.instance_at(kappa, config.seed)?.validate()?;
        let trials = run_trials(config.n_trials, |i| {
            comparison_trial(config, kappa, derive_seed(config.seed, i as u64))
        })?;
        for (k, &method) in config.methods.iter().enumerate() {
            let errors: Vec<f64> = trials.iter().map(|t| t[k]).collect();
            rows.push(ComparisonRow {
                kappa,
                method,
                error: Summary::of(&errors),
            });
        }
    }
    Ok(rows)
}
