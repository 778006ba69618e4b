//! Whiten, shrink, recolor.
//!
//! The observation `Y` is whitened by the inverse square root of the
//! noise-only sample covariance, the leading singular triplets of the whitened
//! matrix are detected against the bulk edge, each is assigned the shrinkage
//! weight that minimizes asymptotic squared error, and the retained components
//! are mapped back through the square root of the covariance.

use crate::error::{Error, Result};
use crate::linalg::{self, Triplets};
use crate::spectral::{AspectRatios, SpectralModel};
use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

/// Eigenvalue ratio below which the sample covariance is rejected.
pub const CONDITION_FLOOR: f64 = 1e-10;

/// Margin above the bulk edge that a singular value must clear to count as signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    /// `theta_max * n^(-1/3)`.
    #[default]
    Auto,
    Value(f64),
}

impl Epsilon {
    pub fn resolve(self, theta_max: f64, n: usize) -> Result<f64> {
        match self {
            Epsilon::Auto => Ok(theta_max * (n as f64).powf(-1.0 / 3.0)),
            Epsilon::Value(e) if e.is_finite() && e > 0.0 => Ok(e),
            Epsilon::Value(e) => Err(Error::Config(format!("epsilon must be positive, got {e}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DenoiseInput<'a> {
    /// Signal plus noise, `p x n`.
    pub y: MatRef<'a, f64>,
    /// Noise-only samples, `p x m`.
    pub noise: MatRef<'a, f64>,
    pub epsilon: Epsilon,
    pub rank_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeStatus {
    Retained,
    /// The alignment estimate failed (non-positive denominator or a clamped
    /// radicand); the component gets zero weight.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEstimate {
    pub theta_hat: f64,
    pub tau_hat: f64,
    pub sigma_hat: f64,
    /// Estimated `u^T Sigma_hat^(1/2) u_w`; bounded by `sqrt(recolored_norm_sq)`.
    pub c_hat: f64,
    /// Estimated cosine between the right singular vector and the signal's.
    pub cbar_hat: f64,
    pub eta_hat: f64,
    pub t_hat: f64,
    /// `||Sigma_hat^(1/2) u_w||^2`.
    pub recolored_norm_sq: f64,
    pub status: SpikeStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct DenoiseReport {
    #[serde(skip)]
    pub x_hat: Mat<f64>,
    pub rank_hat: usize,
    pub spikes: Vec<SpikeEstimate>,
    pub mu_hat: f64,
    pub amse_hat: f64,
    pub gamma_hat: f64,
    pub beta_hat: f64,
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

/// `R R^T / m`. Conditioning is checked by [`whiten`], which needs the
/// eigendecomposition anyway.
pub fn sample_covariance(noise: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let (p, m) = (noise.nrows(), noise.ncols());
    if m < p {
        return Err(Error::IllConditioned(format!(
            "need at least as many noise samples as rows (m >= p), got m={m} < p={p}"
        )));
    }
    Ok(linalg::gram(noise, 1.0 / m as f64))
}

#[derive(Debug, Clone)]
pub struct Whitened {
    pub y_w: Mat<f64>,
    pub inv_sqrt: Mat<f64>,
    pub sqrt: Mat<f64>,
}

/// Symmetric square root and inverse square root by eigendecomposition.
pub fn covariance_roots(sigma_hat: MatRef<'_, f64>) -> Result<(Mat<f64>, Mat<f64>)> {
    let p = sigma_hat.nrows();
    if sigma_hat.ncols() != p {
        return Err(Error::Dimension(format!("covariance is {}x{}", p, sigma_hat.ncols())));
    }
    let evd = sigma_hat
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("covariance eigendecomposition: {e:?}")))?;
    let s = evd.S();
    let w = evd.U();
    let (lo, hi) = (s[0], s[p - 1]);
    if !(hi > 0.0 && lo > CONDITION_FLOOR * hi) {
        return Err(Error::IllConditioned(format!(
            "eigenvalue ratio {:.3e} is below {CONDITION_FLOOR:e}",
            lo / hi
        )));
    }
    let root = |power: f64| {
        let scaled = Mat::from_fn(p, p, |i, j| w[(i, j)] * s[j].powf(power));
        linalg::matmul_seq(scaled.as_ref(), w.transpose())
    };
    Ok((root(-0.5), root(0.5)))
}

pub fn whiten(y: MatRef<'_, f64>, sigma_hat: MatRef<'_, f64>) -> Result<Whitened> {
    if y.nrows() != sigma_hat.nrows() {
        return Err(Error::Dimension(format!(
            "Y has {} rows but the covariance is {}x{}",
            y.nrows(),
            sigma_hat.nrows(),
            sigma_hat.ncols()
        )));
    }
    let (inv_sqrt, sqrt) = covariance_roots(sigma_hat)?;
    let y_w = linalg::matmul_seq(inv_sqrt.as_ref(), y);
    Ok(Whitened { y_w, inv_sqrt, sqrt })
}

/// Number of leading values strictly above `theta_max + epsilon`, capped.
pub fn estimate_rank(values: &[f64], model: &SpectralModel, epsilon: f64, rank_cap: Option<usize>) -> usize {
    let threshold = model.bulk.theta_max + epsilon;
    let count = values.iter().take_while(|&&s| s > threshold).count();
    rank_cap.map_or(count, |cap| count.min(cap))
}

/// Alignment `tau` from the observed singular value and recolored norm.
pub fn estimate_tau(theta_hat: f64, recolored_norm_sq: f64, mu_hat: f64, model: &SpectralModel) -> Result<f64> {
    let z = theta_hat * theta_hat;
    let phi = model.phi(z)?;
    let denominator = model.psi_deriv(z)?.abs() * recolored_norm_sq - mu_hat * model.e_func(z)?;
    if !(denominator > 0.0) {
        return Err(Error::DegenerateSpike {
            theta: theta_hat,
            denominator,
        });
    }
    Ok(phi / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeParams {
    pub sigma_hat: f64,
    pub c_hat: f64,
    pub cbar_hat: f64,
    /// Set when a radicand was negative and had to be clamped to zero.
    pub clamped_to_zero: bool,
}

/// Intensity and cosines of one spike. `c_hat` is bounded by the recolored
/// norm (Cauchy-Schwarz), `cbar_hat` by 1.
pub fn estimate_spike(theta_hat: f64, tau_hat: f64, recolored_norm_sq: f64, model: &SpectralModel) -> Result<SpikeParams> {
    if !(tau_hat > 0.0) {
        return Err(Error::Config(format!("tau_hat must be positive, got {tau_hat}")));
    }
    let z = theta_hat * theta_hat;
    let psi = model.psi(z)?;
    let psi_d = model.psi_deriv(z)?;
    let sigma_hat = model.xi_inv(theta_hat)? / tau_hat.sqrt();
    let c_sq = model.phi(z)? / (tau_hat * psi_d.abs());
    let cbar_sq = model.stieltjes_assoc(z)? * psi / psi_d;
    let clamped_to_zero = c_sq < 0.0 || cbar_sq < 0.0;
    Ok(SpikeParams {
        sigma_hat,
        c_hat: c_sq.clamp(0.0, recolored_norm_sq.max(0.0)).sqrt(),
        cbar_hat: cbar_sq.clamp(0.0, 1.0).sqrt(),
        clamped_to_zero,
    })
}

/// `X_hat = sum_k eta_k (Sigma_hat^(1/2) u_k)(v_k)^T` over the given spikes.
pub fn shrink_and_recolor(recolored: MatRef<'_, f64>, v: MatRef<'_, f64>, spikes: &[SpikeEstimate]) -> Mat<f64> {
    let (p, n) = (recolored.nrows(), v.nrows());
    let k = spikes.len();
    let left = Mat::from_fn(p, k, |i, j| recolored[(i, j)] * spikes[j].eta_hat);
    let right = Mat::from_fn(n, k, |i, j| v[(i, j)]);
    linalg::matmul_seq(left.as_ref(), right.transpose())
}

pub fn estimate_amse(spikes: &[SpikeEstimate]) -> f64 {
    spikes
        .iter()
        .filter(|s| s.status == SpikeStatus::Retained)
        .map(|s| s.sigma_hat * s.sigma_hat * (1.0 - (s.c_hat * s.cbar_hat).powi(2) / s.recolored_norm_sq))
        .sum()
}

/// Leading triplets of `y_w` above `threshold`, at most `limit` of them.
/// Grows the request until a value below the threshold shows up.
fn leading_triplets(y_w: MatRef<'_, f64>, threshold: f64, limit: usize) -> Result<Triplets> {
    let q = y_w.nrows().min(y_w.ncols());
    let limit = limit.min(q);
    let mut k = limit.clamp(1, 4);
    loop {
        let want = (k + 1).min(q);
        let mut t = linalg::top_singular_triplets(y_w, want)?;
        let count = t.values.iter().take_while(|&&s| s > threshold).count();
        if count < want || want == q || count >= limit {
            let keep = count.min(limit);
            t.values.truncate(keep);
            t.u = Mat::from_fn(t.u.nrows(), keep, |i, j| t.u[(i, j)]);
            t.v = Mat::from_fn(t.v.nrows(), keep, |i, j| t.v[(i, j)]);
            return Ok(t);
        }
        k = (2 * k).min(limit);
    }
}

fn validate(input: &DenoiseInput<'_>) -> Result<(usize, usize, usize)> {
    let (p, n) = (input.y.nrows(), input.y.ncols());
    let m = input.noise.ncols();
    if input.noise.nrows() != p {
        return Err(Error::Dimension(format!(
            "Y has {p} rows but the noise matrix has {}",
            input.noise.nrows()
        )));
    }
    if p < 2 || n < 2 {
        return Err(Error::Dimension(format!("need p >= 2 and n >= 2, got {p}x{n}")));
    }
    if m < p {
        return Err(Error::IllConditioned(format!(
            "need at least as many noise samples as rows (m >= p), got m={m} < p={p}"
        )));
    }
    if m == p {
        return Err(Error::IllConditioned(format!(
            "m = p = {p} puts the whitened bulk edge at infinity; need m > p"
        )));
    }
    if input.rank_cap == Some(0) {
        return Err(Error::Config("rank_cap must be positive".into()));
    }
    let finite = |a: MatRef<'_, f64>| (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].is_finite()));
    if !finite(input.y) || !finite(input.noise) {
        return Err(Error::Config("input matrices must be finite".into()));
    }
    Ok((p, n, m))
}

pub fn denoise(input: &DenoiseInput<'_>) -> Result<DenoiseReport> {
    let (p, n, m) = validate(input)?;
    let model = SpectralModel::from_ratios(AspectRatios::from_dims(p, n, m)?);
    let epsilon = input.epsilon.resolve(model.bulk.theta_max, n)?;

    let sigma_hat = sample_covariance(input.noise)?;
    let mu_hat = (0..p).map(|i| sigma_hat[(i, i)]).sum::<f64>() / p as f64;
    let Whitened { y_w, sqrt, .. } = whiten(input.y, sigma_hat.as_ref())?;

    let limit = input.rank_cap.unwrap_or(usize::MAX);
    let triplets = leading_triplets(y_w.as_ref(), model.bulk.theta_max + epsilon, limit)?;
    let rank_hat = estimate_rank(&triplets.values, &model, epsilon, input.rank_cap);

    let recolored = linalg::matmul_seq(sqrt.as_ref(), triplets.u.as_ref());
    let mut warnings = Vec::new();
    let mut spikes = Vec::with_capacity(rank_hat);
    for k in 0..rank_hat {
        let theta_hat = triplets.values[k];
        let norm_sq = linalg::dot(recolored.col_as_slice(k), recolored.col_as_slice(k));
        spikes.push(estimate_component(theta_hat, norm_sq, mu_hat, &model, &mut warnings)?);
    }

    let x_hat = shrink_and_recolor(recolored.as_ref(), triplets.v.as_ref(), &spikes);
    let amse_hat = estimate_amse(&spikes);
    Ok(DenoiseReport {
        x_hat,
        rank_hat,
        spikes,
        mu_hat,
        amse_hat,
        gamma_hat: model.gamma(),
        beta_hat: model.beta(),
        epsilon,
        warnings,
    })
}

fn estimate_component(
    theta_hat: f64,
    norm_sq: f64,
    mu_hat: f64,
    model: &SpectralModel,
    warnings: &mut Vec<String>,
) -> Result<SpikeEstimate> {
    let cbar_hat = {
        let z = theta_hat * theta_hat;
        (model.stieltjes_assoc(z)? * model.psi(z)? / model.psi_deriv(z)?).clamp(0.0, 1.0).sqrt()
    };
    let degenerate = |tau_hat: f64| SpikeEstimate {
        theta_hat,
        tau_hat,
        sigma_hat: 0.0,
        c_hat: 0.0,
        cbar_hat,
        eta_hat: 0.0,
        t_hat: 0.0,
        recolored_norm_sq: norm_sq,
        status: SpikeStatus::Degenerate,
    };
    let tau_hat = match estimate_tau(theta_hat, norm_sq, mu_hat, model) {
        Ok(t) => t,
        Err(Error::DegenerateSpike { denominator, .. }) => {
            warnings.push(format!(
                "spike at theta={theta_hat}: alignment denominator {denominator} <= 0, weight set to zero"
            ));
            return Ok(degenerate(0.0));
        }
        Err(e) => return Err(e),
    };
    let params = estimate_spike(theta_hat, tau_hat, norm_sq, model)?;
    if params.clamped_to_zero {
        warnings.push(format!("spike at theta={theta_hat}: negative cosine radicand clamped, weight set to zero"));
        return Ok(degenerate(tau_hat));
    }
    let eta_hat = params.sigma_hat * params.c_hat * params.cbar_hat / norm_sq;
    Ok(SpikeEstimate {
        theta_hat,
        tau_hat,
        sigma_hat: params.sigma_hat,
        c_hat: params.c_hat,
        cbar_hat: params.cbar_hat,
        eta_hat,
        t_hat: eta_hat * norm_sq.sqrt(),
        recolored_norm_sq: norm_sq,
        status: SpikeStatus::Retained,
    })
}
