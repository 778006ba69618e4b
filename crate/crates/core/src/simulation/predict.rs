use crate::error::{Error, Result};
use crate::spectral::SpectralModel;
use serde::Serialize;

/// Large-dimension limits for one spike of intensity `sigma` and alignment `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Predictions {
    /// Outlier singular value of the whitened data.
    pub y: f64,
    /// Squared limit of `(u_w)^T Sigma_hat^(1/2) u`.
    pub c_sq: f64,
    /// Squared limit of `v_hat^T v`.
    pub cbar_sq: f64,
    /// Squared limit of `(u_w)^T Sigma_hat^(-1/2) u`.
    pub ctilde_sq: f64,
    /// Limit of `c * cbar`.
    pub cross: f64,
    /// Limit of `||Sigma_hat^(1/2) u_w||^2`.
    pub norm_sq: f64,
    /// Squared cosine between `u` and the normalized recolored vector.
    pub u_cos_sq: f64,
    pub eta: f64,
    pub t: f64,
    pub amse: f64,
}

/// `mu` is `p^-1 tr Sigma`.
pub fn asymptotic_predictions(model: &SpectralModel, sigma: f64, tau: f64, mu: f64) -> Result<Predictions> {
    if !(sigma > 0.0 && tau > 0.0 && mu > 0.0) {
        return Err(Error::Config(format!(
            "sigma, tau and mu must be positive, got {sigma}, {tau}, {mu}"
        )));
    }
    let effective = tau.sqrt() * sigma;
    let threshold = model.bulk.sigma_thresh;
    if effective <= threshold {
        return Err(Error::SubThreshold { effective, threshold });
    }
    let y = model.xi(effective)?;
    let z = y * y;
    let psi = model.psi(z)?;
    let psi_d = model.psi_deriv(z)?;
    let phi = model.phi(z)?;
    let c_sq = phi / (tau * psi_d.abs());
    let cbar_sq = model.stieltjes_assoc(z)? * psi / psi_d;
    let ctilde_sq = tau * model.zeta(z)? * psi / psi_d;
    let norm_sq = (mu * model.e_func(z)? + phi / tau) / psi_d.abs();
    let cross = (c_sq * cbar_sq).sqrt();
    let eta = sigma * cross / norm_sq;
    Ok(Predictions {
        y,
        c_sq,
        cbar_sq,
        ctilde_sq,
        cross,
        norm_sq,
        u_cos_sq: c_sq / norm_sq,
        eta,
        t: eta * norm_sq.sqrt(),
        amse: sigma * sigma * (1.0 - c_sq * cbar_sq / norm_sq),
    })
}
