use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Diagonal noise covariance families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceKind {
    Identity,
    /// Eigenvalues equally spaced in `[1, kappa]`.
    LinSpaced { kappa: f64 },
    /// Eigenvalues `t^alpha` with `t` equally spaced in `[1, 3]`.
    PolyDecay { alpha: f64 },
    ExplicitDiag { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    /// Rescale so that `p^-1 sum 1/Sigma_ii = 1`.
    pub normalize_tau: bool,
}

impl CovarianceSpec {
    pub fn identity() -> Self {
        Self {
            kind: CovarianceKind::Identity,
            normalize_tau: false,
        }
    }

    pub fn lin_spaced(kappa: f64) -> Self {
        Self {
            kind: CovarianceKind::LinSpaced { kappa },
            normalize_tau: false,
        }
    }

    /// Diagonal of the covariance at dimension `p`.
    pub fn diagonal(&self, p: usize) -> Result<Vec<f64>> {
        let grid = |lo: f64, hi: f64| -> Vec<f64> {
            if p == 1 {
                return vec![lo];
            }
            (0..p).map(|i| lo + (hi - lo) * i as f64 / (p - 1) as f64).collect()
        };
        let mut diag = match &self.kind {
            CovarianceKind::Identity => vec![1.0; p],
            CovarianceKind::LinSpaced { kappa } => {
                if !(kappa.is_finite() && *kappa >= 1.0) {
                    return Err(Error::Config(format!("kappa must be >= 1, got {kappa}")));
                }
                grid(1.0, *kappa)
            }
            CovarianceKind::PolyDecay { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::Config(format!("alpha must be finite, got {alpha}")));
                }
                grid(1.0, 3.0).into_iter().map(|t| t.powf(*alpha)).collect()
            }
            CovarianceKind::ExplicitDiag { values } => {
                if values.len() != p {
                    return Err(Error::Config(format!(
                        "explicit covariance has {} entries, expected p = {p}",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("covariance eigenvalues must be positive and finite".into()));
        }
        if self.normalize_tau {
            let inv_mean = diag.iter().map(|d| 1.0 / d).sum::<f64>() / p as f64;
            diag.iter_mut().for_each(|d| *d *= inv_mean);
        }
        Ok(diag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseDistribution {
    Gaussian,
    Rademacher,
    /// Student t with `df > 2` degrees of freedom, scaled to unit variance.
    StudentT { df: f64 },
}

impl NoiseDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseDistribution::StudentT { df } if !(df.is_finite() && *df > 2.0) => {
                Err(Error::Config(format!("student_t needs df > 2 for finite variance, got {df}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            NoiseDistribution::Gaussian => "gaussian".into(),
            NoiseDistribution::Rademacher => "rademacher".into(),
            NoiseDistribution::StudentT { df } => format!("student_t({df})"),
        }
    }
}

/// Diagonal shaping of a signal direction: `u = D w / ||D w||`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DSpec {
    Identity,
    /// `D_kk proportional to k^2`, `k = 1..p`.
    QuadraticRamp,
    ExplicitDiag { values: Vec<f64> },
}

impl DSpec {
    pub fn diagonal(&self, p: usize) -> Result<Vec<f64>> {
        let d = match self {
            DSpec::Identity => vec![1.0; p],
            DSpec::QuadraticRamp => {
                let scale = (p as f64).sqrt() / (p as f64).powi(2);
                (1..=p).map(|k| scale * (k * k) as f64).collect()
            }
            DSpec::ExplicitDiag { values } => {
                if values.len() != p {
                    return Err(Error::Config(format!(
                        "explicit D has {} entries, expected p = {p}",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if d.iter().any(|x| !x.is_finite()) || d.iter().all(|x| *x == 0.0) {
            return Err(Error::Config("D must be finite and not identically zero".into()));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spike {
    pub sigma: f64,
    pub d: DSpec,
}

/// A synthetic instance: `Y = sum sigma_k u_k v_k^T + Sigma^(1/2) Z / sqrt(n)`,
/// `R = Sigma^(1/2) Z'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeConfig {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub spikes: Vec<Spike>,
    pub cov: CovarianceSpec,
    pub noise: NoiseDistribution,
    pub seed: u64,
}

impl GenerativeConfig {
    pub fn validate(&self) -> Result<()> {
        let (p, n, m) = (self.p, self.n, self.m);
        if p < 2 || n < 2 || m < 2 {
            return Err(Error::Config(format!("need p, n, m >= 2, got {p}, {n}, {m}")));
        }
        if m < p {
            return Err(Error::Config(format!("need m >= p, got m={m} < p={p}")));
        }
        if self.spikes.len() > p.min(n) {
            return Err(Error::Config("more spikes than min(p, n)".into()));
        }
        self.noise.validate()?;
        let taus = super::true_tau(self)?;
        let mut effective: Vec<f64> = Vec::with_capacity(taus.len());
        for (spike, tau) in self.spikes.iter().zip(&taus) {
            if !(spike.sigma.is_finite() && spike.sigma > 0.0) {
                return Err(Error::Config(format!("spike intensity must be positive, got {}", spike.sigma)));
            }
            let e = tau.sqrt() * spike.sigma;
            if effective.iter().any(|&o| (o - e).abs() <= 1e-12 * e) {
                return Err(Error::Config("effective spike intensities must be distinct".into()));
            }
            effective.push(e);
        }
        Ok(())
    }
}
