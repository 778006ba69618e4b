//! Low-rank matrix denoising under correlated noise by whitening with a
//! noise-only sample covariance, shrinking singular values, and recoloring.

pub mod baselines;
pub mod denoise;
pub mod error;
pub mod json;
pub mod linalg;
pub mod simulation;
pub mod spectral;

pub use baselines::{optshrink, truncated_svd, BaselineKind};
pub use denoise::{denoise, DenoiseInput, DenoiseReport, Epsilon, SpikeEstimate, SpikeStatus};
pub use error::{Error, Result};
pub use faer::{Mat, MatRef};
pub use spectral::{bulk_geometry, mp_stieltjes, mp_stieltjes_deriv, AspectRatios, BulkGeometry, SpectralModel};
