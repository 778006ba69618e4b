//! Reference shrinkers that see only `Y`: OptShrink and plain truncation.
//!
//! OptShrink weights component `k` by `-2 D(s_k) / D'(s_k)`, where `D` is the
//! D-transform of the noise singular value distribution, estimated from the
//! trailing singular values of `Y` (zero-padded to both matrix dimensions).

use crate::error::{Error, Result};
use crate::linalg;
use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

/// Fewest trailing singular values OptShrink accepts as its noise model.
pub const MIN_BULK: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    OptShrink,
    TruncatedSvd,
}

/// Empirical D-transform built from a bulk of singular values embedded in a
/// `rows x cols` matrix.
#[derive(Debug, Clone)]
pub struct DTransform {
    bulk_sq: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DTransform {
    pub fn new(bulk: &[f64], rows: usize, cols: usize) -> Self {
        Self {
            bulk_sq: bulk.iter().map(|s| s * s).collect(),
            rows,
            cols,
        }
    }

    /// `(1/d) tr z (z^2 - B)^(-1)` over a `d`-dimensional Gram spectrum padded with zeros,
    /// and its derivative.
    fn half(&self, z: f64, d: usize) -> (f64, f64) {
        let zeros = d.saturating_sub(self.bulk_sq.len()) as f64;
        let z2 = z * z;
        let mut value = zeros / z;
        let mut deriv = -zeros / z2;
        for &s2 in &self.bulk_sq {
            let gap = z2 - s2;
            value += z / gap;
            deriv -= (z2 + s2) / (gap * gap);
        }
        (value / d as f64, deriv / d as f64)
    }

    pub fn value(&self, z: f64) -> f64 {
        self.half(z, self.rows).0 * self.half(z, self.cols).0
    }

    pub fn deriv(&self, z: f64) -> f64 {
        let (a, da) = self.half(z, self.rows);
        let (b, db) = self.half(z, self.cols);
        da * b + a * db
    }

    /// Asymptotically optimal weight for an outlier at `z`.
    pub fn weight(&self, z: f64) -> f64 {
        (-2.0 * self.value(z) / self.deriv(z)).max(0.0)
    }
}

/// OptShrink weights of the top `r` singular values, from a full singular spectrum.
pub fn optshrink_weights(values: &[f64], r: usize, p: usize, n: usize) -> Result<Vec<f64>> {
    let q = p.min(n);
    if r == 0 || 2 * r >= q {
        return Err(Error::InvalidRank {
            rank: r,
            reason: format!("OptShrink needs 0 < r < min(p, n)/2 = {}", q as f64 / 2.0),
        });
    }
    let bulk = &values[r..q];
    if bulk.len() < MIN_BULK {
        return Err(Error::InsufficientBulk {
            available: bulk.len(),
            required: MIN_BULK,
        });
    }
    let d = DTransform::new(bulk, p - r, n - r);
    Ok(values[..r].iter().map(|&s| d.weight(s)).collect())
}

pub fn optshrink(y: MatRef<'_, f64>, r: usize) -> Result<Mat<f64>> {
    let (p, n) = (y.nrows(), y.ncols());
    if r == 0 || 2 * r >= p.min(n) {
        // Validate before paying for the decomposition.
        optshrink_weights(&[], r, p, n)?;
    }
    let svd = linalg::thin_svd(y)?;
    let weights = optshrink_weights(&svd.values, r, p, n)?;
    Ok(reconstruct(&svd, &weights))
}

pub fn truncated_svd(y: MatRef<'_, f64>, r: usize) -> Result<Mat<f64>> {
    let q = y.nrows().min(y.ncols());
    if r > q {
        return Err(Error::InvalidRank {
            rank: r,
            reason: format!("exceeds min(p, n) = {q}"),
        });
    }
    if r == 0 {
        return Ok(Mat::zeros(y.nrows(), y.ncols()));
    }
    let svd = linalg::thin_svd(y)?;
    Ok(reconstruct(&svd, &svd.values[..r]))
}

fn reconstruct(svd: &linalg::Triplets, weights: &[f64]) -> Mat<f64> {
    let (p, n) = (svd.u.nrows(), svd.v.nrows());
    let k = weights.len();
    let left = Mat::from_fn(p, k, |i, j| svd.u[(i, j)] * weights[j]);
    let right = Mat::from_fn(n, k, |i, j| svd.v[(i, j)]);
    linalg::matmul_seq(left.as_ref(), right.transpose())
}

pub fn apply(kind: BaselineKind, y: MatRef<'_, f64>, r: usize) -> Result<Mat<f64>> {
    match kind {
        BaselineKind::OptShrink => optshrink(y, r),
        BaselineKind::TruncatedSvd => truncated_svd(y, r),
    }
}
