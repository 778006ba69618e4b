//! Empirical counterparts of the tracked limits for the leading component.
//!
//! With `Sigma_hat = L L^T`, the matrix `L^-1 Y` differs from the symmetric
//! whitening `Sigma_hat^(-1/2) Y` by an orthogonal factor on the left. Both
//! share singular values and right vectors, and the left vectors map as
//! `Sigma_hat^(1/2) u_w = L u_L` and `Sigma_hat^(-1/2) u_w = L^-T u_L`.

use super::config::{CovarianceSpec, DSpec, NoiseDistribution};
use super::generate::{self, REDUCED_STREAM};
use crate::error::{Error, Result};
use crate::linalg;
use faer::{Mat, MatRef};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;

/// Leading observed singular value and absolute cosines against one spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialMetrics {
    pub theta: f64,
    /// `|v_hat^T v|`
    pub cos_inner: f64,
    /// `|(u_w)^T Sigma_hat^(1/2) u|`
    pub cos_outer_white: f64,
    /// `|(u_w)^T Sigma_hat^(-1/2) u|`
    pub cos_outer_unwhite: f64,
}

/// Measure the leading whitened component of `y` against the directions `u`, `v`.
pub fn measure_leading(y: MatRef<'_, f64>, noise: MatRef<'_, f64>, u: &[f64], v: &[f64]) -> Result<TrialMetrics> {
    let (p, n) = (y.nrows(), y.ncols());
    if noise.nrows() != p || u.len() != p || v.len() != n {
        return Err(Error::Dimension("measurement inputs disagree in shape".into()));
    }
    let sigma_hat = linalg::gram(noise, 1.0 / noise.ncols() as f64);
    let l = linalg::cholesky_lower(sigma_hat.as_ref())?;
    drop(sigma_hat);
    let l = l.as_ref();

    // Lanczos on the smaller of L^-1 Y Y^T L^-T and Y^T L^-T L^-1 Y, without forming L^-1 Y.
    let mut long = vec![0.0; n];
    let mut short = vec![0.0; p];
    let (theta, mut u_l, v_hat) = if p <= n {
        let pairs = linalg::lanczos_top(p, 1, |x, out| {
            short.copy_from_slice(x);
            linalg::lower_solve_in_place(l, &mut short, true);
            linalg::gemv(&mut long, y, &short, true);
            linalg::gemv(out, y, &long, false);
            linalg::lower_solve_in_place(l, out, false);
        })?;
        let theta = pairs.values[0].max(0.0).sqrt();
        let u_l = pairs.vectors.col_as_slice(0).to_vec();
        short.copy_from_slice(&u_l);
        linalg::lower_solve_in_place(l, &mut short, true);
        linalg::gemv(&mut long, y, &short, true);
        linalg::scale(1.0 / theta, &mut long);
        (theta, u_l, long)
    } else {
        let pairs = linalg::lanczos_top(n, 1, |x, out| {
            linalg::gemv(&mut short, y, x, false);
            linalg::lower_solve_in_place(l, &mut short, false);
            linalg::lower_solve_in_place(l, &mut short, true);
            linalg::gemv(out, y, &short, true);
        })?;
        let theta = pairs.values[0].max(0.0).sqrt();
        let v_hat = pairs.vectors.col_as_slice(0).to_vec();
        linalg::gemv(&mut short, y, &v_hat, false);
        linalg::lower_solve_in_place(l, &mut short, false);
        linalg::scale(1.0 / theta, &mut short);
        (theta, short, v_hat)
    };
    let cos_inner = linalg::dot(&v_hat, v).abs();
    let mut unwhite = u.to_vec();
    linalg::lower_solve_in_place(l, &mut unwhite, false);
    let cos_outer_unwhite = linalg::dot(&u_l, &unwhite).abs();
    linalg::lower_mul_in_place(l, &mut u_l, false);
    Ok(TrialMetrics {
        theta,
        cos_inner,
        cos_outer_white: linalg::dot(&u_l, u).abs(),
        cos_outer_unwhite,
    })
}

/// Lower Bartlett factor: `A A^T ~ Wishart_p(dof, I)`.
fn bartlett(p: usize, dof: usize, rng: &mut ChaCha8Rng) -> Result<Mat<f64>> {
    if dof < p {
        return Err(Error::Config(format!("Bartlett factor needs dof >= p, got {dof} < {p}")));
    }
    let mut a = Mat::<f64>::zeros(p, p);
    for j in 0..p {
        let chi = ChiSquared::new((dof - j) as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        a[(j, j)] = chi.sample(rng).sqrt();
        for i in j + 1..p {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    Ok(a)
}

/// Rank-one Gaussian instance sampled directly in reduced form.
///
/// For Gaussian noise and diagonal `Sigma`, rotate the columns so that `v`
/// becomes the first basis vector. The data splits into a signal column
/// `c = sigma u + Sigma^(1/2) z / sqrt(n)` and independent pure-noise columns
/// whose Gram matrix is Wishart. Both Wishart matrices are drawn through
/// Bartlett factors, so the whitened Gram operator costs four triangular
/// products per application instead of a dense `p x n` matrix. The law of
/// every tracked quantity is exactly that of the dense construction.
#[derive(Debug, Clone)]
pub struct ReducedGaussian {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    cov_root: Vec<f64>,
    d: Vec<f64>,
}

impl ReducedGaussian {
    pub fn new(p: usize, n: usize, m: usize, sigma: f64, cov: &CovarianceSpec, d: &DSpec) -> Result<Self> {
        if n < p + 1 || m <= p {
            return Err(Error::Config(format!(
                "reduced sampler needs n > p and m > p, got p={p}, n={n}, m={m}"
            )));
        }
        Ok(Self {
            p,
            n,
            m,
            sigma,
            cov_root: cov.diagonal(p)?.iter().map(|s| s.sqrt()).collect(),
            d: d.diagonal(p)?,
        })
    }

    pub fn sample(&self, seed: u64) -> Result<TrialMetrics> {
        let (p, n, m) = (self.p, self.n, self.m);
        let mut signal_rng = generate::stream(seed, 0);
        let mut u: Vec<f64> = (0..p)
            .map(|i| {
                let g: f64 = StandardNormal.sample(&mut signal_rng);
                g * self.d[i]
            })
            .collect();
        let nu = linalg::norm(&u);
        linalg::scale(1.0 / nu, &mut u);

        let mut rng = generate::stream(seed, REDUCED_STREAM);
        let inv_sqrt_n = 1.0 / (n as f64).sqrt();
        let c: Vec<f64> = (0..p)
            .map(|i| {
                let g: f64 = StandardNormal.sample(&mut rng);
                self.sigma * u[i] + self.cov_root[i] * g * inv_sqrt_n
            })
            .collect();
        let a = bartlett(p, m, &mut rng)?;
        let b = bartlett(p, n - 1, &mut rng)?;

        // L = Sigma^(1/2) A / sqrt(m)
        let sqrt_m = (m as f64).sqrt();
        let mut g = c;
        for (gi, s) in g.iter_mut().zip(&self.cov_root) {
            *gi *= sqrt_m / s;
        }
        linalg::lower_solve_in_place(a.as_ref(), &mut g, false);

        let ratio = m as f64 / n as f64;
        let mut tmp = vec![0.0; p];
        let pairs = linalg::lanczos_top(p, 1, |x, out| {
            tmp.copy_from_slice(x);
            linalg::lower_solve_in_place(a.as_ref(), &mut tmp, true);
            linalg::lower_mul_in_place(b.as_ref(), &mut tmp, true);
            linalg::lower_mul_in_place(b.as_ref(), &mut tmp, false);
            linalg::lower_solve_in_place(a.as_ref(), &mut tmp, false);
            let proj = linalg::dot(&g, x);
            for i in 0..p {
                out[i] = ratio * tmp[i] + proj * g[i];
            }
        })?;
        let theta = pairs.values[0].max(0.0).sqrt();
        let u_l = pairs.vectors.col_as_slice(0);

        let mut recolored = u_l.to_vec();
        linalg::lower_mul_in_place(a.as_ref(), &mut recolored, false);
        let white = recolored.iter().zip(&self.cov_root).zip(&u).map(|((r, s), x)| r * s * x).sum::<f64>() / sqrt_m;
        let mut unwhite: Vec<f64> = u.iter().zip(&self.cov_root).map(|(x, s)| x / s).collect();
        linalg::lower_solve_in_place(a.as_ref(), &mut unwhite, false);
        let unwhite = linalg::dot(&unwhite, u_l) * sqrt_m;
        Ok(TrialMetrics {
            theta,
            cos_inner: (linalg::dot(&g, u_l) / theta).abs(),
            cos_outer_white: white.abs(),
            cos_outer_unwhite: unwhite.abs(),
        })
    }
}

/// Noise kinds accepted by the reduced sampler.
pub fn reduced_supports(noise: NoiseDistribution) -> bool {
    noise == NoiseDistribution::Gaussian
}
