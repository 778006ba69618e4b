use super::config::{GenerativeConfig, NoiseDistribution};
use crate::error::{Error, Result};
use crate::linalg;
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

const SIGNAL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const REFERENCE_STREAM: u64 = 2;
const NOISE_AUX_STREAM: u64 = 3;
const REFERENCE_AUX_STREAM: u64 = 4;
/// Reserved for samplers that draw their own variates.
pub(crate) const REDUCED_STREAM: u64 = 5;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one labelled sub-experiment, independent of execution order.
pub fn derive_seed(master: u64, label: u64) -> u64 {
    splitmix64(master ^ splitmix64(label))
}

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub(crate) fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Unit-variance noise. Every distribution is built from the same Gaussian
/// draws, so instances with different noise laws but the same seed are coupled.
pub(crate) fn noise_matrix(
    kind: NoiseDistribution,
    rows: usize,
    cols: usize,
    base: &mut ChaCha8Rng,
    aux: &mut ChaCha8Rng,
) -> Result<Mat<f64>> {
    kind.validate()?;
    let mut z = gaussian_matrix(rows, cols, base);
    match kind {
        NoiseDistribution::Gaussian => {}
        NoiseDistribution::Rademacher => {
            for j in 0..cols {
                for x in z.col_as_slice_mut(j) {
                    *x = if *x < 0.0 { -1.0 } else { 1.0 };
                }
            }
        }
        NoiseDistribution::StudentT { df } => {
            let chi = ChiSquared::new(df).map_err(|e| Error::Config(format!("student_t: {e}")))?;
            for j in 0..cols {
                for x in z.col_as_slice_mut(j) {
                    let v: f64 = chi.sample(aux);
                    *x *= ((df - 2.0) / v).sqrt();
                }
            }
        }
    }
    Ok(z)
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// `p x r`, orthonormal columns.
    pub u: Mat<f64>,
    /// `n x r`, orthonormal columns.
    pub v: Mat<f64>,
    pub sigmas: Vec<f64>,
    pub taus: Vec<f64>,
    pub cov_diag: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub x: Mat<f64>,
    pub y: Mat<f64>,
    /// Noise-only samples, `p x m`.
    pub noise: Mat<f64>,
    pub truth: GroundTruth,
}

/// `p^-1 tr(D^T Sigma^-1 D)` per spike, with `D` rescaled so that `p^-1 tr(D^T D) = 1`.
pub fn true_tau(config: &GenerativeConfig) -> Result<Vec<f64>> {
    let cov = config.cov.diagonal(config.p)?;
    config
        .spikes
        .iter()
        .map(|spike| {
            let d = spike.d.diagonal(config.p)?;
            let weighted: f64 = d.iter().zip(&cov).map(|(di, si)| di * di / si).sum();
            let total: f64 = d.iter().map(|di| di * di).sum();
            Ok(weighted / total)
        })
        .collect()
}

/// Signal directions and the rank-`r` signal matrix.
pub(crate) fn signal(config: &GenerativeConfig, rng: &mut ChaCha8Rng) -> Result<(Mat<f64>, Mat<f64>, Mat<f64>)> {
    let (p, n, r) = (config.p, config.n, config.spikes.len());
    let mut u = gaussian_matrix(p, r, rng);
    for (k, spike) in config.spikes.iter().enumerate() {
        let d = spike.d.diagonal(p)?;
        for (x, di) in u.col_as_slice_mut(k).iter_mut().zip(&d) {
            *x *= di;
        }
    }
    let mut v = gaussian_matrix(n, r, rng);
    if r > 0 {
        linalg::orthonormalize_columns(&mut u)?;
        linalg::orthonormalize_columns(&mut v)?;
    }
    let scaled = Mat::from_fn(p, r, |i, k| u[(i, k)] * config.spikes[k].sigma);
    let x = linalg::matmul_seq(scaled.as_ref(), v.transpose());
    Ok((x, u, v))
}

pub fn generate(config: &GenerativeConfig) -> Result<Instance> {
    config.validate()?;
    let (p, n, m) = (config.p, config.n, config.m);
    let cov_diag = config.cov.diagonal(p)?;
    let taus = true_tau(config)?;
    let (x, u, v) = signal(config, &mut stream(config.seed, SIGNAL_STREAM))?;

    let root: Vec<f64> = cov_diag.iter().map(|s| s.sqrt()).collect();
    let z = noise_matrix(
        config.noise,
        p,
        n,
        &mut stream(config.seed, NOISE_STREAM),
        &mut stream(config.seed, NOISE_AUX_STREAM),
    )?;
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let y = Mat::from_fn(p, n, |i, j| x[(i, j)] + root[i] * z[(i, j)] * inv_sqrt_n);
    drop(z);
    let mut noise = noise_matrix(
        config.noise,
        p,
        m,
        &mut stream(config.seed, REFERENCE_STREAM),
        &mut stream(config.seed, REFERENCE_AUX_STREAM),
    )?;
    for j in 0..m {
        for (e, s) in noise.col_as_slice_mut(j).iter_mut().zip(&root) {
            *e *= s;
        }
    }
    let sigmas = config.spikes.iter().map(|s| s.sigma).collect();
    Ok(Instance {
        x,
        y,
        noise,
        truth: GroundTruth {
            u,
            v,
            sigmas,
            taus,
            cov_diag,
        },
    })
}
