//! Closed-form spectral functions of the spiked F-matrix ensemble.
//!
//! Everything here is a pure function of the aspect ratios `gamma = p/n` and
//! `beta = p/m`. The functions of `z` live strictly to the right of the squared
//! bulk edge `theta_max^2`; evaluating at or inside the edge is a domain error.
//!
//! The printed closed forms subtract a square root from a quantity of the same
//! size, which loses precision far from the edge. Each one is rationalized
//! (multiplied through by the conjugate) into an algebraically identical form
//! without the cancellation, and derivatives are taken of those forms.

use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Radicands this far below zero (relative to their scale) are treated as zero.
const EDGE_TOLERANCE: f64 = 1e-12;

/// Limiting shape parameters `gamma = lim p/n` and `beta = lim p/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectRatios {
    gamma: f64,
    beta: f64,
}

impl AspectRatios {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(domain("aspect_ratios", gamma, "gamma > 0"));
        }
        if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
            return Err(domain("aspect_ratios", beta, "0 <= beta < 1"));
        }
        Ok(Self { gamma, beta })
    }

    /// Ratios observed at finite dimensions: `(p/n, p/m)`.
    pub fn from_dims(p: usize, n: usize, m: usize) -> Result<Self> {
        if p == 0 || n == 0 || m == 0 {
            return Err(Error::Dimension(format!("p={p}, n={n}, m={m} must all be positive")));
        }
        Self::new(p as f64 / n as f64, p as f64 / m as f64)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Detection threshold and bulk edges of the whitened noise singular values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkGeometry {
    pub sigma_thresh: f64,
    pub theta_max: f64,
    /// Negative when `gamma > 1`; the lower eigenvalue edge is still `theta_min^2`.
    pub theta_min: f64,
}

pub fn bulk_geometry(ratios: AspectRatios) -> BulkGeometry {
    let (g, b) = (ratios.gamma, ratios.beta);
    let a = 1.0 - b;
    let s = (b + g - b * g).sqrt();
    BulkGeometry {
        sigma_thresh: ((b + s) / a).sqrt(),
        theta_max: (1.0 + s) / a,
        theta_min: (1.0 - s) / a,
    }
}

/// Stieltjes transform of the Marchenko-Pastur law with ratio `beta`,
/// evaluated to the left of its bulk: `0 < z < (1 - sqrt(beta))^2`.
pub fn mp_stieltjes(beta: f64, z: f64) -> Result<f64> {
    let (den, _) = mp_parts(beta, z)?;
    Ok(2.0 / den)
}

pub fn mp_stieltjes_deriv(beta: f64, z: f64) -> Result<f64> {
    let (den, den_d) = mp_parts(beta, z)?;
    Ok(-2.0 * den_d / (den * den))
}

/// Denominator `1 - beta - z + sqrt(q)` of the rationalized transform and its derivative.
fn mp_parts(beta: f64, z: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&beta) {
        return Err(domain("mp_stieltjes", beta, "0 <= beta < 1"));
    }
    let edge = (1.0 - beta.sqrt()).powi(2);
    if !(z > 0.0 && z < edge) {
        return Err(domain("mp_stieltjes", z, format!("0 < z < {edge}")));
    }
    let w = z - 1.0 - beta;
    let sq = clamp_radicand(w * w - 4.0 * beta, w * w).sqrt();
    let den = 1.0 - beta - z + sq;
    // d sqrt(q)/dz = w / sqrt(q); sqrt(q) > 0 strictly inside the domain.
    let den_d = -1.0 + w / sq;
    Ok((den, den_d))
}

fn clamp_radicand(value: f64, scale: f64) -> f64 {
    if value < 0.0 && value >= -EDGE_TOLERANCE * scale.max(1.0) {
        0.0
    } else {
        value
    }
}

/// Shared pieces at a point `z`: the discriminant root and its derivative.
#[derive(Debug, Clone, Copy)]
struct Point {
    z: f64,
    a: f64,
    b: f64,
    root: f64,
    root_d: f64,
}

/// Evaluator for every spectral function at fixed aspect ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub ratios: AspectRatios,
    pub bulk: BulkGeometry,
}

impl SpectralModel {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        Ok(Self::from_ratios(AspectRatios::new(gamma, beta)?))
    }

    pub fn from_ratios(ratios: AspectRatios) -> Self {
        Self {
            ratios,
            bulk: bulk_geometry(ratios),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.ratios.gamma
    }

    pub fn beta(&self) -> f64 {
        self.ratios.beta
    }

    /// Squared upper bulk edge; every function of `z` requires `z` strictly above it.
    pub fn edge(&self) -> f64 {
        self.bulk.theta_max * self.bulk.theta_max
    }

    fn point(&self, function: &'static str, z: f64) -> Result<Point> {
        let edge = self.edge();
        if !(z.is_finite() && z > edge) {
            return Err(domain(function, z, format!("z > theta_max^2 = {edge}")));
        }
        let a = 1.0 - self.ratios.beta;
        let b = 1.0 - self.ratios.gamma;
        let lin = a * z + b;
        let disc = clamp_radicand(lin * lin - 4.0 * z, lin * lin);
        if disc <= 0.0 {
            return Err(domain(function, z, format!("z > theta_max^2 = {edge}")));
        }
        let root = disc.sqrt();
        let root_d = (a * lin - 2.0) / root;
        Ok(Point { z, a, b, root, root_d })
    }

    fn sassoc_at(&self, pt: &Point) -> (f64, f64) {
        let (g, beta) = (self.ratios.gamma, self.ratios.beta);
        let q = pt.a * pt.z + pt.b + pt.root;
        let q_d = pt.a + pt.root_d;
        let num = beta + 2.0 * g / q;
        let num_d = -2.0 * g * q_d / (q * q);
        let den = g + beta * pt.z;
        let value = -num / den;
        let deriv = -(num_d * den - num * beta) / (den * den);
        (value, deriv)
    }

    fn sbar_at(&self, pt: &Point) -> (f64, f64) {
        let g = self.ratios.gamma;
        let (sa, sa_d) = self.sassoc_at(pt);
        let b = pt.b;
        ((sa + b / pt.z) / g, (sa_d - b / (pt.z * pt.z)) / g)
    }

    fn zeta_at(&self, pt: &Point) -> (f64, f64) {
        let q = pt.a * pt.z - pt.b + pt.root;
        let q_d = pt.a + pt.root_d;
        (-2.0 / q, 2.0 * q_d / (q * q))
    }

    fn psi_at(&self, pt: &Point) -> (f64, f64) {
        let q = pt.a * pt.z - 1.0 - self.ratios.gamma + pt.root;
        let q_d = pt.a + pt.root_d;
        (2.0 / q, -2.0 * q_d / (q * q))
    }

    /// Stieltjes transform of the Wachter law (including the atom at 0 when `gamma > 1`).
    pub fn stieltjes(&self, z: f64) -> Result<f64> {
        Ok(self.sbar_at(&self.point("stieltjes", z)?).0)
    }

    pub fn stieltjes_deriv(&self, z: f64) -> Result<f64> {
        Ok(self.sbar_at(&self.point("stieltjes_deriv", z)?).1)
    }

    /// Companion transform, `gamma * sbar(z) - (1 - gamma) / z`.
    pub fn stieltjes_assoc(&self, z: f64) -> Result<f64> {
        Ok(self.sassoc_at(&self.point("stieltjes_assoc", z)?).0)
    }

    pub fn stieltjes_assoc_deriv(&self, z: f64) -> Result<f64> {
        Ok(self.sassoc_at(&self.point("stieltjes_assoc_deriv", z)?).1)
    }

    /// Limit of the mixed resolvent trace `p^-1 tr (E - zS)^-1`.
    pub fn zeta(&self, z: f64) -> Result<f64> {
        Ok(self.zeta_at(&self.point("zeta", z)?).0)
    }

    pub fn zeta_deriv(&self, z: f64) -> Result<f64> {
        Ok(self.zeta_at(&self.point("zeta_deriv", z)?).1)
    }

    /// `z * sassoc(z) * zeta(z)`; decreases from `1/sigma_thresh^2` to 0.
    pub fn psi(&self, z: f64) -> Result<f64> {
        Ok(self.psi_at(&self.point("psi", z)?).0)
    }

    pub fn psi_deriv(&self, z: f64) -> Result<f64> {
        Ok(self.psi_at(&self.point("psi_deriv", z)?).1)
    }

    pub fn phi(&self, z: f64) -> Result<f64> {
        let pt = self.point("phi", z)?;
        let sa = self.sassoc_at(&pt).0;
        let sb = self.sbar_at(&pt).0;
        Ok(z * sa.abs() * sb * sb)
    }

    fn upsilon1_at(&self, pt: &Point) -> Result<(f64, f64)> {
        let (sa, sa_d) = self.sassoc_at(pt);
        let beta = self.ratios.beta;
        let m = mp_stieltjes(beta, -sa)?;
        let m_d = mp_stieltjes_deriv(beta, -sa)?;
        let bracket = 1.0 - sa + sa * sa * m;
        // d/dz m(-sassoc(z)) = -m'(-sassoc) * sassoc'
        let bracket_d = -sa_d + 2.0 * sa * sa_d * m - sa * sa * m_d * sa_d;
        let z = pt.z;
        Ok((bracket / z, bracket_d / z - bracket / (z * z)))
    }

    /// Limit of `p^-1 tr (zS - E)^-1 S^2`.
    pub fn upsilon1(&self, z: f64) -> Result<f64> {
        Ok(self.upsilon1_at(&self.point("upsilon1", z)?)?.0)
    }

    pub fn upsilon1_deriv(&self, z: f64) -> Result<f64> {
        Ok(self.upsilon1_at(&self.point("upsilon1_deriv", z)?)?.1)
    }

    fn upsilon2_at(&self, pt: &Point) -> Result<f64> {
        let (sa, _) = self.sassoc_at(pt);
        let (ze, ze_d) = self.zeta_at(pt);
        let beta = self.ratios.beta;
        let m = mp_stieltjes(beta, -sa)?;
        let m_d = mp_stieltjes_deriv(beta, -sa)?;
        let z = pt.z;
        let front = (1.0 + self.ratios.gamma * (ze + z * ze_d)) / (z * z);
        Ok(front * (1.0 - 2.0 * sa * m + sa * sa * m_d))
    }

    /// Limit of `p^-1 tr (zS - E)^-2 S^2`.
    pub fn upsilon2(&self, z: f64) -> Result<f64> {
        self.upsilon2_at(&self.point("upsilon2", z)?)
    }

    /// Correction term in the limit of the recolored singular vector norm.
    pub fn e_func(&self, z: f64) -> Result<f64> {
        let pt = self.point("e_func", z)?;
        let (u1, u1_d) = self.upsilon1_at(&pt)?;
        let u2 = self.upsilon2_at(&pt)?;
        let sa = self.sassoc_at(&pt).0;
        let sb = self.sbar_at(&pt).0;
        let ze = self.zeta_at(&pt).0;
        let g = self.ratios.gamma;
        Ok(-g * ze.abs() * (u1 + z * u1_d) + z * sa.abs() * (u2 - sb * sb))
    }

    /// Spike-forward map: where a spike of effective intensity `sigma` lands.
    pub fn xi(&self, sigma: f64) -> Result<f64> {
        let thresh = self.bulk.sigma_thresh;
        if !(sigma.is_finite() && sigma >= thresh) {
            return Err(domain("xi", sigma, format!("sigma >= sigma_thresh = {thresh}")));
        }
        let (g, beta) = (self.ratios.gamma, self.ratios.beta);
        let s2 = sigma * sigma;
        Ok(((1.0 + s2) * (g + s2) / ((1.0 - beta) * s2 - beta)).sqrt())
    }

    pub fn xi_inv(&self, theta: f64) -> Result<f64> {
        let edge = self.bulk.theta_max;
        if !(theta.is_finite() && theta >= edge) {
            return Err(domain("xi_inv", theta, format!("theta >= theta_max = {edge}")));
        }
        if theta == edge {
            return Ok(self.bulk.sigma_thresh);
        }
        Ok(1.0 / self.psi(theta * theta)?.sqrt())
    }

    /// Continuous part of the Wachter density on `[theta_min^2, theta_max^2]`.
    pub fn wachter_density(&self, lambda: f64) -> f64 {
        let lo = self.bulk.theta_min * self.bulk.theta_min;
        let hi = self.edge();
        if !(lambda > lo && lambda < hi) {
            return 0.0;
        }
        let (g, beta) = (self.ratios.gamma, self.ratios.beta);
        (1.0 - beta) * ((hi - lambda) * (lambda - lo)).sqrt() / (2.0 * PI * lambda * (g + beta * lambda))
    }

    /// Mass of the atom at zero, present only when `gamma > 1`.
    pub fn atom_mass(&self) -> f64 {
        (1.0 - 1.0 / self.ratios.gamma).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: impl Fn(f64) -> f64, z: f64) -> f64 {
        let h = 1e-6 * z;
        (f(z + h) - f(z - h)) / (2.0 * h)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// The closed forms exactly as printed, without rationalization.
    fn printed_sbar(g: f64, b: f64, z: f64) -> f64 {
        let lin = z * (1.0 - b) + (1.0 - g);
        let num = g * lin + 2.0 * b * z - g * (lin * lin - 4.0 * z).sqrt();
        1.0 / (g * z) - 1.0 / z - num / (2.0 * g * z * (g + b * z))
    }

    fn printed_zeta(g: f64, b: f64, z: f64) -> f64 {
        let r = (((1.0 - b) * z + (1.0 - g)).powi(2) - 4.0 * z).sqrt();
        -(z * (1.0 - b) - (1.0 - g) - r) / (2.0 * (g + b - g * b) * z)
    }

    fn printed_psi(g: f64, b: f64, z: f64) -> f64 {
        let r = ((z * (1.0 - b) + (1.0 - g)).powi(2) - 4.0 * z).sqrt();
        ((1.0 - b) * z - 1.0 - g - r) / (2.0 * (b * z + g))
    }

    fn printed_mp(b: f64, z: f64) -> f64 {
        (1.0 - b - z - ((z - 1.0 - b).powi(2) - 4.0 * b).sqrt()) / (2.0 * b * z)
    }

    #[test]
    fn marchenko_pastur_geometry() {
        let m = SpectralModel::new(1.0, 0.0).unwrap();
        assert_eq!(m.bulk.sigma_thresh, 1.0);
        assert_eq!(m.bulk.theta_max, 2.0);
        assert_eq!(m.bulk.theta_min, 0.0);
        for g in [0.1, 0.5, 2.0, 4.0] {
            let m = SpectralModel::new(g, 0.0).unwrap();
            assert!(rel(m.bulk.theta_max, 1.0 + g.sqrt()) < 1e-12);
            assert!((m.bulk.theta_min - (1.0 - g.sqrt())).abs() < 1e-12);
            assert!(rel(m.bulk.sigma_thresh, g.powf(0.25)) < 1e-12);
            let s: f64 = 1.7;
            let bbp = ((1.0 + s * s) * (g + s * s)).sqrt() / s;
            assert!(rel(m.xi(s).unwrap(), bbp) < 1e-12);
        }
    }

    #[test]
    fn threshold_maps_to_edge() {
        for (g, b) in [(0.5, 0.5), (2.0 / 3.0, 0.25), (3.0, 0.9), (0.1, 0.05)] {
            let m = SpectralModel::new(g, b).unwrap();
            assert!(rel(m.xi(m.bulk.sigma_thresh).unwrap(), m.bulk.theta_max) < 1e-10);
        }
        let m = SpectralModel::new(0.5, 0.5).unwrap();
        let expected = ((0.5f64 + (0.5f64 + 0.5 - 0.25).sqrt()) / 0.5).sqrt();
        assert!(rel(m.bulk.sigma_thresh, expected) < 1e-15);
    }

    #[test]
    fn rationalized_forms_match_printed() {
        for (g, b) in [(0.5, 0.5), (2.0 / 3.0, 0.25), (2.0, 0.1), (1.0, 0.3)] {
            let m = SpectralModel::new(g, b).unwrap();
            for k in 1..20 {
                let z = m.edge() * (1.0 + 0.3 * k as f64);
                assert!(rel(m.stieltjes(z).unwrap(), printed_sbar(g, b, z)) < 1e-9);
                assert!(rel(m.zeta(z).unwrap(), printed_zeta(g, b, z)) < 1e-9);
                assert!(rel(m.psi(z).unwrap(), printed_psi(g, b, z)) < 1e-9);
            }
        }
        assert!(rel(mp_stieltjes(0.25, 0.09).unwrap(), printed_mp(0.25, 0.09)) < 1e-12);
        assert!((mp_stieltjes(0.25, 0.09).unwrap() - 1.6027).abs() < 1e-4);
    }

    #[test]
    fn gamma_one_reductions() {
        let m = SpectralModel::new(1.0, 0.0).unwrap();
        assert!(rel(m.stieltjes_assoc(5.0).unwrap(), m.stieltjes(5.0).unwrap()) < 1e-14);
        assert!(rel(m.psi(4.5).unwrap(), 0.5) < 1e-14);
        let z = 1e8;
        assert!((z * m.stieltjes(z).unwrap() + 1.0).abs() < 1e-3);
        let sigma = 2f64.sqrt();
        assert!(rel(m.xi(sigma).unwrap(), 3.0 / sigma) < 1e-14);
        assert!(rel(m.xi_inv(3.0 / sigma).unwrap(), sigma) < 1e-12);
        assert!(rel(m.wachter_density(2.0), 1.0 / (2.0 * PI)) < 1e-14);
        // MP Stieltjes transform at z = 5 in closed form.
        let mp = (-5.0 + (25.0f64 - 20.0).sqrt()) / 10.0;
        assert!(rel(m.stieltjes(5.0).unwrap(), mp) < 1e-14);
    }

    #[test]
    fn continuity_across_gamma_one_and_beta_zero() {
        let z = 7.0;
        let lo = SpectralModel::new(1.0 - 1e-6, 0.2).unwrap();
        let hi = SpectralModel::new(1.0 + 1e-6, 0.2).unwrap();
        assert!(rel(lo.stieltjes(z).unwrap(), hi.stieltjes(z).unwrap()) < 1e-5);
        let zero = SpectralModel::new(1.0, 0.0).unwrap();
        let tiny = SpectralModel::new(1.0, 1e-6).unwrap();
        assert!(rel(tiny.zeta(5.0).unwrap(), zero.zeta(5.0).unwrap()) < 1e-4);
    }

    #[test]
    fn phi_and_e_assemble_from_components() {
        let m = SpectralModel::new(2.0 / 3.0, 0.25).unwrap();
        let g = m.gamma();
        for k in 1..30 {
            let z = m.edge() * (1.0 + 0.2 * k as f64);
            let sa = m.stieltjes_assoc(z).unwrap();
            let sb = m.stieltjes(z).unwrap();
            assert!(rel(m.phi(z).unwrap(), z * sa.abs() * sb * sb) < 1e-14);
            let e = -g * m.zeta(z).unwrap().abs() * (m.upsilon1(z).unwrap() + z * m.upsilon1_deriv(z).unwrap())
                + z * sa.abs() * (m.upsilon2(z).unwrap() - sb * sb);
            assert!((m.e_func(z).unwrap() - e).abs() <= 1e-12 * e.abs().max(1.0));
            assert!(rel(m.psi(z).unwrap(), z * sa * m.zeta(z).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for (g, b) in [(2.0 / 3.0, 0.25), (0.5, 0.5), (2.0, 0.1), (1.0, 0.9), (0.1, 0.05)] {
            let m = SpectralModel::new(g, b).unwrap();
            for k in 1..25 {
                let z = m.edge() * (1.0 + 0.02 * (k * k) as f64);
                let pairs: [(&dyn Fn(f64) -> f64, f64); 5] = [
                    (&|x| m.stieltjes(x).unwrap(), m.stieltjes_deriv(z).unwrap()),
                    (&|x| m.stieltjes_assoc(x).unwrap(), m.stieltjes_assoc_deriv(z).unwrap()),
                    (&|x| m.zeta(x).unwrap(), m.zeta_deriv(z).unwrap()),
                    (&|x| m.psi(x).unwrap(), m.psi_deriv(z).unwrap()),
                    (&|x| m.upsilon1(x).unwrap(), m.upsilon1_deriv(z).unwrap()),
                ];
                for (f, d) in pairs {
                    assert!(rel(central_diff(f, z), d) < 1e-6, "g={g} b={b} z={z}");
                }
            }
        }
        for b in [0.05, 0.25, 0.5, 0.9] {
            let edge = (1.0 - f64::sqrt(b)).powi(2);
            for k in 1..10 {
                let x = edge * k as f64 / 10.0;
                let fd = central_diff(|t| mp_stieltjes(b, t).unwrap(), x);
                assert!(rel(fd, mp_stieltjes_deriv(b, x).unwrap()) < 1e-6);
            }
        }
    }

    #[test]
    fn domain_guards() {
        let m = SpectralModel::new(2.0 / 3.0, 0.25).unwrap();
        let edge = m.edge();
        assert!(m.stieltjes(edge).is_err());
        assert!(m.psi(edge * 0.5).is_err());
        assert!(m.e_func(f64::NAN).is_err());
        assert!(m.xi(m.bulk.sigma_thresh * 0.99).is_err());
        assert!(m.xi_inv(m.bulk.theta_max * 0.99).is_err());
        assert_eq!(m.xi_inv(m.bulk.theta_max).unwrap(), m.bulk.sigma_thresh);
        assert!(mp_stieltjes(0.25, 0.25).is_err());
        assert!(mp_stieltjes(0.25, 0.0).is_err());
        assert!(AspectRatios::new(0.0, 0.1).is_err());
        assert!(AspectRatios::new(1.0, 1.0).is_err());
        assert!(matches!(m.zeta(1.0), Err(Error::Domain { function: "zeta", .. })));
    }

    #[test]
    fn positivity_scans() {
        let m = SpectralModel::new(2.0 / 3.0, 0.25).unwrap();
        for k in 0..100 {
            let z = m.edge() * (1.001 + 9.0 * k as f64 / 99.0);
            assert!(m.phi(z).unwrap() > 0.0);
            assert!(m.e_func(z).unwrap().is_finite());
            assert!(m.zeta(z).unwrap() < 0.0);
            assert!(m.stieltjes(z).unwrap() < 0.0);
        }
        let near = m.psi(m.edge() * (1.0 + 1e-6)).unwrap();
        assert!(rel(near, 1.0 / m.bulk.sigma_thresh.powi(2)) < 1e-2);
    }
}
