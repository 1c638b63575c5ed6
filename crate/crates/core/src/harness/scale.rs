//! Behaviour of the kernel across `(η, ρ)`: `Γ₀`, distance to the `ρ = ∞`
//! kernel, distance of `2(Γ₀ − Γ)` to the origin-pinned structure
//! function, and the mean-field attenuation `e^{−k̃²Γ₀z}` of the
//! white-noise model.

use serde::{Deserialize, Serialize};

use crate::covariance::{gamma0, gamma1_radial, gamma_prime_cross, gamma_prime_structure, KernelMode};
use crate::error::{Error, Result};
use crate::spectra::SpectrumParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLimitRequest {
    pub amplitude: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub etas: Vec<f64>,
    /// Finite inner-scale wavenumbers; `ρ = ∞` is always the reference.
    pub rhos: Vec<f64>,
    /// Radii at which kernels are compared.
    pub radii: Vec<f64>,
    /// Also compare against the `η = 0` origin-pinned kernel.
    #[serde(default)]
    pub pinned_reference: bool,
    #[serde(default = "one")]
    pub k_tilde: f64,
    #[serde(default = "one")]
    pub z: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ScaleLimitRequest {
    fn default() -> Self {
        ScaleLimitRequest {
            amplitude: 1.0,
            h: 1.0 / 3.0,
            etas: vec![1.0, 0.5, 0.25],
            rhos: vec![8.0, 16.0, 32.0, 64.0],
            radii: vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
            pinned_reference: true,
            k_tilde: 1.0,
            z: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub eta: f64,
    #[serde(with = "crate::spectra::inf_as_null")]
    pub rho: f64,
    pub gamma0: f64,
    /// `max_r |Γ(r; η, ρ) − Γ(r; η, ∞)|`.
    pub gap_rho_inf: f64,
    /// `max_r |2(Γ₀ − Γ(r)) − D(r)|` against the `η = 0` structure function
    /// at the same `ρ`, when requested.
    pub gap_pinned: Option<f64>,
    /// `e^{−k̃²Γ₀z}`.
    pub mean_field_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLimitReport {
    pub request: ScaleLimitRequest,
    pub rows: Vec<ScaleRow>,
    /// Largest relative residual of `Γ̄′(x,y) = ½[D(x) + D(y) − D(x−y)]`
    /// on a few point pairs, when the pinned reference is requested.
    pub pinned_identity_residual: Option<f64>,
}

impl ScaleLimitReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eta,rho,gamma0,gap_rho_inf,gap_pinned,mean_field_factor\n");
        for r in &self.rows {
            let gp = r.gap_pinned.map(|v| v.to_string()).unwrap_or_default();
            s += &format!(
                "{},{},{},{},{},{}\n",
                r.eta, r.rho, r.gamma0, r.gap_rho_inf, gp, r.mean_field_factor
            );
        }
        s
    }
}

/// Pairs used for the polarization check.
const IDENTITY_PAIRS: [([f64; 2], [f64; 2]); 3] = [([0.3, 0.0], [0.0, 0.4]), ([1.0, 0.5], [-0.7, 0.2]), ([0.1, 0.1], [2.0, -1.0])];

pub fn pinned_identity_residual(params: &SpectrumParams) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, y) in IDENTITY_PAIRS {
        let d = |v: [f64; 2]| gamma_prime_structure(params, v[0].hypot(v[1]));
        let poly = 0.5 * (d(x)? + d(y)? - d([x[0] - y[0], x[1] - y[1]])?);
        let direct = gamma_prime_cross(params, x, y)?;
        worst = worst.max((direct - poly).abs() / poly.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

pub fn scale_limit_study(req: &ScaleLimitRequest) -> Result<ScaleLimitReport> {
    if req.etas.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::config("etas must be positive; the eta -> 0 limit is the pinned reference"));
    }
    if req.radii.is_empty() {
        return Err(Error::config("at least one radius is needed"));
    }
    let mut rhos = req.rhos.clone();
    rhos.push(f64::INFINITY);
    let pinned = |rho: f64| SpectrumParams::bounded_power_law(req.amplitude, req.h, 0.0, rho);
    let residual = if req.pinned_reference {
        let limit = pinned(f64::INFINITY)?;
        KernelMode::for_params(&limit)?;
        Some(pinned_identity_residual(&limit)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for &eta in &req.etas {
        let reference = SpectrumParams::bounded_power_law(req.amplitude, req.h, eta, f64::INFINITY)?;
        let ref_vals: Vec<f64> = req.radii.iter().map(|&r| gamma1_radial(&reference, r)).collect::<Result<_>>()?;
        for &rho in &rhos {
            let p = SpectrumParams::bounded_power_law(req.amplitude, req.h, eta, rho)?;
            let g0 = gamma0(&p)?;
            let vals: Vec<f64> = req.radii.iter().map(|&r| gamma1_radial(&p, r)).collect::<Result<_>>()?;
            let gap_rho_inf = vals.iter().zip(&ref_vals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let gap_pinned = if req.pinned_reference {
                let pp = pinned(rho)?;
                let mut gap = 0.0f64;
                for (&r, v) in req.radii.iter().zip(&vals) {
                    gap = gap.max((2.0 * (g0 - v) - gamma_prime_structure(&pp, r)?).abs());
                }
                Some(gap)
            } else {
                None
            };
            rows.push(ScaleRow {
                eta,
                rho,
                gamma0: g0,
                gap_rho_inf,
                gap_pinned,
                mean_field_factor: (-req.k_tilde * req.k_tilde * g0 * req.z).exp(),
            });
        }
    }
    Ok(ScaleLimitReport {
        request: req.clone(),
        rows,
        pinned_identity_residual: residual,
    })
}
