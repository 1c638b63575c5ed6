//! Turbulence spectral densities in rescaled (Fresnel-length) units and the
//! radial integrals derived from them.
//!
//! All variants are isotropic, so every integral over wavevector space
//! reduces analytically to a one-dimensional radial integral:
//!
//! * total variance `∫Φ dκ = 4π ∫ κ² Φ(κ) dκ`
//! * Laplacian moment `∫|p|⁴ Φ dκ = (32π/15) ∫ κ⁶ Φ(κ) dκ`
//! * longitudinal correlation `R(t) = (4π/t) ∫ κ Φ(κ) sin(κt) dκ`

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Cutoff constant of the modified von Kármán spectrum, `K_m = 5.92 / ℓ₀`.
pub const VON_KARMAN_CUTOFF: f64 = 5.92;
/// Cutoff constant of the Hill bump spectrum, `K_m = 3.3 / ℓ₀`.
pub const HILL_CUTOFF: f64 = 3.3;
/// Physical prefactor `0.033` multiplying `Cn²`.
pub const CN2_PREFACTOR: f64 = 0.033;

pub(crate) fn quad_tol() -> Tolerance {
    Tolerance::new(1e-8, 1e-14)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumVariant {
    VonKarman,
    Hill,
    BoundedPowerLaw,
}

/// Spectral model with nondimensional inverse outer scale `eta` and inverse
/// inner scale `rho` (`f64::INFINITY` for no inner scale).
///
/// For the physical variants `eta` plays the role of `K₀` and the Gaussian
/// cutoff sits at `5.92·rho` (von Kármán) or `3.3·rho` (Hill).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub variant: SpectrumVariant,
    #[serde(rename = "H")]
    pub h: f64,
    pub eta: f64,
    #[serde(with = "inf_as_null")]
    pub rho: f64,
    pub amplitude: f64,
}

pub mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Density value plus whether the Hill bracket had to be clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Density {
    pub value: f64,
    pub clamped: bool,
}

impl SpectrumParams {
    pub fn new(variant: SpectrumVariant, h: f64, eta: f64, rho: f64, amplitude: f64) -> Result<Self> {
        let p = SpectrumParams {
            variant,
            h,
            eta,
            rho,
            amplitude,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn bounded_power_law(amplitude: f64, h: f64, eta: f64, rho: f64) -> Result<Self> {
        Self::new(SpectrumVariant::BoundedPowerLaw, h, eta, rho, amplitude)
    }

    pub fn von_karman(amplitude: f64, eta: f64, rho: f64) -> Result<Self> {
        Self::new(SpectrumVariant::VonKarman, 1.0 / 3.0, eta, rho, amplitude)
    }

    pub fn hill(amplitude: f64, eta: f64, rho: f64) -> Result<Self> {
        Self::new(SpectrumVariant::Hill, 1.0 / 3.0, eta, rho, amplitude)
    }

    /// Physical von Kármán / Hill model from `Cn²`, outer scale `L₀`, inner
    /// scale `ℓ₀` and Fresnel length `L_f` (all in the same length unit).
    /// Lengths are rescaled by `L_f`: `eta = 2π L_f / L₀`, `rho = L_f / ℓ₀`.
    /// The amplitude is `0.033 Cn²`; the remaining normalization is absorbed
    /// into the unit-variance convention of the rescaled medium.
    pub fn from_physical(variant: SpectrumVariant, cn2: f64, outer_scale: f64, inner_scale: f64, fresnel_length: f64) -> Result<Self> {
        if variant == SpectrumVariant::BoundedPowerLaw {
            return Err(Error::config("physical parameters apply to von Kármán and Hill spectra only"));
        }
        if !(outer_scale > 0.0 && inner_scale > 0.0 && fresnel_length > 0.0) {
            return Err(Error::config("scales must be positive"));
        }
        let eta = if outer_scale.is_infinite() {
            0.0
        } else {
            2.0 * PI * fresnel_length / outer_scale
        };
        let rho = fresnel_length / inner_scale;
        Self::new(variant, 1.0 / 3.0, eta, rho, CN2_PREFACTOR * cn2)
    }

    pub fn validate(&self) -> Result<()> {
        let SpectrumParams {
            h, eta, rho, amplitude, ..
        } = *self;
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::config(format!("H = {h} outside (0, 1)")));
        }
        if self.variant != SpectrumVariant::BoundedPowerLaw && (h - 1.0 / 3.0).abs() > 1e-12 {
            return Err(Error::config("von Kármán and Hill spectra have H = 1/3"));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::config(format!("eta = {eta} must be finite and >= 0")));
        }
        if !(rho > 0.0) || rho.is_nan() {
            return Err(Error::config(format!("rho = {rho} must be > 0")));
        }
        if rho.is_finite() && eta >= rho {
            return Err(Error::config(format!(
                "eta = {eta} must be below rho = {rho} (outer scale larger than inner scale)"
            )));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::config(format!("amplitude = {amplitude} must be finite and >= 0")));
        }
        Ok(())
    }

    /// Exponent of the power-law decay `Φ ~ |κ|^{-(2H+3)}`.
    pub fn decay_exponent(&self) -> f64 {
        2.0 * self.h + 3.0
    }

    /// Wavenumber scales where the density changes character, used to seed
    /// quadrature breakpoints.
    pub fn scales(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(2);
        if self.eta > 0.0 {
            s.push(self.eta);
        }
        if self.rho.is_finite() {
            let cut = match self.variant {
                SpectrumVariant::BoundedPowerLaw => self.rho,
                SpectrumVariant::VonKarman => VON_KARMAN_CUTOFF * self.rho,
                SpectrumVariant::Hill => HILL_CUTOFF * self.rho,
            };
            s.push(cut);
        }
        s
    }

    /// `Φ(|κ|)` with the clamping flag. `k` must be a finite modulus.
    #[inline]
    pub fn radial_checked(&self, k: f64) -> Density {
        let k2 = k * k;
        let base = (self.eta * self.eta + k2).powf(-self.h - 1.5);
        match self.variant {
            SpectrumVariant::BoundedPowerLaw => {
                let cutoff = if self.rho.is_finite() {
                    let q = 1.0 + k2 / (self.rho * self.rho);
                    1.0 / (q * q)
                } else {
                    1.0
                };
                Density {
                    value: self.amplitude * base * cutoff,
                    clamped: false,
                }
            }
            SpectrumVariant::VonKarman => {
                let cutoff = if self.rho.is_finite() {
                    let km = VON_KARMAN_CUTOFF * self.rho;
                    (-k2 / (km * km)).exp()
                } else {
                    1.0
                };
                Density {
                    value: self.amplitude * base * cutoff,
                    clamped: false,
                }
            }
            SpectrumVariant::Hill => {
                if self.rho.is_infinite() {
                    return Density {
                        value: self.amplitude * base,
                        clamped: false,
                    };
                }
                let km = HILL_CUTOFF * self.rho;
                let x = k / km;
                let bracket = 1.0 + 1.802 * x - 0.254 * x.powf(7.0 / 6.0);
                let clamped = bracket < 0.0;
                let value = if clamped {
                    0.0
                } else {
                    self.amplitude * bracket * base * (-x * x).exp()
                };
                Density { value, clamped }
            }
        }
    }

    #[inline]
    pub fn radial(&self, k: f64) -> f64 {
        self.radial_checked(k).value
    }

    /// `Φ(ξ, p)` at a 3-vector `(ξ, p₁, p₂)`.
    pub fn eval_spectrum(&self, kappa: [f64; 3]) -> Result<f64> {
        if kappa.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("wavevector"));
        }
        Ok(self.radial(norm3(kappa)))
    }

    /// Transverse slice `Φ(0, p)`.
    pub fn eval_transverse(&self, p: [f64; 2]) -> Result<f64> {
        self.eval_spectrum([0.0, p[0], p[1]])
    }

    /// Marginal of `Φ` over one wavevector component, as a function of the
    /// modulus `s` of the remaining two: `2 ∫_0^∞ Φ(√(s² + q²)) dq`.
    /// This is the spectrum of a planar section of the medium.
    pub fn line_marginal(&self, s: f64) -> Result<f64> {
        if s == 0.0 && self.eta == 0.0 {
            return Err(Error::Divergent {
                quantity: "planar marginal at the origin",
                reason: "eta = 0 gives an infrared singularity".into(),
            });
        }
        let s2 = s * s;
        let f = |q: f64| self.radial((s2 + q * q).sqrt());
        let a = (self.eta * self.eta + s2).sqrt();
        let mut scales = self.scales();
        scales.push(a);
        let est = quad::integrate_half_line(f, &scales, Tolerance::new(1e-10, 0.0))?;
        Ok(2.0 * est.value)
    }

    /// Total variance `∫Φ dκ`.
    pub fn total_variance(&self) -> Result<f64> {
        if self.eta == 0.0 {
            return Err(Error::Divergent {
                quantity: "variance",
                reason: "eta = 0 (infinite outer scale) makes ∫Φ diverge at small wavenumbers".into(),
            });
        }
        let est = quad::integrate_half_line(|k| k * k * self.radial(k), &self.scales(), quad_tol())?;
        Ok(4.0 * PI * est.value)
    }

    /// `∫ |p|⁴ Φ(ξ, p) dξ dp`, the variance of the transverse Laplacian of the
    /// medium; grows like `rho^{4-2H}`.
    pub fn laplacian_moment(&self) -> Result<f64> {
        if self.rho.is_infinite() {
            return Err(Error::Divergent {
                quantity: "Laplacian moment",
                reason: format!("rho = ∞: integrand ~ |κ|^(3-2H) = |κ|^{:.4} is not integrable", 3.0 - 2.0 * self.h),
            });
        }
        let est = quad::integrate_half_line(|k| k.powi(6) * self.radial(k), &self.scales(), quad_tol())?;
        Ok(32.0 * PI / 15.0 * est.value)
    }

    /// Longitudinal correlation `R(t) = ∫ e^{itξ} Φ(ξ, p) dξ dp` at zero
    /// transverse lag. `R(0)` is the total variance.
    pub fn longitudinal_corr(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::config(format!("lag t = {t} must be finite and >= 0")));
        }
        if self.eta == 0.0 {
            return Err(Error::Divergent {
                quantity: "longitudinal correlation",
                reason: "eta = 0 (infinite outer scale) breaks integrability of R(t)".into(),
            });
        }
        if t == 0.0 {
            return self.total_variance();
        }
        let est = quad::sine_transform(|k| k * self.radial(k), t, &self.scales(), quad_tol())?;
        Ok(4.0 * PI / t * est.value)
    }

    /// `∫_0^T R(t)/R(0) dt`, the integrated correlation coefficient. Its limit
    /// as `T → ∞` is finite exactly when the correlation is integrable.
    pub fn longitudinal_corr_integral(&self, t_max: f64) -> Result<f64> {
        let r0 = self.total_variance()?;
        let mut points = vec![0.0];
        let mut t = 1e-3 / self.rho.min(1e3).max(self.eta);
        while t < t_max {
            points.push(t);
            t *= 4.0;
        }
        points.push(t_max);
        let failure = std::cell::RefCell::new(None);
        let est = quad::integrate_breaks(
            |t| match self.longitudinal_corr(t) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            &points,
            Tolerance::new(1e-7, 1e-12 * r0),
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(est?.value / r0)
    }
}

#[inline]
pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bpl(k: f64, h: f64, eta: f64, rho: f64) -> SpectrumParams {
        SpectrumParams::bounded_power_law(k, h, eta, rho).unwrap()
    }

    #[test]
    fn bounded_power_law_values() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, f64::INFINITY);
        assert_relative_eq!(p.eval_spectrum([0.0; 3]).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.eval_spectrum([1.0, 0.0, 0.0]).unwrap(), 0.280_615_512_077_343_25, epsilon = 1e-14);
        assert_relative_eq!(p.eval_transverse([0.0, 0.0]).unwrap(), 1.0, epsilon = 1e-15);
        let q = bpl(1.0, 1.0 / 3.0, 0.0, f64::INFINITY);
        assert_relative_eq!(q.eval_transverse([0.0, 2.0]).unwrap(), 0.078_745_065_618_429_57, epsilon = 1e-14);
    }

    #[test]
    fn von_karman_at_origin() {
        let eta = 2.0 * PI / 100.0;
        let p = SpectrumParams::von_karman(0.033, eta, 50.0).unwrap();
        assert_relative_eq!(p.eval_spectrum([0.0; 3]).unwrap(), 0.033 * eta.powf(-11.0 / 3.0), epsilon = 1e-14);
    }

    #[test]
    fn physical_rescaling() {
        let p = SpectrumParams::from_physical(SpectrumVariant::VonKarman, 1e-14, 100.0, 0.005, 0.5).unwrap();
        assert_relative_eq!(p.eta, 2.0 * PI * 0.005, epsilon = 1e-15);
        assert_relative_eq!(p.rho, 100.0, epsilon = 1e-12);
        assert_relative_eq!(p.amplitude, 0.033e-14, epsilon = 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SpectrumParams::bounded_power_law(1.0, 1.0, 1.0, 10.0).is_err());
        assert!(SpectrumParams::bounded_power_law(1.0, 0.3, 2.0, 1.0).is_err());
        assert!(SpectrumParams::bounded_power_law(1.0, 0.3, -1.0, 10.0).is_err());
        assert!(SpectrumParams::new(SpectrumVariant::VonKarman, 0.4, 1.0, 10.0, 1.0).is_err());
        let p = bpl(1.0, 0.3, 1.0, 10.0);
        assert!(matches!(p.eval_spectrum([f64::NAN, 0.0, 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn hill_bracket_clamped_far_past_cutoff() {
        let p = SpectrumParams::hill(1.0, 1.0, 10.0).unwrap();
        let km = HILL_CUTOFF * 10.0;
        let d = p.radial_checked(2e5 * km);
        assert!(d.clamped);
        assert_eq!(d.value, 0.0);
        let near = p.radial_checked(km);
        assert!(!near.clamped && near.value > 0.0);
        // the bump lifts the density above the plain von Kármán shape
        let vk = SpectrumParams::von_karman(1.0, 1.0, 10.0 * HILL_CUTOFF / VON_KARMAN_CUTOFF).unwrap();
        assert!(p.radial(0.5 * km) > vk.radial(0.5 * km));
    }

    #[test]
    fn von_karman_inertial_log_slope() {
        let p = SpectrumParams::von_karman(1.0, 1e-3, 1e4).unwrap();
        for &k in &[1.0, 10.0, 100.0] {
            let h = 1e-4;
            let slope = (p.radial(k * (1.0 + h)).ln() - p.radial(k * (1.0 - h)).ln()) / ((1.0 + h).ln() - (1.0 - h).ln());
            assert!((slope + 11.0 / 3.0).abs() < 0.02, "k={k} slope={slope}");
        }
    }

    #[test]
    fn line_marginal_closed_form() {
        // ρ = ∞: 2∫(a² + q²)^{-H-3/2} dq = √π Γ(H+1)/Γ(H+3/2) a^{-2H-2}
        for &(h, eta) in &[(1.0 / 3.0, 1.0), (0.2, 0.5), (0.7, 2.0)] {
            let p = bpl(1.3, h, eta, f64::INFINITY);
            let c = PI.sqrt() * libm::tgamma(h + 1.0) / libm::tgamma(h + 1.5);
            for &s in &[0.0, 0.3, 1.0, 7.0] {
                let a2: f64 = eta * eta + s * s;
                let exact = 1.3 * c * a2.powf(-h - 1.0);
                assert_relative_eq!(p.line_marginal(s).unwrap(), exact, max_relative = 1e-9);
            }
        }
    }

    // Oracle: cylindrical nested quadrature ∫dξ ∫2πp dp w(ξ,p) Φ(√(ξ²+p²)).
    fn cylindrical<W: Fn(f64, f64) -> f64>(p: &SpectrumParams, w: W) -> f64 {
        let tol = Tolerance::new(1e-9, 0.0);
        let scales = p.scales();
        2.0 * quad::integrate_half_line(
            |xi| {
                quad::integrate_half_line(|q| 2.0 * PI * q * w(xi, q) * p.radial((xi * xi + q * q).sqrt()), &scales, tol)
                    .unwrap()
                    .value
            },
            &scales,
            tol,
        )
        .unwrap()
        .value
    }

    #[test]
    fn laplacian_moment_matches_cylindrical_oracle() {
        let a = bpl(1.0, 1.0 / 3.0, 1.0, 10.0);
        let b = bpl(1.0, 1.0 / 3.0, 1.0, 20.0);
        let oa = cylindrical(&a, |_, q| q.powi(4));
        let ob = cylindrical(&b, |_, q| q.powi(4));
        let ma = a.laplacian_moment().unwrap();
        let mb = b.laplacian_moment().unwrap();
        assert_relative_eq!(ma, oa, max_relative = 1e-6);
        assert_relative_eq!(mb, ob, max_relative = 1e-6);
        let ratio = mb / ma;
        let target = 2f64.powf(10.0 / 3.0);
        assert!((ratio / target - 1.0).abs() < 0.05, "ratio {ratio} vs {target}");
    }

    #[test]
    fn laplacian_moment_errors_and_linearity() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, f64::INFINITY);
        assert!(matches!(p.laplacian_moment(), Err(Error::Divergent { .. })));
        let one = bpl(1.0, 0.4, 1.0, 16.0).laplacian_moment().unwrap();
        let two = bpl(2.0, 0.4, 1.0, 16.0).laplacian_moment().unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn laplacian_moment_scaling_exponent() {
        for &h in &[1.0 / 3.0, 0.6] {
            let rhos = [8.0f64, 16.0, 32.0, 64.0];
            let pts: Vec<(f64, f64)> = rhos
                .iter()
                .map(|&r| (r.ln(), bpl(1.0, h, 1.0, r).laplacian_moment().unwrap().ln()))
                .collect();
            let slope = crate::stats::ols_slope(&pts);
            assert!((slope - (4.0 - 2.0 * h)).abs() < 0.1, "H={h}: slope {slope}");
        }
    }

    #[test]
    fn total_variance_matches_oracle() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 10.0);
        assert_relative_eq!(p.total_variance().unwrap(), cylindrical(&p, |_, _| 1.0), max_relative = 1e-7);
        let z = bpl(1.0, 1.0 / 3.0, 0.0, 10.0);
        assert!(matches!(z.total_variance(), Err(Error::Divergent { .. })));
        assert!(matches!(z.longitudinal_corr(1.0), Err(Error::Divergent { .. })));
    }

    #[test]
    fn longitudinal_corr_identities() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 10.0);
        let r0 = p.longitudinal_corr(0.0).unwrap();
        assert_eq!(r0, p.total_variance().unwrap());
        // cylindrical oracle for R(t): outer ξ integral truncated where Φ is negligible
        for &t in &[0.3, 2.0] {
            let tol = Tolerance {
                rel: 1e-10,
                abs: 0.0,
                max_intervals: 20_000,
            };
            let mut points: Vec<f64> = (0..).map(|k| k as f64 * PI / t).take_while(|x| *x < 2000.0).collect();
            points.push(2000.0);
            let oracle = 2.0
                * quad::integrate_breaks(
                    |xi| {
                        (t * xi).cos()
                            * quad::integrate_half_line(
                                |q| 2.0 * PI * q * p.radial((xi * xi + q * q).sqrt()),
                                &p.scales(),
                                Tolerance::new(1e-11, 0.0),
                            )
                            .unwrap()
                            .value
                    },
                    &points,
                    tol,
                )
                .unwrap()
                .value;
            assert_relative_eq!(p.longitudinal_corr(t).unwrap(), oracle, max_relative = 1e-6);
        }
        let far = p.longitudinal_corr(40.0).unwrap();
        assert!(far.abs() < 1e-10 * r0, "R(40) = {far}");
    }

    #[test]
    fn correlation_integral_equals_transverse_slice_ratio() {
        // ∫_0^∞ R(t) dt = π ∫ Φ(0, p) dp, evaluated here by an independent polar quadrature
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 10.0);
        let slice = quad::integrate_half_line(|q| 2.0 * PI * q * p.radial(q), &p.scales(), Tolerance::new(1e-10, 0.0))
            .unwrap()
            .value;
        let r0 = cylindrical(&p, |_, _| 1.0);
        let expected = PI * slice / r0;
        let got = p.longitudinal_corr_integral(60.0).unwrap();
        assert!((got - expected).abs() < 1e-4, "{got} vs {expected}");
    }

    fn params_strategy() -> impl Strategy<Value = SpectrumParams> {
        (0usize..3, 0.05f64..0.95, 0.0f64..2.0, 3.0f64..100.0, prop::bool::ANY, 0.1f64..5.0).prop_map(|(v, h, eta, rho, inf, amp)| {
            let variant = [SpectrumVariant::BoundedPowerLaw, SpectrumVariant::VonKarman, SpectrumVariant::Hill][v];
            let h = if variant == SpectrumVariant::BoundedPowerLaw {
                h
            } else {
                1.0 / 3.0
            };
            let rho = if inf { f64::INFINITY } else { rho };
            SpectrumParams::new(variant, h, eta, rho, amp).unwrap()
        })
    }

    fn rotate(v: [f64; 3], a: f64, b: f64, c: f64) -> [f64; 3] {
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        let v1 = [ca * v[0] - sa * v[1], sa * v[0] + ca * v[1], v[2]];
        let v2 = [cb * v1[0] + sb * v1[2], v1[1], -sb * v1[0] + cb * v1[2]];
        [v2[0], cc * v2[1] - sc * v2[2], sc * v2[1] + cc * v2[2]]
    }

    proptest! {
        #[test]
        fn density_nonnegative(p in params_strategy(), k in prop::array::uniform3(-1e4f64..1e4)) {
            let v = p.eval_spectrum(k).unwrap();
            prop_assert!(v >= 0.0);
        }

        #[test]
        fn density_isotropic(p in params_strategy(), k in prop::array::uniform3(-50f64..50.0),
                             a in 0.0f64..6.3, b in 0.0f64..6.3, c in 0.0f64..6.3) {
            prop_assume!(norm3(k) > 1e-3);
            let v0 = p.eval_spectrum(k).unwrap();
            let v1 = p.eval_spectrum(rotate(k, a, b, c)).unwrap();
            prop_assert!((v0 - v1).abs() <= 1e-12 * v0.abs().max(1e-300));
        }

        #[test]
        fn monotone_decay(p in params_strategy(), k in 0.0f64..500.0, dk in 1e-3f64..50.0) {
            prop_assume!(p.variant != SpectrumVariant::Hill);
            prop_assert!(p.radial(k + dk) <= p.radial(k));
        }

        #[test]
        fn transverse_is_xi_zero_slice(p in params_strategy(), q in prop::array::uniform2(-100f64..100.0)) {
            prop_assert_eq!(p.eval_transverse(q).unwrap(), p.eval_spectrum([0.0, q[0], q[1]]).unwrap());
        }
    }
}
