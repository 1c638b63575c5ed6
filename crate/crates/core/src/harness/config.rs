//! Run configuration files: the parabolic `SimConfig` fields plus the
//! white-noise step settings, echoed back as canonical JSON with a hash.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance::{build_kernel_grid, KernelOptions};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::parabolic::{InitialCondition, SimConfig, ThetaSpec};
use crate::spectra::SpectrumParams;
use crate::whitenoise::{WnConfig, WnVariant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WnSettings {
    /// Step of the white-noise integrator (defaults to `dz_solver`).
    #[serde(default)]
    pub dz: Option<f64>,
    #[serde(default)]
    pub variant: WnVariant,
}

impl Default for WnSettings {
    fn default() -> Self {
        WnSettings {
            dz: None,
            variant: WnVariant::Standard,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    #[serde(default)]
    pub wn: WnSettings,
}

impl RunConfig {
    /// Desk-scale default: planar section, 512 points, `H = 1/3`, `η = 1`,
    /// `ρ = 8`, three checkpoints, centered and shifted Gaussian tests.
    pub fn desk() -> Self {
        let eps = 0.1;
        let dz_t = 0.25;
        let z_final = 1.0;
        let nz = crate::parabolic::required_nz(z_final, eps, dz_t);
        RunConfig {
            sim: SimConfig {
                k_tilde: 1.0,
                eps,
                gamma: 1.0,
                spectrum: SpectrumParams::bounded_power_law(DESK_AMPLITUDE, 1.0 / 3.0, 1.0, 8.0).expect("valid desk spectrum"),
                grid: GridSpec::new(1, 512, 0.08, nz, dz_t).expect("valid desk grid"),
                z_final,
                dz_solver: dz_t * eps * eps,
                initial: InitialCondition::Gaussian { width: 1.0 },
                checkpoints: vec![z_final / 3.0, 2.0 * z_final / 3.0, z_final],
                thetas: vec![ThetaSpec::gaussian([0.0, 0.0], 1.0), ThetaSpec::gaussian([1.0, 0.0], 1.0)],
                absorber: None,
            },
            wn: WnSettings {
                dz: Some(0.01),
                variant: WnVariant::Standard,
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if let Some(dz) = self.wn.dz {
            if !(dz > 0.0 && dz.is_finite()) {
                return Err(Error::config(format!("wn.dz = {dz} must be positive")));
            }
        }
        Ok(())
    }

    /// Checkpoints actually recorded: the configured list, or `z_final`.
    pub fn checkpoints(&self) -> Vec<f64> {
        if self.sim.checkpoints.is_empty() {
            vec![self.sim.z_final]
        } else {
            self.sim.checkpoints.clone()
        }
    }

    pub fn wn_dz(&self) -> f64 {
        self.wn.dz.unwrap_or(self.sim.dz_solver)
    }

    /// White-noise configuration sharing grid, spectrum and `k̃`.
    pub fn wn_config(&self) -> Result<WnConfig> {
        let grid = self.sim.transverse();
        let standard = self.wn.variant == WnVariant::Standard;
        let kernel = build_kernel_grid(
            &self.sim.spectrum,
            &grid,
            KernelOptions {
                matrix: !standard,
                periodic: standard,
            },
        )?;
        let cfg = WnConfig {
            k_tilde: self.sim.k_tilde,
            kernel: Arc::new(kernel),
            grid,
            dz: self.wn_dz(),
            z_final: self.sim.z_final,
            variant: self.wn.variant,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sorted-key JSON; identical configurations give identical text.
    pub fn canonical_json(&self) -> Result<String> {
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    pub fn sha256(&self) -> Result<String> {
        let digest = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Spectrum amplitude of the desk configuration (`Γ₀ ≈ 0.7`).
pub const DESK_AMPLITUDE: f64 = 0.07;
