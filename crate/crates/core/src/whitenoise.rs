//! Limiting white-noise model `dΨ = (i/2k̃)ΔΨdz + ik̃Ψ∘dB` with a Brownian
//! field `B` whose increments have covariance `c·Γ(x,y)·dz`.
//!
//! Each step is `free(h/2)·exp(ik̃δB)·free(h/2)`. The screen is unitary, and
//! `E[exp(ik̃δB)] = exp(-c k̃²Γ₀h/2)`, so `c = 2` reproduces the damping
//! `exp(-k̃²Γ₀z)` of the mean field.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::{check_psd, CovarianceKernel, KernelMode};
use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::grid::TransverseGrid;
use crate::parabolic::{step_schedule, Observation, Propagator, Trajectory, WaveField, NORM_DRIFT_LIMIT};
use crate::rng::{complex_normal, SeedRecord};
use crate::stats;

/// Increment covariance is `WHITE_NOISE_CALIBRATION · Γ · dz`.
pub const WHITE_NOISE_CALIBRATION: f64 = 2.0;
/// Upper bound on `dz·k̃²·Γ₀` for the standard variant.
pub const MAX_STEP_DAMPING: f64 = 0.1;
/// Smallest ensemble accepted by the quadratic-variation probe.
pub const QV_MIN_REALIZATIONS: usize = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WnVariant {
    #[default]
    Standard,
    OriginPinned,
}

#[derive(Clone, Debug)]
pub struct WnConfig {
    pub k_tilde: f64,
    pub kernel: Arc<CovarianceKernel>,
    pub grid: TransverseGrid,
    pub dz: f64,
    pub z_final: f64,
    pub variant: WnVariant,
}

impl WnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel.grid != self.grid {
            return Err(Error::config("kernel was built for a different grid"));
        }
        for (v, name) in [(self.k_tilde, "k_tilde"), (self.dz, "dz"), (self.z_final, "z_final")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} = {v} must be positive")));
            }
        }
        match self.variant {
            WnVariant::Standard => {
                let g0 = self
                    .kernel
                    .gamma0
                    .ok_or_else(|| Error::config("the standard white-noise model needs a kernel with finite Γ₀ (eta > 0)"))?;
                let damping = self.dz * self.k_tilde * self.k_tilde * g0;
                if damping > MAX_STEP_DAMPING {
                    return Err(Error::config(format!(
                        "dz·k̃²·Γ₀ = {damping:.4} exceeds {MAX_STEP_DAMPING}; reduce dz below {:.3e}",
                        MAX_STEP_DAMPING / (self.k_tilde * self.k_tilde * g0)
                    )));
                }
            }
            WnVariant::OriginPinned => {
                if self.kernel.mode != KernelMode::OriginPinned {
                    return Err(Error::config("the origin-pinned variant needs an origin-pinned kernel"));
                }
            }
        }
        Ok(())
    }
}

/// Draws `δB` with covariance `c·Γ·dz` on the grid.
#[derive(Debug)]
pub enum IncrementSampler {
    /// Torus spectral synthesis with weights `w(p)` such that
    /// `Σ_p w(p) cos(p·r) = Γ(r)` on the lattice.
    Spectral { fft: FftNd, weights: Vec<f64> },
    /// `δB = L g` from the eigen-factorization of the pinned kernel with
    /// the origin removed; the origin value is exactly zero.
    Dense { factor: DMatrix<f64>, origin: usize },
}

impl IncrementSampler {
    pub fn new(kernel: &CovarianceKernel, variant: WnVariant) -> Result<Self> {
        let grid = kernel.grid;
        match variant {
            WnVariant::Standard => {
                if !kernel.periodic {
                    return Err(Error::config("the spectral sampler needs a periodic kernel"));
                }
                // Weights are the discrete spectrum of the lattice kernel
                // row, i.e. Φ(0,·) folded over all aliases of the grid, so
                // the sampled covariance equals Γ exactly at grid points.
                let fft = FftNd::new(&grid.shape());
                let mut row: Vec<Complex64> = (0..grid.len()).map(|j| Complex64::new(kernel.grid_value(0, j), 0.0)).collect();
                fft.forward(&mut row);
                let scale = grid.len() as f64;
                let total: f64 = row.iter().map(|v| v.re.abs()).sum::<f64>() / scale;
                let mut weights = Vec::with_capacity(row.len());
                for v in &row {
                    let w = v.re / scale;
                    if w < -1e-10 * total {
                        return Err(Error::NotPsd {
                            eigenvalue: w,
                            tolerance: -1e-10 * total,
                        });
                    }
                    weights.push(w.max(0.0));
                }
                Ok(IncrementSampler::Spectral { fft, weights })
            }
            WnVariant::OriginPinned => {
                let full = match &kernel.grid_matrix {
                    Some(m) => m.clone(),
                    None => kernel.assemble_matrix()?,
                };
                let origin = grid.origin_index();
                let reduced = full.remove_row(origin).remove_column(origin);
                let eig: SymmetricEigen<f64, nalgebra::Dyn> = check_psd(&reduced)?;
                let mut factor = eig.eigenvectors;
                for (j, lam) in eig.eigenvalues.iter().enumerate() {
                    let s = lam.max(0.0).sqrt();
                    factor.column_mut(j).scale_mut(s);
                }
                Ok(IncrementSampler::Dense { factor, origin })
            }
        }
    }

    /// On-diagonal value of the covariance actually realized (per unit
    /// `c·dz`); for the spectral sampler this is `Σ w(p)`.
    pub fn realized_gamma0(&self) -> Option<f64> {
        match self {
            IncrementSampler::Spectral { weights, .. } => Some(weights.iter().sum()),
            IncrementSampler::Dense { .. } => None,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, dz: f64) -> Vec<f64> {
        let c = WHITE_NOISE_CALIBRATION;
        match self {
            IncrementSampler::Spectral { fft, weights } => {
                let mut buf: Vec<Complex64> = weights.iter().map(|w| complex_normal(rng) * (2.0 * c * w * dz).sqrt()).collect();
                fft.inverse(&mut buf);
                buf.iter().map(|v| v.re).collect()
            }
            IncrementSampler::Dense { factor, origin } => {
                let g = DVector::from_fn(factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let v = factor * g * (c * dz).sqrt();
                let mut out = Vec::with_capacity(v.len() + 1);
                out.extend_from_slice(&v.as_slice()[..*origin]);
                out.push(0.0);
                out.extend_from_slice(&v.as_slice()[*origin..]);
                out
            }
        }
    }
}

/// One increment `δB` over `dz`.
pub fn wn_increment<R: Rng>(sampler: &IncrementSampler, dz: f64, rng: &mut R) -> Vec<f64> {
    sampler.sample(rng, dz)
}

/// Subtracts the value at the origin, removing any spatially constant part.
pub fn pin_to_origin(screen: &mut [f64], grid: &TransverseGrid) {
    let v0 = screen[grid.origin_index()];
    screen.iter_mut().for_each(|v| *v -= v0);
}

/// Everything needed to run realizations of one white-noise configuration.
#[derive(Debug)]
pub struct WnModel {
    pub config: WnConfig,
    pub sampler: IncrementSampler,
    pub propagator: Propagator,
}

impl WnModel {
    pub fn new(config: WnConfig) -> Result<Self> {
        config.validate()?;
        let sampler = IncrementSampler::new(&config.kernel, config.variant)?;
        let propagator = Propagator::new(config.grid, config.k_tilde)?;
        Ok(WnModel {
            config,
            sampler,
            propagator,
        })
    }

    pub fn propagate(
        &self,
        f0: &WaveField,
        thetas: &[Vec<Complex64>],
        checkpoints: &[f64],
        seed: SeedRecord,
        keep_fields: bool,
    ) -> Result<Trajectory> {
        crate::parabolic::check_checkpoints(checkpoints, self.config.z_final)?;
        let mut rng = seed.rng();
        let mut field = f0.clone();
        let n0 = field.norm_sq();
        let k = self.config.k_tilde;
        let mut traj = Trajectory::default();
        let mut pending = 0.0;
        for (step, (za, zb, cp)) in step_schedule(checkpoints, self.config.z_final, self.config.dz)
            .into_iter()
            .enumerate()
        {
            let h = zb - za;
            self.propagator.free_step(&mut field, pending + 0.5 * h);
            let db = self.sampler.sample(&mut rng, h);
            crate::parabolic::phase_step(&mut field, &db, k);
            pending = 0.5 * h;
            traj.steps += 1;
            let drift = (field.norm_sq() / n0 - 1.0).abs();
            traj.max_drift = traj.max_drift.max(drift);
            if !(drift <= NORM_DRIFT_LIMIT) {
                return Err(Error::NormDrift {
                    step,
                    z: zb,
                    drift,
                    limit: NORM_DRIFT_LIMIT,
                });
            }
            if cp.is_some() {
                self.propagator.free_step(&mut field, pending);
                pending = 0.0;
                field.z = zb;
                traj.observations.push(Observation::of(&field, thetas));
                if keep_fields {
                    traj.fields.push(field.clone());
                }
            }
        }
        Ok(traj)
    }
}

pub fn wn_propagate(
    config: &WnConfig,
    f0: &WaveField,
    thetas: &[Vec<Complex64>],
    checkpoints: &[f64],
    seed: SeedRecord,
) -> Result<Trajectory> {
    WnModel::new(config.clone())?.propagate(f0, thetas, checkpoints, seed, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QvReport {
    pub realizations: usize,
    /// Sample mean of `(ΔO - E ΔO)²` (non-conjugated).
    pub empirical: Complex64,
    /// `-c k̃² δ E[Σ u(x)u(y)Γ(x,y)]` with `u = Ψθ̄dx^d` at the start.
    pub predicted: Complex64,
    pub ratio: f64,
    pub se: f64,
    /// Same comparison for `|ΔO - E ΔO|²`.
    pub conjugated_ratio: f64,
    pub conjugated_se: f64,
}

/// Compares the empirical increment variance of `O = ⟨Ψ, θ⟩` over
/// `[za, za + delta]` with the quadratic-variation form. `fields_start`
/// holds `Ψ_za` for every realization, or a single field when `Ψ_za` is
/// deterministic.
pub fn quadratic_variation_probe(
    obs_start: &[Complex64],
    obs_end: &[Complex64],
    fields_start: &[WaveField],
    theta: &[Complex64],
    kernel: &CovarianceKernel,
    k_tilde: f64,
    delta: f64,
) -> Result<QvReport> {
    let m = obs_start.len();
    if m < QV_MIN_REALIZATIONS {
        return Err(Error::InsufficientEnsemble {
            have: m,
            need: QV_MIN_REALIZATIONS,
        });
    }
    if obs_end.len() != m || !(fields_start.len() == 1 || fields_start.len() == m) {
        return Err(Error::config("observation and field counts disagree"));
    }
    let gm = match &kernel.grid_matrix {
        Some(g) => g.clone(),
        None => kernel.assemble_matrix()?,
    };
    let c = WHITE_NOISE_CALIBRATION;
    let cell = kernel.grid.cell();
    let mut pred = Complex64::new(0.0, 0.0);
    let mut pred_conj = 0.0;
    for f in fields_start {
        let u: Vec<Complex64> = f.values.iter().zip(theta).map(|(p, t)| p * t.conj() * cell).collect();
        let ure = DVector::from_iterator(u.len(), u.iter().map(|v| v.re));
        let uim = DVector::from_iterator(u.len(), u.iter().map(|v| v.im));
        let (gr, gi) = (&gm * &ure, &gm * &uim);
        let rr = ure.dot(&gr);
        let ii = uim.dot(&gi);
        let ri = ure.dot(&gi);
        pred += Complex64::new(rr - ii, 2.0 * ri);
        pred_conj += rr + ii;
    }
    let scale = c * k_tilde * k_tilde * delta / fields_start.len() as f64;
    let predicted = -pred * scale;
    let predicted_conj = pred_conj * scale;
    let inc: Vec<Complex64> = obs_start.iter().zip(obs_end).map(|(a, b)| b - a).collect();
    let mean = inc.iter().sum::<Complex64>() / m as f64;
    let bessel = m as f64 / (m - 1) as f64;
    let sq: Vec<Complex64> = inc.iter().map(|d| (d - mean) * (d - mean) * bessel).collect();
    let empirical = sq.iter().sum::<Complex64>() / m as f64;
    let normed: Vec<f64> = sq.iter().map(|s| (s / predicted).re).collect();
    let normed_conj: Vec<f64> = inc.iter().map(|d| (d - mean).norm_sqr() * bessel / predicted_conj).collect();
    let r = stats::mean_se(&normed);
    let rc = stats::mean_se(&normed_conj);
    Ok(QvReport {
        realizations: m,
        empirical,
        predicted,
        ratio: r.mean,
        se: r.se,
        conjugated_ratio: rc.mean,
        conjugated_se: rc.se,
    })
}
