//! The ε→0 experiment: distance between the laws of `⟨Ψ_z,θ⟩` under the
//! parabolic model and under the white-noise model, per ε.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::ensemble::{run_engine, Engine, EnsembleOptions, Model};
use crate::parabolic::required_nz;
use crate::stats::{energy_distance, mean, variance};

/// Groups for the delete-a-group jackknife of `d`.
const JACKKNIFE_GROUPS: usize = 20;
/// Minimum medium depth per realization in units of the outer scale `1/η`.
const MIN_BOX_OUTER_SCALES: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub value: f64,
    pub se: f64,
    /// Moment part (means and standard deviations).
    pub moments: f64,
    /// Energy-distance part.
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsResult {
    pub eps: f64,
    pub nz: usize,
    pub dz_solver: f64,
    pub distance: Distance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub eps_list: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    pub results: Vec<EpsResult>,
    /// Distance between two independent white-noise ensembles.
    pub noise_floor: Distance,
    /// `d(ε)` strictly decreasing along `eps_list`.
    pub monotone: bool,
}

impl ConvergenceReport {
    pub fn distances(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.distance.value).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,nz,dz_solver,distance,se,moments,energy\n");
        for r in &self.results {
            let d = &r.distance;
            s += &format!(
                "{},{},{},{},{},{},{}\n",
                r.eps, r.nz, r.dz_solver, d.value, d.se, d.moments, d.energy
            );
        }
        let f = &self.noise_floor;
        s += &format!("floor,,,{},{},{},{}\n", f.value, f.se, f.moments, f.energy);
        s
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConvergeOptions {
    pub scramble: Option<u64>,
}

/// Per-observable scale `sqrt(Var re + Var im)` of a reference sample.
pub fn observable_scales(reference: &[Vec<Complex64>]) -> Vec<f64> {
    let k = reference.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| {
            let re: Vec<f64> = reference.iter().map(|r| r[j].re).collect();
            let im: Vec<f64> = reference.iter().map(|r| r[j].im).collect();
            let s = (variance(&re) + variance(&im)).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect()
}

fn components(a: &[Vec<Complex64>], b: &[Vec<Complex64>], scales: &[f64]) -> (f64, f64) {
    let mut mom = 0.0;
    let mut en = 0.0;
    for (j, s) in scales.iter().enumerate() {
        let col = |x: &[Vec<Complex64>], f: fn(&Complex64) -> f64| -> Vec<f64> { x.iter().map(|r| f(&r[j]) / s).collect() };
        for f in [|c: &Complex64| c.re, |c: &Complex64| c.im] {
            let (xa, xb) = (col(a, f), col(b, f));
            let dm = mean(&xa) - mean(&xb);
            let ds = variance(&xa).sqrt() - variance(&xb).sqrt();
            mom += dm * dm + ds * ds;
            en += energy_distance(&xa, &xb);
        }
    }
    let k = scales.len().max(1) as f64;
    (mom / k, en / k)
}

/// `d = mean over observables of (|Δmean|² + |Δstd|² + energy distance)`
/// on re and im parts, each observable scaled by `scales`; SE from a
/// delete-a-group jackknife pairing the groups of both samples.
pub fn law_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>], scales: &[f64]) -> Distance {
    let (moments, energy) = components(a, b, scales);
    let value = moments + energy;
    let g = JACKKNIFE_GROUPS.min(a.len()).min(b.len());
    let drop = |x: &[Vec<Complex64>], i: usize| -> Vec<Vec<Complex64>> {
        let (lo, hi) = (i * x.len() / g, (i + 1) * x.len() / g);
        x[..lo].iter().chain(&x[hi..]).cloned().collect()
    };
    let reps: Vec<f64> = (0..g)
        .map(|i| {
            let (m, e) = components(&drop(a, i), &drop(b, i), scales);
            m + e
        })
        .collect();
    let mr = mean(&reps);
    let gf = g as f64;
    let se = ((gf - 1.0) / gf * reps.iter().map(|r| (r - mr) * (r - mr)).sum::<f64>()).sqrt();
    Distance {
        value,
        se,
        moments,
        energy,
    }
}

/// Configuration used for one ε: the stack covers `z_final/ε²` and at
/// least `8/η` in the medium coordinate.
pub fn config_for_eps(base: &RunConfig, eps: f64) -> Result<RunConfig> {
    let mut c = base.clone();
    c.sim.eps = eps;
    let eta = base.sim.spectrum.eta;
    let dz = base.sim.grid.dz;
    let box_nz = if eta > 0.0 {
        (MIN_BOX_OUTER_SCALES / (eta * dz)).ceil() as usize
    } else {
        0
    };
    c.sim.grid.nz = required_nz(base.sim.z_final, eps, dz).max(box_nz);
    c.sim.dz_solver = base.sim.dz_solver.min(dz * eps * eps);
    c.validate()?;
    Ok(c)
}

pub fn converge_study(base: &RunConfig, eps_list: &[f64], m: usize, seed: u64) -> Result<ConvergenceReport> {
    converge_study_with(base, eps_list, m, seed, ConvergeOptions::default())
}

pub fn converge_study_with(base: &RunConfig, eps_list: &[f64], m: usize, seed: u64, opts: ConvergeOptions) -> Result<ConvergenceReport> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config("eps_list must be non-empty and strictly decreasing"));
    }
    let eps_min = *eps_list.last().unwrap();
    let need = required_nz(base.sim.z_final, eps_min, base.sim.grid.dz);
    if base.sim.grid.nz < need {
        return Err(Error::UnderResolved {
            eps: eps_min,
            required: need,
            available: base.sim.grid.nz,
        });
    }
    let run = |engine: &Engine, first: u64| {
        run_engine(
            engine,
            m,
            seed,
            EnsembleOptions {
                first,
                keep_samples: true,
                scramble: opts.scramble,
                ..Default::default()
            },
        )
        .map(|r| r.samples)
    };
    let wn_engine = Engine::new(base, Model::Wn)?;
    let reference = run(&wn_engine, 0)?;
    let second = run(&wn_engine, m as u64)?;
    let scales = observable_scales(&reference);
    let noise_floor = law_distance(&second, &reference, &scales);
    log::info!("noise floor d = {:.4e} ± {:.1e}", noise_floor.value, noise_floor.se);
    let mut results = Vec::new();
    for &eps in eps_list {
        let cfg = config_for_eps(base, eps)?;
        let engine = Engine::new(&cfg, Model::Parabolic)?;
        let samples = run(&engine, 0)?;
        let distance = law_distance(&samples, &reference, &scales);
        log::info!("eps = {eps}: d = {:.4e} ± {:.1e}", distance.value, distance.se);
        results.push(EpsResult {
            eps,
            nz: cfg.sim.grid.nz,
            dz_solver: cfg.sim.dz_solver,
            distance,
        });
    }
    let monotone = results.windows(2).all(|w| w[1].distance.value < w[0].distance.value);
    Ok(ConvergenceReport {
        eps_list: eps_list.to_vec(),
        realizations: m,
        seed,
        checkpoints: base.checkpoints(),
        results,
        noise_floor,
        monotone,
    })
}
