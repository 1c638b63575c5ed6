//! Monte-Carlo ensembles of either model with exact, order-independent
//! accumulators and an optional NDJSON observable stream.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::parabolic::{build_initial, propagate_with, PropagateOptions, Propagator, SimConfig, Trajectory, WaveField};
use crate::rng::{Purpose, SeedRecord};
use crate::stats::ExactSum;
use crate::synth::VolumeSynthesizer;
use crate::whitenoise::WnModel;

/// Realizations dispatched to the pool at a time; results are written and
/// folded in index order after each batch.
const BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Parabolic,
    Wn,
}

impl Model {
    pub fn tag(&self) -> &'static str {
        match self {
            Model::Parabolic => "parabolic",
            Model::Wn => "wn",
        }
    }

    pub fn purpose(&self) -> Purpose {
        match self {
            Model::Parabolic => Purpose::Medium,
            Model::Wn => Purpose::WhiteNoise,
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parabolic" => Ok(Model::Parabolic),
            "wn" => Ok(Model::Wn),
            other => Err(Error::config(format!("unknown model '{other}' (parabolic | wn)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct ObsAccum {
    re: ExactSum,
    im: ExactSum,
    re2: ExactSum,
    im2: ExactSum,
    reim: ExactSum,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Pair {
    sum: ExactSum,
    sq: ExactSum,
}

impl Pair {
    fn add(&mut self, x: f64) {
        self.sum.add(x);
        self.sq.add(x * x);
    }
    fn merge(&mut self, o: &Pair) {
        self.sum.merge(&o.sum);
        self.sq.merge(&o.sq);
    }
}

/// Moments of one observable `⟨Ψ_z, θ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsSummary {
    pub mean: Complex64,
    pub var_re: f64,
    pub var_im: f64,
    pub cov_re_im: f64,
    pub se_re: f64,
    pub se_im: f64,
}

/// Partial sums over a set of realizations. Merging is integer addition,
/// so any grouping of the same realizations gives identical bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub count: u64,
    pub checkpoints: Vec<f64>,
    pub n_theta: usize,
    pub grid_len: usize,
    obs: Vec<ObsAccum>,
    mean_field: Vec<[ExactSum; 2]>,
    axis_intensity: Vec<Pair>,
    width_sq: Vec<Pair>,
}

impl EnsembleStats {
    pub fn new(checkpoints: &[f64], n_theta: usize, grid_len: usize) -> Self {
        let nc = checkpoints.len();
        EnsembleStats {
            count: 0,
            checkpoints: checkpoints.to_vec(),
            n_theta,
            grid_len,
            obs: vec![ObsAccum::default(); nc * n_theta],
            mean_field: vec![[ExactSum::default(); 2]; nc * grid_len],
            axis_intensity: vec![Pair::default(); nc],
            width_sq: vec![Pair::default(); nc],
        }
    }

    /// Adds one realization; `traj` must carry fields at every checkpoint.
    pub fn push(&mut self, traj: &Trajectory) -> Result<()> {
        let nc = self.checkpoints.len();
        if traj.observations.len() != nc || traj.fields.len() != nc {
            return Err(Error::config("trajectory does not match the ensemble checkpoints"));
        }
        for (c, (obs, field)) in traj.observations.iter().zip(&traj.fields).enumerate() {
            if obs.values.len() != self.n_theta || field.values.len() != self.grid_len {
                return Err(Error::config("trajectory does not match the ensemble layout"));
            }
            for (t, v) in obs.values.iter().enumerate() {
                let a = &mut self.obs[c * self.n_theta + t];
                a.re.add(v.re);
                a.im.add(v.im);
                a.re2.add(v.re * v.re);
                a.im2.add(v.im * v.im);
                a.reim.add(v.re * v.im);
            }
            for (acc, v) in self.mean_field[c * self.grid_len..(c + 1) * self.grid_len]
                .iter_mut()
                .zip(&field.values)
            {
                acc[0].add(v.re);
                acc[1].add(v.im);
            }
            self.axis_intensity[c].add(obs.axis_intensity);
            self.width_sq[c].add(obs.width * obs.width);
        }
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &EnsembleStats) -> Result<()> {
        if self.checkpoints != other.checkpoints || self.n_theta != other.n_theta || self.grid_len != other.grid_len {
            return Err(Error::config("cannot merge statistics with different layouts"));
        }
        self.count += other.count;
        for (a, b) in self.obs.iter_mut().zip(&other.obs) {
            a.re.merge(&b.re);
            a.im.merge(&b.im);
            a.re2.merge(&b.re2);
            a.im2.merge(&b.im2);
            a.reim.merge(&b.reim);
        }
        for (a, b) in self.mean_field.iter_mut().zip(&other.mean_field) {
            a[0].merge(&b[0]);
            a[1].merge(&b[1]);
        }
        for (a, b) in self.axis_intensity.iter_mut().zip(&other.axis_intensity) {
            a.merge(b);
        }
        for (a, b) in self.width_sq.iter_mut().zip(&other.width_sq) {
            a.merge(b);
        }
        Ok(())
    }

    fn moments(&self, sum: f64, sq: f64) -> (f64, f64) {
        let n = self.count as f64;
        let mean = sum / n;
        let var = if self.count > 1 {
            ((sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        (mean, var)
    }

    pub fn observable(&self, checkpoint: usize, theta: usize) -> ObsSummary {
        let a = &self.obs[checkpoint * self.n_theta + theta];
        let n = self.count as f64;
        let (mr, vr) = self.moments(a.re.value(), a.re2.value());
        let (mi, vi) = self.moments(a.im.value(), a.im2.value());
        let cov = if self.count > 1 {
            (a.reim.value() - n * mr * mi) / (n - 1.0)
        } else {
            0.0
        };
        ObsSummary {
            mean: Complex64::new(mr, mi),
            var_re: vr,
            var_im: vi,
            cov_re_im: cov,
            se_re: (vr / n).sqrt(),
            se_im: (vi / n).sqrt(),
        }
    }

    pub fn mean_field(&self, checkpoint: usize) -> Vec<Complex64> {
        let n = self.count as f64;
        self.mean_field[checkpoint * self.grid_len..(checkpoint + 1) * self.grid_len]
            .iter()
            .map(|a| Complex64::new(a[0].value() / n, a[1].value() / n))
            .collect()
    }

    /// `E[I²]/E[I]² − 1` for the on-axis intensity.
    pub fn scintillation_index(&self, checkpoint: usize) -> f64 {
        let p = &self.axis_intensity[checkpoint];
        let n = self.count as f64;
        let m1 = p.sum.value() / n;
        let m2 = p.sq.value() / n;
        m2 / (m1 * m1) - 1.0
    }

    /// Mean of the beam second-moment width squared.
    pub fn mean_width_sq(&self, checkpoint: usize) -> f64 {
        self.moments(self.width_sq[checkpoint].sum.value(), self.width_sq[checkpoint].sq.value())
            .0
    }
}

/// Per-realization record of the NDJSON stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObsRecord {
    pub model: String,
    pub realization: u64,
    pub seed: u64,
    pub z: f64,
    pub theta: usize,
    pub re: f64,
    pub im: f64,
    pub norm: f64,
    pub width: f64,
    pub axis_intensity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StreamHeader {
    pub record: String,
    pub timestamp_unix: u64,
    pub model: String,
    pub seed: u64,
    pub realizations: u64,
    pub config_sha256: String,
}

impl StreamHeader {
    pub fn new(config: &RunConfig, model: Model, seed: u64, realizations: u64) -> Result<Self> {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(StreamHeader {
            record: "header".into(),
            timestamp_unix,
            model: model.tag().into(),
            seed,
            realizations,
            config_sha256: config.sha256()?,
        })
    }
}

/// Prepared solver state shared by every realization of one run.
#[allow(clippy::large_enum_variant)]
pub enum Engine {
    Parabolic {
        sim: SimConfig,
        synth: VolumeSynthesizer,
        prop: Propagator,
        f0: WaveField,
        thetas: Vec<Vec<Complex64>>,
    },
    Wn {
        model: WnModel,
        f0: WaveField,
        thetas: Vec<Vec<Complex64>>,
        checkpoints: Vec<f64>,
    },
}

impl Engine {
    pub fn new(config: &RunConfig, model: Model) -> Result<Self> {
        config.validate()?;
        let sim = SimConfig {
            checkpoints: config.checkpoints(),
            ..config.sim.clone()
        };
        let grid = sim.transverse();
        let thetas = sim.theta_values()?;
        let f0 = build_initial(&sim.initial, sim.gamma, &grid, sim.k_tilde)?;
        match model {
            Model::Parabolic => {
                if sim.grid.nz < sim.required_nz() {
                    return Err(Error::UnderResolved {
                        eps: sim.eps,
                        required: sim.required_nz(),
                        available: sim.grid.nz,
                    });
                }
                let synth = VolumeSynthesizer::new(&sim.spectrum, &sim.grid)?;
                let prop = Propagator::new(grid, sim.k_tilde)?;
                Ok(Engine::Parabolic {
                    sim,
                    synth,
                    prop,
                    f0,
                    thetas,
                })
            }
            Model::Wn => {
                let model = WnModel::new(config.wn_config()?)?;
                Ok(Engine::Wn {
                    model,
                    f0,
                    thetas,
                    checkpoints: sim.checkpoints,
                })
            }
        }
    }

    pub fn model(&self) -> Model {
        match self {
            Engine::Parabolic { .. } => Model::Parabolic,
            Engine::Wn { .. } => Model::Wn,
        }
    }

    pub fn checkpoints(&self) -> &[f64] {
        match self {
            Engine::Parabolic { sim, .. } => &sim.checkpoints,
            Engine::Wn { checkpoints, .. } => checkpoints,
        }
    }

    pub fn n_theta(&self) -> usize {
        match self {
            Engine::Parabolic { thetas, .. } | Engine::Wn { thetas, .. } => thetas.len(),
        }
    }

    pub fn grid_len(&self) -> usize {
        match self {
            Engine::Parabolic { f0, .. } | Engine::Wn { f0, .. } => f0.values.len(),
        }
    }

    pub fn realize(&self, seed: u64, realization: u64) -> Result<Trajectory> {
        let rec = SeedRecord::new(seed, realization, self.model().purpose());
        let out = match self {
            Engine::Parabolic {
                sim,
                synth,
                prop,
                f0,
                thetas,
            } => {
                let stack = synth.sample(rec);
                propagate_with(sim, &stack, prop, f0.clone(), thetas, PropagateOptions { keep_fields: true })
            }
            Engine::Wn {
                model,
                f0,
                thetas,
                checkpoints,
            } => model.propagate(f0, thetas, checkpoints, rec, true),
        };
        out.map_err(|e| Error::Worker {
            realization,
            seed,
            source: Box::new(e),
        })
    }
}

#[derive(Default)]
pub struct EnsembleOptions<'a> {
    /// Index of the first realization (independent ensembles from one seed
    /// use disjoint ranges).
    pub first: u64,
    pub ndjson: Option<&'a mut dyn Write>,
    /// Keep `⟨Ψ,θ⟩` per realization for distribution-level comparisons.
    pub keep_samples: bool,
    /// Compute realizations in a shuffled order (results are still folded
    /// by index); used to check schedule independence.
    pub scramble: Option<u64>,
}

pub struct EnsembleRun {
    pub stats: EnsembleStats,
    /// `samples[r][c * n_theta + t]`, when requested.
    pub samples: Vec<Vec<Complex64>>,
}

pub fn run_ensemble(config: &RunConfig, model: Model, m: usize, seed: u64, opts: EnsembleOptions) -> Result<EnsembleRun> {
    let engine = Engine::new(config, model)?;
    run_engine(&engine, m, seed, opts)
}

pub fn run_engine(engine: &Engine, m: usize, seed: u64, mut opts: EnsembleOptions) -> Result<EnsembleRun> {
    if m < 2 {
        return Err(Error::InsufficientEnsemble { have: m, need: 2 });
    }
    let mut stats = EnsembleStats::new(engine.checkpoints(), engine.n_theta(), engine.grid_len());
    let mut samples = Vec::new();
    let tag = engine.model().tag();
    let indices: Vec<u64> = (opts.first..opts.first + m as u64).collect();
    let batches: Vec<Vec<u64>> = match opts.scramble {
        Some(shuffle_seed) => {
            use rand::seq::SliceRandom;
            let mut order = indices.clone();
            order.shuffle(&mut SeedRecord::new(shuffle_seed, 0, Purpose::Test).rng());
            let mut results: Vec<(u64, Result<Trajectory>)> = order.into_par_iter().map(|r| (r, engine.realize(seed, r))).collect();
            results.sort_by_key(|(r, _)| *r);
            let mut done = 0;
            for (r, res) in results {
                fold(&mut stats, &mut samples, &mut opts, tag, seed, r, res?)?;
                done += 1;
            }
            log::debug!("{tag}: {done} / {m} realizations (scrambled)");
            Vec::new()
        }
        None => indices.chunks(BATCH).map(<[u64]>::to_vec).collect(),
    };
    for batch in batches {
        let results: Vec<Result<Trajectory>> = batch.par_iter().map(|&r| engine.realize(seed, r)).collect();
        for (&r, res) in batch.iter().zip(results) {
            fold(&mut stats, &mut samples, &mut opts, tag, seed, r, res?)?;
        }
        log::debug!("{tag}: {} / {m} realizations", batch.last().map_or(0, |l| l + 1 - opts.first));
    }
    Ok(EnsembleRun { stats, samples })
}

fn fold(
    stats: &mut EnsembleStats,
    samples: &mut Vec<Vec<Complex64>>,
    opts: &mut EnsembleOptions,
    tag: &str,
    seed: u64,
    r: u64,
    traj: Trajectory,
) -> Result<()> {
    if let Some(w) = opts.ndjson.as_deref_mut() {
        for obs in &traj.observations {
            for (t, v) in obs.values.iter().enumerate() {
                let rec = ObsRecord {
                    model: tag.into(),
                    realization: r,
                    seed,
                    z: obs.z,
                    theta: t,
                    re: v.re,
                    im: v.im,
                    norm: obs.norm,
                    width: obs.width,
                    axis_intensity: obs.axis_intensity,
                };
                serde_json::to_writer(&mut *w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
    }
    if opts.keep_samples {
        samples.push(traj.observations.iter().flat_map(|o| o.values.iter().copied()).collect());
    }
    stats.push(&traj)
}
