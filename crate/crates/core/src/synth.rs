//! Gaussian random media by spectral synthesis on the periodic box.
//!
//! Each Fourier mode gets an independent circular complex normal `ζ_k`
//! scaled by `√(2Φ(k)Δk)`; the real part of the inverse transform then has
//! covariance `Σ_k Φ(k)Δk cos(k·r)`, the torus discretization of the target.
//! With one transverse axis the sample is the plane section `V(z, x₁, 0)`,
//! whose spectrum is the planar marginal of `Φ`.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fft::{wavenumbers, FftNd};
use crate::grid::{GridSpec, GridWarning};
use crate::rng::{complex_normal, SeedRecord};
use crate::spectra::SpectrumParams;
use crate::stats::{self, MeanSe};

const MAGIC: &[u8; 8] = b"BWSTACK1";

/// Planar marginal `Φ₂(s)` tabulated on `s = s₀(e^u - 1)` with uniform `u`,
/// interpolated in `ln Φ₂`.
#[derive(Clone, Debug)]
struct MarginalTable {
    s0: f64,
    du: f64,
    log_values: Vec<f64>,
    params: SpectrumParams,
    exact_only: bool,
}

impl MarginalTable {
    const NODES: usize = 2048;

    fn new(params: &SpectrumParams, s_max: f64) -> Result<Self> {
        let s0 = params.eta;
        let u_max = (s_max / s0).ln_1p() * (1.0 + 1e-9) + 1e-12;
        let du = u_max / (Self::NODES - 1) as f64;
        let mut log_values = Vec::with_capacity(Self::NODES);
        let mut exact_only = false;
        for j in 0..Self::NODES {
            let s = s0 * (j as f64 * du).exp_m1();
            let v = params.line_marginal(s)?;
            if v <= 0.0 {
                exact_only = true;
                break;
            }
            log_values.push(v.ln());
        }
        Ok(MarginalTable {
            s0,
            du,
            log_values,
            params: *params,
            exact_only,
        })
    }

    fn eval(&self, s: f64) -> Result<f64> {
        if self.exact_only {
            return self.params.line_marginal(s);
        }
        let n = self.log_values.len();
        let x = (s / self.s0).ln_1p() / self.du;
        if x > (n - 1) as f64 {
            return self.params.line_marginal(s);
        }
        let i = (x.floor() as usize).min(n - 2);
        let start = i.saturating_sub(1).min(n - 4);
        let mut acc = 0.0;
        for j in 0..4 {
            let xj = (start + j) as f64;
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    w *= (x - (start + m) as f64) / (xj - (start + m) as f64);
                }
            }
            acc += w * self.log_values[start + j];
        }
        Ok(acc.exp())
    }
}

/// Precomputed mode amplitudes for one `(spectrum, grid)` pair; draws any
/// number of independent volumes.
#[derive(Debug)]
pub struct VolumeSynthesizer {
    pub params: SpectrumParams,
    pub grid: GridSpec,
    fft: FftNd,
    /// Target density at each mode, FFT storage order.
    density: Vec<f64>,
    /// Modulus `|κ|` of each mode.
    modulus: Vec<f64>,
    cell: f64,
    /// Number of modes where the Hill bracket was clamped to zero.
    pub clamped: usize,
    pub warnings: Vec<GridWarning>,
}

impl VolumeSynthesizer {
    pub fn new(params: &SpectrumParams, grid: &GridSpec) -> Result<Self> {
        params.validate()?;
        grid.validate()?;
        if params.eta == 0.0 {
            return Err(Error::Divergent {
                quantity: "medium variance",
                reason: "eta = 0: a stationary medium with infinite outer scale has no finite variance".into(),
            });
        }
        if params.rho.is_finite() && grid.dx > 4.0 * std::f64::consts::PI / params.rho {
            return Err(Error::config(format!(
                "dx = {} leaves the inner scale unresolved (dx·rho/π = {:.3} > 4)",
                grid.dx,
                grid.dx * params.rho / std::f64::consts::PI
            )));
        }
        let xi = wavenumbers(grid.nz, grid.dz);
        let p = wavenumbers(grid.n, grid.dx);
        let dxi = 2.0 * std::f64::consts::PI / (grid.nz as f64 * grid.dz);
        let dp = 2.0 * std::f64::consts::PI / (grid.n as f64 * grid.dx);
        let mut density = Vec::new();
        let mut modulus = Vec::new();
        let mut clamped = 0;
        let cell;
        if grid.dim_t == 1 {
            cell = dxi * dp;
            let s_max = xi
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()))
                .hypot(p.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            let table = MarginalTable::new(params, s_max)?;
            for a in &xi {
                for b in &p {
                    let s = a.hypot(*b);
                    density.push(table.eval(s)?);
                    modulus.push(s);
                }
            }
        } else {
            cell = dxi * dp * dp;
            for a in &xi {
                for b in &p {
                    for c in &p {
                        let k = (a * a + b * b + c * c).sqrt();
                        let d = params.radial_checked(k);
                        clamped += d.clamped as usize;
                        density.push(d.value);
                        modulus.push(k);
                    }
                }
            }
        }
        let shape = if grid.dim_t == 1 {
            vec![grid.nz, grid.n]
        } else {
            vec![grid.nz, grid.n, grid.n]
        };
        Ok(VolumeSynthesizer {
            params: *params,
            grid: *grid,
            fft: FftNd::new(&shape),
            density,
            modulus,
            cell,
            clamped,
            warnings: grid.resolution_warnings(params),
        })
    }

    /// Exact pointwise variance of the synthesized field, `Σ_k Φ(k)Δk`.
    pub fn resolved_variance(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell
    }

    pub fn sample(&self, seed: SeedRecord) -> ScreenStack {
        let mut rng = seed.rng();
        let mut buf: Vec<Complex64> = self
            .density
            .iter()
            .map(|d| complex_normal(&mut rng) * (2.0 * d * self.cell).sqrt())
            .collect();
        self.fft.inverse(&mut buf);
        ScreenStack {
            grid: self.grid,
            slabs: buf.iter().map(|c| c.re).collect(),
            z0: 0.0,
            seed: Some(seed),
            params: Some(self.params),
        }
    }

    /// Periodogram divided by the target density, averaged over the given
    /// number of shells in `|κ|`, each shell holding at least `min_modes`
    /// modes. The expected ratio is 1 on every shell.
    pub fn periodogram_ratio(&self, stacks: &[ScreenStack], shells: usize, min_modes: usize) -> Result<Vec<BandRatio>> {
        if stacks.len() < 2 {
            return Err(Error::InsufficientEnsemble {
                have: stacks.len(),
                need: 2,
            });
        }
        let n_total = self.density.len() as f64;
        let k_min = self.modulus.iter().copied().filter(|k| *k > 0.0).fold(f64::INFINITY, f64::min);
        let k_max = self.modulus.iter().copied().fold(0.0f64, f64::max);
        let ratio = (k_max / k_min).powf(1.0 / shells as f64) * (1.0 + 1e-12);
        // assign modes to shells, merging thin shells upwards
        let raw: Vec<usize> = self
            .modulus
            .iter()
            .map(|k| {
                if *k == 0.0 {
                    usize::MAX
                } else {
                    ((k / k_min).ln() / ratio.ln()).floor() as usize
                }
            })
            .collect();
        let mut counts = vec![0usize; shells + 1];
        for &s in raw.iter().filter(|s| **s != usize::MAX) {
            counts[s.min(shells)] += 1;
        }
        let mut band_of_shell = vec![0usize; shells + 1];
        let mut bands: Vec<(f64, f64, usize)> = Vec::new();
        let mut acc = 0;
        let mut lo = 0;
        for s in 0..=shells {
            acc += counts[s];
            band_of_shell[s] = bands.len();
            if s == shells && acc < min_modes && !bands.is_empty() {
                // short tail joins the band below
                let last = bands.len() - 1;
                bands[last].1 = k_min * ratio.powi(s as i32 + 1);
                bands[last].2 += acc;
                band_of_shell[s] = last;
                for b in band_of_shell[lo..s].iter_mut() {
                    *b = last;
                }
            } else if acc >= min_modes || s == shells {
                bands.push((k_min * ratio.powi(lo as i32), k_min * ratio.powi(s as i32 + 1), acc));
                acc = 0;
                lo = s + 1;
            }
        }
        let mut rows = Vec::with_capacity(stacks.len());
        for st in stacks {
            self.check_grid(st)?;
            let mut buf: Vec<Complex64> = st.slabs.iter().map(|v| Complex64::new(*v, 0.0)).collect();
            self.fft.forward(&mut buf);
            let mut sums = vec![0.0; bands.len()];
            for (idx, c) in buf.iter().enumerate() {
                let s = raw[idx];
                if s == usize::MAX || self.density[idx] <= 0.0 {
                    continue;
                }
                let est = c.norm_sqr() / (n_total * n_total * self.cell);
                sums[band_of_shell[s.min(shells)]] += est / self.density[idx];
            }
            rows.push(sums);
        }
        Ok(bands
            .iter()
            .enumerate()
            .map(|(b, &(k_lo, k_hi, modes))| {
                let per: Vec<f64> = rows.iter().map(|r| r[b] / modes as f64).collect();
                let ms = stats::mean_se(&per);
                BandRatio {
                    k_lo,
                    k_hi,
                    modes,
                    ratio: ms.mean,
                    se: ms.se,
                }
            })
            .collect())
    }

    /// Covariance of the synthesized field at lag `(t, x₁, x₂)`:
    /// `Σ_k Φ(k)Δk cos(k·lag)`. Differs from the continuum covariance by the
    /// band truncation and the periodic images.
    pub fn torus_covariance(&self, lag: [f64; 3]) -> f64 {
        let xi = wavenumbers(self.grid.nz, self.grid.dz);
        let p = wavenumbers(self.grid.n, self.grid.dx);
        let n = self.grid.n;
        let mut s = 0.0;
        for (idx, d) in self.density.iter().enumerate() {
            let phase = if self.grid.dim_t == 1 {
                xi[idx / n] * lag[0] + p[idx % n] * lag[1]
            } else {
                xi[idx / (n * n)] * lag[0] + p[(idx / n) % n] * lag[1] + p[idx % n] * lag[2]
            };
            s += d * phase.cos();
        }
        s * self.cell
    }

    fn check_grid(&self, st: &ScreenStack) -> Result<()> {
        if st.grid != self.grid {
            return Err(Error::config("stack grid does not match the synthesizer grid"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRatio {
    pub k_lo: f64,
    pub k_hi: f64,
    pub modes: usize,
    pub ratio: f64,
    pub se: f64,
}

/// Real-valued medium slabs `V(z0 + (j + ½)dz, x)`, `j = 0..nz`, stored
/// slab-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenStack {
    pub grid: GridSpec,
    pub slabs: Vec<f64>,
    pub z0: f64,
    pub seed: Option<SeedRecord>,
    pub params: Option<SpectrumParams>,
}

#[derive(Serialize, Deserialize)]
struct StackHeader {
    grid: GridSpec,
    z0: f64,
    seed: Option<SeedRecord>,
    params: Option<SpectrumParams>,
    params_sha256: Option<String>,
}

impl ScreenStack {
    pub fn zeros(grid: GridSpec) -> Self {
        ScreenStack {
            grid,
            slabs: vec![0.0; grid.nz * grid.transverse().len()],
            z0: 0.0,
            seed: None,
            params: None,
        }
    }

    pub fn slab_len(&self) -> usize {
        self.grid.transverse().len()
    }

    pub fn slab(&self, j: usize) -> &[f64] {
        let m = self.slab_len();
        &self.slabs[j * m..(j + 1) * m]
    }

    /// Medium coordinate range `[z0, z0 + nz·dz)` covered by the slabs.
    pub fn extent(&self) -> (f64, f64) {
        (self.z0, self.z0 + self.grid.depth())
    }

    fn exhausted(&self, z: f64, t: f64) -> Error {
        let (start, end) = self.extent();
        Error::StackExhausted { z, t, start, end }
    }

    /// Adds `∫_{ta}^{tb} V(t, x) dt` (piecewise constant slabs) into `out`.
    pub fn accumulate_integral(&self, ta: f64, tb: f64, out: &mut [f64]) -> Result<()> {
        let (start, end) = self.extent();
        let slack = 1e-9 * self.grid.dz;
        if ta < start - slack || tb > end + slack || tb < ta {
            return Err(self.exhausted(tb, tb));
        }
        let dz = self.grid.dz;
        let first = (((ta - start) / dz).floor().max(0.0) as usize).min(self.grid.nz - 1);
        let mut j = first;
        while j < self.grid.nz {
            let lo = start + j as f64 * dz;
            let hi = lo + dz;
            if lo >= tb {
                break;
            }
            let w = hi.min(tb) - lo.max(ta);
            if w > 0.0 {
                for (o, v) in out.iter_mut().zip(self.slab(j)) {
                    *o += w * v;
                }
            }
            j += 1;
        }
        Ok(())
    }

    /// Binary form: magic, `u32` header length, JSON header, little-endian
    /// `f32` payload in slab-major order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = StackHeader {
            grid: self.grid,
            z0: self.z0,
            seed: self.seed,
            params: self.params,
            params_sha256: self.params.as_ref().map(params_hash),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        let mut payload = Vec::with_capacity(self.slabs.len() * 4);
        for v in &self.slabs {
            payload.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a screen stack file".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: StackHeader = serde_json::from_slice(&json)?;
        header.grid.validate()?;
        if let (Some(p), Some(h)) = (&header.params, &header.params_sha256) {
            if &params_hash(p) != h {
                return Err(Error::Format("parameter hash mismatch".into()));
            }
        }
        let count = header.grid.nz * header.grid.transverse().len();
        let mut bytes = vec![0u8; count * 4];
        r.read_exact(&mut bytes)?;
        let slabs = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(ScreenStack {
            grid: header.grid,
            slabs,
            z0: header.z0,
            seed: header.seed,
            params: header.params,
        })
    }
}

pub fn params_hash(p: &SpectrumParams) -> String {
    let json = serde_json::to_vec(p).expect("spectrum parameters serialize");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn synth_volume(params: &SpectrumParams, grid: &GridSpec, seed: SeedRecord) -> Result<ScreenStack> {
    Ok(VolumeSynthesizer::new(params, grid)?.sample(seed))
}

/// `V(z/ε², x)/ε` by nearest-slab lookup.
pub fn rescaled_slab(stack: &ScreenStack, z: f64, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config(format!("eps = {eps} outside (0, 1]")));
    }
    let t = z / (eps * eps);
    let (start, end) = stack.extent();
    if !(t >= start && t < end) {
        return Err(stack.exhausted(z, t));
    }
    let j = (((t - start) / stack.grid.dz).floor() as usize).min(stack.grid.nz - 1);
    Ok(stack.slab(j).iter().map(|v| v / eps).collect())
}

/// Empirical `E[V(t + τ, x) V(t, x)]` at lags `τ = lag·dz` (periodic in `t`),
/// mean and standard error over the stacks.
pub fn longitudinal_autocov(stacks: &[ScreenStack], lags: &[usize]) -> Vec<MeanSe> {
    lags.iter()
        .map(|&lag| {
            let per: Vec<f64> = stacks
                .iter()
                .map(|st| {
                    let nz = st.grid.nz;
                    let mut s = 0.0;
                    for j in 0..nz {
                        let a = st.slab(j);
                        let b = st.slab((j + lag) % nz);
                        s += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
                    }
                    s / st.slabs.len() as f64
                })
                .collect();
            stats::mean_se(&per)
        })
        .collect()
}

/// Empirical `E[V(t, x + δ) V(t, x)]` for the integer cell offset `δ`
/// (periodic), mean and standard error over the stacks.
pub fn transverse_autocov(stacks: &[ScreenStack], offset: [usize; 2]) -> MeanSe {
    let per: Vec<f64> = stacks
        .iter()
        .map(|st| {
            let g = st.grid.transverse();
            let n = g.n;
            let mut s = 0.0;
            for j in 0..st.grid.nz {
                let slab = st.slab(j);
                for idx in 0..g.len() {
                    let shifted = if g.dim_t == 1 {
                        (idx + offset[0]) % n
                    } else {
                        ((idx / n + offset[0]) % n) * n + (idx % n + offset[1]) % n
                    };
                    s += slab[idx] * slab[shifted];
                }
            }
            s / st.slabs.len() as f64
        })
        .collect();
    stats::mean_se(&per)
}

/// Fourth-to-squared-second moment ratio of the medium values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiGaussianReport {
    pub ratio: f64,
    pub se: f64,
    pub realizations: usize,
    /// False when fewer than 500 realizations were supplied.
    pub sufficient: bool,
}

pub const QUASI_GAUSSIAN_MIN: usize = 500;

pub fn quasi_gaussian_check(stacks: &[ScreenStack]) -> QuasiGaussianReport {
    let rows: Vec<Vec<f64>> = stacks
        .iter()
        .map(|st| {
            let n = st.slabs.len() as f64;
            let m2 = st.slabs.iter().map(|v| v * v).sum::<f64>() / n;
            let m4 = st.slabs.iter().map(|v| v.powi(4)).sum::<f64>() / n;
            vec![m2, m4]
        })
        .collect();
    let jk = stats::jackknife(&rows, |m| m[1] / (m[0] * m[0]));
    QuasiGaussianReport {
        ratio: jk.mean,
        se: if jk.se.is_finite() { jk.se } else { 0.0 },
        realizations: stacks.len(),
        sufficient: stacks.len() >= QUASI_GAUSSIAN_MIN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;
    use approx::assert_relative_eq;
    fn bpl(k: f64, h: f64, eta: f64, rho: f64) -> SpectrumParams {
        SpectrumParams::bounded_power_law(k, h, eta, rho).unwrap()
    }

    fn seed(r: u64) -> SeedRecord {
        SeedRecord::new(11, r, Purpose::Medium)
    }

    #[test]
    fn deterministic_per_seed() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 4.0);
        let g = GridSpec::new(1, 32, 0.25, 16, 0.5).unwrap();
        let a = synth_volume(&p, &g, seed(0)).unwrap();
        let b = synth_volume(&p, &g, seed(0)).unwrap();
        let c = synth_volume(&p, &g, seed(1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.slabs, c.slabs);
        assert!(a.slabs.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn marginal_table_accuracy() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 8.0);
        let t = MarginalTable::new(&p, 200.0).unwrap();
        for &s in &[0.0, 0.013, 0.7, 3.3, 17.0, 150.0] {
            assert_relative_eq!(t.eval(s).unwrap(), p.line_marginal(s).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn rejects_unresolved_and_infinite_variance() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 8.0);
        assert!(VolumeSynthesizer::new(&p, &GridSpec::new(1, 32, 2.0, 8, 0.5).unwrap()).is_err());
        let q = bpl(1.0, 1.0 / 3.0, 0.0, f64::INFINITY);
        assert!(VolumeSynthesizer::new(&q, &GridSpec::new(1, 32, 0.1, 8, 0.5).unwrap()).is_err());
    }

    #[test]
    fn rescaled_slab_lookup() {
        let g = GridSpec::new(1, 8, 1.0, 4, 0.5).unwrap();
        let mut st = ScreenStack::zeros(g);
        for (i, v) in st.slabs.iter_mut().enumerate() {
            *v = i as f64;
        }
        assert_eq!(rescaled_slab(&st, 0.75, 1.0).unwrap(), st.slab(1).to_vec());
        // eps = 1/2: z = 0.1875 maps to t = 0.75, amplitude doubled
        let half = rescaled_slab(&st, 0.1875, 0.5).unwrap();
        assert_eq!(half, st.slab(1).iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        let e = rescaled_slab(&st, 0.6, 0.5).unwrap_err();
        assert!(matches!(e, Error::StackExhausted { .. }));
    }

    #[test]
    fn slab_integral_overlaps() {
        let g = GridSpec::new(1, 8, 1.0, 4, 0.5).unwrap();
        let mut st = ScreenStack::zeros(g);
        for j in 0..4 {
            for v in &mut st.slabs[j * 8..(j + 1) * 8] {
                *v = (j + 1) as f64;
            }
        }
        let mut out = vec![0.0; 8];
        st.accumulate_integral(0.25, 1.25, &mut out).unwrap();
        // 0.25·1 + 0.5·2 + 0.25·3
        assert_relative_eq!(out[3], 2.0, epsilon = 1e-15);
        assert!(st.accumulate_integral(1.5, 2.5, &mut out).is_err());
    }

    #[test]
    fn binary_roundtrip() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 4.0);
        let g = GridSpec::new(1, 16, 0.25, 4, 0.5).unwrap();
        let st = synth_volume(&p, &g, seed(3)).unwrap();
        let mut buf = Vec::new();
        st.write_binary(&mut buf).unwrap();
        let back = ScreenStack::read_binary(&buf[..]).unwrap();
        assert_eq!(back.grid, st.grid);
        assert_eq!(back.seed, st.seed);
        for (a, b) in back.slabs.iter().zip(&st.slabs) {
            assert_eq!(*a, *b as f32 as f64);
        }
        buf[0] = b'X';
        assert!(ScreenStack::read_binary(&buf[..]).is_err());
    }

    #[test]
    fn pointwise_variance_matches_quadrature() {
        // large box and fine spacing so the torus variance is close to ∫Φ
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 2.0);
        let g = GridSpec::new(1, 64, 0.5, 64, 0.5).unwrap();
        let syn = VolumeSynthesizer::new(&p, &g).unwrap();
        let exact = p.total_variance().unwrap();
        assert_relative_eq!(syn.resolved_variance(), exact, max_relative = 0.01);
        let stacks: Vec<ScreenStack> = (0..200).map(|r| syn.sample(seed(r))).collect();
        let o = g.transverse().origin_index();
        let per: Vec<f64> = stacks.iter().map(|s| s.slab(7)[o].powi(2)).collect();
        let ms = stats::mean_se(&per);
        assert!((ms.mean - exact).abs() < 3.0 * ms.se, "{} vs {exact} (se {})", ms.mean, ms.se);
    }

    #[test]
    fn transverse_autocov_matches_quadrature_2d() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 2.0);
        let g = GridSpec::new(2, 16, 0.75, 16, 0.75).unwrap();
        let syn = VolumeSynthesizer::new(&p, &g).unwrap();
        let stacks: Vec<ScreenStack> = (0..200).map(|r| syn.sample(seed(r))).collect();
        // ∫cos(r·p)Φ dκ has the same radial form as R(t)
        let lag = 2usize;
        let r = lag as f64 * g.dx;
        let oracle = p.longitudinal_corr(r).unwrap();
        let torus = syn.torus_covariance([0.0, r, 0.0]);
        let bias = (torus - oracle).abs();
        assert!(bias < 0.05 * oracle, "torus {torus} vs {oracle}");
        let along = transverse_autocov(&stacks, [lag, 0]);
        let across = transverse_autocov(&stacks, [0, lag]);
        for est in [along, across] {
            assert!((est.mean - torus).abs() < 3.0 * est.se, "{est:?} vs torus {torus}");
            assert!((est.mean - oracle).abs() < 3.0 * est.se + bias, "{est:?} vs {oracle}");
        }
        assert!((along.mean - across.mean).abs() < 3.0 * along.se.hypot(across.se));
    }

    #[test]
    fn quasi_gaussian_ratio() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 4.0);
        let g = GridSpec::new(1, 16, 0.25, 8, 0.5).unwrap();
        let syn = VolumeSynthesizer::new(&p, &g).unwrap();
        let stacks: Vec<ScreenStack> = (0..500).map(|r| syn.sample(seed(r))).collect();
        let rep = quasi_gaussian_check(&stacks);
        assert!(rep.sufficient);
        assert!((rep.ratio - 3.0).abs() < 3.0 * rep.se, "{rep:?}");
        let mut flat = ScreenStack::zeros(g);
        flat.slabs.iter_mut().for_each(|v| *v = 2.5);
        let rep = quasi_gaussian_check(&[flat.clone(), flat]);
        assert_relative_eq!(rep.ratio, 1.0, epsilon = 1e-14);
        assert!(!rep.sufficient);
    }

    #[test]
    fn periodogram_bands_cover_every_mode() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 4.0);
        let g = GridSpec::new(1, 64, 0.25, 64, 0.25).unwrap();
        let syn = VolumeSynthesizer::new(&p, &g).unwrap();
        let stacks: Vec<ScreenStack> = (0..50).map(|r| syn.sample(seed(r))).collect();
        for (shells, min_modes) in [(8, 50), (6, 200), (12, 1)] {
            let bands = syn.periodogram_ratio(&stacks, shells, min_modes).unwrap();
            assert_eq!(bands.iter().map(|b| b.modes).sum::<usize>(), 64 * 64 - 1);
            for w in bands.windows(2) {
                assert_eq!(w[0].k_hi, w[1].k_lo);
            }
            for b in &bands {
                assert!(b.modes >= min_modes && b.ratio.is_finite(), "{b:?}");
                assert!((b.ratio - 1.0).abs() < 4.0 * b.se, "{b:?}");
            }
        }
        assert!(syn.periodogram_ratio(&stacks[..1], 8, 50).is_err());
    }

    #[test]
    fn shift_invariance() {
        let p = bpl(1.0, 1.0 / 3.0, 1.0, 4.0);
        let g = GridSpec::new(1, 32, 0.25, 8, 0.5).unwrap();
        let syn = VolumeSynthesizer::new(&p, &g).unwrap();
        let stacks: Vec<ScreenStack> = (0..300).map(|r| syn.sample(seed(r))).collect();
        let at = |i: usize| stats::mean_se(&stacks.iter().map(|s| s.slab(2)[i].powi(2)).collect::<Vec<_>>());
        let (a, b) = (at(3), at(20));
        assert!((a.mean - b.mean).abs() < 3.0 * a.se.hypot(b.se));
    }
}
