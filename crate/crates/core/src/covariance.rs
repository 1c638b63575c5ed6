//! Transverse covariance kernels of the limiting Brownian field.
//!
//! With `Φ` isotropic, `Γ(r) = π∫cos(x·p)Φ(0,p)dp = 2π² ∫ J0(rp) Φ(p) p dp`,
//! and the origin-pinned kernel is expressed through the structure function
//! `D(r) = 4π² ∫ (1 - J0(rp)) Φ(p) p dp`. The same radial functions serve
//! one- and two-dimensional transverse grids.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TransverseGrid;
use crate::quad::{self, Estimate, Tolerance};
use crate::spectra::SpectrumParams;

/// Largest grid (in points) for which a dense kernel matrix is assembled.
pub const MAX_DENSE_POINTS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// `eta > 0`, `rho < ∞`.
    Finite,
    /// `eta > 0`, `rho = ∞`.
    RhoInfinite,
    /// `eta = 0`, `rho = ∞`: only increments relative to the origin exist.
    OriginPinned,
}

pub const PINNED_CONSTRAINT: &str = "origin-pinned kernel is convergent only if H<1/2";

impl KernelMode {
    pub fn for_params(params: &SpectrumParams) -> Result<Self> {
        params.validate()?;
        match (params.eta > 0.0, params.rho.is_finite()) {
            (true, true) => Ok(KernelMode::Finite),
            (true, false) => Ok(KernelMode::RhoInfinite),
            (false, false) => {
                if params.h >= 0.5 {
                    Err(Error::Divergent {
                        quantity: "structure function",
                        reason: format!("{PINNED_CONSTRAINT} (got H = {})", params.h),
                    })
                } else {
                    Ok(KernelMode::OriginPinned)
                }
            }
            (false, true) => Err(Error::config(
                "eta = 0 with finite rho is not a supported kernel mode (use rho = inf for the origin-pinned kernel)",
            )),
        }
    }

    pub fn pinned(&self) -> bool {
        matches!(self, KernelMode::OriginPinned)
    }
}

fn tol() -> Tolerance {
    Tolerance {
        rel: 1e-9,
        abs: 1e-15,
        max_intervals: 4000,
    }
}

// Everything is integrated at unit amplitude and rescaled, so tolerances do
// not depend on the size of K.
fn unit(params: &SpectrumParams) -> SpectrumParams {
    SpectrumParams { amplitude: 1.0, ..*params }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::config(format!("radius {r} must be finite and >= 0")));
    }
    Ok(())
}

/// `∫_a^∞ f`, split at decades and at the spectral scales above `a`.
fn integrate_from<F: Fn(f64) -> f64>(f: F, a: f64, scales: &[f64], t: Tolerance) -> Result<Estimate> {
    let hi = scales.iter().copied().fold(a, f64::max).max(1.0) * 10.0;
    let mut points = vec![a];
    let mut p = a * 10.0;
    while p < hi {
        points.push(p);
        p *= 10.0;
    }
    points.extend(scales.iter().copied().filter(|s| *s > a));
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let head = quad::integrate_breaks(&f, &points, t)?;
    let tail = quad::integrate_tail(&f, hi, t)?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
    })
}

/// `∫_a^∞ J0(r p) g(p) dp` for `r > 0`: up to the next zero of `J0(r·)`,
/// then lobe by lobe.
fn hankel_tail<G: Fn(f64) -> f64>(g: G, r: f64, a: f64, scales: &[f64], t: Tolerance) -> Result<Estimate> {
    let mut k = 1;
    while quad::j0_zero(k) / r <= a {
        k += 1;
    }
    let next = quad::j0_zero(k) / r;
    let integrand = |p: f64| libm::j0(r * p) * g(p);
    let mut points = vec![a];
    points.extend(scales.iter().copied().filter(|s| *s > a && *s < next));
    points.push(next);
    points.sort_by(f64::total_cmp);
    let head = quad::integrate_breaks(integrand, &points, t)?;
    let tail = quad::sum_lobes(integrand, |j| quad::j0_zero(k + j) / r, t, 20_000)?;
    Ok(Estimate {
        value: head.value + tail.value,
        error: head.error + tail.error,
    })
}

/// Geometric breakpoints `b·10^-m, …, b/10` in front of `b` for integrands
/// with an integrable power singularity at 0.
fn singular_points(b: f64, scales: &[f64]) -> Vec<f64> {
    let mut points = vec![0.0];
    let mut p = b * 1e-8;
    while p < b {
        points.push(p);
        p *= 10.0;
    }
    points.extend(scales.iter().copied().filter(|s| *s < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// `Γ(r) = 2π² ∫ J0(rp) Φ(p) p dp`; `r = 0` gives `Γ₀ = π∫Φ(0,p)dp`.
pub fn gamma1_radial(params: &SpectrumParams, r: f64) -> Result<f64> {
    params.validate()?;
    check_radius(r)?;
    if params.eta == 0.0 {
        return Err(Error::Divergent {
            quantity: "transverse covariance",
            reason: "eta = 0: π∫Φ(0,p)dp diverges at p = 0; use the origin-pinned kernel (rho = inf, H < 1/2)".into(),
        });
    }
    if params.amplitude == 0.0 {
        return Ok(0.0);
    }
    let u = unit(params);
    let est = quad::hankel0(|p| p * u.radial(p), r, &u.scales(), tol())?;
    Ok(2.0 * PI * PI * params.amplitude * est.value)
}

/// `Γ₀ = Γ(0)`.
pub fn gamma0(params: &SpectrumParams) -> Result<f64> {
    gamma1_radial(params, 0.0)
}

fn require_structure(params: &SpectrumParams) -> Result<()> {
    params.validate()?;
    if params.eta == 0.0 && params.h >= 0.5 {
        return Err(Error::Divergent {
            quantity: "structure function",
            reason: format!("{PINNED_CONSTRAINT} (got H = {})", params.h),
        });
    }
    Ok(())
}

/// Structure function `D(r) = 4π² ∫ (1 - J0(rp)) Φ(p) p dp`, the variance of
/// the pinned field at distance `r` from the origin.
pub fn gamma_prime_structure(params: &SpectrumParams, r: f64) -> Result<f64> {
    require_structure(params)?;
    check_radius(r)?;
    if r == 0.0 || params.amplitude == 0.0 {
        return Ok(0.0);
    }
    let u = unit(params);
    let scales = u.scales();
    let first = quad::j0_zero(1) / r;
    let pts = singular_points(first, &scales);
    let head = quad::integrate_breaks(|p| quad::one_minus_j0(r * p) * p * u.radial(p), &pts, tol())?;
    let g = |p: f64| p * u.radial(p);
    let plain = integrate_from(g, first, &scales, tol())?;
    let osc = hankel_tail(g, r, first, &scales, tol())?;
    Ok(4.0 * PI * PI * params.amplitude * (head.value + plain.value - osc.value))
}

/// Pinned cross-covariance
/// `Γ'(x,y) = 2π² ∫ [1 - J0(|x|p) - J0(|y|p) + J0(|x-y|p)] Φ(p) p dp`,
/// integrated directly rather than through [`gamma_prime_structure`].
pub fn gamma_prime_cross(params: &SpectrumParams, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    require_structure(params)?;
    if x.iter().chain(&y).any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("kernel position"));
    }
    let rx = x[0].hypot(x[1]);
    let ry = y[0].hypot(y[1]);
    let rd = (x[0] - y[0]).hypot(x[1] - y[1]);
    if rx == 0.0 || ry == 0.0 || params.amplitude == 0.0 {
        return Ok(0.0);
    }
    let u = unit(params);
    let scales = u.scales();
    let first = quad::j0_zero(1) / rx.max(ry).max(rd);
    let pts = singular_points(first, &scales);
    let head = quad::integrate_breaks(
        |p| (quad::one_minus_j0(rx * p) + quad::one_minus_j0(ry * p) - quad::one_minus_j0(rd * p)) * p * u.radial(p),
        &pts,
        tol(),
    )?;
    let g = |p: f64| p * u.radial(p);
    let mut tail = integrate_from(g, first, &scales, tol())?.value;
    tail -= hankel_tail(g, rx, first, &scales, tol())?.value;
    tail -= hankel_tail(g, ry, first, &scales, tol())?.value;
    if rd > 0.0 {
        tail += hankel_tail(g, rd, first, &scales, tol())?.value;
    } else {
        tail += integrate_from(g, first, &scales, tol())?.value;
    }
    Ok(2.0 * PI * PI * params.amplitude * (head.value + tail))
}

/// Uniformly sampled radial function with 4-point Lagrange interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialTable {
    pub dr: f64,
    pub values: Vec<f64>,
}

impl RadialTable {
    pub fn r_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dr
    }

    pub fn interpolate(&self, r: f64) -> Option<f64> {
        let n = self.values.len();
        if !(r >= 0.0) || r > self.r_max() * (1.0 + 1e-12) || n < 4 {
            return None;
        }
        let s = r / self.dr;
        let i = (s.floor() as usize).min(n - 2);
        let start = i.saturating_sub(1).min(n - 4);
        let mut acc = 0.0;
        for j in 0..4 {
            let xj = (start + j) as f64;
            let mut w = 1.0;
            for m in 0..4 {
                if m != j {
                    let xm = (start + m) as f64;
                    w *= (s - xm) / (xj - xm);
                }
            }
            acc += w * self.values[start + j];
        }
        Some(acc)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Assemble (and PSD-check) the dense kernel matrix over the grid.
    pub matrix: bool,
    /// Measure distances on the torus. Not available for the pinned kernel.
    pub periodic: bool,
}

/// Tabulated kernel for one spectrum on one transverse grid.
///
/// The radial function is `Γ(r)` (finite modes) or `D(r)` (pinned). Values at
/// lattice distances `dx·√(a²+b²)` are stored exactly; other radii are
/// interpolated from the table.
#[derive(Clone, Debug)]
pub struct CovarianceKernel {
    pub params: SpectrumParams,
    pub mode: KernelMode,
    pub gamma0: Option<f64>,
    pub grid: TransverseGrid,
    pub periodic: bool,
    pub radial_table: RadialTable,
    lattice: HashMap<u64, f64>,
    pub grid_matrix: Option<DMatrix<f64>>,
}

impl CovarianceKernel {
    fn radial_exact(params: &SpectrumParams, mode: KernelMode, r: f64) -> Result<f64> {
        if mode.pinned() {
            gamma_prime_structure(params, r)
        } else {
            gamma1_radial(params, r)
        }
    }

    /// Radial function at an arbitrary radius (exact at lattice distances).
    pub fn radial(&self, r: f64) -> Result<f64> {
        let s = r / self.grid.dx;
        let key = (s * s).round();
        if (s * s - key).abs() < 1e-9 * key.max(1.0) {
            if let Some(v) = self.lattice.get(&(key as u64)) {
                return Ok(*v);
            }
        }
        match self.radial_table.interpolate(r) {
            Some(v) => Ok(v),
            None => Self::radial_exact(&self.params, self.mode, r),
        }
    }

    fn lattice_radial(&self, a: i64, b: i64) -> f64 {
        let key = (a * a + b * b) as u64;
        self.lattice[&key]
    }

    /// Integer offset between two flat indices, wrapped if periodic.
    fn offset(&self, i: usize, j: usize) -> (i64, i64) {
        let n = self.grid.n as i64;
        let wrap = |d: i64| {
            if self.periodic {
                let m = d.rem_euclid(n);
                if m > n / 2 {
                    m - n
                } else {
                    m
                }
            } else {
                d
            }
        };
        if self.grid.dim_t == 1 {
            (wrap(i as i64 - j as i64), 0)
        } else {
            let (ia, ib) = ((i / self.grid.n) as i64, (i % self.grid.n) as i64);
            let (ja, jb) = ((j / self.grid.n) as i64, (j % self.grid.n) as i64);
            (wrap(ia - ja), wrap(ib - jb))
        }
    }

    fn lattice_pos(&self, i: usize) -> (i64, i64) {
        let c = (self.grid.n / 2) as i64;
        if self.grid.dim_t == 1 {
            (i as i64 - c, 0)
        } else {
            ((i / self.grid.n) as i64 - c, (i % self.grid.n) as i64 - c)
        }
    }

    /// Kernel between grid points `i` and `j` (flat indices), from exact
    /// lattice values.
    pub fn grid_value(&self, i: usize, j: usize) -> f64 {
        if self.mode.pinned() {
            let (xa, xb) = self.lattice_pos(i);
            let (ya, yb) = self.lattice_pos(j);
            0.5 * (self.lattice_radial(xa, xb) + self.lattice_radial(ya, yb) - self.lattice_radial(xa - ya, xb - yb))
        } else {
            let (a, b) = self.offset(i, j);
            self.lattice_radial(a, b)
        }
    }

    /// Kernel between arbitrary positions.
    pub fn value(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        if self.mode.pinned() {
            let rx = x[0].hypot(x[1]);
            let ry = y[0].hypot(y[1]);
            let rd = (x[0] - y[0]).hypot(x[1] - y[1]);
            return Ok(0.5 * (self.radial(rx)? + self.radial(ry)? - self.radial(rd)?));
        }
        let d = if self.periodic {
            self.grid.periodic_delta(x, y)
        } else {
            [x[0] - y[0], x[1] - y[1]]
        };
        self.radial(d[0].hypot(d[1]))
    }

    /// Dense kernel matrix over the grid (row-major flat index order).
    pub fn assemble_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.grid.len();
        if n > MAX_DENSE_POINTS {
            return Err(Error::config(format!(
                "dense kernel over {n} points exceeds the limit of {MAX_DENSE_POINTS}"
            )));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| self.grid_value(i, j)))
    }

    /// CSV dump of the radial table: `r,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let label = if self.mode.pinned() { "structure" } else { "gamma" };
        writeln!(w, "r,{label}")?;
        for (k, v) in self.radial_table.values.iter().enumerate() {
            writeln!(w, "{},{}", k as f64 * self.radial_table.dr, v)?;
        }
        Ok(())
    }
}

/// Smallest eigenvalue check with tolerance `-1e-8·‖M‖₂`.
pub fn check_psd(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eig = SymmetricEigen::new(m.clone());
    let norm = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let tolerance = -1e-8 * norm;
    if min < tolerance {
        return Err(Error::NotPsd {
            eigenvalue: min,
            tolerance,
        });
    }
    Ok(eig)
}

/// Tabulates the kernel for `grid`. The table spacing is at most `dx/2` and
/// fine enough to resolve the smallest spectral length scale.
pub fn build_kernel_grid(params: &SpectrumParams, grid: &TransverseGrid, opts: KernelOptions) -> Result<CovarianceKernel> {
    grid.validate()?;
    let mode = KernelMode::for_params(params)?;
    if mode.pinned() && opts.periodic {
        return Err(Error::config(
            "the origin-pinned kernel is not translation invariant; periodic distances do not apply",
        ));
    }
    // table spacing: dx / (2m) keeps every 1-D lattice distance on a node
    let smallest = params.scales().iter().copied().fold(0.0f64, f64::max);
    let resolve = if smallest > 0.0 { 0.1 / smallest } else { f64::INFINITY };
    let m = ((grid.dx / 2.0) / resolve).ceil().max(1.0) as usize;
    let dr = grid.dx / (2 * m) as f64;
    let span = if opts.periodic { (grid.n / 2) as f64 } else { (grid.n - 1) as f64 };
    let r_max = span * grid.dx * (grid.dim_t as f64).sqrt();
    let count = (r_max / dr).ceil() as usize + 4;
    let values = (0..count)
        .map(|k| CovarianceKernel::radial_exact(params, mode, k as f64 * dr))
        .collect::<Result<Vec<f64>>>()?;
    let radial_table = RadialTable { dr, values };

    let reach = span as i64;
    let mut lattice = HashMap::new();
    let b_max = if grid.dim_t == 1 { 0 } else { reach };
    for a in 0..=reach {
        for b in 0..=b_max.min(a) {
            let key = (a * a + b * b) as u64;
            if let std::collections::hash_map::Entry::Vacant(e) = lattice.entry(key) {
                let v = if grid.dim_t == 1 {
                    radial_table.values[(a as usize) * 2 * m]
                } else {
                    CovarianceKernel::radial_exact(params, mode, (key as f64).sqrt() * grid.dx)?
                };
                e.insert(v);
            }
        }
    }

    let gamma0 = if mode.pinned() { None } else { Some(radial_table.values[0]) };
    if let Some(g0) = gamma0 {
        if let Some(bad) = radial_table.values.iter().find(|v| v.abs() > g0 * (1.0 + 1e-7)) {
            return Err(Error::Quadrature {
                what: "tabulated covariance exceeds its value at the origin".into(),
                estimate: *bad,
                error: g0,
            });
        }
    }
    let mut kernel = CovarianceKernel {
        params: *params,
        mode,
        gamma0,
        grid: *grid,
        periodic: opts.periodic,
        radial_table,
        lattice,
        grid_matrix: None,
    };
    if opts.matrix {
        let m = kernel.assemble_matrix()?;
        check_psd(&m)?;
        kernel.grid_matrix = Some(m);
    }
    Ok(kernel)
}
