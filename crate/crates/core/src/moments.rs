//! Deterministic equations for the n-point functions
//! `F⁽ⁿ⁾(x₁..x_n) = E[Ψ(x₁)···Ψ(x_n)]` of the white-noise model:
//! `∂F = (i/2k̃)ΣΔ_{x_j}F − k̃²Σ_{j,k}Γ(x_j,x_k)F`.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceKernel;
use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::grid::TransverseGrid;
use crate::parabolic::{free_step, WaveField};

/// Largest product-space array `solve_npt` will allocate.
pub const MAX_MOMENT_POINTS: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentField {
    pub n: usize,
    /// Row-major over `(x₁, .., x_n)`, each factor in the grid's own order.
    pub values: Vec<Complex64>,
    pub grid: TransverseGrid,
    pub z: f64,
}

impl MomentField {
    pub fn new(n: usize, values: Vec<Complex64>, grid: TransverseGrid, z: f64) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::config(format!("moment order {n} not supported (1 or 2)")));
        }
        let len = product_len(&grid, n)?;
        if values.len() != len {
            return Err(Error::config(format!("moment field has {} values, expected {len}", values.len())));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("moment field"));
        }
        Ok(MomentField { n, values, grid, z })
    }

    /// `F⁽ⁿ⁾ = Ψ⊗..⊗Ψ` for a deterministic field.
    pub fn tensor(field: &WaveField, n: usize) -> Result<Self> {
        let values = match n {
            1 => field.values.clone(),
            2 => {
                let v = &field.values;
                let mut out = Vec::with_capacity(v.len() * v.len());
                for a in v {
                    out.extend(v.iter().map(|b| a * b));
                }
                out
            }
            _ => return Err(Error::config(format!("moment order {n} not supported (1 or 2)"))),
        };
        MomentField::new(n, values, field.grid, field.z)
    }

    pub fn norm(&self) -> f64 {
        let cell = self.grid.cell().powi(self.n as i32);
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt()
    }

    pub fn at(&self, idx: &[usize]) -> Complex64 {
        let m = self.grid.len();
        let flat = idx.iter().fold(0, |acc, &i| acc * m + i);
        self.values[flat]
    }

    /// CSV of `F` along a line in product space: `x₁` runs over the grid,
    /// the second factor (if any) is held at flat index `fixed`.
    pub fn write_slice_csv<W: Write>(&self, mut w: W, fixed: usize) -> Result<()> {
        writeln!(w, "x1,x2,re,im")?;
        let m = self.grid.len();
        for i in 0..m {
            let c = self.grid.coords(i);
            let (v, other) = if self.n == 1 {
                (self.values[i], [0.0, 0.0])
            } else {
                (self.values[i * m + fixed], self.grid.coords(fixed))
            };
            if self.grid.dim_t == 1 {
                writeln!(w, "{},{},{},{}", c[0], other[0], v.re, v.im)?;
            } else {
                writeln!(w, "\"{} {}\",\"{} {}\",{},{}", c[0], c[1], other[0], other[1], v.re, v.im)?;
            }
        }
        Ok(())
    }
}

fn product_len(grid: &TransverseGrid, n: usize) -> Result<usize> {
    let len = grid.len().checked_pow(n as u32).unwrap_or(usize::MAX);
    if len > MAX_MOMENT_POINTS {
        return Err(Error::config(format!(
            "order-{n} moment on {} points needs {len} values, above the limit of {MAX_MOMENT_POINTS}",
            grid.len()
        )));
    }
    Ok(len)
}

/// `E[Ψ_z] = e^{−k̃²Γ₀z}·free(z)F₀`.
pub fn mean_field_exact(f0: &WaveField, z: f64, k_tilde: f64, gamma0: f64) -> Result<WaveField> {
    let mut f = free_step(&WaveField { k_tilde, ..f0.clone() }, z)?;
    let damp = (-k_tilde * k_tilde * gamma0 * z).exp();
    f.values.iter_mut().for_each(|v| *v *= damp);
    Ok(f)
}

/// `C₂ = −k̃²Σ_{j,k}Γ(x_j,x_k)` over product space.
pub fn damping_array(kernel: &CovarianceKernel, n: usize, k_tilde: f64) -> Result<Vec<f64>> {
    let m = kernel.grid.len();
    let k2 = k_tilde * k_tilde;
    let c2: Vec<f64> = match n {
        1 => (0..m).map(|i| -k2 * kernel.grid_value(i, i)).collect(),
        2 => {
            let diag: Vec<f64> = (0..m).map(|i| kernel.grid_value(i, i)).collect();
            let mut out = Vec::with_capacity(m * m);
            for i in 0..m {
                for j in 0..m {
                    out.push(-k2 * (diag[i] + diag[j] + 2.0 * kernel.grid_value(i, j)));
                }
            }
            out
        }
        _ => return Err(Error::config(format!("moment order {n} not supported (1 or 2)"))),
    };
    let scale = c2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some((index, &value)) = c2.iter().enumerate().find(|(_, v)| **v > 1e-12 * scale) {
        return Err(Error::PositiveDamping { value, index });
    }
    Ok(c2.into_iter().map(|v| v.min(0.0)).collect())
}

/// Strang splitting of the n-point equation: exact Fourier free flow and
/// pointwise `exp(C₂h)`.
pub fn solve_npt(f0: &MomentField, kernel: &CovarianceKernel, k_tilde: f64, z: f64, dz: f64) -> Result<MomentField> {
    if kernel.grid != f0.grid {
        return Err(Error::config("kernel was built for a different grid"));
    }
    if !(z >= 0.0 && z.is_finite()) || !(dz > 0.0 && dz.is_finite()) {
        return Err(Error::config(format!("need z >= 0 and dz > 0 (got z = {z}, dz = {dz})")));
    }
    let n = f0.n;
    product_len(&f0.grid, n)?;
    let c2 = damping_array(kernel, n, k_tilde)?;
    let mut shape = Vec::new();
    for _ in 0..n {
        shape.extend(f0.grid.shape());
    }
    let fft = FftNd::new(&shape);
    let p2_factor = f0.grid.wavenumber_sq();
    let m = p2_factor.len();
    let p2: Vec<f64> = if n == 1 {
        p2_factor
    } else {
        (0..m * m).map(|i| p2_factor[i / m] + p2_factor[i % m]).collect()
    };
    let steps = (z / dz).ceil().max(if z > 0.0 { 1.0 } else { 0.0 }) as usize;
    let mut out = f0.clone();
    if steps == 0 {
        return Ok(out);
    }
    let h = z / steps as f64;
    let free_mult = |t: f64| -> Vec<Complex64> {
        let c = -t / (2.0 * k_tilde);
        p2.iter().map(|q| Complex64::from_polar(1.0, c * q)).collect()
    };
    let half = free_mult(0.5 * h);
    let full = free_mult(h);
    let damp: Vec<f64> = c2.iter().map(|c| (c * h).exp()).collect();
    let v = &mut out.values;
    let apply = |v: &mut Vec<Complex64>, mult: &[Complex64]| {
        fft.forward(v);
        v.iter_mut().zip(mult).for_each(|(a, b)| *a *= b);
        fft.inverse_normalized(v);
    };
    apply(v, &half);
    for s in 0..steps {
        v.iter_mut().zip(&damp).for_each(|(a, d)| *a *= d);
        apply(v, if s + 1 == steps { &half } else { &full });
    }
    if v.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::NonFinite("moment solve"));
    }
    out.z = f0.z + z;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{build_kernel_grid, KernelOptions};
    use crate::parabolic::{build_initial, InitialCondition};
    use crate::spectra::SpectrumParams;

    fn grid(n: usize, dx: f64) -> TransverseGrid {
        TransverseGrid::new(1, n, dx).unwrap()
    }

    fn standard_kernel(g: TransverseGrid, amp: f64) -> CovarianceKernel {
        let p = SpectrumParams::bounded_power_law(amp, 1.0 / 3.0, 1.0, 4.0).unwrap();
        build_kernel_grid(
            &p,
            &g,
            KernelOptions {
                matrix: false,
                periodic: true,
            },
        )
        .unwrap()
    }

    fn pinned_kernel(g: TransverseGrid, amp: f64) -> CovarianceKernel {
        let p = SpectrumParams::bounded_power_law(amp, 1.0 / 3.0, 0.0, f64::INFINITY).unwrap();
        build_kernel_grid(&p, &g, KernelOptions::default()).unwrap()
    }

    fn beam(g: TransverseGrid) -> WaveField {
        build_initial(&InitialCondition::default(), 1.0, &g, 1.0).unwrap()
    }

    #[test]
    fn mean_field_closed_form() {
        let g = grid(64, 0.25);
        let f0 = beam(g);
        let free = free_step(&f0, 0.7).unwrap();
        let same = mean_field_exact(&f0, 0.7, 1.0, 0.0).unwrap();
        assert_eq!(same.values, free.values);
        let g0 = 1.0 / 0.7;
        let damped = mean_field_exact(&f0, 0.7, 1.0, g0).unwrap();
        for (a, b) in damped.values.iter().zip(&free.values) {
            assert!((a - b * (-1.0f64).exp()).norm() < 1e-15);
        }
    }

    #[test]
    fn first_moment_matches_closed_form() {
        let g = grid(64, 0.25);
        let k = standard_kernel(g, 0.3);
        let f0 = beam(g);
        let out = solve_npt(&MomentField::tensor(&f0, 1).unwrap(), &k, 1.0, 1.3, 0.01).unwrap();
        let exact = mean_field_exact(&f0, 1.3, 1.0, k.gamma0.unwrap()).unwrap();
        for (a, b) in out.values.iter().zip(&exact.values) {
            assert!((a - b).norm() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn second_moment_zero_kernel_is_tensor_free_flow() {
        let g = grid(32, 0.4);
        let k = standard_kernel(g, 0.0);
        let f0 = beam(g);
        let out = solve_npt(&MomentField::tensor(&f0, 2).unwrap(), &k, 1.0, 0.8, 0.1).unwrap();
        let exact = MomentField::tensor(&free_step(&f0, 0.8).unwrap(), 2).unwrap();
        for (a, b) in out.values.iter().zip(&exact.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn contraction_semigroup_and_symmetry() {
        let g = grid(32, 0.4);
        let k = standard_kernel(g, 0.3);
        let f0 = MomentField::tensor(&beam(g), 2).unwrap();
        let mut prev = f0.norm();
        let mut f = f0.clone();
        for _ in 0..5 {
            f = solve_npt(&f, &k, 1.0, 0.2, 0.01).unwrap();
            let nrm = f.norm();
            assert!(nrm <= prev * (1.0 + 1e-12));
            prev = nrm;
        }
        let direct = solve_npt(&f0, &k, 1.0, 1.0, 0.01).unwrap();
        let err: f64 = f.values.iter().zip(&direct.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        let m = g.len();
        for i in 0..m {
            for j in 0..m {
                assert!((f.at(&[i, j]) - f.at(&[j, i])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn trotter_second_order() {
        let g = grid(32, 0.4);
        let k = standard_kernel(g, 0.5);
        let f0 = MomentField::tensor(&beam(g), 2).unwrap();
        let z = 1.0;
        let base = 0.1;
        let reference = solve_npt(&f0, &k, 1.0, z, base / 8.0).unwrap();
        let err = |dz: f64| {
            let f = solve_npt(&f0, &k, 1.0, z, dz).unwrap();
            f.values
                .iter()
                .zip(&reference.values)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let ratio = err(base) / err(base / 2.0);
        // error vs a dz/8 reference: (1 - 1/64) / (1/4 - 1/64) ≈ 4.2
        assert!(ratio > 3.5 && ratio < 5.0, "{ratio}");
    }

    #[test]
    fn pinned_envelope_at_short_range() {
        let g = grid(256, 0.25);
        let k = pinned_kernel(g, 0.5);
        let wide = build_initial(&InitialCondition::Gaussian { width: 4.0 }, 1.0, &g, 1.0).unwrap();
        let z = 0.01 * 1.0 * g.dx * g.dx;
        let out = solve_npt(&MomentField::tensor(&wide, 1).unwrap(), &k, 1.0, z, z / 4.0).unwrap();
        let o = g.origin_index();
        let mut last = 1.0;
        for i in o..o + 32 {
            let r = g.axis_coord(i).abs();
            let ratio = out.values[i].norm() / wide.values[i].norm();
            let expected = (-k.radial(r).unwrap() * z).exp();
            assert!((ratio - expected).abs() < 1e-6, "r={r}: {ratio} vs {expected}");
            assert!(ratio <= last + 1e-12);
            last = ratio;
        }
    }

    #[test]
    fn guards() {
        let g = grid(64, 0.25);
        let k = standard_kernel(g, 0.3);
        let f = MomentField::tensor(&beam(g), 1).unwrap();
        assert!(MomentField::tensor(&beam(g), 3).is_err());
        assert!(solve_npt(&f, &k, 1.0, 1.0, 0.0).is_err());
        let big = TransverseGrid::new(2, 64, 0.25).unwrap();
        let fb = build_initial(&InitialCondition::default(), 1.0, &big, 1.0).unwrap();
        assert!(MomentField::tensor(&fb, 2).is_err());
        let mut csv = Vec::new();
        f.write_slice_csv(&mut csv, 0).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 65);
    }
}
