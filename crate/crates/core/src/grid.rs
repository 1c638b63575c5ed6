use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SpectrumParams;

/// Uniform periodic grid in the plane transverse to propagation
/// (`dim_t` = 1 or 2 axes of `n` points each, centered on the origin).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransverseGrid {
    pub dim_t: usize,
    pub n: usize,
    pub dx: f64,
}

impl TransverseGrid {
    pub fn new(dim_t: usize, n: usize, dx: f64) -> Result<Self> {
        let g = TransverseGrid { dim_t, n, dx };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim_t == 1 || self.dim_t == 2) {
            return Err(Error::config(format!("dim_t = {} must be 1 or 2", self.dim_t)));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(Error::config(format!("n = {} must be a power of two >= 8", self.n)));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::config(format!("dx = {} must be positive", self.dx)));
        }
        Ok(())
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim_t as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim_t]
    }

    /// Area (or length) element `dx^dim_t`.
    pub fn cell(&self) -> f64 {
        self.dx.powi(self.dim_t as i32)
    }

    pub fn extent(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Coordinate along one axis of index `i`; index `n/2` is the origin.
    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.dx
    }

    /// Position of flat index `idx` (second component 0 in 1-D).
    #[inline]
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        if self.dim_t == 1 {
            [self.axis_coord(idx), 0.0]
        } else {
            [self.axis_coord(idx / self.n), self.axis_coord(idx % self.n)]
        }
    }

    pub fn origin_index(&self) -> usize {
        let c = self.n / 2;
        if self.dim_t == 1 {
            c
        } else {
            c * self.n + c
        }
    }

    /// Shortest displacement between two points on the torus.
    #[inline]
    pub fn periodic_delta(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let l = self.extent();
        let wrap = |d: f64| d - l * (d / l).round();
        [wrap(a[0] - b[0]), wrap(a[1] - b[1])]
    }

    /// Flags for points in the outer ring of width `n/16` (at least one cell).
    pub fn boundary_mask(&self) -> Vec<bool> {
        let w = (self.n / 16).max(1);
        let edge = |i: usize| i < w || i >= self.n - w;
        (0..self.len())
            .map(|idx| {
                if self.dim_t == 1 {
                    edge(idx)
                } else {
                    edge(idx / self.n) || edge(idx % self.n)
                }
            })
            .collect()
    }

    /// `|p|²` for every Fourier mode, in FFT storage order.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        let k = crate::fft::wavenumbers(self.n, self.dx);
        if self.dim_t == 1 {
            k.iter().map(|v| v * v).collect()
        } else {
            let mut out = Vec::with_capacity(self.len());
            for a in &k {
                for b in &k {
                    out.push(a * a + b * b);
                }
            }
            out
        }
    }
}

/// Transverse grid plus the longitudinal slab layout of a medium sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim_t: usize,
    pub n: usize,
    pub dx: f64,
    pub nz: usize,
    pub dz: f64,
}

/// Scale-resolution diagnostics; `ratio > 1` means the condition is violated
/// by that factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridWarning {
    /// Transverse extent shorter than `8/eta`.
    OuterScale { ratio: f64 },
    /// Spacing coarser than `π/rho`.
    InnerScale { ratio: f64 },
}

impl GridSpec {
    pub fn new(dim_t: usize, n: usize, dx: f64, nz: usize, dz: f64) -> Result<Self> {
        let g = GridSpec { dim_t, n, dx, nz, dz };
        g.validate()?;
        Ok(g)
    }

    pub fn transverse(&self) -> TransverseGrid {
        TransverseGrid {
            dim_t: self.dim_t,
            n: self.n,
            dx: self.dx,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.transverse().validate()?;
        if self.nz == 0 {
            return Err(Error::config("nz must be >= 1"));
        }
        if !(self.dz > 0.0 && self.dz.is_finite()) {
            return Err(Error::config(format!("dz = {} must be positive", self.dz)));
        }
        Ok(())
    }

    /// Longitudinal length covered by the slabs.
    pub fn depth(&self) -> f64 {
        self.nz as f64 * self.dz
    }

    pub fn with_nz(&self, nz: usize) -> Self {
        GridSpec { nz, ..*self }
    }

    pub fn resolution_warnings(&self, params: &SpectrumParams) -> Vec<GridWarning> {
        let mut w = Vec::new();
        if params.eta > 0.0 {
            let ratio = (8.0 / params.eta) / (self.n as f64 * self.dx);
            if ratio > 1.0 {
                w.push(GridWarning::OuterScale { ratio });
            }
        }
        if params.rho.is_finite() {
            let ratio = self.dx / (std::f64::consts::PI / params.rho);
            if ratio > 1.0 {
                w.push(GridWarning::InnerScale { ratio });
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(1, 12, 0.1, 4, 0.1).is_err());
        assert!(GridSpec::new(1, 4, 0.1, 4, 0.1).is_err());
        assert!(GridSpec::new(3, 16, 0.1, 4, 0.1).is_err());
        assert!(GridSpec::new(2, 16, 0.0, 4, 0.1).is_err());
        assert!(GridSpec::new(2, 16, 0.1, 0, 0.1).is_err());
        assert!(GridSpec::new(2, 16, 0.1, 4, 0.1).is_ok());
    }

    #[test]
    fn origin_and_coords() {
        let g = TransverseGrid::new(2, 8, 0.5).unwrap();
        assert_eq!(g.coords(g.origin_index()), [0.0, 0.0]);
        assert_eq!(g.coords(0), [-2.0, -2.0]);
        let d = g.periodic_delta([-2.0, 0.0], [1.5, 0.0]);
        assert!((d[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn resolution_warnings_carry_ratios() {
        let p = SpectrumParams::bounded_power_law(1.0, 1.0 / 3.0, 1.0, 8.0).unwrap();
        let g = GridSpec::new(1, 16, 1.0, 4, 0.1).unwrap();
        let w = g.resolution_warnings(&p);
        assert_eq!(w.len(), 1);
        match w[0] {
            GridWarning::InnerScale { ratio } => assert!((ratio - 8.0 / std::f64::consts::PI).abs() < 1e-12),
            _ => panic!("unexpected {w:?}"),
        }
        let coarse = GridSpec::new(1, 8, 0.25, 4, 0.1).unwrap();
        assert!(coarse
            .resolution_warnings(&p)
            .iter()
            .any(|w| matches!(w, GridWarning::OuterScale { ratio } if (*ratio - 4.0).abs() < 1e-12)));
    }
}
