//! Periodic-box pseudospectral infrastructure shared by the propagator,
//! the nonlinear solver, and the scattering diagnostics.

mod fft;
pub mod io;
mod ops;

pub use fft::{fourier, inverse_fourier, resample_scaled};
pub use ops::{
    apply_d, apply_d_inverse, apply_m, dispersive_fit, leibniz_ratio, mdfm_inverse,
    mdfm_propagate, mdfm_sup_norm, phase_i_tau_pow, sobolev_norm, DispersiveFit, NonlinearTerm,
    SobolevSide, TermL, TermS,
};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Uniform symmetric grid on `[-L, L)^n` with `N` points per axis.
///
/// The dual grid has spacing `pi / L`, so `dx * dxi * N = 2 pi` and the
/// discrete transform is exactly unitary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Spatial dimension, 1..=3.
    pub n: u8,
    /// Points per axis; power of two, >= 16.
    pub npts: usize,
    /// Box half-width.
    pub l: f64,
}

impl Grid {
    pub fn new(n: u8, npts: usize, l: f64) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidConfig(format!("grid dimension {n}")));
        }
        if npts < 16 || !npts.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "grid size {npts} must be a power of two >= 16"
            )));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidConfig(format!("box half-width {l}")));
        }
        Ok(Grid { n, npts, l })
    }

    /// Total number of nodes, `N^n`.
    pub fn len(&self) -> usize {
        self.npts.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.npts as f64
    }

    pub fn dxi(&self) -> f64 {
        std::f64::consts::PI / self.l
    }

    /// Position node along one axis.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.npts as f64 / 2.0) * self.dx()
    }

    /// Frequency node along one axis.
    pub fn xi(&self, i: usize) -> f64 {
        (i as f64 - self.npts as f64 / 2.0) * self.dxi()
    }

    /// Decompose a flat row-major index into per-axis indices.
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.n as usize).rev() {
            out[a] = idx % self.npts;
            idx /= self.npts;
        }
        out
    }

    /// |x|^2 (or |xi|^2) at a flat index given the per-axis node function.
    fn radius_sq(&self, idx: usize, node: impl Fn(&Grid, usize) -> f64) -> f64 {
        let ix = self.unravel(idx);
        (0..self.n as usize)
            .map(|a| {
                let v = node(self, ix[a]);
                v * v
            })
            .sum()
    }

    pub fn x_radius_sq(&self, idx: usize) -> f64 {
        self.radius_sq(idx, Grid::x)
    }

    pub fn xi_radius_sq(&self, idx: usize) -> f64 {
        self.radius_sq(idx, Grid::xi)
    }
}

/// Which set of nodes a field's values live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Position,
    Frequency,
}

/// Complex field over grid nodes, tagged with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub space: Space,
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: Grid, space: Space) -> Self {
        Field {
            grid,
            space,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Build a position-space field from a function of the coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut coords = [0.0f64; 3];
        for idx in 0..grid.len() {
            let ix = grid.unravel(idx);
            for a in 0..grid.n as usize {
                coords[a] = grid.x(ix[a]);
            }
            values.push(f(&coords[..grid.n as usize]));
        }
        Field {
            grid,
            space: Space::Position,
            values,
        }
    }

    /// Reinterpret the stored values as living in the given space (the
    /// nodal layout of the two grids is shared; no transform is applied).
    pub fn retag(mut self, space: Space) -> Self {
        self.space = space;
        self
    }

    /// Measure weight of one node: dx^n or dxi^n.
    pub fn node_weight(&self) -> f64 {
        let d = match self.space {
            Space::Position => self.grid.dx(),
            Space::Frequency => self.grid.dxi(),
        };
        d.powi(self.grid.n as i32)
    }

    /// Continuum-normalized L2 norm.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.node_weight()).sqrt()
    }

    /// Max of |values| over nodes.
    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Squared-mass fraction at nodes selected by the predicate on the
    /// flat index.
    pub fn mass_fraction_where(&self, pred: impl Fn(usize) -> bool) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let sel: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| pred(*i))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        sel / total
    }

    pub fn assert_space(&self, s: Space) -> Result<()> {
        if self.space != s {
            return Err(Error::GridMismatch(format!(
                "expected {:?}-space field, got {:?}",
                s, self.space
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_node_layout() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.x(8), 0.0);
        assert_eq!(g.x(0), -4.0);
        assert!((g.dx() * g.dxi() * 16.0 - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(1, 12, 4.0).is_err());
        assert!(Grid::new(1, 8, 4.0).is_err());
        assert!(Grid::new(4, 16, 4.0).is_err());
        assert!(Grid::new(1, 16, -1.0).is_err());
    }

    #[test]
    fn unravel_roundtrip_2d() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let ix = g.unravel(5 * 16 + 3);
        assert_eq!(ix[0], 5);
        assert_eq!(ix[1], 3);
    }

    #[test]
    fn l2_norm_gaussian() {
        // pi^{-1/4} e^{-x^2/2} has unit L2 norm
        let g = Grid::new(1, 256, 20.0).unwrap();
        let f = Field::from_fn(g, |x| {
            Complex64::new(
                std::f64::consts::PI.powf(-0.25) * (-x[0] * x[0] / 2.0).exp(),
                0.0,
            )
        });
        assert!((f.l2_norm() - 1.0).abs() < 1e-12);
    }
}
