//! Independent oracles: a finite-difference solver on a uniform grid,
//! closed-form steady 1-D profiles and discrete error norms.

mod analytic;
mod fd;
mod norms;

pub use analytic::{analytic_fgm_steady, analytic_slab_steady, FgmProfile, Profile, SlabProfile};
pub use fd::{fd_solve_steady, fd_solve_transient, fd_solve_transient_with, FdOptions, FdStats};
pub use norms::{error_norms, error_norms_sampled, interface_flux_jump, sample_solution, ErrorReport, Reference};

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("reference grid has {got} intervals per axis, at least {required} needed")]
    Resolution { required: usize, got: usize },
    #[error("invalid reference input: {0}")]
    Invalid(String),
    #[error("reference solve failed: {0}")]
    Solve(String),
    #[error("not supported by the reference solver: {0}")]
    Unsupported(String),
}

/// Nodal values on the `n × n` grid of spacing `1/(n-1)`; index
/// `iy * n + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGridField {
    n: usize,
    values: Vec<f64>,
}

impl UniformGridField {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, ReferenceError> {
        if n < 3 {
            return Err(ReferenceError::Invalid(format!("grid needs n >= 3, got {n}")));
        }
        if values.len() != n * n {
            return Err(ReferenceError::Invalid(format!(
                "expected {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ReferenceError::Invalid(format!("non-finite value at node {i}")));
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn([f64; 2]) -> f64) -> Result<Self, ReferenceError> {
        let h = 1.0 / (n.max(2) - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                values.push(f([ix as f64 * h, iy as f64 * h]));
            }
        }
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.n + ix]
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let h = self.spacing();
        [ix as f64 * h, iy as f64 * h]
    }

    /// Bilinear interpolation; points are clamped to the unit square.
    pub fn interpolate(&self, p: [f64; 2]) -> f64 {
        let m = (self.n - 1) as f64;
        let locate = |v: f64| {
            let s = v.clamp(0.0, 1.0) * m;
            let i = (s.floor() as usize).min(self.n - 2);
            (i, s - i as f64)
        };
        let (ix, fx) = locate(p[0]);
        let (iy, fy) = locate(p[1]);
        let v00 = self.get(ix, iy);
        let v10 = self.get(ix + 1, iy);
        let v01 = self.get(ix, iy + 1);
        let v11 = self.get(ix + 1, iy + 1);
        v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy + v11 * fx * fy
    }

    /// Mean over the grid line closest to `y`, trapezoidal in `x`.
    pub fn row_mean(&self, y: f64) -> f64 {
        let iy = ((y.clamp(0.0, 1.0)) * (self.n - 1) as f64).round() as usize;
        let row = &self.values[iy * self.n..(iy + 1) * self.n];
        let inner: f64 = row[1..self.n - 1].iter().sum();
        (inner + 0.5 * (row[0] + row[self.n - 1])) / (self.n - 1) as f64
    }

    /// `x,y,T` with `x` varying fastest.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.n * self.n * 32 + 8);
        s.push_str("x,y,T\n");
        for iy in 0..self.n {
            for ix in 0..self.n {
                let [x, y] = self.point(ix, iy);
                let _ = writeln!(s, "{x},{y},{}", self.get(ix, iy));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_field_basics() {
        let f = UniformGridField::from_fn(5, |p| 2.0 * p[0] + p[1]).unwrap();
        assert_eq!(f.spacing(), 0.25);
        assert!((f.interpolate([0.3, 0.6]) - 1.2).abs() < 1e-12);
        assert!((f.interpolate([1.0, 1.0]) - 3.0).abs() < 1e-12);
        assert!((f.row_mean(0.5) - 1.5).abs() < 1e-12);
        assert!(UniformGridField::new(2, vec![0.0; 4]).is_err());
        assert!(UniformGridField::new(3, vec![0.0; 8]).is_err());
        assert!(UniformGridField::new(3, vec![f64::NAN; 9]).is_err());
        let csv = f.to_csv();
        assert!(csv.starts_with("x,y,T\n0,0,0\n0.25,0,0.5\n"));
        assert_eq!(csv.lines().count(), 26);
    }
}
