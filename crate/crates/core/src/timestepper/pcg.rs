//! Diagonally preconditioned conjugate gradients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    Jacobi,
    /// Diagonal of `M + Δt K`; currently the same operator as `Jacobi`.
    LevelScaled,
}

impl Preconditioner {
    pub fn name(self) -> &'static str {
        match self {
            Preconditioner::Jacobi => "jacobi",
            Preconditioner::LevelScaled => "level_scaled",
        }
    }
}

impl fmt::Display for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preconditioner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jacobi" => Ok(Preconditioner::Jacobi),
            "level_scaled" => Ok(Preconditioner::LevelScaled),
            other => Err(format!(
                "unknown preconditioner `{other}` (expected jacobi or level_scaled)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgConfig {
    /// Relative residual target `‖b - Ax‖ / ‖b‖`.
    pub tol: f64,
    /// `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    /// Start from the supplied initial guess when one is given.
    pub warm_start: bool,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            preconditioner: Preconditioner::Jacobi,
            warm_start: true,
        }
    }
}

impl PcgConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(format!("tolerance must lie in (0, 1), got {}", self.tol));
        }
        if self.max_iter == Some(0) {
            return Err("max_iter must be >= 1".into());
        }
        Ok(())
    }

    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("PCG did not reach tolerance in {iterations} iterations (relative residual {:e})", residual_history.last().copied().unwrap_or(f64::NAN))]
    Convergence {
        iterations: usize,
        residual_history: Vec<f64>,
        /// Last iterate.
        x: Vec<f64>,
    },
    #[error("matrix is not positive definite: pᵀAp = {curvature:e} at iteration {iteration}")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    Dimension { matrix: usize, vector: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Solves `A x = b` for SPD `A`. Summation order is fixed, so equal inputs
/// give bit-identical iterates.
pub fn pcg_solve(
    a: &CsrMatrix,
    b: &[f64],
    cfg: &PcgConfig,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, PcgStats), SolverError> {
    cfg.validate().map_err(SolverError::Config)?;
    let n = a.dim();
    if b.len() != n {
        return Err(SolverError::Dimension {
            matrix: n,
            vector: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("right-hand side"));
    }
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            PcgStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    if let Some(i) = diag.iter().position(|&d| d <= 0.0) {
        return Err(SolverError::NotPositiveDefinite {
            iteration: 0,
            curvature: diag[i],
        });
    }

    let mut x = match (x0, cfg.warm_start) {
        (Some(x0), true) => {
            if x0.len() != n {
                return Err(SolverError::Dimension {
                    matrix: n,
                    vector: x0.len(),
                });
            }
            x0.to_vec()
        }
        _ => vec![0.0; n],
    };
    let mut r = b.to_vec();
    if x.iter().any(|v| *v != 0.0) {
        let ax = a.matvec(&x);
        for i in 0..n {
            r[i] -= ax[i];
        }
    }
    let mut history = Vec::new();
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    history.push(rel);
    if rel <= cfg.tol {
        return Ok((
            x,
            PcgStats {
                iterations: 0,
                residual: rel,
            },
        ));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let cap = cfg.iteration_cap(n);
    for it in 1..=cap {
        a.matvec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(SolverError::NotPositiveDefinite {
                iteration: it,
                curvature,
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        history.push(rel);
        if !rel.is_finite() {
            return Err(SolverError::NonFinite("residual"));
        }
        if rel <= cfg.tol {
            return Ok((
                x,
                PcgStats {
                    iterations: it,
                    residual: rel,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::Convergence {
        iterations: cap,
        residual_history: history,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_takes_one_iteration() {
        let a = CsrMatrix::identity(7);
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.3).collect();
        let (x, s) = pcg_solve(&a, &b, &PcgConfig::default(), None).unwrap();
        assert_eq!(s.iterations, 1);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let (x, _) = pcg_solve(&a, &[3.0, 3.0], &PcgConfig::default(), None).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_spd_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = g.transpose() * &g + DMatrix::identity(n, n);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = a
            .clone()
            .cholesky()
            .unwrap()
            .solve(&nalgebra::DVector::from_vec(b.clone()));
        let (x, _) = pcg_solve(&CsrMatrix::from_dense(&a), &b, &PcgConfig::default(), None).unwrap();
        let err: f64 = x
            .iter()
            .zip(exact.iter())
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn indefinite_matrix_is_detected() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        let r = pcg_solve(&a, &[1.0, -1.0], &PcgConfig::default(), None);
        assert!(matches!(r, Err(SolverError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cap_reports_history() {
        let a = CsrMatrix::from_dense(&DMatrix::from_fn(6, 6, |i, j| {
            1.0 / (1 + i + j) as f64 + if i == j { 1e-3 } else { 0.0 }
        }));
        let cfg = PcgConfig {
            max_iter: Some(2),
            tol: 1e-14,
            ..PcgConfig::default()
        };
        match pcg_solve(&a, &[1.0; 6], &cfg, None) {
            Err(SolverError::Convergence {
                iterations,
                residual_history,
                ..
            }) => {
                assert_eq!(iterations, 2);
                assert_eq!(residual_history.len(), 3);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let a = CsrMatrix::from_dense(&DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                4.0
            } else {
                1.0 / (1 + i + j) as f64
            }
        }));
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r1 = pcg_solve(&a, &b, &PcgConfig::default(), None).unwrap();
        let r2 = pcg_solve(&a, &b, &PcgConfig::default(), None).unwrap();
        assert_eq!(r1.0, r2.0);
    }
}
