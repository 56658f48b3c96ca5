//! Expansion coefficients of a given spatial function.

use super::basis::Basis;
use super::family::BasisFamily;
use super::index::{IndexSet, Orientation, WaveletIndex};
use super::MraError;
use crate::assembly::{Assembler, QuadratureRule};
use crate::problem::Edge;
use crate::problem::{BoundaryCondition, BoundarySpec, MaterialMap, MaterialPhase, ProblemDefinition, SpaceTimeFn};
use crate::timestepper::{pcg_solve, PcgConfig, Preconditioner, SolverError};

/// Coefficients of `f` in `set`.
///
/// Hat family: hierarchical interpolation at the level-`J` nodes, with the
/// nodes on Dirichlet edges forced to zero. Other families: `L²`
/// projection onto `span(set)` with the given quadrature.
pub fn project_function(
    f: &dyn Fn([f64; 2]) -> f64,
    set: &IndexSet,
    basis: &Basis,
    quad: QuadratureRule,
) -> Result<Vec<f64>, MraError> {
    if set.is_empty() {
        return Ok(Vec::new());
    }
    if basis.family() == BasisFamily::HierarchicalHat {
        return Ok(hat_interpolation(f, set));
    }
    let dummy = ProblemDefinition::new(
        MaterialMap::homogeneous(MaterialPhase::isotropic(0, 1.0)),
        BoundarySpec::all(BoundaryCondition::insulated()),
        SpaceTimeFn::zero(),
        SpaceTimeFn::zero(),
        1.0,
    )
    .expect("static problem is valid");
    let asm = Assembler::new(basis, set, &dummy, quad).map_err(|e| MraError::Projection(e.to_string()))?;
    let gram = asm.gram().map_err(|e| MraError::Projection(e.to_string()))?;
    let rhs = asm.inner_products(f);
    if rhs.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; set.len()]);
    }
    let cfg = PcgConfig {
        tol: 1e-13,
        max_iter: Some(20 * set.len() + 100),
        preconditioner: Preconditioner::Jacobi,
        warm_start: false,
    };
    match pcg_solve(&gram, &rhs, &cfg, None) {
        Ok((x, _)) => Ok(x),
        // The Gram matrix of boundary-truncated Daubechies functions is badly
        // conditioned; CG iterates still minimize the L² error monotonically.
        Err(SolverError::Convergence {
            x, residual_history, ..
        }) => {
            log::debug!(
                "projection stopped at relative residual {:e}",
                residual_history.last().copied().unwrap_or(f64::NAN)
            );
            Ok(x)
        }
        Err(e) => Err(MraError::Projection(e.to_string())),
    }
}

/// Hierarchical surpluses of the level-`J` nodal interpolant of `f`,
/// scaled to the `2^{j/2}`-per-axis normalization, restricted to `set`.
pub fn hat_interpolation(f: &dyn Fn([f64; 2]) -> f64, set: &IndexSet) -> Vec<f64> {
    let big_j = set.max_level();
    let n = (1usize << big_j) + 1;
    let h = 1.0 / (n - 1) as f64;
    let d = set.dirichlet();
    let mut v = vec![0.0; n * n];
    for iy in 0..n {
        for ix in 0..n {
            let on_dirichlet = (ix == 0 && d.contains(Edge::Left))
                || (ix == n - 1 && d.contains(Edge::Right))
                || (iy == 0 && d.contains(Edge::Bottom))
                || (iy == n - 1 && d.contains(Edge::Top));
            if !on_dirichlet {
                v[iy * n + ix] = f([ix as f64 * h, iy as f64 * h]);
            }
        }
    }
    // Lifting from fine to coarse: at level j the active grid has stride
    // `st = 2^{J-j-1}`; odd multiples of st become surpluses.
    for j in (0..big_j).rev() {
        let st = 1usize << (big_j - j - 1);
        for iy in (0..n).step_by(st) {
            for ix in (st..n).step_by(2 * st) {
                let avg = 0.5 * (v[iy * n + ix - st] + v[iy * n + ix + st]);
                v[iy * n + ix] -= avg;
            }
        }
        for iy in (st..n).step_by(2 * st) {
            for ix in (0..n).step_by(st) {
                let avg = 0.5 * (v[(iy - st) * n + ix] + v[(iy + st) * n + ix]);
                v[iy * n + ix] -= avg;
            }
        }
    }
    let at = |w: &WaveletIndex| -> f64 {
        let j = w.level;
        match w.orientation {
            Orientation::Scaling => {
                let full = n - 1;
                v[(w.ky as usize * full) * n + w.kx as usize * full]
            }
            o => {
                let st = 1usize << (big_j - j - 1);
                let (odd_x, odd_y) = match o {
                    Orientation::Horizontal => (true, false),
                    Orientation::Vertical => (false, true),
                    _ => (true, true),
                };
                let node = |k: i64, odd: bool| -> usize {
                    if odd {
                        (2 * k as usize + 1) * st
                    } else {
                        k as usize * 2 * st
                    }
                };
                let ix = node(w.kx, odd_x);
                let iy = node(w.ky, odd_y);
                v[iy * n + ix] / (1u64 << j) as f64
            }
        }
    };
    set.iter().map(at).collect()
}
