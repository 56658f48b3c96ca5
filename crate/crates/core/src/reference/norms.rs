//! Discrete `L²` and `H¹`-seminorm errors on a uniform grid.

use std::fmt::Write as _;

use super::{Profile, ReferenceError, UniformGridField};
use crate::timestepper::{Snapshot, TransientSolution};

/// What the wavelet solution is compared against.
pub enum Reference<'a> {
    Grid(&'a UniformGridField),
    /// Steady profile in `y`, constant in `x`.
    Profile(&'a dyn Profile),
    Function(&'a dyn Fn([f64; 2]) -> f64),
}

impl Reference<'_> {
    pub fn tag(&self) -> &'static str {
        match self {
            Reference::Grid(_) => "fd_grid",
            Reference::Profile(_) => "analytic_profile",
            Reference::Function(_) => "analytic_function",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub l2_error: f64,
    pub h1_semi_error: f64,
    pub reference: String,
    /// Grid points per axis.
    pub samples: usize,
}

impl ErrorReport {
    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "l2_error={:e}", self.l2_error);
        let _ = writeln!(s, "h1_semi_error={:e}", self.h1_semi_error);
        let _ = writeln!(s, "reference={}", self.reference);
        let _ = writeln!(s, "samples={}", self.samples);
        s
    }
}

/// `T` of a stored state at the nodes of the `n × n` grid.
pub fn sample_solution(sol: &TransientSolution, snap: &Snapshot, n: usize) -> Result<UniformGridField, ReferenceError> {
    let h = 1.0 / (n.max(2) - 1) as f64;
    let pts: Vec<[f64; 2]> = (0..n * n).map(|i| [(i % n) as f64 * h, (i / n) as f64 * h]).collect();
    UniformGridField::new(n, sol.temperature_field(snap, &pts))
}

/// Errors between two fields on the same grid. Per cell the difference is
/// averaged from the four corners (midpoint rule) and differentiated by
/// centred differences at the cell centre.
pub fn error_norms_sampled(
    u: &UniformGridField,
    reference: &UniformGridField,
    tag: &str,
) -> Result<ErrorReport, ReferenceError> {
    if u.n() != reference.n() {
        return Err(ReferenceError::Invalid(format!(
            "grid sizes differ: {} vs {}",
            u.n(),
            reference.n()
        )));
    }
    let n = u.n();
    let h = u.spacing();
    let e: Vec<f64> = u.values().iter().zip(reference.values()).map(|(a, b)| a - b).collect();
    let (mut l2, mut h1) = (0.0, 0.0);
    for iy in 0..n - 1 {
        for ix in 0..n - 1 {
            let e00 = e[iy * n + ix];
            let e10 = e[iy * n + ix + 1];
            let e01 = e[(iy + 1) * n + ix];
            let e11 = e[(iy + 1) * n + ix + 1];
            let mid = 0.25 * (e00 + e10 + e01 + e11);
            let gx = 0.5 * ((e10 - e00) + (e11 - e01)) / h;
            let gy = 0.5 * ((e01 - e00) + (e11 - e10)) / h;
            l2 += mid * mid;
            h1 += gx * gx + gy * gy;
        }
    }
    Ok(ErrorReport {
        l2_error: (l2 * h * h).sqrt(),
        h1_semi_error: (h1 * h * h).sqrt(),
        reference: tag.to_string(),
        samples: n,
    })
}

/// Intervals per axis needed to resolve the finest active wavelet twice.
fn required_intervals(sol: &TransientSolution, snap: &Snapshot) -> usize {
    let finest = sol.set_of(snap).set().finest_wavelet_level().unwrap_or(0);
    1usize << (finest + 2)
}

/// Errors of a stored state. `n` sets the sampling grid for analytic
/// references (default: the smallest admissible grid, at least 129).
pub fn error_norms(
    sol: &TransientSolution,
    snap: &Snapshot,
    reference: &Reference,
    n: Option<usize>,
) -> Result<ErrorReport, ReferenceError> {
    let required = required_intervals(sol, snap);
    let n = match reference {
        Reference::Grid(g) => g.n(),
        _ => n.unwrap_or((required + 1).max(129)),
    };
    if n - 1 < required {
        return Err(ReferenceError::Resolution { required, got: n - 1 });
    }
    let u = sample_solution(sol, snap, n)?;
    let r = match reference {
        Reference::Grid(g) => (*g).clone(),
        Reference::Profile(p) => UniformGridField::from_fn(n, |q| p.value(q[1]))?,
        Reference::Function(f) => UniformGridField::from_fn(n, f)?,
    };
    error_norms_sampled(&u, &r, reference.tag())
}

/// RMS over `samples` abscissae of the jump of `k ∂T/∂y` across the line
/// `y = y_i`, from one-sided differences at offset `delta`.
pub fn interface_flux_jump(sol: &TransientSolution, snap: &Snapshot, y_i: f64, delta: f64, samples: usize) -> f64 {
    let m = &sol.problem.material;
    let mut pts = Vec::with_capacity(3 * samples);
    for s in 0..samples {
        let x = (s as f64 + 0.5) / samples as f64;
        pts.extend([[x, y_i - delta], [x, y_i], [x, y_i + delta]]);
    }
    let t = sol.temperature_field(snap, &pts);
    let mut sum = 0.0;
    for s in 0..samples {
        let x = pts[3 * s][0];
        let below = m.conductivity_unchecked([x, y_i - 0.5 * delta]).kyy * (t[3 * s + 1] - t[3 * s]) / delta;
        let above = m.conductivity_unchecked([x, y_i + 0.5 * delta]).kyy * (t[3 * s + 2] - t[3 * s + 1]) / delta;
        sum += (above - below).powi(2);
    }
    (sum / samples as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptivity::AdaptivityPolicy;
    use crate::mra::BasisFamily;
    use crate::problem::{MaterialMap, MaterialPhase, ProblemDefinition};
    use crate::reference::analytic_slab_steady;
    use crate::timestepper::{run_transient_with_initial, Discretization, RunOptions, TimeGrid};

    #[test]
    fn identical_and_constant_fields() {
        let a = UniformGridField::from_fn(9, |p| p[0] * p[1]).unwrap();
        let r = error_norms_sampled(&a, &a, "self").unwrap();
        assert_eq!((r.l2_error, r.h1_semi_error), (0.0, 0.0));
        let one = UniformGridField::from_fn(9, |_| 1.0).unwrap();
        let zero = UniformGridField::from_fn(9, |_| 0.0).unwrap();
        let r = error_norms_sampled(&one, &zero, "c").unwrap();
        assert!((r.l2_error - 1.0).abs() < 1e-14);
        assert_eq!(r.h1_semi_error, 0.0);
        assert!(r.to_kv().starts_with("l2_error=1e0\nh1_semi_error=0e0\n"));
        let small = UniformGridField::from_fn(5, |_| 0.0).unwrap();
        assert!(error_norms_sampled(&one, &small, "x").is_err());
    }

    #[test]
    fn hat_reproduces_linear_profile() {
        let p = ProblemDefinition::vertical_gradient(
            MaterialMap::homogeneous(MaterialPhase::isotropic(0, 1.0)),
            1.0,
            0.0,
            0.1,
        )
        .unwrap();
        let disc = Discretization::new(BasisFamily::HierarchicalHat, 3);
        let grid = TimeGrid::new(0.1, 0.1).unwrap();
        let pol = AdaptivityPolicy::default();
        let s =
            run_transient_with_initial(&p, &disc, Some(&pol), grid, RunOptions::default(), &|q| 1.0 - q[1]).unwrap();
        let prof = analytic_slab_steady(1.0, 1.0, 0.5);
        let r = error_norms(&s, s.last(), &Reference::Profile(&prof), None).unwrap();
        assert!(r.l2_error <= 1e-8 && r.h1_semi_error <= 1e-6, "{r:?}");
        let coarse = UniformGridField::from_fn(3, |q| 1.0 - q[1]).unwrap();
        // no scaling function survives the Dirichlet edges, so the safety net
        // is the level-0 wavelets and their children reach level 1
        let e = error_norms(&s, s.last(), &Reference::Grid(&coarse), None);
        assert!(
            matches!(e, Err(ReferenceError::Resolution { required: 8, got: 2 })),
            "{e:?}"
        );
    }
}
