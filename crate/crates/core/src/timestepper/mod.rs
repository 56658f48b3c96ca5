//! Backward-Euler time integration on an adaptive active set.

mod pcg;

pub use pcg::{pcg_solve, PcgConfig, PcgStats, Preconditioner, SolverError};

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::adaptivity::{
    expand_neighborhood, initial_active_set, mark_essential, transfer_coefficients, ActiveSet, AdaptivityError,
    AdaptivityPolicy,
};
use crate::assembly::{build_lifting, lifting_at, Assembler, AssemblyError, CsrMatrix, QuadratureRule};
use crate::mra::{full_index_set, project_function, Basis, BasisFamily, Evaluator, IndexSet, MraError};
use crate::problem::{BoundaryCondition, ProblemDefinition};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepFailure {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Adaptivity(#[from] AdaptivityError),
    #[error(transparent)]
    Mra(#[from] MraError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimestepError {
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("invalid discretization: {0}")]
    Setup(String),
    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: StepFailure,
    },
}

fn at_step<E: Into<StepFailure>>(step: usize, t: f64) -> impl FnOnce(E) -> TimestepError {
    move |e| TimestepError::Step {
        step,
        t,
        source: e.into(),
    }
}

/// Uniform grid `t_n = n Δt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// `t_final` must be an integer multiple of `dt` up to `1e-12`.
    pub fn new(dt: f64, t_final: f64) -> Result<Self, TimestepError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TimestepError::Grid(format!("dt must be > 0, got {dt}")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(TimestepError::Grid(format!("t_final must be > 0, got {t_final}")));
        }
        let n = (t_final / dt).round();
        if n < 1.0 || (n * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
            return Err(TimestepError::Grid(format!(
                "t_final = {t_final} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self {
            dt,
            n_steps: n as usize,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.dt * n as f64
    }
}

/// Solves `(M + Δt K) u = M u_n + Δt f_next`, warm-started from `u_n`.
pub fn backward_euler_step(
    m: &CsrMatrix,
    k: &CsrMatrix,
    u_n: &[f64],
    f_next: &[f64],
    dt: f64,
    cfg: &PcgConfig,
) -> Result<(Vec<f64>, PcgStats), SolverError> {
    let a = CsrMatrix::linear_combination(1.0, m, dt, k);
    backward_euler_step_with(&a, m, u_n, f_next, dt, cfg)
}

/// As [`backward_euler_step`] with `A = M + Δt K` already formed.
pub fn backward_euler_step_with(
    a: &CsrMatrix,
    m: &CsrMatrix,
    u_n: &[f64],
    f_next: &[f64],
    dt: f64,
    cfg: &PcgConfig,
) -> Result<(Vec<f64>, PcgStats), SolverError> {
    if !(dt > 0.0) {
        return Err(SolverError::Config(format!("dt must be > 0, got {dt}")));
    }
    let n = a.dim();
    for len in [m.dim(), u_n.len(), f_next.len()] {
        if len != n {
            return Err(SolverError::Dimension { matrix: n, vector: len });
        }
    }
    let mut r = m.matvec(u_n);
    for (ri, fi) in r.iter_mut().zip(f_next) {
        *ri += dt * fi;
    }
    pcg_solve(a, &r, cfg, Some(u_n))
}

/// Spatial and algebraic discretization choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub family: BasisFamily,
    pub j_max: u32,
    /// Dyadic table depth.
    pub table_depth: u32,
    pub quadrature: QuadratureRule,
    pub drop_tol: f64,
    pub pcg: PcgConfig,
}

impl Discretization {
    pub fn new(family: BasisFamily, j_max: u32) -> Self {
        Self {
            family,
            j_max,
            table_depth: 10,
            quadrature: QuadratureRule::default_for(family),
            drop_tol: 0.0,
            pcg: PcgConfig::default(),
        }
    }

    pub fn basis(&self) -> Result<Basis, MraError> {
        Basis::new(self.family, self.table_depth)
    }
}

/// Knobs that do not change the computed trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Keep every `store_every`-th state (0: only the first and last).
    pub store_every: usize,
    /// Measure wall time per step; otherwise `wall_ms` is 0.
    pub timing: bool,
    /// Stop once `‖u^{n+1} - u^n‖_∞ ≤ tol` with an unchanged active set.
    pub steady_tol: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            store_every: 1,
            timing: false,
            steady_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    /// Size of the set the step was solved on.
    pub active_dofs: usize,
    pub pcg_iters: usize,
    pub pcg_residual: f64,
    pub wall_ms: f64,
}

/// Coefficients of `u_h = T - T_g` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub coeffs: Vec<f64>,
    pub snapshot_id: u64,
}

#[derive(Debug, Clone)]
pub struct TransientSolution {
    pub basis: Basis,
    pub full: Arc<IndexSet>,
    /// Active sets, position = snapshot id.
    pub sets: Vec<ActiveSet>,
    /// Strictly increasing in time.
    pub snapshots: Vec<Snapshot>,
    pub records: Vec<StepRecord>,
    pub problem: ProblemDefinition,
}

impl TransientSolution {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("at least the initial state is stored")
    }

    pub fn set_of(&self, s: &Snapshot) -> &ActiveSet {
        &self.sets[s.snapshot_id as usize]
    }

    pub fn final_set(&self) -> &ActiveSet {
        self.set_of(self.last())
    }

    /// `T = u_h + T_g` at `p` for a stored state.
    pub fn temperature(&self, s: &Snapshot, p: [f64; 2]) -> f64 {
        let set = self.set_of(s).set();
        let u = Evaluator::new(&self.basis, set)
            .eval(&s.coeffs, p)
            .expect("snapshot length matches its set");
        u + lifting_at(&self.problem, s.t).value(p)
    }

    /// Evaluates `T` on many points, sharing one evaluator.
    pub fn temperature_field(&self, s: &Snapshot, points: &[[f64; 2]]) -> Vec<f64> {
        let set = self.set_of(s).set();
        let ev = Evaluator::new(&self.basis, set);
        let lift = lifting_at(&self.problem, s.t);
        points
            .iter()
            .map(|p| ev.eval(&s.coeffs, *p).expect("snapshot length matches its set") + lift.value(*p))
            .collect()
    }

    /// `step,t,active_dofs,pcg_iters,pcg_residual,wall_ms`
    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("step,t,active_dofs,pcg_iters,pcg_residual,wall_ms\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{:.3}",
                r.step, r.t, r.active_dofs, r.pcg_iters, r.pcg_residual, r.wall_ms
            );
        }
        s
    }

    /// `step,ordinal,level,kind,orientation,kx,ky` for every stored state.
    pub fn active_sets_csv(&self) -> String {
        let mut s = String::from("step,ordinal,level,kind,orientation,kx,ky\n");
        for snap in &self.snapshots {
            let a = self.set_of(snap);
            for (&o, w) in a.full_ordinals().iter().zip(a.set().iter()) {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    snap.step,
                    o,
                    w.level,
                    crate::mra::kind_name(w.kind()),
                    w.orientation.name(),
                    w.kx,
                    w.ky
                );
            }
        }
        s
    }
}

fn data_time_independent(problem: &ProblemDefinition) -> bool {
    problem.source.is_time_independent()
        && problem.boundary.iter().all(|(_, bc)| match bc {
            BoundaryCondition::Dirichlet(g) | BoundaryCondition::Neumann(g) => g.is_time_independent(),
            BoundaryCondition::Robin { t_inf, .. } => t_inf.is_time_independent(),
        })
}

/// Operators on one active set; reused while the set is unchanged.
struct Operators {
    members: ActiveSet,
    m: CsrMatrix,
    a: CsrMatrix,
    load: Option<Vec<f64>>,
}

/// Runs with the problem's own initial temperature.
pub fn run_transient(
    problem: &ProblemDefinition,
    disc: &Discretization,
    policy: Option<&AdaptivityPolicy>,
    grid: TimeGrid,
    opts: RunOptions,
) -> Result<TransientSolution, TimestepError> {
    let init = problem.initial.clone();
    run_transient_with_initial(problem, disc, policy, grid, opts, &move |p| init.eval(p[0], p[1], 0.0))
}

/// Runs from an arbitrary initial temperature `t0`. `policy = None`
/// solves on the full set.
pub fn run_transient_with_initial(
    problem: &ProblemDefinition,
    disc: &Discretization,
    policy: Option<&AdaptivityPolicy>,
    grid: TimeGrid,
    opts: RunOptions,
    t0: &dyn Fn([f64; 2]) -> f64,
) -> Result<TransientSolution, TimestepError> {
    disc.pcg.validate().map_err(TimestepError::Setup)?;
    disc.quadrature.validate().map_err(TimestepError::Setup)?;
    if let Some(p) = policy {
        p.validate().map_err(|e| TimestepError::Setup(e.to_string()))?;
    }
    if (grid.t_final() - problem.t_final).abs() > 1e-12 * problem.t_final.max(1.0) {
        return Err(TimestepError::Grid(format!(
            "grid ends at {} but the problem ends at {}",
            grid.t_final(),
            problem.t_final
        )));
    }
    let init_err = at_step::<StepFailure>(0, 0.0);
    let basis = disc.basis().map_err(|e| init_err(e.into()))?;
    let full = Arc::new(
        full_index_set(disc.j_max, disc.family, problem.boundary.dirichlet_edges())
            .map_err(|e| TimestepError::Setup(e.to_string()))?,
    );

    // 1. initialisation: project T0 - T_g(0) and pick the first active set
    let lift0 = build_lifting(problem, 0.0);
    let u0_full = project_function(&|p| t0(p) - lift0.value(p), &full, &basis, disc.quadrature)
        .map_err(|e| at_step::<MraError>(0, 0.0)(e))?;
    let mut active = match policy {
        Some(p) => initial_active_set(&full, &u0_full, p).map_err(at_step(0, 0.0))?,
        None => ActiveSet::everything(full.clone(), 0),
    };
    let everything = ActiveSet::everything(full.clone(), 0);
    let mut u = transfer_coefficients(&everything, &u0_full, &active).map_err(at_step(0, 0.0))?;

    let mut sets = vec![active.clone()];
    let mut snapshots = vec![Snapshot {
        step: 0,
        t: 0.0,
        coeffs: u.clone(),
        snapshot_id: 0,
    }];
    let mut records = Vec::with_capacity(grid.n_steps);
    let static_load = data_time_independent(problem);
    let mut ops: Option<Operators> = None;

    for n in 0..grid.n_steps {
        let step = n + 1;
        let t = grid.time(step);
        let err = |e: StepFailure| TimestepError::Step { step, t, source: e };
        let clock = opts.timing.then(Instant::now);

        // 2. assembly on the active set
        let reuse = ops.as_ref().is_some_and(|o| o.members.same_members(&active));
        if !reuse {
            let asm = Assembler::new(&basis, active.set(), problem, disc.quadrature)
                .map_err(|e| err(e.into()))?
                .with_drop_tolerance(disc.drop_tol);
            let (m, k) = asm.matrices().map_err(|e| err(e.into()))?;
            let a = CsrMatrix::linear_combination(1.0, &m, grid.dt, &k);
            ops = Some(Operators {
                members: active.clone(),
                m,
                a,
                load: None,
            });
        }
        let o = ops.as_mut().expect("operators assembled above");
        let f = match (&o.load, static_load) {
            (Some(f), true) => f.clone(),
            _ => {
                let asm = Assembler::new(&basis, active.set(), problem, disc.quadrature).map_err(|e| err(e.into()))?;
                let f = asm.load(t, &lifting_at(problem, t)).map_err(|e| err(e.into()))?;
                if static_load {
                    o.load = Some(f.clone());
                }
                f
            }
        };

        // 3. time step
        let (u_next, stats) =
            backward_euler_step_with(&o.a, &o.m, &u, &f, grid.dt, &disc.pcg).map_err(|e| err(e.into()))?;
        let change = u_next.iter().zip(&u).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        let solved_on = active.len();
        u = u_next;

        // 4. coefficient-based adaptivity
        let mut set_changed = false;
        if let Some(p) = policy {
            if step % p.stride == 0 {
                let essential = mark_essential(&u, &active, p).map_err(|e| err(e.into()))?;
                let next = expand_neighborhood(&essential, &full, p);
                if !next.same_members(&active) {
                    u = transfer_coefficients(&active, &u, &next).map_err(|e| err(e.into()))?;
                    active = next.with_snapshot_id(sets.len() as u64);
                    sets.push(active.clone());
                    set_changed = true;
                }
            }
        }

        let wall_ms = clock.map_or(0.0, |c| c.elapsed().as_secs_f64() * 1e3);
        records.push(StepRecord {
            step,
            t,
            active_dofs: solved_on,
            pcg_iters: stats.iterations,
            pcg_residual: stats.residual,
            wall_ms,
        });
        log::debug!(
            "step {step} t={t:.6} dofs={solved_on} iters={} res={:e}",
            stats.iterations,
            stats.residual
        );

        let steady = opts.steady_tol.is_some_and(|tol| !set_changed && change <= tol);
        let last = step == grid.n_steps || steady;
        let keep = last || (opts.store_every > 0 && step % opts.store_every == 0);
        if keep {
            snapshots.push(Snapshot {
                step,
                t,
                coeffs: u.clone(),
                snapshot_id: active.snapshot_id(),
            });
        }
        if steady {
            log::info!("steady state reached at step {step} (t = {t})");
            break;
        }
    }

    Ok(TransientSolution {
        basis,
        full,
        sets,
        snapshots,
        records,
        problem: problem.clone(),
    })
}

/// Solves `K u = ℓ(t_final) - a(T_g)` on `set`.
pub fn solve_steady(
    basis: &Basis,
    set: &IndexSet,
    problem: &ProblemDefinition,
    quad: QuadratureRule,
    cfg: &PcgConfig,
) -> Result<(Vec<f64>, PcgStats), StepFailure> {
    let asm = Assembler::new(basis, set, problem, quad)?;
    let k = asm.stiffness()?;
    let mut lift = lifting_at(problem, problem.t_final);
    lift.rates = [0.0; 4];
    let f = asm.load(problem.t_final, &lift)?;
    Ok(pcg_solve(&k, &f, cfg, None)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BoundarySpec, MaterialMap, MaterialPhase, SpaceTimeFn};
    use nalgebra::DMatrix;

    fn scalar(v: f64) -> CsrMatrix {
        CsrMatrix::from_dense(&DMatrix::from_element(1, 1, v))
    }

    #[test]
    fn scalar_steps() {
        let cfg = PcgConfig::default();
        let (u1, _) = backward_euler_step(&scalar(1.0), &scalar(1.0), &[1.0], &[0.0], 0.1, &cfg).unwrap();
        assert!((u1[0] - 1.0 / 1.1).abs() < 1e-12);
        let (u2, _) = backward_euler_step(&scalar(1.0), &scalar(1.0), &u1, &[0.0], 0.1, &cfg).unwrap();
        assert!((u2[0] - 1.0 / 1.21).abs() < 1e-12);
    }

    #[test]
    fn no_diffusion() {
        let cfg = PcgConfig::default();
        let m = scalar(2.0);
        let k = CsrMatrix::zeros(1);
        let (u, _) = backward_euler_step(&m, &k, &[3.0], &[0.0], 0.5, &cfg).unwrap();
        assert!((u[0] - 3.0).abs() < 1e-14);
        let (u, _) = backward_euler_step(&m, &k, &[3.0], &[4.0], 0.5, &cfg).unwrap();
        assert!((u[0] - 4.0).abs() < 1e-12);
        assert!(backward_euler_step(&m, &k, &[3.0], &[4.0], 0.0, &cfg).is_err());
    }

    #[test]
    fn time_grid() {
        let g = TimeGrid::new(0.1, 1.0).unwrap();
        assert_eq!(g.n_steps, 10);
        assert!((g.t_final() - 1.0).abs() < 1e-12);
        assert!(TimeGrid::new(0.3, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 1.0).is_err());
        assert!(TimeGrid::new(2.0, 1.0).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = ProblemDefinition::new(
            MaterialMap::homogeneous(MaterialPhase::isotropic(0, 1.0)),
            BoundarySpec::all(BoundaryCondition::Dirichlet(SpaceTimeFn::zero())),
            SpaceTimeFn::zero(),
            SpaceTimeFn::zero(),
            0.5,
        )
        .unwrap();
        let disc = Discretization::new(BasisFamily::HierarchicalHat, 3);
        let grid = TimeGrid::new(0.1, 0.5).unwrap();
        let pol = AdaptivityPolicy::default();
        for policy in [None, Some(&pol)] {
            let s = run_transient(&p, &disc, policy, grid, RunOptions::default()).unwrap();
            assert_eq!(s.snapshots.len(), 6);
            assert!(s.snapshots.iter().all(|x| x.coeffs.iter().all(|v| *v == 0.0)));
            assert!(s.snapshots.windows(2).all(|w| w[0].t < w[1].t));
        }
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let p = ProblemDefinition::vertical_gradient(
            MaterialMap::homogeneous(MaterialPhase::isotropic(0, 1.0)),
            0.0,
            1.0,
            1.0,
        )
        .unwrap();
        let disc = Discretization::new(BasisFamily::HierarchicalHat, 2);
        let grid = TimeGrid::new(0.1, 0.5).unwrap();
        assert!(matches!(
            run_transient(&p, &disc, None, grid, RunOptions::default()),
            Err(TimestepError::Grid(_))
        ));
    }

    #[test]
    fn haar_fails_at_step_one() {
        let p = ProblemDefinition::vertical_gradient(
            MaterialMap::homogeneous(MaterialPhase::isotropic(0, 1.0)),
            0.0,
            1.0,
            0.2,
        )
        .unwrap();
        let disc = Discretization::new(BasisFamily::Haar, 2);
        let grid = TimeGrid::new(0.1, 0.2).unwrap();
        match run_transient(&p, &disc, None, grid, RunOptions::default()) {
            Err(TimestepError::Step { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected a step error, got {other:?}"),
        }
    }

    #[test]
    fn linear_profile_is_a_fixed_point() {
        // T = y solves the vertical-gradient problem exactly; with T0 = y the
        // homogeneous part stays zero.
        let p = ProblemDefinition::vertical_gradient(
            MaterialMap::homogeneous(MaterialPhase::isotropic(0, 2.0)),
            0.0,
            1.0,
            0.3,
        )
        .unwrap();
        let disc = Discretization::new(BasisFamily::HierarchicalHat, 3);
        let grid = TimeGrid::new(0.1, 0.3).unwrap();
        let s = run_transient_with_initial(&p, &disc, None, grid, RunOptions::default(), &|p| p[1]).unwrap();
        let last = s.last();
        assert!(last.coeffs.iter().all(|v| v.abs() < 1e-9));
        assert!((s.temperature(last, [0.3, 0.7]) - 0.7).abs() < 1e-9);
    }
}
