//! Vertex-centred finite volumes on the uniform `n × n` grid.
//!
//! Each node owns its dual cell. The conductance between two neighbours
//! combines the material along the connecting segment in series (harmonic
//! mean) and across the dual face in parallel (arithmetic mean), which is
//! exact for layered media whose interfaces lie on grid lines.

use super::{ReferenceError, UniformGridField};
use crate::problem::{BoundaryCondition, Edge, ProblemDefinition};

#[derive(Clone, Copy)]
pub struct FdOptions<'a> {
    /// Relative residual target of the inner CG solves.
    pub cg_tol: f64,
    /// Per-solve iteration cap; `None` means 20 times the node count.
    pub max_iter: Option<usize>,
    /// Stop once the nodal update drops below this value.
    pub steady_tol: Option<f64>,
    /// Overrides the problem's initial temperature.
    pub initial: Option<&'a dyn Fn([f64; 2]) -> f64>,
}

impl Default for FdOptions<'_> {
    fn default() -> Self {
        Self {
            cg_tol: 1e-12,
            max_iter: None,
            steady_tol: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdStats {
    pub steps: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
}

/// Samples per segment (series) and per half face (parallel).
const ALONG: usize = 4;
const ACROSS: usize = 2;

struct Grid<'p> {
    n: usize,
    h: f64,
    problem: &'p ProblemDefinition,
    /// Between `(ix, iy)` and `(ix + 1, iy)`, index `iy * (n - 1) + ix`.
    cx: Vec<f64>,
    /// Between `(ix, iy)` and `(ix, iy + 1)`, index `iy * n + ix`.
    cy: Vec<f64>,
    /// `∫ ρ c_p` over the dual cell.
    cap: Vec<f64>,
    /// Robin `h · |dual edge|`.
    robin: Vec<f64>,
    fixed: Vec<bool>,
}

fn harmonic(samples: impl Iterator<Item = f64>) -> f64 {
    let mut inv = 0.0;
    let mut count = 0.0;
    for k in samples {
        inv += 1.0 / k;
        count += 1.0;
    }
    count / inv
}

/// Edges a node lies on.
fn node_edges(ix: usize, iy: usize, n: usize) -> impl Iterator<Item = Edge> {
    let last = n - 1;
    [
        (iy == 0, Edge::Bottom),
        (ix == last, Edge::Right),
        (iy == last, Edge::Top),
        (ix == 0, Edge::Left),
    ]
    .into_iter()
    .filter_map(|(on, e)| on.then_some(e))
}

impl<'p> Grid<'p> {
    fn new(problem: &'p ProblemDefinition, n: usize) -> Result<Self, ReferenceError> {
        if n < 17 {
            return Err(ReferenceError::Invalid(format!(
                "reference grid needs n >= 17, got {n}"
            )));
        }
        let m = &problem.material;
        for phase in [&m.matrix, &m.secondary] {
            if phase.conductivity.kxy != 0.0 {
                return Err(ReferenceError::Unsupported(
                    "off-diagonal conductivity (5-point stencil)".into(),
                ));
            }
        }
        let h = 1.0 / (n - 1) as f64;
        let kxx = |p: [f64; 2]| m.conductivity_unchecked(p).kxx;
        let kyy = |p: [f64; 2]| m.conductivity_unchecked(p).kyy;

        // Conductance of a segment from `a` along direction `dir` (0 = x),
        // integrating over the half faces that exist on either side.
        let conductance = |a: [f64; 2], dir: usize, k: &dyn Fn([f64; 2]) -> f64| -> f64 {
            let other = 1 - dir;
            let mut total = 0.0;
            for side in [-1.0, 1.0] {
                let edge = a[other] + side * 0.5 * h;
                if edge < -1e-12 || edge > 1.0 + 1e-12 {
                    continue;
                }
                let mut sum = 0.0;
                for c in 0..ACROSS {
                    let off = side * 0.5 * h * (c as f64 + 0.5) / ACROSS as f64;
                    sum += harmonic((0..ALONG).map(|s| {
                        let mut p = a;
                        p[dir] += h * (s as f64 + 0.5) / ALONG as f64;
                        p[other] += off;
                        k(p)
                    }));
                }
                total += 0.5 * sum / ACROSS as f64;
            }
            total
        };

        let mut cx = vec![0.0; (n - 1) * n];
        let mut cy = vec![0.0; n * (n - 1)];
        for iy in 0..n {
            for ix in 0..n {
                let a = [ix as f64 * h, iy as f64 * h];
                if ix + 1 < n {
                    cx[iy * (n - 1) + ix] = conductance(a, 0, &kxx);
                }
                if iy + 1 < n {
                    cy[iy * n + ix] = conductance(a, 1, &kyy);
                }
            }
        }

        let mut cap = vec![0.0; n * n];
        let mut robin = vec![0.0; n * n];
        let mut fixed = vec![false; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let i = iy * n + ix;
                let c = [ix as f64 * h, iy as f64 * h];
                for (dx, dy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                    let q = [c[0] + 0.25 * h * dx, c[1] + 0.25 * h * dy];
                    if (0.0..=1.0).contains(&q[0]) && (0.0..=1.0).contains(&q[1]) {
                        cap[i] += 0.25 * h * h * m.heat_capacity_unchecked(q);
                    }
                }
                for e in node_edges(ix, iy, n) {
                    match problem.boundary.get(e) {
                        BoundaryCondition::Dirichlet(_) => fixed[i] = true,
                        BoundaryCondition::Robin { h: hr, .. } => {
                            robin[i] += hr * Self::edge_share(ix, iy, n, e, h);
                        }
                        BoundaryCondition::Neumann(_) => {}
                    }
                }
            }
        }
        Ok(Self {
            n,
            h,
            problem,
            cx,
            cy,
            cap,
            robin,
            fixed,
        })
    }

    /// Length of the node's dual cell along edge `e`.
    fn edge_share(ix: usize, iy: usize, n: usize, e: Edge, h: f64) -> f64 {
        let along = match e {
            Edge::Bottom | Edge::Top => ix,
            Edge::Left | Edge::Right => iy,
        };
        if along == 0 || along == n - 1 {
            0.5 * h
        } else {
            h
        }
    }

    /// Dirichlet value at a fixed node; averaged where two edges meet.
    fn dirichlet_value(&self, ix: usize, iy: usize, t: f64) -> f64 {
        let p = [ix as f64 * self.h, iy as f64 * self.h];
        let (mut s, mut c) = (0.0, 0.0);
        for e in node_edges(ix, iy, self.n) {
            if let BoundaryCondition::Dirichlet(g) = self.problem.boundary.get(e) {
                s += g.eval(p[0], p[1], t);
                c += 1.0;
            }
        }
        s / c
    }

    /// Source, Neumann and Robin data integrated over each dual cell.
    fn load(&self, t: f64) -> Vec<f64> {
        let n = self.n;
        let mut b = vec![0.0; n * n];
        let src = &self.problem.source;
        for iy in 0..n {
            for ix in 0..n {
                let i = iy * n + ix;
                let p = [ix as f64 * self.h, iy as f64 * self.h];
                if !src.is_zero() {
                    let wx = if ix == 0 || ix == n - 1 { 0.5 } else { 1.0 };
                    let wy = if iy == 0 || iy == n - 1 { 0.5 } else { 1.0 };
                    b[i] += src.eval(p[0], p[1], t) * wx * wy * self.h * self.h;
                }
                for e in node_edges(ix, iy, n) {
                    let len = Self::edge_share(ix, iy, n, e, self.h);
                    match self.problem.boundary.get(e) {
                        BoundaryCondition::Neumann(g) => b[i] += g.eval(p[0], p[1], t) * len,
                        BoundaryCondition::Robin { h, t_inf } => b[i] += h * t_inf.eval(p[0], p[1], t) * len,
                        BoundaryCondition::Dirichlet(_) => {}
                    }
                }
            }
        }
        b
    }

    /// `out = s·C v + τ·A v` on free nodes, 0 on fixed nodes.
    fn apply(&self, v: &[f64], out: &mut [f64], s: f64, tau: f64) {
        let n = self.n;
        for iy in 0..n {
            for ix in 0..n {
                let i = iy * n + ix;
                if self.fixed[i] {
                    out[i] = 0.0;
                    continue;
                }
                let mut a = self.robin[i] * v[i];
                if ix > 0 {
                    a += self.cx[iy * (n - 1) + ix - 1] * (v[i] - v[i - 1]);
                }
                if ix + 1 < n {
                    a += self.cx[iy * (n - 1) + ix] * (v[i] - v[i + 1]);
                }
                if iy > 0 {
                    a += self.cy[(iy - 1) * n + ix] * (v[i] - v[i - n]);
                }
                if iy + 1 < n {
                    a += self.cy[iy * n + ix] * (v[i] - v[i + n]);
                }
                out[i] = s * self.cap[i] * v[i] + tau * a;
            }
        }
    }

    fn diagonal(&self, s: f64, tau: f64) -> Vec<f64> {
        let n = self.n;
        (0..n * n)
            .map(|i| {
                let (ix, iy) = (i % n, i / n);
                let mut d = self.robin[i];
                if ix > 0 {
                    d += self.cx[iy * (n - 1) + ix - 1];
                }
                if ix + 1 < n {
                    d += self.cx[iy * (n - 1) + ix];
                }
                if iy > 0 {
                    d += self.cy[(iy - 1) * n + ix];
                }
                if iy + 1 < n {
                    d += self.cy[iy * n + ix];
                }
                s * self.cap[i] + tau * d
            })
            .collect()
    }

    /// Solves `(s C + τ A) x = rhs` on the free nodes, starting from `x`,
    /// whose fixed entries hold the Dirichlet values.
    fn solve(&self, x: &mut [f64], rhs: &[f64], s: f64, tau: f64, opts: &FdOptions) -> Result<usize, ReferenceError> {
        let len = x.len();
        // Move the fixed values to the right-hand side.
        let fixed_part: Vec<f64> = (0..len).map(|i| if self.fixed[i] { x[i] } else { 0.0 }).collect();
        let mut tmp = vec![0.0; len];
        self.apply_full(&fixed_part, &mut tmp, tau);
        let b: Vec<f64> = (0..len)
            .map(|i| if self.fixed[i] { 0.0 } else { rhs[i] - tmp[i] })
            .collect();
        let mut u: Vec<f64> = (0..len).map(|i| if self.fixed[i] { 0.0 } else { x[i] }).collect();
        let inv: Vec<f64> = self
            .diagonal(s, tau)
            .iter()
            .zip(&self.fixed)
            .map(|(d, f)| if *f { 0.0 } else { 1.0 / d })
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let b_norm = dot(&b, &b).sqrt();
        let mut iters = 0;
        if b_norm > 0.0 {
            self.apply(&u, &mut tmp, s, tau);
            let mut r: Vec<f64> = b.iter().zip(&tmp).map(|(b, a)| b - a).collect();
            let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, d)| r * d).collect();
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            let cap = opts.max_iter.unwrap_or(20 * len);
            let mut rel = dot(&r, &r).sqrt() / b_norm;
            while rel > opts.cg_tol {
                if iters >= cap {
                    return Err(ReferenceError::Solve(format!(
                        "CG stalled at relative residual {rel:e} after {iters} iterations"
                    )));
                }
                self.apply(&p, &mut tmp, s, tau);
                let curv = dot(&p, &tmp);
                if !(curv > 0.0) {
                    return Err(ReferenceError::Solve(
                        "singular system: no Dirichlet or Robin edge in a steady solve".into(),
                    ));
                }
                let alpha = rz / curv;
                for i in 0..len {
                    u[i] += alpha * p[i];
                    r[i] -= alpha * tmp[i];
                }
                for i in 0..len {
                    z[i] = r[i] * inv[i];
                }
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..len {
                    p[i] = z[i] + beta * p[i];
                }
                rel = dot(&r, &r).sqrt() / b_norm;
                iters += 1;
            }
        } else {
            u.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..len {
            if !self.fixed[i] {
                x[i] = u[i];
            }
        }
        Ok(iters)
    }

    /// `τ A v` restricted to free rows, for a `v` supported on fixed nodes.
    fn apply_full(&self, v: &[f64], out: &mut [f64], tau: f64) {
        self.apply(v, out, 0.0, tau);
    }

    fn set_fixed(&self, x: &mut [f64], t: f64) {
        let n = self.n;
        for iy in 0..n {
            for ix in 0..n {
                if self.fixed[iy * n + ix] {
                    x[iy * n + ix] = self.dirichlet_value(ix, iy, t);
                }
            }
        }
    }
}

/// Backward-Euler trajectory up to `t_final`; returns the last field.
pub fn fd_solve_transient(
    problem: &ProblemDefinition,
    n: usize,
    dt: f64,
    t_final: f64,
) -> Result<UniformGridField, ReferenceError> {
    fd_solve_transient_with(problem, n, dt, t_final, &FdOptions::default()).map(|(f, _)| f)
}

pub fn fd_solve_transient_with(
    problem: &ProblemDefinition,
    n: usize,
    dt: f64,
    t_final: f64,
    opts: &FdOptions,
) -> Result<(UniformGridField, FdStats), ReferenceError> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(ReferenceError::Invalid(format!(
            "need dt > 0 and t_final > 0, got {dt}, {t_final}"
        )));
    }
    let steps = (t_final / dt).round() as usize;
    if steps == 0 || (steps as f64 * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
        return Err(ReferenceError::Invalid(format!(
            "t_final = {t_final} is not a multiple of dt = {dt}"
        )));
    }
    let g = Grid::new(problem, n)?;
    let h = g.h;
    let mut x: Vec<f64> = (0..n * n)
        .map(|i| {
            let p = [(i % n) as f64 * h, (i / n) as f64 * h];
            match opts.initial {
                Some(f) => f(p),
                None => problem.initial.eval(p[0], p[1], 0.0),
            }
        })
        .collect();
    let static_data = problem.source.is_time_independent()
        && problem.boundary.iter().all(|(_, bc)| match bc {
            BoundaryCondition::Dirichlet(g) | BoundaryCondition::Neumann(g) => g.is_time_independent(),
            BoundaryCondition::Robin { t_inf, .. } => t_inf.is_time_independent(),
        });
    let mut load = None;
    let mut stats = FdStats::default();
    for step in 1..=steps {
        let t = step as f64 * dt;
        if load.is_none() || !static_data {
            load = Some(g.load(t));
        }
        let b = load.as_ref().expect("load computed above");
        let rhs: Vec<f64> = (0..n * n).map(|i| g.cap[i] * x[i] + dt * b[i]).collect();
        let prev = x.clone();
        g.set_fixed(&mut x, t);
        let it = g.solve(&mut x, &rhs, 1.0, dt, opts)?;
        stats.steps = step;
        stats.total_iterations += it;
        stats.max_iterations = stats.max_iterations.max(it);
        if let Some(tol) = opts.steady_tol {
            let change = x.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if change <= tol {
                break;
            }
        }
    }
    Ok((UniformGridField::new(n, x)?, stats))
}

/// Steady field for the data at `problem.t_final`.
pub fn fd_solve_steady(
    problem: &ProblemDefinition,
    n: usize,
    opts: &FdOptions,
) -> Result<(UniformGridField, FdStats), ReferenceError> {
    let g = Grid::new(problem, n)?;
    let t = problem.t_final;
    let mut x = vec![0.0; n * n];
    g.set_fixed(&mut x, t);
    let b = g.load(t);
    let it = g.solve(&mut x, &b, 0.0, 1.0, opts)?;
    Ok((
        UniformGridField::new(n, x)?,
        FdStats {
            steps: 0,
            total_iterations: it,
            max_iterations: it,
        },
    ))
}
