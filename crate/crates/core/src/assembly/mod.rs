//! Mass, stiffness and load assembly over an arbitrary index set.
//!
//! Integrals run cell by cell over the `2^{-J}` grid, where `J` is the
//! set's maximal level. Every basis function is smooth inside such a cell.
//! Each cell carries a composite rule on `2^s × 2^s` subcells, and the
//! material coefficients are sampled once per subcell at its midpoint.
//!
//! Hat functions are bilinear on every cell, so a cell is represented by
//! the 4 corner values of each function and 4×4 element matrices. Other
//! families are sampled at the quadrature points.

mod lifting;
mod quadrature;
mod sparse;

pub use lifting::{build_lifting, lifting_at, LiftingField, CORNERS};
pub use quadrature::{AxisRule, QuadratureRule, RuleKind};
pub use sparse::CsrMatrix;

use nalgebra::DMatrix;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::mra::{Basis, BasisFamily, Generator, IndexLookup, IndexSet, Orientation};
use crate::problem::{BoundaryCondition, Edge, ProblemDefinition, ProblemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("index set is empty")]
    EmptySet,
    #[error("basis family {basis} does not match index set family {set}")]
    FamilyMismatch { basis: BasisFamily, set: BasisFamily },
    #[error("family {0} is not H1-conforming; gradients are undefined")]
    NotH1Conforming(BasisFamily),
    #[error("invalid quadrature: {0}")]
    Quadrature(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// What a single pass over the cells accumulates.
#[derive(Debug, Clone, Copy)]
struct PassFlags {
    mass: bool,
    stiffness: bool,
    /// Weight the mass by `ρ c_p` (otherwise by 1).
    weighted_mass: bool,
}

#[derive(Debug, Clone)]
struct BilinearRef {
    /// Per subcell: `∫ N_a N_b`, `∫ ∂ξN_a ∂ξN_b`, `∫ ∂ξN_a ∂ηN_b`,
    /// `∫ ∂ηN_a ∂ηN_b` on the unit cell.
    mass: Vec<[[f64; 4]; 4]>,
    xx: Vec<[[f64; 4]; 4]>,
    xy: Vec<[[f64; 4]; 4]>,
    yy: Vec<[[f64; 4]; 4]>,
    /// Corner shape values at every quadrature point of the cell, point
    /// index `b * P1 + a`.
    shape: Vec<[f64; 4]>,
}

#[inline]
fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [(1.0 - xi) * (1.0 - eta), xi * (1.0 - eta), (1.0 - xi) * eta, xi * eta]
}

#[inline]
fn shape_grad(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta), -(1.0 - xi)],
        [1.0 - eta, -xi],
        [-eta, 1.0 - xi],
        [eta, xi],
    ]
}

impl BilinearRef {
    fn new(axis: &AxisRule) -> Self {
        let m = axis.subcells;
        let z = [[0.0; 4]; 4];
        let mut mass = vec![z; m * m];
        let mut xx = vec![z; m * m];
        let mut xy = vec![z; m * m];
        let mut yy = vec![z; m * m];
        let p1 = axis.points.len();
        let mut shapes = Vec::with_capacity(p1 * p1);
        for b in 0..p1 {
            for a in 0..p1 {
                let (xi, eta) = (axis.points[a], axis.points[b]);
                let w = axis.weights[a] * axis.weights[b];
                let sub = axis.subcell[b] * m + axis.subcell[a];
                let n = shape(xi, eta);
                let g = shape_grad(xi, eta);
                for i in 0..4 {
                    for j in 0..4 {
                        mass[sub][i][j] += w * n[i] * n[j];
                        xx[sub][i][j] += w * g[i][0] * g[j][0];
                        xy[sub][i][j] += w * g[i][0] * g[j][1];
                        yy[sub][i][j] += w * g[i][1] * g[j][1];
                    }
                }
                shapes.push(n);
            }
        }
        Self {
            mass,
            xx,
            xy,
            yy,
            shape: shapes,
        }
    }
}

/// Per-cell coefficient samples, one per subcell (row-major, `sy * m + sx`).
struct CellCoefficients {
    rho_cp: Vec<f64>,
    kxx: Vec<f64>,
    kxy: Vec<f64>,
    kyy: Vec<f64>,
}

/// A basis function restricted to one cell.
struct LocalFn {
    ordinal: usize,
    /// Factor values / slopes at the axis points (sampled) or at the two
    /// cell ends (bilinear).
    vx: Vec<f64>,
    dx: Vec<f64>,
    vy: Vec<f64>,
    dy: Vec<f64>,
}

/// Assembler bound to one basis, index set, problem and rule.
pub struct Assembler<'a> {
    basis: &'a Basis,
    set: &'a IndexSet,
    problem: &'a ProblemDefinition,
    quad: QuadratureRule,
    drop_tol: f64,
    lookup: IndexLookup,
    j_max: u32,
    axis: AxisRule,
    bilinear: Option<BilinearRef>,
}

impl<'a> Assembler<'a> {
    pub fn new(
        basis: &'a Basis,
        set: &'a IndexSet,
        problem: &'a ProblemDefinition,
        quad: QuadratureRule,
    ) -> Result<Self, AssemblyError> {
        if set.is_empty() {
            return Err(AssemblyError::EmptySet);
        }
        if basis.family() != set.family() {
            return Err(AssemblyError::FamilyMismatch {
                basis: basis.family(),
                set: set.family(),
            });
        }
        quad.validate().map_err(AssemblyError::Quadrature)?;
        for (e, bc) in problem.boundary.iter() {
            if let BoundaryCondition::Robin { h, .. } = bc {
                if !(*h >= 0.0) {
                    return Err(ProblemError::Invalid {
                        field: "h",
                        reason: format!("Robin coefficient on {} is negative", e.name()),
                    }
                    .into());
                }
            }
        }
        let axis = quad.axis();
        let bilinear = (basis.family() == BasisFamily::HierarchicalHat).then(|| BilinearRef::new(&axis));
        Ok(Self {
            basis,
            set,
            problem,
            quad,
            drop_tol: 0.0,
            lookup: IndexLookup::new(set),
            j_max: set.max_level(),
            axis,
            bilinear,
        })
    }

    /// Entries with `|v| <= tol` are not stored; 0 keeps every nonzero.
    pub fn with_drop_tolerance(mut self, tol: f64) -> Self {
        self.drop_tol = tol.max(0.0);
        self
    }

    pub fn quadrature(&self) -> QuadratureRule {
        self.quad
    }

    fn cells(&self) -> usize {
        1usize << self.j_max
    }

    fn h(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    /// Inclusive range of translations of `g` at level `j` whose support
    /// overlaps cell `c` with positive length.
    fn overlap_range(&self, g: Generator, j: u32, c: usize) -> (i64, i64) {
        let (lo, hi) = self.basis.family().mother_support(g);
        let shift = self.j_max - j;
        let c = c as i64;
        let k_min = (c >> shift) - hi + 1;
        let k_max = ((c + (1i64 << shift)) >> shift) - lo - 1;
        (k_min, k_max)
    }

    /// Ordinals of set members overlapping cell `(cx, cy)`.
    fn cell_members(&self, cx: usize, cy: usize, out: &mut Vec<usize>) {
        out.clear();
        for level in 0..self.j_max {
            for o in [
                Orientation::Scaling,
                Orientation::Horizontal,
                Orientation::Vertical,
                Orientation::Diagonal,
            ] {
                if !self.lookup.has_block(level, o) {
                    continue;
                }
                let (gx, gy) = o.generators();
                let (ax, bx) = self.overlap_range(gx, level, cx);
                let (ay, by) = self.overlap_range(gy, level, cy);
                for kx in ax..=bx {
                    for ky in ay..=by {
                        if let Some(i) = self.lookup.get(level, o, kx, ky) {
                            out.push(i);
                        }
                    }
                }
            }
        }
    }

    fn coefficients(&self, cx: usize, cy: usize) -> CellCoefficients {
        let m = self.axis.subcells;
        let h = self.h();
        let hs = h / m as f64;
        let mut c = CellCoefficients {
            rho_cp: Vec::with_capacity(m * m),
            kxx: Vec::with_capacity(m * m),
            kxy: Vec::with_capacity(m * m),
            kyy: Vec::with_capacity(m * m),
        };
        let mat = &self.problem.material;
        for sy in 0..m {
            for sx in 0..m {
                let p = [
                    cx as f64 * h + (sx as f64 + 0.5) * hs,
                    cy as f64 * h + (sy as f64 + 0.5) * hs,
                ];
                let k = mat.conductivity_unchecked(p);
                c.rho_cp.push(mat.heat_capacity_unchecked(p));
                c.kxx.push(k.kxx);
                c.kxy.push(k.kxy);
                c.kyy.push(k.kyy);
            }
        }
        c
    }

    /// Restriction of member `i` to cell `(cx, cy)`.
    fn local(&self, i: usize, cx: usize, cy: usize, need_slopes: bool) -> LocalFn {
        let w = self.set.get(i);
        let (gx, gy) = w.orientation.generators();
        let h = self.h();
        let (x0, y0) = (cx as f64 * h, cy as f64 * h);
        let b = self.basis;
        let sample = |g: Generator, k: i64, origin: f64| -> (Vec<f64>, Vec<f64>) {
            if self.bilinear.is_some() {
                let v = vec![b.factor(g, w.level, k, origin), b.factor(g, w.level, k, origin + h)];
                (v, Vec::new())
            } else {
                let pts = &self.axis.points;
                let v = pts.iter().map(|t| b.factor(g, w.level, k, origin + t * h)).collect();
                let d = if need_slopes {
                    pts.iter()
                        .map(|t| b.factor_slope(g, w.level, k, origin + t * h))
                        .collect()
                } else {
                    Vec::new()
                };
                (v, d)
            }
        };
        let (vx, dx) = sample(gx, w.kx, x0);
        let (vy, dy) = sample(gy, w.ky, y0);
        LocalFn {
            ordinal: i,
            vx,
            dx,
            vy,
            dy,
        }
    }

    /// Corner values of a bilinear local function, corner order as
    /// [`shape`].
    fn corners(f: &LocalFn) -> [f64; 4] {
        [
            f.vx[0] * f.vy[0],
            f.vx[1] * f.vy[0],
            f.vx[0] * f.vy[1],
            f.vx[1] * f.vy[1],
        ]
    }

    /// Element matrices `(E_M, E_K)` for the bilinear corner shapes of one
    /// cell.
    fn element_matrices(&self, coef: &CellCoefficients, weighted_mass: bool) -> ([[f64; 4]; 4], [[f64; 4]; 4]) {
        let r = self.bilinear.as_ref().expect("bilinear path");
        let h2 = self.h() * self.h();
        let mut em = [[0.0; 4]; 4];
        let mut ek = [[0.0; 4]; 4];
        for s in 0..coef.kxx.len() {
            let rc = if weighted_mass { coef.rho_cp[s] } else { 1.0 };
            let (kxx, kxy, kyy) = (coef.kxx[s], coef.kxy[s], coef.kyy[s]);
            for a in 0..4 {
                for b in 0..4 {
                    em[a][b] += rc * h2 * r.mass[s][a][b];
                    ek[a][b] += kxx * r.xx[s][a][b] + kxy * (r.xy[s][a][b] + r.xy[s][b][a]) + kyy * r.yy[s][a][b];
                }
            }
        }
        (em, ek)
    }

    /// Values and gradients at all cell quadrature points (point index
    /// `b * P1 + a`), one row per local function.
    fn sampled_rows(&self, fns: &[LocalFn], slopes: bool) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let p1 = self.axis.points.len();
        let np = p1 * p1;
        let nf = fns.len();
        let mut v = DMatrix::zeros(nf, np);
        let (mut gx, mut gy) = if slopes {
            (DMatrix::zeros(nf, np), DMatrix::zeros(nf, np))
        } else {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        };
        for (r, f) in fns.iter().enumerate() {
            for b in 0..p1 {
                for a in 0..p1 {
                    let p = b * p1 + a;
                    v[(r, p)] = f.vx[a] * f.vy[b];
                    if slopes {
                        gx[(r, p)] = f.dx[a] * f.vy[b];
                        gy[(r, p)] = f.vx[a] * f.dy[b];
                    }
                }
            }
        }
        (v, gx, gy)
    }

    /// Quadrature weights (physical area) at the cell points and the subcell
    /// of each point.
    fn point_weights(&self) -> (Vec<f64>, Vec<usize>) {
        let p1 = self.axis.points.len();
        let m = self.axis.subcells;
        let h2 = self.h() * self.h();
        let mut w = Vec::with_capacity(p1 * p1);
        let mut sub = Vec::with_capacity(p1 * p1);
        for b in 0..p1 {
            for a in 0..p1 {
                w.push(self.axis.weights[a] * self.axis.weights[b] * h2);
                sub.push(self.axis.subcell[b] * m + self.axis.subcell[a]);
            }
        }
        (w, sub)
    }

    fn point_coords(&self, cx: usize, cy: usize) -> Vec<[f64; 2]> {
        let p1 = self.axis.points.len();
        let h = self.h();
        let mut out = Vec::with_capacity(p1 * p1);
        for b in 0..p1 {
            for a in 0..p1 {
                out.push([
                    (cx as f64 + self.axis.points[a]) * h,
                    (cy as f64 + self.axis.points[b]) * h,
                ]);
            }
        }
        out
    }

    fn pass_matrices(&self, flags: PassFlags) -> Result<(Option<CsrMatrix>, Option<CsrMatrix>), AssemblyError> {
        if flags.stiffness && !self.basis.family().is_h1_conforming() {
            return Err(AssemblyError::NotH1Conforming(self.basis.family()));
        }
        let n = self.set.len();
        let mut acc: FxHashMap<(u32, u32), [f64; 2]> = FxHashMap::default();
        let cells = self.cells();
        let (pw, psub) = self.point_weights();
        let mut members = Vec::new();
        for cy in 0..cells {
            for cx in 0..cells {
                self.cell_members(cx, cy, &mut members);
                if members.is_empty() {
                    continue;
                }
                let coef = self.coefficients(cx, cy);
                let fns: Vec<LocalFn> = members
                    .iter()
                    .map(|&i| self.local(i, cx, cy, flags.stiffness))
                    .collect();
                let nf = fns.len();
                let (lm, lk) = if self.bilinear.is_some() {
                    let (em, ek) = self.element_matrices(&coef, flags.weighted_mass);
                    let c = DMatrix::from_fn(nf, 4, |r, a| Self::corners(&fns[r])[a]);
                    let to_mat = |e: &[[f64; 4]; 4]| DMatrix::from_fn(4, 4, |a, b| e[a][b]);
                    let lm = flags.mass.then(|| &c * to_mat(&em) * c.transpose());
                    let lk = flags.stiffness.then(|| &c * to_mat(&ek) * c.transpose());
                    (lm, lk)
                } else {
                    let (v, gx, gy) = self.sampled_rows(&fns, flags.stiffness);
                    let scale_cols = |m: &DMatrix<f64>, w: &dyn Fn(usize) -> f64| {
                        let mut out = m.clone();
                        for (p, mut col) in out.column_iter_mut().enumerate() {
                            col *= w(p);
                        }
                        out
                    };
                    let lm = flags.mass.then(|| {
                        let wv = scale_cols(&v, &|p| {
                            pw[p] * if flags.weighted_mass { coef.rho_cp[psub[p]] } else { 1.0 }
                        });
                        &wv * v.transpose()
                    });
                    let lk = flags.stiffness.then(|| {
                        let fx = scale_cols(&gx, &|p| pw[p] * coef.kxx[psub[p]])
                            + scale_cols(&gy, &|p| pw[p] * coef.kxy[psub[p]]);
                        let fy = scale_cols(&gx, &|p| pw[p] * coef.kxy[psub[p]])
                            + scale_cols(&gy, &|p| pw[p] * coef.kyy[psub[p]]);
                        &fx * gx.transpose() + &fy * gy.transpose()
                    });
                    (lm, lk)
                };
                for a in 0..nf {
                    for b in a..nf {
                        let (ia, ib) = (fns[a].ordinal, fns[b].ordinal);
                        let key = (ia.min(ib) as u32, ia.max(ib) as u32);
                        let e = acc.entry(key).or_insert([0.0; 2]);
                        if let Some(m) = &lm {
                            e[0] += m[(a, b)];
                        }
                        if let Some(k) = &lk {
                            e[1] += k[(a, b)];
                        }
                    }
                }
            }
        }
        if flags.stiffness {
            self.robin_matrix(&mut acc);
        }
        let split = |slot: usize| -> FxHashMap<(u32, u32), f64> { acc.iter().map(|(k, v)| (*k, v[slot])).collect() };
        let m = flags.mass.then(|| CsrMatrix::from_upper(n, &split(0), self.drop_tol));
        let k = flags
            .stiffness
            .then(|| CsrMatrix::from_upper(n, &split(1), self.drop_tol));
        Ok((m, k))
    }

    /// 1-D rule along an edge: positions in `[0, 1]` and weights, grouped by
    /// boundary cell.
    fn edge_points(&self, c: usize) -> Vec<(f64, f64)> {
        let h = self.h();
        self.axis
            .points
            .iter()
            .zip(&self.axis.weights)
            .map(|(t, w)| ((c as f64 + t) * h, w * h))
            .collect()
    }

    fn edge_cell(&self, e: Edge, c: usize) -> (usize, usize) {
        let last = self.cells() - 1;
        match e {
            Edge::Bottom => (c, 0),
            Edge::Top => (c, last),
            Edge::Left => (0, c),
            Edge::Right => (last, c),
        }
    }

    fn robin_matrix(&self, acc: &mut FxHashMap<(u32, u32), [f64; 2]>) {
        let mut members = Vec::new();
        for (e, bc) in self.problem.boundary.iter() {
            let h_coef = match bc {
                BoundaryCondition::Robin { h, .. } if *h > 0.0 => *h,
                _ => continue,
            };
            for c in 0..self.cells() {
                let (cx, cy) = self.edge_cell(e, c);
                self.cell_members(cx, cy, &mut members);
                let pts = self.edge_points(c);
                let vals: Vec<Vec<f64>> = members
                    .iter()
                    .map(|&i| {
                        let w = self.set.get(i);
                        pts.iter().map(|(s, _)| self.basis.eval(&w, e.point(*s))).collect()
                    })
                    .collect();
                for a in 0..members.len() {
                    for b in a..members.len() {
                        let s: f64 = pts
                            .iter()
                            .enumerate()
                            .map(|(p, (_, w))| w * h_coef * vals[a][p] * vals[b][p])
                            .sum();
                        if s != 0.0 {
                            let (ia, ib) = (members[a], members[b]);
                            let key = (ia.min(ib) as u32, ia.max(ib) as u32);
                            acc.entry(key).or_insert([0.0; 2])[1] += s;
                        }
                    }
                }
            }
        }
    }

    /// Mass and stiffness in one pass.
    pub fn matrices(&self) -> Result<(CsrMatrix, CsrMatrix), AssemblyError> {
        let (m, k) = self.pass_matrices(PassFlags {
            mass: true,
            stiffness: true,
            weighted_mass: true,
        })?;
        Ok((m.expect("mass requested"), k.expect("stiffness requested")))
    }

    pub fn mass(&self) -> Result<CsrMatrix, AssemblyError> {
        let (m, _) = self.pass_matrices(PassFlags {
            mass: true,
            stiffness: false,
            weighted_mass: true,
        })?;
        Ok(m.expect("mass requested"))
    }

    pub fn stiffness(&self) -> Result<CsrMatrix, AssemblyError> {
        let (_, k) = self.pass_matrices(PassFlags {
            mass: false,
            stiffness: true,
            weighted_mass: true,
        })?;
        Ok(k.expect("stiffness requested"))
    }

    /// Unweighted Gram matrix `∫ ψ_λ ψ_μ`.
    pub fn gram(&self) -> Result<CsrMatrix, AssemblyError> {
        let (m, _) = self.pass_matrices(PassFlags {
            mass: true,
            stiffness: false,
            weighted_mass: false,
        })?;
        Ok(m.expect("mass requested"))
    }

    /// `∫ f ψ_λ` for every member.
    pub fn inner_products(&self, f: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.set.len()];
        let cells = self.cells();
        let (pw, _) = self.point_weights();
        let mut members = Vec::new();
        for cy in 0..cells {
            for cx in 0..cells {
                self.cell_members(cx, cy, &mut members);
                if members.is_empty() {
                    continue;
                }
                let pts = self.point_coords(cx, cy);
                let fw: Vec<f64> = pts.iter().zip(&pw).map(|(p, w)| w * f(*p)).collect();
                self.scatter_point_load(&members, cx, cy, &fw, &mut out);
            }
        }
        out
    }

    /// Adds `Σ_p fw[p] ψ_i(p)` to `out[i]` for the cell members.
    fn scatter_point_load(&self, members: &[usize], cx: usize, cy: usize, fw: &[f64], out: &mut [f64]) {
        if let Some(r) = &self.bilinear {
            let mut l = [0.0; 4];
            for (p, n) in r.shape.iter().enumerate() {
                for a in 0..4 {
                    l[a] += fw[p] * n[a];
                }
            }
            for &i in members {
                let c = Self::corners(&self.local(i, cx, cy, false));
                out[i] += c[0] * l[0] + c[1] * l[1] + c[2] * l[2] + c[3] * l[3];
            }
        } else {
            let p1 = self.axis.points.len();
            for &i in members {
                let f = self.local(i, cx, cy, false);
                let mut s = 0.0;
                for b in 0..p1 {
                    for a in 0..p1 {
                        s += fw[b * p1 + a] * f.vx[a] * f.vy[b];
                    }
                }
                out[i] += s;
            }
        }
    }

    /// Load vector at time `t`: `ℓ(ψ_λ, t) - a(T_g, ψ_λ) - m(∂_t T_g, ψ_λ)`.
    pub fn load(&self, t: f64, lifting: &LiftingField) -> Result<Vec<f64>, AssemblyError> {
        let needs_grad = lifting.has_gradient();
        if needs_grad && !self.basis.family().is_h1_conforming() {
            return Err(AssemblyError::NotH1Conforming(self.basis.family()));
        }
        let mut out = vec![0.0; self.set.len()];
        let source = &self.problem.source;
        let has_rate = lifting.rates != [0.0; 4];
        let cells = self.cells();
        let (pw, psub) = self.point_weights();
        let mut members = Vec::new();
        let lift_active = needs_grad || has_rate || lifting.values != [0.0; 4];
        if !source.is_zero() || lift_active {
            for cy in 0..cells {
                for cx in 0..cells {
                    self.cell_members(cx, cy, &mut members);
                    if members.is_empty() {
                        continue;
                    }
                    let pts = self.point_coords(cx, cy);
                    let coef = (lift_active).then(|| self.coefficients(cx, cy));
                    if let Some(_r) = &self.bilinear {
                        // source part via shape moments
                        if !source.is_zero() {
                            let fw: Vec<f64> = pts
                                .iter()
                                .zip(&pw)
                                .map(|(p, w)| w * source.eval(p[0], p[1], t))
                                .collect();
                            self.scatter_point_load(&members, cx, cy, &fw, &mut out);
                        }
                        if let Some(coef) = &coef {
                            let (em, ek) = self.element_matrices(coef, true);
                            let h = self.h();
                            let corners = [
                                [cx as f64 * h, cy as f64 * h],
                                [(cx + 1) as f64 * h, cy as f64 * h],
                                [cx as f64 * h, (cy + 1) as f64 * h],
                                [(cx + 1) as f64 * h, (cy + 1) as f64 * h],
                            ];
                            let tv: Vec<f64> = corners.iter().map(|p| lifting.value(*p)).collect();
                            let tr: Vec<f64> = corners.iter().map(|p| lifting.rate(*p)).collect();
                            let mut w = [0.0; 4];
                            for a in 0..4 {
                                for b in 0..4 {
                                    w[a] += ek[a][b] * tv[b] + em[a][b] * tr[b];
                                }
                            }
                            for &i in &members {
                                let c = Self::corners(&self.local(i, cx, cy, false));
                                out[i] -= c[0] * w[0] + c[1] * w[1] + c[2] * w[2] + c[3] * w[3];
                            }
                        }
                    } else {
                        let fns: Vec<LocalFn> = members.iter().map(|&i| self.local(i, cx, cy, needs_grad)).collect();
                        let p1 = self.axis.points.len();
                        // per-point weights for value and gradient tests
                        let mut fv = vec![0.0; pts.len()];
                        let mut fgx = vec![0.0; pts.len()];
                        let mut fgy = vec![0.0; pts.len()];
                        for (p, x) in pts.iter().enumerate() {
                            let mut v = if source.is_zero() {
                                0.0
                            } else {
                                source.eval(x[0], x[1], t)
                            };
                            if let Some(coef) = &coef {
                                let s = psub[p];
                                v -= coef.rho_cp[s] * lifting.rate(*x);
                                if needs_grad {
                                    let g = lifting.grad(*x);
                                    fgx[p] = -pw[p] * (coef.kxx[s] * g[0] + coef.kxy[s] * g[1]);
                                    fgy[p] = -pw[p] * (coef.kxy[s] * g[0] + coef.kyy[s] * g[1]);
                                }
                            }
                            fv[p] = pw[p] * v;
                        }
                        for f in &fns {
                            let mut s = 0.0;
                            for b in 0..p1 {
                                for a in 0..p1 {
                                    let p = b * p1 + a;
                                    s += fv[p] * f.vx[a] * f.vy[b];
                                    if needs_grad {
                                        s += fgx[p] * f.dx[a] * f.vy[b] + fgy[p] * f.vx[a] * f.dy[b];
                                    }
                                }
                            }
                            out[f.ordinal] += s;
                        }
                    }
                }
            }
        }
        self.boundary_load(t, lifting, &mut out);
        Ok(out)
    }

    fn boundary_load(&self, t: f64, lifting: &LiftingField, out: &mut [f64]) {
        let mut members = Vec::new();
        for (e, bc) in self.problem.boundary.iter() {
            // g(p) is the density multiplying ψ on this edge.
            let density: Box<dyn Fn([f64; 2]) -> f64 + '_> = match bc {
                BoundaryCondition::Neumann(g) if !g.is_zero() => Box::new(move |p: [f64; 2]| g.eval(p[0], p[1], t)),
                BoundaryCondition::Robin { h, t_inf } if *h > 0.0 => {
                    let h = *h;
                    Box::new(move |p: [f64; 2]| h * (t_inf.eval(p[0], p[1], t) - lifting.value(p)))
                }
                _ => continue,
            };
            for c in 0..self.cells() {
                let (cx, cy) = self.edge_cell(e, c);
                self.cell_members(cx, cy, &mut members);
                let pts = self.edge_points(c);
                let gw: Vec<(f64, [f64; 2])> = pts
                    .iter()
                    .map(|(s, w)| {
                        let p = e.point(*s);
                        (w * density(p), p)
                    })
                    .collect();
                for &i in &members {
                    let w = self.set.get(i);
                    let s: f64 = gw.iter().map(|(gw, p)| gw * self.basis.eval(&w, *p)).sum();
                    out[i] += s;
                }
            }
        }
    }
}

/// `M_λμ = ∫ ρ c_p ψ_μ ψ_λ`.
pub fn assemble_mass(
    set: &IndexSet,
    basis: &Basis,
    problem: &ProblemDefinition,
    quad: QuadratureRule,
) -> Result<CsrMatrix, AssemblyError> {
    Assembler::new(basis, set, problem, quad)?.mass()
}

/// `K_λμ = ∫ ∇ψ_λᵀ K ∇ψ_μ + ∫_{Γ_R} h ψ_λ ψ_μ`.
pub fn assemble_stiffness(
    set: &IndexSet,
    basis: &Basis,
    problem: &ProblemDefinition,
    quad: QuadratureRule,
) -> Result<CsrMatrix, AssemblyError> {
    Assembler::new(basis, set, problem, quad)?.stiffness()
}

pub fn assemble_load(
    set: &IndexSet,
    basis: &Basis,
    problem: &ProblemDefinition,
    quad: QuadratureRule,
    t: f64,
    lifting: &LiftingField,
) -> Result<Vec<f64>, AssemblyError> {
    Assembler::new(basis, set, problem, quad)?.load(t, lifting)
}
