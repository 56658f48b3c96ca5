//! Bilinear extension of Dirichlet data from the four corners.

use crate::problem::{BoundaryCondition, Edge, ProblemDefinition};

/// Corner order: (0,0), (1,0), (0,1), (1,1).
pub const CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];

/// Edges meeting at each corner.
const CORNER_EDGES: [[Edge; 2]; 4] = [
    [Edge::Bottom, Edge::Left],
    [Edge::Bottom, Edge::Right],
    [Edge::Top, Edge::Left],
    [Edge::Top, Edge::Right],
];

/// `T_g` at one instant: bilinear in space with corner values `values` and
/// time derivative with corner values `rates`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftingField {
    pub values: [f64; 4],
    pub rates: [f64; 4],
    /// Corners where two Dirichlet edges disagree.
    pub conflicts: [bool; 4],
}

fn bilinear(c: &[f64; 4], p: [f64; 2]) -> f64 {
    let [x, y] = p;
    c[0] * (1.0 - x) * (1.0 - y) + c[1] * x * (1.0 - y) + c[2] * (1.0 - x) * y + c[3] * x * y
}

fn bilinear_grad(c: &[f64; 4], p: [f64; 2]) -> [f64; 2] {
    let [x, y] = p;
    [
        (c[1] - c[0]) * (1.0 - y) + (c[3] - c[2]) * y,
        (c[2] - c[0]) * (1.0 - x) + (c[3] - c[1]) * x,
    ]
}

impl LiftingField {
    pub fn zero() -> Self {
        Self {
            values: [0.0; 4],
            rates: [0.0; 4],
            conflicts: [false; 4],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values == [0.0; 4] && self.rates == [0.0; 4]
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        bilinear(&self.values, p)
    }

    pub fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        bilinear_grad(&self.values, p)
    }

    pub fn rate(&self, p: [f64; 2]) -> f64 {
        bilinear(&self.rates, p)
    }

    pub fn has_gradient(&self) -> bool {
        let v = &self.values;
        !(v[0] == v[1] && v[1] == v[2] && v[2] == v[3])
    }
}

/// Lifting at time `t` without logging.
pub fn lifting_at(problem: &ProblemDefinition, t: f64) -> LiftingField {
    let mut out = LiftingField::zero();
    for (c, corner) in CORNERS.iter().enumerate() {
        let mut vals = Vec::with_capacity(2);
        let mut rates = Vec::with_capacity(2);
        for e in CORNER_EDGES[c] {
            if let BoundaryCondition::Dirichlet(g) = problem.boundary.get(e) {
                vals.push(g.eval(corner[0], corner[1], t));
                rates.push(g.dt().eval(corner[0], corner[1], t));
            }
        }
        if !vals.is_empty() {
            let n = vals.len() as f64;
            out.values[c] = vals.iter().sum::<f64>() / n;
            out.rates[c] = rates.iter().sum::<f64>() / n;
            if vals.len() == 2 && (vals[0] - vals[1]).abs() > 1e-12 * (1.0 + vals[0].abs()) {
                out.conflicts[c] = true;
            }
        }
    }
    out
}

/// Lifting at time `t`; warns about corners with conflicting Dirichlet data.
pub fn build_lifting(problem: &ProblemDefinition, t: f64) -> LiftingField {
    let l = lifting_at(problem, t);
    for (c, &bad) in l.conflicts.iter().enumerate() {
        if bad {
            log::warn!(
                "Dirichlet data disagree at corner ({}, {}); using the average {}",
                CORNERS[c][0],
                CORNERS[c][1],
                l.values[c]
            );
        }
    }
    l
}
