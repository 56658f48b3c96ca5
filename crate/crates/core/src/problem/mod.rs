//! Initial–boundary value problem on the unit square: material phases and
//! their geometry, boundary conditions, source and initial data.

mod expr;

pub use expr::{ExprError, Monomial, SpaceTimeFn};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points are `[x, y]` in the unit square.
pub type Point = [f64; 2];

/// Slack used when deciding whether a point lies in the closed unit square.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("point ({x}, {y}) lies outside the unit square")]
    OutsideDomain { x: f64, y: f64 },
    #[error("conductivity at ({x}, {y}) is not symmetric positive definite: kxx={kxx}, kxy={kxy}, kyy={kyy}")]
    NotPositiveDefinite {
        x: f64,
        y: f64,
        kxx: f64,
        kxy: f64,
        kyy: f64,
    },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ProblemError {
    ProblemError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Symmetric 2×2 conductivity tensor (nondimensional).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityTensor {
    pub kxx: f64,
    pub kxy: f64,
    pub kyy: f64,
}

impl ConductivityTensor {
    pub fn isotropic(k: f64) -> Self {
        Self {
            kxx: k,
            kxy: 0.0,
            kyy: k,
        }
    }

    pub fn new(kxx: f64, kxy: f64, kyy: f64) -> Self {
        Self { kxx, kxy, kyy }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.kxx > 0.0 && self.kxx * self.kyy - self.kxy * self.kxy > 0.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            kxx: self.kxx * s,
            kxy: self.kxy * s,
            kyy: self.kyy * s,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.kxx + self.kyy);
        let half_diff = 0.5 * (self.kxx - self.kyy);
        let r = half_diff.hypot(self.kxy);
        (mean - r, mean + r)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.kxx * v[0] + self.kxy * v[1], self.kxy * v[0] + self.kyy * v[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialPhase {
    pub id: u8,
    pub rho: f64,
    pub cp: f64,
    pub conductivity: ConductivityTensor,
}

impl MaterialPhase {
    /// Phase with unit density and heat capacity.
    pub fn new(id: u8, conductivity: ConductivityTensor) -> Self {
        Self {
            id,
            rho: 1.0,
            cp: 1.0,
            conductivity,
        }
    }

    pub fn isotropic(id: u8, k: f64) -> Self {
        Self::new(id, ConductivityTensor::isotropic(k))
    }

    pub fn heat_capacity(&self) -> f64 {
        self.rho * self.cp
    }

    fn validate(&self) -> Result<(), ProblemError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", format!("must be > 0, got {}", self.rho)));
        }
        if !(self.cp > 0.0 && self.cp.is_finite()) {
            return Err(invalid("cp", format!("must be > 0, got {}", self.cp)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// Lower layer `y < interface_y` is the matrix phase, the upper layer the
    /// secondary phase.
    LayeredSlab {
        interface_y: f64,
    },
    /// Closed disc of the secondary phase embedded in the matrix.
    CircularInclusion {
        cx: f64,
        cy: f64,
        r: f64,
    },
    /// Matrix phase below `y0`; above, the secondary phase tensor scaled by
    /// `1 + alpha (2y - 1)`.
    GradedLayer {
        y0: f64,
        alpha: f64,
    },
    Homogeneous,
}

impl Geometry {
    pub fn validate(&self) -> Result<(), ProblemError> {
        match *self {
            Geometry::LayeredSlab { interface_y } => {
                if !(interface_y > 0.0 && interface_y < 1.0) {
                    return Err(invalid("interface_y", "must lie in (0, 1)"));
                }
            }
            Geometry::CircularInclusion { cx, cy, r } => {
                if !(r > 0.0) {
                    return Err(invalid("r", "radius must be positive"));
                }
                if !(cx - r > 0.0 && cx + r < 1.0 && cy - r > 0.0 && cy + r < 1.0) {
                    return Err(invalid("r", "inclusion disc must lie strictly inside the unit square"));
                }
            }
            Geometry::GradedLayer { y0, alpha } => {
                if !(y0 > 0.0 && y0 < 1.0) {
                    return Err(invalid("y0", "must lie in (0, 1)"));
                }
                if !(alpha >= 0.0 && alpha.is_finite()) {
                    return Err(invalid("alpha", "must be finite and >= 0"));
                }
                // the scale factor is smallest at y0
                if 1.0 + alpha * (2.0 * y0 - 1.0) <= 0.0 {
                    return Err(invalid(
                        "alpha",
                        "grading factor 1 + alpha (2 y0 - 1) must stay positive",
                    ));
                }
            }
            Geometry::Homogeneous => {}
        }
        Ok(())
    }
}

/// Pointwise material description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialMap {
    pub geometry: Geometry,
    pub matrix: MaterialPhase,
    pub secondary: MaterialPhase,
}

fn check_point(p: Point) -> Result<(), ProblemError> {
    let [x, y] = p;
    let inside = |v: f64| v >= -DOMAIN_SLACK && v <= 1.0 + DOMAIN_SLACK;
    if inside(x) && inside(y) {
        Ok(())
    } else {
        Err(ProblemError::OutsideDomain { x, y })
    }
}

impl MaterialMap {
    pub fn new(geometry: Geometry, matrix: MaterialPhase, secondary: MaterialPhase) -> Result<Self, ProblemError> {
        let map = Self {
            geometry,
            matrix,
            secondary,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn homogeneous(phase: MaterialPhase) -> Self {
        Self {
            geometry: Geometry::Homogeneous,
            matrix: phase,
            secondary: phase,
        }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        self.geometry.validate()?;
        self.matrix.validate()?;
        self.secondary.validate()?;
        for phase in [&self.matrix, &self.secondary] {
            if !phase.conductivity.is_positive_definite() {
                let c = phase.conductivity;
                return Err(invalid(
                    "conductivity",
                    format!(
                        "phase {} tensor (kxx={}, kxy={}, kyy={}) is not positive definite",
                        phase.id, c.kxx, c.kxy, c.kyy
                    ),
                ));
            }
        }
        Ok(())
    }

    /// The phase record governing `p`, without domain checking.
    fn phase_unchecked(&self, p: Point) -> &MaterialPhase {
        let [x, y] = p;
        match self.geometry {
            Geometry::Homogeneous => &self.matrix,
            Geometry::LayeredSlab { interface_y } => {
                if y >= interface_y {
                    &self.secondary
                } else {
                    &self.matrix
                }
            }
            Geometry::CircularInclusion { cx, cy, r } => {
                let (dx, dy) = (x - cx, y - cy);
                if dx * dx + dy * dy <= r * r {
                    &self.secondary
                } else {
                    &self.matrix
                }
            }
            Geometry::GradedLayer { y0, .. } => {
                if y >= y0 {
                    &self.secondary
                } else {
                    &self.matrix
                }
            }
        }
    }

    pub fn phase_of(&self, p: Point) -> Result<u8, ProblemError> {
        check_point(p)?;
        Ok(self.phase_unchecked(p).id)
    }

    pub fn conductivity(&self, p: Point) -> Result<ConductivityTensor, ProblemError> {
        check_point(p)?;
        Ok(self.conductivity_unchecked(p))
    }

    /// Conductivity at `p`; callers guarantee `p` is in the closed square.
    pub fn conductivity_unchecked(&self, p: Point) -> ConductivityTensor {
        let phase = self.phase_unchecked(p);
        match self.geometry {
            Geometry::GradedLayer { y0, alpha } if p[1] >= y0 => {
                phase.conductivity.scaled(1.0 + alpha * (2.0 * p[1] - 1.0))
            }
            _ => phase.conductivity,
        }
    }

    /// `rho * c_p` at `p`.
    pub fn heat_capacity_unchecked(&self, p: Point) -> f64 {
        self.phase_unchecked(p).heat_capacity()
    }

    /// Extreme eigenvalues of `K` over a uniform `samples_per_axis²` grid.
    pub fn ellipticity_bounds(&self, samples_per_axis: usize) -> Result<(f64, f64), ProblemError> {
        if samples_per_axis < 2 {
            return Err(invalid("samples_per_axis", "must be >= 2"));
        }
        let n = samples_per_axis;
        let mut k_min = f64::INFINITY;
        let mut k_max = f64::NEG_INFINITY;
        for iy in 0..n {
            let y = iy as f64 / (n - 1) as f64;
            for ix in 0..n {
                let x = ix as f64 / (n - 1) as f64;
                let k = self.conductivity_unchecked([x, y]);
                if !k.is_positive_definite() {
                    return Err(ProblemError::NotPositiveDefinite {
                        x,
                        y,
                        kxx: k.kxx,
                        kxy: k.kxy,
                        kyy: k.kyy,
                    });
                }
                let (lo, hi) = k.eigenvalues();
                k_min = k_min.min(lo);
                k_max = k_max.max(hi);
            }
        }
        Ok((k_min, k_max))
    }
}

/// Edges of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    /// y = 0
    Bottom,
    /// x = 1
    Right,
    /// y = 1
    Top,
    /// x = 0
    Left,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Point on the edge at arclength parameter `s ∈ [0, 1]` (increasing x or y).
    pub fn point(self, s: f64) -> Point {
        match self {
            Edge::Bottom => [s, 0.0],
            Edge::Top => [s, 1.0],
            Edge::Left => [0.0, s],
            Edge::Right => [1.0, s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::Bottom => "bottom",
            Edge::Right => "right",
            Edge::Top => "top",
            Edge::Left => "left",
        }
    }
}

/// Boundary condition on one edge.
///
/// Neumann data `g_n` is the heat flux entering the domain; it contributes
/// `+∫ g_n v ds` to the load. Robin: `-n·K∇T = h (T - T_inf)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet(SpaceTimeFn),
    Neumann(SpaceTimeFn),
    Robin { h: f64, t_inf: SpaceTimeFn },
}

impl BoundaryCondition {
    pub fn insulated() -> Self {
        BoundaryCondition::Neumann(SpaceTimeFn::zero())
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet(_))
    }
}

/// One condition per edge, indexed by [`Edge::index`]; the four slots cover
/// the boundary exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpec {
    edges: [BoundaryCondition; 4],
}

impl BoundarySpec {
    pub fn new(
        bottom: BoundaryCondition,
        right: BoundaryCondition,
        top: BoundaryCondition,
        left: BoundaryCondition,
    ) -> Result<Self, ProblemError> {
        let spec = Self {
            edges: [bottom, right, top, left],
        };
        for e in Edge::ALL {
            if let BoundaryCondition::Robin { h, .. } = spec.get(e) {
                if !(*h >= 0.0 && h.is_finite()) {
                    return Err(invalid("h", format!("Robin coefficient on {} must be >= 0", e.name())));
                }
            }
        }
        Ok(spec)
    }

    pub fn all(bc: BoundaryCondition) -> Self {
        Self {
            edges: [bc.clone(), bc.clone(), bc.clone(), bc],
        }
    }

    pub fn get(&self, e: Edge) -> &BoundaryCondition {
        &self.edges[e.index()]
    }

    pub fn dirichlet_edges(&self) -> DirichletEdges {
        let mut d = DirichletEdges::NONE;
        for e in Edge::ALL {
            if self.get(e).is_dirichlet() {
                d = d.with(e);
            }
        }
        d
    }

    pub fn iter(&self) -> impl Iterator<Item = (Edge, &BoundaryCondition)> {
        Edge::ALL.into_iter().map(move |e| (e, self.get(e)))
    }
}

/// Set of edges carrying Dirichlet conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DirichletEdges(u8);

impl DirichletEdges {
    pub const NONE: DirichletEdges = DirichletEdges(0);
    pub const ALL: DirichletEdges = DirichletEdges(0b1111);

    pub fn with(self, e: Edge) -> Self {
        DirichletEdges(self.0 | (1 << e.index()))
    }

    pub fn contains(self, e: Edge) -> bool {
        self.0 & (1 << e.index()) != 0
    }

    pub fn from_edges(edges: &[Edge]) -> Self {
        edges.iter().fold(Self::NONE, |d, &e| d.with(e))
    }

    pub fn edges(self) -> Vec<Edge> {
        Edge::ALL.into_iter().filter(|&e| self.contains(e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDefinition {
    pub material: MaterialMap,
    pub boundary: BoundarySpec,
    pub source: SpaceTimeFn,
    pub initial: SpaceTimeFn,
    pub t_final: f64,
}

impl ProblemDefinition {
    pub fn new(
        material: MaterialMap,
        boundary: BoundarySpec,
        source: SpaceTimeFn,
        initial: SpaceTimeFn,
        t_final: f64,
    ) -> Result<Self, ProblemError> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid("t_final", "must be > 0"));
        }
        if !initial.is_time_independent() {
            return Err(invalid("initial", "initial data cannot depend on t"));
        }
        material.validate()?;
        Ok(Self {
            material,
            boundary,
            source,
            initial,
            t_final,
        })
    }

    /// Bottom held at `t_bottom`, top at `t_top`, insulated sides.
    pub fn vertical_gradient(
        material: MaterialMap,
        t_bottom: f64,
        t_top: f64,
        t_final: f64,
    ) -> Result<Self, ProblemError> {
        let boundary = BoundarySpec::new(
            BoundaryCondition::Dirichlet(SpaceTimeFn::constant(t_bottom)),
            BoundaryCondition::insulated(),
            BoundaryCondition::Dirichlet(SpaceTimeFn::constant(t_top)),
            BoundaryCondition::insulated(),
        )?;
        Self::new(material, boundary, SpaceTimeFn::zero(), SpaceTimeFn::zero(), t_final)
    }

    /// Left held at `t_left`, right at `t_right`, insulated top and bottom.
    pub fn horizontal_gradient(
        material: MaterialMap,
        t_left: f64,
        t_right: f64,
        t_final: f64,
    ) -> Result<Self, ProblemError> {
        let boundary = BoundarySpec::new(
            BoundaryCondition::insulated(),
            BoundaryCondition::Dirichlet(SpaceTimeFn::constant(t_right)),
            BoundaryCondition::insulated(),
            BoundaryCondition::Dirichlet(SpaceTimeFn::constant(t_left)),
        )?;
        Self::new(material, boundary, SpaceTimeFn::zero(), SpaceTimeFn::zero(), t_final)
    }
}
