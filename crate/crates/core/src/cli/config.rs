//! Scenario configuration: TOML sections per module, every key optional
//! except `scenario.kind`.
//!
//! Default values are this crate's own picks for desk-scale runs, not
//! published parameters.

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::adaptivity::AdaptivityPolicy;
use crate::assembly::{QuadratureRule, RuleKind};
use crate::mra::{BasisFamily, MAX_TABLE_DEPTH, MIN_TABLE_DEPTH};
use crate::problem::{
    BoundaryCondition, BoundarySpec, Geometry, MaterialMap, MaterialPhase, ProblemDefinition, SpaceTimeFn,
};
use crate::timestepper::{Discretization, PcgConfig, Preconditioner, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Two horizontal layers, heated from below.
    Slab,
    /// Circular inclusion, heated from the left.
    Inclusion,
    /// Graded upper layer, heated from below.
    Fgm,
    Homogeneous,
    /// Geometry from `material.geometry`, all four edges from `[boundary]`.
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Slab => "slab",
            ScenarioKind::Inclusion => "inclusion",
            ScenarioKind::Fgm => "fgm",
            ScenarioKind::Homogeneous => "homogeneous",
            ScenarioKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Slab,
    Inclusion,
    Graded,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Closed form where one exists, finite differences otherwise.
    Auto,
    Analytic,
    Fd,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub source: SpaceTimeFn,
    #[serde(default)]
    pub initial: SpaceTimeFn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    /// Matrix phase: lower layer, inclusion host, graded base `k_m`.
    pub k1: f64,
    /// Secondary phase: upper layer or inclusion.
    pub k2: f64,
    pub alpha: f64,
    pub interface_y: f64,
    pub y0: f64,
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
    pub rho: f64,
    pub cp: f64,
    pub geometry: Option<GeometryKind>,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 10.0,
            alpha: 1.0,
            interface_y: 0.5,
            y0: 0.5,
            cx: 0.5,
            cy: 0.5,
            r: 0.2,
            rho: 1.0,
            cp: 1.0,
            geometry: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EdgeConfig {
    Dirichlet { value: SpaceTimeFn },
    Neumann { flux: SpaceTimeFn },
    Robin { h: f64, t_inf: SpaceTimeFn },
}

impl EdgeConfig {
    fn to_condition(&self) -> BoundaryCondition {
        match self {
            EdgeConfig::Dirichlet { value } => BoundaryCondition::Dirichlet(value.clone()),
            EdgeConfig::Neumann { flux } => BoundaryCondition::Neumann(flux.clone()),
            EdgeConfig::Robin { h, t_inf } => BoundaryCondition::Robin {
                h: *h,
                t_inf: t_inf.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub bottom: Option<EdgeConfig>,
    pub right: Option<EdgeConfig>,
    pub top: Option<EdgeConfig>,
    pub left: Option<EdgeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub family: BasisFamily,
    pub j_max: u32,
    pub table_depth: u32,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self {
            family: BasisFamily::HierarchicalHat,
            j_max: 5,
            table_depth: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSection {
    /// Defaults to 2.
    pub depth: Option<u32>,
    /// Defaults to gauss2 for hat, midpoint otherwise.
    pub rule: Option<RuleKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptivitySection {
    pub enabled: bool,
    pub epsilon: f64,
    pub radius: u32,
    pub parents: bool,
    pub children: bool,
    pub stride: usize,
}

impl Default for AdaptivitySection {
    fn default() -> Self {
        let p = AdaptivityPolicy::default();
        Self {
            enabled: true,
            epsilon: p.epsilon,
            radius: p.radius,
            parents: p.parents,
            children: p.children,
            stride: p.stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_final: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { dt: 0.05, t_final: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcgSection {
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub warm_start: bool,
}

impl Default for PcgSection {
    fn default() -> Self {
        let c = PcgConfig::default();
        Self {
            tol: c.tol,
            max_iter: c.max_iter,
            preconditioner: c.preconditioner,
            warm_start: c.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Per-step wall time; off keeps every output byte-reproducible.
    pub timing: bool,
    /// Writes `K.mtx` for the final active set.
    pub dump_matrix: bool,
    /// Adds the active set every this many steps to `active_set.csv`
    /// (0: initial and final states only).
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "wavegal_out".into(),
            timing: false,
            dump_matrix: false,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub kind: ReferenceKind,
    /// Grid points per axis of the reference and of `field.csv`.
    pub n: usize,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            kind: ReferenceKind::Auto,
            n: 129,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub basis: BasisSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub adaptivity: AdaptivitySection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub pcg: PcgSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub reference: ReferenceSection,
}

fn bad(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {reason}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format_args!("must be > 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn minimal(kind: ScenarioKind) -> Self {
        Self {
            scenario: ScenarioSection {
                kind,
                source: SpaceTimeFn::zero(),
                initial: SpaceTimeFn::zero(),
            },
            material: MaterialSection::default(),
            boundary: BoundarySection::default(),
            basis: BasisSection::default(),
            quadrature: QuadratureSection::default(),
            adaptivity: AdaptivitySection::default(),
            time: TimeSection::default(),
            pcg: PcgSection::default(),
            output: OutputSection::default(),
            reference: ReferenceSection::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("time.dt", self.time.dt)?;
        positive("time.t_final", self.time.t_final)?;
        TimeGrid::new(self.time.dt, self.time.t_final).map_err(|e| bad("time.dt", e))?;
        let m = &self.material;
        positive("material.k1", m.k1)?;
        positive("material.k2", m.k2)?;
        positive("material.rho", m.rho)?;
        positive("material.cp", m.cp)?;
        if !(m.alpha >= 0.0) {
            return Err(bad("material.alpha", format_args!("must be >= 0, got {}", m.alpha)));
        }
        let b = &self.basis;
        if !(1..=12).contains(&b.j_max) {
            return Err(bad("basis.j_max", format_args!("must lie in 1..=12, got {}", b.j_max)));
        }
        if !(MIN_TABLE_DEPTH..=MAX_TABLE_DEPTH).contains(&b.table_depth) {
            return Err(bad(
                "basis.table_depth",
                format_args!(
                    "must lie in {MIN_TABLE_DEPTH}..={MAX_TABLE_DEPTH}, got {}",
                    b.table_depth
                ),
            ));
        }
        if let Some(s) = self.quadrature.depth {
            if !(1..=8).contains(&s) {
                return Err(bad("quadrature.depth", format_args!("must lie in 1..=8, got {s}")));
            }
        }
        let a = &self.adaptivity;
        if a.enabled {
            positive("adaptivity.epsilon", a.epsilon)?;
            if a.stride == 0 {
                return Err(bad("adaptivity.stride", "must be >= 1"));
            }
        }
        self.pcg_config().validate().map_err(|e| bad("pcg.tol", e))?;
        if self.pcg.max_iter == Some(0) {
            return Err(bad("pcg.max_iter", "must be >= 1"));
        }
        if self.reference.n < 17 {
            return Err(bad(
                "reference.n",
                format_args!("must be >= 17, got {}", self.reference.n),
            ));
        }
        if self.output.dir.is_empty() {
            return Err(bad("output.dir", "must not be empty"));
        }
        if self.scenario.kind == ScenarioKind::Custom {
            let bs = &self.boundary;
            for (name, e) in [
                ("bottom", &bs.bottom),
                ("right", &bs.right),
                ("top", &bs.top),
                ("left", &bs.left),
            ] {
                if e.is_none() {
                    return Err(bad(&format!("boundary.{name}"), "required for custom scenarios"));
                }
            }
        }
        if !self.scenario.initial.is_time_independent() {
            return Err(bad("scenario.initial", "cannot depend on t"));
        }
        self.problem()?;
        Ok(())
    }

    fn geometry(&self) -> Geometry {
        let m = &self.material;
        let kind = match self.scenario.kind {
            ScenarioKind::Slab => GeometryKind::Slab,
            ScenarioKind::Inclusion => GeometryKind::Inclusion,
            ScenarioKind::Fgm => GeometryKind::Graded,
            ScenarioKind::Homogeneous => GeometryKind::Homogeneous,
            ScenarioKind::Custom => m.geometry.unwrap_or(GeometryKind::Homogeneous),
        };
        match kind {
            GeometryKind::Slab => Geometry::LayeredSlab {
                interface_y: m.interface_y,
            },
            GeometryKind::Inclusion => Geometry::CircularInclusion {
                cx: m.cx,
                cy: m.cy,
                r: m.r,
            },
            GeometryKind::Graded => Geometry::GradedLayer {
                y0: m.y0,
                alpha: m.alpha,
            },
            GeometryKind::Homogeneous => Geometry::Homogeneous,
        }
    }

    pub fn material_map(&self) -> Result<MaterialMap, CliError> {
        let m = &self.material;
        let phase = |id: u8, k: f64| MaterialPhase {
            rho: m.rho,
            cp: m.cp,
            ..MaterialPhase::isotropic(id, k)
        };
        // the graded layer scales its base phase, which is the matrix
        let secondary = match self.geometry() {
            Geometry::GradedLayer { .. } => phase(1, m.k1),
            _ => phase(1, m.k2),
        };
        MaterialMap::new(self.geometry(), phase(0, m.k1), secondary).map_err(|e| bad("material", e))
    }

    pub fn boundary_spec(&self) -> Result<BoundarySpec, CliError> {
        let dirichlet = |v: f64| BoundaryCondition::Dirichlet(SpaceTimeFn::constant(v));
        let ins = BoundaryCondition::insulated;
        // bottom, right, top, left
        let defaults = match self.scenario.kind {
            ScenarioKind::Inclusion => [ins(), dirichlet(0.0), ins(), dirichlet(1.0)],
            _ => [dirichlet(1.0), ins(), dirichlet(0.0), ins()],
        };
        let b = &self.boundary;
        let pick = |o: &Option<EdgeConfig>, dflt: &BoundaryCondition| {
            o.as_ref().map_or_else(|| dflt.clone(), EdgeConfig::to_condition)
        };
        BoundarySpec::new(
            pick(&b.bottom, &defaults[0]),
            pick(&b.right, &defaults[1]),
            pick(&b.top, &defaults[2]),
            pick(&b.left, &defaults[3]),
        )
        .map_err(|e| bad("boundary", e))
    }

    pub fn problem(&self) -> Result<ProblemDefinition, CliError> {
        ProblemDefinition::new(
            self.material_map()?,
            self.boundary_spec()?,
            self.scenario.source.clone(),
            self.scenario.initial.clone(),
            self.time.t_final,
        )
        .map_err(|e| bad("scenario", e))
    }

    pub fn quadrature_rule(&self) -> QuadratureRule {
        let d = QuadratureRule::default_for(self.basis.family);
        QuadratureRule::new(
            self.quadrature.depth.unwrap_or(d.depth),
            self.quadrature.rule.unwrap_or(d.rule),
        )
    }

    pub fn pcg_config(&self) -> PcgConfig {
        PcgConfig {
            tol: self.pcg.tol,
            max_iter: self.pcg.max_iter,
            preconditioner: self.pcg.preconditioner,
            warm_start: self.pcg.warm_start,
        }
    }

    pub fn discretization(&self) -> Discretization {
        Discretization {
            family: self.basis.family,
            j_max: self.basis.j_max,
            table_depth: self.basis.table_depth,
            quadrature: self.quadrature_rule(),
            drop_tol: 0.0,
            pcg: self.pcg_config(),
        }
    }

    pub fn policy(&self) -> Option<AdaptivityPolicy> {
        let a = &self.adaptivity;
        a.enabled.then_some(AdaptivityPolicy {
            epsilon: a.epsilon,
            radius: a.radius,
            parents: a.parents,
            children: a.children,
            stride: a.stride,
        })
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.time.dt, self.time.t_final).map_err(|e| bad("time.dt", e))
    }

    /// Every leaf as `config.<dotted key>=<TOML literal>`, sorted by key.
    pub fn echo(&self) -> String {
        let value = toml::Value::try_from(self).expect("configuration serializes to TOML");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.sort();
        let mut s = String::new();
        for (k, v) in lines {
            s.push_str("config.");
            s.push_str(&k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Inverse of [`ScenarioConfig::echo`]; other lines are ignored.
    pub fn from_echo(report: &str) -> Result<Self, CliError> {
        let mut toml_text = String::new();
        for line in report.lines() {
            if let Some(rest) = line.strip_prefix("config.") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("malformed echo line `{line}`")))?;
                toml_text.push_str(k);
                toml_text.push_str(" = ");
                toml_text.push_str(v);
                toml_text.push('\n');
            }
        }
        Self::parse(&toml_text)
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, child, out);
            }
        }
        leaf => out.push((prefix.to_string(), leaf.to_string())),
    }
}
