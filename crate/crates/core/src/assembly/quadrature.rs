use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mra::BasisFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Midpoint,
    #[serde(alias = "gauss2")]
    TwoPointGauss,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Midpoint => "midpoint",
            RuleKind::TwoPointGauss => "gauss2",
        }
    }

    /// Nodes in `[0, 1]` and weights summing to 1.
    fn nodes(self) -> &'static [(f64, f64)] {
        const MID: [(f64, f64); 1] = [(0.5, 1.0)];
        // 0.5 ∓ 0.5/√3
        const G2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];
        match self {
            RuleKind::Midpoint => &MID,
            RuleKind::TwoPointGauss => &G2,
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "midpoint" => Ok(RuleKind::Midpoint),
            "gauss2" | "two_point_gauss" => Ok(RuleKind::TwoPointGauss),
            other => Err(format!(
                "unknown quadrature rule `{other}` (expected midpoint or gauss2)"
            )),
        }
    }
}

/// Composite rule on the `2^{-(J+s)}` grid; coefficients are sampled once
/// per subcell at its midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub depth: u32,
    pub rule: RuleKind,
}

/// One axis of the per-cell rule: point offsets in `[0, 1]` (cell units),
/// weights in cell units, and the subcell each point belongs to.
#[derive(Debug, Clone)]
pub struct AxisRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub subcell: Vec<usize>,
    pub subcells: usize,
}

impl QuadratureRule {
    pub fn new(depth: u32, rule: RuleKind) -> Self {
        Self { depth, rule }
    }

    /// Gauss for the hat family, whose products are then integrated exactly;
    /// midpoint otherwise.
    pub fn default_for(family: BasisFamily) -> Self {
        let rule = match family {
            BasisFamily::HierarchicalHat => RuleKind::TwoPointGauss,
            _ => RuleKind::Midpoint,
        };
        Self { depth: 2, rule }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.depth < 1 {
            return Err("quadrature depth s must be >= 1".into());
        }
        if self.depth > 8 {
            return Err("quadrature depth s must be <= 8".into());
        }
        Ok(())
    }

    pub fn axis(&self) -> AxisRule {
        let m = 1usize << self.depth;
        let hs = 1.0 / m as f64;
        let nodes = self.rule.nodes();
        let mut points = Vec::with_capacity(m * nodes.len());
        let mut weights = Vec::with_capacity(m * nodes.len());
        let mut subcell = Vec::with_capacity(m * nodes.len());
        for i in 0..m {
            for &(x, w) in nodes {
                points.push((i as f64 + x) * hs);
                weights.push(w * hs);
                subcell.push(i);
            }
        }
        AxisRule {
            points,
            weights,
            subcell,
            subcells: m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_rules_integrate_polynomials() {
        for rule in [RuleKind::Midpoint, RuleKind::TwoPointGauss] {
            let a = QuadratureRule::new(2, rule).axis();
            let w: f64 = a.weights.iter().sum();
            assert!((w - 1.0).abs() < 1e-15);
            let lin: f64 = a.points.iter().zip(&a.weights).map(|(x, w)| x * w).sum();
            assert!((lin - 0.5).abs() < 1e-15);
        }
        let g = QuadratureRule::new(1, RuleKind::TwoPointGauss).axis();
        let cubic: f64 = g.points.iter().zip(&g.weights).map(|(x, w)| x.powi(3) * w).sum();
        assert!((cubic - 0.25).abs() < 1e-15);
        assert!(QuadratureRule::new(0, RuleKind::Midpoint).validate().is_err());
    }
}
