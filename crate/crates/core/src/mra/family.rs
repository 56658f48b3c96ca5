use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Generator family of the 1-D multiresolution analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    Haar,
    #[serde(alias = "d4")]
    Daubechies4,
    #[serde(alias = "d6")]
    Daubechies6,
    #[serde(alias = "hat")]
    HierarchicalHat,
}

/// Which of the two 1-D generators a tensor factor uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    Phi,
    Psi,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 4] = [
        BasisFamily::Haar,
        BasisFamily::Daubechies4,
        BasisFamily::Daubechies6,
        BasisFamily::HierarchicalHat,
    ];

    /// Lowpass mask `h_k`, indexed from 0.
    pub fn lowpass(self) -> Vec<f64> {
        let s2 = std::f64::consts::SQRT_2;
        match self {
            BasisFamily::Haar => vec![1.0 / s2, 1.0 / s2],
            BasisFamily::Daubechies4 => {
                let r3 = 3f64.sqrt();
                let d = 4.0 * s2;
                vec![(1.0 + r3) / d, (3.0 + r3) / d, (3.0 - r3) / d, (1.0 - r3) / d]
            }
            BasisFamily::Daubechies6 => {
                let r10 = 10f64.sqrt();
                let a = (5.0 + 2.0 * r10).sqrt();
                let d = 16.0 * s2;
                vec![
                    (1.0 + r10 + a) / d,
                    (5.0 + r10 + 3.0 * a) / d,
                    (10.0 - 2.0 * r10 + 2.0 * a) / d,
                    (10.0 - 2.0 * r10 - 2.0 * a) / d,
                    (5.0 + r10 - 3.0 * a) / d,
                    (1.0 + r10 - a) / d,
                ]
            }
            BasisFamily::HierarchicalHat => vec![0.5 / s2, 1.0 / s2, 0.5 / s2],
        }
    }

    /// Highpass mask `g_k`. Orthogonal families use `g_k = (-1)^k h_{L-1-k}`;
    /// the hierarchical hat keeps only the fine hat at the odd node.
    pub fn highpass(self) -> Vec<f64> {
        match self {
            BasisFamily::HierarchicalHat => vec![1.0 / std::f64::consts::SQRT_2],
            _ => {
                let h = self.lowpass();
                let l = h.len();
                (0..l)
                    .map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] })
                    .collect()
            }
        }
    }

    pub fn is_orthogonal(self) -> bool {
        !matches!(self, BasisFamily::HierarchicalHat)
    }

    /// Length of the support of the tabulated scaling function.
    pub fn support_width(self) -> usize {
        self.lowpass().len() - 1
    }

    pub fn vanishing_moments(self) -> usize {
        match self {
            BasisFamily::Haar => 1,
            BasisFamily::Daubechies4 => 2,
            BasisFamily::Daubechies6 => 3,
            BasisFamily::HierarchicalHat => 0,
        }
    }

    /// Support `[lo, hi]` of the mother generator in its own coordinate.
    /// Level-`j` factors are `2^{j/2} g(2^j x - k)`.
    pub fn mother_support(self, g: Generator) -> (i64, i64) {
        match (self, g) {
            (BasisFamily::HierarchicalHat, Generator::Phi) => (-1, 1),
            (BasisFamily::HierarchicalHat, Generator::Psi) => (0, 1),
            (f, _) => (0, f.support_width() as i64),
        }
    }

    /// Admissible translations at level `j` on `[0, 1]` before boundary
    /// adaptation, inclusive range.
    pub fn translation_range(self, g: Generator, j: u32) -> (i64, i64) {
        let n = 1i64 << j;
        match (self, g) {
            (BasisFamily::HierarchicalHat, Generator::Phi) => (0, n),
            (BasisFamily::HierarchicalHat, Generator::Psi) => (0, n - 1),
            (f, Generator::Phi) => {
                let (lo, hi) = f.mother_support(Generator::Phi);
                (1 - hi, n - lo - 1)
            }
            (f, Generator::Psi) => {
                let l = f.lowpass().len() as i64;
                (-(l / 2 - 1), n - l / 2)
            }
        }
    }

    /// True when a factor whose support ends exactly on an edge still has a
    /// nonzero trace there.
    pub fn has_endpoint_trace(self) -> bool {
        matches!(self, BasisFamily::Haar)
    }

    /// Whether tensor products of this family lie in H¹.
    pub fn is_h1_conforming(self) -> bool {
        !matches!(self, BasisFamily::Haar)
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::Haar => "haar",
            BasisFamily::Daubechies4 => "d4",
            BasisFamily::Daubechies6 => "d6",
            BasisFamily::HierarchicalHat => "hat",
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(BasisFamily::Haar),
            "d4" | "daubechies4" => Ok(BasisFamily::Daubechies4),
            "d6" | "daubechies6" => Ok(BasisFamily::Daubechies6),
            "hat" | "hierarchical_hat" | "hierarchicalhat" => Ok(BasisFamily::HierarchicalHat),
            other => Err(format!("unknown basis family `{other}` (expected haar, d4, d6 or hat)")),
        }
    }
}
