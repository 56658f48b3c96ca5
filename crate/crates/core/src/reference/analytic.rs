//! Steady 1-D conduction profiles with `T(0) = 1`, `T(1) = 0`.

/// A steady profile `T(y)` of `-(k T')' = 0`.
pub trait Profile {
    fn value(&self, y: f64) -> f64;
    fn conductivity(&self, y: f64) -> f64;
    /// Constant flux `q = -k T'`.
    fn flux(&self) -> f64;
}

/// Two layers: `k1` below `interface_y`, `k2` above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabProfile {
    pub k1: f64,
    pub k2: f64,
    pub interface_y: f64,
}

pub fn analytic_slab_steady(k1: f64, k2: f64, interface_y: f64) -> SlabProfile {
    assert!(k1 > 0.0 && k2 > 0.0, "conductivities must be positive");
    SlabProfile { k1, k2, interface_y }
}

impl SlabProfile {
    pub fn interface_value(&self) -> f64 {
        1.0 - self.flux() * self.interface_y / self.k1
    }
}

impl Profile for SlabProfile {
    fn value(&self, y: f64) -> f64 {
        let q = self.flux();
        if y < self.interface_y {
            1.0 - q * y / self.k1
        } else {
            self.interface_value() - q * (y - self.interface_y) / self.k2
        }
    }

    fn conductivity(&self, y: f64) -> f64 {
        if y < self.interface_y {
            self.k1
        } else {
            self.k2
        }
    }

    fn flux(&self) -> f64 {
        1.0 / (self.interface_y / self.k1 + (1.0 - self.interface_y) / self.k2)
    }
}

/// `k_m` below `y0`, `k_m (1 + α(2y - 1))` above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgmProfile {
    pub k_m: f64,
    pub alpha: f64,
    pub y0: f64,
}

pub fn analytic_fgm_steady(k_m: f64, alpha: f64, y0: f64) -> FgmProfile {
    assert!(k_m > 0.0 && alpha >= 0.0, "need k_m > 0 and alpha >= 0");
    assert!(y0 > 0.0 && y0 < 1.0, "y0 must lie in (0, 1)");
    FgmProfile { k_m, alpha, y0 }
}

impl FgmProfile {
    /// Thermal resistance of `[0, y]`.
    pub fn resistance(&self, y: f64) -> f64 {
        if y <= self.y0 {
            return y / self.k_m;
        }
        let lower = self.y0 / self.k_m;
        let upper = if self.alpha.abs() < 1e-12 {
            (y - self.y0) / self.k_m
        } else {
            let g = |s: f64| (1.0 + self.alpha * (2.0 * s - 1.0)).ln();
            (g(y) - g(self.y0)) / (2.0 * self.alpha * self.k_m)
        };
        lower + upper
    }
}

impl Profile for FgmProfile {
    fn value(&self, y: f64) -> f64 {
        1.0 - self.flux() * self.resistance(y)
    }

    fn conductivity(&self, y: f64) -> f64 {
        if y < self.y0 {
            self.k_m
        } else {
            self.k_m * (1.0 + self.alpha * (2.0 * y - 1.0))
        }
    }

    fn flux(&self) -> f64 {
        1.0 / self.resistance(1.0)
    }
}
