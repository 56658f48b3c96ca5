//! Point evaluation of tensor basis functions and finite expansions.

use std::sync::Arc;

use super::family::{BasisFamily, Generator};
use super::index::{IndexSet, Orientation, WaveletIndex};
use super::table::DyadicTable;
use super::MraError;

/// A family together with the table used to evaluate it.
#[derive(Debug, Clone)]
pub struct Basis {
    family: BasisFamily,
    table: Arc<DyadicTable>,
}

#[inline]
fn hat(t: f64) -> f64 {
    let a = 1.0 - t.abs();
    if a > 0.0 {
        a
    } else {
        0.0
    }
}

#[inline]
fn hat_slope(t: f64) -> f64 {
    if t > -1.0 && t < 0.0 {
        1.0
    } else if t >= 0.0 && t < 1.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn level_scale(j: u32) -> f64 {
    (1u64 << j) as f64
}

impl Basis {
    pub fn new(family: BasisFamily, q: u32) -> Result<Self, MraError> {
        Ok(Self {
            family,
            table: Arc::new(DyadicTable::build(family, q)?),
        })
    }

    pub fn from_table(table: Arc<DyadicTable>) -> Self {
        Self {
            family: table.family(),
            table,
        }
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn table(&self) -> &DyadicTable {
        &self.table
    }

    /// Mother generator value at `t`. Haar and the hat are closed form; the
    /// Daubechies families interpolate the table.
    #[inline]
    pub fn mother(&self, g: Generator, t: f64) -> f64 {
        match (self.family, g) {
            (BasisFamily::Haar, Generator::Phi) => {
                if (0.0..1.0).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            (BasisFamily::Haar, Generator::Psi) => {
                if (0.0..0.5).contains(&t) {
                    1.0
                } else if (0.5..1.0).contains(&t) {
                    -1.0
                } else {
                    0.0
                }
            }
            (BasisFamily::HierarchicalHat, Generator::Phi) => hat(t),
            (BasisFamily::HierarchicalHat, Generator::Psi) => hat(2.0 * t - 1.0),
            _ => self.table.value(g, t),
        }
    }

    /// Mother generator slope at `t`. Haar has no weak derivative and yields 0.
    #[inline]
    pub fn mother_slope(&self, g: Generator, t: f64) -> f64 {
        match (self.family, g) {
            (BasisFamily::Haar, _) => 0.0,
            (BasisFamily::HierarchicalHat, Generator::Phi) => hat_slope(t),
            (BasisFamily::HierarchicalHat, Generator::Psi) => 2.0 * hat_slope(2.0 * t - 1.0),
            _ => self.table.slope(g, t),
        }
    }

    /// `2^{j/2} g(2^j x - k)`. Haar factors ending at `x = 1` take their
    /// left limit there so traces on the right and top edges are defined.
    #[inline]
    pub fn factor(&self, g: Generator, j: u32, k: i64, x: f64) -> f64 {
        let s = level_scale(j);
        let mut t = s * x - k as f64;
        if self.family == BasisFamily::Haar && x == 1.0 && t == 1.0 {
            t = 1.0 - f64::EPSILON;
        }
        s.sqrt() * self.mother(g, t)
    }

    /// Derivative of [`Basis::factor`] in `x`.
    #[inline]
    pub fn factor_slope(&self, g: Generator, j: u32, k: i64, x: f64) -> f64 {
        let s = level_scale(j);
        s * s.sqrt() * self.mother_slope(g, s * x - k as f64)
    }

    /// Support of the factor as an interval of `x`.
    pub fn factor_support(&self, g: Generator, j: u32, k: i64) -> (f64, f64) {
        let (lo, hi) = self.family.mother_support(g);
        let s = level_scale(j);
        ((k + lo) as f64 / s, (k + hi) as f64 / s)
    }

    /// Translations at level `j` whose support contains `x` (closed), a
    /// superset of the factors nonzero at `x`.
    pub fn translations_at(&self, g: Generator, j: u32, x: f64) -> std::ops::RangeInclusive<i64> {
        let (lo, hi) = self.family.mother_support(g);
        let t = level_scale(j) * x;
        let k_min = (t - hi as f64).ceil() as i64;
        let k_max = (t - lo as f64).floor() as i64;
        k_min..=k_max
    }

    pub fn support(&self, w: &WaveletIndex) -> [(f64, f64); 2] {
        let (gx, gy) = w.orientation.generators();
        [
            self.factor_support(gx, w.level, w.kx),
            self.factor_support(gy, w.level, w.ky),
        ]
    }

    /// `ψ_λ(x, y)`, with level scaling `2^{j/2}` per axis; 0 off support.
    pub fn eval(&self, w: &WaveletIndex, p: [f64; 2]) -> f64 {
        let (gx, gy) = w.orientation.generators();
        let fx = self.factor(gx, w.level, w.kx, p[0]);
        if fx == 0.0 {
            return 0.0;
        }
        fx * self.factor(gy, w.level, w.ky, p[1])
    }

    pub fn grad(&self, w: &WaveletIndex, p: [f64; 2]) -> [f64; 2] {
        let (gx, gy) = w.orientation.generators();
        let (j, kx, ky) = (w.level, w.kx, w.ky);
        [
            self.factor_slope(gx, j, kx, p[0]) * self.factor(gy, j, ky, p[1]),
            self.factor(gx, j, kx, p[0]) * self.factor_slope(gy, j, ky, p[1]),
        ]
    }

    /// Brute-force `Σ_λ u_λ ψ_λ(p)` over every index in `set`.
    pub fn eval_expansion_brute(&self, coeffs: &[f64], set: &IndexSet, p: [f64; 2]) -> Result<f64, MraError> {
        check_len(coeffs, set)?;
        Ok(set.iter().zip(coeffs).map(|(w, c)| c * self.eval(w, p)).sum())
    }
}

pub(crate) fn check_len(coeffs: &[f64], set: &IndexSet) -> Result<(), MraError> {
    if coeffs.len() != set.len() {
        return Err(MraError::Dimension {
            expected: set.len(),
            got: coeffs.len(),
        });
    }
    Ok(())
}

/// Dense `(level, orientation) → translation grid → ordinal` map for fast
/// lookup of the set members overlapping a point or cell.
#[derive(Debug, Clone)]
pub struct IndexLookup {
    blocks: Vec<Option<Block>>,
    levels: u32,
}

#[derive(Debug, Clone)]
struct Block {
    kx0: i64,
    ky0: i64,
    nx: usize,
    ny: usize,
    slots: Vec<u32>,
}

const EMPTY: u32 = u32::MAX;

impl IndexLookup {
    pub fn new(set: &IndexSet) -> Self {
        let levels = set.max_level().max(1);
        let mut bounds: Vec<Option<(i64, i64, i64, i64)>> = vec![None; (levels as usize) * 4];
        let slot = |w: &WaveletIndex| w.level as usize * 4 + w.orientation.slot();
        for w in set.iter() {
            let b = &mut bounds[slot(w)];
            *b = Some(match *b {
                None => (w.kx, w.kx, w.ky, w.ky),
                Some((a, bb, c, d)) => (a.min(w.kx), bb.max(w.kx), c.min(w.ky), d.max(w.ky)),
            });
        }
        let mut blocks: Vec<Option<Block>> = bounds
            .iter()
            .map(|b| {
                b.map(|(kx0, kx1, ky0, ky1)| {
                    let nx = (kx1 - kx0 + 1) as usize;
                    let ny = (ky1 - ky0 + 1) as usize;
                    Block {
                        kx0,
                        ky0,
                        nx,
                        ny,
                        slots: vec![EMPTY; nx * ny],
                    }
                })
            })
            .collect();
        for (i, w) in set.iter().enumerate() {
            let b = blocks[slot(w)].as_mut().expect("bounds cover every member");
            let ix = (w.kx - b.kx0) as usize;
            let iy = (w.ky - b.ky0) as usize;
            b.slots[iy * b.nx + ix] = i as u32;
        }
        Self { blocks, levels }
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    #[inline]
    pub fn get(&self, level: u32, o: Orientation, kx: i64, ky: i64) -> Option<usize> {
        if level >= self.levels {
            return None;
        }
        let b = self.blocks[level as usize * 4 + o.slot()].as_ref()?;
        let ix = kx - b.kx0;
        let iy = ky - b.ky0;
        if ix < 0 || iy < 0 || ix as usize >= b.nx || iy as usize >= b.ny {
            return None;
        }
        let v = b.slots[iy as usize * b.nx + ix as usize];
        (v != EMPTY).then_some(v as usize)
    }

    /// Whether any member exists with this level and orientation.
    pub fn has_block(&self, level: u32, o: Orientation) -> bool {
        level < self.levels && self.blocks[level as usize * 4 + o.slot()].is_some()
    }

    /// Calls `f(ordinal)` for every member whose closed support contains `p`.
    pub fn for_each_at(&self, basis: &Basis, p: [f64; 2], mut f: impl FnMut(usize)) {
        for level in 0..self.levels {
            for o in [
                Orientation::Scaling,
                Orientation::Horizontal,
                Orientation::Vertical,
                Orientation::Diagonal,
            ] {
                if !self.has_block(level, o) {
                    continue;
                }
                let (gx, gy) = o.generators();
                let rx = basis.translations_at(gx, level, p[0]);
                let ry = basis.translations_at(gy, level, p[1]);
                for kx in rx {
                    for ky in ry.clone() {
                        if let Some(i) = self.get(level, o, kx, ky) {
                            f(i);
                        }
                    }
                }
            }
        }
    }
}

/// Fast evaluation of expansions over a fixed set.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    basis: &'a Basis,
    set: &'a IndexSet,
    lookup: IndexLookup,
}

impl<'a> Evaluator<'a> {
    pub fn new(basis: &'a Basis, set: &'a IndexSet) -> Self {
        Self {
            basis,
            set,
            lookup: IndexLookup::new(set),
        }
    }

    pub fn eval(&self, coeffs: &[f64], p: [f64; 2]) -> Result<f64, MraError> {
        check_len(coeffs, self.set)?;
        let mut s = 0.0;
        self.lookup.for_each_at(self.basis, p, |i| {
            let c = coeffs[i];
            if c != 0.0 {
                s += c * self.basis.eval(&self.set.get(i), p);
            }
        });
        Ok(s)
    }

    pub fn grad(&self, coeffs: &[f64], p: [f64; 2]) -> Result<[f64; 2], MraError> {
        check_len(coeffs, self.set)?;
        let mut g = [0.0; 2];
        self.lookup.for_each_at(self.basis, p, |i| {
            let c = coeffs[i];
            if c != 0.0 {
                let d = self.basis.grad(&self.set.get(i), p);
                g[0] += c * d[0];
                g[1] += c * d[1];
            }
        });
        Ok(g)
    }
}
