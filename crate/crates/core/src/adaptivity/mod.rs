//! Coefficient thresholding and neighbourhood expansion of the active set.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mra::{Basis, BasisFamily, Generator, IndexSet, Orientation, WaveletIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptivityError {
    #[error("active sets derive from different full index sets")]
    MismatchedFullSet,
    #[error("coefficient vector has length {got}, active set has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid adaptivity policy: {0}")]
    Policy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptivityPolicy {
    /// Absolute threshold on `|u_λ|`.
    pub epsilon: f64,
    /// Same-level position radius, in translation steps.
    pub radius: u32,
    pub parents: bool,
    pub children: bool,
    /// Adapt after every `stride` steps.
    pub stride: usize,
}

impl Default for AdaptivityPolicy {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            radius: 1,
            parents: true,
            children: true,
            stride: 1,
        }
    }
}

impl AdaptivityPolicy {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AdaptivityError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AdaptivityError::Policy(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if self.stride == 0 {
            return Err(AdaptivityError::Policy("stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Subset of a full index set, identified by ascending full ordinals.
#[derive(Debug, Clone)]
pub struct ActiveSet {
    full: Arc<IndexSet>,
    ordinals: Vec<usize>,
    set: IndexSet,
    snapshot: u64,
}

impl ActiveSet {
    /// `ordinals` are full-set ordinals; level-0 scaling indices are always
    /// added.
    pub fn new(full: Arc<IndexSet>, ordinals: impl IntoIterator<Item = usize>, snapshot: u64) -> Self {
        let mut all: BTreeSet<usize> = ordinals.into_iter().collect();
        all.extend(safety_net(&full));
        let ordinals: Vec<usize> = all.into_iter().collect();
        let set = IndexSet::from_indices(
            full.family(),
            full.max_level(),
            full.dirichlet(),
            ordinals.iter().map(|&o| full.get(o)).collect(),
        );
        Self {
            full,
            ordinals,
            set,
            snapshot,
        }
    }

    pub fn everything(full: Arc<IndexSet>, snapshot: u64) -> Self {
        let n = full.len();
        Self::new(full, 0..n, snapshot)
    }

    pub fn full(&self) -> &Arc<IndexSet> {
        &self.full
    }

    pub fn set(&self) -> &IndexSet {
        &self.set
    }

    /// Full ordinal of each active position.
    pub fn full_ordinals(&self) -> &[usize] {
        &self.ordinals
    }

    pub fn len(&self) -> usize {
        self.ordinals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinals.is_empty()
    }

    pub fn snapshot_id(&self) -> u64 {
        self.snapshot
    }

    pub fn with_snapshot_id(mut self, id: u64) -> Self {
        self.snapshot = id;
        self
    }

    pub fn same_members(&self, other: &ActiveSet) -> bool {
        Arc::ptr_eq(&self.full, &other.full) && self.ordinals == other.ordinals
    }

    pub fn is_full(&self) -> bool {
        self.ordinals.len() == self.full.len()
    }
}

/// Level-0 scaling ordinals, or every level-0 ordinal when Dirichlet
/// restriction removed all scaling functions.
fn safety_net(full: &IndexSet) -> std::ops::Range<usize> {
    // Indices sort by level, then scaling first.
    let scaling = full.iter().take_while(|w| w.is_scaling()).count();
    if scaling > 0 {
        0..scaling
    } else {
        0..full.iter().take_while(|w| w.level == 0).count()
    }
}

fn same_full(a: &Arc<IndexSet>, b: &Arc<IndexSet>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Full ordinals with `|u_λ| ≥ ε`, plus every level-0 scaling ordinal.
pub fn mark_essential(
    coeffs: &[f64],
    active: &ActiveSet,
    policy: &AdaptivityPolicy,
) -> Result<Vec<usize>, AdaptivityError> {
    if coeffs.len() != active.len() {
        return Err(AdaptivityError::Dimension {
            expected: active.len(),
            got: coeffs.len(),
        });
    }
    let mut out: BTreeSet<usize> = safety_net(active.full()).collect();
    for (c, &o) in coeffs.iter().zip(active.full_ordinals()) {
        if c.abs() >= policy.epsilon {
            out.insert(o);
        }
    }
    Ok(out.into_iter().collect())
}

/// Whether two 1-D factors have overlapping supports (positive length).
fn factor_overlap(family: BasisFamily, g1: Generator, j1: u32, k1: i64, g2: Generator, j2: u32, k2: i64) -> bool {
    let (lo1, hi1) = family.mother_support(g1);
    let (lo2, hi2) = family.mother_support(g2);
    let jm = j1.max(j2);
    let s1 = 1i64 << (jm - j1);
    let s2 = 1i64 << (jm - j2);
    let (a1, b1) = ((k1 + lo1) * s1, (k1 + hi1) * s1);
    let (a2, b2) = ((k2 + lo2) * s2, (k2 + hi2) * s2);
    a1 < b2 && a2 < b1
}

/// Whether the supports of two basis functions overlap with positive area.
pub fn supports_overlap(family: BasisFamily, a: &WaveletIndex, b: &WaveletIndex) -> bool {
    let (ax, ay) = a.orientation.generators();
    let (bx, by) = b.orientation.generators();
    factor_overlap(family, ax, a.level, a.kx, bx, b.level, b.kx)
        && factor_overlap(family, ay, a.level, a.ky, by, b.level, b.ky)
}

fn orientations_at(level: u32) -> &'static [Orientation] {
    if level == 0 {
        &[
            Orientation::Scaling,
            Orientation::Horizontal,
            Orientation::Vertical,
            Orientation::Diagonal,
        ]
    } else {
        &Orientation::WAVELETS
    }
}

/// Adds the neighbourhood of `w` to `out`: same-level translates within
/// the radius in every orientation, overlapping parents one level down and
/// overlapping children one level up (same orientation).
fn neighbours(w: &WaveletIndex, full: &IndexSet, policy: &AdaptivityPolicy, out: &mut BTreeSet<usize>) {
    let r = policy.radius as i64;
    let family = full.family();
    let mut push = |c: WaveletIndex| {
        if let Some(o) = full.ordinal(&c) {
            out.insert(o);
        }
    };
    for &o in orientations_at(w.level) {
        for dx in -r..=r {
            for dy in -r..=r {
                push(WaveletIndex {
                    level: w.level,
                    orientation: o,
                    kx: w.kx + dx,
                    ky: w.ky + dy,
                });
            }
        }
    }
    if w.is_scaling() {
        return;
    }
    let span = family.support_width() as i64 + 2;
    if policy.parents && w.level >= 1 {
        let j = w.level - 1;
        for kx in (w.kx.div_euclid(2) - span)..=(w.kx.div_euclid(2) + span) {
            for ky in (w.ky.div_euclid(2) - span)..=(w.ky.div_euclid(2) + span) {
                let c = WaveletIndex::wavelet(j, w.orientation, kx, ky);
                if supports_overlap(family, w, &c) {
                    push(c);
                }
            }
        }
    }
    if policy.children && w.level + 1 < full.max_level() {
        let j = w.level + 1;
        for kx in (2 * w.kx - 2 * span)..=(2 * w.kx + 2 * span) {
            for ky in (2 * w.ky - 2 * span)..=(2 * w.ky + 2 * span) {
                let c = WaveletIndex::wavelet(j, w.orientation, kx, ky);
                if supports_overlap(family, w, &c) {
                    push(c);
                }
            }
        }
    }
}

/// Essential indices plus their neighbourhoods, closed under the level-0
/// safety net.
pub fn expand_neighborhood(essential: &[usize], full: &Arc<IndexSet>, policy: &AdaptivityPolicy) -> ActiveSet {
    let mut seeds: BTreeSet<usize> = essential.iter().copied().collect();
    seeds.extend(safety_net(full));
    let mut out = seeds.clone();
    for &o in &seeds {
        neighbours(&full.get(o), full, policy, &mut out);
    }
    ActiveSet::new(full.clone(), out, 0)
}

/// Coefficients on `new`: retained indices copied, new indices zero.
pub fn transfer_coefficients(old: &ActiveSet, coeffs: &[f64], new: &ActiveSet) -> Result<Vec<f64>, AdaptivityError> {
    if !same_full(old.full(), new.full()) {
        return Err(AdaptivityError::MismatchedFullSet);
    }
    if coeffs.len() != old.len() {
        return Err(AdaptivityError::Dimension {
            expected: old.len(),
            got: coeffs.len(),
        });
    }
    let mut out = vec![0.0; new.len()];
    let (a, b) = (old.full_ordinals(), new.full_ordinals());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                out[j] = coeffs[i];
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    Ok(out)
}

/// `mark_essential` then `expand_neighborhood` on coefficients over the
/// full set.
pub fn initial_active_set(
    full: &Arc<IndexSet>,
    coeffs: &[f64],
    policy: &AdaptivityPolicy,
) -> Result<ActiveSet, AdaptivityError> {
    let everything = ActiveSet::everything(full.clone(), 0);
    let essential = mark_essential(coeffs, &everything, policy)?;
    Ok(expand_neighborhood(&essential, full, policy))
}

/// Fraction of the wavelets at the finest active level whose support meets
/// the strip `|y - y_c| ≤ 2 · width · 2^{-j}`, with `width` the family's
/// support width. `None` when no wavelet is active.
pub fn finest_level_strip_fraction(active: &ActiveSet, basis: &Basis, y_c: f64) -> Option<f64> {
    let set = active.set();
    let j = set.finest_wavelet_level()?;
    let width = basis.family().support_width() as f64;
    let half = 2.0 * width / (1u64 << j) as f64;
    let finest: Vec<&WaveletIndex> = set.iter().filter(|w| !w.is_scaling() && w.level == j).collect();
    let hits = finest
        .iter()
        .filter(|w| {
            let [_, (y0, y1)] = basis.support(w);
            y1 >= y_c - half && y0 <= y_c + half
        })
        .count();
    Some(hits as f64 / finest.len() as f64)
}
