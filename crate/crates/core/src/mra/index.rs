use std::fmt;

use rustc_hash::FxHashMap;

use super::family::{BasisFamily, Generator};
use crate::problem::{DirichletEdges, Edge};

use super::MraError;

/// Upper bound on the cardinality of a full index set.
pub const MAX_INDEX_SET_LEN: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Scaling,
    Wavelet,
}

/// Tensor structure of a 2-D basis function. The derive order is the
/// ordering used inside one level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    /// `φ ⊗ φ`, level 0 only.
    Scaling,
    /// `ψ(x) φ(y)`
    Horizontal,
    /// `φ(x) ψ(y)`
    Vertical,
    /// `ψ(x) ψ(y)`
    Diagonal,
}

impl Orientation {
    pub const WAVELETS: [Orientation; 3] = [Orientation::Horizontal, Orientation::Vertical, Orientation::Diagonal];

    pub fn generators(self) -> (Generator, Generator) {
        match self {
            Orientation::Scaling => (Generator::Phi, Generator::Phi),
            Orientation::Horizontal => (Generator::Psi, Generator::Phi),
            Orientation::Vertical => (Generator::Phi, Generator::Psi),
            Orientation::Diagonal => (Generator::Psi, Generator::Psi),
        }
    }

    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Orientation::Scaling => "none",
            Orientation::Horizontal => "horizontal",
            Orientation::Vertical => "vertical",
            Orientation::Diagonal => "diagonal",
        }
    }
}

/// Multi-index `λ = (j, orientation, kx, ky)`. Derived ordering is
/// level-major, then orientation, then `kx`, then `ky`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveletIndex {
    pub level: u32,
    pub orientation: Orientation,
    pub kx: i64,
    pub ky: i64,
}

impl WaveletIndex {
    pub fn scaling(kx: i64, ky: i64) -> Self {
        Self {
            level: 0,
            orientation: Orientation::Scaling,
            kx,
            ky,
        }
    }

    pub fn wavelet(level: u32, orientation: Orientation, kx: i64, ky: i64) -> Self {
        debug_assert!(orientation != Orientation::Scaling);
        Self {
            level,
            orientation,
            kx,
            ky,
        }
    }

    pub fn kind(&self) -> Kind {
        if self.orientation == Orientation::Scaling {
            Kind::Scaling
        } else {
            Kind::Wavelet
        }
    }

    pub fn is_scaling(&self) -> bool {
        self.kind() == Kind::Scaling
    }
}

impl fmt::Display for WaveletIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.level,
            self.orientation.name(),
            self.kx,
            self.ky
        )
    }
}

/// Ordered, duplicate-free collection of indices with an ordinal map.
#[derive(Debug, Clone)]
pub struct IndexSet {
    family: BasisFamily,
    max_level: u32,
    dirichlet: DirichletEdges,
    items: Vec<WaveletIndex>,
    position: FxHashMap<WaveletIndex, usize>,
}

impl PartialEq for IndexSet {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.max_level == other.max_level
            && self.dirichlet == other.dirichlet
            && self.items == other.items
    }
}

impl IndexSet {
    /// Sorts and deduplicates `items`.
    pub fn from_indices(
        family: BasisFamily,
        max_level: u32,
        dirichlet: DirichletEdges,
        mut items: Vec<WaveletIndex>,
    ) -> Self {
        items.sort_unstable();
        items.dedup();
        let position = items.iter().enumerate().map(|(i, w)| (*w, i)).collect();
        Self {
            family,
            max_level,
            dirichlet,
            items,
            position,
        }
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    /// `J`: wavelet levels run over `0..J`.
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn dirichlet(&self) -> DirichletEdges {
        self.dirichlet
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, ordinal: usize) -> WaveletIndex {
        self.items[ordinal]
    }

    pub fn indices(&self) -> &[WaveletIndex] {
        &self.items
    }

    pub fn ordinal(&self, w: &WaveletIndex) -> Option<usize> {
        self.position.get(w).copied()
    }

    pub fn contains(&self, w: &WaveletIndex) -> bool {
        self.position.contains_key(w)
    }

    pub fn iter(&self) -> impl Iterator<Item = &WaveletIndex> {
        self.items.iter()
    }

    /// Finest wavelet level present, if any wavelet is.
    pub fn finest_wavelet_level(&self) -> Option<u32> {
        self.items.iter().filter(|w| !w.is_scaling()).map(|w| w.level).max()
    }

    /// CSV dump: `ordinal,level,kind,orientation,kx,ky`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ordinal,level,kind,orientation,kx,ky\n");
        for (i, w) in self.items.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i,
                w.level,
                kind_name(w.kind()),
                w.orientation.name(),
                w.kx,
                w.ky
            ));
        }
        s
    }
}

pub fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Scaling => "scaling",
        Kind::Wavelet => "wavelet",
    }
}

/// Whether the 1-D factor `2^{j/2} g(2^j x - k)` survives homogeneous
/// Dirichlet restriction at the edge point `e ∈ {0, 1}`. A factor is
/// dropped when `e` lies in the open interior of its support, or when its
/// support ends at `e` with a nonzero trace.
pub fn factor_admissible(family: BasisFamily, g: Generator, j: u32, k: i64, e: i64) -> bool {
    let (lo, hi) = family.mother_support(g);
    let n = 1i64 << j;
    let (a, b) = (k + lo, k + hi); // support in units of 2^{-j}
    let edge = e * n;
    if a < edge && edge < b {
        return false;
    }
    if (a == edge || b == edge) && family.has_endpoint_trace() {
        return false;
    }
    true
}

/// Translations of `g` at level `j` that survive the restrictions at the
/// given ends of `[0, 1]`.
pub fn admissible_translations(
    family: BasisFamily,
    g: Generator,
    j: u32,
    dirichlet_low: bool,
    dirichlet_high: bool,
) -> Vec<i64> {
    let (k0, k1) = family.translation_range(g, j);
    (k0..=k1)
        .filter(|&k| !dirichlet_low || factor_admissible(family, g, j, k, 0))
        .filter(|&k| !dirichlet_high || factor_admissible(family, g, j, k, 1))
        .collect()
}

/// Per-axis Dirichlet flags `(x_low, x_high, y_low, y_high)`.
pub fn axis_flags(d: DirichletEdges) -> (bool, bool, bool, bool) {
    (
        d.contains(Edge::Left),
        d.contains(Edge::Right),
        d.contains(Edge::Bottom),
        d.contains(Edge::Top),
    )
}

/// Every level-0 scaling index and every wavelet index for `j < J`, after
/// Dirichlet restriction.
pub fn full_index_set(j_max: u32, family: BasisFamily, dirichlet: DirichletEdges) -> Result<IndexSet, MraError> {
    if j_max < 1 {
        return Err(MraError::Invalid("J must be >= 1".into()));
    }
    // Estimated cardinality before building anything.
    let per_axis = {
        let (a, b) = family.translation_range(Generator::Phi, j_max.min(40));
        (b - a + 1) as u128
    };
    let estimate = per_axis.saturating_mul(per_axis);
    if j_max > 30 || estimate > MAX_INDEX_SET_LEN as u128 {
        return Err(MraError::TooLarge {
            j: j_max,
            cardinality: estimate,
        });
    }
    let (xl, xh, yl, yh) = axis_flags(dirichlet);
    let mut items = Vec::with_capacity(estimate as usize);
    let (sx, sy) = (
        admissible_translations(family, Generator::Phi, 0, xl, xh),
        admissible_translations(family, Generator::Phi, 0, yl, yh),
    );
    for &kx in &sx {
        for &ky in &sy {
            items.push(WaveletIndex::scaling(kx, ky));
        }
    }
    for j in 0..j_max {
        for o in Orientation::WAVELETS {
            let (gx, gy) = o.generators();
            let tx = admissible_translations(family, gx, j, xl, xh);
            let ty = admissible_translations(family, gy, j, yl, yh);
            for &kx in &tx {
                for &ky in &ty {
                    items.push(WaveletIndex::wavelet(j, o, kx, ky));
                }
            }
        }
    }
    Ok(IndexSet::from_indices(family, j_max, dirichlet, items))
}

/// `dim V_J` on the square without boundary restriction.
pub fn dim_v(j_max: u32, family: BasisFamily) -> usize {
    let (a, b) = family.translation_range(Generator::Phi, j_max);
    let n = (b - a + 1) as usize;
    n * n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_cardinalities() {
        let s = full_index_set(1, BasisFamily::Haar, DirichletEdges::NONE).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(
            s.iter().filter(|w| w.is_scaling()).count(),
            1,
            "single scaling function at level 0"
        );
        let s2 = full_index_set(2, BasisFamily::Haar, DirichletEdges::NONE).unwrap();
        assert_eq!(s2.len(), 16);
    }

    #[test]
    fn cardinality_matches_dimension() {
        for f in BasisFamily::ALL {
            for j in 1..=6 {
                let s = full_index_set(j, f, DirichletEdges::NONE).unwrap();
                // brute-force count of admissible translations
                let count = |g, lvl| {
                    let (a, b) = f.translation_range(g, lvl);
                    (a..=b).count()
                };
                let mut brute = count(Generator::Phi, 0).pow(2);
                for lvl in 0..j {
                    brute +=
                        2 * count(Generator::Psi, lvl) * count(Generator::Phi, lvl) + count(Generator::Psi, lvl).pow(2);
                }
                assert_eq!(s.len(), brute, "{f} J={j}");
                assert_eq!(s.len(), dim_v(j, f), "{f} J={j}");
            }
        }
    }

    #[test]
    fn ordering_is_deterministic_and_sorted() {
        let a = full_index_set(3, BasisFamily::Daubechies4, DirichletEdges::ALL).unwrap();
        let b = full_index_set(3, BasisFamily::Daubechies4, DirichletEdges::ALL).unwrap();
        assert_eq!(a, b);
        assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
        for (i, w) in a.iter().enumerate() {
            assert_eq!(a.ordinal(w), Some(i));
        }
    }

    #[test]
    fn dirichlet_restriction() {
        let d = DirichletEdges::from_edges(&[Edge::Bottom, Edge::Top]);
        let s = full_index_set(2, BasisFamily::HierarchicalHat, d).unwrap();
        // hat: nodes 0..=4 in x, interior nodes 1..=3 in y
        assert_eq!(s.len(), 5 * 3);
        assert!(s.iter().all(|w| !(w.is_scaling() && (w.ky == 0 || w.ky == 1))));
        // Haar drops every factor touching the edge.
        let h = full_index_set(1, BasisFamily::Haar, DirichletEdges::ALL).unwrap();
        assert!(h.is_empty());
        // D4 keeps k=0 scaling (zero trace at its support start) on the left.
        assert!(factor_admissible(BasisFamily::Daubechies4, Generator::Phi, 0, 0, 0));
        assert!(!factor_admissible(BasisFamily::Daubechies4, Generator::Phi, 0, -1, 0));
    }

    #[test]
    fn too_large_is_reported() {
        assert!(matches!(
            full_index_set(13, BasisFamily::HierarchicalHat, DirichletEdges::NONE),
            Err(MraError::TooLarge { .. })
        ));
        assert!(full_index_set(0, BasisFamily::Haar, DirichletEdges::NONE).is_err());
    }
}
