//! Tensor-product multiresolution basis on the unit square.
//!
//! The 2-D basis is the single-coarse-scale Mallat construction: level-0
//! scaling functions `φ⊗φ` plus, for each level `j < J`, the three wavelet
//! orientations built from `ψ_j` and the level-`j` scaling function in the
//! other direction. Each factor carries the `L²` level scaling `2^{j/2}`.
//! Homogeneous Dirichlet edges are handled by restriction: any factor whose
//! trace on such an edge can be nonzero is left out.

mod basis;
mod family;
mod index;
mod project;
mod table;

pub use basis::{Basis, Evaluator, IndexLookup};
pub use family::{BasisFamily, Generator};
pub use index::{
    admissible_translations, axis_flags, dim_v, factor_admissible, full_index_set, kind_name, IndexSet, Kind,
    Orientation, WaveletIndex, MAX_INDEX_SET_LEN,
};
pub use project::{hat_interpolation, project_function};
pub use table::{integer_values, DyadicTable, MAX_TABLE_DEPTH, MIN_TABLE_DEPTH};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MraError {
    #[error("table construction failed: {0}")]
    Construction(String),
    #[error("coefficient vector has length {got}, index set has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(
        "index set for J={j} would hold {cardinality} functions, above the limit of {}",
        MAX_INDEX_SET_LEN
    )]
    TooLarge { j: u32, cardinality: u128 },
    #[error("{0}")]
    Invalid(String),
    #[error("projection failed: {0}")]
    Projection(String),
}
