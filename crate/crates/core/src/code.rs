//! The row-wise parity-check view shared by every construction.

use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

use crate::field::{Field, FieldError};
use crate::linalg::Matrix;
use crate::msr::{MsrError, MsrParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Msr(#[from] MsrError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("construction needs a field of characteristic 2")]
    NotCharacteristicTwo,
    #[error("field of {size} elements is below the required {needed}")]
    FieldTooSmall { needed: u128, size: String },
    #[error("locator generator has order {order}, needs at least {needed}")]
    OrderTooSmall { needed: u64, order: u64 },
    #[error("stride N = {stride} is below the required {min}")]
    StrideTooSmall { stride: u64, min: u64 },
    #[error("extension degree {0} exceeds the supported maximum")]
    ExtensionTooLarge(u64),
    #[error("global coefficients {witness:?} are linearly dependent over the base field")]
    DependentAlphas { witness: Vec<usize> },
    #[error("independence check needs {subsets} subset ranks, over the limit of {limit}")]
    IndependenceLimit { subsets: u64, limit: u64 },
}

/// Dimensions of a locally regenerating array code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CodeShape {
    /// Number of local groups.
    pub mu: usize,
    /// Nodes per local group.
    pub n: usize,
    /// Local parities per group.
    pub r: usize,
    /// Global parities.
    pub s: usize,
    /// Rows per node (subpacketization).
    pub ell: usize,
}

impl CodeShape {
    /// Total number of nodes `mu * n`.
    pub fn length(&self) -> usize {
        self.mu * self.n
    }

    /// Information nodes per array `mu (n - r) - s`.
    pub fn dimension(&self) -> usize {
        self.mu * (self.n - self.r) - self.s
    }

    pub fn group_of(&self, column: usize) -> usize {
        column / self.n
    }

    pub fn group_columns(&self, group: usize) -> Range<usize> {
        group * self.n..(group + 1) * self.n
    }

    /// Rows of the full parity-check matrix: `r mu + s`.
    pub fn check_rows(&self) -> usize {
        self.r * self.mu + self.s
    }
}

/// A linear array code whose row `a` is the kernel of an `(r mu + s) x mu n`
/// matrix: `mu` copies of the local block on the diagonal, `s` global rows below.
pub trait ArrayCode: Send + Sync {
    fn field(&self) -> &Field;

    fn shape(&self) -> CodeShape;

    /// The Ye–Barg code every local group uses.
    fn local_code(&self) -> &MsrParams;

    /// The `s x mu n` global rows of row `a`.
    fn global_rows(&self, a: usize) -> Matrix;

    /// Full parity-check matrix of row `a`.
    fn parity_check(&self, a: usize) -> Matrix {
        let shape = self.shape();
        let field = self.field();
        let local = self.local_code().local_parity_matrix(a);
        let global = self.global_rows(a);
        let mut h = Matrix::zeros(field, shape.check_rows(), shape.length());
        for g in 0..shape.mu {
            for t in 0..shape.r {
                for k in 0..shape.n {
                    h.set(g * shape.r + t, g * shape.n + k, local.get(t, k).clone());
                }
            }
        }
        for t in 0..shape.s {
            for c in 0..shape.length() {
                h.set(shape.r * shape.mu + t, c, global.get(t, c).clone());
            }
        }
        h
    }
}

/// Achieved field size against the construction's requirements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSizeReport {
    pub construction: String,
    /// Base field size q.
    pub q: u128,
    /// Extension degree M (1 when the code lives in GF(q)).
    pub ext_degree: usize,
    /// Decimal `q^M`.
    pub field_size: String,
    pub field_size_log2: f64,
    pub b: usize,
    pub ell: usize,
    /// `ell == b^n` with `b = d + 1 - (n - r)`.
    pub ell_identity_holds: bool,
    /// Smallest admissible q for the construction.
    pub min_q: u128,
    /// Global-row stride N (two-global-parity constructions).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    /// Closed-form upper bound `2n b (2 n mu)^(s(r+1)-1)` on the field size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size_bound: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_size_bound: Option<bool>,
    /// Extension degree bound `1 + (s(r+1) - 1) a` for the BCH recipe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ext_degree_bound: Option<u64>,
}
