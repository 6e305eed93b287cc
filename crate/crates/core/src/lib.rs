//! Locally regenerating partial-MDS (PMDS) and sector-disk (SD) array codes.
//!
//! Every local group of `n` nodes is a Ye–Barg minimum-storage regenerating
//! code, so a single failed node is rebuilt from `d` helpers at the cut-set
//! bound, while the code as a whole corrects `r` erasures per group plus `s`
//! more anywhere.
//!
//! * [`field`]: GF(2^w), GF(p) and extensions GF(q^M).
//! * [`msr`]: the local regenerating code and its repair procedure.
//! * [`construction_s2`]: two global parities over characteristic-2 fields.
//! * [`construction_general`]: any number of global parities over GF(q^M).
//! * [`codec`]: systematic encoding, erasure decoding, single-node repair.
//! * [`verifier`]: exhaustive certification of the MDS, PMDS, SD and
//!   bandwidth properties.

pub mod code;
pub mod codec;
pub mod combinatorics;
pub mod construction_general;
pub mod construction_s2;
pub mod field;
pub mod linalg;
pub mod msr;
pub mod verifier;

pub use code::{ArrayCode, CodeShape, FieldSizeReport};
pub use field::{Field, FieldElement, FieldError, FieldSpec};
pub use linalg::Matrix;
pub use msr::{MsrParams, RepairPlan};
