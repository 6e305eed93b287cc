//! Systematic encoding, erasure decoding and single-node repair for any
//! [`ArrayCode`]. Every row of the array is an independent codeword of its
//! own parity-check matrix, so all work is per-row linear algebra.

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::code::{ArrayCode, CodeShape};
use crate::combinatorics::combinations;
use crate::field::{Field, FieldElement};
use crate::linalg::{self, LinalgError, Matrix};
use crate::msr::MsrError;
use crate::verifier::msr_bound;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("column {0} is out of range")]
    ColumnOutOfRange(usize),
    #[error("parity columns are singular in row {row}; the code is not valid")]
    SingularParity { row: usize },
    #[error("erasures {columns:?} are not correctable (rank deficient in row {row})")]
    RankDeficient { row: usize, columns: Vec<usize> },
    #[error("row {row} violates its parity checks")]
    ParityViolation { row: usize },
    #[error(transparent)]
    Msr(#[from] MsrError),
}

/// `ell x (mu n)` symbols; `column_ids` names the original column of each
/// stored column so restrictions compose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordArray {
    rows: Vec<Vec<FieldElement>>,
    column_ids: Vec<usize>,
}

impl CodewordArray {
    pub fn from_rows(rows: Vec<Vec<FieldElement>>) -> CodewordArray {
        let width = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == width), "ragged rows");
        CodewordArray {
            rows,
            column_ids: (0..width).collect(),
        }
    }

    /// Builds an array from node columns, each of `ell` symbols.
    pub fn from_columns(columns: &[Vec<FieldElement>]) -> CodewordArray {
        let ell = columns.first().map_or(0, Vec::len);
        let rows = (0..ell)
            .map(|a| columns.iter().map(|c| c[a].clone()).collect())
            .collect();
        CodewordArray::from_rows(rows)
    }

    pub fn zeros(field: &Field, shape: &CodeShape) -> CodewordArray {
        CodewordArray::from_rows(vec![vec![field.zero(); shape.length()]; shape.ell])
    }

    pub fn ell(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.column_ids.len()
    }

    pub fn column_ids(&self) -> &[usize] {
        &self.column_ids
    }

    pub fn rows(&self) -> &[Vec<FieldElement>] {
        &self.rows
    }

    pub fn row(&self, a: usize) -> &[FieldElement] {
        &self.rows[a]
    }

    pub fn get(&self, a: usize, c: usize) -> &FieldElement {
        &self.rows[a][c]
    }

    pub fn column(&self, c: usize) -> Vec<FieldElement> {
        self.rows.iter().map(|r| r[c].clone()).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[FieldElement]) {
        assert_eq!(values.len(), self.rows.len());
        for (row, v) in self.rows.iter_mut().zip(values) {
            row[c] = v.clone();
        }
    }

    /// Keeps the columns whose original ids lie in `keep`, in stored order.
    pub fn restrict(&self, keep: &[usize]) -> CodewordArray {
        let keep: BTreeSet<usize> = keep.iter().copied().collect();
        let positions: Vec<usize> = (0..self.width())
            .filter(|&p| keep.contains(&self.column_ids[p]))
            .collect();
        CodewordArray {
            rows: self
                .rows
                .iter()
                .map(|r| positions.iter().map(|&p| r[p].clone()).collect())
                .collect(),
            column_ids: positions.iter().map(|&p| self.column_ids[p]).collect(),
        }
    }

    fn check_full(&self, shape: &CodeShape) -> Result<(), CodecError> {
        if self.ell() != shape.ell
            || self.width() != shape.length()
            || self.column_ids.iter().enumerate().any(|(i, &c)| i != c)
        {
            return Err(CodecError::Shape(format!(
                "expected a full {} x {} array, got {} x {}",
                shape.ell,
                shape.length(),
                self.ell(),
                self.width()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternClass {
    /// At most `r` erasures in every group.
    Local,
    /// The same `r` positions in every group plus at most `s` more.
    SectorDisk,
    /// `r` per group plus at most `s` more anywhere.
    Pmds,
    /// Beyond what the code guarantees.
    Uncorrectable,
}

/// A set of erased columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasurePattern {
    erased: BTreeSet<usize>,
}

impl ErasurePattern {
    pub fn new(
        shape: &CodeShape,
        columns: impl IntoIterator<Item = usize>,
    ) -> Result<ErasurePattern, CodecError> {
        let erased: BTreeSet<usize> = columns.into_iter().collect();
        if let Some(&c) = erased.iter().find(|&&c| c >= shape.length()) {
            return Err(CodecError::ColumnOutOfRange(c));
        }
        Ok(ErasurePattern { erased })
    }

    pub fn none() -> ErasurePattern {
        ErasurePattern {
            erased: BTreeSet::new(),
        }
    }

    pub fn erased(&self) -> &BTreeSet<usize> {
        &self.erased
    }

    pub fn len(&self) -> usize {
        self.erased.len()
    }

    pub fn is_empty(&self) -> bool {
        self.erased.is_empty()
    }

    pub fn contains(&self, c: usize) -> bool {
        self.erased.contains(&c)
    }

    /// Erased columns of each group.
    pub fn per_group(&self, shape: &CodeShape) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); shape.mu];
        for &c in &self.erased {
            groups[shape.group_of(c)].push(c);
        }
        groups
    }

    pub fn group_counts(&self, shape: &CodeShape) -> Vec<usize> {
        self.per_group(shape).iter().map(Vec::len).collect()
    }

    pub fn classify(&self, shape: &CodeShape) -> PatternClass {
        let counts = self.group_counts(shape);
        if counts.iter().all(|&c| c <= shape.r) {
            return PatternClass::Local;
        }
        let excess: usize = counts.iter().map(|&c| c.saturating_sub(shape.r)).sum();
        if excess > shape.s {
            return PatternClass::Uncorrectable;
        }
        let sd = combinations(shape.n, shape.r).any(|disks| {
            let outside = self
                .erased
                .iter()
                .filter(|&&c| !disks.contains(&(c % shape.n)))
                .count();
            outside <= shape.s
        });
        if sd {
            PatternClass::SectorDisk
        } else {
            PatternClass::Pmds
        }
    }

    /// `r` random columns per group plus `s` random extras.
    pub fn random_pmds<R: Rng + ?Sized>(shape: &CodeShape, rng: &mut R) -> ErasurePattern {
        let mut erased = BTreeSet::new();
        let mut rest = Vec::new();
        for g in 0..shape.mu {
            let mut cols: Vec<usize> = shape.group_columns(g).collect();
            cols.shuffle(rng);
            erased.extend(cols[..shape.r].iter().copied());
            rest.extend(cols[shape.r..].iter().copied());
        }
        rest.shuffle(rng);
        erased.extend(rest[..shape.s].iter().copied());
        ErasurePattern { erased }
    }
}

/// Which columns carry data and which carry parity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystematicLayout {
    pub info_positions: Vec<usize>,
    pub parity_positions: Vec<usize>,
}

impl SystematicLayout {
    /// Parity on the last `r` columns of every group plus `s` extras taken
    /// from the end of the remaining columns, last group first.
    pub fn new(shape: &CodeShape) -> SystematicLayout {
        let keep = shape.n - shape.r;
        let mut parity = BTreeSet::new();
        for g in 0..shape.mu {
            parity.extend(shape.group_columns(g).skip(keep));
        }
        let mut left = shape.s;
        for g in (0..shape.mu).rev() {
            let take = left.min(keep);
            let start = g * shape.n + keep - take;
            parity.extend(start..start + take);
            left -= take;
        }
        let info = (0..shape.length()).filter(|c| !parity.contains(c)).collect();
        SystematicLayout {
            info_positions: info,
            parity_positions: parity.into_iter().collect(),
        }
    }
}

/// Systematic encoder with one cached generator block per row.
#[derive(Debug, Clone)]
pub struct Encoder {
    field: Field,
    shape: CodeShape,
    layout: SystematicLayout,
    /// `gens[a]` maps the info symbols of row `a` to its parity symbols.
    gens: Vec<Matrix>,
}

impl Encoder {
    pub fn new(code: &dyn ArrayCode) -> Result<Encoder, CodecError> {
        let shape = code.shape();
        let field = code.field().clone();
        let layout = SystematicLayout::new(&shape);
        let gens = (0..shape.ell)
            .into_par_iter()
            .map(|a| {
                let h = code.parity_check(a);
                let hp = h.select_columns(&layout.parity_positions);
                let hi = h.select_columns(&layout.info_positions);
                linalg::solve(&field, &hp, &hi)
                    .map(|x| x.neg(&field))
                    .map_err(|_| CodecError::SingularParity { row: a })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Encoder {
            field,
            shape,
            layout,
            gens,
        })
    }

    pub fn layout(&self) -> &SystematicLayout {
        &self.layout
    }

    pub fn shape(&self) -> CodeShape {
        self.shape
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Number of information nodes `mu (n - r) - s`.
    pub fn info_nodes(&self) -> usize {
        self.layout.info_positions.len()
    }

    /// `data[k]` is the column (`ell` symbols) stored on the `k`-th info node.
    pub fn encode(&self, data: &[Vec<FieldElement>]) -> Result<CodewordArray, CodecError> {
        let k = self.info_nodes();
        let ell = self.shape.ell;
        if data.len() != k || data.iter().any(|c| c.len() != ell) {
            return Err(CodecError::Shape(format!("data must be {k} columns of {ell} symbols")));
        }
        let rows = (0..ell)
            .into_par_iter()
            .map(|a| {
                let info: Vec<FieldElement> = data.iter().map(|c| c[a].clone()).collect();
                let parity = self.gens[a].mul_vec(&self.field, &info);
                let mut row = vec![self.field.zero(); self.shape.length()];
                for (&p, v) in self.layout.info_positions.iter().zip(info) {
                    row[p] = v;
                }
                for (&p, v) in self.layout.parity_positions.iter().zip(parity) {
                    row[p] = v;
                }
                row
            })
            .collect();
        Ok(CodewordArray::from_rows(rows))
    }

    pub fn extract_info(&self, array: &CodewordArray) -> Result<Vec<Vec<FieldElement>>, CodecError> {
        array.check_full(&self.shape)?;
        Ok(self
            .layout
            .info_positions
            .iter()
            .map(|&c| array.column(c))
            .collect())
    }

    pub fn random_data<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<FieldElement>> {
        (0..self.info_nodes())
            .map(|_| (0..self.shape.ell).map(|_| self.field.random(rng)).collect())
            .collect()
    }
}

/// Checks `H(a) c(a) = 0` for every row.
pub fn validate(code: &dyn ArrayCode, array: &CodewordArray) -> Result<(), CodecError> {
    let shape = code.shape();
    array.check_full(&shape)?;
    let f = code.field();
    (0..shape.ell).into_par_iter().try_for_each(|a| {
        let syndrome = code.parity_check(a).mul_vec(f, array.row(a));
        if syndrome.iter().all(|x| f.is_zero(x)) {
            Ok(())
        } else {
            Err(CodecError::ParityViolation { row: a })
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeStats {
    /// Groups finished by their local parities alone.
    pub local_groups: Vec<usize>,
    /// Groups that needed the global parities.
    pub global_groups: Vec<usize>,
    /// Every column whose symbols were read, over all rows.
    pub columns_read: BTreeSet<usize>,
}

/// Recovers the erased columns of `array`; values stored there are ignored.
pub fn decode_erasures(
    code: &dyn ArrayCode,
    array: &CodewordArray,
    pattern: &ErasurePattern,
) -> Result<CodewordArray, CodecError> {
    decode_erasures_with_stats(code, array, pattern).map(|(a, _)| a)
}

pub fn decode_erasures_with_stats(
    code: &dyn ArrayCode,
    array: &CodewordArray,
    pattern: &ErasurePattern,
) -> Result<(CodewordArray, DecodeStats), CodecError> {
    let shape = code.shape();
    array.check_full(&shape)?;
    if let Some(&c) = pattern.erased().iter().find(|&&c| c >= shape.length()) {
        return Err(CodecError::ColumnOutOfRange(c));
    }
    let groups = pattern.per_group(&shape);
    let mut stats = DecodeStats::default();
    for (g, cols) in groups.iter().enumerate() {
        if cols.len() > shape.r {
            stats.global_groups.push(g);
        } else if !cols.is_empty() {
            stats.local_groups.push(g);
        }
    }
    let results: Vec<Result<RowSolution, CodecError>> = (0..shape.ell)
        .into_par_iter()
        .map(|a| decode_row(code, a, array.row(a), pattern, &groups, &stats))
        .collect();
    let mut rows = Vec::with_capacity(shape.ell);
    for res in results {
        let (row, read) = res?;
        stats.columns_read.extend(read);
        rows.push(row);
    }
    Ok((CodewordArray::from_rows(rows), stats))
}

/// A decoded row and the columns read to produce it.
type RowSolution = (Vec<FieldElement>, BTreeSet<usize>);

fn decode_row(
    code: &dyn ArrayCode,
    a: usize,
    input: &[FieldElement],
    pattern: &ErasurePattern,
    groups: &[Vec<usize>],
    plan: &DecodeStats,
) -> Result<RowSolution, CodecError> {
    let shape = code.shape();
    let f = code.field();
    let mut row = input.to_vec();
    let mut read = BTreeSet::new();
    if pattern.is_empty() {
        return Ok((row, read));
    }
    let deficient = |cols: Vec<usize>| CodecError::RankDeficient { row: a, columns: cols };
    let h = code.parity_check(a);
    for &g in &plan.local_groups {
        let erased = &groups[g];
        let known: Vec<usize> = shape.group_columns(g).filter(|c| !pattern.contains(*c)).collect();
        let local_rows: Vec<usize> = (g * shape.r..(g + 1) * shape.r).collect();
        let hl = h.select_rows(&local_rows);
        let rhs = rhs_for(f, &hl, &row, &known);
        read.extend(known.iter().copied());
        let x = linalg::solve(f, &hl.select_columns(erased), &rhs)
            .map_err(|_| deficient(erased.clone()))?;
        for (k, &c) in erased.iter().enumerate() {
            row[c] = x.get(k, 0).clone();
        }
    }
    if !plan.global_groups.is_empty() {
        let unknown: Vec<usize> = plan
            .global_groups
            .iter()
            .flat_map(|&g| groups[g].iter().copied())
            .collect();
        let mut eq_rows: Vec<usize> = plan
            .global_groups
            .iter()
            .flat_map(|&g| g * shape.r..(g + 1) * shape.r)
            .collect();
        eq_rows.extend(shape.r * shape.mu..shape.check_rows());
        let unknown_set: BTreeSet<usize> = unknown.iter().copied().collect();
        let known: Vec<usize> = (0..shape.length()).filter(|c| !unknown_set.contains(c)).collect();
        read.extend(known.iter().copied().filter(|c| !pattern.contains(*c)));
        let hs = h.select_rows(&eq_rows);
        let rhs = rhs_for(f, &hs, &row, &known);
        let x = linalg::solve(f, &hs.select_columns(&unknown), &rhs).map_err(|e| match e {
            LinalgError::RankDeficient { .. } | LinalgError::Dimension => deficient(pattern.erased().iter().copied().collect()),
        })?;
        for (k, &c) in unknown.iter().enumerate() {
            row[c] = x.get(k, 0).clone();
        }
    }
    Ok((row, read))
}

/// `-sum_{c in known} H[:, c] row[c]` as a column matrix.
fn rhs_for(f: &Field, h: &Matrix, row: &[FieldElement], known: &[usize]) -> Matrix {
    Matrix::from_fn(h.rows(), 1, |t, _| {
        let mut acc = f.zero();
        for &c in known {
            acc = f.sub(&acc, &f.mul(h.get(t, c), &row[c]));
        }
        acc
    })
}

/// Result of repairing one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairOutcome {
    pub node: usize,
    pub column: Vec<FieldElement>,
    /// Global column ids of the helpers (regenerating repair) or of every
    /// column read (fallback).
    pub helpers: Vec<usize>,
    pub downloaded: usize,
    /// Symbols a plain MDS repair reads: `(n - r) ell`.
    pub naive: usize,
    /// Cut-set bound for one failure and `d` helpers.
    pub bound: Ratio<u64>,
    /// False when too few helpers survived and the node was decoded instead.
    pub regenerated: bool,
}

/// Repairs `failed` from `helpers` (global column ids in its group) with the
/// local regenerating code.
pub fn repair_single_with_helpers(
    code: &dyn ArrayCode,
    array: &CodewordArray,
    failed: usize,
    helpers: &[usize],
) -> Result<RepairOutcome, CodecError> {
    let shape = code.shape();
    array.check_full(&shape)?;
    if failed >= shape.length() {
        return Err(CodecError::ColumnOutOfRange(failed));
    }
    let g = shape.group_of(failed);
    let base = g * shape.n;
    if let Some(&h) = helpers.iter().find(|&&h| h >= shape.length() || shape.group_of(h) != g) {
        return Err(MsrError::InvalidHelpers(format!("column {h} is not in group {g}")).into());
    }
    let local = code.local_code();
    let cols: Vec<Vec<FieldElement>> = helpers.iter().map(|&h| array.column(h)).collect();
    let col_refs: Vec<&[FieldElement]> = cols.iter().map(Vec::as_slice).collect();
    let local_helpers: Vec<usize> = helpers.iter().map(|h| h - base).collect();
    let plan = local.make_repair_plan(failed - base, &local_helpers, &col_refs)?;
    let column = local.repair_node(&plan)?;
    Ok(RepairOutcome {
        node: failed,
        column,
        helpers: helpers.to_vec(),
        downloaded: plan.symbols_sent(),
        naive: (shape.n - shape.r) * shape.ell,
        bound: repair_bound(&shape, local.d()),
        regenerated: true,
    })
}

fn repair_bound(shape: &CodeShape, d: usize) -> Ratio<u64> {
    msr_bound(1, d, shape.n, shape.r, shape.ell).expect("d is a valid repair degree")
}

/// Repairs `failed` given that the columns in `unavailable` are also lost.
/// Uses the first `d` surviving nodes of the group; with fewer survivors it
/// falls back to erasure decoding and clears `regenerated`.
pub fn repair_single(
    code: &dyn ArrayCode,
    array: &CodewordArray,
    failed: usize,
    unavailable: &BTreeSet<usize>,
) -> Result<RepairOutcome, CodecError> {
    let shape = code.shape();
    if failed >= shape.length() {
        return Err(CodecError::ColumnOutOfRange(failed));
    }
    let d = code.local_code().d();
    let survivors: Vec<usize> = shape
        .group_columns(shape.group_of(failed))
        .filter(|c| *c != failed && !unavailable.contains(c))
        .collect();
    if survivors.len() >= d {
        return repair_single_with_helpers(code, array, failed, &survivors[..d]);
    }
    let mut lost = unavailable.clone();
    lost.insert(failed);
    let pattern = ErasurePattern::new(&shape, lost)?;
    let (decoded, stats) = decode_erasures_with_stats(code, array, &pattern)?;
    Ok(RepairOutcome {
        node: failed,
        column: decoded.column(failed),
        helpers: stats.columns_read.iter().copied().collect(),
        downloaded: stats.columns_read.len() * shape.ell,
        naive: (shape.n - shape.r) * shape.ell,
        bound: repair_bound(&shape, d),
        regenerated: false,
    })
}
