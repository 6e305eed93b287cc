//! Brute-force certification: every erasure pattern a property promises to
//! correct is checked by a rank computation on the matching columns of every
//! row's parity-check matrix.
//!
//! Patterns are enumerated lexicographically (first the per-group sets `E_i`,
//! then the extra set `T`, then the row), so the reported witness is the
//! first failure in that order regardless of thread count.

use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::code::{ArrayCode, CodeShape};
use crate::codec::{decode_erasures, repair_single_with_helpers, CodecError, CodewordArray, Encoder, ErasurePattern};
use crate::combinatorics::{binomial, combinations, unrank_combination};
use crate::linalg::{self, Matrix};

/// Default cap on `patterns x rows` rank checks.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("{checks} rank checks exceed the budget of {budget}; allow large runs or sample")]
    BudgetExceeded { checks: u64, budget: u64 },
    #[error("cut-set bound undefined: {0}")]
    InvalidBound(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Property {
    #[serde(rename = "LOCAL_MDS")]
    LocalMds,
    #[serde(rename = "PMDS")]
    Pmds,
    #[serde(rename = "SD")]
    Sd,
    #[serde(rename = "MSR_BANDWIDTH")]
    MsrBandwidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

/// A pattern and row where the property breaks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    /// Erased columns (for bandwidth audits: failed node then helpers).
    pub pattern: Vec<usize>,
    pub row: usize,
    /// Columns of the parity-check matrix that are linearly dependent.
    pub deficient_columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub property: Property,
    pub patterns_checked: u64,
    /// Distinct array rows examined.
    pub rows_checked: u64,
    /// `patterns x rows` rank checks actually run.
    pub rank_checks: u64,
    pub result: Outcome,
    pub witness: Option<Witness>,
    /// Fraction of the pattern space covered (1 when exhaustive).
    pub coverage: f64,
    pub exhaustive: bool,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.result == Outcome::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOptions {
    pub budget: u64,
    /// Run exhaustively even past the budget.
    pub allow_large: bool,
    /// Check this many uniformly random (pattern, row) pairs instead.
    pub sample: Option<u64>,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> VerifyOptions {
        VerifyOptions {
            budget: DEFAULT_BUDGET,
            allow_large: false,
            sample: None,
            seed: 0,
        }
    }
}

/// `h |R| ell / (h + |R| - n + r)` for `h` failures and `d` helpers.
pub fn msr_bound(h: usize, d: usize, n: usize, r: usize, ell: usize) -> Result<Ratio<u64>, VerifyError> {
    if h + d > n {
        return Err(VerifyError::InvalidBound(format!("h + d = {} exceeds n = {n}", h + d)));
    }
    let denom = (h + d + r) as i64 - n as i64;
    if denom <= 0 {
        return Err(VerifyError::InvalidBound(format!("denominator {denom} is not positive")));
    }
    Ok(Ratio::new((h * d * ell) as u64, denom as u64))
}

/// Enumerates the pattern space of one property.
trait PatternSpace: Sync {
    fn count(&self) -> u64;
    /// Pattern `idx` in lexicographic order, as sorted column ids.
    fn pattern(&self, idx: u64) -> Vec<usize>;
    fn random<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        self.pattern(rng.gen_range(0..self.count()))
    }
}

struct LocalSpace {
    shape: CodeShape,
}

impl PatternSpace for LocalSpace {
    fn count(&self) -> u64 {
        self.shape.mu as u64 * binomial(self.shape.n, self.shape.r)
    }

    fn pattern(&self, idx: u64) -> Vec<usize> {
        let per = binomial(self.shape.n, self.shape.r);
        let g = (idx / per) as usize;
        unrank_combination(self.shape.n, self.shape.r, idx % per)
            .into_iter()
            .map(|k| g * self.shape.n + k)
            .collect()
    }
}

/// `r` erased columns per group (independent, or common disks for SD) plus
/// `s` extras among the rest.
struct GlobalSpace {
    shape: CodeShape,
    common_disks: bool,
}

impl GlobalSpace {
    fn local_choices(&self) -> u64 {
        let per = binomial(self.shape.n, self.shape.r);
        if self.common_disks {
            per
        } else {
            (0..self.shape.mu).fold(1u64, |acc, _| acc.saturating_mul(per))
        }
    }

    fn extra_choices(&self) -> u64 {
        binomial(self.shape.mu * (self.shape.n - self.shape.r), self.shape.s)
    }
}

impl PatternSpace for GlobalSpace {
    fn count(&self) -> u64 {
        self.local_choices().saturating_mul(self.extra_choices())
    }

    fn pattern(&self, idx: u64) -> Vec<usize> {
        let sh = &self.shape;
        let per = binomial(sh.n, sh.r);
        let extras = self.extra_choices();
        let mut local = idx / extras;
        let mut erased = BTreeSet::new();
        // group 0 is the most significant digit, keeping lexicographic order
        let mut digits = vec![0u64; sh.mu];
        if self.common_disks {
            digits.iter_mut().for_each(|d| *d = local);
        } else {
            for g in (0..sh.mu).rev() {
                digits[g] = local % per;
                local /= per;
            }
        }
        for (g, &digit) in digits.iter().enumerate() {
            for k in unrank_combination(sh.n, sh.r, digit) {
                erased.insert(g * sh.n + k);
            }
        }
        let rest: Vec<usize> = (0..sh.length()).filter(|c| !erased.contains(c)).collect();
        for k in unrank_combination(rest.len(), sh.s, idx % extras) {
            erased.insert(rest[k]);
        }
        erased.into_iter().collect()
    }
}

/// Whether the given columns of `h` (restricted to `rows`, all rows if
/// `None`) are linearly independent.
fn independent(code: &dyn ArrayCode, h: &Matrix, rows: Option<&[usize]>, cols: &[usize]) -> bool {
    let sub = h.select_columns(cols);
    let sub = match rows {
        Some(r) => sub.select_rows(r),
        None => sub,
    };
    linalg::is_full_column_rank(code.field(), &sub)
}

fn sweep<S: PatternSpace>(
    code: &dyn ArrayCode,
    property: Property,
    space: &S,
    local_rows: bool,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    let shape = code.shape();
    let ell = shape.ell as u64;
    let total = space.count();
    let checks = total.saturating_mul(ell);
    let checks_for = |cols: &[usize], h: &Matrix| -> bool {
        if local_rows {
            let g = shape.group_of(cols[0]);
            let rows: Vec<usize> = (g * shape.r..(g + 1) * shape.r).collect();
            independent(code, h, Some(&rows), cols)
        } else {
            independent(code, h, None, cols)
        }
    };
    let matrices: Vec<Matrix> = (0..shape.ell).into_par_iter().map(|a| code.parity_check(a)).collect();
    let witness_of = |pattern: Vec<usize>, row: usize| Witness {
        deficient_columns: pattern.clone(),
        pattern,
        row,
    };
    if let Some(samples) = opts.sample {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let draws: Vec<(Vec<usize>, usize)> = (0..samples)
            .map(|_| (space.random(&mut rng), rng.gen_range(0..shape.ell)))
            .collect();
        let witness = draws
            .into_par_iter()
            .find_map_first(|(p, a)| (!checks_for(&p, &matrices[a])).then(|| witness_of(p, a)));
        return Ok(VerificationReport {
            property,
            patterns_checked: samples,
            rows_checked: ell,
            rank_checks: samples,
            result: if witness.is_some() { Outcome::Fail } else { Outcome::Pass },
            witness,
            coverage: if checks == 0 { 1.0 } else { (samples as f64 / checks as f64).min(1.0) },
            exhaustive: false,
        });
    }
    if checks > opts.budget && !opts.allow_large {
        return Err(VerifyError::BudgetExceeded {
            checks,
            budget: opts.budget,
        });
    }
    let witness = (0..total).into_par_iter().find_map_first(|idx| {
        let p = space.pattern(idx);
        (0..shape.ell)
            .find(|&a| !checks_for(&p, &matrices[a]))
            .map(|a| witness_of(p, a))
    });
    Ok(VerificationReport {
        property,
        patterns_checked: total,
        rows_checked: ell,
        rank_checks: checks,
        result: if witness.is_some() { Outcome::Fail } else { Outcome::Pass },
        witness,
        coverage: 1.0,
        exhaustive: true,
    })
}

/// Every `r` columns of every group are independent under that group's
/// local parities, in every row.
pub fn verify_local_mds(code: &dyn ArrayCode, opts: &VerifyOptions) -> Result<VerificationReport, VerifyError> {
    let space = LocalSpace { shape: code.shape() };
    sweep(code, Property::LocalMds, &space, true, opts)
}

/// `r` erasures in every group plus any `s` more are correctable.
pub fn verify_pmds(code: &dyn ArrayCode, opts: &VerifyOptions) -> Result<VerificationReport, VerifyError> {
    let space = GlobalSpace {
        shape: code.shape(),
        common_disks: false,
    };
    sweep(code, Property::Pmds, &space, false, opts)
}

/// Like [`verify_pmds`] with the per-group sets equal across groups.
pub fn verify_sd(code: &dyn ArrayCode, opts: &VerifyOptions) -> Result<VerificationReport, VerifyError> {
    let space = GlobalSpace {
        shape: code.shape(),
        common_disks: true,
    };
    sweep(code, Property::Sd, &space, false, opts)
}

/// All patterns [`verify_pmds`] would check, in order.
pub fn pmds_patterns(shape: &CodeShape) -> impl Iterator<Item = Vec<usize>> + '_ {
    let space = GlobalSpace {
        shape: *shape,
        common_disks: false,
    };
    (0..space.count()).map(move |i| space.pattern(i))
}

/// All patterns [`verify_sd`] would check, in order.
pub fn sd_patterns(shape: &CodeShape) -> impl Iterator<Item = Vec<usize>> + '_ {
    let space = GlobalSpace {
        shape: *shape,
        common_disks: true,
    };
    (0..space.count()).map(move |i| space.pattern(i))
}

/// Repairs every node of every group from every `d`-subset of its group,
/// on a random codeword and on the zero codeword, requiring exact
/// reconstruction and a download equal to the cut-set bound.
pub fn audit_repair_bandwidth(
    code: &dyn ArrayCode,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    let shape = code.shape();
    let d = code.local_code().d();
    let bound = msr_bound(1, d, shape.n, shape.r, shape.ell)?;
    let enc = Encoder::new(code)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codewords = [
        enc.encode(&enc.random_data(&mut rng))?,
        CodewordArray::zeros(code.field(), &shape),
    ];
    let mut jobs = Vec::new();
    for g in 0..shape.mu {
        for i in 0..shape.n {
            let others: Vec<usize> = (0..shape.n).filter(|&k| k != i).collect();
            for helpers in combinations(others.len(), d) {
                let failed = g * shape.n + i;
                let helpers: Vec<usize> = helpers.iter().map(|&k| g * shape.n + others[k]).collect();
                jobs.push((failed, helpers));
            }
        }
    }
    let count = jobs.len() as u64;
    let failure = jobs.into_par_iter().find_map_first(|(failed, helpers)| {
        for cw in &codewords {
            let ok = match repair_single_with_helpers(code, cw, failed, &helpers) {
                Ok(out) => {
                    out.column == cw.column(failed) && Ratio::from_integer(out.downloaded as u64) == bound
                }
                Err(_) => false,
            };
            if !ok {
                let mut pattern = vec![failed];
                pattern.extend(&helpers);
                return Some(Witness {
                    pattern,
                    row: 0,
                    deficient_columns: vec![failed],
                });
            }
        }
        None
    });
    Ok(VerificationReport {
        property: Property::MsrBandwidth,
        patterns_checked: count,
        rows_checked: shape.ell as u64,
        rank_checks: count * codewords.len() as u64,
        result: if failure.is_some() { Outcome::Fail } else { Outcome::Pass },
        witness: failure,
        coverage: 1.0,
        exhaustive: true,
    })
}

/// Independent re-check of an erasure witness: the selected columns of
/// `H(row)` must be dependent and decoding the pattern must fail with
/// [`CodecError::RankDeficient`].
pub fn recheck_witness(code: &dyn ArrayCode, property: Property, witness: &Witness) -> bool {
    let shape = code.shape();
    let h = code.parity_check(witness.row);
    let dependent = match property {
        Property::LocalMds => {
            let g = shape.group_of(witness.deficient_columns[0]);
            let rows: Vec<usize> = (g * shape.r..(g + 1) * shape.r).collect();
            linalg::rank(code.field(), &h.select_rows(&rows).select_columns(&witness.deficient_columns))
                < witness.deficient_columns.len()
        }
        Property::Pmds | Property::Sd => {
            linalg::rank(code.field(), &h.select_columns(&witness.deficient_columns))
                < witness.deficient_columns.len()
        }
        Property::MsrBandwidth => return false,
    };
    let Ok(pattern) = ErasurePattern::new(&shape, witness.pattern.iter().copied()) else {
        return false;
    };
    let zero = CodewordArray::zeros(code.field(), &shape);
    let decode_fails = matches!(
        decode_erasures(code, &zero, &pattern),
        Err(CodecError::RankDeficient { .. })
    );
    dependent && decode_fails
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction_s2::{construct_pmds_s2, construct_sd_s2, S2Code, S2Options, S2Variant, ScalarS2Code};

    #[test]
    fn bound_values() {
        assert_eq!(msr_bound(1, 3, 4, 2, 16).unwrap(), Ratio::from_integer(24));
        assert_eq!(msr_bound(2, 2, 4, 2, 16).unwrap(), Ratio::from_integer(32));
        for (n, r, d) in [(4usize, 2usize, 3usize), (5, 2, 4), (6, 3, 5), (5, 3, 3)] {
            let b = d + 1 + r - n;
            let ell = b.pow(n as u32);
            assert_eq!(
                msr_bound(1, d, n, r, ell).unwrap(),
                Ratio::from_integer((d * b.pow(n as u32 - 1)) as u64)
            );
        }
        assert!(msr_bound(1, 4, 4, 2, 16).is_err());
    }

    #[test]
    fn pattern_counts() {
        let sh = CodeShape { mu: 3, n: 4, r: 2, s: 2, ell: 16 };
        assert_eq!(pmds_patterns(&sh).count(), 3240);
        assert_eq!(sd_patterns(&sh).count(), 90);
        // different (E, T) choices can erase the same columns
        let all: BTreeSet<Vec<usize>> = pmds_patterns(&sh).collect();
        assert!(all.len() < 3240);
        assert!(all.iter().all(|p| p.len() == 8));
        assert!(sd_patterns(&sh).all(|p| all.contains(&p)));
        let v: Vec<Vec<usize>> = pmds_patterns(&sh).take(2).collect();
        assert_eq!(v[0], vec![0, 1, 2, 3, 4, 5, 8, 9]);
        assert_eq!(v[1], vec![0, 1, 2, 4, 5, 6, 8, 9]);
    }

    #[test]
    fn small_instances_pass() {
        let opts = VerifyOptions::default();
        let pmds = construct_pmds_s2(2, 4, 2, 3, None).unwrap();
        assert!(verify_local_mds(&pmds, &opts).unwrap().passed());
        assert!(verify_pmds(&pmds, &opts).unwrap().passed());
        let sd = construct_sd_s2(2, 4, 2, 3, None).unwrap();
        let rep = verify_sd(&sd, &opts).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.patterns_checked, 6 * 6);
        let audit = audit_repair_bandwidth(&pmds, 1).unwrap();
        assert!(audit.passed());
        assert_eq!(audit.patterns_checked, 2 * 4);
    }

    #[test]
    fn duplicate_locator_fails_with_witness() {
        let mut opts = S2Options::new(2, 4, 2, 3, S2Variant::Pmds);
        opts.duplicate_locator = true;
        let code = S2Code::build(opts).unwrap();
        let rep = verify_local_mds(&code, &VerifyOptions::default()).unwrap();
        assert_eq!(rep.result, Outcome::Fail);
        let w = rep.witness.unwrap();
        assert_eq!(w.pattern, vec![0, 1]);
        assert!(recheck_witness(&code, Property::LocalMds, &w));
    }

    #[test]
    fn small_stride_sweep_is_decisive() {
        let code = ScalarS2Code::with_smallest_field(2, 2, vec![0, 1, 2, 3], 1).unwrap();
        let rep = verify_pmds(&code, &VerifyOptions::default()).unwrap();
        if let Some(w) = &rep.witness {
            assert!(recheck_witness(&code, Property::Pmds, w));
        }
    }

    #[test]
    fn budget_and_sampling() {
        let code = construct_pmds_s2(3, 4, 2, 3, None).unwrap();
        let tight = VerifyOptions { budget: 100, ..VerifyOptions::default() };
        assert!(matches!(
            verify_pmds(&code, &tight),
            Err(VerifyError::BudgetExceeded { checks: 51840, budget: 100 })
        ));
        let sampled = VerifyOptions { sample: Some(200), ..tight };
        let rep = verify_pmds(&code, &sampled).unwrap();
        assert!(rep.passed());
        assert!(!rep.exhaustive);
        assert!((rep.coverage - 200.0 / 51840.0).abs() < 1e-12);
    }
}
