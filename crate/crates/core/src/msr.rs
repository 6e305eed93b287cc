//! Ye–Barg minimum-storage regenerating local codes.
//!
//! A codeword is an `ell x n` array with `ell = b^n`, `b = d + 1 - n + r`.
//! Row `a`, with base-`b` digits `(a_1, ..., a_n)`, satisfies the `r x n`
//! Vandermonde parity checks in the locators `beta[i][a_i]`. All `n * b`
//! locators are distinct, so every row is an `[n, n - r]` MDS codeword.
//!
//! # Repair
//!
//! To rebuild node `i` from a helper set `R` of size `d`, group the rows into
//! `b^(n-1)` classes that share every digit except digit `i`. Summing the
//! parity checks of one class eliminates all per-row detail of the other
//! nodes: node `j != i` only appears through the class sum
//! `sigma_j = sum_u c_j(a + u b^(i-1))`. Each helper therefore sends one
//! symbol per class. The summed checks form an `r x r` Vandermonde system in
//! the `b` unknown symbols of node `i` plus the `n - 1 - d` class sums of the
//! non-helpers, which is solved in `O(r^2)` per class.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::field::{Field, FieldElement};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MsrError {
    #[error("invalid local code parameters: {0}")]
    InvalidParams(String),
    #[error("locators are not pairwise distinct: beta[{0}][{1}] = beta[{2}][{3}]")]
    DuplicateLocator(usize, usize, usize, usize),
    #[error("field of {field_size} elements cannot hold {needed} distinct locators")]
    FieldTooSmall { field_size: String, needed: usize },
    #[error("row index {a} out of range for b = {b}, n = {n}")]
    RowOutOfRange { a: usize, b: usize, n: usize },
    #[error("repair needs exactly {expected} helpers, got {got}")]
    WrongHelperCount { expected: usize, got: usize },
    #[error("helper set is invalid: {0}")]
    InvalidHelpers(String),
    #[error("repair system is singular at base row {0}")]
    SingularRepairSystem(usize),
}

/// Base-`b` little-endian digits of `a`, `n` of them.
pub fn row_digits(a: usize, b: usize, n: usize) -> Result<Vec<usize>, MsrError> {
    let ell = checked_pow(b, n).ok_or_else(|| MsrError::InvalidParams("b^n overflows".into()))?;
    if a >= ell {
        return Err(MsrError::RowOutOfRange { a, b, n });
    }
    let mut rest = a;
    Ok((0..n)
        .map(|_| {
            let d = rest % b;
            rest /= b;
            d
        })
        .collect())
}

/// Inverse of [`row_digits`].
pub fn row_from_digits(digits: &[usize], b: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * b + d)
}

fn checked_pow(b: usize, n: usize) -> Option<usize> {
    (0..n).try_fold(1usize, |acc, _| acc.checked_mul(b))
}

/// A row of the array together with its digit expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIndex {
    pub a: usize,
    pub digits: Vec<usize>,
}

impl RowIndex {
    pub fn new(a: usize, b: usize, n: usize) -> Result<RowIndex, MsrError> {
        Ok(RowIndex {
            a,
            digits: row_digits(a, b, n)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MsrParams {
    field: Field,
    n: usize,
    r: usize,
    d: usize,
    b: usize,
    ell: usize,
    /// `betas[i][u]`, node `i`, digit value `u`.
    betas: Vec<Vec<FieldElement>>,
}

impl MsrParams {
    pub fn new(
        field: Field,
        n: usize,
        r: usize,
        d: usize,
        betas: Vec<Vec<FieldElement>>,
    ) -> Result<MsrParams, MsrError> {
        let params = MsrParams::new_unchecked(field, n, r, d, betas)?;
        let needed = params.n * params.b;
        if let Some(size) = params.field.size_u128() {
            if size < needed as u128 {
                return Err(MsrError::FieldTooSmall {
                    field_size: size.to_string(),
                    needed,
                });
            }
        }
        let mut seen = std::collections::HashMap::new();
        for (i, row) in params.betas.iter().enumerate() {
            for (u, beta) in row.iter().enumerate() {
                if let Some(&(i0, u0)) = seen.get(beta) {
                    return Err(MsrError::DuplicateLocator(i0, u0, i, u));
                }
                seen.insert(beta.clone(), (i, u));
            }
        }
        Ok(params)
    }

    /// Like [`MsrParams::new`] but without the distinctness check, for
    /// building deliberately broken codes in negative tests.
    pub fn new_unchecked(
        field: Field,
        n: usize,
        r: usize,
        d: usize,
        betas: Vec<Vec<FieldElement>>,
    ) -> Result<MsrParams, MsrError> {
        if r == 0 || r > n {
            return Err(MsrError::InvalidParams(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
        }
        if d + r < n || d >= n {
            return Err(MsrError::InvalidParams(format!(
                "need n - r <= d <= n - 1, got d = {d}"
            )));
        }
        let b = d + 1 + r - n;
        let ell = checked_pow(b, n)
            .ok_or_else(|| MsrError::InvalidParams("subpacketization b^n overflows".into()))?;
        if betas.len() != n || betas.iter().any(|row| row.len() != b) {
            return Err(MsrError::InvalidParams(format!("betas must be {n} x {b}")));
        }
        if betas.iter().flatten().any(|x| !field.contains(x)) {
            return Err(MsrError::InvalidParams("locator outside the field".into()));
        }
        Ok(MsrParams {
            field,
            n,
            r,
            d,
            b,
            ell,
            betas,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn b(&self) -> usize {
        self.b
    }
    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn betas(&self) -> &[Vec<FieldElement>] {
        &self.betas
    }

    pub fn locator(&self, node: usize, digit: usize) -> &FieldElement {
        &self.betas[node][digit]
    }

    /// `beta[i][a_i]` for every node.
    pub fn row_locators(&self, a: usize) -> Vec<FieldElement> {
        let digits = row_digits(a, self.b, self.n).expect("row index in range");
        digits
            .iter()
            .enumerate()
            .map(|(i, &u)| self.betas[i][u].clone())
            .collect()
    }

    /// The `r x n` parity-check matrix of row `a`.
    pub fn local_parity_matrix(&self, a: usize) -> Matrix {
        let locs = self.row_locators(a);
        Matrix::from_fn(self.r, self.n, |t, i| self.field.pow(&locs[i], t as u128))
    }

    /// Symbols each helper sends: one per row class, `b^(n-1)`.
    pub fn per_helper_download(&self) -> usize {
        self.ell / self.b
    }

    /// Total repair download `d * b^(n-1)`.
    pub fn repair_download(&self) -> usize {
        self.d * self.per_helper_download()
    }

    /// Rows with digit `i` equal to zero, in increasing order; one per class.
    pub fn base_rows(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let stride = self.b.pow(node as u32);
        (0..self.ell).filter(move |a| (a / stride).is_multiple_of(self.b))
    }

    fn class_rows(&self, node: usize, base: usize) -> impl Iterator<Item = usize> {
        let stride = self.b.pow(node as u32);
        (0..self.b).map(move |u| base + u * stride)
    }

    fn check_helpers(&self, failed: usize, helpers: &[usize]) -> Result<(), MsrError> {
        if failed >= self.n {
            return Err(MsrError::InvalidHelpers(format!("failed node {failed} out of range")));
        }
        if helpers.len() != self.d {
            return Err(MsrError::WrongHelperCount {
                expected: self.d,
                got: helpers.len(),
            });
        }
        let set: BTreeSet<usize> = helpers.iter().copied().collect();
        if set.len() != helpers.len() {
            return Err(MsrError::InvalidHelpers("duplicate helper".into()));
        }
        if set.contains(&failed) {
            return Err(MsrError::InvalidHelpers(format!(
                "failed node {failed} listed as a helper"
            )));
        }
        if let Some(&h) = set.iter().find(|&&h| h >= self.n) {
            return Err(MsrError::InvalidHelpers(format!("helper {h} out of range")));
        }
        Ok(())
    }

    /// Computes what each helper transmits to repair `failed`.
    /// `helper_columns[k]` is the full column (`ell` symbols) of `helpers[k]`.
    pub fn make_repair_plan(
        &self,
        failed: usize,
        helpers: &[usize],
        helper_columns: &[&[FieldElement]],
    ) -> Result<RepairPlan, MsrError> {
        self.check_helpers(failed, helpers)?;
        if helper_columns.len() != helpers.len()
            || helper_columns.iter().any(|c| c.len() != self.ell)
        {
            return Err(MsrError::InvalidParams("helper columns have the wrong shape".into()));
        }
        let f = &self.field;
        let transmissions = helper_columns
            .iter()
            .map(|col| {
                self.base_rows(failed)
                    .map(|base| {
                        self.class_rows(failed, base)
                            .fold(f.zero(), |acc, row| f.add(&acc, &col[row]))
                    })
                    .collect()
            })
            .collect();
        Ok(RepairPlan {
            failed,
            helpers: helpers.to_vec(),
            transmissions,
            download_total: self.repair_download(),
        })
    }

    /// Rebuilds the failed column from the helpers' transmissions.
    pub fn repair_node(&self, plan: &RepairPlan) -> Result<Vec<FieldElement>, MsrError> {
        self.check_helpers(plan.failed, &plan.helpers)?;
        let f = &self.field;
        let i = plan.failed;
        let helper_set: BTreeSet<usize> = plan.helpers.iter().copied().collect();
        let others: Vec<usize> = (0..self.n)
            .filter(|m| *m != i && !helper_set.contains(m))
            .collect();
        let mut column = vec![f.zero(); self.ell];
        for (class, base) in self.base_rows(i).enumerate() {
            let digits = row_digits(base, self.b, self.n)?;
            let mut locators: Vec<FieldElement> = self.betas[i].clone();
            locators.extend(others.iter().map(|&m| self.betas[m][digits[m]].clone()));
            debug_assert_eq!(locators.len(), self.r);
            // rhs_t = -sum_{j in R} beta_{j,a_j}^t sigma_j
            let mut rhs = vec![f.zero(); self.r];
            for (k, &j) in plan.helpers.iter().enumerate() {
                let loc = &self.betas[j][digits[j]];
                let sigma = &plan.transmissions[k][class];
                let mut power = sigma.clone();
                for slot in rhs.iter_mut() {
                    *slot = f.sub(slot, &power);
                    power = f.mul(&power, loc);
                }
            }
            let solution = solve_vandermonde(f, &locators, &rhs)
                .ok_or(MsrError::SingularRepairSystem(base))?;
            for (u, row) in self.class_rows(i, base).enumerate() {
                column[row] = solution[u].clone();
            }
        }
        Ok(column)
    }
}

/// Solves `sum_k loc_k^t x_k = rhs_t` for `t = 0..len`, returning `None` when
/// two locators coincide.
///
/// With `P(z) = prod_m (z - loc_m)` and `Q_k = P / (z - loc_k)`, the
/// coefficients of `Q_k` annihilate every column except `k`, so
/// `x_k = <Q_k, rhs> / Q_k(loc_k)`.
pub fn solve_vandermonde(
    field: &Field,
    locators: &[FieldElement],
    rhs: &[FieldElement],
) -> Option<Vec<FieldElement>> {
    let len = locators.len();
    assert_eq!(rhs.len(), len);
    // master polynomial, low degree first
    let mut master = vec![field.one()];
    for loc in locators {
        let mut next = vec![field.zero(); master.len() + 1];
        for (k, c) in master.iter().enumerate() {
            next[k + 1] = field.add(&next[k + 1], c);
            next[k] = field.sub(&next[k], &field.mul(c, loc));
        }
        master = next;
    }
    let mut out = Vec::with_capacity(len);
    for loc in locators {
        // synthetic division of the master polynomial by (z - loc)
        let mut quotient = vec![field.zero(); len];
        let mut carry = field.zero();
        for t in (0..len).rev() {
            carry = field.add(&master[t + 1], &field.mul(&carry, loc));
            quotient[t] = carry.clone();
        }
        let mut numerator = field.zero();
        let mut denominator = field.zero();
        let mut power = field.one();
        for t in 0..len {
            numerator = field.add(&numerator, &field.mul(&quotient[t], &rhs[t]));
            denominator = field.add(&denominator, &field.mul(&quotient[t], &power));
            power = field.mul(&power, loc);
        }
        out.push(field.div(&numerator, &denominator).ok()?);
    }
    Some(out)
}

/// Helper transmissions for one single-node repair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairPlan {
    pub failed: usize,
    pub helpers: Vec<usize>,
    /// `transmissions[k]` holds the `b^(n-1)` class sums sent by `helpers[k]`.
    pub transmissions: Vec<Vec<FieldElement>>,
    pub download_total: usize,
}

impl RepairPlan {
    /// Symbols actually carried by the plan.
    pub fn symbols_sent(&self) -> usize {
        self.transmissions.iter().map(Vec::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Locators `beta^(i + u n)` for a primitive `beta`.
    fn power_locators(field: &Field, n: usize, b: usize) -> Vec<Vec<FieldElement>> {
        let beta = field.find_element_of_order_at_least(1).unwrap();
        (0..n)
            .map(|i| {
                (0..b)
                    .map(|u| field.pow(&beta, (i + u * n) as u128))
                    .collect()
            })
            .collect()
    }

    fn params(w: u32, n: usize, r: usize, d: usize) -> MsrParams {
        let f = Field::binary(w).unwrap();
        let b = d + 1 + r - n;
        MsrParams::new(f.clone(), n, r, d, power_locators(&f, n, b)).unwrap()
    }

    /// Random array satisfying every row's parity checks, built by solving
    /// for the last r columns of each row.
    fn random_codeword(p: &MsrParams, rng: &mut ChaCha8Rng) -> Vec<Vec<FieldElement>> {
        let f = p.field();
        let k = p.n() - p.r();
        (0..p.ell())
            .map(|a| {
                let h = p.local_parity_matrix(a);
                let info: Vec<FieldElement> = (0..k).map(|_| f.random(rng)).collect();
                let hi = h.select_columns(&(0..k).collect::<Vec<_>>());
                let hp = h.select_columns(&(k..p.n()).collect::<Vec<_>>());
                let rhs = hi.mul_vec(f, &info);
                let rhs = Matrix::from_rows(rhs.into_iter().map(|x| vec![f.neg(&x)]).collect());
                let parity = linalg::solve(f, &hp, &rhs).unwrap();
                info.into_iter()
                    .chain((0..p.r()).map(|t| parity.get(t, 0).clone()))
                    .collect()
            })
            .collect()
    }

    fn column(rows: &[Vec<FieldElement>], j: usize) -> Vec<FieldElement> {
        rows.iter().map(|row| row[j].clone()).collect()
    }

    #[test]
    fn digits_examples() {
        assert_eq!(row_digits(0, 2, 4).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(row_digits(5, 2, 4).unwrap(), vec![1, 0, 1, 0]);
        for a in 0..27 {
            assert_eq!(row_from_digits(&row_digits(a, 3, 3).unwrap(), 3), a);
        }
        assert!(matches!(row_digits(16, 2, 4), Err(MsrError::RowOutOfRange { .. })));
    }

    #[test]
    fn parity_matrix_shapes() {
        let p = params(6, 4, 1, 3);
        let h = p.local_parity_matrix(0);
        assert_eq!(h.rows(), 1);
        assert!(h.row(0).iter().all(|x| p.field().is_one(x)));

        let p = params(6, 4, 2, 3);
        let f = p.field();
        let beta = f.find_element_of_order_at_least(1).unwrap();
        let h = p.local_parity_matrix(0);
        for i in 0..4 {
            assert_eq!(h.get(1, i), &f.pow(&beta, i as u128));
        }
    }

    #[test]
    fn every_r_columns_nonsingular() {
        let p = params(6, 4, 2, 3);
        for a in 0..p.ell() {
            let h = p.local_parity_matrix(a);
            for i in 0..4 {
                for j in i + 1..4 {
                    assert!(linalg::is_full_column_rank(p.field(), &h.select_columns(&[i, j])));
                }
            }
        }
    }

    #[test]
    fn duplicate_locators_rejected() {
        let f = Field::binary(4).unwrap();
        let mut betas = power_locators(&f, 4, 2);
        betas[1][0] = betas[0][0].clone();
        assert_eq!(
            MsrParams::new(f, 4, 2, 3, betas).unwrap_err(),
            MsrError::DuplicateLocator(0, 0, 1, 0)
        );
    }

    #[test]
    fn field_too_small() {
        let f = Field::binary(2).unwrap();
        let betas = vec![vec![f.zero(); 2]; 4];
        assert!(matches!(
            MsrParams::new(f, 4, 2, 3, betas),
            Err(MsrError::FieldTooSmall { .. })
        ));
    }

    #[test]
    fn vandermonde_solver_matches_elimination() {
        let f = Field::binary(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in 1..6 {
            let locs: Vec<FieldElement> = (0..len).map(|k| f.from_base(k as u64 * 7 + 1)).collect();
            let x: Vec<FieldElement> = (0..len).map(|_| f.random(&mut rng)).collect();
            let v = Matrix::from_fn(len, len, |t, k| f.pow(&locs[k], t as u128));
            let rhs = v.mul_vec(&f, &x);
            assert_eq!(solve_vandermonde(&f, &locs, &rhs).unwrap(), x);
        }
        let dup = vec![f.one(), f.one()];
        assert!(solve_vandermonde(&f, &dup, &[f.zero(), f.zero()]).is_none());
    }

    #[test]
    fn repair_every_node_and_helper_set() {
        let p = params(6, 4, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let cw = random_codeword(&p, &mut rng);
            for failed in 0..4 {
                let helpers: Vec<usize> = (0..4).filter(|&j| j != failed).collect();
                let cols: Vec<Vec<FieldElement>> = helpers.iter().map(|&j| column(&cw, j)).collect();
                let refs: Vec<&[FieldElement]> = cols.iter().map(Vec::as_slice).collect();
                let plan = p.make_repair_plan(failed, &helpers, &refs).unwrap();
                assert_eq!(plan.symbols_sent(), 24);
                assert_eq!(plan.download_total, 24);
                assert_eq!(p.repair_node(&plan).unwrap(), column(&cw, failed));
            }
        }
    }

    #[test]
    fn repair_with_non_helpers() {
        // n = 5, r = 3, d = 3: b = 2 and one surviving node stays silent
        let p = params(5, 5, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cw = random_codeword(&p, &mut rng);
        for failed in 0..5 {
            let others: Vec<usize> = (0..5).filter(|&j| j != failed).collect();
            for skip in &others {
                let helpers: Vec<usize> = others.iter().copied().filter(|j| j != skip).collect();
                let cols: Vec<Vec<FieldElement>> = helpers.iter().map(|&j| column(&cw, j)).collect();
                let refs: Vec<&[FieldElement]> = cols.iter().map(Vec::as_slice).collect();
                let plan = p.make_repair_plan(failed, &helpers, &refs).unwrap();
                assert_eq!(plan.download_total, 3 * 16);
                assert_eq!(p.repair_node(&plan).unwrap(), column(&cw, failed));
            }
        }
    }

    #[test]
    fn degenerate_b_one_sends_full_columns() {
        let p = params(4, 4, 2, 2);
        assert_eq!(p.ell(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cw = random_codeword(&p, &mut rng);
        let helpers = vec![1, 3];
        let cols: Vec<Vec<FieldElement>> = helpers.iter().map(|&j| column(&cw, j)).collect();
        let refs: Vec<&[FieldElement]> = cols.iter().map(Vec::as_slice).collect();
        let plan = p.make_repair_plan(0, &helpers, &refs).unwrap();
        assert_eq!(plan.transmissions, cols);
        assert_eq!(p.repair_node(&plan).unwrap(), column(&cw, 0));
    }

    #[test]
    fn zero_codeword_repairs_to_zero() {
        let p = params(6, 4, 2, 3);
        let f = p.field();
        let zero = vec![f.zero(); p.ell()];
        let refs: Vec<&[FieldElement]> = vec![&zero, &zero, &zero];
        let plan = p.make_repair_plan(2, &[0, 1, 3], &refs).unwrap();
        assert!(plan.transmissions.iter().flatten().all(|x| f.is_zero(x)));
        assert_eq!(p.repair_node(&plan).unwrap(), zero);
    }

    #[test]
    fn helper_validation() {
        let p = params(6, 4, 2, 3);
        let zero = vec![p.field().zero(); p.ell()];
        let refs: Vec<&[FieldElement]> = vec![&zero, &zero];
        assert_eq!(
            p.make_repair_plan(0, &[1, 2], &refs).unwrap_err(),
            MsrError::WrongHelperCount { expected: 3, got: 2 }
        );
        let refs: Vec<&[FieldElement]> = vec![&zero, &zero, &zero];
        assert!(matches!(
            p.make_repair_plan(0, &[0, 1, 2], &refs),
            Err(MsrError::InvalidHelpers(_))
        ));
    }
}
