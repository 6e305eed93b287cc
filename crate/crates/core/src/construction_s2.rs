//! Two global parities over GF(2^w): the scalar codes `C(mu, n, r, 2, L, N)`
//! with arbitrary locator exponent sets, and the array codes built from them
//! whose local groups are Ye–Barg regenerating codes.
//!
//! Row `a` of the array code is the scalar code with exponents
//! `L(a) = { i + a_i n }` (zero-based node `i`). Its parity-check matrix has
//! the local Vandermonde block `beta^(t e_k)`, `t < r`, on the diagonal, and
//! for group `j` the global rows `beta^(r e_k)` and `beta^(-jN - e_k)`.

use serde::{Deserialize, Serialize};

use crate::code::{ArrayCode, CodeShape, ConstructionError, FieldSizeReport};
use crate::field::{Field, FieldElement};
use crate::linalg::Matrix;
use crate::msr::{row_digits, MsrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum S2Variant {
    Pmds,
    Sd,
}

/// Smallest stride making `C(mu, n, r, 2, L, N)` a PMDS code:
/// `(r + 1)(max L - r) + 1`, at least 1.
pub fn min_n_pmds(locators: &[u64], r: usize) -> u64 {
    let max = locators.iter().copied().max().unwrap_or(0) as i128;
    let r = r as i128;
    ((r + 1) * (max - r) + 1).max(1) as u64
}

/// Smallest stride making `C(mu, n, r, 2, L, N)` an SD code: `max L + 1`.
pub fn min_n_sd(locators: &[u64]) -> u64 {
    locators.iter().copied().max().unwrap_or(0) + 1
}

/// Stride used by the array construction: `(r+1)(rn-1-r)+1` for PMDS and
/// `rn` for SD.
pub fn default_stride(variant: S2Variant, n: usize, r: usize) -> u64 {
    let (n, r) = (n as i128, r as i128);
    match variant {
        S2Variant::Pmds => ((r + 1) * (r * n - 1 - r) + 1).max(1) as u64,
        S2Variant::Sd => (r * n) as u64,
    }
}

/// Smallest GF(2^w) whose primitive elements have order at least `min_order`.
pub fn smallest_binary_field(min_order: u64) -> Result<Field, ConstructionError> {
    let w = (1..=64u32)
        .find(|&w| (1u128 << w) > min_order as u128)
        .ok_or(ConstructionError::FieldTooSmall {
            needed: min_order as u128 + 1,
            size: "2^64".into(),
        })?;
    Ok(Field::binary(w)?)
}

fn require_char_two(field: &Field) -> Result<(), ConstructionError> {
    if field.characteristic() != 2 || field.ext_degree() != 1 {
        return Err(ConstructionError::NotCharacteristicTwo);
    }
    Ok(())
}

fn power(field: &Field, x: &FieldElement, e: u64, order: u64) -> FieldElement {
    field.pow(x, (e % order) as u128)
}

/// Scalar code `C(mu, n, r, 2, L, N)` over GF(2^w).
#[derive(Debug, Clone)]
pub struct ScalarS2Code {
    mu: usize,
    r: usize,
    locators: Vec<u64>,
    stride: u64,
    field: Field,
    beta: FieldElement,
    beta_inv: FieldElement,
    order: u64,
    local: MsrParams,
}

impl ScalarS2Code {
    pub fn new(
        field: Field,
        beta: FieldElement,
        mu: usize,
        r: usize,
        locators: Vec<u64>,
        stride: u64,
    ) -> Result<ScalarS2Code, ConstructionError> {
        require_char_two(&field)?;
        let n = locators.len();
        if mu == 0 || n == 0 || r == 0 || r > n || stride == 0 {
            return Err(ConstructionError::InvalidParams(format!(
                "mu = {mu}, n = {n}, r = {r}, N = {stride}"
            )));
        }
        let order = field.element_order(&beta)?;
        let needed = (mu as u64).saturating_mul(stride);
        if order < needed {
            return Err(ConstructionError::OrderTooSmall { needed, order });
        }
        let betas = locators
            .iter()
            .map(|&e| vec![power(&field, &beta, e, order)])
            .collect();
        // b = 1: the local code is a plain [n, n - r] RS code
        let local = MsrParams::new(field.clone(), n, r, n - r, betas)?;
        let beta_inv = field.inv(&beta)?;
        Ok(ScalarS2Code {
            mu,
            r,
            locators,
            stride,
            field,
            beta,
            beta_inv,
            order,
            local,
        })
    }

    /// Picks the smallest binary field whose primitive element has order at
    /// least `max(mu N, max L + 1)`.
    pub fn with_smallest_field(
        mu: usize,
        r: usize,
        locators: Vec<u64>,
        stride: u64,
    ) -> Result<ScalarS2Code, ConstructionError> {
        let max_l = locators.iter().copied().max().unwrap_or(0);
        let field = smallest_binary_field((mu as u64 * stride).max(max_l + 1))?;
        let beta = field.find_element_of_order_at_least(1)?;
        ScalarS2Code::new(field, beta, mu, r, locators, stride)
    }

    pub fn locators(&self) -> &[u64] {
        &self.locators
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn beta(&self) -> &FieldElement {
        &self.beta
    }

    /// The `(r mu + 2) x mu n` parity-check matrix, entries computed as powers
    /// of `beta` directly from the exponents.
    pub fn build_parity_check(&self) -> Matrix {
        let f = &self.field;
        let n = self.locators.len();
        let (mu, r) = (self.mu, self.r);
        let mut h = Matrix::zeros(f, r * mu + 2, mu * n);
        for j in 0..mu {
            for (k, &e) in self.locators.iter().enumerate() {
                let col = j * n + k;
                for t in 0..r {
                    h.set(j * r + t, col, power(f, &self.beta, t as u64 * e, self.order));
                }
                h.set(r * mu, col, power(f, &self.beta, r as u64 * e, self.order));
                let neg = (j as u64 * self.stride + e) % self.order;
                h.set(r * mu + 1, col, power(f, &self.beta_inv, neg, self.order));
            }
        }
        h
    }
}

impl ArrayCode for ScalarS2Code {
    fn field(&self) -> &Field {
        &self.field
    }

    fn shape(&self) -> CodeShape {
        CodeShape {
            mu: self.mu,
            n: self.locators.len(),
            r: self.r,
            s: 2,
            ell: 1,
        }
    }

    fn local_code(&self) -> &MsrParams {
        &self.local
    }

    fn global_rows(&self, _a: usize) -> Matrix {
        let h = self.build_parity_check();
        h.select_rows(&[self.r * self.mu, self.r * self.mu + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct S2Params {
    pub mu: usize,
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub b: usize,
    pub ell: usize,
    /// Stride N of the second global row.
    pub stride: u64,
    pub variant: S2Variant,
    pub field: Field,
    pub beta: FieldElement,
}

/// Build options for [`S2Code`]; `None` fields take the construction's defaults.
#[derive(Debug, Clone)]
pub struct S2Options {
    pub mu: usize,
    pub n: usize,
    pub r: usize,
    pub d: usize,
    pub variant: S2Variant,
    pub field: Option<Field>,
    pub stride: Option<u64>,
    /// Negative control: reuse node 0's first locator for node 1.
    pub duplicate_locator: bool,
}

impl S2Options {
    pub fn new(mu: usize, n: usize, r: usize, d: usize, variant: S2Variant) -> S2Options {
        S2Options {
            mu,
            n,
            r,
            d,
            variant,
            field: None,
            stride: None,
            duplicate_locator: false,
        }
    }
}

/// Locally regenerating PMDS or SD array code with two global parities.
#[derive(Debug, Clone)]
pub struct S2Code {
    params: S2Params,
    local: MsrParams,
    beta_inv: FieldElement,
    order: u64,
}

pub fn construct_pmds_s2(
    mu: usize,
    n: usize,
    r: usize,
    d: usize,
    field: Option<Field>,
) -> Result<S2Code, ConstructionError> {
    let mut opts = S2Options::new(mu, n, r, d, S2Variant::Pmds);
    opts.field = field;
    S2Code::build(opts)
}

pub fn construct_sd_s2(
    mu: usize,
    n: usize,
    r: usize,
    d: usize,
    field: Option<Field>,
) -> Result<S2Code, ConstructionError> {
    let mut opts = S2Options::new(mu, n, r, d, S2Variant::Sd);
    opts.field = field;
    S2Code::build(opts)
}

impl S2Code {
    pub fn build(opts: S2Options) -> Result<S2Code, ConstructionError> {
        let S2Options { mu, n, r, d, variant, .. } = opts;
        if mu == 0 || n == 0 || r == 0 || r > n {
            return Err(ConstructionError::InvalidParams(format!(
                "mu = {mu}, n = {n}, r = {r}"
            )));
        }
        if d + r < n || d >= n {
            return Err(ConstructionError::InvalidParams(format!(
                "need n - r <= d <= n - 1, got d = {d}"
            )));
        }
        if 2 > (n - r) * mu {
            return Err(ConstructionError::InvalidParams(format!(
                "s = 2 exceeds (n - r) mu = {}",
                (n - r) * mu
            )));
        }
        let b = d + 1 + r - n;
        // largest locator exponent over all rows is b n - 1
        let exponents: Vec<u64> = (0..(b * n) as u64).collect();
        let min_stride = match variant {
            S2Variant::Pmds => min_n_pmds(&exponents, r),
            S2Variant::Sd => min_n_sd(&exponents),
        };
        let stride = opts.stride.unwrap_or_else(|| default_stride(variant, n, r));
        if stride < min_stride {
            return Err(ConstructionError::StrideTooSmall {
                stride,
                min: min_stride,
            });
        }
        let needed = (mu as u64 * stride).max((b * n) as u64);
        let field = match opts.field {
            Some(f) => f,
            None => smallest_binary_field(needed)?,
        };
        require_char_two(&field)?;
        let q = field.base_size();
        if q < needed as u128 {
            return Err(ConstructionError::FieldTooSmall {
                needed: needed as u128,
                size: q.to_string(),
            });
        }
        let beta = field.find_element_of_order_at_least(1)?;
        let order = field.element_order(&beta)?;
        if order < needed {
            return Err(ConstructionError::OrderTooSmall { needed, order });
        }
        let mut betas: Vec<Vec<FieldElement>> = (0..n)
            .map(|i| {
                (0..b)
                    .map(|u| power(&field, &beta, (i + u * n) as u64, order))
                    .collect()
            })
            .collect();
        let local = if opts.duplicate_locator && n >= 2 {
            betas[1][0] = betas[0][0].clone();
            MsrParams::new_unchecked(field.clone(), n, r, d, betas)?
        } else {
            MsrParams::new(field.clone(), n, r, d, betas)?
        };
        let beta_inv = field.inv(&beta)?;
        Ok(S2Code {
            params: S2Params {
                mu,
                n,
                r,
                d,
                b,
                ell: local.ell(),
                stride,
                variant,
                field,
                beta,
            },
            local,
            beta_inv,
            order,
        })
    }

    pub fn params(&self) -> &S2Params {
        &self.params
    }

    /// `L(a) = { i + a_i n }` for row `a`.
    pub fn row_locator_exponents(&self, a: usize) -> Vec<u64> {
        let p = &self.params;
        row_digits(a, p.b, p.n)
            .expect("row index in range")
            .iter()
            .enumerate()
            .map(|(i, &u)| (i + u * p.n) as u64)
            .collect()
    }

    /// Row `a` viewed as a stand-alone scalar code.
    pub fn row_scalar_code(&self, a: usize) -> Result<ScalarS2Code, ConstructionError> {
        let p = &self.params;
        ScalarS2Code::new(
            p.field.clone(),
            p.beta.clone(),
            p.mu,
            p.r,
            self.row_locator_exponents(a),
            p.stride,
        )
    }

    pub fn field_size_report(&self) -> FieldSizeReport {
        let p = &self.params;
        let q = p.field.base_size();
        FieldSizeReport {
            construction: match p.variant {
                S2Variant::Pmds => "s2-pmds".into(),
                S2Variant::Sd => "s2-sd".into(),
            },
            q,
            ext_degree: 1,
            field_size: q.to_string(),
            field_size_log2: (q as f64).log2(),
            b: p.b,
            ell: p.ell,
            ell_identity_holds: Some(p.ell) == p.b.checked_pow(p.n as u32),
            min_q: (p.mu as u128 * p.stride as u128).max((p.b * p.n) as u128),
            stride: Some(p.stride),
            size_bound: None,
            within_size_bound: None,
            ext_degree_bound: None,
        }
    }
}

impl ArrayCode for S2Code {
    fn field(&self) -> &Field {
        &self.params.field
    }

    fn shape(&self) -> CodeShape {
        CodeShape {
            mu: self.params.mu,
            n: self.params.n,
            r: self.params.r,
            s: 2,
            ell: self.params.ell,
        }
    }

    fn local_code(&self) -> &MsrParams {
        &self.local
    }

    /// Group `j` contributes `beta_{i,a_i}^r` and `beta^(-jN) beta_{i,a_i}^(-1)`.
    fn global_rows(&self, a: usize) -> Matrix {
        let p = &self.params;
        let f = &p.field;
        let locs = self.local.row_locators(a);
        let loc_inv: Vec<FieldElement> = locs
            .iter()
            .map(|x| f.inv(x).expect("locators are powers of beta"))
            .collect();
        let mut g = Matrix::zeros(f, 2, p.mu * p.n);
        for j in 0..p.mu {
            let shift = power(f, &self.beta_inv, j as u64 * p.stride, self.order);
            for k in 0..p.n {
                g.set(0, j * p.n + k, f.pow(&locs[k], p.r as u128));
                g.set(1, j * p.n + k, f.mul(&shift, &loc_inv[k]));
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_formulas() {
        let l: Vec<u64> = (0..4).collect();
        assert_eq!(min_n_pmds(&l, 2), 3 + 1);
        let l: Vec<u64> = (0..8).collect();
        assert_eq!(min_n_pmds(&l, 2), 16);
        assert_eq!(min_n_sd(&l), 8);
        assert_eq!(min_n_pmds(&[0, 1, 2], 2), 1);
        assert_eq!(min_n_sd(&[5, 0, 1, 2, 3]), 6);
        assert_eq!(min_n_sd(&[0, 1, 2, 3]), 4);
        assert_eq!(default_stride(S2Variant::Pmds, 4, 2), 16);
        assert_eq!(default_stride(S2Variant::Sd, 4, 2), 8);
    }

    #[test]
    fn standard_instances_pick_expected_fields() {
        let pmds = construct_pmds_s2(3, 4, 2, 3, None).unwrap();
        assert_eq!(pmds.params().stride, 16);
        assert_eq!(pmds.params().b, 2);
        assert_eq!(pmds.params().ell, 16);
        assert_eq!(pmds.field().base_size(), 64);
        let sd = construct_sd_s2(3, 4, 2, 3, None).unwrap();
        assert_eq!(sd.params().stride, 8);
        assert_eq!(sd.field().base_size(), 32);
        assert!(sd.field().element_order(&sd.params().beta).unwrap() >= 24);
        // identical local locators
        assert_eq!(
            pmds.row_locator_exponents(5),
            sd.row_locator_exponents(5)
        );
    }

    #[test]
    fn row_exponent_sets() {
        let code = construct_pmds_s2(3, 4, 2, 3, None).unwrap();
        assert_eq!(code.row_locator_exponents(0), vec![0, 1, 2, 3]);
        let max = (0..16)
            .flat_map(|a| code.row_locator_exponents(a))
            .max()
            .unwrap();
        assert_eq!(max, 7);
    }

    #[test]
    fn rows_equal_scalar_codes() {
        let code = construct_pmds_s2(3, 4, 2, 3, None).unwrap();
        for a in 0..16 {
            let scalar = code.row_scalar_code(a).unwrap();
            assert_eq!(code.parity_check(a), scalar.build_parity_check(), "row {a}");
        }
    }

    #[test]
    fn scalar_matrix_matches_trait_assembly() {
        let code = ScalarS2Code::with_smallest_field(2, 2, vec![3, 0, 9, 5], 20).unwrap();
        assert_eq!(code.parity_check(0), code.build_parity_check());
        let f = code.field();
        let h = code.build_parity_check();
        // group 0, second global row is beta^(-i)
        for (k, &e) in code.locators().iter().enumerate() {
            assert!(f.is_one(&f.mul(h.get(5, k), &f.pow(code.beta(), e as u128))));
        }
    }

    #[test]
    fn single_group_local_block_is_vandermonde() {
        let code = ScalarS2Code::with_smallest_field(1, 3, vec![0, 1, 2, 3, 4], 5).unwrap();
        let h = code.build_parity_check();
        let f = code.field();
        for t in 0..3 {
            for k in 0..5 {
                assert_eq!(h.get(t, k), &f.pow(code.beta(), (t * k) as u128));
            }
        }
    }

    #[test]
    fn rejects_bad_fields() {
        let odd = Field::prime(67).unwrap();
        assert_eq!(
            construct_pmds_s2(3, 4, 2, 3, Some(odd)).unwrap_err(),
            ConstructionError::NotCharacteristicTwo
        );
        let small = Field::binary(5).unwrap();
        assert!(matches!(
            construct_pmds_s2(3, 4, 2, 3, Some(small)),
            Err(ConstructionError::FieldTooSmall { .. })
        ));
        let mut opts = S2Options::new(3, 4, 2, 3, S2Variant::Pmds);
        opts.stride = Some(10);
        assert!(matches!(
            S2Code::build(opts),
            Err(ConstructionError::StrideTooSmall { .. })
        ));
    }

    #[test]
    fn negative_exponents_are_inverses() {
        let code = construct_pmds_s2(2, 4, 2, 3, None).unwrap();
        let f = code.field();
        let beta = &code.params().beta;
        let beta_inv = f.inv(beta).unwrap();
        for (j, i) in [(0u64, 3u64), (1, 7), (5, 60)] {
            let e = j * 16 + i;
            assert!(f.is_one(&f.mul(&f.pow(&beta_inv, e as u128), &f.pow(beta, e as u128))));
        }
    }
}
