//! Any number `s` of global parities over an extension GF(q^M).
//!
//! Local groups are Ye–Barg codes with locators in GF(q). The global rows
//! form a Moore matrix: group `j` contributes `alpha_{j,k}^(q^t)` in global
//! row `t`, so the code is PMDS as soon as every `s(r+1)` of the alphas are
//! linearly independent over GF(q). That condition is checked exhaustively
//! before a code is handed out.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::{ArrayCode, CodeShape, ConstructionError, FieldSizeReport};
use crate::combinatorics::{binomial, unrank_combination};
use crate::field::{Field, FieldElement, FieldError, MAX_EXT_DEGREE};
use crate::linalg::Matrix;
use crate::msr::MsrParams;

/// Default cap on the number of subsets `check_independence` will rank.
pub const DEFAULT_INDEPENDENCE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Basis,
    Bch,
}

/// How the global coefficients were produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaRecipe {
    pub mode: AlphaMode,
    /// Degree of GF(q^a) holding the BCH columns (0 in basis mode).
    pub a: usize,
    /// Primitive element of GF(q^a) (BCH mode only).
    pub gamma: Option<FieldElement>,
    /// Designed distance `s(r+1) + 1`.
    pub delta: usize,
}

/// Alphas `1, y, ..., y^(n mu - 1)`: the polynomial basis of GF(q^(n mu)).
/// Returns the extension degree and the alphas in row-major group order.
pub fn gen_alphas_basis(
    base: &Field,
    mu: usize,
    n: usize,
) -> Result<(usize, Field, Vec<FieldElement>), ConstructionError> {
    let m = mu * n;
    if m as u64 > MAX_EXT_DEGREE as u64 {
        return Err(ConstructionError::ExtensionTooLarge(m as u64));
    }
    let ext = base.extension(m as u32)?;
    let alphas = (0..m)
        .map(|k| {
            let mut c = vec![0u64; m];
            c[k] = 1;
            ext.from_coeffs(&c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((m, ext, alphas))
}

/// Smallest `a` with `q^a - 1 >= count`.
pub fn bch_degree(q: u128, count: usize) -> usize {
    let mut a = 1;
    let mut size = q;
    while size - 1 < count as u128 {
        size = size.saturating_mul(q);
        a += 1;
    }
    a
}

/// Columns of a BCH parity-check matrix with designed distance `s(r+1) + 1`:
/// column `j` stacks `gamma^(t j)`, `t = 1..=s(r+1)`, each written in its
/// `a` coordinates over GF(q), and is read as one element of GF(q^M) with
/// `M = a s (r+1)`.
pub fn gen_alphas_bch(
    base: &Field,
    mu: usize,
    n: usize,
    r: usize,
    s: usize,
) -> Result<(usize, Field, Vec<FieldElement>, AlphaRecipe), ConstructionError> {
    let count = mu * n;
    let rows = s * (r + 1);
    if rows >= count {
        return Err(ConstructionError::InvalidParams(format!(
            "BCH alphas need s(r+1) = {rows} < n mu = {count}"
        )));
    }
    let a = bch_degree(base.base_size(), count);
    let m = a * rows;
    if m as u64 > MAX_EXT_DEGREE as u64 {
        return Err(ConstructionError::ExtensionTooLarge(m as u64));
    }
    let small = if a == 1 { base.clone() } else { base.extension(a as u32)? };
    let gamma = small.find_element_of_order_at_least(count as u64)?;
    let ext = base.extension(m as u32)?;
    let mut alphas = Vec::with_capacity(count);
    for j in 0..count {
        let step = small.pow(&gamma, j as u128);
        let mut coeffs = Vec::with_capacity(m);
        let mut x = step.clone();
        for _ in 0..rows {
            coeffs.extend(small.expand_to_base(&x));
            x = small.mul(&x, &step);
        }
        alphas.push(ext.from_coeffs(&coeffs)?);
    }
    let recipe = AlphaRecipe {
        mode: AlphaMode::Bch,
        a,
        gamma: Some(gamma),
        delta: rows + 1,
    };
    Ok((m, ext, alphas, recipe))
}

/// Outcome of an independence check over the base field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependenceReport {
    pub t: usize,
    pub subsets_checked: u64,
    /// Coverage is exhaustive unless the check was sampled.
    pub exhaustive: bool,
    /// Lexicographically first dependent subset, if any.
    pub witness: Option<Vec<usize>>,
}

impl IndependenceReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }
}

/// Ranks every `t`-subset of `alphas` over the base field. Refuses when the
/// number of subsets exceeds `limit`.
pub fn check_independence(
    field: &Field,
    alphas: &[FieldElement],
    t: usize,
    limit: u64,
) -> Result<IndependenceReport, ConstructionError> {
    let n = alphas.len();
    if t > n {
        return Err(ConstructionError::InvalidParams(format!(
            "subset size {t} exceeds {n} alphas"
        )));
    }
    let subsets = binomial(n, t);
    if subsets > limit {
        return Err(ConstructionError::IndependenceLimit { subsets, limit });
    }
    let witness = (0..subsets).into_par_iter().find_map_first(|idx| {
        let subset = unrank_combination(n, t, idx);
        let vs: Vec<FieldElement> = subset.iter().map(|&i| alphas[i].clone()).collect();
        (field.rank_over_base(&vs) < t).then_some(subset)
    });
    Ok(IndependenceReport {
        t,
        subsets_checked: subsets,
        exhaustive: true,
        witness,
    })
}

/// Ranks `samples` random `t`-subsets; a pass says nothing about the rest.
pub fn check_independence_sampled<R: rand::Rng + ?Sized>(
    field: &Field,
    alphas: &[FieldElement],
    t: usize,
    samples: u64,
    rng: &mut R,
) -> Result<IndependenceReport, ConstructionError> {
    let n = alphas.len();
    if t > n {
        return Err(ConstructionError::InvalidParams(format!(
            "subset size {t} exceeds {n} alphas"
        )));
    }
    let total = binomial(n, t);
    for _ in 0..samples {
        let mut subset = rand::seq::index::sample(rng, n, t).into_vec();
        subset.sort_unstable();
        let vs: Vec<FieldElement> = subset.iter().map(|&i| alphas[i].clone()).collect();
        if field.rank_over_base(&vs) < t {
            return Ok(IndependenceReport {
                t,
                subsets_checked: samples,
                exhaustive: false,
                witness: Some(subset),
            });
        }
    }
    Ok(IndependenceReport {
        t,
        subsets_checked: samples,
        exhaustive: samples >= total && total <= 1,
        witness: None,
    })
}

/// Whether `q` is a field size this crate can build (a power of 2 or a prime).
pub fn is_supported_order(q: u64) -> bool {
    q >= 2 && (q.is_power_of_two() || num_prime::nt_funcs::is_prime64(q))
}

/// Smallest supported field size at least `min`.
pub fn smallest_supported_order(min: u64) -> u64 {
    (min.max(2)..).find(|&q| is_supported_order(q)).expect("primes are unbounded")
}

/// GF(q) for a supported `q`.
pub fn base_field_of_order(q: u64) -> Result<Field, ConstructionError> {
    if q.is_power_of_two() && q >= 2 {
        Ok(Field::binary(q.trailing_zeros())?)
    } else if is_supported_order(q) {
        Ok(Field::prime(q)?)
    } else {
        Err(FieldError::Unsupported(format!(
            "field size {q}: only powers of 2 and primes are supported"
        ))
        .into())
    }
}

#[derive(Debug, Clone)]
pub struct GeneralParams {
    pub mu: usize,
    pub n: usize,
    pub r: usize,
    pub s: usize,
    pub d: usize,
    pub b: usize,
    pub ell: usize,
    /// Base field size q.
    pub q: u128,
    /// Extension degree M.
    pub m: usize,
    pub base_field: Field,
    pub field: Field,
    /// `alphas[j n + k]` is the coefficient of node `k` in group `j`.
    pub alphas: Vec<FieldElement>,
    pub recipe: AlphaRecipe,
    pub independence: IndependenceReport,
}

#[derive(Debug, Clone)]
pub struct GeneralOptions {
    pub mu: usize,
    pub n: usize,
    pub r: usize,
    pub s: usize,
    pub d: usize,
    pub alpha_mode: AlphaMode,
    /// Base field size; the smallest supported `q >= bn` when absent.
    pub q: Option<u64>,
    /// Explicit base field, overriding `q`.
    pub base_field: Option<Field>,
    pub independence_limit: u64,
    /// Negative control: reuse node 0's first locator for node 1.
    pub duplicate_locator: bool,
}

impl GeneralOptions {
    pub fn new(mu: usize, n: usize, r: usize, s: usize, d: usize, alpha_mode: AlphaMode) -> GeneralOptions {
        GeneralOptions {
            mu,
            n,
            r,
            s,
            d,
            alpha_mode,
            q: None,
            base_field: None,
            independence_limit: DEFAULT_INDEPENDENCE_LIMIT,
            duplicate_locator: false,
        }
    }
}

/// Locally regenerating PMDS array code with `s` global parities.
#[derive(Debug, Clone)]
pub struct GeneralCode {
    params: GeneralParams,
    local: MsrParams,
    global: Matrix,
}

fn check_shape(mu: usize, n: usize, r: usize, s: usize, d: usize) -> Result<usize, ConstructionError> {
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
    if s > (n - r) * mu {
        return Err(ConstructionError::InvalidParams(format!(
            "s = {s} exceeds (n - r) mu = {}",
            (n - r) * mu
        )));
    }
    Ok(d + 1 + r - n)
}

impl GeneralCode {
    pub fn build(opts: GeneralOptions) -> Result<GeneralCode, ConstructionError> {
        let GeneralOptions { mu, n, r, s, d, .. } = opts;
        let b = check_shape(mu, n, r, s, d)?;
        let base = match (&opts.base_field, opts.q) {
            (Some(f), _) => {
                if f.ext_degree() != 1 {
                    return Err(ConstructionError::InvalidParams(
                        "base field must not be an extension".into(),
                    ));
                }
                f.clone()
            }
            (None, Some(q)) => base_field_of_order(q)?,
            (None, None) => base_field_of_order(smallest_supported_order((b * n) as u64))?,
        };
        let (m, field, alphas, recipe) = match opts.alpha_mode {
            AlphaMode::Bch if s * (r + 1) < mu * n => gen_alphas_bch(&base, mu, n, r, s)?,
            // too few columns for a BCH code: every alpha must be independent anyway
            _ => {
                let (m, field, alphas) = gen_alphas_basis(&base, mu, n)?;
                let recipe = AlphaRecipe {
                    mode: AlphaMode::Basis,
                    a: 0,
                    gamma: None,
                    delta: s * (r + 1) + 1,
                };
                (m, field, alphas, recipe)
            }
        };
        GeneralCode::from_alphas(GeneralOptions { base_field: Some(base), ..opts }, m, field, alphas, recipe)
    }

    /// Builds the code from caller-supplied alphas in `field`, certifying
    /// their independence first.
    pub fn from_alphas(
        opts: GeneralOptions,
        m: usize,
        field: Field,
        alphas: Vec<FieldElement>,
        recipe: AlphaRecipe,
    ) -> Result<GeneralCode, ConstructionError> {
        let GeneralOptions { mu, n, r, s, d, .. } = opts;
        let b = check_shape(mu, n, r, s, d)?;
        if alphas.len() != mu * n || alphas.iter().any(|x| !field.contains(x)) {
            return Err(ConstructionError::InvalidParams(format!(
                "expected {} alphas in the code field",
                mu * n
            )));
        }
        let q = field.base_size();
        if q < (b * n) as u128 {
            return Err(ConstructionError::FieldTooSmall {
                needed: (b * n) as u128,
                size: q.to_string(),
            });
        }
        let t = (s * (r + 1)).min(mu * n);
        let independence = check_independence(&field, &alphas, t, opts.independence_limit)?;
        if let Some(witness) = independence.witness.clone() {
            return Err(ConstructionError::DependentAlphas { witness });
        }
        let mut betas: Vec<Vec<FieldElement>> = (0..n)
            .map(|i| {
                (0..b)
                    .map(|u| Ok(field.from_base(field.base_field().from_index((i + u * n) as u128)?.coeffs()[0])))
                    .collect::<Result<Vec<_>, FieldError>>()
            })
            .collect::<Result<_, _>>()?;
        let local = if opts.duplicate_locator && n >= 2 {
            betas[1][0] = betas[0][0].clone();
            MsrParams::new_unchecked(field.clone(), n, r, d, betas)?
        } else {
            MsrParams::new(field.clone(), n, r, d, betas)?
        };
        let global = Matrix::from_fn(s, mu * n, |t, c| field.frobenius(&alphas[c], t));
        Ok(GeneralCode {
            params: GeneralParams {
                mu,
                n,
                r,
                s,
                d,
                b,
                ell: local.ell(),
                q,
                m,
                base_field: field.base_field(),
                field,
                alphas,
                recipe,
                independence,
            },
            local,
            global,
        })
    }

    pub fn params(&self) -> &GeneralParams {
        &self.params
    }

    /// `2 n b (2 n mu)^(s(r+1) - 1)`.
    pub fn size_bound(&self) -> BigUint {
        let p = &self.params;
        let exp = (p.s * (p.r + 1)).saturating_sub(1) as u32;
        BigUint::from(2 * p.n * p.b) * BigUint::from(2 * p.n * p.mu).pow(exp)
    }

    pub fn field_size_report(&self) -> FieldSizeReport {
        let p = &self.params;
        let size = p.field.size().clone();
        let bound = self.size_bound();
        FieldSizeReport {
            construction: "general-pmds".into(),
            q: p.q,
            ext_degree: p.m,
            field_size: size.to_string(),
            field_size_log2: p.m as f64 * (p.q as f64).log2(),
            b: p.b,
            ell: p.ell,
            ell_identity_holds: Some(p.ell) == p.b.checked_pow(p.n as u32),
            min_q: (p.b * p.n) as u128,
            stride: None,
            size_bound: Some(bound.to_string()),
            within_size_bound: Some(size <= bound),
            ext_degree_bound: match p.recipe.mode {
                AlphaMode::Bch => Some(1 + (p.s * (p.r + 1) - 1) as u64 * p.recipe.a as u64),
                AlphaMode::Basis => None,
            },
        }
    }
}

impl ArrayCode for GeneralCode {
    fn field(&self) -> &Field {
        &self.params.field
    }

    fn shape(&self) -> CodeShape {
        CodeShape {
            mu: self.params.mu,
            n: self.params.n,
            r: self.params.r,
            s: self.params.s,
            ell: self.params.ell,
        }
    }

    fn local_code(&self) -> &MsrParams {
        &self.local
    }

    fn global_rows(&self, _a: usize) -> Matrix {
        self.global.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_alphas() {
        let base = Field::binary(3).unwrap();
        let (m, ext, alphas) = gen_alphas_basis(&base, 2, 4).unwrap();
        assert_eq!(m, 8);
        assert_eq!(ext.size(), &BigUint::from(8u32).pow(8));
        assert_eq!(ext.rank_over_base(&alphas), 8);
        assert!(ext.is_one(&alphas[0]));
    }

    #[test]
    fn bch_alphas_small_instance() {
        let base = Field::binary(2).unwrap();
        let (m, ext, alphas, recipe) = gen_alphas_bch(&base, 2, 4, 1, 2).unwrap();
        assert_eq!(recipe.a, 2);
        assert_eq!(m, 8);
        assert_eq!(recipe.delta, 5);
        // gamma^0 = 1 in every slot
        let ones: Vec<u64> = (0..4).flat_map(|_| [1, 0]).collect();
        assert_eq!(ext.expand_to_base(&alphas[0]), ones);
        let report = check_independence(&ext, &alphas, 4, 1000).unwrap();
        assert!(report.passed());
        assert_eq!(report.subsets_checked, 70);
    }

    #[test]
    fn duplicate_alpha_witness() {
        let base = Field::binary(2).unwrap();
        let (_, ext, mut alphas) = gen_alphas_basis(&base, 1, 4).unwrap();
        alphas[3] = alphas[1].clone();
        let report = check_independence(&ext, &alphas, 2, 100).unwrap();
        assert_eq!(report.witness, Some(vec![1, 3]));
        assert!(matches!(
            check_independence(&ext, &alphas, 2, 3),
            Err(ConstructionError::IndependenceLimit { subsets: 6, limit: 3 })
        ));
    }

    #[test]
    fn supported_orders() {
        assert_eq!(smallest_supported_order(8), 8);
        assert_eq!(smallest_supported_order(9), 11);
        assert_eq!(smallest_supported_order(14), 16);
        assert!(!is_supported_order(9));
        assert!(base_field_of_order(9).is_err());
        assert_eq!(bch_degree(4, 8), 2);
        assert_eq!(bch_degree(16, 8), 1);
    }

    #[test]
    fn moore_rows_and_local_blocks() {
        let code = GeneralCode::build(GeneralOptions::new(2, 4, 2, 3, 3, AlphaMode::Basis)).unwrap();
        let p = code.params();
        assert_eq!((p.q, p.m, p.b, p.ell), (8, 8, 2, 16));
        let f = code.field();
        let g = code.global_rows(0);
        for t in 1..3 {
            for c in 0..8 {
                assert_eq!(g.get(t, c), &f.pow(g.get(t - 1, c), 8));
            }
        }
        let h = code.parity_check(5);
        let local = code.local_code().local_parity_matrix(5);
        for grp in 0..2 {
            for t in 0..2 {
                for k in 0..4 {
                    assert_eq!(h.get(grp * 2 + t, grp * 4 + k), local.get(t, k));
                }
            }
        }
        assert_eq!(code.global_rows(3), code.global_rows(11));
    }

    #[test]
    fn single_global_row_is_alphas() {
        let code = GeneralCode::build(GeneralOptions::new(2, 3, 1, 1, 2, AlphaMode::Basis)).unwrap();
        assert_eq!(code.global_rows(0).row(0), code.params().alphas.as_slice());
    }

    #[test]
    fn size_report() {
        let mut opts = GeneralOptions::new(2, 4, 1, 2, 3, AlphaMode::Bch);
        opts.q = Some(4);
        let code = GeneralCode::build(opts).unwrap();
        let rep = code.field_size_report();
        assert_eq!(rep.ell, 1);
        assert_eq!(rep.size_bound.as_deref(), Some("32768"));
        assert_eq!(rep.field_size, "65536");
        assert_eq!(rep.within_size_bound, Some(false));
        assert_eq!(rep.ext_degree_bound, Some(7));
        assert!(rep.ell_identity_holds);
    }

    #[test]
    fn rejects_infeasible() {
        assert!(matches!(
            GeneralCode::build(GeneralOptions::new(1, 4, 2, 5, 3, AlphaMode::Basis)),
            Err(ConstructionError::InvalidParams(_))
        ));
        let mut opts = GeneralOptions::new(2, 4, 2, 3, 3, AlphaMode::Basis);
        opts.q = Some(4);
        assert!(matches!(
            GeneralCode::build(opts),
            Err(ConstructionError::FieldTooSmall { .. })
        ));
    }

    #[test]
    fn prime_base_field() {
        let mut opts = GeneralOptions::new(2, 3, 1, 2, 2, AlphaMode::Bch);
        opts.q = Some(7);
        let code = GeneralCode::build(opts.clone()).unwrap();
        assert_eq!(code.params().q, 7);
        assert_eq!((code.params().recipe.mode, code.params().m), (AlphaMode::Bch, 4));
        assert!(code.params().independence.passed());
        // s(r+1) = n mu leaves no room for a BCH code
        opts.s = 3;
        let code = GeneralCode::build(opts).unwrap();
        assert_eq!((code.params().recipe.mode, code.params().m), (AlphaMode::Basis, 6));
    }
}
