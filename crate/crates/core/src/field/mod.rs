//! Finite field arithmetic: GF(2^w), GF(p) and extensions GF(q^M) over either.
//!
//! Every field is described by a [`FieldSpec`] carrying its moduli explicitly,
//! so two runs with the same spec agree bit for bit. A [`Field`] is the
//! validated, immutable runtime form of a spec; it is cheap to clone and can
//! be shared across threads.
//!
//! Elements of GF(q^M) are coefficient vectors over the polynomial basis
//! `1, y, ..., y^(M-1)`, each coefficient a base-field element packed into a
//! `u64`. Base-field elements are the `M = 1` case.

mod base;
mod poly;

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_prime::nt_funcs::{factorize64, is_prime64};
use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use base::{BaseField, BinaryField};

/// Largest supported extension degree.
pub const MAX_EXT_DEGREE: u32 = 64;

/// Primitive polynomials for GF(2^w), with the `x^w` bit included.
const BINARY_MODULI: [(u32, u128); 16] = [
    (1, 0x3),
    (2, 0x7),
    (3, 0xB),
    (4, 0x13),
    (5, 0x25),
    (6, 0x43),
    (7, 0x83),
    (8, 0x11D),
    (9, 0x211),
    (10, 0x409),
    (11, 0x805),
    (12, 0x1053),
    (13, 0x201B),
    (14, 0x4443),
    (15, 0x8003),
    (16, 0x1100B),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("elements belong to different fields")]
    SpecMismatch,
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus is not irreducible: {0}")]
    Reducible(String),
    #[error("malformed field spec: {0}")]
    Malformed(String),
    #[error("unsupported field: {0}")]
    Unsupported(String),
    #[error("no element of order at least {wanted} in a field of {size} elements")]
    NoSuchElement { wanted: u64, size: String },
    #[error("value does not encode a field element")]
    InvalidEncoding,
}

/// Serializable description of a field. See the module docs for layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub characteristic: u64,
    pub base_degree: u32,
    #[serde(default = "default_ext_degree")]
    pub ext_degree: u32,
    /// Coefficients of the base modulus over GF(characteristic), low degree first,
    /// leading coefficient included.
    pub base_modulus: Vec<u64>,
    /// Coefficients of the extension modulus over the base field, low degree
    /// first; each coefficient is itself a coefficient list over GF(characteristic).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ext_modulus: Option<Vec<Vec<u64>>>,
}

fn default_ext_degree() -> u32 {
    1
}

impl FieldSpec {
    /// GF(2^w) with the shipped primitive modulus, or the smallest irreducible
    /// polynomial of degree `w` when none is shipped.
    pub fn binary(w: u32) -> Result<FieldSpec, FieldError> {
        if w == 0 || w > 64 {
            return Err(FieldError::Unsupported(format!("GF(2^{w})")));
        }
        let modulus = match BINARY_MODULI.iter().find(|(d, _)| *d == w) {
            Some((_, m)) => (0..=w).map(|i| ((m >> i) & 1) as u64).collect(),
            None => poly::smallest_irreducible(&BaseField::Prime { p: 2 }, w as usize),
        };
        Ok(FieldSpec {
            characteristic: 2,
            base_degree: w,
            ext_degree: 1,
            base_modulus: modulus,
            ext_modulus: None,
        })
    }

    /// GF(2^w) with an explicit modulus given as a bit mask including `x^w`.
    pub fn binary_with_modulus(w: u32, modulus: u128) -> FieldSpec {
        FieldSpec {
            characteristic: 2,
            base_degree: w,
            ext_degree: 1,
            base_modulus: (0..=w).map(|i| ((modulus >> i) & 1) as u64).collect(),
            ext_modulus: None,
        }
    }

    pub fn prime(p: u64) -> FieldSpec {
        FieldSpec {
            characteristic: p,
            base_degree: 1,
            ext_degree: 1,
            base_modulus: vec![0, 1],
            ext_modulus: None,
        }
    }

    /// Degree-`m` extension of this (base) field using the smallest monic
    /// irreducible modulus.
    pub fn extension(&self, m: u32) -> Result<FieldSpec, FieldError> {
        if self.ext_degree != 1 {
            return Err(FieldError::Malformed("towers of extensions are not supported".into()));
        }
        if m == 0 || m > MAX_EXT_DEGREE {
            return Err(FieldError::Unsupported(format!("extension degree {m}")));
        }
        let mut spec = self.clone();
        spec.ext_degree = m;
        if m == 1 {
            return Ok(spec);
        }
        let base = build_base(self)?;
        let modulus = poly::smallest_irreducible(&base, m as usize);
        spec.ext_modulus = Some(
            modulus
                .iter()
                .map(|&c| base_elem_to_coeffs(self, c))
                .collect(),
        );
        Ok(spec)
    }

    /// The spec of the base field alone.
    pub fn base_spec(&self) -> FieldSpec {
        FieldSpec {
            characteristic: self.characteristic,
            base_degree: self.base_degree,
            ext_degree: 1,
            base_modulus: self.base_modulus.clone(),
            ext_modulus: None,
        }
    }
}

fn base_elem_to_coeffs(spec: &FieldSpec, c: u64) -> Vec<u64> {
    if spec.characteristic == 2 {
        (0..spec.base_degree).map(|i| (c >> i) & 1).collect()
    } else {
        vec![c]
    }
}

fn base_elem_from_coeffs(spec: &FieldSpec, coeffs: &[u64]) -> Result<u64, FieldError> {
    if coeffs.len() != spec.base_degree as usize {
        return Err(FieldError::Malformed(format!(
            "base element needs {} coefficients, got {}",
            spec.base_degree,
            coeffs.len()
        )));
    }
    if spec.characteristic == 2 {
        let mut v = 0u64;
        for (i, &c) in coeffs.iter().enumerate() {
            if c > 1 {
                return Err(FieldError::Malformed("binary coefficient above 1".into()));
            }
            v |= c << i;
        }
        Ok(v)
    } else if coeffs[0] < spec.characteristic {
        Ok(coeffs[0])
    } else {
        Err(FieldError::Malformed("coefficient not reduced".into()))
    }
}

fn build_base(spec: &FieldSpec) -> Result<BaseField, FieldError> {
    let p = spec.characteristic;
    if !is_prime64(p) {
        return Err(FieldError::NotPrime(p));
    }
    let w = spec.base_degree;
    if w == 0 {
        return Err(FieldError::Malformed("base degree must be at least 1".into()));
    }
    if spec.base_modulus.len() != w as usize + 1 || spec.base_modulus[w as usize] != 1 {
        return Err(FieldError::Malformed(format!(
            "base modulus must be monic of degree {w}"
        )));
    }
    if spec.base_modulus.iter().any(|&c| c >= p) {
        return Err(FieldError::Malformed("base modulus coefficient not reduced".into()));
    }
    if p == 2 {
        if w > 64 {
            return Err(FieldError::Unsupported(format!("GF(2^{w})")));
        }
        if !poly::is_irreducible(&BaseField::Prime { p: 2 }, &spec.base_modulus) {
            return Err(FieldError::Reducible(format!("{:?}", spec.base_modulus)));
        }
        let mask = spec
            .base_modulus
            .iter()
            .enumerate()
            .fold(0u128, |acc, (i, &c)| acc | ((c as u128) << i));
        Ok(BaseField::Binary(BinaryField::new(w, mask)))
    } else {
        if w != 1 {
            return Err(FieldError::Unsupported(format!(
                "GF({p}^{w}) as a base field; use GF({p}) with an extension"
            )));
        }
        Ok(BaseField::Prime { p })
    }
}

/// An element of a [`Field`]: its coordinates over the base field.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(SmallVec<[u64; 8]>);

impl FieldElement {
    pub fn coeffs(&self) -> &[u64] {
        &self.0
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", self.0[0])
        } else {
            write!(f, "{:?}", self.0.as_slice())
        }
    }
}

struct Inner {
    spec: FieldSpec,
    base: BaseField,
    /// Monic extension modulus over the base field; `None` for `M = 1`.
    ext: Option<Vec<u64>>,
    m: usize,
    size: BigUint,
    byte_width: usize,
    order_primes: OnceLock<Vec<u64>>,
}

/// A validated finite field. Clones share the same tables.
#[derive(Clone)]
pub struct Field {
    inner: Arc<Inner>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.inner.spec;
        if s.ext_degree == 1 {
            write!(f, "GF({}^{})", s.characteristic, s.base_degree)
        } else {
            write!(
                f,
                "GF(({}^{})^{})",
                s.characteristic, s.base_degree, s.ext_degree
            )
        }
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.spec == other.inner.spec
    }
}

impl Eq for Field {}

impl Field {
    pub fn new(spec: FieldSpec) -> Result<Field, FieldError> {
        let base = build_base(&spec)?;
        let m = spec.ext_degree;
        if m == 0 || m > MAX_EXT_DEGREE {
            return Err(FieldError::Unsupported(format!("extension degree {m}")));
        }
        let ext = if m == 1 {
            if spec.ext_modulus.as_ref().is_some_and(|v| !v.is_empty()) {
                return Err(FieldError::Malformed(
                    "extension modulus given for a base field".into(),
                ));
            }
            None
        } else {
            let raw = spec
                .ext_modulus
                .as_ref()
                .ok_or_else(|| FieldError::Malformed("missing extension modulus".into()))?;
            if raw.len() != m as usize + 1 {
                return Err(FieldError::Malformed(format!(
                    "extension modulus must have {} coefficients",
                    m + 1
                )));
            }
            let coeffs = raw
                .iter()
                .map(|c| base_elem_from_coeffs(&spec, c))
                .collect::<Result<Vec<u64>, _>>()?;
            if coeffs[m as usize] != 1 {
                return Err(FieldError::Malformed("extension modulus must be monic".into()));
            }
            if !poly::is_irreducible(&base, &coeffs) {
                return Err(FieldError::Reducible(format!("{raw:?}")));
            }
            Some(coeffs)
        };
        let size = BigUint::from(base.size()).pow(m);
        let byte_width = ((&size - 1u32).bits() as usize).div_ceil(8).max(1);
        Ok(Field {
            inner: Arc::new(Inner {
                spec,
                base,
                ext,
                m: m as usize,
                size,
                byte_width,
                order_primes: OnceLock::new(),
            }),
        })
    }

    /// GF(2^w) with the default modulus.
    pub fn binary(w: u32) -> Result<Field, FieldError> {
        Field::new(FieldSpec::binary(w)?)
    }

    pub fn prime(p: u64) -> Result<Field, FieldError> {
        Field::new(FieldSpec::prime(p))
    }

    /// Degree-`m` extension of this field, which must itself be a base field.
    pub fn extension(&self, m: u32) -> Result<Field, FieldError> {
        Field::new(self.inner.spec.extension(m)?)
    }

    /// The base field GF(q) underlying this field.
    pub fn base_field(&self) -> Field {
        if self.inner.m == 1 {
            return self.clone();
        }
        Field::new(self.inner.spec.base_spec()).expect("base of a valid field is valid")
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.inner.spec
    }

    pub fn characteristic(&self) -> u64 {
        self.inner.spec.characteristic
    }

    /// Size q of the base field.
    pub fn base_size(&self) -> u128 {
        self.inner.base.size()
    }

    /// Extension degree M (1 for a base field).
    pub fn ext_degree(&self) -> usize {
        self.inner.m
    }

    pub fn size(&self) -> &BigUint {
        &self.inner.size
    }

    /// Field size when it fits in a `u128`.
    pub fn size_u128(&self) -> Option<u128> {
        u128::try_from(&self.inner.size).ok()
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(SmallVec::from_elem(0, self.inner.m))
    }

    pub fn one(&self) -> FieldElement {
        self.from_base(1)
    }

    /// Embeds a base-field element (packed `u64`) via the subfield injection.
    pub fn from_base(&self, c: u64) -> FieldElement {
        debug_assert!(self.inner.base.contains(c));
        let mut v = SmallVec::from_elem(0, self.inner.m);
        v[0] = c;
        FieldElement(v)
    }

    pub fn from_coeffs(&self, coeffs: &[u64]) -> Result<FieldElement, FieldError> {
        if coeffs.len() != self.inner.m || !coeffs.iter().all(|&c| self.inner.base.contains(c)) {
            return Err(FieldError::SpecMismatch);
        }
        Ok(FieldElement(SmallVec::from_slice(coeffs)))
    }

    /// Whether `a` is a well-formed element of this field.
    pub fn contains(&self, a: &FieldElement) -> bool {
        a.0.len() == self.inner.m && a.0.iter().all(|&c| self.inner.base.contains(c))
    }

    pub fn is_zero(&self, a: &FieldElement) -> bool {
        a.0.iter().all(|&c| c == 0)
    }

    pub fn is_one(&self, a: &FieldElement) -> bool {
        a.0[0] == 1 && a.0[1..].iter().all(|&c| c == 0)
    }

    /// Element with the given index in the mixed-radix ordering
    /// `sum c_k q^k`; fails when the index is not below the field size.
    pub fn from_index(&self, mut index: u128) -> Result<FieldElement, FieldError> {
        let q = self.base_size();
        let mut v = SmallVec::from_elem(0, self.inner.m);
        for c in v.iter_mut() {
            *c = (index % q) as u64;
            index /= q;
        }
        if index != 0 {
            return Err(FieldError::InvalidEncoding);
        }
        Ok(FieldElement(v))
    }

    /// Inverse of [`Field::from_index`], when the index fits in a `u128`.
    pub fn to_index(&self, a: &FieldElement) -> Option<u128> {
        let q = self.base_size();
        let mut acc: u128 = 0;
        for &c in a.0.iter().rev() {
            acc = acc.checked_mul(q)?.checked_add(c as u128)?;
        }
        Some(acc)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let q = self.base_size();
        let v = (0..self.inner.m)
            .map(|_| {
                if q == 1u128 << 64 {
                    rng.gen::<u64>()
                } else {
                    rng.gen_range(0..q) as u64
                }
            })
            .collect();
        FieldElement(v)
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        loop {
            let a = self.random(rng);
            if !self.is_zero(&a) {
                return a;
            }
        }
    }

    #[inline]
    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        debug_assert_eq!(a.0.len(), self.inner.m);
        debug_assert_eq!(b.0.len(), self.inner.m);
        let base = &self.inner.base;
        FieldElement(a.0.iter().zip(&b.0).map(|(&x, &y)| base.add(x, y)).collect())
    }

    #[inline]
    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let base = &self.inner.base;
        FieldElement(a.0.iter().zip(&b.0).map(|(&x, &y)| base.sub(x, y)).collect())
    }

    #[inline]
    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        let base = &self.inner.base;
        FieldElement(a.0.iter().map(|&x| base.neg(x)).collect())
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        debug_assert_eq!(a.0.len(), self.inner.m);
        debug_assert_eq!(b.0.len(), self.inner.m);
        let base = &self.inner.base;
        let modulus = match &self.inner.ext {
            None => return FieldElement(SmallVec::from_elem(base.mul(a.0[0], b.0[0]), 1)),
            Some(m) => m,
        };
        let m = self.inner.m;
        let mut t: SmallVec<[u64; 16]> = SmallVec::from_elem(0, 2 * m - 1);
        for (i, &x) in a.0.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.0.iter().enumerate() {
                if y != 0 {
                    t[i + j] = base.add(t[i + j], base.mul(x, y));
                }
            }
        }
        // y^m = -sum_{j<m} modulus_j y^j
        for k in (m..2 * m - 1).rev() {
            let c = t[k];
            if c == 0 {
                continue;
            }
            for j in 0..m {
                if modulus[j] != 0 {
                    t[k - m + j] = base.sub(t[k - m + j], base.mul(c, modulus[j]));
                }
            }
        }
        t.truncate(m);
        FieldElement(t.into_iter().collect())
    }

    pub fn checked_add(
        &self,
        a: &FieldElement,
        b: &FieldElement,
    ) -> Result<FieldElement, FieldError> {
        if !self.contains(a) || !self.contains(b) {
            return Err(FieldError::SpecMismatch);
        }
        Ok(self.add(a, b))
    }

    pub fn checked_mul(
        &self,
        a: &FieldElement,
        b: &FieldElement,
    ) -> Result<FieldElement, FieldError> {
        if !self.contains(a) || !self.contains(b) {
            return Err(FieldError::SpecMismatch);
        }
        Ok(self.mul(a, b))
    }

    pub fn inv(&self, a: &FieldElement) -> Result<FieldElement, FieldError> {
        if self.is_zero(a) {
            return Err(FieldError::ZeroInverse);
        }
        let base = &self.inner.base;
        match &self.inner.ext {
            None => Ok(FieldElement(SmallVec::from_elem(
                base.inv(a.0[0]).ok_or(FieldError::ZeroInverse)?,
                1,
            ))),
            Some(modulus) => {
                let mut p: Vec<u64> = a.0.to_vec();
                poly::trim(&mut p);
                let inv = poly::inverse_mod(base, &p, modulus).ok_or(FieldError::ZeroInverse)?;
                let mut v = SmallVec::from_elem(0, self.inner.m);
                v[..inv.len()].copy_from_slice(&inv);
                Ok(FieldElement(v))
            }
        }
    }

    pub fn div(&self, a: &FieldElement, b: &FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(a, &self.inv(b)?))
    }

    pub fn pow(&self, a: &FieldElement, mut e: u128) -> FieldElement {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    /// `a^(q^j)` where q is the base field size.
    pub fn frobenius(&self, a: &FieldElement, j: usize) -> FieldElement {
        let m = self.inner.m;
        if m == 1 {
            return a.clone();
        }
        let q = self.base_size();
        let mut x = a.clone();
        for _ in 0..j % m {
            x = self.pow(&x, q);
        }
        x
    }

    fn group_order(&self) -> Result<u64, FieldError> {
        let n = &self.inner.size - 1u32;
        u64::try_from(&n).map_err(|_| {
            FieldError::Unsupported(format!(
                "element orders in a field of {} elements",
                self.inner.size
            ))
        })
    }

    fn order_primes(&self) -> Result<&[u64], FieldError> {
        let n = self.group_order()?;
        Ok(self
            .inner
            .order_primes
            .get_or_init(|| factorize64(n).into_keys().collect()))
    }

    /// Multiplicative order of a nonzero element.
    pub fn element_order(&self, a: &FieldElement) -> Result<u64, FieldError> {
        if self.is_zero(a) {
            return Err(FieldError::ZeroInverse);
        }
        let mut order = self.group_order()?;
        for &p in self.order_primes()? {
            while order % p == 0 && self.is_one(&self.pow(a, (order / p) as u128)) {
                order /= p;
            }
        }
        Ok(order)
    }

    pub fn is_primitive(&self, a: &FieldElement) -> Result<bool, FieldError> {
        Ok(!self.is_zero(a) && self.element_order(a)? == self.group_order()?)
    }

    /// First primitive element in index order; its order `|F| - 1` must reach `t`.
    pub fn find_element_of_order_at_least(&self, t: u64) -> Result<FieldElement, FieldError> {
        let group = self.group_order().map_err(|_| FieldError::NoSuchElement {
            wanted: t,
            size: self.inner.size.to_string(),
        })?;
        if t > group {
            return Err(FieldError::NoSuchElement {
                wanted: t,
                size: self.inner.size.to_string(),
            });
        }
        let start = if group == 1 { 1 } else { 2 };
        for idx in start..=group as u128 {
            let a = self.from_index(idx)?;
            if self.is_primitive(&a)? {
                return Ok(a);
            }
        }
        unreachable!("every finite field has a primitive element")
    }

    /// Coordinates of `a` over the base field in the basis `1, y, ..., y^(M-1)`.
    pub fn expand_to_base(&self, a: &FieldElement) -> Vec<u64> {
        a.0.to_vec()
    }

    /// Rank over the base field of the coordinate vectors of `vs`.
    pub fn rank_over_base(&self, vs: &[FieldElement]) -> usize {
        let base = &self.inner.base;
        let mut rows: Vec<Vec<u64>> = vs.iter().map(|v| v.0.to_vec()).collect();
        let cols = self.inner.m;
        let mut rank = 0;
        for col in 0..cols {
            let Some(pivot) = (rank..rows.len()).find(|&i| rows[i][col] != 0) else {
                continue;
            };
            rows.swap(rank, pivot);
            let inv = base.inv(rows[rank][col]).expect("pivot is nonzero");
            let pivot_row: Vec<u64> = rows[rank].iter().map(|&x| base.mul(x, inv)).collect();
            for (i, row) in rows.iter_mut().enumerate() {
                if i == rank || row[col] == 0 {
                    continue;
                }
                let f = row[col];
                for (x, &p) in row.iter_mut().zip(&pivot_row) {
                    *x = base.sub(*x, base.mul(f, p));
                }
            }
            rows[rank] = pivot_row;
            rank += 1;
        }
        rank
    }

    /// Bytes per serialized element: `ceil(log2 |F| / 8)`.
    pub fn element_byte_width(&self) -> usize {
        self.inner.byte_width
    }

    /// Number of whole bits of payload one element can carry: `floor(log2 |F|)`.
    pub fn data_bits(&self) -> usize {
        self.inner.size.bits() as usize - 1
    }

    /// Little-endian fixed-width encoding of the element's index.
    pub fn write_element(&self, a: &FieldElement, out: &mut [u8]) {
        assert_eq!(out.len(), self.inner.byte_width);
        out.fill(0);
        match &self.inner.base {
            BaseField::Binary(_) => {
                let w = self.inner.spec.base_degree as usize;
                for (k, &c) in a.0.iter().enumerate() {
                    for bit in 0..w {
                        if (c >> bit) & 1 == 1 {
                            let pos = k * w + bit;
                            out[pos / 8] |= 1 << (pos % 8);
                        }
                    }
                }
            }
            BaseField::Prime { p } => {
                let q = BigUint::from(*p);
                let mut acc = BigUint::from(0u32);
                for &c in a.0.iter().rev() {
                    acc = acc * &q + BigUint::from(c);
                }
                let bytes = acc.to_bytes_le();
                out[..bytes.len()].copy_from_slice(&bytes);
            }
        }
    }

    pub fn read_element(&self, bytes: &[u8]) -> Result<FieldElement, FieldError> {
        if bytes.len() != self.inner.byte_width {
            return Err(FieldError::InvalidEncoding);
        }
        let m = self.inner.m;
        match &self.inner.base {
            BaseField::Binary(_) => {
                let w = self.inner.spec.base_degree as usize;
                let total = w * m;
                let mut v: SmallVec<[u64; 8]> = SmallVec::from_elem(0, m);
                for (byte_idx, &byte) in bytes.iter().enumerate() {
                    for bit in 0..8 {
                        if (byte >> bit) & 1 == 0 {
                            continue;
                        }
                        let pos = byte_idx * 8 + bit;
                        if pos >= total {
                            return Err(FieldError::InvalidEncoding);
                        }
                        v[pos / w] |= 1 << (pos % w);
                    }
                }
                Ok(FieldElement(v))
            }
            BaseField::Prime { p } => {
                let mut acc = BigUint::from_bytes_le(bytes);
                if acc >= self.inner.size {
                    return Err(FieldError::InvalidEncoding);
                }
                let q = BigUint::from(*p);
                let mut v: SmallVec<[u64; 8]> = SmallVec::from_elem(0, m);
                for c in v.iter_mut() {
                    let digit = &acc % &q;
                    *c = u64::try_from(&digit).expect("digit below a u64 prime");
                    acc /= &q;
                }
                Ok(FieldElement(v))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf8() -> Field {
        Field::binary(3).unwrap()
    }

    #[test]
    fn shipped_moduli_are_primitive() {
        for (w, _) in BINARY_MODULI {
            let f = Field::binary(w).unwrap();
            // x is primitive for every shipped modulus
            let x = f.from_index(if w == 1 { 1 } else { 2 }).unwrap();
            assert!(f.is_primitive(&x).unwrap(), "w = {w}");
        }
    }

    #[test]
    fn gf8_examples() {
        let f = gf8();
        let x = f.from_base(0b010);
        let x2 = f.from_base(0b100);
        let xp1 = f.from_base(0b011);
        assert_eq!(f.add(&x, &xp1), f.one());
        assert_eq!(f.mul(&x, &x2), xp1);
        assert_eq!(f.inv(&x).unwrap(), f.from_base(0b101));
        assert_eq!(f.inv(&f.zero()), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn rejects_reducible_and_malformed() {
        let bad = FieldSpec::binary_with_modulus(3, 0b1001); // x^3+1
        assert!(matches!(Field::new(bad), Err(FieldError::Reducible(_))));
        assert!(matches!(Field::new(FieldSpec::prime(15)), Err(FieldError::NotPrime(15))));
        let mut spec = FieldSpec::prime(3);
        spec.base_degree = 2;
        spec.base_modulus = vec![1, 0, 1];
        assert!(matches!(Field::new(spec), Err(FieldError::Unsupported(_))));
    }

    #[test]
    fn large_binary_fields_without_tables() {
        let f = Field::binary(40).unwrap();
        let mut rng = rand::thread_rng();
        for _ in 0..50 {
            let a = f.random_nonzero(&mut rng);
            assert!(f.is_one(&f.mul(&a, &f.inv(&a).unwrap())));
        }
        let f64 = Field::binary(64).unwrap();
        let a = f64.from_base(u64::MAX);
        assert!(f64.is_one(&f64.mul(&a, &f64.inv(&a).unwrap())));
    }

    #[test]
    fn prime_extension_arithmetic() {
        let f = Field::prime(5).unwrap().extension(3).unwrap();
        assert_eq!(f.size_u128(), Some(125));
        let g = f.find_element_of_order_at_least(124).unwrap();
        assert_eq!(f.element_order(&g).unwrap(), 124);
        let mut rng = rand::thread_rng();
        for _ in 0..100 {
            let a = f.random_nonzero(&mut rng);
            assert!(f.is_one(&f.mul(&a, &f.inv(&a).unwrap())));
            assert_eq!(f.frobenius(&a, 3), a);
        }
    }

    #[test]
    fn spec_json_shape() {
        let spec = Field::binary(2).unwrap().extension(3).unwrap().spec().clone();
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["characteristic"], 2);
        assert_eq!(json["ext_degree"], 3);
        assert_eq!(json["ext_modulus"].as_array().unwrap().len(), 4);
        let back: FieldSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
        assert!(Field::new(back).is_ok());
    }

    #[test]
    fn element_serialization_widths() {
        assert_eq!(Field::binary(6).unwrap().element_byte_width(), 1);
        assert_eq!(Field::binary(6).unwrap().data_bits(), 6);
        let gf4_8 = Field::binary(2).unwrap().extension(8).unwrap();
        assert_eq!(gf4_8.element_byte_width(), 2);
        let gf5_3 = Field::prime(5).unwrap().extension(3).unwrap();
        assert_eq!(gf5_3.element_byte_width(), 1);
        assert_eq!(gf5_3.data_bits(), 6);
        for f in [gf4_8, gf5_3] {
            let mut buf = vec![0u8; f.element_byte_width()];
            for idx in [0u128, 1, 7, 100] {
                let a = f.from_index(idx).unwrap();
                f.write_element(&a, &mut buf);
                assert_eq!(f.read_element(&buf).unwrap(), a);
            }
        }
        // 125 does not encode an element of GF(125)
        let gf125 = Field::prime(5).unwrap().extension(3).unwrap();
        assert_eq!(gf125.read_element(&[125]), Err(FieldError::InvalidEncoding));
    }
}
