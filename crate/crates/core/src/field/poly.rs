//! Dense univariate polynomials over a base field, coefficients low degree first.
//!
//! Only what modulus validation and extension-field inversion need: no
//! factorization beyond Rabin's irreducibility test.

use super::base::BaseField;
use num_prime::nt_funcs::factorize64;

pub(crate) type Poly = Vec<u64>;

pub(crate) fn trim(p: &mut Poly) {
    while p.last() == Some(&0) {
        p.pop();
    }
}

pub(crate) fn degree(p: &[u64]) -> Option<usize> {
    p.iter().rposition(|&c| c != 0)
}

pub(crate) fn sub(f: &BaseField, a: &[u64], b: &[u64]) -> Poly {
    let len = a.len().max(b.len());
    let mut out: Poly = (0..len)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            f.sub(x, y)
        })
        .collect();
    trim(&mut out);
    out
}

pub(crate) fn mul(f: &BaseField, a: &[u64], b: &[u64]) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = f.add(out[i + j], f.mul(x, y));
        }
    }
    trim(&mut out);
    out
}

/// Quotient and remainder; `b` must be nonzero.
pub(crate) fn divrem(f: &BaseField, a: &[u64], b: &[u64]) -> (Poly, Poly) {
    let db = degree(b).expect("division by the zero polynomial");
    let lead_inv = f.inv(b[db]).expect("nonzero leading coefficient");
    let mut rem: Poly = a.to_vec();
    trim(&mut rem);
    if rem.len() <= db {
        return (Vec::new(), rem);
    }
    let mut quot = vec![0u64; rem.len() - db];
    for i in (db..rem.len()).rev() {
        let c = rem[i];
        if c == 0 {
            continue;
        }
        let factor = f.mul(c, lead_inv);
        quot[i - db] = factor;
        for j in 0..=db {
            let t = f.mul(factor, b[j]);
            rem[i - db + j] = f.sub(rem[i - db + j], t);
        }
    }
    trim(&mut rem);
    trim(&mut quot);
    (quot, rem)
}

pub(crate) fn rem(f: &BaseField, a: &[u64], b: &[u64]) -> Poly {
    divrem(f, a, b).1
}

fn make_monic(f: &BaseField, p: &mut Poly) {
    if let Some(d) = degree(p) {
        let inv = f.inv(p[d]).expect("nonzero leading coefficient");
        for c in p.iter_mut() {
            *c = f.mul(*c, inv);
        }
    }
}

pub(crate) fn gcd(f: &BaseField, a: &[u64], b: &[u64]) -> Poly {
    let mut x: Poly = a.to_vec();
    let mut y: Poly = b.to_vec();
    trim(&mut x);
    trim(&mut y);
    while !y.is_empty() {
        let r = rem(f, &x, &y);
        x = y;
        y = r;
    }
    make_monic(f, &mut x);
    x
}

pub(crate) fn mulmod(f: &BaseField, a: &[u64], b: &[u64], m: &[u64]) -> Poly {
    rem(f, &mul(f, a, b), m)
}

pub(crate) fn powmod(f: &BaseField, a: &[u64], mut e: u128, m: &[u64]) -> Poly {
    let mut base = rem(f, a, m);
    let mut acc: Poly = rem(f, &[1], m);
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(f, &acc, &base, m);
        }
        e >>= 1;
        if e > 0 {
            base = mulmod(f, &base, &base, m);
        }
    }
    acc
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm.
pub(crate) fn inverse_mod(f: &BaseField, a: &[u64], m: &[u64]) -> Option<Poly> {
    let mut r0: Poly = m.to_vec();
    let mut r1: Poly = rem(f, a, m);
    let mut s0: Poly = Vec::new();
    let mut s1: Poly = vec![1];
    while !r1.is_empty() {
        let (q, r) = divrem(f, &r0, &r1);
        let s = sub(f, &s0, &mul(f, &q, &s1));
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, s);
    }
    // r0 is gcd(a, m) up to a unit
    if degree(&r0) != Some(0) {
        return None;
    }
    let unit = f.inv(r0[0])?;
    let mut out: Poly = s0.iter().map(|&c| f.mul(c, unit)).collect();
    trim(&mut out);
    Some(rem(f, &out, m))
}

/// `x^(q^k) mod m` by repeated q-th powering.
fn frobenius_of_x(f: &BaseField, k: u64, m: &[u64]) -> Poly {
    let q = f.size();
    let mut h = rem(f, &[0, 1], m);
    for _ in 0..k {
        h = powmod(f, &h, q, m);
    }
    h
}

/// Rabin's irreducibility test for a polynomial over the base field.
pub(crate) fn is_irreducible(f: &BaseField, m: &[u64]) -> bool {
    let deg = match degree(m) {
        Some(d) if d >= 1 => d as u64,
        _ => return false,
    };
    if deg == 1 {
        return true;
    }
    let x: Poly = vec![0, 1];
    let full = frobenius_of_x(f, deg, m);
    if sub(f, &full, &rem(f, &x, m)) != Vec::<u64>::new() {
        return false;
    }
    for p in factorize64(deg).into_keys() {
        let h = frobenius_of_x(f, deg / p, m);
        let g = gcd(f, &sub(f, &h, &x), m);
        if degree(&g) != Some(0) {
            return false;
        }
    }
    true
}

/// Smallest monic irreducible polynomial of the given degree, ordering
/// candidates by the base-`q` integer formed from their low coefficients.
pub(crate) fn smallest_irreducible(f: &BaseField, deg: usize) -> Poly {
    let q = f.size();
    let mut index: u128 = 0;
    loop {
        let mut coeffs = vec![0u64; deg + 1];
        coeffs[deg] = 1;
        let mut k = index;
        for c in coeffs.iter_mut().take(deg) {
            *c = (k % q) as u64;
            k /= q;
        }
        index += 1;
        if deg > 1 && coeffs[0] == 0 {
            continue;
        }
        if is_irreducible(f, &coeffs) {
            return coeffs;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf2() -> BaseField {
        BaseField::Prime { p: 2 }
    }

    #[test]
    fn irreducibility_over_gf2() {
        let f = gf2();
        assert!(is_irreducible(&f, &[1, 1, 0, 1])); // x^3+x+1
        assert!(!is_irreducible(&f, &[1, 0, 1])); // x^2+1 = (x+1)^2
        assert!(!is_irreducible(&f, &[0, 1, 1])); // x^2+x
        assert!(is_irreducible(&f, &[1, 1, 1])); // x^2+x+1
    }

    #[test]
    fn brute_force_agrees_with_rabin_degree_4() {
        // a degree-4 poly over GF(2) is reducible iff it has a factor of degree 1 or 2
        let f = gf2();
        let small: Vec<Poly> = vec![vec![0, 1], vec![1, 1], vec![1, 1, 1]];
        for low in 0..16u64 {
            let p: Poly = (0..4).map(|i| (low >> i) & 1).chain(std::iter::once(1)).collect();
            let brute = !small.iter().any(|d| rem(&f, &p, d).is_empty());
            assert_eq!(is_irreducible(&f, &p), brute, "{p:?}");
        }
    }

    #[test]
    fn inverse_mod_roundtrip() {
        let f = BaseField::Prime { p: 7 };
        let m = smallest_irreducible(&f, 3);
        for a in 1..50u64 {
            let poly: Poly = vec![a % 7, (a / 7) % 7, 1];
            let inv = inverse_mod(&f, &poly, &m).unwrap();
            assert_eq!(mulmod(&f, &poly, &inv, &m), vec![1]);
        }
    }
}
