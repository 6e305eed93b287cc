//! Prime-order and binary base fields with elements packed into `u64`.
//!
//! A binary field GF(2^w) stores an element as the bit vector of its
//! polynomial-basis coordinates, bit `k` holding the coefficient of `x^k`.
//! Fields up to 2^16 elements use log/antilog tables; larger ones fall back
//! to a carry-less multiply followed by reduction.

use num_prime::nt_funcs::factorize64;

/// Largest binary degree served by log/antilog tables.
const TABLE_MAX_DEGREE: u32 = 16;

#[derive(Debug, Clone)]
pub(crate) enum BaseField {
    Binary(BinaryField),
    Prime { p: u64 },
}

#[derive(Debug, Clone)]
pub(crate) struct BinaryField {
    w: u32,
    /// Full modulus including the `x^w` term.
    modulus: u128,
    tables: Option<LogTables>,
}

#[derive(Debug, Clone)]
struct LogTables {
    log: Vec<u32>,
    /// `exp[i] = g^i` for `i < 2(q-1)`, so sums of two logs never need a reduction.
    exp: Vec<u64>,
}

pub(crate) fn clmul(a: u64, b: u64) -> u128 {
    let mut acc = 0u128;
    let mut a = a as u128;
    let mut b = b;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        b >>= 1;
    }
    acc
}

impl BinaryField {
    /// `modulus` must already be known to be irreducible of degree `w`.
    pub(crate) fn new(w: u32, modulus: u128) -> Self {
        let mut field = BinaryField {
            w,
            modulus,
            tables: None,
        };
        if (2..=TABLE_MAX_DEGREE).contains(&w) {
            field.tables = Some(field.build_tables());
        }
        field
    }

    fn reduce(&self, mut x: u128) -> u64 {
        let w = self.w;
        for i in (w..2 * w).rev() {
            if (x >> i) & 1 == 1 {
                x ^= self.modulus << (i - w);
            }
        }
        x as u64
    }

    fn mul_slow(&self, a: u64, b: u64) -> u64 {
        self.reduce(clmul(a, b))
    }

    fn pow_slow(&self, a: u64, mut e: u128) -> u64 {
        let mut base = a;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_slow(acc, base);
            }
            base = self.mul_slow(base, base);
            e >>= 1;
        }
        acc
    }

    fn build_tables(&self) -> LogTables {
        let order = (1u64 << self.w) - 1;
        let primes: Vec<u64> = factorize64(order).into_keys().collect();
        let generator = (2..=order)
            .find(|&g| primes.iter().all(|&p| self.pow_slow(g, (order / p) as u128) != 1))
            .expect("a finite field always has a primitive element");
        let mut exp = Vec::with_capacity(2 * order as usize);
        let mut log = vec![0u32; order as usize + 1];
        let mut x = 1u64;
        for i in 0..order {
            exp.push(x);
            log[x as usize] = i as u32;
            x = self.mul_slow(x, generator);
        }
        for i in 0..order as usize {
            exp.push(exp[i]);
        }
        LogTables { log, exp }
    }

    fn mul(&self, a: u64, b: u64) -> u64 {
        if a == 0 || b == 0 {
            return 0;
        }
        match &self.tables {
            Some(t) => t.exp[(t.log[a as usize] + t.log[b as usize]) as usize],
            None => self.mul_slow(a, b),
        }
    }

    fn inv(&self, a: u64) -> u64 {
        match &self.tables {
            Some(t) => {
                let order = (t.exp.len() / 2) as u32;
                t.exp[(order - t.log[a as usize]) as usize]
            }
            None => self.pow_slow(a, (1u128 << self.w) - 2),
        }
    }
}

impl BaseField {
    pub(crate) fn size(&self) -> u128 {
        match self {
            BaseField::Binary(b) => 1u128 << b.w,
            BaseField::Prime { p } => *p as u128,
        }
    }

    pub(crate) fn contains(&self, a: u64) -> bool {
        (a as u128) < self.size()
    }

    #[inline]
    pub(crate) fn add(&self, a: u64, b: u64) -> u64 {
        match self {
            BaseField::Binary(_) => a ^ b,
            BaseField::Prime { p } => ((a as u128 + b as u128) % *p as u128) as u64,
        }
    }

    #[inline]
    pub(crate) fn neg(&self, a: u64) -> u64 {
        match self {
            BaseField::Binary(_) => a,
            BaseField::Prime { p } => {
                if a == 0 {
                    0
                } else {
                    p - a
                }
            }
        }
    }

    #[inline]
    pub(crate) fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub(crate) fn mul(&self, a: u64, b: u64) -> u64 {
        match self {
            BaseField::Binary(f) => f.mul(a, b),
            BaseField::Prime { p } => ((a as u128 * b as u128) % *p as u128) as u64,
        }
    }

    pub(crate) fn pow(&self, a: u64, mut e: u128) -> u64 {
        let mut base = a;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Inverse of a nonzero element.
    pub(crate) fn inv(&self, a: u64) -> Option<u64> {
        if a == 0 {
            return None;
        }
        Some(match self {
            BaseField::Binary(f) => f.inv(a),
            BaseField::Prime { p } => self.pow(a, (*p - 2) as u128),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clmul_matches_schoolbook() {
        // (x+1)(x+1) = x^2+1 over GF(2)
        assert_eq!(clmul(0b11, 0b11), 0b101);
        assert_eq!(clmul(u64::MAX, 1), u64::MAX as u128);
    }

    #[test]
    fn tables_agree_with_slow_path() {
        let f = BinaryField::new(8, 0x11D);
        for a in 0..256u64 {
            for b in 0..256u64 {
                assert_eq!(f.mul(a, b), f.mul_slow(a, b));
            }
        }
    }

    #[test]
    fn prime_inverse() {
        let f = BaseField::Prime { p: 101 };
        for a in 1..101 {
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
        assert_eq!(f.inv(0), None);
    }
}
