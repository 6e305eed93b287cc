//! Lexicographic k-subset enumeration.

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All k-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Combinations {
    Combinations {
        n,
        current: if k <= n { Some((0..k).collect()) } else { None },
    }
}

pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// k-subsets of an arbitrary index list, mapped through `items`.
pub fn subsets_of(items: &[usize], k: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    combinations(items.len(), k).map(move |c| c.into_iter().map(|i| items[i]).collect())
}

/// The `index`-th k-subset of `0..n` in lexicographic order.
pub fn unrank_combination(n: usize, k: usize, mut index: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        loop {
            let rest = binomial(n - next - 1, k - slot - 1);
            if index < rest {
                break;
            }
            index -= rest;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        for n in 0..9 {
            for k in 0..=n + 1 {
                assert_eq!(combinations(n, k).count() as u64, binomial(n, k), "C({n},{k})");
            }
        }
    }

    #[test]
    fn lexicographic() {
        let all: Vec<_> = combinations(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn unrank_matches_iteration() {
        for (n, k) in [(6, 2), (8, 4), (5, 0), (5, 5), (7, 3)] {
            for (i, c) in combinations(n, k).enumerate() {
                assert_eq!(unrank_combination(n, k, i as u64), c);
            }
        }
    }
}
