//! Dense matrices over a [`Field`] and exact Gaussian elimination.
//!
//! Pivoting takes the first nonzero entry in the current column, scanning
//! columns left to right, so results are deterministic.

use thiserror::Error;

use crate::field::{Field, FieldElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is rank deficient (no pivot in column {column})")]
    RankDeficient { column: usize },
    #[error("dimension mismatch")]
    Dimension,
}

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<FieldElement>,
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![field.zero(); rows * cols],
        }
    }

    pub fn identity(field: &Field, n: usize) -> Matrix {
        let mut m = Matrix::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, field.one());
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> FieldElement,
    ) -> Matrix {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<FieldElement>>) -> Matrix {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &FieldElement {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElement] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, cols.len(), |r, c| self.get(r, cols[c]).clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), self.cols, |r, c| self.get(rows[r], c).clone())
    }

    /// Stacks `other` below `self`.
    pub fn stack(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, field: &Field, v: &[FieldElement]) -> Vec<FieldElement> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| dot(field, self.row(r), v))
            .collect()
    }

    pub fn mul(&self, field: &Field, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        Matrix::from_fn(self.rows, other.cols, |r, c| {
            let mut acc = field.zero();
            for k in 0..self.cols {
                acc = field.add(&acc, &field.mul(self.get(r, k), other.get(k, c)));
            }
            acc
        })
    }

    pub fn neg(&self, field: &Field) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| field.neg(x)).collect(),
        }
    }

    pub fn is_zero(&self, field: &Field) -> bool {
        self.data.iter().all(|x| field.is_zero(x))
    }
}

pub fn dot(field: &Field, a: &[FieldElement], b: &[FieldElement]) -> FieldElement {
    let mut acc = field.zero();
    for (x, y) in a.iter().zip(b) {
        if !field.is_zero(x) && !field.is_zero(y) {
            acc = field.add(&acc, &field.mul(x, y));
        }
    }
    acc
}

/// Row-reduces `m` in place to reduced echelon form and returns the pivot columns.
/// With `stop_on_missing_pivot`, returns early at the first column lacking a pivot.
fn eliminate(field: &Field, m: &mut Matrix, pivot_cols: usize, stop_on_missing_pivot: bool) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..pivot_cols {
        let Some(p) = (rank..m.rows).find(|&r| !field.is_zero(m.get(r, col))) else {
            if stop_on_missing_pivot {
                return pivots;
            }
            continue;
        };
        if p != rank {
            for c in 0..m.cols {
                m.data.swap(p * m.cols + c, rank * m.cols + c);
            }
        }
        let inv = field.inv(m.get(rank, col)).expect("pivot is nonzero");
        for c in col..m.cols {
            let v = field.mul(m.get(rank, c), &inv);
            m.set(rank, c, v);
        }
        for r in 0..m.rows {
            if r == rank || field.is_zero(m.get(r, col)) {
                continue;
            }
            let f = m.get(r, col).clone();
            for c in col..m.cols {
                let t = field.mul(&f, m.get(rank, c));
                let v = field.sub(m.get(r, c), &t);
                m.set(r, c, v);
            }
        }
        pivots.push(col);
        rank += 1;
        if rank == m.rows {
            break;
        }
    }
    pivots
}

pub fn rank(field: &Field, m: &Matrix) -> usize {
    let mut work = m.clone();
    eliminate(field, &mut work, m.cols, false).len()
}

/// Full column rank test that stops at the first column without a pivot.
pub fn is_full_column_rank(field: &Field, m: &Matrix) -> bool {
    if m.cols > m.rows {
        return false;
    }
    let mut work = m.clone();
    eliminate(field, &mut work, m.cols, true).len() == m.cols
}

/// Solves `A X = B` for a full-column-rank `A` (m x k, m >= k). Extra rows
/// of a consistent system are ignored.
pub fn solve(field: &Field, a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    if a.rows != b.rows {
        return Err(LinalgError::Dimension);
    }
    let k = a.cols;
    let mut aug = Matrix::from_fn(a.rows, k + b.cols, |r, c| {
        if c < k {
            a.get(r, c).clone()
        } else {
            b.get(r, c - k).clone()
        }
    });
    let pivots = eliminate(field, &mut aug, k, true);
    if pivots.len() < k {
        return Err(LinalgError::RankDeficient {
            column: pivots.len(),
        });
    }
    Ok(Matrix::from_fn(k, b.cols, |r, c| aug.get(r, k + c).clone()))
}

pub fn inverse(field: &Field, a: &Matrix) -> Result<Matrix, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::Dimension);
    }
    solve(field, a, &Matrix::identity(field, a.rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip_gf16() {
        let f = Field::binary(4).unwrap();
        let mut rng = rand::thread_rng();
        let mut found = 0;
        while found < 20 {
            let m = Matrix::from_fn(4, 4, |_, _| f.random(&mut rng));
            match inverse(&f, &m) {
                Ok(inv) => {
                    assert_eq!(m.mul(&f, &inv), Matrix::identity(&f, 4));
                    assert_eq!(rank(&f, &m), 4);
                    found += 1;
                }
                Err(LinalgError::RankDeficient { .. }) => assert!(rank(&f, &m) < 4),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn rank_of_duplicate_columns() {
        let f = Field::binary(3).unwrap();
        let a = f.from_base(3);
        let b = f.from_base(5);
        let m = Matrix::from_rows(vec![vec![a.clone(), a.clone()], vec![b.clone(), b.clone()]]);
        assert_eq!(rank(&f, &m), 1);
        assert!(!is_full_column_rank(&f, &m));
        assert_eq!(
            solve(&f, &m, &Matrix::zeros(&f, 2, 1)),
            Err(LinalgError::RankDeficient { column: 1 })
        );
    }

    #[test]
    fn overdetermined_consistent_system() {
        let f = Field::prime(7).unwrap();
        let e = |x| f.from_base(x);
        // columns (1,1,1) and (1,2,4); x = (3, 5)
        let a = Matrix::from_rows(vec![vec![e(1), e(1)], vec![e(1), e(2)], vec![e(1), e(4)]]);
        let x = vec![e(3), e(5)];
        let b = a.mul_vec(&f, &x);
        let sol = solve(&f, &a, &Matrix::from_rows(b.into_iter().map(|v| vec![v]).collect())).unwrap();
        assert_eq!(sol.get(0, 0), &x[0]);
        assert_eq!(sol.get(1, 0), &x[1]);
    }
}
