//! Exact linear algebra over Q(i): kernel bases and linear solves by
//! fraction-free-enough Gaussian elimination on `Scalar` matrices.

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Scalar::zero(); rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Row-reduce in place; returns the pivot column of each pivot row.
    pub fn rref(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row >= self.rows {
                break;
            }
            let Some(p) = (row..self.rows).find(|&r| !self.get(r, col).is_zero()) else {
                continue;
            };
            self.swap_rows(row, p);
            let inv = self.get(row, col).inv().expect("pivot nonzero");
            for c in col..self.cols {
                let v = self.get(row, c) * &inv;
                self.set(row, c, v);
            }
            for r in 0..self.rows {
                if r != row && !self.get(r, col).is_zero() {
                    let factor = self.get(r, col).clone();
                    for c in col..self.cols {
                        let v = self.get(r, c) - &(&factor * self.get(row, c));
                        self.set(r, c, v);
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref().len()
    }

    /// Basis of the right kernel, one vector per free column.
    pub fn kernel_basis(&self) -> Vec<Vec<Scalar>> {
        let mut m = self.clone();
        let pivots = m.rref();
        let mut basis = Vec::new();
        let is_pivot = |c: usize| pivots.contains(&c);
        for free in (0..self.cols).filter(|&c| !is_pivot(c)) {
            let mut v = vec![Scalar::zero(); self.cols];
            v[free] = Scalar::one();
            for (prow, &pcol) in pivots.iter().enumerate() {
                v[pcol] = -m.get(prow, free);
            }
            basis.push(v);
        }
        basis
    }

    /// One solution of `A x = b`, or `None` when inconsistent.
    pub fn solve(&self, b: &[Scalar]) -> Option<Vec<Scalar>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Matrix::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, self.cols, b[r].clone());
        }
        let pivots = aug.rref();
        if pivots.contains(&self.cols) {
            return None; // a pivot in the augmented column
        }
        let mut x = vec![Scalar::zero(); self.cols];
        for (prow, &pcol) in pivots.iter().enumerate() {
            x[pcol] = aug.get(prow, self.cols).clone();
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64) -> Scalar {
        Scalar::from_int(n)
    }

    #[test]
    fn kernel_of_simple_map() {
        // [1 1 0; 0 0 1] has kernel spanned by (-1, 1, 0)
        let mut m = Matrix::zeros(2, 3);
        m.set(0, 0, s(1));
        m.set(0, 1, s(1));
        m.set(1, 2, s(1));
        let k = m.kernel_basis();
        assert_eq!(k.len(), 1);
        assert_eq!(k[0], vec![s(-1), s(1), s(0)]);
    }

    #[test]
    fn solve_consistent_and_inconsistent() {
        let mut m = Matrix::zeros(2, 2);
        m.set(0, 0, s(1));
        m.set(0, 1, s(1));
        m.set(1, 0, s(1));
        m.set(1, 1, s(-1));
        let x = m.solve(&[s(3), s(1)]).unwrap();
        assert_eq!(x, vec![s(2), s(1)]);

        let mut sing = Matrix::zeros(2, 1);
        sing.set(0, 0, s(1));
        sing.set(1, 0, s(1));
        assert!(sing.solve(&[s(0), s(1)]).is_none());
        assert!(sing.solve(&[s(2), s(2)]).is_some());
    }

    #[test]
    fn rank_over_gaussian_rationals() {
        let mut m = Matrix::zeros(2, 2);
        m.set(0, 0, Scalar::i());
        m.set(0, 1, s(1));
        m.set(1, 0, s(-1));
        m.set(1, 1, Scalar::i());
        // second row = i * first row
        assert_eq!(m.rank(), 1);
    }
}
