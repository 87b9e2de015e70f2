//! Tridiagonal linear algebra.
//!
//! Every matrix the solver factors is tridiagonal and strictly column
//! diagonally dominant with a positive diagonal, so Thomas elimination
//! without pivoting is used throughout.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("band lengths inconsistent: sub {sub}, diag {diag}, super {sup}")]
    BandLengths { sub: usize, diag: usize, sup: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    RhsLength { got: usize, expected: usize },
    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },
}

/// Sign of an elimination pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of(value: f64) -> Sign {
        if value > 0.0 {
            Sign::Positive
        } else if value < 0.0 {
            Sign::Negative
        } else {
            // exact zero, or NaN after a previous zero pivot
            Sign::Zero
        }
    }
}

/// Banded storage: `sub[i]` is entry `(i + 1, i)`, `sup[i]` is entry `(i, i + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalMatrix {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Result<Self, LinalgError> {
        let n = diag.len();
        if n == 0 || sub.len() != n - 1 || sup.len() != n - 1 {
            return Err(LinalgError::BandLengths {
                sub: sub.len(),
                diag: n,
                sup: sup.len(),
            });
        }
        Ok(TridiagonalMatrix { sub, diag, sup })
    }

    pub fn from_diagonal(diag: Vec<f64>) -> Self {
        let n = diag.len();
        TridiagonalMatrix {
            sub: vec![0.0; n.saturating_sub(1)],
            diag,
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_diagonal(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    pub(crate) fn bands_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.sub, &mut self.diag, &mut self.sup)
    }

    /// Entry `(row, col)`; zero outside the three bands.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if row == col + 1 {
            self.sub[col]
        } else if col == row + 1 {
            self.sup[row]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.get(r, c)).collect()).collect()
    }

    /// `self · x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n, "vector length must match matrix dimension");
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc += self.sup[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    /// `alpha · self + beta · other`
    pub fn scaled_add(&self, alpha: f64, other: &TridiagonalMatrix, beta: f64) -> TridiagonalMatrix {
        assert_eq!(self.dim(), other.dim());
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect();
        TridiagonalMatrix {
            sub: comb(&self.sub, &other.sub),
            diag: comb(&self.diag, &other.diag),
            sup: comb(&self.sup, &other.sup),
        }
    }

    /// Thomas elimination, no pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(LinalgError::RhsLength {
                got: rhs.len(),
                expected: n,
            });
        }
        let mut c_prime = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(LinalgError::ZeroPivot { row: 0 });
        }
        x[0] = rhs[0] / pivot;
        for i in 1..n {
            c_prime[i - 1] = self.sup[i - 1] / pivot;
            pivot = self.diag[i] - self.sub[i - 1] * c_prime[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(LinalgError::ZeroPivot { row: i });
            }
            x[i] = (rhs[i] - self.sub[i - 1] * x[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c_prime[i] * x[i + 1];
        }
        Ok(x)
    }

    /// Signs of the elimination pivots. All positive iff every leading
    /// principal minor is positive (pivot `i` is the ratio of minors `i` and `i-1`).
    pub fn pivot_signs(&self) -> Vec<Sign> {
        let n = self.dim();
        let mut signs = Vec::with_capacity(n);
        let mut pivot = self.diag[0];
        signs.push(Sign::of(pivot));
        for i in 1..n {
            pivot = self.diag[i] - self.sub[i - 1] * self.sup[i - 1] / pivot;
            signs.push(Sign::of(pivot));
        }
        signs
    }

    pub fn leading_minors_positive(&self) -> bool {
        self.pivot_signs().iter().all(|&s| s == Sign::Positive)
    }

    /// Strict diagonal dominance by columns with a positive diagonal.
    pub fn is_column_dominant(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| {
            let mut off = 0.0;
            if j > 0 {
                off += self.sup[j - 1].abs();
            }
            if j + 1 < n {
                off += self.sub[j].abs();
            }
            self.diag[j] > 0.0 && self.diag[j] > off
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                let pivot_row = a[k].clone();
                for (aij, akj) in a[i][k..].iter_mut().zip(&pivot_row[k..]) {
                    *aij -= f * akj;
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn random_dominant(rng: &mut ChaCha8Rng, n: usize) -> TridiagonalMatrix {
        let sub: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sup: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag = (0..n)
            .map(|i| {
                let l = if i > 0 { sub[i - 1].abs() } else { 0.0 };
                let r = if i + 1 < n { sup[i].abs() } else { 0.0 };
                l + r + rng.gen_range(0.1..2.0)
            })
            .collect();
        TridiagonalMatrix::new(sub, diag, sup).unwrap()
    }

    #[test]
    fn identity_returns_rhs() {
        let rhs = [1.0, -2.0, 3.5];
        assert_eq!(TridiagonalMatrix::identity(3).solve(&rhs).unwrap(), rhs.to_vec());
    }

    #[test]
    fn two_by_two_hand_solve() {
        let m = TridiagonalMatrix::new(vec![-1.0], vec![2.0, 2.0], vec![-1.0]).unwrap();
        let x = m.solve(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 10, 64] {
            let m = random_dominant(&mut rng, n.max(2));
            let rhs: Vec<f64> = (0..m.dim()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let x = m.solve(&rhs).unwrap();
            let oracle = dense_solve(m.to_dense(), rhs.clone());
            for (a, b) in x.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
            let back = m.mul_vec(&x);
            let scale = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in back.iter().zip(&rhs) {
                assert!((a - b).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn pivot_signs_cases() {
        assert_eq!(TridiagonalMatrix::identity(3).pivot_signs(), vec![Sign::Positive; 3]);
        let m = TridiagonalMatrix::new(vec![-2.0], vec![1.0, 1.0], vec![-2.0]).unwrap();
        assert_eq!(m.pivot_signs(), vec![Sign::Positive, Sign::Negative]);
        let singular = TridiagonalMatrix::new(vec![1.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert_eq!(singular.pivot_signs()[0], Sign::Zero);
        assert_eq!(singular.solve(&[1.0, 1.0]), Err(LinalgError::ZeroPivot { row: 0 }));
    }

    #[test]
    fn rejects_bad_bands() {
        assert!(TridiagonalMatrix::new(vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0]).is_err());
        assert!(TridiagonalMatrix::new(vec![], vec![], vec![]).is_err());
        let m = TridiagonalMatrix::identity(2);
        assert!(matches!(m.solve(&[1.0]), Err(LinalgError::RhsLength { .. })));
    }

    #[test]
    fn single_row() {
        let m = TridiagonalMatrix::from_diagonal(vec![4.0]);
        assert_eq!(m.solve(&[2.0]).unwrap(), vec![0.5]);
        assert_eq!(m.pivot_signs(), vec![Sign::Positive]);
    }
}
