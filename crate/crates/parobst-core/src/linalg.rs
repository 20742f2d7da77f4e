//! Direct solvers for the symmetric positive definite banded systems produced
//! by backward-Euler time stepping. Grids are desk scale, so a dense-in-band
//! Cholesky factorization reused across time levels is the whole story.

use crate::scalar::Scalar;

/// Symmetric banded matrix stored as the lower band, row-major:
/// entry `(i, i - d)` for `d = 0..=bandwidth` lives at `i * (bandwidth+1) + d`.
#[derive(Debug, Clone)]
pub struct SymBanded<T: Scalar> {
    n: usize,
    bandwidth: usize,
    data: Vec<T>,
}

impl<T: Scalar> SymBanded<T> {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self { n, bandwidth, data: vec![T::zero(); n * (bandwidth + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bandwidth);
        i * (self.bandwidth + 1) + (i - j)
    }

    /// Add to entry `(i, j)` with `j <= i`.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let at = self.idx(i, j);
        self.data[at] = self.data[at] + v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i || i - j > self.bandwidth {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// In-place banded Cholesky `A = L Lᵀ`. The systems assembled here are
    /// strictly diagonally dominant, so a non-positive pivot is a programming
    /// error, not a data condition.
    pub fn cholesky(mut self) -> BandedCholesky<T> {
        let b = self.bandwidth;
        for i in 0..self.n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut sum = self.data[self.idx(i, j)];
                let klo = lo.max(j.saturating_sub(b));
                for k in klo..j {
                    sum = sum - self.get(i, k) * self.get(j, k);
                }
                if i == j {
                    assert!(
                        sum > T::zero(),
                        "banded Cholesky hit a non-positive pivot at row {i}: {sum}"
                    );
                    let at = self.idx(i, i);
                    self.data[at] = sum.sqrt();
                } else {
                    let piv = self.data[self.idx(j, j)];
                    let at = self.idx(i, j);
                    self.data[at] = sum / piv;
                }
            }
        }
        BandedCholesky { factor: self }
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky<T: Scalar> {
    factor: SymBanded<T>,
}

impl<T: Scalar> BandedCholesky<T> {
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.factor.n;
        let b = self.factor.bandwidth;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut v = y[i];
            for k in lo..i {
                v = v - self.factor.get(i, k) * y[k];
            }
            y[i] = v / self.factor.get(i, i);
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut v = y[i];
            for k in (i + 1)..=hi {
                v = v - self.factor.get(k, i) * y[k];
            }
            y[i] = v / self.factor.get(i, i);
        }
        y
    }
}
