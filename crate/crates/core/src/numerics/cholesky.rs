use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense lower-triangular factor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> LowerTriangular<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        if col > row {
            T::zero()
        } else {
            self.data[row * self.dim + col]
        }
    }

    /// `L z` written into `out`.
    pub fn mul_vec_into(&self, z: &[T], out: &mut [T]) {
        debug_assert_eq!(z.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let row = &self.data[i * self.dim..i * self.dim + i + 1];
            *o = row.iter().zip(z).map(|(&l, &zj)| l * zj).sum();
        }
    }

    /// `L Lᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<T> {
        let n = self.dim;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let k_max = i.min(j);
                out[i * n + j] = (0..=k_max).map(|k| self.get(i, k) * self.get(j, k)).sum();
            }
        }
        out
    }
}

/// Cholesky factorization of a symmetric positive definite `dim × dim`
/// matrix given row-major. Only the lower triangle is read.
pub fn cholesky<T: Real>(matrix: &[T], dim: usize) -> Result<LowerTriangular<T>> {
    if matrix.len() != dim * dim {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} entries, expected {}",
            matrix.len(),
            dim * dim
        )));
    }
    let mut l = vec![T::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let dot: T = (0..j).map(|k| l[i * dim + k] * l[j * dim + k]).sum();
            let s = matrix[i * dim + j] - dot;
            if i == j {
                if !(s > T::zero()) {
                    return Err(Error::NotPositiveDefinite {
                        row: i,
                        pivot: s.as_f64(),
                    });
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Ok(LowerTriangular { dim, data: l })
}
