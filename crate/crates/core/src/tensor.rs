//! Small dense `d x d` tensors (homogenized coefficients, mixed derivatives).

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dim: usize,
    entries: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dim: usize) -> Self {
        Tensor { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.set(i, i, c);
        }
        t
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut t = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            t.set(i, i, v);
        }
        t
    }

    /// Row-major construction; `entries.len()` must be a perfect square.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), dim * dim, "tensor entry count");
        Tensor { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip(other, |a, b| a - b)
    }

    pub fn add_scaled(&self, other: &Tensor, s: f64) -> Tensor {
        self.zip(other, |a, b| a + s * b)
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.dim, other.dim);
        Tensor {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let sym = self.symmetrized();
        let m = DMatrix::from_row_slice(self.dim, self.dim, &sym.entries);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}
