use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates `x_1, …, x_{2n}` of a point in a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<ChartPoint> {
        if coords.is_empty() || !coords.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "chart points need an even, positive number of coordinates (got {})",
                coords.len()
            )));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(ChartPoint { coords })
    }

    pub fn origin(dim: usize) -> ChartPoint {
        assert!(
            dim > 0 && dim.is_multiple_of(2),
            "chart dimension must be even"
        );
        ChartPoint {
            coords: vec![0.0; dim],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean norm of the coordinate vector.
    pub fn radius(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }

    pub(crate) fn from_vector_unchecked(v: &DVector<f64>) -> ChartPoint {
        ChartPoint {
            coords: v.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variance {
    Upper,
    Lower,
}

/// Components of a tensor at a point, stored row-major over `(2n)^rank` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    dim: usize,
    valence: Vec<Variance>,
    components: Vec<f64>,
}

impl TensorValue {
    pub fn new(dim: usize, valence: Vec<Variance>, components: Vec<f64>) -> Result<TensorValue> {
        let expected = dim.pow(valence.len() as u32);
        if components.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: components.len(),
            });
        }
        Ok(TensorValue {
            dim,
            valence,
            components,
        })
    }

    pub fn zeros(dim: usize, valence: Vec<Variance>) -> TensorValue {
        let len = dim.pow(valence.len() as u32);
        TensorValue {
            dim,
            valence,
            components: vec![0.0; len],
        }
    }

    pub fn from_vector(v: &DVector<f64>, variance: Variance) -> TensorValue {
        TensorValue {
            dim: v.len(),
            valence: vec![variance],
            components: v.iter().copied().collect(),
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>, valence: [Variance; 2]) -> TensorValue {
        assert_eq!(m.nrows(), m.ncols());
        let dim = m.nrows();
        let mut components = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                components.push(m[(i, j)]);
            }
        }
        TensorValue {
            dim,
            valence: valence.to_vec(),
            components,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.valence.len()
    }

    pub fn valence(&self) -> &[Variance] {
        &self.valence
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.rank(), "index rank mismatch");
        idx.iter().fold(0, |acc, &i| {
            assert!(i < self.dim, "index {i} out of range");
            acc * self.dim + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.components[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let k = self.flat_index(idx);
        self.components[k] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.components.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &TensorValue) -> Result<TensorValue> {
        if self.dim != other.dim || self.valence != other.valence {
            return Err(Error::DimensionMismatch {
                expected: self.components.len(),
                found: other.components.len(),
            });
        }
        Ok(TensorValue {
            dim: self.dim,
            valence: self.valence.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> TensorValue {
        TensorValue {
            dim: self.dim,
            valence: self.valence.clone(),
            components: self.components.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn as_vector(&self) -> DVector<f64> {
        assert_eq!(self.rank(), 1, "as_vector on a rank-{} tensor", self.rank());
        DVector::from_column_slice(&self.components)
    }

    pub fn as_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2, "as_matrix on a rank-{} tensor", self.rank());
        DMatrix::from_row_slice(self.dim, self.dim, &self.components)
    }

    /// Largest deviation from symmetry under exchange of slots `a` and `b`.
    pub fn symmetry_defect(&self, a: usize, b: usize) -> f64 {
        assert!(a < self.rank() && b < self.rank());
        let mut worst: f64 = 0.0;
        let mut idx = vec![0usize; self.rank()];
        for flat in 0..self.components.len() {
            let mut rem = flat;
            for slot in (0..self.rank()).rev() {
                idx[slot] = rem % self.dim;
                rem /= self.dim;
            }
            let mut swapped = idx.clone();
            swapped.swap(a, b);
            worst = worst.max((self.components[flat] - self.get(&swapped)).abs());
        }
        worst
    }
}
