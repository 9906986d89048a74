use std::ops::{Deref, DerefMut};

/// Nodal values of a scalar function on a structured grid.
///
/// A field does not own its grid; every operation that needs geometry takes the
/// grid explicitly and checks that the node counts agree.
#[derive(Clone, Debug, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Field(vec![value; n])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Field(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute value.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &Field) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.0 {
            *a *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        self.map(|v| alpha * v)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.add_scaled(-1.0, other)
    }

    /// Oscillation `max - min`.
    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}
