//! Axis-aligned hyper-rectangles with extended-real endpoints.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RectangleError {
    #[error("lower and upper must have equal length")]
    LengthMismatch,
    #[error("lower[{0}] > upper[{0}]")]
    Inverted(usize),
    #[error("NaN endpoint at coordinate {0}")]
    NanEndpoint(usize),
}

/// Closed product `prod_i [lower_i, upper_i]`; `-inf`/`+inf` endpoints
/// give half-open and unbounded sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Rectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, RectangleError> {
        if lower.len() != upper.len() {
            return Err(RectangleError::LengthMismatch);
        }
        for (i, (&a, &b)) in lower.iter().zip(upper.iter()).enumerate() {
            if a.is_nan() || b.is_nan() {
                return Err(RectangleError::NanEndpoint(i));
            }
            if a > b {
                return Err(RectangleError::Inverted(i));
            }
        }
        Ok(Rectangle { lower, upper })
    }

    /// `(-inf, +inf)^d`.
    pub fn full_space(d: usize) -> Self {
        Rectangle {
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
        }
    }

    /// One-sided rectangle `prod_i (-inf, upper_i]`.
    pub fn lower_orthant(upper: Vec<f64>) -> Self {
        let lower = vec![f64::NEG_INFINITY; upper.len()];
        Rectangle { lower, upper }
    }

    /// Symmetric box `prod_i [-half_i, half_i]`; `half_i` must be >= 0.
    pub fn symmetric(half: &[f64]) -> Self {
        Rectangle {
            lower: half.iter().map(|&h| -h).collect(),
            upper: half.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Closed membership test: `lower_i <= x_i <= upper_i` for all i.
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        for i in 0..self.lower.len() {
            let xi = x[i];
            if xi < self.lower[i] || xi > self.upper[i] {
                return false;
            }
        }
        true
    }

    /// The reflected rectangle `-R = prod [-upper_i, -lower_i]`.
    pub fn negate(&self) -> Rectangle {
        Rectangle {
            lower: self.upper.iter().map(|&v| -v).collect(),
            upper: self.lower.iter().map(|&v| -v).collect(),
        }
    }

    /// True when `self` is contained in `other`.
    pub fn subset_of(&self, other: &Rectangle) -> bool {
        self.lower
            .iter()
            .zip(other.lower.iter())
            .all(|(a, b)| a >= b)
            && self
                .upper
                .iter()
                .zip(other.upper.iter())
                .all(|(a, b)| a <= b)
    }
}
