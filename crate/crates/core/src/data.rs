use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A clean sample, stored flat in row-major order with its logical shape.
///
/// Vectors have shape `[d]`; images have shape `[H, W]` or `[H, W, C]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub values: Vec<f64>,
    pub shape: Vec<usize>,
    pub label: Option<usize>,
}

impl DataPoint {
    pub fn vector(values: Vec<f64>) -> Self {
        let shape = vec![values.len()];
        Self {
            values,
            shape,
            label: None,
        }
    }

    pub fn with_shape(values: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() || shape.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual: vec![values.len()],
            });
        }
        Ok(Self {
            values,
            shape,
            label: None,
        })
    }

    pub fn image(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_shape(values, vec![height, width])
    }

    pub fn labeled(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_spatial(&self) -> bool {
        is_spatial(&self.shape)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("data point has non-finite entries".into()))
        }
    }
}

pub(crate) fn is_spatial(shape: &[usize]) -> bool {
    shape.len() == 2 || shape.len() == 3
}
