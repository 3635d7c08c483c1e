use crate::{Error, Result};

/// A dense rank-4 array in (batch, channel, height, width) order,
/// row-major with width fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    values: Vec<f64>,
}

impl Tensor4 {
    pub fn new(n: usize, c: usize, h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * c * h * w {
            return Err(Error::InvalidInput(format!(
                "({n}, {c}, {h}, {w}) tensor needs {} values, got {}",
                n * c * h * w,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite tensor value {v}")));
        }
        Ok(Tensor4 { n, c, h, w, values })
    }

    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Tensor4 { n, c, h, w, values: vec![0.0; n * c * h * w] }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.c, self.h, self.w)
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Flat offset of (sample, channel, row, 0).
    pub fn row_offset(&self, n: usize, c: usize, y: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w
    }

    /// Reinterprets the buffer under a new shape of equal volume.
    pub fn reshaped(&self, c: usize, h: usize, w: usize) -> Result<Self> {
        if c * h * w != self.c * self.h * self.w {
            return Err(Error::InvalidInput(format!(
                "cannot reshape ({}, {}, {}) into ({c}, {h}, {w})",
                self.c, self.h, self.w
            )));
        }
        Ok(Tensor4 { n: self.n, c, h, w, values: self.values.clone() })
    }

    /// Collects the given samples into a new tensor, preserving order.
    pub fn select(&self, samples: &[usize]) -> Self {
        let stride = self.c * self.h * self.w;
        let mut values = Vec::with_capacity(samples.len() * stride);
        for &s in samples {
            values.extend_from_slice(&self.values[s * stride..(s + 1) * stride]);
        }
        Tensor4 { n: samples.len(), c: self.c, h: self.h, w: self.w, values }
    }
}
