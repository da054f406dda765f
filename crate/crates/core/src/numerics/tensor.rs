use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Prng;

/// Dense row-major f64 array of rank 1 or 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for Tensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        Tensor::from_vec(&raw.shape, raw.data)
    }
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    /// Builds a tensor, checking the shape against the data length and
    /// rejecting non-finite values.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "tensor rank must be 1 or 2, got shape {shape:?}"
            )));
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidArgument(format!("shape {shape:?} overflows")))?;
        if len != data.len() {
            return Err(Error::shape(shape, &[data.len()]));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Tensor::from_vec(&[data.len()], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Entries drawn from N(0, std²).
    pub fn randn(shape: &[usize], std: f64, rng: &mut Prng) -> Self {
        let mut t = Tensor::zeros(shape);
        for v in &mut t.data {
            *v = std * rng.normal();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

/// A fixed, ordered collection of parameter tensors.
///
/// The order returned by `tensors` and `tensors_mut` must agree; optimizer
/// state, EMA copies and flattened views all rely on it.
pub trait ParamGroup {
    fn tensors(&self) -> Vec<&Tensor>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for t in self.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Overwrites all parameters from a flat slice in `tensors` order.
    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.num_params();
        if flat.len() != total {
            return Err(Error::LengthMismatch(flat.len(), total));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_shape_data_mismatch() {
        assert!(matches!(
            Tensor::from_vec(&[2, 3], vec![0.0; 5]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Tensor::from_vec(&[2], vec![0.0, f64::NAN]),
            Err(Error::NonFiniteInput)
        ));
    }

    #[test]
    fn deserialize_validates_shape() {
        let bad = r#"{"shape":[2,2],"data":[1.0,2.0,3.0]}"#;
        assert!(serde_json::from_str::<Tensor>(bad).is_err());
        let good = r#"{"shape":[2,2],"data":[1.0,2.0,3.0,4.0]}"#;
        let t: Tensor = serde_json::from_str(good).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0]);
    }
}
