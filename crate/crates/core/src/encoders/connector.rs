use serde::{Deserialize, Serialize};

use crate::encoders::ModelDims;
use crate::error::{Error, Result};
use crate::numerics::{linear_apply, Prng, Tensor};

/// Bias-free D_v → D_t projection into the joint space. Training only;
/// the text side of the joint space is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectorParams {
    pub weight: Tensor,
}

impl ConnectorParams {
    pub fn init(dims: &ModelDims, rng: &mut Prng) -> Self {
        ConnectorParams {
            weight: Tensor::randn(
                &[dims.d_text, dims.d_visual],
                (1.0 / dims.d_visual as f64).sqrt(),
                rng,
            ),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ConnectorParams {
            weight: Tensor::zeros(self.weight.shape()),
        }
    }

    /// Accumulates ∂L/∂W into `grads` and returns ∂L/∂z_v.
    pub fn backward(&self, z_v: &[f64], grad_out: &[f64], grads: &mut ConnectorParams) -> Vec<f64> {
        let cols = self.weight.cols();
        let mut grad_z = vec![0.0; cols];
        let gw = grads.weight.data_mut();
        for (o, &g) in grad_out.iter().enumerate() {
            let row = self.weight.row(o);
            for i in 0..cols {
                gw[o * cols + i] += g * z_v[i];
                grad_z[i] += row[i] * g;
            }
        }
        grad_z
    }
}

pub fn project_visual(z_v: &[f64], connector: &ConnectorParams) -> Result<Vec<f64>> {
    if connector.weight.cols() != z_v.len() {
        return Err(Error::shape(connector.weight.shape(), &[z_v.len()]));
    }
    linear_apply(z_v, &connector.weight, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, grad_check};

    #[test]
    fn identity_and_zero() {
        let c = ConnectorParams {
            weight: Tensor::identity(4),
        };
        let z = [0.5, -1.0, 2.0, 0.0];
        assert_eq!(project_visual(&z, &c).unwrap(), z.to_vec());
        let c = ConnectorParams::init(&ModelDims::default(), &mut Prng::new(1));
        assert_eq!(project_visual(&[0.0; 64], &c).unwrap(), vec![0.0; 32]);
    }

    #[test]
    fn shape_mismatch() {
        let c = ConnectorParams::init(&ModelDims::default(), &mut Prng::new(1));
        assert!(matches!(
            project_visual(&[0.0; 10], &c),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn gradients() {
        let mut rng = Prng::new(2);
        let dims = ModelDims {
            d_visual: 5,
            d_text: 3,
            ..ModelDims::default()
        };
        let c = ConnectorParams::init(&dims, &mut rng);
        let probe: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let mut flat = c.weight.data().to_vec();
        flat.extend((0..5).map(|_| rng.normal()));
        let report = grad_check(
            |p| {
                let local = ConnectorParams {
                    weight: Tensor::from_vec(&[3, 5], p[..15].to_vec()).unwrap(),
                };
                let z = &p[15..];
                let out = project_visual(z, &local).unwrap();
                let mut g = local.zeros_like();
                let gz = local.backward(z, &probe, &mut g);
                let mut grad = g.weight.data().to_vec();
                grad.extend(gz);
                (dot(&probe, &out), grad)
            },
            &flat,
            1e-5,
            1e-6,
        );
        assert!(report.passed, "{report:?}");
    }
}
