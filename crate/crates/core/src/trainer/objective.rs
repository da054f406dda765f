use crate::alignment::{eal_loss, fal_loss, feature_entropy_with_grad, total_loss};
use crate::encoders::{encode_image_traced, project_visual, HeadTrace, Pooling};
use crate::error::{Error, Result};
use crate::trainer::TrainableParams;

/// One mini-batch. `text_features` are the cached frozen caption
/// embeddings z_s, row i paired with image i.
pub struct Batch<'a> {
    pub images: Vec<&'a [f64]>,
    pub targets: Vec<f64>,
    pub text_features: Vec<&'a [f64]>,
}

/// Detached samples for the entropy alignment term.
pub struct EalInputs<'a> {
    /// Visual buffer entropies of W_v z_v, computed by the momentum model.
    pub detached_visual: &'a [f64],
    /// The full text sample S.
    pub text: &'a [f64],
}

pub struct ObjectiveOptions<'a> {
    pub grid: usize,
    pub pooling: Pooling,
    /// `None` means L_eal = 0 (disabled, or the gate is still closed).
    pub eal: Option<EalInputs<'a>>,
    pub fal: bool,
    pub lambda: f64,
    pub gamma: f64,
    pub temperature: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub mse: f64,
    pub eal: f64,
    pub fal: f64,
    pub total: f64,
}

/// Composite loss L_mse + λ·L_eal + γ·L_fal and its gradient with respect
/// to every trainable parameter. Pure: nothing outside the return value
/// is modified.
pub fn objective(
    params: &TrainableParams,
    batch: &Batch<'_>,
    opts: &ObjectiveOptions<'_>,
) -> Result<(LossBreakdown, TrainableParams)> {
    let n = batch.images.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if batch.targets.len() != n {
        return Err(Error::LengthMismatch(batch.targets.len(), n));
    }
    if opts.fal && batch.text_features.len() != n {
        return Err(Error::LengthMismatch(batch.text_features.len(), n));
    }
    let mut grads = params.zeros_like();
    let traces = batch
        .images
        .iter()
        .map(|img| encode_image_traced(img, opts.grid, &params.vision, opts.pooling))
        .collect::<Result<Vec<_>>>()?;

    let nf = n as f64;
    let mut mse = 0.0;
    let mut grad_z = Vec::with_capacity(n);
    for (trace, &y) in traces.iter().zip(&batch.targets) {
        let head = HeadTrace::forward(&trace.z, &params.head)?;
        let err = head.score - y;
        mse += err * err;
        grad_z.push(head.backward(&trace.z, &params.head, 2.0 * err / nf, &mut grads.head));
    }
    mse /= nf;

    // Both alignment terms act in the joint space z̃_v = W_v z_v.
    let mut eal = 0.0;
    let mut fal = 0.0;
    if opts.eal.is_some() || opts.fal {
        let projected = traces
            .iter()
            .map(|t| project_visual(&t.z, &params.connector))
            .collect::<Result<Vec<_>>>()?;
        let mut grad_proj = vec![vec![0.0; params.connector.weight.rows()]; n];
        if let Some(inputs) = &opts.eal {
            let (live, d_entropy): (Vec<f64>, Vec<Vec<f64>>) = projected
                .iter()
                .map(|p| feature_entropy_with_grad(p))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            let out = eal_loss(inputs.detached_visual, &live, inputs.text)?;
            eal = out.value;
            for ((g, dh), coeff) in grad_proj.iter_mut().zip(&d_entropy).zip(&out.grad_live) {
                let scale = opts.lambda * coeff;
                for (gk, dk) in g.iter_mut().zip(dh) {
                    *gk += scale * dk;
                }
            }
        }
        if opts.fal {
            let text: Vec<Vec<f64>> = batch.text_features.iter().map(|r| r.to_vec()).collect();
            let out = fal_loss(&projected, &text, opts.temperature)?;
            fal = out.value;
            for (g, gv) in grad_proj.iter_mut().zip(&out.grad_visual) {
                for (gk, x) in g.iter_mut().zip(gv) {
                    *gk += opts.gamma * x;
                }
            }
        }
        for ((g, trace), gp) in grad_z.iter_mut().zip(&traces).zip(&grad_proj) {
            let back = params.connector.backward(&trace.z, gp, &mut grads.connector);
            for (gk, bk) in g.iter_mut().zip(&back) {
                *gk += bk;
            }
        }
    }

    let total = total_loss(mse, eal, fal, opts.lambda, opts.gamma)?;
    for (trace, g) in traces.iter().zip(&grad_z) {
        trace.backward(&params.vision, g, &mut grads.vision);
    }
    Ok((LossBreakdown { mse, eal, fal, total }, grads))
}
