use super::grouping::{GroupingScheme, HyperVector};
use crate::error::Result;
use crate::numeric::ParamVector;

/// One SGD step with coupled L2 decay:
/// `theta_i - alpha_k(i) * (grad_i + 2 * lambda_g(i) * theta_i)`.
pub fn sgd_step(
    theta: &ParamVector,
    grad: &ParamVector,
    phi: &HyperVector,
    grouping: &GroupingScheme,
) -> Result<ParamVector> {
    theta.check_same_layout(grad, "sgd_step gradient")?;
    grouping.check_params(theta, "sgd_step parameters")?;
    grouping.check_hyper(phi, "sgd_step hyperparameters")?;
    let h = phi.values();
    let mut out = theta.clone();
    for (si, seg) in grouping.layout().segments().iter().enumerate() {
        let (ai, li) = grouping.segment_hyper(si);
        let (alpha, lambda) = (h[ai], h[li]);
        let t = theta.segment(seg);
        let g = grad.segment(seg);
        for ((o, &ti), &gi) in out.segment_mut(seg).iter_mut().zip(t).zip(g) {
            *o = ti - alpha * (gi + 2.0 * lambda * ti);
        }
    }
    Ok(out)
}
