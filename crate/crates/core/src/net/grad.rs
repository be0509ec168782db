use nalgebra::DMatrix;

use super::{preactivation, ConvexLoss, DataSet, NetworkSpec, Theta};
use crate::error::Result;

/// Loss and its gradient with respect to every parameter block, by
/// closed-form backpropagation. At activation kinks the right-hand slope is
/// used.
pub fn gradient(spec: &NetworkSpec, theta: &Theta, data: &DataSet) -> Result<(f64, Theta)> {
    spec.check_theta(theta)?;
    spec.check_data(data)?;
    let act = &spec.activation;
    let depth = spec.depth();

    let mut pre = Vec::with_capacity(depth - 1);
    let mut feats = vec![data.x().clone()];
    for l in 0..depth - 1 {
        let h = preactivation(&feats[l], &theta.weights[l], &theta.biases[l]);
        feats.push(h.map(|v| act.apply(v)));
        pre.push(h);
    }
    let out = &feats[depth - 1] * &theta.weights[depth - 1];
    let value = spec.loss.value(&out, data.y());

    let mut grad = Theta::zeros(spec);
    let mut upstream: DMatrix<f64> = spec.loss.gradient(&out, data.y());
    grad.weights[depth - 1] = feats[depth - 1].transpose() * &upstream;
    upstream = &upstream * theta.weights[depth - 1].transpose();
    for l in (0..depth - 1).rev() {
        let local = upstream.zip_map(&pre[l], |g, h| g * act.derivative(h));
        grad.weights[l] = feats[l].transpose() * &local;
        grad.biases[l] = local.row_sum().transpose();
        if l > 0 {
            upstream = &local * theta.weights[l].transpose();
        }
    }
    Ok((value, grad))
}
