use super::tensor::Tensor4;
use crate::{Error, Result};

/// Root-mean-squared error over every element, with its gradient w.r.t.
/// the reconstruction. At exactly zero loss the gradient is defined as
/// zero (the limit convention), avoiding a division by zero.
pub fn rmse_loss(xhat: &Tensor4, x: &Tensor4) -> Result<(f64, Tensor4)> {
    if xhat.shape() != x.shape() {
        return Err(Error::InvalidInput(format!(
            "loss shapes differ: {:?} vs {:?}",
            xhat.shape(),
            x.shape()
        )));
    }
    let n = xhat.values().len() as f64;
    let sq_sum: f64 = xhat
        .values()
        .iter()
        .zip(x.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let loss = (sq_sum / n).sqrt();
    let (sn, sc, sh, sw) = xhat.shape();
    let mut grad = Tensor4::zeros(sn, sc, sh, sw);
    if loss > 0.0 {
        let scale = 1.0 / (n * loss);
        for ((g, a), b) in grad.values_mut().iter_mut().zip(xhat.values()).zip(x.values()) {
            *g = (a - b) * scale;
        }
    }
    Ok((loss, grad))
}
