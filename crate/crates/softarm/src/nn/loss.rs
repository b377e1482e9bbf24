use super::real::Real;
use super::tensor::Tensor;
use crate::{Error, Result};

const CLIP_EPS: f64 = 1e-7;

/// Mean binary cross-entropy over probabilities.
///
/// Predictions are clipped to `[1e-7, 1 - 1e-7]` before the logarithms;
/// clipped entries get zero gradient (the loss is locally constant there).
/// Returns the loss and the gradient w.r.t. the predictions.
pub fn bce_loss<R: Real>(prediction: &Tensor<R>, target: &Tensor<R>) -> Result<(f64, Tensor<R>)> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "bce: prediction shape {:?} != target shape {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let n = prediction.len().max(1);
    let inv_n = 1.0 / n as f64;
    let lo = R::from_f64(CLIP_EPS);
    let hi = R::from_f64(1.0 - CLIP_EPS);
    let mut grad = Tensor::zeros(prediction.shape());
    let gdata = grad.data_mut();
    let mut loss = 0.0f64;
    for (k, (&p, &t)) in prediction.data().iter().zip(target.data()).enumerate() {
        let clipped = if p < lo {
            lo
        } else if p > hi {
            hi
        } else {
            p
        };
        let pf = clipped.as_f64();
        let tf = t.as_f64();
        loss -= tf * pf.ln() + (1.0 - tf) * (1.0 - pf).ln();
        if p >= lo && p <= hi {
            gdata[k] = R::from_f64(inv_n * (-tf / pf + (1.0 - tf) / (1.0 - pf)));
        }
    }
    Ok((loss * inv_n, grad))
}

/// Mean binary cross-entropy evaluated on logits:
/// `mean(max(z,0) − z·t + ln(1 + e^{−|z|}))`, gradient `(σ(z) − t)/n`.
///
/// Used at the output of the decoder and the readout so gradients stay exact
/// even when the logistic output saturates.
pub fn bce_with_logits<R: Real>(logits: &Tensor<R>, target: &Tensor<R>) -> Result<(f64, Tensor<R>)> {
    if logits.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "bce_with_logits: logits shape {:?} != target shape {:?}",
            logits.shape(),
            target.shape()
        )));
    }
    let n = logits.len().max(1);
    let inv_n = 1.0 / n as f64;
    let mut grad = Tensor::zeros(logits.shape());
    let gdata = grad.data_mut();
    let mut loss = 0.0f64;
    for (k, (&z, &t)) in logits.data().iter().zip(target.data()).enumerate() {
        let zf = z.as_f64();
        let tf = t.as_f64();
        loss += zf.max(0.0) - zf * tf + (-zf.abs()).exp().ln_1p();
        let sigma = if zf >= 0.0 {
            1.0 / (1.0 + (-zf).exp())
        } else {
            let e = zf.exp();
            e / (1.0 + e)
        };
        gdata[k] = R::from_f64(inv_n * (sigma - tf));
    }
    Ok((loss * inv_n, grad))
}
