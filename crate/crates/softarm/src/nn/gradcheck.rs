//! Finite-difference gradient checking.
//!
//! Every layer is checked at 64 bit against central differences of a scalar
//! probe loss `L(θ) = Σ u ⊙ output(θ)` with a fixed random projection `u`.
//! The reported figure is the worst relative error over all checked entries,
//! `|a − n| / max(|a|, |n|, 1e-4)`.

use super::act::Activation;
use super::conv::{Conv2d, ConvTranspose2d};
use super::dense::Dense;
use super::loss::{bce_loss, bce_with_logits};
use super::lstm::LstmCell;
use super::tensor::Tensor;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_EPS: f64 = 1e-5;
const REL_FLOOR: f64 = 1e-4;

/// Outcome of one finite-difference sweep.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_entry: usize,
    pub entries: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare an analytic gradient against central differences of `f` at `x`.
pub fn check_gradient<F: FnMut(&[f64]) -> f64>(
    name: &str,
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    eps: f64,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len());
    let mut pert = x.to_vec();
    let mut max_rel_err = 0.0f64;
    let mut worst_entry = 0usize;
    for k in 0..x.len() {
        pert[k] = x[k] + eps;
        let plus = f(&pert);
        pert[k] = x[k] - eps;
        let minus = f(&pert);
        pert[k] = x[k];
        let numeric = (plus - minus) / (2.0 * eps);
        let err = rel_err(analytic[k], numeric);
        if err > max_rel_err {
            max_rel_err = err;
            worst_entry = k;
        }
    }
    GradCheckReport {
        name: name.to_string(),
        max_rel_err,
        worst_entry,
        entries: x.len(),
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape")
}

fn merge(reports: Vec<GradCheckReport>, name: &str) -> GradCheckReport {
    let mut out = GradCheckReport {
        name: name.to_string(),
        max_rel_err: 0.0,
        worst_entry: 0,
        entries: 0,
    };
    for r in reports {
        out.entries += r.entries;
        if r.max_rel_err > out.max_rel_err {
            out.max_rel_err = r.max_rel_err;
            out.worst_entry = r.worst_entry;
        }
    }
    out
}

/// Check weight, bias and input gradients of a random small convolution.
pub fn check_conv2d(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let layer: Conv2d<f64> = Conv2d::new(1, 2, 3, 1, 1, Activation::Logistic, &mut rng);
    let x = random_tensor(&mut rng, &[1, 6, 6], -1.0, 1.0);
    let (y0, _) = layer.forward(&x)?;
    let u = random_tensor(&mut rng, y0.shape(), -1.0, 1.0);

    let loss_of = |layer: &Conv2d<f64>, x: &Tensor<f64>| -> f64 {
        let (y, _) = layer.forward(x).expect("forward");
        y.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
    };

    let (_, cache) = layer.forward(&x)?;
    let mut dw = Tensor::zeros(layer.weights.shape());
    let mut db = Tensor::zeros(layer.bias.shape());
    let dx = layer.backward(&cache, &u, &mut dw, &mut db)?;

    let w_report = check_gradient(
        "conv2d/weights",
        |vals| {
            let mut probe = layer.clone();
            probe.weights = Tensor::from_f64_slice(layer.weights.shape(), vals).unwrap();
            loss_of(&probe, &x)
        },
        &layer.weights.to_f64_vec(),
        &dw.to_f64_vec(),
        eps,
    );
    let b_report = check_gradient(
        "conv2d/bias",
        |vals| {
            let mut probe = layer.clone();
            probe.bias = Tensor::from_f64_slice(layer.bias.shape(), vals).unwrap();
            loss_of(&probe, &x)
        },
        &layer.bias.to_f64_vec(),
        &db.to_f64_vec(),
        eps,
    );
    let x_report = check_gradient(
        "conv2d/input",
        |vals| {
            let probe = Tensor::from_f64_slice(x.shape(), vals).unwrap();
            loss_of(&layer, &probe)
        },
        &x.to_f64_vec(),
        &dx.to_f64_vec(),
        eps,
    );
    Ok(merge(vec![w_report, b_report, x_report], "conv2d"))
}

/// Check weight, bias and input gradients of a random transposed convolution.
pub fn check_conv2d_transpose(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(2));
    let layer: ConvTranspose2d<f64> =
        ConvTranspose2d::new(2, 1, 3, 2, 1, 7, 5, Activation::Logistic, &mut rng);
    let x = random_tensor(&mut rng, &[2, 4, 3], -1.0, 1.0);
    let (y0, _) = layer.forward(&x)?;
    let u = random_tensor(&mut rng, y0.shape(), -1.0, 1.0);

    let loss_of = |layer: &ConvTranspose2d<f64>, x: &Tensor<f64>| -> f64 {
        let (y, _) = layer.forward(x).expect("forward");
        y.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
    };

    let (_, cache) = layer.forward(&x)?;
    let mut dw = Tensor::zeros(layer.weights.shape());
    let mut db = Tensor::zeros(layer.bias.shape());
    let dx = layer.backward(&cache, &u, &mut dw, &mut db)?;

    let w_report = check_gradient(
        "conv2d_transpose/weights",
        |vals| {
            let mut probe = layer.clone();
            probe.weights = Tensor::from_f64_slice(layer.weights.shape(), vals).unwrap();
            loss_of(&probe, &x)
        },
        &layer.weights.to_f64_vec(),
        &dw.to_f64_vec(),
        eps,
    );
    let b_report = check_gradient(
        "conv2d_transpose/bias",
        |vals| {
            let mut probe = layer.clone();
            probe.bias = Tensor::from_f64_slice(layer.bias.shape(), vals).unwrap();
            loss_of(&probe, &x)
        },
        &layer.bias.to_f64_vec(),
        &db.to_f64_vec(),
        eps,
    );
    let x_report = check_gradient(
        "conv2d_transpose/input",
        |vals| {
            let probe = Tensor::from_f64_slice(x.shape(), vals).unwrap();
            loss_of(&layer, &probe)
        },
        &x.to_f64_vec(),
        &dx.to_f64_vec(),
        eps,
    );
    Ok(merge(vec![w_report, b_report, x_report], "conv2d_transpose"))
}

/// Check weight, bias and input gradients of a random dense layer.
pub fn check_dense(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(3));
    let layer: Dense<f64> = Dense::new(7, 5, Activation::Logistic, &mut rng);
    let x = random_tensor(&mut rng, &[7], -1.0, 1.0);
    let u = random_tensor(&mut rng, &[5], -1.0, 1.0);

    let loss_of = |layer: &Dense<f64>, x: &Tensor<f64>| -> f64 {
        let (y, _) = layer.forward(x).expect("forward");
        y.data().iter().zip(u.data()).map(|(a, b)| a * b).sum()
    };

    let (_, cache) = layer.forward(&x)?;
    let mut dw = Tensor::zeros(layer.weights.shape());
    let mut db = Tensor::zeros(layer.bias.shape());
    let dx = layer.backward(&cache, &u, &mut dw, &mut db)?;

    let w_report = check_gradient(
        "dense/weights",
        |vals| {
            let mut probe = layer.clone();
            probe.weights = Tensor::from_f64_slice(layer.weights.shape(), vals).unwrap();
            loss_of(&probe, &x)
        },
        &layer.weights.to_f64_vec(),
        &dw.to_f64_vec(),
        eps,
    );
    let b_report = check_gradient(
        "dense/bias",
        |vals| {
            let mut probe = layer.clone();
            probe.bias = Tensor::from_f64_slice(layer.bias.shape(), vals).unwrap();
            loss_of(&probe, &x)
        },
        &layer.bias.to_f64_vec(),
        &db.to_f64_vec(),
        eps,
    );
    let x_report = check_gradient(
        "dense/input",
        |vals| {
            let probe = Tensor::from_f64_slice(x.shape(), vals).unwrap();
            loss_of(&layer, &probe)
        },
        &x.to_f64_vec(),
        &dx.to_f64_vec(),
        eps,
    );
    Ok(merge(vec![w_report, b_report, x_report], "dense"))
}

/// Check all LSTM parameters through a six-step unrolled window.
pub fn check_lstm(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(4));
    let cell: LstmCell<f64> = LstmCell::new(4, 5, &mut rng);
    let window: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let window_refs: Vec<&[f64]> = window.iter().map(|v| v.as_slice()).collect();
    let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let loss_of = |cell: &LstmCell<f64>| -> f64 {
        let refs: Vec<&[f64]> = window.iter().map(|v| v.as_slice()).collect();
        let (h, _) = cell.forward_window(&refs).expect("forward");
        h.iter().zip(&u).map(|(a, b)| a * b).sum()
    };

    let (_, cache) = cell.forward_window(&window_refs)?;
    let mut dw = Tensor::zeros(cell.weights.shape());
    let mut db = Tensor::zeros(cell.bias.shape());
    cell.backward_window(&cache, &u, &mut dw, &mut db)?;

    let w_report = check_gradient(
        "lstm/weights",
        |vals| {
            let mut probe = cell.clone();
            probe.weights = Tensor::from_f64_slice(cell.weights.shape(), vals).unwrap();
            loss_of(&probe)
        },
        &cell.weights.to_f64_vec(),
        &dw.to_f64_vec(),
        eps,
    );
    let b_report = check_gradient(
        "lstm/bias",
        |vals| {
            let mut probe = cell.clone();
            probe.bias = Tensor::from_f64_slice(cell.bias.shape(), vals).unwrap();
            loss_of(&probe)
        },
        &cell.bias.to_f64_vec(),
        &db.to_f64_vec(),
        eps,
    );
    Ok(merge(vec![w_report, b_report], "lstm"))
}

/// Check the gradient of the probability-form BCE at interior points.
pub fn check_bce(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(5));
    let p = random_tensor(&mut rng, &[12], 0.05, 0.95);
    let t = random_tensor(&mut rng, &[12], 0.0, 1.0);
    let (_, grad) = bce_loss(&p, &t)?;
    Ok(check_gradient(
        "bce",
        |vals| {
            let probe = Tensor::from_f64_slice(&[12], vals).unwrap();
            bce_loss(&probe, &t).expect("loss").0
        },
        &p.to_f64_vec(),
        &grad.to_f64_vec(),
        eps,
    ))
}

/// Check the gradient of the logits-form BCE.
pub fn check_bce_logits(seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(6));
    let z = random_tensor(&mut rng, &[12], -3.0, 3.0);
    let t = random_tensor(&mut rng, &[12], 0.0, 1.0);
    let (_, grad) = bce_with_logits(&z, &t)?;
    Ok(check_gradient(
        "bce_with_logits",
        |vals| {
            let probe = Tensor::from_f64_slice(&[12], vals).unwrap();
            bce_with_logits(&probe, &t).expect("loss").0
        },
        &z.to_f64_vec(),
        &grad.to_f64_vec(),
        eps,
    ))
}

/// Run every layer check for one seed.
pub fn check_all_layers(seed: u64, eps: f64) -> Result<Vec<GradCheckReport>> {
    Ok(vec![
        check_conv2d(seed, eps)?,
        check_conv2d_transpose(seed, eps)?,
        check_dense(seed, eps)?,
        check_lstm(seed, eps)?,
        check_bce(seed, eps)?,
        check_bce_logits(seed, eps)?,
    ])
}
