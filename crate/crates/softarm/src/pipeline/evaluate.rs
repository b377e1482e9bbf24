use super::dataset::{Matrix, RnnDatasets};
use super::split::SplitSpec;
use super::train::reconstruction_bce;
use crate::models::{imagine, Decoder, Encoder, RnnHead};
use crate::nn::{bce_loss, Tensor};
use crate::sensing::SensorTrace;
use crate::{Error, Result};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Scalar metrics of one evaluation run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalMetrics {
    pub train_frames: usize,
    pub test_frames: usize,
    pub eval_frames: usize,
    pub predictions: usize,
    pub active_features: usize,
    pub ae_test_bce: f64,
    pub ae_eval_bce: f64,
    pub rnn_test_bce: f64,
    pub rnn_eval_bce: f64,
    pub imagine_pixel_bce: f64,
    pub imagine_iou: f64,
    pub latent_clip_rate_test: f64,
    pub latent_clip_rate_eval: f64,
}

impl EvalMetrics {
    /// Flat `key = value` report.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "split.train_frames = {}", self.train_frames);
        let _ = writeln!(out, "split.test_frames = {}", self.test_frames);
        let _ = writeln!(out, "split.eval_frames = {}", self.eval_frames);
        let _ = writeln!(out, "eval.predictions = {}", self.predictions);
        let _ = writeln!(out, "latent.active_features = {}", self.active_features);
        let _ = writeln!(out, "ae.test_bce = {:.9e}", self.ae_test_bce);
        let _ = writeln!(out, "ae.eval_bce = {:.9e}", self.ae_eval_bce);
        let _ = writeln!(out, "rnn.test_bce = {:.9e}", self.rnn_test_bce);
        let _ = writeln!(out, "rnn.eval_bce = {:.9e}", self.rnn_eval_bce);
        let _ = writeln!(out, "imagine.pixel_bce = {:.9e}", self.imagine_pixel_bce);
        let _ = writeln!(out, "imagine.iou = {:.9e}", self.imagine_iou);
        let _ = writeln!(out, "latent.clip_rate_test = {:.9e}", self.latent_clip_rate_test);
        let _ = writeln!(out, "latent.clip_rate_eval = {:.9e}", self.latent_clip_rate_eval);
        out
    }

    /// Parse a report written by [`EvalMetrics::to_kv`] into key/value pairs.
    pub fn parse_kv(text: &str) -> Vec<(String, f64)> {
        text.lines()
            .filter_map(|line| {
                let (k, v) = line.split_once('=')?;
                Some((k.trim().to_string(), v.trim().parse().ok()?))
            })
            .collect()
    }
}

/// Everything the evaluation stage emits.
pub struct EvalArtifacts {
    pub metrics: EvalMetrics,
    /// `(t, feature_id, true_normalized, predicted)` per eval step and feature.
    pub latent_trace_rows: Vec<(f64, usize, f64, f64)>,
    /// `(t, pixel_bce, iou)` per imagined frame.
    pub frame_rows: Vec<(f64, f64, f64)>,
    /// Imagined probability images, aligned with `frame_rows`.
    pub imagined: Vec<Tensor<f32>>,
    /// Global timestep of each imagined frame.
    pub steps: Vec<usize>,
}

fn frame_iou(prob: &Tensor<f32>, truth: &[f32]) -> f64 {
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (&p, &t) in prob.data().iter().zip(truth) {
        let a = p >= 0.5;
        let b = t >= 0.5;
        if a && b {
            intersection += 1;
        }
        if a || b {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    }
}

/// Run the full evaluation protocol on the eval split.
///
/// Touches the eval split exactly once; the test-split numbers repeat the
/// model-selection metrics for reference. All outputs are deterministic.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    frames: &Matrix,
    sensors: &SensorTrace,
    encoder: &Encoder<f32>,
    decoder: &Decoder<f32>,
    rnn: &RnnHead<f32>,
    datasets: &RnnDatasets,
    split: &SplitSpec,
    record_dt: f64,
) -> Result<EvalArtifacts> {
    if frames.rows != split.total() || sensors.len() != split.total() {
        return Err(Error::Config(format!(
            "evaluate expects {} aligned timesteps, got {} frames and {} sensor rows",
            split.total(),
            frames.rows,
            sensors.len()
        )));
    }
    let lookback = rnn.spec().lookback;
    let eval_range = split.eval_range();

    let test_frames = frames.slice_rows(split.test_range());
    let eval_frames = frames.slice_rows(eval_range.clone());
    let ae_test_bce = reconstruction_bce(encoder, decoder, &test_frames)?;
    let ae_eval_bce = reconstruction_bce(encoder, decoder, &eval_frames)?;

    let rnn_loss = |data: &super::dataset::RnnDataset| -> Result<f64> {
        let losses: Result<Vec<f64>> = (0..data.windows.rows)
            .into_par_iter()
            .map(|i| {
                let pred = rnn.predict(data.windows.row(i))?;
                let target = Tensor::from_vec(&[data.targets.cols], data.targets.row(i).to_vec())?;
                Ok(bce_loss(&pred, &target)?.0)
            })
            .collect();
        let losses = losses?;
        Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
    };
    let rnn_test_bce = rnn_loss(&datasets.test)?;
    let rnn_eval_bce = rnn_loss(&datasets.eval)?;

    // Imagination over the eval segment.
    let segment = sensors.slice(eval_range.start, eval_range.end);
    let imagined = imagine(
        &segment,
        rnn,
        decoder,
        &datasets.sensor_norm,
        &datasets.latent_norm,
        &datasets.mask,
    )?;
    if imagined.len() != datasets.eval.windows.rows {
        return Err(Error::Config(format!(
            "imagined {} frames but the eval split has {} windows",
            imagined.len(),
            datasets.eval.windows.rows
        )));
    }

    let mut frame_rows = Vec::with_capacity(imagined.len());
    let mut steps = Vec::with_capacity(imagined.len());
    let mut bce_sum = 0.0f64;
    let mut iou_sum = 0.0f64;
    for (k, prob) in imagined.iter().enumerate() {
        let t = eval_range.start + lookback + k;
        // The ground-truth frame timestamp is one recording step after the
        // window's final sensor reading.
        debug_assert_eq!(datasets.eval.target_steps[k], t);
        let truth_row = frames.row(t);
        let truth = Tensor::from_vec(&[prob.len()], truth_row.to_vec())?;
        let flat = Tensor::from_vec(&[prob.len()], prob.data().to_vec())?;
        let (bce, _) = bce_loss(&flat, &truth)?;
        let iou = frame_iou(prob, truth_row);
        bce_sum += bce;
        iou_sum += iou;
        frame_rows.push((t as f64 * record_dt, bce, iou));
        steps.push(t);
    }
    let n = imagined.len().max(1) as f64;

    // Per-feature predicted vs true traces on the eval split.
    let active_idx = datasets.mask.active_indices();
    let mut latent_trace_rows =
        Vec::with_capacity(datasets.eval.windows.rows * active_idx.len());
    for i in 0..datasets.eval.windows.rows {
        let t = datasets.eval.target_steps[i];
        let pred = rnn.predict(datasets.eval.windows.row(i))?;
        let target = datasets.eval.targets.row(i);
        for (k, &feature) in active_idx.iter().enumerate() {
            latent_trace_rows.push((
                t as f64 * record_dt,
                feature,
                target[k] as f64,
                pred.data()[k] as f64,
            ));
        }
    }

    let metrics = EvalMetrics {
        train_frames: split.train,
        test_frames: split.test,
        eval_frames: split.eval,
        predictions: imagined.len(),
        active_features: datasets.mask.active_count(),
        ae_test_bce,
        ae_eval_bce,
        rnn_test_bce,
        rnn_eval_bce,
        imagine_pixel_bce: bce_sum / n,
        imagine_iou: iou_sum / n,
        latent_clip_rate_test: datasets.test.clip_rate,
        latent_clip_rate_eval: datasets.eval.clip_rate,
    };
    Ok(EvalArtifacts {
        metrics,
        latent_trace_rows,
        frame_rows,
        imagined,
        steps,
    })
}

/// CSV of the latent traces: `t,feature_id,true,predicted`.
pub fn latent_trace_csv(rows: &[(f64, usize, f64, f64)]) -> String {
    let mut out = String::from("t,feature_id,true,predicted\n");
    for (t, id, truth, pred) in rows {
        let _ = writeln!(out, "{t:.4},{id},{truth:.9e},{pred:.9e}");
    }
    out
}

/// CSV of per-frame pixel metrics: `t,pixel_bce,iou`.
pub fn frame_metrics_csv(rows: &[(f64, f64, f64)]) -> String {
    let mut out = String::from("t,pixel_bce,iou\n");
    for (t, bce, iou) in rows {
        let _ = writeln!(out, "{t:.4},{bce:.9e},{iou:.9e}");
    }
    out
}
