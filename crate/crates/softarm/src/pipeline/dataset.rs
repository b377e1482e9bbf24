use super::mask::FeatureMask;
use super::normalize::Normalizer;
use super::split::{split_indices, SplitSpec};
use crate::models::Encoder;
use crate::nn::Tensor;
use crate::raster::FrameSequence;
use crate::sensing::SensorTrace;
use crate::{Error, Result};
use rayon::prelude::*;
use std::ops::Range;

/// Flat row-major f32 matrix; rows are samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Matrix> {
        let n = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * cols);
        for r in &rows {
            if r.len() != cols {
                return Err(Error::Shape("ragged rows in matrix".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: n, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    /// Copy of rows `range`.
    pub fn slice_rows(&self, range: Range<usize>) -> Matrix {
        Matrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }
}

/// Flatten rendered frames to one f32 row per frame.
pub fn frames_to_matrix(frames: &FrameSequence) -> Matrix {
    let cols = frames.viewport.width * frames.viewport.height;
    Matrix {
        rows: frames.len(),
        cols,
        data: frames.to_f32_rows(),
    }
}

/// Encode every frame row with the trained encoder; one latent row per frame.
pub fn encode_frames(encoder: &Encoder<f32>, frames: &Matrix) -> Result<Matrix> {
    let (h, w) = (encoder.spec().height, encoder.spec().width);
    if frames.cols != h * w {
        return Err(Error::Shape(format!(
            "frames have {} pixels, encoder expects {}",
            frames.cols,
            h * w
        )));
    }
    let latent_dim = encoder.spec().latent;
    let rows: Result<Vec<Vec<f32>>> = (0..frames.rows)
        .into_par_iter()
        .map(|i| {
            let image = Tensor::from_vec(&[1, h, w], frames.row(i).to_vec())?;
            Ok(encoder.encode(&image)?.data().to_vec())
        })
        .collect();
    let mut data = Vec::with_capacity(frames.rows * latent_dim);
    for row in rows? {
        data.extend_from_slice(&row);
    }
    Ok(Matrix {
        rows: frames.rows,
        cols: latent_dim,
        data,
    })
}

/// One split of the sensor-window → latent-target dataset.
#[derive(Clone, Debug)]
pub struct RnnDataset {
    /// `samples × (lookback · sensor_channels)`, time-major within a row.
    pub windows: Matrix,
    /// `samples × active_features`, normalized and clipped to `[0,1]`.
    pub targets: Matrix,
    /// Global timestep index of each target.
    pub target_steps: Vec<usize>,
    /// Fraction of target entries that had to be clipped into `[0,1]`.
    pub clip_rate: f64,
}

/// All three splits plus the statistics fitted on the training split.
#[derive(Clone, Debug)]
pub struct RnnDatasets {
    pub sensor_norm: Normalizer,
    pub latent_norm: Normalizer,
    pub mask: FeatureMask,
    pub train: RnnDataset,
    pub test: RnnDataset,
    pub eval: RnnDataset,
}

fn build_split(
    sensors: &SensorTrace,
    latents: &Matrix,
    range: &Range<usize>,
    lookback: usize,
    sensor_norm: &Normalizer,
    latent_norm: &Normalizer,
    mask: &FeatureMask,
) -> Result<RnnDataset> {
    if range.len() <= lookback {
        return Err(Error::Config(format!(
            "split {range:?} shorter than lookback {lookback}"
        )));
    }
    let n_ch = sensors.n_sensors;
    let n_samples = range.len() - lookback;
    let mut windows = Matrix::zeros(n_samples, lookback * n_ch);
    let mut targets = Matrix::zeros(n_samples, mask.active_count());
    let mut target_steps = Vec::with_capacity(n_samples);
    let mut clipped = 0usize;
    let mut normed = vec![0.0f64; n_ch];

    for (s, t) in (range.start + lookback..range.end).enumerate() {
        // Window covers timesteps t-lookback .. t-1, in time order.
        let wrow = windows.row_mut(s);
        for (k, step) in (t - lookback..t).enumerate() {
            sensor_norm.apply_row(sensors.row(step), &mut normed);
            for (c, &v) in normed.iter().enumerate() {
                wrow[k * n_ch + c] = v as f32;
            }
        }
        // Target: normalized active latent features at timestep t.
        let latent_row = latents.row(t);
        let trow = targets.row_mut(s);
        let mut k = 0usize;
        for (c, &a) in mask.active.iter().enumerate() {
            if !a {
                continue;
            }
            let v = latent_norm.apply_value(c, latent_row[c] as f64);
            let clamped = v.clamp(0.0, 1.0);
            if clamped != v {
                clipped += 1;
            }
            trow[k] = clamped as f32;
            k += 1;
        }
        target_steps.push(t);
    }
    let denom = (n_samples * mask.active_count()).max(1);
    Ok(RnnDataset {
        windows,
        targets,
        target_steps,
        clip_rate: clipped as f64 / denom as f64,
    })
}

/// Build the three RNN splits. Sensor and latent normalizers and the feature
/// mask are fitted on the training rows only; windows never cross a split
/// boundary.
pub fn assemble_rnn_dataset(
    sensors: &SensorTrace,
    latents: &Matrix,
    split: &SplitSpec,
    lookback: usize,
    mask_threshold: f64,
) -> Result<RnnDatasets> {
    if sensors.len() != latents.rows {
        return Err(Error::Config(format!(
            "sensor rows {} != latent rows {}",
            sensors.len(),
            latents.rows
        )));
    }
    let (train_r, test_r, eval_r) = split_indices(latents.rows, split)?;

    let sensor_rows: Vec<&[f64]> = train_r.clone().map(|i| sensors.row(i)).collect();
    let sensor_norm = Normalizer::fit(sensor_rows, sensors.n_sensors)?;

    let train_latents = latents.slice_rows(train_r.clone());
    let mask = FeatureMask::build(&train_latents, mask_threshold)?;
    let latent_rows: Vec<Vec<f64>> = train_latents
        .iter_rows()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    let latent_norm = Normalizer::fit(latent_rows.iter().map(|r| r.as_slice()), latents.cols)?;

    let train = build_split(sensors, latents, &train_r, lookback, &sensor_norm, &latent_norm, &mask)?;
    let test = build_split(sensors, latents, &test_r, lookback, &sensor_norm, &latent_norm, &mask)?;
    let eval = build_split(sensors, latents, &eval_r, lookback, &sensor_norm, &latent_norm, &mask)?;
    Ok(RnnDatasets {
        sensor_norm,
        latent_norm,
        mask,
        train,
        test,
        eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{build_body, simulate, BodyConfig, ExcitationParams, SimParams};
    use crate::sensing::{attach_sensors, default_sensor_pairs, sample_sensors};

    fn tiny_setup(n: usize) -> (SensorTrace, Matrix) {
        let model = build_body(&BodyConfig::default()).unwrap();
        let sensors = attach_sensors(&model, &default_sensor_pairs(19, 3)).unwrap();
        let sim = SimParams {
            duration: n as f64 * 0.01,
            record_dt: 0.01,
            substeps: 20,
        };
        let traj = simulate(&model, &ExcitationParams::default(), &sim).unwrap();
        let trace = sample_sensors(&traj.truncated(n), &sensors).unwrap();
        // Synthetic latents: deterministic functions of the timestep, one
        // constant column to exercise the mask.
        let dim = 6;
        let mut latents = Matrix::zeros(n, dim);
        for t in 0..n {
            let row = latents.row_mut(t);
            for c in 0..dim {
                row[c] = if c == 3 {
                    0.42
                } else {
                    0.5 + 0.4 * ((t as f32 / 17.0) + c as f32).sin()
                };
            }
        }
        (trace, latents)
    }

    #[test]
    fn window_alignment_and_counts() {
        let split = SplitSpec {
            train: 60,
            test: 25,
            eval: 15,
        };
        let (trace, latents) = tiny_setup(100);
        let ds = assemble_rnn_dataset(&trace, &latents, &split, 6, 1e-3).unwrap();

        assert_eq!(ds.train.windows.rows, 54);
        assert_eq!(ds.test.windows.rows, 19);
        assert_eq!(ds.eval.windows.rows, 9);
        assert_eq!(ds.mask.active_count(), 5);
        assert_eq!(ds.train.targets.cols, 5);

        // Target t pairs with window rows t-6 .. t-1: shifting by one breaks it.
        let t0 = ds.test.target_steps[0];
        assert_eq!(t0, 60 + 6);
        let mut expect = vec![0.0f64; 4];
        for (k, step) in (t0 - 6..t0).enumerate() {
            ds.sensor_norm.apply_row(trace.row(step), &mut expect);
            for c in 0..4 {
                let got = ds.test.windows.row(0)[k * 4 + c];
                assert!((got as f64 - expect[c]).abs() < 1e-7);
            }
        }
        // Deliberate off-by-one: the final window row must equal the reading
        // at t-1, not at t.
        let mut at_t = vec![0.0f64; 4];
        ds.sensor_norm.apply_row(trace.row(t0), &mut at_t);
        let last_row_start = 5 * 4;
        let differs = (0..4).any(|c| {
            (ds.test.windows.row(0)[last_row_start + c] as f64 - at_t[c]).abs() > 1e-9
        });
        assert!(differs, "window includes the target timestep");
    }

    #[test]
    fn windows_never_cross_splits() {
        let split = SplitSpec {
            train: 60,
            test: 25,
            eval: 15,
        };
        let (trace, latents) = tiny_setup(100);
        let ds = assemble_rnn_dataset(&trace, &latents, &split, 6, 1e-3).unwrap();
        assert!(ds.train.target_steps.iter().all(|&t| (6..60).contains(&t)));
        assert!(ds.test.target_steps.iter().all(|&t| (66..85).contains(&t)));
        assert!(ds.eval.target_steps.iter().all(|&t| (91..100).contains(&t)));
    }

    #[test]
    fn train_targets_never_clip() {
        let split = SplitSpec {
            train: 60,
            test: 25,
            eval: 15,
        };
        let (trace, latents) = tiny_setup(100);
        let ds = assemble_rnn_dataset(&trace, &latents, &split, 6, 1e-3).unwrap();
        assert_eq!(ds.train.clip_rate, 0.0);
        assert!(ds.train.targets.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Test/eval targets may clip but stay bounded after clipping.
        assert!(ds.test.targets.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
