use super::dataset::{Matrix, RnnDataset};
use crate::models::{AutoencoderSpec, Decoder, Encoder, RnnHead, RnnSpec};
use crate::nn::{bce_with_logits, Adam, AdamConfig, Tensor};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Gradients are accumulated in this many fixed chunks and reduced in chunk
/// order, so results do not depend on the worker thread count.
const GRAD_CHUNKS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub batch: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Early-stopping patience in epochs without test-loss improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            batch: 64,
            lr: 1e-3,
            epochs: 150,
            patience: 20,
            seed: 1,
        }
    }
}

/// Per-epoch train/test loss pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossCurve {
    pub rows: Vec<(usize, f64, f64)>,
}

impl LossCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,train_bce,test_bce\n");
        for (e, train, test) in &self.rows {
            let _ = writeln!(out, "{e},{train:.9e},{test:.9e}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|(_, a, b)| a.is_finite() && b.is_finite())
    }
}

struct EarlyStop {
    patience: usize,
    best: f64,
    since: usize,
}

impl EarlyStop {
    fn new(patience: usize) -> Self {
        EarlyStop {
            patience,
            best: f64::INFINITY,
            since: 0,
        }
    }

    /// Returns true when `loss` strictly improves on the best seen.
    fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.since = 0;
            true
        } else {
            self.since += 1;
            false
        }
    }

    fn should_stop(&self) -> bool {
        self.since > self.patience
    }
}

fn chunk_indices(indices: &[usize]) -> Vec<&[usize]> {
    let size = indices.len().div_ceil(GRAD_CHUNKS).max(1);
    indices.chunks(size).collect()
}

/// Per-epoch progress on stderr when `SOFTARM_PROGRESS` is set.
fn progress(label: &str, epoch: usize, train: f64, test: f64) {
    if std::env::var_os("SOFTARM_PROGRESS").is_some() {
        eprintln!("{label} epoch {epoch}: train {train:.5} test {test:.5}");
    }
}

pub struct TrainedAutoencoder {
    pub encoder: Encoder<f32>,
    pub decoder: Decoder<f32>,
    pub curve: LossCurve,
    pub best_test_bce: f64,
    pub epochs_ran: usize,
}

fn frame_tensor(frames: &Matrix, i: usize, h: usize, w: usize) -> Result<Tensor<f32>> {
    Tensor::from_vec(&[1, h, w], frames.row(i).to_vec())
}

fn ae_item_loss(
    encoder: &Encoder<f32>,
    decoder: &Decoder<f32>,
    image: &Tensor<f32>,
) -> Result<f64> {
    let latent = encoder.encode(image)?;
    let (logits, _) = decoder.forward(&latent)?;
    Ok(bce_with_logits(&logits, image)?.0)
}

fn ae_test_loss(encoder: &Encoder<f32>, decoder: &Decoder<f32>, test: &Matrix) -> Result<f64> {
    let (h, w) = (encoder.spec().height, encoder.spec().width);
    let losses: Result<Vec<f64>> = (0..test.rows)
        .into_par_iter()
        .map(|i| ae_item_loss(encoder, decoder, &frame_tensor(test, i, h, w)?))
        .collect();
    let losses = losses?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Train the autoencoder on pixel BCE with Adam, early-stopping on the test
/// loss plateau. Returns the parameters of the best test epoch. Deterministic
/// for a fixed seed and thread-count independent.
pub fn train_autoencoder(
    train: &Matrix,
    test: &Matrix,
    spec: &AutoencoderSpec,
    hyper: &TrainHyper,
) -> Result<TrainedAutoencoder> {
    if train.rows == 0 || test.rows == 0 {
        return Err(Error::Config("autoencoder needs non-empty train and test splits".into()));
    }
    if train.cols != spec.pixel_count() {
        return Err(Error::Shape(format!(
            "frames have {} pixels, spec expects {}",
            train.cols,
            spec.pixel_count()
        )));
    }
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut encoder: Encoder<f32> = Encoder::new(spec, &mut rng)?;
    let mut decoder: Decoder<f32> = Decoder::new(spec, &mut rng)?;
    let n_enc = encoder.param_count();

    let mut adam: Adam<f32> = Adam::new(AdamConfig {
        lr: hyper.lr,
        ..AdamConfig::default()
    });
    let mut curve = LossCurve::default();
    let mut stopper = EarlyStop::new(hyper.patience);
    let mut best_params: Vec<Tensor<f32>> = Vec::new();
    let mut indices: Vec<usize> = (0..train.rows).collect();

    for epoch in 0..hyper.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        let mut seen = 0usize;

        for (batch_no, batch) in indices.chunks(hyper.batch).enumerate() {
            type AeChunk = (Vec<Tensor<f32>>, Vec<Tensor<f32>>, f64);
            let chunk_results: Result<Vec<AeChunk>> = chunk_indices(batch)
                .into_par_iter()
                .map(|chunk| {
                    let mut enc_grads = encoder.grad_zeros();
                    let mut dec_grads = decoder.grad_zeros();
                    let mut loss_sum = 0.0f64;
                    for &i in chunk {
                        let image = frame_tensor(train, i, h, w)?;
                        let (latent, enc_cache) = encoder.forward(&image)?;
                        let (logits, dec_cache) = decoder.forward(&latent)?;
                        let (loss, dlogits) = bce_with_logits(&logits, &image)?;
                        loss_sum += loss;
                        let dlatent = decoder.backward(&dec_cache, &dlogits, &mut dec_grads)?;
                        encoder.backward(&enc_cache, &dlatent, &mut enc_grads)?;
                    }
                    Ok((enc_grads, dec_grads, loss_sum))
                })
                .collect();

            let mut grads = encoder.grad_zeros();
            grads.extend(decoder.grad_zeros());
            let mut batch_loss = 0.0f64;
            for (enc_g, dec_g, loss_sum) in chunk_results? {
                for (acc, g) in grads[..n_enc].iter_mut().zip(&enc_g) {
                    acc.add_assign(g);
                }
                for (acc, g) in grads[n_enc..].iter_mut().zip(&dec_g) {
                    acc.add_assign(g);
                }
                batch_loss += loss_sum;
            }
            let inv = 1.0 / batch.len() as f64;
            for g in &mut grads {
                g.scale(inv as f32);
            }
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "autoencoder loss became non-finite at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += batch_loss * batch.len() as f64;
            seen += batch.len();

            let mut params = encoder.params_mut();
            params.extend(decoder.params_mut());
            adam.step(&mut params, &grads)?;
        }

        let train_loss = epoch_loss / seen as f64;
        let test_loss = ae_test_loss(&encoder, &decoder, test)?;
        if !test_loss.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "autoencoder test loss became non-finite at epoch {epoch}"
            )));
        }
        curve.rows.push((epoch, train_loss, test_loss));
        progress("[train-ae]", epoch, train_loss, test_loss);
        if stopper.observe(test_loss) {
            let mut snapshot: Vec<Tensor<f32>> =
                encoder.params().into_iter().cloned().collect();
            snapshot.extend(decoder.params().into_iter().cloned());
            best_params = snapshot;
        }
        if stopper.should_stop() {
            break;
        }
    }

    // Restore the best-test parameters.
    if !best_params.is_empty() {
        let mut params = encoder.params_mut();
        params.extend(decoder.params_mut());
        for (p, snap) in params.iter_mut().zip(&best_params) {
            p.data_mut().copy_from_slice(snap.data());
        }
    }
    let epochs_ran = curve.rows.len();
    Ok(TrainedAutoencoder {
        encoder,
        decoder,
        best_test_bce: stopper.best,
        epochs_ran,
        curve,
    })
}

pub struct TrainedRnn {
    pub rnn: RnnHead<f32>,
    pub curve: LossCurve,
    pub best_test_bce: f64,
    pub epochs_ran: usize,
}

fn rnn_item_loss(rnn: &RnnHead<f32>, data: &RnnDataset, i: usize) -> Result<f64> {
    let (logits, _) = rnn.forward(data.windows.row(i))?;
    let target = Tensor::from_vec(&[data.targets.cols], data.targets.row(i).to_vec())?;
    Ok(bce_with_logits(&logits, &target)?.0)
}

fn rnn_test_loss(rnn: &RnnHead<f32>, data: &RnnDataset) -> Result<f64> {
    let losses: Result<Vec<f64>> = (0..data.windows.rows)
        .into_par_iter()
        .map(|i| rnn_item_loss(rnn, data, i))
        .collect();
    let losses = losses?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}

/// Train the sensor-to-latent LSTM on BCE against the masked, normalized
/// latent targets. Same loop contract as [`train_autoencoder`].
pub fn train_rnn(
    train: &RnnDataset,
    test: &RnnDataset,
    spec: &RnnSpec,
    hyper: &TrainHyper,
) -> Result<TrainedRnn> {
    if train.windows.rows == 0 || test.windows.rows == 0 {
        return Err(Error::Config("rnn needs non-empty train and test splits".into()));
    }
    if train.targets.cols != spec.output_size {
        return Err(Error::Shape(format!(
            "targets have {} features, rnn predicts {}",
            train.targets.cols, spec.output_size
        )));
    }
    if train.windows.cols != spec.lookback * spec.input_size {
        return Err(Error::Shape(format!(
            "windows are {} wide, rnn expects {}",
            train.windows.cols,
            spec.lookback * spec.input_size
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut rnn: RnnHead<f32> = RnnHead::new(spec, &mut rng)?;
    let mut adam: Adam<f32> = Adam::new(AdamConfig {
        lr: hyper.lr,
        ..AdamConfig::default()
    });
    let mut curve = LossCurve::default();
    let mut stopper = EarlyStop::new(hyper.patience);
    let mut best_params: Vec<Tensor<f32>> = Vec::new();
    let mut indices: Vec<usize> = (0..train.windows.rows).collect();

    for epoch in 0..hyper.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        let mut seen = 0usize;

        for (batch_no, batch) in indices.chunks(hyper.batch).enumerate() {
            let chunk_results: Result<Vec<(Vec<Tensor<f32>>, f64)>> = chunk_indices(batch)
                .into_par_iter()
                .map(|chunk| {
                    let mut grads = rnn.grad_zeros();
                    let mut loss_sum = 0.0f64;
                    for &i in chunk {
                        let (logits, cache) = rnn.forward(train.windows.row(i))?;
                        let target =
                            Tensor::from_vec(&[train.targets.cols], train.targets.row(i).to_vec())?;
                        let (loss, dlogits) = bce_with_logits(&logits, &target)?;
                        loss_sum += loss;
                        rnn.backward(&cache, &dlogits, &mut grads)?;
                    }
                    Ok((grads, loss_sum))
                })
                .collect();

            let mut grads = rnn.grad_zeros();
            let mut batch_loss = 0.0f64;
            for (g, loss_sum) in chunk_results? {
                for (acc, gt) in grads.iter_mut().zip(&g) {
                    acc.add_assign(gt);
                }
                batch_loss += loss_sum;
            }
            let inv = 1.0 / batch.len() as f64;
            for g in &mut grads {
                g.scale(inv as f32);
            }
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "rnn loss became non-finite at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += batch_loss * batch.len() as f64;
            seen += batch.len();

            let mut params = rnn.params_mut();
            adam.step(&mut params, &grads)?;
        }

        let train_loss = epoch_loss / seen as f64;
        let test_loss = rnn_test_loss(&rnn, test)?;
        if !test_loss.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "rnn test loss became non-finite at epoch {epoch}"
            )));
        }
        curve.rows.push((epoch, train_loss, test_loss));
        progress("[train-rnn]", epoch, train_loss, test_loss);
        if stopper.observe(test_loss) {
            best_params = rnn.params().into_iter().cloned().collect();
        }
        if stopper.should_stop() {
            break;
        }
    }

    if !best_params.is_empty() {
        for (p, snap) in rnn.params_mut().iter_mut().zip(&best_params) {
            p.data_mut().copy_from_slice(snap.data());
        }
    }
    let epochs_ran = curve.rows.len();
    Ok(TrainedRnn {
        rnn,
        best_test_bce: stopper.best,
        epochs_ran,
        curve,
    })
}

/// Mean BCE between decoded reconstructions and the original frames.
pub(crate) fn reconstruction_bce(
    encoder: &Encoder<f32>,
    decoder: &Decoder<f32>,
    frames: &Matrix,
) -> Result<f64> {
    ae_test_loss(encoder, decoder, frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small stack for fast tests: 20×26 frames, two conv stages.
    fn small_spec() -> AutoencoderSpec {
        AutoencoderSpec {
            height: 20,
            width: 26,
            conv_channels: vec![4, 8],
            kernel: 3,
            stride: 2,
            pad: 1,
            latent: 8,
        }
    }

    fn repeated_frame_matrix(n: usize) -> Matrix {
        // Solid slanted blob, the texture class the dataset actually contains.
        let mut row = vec![0.0f32; 20 * 26];
        for y in 3..17 {
            for x in 5..21 {
                if x + y < 32 {
                    row[y * 26 + x] = 1.0;
                }
            }
        }
        Matrix::from_rows(vec![row; n]).unwrap()
    }

    #[test]
    fn single_repeated_frame_trains_below_001() {
        let train = repeated_frame_matrix(512);
        let test = repeated_frame_matrix(8);
        let spec = small_spec();
        let hyper = TrainHyper {
            batch: 64,
            lr: 1e-2,
            epochs: 50,
            patience: 50,
            seed: 7,
        };
        let trained = train_autoencoder(&train, &test, &spec, &hyper).unwrap();
        assert!(
            trained.best_test_bce < 0.01,
            "test BCE {} after {} epochs",
            trained.best_test_bce,
            trained.epochs_ran
        );
        assert!(trained.curve.all_finite());
    }

    #[test]
    fn constant_rnn_target_approaches_entropy_floor() {
        // Constant target t* has BCE floor H(t*) = -t* ln t* - (1-t*) ln(1-t*).
        let t_star = 0.3f64;
        let n_train = 300;
        let n_test = 60;
        let mk = |n: usize, phase: f64| -> RnnDataset {
            let windows = Matrix::from_rows(
                (0..n)
                    .map(|i| {
                        (0..24)
                            .map(|k| (((i + k) as f64 * 0.37 + phase).sin() * 0.5 + 0.5) as f32)
                            .collect()
                    })
                    .collect(),
            )
            .unwrap();
            let targets =
                Matrix::from_rows(vec![vec![t_star as f32, t_star as f32]; n]).unwrap();
            RnnDataset {
                windows,
                targets,
                target_steps: (0..n).collect(),
                clip_rate: 0.0,
            }
        };
        let spec = RnnSpec {
            input_size: 4,
            hidden_size: 8,
            lookback: 6,
            output_size: 2,
        };
        let hyper = TrainHyper {
            batch: 32,
            lr: 1e-2,
            epochs: 60,
            patience: 60,
            seed: 3,
        };
        let trained = train_rnn(&mk(n_train, 0.0), &mk(n_test, 0.1), &spec, &hyper).unwrap();
        let floor = -(t_star * t_star.ln() + (1.0 - t_star) * (1.0 - t_star).ln());
        assert!(
            (trained.best_test_bce - floor).abs() < 0.01,
            "test BCE {} vs floor {floor}",
            trained.best_test_bce
        );
    }

    #[test]
    fn training_is_deterministic_for_fixed_seed() {
        let train = repeated_frame_matrix(64);
        let test = repeated_frame_matrix(4);
        let spec = small_spec();
        let hyper = TrainHyper {
            batch: 16,
            lr: 1e-3,
            epochs: 3,
            patience: 10,
            seed: 42,
        };
        let a = train_autoencoder(&train, &test, &spec, &hyper).unwrap();
        let b = train_autoencoder(&train, &test, &spec, &hyper).unwrap();
        assert_eq!(a.curve, b.curve);
        for (pa, pb) in a.encoder.params().iter().zip(b.encoder.params()) {
            assert_eq!(pa.data(), pb.data());
        }
    }
}
