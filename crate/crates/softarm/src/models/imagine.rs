use super::autoencoder::Decoder;
use super::rnn::RnnHead;
use crate::nn::Tensor;
use crate::pipeline::{FeatureMask, Normalizer};
use crate::sensing::SensorTrace;
use crate::{Error, Result};

/// Imagine frames from proprioception alone.
///
/// For every timestep `t >= lookback` of the segment: normalize the sensor
/// window `t-lookback .. t-1`, predict the active latent features with the
/// RNN, denormalize them, reinsert masked features at their stored training
/// means, and decode. Returns one probability image per predicted step,
/// `segment length − lookback` frames in total.
pub fn imagine(
    segment: &SensorTrace,
    rnn: &RnnHead<f32>,
    decoder: &Decoder<f32>,
    sensor_norm: &Normalizer,
    latent_norm: &Normalizer,
    mask: &FeatureMask,
) -> Result<Vec<Tensor<f32>>> {
    let lookback = rnn.spec().lookback;
    if segment.len() < lookback + 1 {
        return Err(Error::Config(format!(
            "segment of {} steps is shorter than lookback {} + 1",
            segment.len(),
            lookback
        )));
    }
    if sensor_norm.channels() != segment.n_sensors {
        return Err(Error::Config(format!(
            "sensor normalizer covers {} channels, trace has {}",
            sensor_norm.channels(),
            segment.n_sensors
        )));
    }
    if mask.total() != latent_norm.channels() {
        return Err(Error::Config(format!(
            "feature mask covers {} features, latent normalizer {}",
            mask.total(),
            latent_norm.channels()
        )));
    }
    if mask.active_count() != rnn.spec().output_size {
        return Err(Error::Config(format!(
            "rnn predicts {} features but the mask has {} active",
            rnn.spec().output_size,
            mask.active_count()
        )));
    }

    let n_ch = segment.n_sensors;
    let active_idx = mask.active_indices();
    let mut frames = Vec::with_capacity(segment.len() - lookback);
    let mut window = vec![0.0f32; lookback * n_ch];
    let mut normed = vec![0.0f64; n_ch];

    for t in lookback..segment.len() {
        for (k, step) in (t - lookback..t).enumerate() {
            sensor_norm.apply_row(segment.row(step), &mut normed);
            for (c, &v) in normed.iter().enumerate() {
                window[k * n_ch + c] = v as f32;
            }
        }
        let predicted = rnn.predict(&window)?;
        // Denormalize the active features, then restore the full latent.
        let active_raw: Vec<f64> = predicted
            .data()
            .iter()
            .zip(&active_idx)
            .map(|(&v, &c)| latent_norm.invert_value(c, v as f64))
            .collect();
        let full = mask.restore(&active_raw);
        let latent = Tensor::from_vec(&[full.len()], full.iter().map(|&v| v as f32).collect())?;
        frames.push(decoder.decode(&latent)?);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AutoencoderSpec, RnnSpec};
    use crate::sensing::SensorTrace;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_trace(steps: usize, channels: usize, value: f64) -> SensorTrace {
        SensorTrace::from_rows(0.01, channels, vec![vec![value; channels]; steps])
    }

    fn setup() -> (RnnHead<f32>, Decoder<f32>, Normalizer, Normalizer, FeatureMask) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ae_spec = AutoencoderSpec {
            height: 10,
            width: 12,
            conv_channels: vec![2, 3],
            kernel: 3,
            stride: 2,
            pad: 1,
            latent: 6,
        };
        let decoder: Decoder<f32> = Decoder::new(&ae_spec, &mut rng).unwrap();
        let mask = FeatureMask {
            active: vec![true, true, false, true, true, false],
            means: vec![0.0, 0.0, 0.31, 0.0, 0.0, 0.77],
        };
        let rnn_spec = RnnSpec {
            input_size: 4,
            hidden_size: 8,
            lookback: 6,
            output_size: mask.active_count(),
        };
        let rnn: RnnHead<f32> = RnnHead::new(&rnn_spec, &mut rng).unwrap();
        let sensor_norm = Normalizer {
            min: vec![-1.0; 4],
            max: vec![1.0; 4],
        };
        let latent_norm = Normalizer {
            min: vec![0.0; 6],
            max: vec![1.0; 6],
        };
        (rnn, decoder, sensor_norm, latent_norm, mask)
    }

    #[test]
    fn segment_of_500_yields_494_frames() {
        let (rnn, decoder, sensor_norm, latent_norm, mask) = setup();
        let trace = constant_trace(500, 4, 0.2);
        let frames = imagine(&trace, &rnn, &decoder, &sensor_norm, &latent_norm, &mask).unwrap();
        assert_eq!(frames.len(), 494);
        assert_eq!(frames[0].shape(), &[1, 10, 12]);
    }

    #[test]
    fn constant_input_imagines_constant_frames() {
        let (rnn, decoder, sensor_norm, latent_norm, mask) = setup();
        let trace = constant_trace(20, 4, -0.4);
        let frames = imagine(&trace, &rnn, &decoder, &sensor_norm, &latent_norm, &mask).unwrap();
        assert_eq!(frames.len(), 14);
        for f in &frames[1..] {
            assert_eq!(f.data(), frames[0].data());
        }
    }

    #[test]
    fn short_segment_rejected() {
        let (rnn, decoder, sensor_norm, latent_norm, mask) = setup();
        let trace = constant_trace(6, 4, 0.0);
        assert!(imagine(&trace, &rnn, &decoder, &sensor_norm, &latent_norm, &mask).is_err());
    }

    #[test]
    fn missing_metadata_consistency_rejected() {
        let (rnn, decoder, sensor_norm, latent_norm, _) = setup();
        // Mask that disagrees with the RNN output size.
        let bad_mask = FeatureMask {
            active: vec![true; 6],
            means: vec![0.0; 6],
        };
        let trace = constant_trace(20, 4, 0.0);
        assert!(imagine(&trace, &rnn, &decoder, &sensor_norm, &latent_norm, &bad_mask).is_err());
    }
}
