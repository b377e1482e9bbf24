//! Checkpoint layouts for the trained networks.
//!
//! Autoencoder checkpoints carry encoder and decoder parameters plus the
//! rendering viewport; RNN checkpoints carry the LSTM and readout parameters
//! plus the sensor/latent normalizers, the feature mask and the masked-feature
//! means. Both store their architecture and provenance (config hash, seed) as
//! metadata.

use super::autoencoder::{AutoencoderSpec, Decoder, Encoder};
use super::checkpoint::Checkpoint;
use super::rnn::{RnnHead, RnnSpec};
use crate::pipeline::{FeatureMask, Normalizer};
use crate::raster::Viewport;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn copy_params_from(ck: &Checkpoint, names: &[String], params: &mut [&mut crate::nn::Tensor<f32>]) -> Result<()> {
    for (name, param) in names.iter().zip(params.iter_mut()) {
        let stored = ck.get_f32(name)?;
        if stored.shape() != param.shape() {
            return Err(Error::Format(format!(
                "checkpoint tensor '{name}' has shape {:?}, expected {:?}",
                stored.shape(),
                param.shape()
            )));
        }
        param.data_mut().copy_from_slice(stored.data());
    }
    Ok(())
}

pub fn save_autoencoder(
    path: &Path,
    encoder: &Encoder<f32>,
    decoder: &Decoder<f32>,
    viewport: &Viewport,
    meta: &[(&str, String)],
) -> Result<()> {
    let mut ck = Checkpoint::new();
    for (name, tensor) in encoder.param_names().iter().zip(encoder.params()) {
        ck.add_tensor_f32(name, tensor);
    }
    for (name, tensor) in decoder.param_names().iter().zip(decoder.params()) {
        ck.add_tensor_f32(name, tensor);
    }
    ck.add_f64(
        "meta.viewport",
        &[6],
        vec![
            viewport.min_x,
            viewport.min_y,
            viewport.world_width,
            viewport.world_height,
            viewport.width as f64,
            viewport.height as f64,
        ],
    );
    ck.set_meta("kind", "autoencoder");
    ck.set_meta(
        "ae_spec",
        toml::to_string(encoder.spec()).map_err(|e| Error::Format(e.to_string()))?,
    );
    for (k, v) in meta {
        ck.set_meta(k, v);
    }
    ck.save(path)
}

pub struct LoadedAutoencoder {
    pub encoder: Encoder<f32>,
    pub decoder: Decoder<f32>,
    pub viewport: Viewport,
    pub checkpoint: Checkpoint,
}

pub fn load_autoencoder(path: &Path) -> Result<LoadedAutoencoder> {
    let ck = Checkpoint::load(path)?;
    if ck.meta_str("kind")? != "autoencoder" {
        return Err(Error::Format(format!(
            "{} is not an autoencoder checkpoint",
            path.display()
        )));
    }
    let spec: AutoencoderSpec = toml::from_str(ck.meta_str("ae_spec")?)
        .map_err(|e| Error::Format(format!("bad ae_spec metadata: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut encoder: Encoder<f32> = Encoder::new(&spec, &mut rng)?;
    let mut decoder: Decoder<f32> = Decoder::new(&spec, &mut rng)?;
    copy_params_from(&ck, &encoder.param_names(), &mut encoder.params_mut())?;
    copy_params_from(&ck, &decoder.param_names(), &mut decoder.params_mut())?;
    let vp = ck.get_f64_data("meta.viewport")?;
    if vp.len() != 6 {
        return Err(Error::Format("viewport metadata must have 6 entries".into()));
    }
    let viewport = Viewport {
        min_x: vp[0],
        min_y: vp[1],
        world_width: vp[2],
        world_height: vp[3],
        width: vp[4] as usize,
        height: vp[5] as usize,
    };
    Ok(LoadedAutoencoder {
        encoder,
        decoder,
        viewport,
        checkpoint: ck,
    })
}

pub fn save_rnn(
    path: &Path,
    rnn: &RnnHead<f32>,
    sensor_norm: &Normalizer,
    latent_norm: &Normalizer,
    mask: &FeatureMask,
    meta: &[(&str, String)],
) -> Result<()> {
    let mut ck = Checkpoint::new();
    for (name, tensor) in rnn.param_names().iter().zip(rnn.params()) {
        ck.add_tensor_f32(name, tensor);
    }
    ck.add_f64("norm.sensor.min", &[sensor_norm.min.len()], sensor_norm.min.clone());
    ck.add_f64("norm.sensor.max", &[sensor_norm.max.len()], sensor_norm.max.clone());
    ck.add_f64("norm.latent.min", &[latent_norm.min.len()], latent_norm.min.clone());
    ck.add_f64("norm.latent.max", &[latent_norm.max.len()], latent_norm.max.clone());
    ck.add_f32(
        "mask.active",
        &[mask.active.len()],
        mask.active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect(),
    );
    ck.add_f64("mask.means", &[mask.means.len()], mask.means.clone());
    ck.set_meta("kind", "rnn");
    ck.set_meta(
        "rnn_spec",
        toml::to_string(rnn.spec()).map_err(|e| Error::Format(e.to_string()))?,
    );
    for (k, v) in meta {
        ck.set_meta(k, v);
    }
    ck.save(path)
}

pub struct LoadedRnn {
    pub rnn: RnnHead<f32>,
    pub sensor_norm: Normalizer,
    pub latent_norm: Normalizer,
    pub mask: FeatureMask,
    pub checkpoint: Checkpoint,
}

pub fn load_rnn(path: &Path) -> Result<LoadedRnn> {
    let ck = Checkpoint::load(path)?;
    if ck.meta_str("kind")? != "rnn" {
        return Err(Error::Format(format!(
            "{} is not an rnn checkpoint",
            path.display()
        )));
    }
    let spec: RnnSpec = toml::from_str(ck.meta_str("rnn_spec")?)
        .map_err(|e| Error::Format(format!("bad rnn_spec metadata: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut rnn: RnnHead<f32> = RnnHead::new(&spec, &mut rng)?;
    copy_params_from(&ck, &rnn.param_names(), &mut rnn.params_mut())?;
    let sensor_norm = Normalizer {
        min: ck.get_f64_data("norm.sensor.min")?,
        max: ck.get_f64_data("norm.sensor.max")?,
    };
    let latent_norm = Normalizer {
        min: ck.get_f64_data("norm.latent.min")?,
        max: ck.get_f64_data("norm.latent.max")?,
    };
    let mask = FeatureMask {
        active: ck
            .get_f32("mask.active")?
            .data()
            .iter()
            .map(|&v| v > 0.5)
            .collect(),
        means: ck.get_f64_data("mask.means")?,
    };
    if mask.active.len() != mask.means.len() || mask.active.len() != latent_norm.min.len() {
        return Err(Error::Format("mask/normalizer metadata sizes disagree".into()));
    }
    Ok(LoadedRnn {
        rnn,
        sensor_norm,
        latent_norm,
        mask,
        checkpoint: ck,
    })
}
