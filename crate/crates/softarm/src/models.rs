//! The three networks and their composition.
//!
//! Encoder and decoder form a stacked convolutional autoencoder over the
//! 84×52 binary frames; a single-layer LSTM maps windows of stretch-sensor
//! readings to the masked, normalized latent code; the imagination path chains
//! the LSTM readout through unmasking and denormalization into the decoder.

mod autoencoder;
mod checkpoint;
mod imagine;
mod persist;
mod rnn;

pub use autoencoder::{AutoencoderSpec, Decoder, DecoderCache, Encoder, EncoderCache};
pub use checkpoint::{Checkpoint, TensorPayload};
pub use imagine::imagine;
pub use persist::{load_autoencoder, load_rnn, save_autoencoder, save_rnn, LoadedAutoencoder,
    LoadedRnn};
pub use rnn::{RnnHead, RnnSpec, RnnWindowCache};
