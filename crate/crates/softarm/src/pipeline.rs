//! Dataset assembly, normalization, feature masking, training loops and
//! evaluation metrics.
//!
//! Statistics (normalizers, feature mask, early stopping) are fitted on the
//! training split only; the test split steers model selection and the
//! evaluation split is touched exactly once, by [`evaluate`].

mod dataset;
mod evaluate;
mod mask;
mod normalize;
mod split;
mod train;

pub use dataset::{assemble_rnn_dataset, encode_frames, frames_to_matrix, Matrix, RnnDataset,
    RnnDatasets};
pub use evaluate::{evaluate, frame_metrics_csv, latent_trace_csv, EvalArtifacts, EvalMetrics};
pub use mask::FeatureMask;
pub use normalize::Normalizer;
pub use split::{split_indices, SplitSpec};
pub use train::{train_autoencoder, train_rnn, LossCurve, TrainHyper, TrainedAutoencoder, TrainedRnn};
