use super::dataset::Matrix;
use crate::{Error, Result};

/// High-pass feature filter: latent features whose standard deviation over
/// the training split falls below the threshold are masked out of the RNN
/// targets. Their training-set means are stored so the full latent vector can
/// be restored at imagination time.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMask {
    pub active: Vec<bool>,
    pub means: Vec<f64>,
}

impl FeatureMask {
    /// Build from training-split latents (rows × features).
    pub fn build(train_latents: &Matrix, threshold: f64) -> Result<FeatureMask> {
        let n = train_latents.rows;
        let dim = train_latents.cols;
        if n == 0 || dim == 0 {
            return Err(Error::Config("cannot build a feature mask on empty latents".into()));
        }
        let mut means = vec![0.0f64; dim];
        for row in train_latents.iter_rows() {
            for (c, &v) in row.iter().enumerate() {
                means[c] += v as f64;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut var = vec![0.0f64; dim];
        for row in train_latents.iter_rows() {
            for (c, &v) in row.iter().enumerate() {
                let d = v as f64 - means[c];
                var[c] += d * d;
            }
        }
        let active: Vec<bool> = var
            .iter()
            .map(|&v| (v / n as f64).sqrt() >= threshold)
            .collect();
        if active.iter().all(|&a| !a) {
            return Err(Error::Config(format!(
                "feature mask removed all {dim} features at threshold {threshold}"
            )));
        }
        Ok(FeatureMask { active, means })
    }

    pub fn total(&self) -> usize {
        self.active.len()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.active
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| if a { Some(i) } else { None })
            .collect()
    }

    /// Keep only active features of a full-length row.
    pub fn compress(&self, full: &[f64]) -> Vec<f64> {
        full.iter()
            .zip(&self.active)
            .filter_map(|(&v, &a)| if a { Some(v) } else { None })
            .collect()
    }

    /// Restore a full-length latent: active slots from `active_values`, masked
    /// slots from the stored training means.
    pub fn restore(&self, active_values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(active_values.len(), self.active_count());
        let mut out = self.means.clone();
        let mut k = 0usize;
        for (i, &a) in self.active.iter().enumerate() {
            if a {
                out[i] = active_values[k];
                k += 1;
            }
        }
        out
    }
}
