use crate::{Error, Result};

/// Per-channel min-max scaler fitted on training data only.
///
/// `apply` maps the training range onto `[0,1]`; a constant channel maps to
/// 0.5 by convention. `invert(apply(x))` is the identity for non-constant
/// channels; inverting a constant channel returns the constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    /// Fit over rows of `channels` values each.
    pub fn fit<'a, I>(rows: I, channels: usize) -> Result<Normalizer>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut min = vec![f64::MAX; channels];
        let mut max = vec![f64::MIN; channels];
        let mut seen = 0usize;
        for row in rows {
            debug_assert_eq!(row.len(), channels);
            for (c, &v) in row.iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
            seen += 1;
        }
        if seen == 0 {
            return Err(Error::Config("cannot fit a normalizer on empty data".into()));
        }
        Ok(Normalizer { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    pub fn apply_value(&self, channel: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[channel], self.max[channel]);
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    pub fn invert_value(&self, channel: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[channel], self.max[channel]);
        if hi > lo {
            lo + v * (hi - lo)
        } else {
            lo
        }
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (c, (&v, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = self.apply_value(c, v);
        }
    }

    pub fn invert_row(&self, row: &[f64], out: &mut [f64]) {
        for (c, (&v, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = self.invert_value(c, v);
        }
    }
}
