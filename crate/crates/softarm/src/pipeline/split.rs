use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Contiguous dataset split: training, test (model selection) and a final
/// evaluation segment, in that order. Defaults are 8500 / 1000 / 500 frames
/// of the 100 s, 0.01 s-step dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub test: usize,
    pub eval: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 8500,
            test: 1000,
            eval: 500,
        }
    }
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.train + self.test + self.eval
    }

    pub fn train_range(&self) -> Range<usize> {
        0..self.train
    }

    pub fn test_range(&self) -> Range<usize> {
        self.train..self.train + self.test
    }

    pub fn eval_range(&self) -> Range<usize> {
        self.train + self.test..self.total()
    }
}

/// Validate that `n_items` aligned timesteps cover the split exactly and
/// return the three disjoint index ranges.
pub fn split_indices(n_items: usize, spec: &SplitSpec) -> Result<(Range<usize>, Range<usize>, Range<usize>)> {
    if spec.train == 0 || spec.test == 0 || spec.eval == 0 {
        return Err(Error::Config("all three splits must be non-empty".into()));
    }
    if n_items != spec.total() {
        return Err(Error::Config(format!(
            "dataset has {n_items} timesteps but the split needs {}",
            spec.total()
        )));
    }
    Ok((spec.train_range(), spec.test_range(), spec.eval_range()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_sizes() {
        let spec = SplitSpec::default();
        let (train, test, eval) = split_indices(10_000, &spec).unwrap();
        assert_eq!(train.len(), 8500);
        assert_eq!(test.len(), 1000);
        assert_eq!(eval.len(), 500);
        assert_eq!(train, 0..8500);
        assert_eq!(test, 8500..9500);
        assert_eq!(eval, 9500..10_000);
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let spec = SplitSpec::default();
        let (train, test, eval) = split_indices(10_000, &spec).unwrap();
        assert_eq!(train.end, test.start);
        assert_eq!(test.end, eval.start);
        assert_eq!(eval.end, 10_000);
        // Concatenating in order reproduces 0..10000.
        let all: Vec<usize> = train.chain(test).chain(eval).collect();
        assert_eq!(all.len(), 10_000);
        assert!(all.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(all[0], 0);
    }

    #[test]
    fn misaligned_length_rejected() {
        assert!(split_indices(9_999, &SplitSpec::default()).is_err());
    }
}
