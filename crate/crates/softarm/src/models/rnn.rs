use crate::nn::{logistic_scalar, Activation, Dense, DenseCache, LstmCell, LstmWindowCache, Real,
    Tensor};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Sensor-to-latent network: one LSTM layer consuming the lookback window in
/// time order, with a logistic readout from the final hidden state to the
/// active (unmasked) latent features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnSpec {
    pub input_size: usize,
    pub hidden_size: usize,
    pub lookback: usize,
    /// Number of active latent features the readout predicts.
    pub output_size: usize,
}

impl RnnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.hidden_size == 0 || self.output_size == 0 {
            return Err(Error::Config("rnn sizes must be positive".into()));
        }
        if self.lookback == 0 {
            return Err(Error::Config("lookback must be positive".into()));
        }
        Ok(())
    }
}

impl Default for RnnSpec {
    fn default() -> Self {
        RnnSpec {
            input_size: 4,
            hidden_size: 64,
            lookback: 6,
            output_size: 32,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RnnHead<R: Real> {
    pub cell: LstmCell<R>,
    pub readout: Dense<R>,
    spec: RnnSpec,
}

pub struct RnnWindowCache<R: Real> {
    lstm: LstmWindowCache<R>,
    readout: DenseCache<R>,
}

impl<R: Real> RnnHead<R> {
    pub fn new<G: Rng>(spec: &RnnSpec, rng: &mut G) -> Result<Self> {
        spec.validate()?;
        Ok(RnnHead {
            cell: LstmCell::new(spec.input_size, spec.hidden_size, rng),
            readout: Dense::new(spec.hidden_size, spec.output_size, Activation::Identity, rng),
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &RnnSpec {
        &self.spec
    }

    fn window_rows<'a>(&self, window: &'a [R]) -> Result<Vec<&'a [R]>> {
        let n = self.spec.input_size;
        if window.len() != self.spec.lookback * n {
            return Err(Error::Shape(format!(
                "window length {} != lookback {} × input {}",
                window.len(),
                self.spec.lookback,
                n
            )));
        }
        Ok(window.chunks_exact(n).collect())
    }

    /// Forward pass to readout logits over one flattened window
    /// (`lookback × input_size`, time-major).
    pub fn forward(&self, window: &[R]) -> Result<(Tensor<R>, RnnWindowCache<R>)> {
        let rows = self.window_rows(window)?;
        let (h, lstm_cache) = self.cell.forward_window(&rows)?;
        let h_tensor = Tensor::from_vec(&[self.spec.hidden_size], h)?;
        let (logits, readout_cache) = self.readout.forward(&h_tensor)?;
        Ok((
            logits,
            RnnWindowCache {
                lstm: lstm_cache,
                readout: readout_cache,
            },
        ))
    }

    /// Masked latent prediction in `(0,1)^output_size`.
    pub fn predict(&self, window: &[R]) -> Result<Tensor<R>> {
        let (mut logits, _) = self.forward(window)?;
        for v in logits.data_mut() {
            *v = logistic_scalar(*v);
        }
        Ok(logits)
    }

    /// Accumulate parameter gradients (layout matching [`RnnHead::params`]);
    /// `dlogits` is the loss gradient at the readout logits.
    pub fn backward(
        &self,
        cache: &RnnWindowCache<R>,
        dlogits: &Tensor<R>,
        grads: &mut [Tensor<R>],
    ) -> Result<()> {
        debug_assert_eq!(grads.len(), 4);
        let (lstm_grads, readout_grads) = grads.split_at_mut(2);
        let (dw_r, db_r) = {
            let (a, b) = readout_grads.split_at_mut(1);
            (&mut a[0], &mut b[0])
        };
        let dh = self.readout.backward(&cache.readout, dlogits, dw_r, db_r)?;
        let (dw_l, db_l) = {
            let (a, b) = lstm_grads.split_at_mut(1);
            (&mut a[0], &mut b[0])
        };
        self.cell.backward_window(&cache.lstm, dh.data(), dw_l, db_l)
    }

    pub fn param_count(&self) -> usize {
        4
    }

    pub fn params(&self) -> Vec<&Tensor<R>> {
        vec![
            &self.cell.weights,
            &self.cell.bias,
            &self.readout.weights,
            &self.readout.bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<R>> {
        vec![
            &mut self.cell.weights,
            &mut self.cell.bias,
            &mut self.readout.weights,
            &mut self.readout.bias,
        ]
    }

    pub fn param_names(&self) -> Vec<String> {
        vec![
            "rnn.lstm.weights".into(),
            "rnn.lstm.bias".into(),
            "rnn.readout.weights".into(),
            "rnn.readout.bias".into(),
        ]
    }

    pub fn grad_zeros(&self) -> Vec<Tensor<R>> {
        self.params().iter().map(|p| Tensor::zeros(p.shape())).collect()
    }
}
