use crate::nn::{Activation, Conv2d, Conv2dCache, ConvTranspose2d, ConvTranspose2dCache, Dense,
    DenseCache, Real, Tensor};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Architecture of the stacked convolutional autoencoder.
///
/// Encoder: one stride-2 convolution per entry of `conv_channels` (ReLU),
/// then a dense layer to `latent` logistic units — five hidden layers with the
/// defaults. The decoder mirrors it: dense back to the bottleneck volume,
/// then transposed convolutions cropped so the output is exactly
/// `height × width` again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub height: usize,
    pub width: usize,
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub latent: usize,
}

impl Default for AutoencoderSpec {
    fn default() -> Self {
        AutoencoderSpec {
            height: 52,
            width: 84,
            conv_channels: vec![8, 16, 32, 32],
            kernel: 3,
            stride: 2,
            pad: 1,
            latent: 32,
        }
    }
}

impl AutoencoderSpec {
    /// Spatial sizes after each encoder stage, starting with the input.
    pub fn spatial_chain(&self) -> Vec<(usize, usize)> {
        let mut chain = vec![(self.height, self.width)];
        let (mut h, mut w) = (self.height, self.width);
        for _ in &self.conv_channels {
            h = (h + 2 * self.pad - self.kernel) / self.stride + 1;
            w = (w + 2 * self.pad - self.kernel) / self.stride + 1;
            chain.push((h, w));
        }
        chain
    }

    /// Flattened size of the deepest feature map.
    pub fn bottleneck_len(&self) -> usize {
        let (h, w) = *self.spatial_chain().last().unwrap();
        self.conv_channels.last().copied().unwrap_or(1) * h * w
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() {
            return Err(Error::Config("autoencoder needs at least one conv stage".into()));
        }
        if self.latent == 0 {
            return Err(Error::Config("latent size must be positive".into()));
        }
        if self.stride == 0 || self.kernel == 0 {
            return Err(Error::Config("kernel and stride must be positive".into()));
        }
        let (mut h, mut w) = (self.height, self.width);
        for ch in &self.conv_channels {
            if *ch == 0 {
                return Err(Error::Config("conv channel counts must be positive".into()));
            }
            if h + 2 * self.pad < self.kernel || w + 2 * self.pad < self.kernel {
                return Err(Error::Config(format!(
                    "feature map {h}x{w} too small for kernel {}",
                    self.kernel
                )));
            }
            h = (h + 2 * self.pad - self.kernel) / self.stride + 1;
            w = (w + 2 * self.pad - self.kernel) / self.stride + 1;
        }
        Ok(())
    }
}

/// Convolutional encoder: binary frame in, logistic latent code out.
#[derive(Clone, Debug)]
pub struct Encoder<R: Real> {
    pub convs: Vec<Conv2d<R>>,
    pub dense: Dense<R>,
    spec: AutoencoderSpec,
}

pub struct EncoderCache<R: Real> {
    conv_caches: Vec<Conv2dCache<R>>,
    dense_cache: DenseCache<R>,
}

impl<R: Real> Encoder<R> {
    pub fn new<G: Rng>(spec: &AutoencoderSpec, rng: &mut G) -> Result<Self> {
        spec.validate()?;
        let mut convs = Vec::with_capacity(spec.conv_channels.len());
        let mut in_ch = 1;
        for &out_ch in &spec.conv_channels {
            convs.push(Conv2d::new(
                in_ch,
                out_ch,
                spec.kernel,
                spec.stride,
                spec.pad,
                Activation::Relu,
                rng,
            ));
            in_ch = out_ch;
        }
        let dense = Dense::new(spec.bottleneck_len(), spec.latent, Activation::Logistic, rng);
        Ok(Encoder {
            convs,
            dense,
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &AutoencoderSpec {
        &self.spec
    }

    fn check_input(&self, image: &Tensor<R>) -> Result<()> {
        let want = [1, self.spec.height, self.spec.width];
        if image.shape() != want {
            return Err(Error::Shape(format!(
                "encoder expected {want:?} image, got {:?}",
                image.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, image: &Tensor<R>) -> Result<(Tensor<R>, EncoderCache<R>)> {
        self.check_input(image)?;
        let mut conv_caches = Vec::with_capacity(self.convs.len());
        let mut x = image.clone();
        for conv in &self.convs {
            let (y, cache) = conv.forward(&x)?;
            conv_caches.push(cache);
            x = y;
        }
        let flat = Tensor::from_vec(&[x.len()], x.data().to_vec())?;
        let (latent, dense_cache) = self.dense.forward(&flat)?;
        Ok((
            latent,
            EncoderCache {
                conv_caches,
                dense_cache,
            },
        ))
    }

    /// Deterministic forward pass; the latent lies in `(0,1)^latent`.
    pub fn encode(&self, image: &Tensor<R>) -> Result<Tensor<R>> {
        self.forward(image).map(|(latent, _)| latent)
    }

    /// Accumulate parameter gradients (layout matching [`Encoder::params`])
    /// and return the gradient w.r.t. the input image.
    pub fn backward(
        &self,
        cache: &EncoderCache<R>,
        dlatent: &Tensor<R>,
        grads: &mut [Tensor<R>],
    ) -> Result<Tensor<R>> {
        debug_assert_eq!(grads.len(), self.param_count());
        let n = self.convs.len();
        let (dw_dense, db_dense) = {
            let (a, b) = grads[2 * n..].split_at_mut(1);
            (&mut a[0], &mut b[0])
        };
        let dflat = self
            .dense
            .backward(&cache.dense_cache, dlatent, dw_dense, db_dense)?;

        // Reshape the flat gradient back onto the deepest feature map.
        let (h, w) = *self.spec.spatial_chain().last().unwrap();
        let deep_ch = *self.spec.conv_channels.last().unwrap();
        let mut dy = Tensor::from_vec(&[deep_ch, h, w], dflat.data().to_vec())?;
        for (i, conv) in self.convs.iter().enumerate().rev() {
            let (dw, db) = {
                let (a, b) = grads[2 * i..2 * i + 2].split_at_mut(1);
                (&mut a[0], &mut b[0])
            };
            dy = conv.backward(&cache.conv_caches[i], &dy, dw, db)?;
        }
        Ok(dy)
    }

    pub fn param_count(&self) -> usize {
        2 * (self.convs.len() + 1)
    }

    pub fn params(&self) -> Vec<&Tensor<R>> {
        let mut out = Vec::with_capacity(self.param_count());
        for conv in &self.convs {
            out.push(&conv.weights);
            out.push(&conv.bias);
        }
        out.push(&self.dense.weights);
        out.push(&self.dense.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<R>> {
        let mut out = Vec::with_capacity(2 * (self.convs.len() + 1));
        for conv in &mut self.convs {
            out.push(&mut conv.weights);
            out.push(&mut conv.bias);
        }
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.param_count());
        for i in 0..self.convs.len() {
            out.push(format!("encoder.conv{i}.weights"));
            out.push(format!("encoder.conv{i}.bias"));
        }
        out.push("encoder.dense.weights".into());
        out.push("encoder.dense.bias".into());
        out
    }

    pub fn grad_zeros(&self) -> Vec<Tensor<R>> {
        self.params().iter().map(|p| Tensor::zeros(p.shape())).collect()
    }
}

/// Convolutional decoder: latent code in, `height × width` logits out.
#[derive(Clone, Debug)]
pub struct Decoder<R: Real> {
    pub dense: Dense<R>,
    pub deconvs: Vec<ConvTranspose2d<R>>,
    spec: AutoencoderSpec,
}

pub struct DecoderCache<R: Real> {
    dense_cache: DenseCache<R>,
    deconv_caches: Vec<ConvTranspose2dCache<R>>,
}

impl<R: Real> Decoder<R> {
    pub fn new<G: Rng>(spec: &AutoencoderSpec, rng: &mut G) -> Result<Self> {
        spec.validate()?;
        let dense = Dense::new(spec.latent, spec.bottleneck_len(), Activation::Relu, rng);
        let chain = spec.spatial_chain();
        let mut deconvs = Vec::with_capacity(spec.conv_channels.len());
        // Walk the encoder stages in reverse; the final stage emits one
        // channel of logits, inner stages use ReLU.
        for i in (0..spec.conv_channels.len()).rev() {
            let in_ch = spec.conv_channels[i];
            let out_ch = if i == 0 { 1 } else { spec.conv_channels[i - 1] };
            let (out_h, out_w) = chain[i];
            let activation = if i == 0 {
                Activation::Identity
            } else {
                Activation::Relu
            };
            deconvs.push(ConvTranspose2d::new(
                in_ch,
                out_ch,
                spec.kernel,
                spec.stride,
                spec.pad,
                out_h,
                out_w,
                activation,
                rng,
            ));
        }
        Ok(Decoder {
            dense,
            deconvs,
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &AutoencoderSpec {
        &self.spec
    }

    /// Forward pass to pre-logistic output logits of shape `(1, height, width)`.
    pub fn forward(&self, latent: &Tensor<R>) -> Result<(Tensor<R>, DecoderCache<R>)> {
        if latent.len() != self.spec.latent {
            return Err(Error::Shape(format!(
                "decoder expected latent of length {}, got {}",
                self.spec.latent,
                latent.len()
            )));
        }
        let (flat, dense_cache) = self.dense.forward(latent)?;
        let (h, w) = *self.spec.spatial_chain().last().unwrap();
        let deep_ch = *self.spec.conv_channels.last().unwrap();
        let mut x = Tensor::from_vec(&[deep_ch, h, w], flat.data().to_vec())?;
        let mut deconv_caches = Vec::with_capacity(self.deconvs.len());
        for deconv in &self.deconvs {
            let (y, cache) = deconv.forward(&x)?;
            deconv_caches.push(cache);
            x = y;
        }
        Ok((
            x,
            DecoderCache {
                dense_cache,
                deconv_caches,
            },
        ))
    }

    /// Probability image in `(0,1)`, exactly `height × width`.
    pub fn decode(&self, latent: &Tensor<R>) -> Result<Tensor<R>> {
        let (mut logits, _) = self.forward(latent)?;
        for v in logits.data_mut() {
            *v = crate::nn::logistic_scalar(*v);
        }
        Ok(logits)
    }

    /// Accumulate parameter gradients (layout matching [`Decoder::params`]);
    /// `dlogits` is the loss gradient at the pre-logistic output. Returns the
    /// gradient w.r.t. the latent input.
    pub fn backward(
        &self,
        cache: &DecoderCache<R>,
        dlogits: &Tensor<R>,
        grads: &mut [Tensor<R>],
    ) -> Result<Tensor<R>> {
        debug_assert_eq!(grads.len(), self.param_count());
        let mut dy = dlogits.clone();
        for (i, deconv) in self.deconvs.iter().enumerate().rev() {
            let slot = 2 * (i + 1);
            let (dw, db) = {
                let (a, b) = grads[slot..slot + 2].split_at_mut(1);
                (&mut a[0], &mut b[0])
            };
            dy = deconv.backward(&cache.deconv_caches[i], &dy, dw, db)?;
        }
        let dflat = Tensor::from_vec(&[dy.len()], dy.data().to_vec())?;
        let (dw, db) = {
            let (a, b) = grads[0..2].split_at_mut(1);
            (&mut a[0], &mut b[0])
        };
        self.dense.backward(&cache.dense_cache, &dflat, dw, db)
    }

    pub fn param_count(&self) -> usize {
        2 * (self.deconvs.len() + 1)
    }

    pub fn params(&self) -> Vec<&Tensor<R>> {
        let mut out = Vec::with_capacity(self.param_count());
        out.push(&self.dense.weights);
        out.push(&self.dense.bias);
        for deconv in &self.deconvs {
            out.push(&deconv.weights);
            out.push(&deconv.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<R>> {
        let mut out = Vec::with_capacity(2 * (self.deconvs.len() + 1));
        out.push(&mut self.dense.weights);
        out.push(&mut self.dense.bias);
        for deconv in &mut self.deconvs {
            out.push(&mut deconv.weights);
            out.push(&mut deconv.bias);
        }
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.param_count());
        out.push("decoder.dense.weights".into());
        out.push("decoder.dense.bias".into());
        for i in 0..self.deconvs.len() {
            out.push(format!("decoder.deconv{i}.weights"));
            out.push(format!("decoder.deconv{i}.bias"));
        }
        out
    }

    pub fn grad_zeros(&self) -> Vec<Tensor<R>> {
        self.params().iter().map(|p| Tensor::zeros(p.shape())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::bce_with_logits;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_spec_spatial_chain() {
        let spec = AutoencoderSpec::default();
        assert_eq!(
            spec.spatial_chain(),
            vec![(52, 84), (26, 42), (13, 21), (7, 11), (4, 6)]
        );
        assert_eq!(spec.bottleneck_len(), 32 * 4 * 6);
        assert_eq!(spec.pixel_count(), 4368);
    }

    #[test]
    fn encode_decode_shapes_and_ranges() {
        let spec = AutoencoderSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc: Encoder<f32> = Encoder::new(&spec, &mut rng).unwrap();
        let dec: Decoder<f32> = Decoder::new(&spec, &mut rng).unwrap();

        let image = Tensor::from_vec(
            &[1, 52, 84],
            (0..4368).map(|i| ((i % 7) < 3) as u8 as f32).collect(),
        )
        .unwrap();
        let latent = enc.encode(&image).unwrap();
        assert_eq!(latent.shape(), &[32]);
        assert!(latent.data().iter().all(|&v| v > 0.0 && v < 1.0));

        let probs = dec.decode(&latent).unwrap();
        assert_eq!(probs.shape(), &[1, 52, 84]);
        assert_eq!(probs.len(), 4368);
        assert!(probs.data().iter().all(|&v| v > 0.0 && v < 1.0));

        // Determinism.
        let latent2 = enc.encode(&image).unwrap();
        assert_eq!(latent.data(), latent2.data());
        let probs2 = dec.decode(&latent).unwrap();
        assert_eq!(probs.data(), probs2.data());
    }

    #[test]
    fn wrong_shapes_rejected() {
        let spec = AutoencoderSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc: Encoder<f32> = Encoder::new(&spec, &mut rng).unwrap();
        let dec: Decoder<f32> = Decoder::new(&spec, &mut rng).unwrap();
        assert!(enc.encode(&Tensor::zeros(&[1, 52, 83])).is_err());
        assert!(dec.decode(&Tensor::zeros(&[31])).is_err());
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        // Small spec so the full check stays fast.
        let spec = AutoencoderSpec {
            height: 10,
            width: 12,
            conv_channels: vec![2, 3],
            kernel: 3,
            stride: 2,
            pad: 1,
            latent: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc: Encoder<f64> = Encoder::new(&spec, &mut rng).unwrap();
        let dec: Decoder<f64> = Decoder::new(&spec, &mut rng).unwrap();
        let image = Tensor::from_vec(
            &[1, 10, 12],
            (0..120).map(|i| ((i * 13 % 7) as f64) / 7.0).collect(),
        )
        .unwrap();
        let target = Tensor::from_vec(
            &[1, 10, 12],
            (0..120).map(|i| ((i * 5 % 2) as f64)).collect(),
        )
        .unwrap();

        let loss_of = |enc: &Encoder<f64>, dec: &Decoder<f64>| -> f64 {
            let (latent, _) = enc.forward(&image).unwrap();
            let (logits, _) = dec.forward(&latent).unwrap();
            bce_with_logits(&logits, &target).unwrap().0
        };

        let (latent, enc_cache) = enc.forward(&image).unwrap();
        let (logits, dec_cache) = dec.forward(&latent).unwrap();
        let (_, dlogits) = bce_with_logits(&logits, &target).unwrap();
        let mut dec_grads = dec.grad_zeros();
        let dlatent = dec.backward(&dec_cache, &dlogits, &mut dec_grads).unwrap();
        let mut enc_grads = enc.grad_zeros();
        enc.backward(&enc_cache, &dlatent, &mut enc_grads).unwrap();

        // Probe a few parameters from every tensor with central differences.
        let eps = 1e-6;
        let mut worst = 0.0f64;
        for (ti, grad) in enc_grads.iter().enumerate() {
            let stride = (grad.len() / 5).max(1);
            for k in (0..grad.len()).step_by(stride) {
                let mut probe = enc.clone();
                let orig = probe.params()[ti].data()[k];
                probe.params_mut()[ti].data_mut()[k] = orig + eps;
                let plus = loss_of(&probe, &dec);
                probe.params_mut()[ti].data_mut()[k] = orig - eps;
                let minus = loss_of(&probe, &dec);
                let numeric = (plus - minus) / (2.0 * eps);
                let analytic = grad.data()[k];
                let err = (analytic - numeric).abs()
                    / analytic.abs().max(numeric.abs()).max(1e-4);
                worst = worst.max(err);
            }
        }
        for (ti, grad) in dec_grads.iter().enumerate() {
            let stride = (grad.len() / 5).max(1);
            for k in (0..grad.len()).step_by(stride) {
                let mut probe = dec.clone();
                let orig = probe.params()[ti].data()[k];
                probe.params_mut()[ti].data_mut()[k] = orig + eps;
                let plus = loss_of(&enc, &probe);
                probe.params_mut()[ti].data_mut()[k] = orig - eps;
                let minus = loss_of(&enc, &probe);
                let numeric = (plus - minus) / (2.0 * eps);
                let analytic = grad.data()[k];
                let err = (analytic - numeric).abs()
                    / analytic.abs().max(numeric.abs()).max(1e-4);
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-5, "worst end-to-end gradient error {worst}");
    }
}
