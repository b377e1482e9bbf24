use super::act::Activation;
use super::init::fan_in_uniform;
use super::linalg::{mm_abt_acc, mm_acc, mm_atb_acc};
use super::real::Real;
use super::tensor::Tensor;
use crate::{Error, Result};
use rand::Rng;

/// Fully connected layer `y = act(W·x + b)` on flattened inputs.
#[derive(Clone, Debug)]
pub struct Dense<R: Real> {
    /// `(out_features, in_features)` row-major.
    pub weights: Tensor<R>,
    pub bias: Tensor<R>,
    pub in_features: usize,
    pub out_features: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct DenseCache<R: Real> {
    input: Tensor<R>,
    out: Tensor<R>,
}

impl<R: Real> Dense<R> {
    pub fn new<G: Rng>(
        in_features: usize,
        out_features: usize,
        activation: Activation,
        rng: &mut G,
    ) -> Self {
        Dense {
            weights: Tensor::from_vec(
                &[out_features, in_features],
                fan_in_uniform(rng, in_features, out_features * in_features),
            )
            .expect("weight shape"),
            bias: Tensor::zeros(&[out_features]),
            in_features,
            out_features,
            activation,
        }
    }

    fn check_input(&self, x: &Tensor<R>) -> Result<()> {
        if x.len() != self.in_features {
            return Err(Error::Shape(format!(
                "dense expected {} inputs, got {}",
                self.in_features,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<R>) -> Result<(Tensor<R>, DenseCache<R>)> {
        self.check_input(x)?;
        let mut out = Tensor::zeros(&[self.out_features]);
        out.data_mut().copy_from_slice(self.bias.data());
        mm_acc(
            self.weights.data(),
            x.data(),
            out.data_mut(),
            self.out_features,
            self.in_features,
            1,
        );
        self.activation.apply(out.data_mut());
        let cache = DenseCache {
            input: x.clone(),
            out: out.clone(),
        };
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &DenseCache<R>,
        dy: &Tensor<R>,
        dw: &mut Tensor<R>,
        db: &mut Tensor<R>,
    ) -> Result<Tensor<R>> {
        if dy.len() != self.out_features {
            return Err(Error::Shape(format!(
                "dense backward: dy length {} does not match {} outputs",
                dy.len(),
                self.out_features
            )));
        }
        let mut dz = dy.clone();
        self.activation.backprop(cache.out.data(), dz.data_mut());
        for (d, &g) in db.data_mut().iter_mut().zip(dz.data()) {
            *d += g;
        }
        // dW += dz ⊗ x
        mm_abt_acc(
            dz.data(),
            cache.input.data(),
            dw.data_mut(),
            self.out_features,
            1,
            self.in_features,
        );
        let mut dx = Tensor::zeros(&[self.in_features]);
        mm_atb_acc(
            self.weights.data(),
            dz.data(),
            dx.data_mut(),
            self.out_features,
            self.in_features,
            1,
        );
        Ok(dx)
    }

    pub fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        self.forward(x).map(|(y, _)| y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_matrix_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer: Dense<f64> = Dense::new(3, 3, Activation::Identity, &mut rng);
        layer.weights.fill(0.0);
        for i in 0..3 {
            layer.weights.data_mut()[i * 3 + i] = 1.0;
        }
        layer.bias.fill(0.0);
        let x = Tensor::from_f64_slice(&[3], &[0.3, -1.2, 7.0]).unwrap();
        let (y, _) = layer.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_input_yields_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer: Dense<f64> = Dense::new(4, 2, Activation::Identity, &mut rng);
        layer.bias.data_mut().copy_from_slice(&[0.25, -3.0]);
        let (y, _) = layer.forward(&Tensor::zeros(&[4])).unwrap();
        assert_eq!(y.data(), &[0.25, -3.0]);
    }

    #[test]
    fn wrong_input_size_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer: Dense<f64> = Dense::new(4, 2, Activation::Identity, &mut rng);
        assert!(layer.forward(&Tensor::zeros(&[5])).is_err());
    }

    #[test]
    fn backward_matches_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer: Dense<f64> = Dense::new(3, 2, Activation::Identity, &mut rng);
        let x = Tensor::from_f64_slice(&[3], &[0.5, -0.25, 1.5]).unwrap();
        let (_, cache) = layer.forward(&x).unwrap();
        let dy = Tensor::from_f64_slice(&[2], &[1.0, -2.0]).unwrap();
        let mut dw = Tensor::zeros(&[2, 3]);
        let mut db = Tensor::zeros(&[2]);
        let dx = layer.backward(&cache, &dy, &mut dw, &mut db).unwrap();
        let w = layer.weights.data();
        for i in 0..3 {
            let expect = w[i] * 1.0 + w[3 + i] * -2.0;
            assert!((dx.data()[i] - expect).abs() < 1e-12);
        }
        for o in 0..2 {
            for i in 0..3 {
                let expect = dy.data()[o] * x.data()[i];
                assert!((dw.data()[o * 3 + i] - expect).abs() < 1e-12);
            }
        }
        assert_eq!(db.data(), dy.data());
    }
}
