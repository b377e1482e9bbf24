use super::act::Activation;
use super::init::fan_in_uniform;
use super::linalg::{col2im_acc, im2col, mm_abt_acc, mm_acc, mm_atb_acc};
use super::real::Real;
use super::tensor::Tensor;
use crate::{Error, Result};
use rand::Rng;

/// 2D convolution (cross-correlation) with symmetric zero padding, followed by
/// an elementwise activation.
///
/// Weights are `(out_ch, in_ch·kh·kw)` row-major, equivalent to kernels of
/// shape `(out_ch, in_ch, kh, kw)`. Output spatial size is
/// `(h + 2·pad − kh) / stride + 1` with floor division.
#[derive(Clone, Debug)]
pub struct Conv2d<R: Real> {
    pub weights: Tensor<R>,
    pub bias: Tensor<R>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct Conv2dCache<R: Real> {
    in_h: usize,
    in_w: usize,
    cols: Vec<R>,
    /// Layer output after activation.
    out: Tensor<R>,
}

impl<R: Real> Conv2d<R> {
    pub fn new<G: Rng>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        activation: Activation,
        rng: &mut G,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        Conv2d {
            weights: Tensor::from_vec(
                &[out_ch, in_ch * kernel * kernel],
                fan_in_uniform(rng, fan_in, out_ch * in_ch * kernel * kernel),
            )
            .expect("weight shape"),
            bias: Tensor::zeros(&[out_ch]),
            in_ch,
            out_ch,
            kh: kernel,
            kw: kernel,
            stride,
            pad,
            activation,
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if h + 2 * self.pad < self.kh || w + 2 * self.pad < self.kw {
            return Err(Error::Shape(format!(
                "conv input {h}x{w} smaller than kernel {}x{} with pad {}",
                self.kh, self.kw, self.pad
            )));
        }
        Ok((
            (h + 2 * self.pad - self.kh) / self.stride + 1,
            (w + 2 * self.pad - self.kw) / self.stride + 1,
        ))
    }

    fn check_input(&self, x: &Tensor<R>) -> Result<(usize, usize)> {
        match *x.shape() {
            [c, h, w] if c == self.in_ch => Ok((h, w)),
            _ => Err(Error::Shape(format!(
                "conv expected ({}, h, w) input, got {:?}",
                self.in_ch,
                x.shape()
            ))),
        }
    }

    pub fn forward(&self, x: &Tensor<R>) -> Result<(Tensor<R>, Conv2dCache<R>)> {
        let (h, w) = self.check_input(x)?;
        let (oh, ow) = self.out_dims(h, w)?;
        let k = self.in_ch * self.kh * self.kw;
        let n = oh * ow;
        let mut cols = vec![R::zero(); k * n];
        im2col(
            x.data(),
            self.in_ch,
            h,
            w,
            self.kh,
            self.kw,
            self.stride,
            self.pad,
            oh,
            ow,
            &mut cols,
        );
        let mut out = Tensor::zeros(&[self.out_ch, oh, ow]);
        {
            let data = out.data_mut();
            for (o, &b) in self.bias.data().iter().enumerate() {
                data[o * n..(o + 1) * n].fill(b);
            }
            mm_acc(self.weights.data(), &cols, data, self.out_ch, k, n);
        }
        self.activation.apply(out.data_mut());
        let cache = Conv2dCache {
            in_h: h,
            in_w: w,
            cols,
            out: out.clone(),
        };
        Ok((out, cache))
    }

    /// Accumulate parameter gradients into `dw`/`db` and return the input
    /// gradient. `dy` is the loss gradient w.r.t. the layer output.
    pub fn backward(
        &self,
        cache: &Conv2dCache<R>,
        dy: &Tensor<R>,
        dw: &mut Tensor<R>,
        db: &mut Tensor<R>,
    ) -> Result<Tensor<R>> {
        if dy.shape() != cache.out.shape() {
            return Err(Error::Shape(format!(
                "conv backward: dy shape {:?} does not match output {:?}",
                dy.shape(),
                cache.out.shape()
            )));
        }
        let (oh, ow) = (cache.out.shape()[1], cache.out.shape()[2]);
        let k = self.in_ch * self.kh * self.kw;
        let n = oh * ow;

        let mut dz = dy.clone();
        self.activation.backprop(cache.out.data(), dz.data_mut());

        // db
        for (o, db_o) in db.data_mut().iter_mut().enumerate() {
            let mut acc = R::zero();
            for &v in &dz.data()[o * n..(o + 1) * n] {
                acc += v;
            }
            *db_o += acc;
        }
        // dW += dz · colsᵀ
        mm_abt_acc(dz.data(), &cache.cols, dw.data_mut(), self.out_ch, n, k);
        // dcols = Wᵀ · dz, then scatter back to the input grid.
        let mut dcols = vec![R::zero(); k * n];
        mm_atb_acc(self.weights.data(), dz.data(), &mut dcols, self.out_ch, k, n);
        let mut dx = Tensor::zeros(&[self.in_ch, cache.in_h, cache.in_w]);
        col2im_acc(
            &dcols,
            self.in_ch,
            cache.in_h,
            cache.in_w,
            self.kh,
            self.kw,
            self.stride,
            self.pad,
            oh,
            ow,
            dx.data_mut(),
        );
        Ok(dx)
    }

    /// Forward pass without keeping a backward cache.
    pub fn infer(&self, x: &Tensor<R>) -> Result<Tensor<R>> {
        self.forward(x).map(|(y, _)| y)
    }
}

/// Transposed 2D convolution: the exact adjoint of [`Conv2d`] with the same
/// kernel layout, stride and padding, cropped to a declared output size.
///
/// Weights are `(in_ch, out_ch·kh·kw)` row-major. A `Conv2d` mapping
/// `out_ch → in_ch` channels with identical stride/pad and the same flat
/// weight data is the adjoint map.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d<R: Real> {
    pub weights: Tensor<R>,
    pub bias: Tensor<R>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct ConvTranspose2dCache<R: Real> {
    in_h: usize,
    in_w: usize,
    input: Tensor<R>,
    out: Tensor<R>,
}

impl<R: Real> ConvTranspose2d<R> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<G: Rng>(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        out_h: usize,
        out_w: usize,
        activation: Activation,
        rng: &mut G,
    ) -> Self {
        let fan_in = in_ch * kernel * kernel;
        ConvTranspose2d {
            weights: Tensor::from_vec(
                &[in_ch, out_ch * kernel * kernel],
                fan_in_uniform(rng, fan_in, in_ch * out_ch * kernel * kernel),
            )
            .expect("weight shape"),
            bias: Tensor::zeros(&[out_ch]),
            in_ch,
            out_ch,
            kh: kernel,
            kw: kernel,
            stride,
            pad,
            out_h,
            out_w,
            activation,
        }
    }

    fn check_input(&self, x: &Tensor<R>) -> Result<(usize, usize)> {
        let (h, w) = match *x.shape() {
            [c, h, w] if c == self.in_ch => (h, w),
            _ => {
                return Err(Error::Shape(format!(
                    "transposed conv expected ({}, h, w) input, got {:?}",
                    self.in_ch,
                    x.shape()
                )))
            }
        };
        // Largest index the scatter can produce; the declared output size may
        // crop the excess on the right/bottom but must not exceed it.
        let max_h = (h - 1) * self.stride + self.kh - self.pad;
        let max_w = (w - 1) * self.stride + self.kw - self.pad;
        if self.out_h > max_h || self.out_w > max_w {
            return Err(Error::Shape(format!(
                "declared output {}x{} exceeds producible {}x{}",
                self.out_h, self.out_w, max_h, max_w
            )));
        }
        Ok((h, w))
    }

    pub fn forward(&self, x: &Tensor<R>) -> Result<(Tensor<R>, ConvTranspose2dCache<R>)> {
        let (h, w) = self.check_input(x)?;
        let k2 = self.out_ch * self.kh * self.kw;
        let n_in = h * w;
        // M = Wᵀ · x, then scatter M into the (cropped) output plane.
        let mut m = vec![R::zero(); k2 * n_in];
        mm_atb_acc(self.weights.data(), x.data(), &mut m, self.in_ch, k2, n_in);
        let mut out = Tensor::zeros(&[self.out_ch, self.out_h, self.out_w]);
        {
            let data = out.data_mut();
            for (o, &b) in self.bias.data().iter().enumerate() {
                data[o * self.out_h * self.out_w..(o + 1) * self.out_h * self.out_w].fill(b);
            }
            col2im_acc(
                &m,
                self.out_ch,
                self.out_h,
                self.out_w,
                self.kh,
                self.kw,
                self.stride,
                self.pad,
                h,
                w,
                data,
            );
        }
        self.activation.apply(out.data_mut());
        let cache = ConvTranspose2dCache {
            in_h: h,
            in_w: w,
            input: x.clone(),
            out: out.clone(),
        };
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &ConvTranspose2dCache<R>,
        dy: &Tensor<R>,
        dw: &mut Tensor<R>,
        db: &mut Tensor<R>,
    ) -> Result<Tensor<R>> {
        if dy.shape() != cache.out.shape() {
            return Err(Error::Shape(format!(
                "transposed conv backward: dy shape {:?} does not match output {:?}",
                dy.shape(),
                cache.out.shape()
            )));
        }
        let k2 = self.out_ch * self.kh * self.kw;
        let n_in = cache.in_h * cache.in_w;
        let plane = self.out_h * self.out_w;

        let mut dz = dy.clone();
        self.activation.backprop(cache.out.data(), dz.data_mut());

        for (o, db_o) in db.data_mut().iter_mut().enumerate() {
            let mut acc = R::zero();
            for &v in &dz.data()[o * plane..(o + 1) * plane] {
                acc += v;
            }
            *db_o += acc;
        }
        // dM = gather(dz) over the scatter geometry, i.e. im2col of dz.
        let mut dm = vec![R::zero(); k2 * n_in];
        im2col(
            dz.data(),
            self.out_ch,
            self.out_h,
            self.out_w,
            self.kh,
            self.kw,
            self.stride,
            self.pad,
            cache.in_h,
            cache.in_w,
            &mut dm,
        );
        // dW += x · dMᵀ
        mm_abt_acc(cache.input.data(), &dm, dw.data_mut(), self.in_ch, n_in, k2);
        // dx = W · dM
        let mut dx = Tensor::zeros(&[self.in_ch, cache.in_h, cache.in_w]);
        mm_acc(self.weights.data(), &dm, dx.data_mut(), self.in_ch, k2, n_in);
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

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut conv: Conv2d<f64> =
            Conv2d::new(1, 1, 1, 1, 0, Activation::Identity, &mut rng(0));
        conv.weights.data_mut()[0] = 1.0;
        conv.bias.data_mut()[0] = 0.0;
        let x = Tensor::from_f64_slice(&[1, 3, 4], &(0..12).map(|i| i as f64).collect::<Vec<_>>())
            .unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 4]);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_input_yields_bias() {
        let mut conv: Conv2d<f64> = Conv2d::new(2, 3, 3, 2, 1, Activation::Identity, &mut rng(1));
        conv.bias.data_mut().copy_from_slice(&[0.5, -1.0, 2.0]);
        let x = Tensor::zeros(&[2, 6, 6]);
        let (y, _) = conv.forward(&x).unwrap();
        let (oh, ow) = conv.out_dims(6, 6).unwrap();
        assert_eq!(y.shape(), &[3, oh, ow]);
        for o in 0..3 {
            for &v in &y.data()[o * oh * ow..(o + 1) * oh * ow] {
                assert_eq!(v, conv.bias.data()[o]);
            }
        }
    }

    #[test]
    fn stride_two_output_chain_for_frame_sizes() {
        let conv: Conv2d<f64> = Conv2d::new(1, 1, 3, 2, 1, Activation::Identity, &mut rng(2));
        let mut h = 52;
        let mut w = 84;
        let mut hs = vec![h];
        let mut ws = vec![w];
        for _ in 0..4 {
            let (oh, ow) = conv.out_dims(h, w).unwrap();
            hs.push(oh);
            ws.push(ow);
            h = oh;
            w = ow;
        }
        assert_eq!(ws, vec![84, 42, 21, 11, 6]);
        assert_eq!(hs, vec![52, 26, 13, 7, 4]);
    }

    #[test]
    fn transpose_of_unit_kernel_upsamples_to_block() {
        let mut tc: ConvTranspose2d<f64> =
            ConvTranspose2d::new(1, 1, 2, 2, 0, 2, 2, Activation::Identity, &mut rng(3));
        tc.weights.data_mut().fill(1.0);
        tc.bias.fill(0.0);
        let x = Tensor::from_f64_slice(&[1, 1, 1], &[1.0]).unwrap();
        let (y, _) = tc.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn transpose_forward_equals_conv_backward_input() {
        // Shared flat kernel data: conv maps 3→2 channels, its adjoint maps 2→3.
        let conv: Conv2d<f64> = Conv2d::new(3, 2, 3, 2, 1, Activation::Identity, &mut rng(4));
        let mut tc: ConvTranspose2d<f64> =
            ConvTranspose2d::new(2, 3, 3, 2, 1, 7, 9, Activation::Identity, &mut rng(5));
        tc.weights = conv.weights.clone();
        tc.bias.fill(0.0);

        let x = Tensor::from_f64_slice(
            &[3, 7, 9],
            &(0..3 * 7 * 9).map(|i| ((i * 31 % 17) as f64) / 7.0 - 1.0).collect::<Vec<_>>(),
        )
        .unwrap();
        let (y, cache) = conv.forward(&x).unwrap();

        let dy = Tensor::from_f64_slice(
            &[2, 4, 5],
            &(0..2 * 4 * 5).map(|i| ((i * 13 % 23) as f64) / 11.0 - 1.0).collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(y.shape(), dy.shape());
        let mut dw = Tensor::zeros(&[2, 27]);
        let mut db = Tensor::zeros(&[2]);
        let dx = conv.backward(&cache, &dy, &mut dw, &mut db).unwrap();

        let (adj, _) = tc.forward(&dy).unwrap();
        assert_eq!(adj.shape(), dx.shape());
        for (a, b) in adj.data().iter().zip(dx.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_inner_products() {
        // <conv(x), y> == <x, convT(y)> with shared kernels and zero biases.
        for seed in 0..5u64 {
            let mut conv: Conv2d<f64> =
                Conv2d::new(2, 4, 3, 2, 1, Activation::Identity, &mut rng(seed));
            conv.bias.fill(0.0);
            let mut tc: ConvTranspose2d<f64> =
                ConvTranspose2d::new(4, 2, 3, 2, 1, 6, 8, Activation::Identity, &mut rng(seed + 100));
            tc.weights = conv.weights.clone();
            tc.bias.fill(0.0);

            let mut r = rng(seed + 200);
            let x = Tensor::from_vec(
                &[2, 6, 8],
                (0..2 * 6 * 8).map(|_| r.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let (cx, _) = conv.forward(&x).unwrap();
            let y = Tensor::from_vec(
                cx.shape(),
                (0..cx.len()).map(|_| r.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let (ty, _) = tc.forward(&y).unwrap();
            let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(ty.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-9, "seed {seed}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn oversized_crop_rejected() {
        let tc: ConvTranspose2d<f64> =
            ConvTranspose2d::new(1, 1, 3, 2, 1, 50, 50, Activation::Identity, &mut rng(6));
        let x = Tensor::zeros(&[1, 4, 4]);
        assert!(matches!(tc.forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let conv: Conv2d<f64> = Conv2d::new(2, 1, 3, 1, 1, Activation::Identity, &mut rng(7));
        let x = Tensor::zeros(&[3, 5, 5]);
        assert!(matches!(conv.forward(&x), Err(Error::Shape(_))));
    }
}
