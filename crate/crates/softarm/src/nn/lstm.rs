use super::act::logistic;
use super::init::fan_in_uniform;
use super::real::Real;
use super::tensor::Tensor;
use crate::{Error, Result};
use rand::Rng;

/// Single LSTM cell with combined gate weights.
///
/// `weights` is `(4·hidden, input + hidden)` row-major; the four row blocks
/// are the input gate `i`, forget gate `f`, candidate `g` and output gate `o`.
/// Gates `i`, `f`, `o` are logistic, the candidate is tanh:
/// `c_t = f ⊙ c_prev + i ⊙ g`, `h_t = o ⊙ tanh(c_t)`.
#[derive(Clone, Debug)]
pub struct LstmCell<R: Real> {
    pub weights: Tensor<R>,
    pub bias: Tensor<R>,
    pub input_size: usize,
    pub hidden_size: usize,
}

#[derive(Clone, Debug)]
struct StepCache<R: Real> {
    /// Concatenated `[x_t, h_prev]`.
    xh: Vec<R>,
    c_prev: Vec<R>,
    i: Vec<R>,
    f: Vec<R>,
    g: Vec<R>,
    o: Vec<R>,
    tanh_c: Vec<R>,
}

/// Forward caches over one unrolled window, consumed by backward-through-time.
#[derive(Clone, Debug)]
pub struct LstmWindowCache<R: Real> {
    steps: Vec<StepCache<R>>,
}

impl<R: Real> LstmCell<R> {
    pub fn new<G: Rng>(input_size: usize, hidden_size: usize, rng: &mut G) -> Self {
        let fan_in = input_size + hidden_size;
        LstmCell {
            weights: Tensor::from_vec(
                &[4 * hidden_size, fan_in],
                fan_in_uniform(rng, fan_in, 4 * hidden_size * fan_in),
            )
            .expect("weight shape"),
            bias: Tensor::zeros(&[4 * hidden_size]),
            input_size,
            hidden_size,
        }
    }

    /// Run the cell over a window of inputs starting from zero state and
    /// return the final hidden state.
    pub fn forward_window(&self, window: &[&[R]]) -> Result<(Vec<R>, LstmWindowCache<R>)> {
        let h = self.hidden_size;
        let n_in = self.input_size;
        for (t, x) in window.iter().enumerate() {
            if x.len() != n_in {
                return Err(Error::Shape(format!(
                    "lstm step {t}: input length {} != {n_in}",
                    x.len()
                )));
            }
        }
        let mut h_state = vec![R::zero(); h];
        let mut c_state = vec![R::zero(); h];
        let mut steps = Vec::with_capacity(window.len());
        let w = self.weights.data();
        let b = self.bias.data();
        let fan_in = n_in + h;

        for x in window {
            let mut xh = Vec::with_capacity(fan_in);
            xh.extend_from_slice(x);
            xh.extend_from_slice(&h_state);

            let mut z = vec![R::zero(); 4 * h];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &w[r * fan_in..(r + 1) * fan_in];
                let mut acc = b[r];
                for (wv, xv) in row.iter().zip(&xh) {
                    acc += *wv * *xv;
                }
                *zr = acc;
            }

            let mut i = vec![R::zero(); h];
            let mut f = vec![R::zero(); h];
            let mut g = vec![R::zero(); h];
            let mut o = vec![R::zero(); h];
            for u in 0..h {
                i[u] = logistic(z[u]);
                f[u] = logistic(z[h + u]);
                g[u] = z[2 * h + u].tanh();
                o[u] = logistic(z[3 * h + u]);
            }
            let c_prev = c_state.clone();
            let mut tanh_c = vec![R::zero(); h];
            for u in 0..h {
                c_state[u] = f[u] * c_prev[u] + i[u] * g[u];
                tanh_c[u] = c_state[u].tanh();
                h_state[u] = o[u] * tanh_c[u];
            }
            steps.push(StepCache {
                xh,
                c_prev,
                i,
                f,
                g,
                o,
                tanh_c,
            });
        }
        Ok((h_state, LstmWindowCache { steps }))
    }

    /// Backward through time for a loss that depends on the final hidden
    /// state only. Accumulates parameter gradients into `dw` / `db`.
    pub fn backward_window(
        &self,
        cache: &LstmWindowCache<R>,
        dh_final: &[R],
        dw: &mut Tensor<R>,
        db: &mut Tensor<R>,
    ) -> Result<()> {
        let h = self.hidden_size;
        if dh_final.len() != h {
            return Err(Error::Shape(format!(
                "lstm backward: dh length {} != hidden {h}",
                dh_final.len()
            )));
        }
        let fan_in = self.input_size + h;
        let w = self.weights.data();
        let dw_data = dw.data_mut();
        let db_data = db.data_mut();

        let mut dh = dh_final.to_vec();
        let mut dc = vec![R::zero(); h];
        let mut dz = vec![R::zero(); 4 * h];

        for step in cache.steps.iter().rev() {
            for u in 0..h {
                let d_o = dh[u] * step.tanh_c[u];
                let dct = dc[u] + dh[u] * step.o[u] * (R::one() - step.tanh_c[u] * step.tanh_c[u]);
                let d_i = dct * step.g[u];
                let d_f = dct * step.c_prev[u];
                let d_g = dct * step.i[u];
                dc[u] = dct * step.f[u];

                dz[u] = d_i * step.i[u] * (R::one() - step.i[u]);
                dz[h + u] = d_f * step.f[u] * (R::one() - step.f[u]);
                dz[2 * h + u] = d_g * (R::one() - step.g[u] * step.g[u]);
                dz[3 * h + u] = d_o * step.o[u] * (R::one() - step.o[u]);
            }
            // Parameter gradients and the hidden-state gradient for t-1.
            for u in dh.iter_mut() {
                *u = R::zero();
            }
            for r in 0..4 * h {
                let gz = dz[r];
                db_data[r] += gz;
                if gz == R::zero() {
                    continue;
                }
                let dw_row = &mut dw_data[r * fan_in..(r + 1) * fan_in];
                for (dwv, xv) in dw_row.iter_mut().zip(&step.xh) {
                    *dwv += gz * *xv;
                }
                let w_row = &w[r * fan_in..(r + 1) * fan_in];
                for u in 0..h {
                    dh[u] += gz * w_row[self.input_size + u];
                }
            }
        }
        Ok(())
    }

    pub fn infer_window(&self, window: &[&[R]]) -> Result<Vec<R>> {
        self.forward_window(window).map(|(h, _)| h)
    }
}
