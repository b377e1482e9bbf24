use super::real::Real;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Logistic,
}

/// Numerically stable logistic function.
pub fn logistic<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

impl Activation {
    pub(crate) fn apply<R: Real>(self, z: &mut [R]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for v in z {
                    if *v < R::zero() {
                        *v = R::zero();
                    }
                }
            }
            Activation::Logistic => {
                for v in z {
                    *v = logistic(*v);
                }
            }
        }
    }

    /// Multiply `dy` in place by the activation derivative, expressed through
    /// the activation output `y`.
    pub(crate) fn backprop<R: Real>(self, y: &[R], dy: &mut [R]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (d, &out) in dy.iter_mut().zip(y) {
                    if out <= R::zero() {
                        *d = R::zero();
                    }
                }
            }
            Activation::Logistic => {
                for (d, &out) in dy.iter_mut().zip(y) {
                    *d *= out * (R::one() - out);
                }
            }
        }
    }
}
