use super::real::Real;
use rand::Rng;

/// Fan-in scaled uniform initialization: `U(-√(6/fan_in), √(6/fan_in))`.
pub fn fan_in_uniform<R: Real, G: Rng>(rng: &mut G, fan_in: usize, len: usize) -> Vec<R> {
    let limit = (6.0 / fan_in.max(1) as f64).sqrt();
    (0..len)
        .map(|_| R::from_f64(rng.gen_range(-limit..limit)))
        .collect()
}
