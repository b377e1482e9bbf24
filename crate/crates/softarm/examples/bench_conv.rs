use softarm::models::{AutoencoderSpec, Decoder, Encoder};
use softarm::nn::{bce_with_logits, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let spec = AutoencoderSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let enc: Encoder<f32> = Encoder::new(&spec, &mut rng).unwrap();
    let dec: Decoder<f32> = Decoder::new(&spec, &mut rng).unwrap();
    let image = Tensor::from_vec(&[1, 52, 84], (0..4368).map(|i| ((i % 7) < 3) as u8 as f32).collect()).unwrap();

    let n = 500;
    let t0 = Instant::now();
    for _ in 0..n { let _ = enc.forward(&image).unwrap(); }
    println!("enc fwd+cache: {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let (latent, ecache) = enc.forward(&image).unwrap();
    let t0 = Instant::now();
    for _ in 0..n { let _ = dec.forward(&latent).unwrap(); }
    println!("dec fwd+cache: {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let (logits, dcache) = dec.forward(&latent).unwrap();
    let (_, dlogits) = bce_with_logits(&logits, &image).unwrap();
    let mut dg = dec.grad_zeros();
    let mut eg = enc.grad_zeros();

    let t0 = Instant::now();
    for _ in 0..n { let _ = dec.backward(&dcache, &dlogits, &mut dg).unwrap(); }
    println!("dec bwd: {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let dl = dec.backward(&dcache, &dlogits, &mut dg).unwrap();
    let t0 = Instant::now();
    for _ in 0..n { let _ = enc.backward(&ecache, &dl, &mut eg).unwrap(); }
    println!("enc bwd: {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let t0 = Instant::now();
    for _ in 0..n {
        let _ = bce_with_logits(&logits, &image).unwrap();
    }
    println!("bce: {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);

    let t0 = Instant::now();
    for _ in 0..n {
        let _ = enc.grad_zeros();
        let _ = dec.grad_zeros();
    }
    println!("grad_zeros: {:.3} ms", t0.elapsed().as_secs_f64() * 1e3 / n as f64);
}
