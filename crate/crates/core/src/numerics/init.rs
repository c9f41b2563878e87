use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

/// The generator used everywhere: ChaCha with 8 rounds, which yields the
/// same stream on every platform for a given seed and stream number.
pub type Rng = ChaCha8Rng;

/// Independent, reproducible stream `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_out: usize, fan_in: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Samples a `(fan_out, fan_in)` matrix i.i.d. uniform on `[-b, b]`.
pub fn xavier_init<T: Real>(fan_out: usize, fan_in: usize, rng: &mut Rng) -> Result<Tensor<T>> {
    if fan_out == 0 || fan_in == 0 {
        return Err(Error::InvalidArgument(format!("xavier_init needs positive fans, got ({fan_out}, {fan_in})")));
    }
    let b = xavier_bound(fan_out, fan_in);
    let dist = Uniform::new_inclusive(-b, b).expect("finite bound");
    let data = (0..fan_out * fan_in).map(|_| T::from_f64(dist.sample(rng))).collect();
    Tensor::new(vec![fan_out, fan_in], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_respect_glorot_bound() {
        let mut rng = rng_stream(1, 0);
        let t: Tensor<f64> = xavier_init(256, 128, &mut rng).unwrap();
        let b = (6.0f64 / 384.0).sqrt();
        assert!((b - 0.125).abs() < 1e-12);
        assert!(t.data().iter().all(|x| x.abs() <= b));

        let t: Tensor<f64> = xavier_init(1, 1, &mut rng).unwrap();
        assert!(t.data()[0].abs() <= 3f64.sqrt());
    }

    #[test]
    fn empirical_mean_near_zero() {
        let mut rng = rng_stream(2, 0);
        let mut sum = 0.0;
        let mut n = 0;
        while n < 100_000 {
            let t: Tensor<f64> = xavier_init(64, 64, &mut rng).unwrap();
            sum += t.data().iter().sum::<f64>();
            n += t.len();
        }
        assert!((sum / n as f64).abs() < 0.005);
    }

    #[test]
    fn zero_fan_rejected() {
        let mut rng = rng_stream(0, 0);
        assert!(xavier_init::<f32>(0, 4, &mut rng).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Tensor<f32> = xavier_init(4, 4, &mut rng_stream(9, 1)).unwrap();
        let b: Tensor<f32> = xavier_init(4, 4, &mut rng_stream(9, 1)).unwrap();
        let c: Tensor<f32> = xavier_init(4, 4, &mut rng_stream(9, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
