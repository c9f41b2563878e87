//! Standalone vector kernels (no gradient tracking).

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numerics::{Real, Rng};

/// Default layer-normalization epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Real>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("softmax input[{i}] = {}", v[i])));
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub(crate) fn softmax_in_place<T: Real>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = T::one() / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
}

/// `gain ⊙ (x − mean) / sqrt(var + eps) + bias`, with the biased
/// (divide-by-length) variance.
pub fn layer_norm<T: Real>(x: &[T], gain: &[T], bias: &[T], eps: T) -> Result<Vec<T>> {
    if x.len() != gain.len() || x.len() != bias.len() {
        return Err(Error::Shape(format!(
            "layer_norm lengths differ: x {}, gain {}, bias {}",
            x.len(),
            gain.len(),
            bias.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("layer_norm of an empty vector".into()));
    }
    if eps.is_nan() || eps <= T::zero() {
        return Err(Error::InvalidArgument("layer_norm eps must be positive".into()));
    }
    let (mean, inv_std) = moments(x, eps);
    Ok(x.iter().zip(gain).zip(bias).map(|((&xi, &g), &b)| g * (xi - mean) * inv_std + b).collect())
}

/// Mean and `1/sqrt(var + eps)` of a row.
pub(crate) fn moments<T: Real>(x: &[T], eps: T) -> (T, T) {
    let n = T::from_f64(x.len() as f64);
    let mean = x.iter().copied().sum::<T>() / n;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, T::one() / (var + eps).sqrt())
}

/// Global L2 norm over a set of gradient buffers.
pub fn global_norm<T: Real>(grads: &[&mut [T]]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|&x| {
            let x = x.to_f64();
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients by `threshold / n` when their global norm `n`
/// exceeds `threshold`. Returns the norm measured before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut [&mut [T]], threshold: f64) -> Result<f64> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!("clip threshold must be positive, got {threshold}")));
    }
    let norm = global_norm(grads);
    if norm > threshold {
        let scale = T::from_f64(threshold / norm);
        for g in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    Ok(norm)
}

/// Inverted-dropout multipliers: 0 with probability `p`, else `1/(1-p)`.
/// Draws nothing from `rng` when `p == 0`.
pub fn dropout_mask<T: Real>(n: usize, p: f64, rng: &mut Rng) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability must be in [0, 1), got {p}")));
    }
    if p == 0.0 {
        return Ok(vec![T::one(); n]);
    }
    let keep = T::from_f64(1.0 / (1.0 - p));
    Ok((0..n).map(|_| if rng.random::<f64>() < p { T::zero() } else { keep }).collect())
}

/// Inverted dropout in training mode, identity otherwise.
pub fn apply_dropout<T: Real>(x: &[T], p: f64, train_mode: bool, rng: &mut Rng) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability must be in [0, 1), got {p}")));
    }
    if !train_mode {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask::<T>(x.len(), p, rng)?;
    Ok(x.iter().zip(mask).map(|(&a, m)| a * m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        let third = 1.0 / 3.0;
        assert!(close(&softmax(&[0.0, 0.0, 0.0]).unwrap(), &[third; 3], 1e-15));
        assert!(close(&softmax(&[1000.0, 1000.0]).unwrap(), &[0.5, 0.5], 1e-15));
        let v = [1f64.ln(), 2f64.ln(), 3f64.ln()];
        assert!(close(&softmax(&v).unwrap(), &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0], 1e-15));
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax::<f64>(&[]).is_err());
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn layer_norm_examples() {
        let y = layer_norm(&[1.0, -1.0], &[1.0, 1.0], &[0.0, 0.0], 1e-12).unwrap();
        assert!(close(&y, &[1.0, -1.0], 1e-9));
        let y = layer_norm(&[4.2; 5], &[1.0; 5], &[0.0; 5], 1e-5).unwrap();
        assert!(close(&y, &[0.0; 5], 1e-12));
        let y = layer_norm(&[1.0, -1.0], &[2.0, 2.0], &[1.0, 1.0], 1e-12).unwrap();
        assert!(close(&y, &[3.0, -1.0], 1e-9));
        assert!(layer_norm(&[1.0, 2.0], &[1.0], &[0.0, 0.0], 1e-5).is_err());
        assert!(layer_norm(&[1.0, 2.0], &[1.0; 2], &[0.0; 2], 0.0).is_err());
    }

    #[test]
    fn clip_examples() {
        let mut g = vec![3.0f64, 4.0];
        let n = clip_global_norm(&mut [g.as_mut_slice()], 5.0).unwrap();
        assert_eq!(n, 5.0);
        assert_eq!(g, vec![3.0, 4.0]);

        let mut g = vec![6.0f64, 8.0];
        let n = clip_global_norm(&mut [g.as_mut_slice()], 5.0).unwrap();
        assert_eq!(n, 10.0);
        assert!(close(&g, &[3.0, 4.0], 1e-15));

        let mut a = vec![0.0f64; 3];
        let mut b = vec![0.0f64; 2];
        let n = clip_global_norm(&mut [a.as_mut_slice(), b.as_mut_slice()], 5.0).unwrap();
        assert_eq!(n, 0.0);
        assert!(a.iter().chain(&b).all(|&x| x == 0.0));
        assert!(clip_global_norm::<f64>(&mut [], 0.0).is_err());
    }

    #[test]
    fn dropout_examples() {
        let mut rng = crate::numerics::rng_stream(1, 0);
        let x = vec![1.5f64, -2.0, 0.25];
        assert_eq!(apply_dropout(&x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(apply_dropout(&x, 0.9, false, &mut rng).unwrap(), x);
        assert!(apply_dropout(&x, 1.0, true, &mut rng).is_err());

        let ones = vec![1.0f64; 1_000_000];
        let y = apply_dropout(&ones, 0.5, true, &mut rng).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
    }

    proptest! {
        #[test]
        fn softmax_on_simplex_and_shift_invariant(
            v in prop::collection::vec(-50.0f64..50.0, 1..20),
            c in -100.0f64..100.0,
        ) {
            let p = softmax(&v).unwrap();
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let q = softmax(&shifted).unwrap();
            prop_assert!(close(&p, &q, 1e-12));
        }

        #[test]
        fn layer_norm_standardizes(v in prop::collection::vec(-10.0f64..10.0, 4..32)) {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            prop_assume!(var > 1e-1);
            let n = v.len();
            let y = layer_norm(&v, &vec![1.0; n], &vec![0.0; n], LAYER_NORM_EPS).unwrap();
            let ym = y.iter().sum::<f64>() / n as f64;
            let yv = y.iter().map(|x| (x - ym).powi(2)).sum::<f64>() / n as f64;
            prop_assert!(ym.abs() <= 1e-6);
            prop_assert!((yv - 1.0).abs() <= 1e-4);
        }

        #[test]
        fn clipped_norm_never_exceeds_threshold(
            a in prop::collection::vec(-100.0f64..100.0, 1..16),
            b in prop::collection::vec(-100.0f64..100.0, 1..16),
            t in 0.01f64..20.0,
        ) {
            let (mut a, mut b) = (a, b);
            let mut grads = [a.as_mut_slice(), b.as_mut_slice()];
            clip_global_norm(&mut grads, t).unwrap();
            prop_assert!(global_norm(&grads) <= t + 1e-9);
        }
    }
}
