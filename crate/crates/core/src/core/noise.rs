use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::types::{NoiseModel, RangeVector};
use crate::error::{Error, Result};

/// Redraws allowed for one noise term before giving up on a non-positive range.
pub const MAX_NOISE_RETRIES: usize = 100;

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

// Difference of two unit exponentials is Laplace(0, 1), variance 2.
fn laplacian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let scale = sigma / std::f64::consts::SQRT_2;
    let e1: f64 = Exp1.sample(rng);
    let e2: f64 = Exp1.sample(rng);
    scale * (e1 - e2)
}

fn redraw_until_positive(base: f64, mut term: impl FnMut() -> f64) -> Result<f64> {
    for _ in 0..MAX_NOISE_RETRIES {
        let v = base + term();
        if v > 0.0 {
            return Ok(v);
        }
    }
    Err(Error::NonPositiveRange { retries: MAX_NOISE_RETRIES })
}

/// Adds noise drawn from `noise` to every range.
///
/// A term that would make its range non-positive is redrawn, at most
/// [`MAX_NOISE_RETRIES`] times.
pub fn apply_noise<R: Rng + ?Sized>(
    true_ranges: &RangeVector,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<RangeVector> {
    noise.validate()?;
    let r = true_ranges.values();
    let m = r.len();
    let outlier = match noise {
        NoiseModel::SelectiveGaussian { .. } => Some(rng.random_range(0..m)),
        _ => None,
    };
    let mut out = r.clone();
    for i in 0..m {
        out[i] = redraw_until_positive(r[i], || match *noise {
            NoiseModel::Gaussian { sigma } => gaussian(rng, sigma),
            NoiseModel::Laplacian { sigma } => laplacian(rng, sigma),
            NoiseModel::SelectiveGaussian { sigma_base, sigma_outlier } => {
                let mut t = gaussian(rng, sigma_base);
                if outlier == Some(i) {
                    t += gaussian(rng, sigma_outlier).abs();
                }
                t
            }
        })?;
    }
    RangeVector::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        (mean, var.sqrt(), m4 / (var * var) - 3.0)
    }

    fn draws(noise: NoiseModel, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = RangeVector::from_slice(&[1e3]).unwrap();
        (0..count)
            .map(|_| apply_noise(&base, &noise, &mut rng).unwrap().values()[0] - 1e3)
            .collect()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let r = RangeVector::from_slice(&[1.0, 2.0, 3.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(apply_noise(&r, &NoiseModel::Gaussian { sigma: 0.0 }, &mut rng).unwrap(), r);
    }

    #[test]
    fn gaussian_moments() {
        let (mean, sd, kurt) = moments(&draws(NoiseModel::Gaussian { sigma: 0.5 }, 200_000, 2));
        assert!(mean.abs() < 0.01);
        assert!((sd / 0.5 - 1.0).abs() < 0.02, "{sd}");
        assert!(kurt.abs() < 0.1);
    }

    #[test]
    fn laplacian_moments() {
        let (mean, sd, kurt) = moments(&draws(NoiseModel::Laplacian { sigma: 0.4 }, 400_000, 3));
        assert!(mean.abs() < 0.01);
        assert!((sd / 0.4 - 1.0).abs() < 0.02, "{sd}");
        assert!((kurt / 3.0 - 1.0).abs() < 0.1, "{kurt}");
    }

    #[test]
    fn selective_outlier_bias_is_half_normal_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = RangeVector::from_slice(&[1e3; 5]).unwrap();
        let noise = NoiseModel::SelectiveGaussian { sigma_base: 0.04, sigma_outlier: 1.0 };
        let n = 200_000;
        let mut total = 0.0;
        for _ in 0..n {
            let r = apply_noise(&base, &noise, &mut rng).unwrap();
            // base noise is zero-mean, so the row sum carries the outlier bias
            total += r.values().iter().map(|v| v - 1e3).sum::<f64>();
        }
        let bias = total / n as f64;
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        assert!((bias - expected).abs() < 0.01, "{bias}");
    }

    #[test]
    fn non_positive_ranges_are_redrawn_then_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tiny = RangeVector::from_slice(&[0.01; 50]).unwrap();
        let r = apply_noise(&tiny, &NoiseModel::Gaussian { sigma: 0.01 }, &mut rng).unwrap();
        assert!(r.values().iter().all(|&v| v > 0.0));
        assert_eq!(
            redraw_until_positive(1.0, || -2.0),
            Err(Error::NonPositiveRange { retries: MAX_NOISE_RETRIES })
        );
        let mut k = 0;
        let v = redraw_until_positive(1.0, || {
            k += 1;
            if k < 5 { -2.0 } else { 0.5 }
        });
        assert_eq!(v, Ok(1.5));
    }
}
