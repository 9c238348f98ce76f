//! Noise draws for the forward process, including the narrower
//! importance-sampling style variants.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Resampling attempts per element before a truncated draw gives up.
const MAX_TRUNCATION_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseVariant {
    #[default]
    StandardNormal,
    /// The mode of the standard normal: every element is zero.
    Zero,
    /// Standard normal with out-of-interval elements redrawn until they land in `[low, high]`.
    TruncatedNormal { low: f64, high: f64 },
    /// Standard normal rescaled to the expected norm of a `d`-dimensional standard normal.
    ExpectedNorm,
}

impl NoiseVariant {
    pub fn validate(&self) -> Result<()> {
        if let NoiseVariant::TruncatedNormal { low, high } = *self {
            if !(low < high) || !low.is_finite() || !high.is_finite() {
                return Err(Error::config(
                    "noise",
                    format!("truncation interval [{low}, {high}] is empty"),
                ));
            }
        }
        Ok(())
    }
}

/// `E ||z||` for `z ~ N(0, I_d)`: the mean of the chi distribution with `d`
/// degrees of freedom, `sqrt(2) * Gamma((d + 1) / 2) / Gamma(d / 2)`.
pub fn expected_normal_norm(d: usize) -> f64 {
    let d = d as f64;
    (std::f64::consts::LN_2 * 0.5 + ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// Draws a noise vector of `len` elements. Deterministic given the rng state.
pub fn draw_noise<R: Rng + ?Sized>(len: usize, variant: &NoiseVariant, rng: &mut R) -> Result<Vec<f64>> {
    variant.validate()?;
    match *variant {
        NoiseVariant::StandardNormal => Ok(standard_normal(len, rng)),
        NoiseVariant::Zero => Ok(vec![0.0; len]),
        NoiseVariant::TruncatedNormal { low, high } => {
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let mut value = None;
                for _ in 0..MAX_TRUNCATION_ATTEMPTS {
                    let z: f64 = rng.sample(StandardNormal);
                    if (low..=high).contains(&z) {
                        value = Some(z);
                        break;
                    }
                }
                out.push(value.ok_or_else(|| {
                    Error::Numeric(format!("truncation interval [{low}, {high}] has negligible mass"))
                })?);
            }
            Ok(out)
        }
        NoiseVariant::ExpectedNorm => {
            let mut eps = standard_normal(len, rng);
            let norm = eps.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm > 0.0 {
                let scale = expected_normal_norm(len) / norm;
                eps.iter_mut().for_each(|e| *e *= scale);
            }
            Ok(eps)
        }
    }
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Mean of the chi distribution by direct quadrature of its log-density.
    fn chi_mean_quadrature(d: usize) -> f64 {
        let k = d as f64;
        let log_norm = (1.0 - k / 2.0) * std::f64::consts::LN_2 - ln_gamma(k / 2.0);
        let centre = k.sqrt();
        let (lo, hi) = ((centre - 12.0).max(0.0), centre + 12.0);
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let f = |r: f64| {
            if r <= 0.0 {
                0.0
            } else {
                r * (log_norm + (k - 1.0) * r.ln() - r * r / 2.0).exp()
            }
        };
        // Simpson's rule
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn zero_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(draw_noise(2, &NoiseVariant::Zero, &mut rng).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn truncated_entries_in_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = NoiseVariant::TruncatedNormal { low: -1.0, high: 1.0 };
        for _ in 0..100 {
            let e = draw_noise(4, &v, &mut rng).unwrap();
            assert!(e.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn truncated_interval_must_be_nonempty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = NoiseVariant::TruncatedNormal { low: 1.0, high: 1.0 };
        assert!(matches!(draw_noise(4, &v, &mut rng), Err(Error::Config { .. })));
    }

    #[test]
    fn expected_norm_matches_chi_mean() {
        for d in [1, 2, 7, 64, 10_000] {
            let q = chi_mean_quadrature(d);
            assert!((expected_normal_norm(d) - q).abs() < 1e-8, "d={d}: {} vs {q}", expected_normal_norm(d));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = draw_noise(10_000, &NoiseVariant::ExpectedNorm, &mut rng).unwrap();
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - chi_mean_quadrature(10_000)).abs() < 1e-6);
    }

    #[test]
    fn draws_are_reproducible() {
        for v in [
            NoiseVariant::StandardNormal,
            NoiseVariant::ExpectedNorm,
            NoiseVariant::TruncatedNormal { low: -0.5, high: 2.0 },
        ] {
            let a = draw_noise(32, &v, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
            let b = draw_noise(32, &v, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
            assert_eq!(
                a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
