//! Adaptive thresholding: fit one Gaussian per class to the training scores
//! and place the threshold where the prior-weighted densities cross.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEGENERATE_SIGMA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistributionFit {
    pub mu_pos: f64,
    pub sigma_pos: f64,
    pub mu_neg: f64,
    pub sigma_neg: f64,
    pub prior_pos: f64,
    pub prior_neg: f64,
    pub h_star: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ScoreDistributionFit {
    /// Builds a fit from known parameters and solves for the threshold.
    pub fn from_params(
        mu_neg: f64,
        sigma_neg: f64,
        mu_pos: f64,
        sigma_pos: f64,
        prior_pos: f64,
    ) -> Self {
        let prior_neg = 1.0 - prior_pos;
        let h_star = bayes_threshold(mu_neg, sigma_neg, mu_pos, sigma_pos, prior_neg, prior_pos);
        Self {
            mu_pos,
            sigma_pos,
            mu_neg,
            sigma_neg,
            prior_pos,
            prior_neg,
            h_star,
        }
    }
}

/// Root of `prior_neg N(h; mu_neg, s_neg) = prior_pos N(h; mu_pos, s_pos)`
/// between the means, from the quadratic in the log densities. Falls back to
/// the midpoint of the means when no such root exists or a sigma vanishes.
fn bayes_threshold(
    mu_neg: f64,
    s_neg: f64,
    mu_pos: f64,
    s_pos: f64,
    pi_neg: f64,
    pi_pos: f64,
) -> f64 {
    let mid = 0.5 * (mu_neg + mu_pos);
    if s_neg < DEGENERATE_SIGMA || s_pos < DEGENERATE_SIGMA || pi_neg <= 0.0 || pi_pos <= 0.0 {
        return mid;
    }
    let a_neg = 1.0 / (2.0 * s_neg * s_neg);
    let a_pos = 1.0 / (2.0 * s_pos * s_pos);
    let a = a_neg - a_pos;
    let b = 2.0 * (a_pos * mu_pos - a_neg * mu_neg);
    let c = a_neg * mu_neg * mu_neg - a_pos * mu_pos * mu_pos
        + (pi_pos / pi_neg).ln()
        + (s_neg / s_pos).ln();
    let (lo, hi) = (mu_neg.min(mu_pos), mu_neg.max(mu_pos));
    let scale = a_neg.max(a_pos);
    let roots: Vec<f64> = if a.abs() <= 1e-12 * scale {
        if b == 0.0 {
            Vec::new()
        } else {
            vec![-c / b]
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            Vec::new()
        } else {
            // numerically stable pair
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let mut r = vec![q / a];
            if q != 0.0 {
                r.push(c / q);
            }
            r
        }
    };
    roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= lo && *r <= hi)
        .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
        .unwrap_or(mid)
}

/// Fits per-class Gaussians (sample mean and standard deviation) to `scores`
/// and returns the minimum-Bayes-error threshold.
pub fn fit_adaptive_threshold(scores: &[f64], labels: &[u8]) -> Result<ScoreDistributionFit> {
    if scores.len() != labels.len() {
        return Err(Error::dims(scores.len(), labels.len()));
    }
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l != 1)
        .map(|(&s, _)| s)
        .collect();
    for (class, set) in [(0u8, &neg), (1u8, &pos)] {
        if set.len() < 2 {
            return Err(Error::TooFewSamples {
                class,
                count: set.len(),
                required: 2,
            });
        }
    }
    let (mu_pos, sigma_pos) = mean_std(&pos);
    let (mu_neg, sigma_neg) = mean_std(&neg);
    let prior_pos = pos.len() as f64 / scores.len() as f64;
    Ok(ScoreDistributionFit::from_params(
        mu_neg, sigma_neg, mu_pos, sigma_pos, prior_pos,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_case_is_midpoint() {
        let fit = ScoreDistributionFit::from_params(-1.0, 1.0, 1.0, 1.0, 0.5);
        assert!(fit.h_star.abs() < 1e-12);
    }

    #[test]
    fn degenerate_sigma_falls_back() {
        let fit = fit_adaptive_threshold(&[1.0, 1.0, 3.0, 3.0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(fit.sigma_neg, 0.0);
        assert_eq!(fit.h_star, 2.0);
    }

    #[test]
    fn asymmetric_root_is_density_crossing() {
        let fit = ScoreDistributionFit::from_params(0.0, 1.0, 4.0, 2.0, 0.5);
        // 3h^2 + 8h - 16 - 8 ln 2 = 0, positive root
        let closed = (-8.0 + (64.0 + 12.0 * (16.0 + 8.0 * 2f64.ln())).sqrt()) / 6.0;
        assert!((fit.h_star - closed).abs() < 1e-12);
        assert!(fit.h_star > 0.0 && fit.h_star < 4.0);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            fit_adaptive_threshold(&[0.0, 1.0, 2.0], &[0, 1, 1]),
            Err(Error::TooFewSamples { class: 0, .. })
        ));
    }

    #[test]
    fn priors_sum_to_one() {
        let fit = fit_adaptive_threshold(&[0.0, 0.2, 0.1, 1.0, 1.3], &[0, 0, 0, 1, 1]).unwrap();
        assert!((fit.prior_pos + fit.prior_neg - 1.0).abs() < 1e-15);
        assert!((fit.prior_pos - 0.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn shift_equivariant(
            neg in proptest::collection::vec(-2.0f64..1.0, 2..8),
            pos in proptest::collection::vec(0.0f64..3.0, 2..8),
            shift in -50.0f64..50.0,
        ) {
            let scores: Vec<f64> = neg.iter().chain(&pos).cloned().collect();
            let labels: Vec<u8> = neg.iter().map(|_| 0).chain(pos.iter().map(|_| 1)).collect();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let a = fit_adaptive_threshold(&scores, &labels).unwrap();
            let b = fit_adaptive_threshold(&shifted, &labels).unwrap();
            prop_assert!((b.h_star - a.h_star - shift).abs() < 1e-6 * (1.0 + shift.abs()));
        }
    }
}
