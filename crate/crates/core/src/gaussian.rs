//! Monte Carlo check of the Gaussian utility model.
//!
//! A buyer's parameter θ has a Gaussian prior with precision τ₀. Each record
//! of dataset `j` is a signal θ + noise with precision τ_j. After seeing
//! `x_j` records of every dataset the posterior precision is
//! `τ₀ + Σ_j τ_j x_j`, so the gain in precision is linear in record counts.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::substream;

/// Trials per independently seeded block.
const BLOCK: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianTask {
    pub prior_precision: f64,
    pub prior_mean: f64,
    pub signal_precisions: Vec<f64>,
    pub counts: Vec<u64>,
}

impl GaussianTask {
    pub fn new(prior_precision: f64, prior_mean: f64, signal_precisions: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        let ok = |t: f64| t.is_finite() && t > 0.0;
        if !ok(prior_precision) || !signal_precisions.iter().all(|&t| ok(t)) {
            return Err(Error::invalid("gaussian task", "precisions must be finite and positive"));
        }
        if !prior_mean.is_finite() {
            return Err(Error::invalid("gaussian task", "prior mean must be finite"));
        }
        if signal_precisions.len() != counts.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} signal precisions for {} record counts",
                signal_precisions.len(),
                counts.len()
            )));
        }
        Ok(GaussianTask {
            prior_precision,
            prior_mean,
            signal_precisions,
            counts,
        })
    }

    pub fn posterior_precision(&self) -> f64 {
        self.prior_precision + theoretical_gain(self)
    }

    pub fn expected_variance(&self) -> f64 {
        1.0 / self.posterior_precision()
    }
}

/// Expected gain in precision: `Σ_j τ_j x_j`.
pub fn theoretical_gain(t: &GaussianTask) -> f64 {
    t.signal_precisions
        .iter()
        .zip(&t.counts)
        .map(|(tau, &x)| tau * x as f64)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianReport {
    pub trials: u64,
    pub empirical_mse: f64,
    pub expected_variance: f64,
    pub standard_error: f64,
    pub z_score: f64,
}

/// Squared error of the posterior mean in one simulated trial.
fn trial<R: Rng>(t: &GaussianTask, prior: &Normal<f64>, noise: &[Normal<f64>], rng: &mut R) -> f64 {
    let theta = prior.sample(rng);
    let mut weighted = t.prior_precision * t.prior_mean;
    for ((dist, &tau), &x) in noise.iter().zip(&t.signal_precisions).zip(&t.counts) {
        for _ in 0..x {
            weighted += tau * (theta + dist.sample(rng));
        }
    }
    let mean = weighted / t.posterior_precision();
    (mean - theta).powi(2)
}

/// Empirical mean squared error of the Bayes posterior mean over `trials`
/// simulated draws, against the closed-form posterior variance.
pub fn simulate_posterior_mse(t: &GaussianTask, trials: u64, seed: u64) -> Result<GaussianReport> {
    if trials == 0 {
        return Err(Error::invalid("trial count", "must be at least 1"));
    }
    let sd = |tau: f64| Normal::new(0.0, tau.sqrt().recip()).expect("positive precision");
    let prior = Normal::new(t.prior_mean, t.prior_precision.sqrt().recip()).expect("positive precision");
    let noise: Vec<Normal<f64>> = t.signal_precisions.iter().map(|&tau| sd(tau)).collect();

    let blocks = trials.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b);
            let len = BLOCK.min(trials - b * BLOCK);
            (0..len).fold((0.0, 0.0), |(s, s2), _| {
                let e = trial(t, &prior, &noise, &mut rng);
                (s + e, s2 + e * e)
            })
        })
        .collect();
    let (sum, sum_sq) = sums.iter().fold((0.0, 0.0), |(a, b), (s, s2)| (a + s, b + s2));

    let n = trials as f64;
    let mse = sum / n;
    let var = if trials > 1 {
        ((sum_sq - n * mse * mse) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let standard_error = (var / n).sqrt();
    let expected_variance = t.expected_variance();
    let z_score = if standard_error > 0.0 {
        (mse - expected_variance) / standard_error
    } else {
        0.0
    };
    Ok(GaussianReport {
        trials,
        empirical_mse: mse,
        expected_variance,
        standard_error,
        z_score,
    })
}
