//! Homodyne and heterodyne detection, and the batch test used for
//! eavesdropping checks.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::gaussian::{GaussianState, VACUUM_VARIANCE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    pub fn index(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }

    /// Picks the component of a complex amplitude read by this quadrature.
    pub fn of(self, z: num_complex::Complex64) -> f64 {
        match self {
            Quadrature::X => z.re,
            Quadrature::P => z.im,
        }
    }
}

/// Whether detectors return exact means or Gaussian draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    Expectation,
    #[default]
    Sampled,
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// One draw from `N(mean, cov)` in two dimensions.
pub(crate) fn sample_normal2<R: Rng + ?Sized>(mean: &Vector2<f64>, cov: &Matrix2<f64>, rng: &mut R) -> Vector2<f64> {
    let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (c - l21 * l21).max(0.0).sqrt();
    let (z1, z2) = (standard_normal(rng), standard_normal(rng));
    Vector2::new(mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2)
}

/// Homodyne readout of quadrature `q`: a draw from the marginal
/// `N(mean_q, cov_qq)`, or `mean_q` in expectation mode.
pub fn homodyne<R: Rng + ?Sized>(state: &GaussianState, q: Quadrature, mode: MeasurementMode, rng: &mut R) -> f64 {
    let k = q.index();
    let mean = state.mean()[k];
    match mode {
        MeasurementMode::Expectation => mean,
        MeasurementMode::Sampled => mean + state.cov()[(k, k)].sqrt() * standard_normal(rng),
    }
}

/// Heterodyne readout of both quadratures. Simultaneous measurement adds one
/// vacuum unit of noise per quadrature: draws come from
/// `N(mean, cov + I/4)`.
pub fn heterodyne<R: Rng + ?Sized>(state: &GaussianState, mode: MeasurementMode, rng: &mut R) -> (f64, f64) {
    match mode {
        MeasurementMode::Expectation => (state.mean()[0], state.mean()[1]),
        MeasurementMode::Sampled => {
            let cov = state.cov() + Matrix2::identity() * VACUUM_VARIANCE;
            let v = sample_normal2(&state.mean(), &cov, rng);
            (v[0], v[1])
        }
    }
}

/// Acceptance rule for a batch of check measurements.
///
/// `aggregate_alpha` is the false-rejection level of one [`verify_batch`]
/// call; it is split evenly between the mean test and the variance test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationPolicy {
    pub per_sample_sigma_bound: f64,
    pub aggregate_alpha: f64,
    pub min_samples: usize,
    /// Off for expectation-mode sessions, where residuals are exactly zero and
    /// would always look under-dispersed.
    pub variance_test: bool,
}

impl Default for VerificationPolicy {
    fn default() -> Self {
        VerificationPolicy {
            per_sample_sigma_bound: 4.5,
            aggregate_alpha: 0.01,
            min_samples: 2,
            variance_test: true,
        }
    }
}

impl VerificationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.per_sample_sigma_bound > 0.0 && self.per_sample_sigma_bound.is_finite()) {
            return Err(Error::param("per_sample_sigma_bound", "must be > 0"));
        }
        if !(self.aggregate_alpha > 0.0 && self.aggregate_alpha < 1.0) {
            return Err(Error::param("aggregate_alpha", "must lie in (0, 1)"));
        }
        if self.min_samples == 0 {
            return Err(Error::param("min_samples", "must be ≥ 1"));
        }
        Ok(())
    }

    pub fn with_alpha(self, aggregate_alpha: f64) -> Self {
        VerificationPolicy {
            aggregate_alpha,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceVerdict {
    Pass,
    UnderDispersed,
    OverDispersed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub per_sample_outliers: usize,
    /// Mean of `sample − expected`.
    pub sample_mean_error: f64,
    /// Mean squared residual about the expected values.
    pub sample_variance: f64,
    pub expected_variance: f64,
    pub samples: usize,
    pub mean_test_pass: bool,
    pub variance_verdict: VarianceVerdict,
}

/// Checks measured values against the values the preparer announced.
///
/// Fails on any residual beyond `per_sample_sigma_bound` standard deviations,
/// on a two-sided z-test of the mean residual, or on a two-sided χ² test of
/// `Σ residual² / expected_variance` with `n` degrees of freedom.
pub fn verify_batch(
    samples: &[f64],
    expected: &[f64],
    expected_variance: f64,
    policy: &VerificationPolicy,
) -> Result<VerificationReport> {
    policy.validate()?;
    if samples.len() != expected.len() {
        return Err(Error::LengthMismatch {
            samples: samples.len(),
            expected: expected.len(),
        });
    }
    let n = samples.len();
    if n < policy.min_samples {
        return Err(Error::TooFewSamples {
            got: n,
            min: policy.min_samples,
        });
    }
    if !(expected_variance > 0.0 && expected_variance.is_finite()) {
        return Err(Error::param("expected_variance", "must be > 0"));
    }
    if samples.iter().chain(expected).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("verification batch"));
    }

    let sd = expected_variance.sqrt();
    let bound = policy.per_sample_sigma_bound * sd;
    let residuals: Vec<f64> = samples.iter().zip(expected).map(|(s, e)| s - e).collect();
    let per_sample_outliers = residuals.iter().filter(|r| r.abs() > bound).count();
    let nf = n as f64;
    let mean_error = residuals.iter().sum::<f64>() / nf;
    let sum_sq = residuals.iter().map(|r| r * r).sum::<f64>();

    // α/2 per test, each two-sided.
    let tail = policy.aggregate_alpha / 4.0;
    let std_normal = Normal::standard();
    let z_crit = std_normal.inverse_cdf(1.0 - tail);
    let mean_test_pass = (mean_error / (sd / nf.sqrt())).abs() <= z_crit;

    let variance_verdict = if policy.variance_test {
        let chi = ChiSquared::new(nf).expect("n ≥ 1");
        let stat = sum_sq / expected_variance;
        if stat < chi.inverse_cdf(tail) {
            VarianceVerdict::UnderDispersed
        } else if stat > chi.inverse_cdf(1.0 - tail) {
            VarianceVerdict::OverDispersed
        } else {
            VarianceVerdict::Pass
        }
    } else {
        VarianceVerdict::Skipped
    };

    let pass = per_sample_outliers == 0
        && mean_test_pass
        && matches!(variance_verdict, VarianceVerdict::Pass | VarianceVerdict::Skipped);
    Ok(VerificationReport {
        pass,
        per_sample_outliers,
        sample_mean_error: mean_error,
        sample_variance: sum_sq / nf,
        expected_variance,
        samples: n,
        mean_test_pass,
        variance_verdict,
    })
}
