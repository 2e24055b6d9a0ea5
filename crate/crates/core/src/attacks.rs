//! Channel attacks: Gaussian quantum cloning, intercept-resend and denial of
//! service.
//!
//! The cloning machine is a linear amplifier of gain `A` followed by a
//! beamsplitter of transmission `T`:
//!
//! ```text
//! a_B = √(AT) a_in + √((A−1)T) b₁ + √(1−T) b₂
//! a_E = √T b₂ − √(A(1−T)) a_in − √((A−1)(1−T)) b₁
//! ```
//!
//! `b₁`, `b₂` are vacua. The map is applied quadrature by quadrature with the
//! same real coefficients on `X` and `P`, which is the form the closed-form
//! variances in [`crate::security`] are built from.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector, Vector2, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gaussian::{GaussianState, VACUUM_VARIANCE};
use crate::measurement::{heterodyne, sample_normal2, standard_normal, MeasurementMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GqcmParams {
    gain: f64,
    transmission: f64,
}

impl GqcmParams {
    pub fn new(gain: f64, transmission: f64) -> Result<Self> {
        if !(gain.is_finite() && gain >= 1.0) {
            return Err(Error::param("A", format!("amplifier gain must be ≥ 1, got {gain}")));
        }
        if !(0.0..=1.0).contains(&transmission) {
            return Err(Error::param(
                "T",
                format!("transmission must lie in [0, 1], got {transmission}"),
            ));
        }
        Ok(GqcmParams { gain, transmission })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    /// Output quadratures `(X_B, P_B, X_E, P_E)` as a linear map of
    /// `(X_in, P_in, X_b₁, P_b₁, X_b₂, P_b₂)`.
    pub fn mode_map(&self) -> SMatrix<f64, 4, 6> {
        let (a, t) = (self.gain, self.transmission);
        let bob = [(a * t).sqrt(), ((a - 1.0) * t).sqrt(), (1.0 - t).sqrt()];
        let eve = [-(a * (1.0 - t)).sqrt(), -((a - 1.0) * (1.0 - t)).sqrt(), t.sqrt()];
        let mut k = SMatrix::<f64, 4, 6>::zeros();
        for (mode, row) in [bob, eve].iter().enumerate() {
            for (input, c) in row.iter().enumerate() {
                k[(2 * mode, 2 * input)] = *c;
                k[(2 * mode + 1, 2 * input + 1)] = *c;
            }
        }
        k
    }
}

/// Joint Bob/Eve state in `(X_B, P_B, X_E, P_E)` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeGaussian {
    mean: Vector4<f64>,
    cov: Matrix4<f64>,
}

impl TwoModeGaussian {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("two-mode state"));
        }
        let cov = (cov + cov.transpose()) * 0.5;
        if cov.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite {
                det: cov.determinant(),
                trace: cov.trace(),
            });
        }
        Ok(TwoModeGaussian { mean, cov })
    }

    pub fn mean(&self) -> Vector4<f64> {
        self.mean
    }

    pub fn cov(&self) -> Matrix4<f64> {
        self.cov
    }

    fn marginal(&self, offset: usize) -> Result<GaussianState> {
        GaussianState::new(
            Vector2::new(self.mean[offset], self.mean[offset + 1]),
            self.cov.fixed_view::<2, 2>(offset, offset).into_owned(),
        )
    }

    /// Reduced state of Bob's copy.
    pub fn bob(&self) -> Result<GaussianState> {
        self.marginal(0)
    }

    /// Reduced state of Eve's copy.
    pub fn eve(&self) -> Result<GaussianState> {
        self.marginal(2)
    }
}

/// A channel segment of a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leg {
    BobAlice,
    AliceBob,
    CharlieAlice,
    /// Socialist-millionaire only: the final modes routed to Charlie.
    BobCharlie,
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Leg::BobAlice => "bob-alice",
            Leg::AliceBob => "alice-bob",
            Leg::CharlieAlice => "charlie-alice",
            Leg::BobCharlie => "bob-charlie",
        })
    }
}

impl FromStr for Leg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bob-alice" => Ok(Leg::BobAlice),
            "alice-bob" => Ok(Leg::AliceBob),
            "charlie-alice" => Ok(Leg::CharlieAlice),
            "bob-charlie" => Ok(Leg::BobCharlie),
            other => Err(Error::param("leg", format!("unknown leg {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    None,
    Gqcm {
        params: GqcmParams,
        leg: Leg,
    },
    /// Eve heterodynes every state on `leg` and resends a coherent state at
    /// the outcome.
    InterceptMeasureResend {
        leg: Leg,
    },
    /// QSDC only: Eve holds Bob's states in a delay line, feeds Alice her own,
    /// then re-encodes what she reads onto Bob's originals.
    InterceptDelaySwap,
    DenialOfService {
        leg: Leg,
        amplitude_scale: f64,
    },
    /// CQD only: the controller intercepts the Alice→Bob leg, undoes his own
    /// squeezing, heterodynes and re-prepares.
    ParticipantCharlie,
}

impl AttackKind {
    pub fn leg(&self) -> Option<Leg> {
        match *self {
            AttackKind::Gqcm { leg, .. }
            | AttackKind::InterceptMeasureResend { leg }
            | AttackKind::DenialOfService { leg, .. } => Some(leg),
            AttackKind::InterceptDelaySwap => Some(Leg::BobAlice),
            AttackKind::ParticipantCharlie => Some(Leg::AliceBob),
            AttackKind::None => None,
        }
    }
}

/// Joint output state of the cloning machine for `input`.
pub fn gqcm_clone(input: &GaussianState, p: &GqcmParams) -> Result<TwoModeGaussian> {
    let k = p.mode_map();
    let mut mean_in = SVector::<f64, 6>::zeros();
    mean_in[0] = input.mean()[0];
    mean_in[1] = input.mean()[1];
    let mut cov_in = SMatrix::<f64, 6, 6>::identity() * VACUUM_VARIANCE;
    cov_in.fixed_view_mut::<2, 2>(0, 0).copy_from(&input.cov());
    TwoModeGaussian::new(k * mean_in, k * cov_in * k.transpose())
}

/// One joint draw of `((X_B, P_B), (X_E, P_E))`. Samples the input and the two
/// vacua and pushes them through the mode map, so Bob/Eve correlations are
/// exact.
pub fn sample_clone_quadratures<R: Rng + ?Sized>(
    input: &GaussianState,
    p: &GqcmParams,
    mode: MeasurementMode,
    rng: &mut R,
) -> ((f64, f64), (f64, f64)) {
    let k = p.mode_map();
    let mut v = SVector::<f64, 6>::zeros();
    match mode {
        MeasurementMode::Expectation => {
            v[0] = input.mean()[0];
            v[1] = input.mean()[1];
        }
        MeasurementMode::Sampled => {
            let a = sample_normal2(&input.mean(), &input.cov(), rng);
            v[0] = a[0];
            v[1] = a[1];
            let sd = VACUUM_VARIANCE.sqrt();
            for i in 2..6 {
                v[i] = sd * standard_normal(rng);
            }
        }
    }
    let out = k * v;
    ((out[0], out[1]), (out[2], out[3]))
}

/// Eve heterodynes `state` and resends a coherent state centred on her
/// outcome. Returns the resent state and her record.
pub fn intercept_measure_resend<R: Rng + ?Sized>(
    state: &GaussianState,
    mode: MeasurementMode,
    rng: &mut R,
) -> (GaussianState, (f64, f64)) {
    let (x, p) = heterodyne(state, mode, rng);
    let resent = GaussianState::coherent(num_complex::Complex64::new(x, p));
    (resent, (x, p))
}

/// A random coherent state with mean drawn from `N(0, amplitude_scale² I)`.
pub fn dos_resend<R: Rng + ?Sized>(rng: &mut R, amplitude_scale: f64) -> Result<GaussianState> {
    if !(amplitude_scale > 0.0 && amplitude_scale.is_finite()) {
        return Err(Error::param("amplitude_scale", "must be > 0"));
    }
    let cov = Matrix2::identity() * amplitude_scale.powi(2);
    let m = sample_normal2(&Vector2::zeros(), &cov, rng);
    Ok(GaussianState::coherent(num_complex::Complex64::new(m[0], m[1])))
}
