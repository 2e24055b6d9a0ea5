//! QSDC and CQD sessions as deterministic state machines.
//!
//! A session owns one seeded generator; every random choice (preparation
//! secrets, switch settings, measurement noise, attacker randomness) is drawn
//! from it in a fixed order, so identical inputs give bit-identical
//! [`Transcript`]s.
//!
//! Honest sessions keep their expected false-abort rate at
//! [`SESSION_ALPHA_SHARE`] × `aggregate_alpha`: the share is split evenly
//! across the verification stages of the session, and each stage splits its
//! level between the mean and variance tests.

mod check;
mod cqd;
mod qsdc;

use std::f64::consts::TAU;

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{dos_resend, gqcm_clone, intercept_measure_resend, AttackKind, Leg};
use crate::encoding::Symbol3;
use crate::gaussian::{commute_sd_inverse, displace, squeeze, to_vec, vacuum, GaussianState, SqueezeParam};
use crate::measurement::{
    homodyne, standard_normal, verify_batch, MeasurementMode, Quadrature, VerificationPolicy, VerificationReport,
};
use crate::{Error, Result, SimRng};

pub use check::{check_transcript, TranscriptViolation};
pub use cqd::{run_cqd, run_socialist_millionaire, CqdConfig, WPolicy};
pub use qsdc::{run_qsdc, QsdcConfig, QsdcMessage};

/// Fraction of `aggregate_alpha` a whole honest session may spend on false
/// aborts.
pub const SESSION_ALPHA_SHARE: f64 = 0.25;

/// Readings of a slot-averaged socialist-millionaire comparison within this
/// many standard deviations of zero are reported as undetermined.
pub const TIE_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
    Charlie,
    Eve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Qsdc,
    Cqd,
    Smp,
}

/// Secrets the preparer holds for one slot: the displacement amplitude
/// (`α_j` in QSDC, `γ_j` in CQD) and the squeeze `s_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepRecord {
    pub slot: usize,
    pub amplitude: Complex64,
    pub s: SqueezeParam,
}

/// How the preparer draws secrets: each amplitude component from
/// `N(0, amplitude_std²)`, `r` uniform on `[0, squeeze_max]`, `θ` uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepDistribution {
    pub amplitude_std: f64,
    pub squeeze_max: f64,
}

impl Default for PrepDistribution {
    fn default() -> Self {
        PrepDistribution {
            amplitude_std: 2.0,
            squeeze_max: 1.0,
        }
    }
}

impl PrepDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_std >= 0.0 && self.amplitude_std.is_finite()) {
            return Err(Error::param("amplitude_std", "must be finite and ≥ 0"));
        }
        if !(self.squeeze_max >= 0.0 && self.squeeze_max <= 5.0) {
            return Err(Error::param("squeeze_max", "must lie in [0, 5]"));
        }
        Ok(())
    }

    fn draw_squeeze<R: Rng + ?Sized>(&self, rng: &mut R) -> SqueezeParam {
        let r = self.squeeze_max * rng.random::<f64>();
        let theta = TAU * rng.random::<f64>();
        SqueezeParam::new(r, theta).expect("finite, r ≥ 0")
    }

    fn draw<R: Rng + ?Sized>(&self, slot: usize, rng: &mut R) -> PrepRecord {
        let amplitude = Complex64::new(
            self.amplitude_std * standard_normal(rng),
            self.amplitude_std * standard_normal(rng),
        );
        PrepRecord {
            slot,
            amplitude,
            s: self.draw_squeeze(rng),
        }
    }
}

impl PrepRecord {
    /// `S(s) D(amplitude)|0⟩`.
    pub fn state(&self) -> GaussianState {
        squeeze(&displace(&vacuum(), self.amplitude), self.s)
    }
}

/// Control/message split chosen with the optical switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSelection {
    pub control_slots: Vec<usize>,
    pub message_slots: Vec<usize>,
}

impl ModeSelection {
    /// Picks `controls` of `slots` uniformly at random. Both halves come back
    /// sorted.
    fn random<R: Rng + ?Sized>(slots: &[usize], controls: usize, rng: &mut R) -> Self {
        let mut shuffled = slots.to_vec();
        shuffled.shuffle(rng);
        let mut control_slots = shuffled[..controls].to_vec();
        let mut message_slots = shuffled[controls..].to_vec();
        control_slots.sort_unstable();
        message_slots.sort_unstable();
        ModeSelection {
            control_slots,
            message_slots,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Alice checks the first-round control states.
    AliceControls,
    /// Bob checks QSDC decoys.
    BobDecoys,
    /// Bob checks the CQD second-round control states.
    BobControls,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotKey {
    pub slot: usize,
    pub w: SqueezeParam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotValue {
    pub slot: usize,
    pub value: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    A,
    B,
    #[serde(rename = "tie-undetermined")]
    TieUndetermined,
}

/// Classical messages, all public and authenticated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Announcement {
    ControlCoordinates { slots: Vec<usize> },
    Secrets { records: Vec<PrepRecord> },
    DecoyCoordinates { slots: Vec<usize> },
    ReceiptConfirmed,
    SqueezeKeys { keys: Vec<SlotKey> },
    Sums { values: Vec<SlotValue> },
    Verdict { verdict: Verdict },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Prepared {
        by: Party,
        slots: usize,
    },
    /// Block transmission of `slots` over `leg`.
    Transmission {
        leg: Leg,
        slots: Vec<usize>,
    },
    ModeSelection {
        by: Party,
        #[serde(flatten)]
        selection: ModeSelection,
    },
    PayloadSplit {
        by: Party,
        message_slots: Vec<usize>,
        decoy_slots: Vec<usize>,
    },
    Encoded {
        by: Party,
        slots: Vec<usize>,
    },
    Measured {
        by: Party,
        slots: Vec<usize>,
        quadratures: Vec<Quadrature>,
    },
    Intercepted {
        by: Party,
        leg: Leg,
        slots: Vec<usize>,
    },
    Announcement {
        by: Party,
        #[serde(flatten)]
        content: Announcement,
    },
    Verification {
        stage: Stage,
        by: Party,
        report: VerificationReport,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AbortReason {
    ControlCheckFailed { stage: Stage },
    DecoyCheckFailed,
    MalformedFlow { detail: String },
}

/// Bob's per-slot QSDC readout. `sent` is simulator ground truth, kept for
/// error accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotDecode {
    pub slot: usize,
    pub sent: Symbol3,
    pub estimate: f64,
    /// Variance of `estimate` about the encoded value, from Bob's own squeeze.
    pub noise_variance: f64,
    pub decoded: Symbol3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "payload", rename_all = "snake_case")]
pub enum Decoded {
    Symbols {
        bits: String,
        symbols: Vec<Symbol3>,
        slots: Vec<SlotDecode>,
    },
    Real {
        estimate: f64,
        slot_estimates: Vec<f64>,
    },
    Dialogue {
        announced: Vec<SlotValue>,
        alice_recovers_m_b: f64,
        bob_recovers_m_a: f64,
    },
    Millionaire {
        reading: f64,
        threshold: f64,
        verdict: Verdict,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed {
        result: Decoded,
    },
    Aborted {
        #[serde(flatten)]
        reason: AbortReason,
        report: Option<VerificationReport>,
    },
}

/// What the attacker took away from the session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EveRecord {
    pub intercepted_slots: Vec<usize>,
    pub heterodyne: Vec<[f64; 2]>,
    /// Estimate of the real-valued message, when the attack yields one.
    pub message_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub protocol: Protocol,
    pub seed: u64,
    pub mode: MeasurementMode,
    pub n: usize,
    pub attack: AttackKind,
    pub events: Vec<Event>,
    pub eavesdropper: Option<EveRecord>,
    pub outcome: Outcome,
}

impl Transcript {
    pub fn is_aborted(&self) -> bool {
        matches!(self.outcome, Outcome::Aborted { .. })
    }

    pub fn abort_reason(&self) -> Option<&AbortReason> {
        match &self.outcome {
            Outcome::Aborted { reason, .. } => Some(reason),
            Outcome::Completed { .. } => None,
        }
    }

    pub fn decoded(&self) -> Option<&Decoded> {
        match &self.outcome {
            Outcome::Completed { result } => Some(result),
            Outcome::Aborted { .. } => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }
}

/// Append-only event log for a running session.
#[derive(Debug, Default)]
pub(crate) struct Log {
    events: Vec<Event>,
}

impl Log {
    fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    fn announce(&mut self, by: Party, content: Announcement) {
        self.push(Event::Announcement { by, content });
    }
}

/// Session context shared by the state machines.
pub(crate) struct Session<'a> {
    pub rng: SimRng,
    pub mode: MeasurementMode,
    pub attack: &'a AttackKind,
    pub log: Log,
    pub eve: Option<EveRecord>,
    policy: VerificationPolicy,
}

impl<'a> Session<'a> {
    fn new(
        seed: u64,
        mode: MeasurementMode,
        policy: &VerificationPolicy,
        stages: usize,
        attack: &'a AttackKind,
    ) -> Self {
        let alpha = policy.aggregate_alpha * SESSION_ALPHA_SHARE / stages as f64;
        let policy = VerificationPolicy {
            variance_test: policy.variance_test && mode == MeasurementMode::Sampled,
            ..policy.with_alpha(alpha)
        };
        Session {
            rng: crate::rng_from_seed(seed),
            mode,
            attack,
            log: Log::default(),
            eve: None,
            policy,
        }
    }

    fn eve(&mut self) -> &mut EveRecord {
        self.eve.get_or_insert_with(EveRecord::default)
    }

    /// Carries `slots` over `leg`, applying the generic attacks that target it.
    fn transmit(&mut self, leg: Leg, slots: &[usize], states: &mut [GaussianState]) -> Result<()> {
        self.log.push(Event::Transmission {
            leg,
            slots: slots.to_vec(),
        });
        match *self.attack {
            AttackKind::Gqcm { params, leg: target } if target == leg => {
                for &slot in slots {
                    let clone = gqcm_clone(&states[slot], &params)?;
                    states[slot] = clone.bob()?;
                }
                self.intercepted(leg, slots);
            }
            AttackKind::InterceptMeasureResend { leg: target } if target == leg => {
                let mode = self.mode;
                let mut records = Vec::with_capacity(slots.len());
                for &slot in slots {
                    let (resent, (x, p)) = intercept_measure_resend(&states[slot], mode, &mut self.rng);
                    states[slot] = resent;
                    records.push([x, p]);
                }
                self.intercepted(leg, slots);
                self.eve().heterodyne.extend(records);
            }
            AttackKind::DenialOfService {
                leg: target,
                amplitude_scale,
            } if target == leg => {
                for &slot in slots {
                    states[slot] = dos_resend(&mut self.rng, amplitude_scale)?;
                }
                self.intercepted(leg, slots);
            }
            _ => {}
        }
        Ok(())
    }

    fn intercepted(&mut self, leg: Leg, slots: &[usize]) {
        self.log.push(Event::Intercepted {
            by: Party::Eve,
            leg,
            slots: slots.to_vec(),
        });
        self.eve().intercepted_slots.extend_from_slice(slots);
    }

    /// Half the slots in X, half in P, in random order.
    fn balanced_quadratures(&mut self, count: usize) -> Vec<Quadrature> {
        let mut qs: Vec<Quadrature> = (0..count)
            .map(|i| if i < count / 2 { Quadrature::X } else { Quadrature::P })
            .collect();
        qs.shuffle(&mut self.rng);
        qs
    }

    fn homodyne(&mut self, state: &GaussianState, q: Quadrature) -> f64 {
        homodyne(state, q, self.mode, &mut self.rng)
    }

    /// Undoes each preparer squeeze on `slots`, homodynes with balanced
    /// quadratures and checks the outcomes against the revealed amplitudes.
    fn check_controls(
        &mut self,
        stage: Stage,
        by: Party,
        slots: &[usize],
        states: &[GaussianState],
        secrets: &[PrepRecord],
    ) -> Result<VerificationReport> {
        let quads = self.balanced_quadratures(slots.len());
        let mut samples = Vec::with_capacity(slots.len());
        let mut expected = Vec::with_capacity(slots.len());
        for (&slot, &q) in slots.iter().zip(&quads) {
            let rec = &secrets[slot];
            let undone = squeeze(&states[slot], rec.s.negate());
            samples.push(self.homodyne(&undone, q));
            expected.push(q.of(rec.amplitude));
        }
        self.log.push(Event::Measured {
            by,
            slots: slots.to_vec(),
            quadratures: quads,
        });
        self.verify(stage, by, &samples, &expected)
    }

    fn verify(&mut self, stage: Stage, by: Party, samples: &[f64], expected: &[f64]) -> Result<VerificationReport> {
        let report = verify_batch(samples, expected, crate::gaussian::VACUUM_VARIANCE, &self.policy)?;
        self.log.push(Event::Verification {
            stage,
            by,
            report: report.clone(),
        });
        Ok(report)
    }

    fn finish(self, protocol: Protocol, seed: u64, n: usize, outcome: Outcome) -> Transcript {
        Transcript {
            protocol,
            seed,
            mode: self.mode,
            n,
            attack: *self.attack,
            events: self.log.events,
            eavesdropper: self.eve,
            outcome,
        }
    }
}

fn abort(reason: AbortReason, report: VerificationReport) -> Outcome {
    Outcome::Aborted {
        reason,
        report: Some(report),
    }
}

/// A phase-space operation with a known parameter.
#[derive(Debug, Clone, Copy)]
pub(crate) enum PhaseOp {
    Displace(Complex64),
    Squeeze(SqueezeParam),
}

fn propagate_mean(ops: &[PhaseOp]) -> Vector2<f64> {
    ops.iter().fold(Vector2::zeros(), |mean, op| match op {
        PhaseOp::Displace(a) => mean + to_vec(*a),
        PhaseOp::Squeeze(s) => crate::gaussian::squeeze_matrix(*s) * mean,
    })
}

/// Final mean of a chain with one unknown real `u` entering as `D(u(1+i))`,
/// written as `offset + u · gain`. Exact because every step is affine.
pub(crate) fn affine_response(chain: impl Fn(Complex64) -> Vec<PhaseOp>) -> (Vector2<f64>, Vector2<f64>) {
    let offset = propagate_mean(&chain(Complex64::new(0.0, 0.0)));
    let unit = propagate_mean(&chain(Complex64::new(1.0, 1.0)));
    (offset, unit - offset)
}

/// Quadrature with the larger response to the unknown.
pub(crate) fn best_quadrature(gain: &Vector2<f64>) -> Quadrature {
    if gain[0].abs() >= gain[1].abs() {
        Quadrature::X
    } else {
        Quadrature::P
    }
}

/// Response of the mean to `D(u(1+i))` applied between `S(s)` and `S(−s)`.
pub(crate) fn unsqueezed_gain(s: SqueezeParam) -> Vector2<f64> {
    to_vec(commute_sd_inverse(Complex64::new(1.0, 1.0), s))
}
