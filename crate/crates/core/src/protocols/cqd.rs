//! Controlled quantum dialogue and its socialist-millionaire reduction.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    abort, affine_response, best_quadrature, AbortReason, Announcement, Decoded, Event, ModeSelection, Outcome, Party,
    PhaseOp, PrepDistribution, PrepRecord, Protocol, Session, SlotKey, SlotValue, Stage, Transcript, Verdict,
    TIE_SIGMAS,
};
use crate::attacks::{gqcm_clone, AttackKind, Leg};
use crate::encoding::encode_real;
use crate::gaussian::{displace, squeeze, GaussianState, SqueezeParam};
use crate::measurement::{heterodyne, MeasurementMode, VerificationPolicy};
use crate::{Error, Result};

/// How Alice draws her second-round squeezes `w_j`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WPolicy {
    /// One `w` for the whole block.
    #[default]
    SharedW,
    PerSlotW,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqdConfig {
    /// Message slots; Charlie prepares `4n`.
    pub n: usize,
    pub mode: MeasurementMode,
    pub policy: VerificationPolicy,
    pub prep: PrepDistribution,
    pub w_policy: WPolicy,
    pub seed: u64,
}

impl CqdConfig {
    pub fn new(n: usize, mode: MeasurementMode, seed: u64) -> Self {
        CqdConfig {
            n,
            mode,
            policy: VerificationPolicy::default(),
            prep: PrepDistribution::default(),
            w_policy: WPolicy::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("must be ≥ 2, got {}", self.n)));
        }
        self.policy.validate()?;
        self.prep.validate()
    }
}

enum Ending {
    Dialogue { m_b: f64 },
    Millionaire,
}

pub fn run_cqd(config: &CqdConfig, m_a: f64, m_b: f64, attack: &AttackKind) -> Result<Transcript> {
    if !m_a.is_finite() || !m_b.is_finite() {
        return Err(Error::NonFinite("message"));
    }
    match attack {
        AttackKind::InterceptDelaySwap => return Err(Error::param("attack", "delay-swap applies to qsdc only")),
        a => {
            if let Some(leg @ (Leg::BobAlice | Leg::BobCharlie)) = a.leg() {
                return Err(Error::UnknownLeg {
                    leg: leg.to_string(),
                    protocol: "cqd",
                });
            }
        }
    }
    run_flow(config, m_a, m_b, Ending::Dialogue { m_b }, attack)
}

/// Alice encodes `+assets_a`, Bob `−assets_b`; Charlie reads the sign of the
/// slot-averaged sum.
pub fn run_socialist_millionaire(assets_a: f64, assets_b: f64, config: &CqdConfig) -> Result<Transcript> {
    for (name, v) in [("assets_a", assets_a), ("assets_b", assets_b)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::param(name, format!("must be finite and ≥ 0, got {v}")));
        }
    }
    run_flow(config, assets_a, -assets_b, Ending::Millionaire, &AttackKind::None)
}

fn run_flow(config: &CqdConfig, m_a: f64, m_b: f64, ending: Ending, attack: &AttackKind) -> Result<Transcript> {
    config.validate()?;
    let n = config.n;
    let protocol = match ending {
        Ending::Dialogue { .. } => Protocol::Cqd,
        Ending::Millionaire => Protocol::Smp,
    };
    let mut sx = Session::new(config.seed, config.mode, &config.policy, 2, attack);
    let finish = |sx: Session, outcome| Ok(sx.finish(protocol, config.seed, 4 * n, outcome));

    // Charlie prepares 4n slots and sends them to Alice.
    let slots: Vec<usize> = (0..4 * n).collect();
    let secrets: Vec<PrepRecord> = slots.iter().map(|&j| config.prep.draw(j, &mut sx.rng)).collect();
    let mut states: Vec<GaussianState> = secrets.iter().map(PrepRecord::state).collect();
    sx.log.push(Event::Prepared {
        by: Party::Charlie,
        slots: 4 * n,
    });
    sx.transmit(Leg::CharlieAlice, &slots, &mut states)?;

    // First-round check by Alice.
    let sel = ModeSelection::random(&slots, 2 * n, &mut sx.rng);
    sx.log.push(Event::ModeSelection {
        by: Party::Alice,
        selection: sel.clone(),
    });
    sx.log.announce(
        Party::Alice,
        Announcement::ControlCoordinates {
            slots: sel.control_slots.clone(),
        },
    );
    sx.log.announce(
        Party::Charlie,
        Announcement::Secrets {
            records: sel.control_slots.iter().map(|&j| secrets[j]).collect(),
        },
    );
    let report = sx.check_controls(
        Stage::AliceControls,
        Party::Alice,
        &sel.control_slots,
        &states,
        &secrets,
    )?;
    if !report.pass {
        let reason = AbortReason::ControlCheckFailed {
            stage: Stage::AliceControls,
        };
        return finish(sx, abort(reason, report));
    }

    // Alice encodes on n slots, keeps n as second-round controls, squeezes all.
    let mut pool = sel.message_slots.clone();
    pool.shuffle(&mut sx.rng);
    let (mut messages, mut controls) = (pool[..n].to_vec(), pool[n..].to_vec());
    messages.sort_unstable();
    controls.sort_unstable();
    sx.log.push(Event::PayloadSplit {
        by: Party::Alice,
        message_slots: messages.clone(),
        decoy_slots: controls.clone(),
    });
    for &slot in &messages {
        states[slot] = displace(&states[slot], encode_real(m_a));
    }
    sx.log.push(Event::Encoded {
        by: Party::Alice,
        slots: messages.clone(),
    });
    let shared = config.prep.draw_squeeze(&mut sx.rng);
    let keys: Vec<SlotKey> = sel
        .message_slots
        .iter()
        .map(|&slot| SlotKey {
            slot,
            w: match config.w_policy {
                WPolicy::SharedW => shared,
                WPolicy::PerSlotW => config.prep.draw_squeeze(&mut sx.rng),
            },
        })
        .collect();
    let mut w = vec![SqueezeParam::none(); 4 * n];
    for k in &keys {
        w[k.slot] = k.w;
        states[k.slot] = squeeze(&states[k.slot], k.w);
    }

    let eve_copies = match *attack {
        AttackKind::Gqcm {
            params,
            leg: Leg::AliceBob,
        } => {
            let copies = messages
                .iter()
                .map(|&slot| gqcm_clone(&states[slot], &params)?.eve())
                .collect::<Result<Vec<_>>>()?;
            Some((copies, -(params.gain() * (1.0 - params.transmission())).sqrt()))
        }
        _ => None,
    };
    sx.transmit(Leg::AliceBob, &sel.message_slots, &mut states)?;
    if matches!(attack, AttackKind::ParticipantCharlie) {
        charlie_intercepts(&mut sx, &sel.message_slots, &messages, &mut states, &secrets);
    }

    // Second-round check by Bob.
    sx.log.announce(Party::Bob, Announcement::ReceiptConfirmed);
    sx.log.announce(
        Party::Alice,
        Announcement::ControlCoordinates {
            slots: controls.clone(),
        },
    );
    sx.log
        .announce(Party::Alice, Announcement::SqueezeKeys { keys: keys.clone() });
    for k in &keys {
        states[k.slot] = squeeze(&states[k.slot], k.w.negate());
    }
    sx.log.announce(
        Party::Charlie,
        Announcement::Secrets {
            records: controls.iter().map(|&j| secrets[j]).collect(),
        },
    );
    let report = sx.check_controls(Stage::BobControls, Party::Bob, &controls, &states, &secrets)?;
    if !report.pass {
        let reason = AbortReason::ControlCheckFailed {
            stage: Stage::BobControls,
        };
        return finish(sx, abort(reason, report));
    }

    for &slot in &messages {
        states[slot] = displace(&states[slot], encode_real(m_b));
    }
    sx.log.push(Event::Encoded {
        by: Party::Bob,
        slots: messages.clone(),
    });

    let result = match ending {
        Ending::Dialogue { m_b } => {
            sx.log.announce(
                Party::Charlie,
                Announcement::Secrets {
                    records: messages.iter().map(|&j| secrets[j]).collect(),
                },
            );
            let beta = encode_real(m_b);
            let mut quads = Vec::with_capacity(n);
            let mut announced = Vec::with_capacity(n);
            for &slot in &messages {
                let rec = &secrets[slot];
                let (offset, gain) = affine_response(|u| {
                    vec![
                        PhaseOp::Displace(rec.amplitude),
                        PhaseOp::Squeeze(rec.s),
                        PhaseOp::Displace(u),
                        PhaseOp::Squeeze(w[slot]),
                        PhaseOp::Squeeze(w[slot].negate()),
                        PhaseOp::Displace(beta),
                        PhaseOp::Squeeze(rec.s.negate()),
                        PhaseOp::Displace(-rec.amplitude),
                    ]
                });
                let q = best_quadrature(&gain);
                let undone = displace(&squeeze(&states[slot], rec.s.negate()), -rec.amplitude);
                let y = sx.homodyne(&undone, q);
                let m_a_hat = (y - offset[q.index()]) / gain[q.index()];
                quads.push(q);
                announced.push(SlotValue {
                    slot,
                    value: encode_real(m_a_hat + m_b),
                });
            }
            sx.log.push(Event::Measured {
                by: Party::Bob,
                slots: messages.clone(),
                quadratures: quads,
            });
            sx.log.announce(
                Party::Bob,
                Announcement::Sums {
                    values: announced.clone(),
                },
            );
            if let Some((copies, kappa)) = eve_copies {
                eve_estimates(&mut sx, &messages, &copies, kappa, &secrets, &w);
            }
            let sum = announced.iter().map(|v| v.value.re).sum::<f64>() / n as f64;
            Decoded::Dialogue {
                announced,
                alice_recovers_m_b: sum - m_a,
                bob_recovers_m_a: sum - m_b,
            }
        }
        Ending::Millionaire => {
            sx.transmit(Leg::BobCharlie, &messages, &mut states)?;
            let mut quads = Vec::with_capacity(n);
            let (mut num, mut den) = (0.0, 0.0);
            for &slot in &messages {
                let rec = &secrets[slot];
                let (offset, gain) = affine_response(|u| {
                    vec![
                        PhaseOp::Displace(rec.amplitude),
                        PhaseOp::Squeeze(rec.s),
                        PhaseOp::Displace(u),
                        PhaseOp::Squeeze(w[slot]),
                        PhaseOp::Squeeze(w[slot].negate()),
                        PhaseOp::Squeeze(rec.s.negate()),
                        PhaseOp::Displace(-rec.amplitude),
                    ]
                });
                let q = best_quadrature(&gain);
                let undone = displace(&squeeze(&states[slot], rec.s.negate()), -rec.amplitude);
                let y = sx.homodyne(&undone, q);
                let g = gain[q.index()];
                num += g * (y - offset[q.index()]);
                den += g * g;
                quads.push(q);
            }
            sx.log.push(Event::Measured {
                by: Party::Charlie,
                slots: messages.clone(),
                quadratures: quads,
            });
            let reading = num / den;
            let threshold = match config.mode {
                MeasurementMode::Expectation => 1e-9,
                MeasurementMode::Sampled => TIE_SIGMAS * (crate::gaussian::VACUUM_VARIANCE / den).sqrt(),
            };
            let verdict = if reading > threshold {
                Verdict::A
            } else if reading < -threshold {
                Verdict::B
            } else {
                Verdict::TieUndetermined
            };
            sx.log.announce(Party::Charlie, Announcement::Verdict { verdict });
            Decoded::Millionaire {
                reading,
                threshold,
                verdict,
            }
        }
    };
    finish(sx, Outcome::Completed { result })
}

/// Charlie undoes only his own squeeze on the Alice→Bob leg, heterodynes and
/// re-prepares `S(s_j)` on the outcome. His estimate of `m_A` assumes `w = 0`.
fn charlie_intercepts(
    sx: &mut Session,
    slots: &[usize],
    messages: &[usize],
    states: &mut [GaussianState],
    secrets: &[PrepRecord],
) {
    let mut estimates = Vec::with_capacity(messages.len());
    let mut records = Vec::with_capacity(slots.len());
    for &slot in slots {
        let rec = &secrets[slot];
        let (x, p) = heterodyne(&squeeze(&states[slot], rec.s.negate()), sx.mode, &mut sx.rng);
        if messages.binary_search(&slot).is_ok() {
            estimates.push(((x - rec.amplitude.re) + (p - rec.amplitude.im)) / 2.0);
        }
        states[slot] = squeeze(&GaussianState::coherent(Complex64::new(x, p)), rec.s);
        records.push([x, p]);
    }
    sx.log.push(Event::Intercepted {
        by: Party::Charlie,
        leg: Leg::AliceBob,
        slots: slots.to_vec(),
    });
    let eve = sx.eve();
    eve.intercepted_slots.extend_from_slice(slots);
    eve.heterodyne.extend(records);
    eve.message_estimate = Some(estimates.iter().sum::<f64>() / estimates.len() as f64);
}

/// Eve heterodynes her clones after all keys are public and inverts the known
/// map, scaled by her cloning coefficient `kappa`.
fn eve_estimates(
    sx: &mut Session,
    messages: &[usize],
    copies: &[GaussianState],
    kappa: f64,
    secrets: &[PrepRecord],
    w: &[SqueezeParam],
) {
    let mut estimates = Vec::with_capacity(messages.len());
    let mut records = Vec::with_capacity(messages.len());
    for (&slot, copy) in messages.iter().zip(copies) {
        let rec = &secrets[slot];
        let (offset, gain) = affine_response(|u| {
            vec![
                PhaseOp::Displace(rec.amplitude),
                PhaseOp::Squeeze(rec.s),
                PhaseOp::Displace(u),
                PhaseOp::Squeeze(w[slot]),
            ]
        });
        let (x, p) = heterodyne(copy, sx.mode, &mut sx.rng);
        records.push([x, p]);
        let g = gain * kappa;
        if g.norm_squared() > 0.0 {
            estimates.push(g.dot(&(nalgebra::Vector2::new(x, p) - offset * kappa)) / g.norm_squared());
        }
    }
    let eve = sx.eve();
    eve.heterodyne.extend(records);
    if !estimates.is_empty() {
        eve.message_estimate = Some(estimates.iter().sum::<f64>() / estimates.len() as f64);
    }
}
