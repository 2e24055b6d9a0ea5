//! One-way secure direct communication from Alice to Bob.
//!
//! Bob prepares `S(s_j) D(α_j)|0⟩` on `n` slots and keeps `(α_j, s_j)`
//! secret. Alice checks half of them against Bob's reveals, encodes `D(β)` on a
//! quarter and returns the other quarter untouched as decoys. Bob undoes
//! `S(s_j)`, homodynes, checks decoys and reads the message from the rest.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    abort, unsqueezed_gain, AbortReason, Announcement, Decoded, Event, ModeSelection, Outcome, Party, PrepDistribution,
    PrepRecord, Protocol, Session, SlotDecode, Stage, Transcript,
};
use crate::attacks::{AttackKind, Leg};
use crate::encoding::{
    bits_to_symbols, decode_value, encode_real, encode_symbol, symbols_to_bits, EncoderConfig, Symbol3,
};
use crate::gaussian::{displace, squeeze, GaussianState, VACUUM_VARIANCE};
use crate::measurement::{MeasurementMode, Quadrature, VerificationPolicy};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QsdcConfig {
    pub n: usize,
    pub mode: MeasurementMode,
    pub policy: VerificationPolicy,
    pub encoder: EncoderConfig,
    pub prep: PrepDistribution,
    pub seed: u64,
}

impl QsdcConfig {
    pub fn new(n: usize, mode: MeasurementMode, seed: u64) -> Self {
        QsdcConfig {
            n,
            mode,
            policy: VerificationPolicy::default(),
            encoder: EncoderConfig::default(),
            prep: PrepDistribution::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 || self.n % 4 != 0 {
            return Err(Error::param(
                "n",
                format!("must be ≥ 8 and divisible by 4, got {}", self.n),
            ));
        }
        self.policy.validate()?;
        self.encoder.validate()?;
        self.prep.validate()
    }

    pub fn message_slots(&self) -> usize {
        self.n / 4
    }
}

/// Alice's payload: 3-bit symbols from a bit string, or one real value
/// repeated on every message slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QsdcMessage {
    Bits(String),
    Real(f64),
}

enum Payload {
    Symbols { symbols: Vec<Symbol3>, bit_len: usize },
    Real(f64),
}

impl Payload {
    fn parse(message: &QsdcMessage, slots: usize) -> Result<Self> {
        match message {
            QsdcMessage::Bits(bits) => {
                let symbols = bits_to_symbols(bits)?;
                if symbols.is_empty() {
                    return Err(Error::MalformedMessage("empty bit string".into()));
                }
                if symbols.len() > slots {
                    return Err(Error::MalformedMessage(format!(
                        "{} symbols do not fit in {slots} message slots",
                        symbols.len()
                    )));
                }
                Ok(Payload::Symbols {
                    symbols,
                    bit_len: bits.trim().len(),
                })
            }
            QsdcMessage::Real(m) if m.is_finite() => Ok(Payload::Real(*m)),
            QsdcMessage::Real(_) => Err(Error::NonFinite("message")),
        }
    }
}

fn check_attack(attack: &AttackKind) -> Result<()> {
    let unknown = |leg: Leg| Error::UnknownLeg {
        leg: leg.to_string(),
        protocol: "qsdc",
    };
    match attack {
        AttackKind::ParticipantCharlie => Err(Error::param("attack", "qsdc has no controller to attack with")),
        a => match a.leg() {
            Some(leg @ (Leg::CharlieAlice | Leg::BobCharlie)) => Err(unknown(leg)),
            _ => Ok(()),
        },
    }
}

/// Inverse-variance weighted mean; weights are squared gains.
fn weighted_mean(values: &[(f64, f64)]) -> f64 {
    let (num, den) = values
        .iter()
        .fold((0.0, 0.0), |(n, d), &(v, gain)| (n + gain * gain * v, d + gain * gain));
    num / den
}

pub fn run_qsdc(config: &QsdcConfig, message: &QsdcMessage, attack: &AttackKind) -> Result<Transcript> {
    config.validate()?;
    check_attack(attack)?;
    let payload = Payload::parse(message, config.message_slots())?;
    let n = config.n;
    let mut sx = Session::new(config.seed, config.mode, &config.policy, 2, attack);
    let finish = |sx: Session, outcome| Ok(sx.finish(Protocol::Qsdc, config.seed, n, outcome));

    // Bob prepares and sends the block.
    let slots: Vec<usize> = (0..n).collect();
    let secrets: Vec<PrepRecord> = slots.iter().map(|&j| config.prep.draw(j, &mut sx.rng)).collect();
    let mut states: Vec<GaussianState> = secrets.iter().map(PrepRecord::state).collect();
    sx.log.push(Event::Prepared {
        by: Party::Bob,
        slots: n,
    });
    sx.transmit(Leg::BobAlice, &slots, &mut states)?;

    let mut swap: Option<(Vec<GaussianState>, Vec<PrepRecord>)> = None;
    if matches!(attack, AttackKind::InterceptDelaySwap) {
        let fake: Vec<PrepRecord> = slots.iter().map(|&j| config.prep.draw(j, &mut sx.rng)).collect();
        let held = std::mem::replace(&mut states, fake.iter().map(PrepRecord::state).collect());
        sx.intercepted(Leg::BobAlice, &slots);
        swap = Some((held, fake));
    }

    // Alice splits control and message modes.
    let sel = ModeSelection::random(&slots, n / 2, &mut sx.rng);
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

    // Bob reveals control secrets; Alice checks them.
    sx.log.announce(
        Party::Bob,
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

    // Alice encodes on a quarter, keeps a quarter as decoys.
    let mut pool = sel.message_slots.clone();
    pool.shuffle(&mut sx.rng);
    let (mut messages, mut decoys) = (pool[..n / 4].to_vec(), pool[n / 4..].to_vec());
    messages.sort_unstable();
    decoys.sort_unstable();
    sx.log.push(Event::PayloadSplit {
        by: Party::Alice,
        message_slots: messages.clone(),
        decoy_slots: decoys.clone(),
    });
    let mut sent = Vec::with_capacity(messages.len());
    for (i, &slot) in messages.iter().enumerate() {
        let beta = match &payload {
            Payload::Symbols { symbols, .. } => {
                let sym = symbols[i % symbols.len()];
                sent.push(sym);
                encode_symbol(sym, &config.encoder, &mut sx.rng)
            }
            Payload::Real(m) => encode_real(*m),
        };
        states[slot] = displace(&states[slot], beta);
    }
    sx.log.push(Event::Encoded {
        by: Party::Alice,
        slots: messages.clone(),
    });

    sx.transmit(Leg::AliceBob, &sel.message_slots, &mut states)?;
    if let Some((held, fake)) = swap.as_ref() {
        let estimates = swap_reencode(&mut sx, &sel.message_slots, &mut states, held, fake);
        let on_messages: Vec<(f64, f64)> = sel
            .message_slots
            .iter()
            .zip(&estimates)
            .filter(|(slot, _)| messages.binary_search(slot).is_ok())
            .map(|(_, e)| *e)
            .collect();
        sx.eve().message_estimate = Some(weighted_mean(&on_messages));
    }

    // Bob undoes his squeeze and homodynes the quadrature most sensitive to β.
    let mut readout = Vec::with_capacity(sel.message_slots.len());
    for &slot in &sel.message_slots {
        let rec = &secrets[slot];
        let gain = unsqueezed_gain(rec.s);
        let q = super::best_quadrature(&gain);
        let y = sx.homodyne(&squeeze(&states[slot], rec.s.negate()), q);
        readout.push((slot, q, y, gain[q.index()]));
    }
    sx.log.push(Event::Measured {
        by: Party::Bob,
        slots: sel.message_slots.clone(),
        quadratures: readout.iter().map(|r| r.1).collect(),
    });
    let lookup = |slot: usize| readout.iter().find(|r| r.0 == slot).copied().expect("measured slot");

    // Alice names the decoys; Bob checks them.
    sx.log
        .announce(Party::Alice, Announcement::DecoyCoordinates { slots: decoys.clone() });
    let (samples, expected): (Vec<f64>, Vec<f64>) = decoys
        .iter()
        .map(|&slot| {
            let (_, q, y, _) = lookup(slot);
            (y, q.of(secrets[slot].amplitude))
        })
        .unzip();
    let report = sx.verify(Stage::BobDecoys, Party::Bob, &samples, &expected)?;
    if !report.pass {
        return finish(sx, abort(AbortReason::DecoyCheckFailed, report));
    }

    // Bob inverts the commutation for each message slot.
    let estimates: Vec<(f64, f64)> = messages
        .iter()
        .map(|&slot| {
            let (_, q, y, gain) = lookup(slot);
            ((y - q.of(secrets[slot].amplitude)) / gain, gain)
        })
        .collect();
    let result = match payload {
        Payload::Real(_) => Decoded::Real {
            estimate: weighted_mean(&estimates),
            slot_estimates: estimates.iter().map(|e| e.0).collect(),
        },
        Payload::Symbols { symbols, bit_len } => {
            let mut slot_decodes = Vec::with_capacity(messages.len());
            for (i, &slot) in messages.iter().enumerate() {
                slot_decodes.push(SlotDecode {
                    slot,
                    sent: sent[i],
                    estimate: estimates[i].0,
                    noise_variance: VACUUM_VARIANCE / (estimates[i].1 * estimates[i].1),
                    decoded: decode_value(estimates[i].0)?,
                });
            }
            let decoded: Vec<Symbol3> = (0..symbols.len())
                .map(|k| {
                    let carriers: Vec<(f64, f64)> = estimates.iter().skip(k).step_by(symbols.len()).copied().collect();
                    decode_value(weighted_mean(&carriers))
                })
                .collect::<Result<_>>()?;
            Decoded::Symbols {
                bits: symbols_to_bits(&decoded, bit_len),
                symbols: decoded,
                slots: slot_decodes,
            }
        }
    };
    finish(sx, Outcome::Completed { result })
}

/// Eve reads Alice's encoding off her own states (she knows their secrets),
/// copies it onto Bob's held states and forwards those. Returns her per-slot
/// estimate and its gain, in `slots` order.
fn swap_reencode(
    sx: &mut Session,
    slots: &[usize],
    states: &mut [GaussianState],
    held: &[GaussianState],
    fake: &[PrepRecord],
) -> Vec<(f64, f64)> {
    let mut estimates = Vec::with_capacity(slots.len());
    for &slot in slots {
        let rec = &fake[slot];
        let gain = unsqueezed_gain(rec.s);
        let q: Quadrature = super::best_quadrature(&gain);
        let y = sx.homodyne(&squeeze(&states[slot], rec.s.negate()), q);
        let m = (y - q.of(rec.amplitude)) / gain[q.index()];
        estimates.push((m, gain[q.index()]));
        states[slot] = displace(&held[slot], Complex64::new(m, m));
    }
    sx.intercepted(Leg::AliceBob, slots);
    estimates
}
