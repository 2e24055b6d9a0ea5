//! Structural checks on a finished transcript.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{Announcement, Event, Outcome, Party, Transcript};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TranscriptViolation {
    #[error("slot bookkeeping: {0}")]
    SlotConservation(String),
    #[error("secrets of slot {slot} announced at event {event} before they may be revealed")]
    Leak { slot: usize, event: usize },
    #[error("abort bookkeeping: {0}")]
    Abort(String),
}

/// Checks slot conservation, no-leak ordering of revealed secrets and abort
/// completeness.
pub fn check_transcript(t: &Transcript) -> Result<(), TranscriptViolation> {
    check_slots(t)?;
    check_reveals(t)?;
    check_outcome(t)
}

fn conservation(msg: impl Into<String>) -> TranscriptViolation {
    TranscriptViolation::SlotConservation(msg.into())
}

fn check_slots(t: &Transcript) -> Result<(), TranscriptViolation> {
    let prepared = t.events.iter().find_map(|e| match e {
        Event::Prepared { slots, .. } => Some(*slots),
        _ => None,
    });
    let Some(prepared) = prepared else {
        return Err(conservation("no preparation event"));
    };
    if prepared != t.n {
        return Err(conservation(format!("{prepared} slots prepared, header says {}", t.n)));
    }
    let all: BTreeSet<usize> = (0..prepared).collect();
    for e in &t.events {
        match e {
            Event::ModeSelection { selection, .. } => {
                let c: BTreeSet<usize> = selection.control_slots.iter().copied().collect();
                let m: BTreeSet<usize> = selection.message_slots.iter().copied().collect();
                if c.len() != selection.control_slots.len() || m.len() != selection.message_slots.len() {
                    return Err(conservation("duplicate slot in mode selection"));
                }
                if !c.is_disjoint(&m) || c.union(&m).copied().collect::<BTreeSet<_>>() != all {
                    return Err(conservation("mode selection is not a partition of the prepared slots"));
                }
                if c.len() != m.len() {
                    return Err(conservation("control and message halves differ in size"));
                }
                if let Some(split) = t.events.iter().find_map(|e| match e {
                    Event::PayloadSplit {
                        message_slots,
                        decoy_slots,
                        ..
                    } => Some((message_slots, decoy_slots)),
                    _ => None,
                }) {
                    let a: BTreeSet<usize> = split.0.iter().copied().collect();
                    let b: BTreeSet<usize> = split.1.iter().copied().collect();
                    if a.len() != b.len()
                        || a.len() + b.len() != m.len()
                        || !a.is_disjoint(&b)
                        || a.union(&b).copied().collect::<BTreeSet<_>>() != m
                    {
                        return Err(conservation("payload split is not a halving of the message slots"));
                    }
                }
            }
            Event::Transmission { slots, .. } | Event::Intercepted { slots, .. } | Event::Encoded { slots, .. } => {
                if let Some(s) = slots.iter().find(|s| !all.contains(s)) {
                    return Err(conservation(format!("unknown slot {s}")));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// A slot's preparation secrets may be announced once it has been publicly
/// named as a control, or once Bob has encoded on it (the dialogue's final
/// reveal). Squeeze keys may only be announced after receipt is confirmed.
fn check_reveals(t: &Transcript) -> Result<(), TranscriptViolation> {
    let mut revealable = BTreeSet::new();
    let mut received = false;
    for (i, e) in t.events.iter().enumerate() {
        match e {
            Event::Announcement { content, .. } => match content {
                Announcement::ControlCoordinates { slots } => revealable.extend(slots.iter().copied()),
                Announcement::Secrets { records } => {
                    if let Some(r) = records.iter().find(|r| !revealable.contains(&r.slot)) {
                        return Err(TranscriptViolation::Leak { slot: r.slot, event: i });
                    }
                }
                Announcement::ReceiptConfirmed => received = true,
                Announcement::SqueezeKeys { keys } if !received => {
                    return Err(TranscriptViolation::Leak {
                        slot: keys.first().map_or(0, |k| k.slot),
                        event: i,
                    });
                }
                _ => {}
            },
            Event::Encoded { by: Party::Bob, slots } => revealable.extend(slots.iter().copied()),
            _ => {}
        }
    }
    Ok(())
}

fn check_outcome(t: &Transcript) -> Result<(), TranscriptViolation> {
    let reports: Vec<(usize, &super::VerificationReport)> = t
        .events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match e {
            Event::Verification { report, .. } => Some((i, report)),
            _ => None,
        })
        .collect();
    match &t.outcome {
        Outcome::Completed { .. } => {
            if reports.iter().any(|(_, r)| !r.pass) {
                return Err(TranscriptViolation::Abort(
                    "completed after a failed verification".into(),
                ));
            }
            if reports.is_empty() {
                return Err(TranscriptViolation::Abort("completed without any verification".into()));
            }
        }
        Outcome::Aborted { report, .. } => {
            let Some(report) = report else {
                return Err(TranscriptViolation::Abort("abort carries no report".into()));
            };
            if report.pass {
                return Err(TranscriptViolation::Abort("abort carries a passing report".into()));
            }
            let Some(&(last, logged)) = reports.last() else {
                return Err(TranscriptViolation::Abort("abort without a logged verification".into()));
            };
            if logged != report || last + 1 != t.events.len() {
                return Err(TranscriptViolation::Abort(
                    "events continue after the failing verification".into(),
                ));
            }
            if reports[..reports.len() - 1].iter().any(|(_, r)| !r.pass) {
                return Err(TranscriptViolation::Abort(
                    "session continued past an earlier failure".into(),
                ));
            }
        }
    }
    Ok(())
}
