//! `start:stop:step` ranges shared by the sweep and Wigner grids.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack allowed when deciding whether `stop` is reached.
pub const STOP_TOLERANCE: f64 = 1e-9;

/// An arithmetic progression `start, start + step, …` that includes `stop`
/// whenever it is hit within [`STOP_TOLERANCE`]. A single value is a range of
/// one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    start: f64,
    stop: f64,
    step: f64,
}

impl SweepRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::NonFinite("range"));
        }
        if stop < start {
            return Err(Error::InvalidRange(format!("{start}:{stop}:{step} (stop < start)")));
        }
        if step <= 0.0 && stop > start {
            return Err(Error::InvalidRange(format!("{start}:{stop}:{step} (step must be > 0)")));
        }
        Ok(SweepRange { start, stop, step })
    }

    pub fn single(value: f64) -> Result<Self> {
        Self::new(value, value, 1.0)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        if self.stop == self.start {
            return 1;
        }
        ((self.stop - self.start) / self.step + STOP_TOLERANCE).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

impl FromStr for SweepRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse =
            |t: &str| -> Result<f64> { t.trim().parse::<f64>().map_err(|_| Error::InvalidRange(s.to_string())) };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Self::single(parse(v)?),
            [a, b, c] => Self::new(parse(a)?, parse(b)?, parse(c)?),
            _ => Err(Error::InvalidRange(s.to_string())),
        }
    }
}

impl fmt::Display for SweepRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() == 1 {
            write!(f, "{}", self.start)
        } else {
            write!(f, "{}:{}:{}", self.start, self.stop, self.step)
        }
    }
}
