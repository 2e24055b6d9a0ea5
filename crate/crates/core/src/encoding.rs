//! Three-bit amplitude encoding.
//!
//! The real line is cut at −3, −2, …, 3 into eight cells; cell `k` carries the
//! bits of `k`. A symbol is sent as `β = r + ir` with `r` drawn uniformly from
//! the interior of its cell, so both quadratures carry the same value.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Interior cell boundaries, ascending.
pub const BOUNDARIES: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Symbol3(u8);

impl Symbol3 {
    pub fn new(value: u8) -> Result<Self> {
        if value <= 7 {
            Ok(Symbol3(value))
        } else {
            Err(Error::param("symbol", format!("{value} is outside 0..=7")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Symbol3> {
        (0..8).map(Symbol3)
    }

    /// Decode cell `[lo, hi)`; the outer cells are unbounded.
    pub fn cell(self) -> (f64, f64) {
        let k = self.0 as usize;
        let lo = if k == 0 { f64::NEG_INFINITY } else { BOUNDARIES[k - 1] };
        let hi = if k == 7 { f64::INFINITY } else { BOUNDARIES[k] };
        (lo, hi)
    }
}

impl TryFrom<u8> for Symbol3 {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Symbol3::new(v)
    }
}

impl From<Symbol3> for u8 {
    fn from(s: Symbol3) -> u8 {
        s.0
    }
}

impl fmt::Display for Symbol3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03b}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Distance kept from each cell edge when drawing `r`.
    pub interior_margin: f64,
    /// Width of the truncated sampling interval for the two unbounded cells.
    pub unbounded_cell_width: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            interior_margin: 0.1,
            unbounded_cell_width: 1.0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.interior_margin;
        if !(0.0..0.5).contains(&d) {
            return Err(Error::param("interior_margin", format!("{d} must lie in [0, 0.5)")));
        }
        if !(self.unbounded_cell_width > 2.0 * d && self.unbounded_cell_width.is_finite()) {
            return Err(Error::param(
                "unbounded_cell_width",
                "must be finite and exceed twice the interior margin",
            ));
        }
        Ok(())
    }

    /// Interval `r` is drawn from for `sym`.
    pub fn sampling_interval(&self, sym: Symbol3) -> (f64, f64) {
        let d = self.interior_margin;
        let w = self.unbounded_cell_width;
        let (lo, hi) = sym.cell();
        match sym.value() {
            0 => (hi - w + d, hi - d),
            7 => (lo + d, lo + w - d),
            _ => (lo + d, hi - d),
        }
    }
}

/// Draws `β = r + ir` for `sym`.
pub fn encode_symbol<R: Rng + ?Sized>(sym: Symbol3, cfg: &EncoderConfig, rng: &mut R) -> Complex64 {
    let (lo, hi) = cfg.sampling_interval(sym);
    let r = lo + (hi - lo) * rng.random::<f64>();
    Complex64::new(r, r)
}

/// Cell index of `x`; a value on a boundary belongs to the cell on its right.
pub fn decode_value(x: f64) -> Result<Symbol3> {
    if x.is_nan() {
        return Err(Error::NonFinite("decode input"));
    }
    Ok(Symbol3(BOUNDARIES.iter().filter(|&&b| x >= b).count() as u8))
}

/// `β = m(1 + i)` for a real-valued message.
pub fn encode_real(m: f64) -> Complex64 {
    Complex64::new(m, m)
}

/// Probability that `r + N(0, noise_variance)` leaves the cell of the symbol
/// `r` was drawn for, averaged over the eight symbols and over uniform `r`.
/// The average over `r` is a composite Simpson rule on Gaussian tails.
pub fn symbol_error_rate(cfg: &EncoderConfig, noise_variance: f64) -> Result<f64> {
    cfg.validate()?;
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::param("noise_variance", "must be > 0"));
    }
    const PANELS: usize = 2000;
    let std = Normal::new(0.0, noise_variance.sqrt()).expect("positive sd");
    let total: f64 = Symbol3::all()
        .map(|sym| {
            let (lo_cell, hi_cell) = sym.cell();
            let leave = |r: f64| {
                let below = if lo_cell.is_finite() { std.cdf(lo_cell - r) } else { 0.0 };
                let above = if hi_cell.is_finite() { std.cdf(r - hi_cell) } else { 0.0 };
                below + above
            };
            let (a, b) = cfg.sampling_interval(sym);
            if b <= a {
                return leave(a);
            }
            let h = (b - a) / PANELS as f64;
            let mut acc = leave(a) + leave(b);
            for i in 1..PANELS {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * leave(a + i as f64 * h);
            }
            acc * h / 3.0 / (b - a)
        })
        .sum();
    Ok(total / 8.0)
}

/// Groups an ASCII `0`/`1` string into big-endian 3-bit symbols, zero-padding
/// the tail.
pub fn bits_to_symbols(bits: &str) -> Result<Vec<Symbol3>> {
    let bits = bits.trim();
    if let Some(bad) = bits.chars().find(|c| *c != '0' && *c != '1') {
        return Err(Error::MalformedMessage(format!(
            "unexpected character {bad:?} in bit string"
        )));
    }
    Ok(bits
        .as_bytes()
        .chunks(3)
        .map(|chunk| {
            let v = (0..3).fold(0u8, |acc, i| (acc << 1) | chunk.get(i).map_or(0, |b| b - b'0'));
            Symbol3(v)
        })
        .collect())
}

/// Inverse of [`bits_to_symbols`]; `bit_len` trims the padding.
pub fn symbols_to_bits(symbols: &[Symbol3], bit_len: usize) -> String {
    let mut s: String = symbols.iter().map(|sym| sym.to_string()).collect();
    s.truncate(bit_len);
    s
}
