//! Single-mode Gaussian states in phase space.
//!
//! A state is its quadrature mean `(x̄, p̄)` and 2×2 covariance. Displacement
//! shifts the mean; squeezing acts as a symplectic matrix `M(s)` on both the
//! mean and the covariance. With `S†(s) a S(s) = a cosh r − a† e^{iθ} sinh r`
//! the matrix is
//!
//! ```text
//! M(s) = cosh r · I − sinh r · [[cos θ,  sin θ],
//!                               [sin θ, −cos θ]]
//! ```

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::range::SweepRange;
use crate::{Error, Result};

/// Quadrature variance of the vacuum under `X = (a + a†)/2`.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// Lower bound on `det(cov)` for any physical state: `(1/4)²`.
pub const MIN_DET: f64 = VACUUM_VARIANCE * VACUUM_VARIANCE;

const PD_TOLERANCE: f64 = 1e-12;

/// Builds a complex amplitude, rejecting NaN and infinities.
pub fn complex(re: f64, im: f64) -> Result<Complex64> {
    if re.is_finite() && im.is_finite() {
        Ok(Complex64::new(re, im))
    } else {
        Err(Error::NonFinite("complex amplitude"))
    }
}

pub(crate) fn to_vec(z: Complex64) -> Vector2<f64> {
    Vector2::new(z.re, z.im)
}

pub(crate) fn to_complex(v: &Vector2<f64>) -> Complex64 {
    Complex64::new(v[0], v[1])
}

/// Squeezing parameter `s = r e^{iθ}` with `r ≥ 0` and `θ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParam {
    r: f64,
    theta: f64,
}

impl SqueezeParam {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r.is_finite() && theta.is_finite()) {
            return Err(Error::NonFinite("squeeze parameter"));
        }
        if r < 0.0 {
            return Err(Error::param("r", format!("squeeze magnitude must be ≥ 0, got {r}")));
        }
        Ok(SqueezeParam {
            r,
            theta: wrap_phase(theta),
        })
    }

    pub fn from_complex(s: Complex64) -> Result<Self> {
        Self::new(s.norm(), s.arg())
    }

    /// `s = 0`.
    pub fn none() -> Self {
        SqueezeParam { r: 0.0, theta: 0.0 }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.r, self.theta)
    }

    /// `−s`, so that `S(−s) = S†(s)`.
    pub fn negate(&self) -> Self {
        SqueezeParam {
            r: self.r,
            theta: wrap_phase(self.theta + PI),
        }
    }
}

fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Phase-space matrix of `S(s)`.
pub fn squeeze_matrix(s: SqueezeParam) -> Matrix2<f64> {
    let (ch, sh) = (s.r.cosh(), s.r.sinh());
    let (c, sn) = (s.theta.cos(), s.theta.sin());
    Matrix2::new(ch - sh * c, -sh * sn, -sh * sn, ch + sh * c)
}

/// Single-mode Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    mean: Vector2<f64>,
    cov: Matrix2<f64>,
}

impl GaussianState {
    /// Validates and symmetrizes. Rejects non-finite entries, covariances that
    /// are not positive definite and covariances below the uncertainty bound.
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian state"));
        }
        let cov = (cov + cov.transpose()) * 0.5;
        let (det, trace) = (cov.determinant(), cov.trace());
        if det <= PD_TOLERANCE || trace <= PD_TOLERANCE || cov[(0, 0)] <= 0.0 {
            return Err(Error::NotPositiveDefinite { det, trace });
        }
        // Cancellation in det grows with the magnitude of the entries.
        let scale = (cov[(0, 0)] * cov[(1, 1)]).max(1.0);
        if det < MIN_DET - PD_TOLERANCE * scale {
            return Err(Error::Uncertainty(det));
        }
        Ok(GaussianState { mean, cov })
    }

    pub fn vacuum() -> Self {
        GaussianState {
            mean: Vector2::zeros(),
            cov: Matrix2::identity() * VACUUM_VARIANCE,
        }
    }

    /// Coherent state `|α⟩ = D(α)|0⟩`.
    pub fn coherent(alpha: Complex64) -> Self {
        displace(&Self::vacuum(), alpha)
    }

    pub fn mean(&self) -> Vector2<f64> {
        self.mean
    }

    pub fn mean_complex(&self) -> Complex64 {
        to_complex(&self.mean)
    }

    pub fn cov(&self) -> Matrix2<f64> {
        self.cov
    }

    pub fn det(&self) -> f64 {
        self.cov.determinant()
    }

    /// Applies the affine phase-space map `mean → m·mean`, `cov → m·cov·mᵀ`.
    pub(crate) fn transformed(&self, m: &Matrix2<f64>) -> Self {
        GaussianState {
            mean: m * self.mean,
            cov: m * self.cov * m.transpose(),
        }
    }
}

impl Default for GaussianState {
    fn default() -> Self {
        Self::vacuum()
    }
}

pub fn vacuum() -> GaussianState {
    GaussianState::vacuum()
}

/// `D(α)`: shifts the mean by `(Re α, Im α)`.
pub fn displace(state: &GaussianState, alpha: Complex64) -> GaussianState {
    GaussianState {
        mean: state.mean + to_vec(alpha),
        cov: state.cov,
    }
}

/// `S(s)` applied to `state`.
pub fn squeeze(state: &GaussianState, s: SqueezeParam) -> GaussianState {
    state.transformed(&squeeze_matrix(s))
}

/// `β` with `S(s) D(α) = D(β) S(s)`, i.e. `β = α cosh r − e^{iθ} α* sinh r`.
pub fn commute_ds(alpha: Complex64, s: SqueezeParam) -> Complex64 {
    let phase = Complex64::from_polar(1.0, s.theta);
    alpha * s.r.cosh() - phase * alpha.conj() * s.r.sinh()
}

/// Inverse of [`commute_ds`]: recovers `α` from `β`,
/// `α = β cosh r + e^{iθ} β* sinh r`.
pub fn commute_sd_inverse(beta: Complex64, s: SqueezeParam) -> Complex64 {
    let phase = Complex64::from_polar(1.0, s.theta);
    beta * s.r.cosh() + phase * beta.conj() * s.r.sinh()
}

/// Rectangular evaluation grid over `(x, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x: SweepRange,
    pub p: SweepRange,
}

impl PhaseGrid {
    pub fn new(x: SweepRange, p: SweepRange) -> Self {
        PhaseGrid { x, p }
    }

    /// Same range on both axes.
    pub fn square(range: SweepRange) -> Self {
        PhaseGrid { x: range, p: range }
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area of one grid cell, for Riemann sums.
    pub fn cell_area(&self) -> f64 {
        self.x.step() * self.p.step()
    }
}

/// Wigner function sampled on a [`PhaseGrid`], stored row-major with `x` as
/// the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    grid: PhaseGrid,
    values: Vec<f64>,
}

impl WignerField {
    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.grid.p.len() + ip]
    }

    /// Grid point with the largest value: `(x, p, W)`.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let (k, w) = self
            .values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, (k, w)| if w > best.1 { (k, w) } else { best },
            );
        let np = self.grid.p.len();
        (self.grid.x.value(k / np), self.grid.p.value(k % np), w)
    }

    /// Riemann sum of the field times the cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    /// Writes `x,p,w` CSV, one row per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,p,w")?;
        let np = self.grid.p.len();
        for (k, w) in self.values.iter().enumerate() {
            let x = self.grid.x.value(k / np);
            let p = self.grid.p.value(k % np);
            writeln!(
                out,
                "{},{},{}",
                crate::format::sig(x, 12),
                crate::format::sig(p, 12),
                crate::format::sig(*w, 12)
            )?;
        }
        Ok(())
    }
}

/// Closed-form Gaussian Wigner function
/// `W(x,p) = exp(−½ δᵀ Σ⁻¹ δ) / (2π √det Σ)` on `grid`.
pub fn wigner(state: &GaussianState, grid: &PhaseGrid) -> Result<WignerField> {
    let cov = state.cov();
    let det = cov.determinant();
    let inv = cov
        .try_inverse()
        .filter(|_| det > 0.0)
        .ok_or(Error::NotPositiveDefinite {
            det,
            trace: cov.trace(),
        })?;
    let norm = 1.0 / (2.0 * PI * det.sqrt());
    let mean = state.mean();
    let mut values = Vec::with_capacity(grid.len());
    for x in grid.x.values() {
        for p in grid.p.values() {
            let d = Vector2::new(x, p) - mean;
            values.push(norm * (-0.5 * d.dot(&(inv * d))).exp());
        }
    }
    Ok(WignerField { grid: *grid, values })
}
