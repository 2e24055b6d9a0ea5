//! Mutual-information security criterion for the cloning attack on the
//! Alice→Bob leg of CQD.
//!
//! The effective encoding seen by the cloner is `D(d) S(t)|0⟩` with
//! `t = g e^{ih}`. Squeezing enters through the Bogoliubov coefficients
//! `m = cosh g − e^{ih} sinh g` and `n = cosh g + e^{ih} sinh g`, so that the
//! input quadratures are `X_in = m_r X_a − n_i P_a + d_x` and
//! `P_in = m_i X_a + n_r P_a + d_y`. Signal variances use a modulation
//! variance of 1/4 per quadrature.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{sample_clone_quadratures, GqcmParams};
use crate::format::sig;
use crate::gaussian::{displace, squeeze, vacuum, SqueezeParam};
use crate::measurement::{standard_normal, MeasurementMode};
use crate::range::SweepRange;
use crate::{Error, Result};

/// Variance of the classical modulation `d` in each quadrature.
pub const MODULATION_VARIANCE: f64 = 0.25;

pub const CSV_HEADER: &str = "A,T,g,h,M_XB,M_XE,M_PB,M_PE,N_XB,N_XE,N_PB,N_PE,I_AB_X,I_AE_X,I_AB_P,I_AE_P,dI_X,dI_P";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BogoliubovCoeffs {
    pub m: Complex64,
    pub n: Complex64,
}

impl BogoliubovCoeffs {
    /// Coefficient of the vacuum noise in `X_in`: `m_r² + n_i²`.
    pub fn x_noise(&self) -> f64 {
        self.m.re * self.m.re + self.n.im * self.n.im
    }

    /// Coefficient of the vacuum noise in `P_in`: `m_i² + n_r²`.
    pub fn p_noise(&self) -> f64 {
        self.m.im * self.m.im + self.n.re * self.n.re
    }

    /// Coefficients at `−g`. Parity of cosh/sinh swaps `m` and `n`.
    pub fn negated_g(&self) -> Self {
        BogoliubovCoeffs { m: self.n, n: self.m }
    }
}

pub fn bogoliubov(g: f64, h: f64) -> Result<BogoliubovCoeffs> {
    if !(g.is_finite() && h.is_finite()) {
        return Err(Error::NonFinite("bogoliubov parameters"));
    }
    if g < 0.0 {
        return Err(Error::param("g", format!("must be ≥ 0, got {g}; use negated_g for −g")));
    }
    let phase = Complex64::from_polar(1.0, h);
    Ok(BogoliubovCoeffs {
        m: g.cosh() - phase * g.sinh(),
        n: g.cosh() + phase * g.sinh(),
    })
}

/// Combined squeeze `t = g e^{ih}` and displacement `d` seen by the cloner.
/// `d` only moves means and drops out of every variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveEncoding {
    pub g: f64,
    pub h: f64,
    pub d: Complex64,
}

impl EffectiveEncoding {
    pub fn new(g: f64, h: f64, d: Complex64) -> Result<Self> {
        bogoliubov(g, h)?;
        Ok(EffectiveEncoding { g, h, d })
    }

    pub fn squeeze(&self) -> SqueezeParam {
        SqueezeParam::new(self.g, self.h).expect("validated in new")
    }

    pub fn coeffs(&self) -> BogoliubovCoeffs {
        bogoliubov(self.g, self.h).expect("validated in new")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePack {
    #[serde(rename = "M_XB")]
    pub m_xb: f64,
    #[serde(rename = "M_XE")]
    pub m_xe: f64,
    #[serde(rename = "M_PB")]
    pub m_pb: f64,
    #[serde(rename = "M_PE")]
    pub m_pe: f64,
    #[serde(rename = "N_XB")]
    pub n_xb: f64,
    #[serde(rename = "N_XE")]
    pub n_xe: f64,
    #[serde(rename = "N_PB")]
    pub n_pb: f64,
    #[serde(rename = "N_PE")]
    pub n_pe: f64,
}

impl VariancePack {
    /// Total output variances `(X_B, X_E, P_B, P_E)`, signal plus noise.
    pub fn totals(&self) -> [f64; 4] {
        [
            self.m_xb + self.n_xb,
            self.m_xe + self.n_xe,
            self.m_pb + self.n_pb,
            self.m_pe + self.n_pe,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoResult {
    pub i_ab_x: f64,
    pub i_ae_x: f64,
    pub i_ab_p: f64,
    pub i_ae_p: f64,
    pub delta_x: f64,
    pub delta_p: f64,
}

fn check_gqcm(a: f64, t: f64) -> Result<()> {
    GqcmParams::new(a, t).map(|_| ())
}

pub fn variances(a: f64, t: f64, g: f64, h: f64) -> Result<VariancePack> {
    variances_with(a, t, &bogoliubov(g, h)?)
}

/// Signal and noise variances of both output modes for given coefficients.
pub fn variances_with(a: f64, t: f64, c: &BogoliubovCoeffs) -> Result<VariancePack> {
    check_gqcm(a, t)?;
    let q = 0.25;
    let (kx, kp) = (c.x_noise(), c.p_noise());
    let amp_b = (a - 1.0) * t;
    let amp_e = (a - 1.0) * (1.0 - t);
    Ok(VariancePack {
        m_xb: q * a * t,
        m_pb: q * a * t,
        m_xe: q * a * (1.0 - t),
        m_pe: q * a * (1.0 - t),
        n_xb: q * (kx * a * t + amp_b + (1.0 - t)),
        n_xe: q * (t + kx * a * (1.0 - t) + amp_e),
        n_pb: q * (kp * a * t + amp_b + (1.0 - t)),
        n_pe: q * (t + kp * a * (1.0 - t) + amp_e),
    })
}

/// Gaussian-channel mutual information `½ log₂(1 + M/N)` in bits.
pub fn mutual_info(signal: f64, noise: f64) -> Result<f64> {
    if noise.is_nan() || noise <= 0.0 {
        return Err(Error::param("N", format!("noise variance must be > 0, got {noise}")));
    }
    if signal.is_nan() || signal < 0.0 {
        return Err(Error::param("M", format!("signal variance must be ≥ 0, got {signal}")));
    }
    Ok(0.5 * (signal / noise).ln_1p() / std::f64::consts::LN_2)
}

pub fn delta_i(a: f64, t: f64, g: f64, h: f64) -> Result<MutualInfoResult> {
    delta_i_with(a, t, &bogoliubov(g, h)?)
}

/// ΔI at `−g`, evaluated through the `m ↔ n` swap.
pub fn delta_i_negated_g(a: f64, t: f64, g: f64, h: f64) -> Result<MutualInfoResult> {
    delta_i_with(a, t, &bogoliubov(g, h)?.negated_g())
}

pub fn delta_i_with(a: f64, t: f64, c: &BogoliubovCoeffs) -> Result<MutualInfoResult> {
    info_from(&variances_with(a, t, c)?)
}

fn info_from(v: &VariancePack) -> Result<MutualInfoResult> {
    let i_ab_x = mutual_info(v.m_xb, v.n_xb)?;
    let i_ae_x = mutual_info(v.m_xe, v.n_xe)?;
    let i_ab_p = mutual_info(v.m_pb, v.n_pb)?;
    let i_ae_p = mutual_info(v.m_pe, v.n_pe)?;
    Ok(MutualInfoResult {
        i_ab_x,
        i_ae_x,
        i_ab_p,
        i_ae_p,
        delta_x: i_ab_x - i_ae_x,
        delta_p: i_ab_p - i_ae_p,
    })
}

/// Cartesian product of `A × T × g × h`, with `h` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub a: Vec<f64>,
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl SweepGrid {
    pub fn from_ranges(a: &SweepRange, t: &SweepRange, g: &SweepRange, h: &SweepRange) -> Self {
        SweepGrid {
            a: a.values(),
            t: t.values(),
            g: g.values(),
            h: h.values(),
        }
    }

    pub fn len(&self) -> usize {
        self.a.len() * self.t.len() * self.g.len() * self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> (f64, f64, f64, f64) {
        let nh = self.h.len();
        let ng = self.g.len();
        let nt = self.t.len();
        (
            self.a[k / (nh * ng * nt)],
            self.t[(k / (nh * ng)) % nt],
            self.g[(k / nh) % ng],
            self.h[k % nh],
        )
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::param("grid", "sweep grid is empty"));
        }
        for &a in &self.a {
            check_gqcm(a, 0.5)?;
        }
        for &t in &self.t {
            check_gqcm(1.0, t)?;
        }
        for &g in &self.g {
            bogoliubov(g, 0.0)?;
        }
        if self.h.iter().any(|h| !h.is_finite()) {
            return Err(Error::NonFinite("h"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub variances: VariancePack,
    pub info: MutualInfoResult,
}

impl SweepPoint {
    pub fn csv_row(&self) -> String {
        let v = &self.variances;
        let i = &self.info;
        [
            self.a, self.t, self.g, self.h, v.m_xb, v.m_xe, v.m_pb, v.m_pe, v.n_xb, v.n_xe, v.n_pb, v.n_pe, i.i_ab_x,
            i.i_ae_x, i.i_ab_p, i.i_ae_p, i.delta_x, i.delta_p,
        ]
        .iter()
        .map(|x| sig(*x, 12))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Evaluates every grid point. Rows come back in grid order.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<SweepPoint>> {
    grid.validate()?;
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (a, t, g, h) = grid.point(k);
            let variances = variances(a, t, g, h)?;
            Ok(SweepPoint {
                a,
                t,
                g,
                h,
                variances,
                info: info_from(&variances)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    Ok(())
}

/// Sample variances of `(X_B, X_E, P_B, P_E)` from simulated clones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledVariances {
    pub samples: usize,
    pub var_xb: f64,
    pub var_xe: f64,
    pub var_pb: f64,
    pub var_pe: f64,
}

impl SampledVariances {
    pub fn as_array(&self) -> [f64; 4] {
        [self.var_xb, self.var_xe, self.var_pb, self.var_pe]
    }
}

/// Monte-Carlo estimate of the cloner output variances: each sample draws a
/// modulation `d ~ N(0, I/4)`, prepares `D(d) S(g e^{ih})|0⟩` and pushes one
/// joint draw through the cloning machine.
pub fn monte_carlo_variances<R: Rng + ?Sized>(
    a: f64,
    t: f64,
    g: f64,
    h: f64,
    samples: usize,
    rng: &mut R,
) -> Result<SampledVariances> {
    let params = GqcmParams::new(a, t)?;
    let s = EffectiveEncoding::new(g, h, Complex64::new(0.0, 0.0))?.squeeze();
    if samples < 2 {
        return Err(Error::param("samples", "need at least 2"));
    }
    let squeezed = squeeze(&vacuum(), s);
    let sd = MODULATION_VARIANCE.sqrt();
    let mut sum = [0.0f64; 4];
    let mut sum_sq = [0.0f64; 4];
    for _ in 0..samples {
        let d = Complex64::new(sd * standard_normal(rng), sd * standard_normal(rng));
        let input = displace(&squeezed, d);
        let ((xb, pb), (xe, pe)) = sample_clone_quadratures(&input, &params, MeasurementMode::Sampled, rng);
        for (k, v) in [xb, xe, pb, pe].into_iter().enumerate() {
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let n = samples as f64;
    let var = |k: usize| (sum_sq[k] - sum[k] * sum[k] / n) / (n - 1.0);
    Ok(SampledVariances {
        samples,
        var_xb: var(0),
        var_xe: var(1),
        var_pb: var(2),
        var_pe: var(3),
    })
}
