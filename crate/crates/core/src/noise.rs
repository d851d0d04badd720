//! Truncated boundary white noise `W_N'(t) = sum_{j <= N} eta_j phi_j(t)` per
//! channel, with `{phi_j}` an orthonormal basis of `L^2(0, tau)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, CounterRng};
use crate::semigroup::integrated_exponential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Cosine basis: `phi_1 = 1/sqrt(tau)`,
    /// `phi_j = sqrt(2/tau) cos((j - 1) pi s / tau)`.
    Trigonometric,
    /// Haar wavelets on dyadic subintervals of `[0, tau]`.
    Haar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBasis {
    pub kind: BasisKind,
    pub tau: f64,
    pub size: usize,
}

/// Haar function `j >= 2` as (level, shift): support
/// `[shift, shift + 1) * tau / 2^level`, height `2^{level/2} / sqrt(tau)`.
fn haar_index(j: usize) -> (u32, usize) {
    let m = j - 2;
    let level = (m + 1).ilog2();
    (level, m + 1 - (1usize << level))
}

impl NoiseBasis {
    pub fn new(kind: BasisKind, tau: f64, size: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "basis horizon must be positive, got {tau}"
            )));
        }
        if size == 0 {
            return Err(Error::InvalidSize("noise basis needs N >= 1".into()));
        }
        Ok(Self { kind, tau, size })
    }

    /// Same basis truncated at a different `N`.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        Self::new(self.kind, self.tau, size)
    }

    fn check(&self, j: usize, t: f64) -> Result<()> {
        if j == 0 || j > self.size {
            return Err(Error::InvalidParameter(format!(
                "basis index {j} outside 1..={}",
                self.size
            )));
        }
        if !(0.0..=self.tau).contains(&t) {
            return Err(Error::InvalidTime(format!(
                "{t} lies outside [0, {}]",
                self.tau
            )));
        }
        Ok(())
    }

    fn frequency(&self, j: usize) -> f64 {
        (j - 1) as f64 * PI / self.tau
    }

    /// Pieces `(start, end, height)` of Haar function `j`.
    fn haar_pieces(&self, j: usize) -> [(f64, f64, f64); 2] {
        let (level, shift) = haar_index(j);
        let width = self.tau / (1u64 << level) as f64;
        let h = ((1u64 << level) as f64 / self.tau).sqrt();
        let a = shift as f64 * width;
        let m = a + 0.5 * width;
        [(a, m, h), (m, a + width, -h)]
    }

    /// `phi_j(s)`.
    pub fn phi(&self, j: usize, s: f64) -> Result<f64> {
        self.check(j, s)?;
        if j == 1 {
            return Ok(1.0 / self.tau.sqrt());
        }
        Ok(match self.kind {
            BasisKind::Trigonometric => (2.0 / self.tau).sqrt() * (self.frequency(j) * s).cos(),
            BasisKind::Haar => self
                .haar_pieces(j)
                .iter()
                .find(|(a, b, _)| s >= *a && (s < *b || (*b == self.tau && s == *b)))
                .map_or(0.0, |p| p.2),
        })
    }

    /// `int_0^t phi_j(s) ds`.
    pub fn primitive(&self, j: usize, t: f64) -> Result<f64> {
        self.check(j, t)?;
        Ok(self.primitive_unchecked(j, t))
    }

    fn primitive_unchecked(&self, j: usize, t: f64) -> f64 {
        if j == 1 {
            return t / self.tau.sqrt();
        }
        match self.kind {
            BasisKind::Trigonometric => {
                let w = self.frequency(j);
                (2.0 / self.tau).sqrt() * (w * t).sin() / w
            }
            BasisKind::Haar => self
                .haar_pieces(j)
                .iter()
                .map(|&(a, b, h)| h * (t.min(b) - a).max(0.0))
                .sum(),
        }
    }

    /// `I_j(mu, t) = int_0^t e^{-mu (t - s)} phi_j(s) ds` in closed form.
    pub fn exp_convolution(&self, j: usize, mu: f64, t: f64) -> Result<f64> {
        self.check(j, t)?;
        Ok(self.exp_convolution_unchecked(j, mu, t))
    }

    pub(crate) fn exp_convolution_unchecked(&self, j: usize, mu: f64, t: f64) -> f64 {
        if j == 1 {
            return integrated_exponential(mu, t) / self.tau.sqrt();
        }
        match self.kind {
            BasisKind::Trigonometric => {
                // (mu (cos wt - e^{-mu t}) + w sin wt) / (mu^2 + w^2), written to
                // avoid cancellation at small t
                let w = self.frequency(j);
                let half = (0.5 * w * t).sin();
                let num = -2.0 * mu * half * half - mu * (-mu * t).exp_m1() + w * (w * t).sin();
                (2.0 / self.tau).sqrt() * num / (mu * mu + w * w)
            }
            BasisKind::Haar => self
                .haar_pieces(j)
                .iter()
                .filter(|(a, _, _)| *a < t)
                .map(|&(a, b, h)| {
                    let end = b.min(t);
                    h * (-mu * (t - end)).exp() * integrated_exponential(mu, end - a)
                })
                .sum(),
        }
    }
}

/// Standard normal coefficients `eta_{c,j}` for every channel, regenerated
/// from the seed. Serialized as seed plus parameters only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseDrawSpec", into = "NoiseDrawSpec")]
pub struct NoiseDraw {
    pub basis: NoiseBasis,
    pub channels: usize,
    pub seed: u64,
    /// `coefficients[c][j - 1] = eta_{c,j}`.
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseDrawSpec {
    basis: NoiseBasis,
    channels: usize,
    seed: u64,
}

impl TryFrom<NoiseDrawSpec> for NoiseDraw {
    type Error = Error;
    fn try_from(s: NoiseDrawSpec) -> Result<Self> {
        let basis = NoiseBasis::new(s.basis.kind, s.basis.tau, s.basis.size)?;
        draw_noise(&basis, s.channels, s.seed)
    }
}

impl From<NoiseDraw> for NoiseDrawSpec {
    fn from(d: NoiseDraw) -> Self {
        Self {
            basis: d.basis,
            channels: d.channels,
            seed: d.seed,
        }
    }
}

/// Coefficient `eta_{c,j}` depends only on `(seed, c, j)`, so a larger `N`
/// extends a smaller one.
pub fn draw_noise(basis: &NoiseBasis, channels: usize, seed: u64) -> Result<NoiseDraw> {
    if channels == 0 {
        return Err(Error::InvalidSize(
            "noise needs at least one channel".into(),
        ));
    }
    let rng = CounterRng::new(seed);
    let coefficients = (0..channels)
        .map(|c| {
            let mut row = vec![0.0; basis.size];
            rng.fill_normals(domain::NOISE | c as u64, 0, &mut row);
            row
        })
        .collect();
    Ok(NoiseDraw {
        basis: *basis,
        channels,
        seed,
        coefficients,
    })
}

/// `W_N(t) = sum_{j <= N} eta_{c,j} int_0^t phi_j` on `channel`.
pub fn wn_eval(draw: &NoiseDraw, channel: usize, t: f64) -> Result<f64> {
    if channel >= draw.channels {
        return Err(Error::InvalidParameter(format!(
            "channel {channel} outside 0..{}",
            draw.channels
        )));
    }
    if !(0.0..=draw.basis.tau).contains(&t) {
        return Err(Error::InvalidTime(format!(
            "{t} lies outside [0, {}]",
            draw.basis.tau
        )));
    }
    Ok(draw.coefficients[channel]
        .iter()
        .enumerate()
        .map(|(i, &eta)| eta * draw.basis.primitive_unchecked(i + 1, t))
        .sum())
}
