use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time grid `0 = t_0 < ... < t_M = tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidSize(
                "time grid needs at least two points".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidTime("time grid must start at 0".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTime(
                "time grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { times })
    }

    /// `points` equally spaced times on `[0, tau]`, endpoints included.
    pub fn uniform(tau: f64, points: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidTime(format!(
                "horizon must be positive, got {tau}"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidSize(
                "time grid needs at least two points".into(),
            ));
        }
        let n = (points - 1) as f64;
        let mut times: Vec<f64> = (0..points).map(|i| tau * i as f64 / n).collect();
        times[points - 1] = tau;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn tau(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// Grid with the extra points in `[0, tau]` merged in.
    pub fn with_points(&self, extra: &[f64]) -> Result<Self> {
        let mut times = self.times.clone();
        for &t in extra {
            if !(0.0..=self.tau()).contains(&t) {
                return Err(Error::InvalidTime(format!(
                    "{t} lies outside [0, {}]",
                    self.tau()
                )));
            }
            times.push(t);
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        Self::new(times)
    }

    /// Index of `t` when it is a grid point.
    pub fn position(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.times
    }
}

/// How a path was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Exact Ornstein-Uhlenbeck transition sampling of the limit solution.
    ExactOu,
    /// Closed-form solution driven by the `N`-term truncated noise.
    TruncatedN(usize),
    /// Deterministic variation-of-constants solution.
    Deterministic,
}

impl Provenance {
    pub fn tag(&self) -> String {
        match self {
            Provenance::ExactOu => "exact_ou".into(),
            Provenance::TruncatedN(n) => format!("truncated_n{n}"),
            Provenance::Deterministic => "deterministic".into(),
        }
    }
}

/// Solution coordinates on a time grid: `modes[i][k]` is mode `k` at `t_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: TimeGrid,
    pub modes: Vec<Vec<f64>>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl SamplePath {
    pub fn mode_count(&self) -> usize {
        self.modes.first().map_or(0, Vec::len)
    }

    pub fn at(&self, i: usize) -> &[f64] {
        &self.modes[i]
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().flatten().all(|x| x.is_finite())
    }
}
