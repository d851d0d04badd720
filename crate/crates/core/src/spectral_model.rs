//! Diagonal representation of the boundary operator pair.
//!
//! The interior operator `A_0` is diagonal in an orthonormal eigenbasis `e_k`
//! with `-A_0 e_k = mu_k e_k`. The boundary operator acts on the product space
//! `U x H`, where `U = R^channels`; an element `(w, f)` enters the interior
//! dynamics through the coupling weights: mode `k` receives
//! `f_k + sum_c b_{c,k} w_c`. Everything in this module is exact on the
//! truncated model of `K` modes.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quad::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NeumannInterval,
    DirichletInterval,
    NeumannSquare,
    Custom,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::NeumannInterval => "neumann_interval",
            ModelKind::DirichletInterval => "dirichlet_interval",
            ModelKind::NeumannSquare => "neumann_square",
            ModelKind::Custom => "custom",
        }
    }
}

/// Mode weights `c_k` used by the trace series and variance formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `c_k = 1` for every mode.
    Unit,
    /// `c_k = sum_c b_{c,k}^2`.
    Physical,
}

/// Truncated coordinates of an element of `U x H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordVector {
    pub boundary: Option<Vec<f64>>,
    pub modes: Vec<f64>,
}

impl CoordVector {
    pub fn interior(modes: Vec<f64>) -> Self {
        Self {
            boundary: None,
            modes,
        }
    }

    pub fn zeros(k: usize) -> Self {
        Self::interior(vec![0.0; k])
    }

    pub fn with_boundary(boundary: Vec<f64>, modes: Vec<f64>) -> Self {
        Self {
            boundary: Some(boundary),
            modes,
        }
    }

    /// Unit vector along interior mode `i`.
    pub fn unit_mode(k: usize, i: usize) -> Self {
        let mut modes = vec![0.0; k];
        modes[i] = 1.0;
        Self::interior(modes)
    }

    /// True when the boundary part is absent or identically zero, i.e. the
    /// element lies in `{0} x H`.
    pub fn is_interior(&self) -> bool {
        self.boundary
            .as_ref()
            .is_none_or(|w| w.iter().all(|&x| x == 0.0))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Euclidean norm on `U x H` (channels weighted equally).
    pub fn norm(&self) -> f64 {
        let b: f64 = self
            .boundary
            .as_ref()
            .map_or(0.0, |w| w.iter().map(|x| x * x).sum());
        let m: f64 = self.modes.iter().map(|x| x * x).sum();
        (b + m).sqrt()
    }

    pub fn sub(&self, other: &CoordVector) -> CoordVector {
        let boundary = match (&self.boundary, &other.boundary) {
            (None, None) => None,
            (a, b) => {
                let n = a.as_ref().or(b.as_ref()).map_or(0, Vec::len);
                let get = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map_or(0.0, |w| w[i]);
                Some((0..n).map(|i| get(a, i) - get(b, i)).collect())
            }
        };
        CoordVector {
            boundary,
            modes: self
                .modes
                .iter()
                .zip(&other.modes)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Spectrum of `-A_0` plus boundary coupling weights, truncated to `K` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub kind: ModelKind,
    pub spatial_dim: usize,
    eigenvalues: Vec<f64>,
    /// `couplings[c][k] = b_{c,k}`.
    couplings: Vec<Vec<f64>>,
    pub growth_exponent: f64,
    pub expected_pstar: Option<f64>,
}

impl SpectralModel {
    /// Neumann Laplacian on `(0, 1)`, channels at `x = 0` and `x = 1`.
    pub fn neumann_interval(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidSize(format!(
                "neumann interval needs K >= 2, got {k}"
            )));
        }
        let eigenvalues = (0..k).map(|i| (i as f64 * PI).powi(2)).collect();
        let left = (0..k).map(|i| if i == 0 { 1.0 } else { SQRT_2 }).collect();
        let right = (0..k)
            .map(|i| match i {
                0 => 1.0,
                _ if i % 2 == 0 => SQRT_2,
                _ => -SQRT_2,
            })
            .collect();
        Ok(Self {
            kind: ModelKind::NeumannInterval,
            spatial_dim: 1,
            eigenvalues,
            couplings: vec![left, right],
            growth_exponent: 2.0,
            expected_pstar: Some(4.0 / 3.0),
        })
    }

    /// Dirichlet Laplacian on `(0, 1)`; the coupling of channel `c` is minus the
    /// outward normal derivative of `e_k` at that endpoint.
    pub fn dirichlet_interval(k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidSize("dirichlet interval needs K >= 1".into()));
        }
        let freq = |i: usize| (i + 1) as f64 * PI;
        let eigenvalues = (0..k).map(|i| freq(i).powi(2)).collect();
        let left = (0..k).map(|i| SQRT_2 * freq(i)).collect();
        // -(-1)^n sqrt(2) n pi with n = i + 1
        let right = (0..k)
            .map(|i| {
                let sign = if (i + 1) % 2 == 0 { -1.0 } else { 1.0 };
                sign * SQRT_2 * freq(i)
            })
            .collect();
        Ok(Self {
            kind: ModelKind::DirichletInterval,
            spatial_dim: 1,
            eigenvalues,
            couplings: vec![left, right],
            growth_exponent: 2.0,
            expected_pstar: Some(4.0),
        })
    }

    /// Neumann Laplacian on the unit square: eigenvalues `pi^2 (i^2 + j^2)`
    /// sorted ascending, one unit-weight channel.
    pub fn neumann_square(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidSize(format!(
                "neumann square needs K >= 2, got {k}"
            )));
        }
        // Lattice points with i^2 + j^2 <= r^2 number about pi r^2 / 4.
        let mut r = ((4.0 * k as f64 / PI).sqrt().ceil() as u64).max(2) + 2;
        let mut levels: Vec<u64> = loop {
            let r2 = r * r;
            let mut v = Vec::new();
            for i in 0..=r {
                for j in 0..=r {
                    let s = i * i + j * j;
                    if s <= r2 {
                        v.push(s);
                    }
                }
            }
            if v.len() >= k {
                break v;
            }
            r *= 2;
        };
        levels.sort_unstable();
        levels.truncate(k);
        let eigenvalues = levels.iter().map(|&s| PI * PI * s as f64).collect();
        Ok(Self {
            kind: ModelKind::NeumannSquare,
            spatial_dim: 2,
            eigenvalues,
            couplings: vec![vec![1.0; k]],
            growth_exponent: 1.0,
            expected_pstar: None,
        })
    }

    /// Model from user data. Only the structural invariants are checked.
    pub fn custom(
        eigenvalues: Vec<f64>,
        couplings: Vec<Vec<f64>>,
        growth_exponent: f64,
        spatial_dim: usize,
        expected_pstar: Option<f64>,
    ) -> Result<Self> {
        let model = Self {
            kind: ModelKind::Custom,
            spatial_dim,
            eigenvalues,
            couplings,
            growth_exponent,
            expected_pstar,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let k = self.eigenvalues.len();
        if k == 0 {
            return Err(Error::InvalidSize("model has no modes".into()));
        }
        if self.spatial_dim == 0 {
            return Err(Error::InvalidParameter("spatial_dim must be >= 1".into()));
        }
        if !(self.growth_exponent.is_finite() && self.growth_exponent > 0.0) {
            return Err(Error::InvalidParameter(
                "growth_exponent must be positive".into(),
            ));
        }
        if self.couplings.is_empty() {
            return Err(Error::InvalidSize(
                "model needs at least one channel".into(),
            ));
        }
        if let Some(c) = self.couplings.iter().position(|b| b.len() != k) {
            return Err(Error::InvalidSize(format!(
                "channel {c} has {} couplings, expected {k}",
                self.couplings[c].len()
            )));
        }
        if self
            .eigenvalues
            .iter()
            .chain(self.couplings.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite model data".into()));
        }
        if self.eigenvalues.iter().any(|&m| m < 0.0) {
            return Err(Error::InvalidParameter("negative eigenvalue".into()));
        }
        if self.eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be nondecreasing".into(),
            ));
        }
        if self.eigenvalues.iter().filter(|&&m| m == 0.0).count() > 1 {
            return Err(Error::InvalidParameter(
                "at most one zero eigenvalue is allowed".into(),
            ));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        self.kind.as_str()
    }

    /// Number of retained modes `K`.
    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn channel_count(&self) -> usize {
        self.couplings.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    pub fn coupling(&self, channel: usize, k: usize) -> f64 {
        self.couplings[channel][k]
    }

    /// `sum_c b_{c,k}^2` per mode.
    pub fn physical_weights(&self) -> Vec<f64> {
        (0..self.modes())
            .map(|k| self.couplings.iter().map(|b| b[k] * b[k]).sum())
            .collect()
    }

    pub fn weights(&self, weighting: Weighting) -> Vec<f64> {
        match weighting {
            Weighting::Unit => vec![1.0; self.modes()],
            Weighting::Physical => self.physical_weights(),
        }
    }

    /// Same spectrum with a single channel of unit couplings, so that the
    /// physical weights coincide with the unit weights.
    pub fn with_unit_couplings(&self) -> Self {
        Self {
            couplings: vec![vec![1.0; self.modes()]],
            ..self.clone()
        }
    }

    /// Same spectrum with every coupling multiplied by `factor`.
    pub fn with_scaled_couplings(&self, factor: f64) -> Self {
        Self {
            couplings: self
                .couplings
                .iter()
                .map(|b| b.iter().map(|x| x * factor).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// Same channels with all couplings set to zero (pure diagonal operator).
    pub fn without_couplings(&self) -> Self {
        Self {
            couplings: vec![vec![0.0; self.modes()]; self.channel_count()],
            ..self.clone()
        }
    }

    /// First `k` modes of this model.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.modes() {
            return Err(Error::InvalidSize(format!(
                "cannot truncate {} modes to {k}",
                self.modes()
            )));
        }
        Ok(Self {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            couplings: self.couplings.iter().map(|b| b[..k].to_vec()).collect(),
            ..self.clone()
        })
    }

    /// Smallest eigenvalue of `-A_0`; `-mu_0` is the growth bound of `T_0`.
    pub fn bottom_of_spectrum(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Smallest strictly positive eigenvalue, if any.
    pub fn first_positive_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.iter().cloned().find(|&m| m > 0.0)
    }

    pub fn check_vector(&self, z: &CoordVector) -> Result<()> {
        if z.modes.len() != self.modes() {
            return Err(Error::InvalidSize(format!(
                "vector has {} modes, model has {}",
                z.modes.len(),
                self.modes()
            )));
        }
        if let Some(w) = &z.boundary {
            if w.len() != self.channel_count() {
                return Err(Error::InvalidSize(format!(
                    "boundary part has {} channels, model has {}",
                    w.len(),
                    self.channel_count()
                )));
            }
        }
        Ok(())
    }

    /// Interior input seen by each mode: `f_k + sum_c b_{c,k} w_c`.
    pub fn coupled_input(&self, z: &CoordVector) -> Vec<f64> {
        let mut out = z.modes.clone();
        if let Some(w) = &z.boundary {
            for (b, &wc) in self.couplings.iter().zip(w) {
                if wc != 0.0 {
                    for (o, &bk) in out.iter_mut().zip(b) {
                        *o += bk * wc;
                    }
                }
            }
        }
        out
    }

    /// Power-law extrapolation of the spectrum and weights beyond `K`, used
    /// for truncation tail bounds.
    pub fn tail_model(&self, weights: &[f64]) -> TailModel {
        let k = self.modes();
        let last_mu = self.eigenvalues[k - 1];
        let half = k / 2;
        let (mu_h, w_h) = (self.eigenvalues[half], weights[half]);
        let w_last = weights[k - 1];
        let weight_exp =
            if half < k - 1 && mu_h > 0.0 && last_mu > mu_h && w_h > 0.0 && w_last > 0.0 {
                ((w_last / w_h).ln() / (last_mu / mu_h).ln()).max(0.0)
            } else {
                0.0
            };
        let weight_amp = if last_mu > 0.0 {
            weights
                .iter()
                .zip(&self.eigenvalues)
                .skip(half)
                .filter(|(_, &m)| m > 0.0)
                .map(|(&w, &m)| w / m.powf(weight_exp))
                .fold(0.0, f64::max)
        } else {
            w_last
        };
        TailModel {
            modes: k,
            last_mu,
            gamma: self.growth_exponent,
            weight_amp,
            weight_exp,
        }
    }
}

/// Tail extrapolation `mu(x) = mu_{K-1} ((x + 1) / K)^gamma` (a lower bound
/// for `mu_k`, `k >= K`, in the built-in models) with weights
/// `w(mu) = amp * mu^theta`.
#[derive(Debug, Clone, Copy)]
pub struct TailModel {
    pub modes: usize,
    pub last_mu: f64,
    pub gamma: f64,
    pub weight_amp: f64,
    pub weight_exp: f64,
}

impl TailModel {
    pub fn weight(&self, mu: f64) -> f64 {
        self.weight_amp * mu.powf(self.weight_exp)
    }

    /// Upper bound for `sum_{k >= K} F(mu_k, w_k)` where `F` is nonincreasing
    /// along the tail and `F(mu, w(mu)) ~ mu^{theta - decay}`. Returns `None`
    /// when the extrapolated series diverges.
    pub fn tail_sum<F: Fn(f64, f64) -> f64>(&self, f: F, decay: f64) -> Option<f64> {
        if self.last_mu <= 0.0 {
            return None;
        }
        let rate = decay - self.weight_exp - 1.0 / self.gamma;
        if rate <= 0.0 {
            return None;
        }
        // With mu = last_mu e^y: sum <= int_{K-1}^inf F dx
        //   = int_0^inf F(mu(y)) (K / gamma) e^{y / gamma} dy.
        let kf = self.modes as f64;
        let integrand = |y: f64| {
            let mu = self.last_mu * y.exp();
            f(mu, self.weight(mu)) * kf / self.gamma * (y / self.gamma).exp()
        };
        let upper = 60.0 / rate;
        let panels = 400;
        Some(GaussLegendre::new(10).integrate_composite(integrand, 0.0, upper, panels))
    }

    /// Smallest power-of-two multiple of `K` whose extrapolated tail passes
    /// `accept`.
    pub fn required_modes<P: Fn(&TailModel) -> bool>(&self, accept: P) -> usize {
        let mut trial = *self;
        for _ in 0..40 {
            if accept(&trial) {
                return trial.modes;
            }
            let next = trial.modes * 2;
            trial.last_mu = self.last_mu * (next as f64 / self.modes as f64).powf(self.gamma);
            trial.modes = next;
        }
        trial.modes
    }
}

/// Conjugate exponent: `1/p + 1/q = 1`.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfResolventSet(lambda))
    }
}

/// `R(lambda, A)(w, f)`: lands in `{0} x H` with modes
/// `(f_k + sum_c b_{c,k} w_c) / (lambda + mu_k)`.
pub fn resolvent_apply(model: &SpectralModel, lambda: f64, z: &CoordVector) -> Result<CoordVector> {
    check_lambda(lambda)?;
    model.check_vector(z)?;
    let modes = model
        .coupled_input(z)
        .into_iter()
        .zip(model.eigenvalues())
        .map(|(v, &mu)| v / (lambda + mu))
        .collect();
    Ok(CoordVector::interior(modes))
}

/// Operator norm of the truncated resolvent matrix `[D | C]`,
/// `D = diag(1 / (lambda + mu_k))`, `C_{k,c} = b_{c,k} / (lambda + mu_k)`.
pub fn resolvent_norm(model: &SpectralModel, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let d: Vec<f64> = model
        .eigenvalues()
        .iter()
        .map(|&mu| 1.0 / (lambda + mu))
        .collect();
    let cols: Vec<Vec<f64>> = model
        .couplings()
        .iter()
        .map(|b| b.iter().zip(&d).map(|(bk, dk)| bk * dk).collect())
        .collect();
    linalg::norm_diag_with_columns(&d, &cols)
}

/// Bound on how much the resolvent norm can grow when the truncation is
/// extended beyond `K`. With `D_t`, `C_t` the extra rows, `d = ||D_t|| =
/// 1 / (lambda + mu_K)` and `c^2 = ||C_t||_F^2 = sum_{k >= K} w_k / (lambda + mu_k)^2`,
/// the squared norm is at most the smaller of
/// `norm^2 + d^2 + c^2` (stacking rows) and
/// `max(norm^2, d^2) + 2 ||C_K||_F c + c^2` (Weyl, with the head columns `C_K`).
pub fn resolvent_norm_tail_bound(model: &SpectralModel, lambda: f64, norm: f64) -> Option<f64> {
    let w = model.physical_weights();
    let tail = model.tail_model(&w);
    let head: f64 = w
        .iter()
        .zip(model.eigenvalues())
        .map(|(wk, mu)| wk / (lambda + mu).powi(2))
        .sum();
    tail_bound_from(&tail, lambda, norm, head.sqrt())
}

pub(crate) fn tail_bound_from(
    tail: &TailModel,
    lambda: f64,
    norm: f64,
    head_cols: f64,
) -> Option<f64> {
    let d2 = (lambda + tail.last_mu).powi(-2);
    let c2 = if tail.weight_amp == 0.0 {
        0.0
    } else {
        tail.tail_sum(|mu, w| w / (lambda + mu).powi(2), 2.0)?
    };
    let n2 = norm * norm;
    let stacked = n2 + d2 + c2;
    let weyl = n2.max(d2) + 2.0 * head_cols * c2.sqrt() + c2;
    Some(stacked.min(weyl).sqrt() - norm)
}

/// `(lambda - A)^{-alpha}` in coordinates: modes scaled by
/// `(lambda + mu_k)^{-alpha}` after coupling the boundary part in.
///
/// `alpha = 0` is the identity on `{0} x H`. A nonzero boundary part needs
/// `alpha > 1/q*`, with `q*` conjugate to the model's reference `p*`
/// (`alpha >= 1` when the model has none).
pub fn fractional_power_apply(
    model: &SpectralModel,
    alpha: f64,
    lambda: f64,
    x: &CoordVector,
) -> Result<CoordVector> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "fractional power needs alpha >= 0, got {alpha}"
        )));
    }
    check_lambda(lambda)?;
    model.check_vector(x)?;
    if !x.is_interior() {
        let admissible = match model.expected_pstar {
            Some(p) => alpha > 1.0 / conjugate_exponent(p),
            None => alpha >= 1.0,
        };
        if !admissible {
            return Err(Error::Domain(format!(
                "alpha = {alpha} is too small to act on a boundary component"
            )));
        }
    }
    if alpha == 0.0 {
        return Ok(CoordVector::interior(x.modes.clone()));
    }
    let modes = model
        .coupled_input(x)
        .into_iter()
        .zip(model.eigenvalues())
        .map(|(v, &mu)| v * (lambda + mu).powf(-alpha))
        .collect();
    Ok(CoordVector::interior(modes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumann_first_modes() {
        let m = SpectralModel::neumann_interval(3).unwrap();
        assert_eq!(m.eigenvalues()[0], 0.0);
        assert_eq!(m.coupling(0, 0), 1.0);
        assert_eq!(m.coupling(1, 0), 1.0);
        assert!((m.eigenvalues()[1] - 9.869_604_401_089_358).abs() < 1e-12);
        assert_eq!(m.coupling(0, 1), SQRT_2);
        assert_eq!(m.coupling(1, 1), -SQRT_2);
        assert!((m.eigenvalues()[2] - 4.0 * PI * PI).abs() < 1e-12);
        assert_eq!(m.coupling(1, 2), SQRT_2);
        assert_eq!(m.expected_pstar, Some(4.0 / 3.0));
        assert_eq!(m.growth_exponent, 2.0);
    }

    #[test]
    fn size_errors() {
        assert!(matches!(
            SpectralModel::neumann_interval(1),
            Err(Error::InvalidSize(_))
        ));
        assert!(matches!(
            SpectralModel::dirichlet_interval(0),
            Err(Error::InvalidSize(_))
        ));
        assert!(matches!(
            SpectralModel::neumann_square(1),
            Err(Error::InvalidSize(_))
        ));
    }

    #[test]
    fn neumann_weights_are_two_and_one() {
        let m = SpectralModel::neumann_interval(50).unwrap();
        for c in 0..2 {
            assert_eq!(m.coupling(c, 0).powi(2), 1.0);
            for k in 1..50 {
                assert!((m.coupling(c, k).powi(2) - 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dirichlet_scaling_law() {
        let m = SpectralModel::dirichlet_interval(40).unwrap();
        assert!((m.coupling(0, 0) - SQRT_2 * PI).abs() < 1e-14);
        assert!((m.coupling(0, 1) - 2.0 * SQRT_2 * PI).abs() < 1e-14);
        assert!((m.coupling(1, 1) + 2.0 * SQRT_2 * PI).abs() < 1e-14);
        for c in 0..2 {
            for k in 0..40 {
                let r = m.coupling(c, k).powi(2) / m.eigenvalues()[k];
                assert!((r - 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn square_first_eigenvalues_and_order() {
        let m = SpectralModel::neumann_square(100).unwrap();
        let p2 = PI * PI;
        let e = m.eigenvalues();
        assert_eq!(&e[..4], &[0.0, p2, p2, 2.0 * p2]);
        assert!(e.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(m.growth_exponent, 1.0);
        assert_eq!(m.expected_pstar, None);
    }

    #[test]
    fn custom_rejects_broken_invariants() {
        assert!(SpectralModel::custom(vec![1.0, 0.5], vec![vec![1.0, 1.0]], 2.0, 1, None).is_err());
        assert!(SpectralModel::custom(vec![0.0, 0.0], vec![vec![1.0, 1.0]], 2.0, 1, None).is_err());
        assert!(SpectralModel::custom(vec![0.0, 1.0], vec![vec![1.0]], 2.0, 1, None).is_err());
        assert!(SpectralModel::custom(vec![0.0, 1.0], vec![vec![1.0, 2.0]], 2.0, 1, None).is_ok());
    }

    #[test]
    fn resolvent_of_unit_mode_is_diagonal() {
        let m = SpectralModel::neumann_interval(5).unwrap();
        let z = CoordVector::unit_mode(5, 2);
        let r = resolvent_apply(&m, 3.0, &z).unwrap();
        for (k, &v) in r.modes.iter().enumerate() {
            let expect = if k == 2 {
                1.0 / (3.0 + 4.0 * PI * PI)
            } else {
                0.0
            };
            assert_eq!(v, expect);
        }
        assert!(r.is_interior());
    }

    #[test]
    fn resolvent_rejects_nonpositive_lambda() {
        let m = SpectralModel::neumann_interval(5).unwrap();
        let z = CoordVector::zeros(5);
        assert!(matches!(
            resolvent_apply(&m, 0.0, &z),
            Err(Error::OutOfResolventSet(_))
        ));
        assert!(matches!(
            resolvent_norm(&m, -1.0),
            Err(Error::OutOfResolventSet(_))
        ));
    }

    #[test]
    fn resolvent_norm_without_couplings() {
        let m = SpectralModel::dirichlet_interval(20)
            .unwrap()
            .without_couplings();
        let n = resolvent_norm(&m, 2.5).unwrap();
        assert!((n - 1.0 / (2.5 + PI * PI)).abs() < 1e-16);
    }

    #[test]
    fn fractional_power_edge_cases() {
        let m = SpectralModel::neumann_interval(6).unwrap();
        let x = CoordVector::interior(vec![1.0, -2.0, 0.5, 0.0, 3.0, 1.0]);
        let id = fractional_power_apply(&m, 0.0, 2.0, &x).unwrap();
        assert_eq!(id.modes, x.modes);
        let one = fractional_power_apply(&m, 1.0, 2.0, &x).unwrap();
        let r = resolvent_apply(&m, 2.0, &x).unwrap();
        for (a, b) in one.modes.iter().zip(&r.modes) {
            assert!((a - b).abs() <= 1e-15 * b.abs());
        }
        assert!(matches!(
            fractional_power_apply(&m, -0.1, 2.0, &x),
            Err(Error::InvalidParameter(_))
        ));
        // Neumann: 1/q* = 1/4
        let xb = CoordVector::with_boundary(vec![1.0, 0.0], vec![0.0; 6]);
        assert!(fractional_power_apply(&m, 0.2, 2.0, &xb).is_err());
        assert!(fractional_power_apply(&m, 0.3, 2.0, &xb).is_ok());
    }

    #[test]
    fn tail_model_recovers_power_laws() {
        let n = SpectralModel::neumann_interval(1000).unwrap();
        let t = n.tail_model(&n.physical_weights());
        assert!(t.weight_exp.abs() < 1e-12);
        assert!((t.weight_amp - 4.0).abs() < 1e-12);
        let d = SpectralModel::dirichlet_interval(1000).unwrap();
        let t = d.tail_model(&d.physical_weights());
        assert!((t.weight_exp - 1.0).abs() < 1e-12);
        assert!((t.weight_amp - 4.0).abs() < 1e-9);
    }

    #[test]
    fn tail_sum_bounds_the_true_tail() {
        // sum_{k >= K} 1 / (2 pi^2 k^2) for the Neumann spectrum
        let k = 500;
        let m = SpectralModel::neumann_interval(k).unwrap();
        let t = m.tail_model(&m.weights(Weighting::Unit));
        let bound = t.tail_sum(|mu, w| w / (2.0 * mu), 1.0).unwrap();
        let exact: f64 = (k..2_000_000)
            .map(|i| 1.0 / (2.0 * PI * PI * (i * i) as f64))
            .sum();
        assert!(bound >= exact);
        assert!(bound < 1.01 * exact);
    }
}
