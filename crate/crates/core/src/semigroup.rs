//! Integrated semigroup `S_A(t)`, its derivative, the analytic semigroup `T_0(t)`
//! on `{0} x H`, and the deterministic diamond convolution
//! `(S_A <> f)(t) = d/dt int_0^t S_A(t - s) f(s) ds`.
//!
//! In coordinates, mode `k` of `S_A(t) z` is `g(mu_k, t) u_k` with
//! `g(mu, t) = (1 - e^{-mu t}) / mu` (and `g(0, t) = t`), where `u_k` is the
//! coupled input of `z`. The convolution is evaluated with exact per-mode
//! exponential integrators on each grid cell, so the semigroup identities
//! hold to round-off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{Provenance, SamplePath, TimeGrid};
use crate::spectral_model::{fractional_power_apply, CoordVector, SpectralModel};

/// `phi_k(z) = int_0^1 e^{(1 - s) z} s^{k-1} / (k-1)! ds` for `k >= 1`,
/// with `phi_0(z) = e^z`.
pub fn phi(k: usize, z: f64) -> f64 {
    if k == 0 {
        return z.exp();
    }
    if z.abs() < 2.0 {
        // phi_k(z) = sum_n z^n / (n + k)!
        let mut term = 1.0 / factorial(k);
        let mut sum = term;
        for n in 1..60 {
            term *= z / (n + k) as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    // phi_{k+1}(z) = (phi_k(z) - 1/k!) / z
    let mut p = z.exp_m1() / z;
    for j in 1..k {
        p = (p - 1.0 / factorial(j)) / z;
    }
    p
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `g(mu, t) = int_0^t e^{-mu s} ds`, exact at `mu = 0`.
pub fn integrated_exponential(mu: f64, t: f64) -> f64 {
    t * phi(1, -mu * t)
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTime(format!("t = {t} must be >= 0")))
    }
}

fn require_interior(model: &SpectralModel, x: &CoordVector, what: &str) -> Result<()> {
    model.check_vector(x)?;
    if x.is_interior() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} must lie in the closure of the domain (zero boundary part)"
        )))
    }
}

/// `T_0(t) x`: modes multiplied by `e^{-mu_k t}`.
pub fn t0_apply(model: &SpectralModel, t: f64, x: &CoordVector) -> Result<CoordVector> {
    check_time(t)?;
    require_interior(model, x, "T_0 argument")?;
    let modes = x
        .modes
        .iter()
        .zip(model.eigenvalues())
        .map(|(&v, &mu)| (-mu * t).exp() * v)
        .collect();
    Ok(CoordVector::interior(modes))
}

/// `S_A(t) z`: modes `g(mu_k, t) (f_k + sum_c b_{c,k} w_c)`.
pub fn sa_apply(model: &SpectralModel, t: f64, z: &CoordVector) -> Result<CoordVector> {
    check_time(t)?;
    model.check_vector(z)?;
    let modes = model
        .coupled_input(z)
        .into_iter()
        .zip(model.eigenvalues())
        .map(|(v, &mu)| integrated_exponential(mu, t) * v)
        .collect();
    Ok(CoordVector::interior(modes))
}

/// `dS_A(t)/dt z` for `t > 0`: modes `e^{-mu_k t} (f_k + sum_c b_{c,k} w_c)`.
/// The family is not strongly continuous at `0` on the full space, so
/// `t = 0` is rejected.
pub fn dsa_apply(model: &SpectralModel, t: f64, z: &CoordVector) -> Result<CoordVector> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidTime(format!(
            "dS_A/dt is only defined for t > 0, got {t}"
        )));
    }
    model.check_vector(z)?;
    let modes = model
        .coupled_input(z)
        .into_iter()
        .zip(model.eigenvalues())
        .map(|(v, &mu)| (-mu * t).exp() * v)
        .collect();
    Ok(CoordVector::interior(modes))
}

/// `dS_A/dt` through the factorization
/// `(lambda - A_0)^alpha T_0(t) (lambda - A)^{-alpha}`.
pub fn dsa_apply_factored(
    model: &SpectralModel,
    t: f64,
    z: &CoordVector,
    alpha: f64,
    lambda: f64,
) -> Result<CoordVector> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidTime(format!(
            "dS_A/dt is only defined for t > 0, got {t}"
        )));
    }
    let inner = fractional_power_apply(model, alpha, lambda, z)?;
    let modes = inner
        .modes
        .iter()
        .zip(model.eigenvalues())
        .map(|(&v, &mu)| (lambda + mu).powf(alpha) * ((-mu * t).exp() * v))
        .collect();
    Ok(CoordVector::interior(modes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    /// One value per cell, held on `[t_i, t_{i+1})`.
    PiecewiseConstant,
    /// Values at the nodes, linear in between.
    PiecewiseLinear,
    /// Values and time derivatives at the nodes, cubic Hermite in between.
    PiecewiseCubic,
}

/// Forcing `f(t)` on a time grid. Values may carry a boundary part; it enters
/// the modes through the couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSignal {
    kind: ForcingKind,
    grid: TimeGrid,
    values: Vec<CoordVector>,
    slopes: Option<Vec<CoordVector>>,
}

fn combine(terms: &[(f64, &CoordVector)]) -> CoordVector {
    let k = terms[0].1.modes.len();
    let mut modes = vec![0.0; k];
    let mut boundary: Option<Vec<f64>> = None;
    for &(c, v) in terms {
        for (m, &x) in modes.iter_mut().zip(&v.modes) {
            *m += c * x;
        }
        if let Some(w) = &v.boundary {
            let acc = boundary.get_or_insert_with(|| vec![0.0; w.len()]);
            for (a, &x) in acc.iter_mut().zip(w) {
                *a += c * x;
            }
        }
    }
    CoordVector { boundary, modes }
}

fn hermite_basis(theta: f64) -> [f64; 4] {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    [
        1.0 - 3.0 * t2 + 2.0 * t3,
        theta - 2.0 * t2 + t3,
        3.0 * t2 - 2.0 * t3,
        t3 - t2,
    ]
}

fn hermite_basis_derivative(theta: f64) -> [f64; 4] {
    let t2 = theta * theta;
    [
        -6.0 * theta + 6.0 * t2,
        1.0 - 4.0 * theta + 3.0 * t2,
        6.0 * theta - 6.0 * t2,
        3.0 * t2 - 2.0 * theta,
    ]
}

impl ForcingSignal {
    pub fn piecewise_constant(grid: TimeGrid, values: Vec<CoordVector>) -> Result<Self> {
        if values.len() != grid.len() - 1 {
            return Err(Error::InvalidSize(format!(
                "piecewise-constant forcing needs {} cell values, got {}",
                grid.len() - 1,
                values.len()
            )));
        }
        Self::checked(ForcingKind::PiecewiseConstant, grid, values, None)
    }

    pub fn piecewise_linear(grid: TimeGrid, values: Vec<CoordVector>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidSize(format!(
                "piecewise-linear forcing needs {} node values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Self::checked(ForcingKind::PiecewiseLinear, grid, values, None)
    }

    pub fn piecewise_cubic(
        grid: TimeGrid,
        values: Vec<CoordVector>,
        slopes: Vec<CoordVector>,
    ) -> Result<Self> {
        if values.len() != grid.len() || slopes.len() != grid.len() {
            return Err(Error::InvalidSize(format!(
                "cubic forcing needs {} node values and slopes",
                grid.len()
            )));
        }
        Self::checked(ForcingKind::PiecewiseCubic, grid, values, Some(slopes))
    }

    fn checked(
        kind: ForcingKind,
        grid: TimeGrid,
        values: Vec<CoordVector>,
        slopes: Option<Vec<CoordVector>>,
    ) -> Result<Self> {
        let k = values.first().map_or(0, CoordVector::len);
        let all = values.iter().chain(slopes.iter().flatten());
        for v in all {
            if v.len() != k {
                return Err(Error::InvalidSize("forcing values differ in length".into()));
            }
        }
        Ok(Self {
            kind,
            grid,
            values,
            slopes,
        })
    }

    /// Samples `f` at the nodes of `grid`.
    pub fn sample_linear<F: Fn(f64) -> CoordVector>(grid: TimeGrid, f: F) -> Result<Self> {
        let values = grid.times().iter().map(|&t| f(t)).collect();
        Self::piecewise_linear(grid, values)
    }

    /// Samples `f` and its derivative `df` at the nodes of `grid`.
    pub fn sample_cubic<F, D>(grid: TimeGrid, f: F, df: D) -> Result<Self>
    where
        F: Fn(f64) -> CoordVector,
        D: Fn(f64) -> CoordVector,
    {
        let values = grid.times().iter().map(|&t| f(t)).collect();
        let slopes = grid.times().iter().map(|&t| df(t)).collect();
        Self::piecewise_cubic(grid, values, slopes)
    }

    /// Zero forcing on `grid`.
    pub fn zero(grid: TimeGrid, modes: usize) -> Self {
        let values = vec![CoordVector::zeros(modes); grid.len()];
        Self {
            kind: ForcingKind::PiecewiseLinear,
            grid,
            values,
            slopes: None,
        }
    }

    pub fn kind(&self) -> ForcingKind {
        self.kind
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[CoordVector] {
        &self.values
    }

    pub fn slopes(&self) -> Option<&[CoordVector]> {
        self.slopes.as_deref()
    }

    fn cell_of(&self, t: f64) -> usize {
        let times = self.grid.times();
        let n = times.len();
        match times.binary_search_by(|s| s.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value of the forcing at `t` (right-continuous for the constant kind).
    pub fn eval(&self, t: f64) -> Result<CoordVector> {
        if !(0.0..=self.grid.tau()).contains(&t) {
            return Err(Error::InvalidTime(format!(
                "{t} lies outside [0, {}]",
                self.grid.tau()
            )));
        }
        let i = self.cell_of(t);
        let times = self.grid.times();
        let (a, b) = (times[i], times[i + 1]);
        let theta = (t - a) / (b - a);
        Ok(match self.kind {
            ForcingKind::PiecewiseConstant => self.values[i].clone(),
            ForcingKind::PiecewiseLinear => {
                combine(&[(1.0 - theta, &self.values[i]), (theta, &self.values[i + 1])])
            }
            ForcingKind::PiecewiseCubic => {
                let s = self.slopes.as_ref().expect("cubic forcing has slopes");
                let h = hermite_basis(theta);
                let dt = b - a;
                combine(&[
                    (h[0], &self.values[i]),
                    (h[1] * dt, &s[i]),
                    (h[2], &self.values[i + 1]),
                    (h[3] * dt, &s[i + 1]),
                ])
            }
        })
    }

    fn eval_slope(&self, t: f64) -> CoordVector {
        let i = self.cell_of(t);
        let times = self.grid.times();
        let (a, b) = (times[i], times[i + 1]);
        let dt = b - a;
        let theta = (t - a) / dt;
        let s = self.slopes.as_ref().expect("cubic forcing has slopes");
        let h = hermite_basis_derivative(theta);
        combine(&[
            (h[0] / dt, &self.values[i]),
            (h[1], &s[i]),
            (h[2] / dt, &self.values[i + 1]),
            (h[3], &s[i + 1]),
        ])
    }

    /// The same function represented on a finer grid that contains every
    /// node of the current one.
    pub fn refined(&self, grid: &TimeGrid) -> Result<Self> {
        if grid.tau() != self.grid.tau()
            || self
                .grid
                .times()
                .iter()
                .any(|&t| grid.position(t).is_none())
        {
            return Err(Error::Configuration(
                "refined grid must contain every original node".into(),
            ));
        }
        let times = grid.times();
        match self.kind {
            ForcingKind::PiecewiseConstant => {
                let values = times[..times.len() - 1]
                    .iter()
                    .map(|&t| self.values[self.cell_of(t)].clone())
                    .collect();
                Self::piecewise_constant(grid.clone(), values)
            }
            ForcingKind::PiecewiseLinear => {
                let values = times.iter().map(|&t| self.eval(t)).collect::<Result<_>>()?;
                Self::piecewise_linear(grid.clone(), values)
            }
            ForcingKind::PiecewiseCubic => {
                let values = times.iter().map(|&t| self.eval(t)).collect::<Result<_>>()?;
                let slopes = times.iter().map(|&t| self.eval_slope(t)).collect();
                Self::piecewise_cubic(grid.clone(), values, slopes)
            }
        }
    }

    /// `f(s + .)` on `[0, end - s]`; `s` and `end` must be grid nodes.
    pub fn shifted(&self, s: f64, end: f64) -> Result<Self> {
        let (i0, i1) = match (self.grid.position(s), self.grid.position(end)) {
            (Some(a), Some(b)) if b > a => (a, b),
            _ => {
                return Err(Error::InvalidInterval(format!(
                    "shift window [{s}, {end}] must be spanned by grid nodes"
                )))
            }
        };
        let times: Vec<f64> = self.grid.times()[i0..=i1].iter().map(|&t| t - s).collect();
        let mut times = times;
        times[0] = 0.0;
        let grid = TimeGrid::new(times)?;
        match self.kind {
            ForcingKind::PiecewiseConstant => {
                Self::piecewise_constant(grid, self.values[i0..i1].to_vec())
            }
            ForcingKind::PiecewiseLinear => {
                Self::piecewise_linear(grid, self.values[i0..=i1].to_vec())
            }
            ForcingKind::PiecewiseCubic => Self::piecewise_cubic(
                grid,
                self.values[i0..=i1].to_vec(),
                self.slopes.as_ref().expect("cubic forcing has slopes")[i0..=i1].to_vec(),
            ),
        }
    }

    /// `int_0^{t_i} u_k(s) ds` at every node, per mode, where `u` is the coupled
    /// input of the forcing. Exact for the representation.
    pub fn cumulative_input(&self, model: &SpectralModel) -> Vec<Vec<f64>> {
        let input: Vec<Vec<f64>> = self.values.iter().map(|v| model.coupled_input(v)).collect();
        let slopes: Option<Vec<Vec<f64>>> = self
            .slopes
            .as_ref()
            .map(|s| s.iter().map(|v| model.coupled_input(v)).collect());
        let times = self.grid.times();
        let k = model.modes();
        let mut acc = vec![0.0; k];
        let mut out = vec![acc.clone()];
        for i in 0..times.len() - 1 {
            let dt = times[i + 1] - times[i];
            for m in 0..k {
                acc[m] += match self.kind {
                    ForcingKind::PiecewiseConstant => dt * input[i][m],
                    ForcingKind::PiecewiseLinear => 0.5 * dt * (input[i][m] + input[i + 1][m]),
                    ForcingKind::PiecewiseCubic => {
                        let s = slopes.as_ref().expect("cubic forcing has slopes");
                        0.5 * dt * (input[i][m] + input[i + 1][m])
                            + dt * dt * (s[i][m] - s[i + 1][m]) / 12.0
                    }
                };
            }
            out.push(acc.clone());
        }
        out
    }
}

/// Exact per-mode propagation of `u' = -mu u + F(t)` across the cells of the
/// forcing grid, starting from `start`. Returns the state at every node.
fn propagate(
    model: &SpectralModel,
    f: &ForcingSignal,
    start: &[f64],
    scale: Option<&[f64]>,
) -> Vec<Vec<f64>> {
    let times = f.grid.times();
    let mu = model.eigenvalues();
    let k = model.modes();
    let input: Vec<Vec<f64>> = f.values.iter().map(|v| model.coupled_input(v)).collect();
    let slopes: Option<Vec<Vec<f64>>> = f
        .slopes
        .as_ref()
        .map(|s| s.iter().map(|v| model.coupled_input(v)).collect());
    let mut state = start.to_vec();
    let mut out = Vec::with_capacity(times.len());
    out.push(state.clone());
    for i in 0..times.len() - 1 {
        let dt = times[i + 1] - times[i];
        for m in 0..k {
            let z = -mu[m] * dt;
            let decay = z.exp();
            // scale^{-1} on the way in, scale on the way out (fractional-power route)
            let (pre, post) = scale.map_or((1.0, 1.0), |s| (1.0 / s[m], s[m]));
            let incr = match f.kind {
                ForcingKind::PiecewiseConstant => dt * phi(1, z) * (pre * input[i][m]),
                ForcingKind::PiecewiseLinear => {
                    let (a, b) = (pre * input[i][m], pre * input[i + 1][m]);
                    dt * (phi(1, z) * a + phi(2, z) * (b - a))
                }
                ForcingKind::PiecewiseCubic => {
                    let s = slopes.as_ref().expect("cubic forcing has slopes");
                    let m0 = phi(1, z);
                    let m1 = phi(2, z);
                    let m2 = 2.0 * phi(3, z);
                    let m3 = 6.0 * phi(4, z);
                    let w00 = m0 - 3.0 * m2 + 2.0 * m3;
                    let w10 = m1 - 2.0 * m2 + m3;
                    let w01 = 3.0 * m2 - 2.0 * m3;
                    let w11 = m3 - m2;
                    dt * (w00 * pre * input[i][m]
                        + w10 * dt * pre * s[i][m]
                        + w01 * pre * input[i + 1][m]
                        + w11 * dt * pre * s[i + 1][m])
                }
            };
            state[m] = decay * state[m] + post * incr;
        }
        out.push(state.clone());
    }
    out
}

fn check_same_grid(f: &ForcingSignal, grid: &TimeGrid) -> Result<()> {
    if f.grid.times() == grid.times() {
        Ok(())
    } else {
        Err(Error::Configuration(
            "forcing grid does not match the requested time grid".into(),
        ))
    }
}

fn check_forcing(model: &SpectralModel, f: &ForcingSignal) -> Result<()> {
    for v in f.values.iter().chain(f.slopes.iter().flatten()) {
        model.check_vector(v)?;
    }
    Ok(())
}

/// `(S_A <> f)(t_i)` at every node of `grid`. The result always lies in
/// `{0} x H`.
pub fn convolve_diamond(
    model: &SpectralModel,
    f: &ForcingSignal,
    grid: &TimeGrid,
) -> Result<SamplePath> {
    check_same_grid(f, grid)?;
    check_forcing(model, f)?;
    let modes = propagate(model, f, &vec![0.0; model.modes()], None);
    Ok(SamplePath {
        grid: grid.clone(),
        modes,
        provenance: Provenance::Deterministic,
        seed: None,
    })
}

/// The diamond convolution evaluated through the fractional-power
/// factorization `(lambda - A_0)^beta T_0(t - s) (lambda - A)^{-beta} f(s)`.
pub fn convolve_diamond_factored(
    model: &SpectralModel,
    f: &ForcingSignal,
    grid: &TimeGrid,
    beta: f64,
    lambda: f64,
) -> Result<SamplePath> {
    check_same_grid(f, grid)?;
    check_forcing(model, f)?;
    if !(beta > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need beta > 0 and lambda > 0, got beta = {beta}, lambda = {lambda}"
        )));
    }
    let scale: Vec<f64> = model
        .eigenvalues()
        .iter()
        .map(|&mu| (lambda + mu).powf(beta))
        .collect();
    let modes = propagate(model, f, &vec![0.0; model.modes()], Some(&scale));
    Ok(SamplePath {
        grid: grid.clone(),
        modes,
        provenance: Provenance::Deterministic,
        seed: None,
    })
}

/// Integrated solution `u(t) = T_0(t) xi + (S_A <> f)(t)`.
pub fn voc_solve(
    model: &SpectralModel,
    xi: &CoordVector,
    f: &ForcingSignal,
    grid: &TimeGrid,
) -> Result<SamplePath> {
    require_interior(model, xi, "initial value")?;
    check_same_grid(f, grid)?;
    check_forcing(model, f)?;
    let modes = propagate(model, f, &xi.modes, None);
    Ok(SamplePath {
        grid: grid.clone(),
        modes,
        provenance: Provenance::Deterministic,
        seed: None,
    })
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm of `(S_A <> f)(t) - [T_0(t - s)(S_A <> f)(s) + (S_A <> f(s + .))(t - s)]`.
pub fn check_extended_voc(model: &SpectralModel, f: &ForcingSignal, s: f64, t: f64) -> Result<f64> {
    if s > t {
        return Err(Error::InvalidInterval(format!(
            "need s <= t, got s = {s}, t = {t}"
        )));
    }
    if s < 0.0 || t > f.grid.tau() {
        return Err(Error::InvalidInterval(format!(
            "[{s}, {t}] is not inside [0, {}]",
            f.grid.tau()
        )));
    }
    let grid = f.grid.with_points(&[s, t])?;
    let fine = f.refined(&grid)?;
    let full = convolve_diamond(model, &fine, &grid)?;
    let is = grid.position(s).expect("s was inserted");
    let it = grid.position(t).expect("t was inserted");
    let lhs = &full.modes[it];
    let at_s = CoordVector::interior(full.modes[is].clone());
    let mut rhs = t0_apply(model, t - s, &at_s)?.modes;
    if t > s {
        let tail = fine.shifted(s, t)?;
        let tail_grid = tail.grid.clone();
        let restarted = convolve_diamond(model, &tail, &tail_grid)?;
        let last = restarted.modes.last().expect("non-empty path");
        for (r, x) in rhs.iter_mut().zip(last) {
            *r += x;
        }
    }
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(euclid(&diff))
}

/// Residual of the integrated-solution identity
/// `u(t) = xi + A int_0^t u + int_0^t f` for a deterministic path, with the
/// time integral of `u` taken by the cumulative trapezoid rule. Returns the
/// max-norm over modes and nodes.
pub fn integrated_residual(
    model: &SpectralModel,
    path: &SamplePath,
    f: &ForcingSignal,
) -> Result<f64> {
    check_same_grid(f, &path.grid)?;
    let times = path.grid.times();
    let mu = model.eigenvalues();
    let forcing_integral = f.cumulative_input(model);
    let xi = &path.modes[0];
    let mut integral = vec![0.0; model.modes()];
    let mut worst: f64 = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            let dt = times[i] - times[i - 1];
            for (m, acc) in integral.iter_mut().enumerate() {
                *acc += 0.5 * dt * (path.modes[i - 1][m] + path.modes[i][m]);
            }
        }
        for m in 0..model.modes() {
            let r = path.modes[i][m] - xi[m] + mu[m] * integral[m] - forcing_integral[i][m];
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions_match_definitions() {
        for &z in &[-40.0, -3.0, -2.0, -1.999, -0.5, -1e-9, 0.0, 0.7, 3.0] {
            let e = f64::exp(z);
            if z != 0.0 {
                let p1 = z.exp_m1() / z;
                let p2 = (e - 1.0 - z) / (z * z);
                assert!((phi(1, z) - p1).abs() <= 1e-12 * p1.abs().max(1e-3), "{z}");
                if z.abs() > 1e-3 {
                    assert!((phi(2, z) - p2).abs() <= 1e-10 * p2.abs(), "{z}");
                }
            } else {
                assert_eq!(phi(1, z), 1.0);
                assert_eq!(phi(2, z), 0.5);
                assert!((phi(3, z) - 1.0 / 6.0).abs() < 1e-16);
            }
        }
        // continuity across the series/recurrence switch
        for k in 1..=4 {
            let a = phi(k, -2.0 + 1e-12);
            let b = phi(k, -2.0 - 1e-12);
            assert!((a - b).abs() < 1e-11 * a.abs(), "k = {k}");
        }
    }

    #[test]
    fn t0_identity_at_zero_and_rejects_negative_time() {
        let m = SpectralModel::neumann_interval(4).unwrap();
        let x = CoordVector::interior(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t0_apply(&m, 0.0, &x).unwrap(), x);
        assert!(matches!(
            t0_apply(&m, -1e-3, &x),
            Err(Error::InvalidTime(_))
        ));
        let y = t0_apply(&m, 0.1, &CoordVector::unit_mode(4, 1)).unwrap();
        assert!((y.modes[1] - (-std::f64::consts::PI.powi(2) / 10.0).exp()).abs() < 1e-16);
    }

    #[test]
    fn sa_is_zero_at_zero_and_dsa_rejects_zero() {
        let m = SpectralModel::neumann_interval(4).unwrap();
        let z = CoordVector::with_boundary(vec![1.0, -1.0], vec![1.0, 0.0, 0.0, 2.0]);
        assert!(sa_apply(&m, 0.0, &z)
            .unwrap()
            .modes
            .iter()
            .all(|&v| v == 0.0));
        assert!(matches!(dsa_apply(&m, 0.0, &z), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn sa_single_mode_closed_form() {
        let m = SpectralModel::custom(vec![3.0], vec![vec![0.0]], 2.0, 1, None).unwrap();
        let z = CoordVector::interior(vec![2.0]);
        let v = sa_apply(&m, 0.4, &z).unwrap().modes[0];
        assert!((v - 2.0 * (1.0 - (-1.2f64).exp()) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn voc_rejects_boundary_initial_value() {
        let m = SpectralModel::neumann_interval(3).unwrap();
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let f = ForcingSignal::zero(grid.clone(), 3);
        let xi = CoordVector::with_boundary(vec![1.0, 0.0], vec![0.0; 3]);
        assert!(matches!(
            voc_solve(&m, &xi, &f, &grid),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn mismatched_grids_are_configuration_errors() {
        let m = SpectralModel::neumann_interval(3).unwrap();
        let f = ForcingSignal::zero(TimeGrid::uniform(1.0, 5).unwrap(), 3);
        let other = TimeGrid::uniform(1.0, 6).unwrap();
        assert!(matches!(
            convolve_diamond(&m, &f, &other),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn extended_voc_interval_errors() {
        let m = SpectralModel::neumann_interval(3).unwrap();
        let f = ForcingSignal::zero(TimeGrid::uniform(1.0, 5).unwrap(), 3);
        assert!(matches!(
            check_extended_voc(&m, &f, 0.6, 0.5),
            Err(Error::InvalidInterval(_))
        ));
    }

    #[test]
    fn refinement_preserves_the_function() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let f = ForcingSignal::sample_cubic(
            grid,
            |t| CoordVector::interior(vec![t.sin(), t * t]),
            |t| CoordVector::interior(vec![t.cos(), 2.0 * t]),
        )
        .unwrap();
        let fine_grid = f.grid().with_points(&[0.1, 0.5, 0.9]).unwrap();
        let fine = f.refined(&fine_grid).unwrap();
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            let a = f.eval(t).unwrap();
            let b = fine.eval(t).unwrap();
            for (x, y) in a.modes.iter().zip(&b.modes) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }
}
