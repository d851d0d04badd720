//! Numerical checks of the structural assumptions: resolvent decay
//! `||R(lambda, A)|| ~ lambda^{-1/p*}`, square-integrability of `S_A` and
//! `dS_A/dr` in Hilbert-Schmidt norm, and `L^p` integrability of the
//! operator norm of `dS_A/dr` near `r = 0`.
//!
//! Convergence is only claimed with an explicit tail bound; divergence only
//! with a regression on partial-sum growth. Everything else is
//! `Inconclusive`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm_diag_with_columns;
use crate::quad::{CompensatedSum, GaussLegendre};
use crate::semigroup::integrated_exponential;
use crate::spectral_model::{
    conjugate_exponent, resolvent_norm, tail_bound_from, SpectralModel, TailModel, Weighting,
};
use crate::stats::fit_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthKind {
    /// `S(K) ~ a log K`; `exponent` is `a`.
    Logarithmic,
    /// `S(K) ~ K^a`; `exponent` is `a`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedGrowth {
    pub kind: GrowthKind,
    pub exponent: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub partial_sum: f64,
    pub terms_used: usize,
    pub tail_bound: Option<f64>,
    pub fitted_growth: Option<FittedGrowth>,
    pub verdict: Verdict,
    /// `(K_i, S(K_i))` at `K_i = K / 2^i`.
    pub checkpoints: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Converged needs `tail_bound / |partial_sum|` below this.
    pub rel_tol: f64,
    /// Minimum coefficient of determination for any fitted verdict.
    pub r2_min: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-4,
            r2_min: 0.99,
        }
    }
}

const MIN_CHECKPOINT: usize = 16;
const MAX_CHECKPOINTS: usize = 8;

/// Sums `term(k)` for `k` in `first..K` with checkpoints, then decides.
fn decide_series<F: Fn(usize) -> f64>(
    modes: usize,
    first: usize,
    term: F,
    tail_bound: Option<f64>,
    opts: &SeriesOptions,
) -> SeriesResult {
    let mut marks: Vec<usize> = Vec::new();
    let mut kk = modes;
    while kk >= MIN_CHECKPOINT.max(first + 1) && marks.len() < MAX_CHECKPOINTS {
        marks.push(kk);
        kk /= 2;
    }
    marks.reverse();
    let mut sum = CompensatedSum::default();
    let mut checkpoints = Vec::with_capacity(marks.len());
    let mut next = 0;
    for k in first..modes {
        sum.add(term(k));
        if next < marks.len() && k + 1 == marks[next] {
            checkpoints.push((marks[next], sum.value()));
            next += 1;
        }
    }
    let partial_sum = sum.value();
    if checkpoints.last().map(|c| c.0) != Some(modes) {
        checkpoints.push((modes, partial_sum));
    }
    checkpoints.reverse();

    let converged =
        tail_bound.is_some_and(|t| partial_sum != 0.0 && t / partial_sum.abs() < opts.rel_tol);
    let (fitted_growth, verdict) = if converged {
        (None, Verdict::Converged)
    } else {
        classify_growth(&checkpoints, opts)
    };
    SeriesResult {
        partial_sum,
        terms_used: modes - first,
        tail_bound,
        fitted_growth,
        verdict,
        checkpoints,
    }
}

/// Reads the growth law off partial sums at successive halvings of `K`:
/// increments per doubling that stay constant mean logarithmic growth,
/// increments that grow geometrically mean power growth.
fn classify_growth(
    checkpoints: &[(usize, f64)],
    opts: &SeriesOptions,
) -> (Option<FittedGrowth>, Verdict) {
    if checkpoints.len() < 4 {
        return (None, Verdict::Inconclusive);
    }
    // checkpoints are ordered from K downwards
    let increments: Vec<(f64, f64)> = checkpoints
        .windows(2)
        .map(|w| ((w[0].0 as f64).ln(), w[0].1 - w[1].1))
        .collect();
    let top = &increments[..increments.len().min(4)];
    let ratios: Vec<f64> = top.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let rho = ratios.iter().sum::<f64>() / ratios.len() as f64;
    if !rho.is_finite() || top.iter().any(|d| d.1 <= 0.0) {
        return (None, Verdict::Inconclusive);
    }
    if (rho - 1.0).abs() <= 0.25 {
        let x: Vec<f64> = checkpoints.iter().map(|c| (c.0 as f64).ln()).collect();
        let y: Vec<f64> = checkpoints.iter().map(|c| c.1).collect();
        let fit = fit_line(&x, &y);
        let g = FittedGrowth {
            kind: GrowthKind::Logarithmic,
            exponent: fit.slope,
            r2: fit.r2,
        };
        let v = if fit.slope > 0.0 && fit.r2 >= opts.r2_min {
            Verdict::Diverged
        } else {
            Verdict::Inconclusive
        };
        (Some(g), v)
    } else if rho > 1.25 {
        let x: Vec<f64> = increments.iter().map(|d| d.0).collect();
        let y: Vec<f64> = increments.iter().map(|d| d.1.ln()).collect();
        let fit = fit_line(&x, &y);
        let g = FittedGrowth {
            kind: GrowthKind::Power,
            exponent: fit.slope,
            r2: fit.r2,
        };
        let v = if fit.slope > 0.0 && fit.r2 >= opts.r2_min {
            Verdict::Diverged
        } else {
            Verdict::Inconclusive
        };
        (Some(g), v)
    } else {
        // shrinking increments: convergent-looking but the tail is not
        // controlled at this truncation
        (None, Verdict::Inconclusive)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )))
    }
}

fn weighting(unit_weights: bool) -> Weighting {
    if unit_weights {
        Weighting::Unit
    } else {
        Weighting::Physical
    }
}

/// `sum_k c_k (1 - e^{-2 mu_k tau}) / (2 mu_k)`, the squared Hilbert-Schmidt
/// norm of `dS_A/dr` integrated over `[0, tau]`. A zero mode contributes
/// `c_0 tau` when included.
pub fn trace_series_dsa(
    model: &SpectralModel,
    tau: f64,
    include_zero_mode: bool,
    unit_weights: bool,
    opts: &SeriesOptions,
) -> Result<SeriesResult> {
    check_tau(tau)?;
    let w = model.weights(weighting(unit_weights));
    let mu = model.eigenvalues();
    let first = if include_zero_mode {
        0
    } else {
        mu.iter().take_while(|&&m| m == 0.0).count()
    };
    let tail = model.tail_model(&w).tail_sum(|m, c| c / (2.0 * m), 1.0);
    Ok(decide_series(
        model.modes(),
        first,
        |k| w[k] * integrated_exponential(2.0 * mu[k], tau),
        tail,
        opts,
    ))
}

/// `int_0^tau g(mu, r)^2 dr` with `g(mu, r) = (1 - e^{-mu r}) / mu`.
pub fn integrated_square(mu: f64, tau: f64) -> f64 {
    let x = mu * tau;
    let t3 = tau * tau * tau;
    if x < 0.1 {
        // (x - 2(1 - e^{-x}) + (1 - e^{-2x})/2) / x^3
        //   = sum_{n >= 3} (-1)^{n+1} (2^{n-1} - 2) x^{n-3} / n!
        let mut fact = 6.0;
        let mut pow2 = 4.0;
        let mut xp = 1.0;
        let mut s = 0.0;
        for n in 3..30 {
            if n > 3 {
                fact *= n as f64;
                pow2 *= 2.0;
                xp *= -x;
            }
            s += (pow2 - 2.0) * xp / fact;
        }
        t3 * s
    } else {
        let h = x + 2.0 * (-x).exp_m1() - 0.5 * (-2.0 * x).exp_m1();
        t3 * h / (x * x * x)
    }
}

/// `sum_k c_k int_0^tau g(mu_k, r)^2 dr`, the squared Hilbert-Schmidt norm of
/// `S_A(r)` integrated over `[0, tau]`.
pub fn trace_series_sa(
    model: &SpectralModel,
    tau: f64,
    unit_weights: bool,
    opts: &SeriesOptions,
) -> Result<SeriesResult> {
    check_tau(tau)?;
    let w = model.weights(weighting(unit_weights));
    let mu = model.eigenvalues();
    let tail = model.tail_model(&w).tail_sum(|m, c| c * tau / (m * m), 2.0);
    Ok(decide_series(
        model.modes(),
        0,
        |k| w[k] * integrated_square(mu[k], tau),
        tail,
        opts,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub lambda_grid: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub pstar_estimate: f64,
    pub qstar_estimate: f64,
    /// Largest truncation tail bound relative to the norm over the grid.
    pub max_tail_ratio: f64,
    /// Set when the fit is too poor to read an exponent from.
    pub inconclusive: bool,
}

fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[points - 1] = hi;
    g
}

const TAIL_RATIO_MAX: f64 = 0.01;

/// Fits `log ||R(lambda, A)||` against `log lambda` on a geometric grid.
pub fn estimate_resolvent_decay(
    model: &SpectralModel,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
) -> Result<DecayFit> {
    if !(lambda_min > 0.0 && lambda_max > lambda_min && lambda_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
        )));
    }
    if lambda_max / lambda_min < 1e3 {
        return Err(Error::InvalidParameter(
            "lambda grid must span at least three decades".into(),
        ));
    }
    if points < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 points, got {points}"
        )));
    }
    let lambda_grid = geometric_grid(lambda_min, lambda_max, points);
    let norms: Vec<f64> = lambda_grid
        .par_iter()
        .map(|&l| resolvent_norm(model, l))
        .collect::<Result<_>>()?;
    let w = model.physical_weights();
    let tail = model.tail_model(&w);
    let head_cols = |l: f64| -> f64 {
        w.iter()
            .zip(model.eigenvalues())
            .map(|(wk, mu)| wk / (l + mu).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let ratio_at =
        |tm: &TailModel, l: f64, n: f64| tail_bound_from(tm, l, n, head_cols(l)).map(|b| b / n);
    let mut max_tail_ratio: f64 = 0.0;
    for (&l, &n) in lambda_grid.iter().zip(&norms) {
        match ratio_at(&tail, l, n) {
            Some(r) if r < TAIL_RATIO_MAX => max_tail_ratio = max_tail_ratio.max(r),
            other => {
                let required = tail.required_modes(|tm| {
                    lambda_grid
                        .iter()
                        .zip(&norms)
                        .all(|(&l, &n)| ratio_at(tm, l, n).is_some_and(|r| r < TAIL_RATIO_MAX))
                });
                return Err(Error::TruncationInsufficient {
                    current: model.modes(),
                    required,
                    reason: match other {
                        Some(r) => {
                            format!("resolvent tail bound is {r:.3e} of the norm at lambda = {l:e}")
                        }
                        None => "extrapolated resolvent tail diverges".into(),
                    },
                });
            }
        }
    }
    let x: Vec<f64> = lambda_grid.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let fit = fit_line(&x, &y);
    let pstar = -1.0 / fit.slope;
    Ok(DecayFit {
        lambda_grid,
        norms,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        pstar_estimate: pstar,
        qstar_estimate: conjugate_exponent(pstar),
        max_tail_ratio,
        inconclusive: fit.r2 < 0.9,
    })
}

/// Modes with `mu_k r` above this are dropped when evaluating norms at time
/// `r`; their contribution is below `e^{-2 * 50}` per mode.
const SMALL_R_CUTOFF: f64 = 50.0;

/// `||dS_A(r)/dr||` on `U x H`: the norm of `[diag(e^{-mu_k r}) | b_c e^{-mu_k r}]`.
pub fn dsa_operator_norm(model: &SpectralModel, r: f64) -> Result<f64> {
    let mu = model.eigenvalues();
    let active = mu.partition_point(|&m| m * r <= SMALL_R_CUTOFF).max(1);
    let d: Vec<f64> = mu[..active].iter().map(|&m| (-m * r).exp()).collect();
    let cols: Vec<Vec<f64>> = model
        .couplings()
        .iter()
        .map(|b| b[..active].iter().zip(&d).map(|(bk, dk)| bk * dk).collect())
        .collect();
    norm_diag_with_columns(&d, &cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub series: SeriesOptions,
    /// Half-width of the band around `p sigma = 1` where no verdict is given.
    pub critical_band: f64,
    /// Converged needs the extrapolated `[0, r_min]` piece to be at most this
    /// share of the total.
    pub extrapolation_share_max: f64,
    pub fit_points: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            series: SeriesOptions::default(),
            critical_band: 0.02,
            extrapolation_share_max: 0.5,
            fit_points: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub p: f64,
    /// `int_{r_min}^tau ||dS_A(r)/dr||^p dr`.
    pub head: f64,
    /// Power-law extrapolation of `int_0^{r_min}`; absent unless `p sigma < 1`.
    pub extrapolated: Option<f64>,
    /// Fitted blow-up exponent: `||dS_A(r)/dr|| ~ r^{-sigma}` near 0.
    pub sigma: f64,
    pub fit_r2: f64,
    pub p_sigma: f64,
    pub fit_window: (f64, f64),
    pub verdict: Verdict,
}

impl LpResult {
    pub fn integral(&self) -> f64 {
        self.head + self.extrapolated.unwrap_or(0.0)
    }
}

/// `int_0^tau ||dS_A(r)/dr||^p dr`: evaluated on `[r_min, tau]`, with the
/// behaviour near 0 read from a log-log fit of the norm.
pub fn lp_norm_integral(
    model: &SpectralModel,
    p: f64,
    tau: f64,
    r_min: f64,
    opts: &LpOptions,
) -> Result<LpResult> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("need p >= 1, got {p}")));
    }
    if !(r_min > 0.0 && r_min < tau && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < r_min < tau, got r_min = {r_min}, tau = {tau}"
        )));
    }
    let last = *model.eigenvalues().last().expect("model has modes");
    if last * r_min < SMALL_R_CUTOFF && model.couplings().iter().flatten().any(|&b| b != 0.0) {
        let k = model.modes() as f64;
        let factor = (SMALL_R_CUTOFF / (last * r_min)).powf(1.0 / model.growth_exponent);
        return Err(Error::TruncationInsufficient {
            current: model.modes(),
            required: (k * factor).ceil() as usize,
            reason: format!(
                "mu_K r_min = {:.3e} is below {SMALL_R_CUTOFF}",
                last * r_min
            ),
        });
    }
    let fit_hi = model
        .first_positive_eigenvalue()
        .map_or(tau, |m| tau.min(0.01 / m))
        .max(r_min * 10.0)
        .min(tau);
    let rs = geometric_grid(r_min, fit_hi, opts.fit_points.max(3));
    let norms: Vec<f64> = rs
        .par_iter()
        .map(|&r| dsa_operator_norm(model, r))
        .collect::<Result<_>>()?;
    let fit = fit_line(
        &rs.iter().map(|r| r.ln()).collect::<Vec<_>>(),
        &norms.iter().map(|n| n.ln()).collect::<Vec<_>>(),
    );
    let sigma = -fit.slope;
    let p_sigma = p * sigma;

    // head integral in y = ln r
    let (ya, yb) = (r_min.ln(), tau.ln());
    let panels = ((yb - ya) * 4.0).ceil().max(1.0) as usize;
    let gl = GaussLegendre::new(10);
    let h = (yb - ya) / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|i| {
            let lo = ya + h * i as f64;
            gl.nodes
                .iter()
                .zip(&gl.weights)
                .map(move |(&x, &w)| (lo + 0.5 * h * (x + 1.0), 0.5 * h * w))
        })
        .collect();
    let head = nodes
        .par_iter()
        .map(|&(y, w)| dsa_operator_norm(model, y.exp()).map(|n| w * y.exp() * n.powf(p)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum::<f64>();

    let n_min = norms[0];
    let extrapolated = (p_sigma < 1.0).then(|| n_min.powf(p) * r_min / (1.0 - p_sigma));
    // A norm that is flat across the window is bounded near 0; a log-log r2
    // says nothing there.
    let (lo, hi) = norms
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), &n| (a.min(n), b.max(n)));
    let bounded = p * (hi / lo).ln() < opts.critical_band * (fit_hi / r_min).ln();
    let verdict = if bounded {
        Verdict::Converged
    } else if fit.r2 < opts.series.r2_min || (p_sigma - 1.0).abs() < opts.critical_band {
        Verdict::Inconclusive
    } else if p_sigma > 1.0 {
        Verdict::Diverged
    } else {
        let extra = extrapolated.unwrap_or(0.0);
        if extra <= opts.extrapolation_share_max * (head + extra) {
            Verdict::Converged
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(LpResult {
        p,
        head,
        extrapolated,
        sigma,
        fit_r2: fit.r2,
        p_sigma,
        fit_window: (r_min, fit_hi),
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub beta: f64,
    pub m_beta: f64,
    pub omega: f64,
}

const GROWTH_R_MIN: f64 = 1e-6;
const GROWTH_POINTS: usize = 200;

/// Constants with `||dS_A(r)/dr|| <= M_beta r^{-beta} e^{omega r}` on a
/// logarithmic grid of `[1e-6, tau]`. `omega = -mu_0` is the growth bound of
/// the interior semigroup; `M_beta` is the largest observed ratio.
pub fn estimate_growth(model: &SpectralModel, beta: f64, tau: f64) -> Result<GrowthConstants> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    check_tau(tau)?;
    let omega = 0.0 - model.bottom_of_spectrum();
    let rs = if tau > GROWTH_R_MIN {
        geometric_grid(GROWTH_R_MIN, tau, GROWTH_POINTS)
    } else {
        vec![tau]
    };
    let ratios: Vec<f64> = rs
        .par_iter()
        .map(|&r| dsa_operator_norm(model, r).map(|n| n * r.powf(beta) * (-omega * r).exp()))
        .collect::<Result<_>>()?;
    Ok(GrowthConstants {
        beta,
        m_beta: ratios.into_iter().fold(0.0, f64::max),
        omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;
    use std::f64::consts::PI;

    #[test]
    fn integrated_square_matches_quadrature() {
        for &mu in &[0.0, 1e-6, 0.05, 0.099, 0.1, 0.5, 3.0, 1e4] {
            let tau = 1.0;
            let (q, _) = adaptive(
                |r| integrated_exponential(mu, r).powi(2),
                0.0,
                tau,
                1e-18,
                1e-14,
                2000,
            );
            let v = integrated_square(mu, tau);
            assert!((v - q).abs() <= 1e-12 * q, "mu {mu}: {v} vs {q}");
        }
        assert!((integrated_square(0.0, 2.0) - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_decay_is_exactly_one() {
        let m = SpectralModel::neumann_interval(200)
            .unwrap()
            .without_couplings();
        let fit = estimate_resolvent_decay(&m, 1e2, 1e6, 12).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.pstar_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_grid_is_validated() {
        let m = SpectralModel::neumann_interval(200).unwrap();
        assert!(estimate_resolvent_decay(&m, 1e2, 1e4, 12).is_err());
        assert!(estimate_resolvent_decay(&m, 1e2, 1e6, 5).is_err());
        assert!(estimate_resolvent_decay(&m, 0.0, 1e6, 12).is_err());
    }

    #[test]
    fn small_truncation_is_reported() {
        let m = SpectralModel::dirichlet_interval(20).unwrap();
        match estimate_resolvent_decay(&m, 1e2, 1e6, 12) {
            Err(Error::TruncationInsufficient {
                current, required, ..
            }) => {
                assert_eq!(current, 20);
                assert!(required > 20);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dsa_series_one_twelfth() {
        let m = SpectralModel::neumann_interval(20_000).unwrap();
        let r = trace_series_dsa(&m, 1.0, false, true, &SeriesOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Converged);
        assert!((r.partial_sum - 1.0 / 12.0).abs() < 1e-4 / 12.0);
        let t = r.tail_bound.unwrap();
        assert!(r.partial_sum + t >= 1.0 / 12.0 - 1e-15);
    }

    #[test]
    fn dsa_series_is_monotone_in_tau() {
        let m = SpectralModel::neumann_interval(2000).unwrap();
        let opts = SeriesOptions::default();
        let mut prev = 0.0;
        for &tau in &[1e-4, 1e-3, 1e-2, 0.1, 1.0] {
            let s = trace_series_dsa(&m, tau, true, true, &opts)
                .unwrap()
                .partial_sum;
            assert!(s > prev);
            prev = s;
        }
        assert!(trace_series_dsa(&m, 0.0, true, true, &opts).is_err());
    }

    #[test]
    fn square_dsa_series_grows_logarithmically() {
        let m = SpectralModel::neumann_square(50_000).unwrap();
        let r = trace_series_dsa(&m, 1.0, false, true, &SeriesOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Diverged);
        let g = r.fitted_growth.unwrap();
        assert_eq!(g.kind, GrowthKind::Logarithmic);
        // lattice count: mu_k ~ 4 pi k, so S ~ log K / (8 pi)
        assert!((g.exponent - 1.0 / (8.0 * PI)).abs() < 0.1 / (8.0 * PI));
    }

    #[test]
    fn dirichlet_physical_dsa_series_grows_linearly() {
        let m = SpectralModel::dirichlet_interval(10_000).unwrap();
        let r = trace_series_dsa(&m, 1.0, false, false, &SeriesOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Diverged);
        let g = r.fitted_growth.unwrap();
        assert_eq!(g.kind, GrowthKind::Power);
        assert!((g.exponent - 1.0).abs() < 0.05);
    }

    #[test]
    fn sa_series_single_zero_mode() {
        let m = SpectralModel::custom(vec![0.0], vec![vec![1.0]], 2.0, 1, None).unwrap();
        let r = trace_series_sa(&m, 2.0, true, &SeriesOptions::default()).unwrap();
        assert!((r.partial_sum - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lp_zero_coupling_always_converges() {
        let m = SpectralModel::dirichlet_interval(100)
            .unwrap()
            .without_couplings();
        let r = lp_norm_integral(&m, 7.0, 1.0, 1e-7, &LpOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Converged);
        let mu0 = PI * PI;
        let exact = (1.0 - (-7.0 * mu0).exp()) / (7.0 * mu0);
        assert!((r.integral() - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn growth_without_couplings() {
        let m = SpectralModel::neumann_interval(64)
            .unwrap()
            .without_couplings();
        let g = estimate_growth(&m, 0.4, 1.0).unwrap();
        assert!((g.m_beta - 1.0).abs() < 1e-12);
        assert_eq!(g.omega, 0.0);
        assert!(estimate_growth(&m, 1.0, 1.0).is_err());
    }
}
