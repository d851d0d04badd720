//! Stochastic solutions: the truncated-noise approximation `X_N`, exact
//! sampling of the limit solution `X`, the analytic law of `X(t)`, Monte Carlo
//! moments and the `X_N -> X` convergence study.
//!
//! Mode `k` of the solution is an Ornstein-Uhlenbeck process
//! `dX_k = -mu_k X_k dt + sum_c b_{c,k} dW_c` driven by independent channel
//! Brownian motions. `X_N` replaces `dW_c` by `W_N'(t) dt` on channel `c`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::noise::{draw_noise, wn_eval, NoiseBasis, NoiseDraw};
use crate::path::{Provenance, SamplePath, TimeGrid};
use crate::rng::{domain, CounterRng};
use crate::semigroup::integrated_exponential;
use crate::spectral_model::{CoordVector, SpectralModel};
use crate::stats::{fit_line, Moments};

/// Replicas per reduction chunk. Fixed, so the merge order never depends on
/// the number of worker threads.
const CHUNK: usize = 64;

fn require_initial(model: &SpectralModel, xi: &CoordVector) -> Result<()> {
    model.check_vector(xi)?;
    if xi.is_interior() {
        Ok(())
    } else {
        Err(Error::Domain(
            "initial value must have zero boundary part".into(),
        ))
    }
}

/// `b_{c,k} I_{k,j}(t_i)` with `I_{k,j}(t) = int_0^t e^{-mu_k (t - s)} phi_j(s) ds`,
/// stored `[channel][time][j][k]` so the mode loop is contiguous.
#[derive(Debug, Clone)]
pub struct ConvolutionTable {
    times: usize,
    modes: usize,
    size: usize,
    raw: Vec<f64>,
    coupled: Vec<f64>,
}

impl ConvolutionTable {
    pub fn new(model: &SpectralModel, basis: &NoiseBasis, grid: &TimeGrid) -> Result<Self> {
        if grid.tau() > basis.tau {
            return Err(Error::Configuration(format!(
                "time grid ends at {} beyond the noise horizon {}",
                grid.tau(),
                basis.tau
            )));
        }
        let (k, n) = (model.modes(), basis.size);
        let mu = model.eigenvalues();
        let raw: Vec<f64> = grid
            .times()
            .par_iter()
            .flat_map_iter(|&t| {
                (1..=n).flat_map(move |j| {
                    mu.iter()
                        .map(move |&m| basis.exp_convolution_unchecked(j, m, t))
                })
            })
            .collect();
        let mut coupled = Vec::with_capacity(raw.len() * model.channel_count());
        for b in model.couplings() {
            for col in raw.chunks_exact(k) {
                coupled.extend(col.iter().zip(b).map(|(i, bk)| i * bk));
            }
        }
        Ok(Self {
            times: grid.len(),
            modes: k,
            size: n,
            raw,
            coupled,
        })
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        (i * self.size + (j - 1)) * self.modes
    }

    /// `I_{., j}(t_i)` over modes; `j` is 1-based.
    pub fn column(&self, i: usize, j: usize) -> &[f64] {
        let s = self.offset(i, j);
        &self.raw[s..s + self.modes]
    }

    /// `b_{c, .} I_{., j}(t_i)`.
    pub fn coupled_column(&self, c: usize, i: usize, j: usize) -> &[f64] {
        let s = c * self.times * self.size * self.modes + self.offset(i, j);
        &self.coupled[s..s + self.modes]
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

fn check_draw(model: &SpectralModel, draw: &NoiseDraw) -> Result<()> {
    if draw.channels != model.channel_count() {
        return Err(Error::Configuration(format!(
            "noise has {} channels, model has {}",
            draw.channels,
            model.channel_count()
        )));
    }
    Ok(())
}

/// Stochastic part `sum_c sum_j eta_{c,j} b_{c,k} I_{k,j}(t_i)` plus the free
/// evolution of `xi`; `gain` scales the stochastic part per mode.
fn xn_modes(
    model: &SpectralModel,
    draw: &NoiseDraw,
    grid: &TimeGrid,
    xi: &CoordVector,
    table: &ConvolutionTable,
    gain: impl Fn(usize) -> f64,
) -> Vec<Vec<f64>> {
    let mu = model.eigenvalues();
    grid.times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut x = vec![0.0; model.modes()];
            for (c, eta) in draw.coefficients.iter().enumerate() {
                for (j, &e) in eta.iter().enumerate() {
                    for (xk, &v) in x.iter_mut().zip(table.coupled_column(c, i, j + 1)) {
                        *xk += e * v;
                    }
                }
            }
            for (k, xk) in x.iter_mut().enumerate() {
                *xk = (-mu[k] * t).exp() * xi.modes[k] + gain(k) * *xk;
            }
            x
        })
        .collect()
}

/// `X_N(t_i)` with the `lambda -> infinity` limit taken in coordinates:
/// `X_{N,k}(t) = e^{-mu_k t} xi_k + sum_c b_{c,k} sum_j eta_{c,j} I_{k,j}(t)`.
pub fn simulate_xn(
    model: &SpectralModel,
    draw: &NoiseDraw,
    grid: &TimeGrid,
    xi: &CoordVector,
) -> Result<SamplePath> {
    require_initial(model, xi)?;
    check_draw(model, draw)?;
    let table = ConvolutionTable::new(model, &draw.basis, grid)?;
    Ok(SamplePath {
        grid: grid.clone(),
        modes: xn_modes(model, draw, grid, xi, &table, |_| 1.0),
        provenance: Provenance::TruncatedN(draw.basis.size),
        seed: Some(draw.seed),
    })
}

/// `X_N` before the limit: the stochastic part is multiplied by
/// `lambda / (lambda + mu_k)`, the coordinate form of `lambda R(lambda, A)`.
pub fn simulate_xn_at_lambda(
    model: &SpectralModel,
    draw: &NoiseDraw,
    grid: &TimeGrid,
    xi: &CoordVector,
    lambda: f64,
) -> Result<SamplePath> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::OutOfResolventSet(lambda));
    }
    require_initial(model, xi)?;
    check_draw(model, draw)?;
    let table = ConvolutionTable::new(model, &draw.basis, grid)?;
    let mu = model.eigenvalues();
    Ok(SamplePath {
        grid: grid.clone(),
        modes: xn_modes(model, draw, grid, xi, &table, |k| lambda / (lambda + mu[k])),
        provenance: Provenance::TruncatedN(draw.basis.size),
        seed: Some(draw.seed),
    })
}

/// Exact transition sampling of the limit solution:
/// `X_k(t + d) = e^{-mu_k d} X_k(t) + sqrt(sum_c b_{c,k}^2 g(2 mu_k, d)) Z`.
/// The normal for mode `k`, step `i` is addressed by `(seed, k, i)`.
pub fn simulate_exact(
    model: &SpectralModel,
    grid: &TimeGrid,
    xi: &CoordVector,
    seed: u64,
) -> Result<SamplePath> {
    require_initial(model, xi)?;
    let times = grid.times();
    let steps = times.len() - 1;
    let mu = model.eigenvalues();
    let weight = model.physical_weights();
    let rng = CounterRng::new(seed);
    let mut modes = vec![vec![0.0; model.modes()]; times.len()];
    modes[0].clone_from(&xi.modes);
    let mut z = vec![0.0; steps];
    for k in 0..model.modes() {
        rng.fill_normals(domain::EXACT_OU | k as u64, 0, &mut z);
        let mut x = xi.modes[k];
        for i in 0..steps {
            let d = times[i + 1] - times[i];
            let sd = (weight[k] * integrated_exponential(2.0 * mu[k], d)).sqrt();
            x = (-mu[k] * d).exp() * x + sd * z[i];
            modes[i + 1][k] = x;
        }
    }
    Ok(SamplePath {
        grid: grid.clone(),
        modes,
        provenance: Provenance::ExactOu,
        seed: Some(seed),
    })
}

/// Per-mode first and second moments at a set of times, analytic or sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub times: Vec<f64>,
    /// `mean[i][k]` at `times[i]`.
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    /// `E ||X(t_i)||^2 = sum_k (mean^2 + var)`.
    pub total_second_moment: Vec<f64>,
    /// Sample count; absent for analytic reports.
    pub samples: Option<usize>,
    /// `4 sqrt(var / M)`.
    pub mean_half_width: Option<Vec<Vec<f64>>>,
    /// `4 var sqrt(2 / (M - 1))`, the 4-sigma width of the chi-squared law.
    pub variance_half_width: Option<Vec<Vec<f64>>>,
    pub kurtosis: Option<Vec<Vec<f64>>>,
}

/// Law of `X(t)`: mean `e^{-mu_k t} xi_k`, variance
/// `sum_c b_{c,k}^2 (1 - e^{-2 mu_k t}) / (2 mu_k)` (`t sum_c b^2` at `mu = 0`).
pub fn covariance_exact(model: &SpectralModel, t: f64, xi: &CoordVector) -> Result<MomentReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidTime(format!("t = {t} must be >= 0")));
    }
    require_initial(model, xi)?;
    let weight = model.physical_weights();
    let (mean, variance): (Vec<f64>, Vec<f64>) = model
        .eigenvalues()
        .iter()
        .zip(&xi.modes)
        .zip(&weight)
        .map(|((&mu, &x), &w)| ((-mu * t).exp() * x, w * integrated_exponential(2.0 * mu, t)))
        .unzip();
    let total = mean.iter().zip(&variance).map(|(m, v)| m * m + v).sum();
    Ok(MomentReport {
        times: vec![t],
        mean: vec![mean],
        variance: vec![variance],
        total_second_moment: vec![total],
        samples: None,
        mean_half_width: None,
        variance_half_width: None,
        kurtosis: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McMode {
    Exact,
    Truncated(NoiseBasis),
}

/// Replica seed `seed + i`.
pub fn replica_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add(i as u64)
}

/// Reduces `f(replica)` (a flat vector of observables) over `m` replicas in
/// fixed-size chunks merged in replica order.
fn reduce_replicas<F>(m: usize, width: usize, f: F) -> Vec<Moments>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let chunks: Vec<Vec<Moments>> = (0..m.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); width];
            for r in c * CHUNK..((c + 1) * CHUNK).min(m) {
                for (a, x) in acc.iter_mut().zip(f(r)) {
                    a.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); width];
    for part in &chunks {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total
}

/// Sample moments of `M` independent paths with seeds `seed + i`. The result
/// does not depend on the number of worker threads.
pub fn mc_estimate(
    model: &SpectralModel,
    grid: &TimeGrid,
    xi: &CoordVector,
    m: usize,
    seed: u64,
    mode: &McMode,
) -> Result<MomentReport> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need M >= 2 samples, got {m}"
        )));
    }
    require_initial(model, xi)?;
    let k = model.modes();
    let width = grid.len() * k;
    let moments = match mode {
        McMode::Exact => reduce_replicas(m, width, |r| {
            simulate_exact(model, grid, xi, replica_seed(seed, r))
                .expect("inputs validated")
                .modes
                .concat()
        }),
        McMode::Truncated(basis) => {
            let table = ConvolutionTable::new(model, basis, grid)?;
            let channels = model.channel_count();
            reduce_replicas(m, width, |r| {
                let draw =
                    draw_noise(basis, channels, replica_seed(seed, r)).expect("channels >= 1");
                xn_modes(model, &draw, grid, xi, &table, |_| 1.0).concat()
            })
        }
    };
    let rows = |f: &dyn Fn(&Moments) -> f64| -> Vec<Vec<f64>> {
        moments
            .chunks(k)
            .map(|row| row.iter().map(f).collect())
            .collect()
    };
    let mean = rows(&|s| s.mean);
    let variance = rows(&|s| s.variance());
    let mf = m as f64;
    let total = mean
        .iter()
        .zip(&variance)
        .map(|(mr, vr)| mr.iter().zip(vr).map(|(a, v)| a * a + v).sum())
        .collect();
    Ok(MomentReport {
        times: grid.times().to_vec(),
        mean_half_width: Some(rows(&|s| 4.0 * (s.variance() / mf).sqrt())),
        variance_half_width: Some(rows(&|s| 4.0 * s.variance() * (2.0 / (mf - 1.0)).sqrt())),
        kurtosis: Some(rows(&|s| s.kurtosis())),
        mean,
        variance,
        total_second_moment: total,
        samples: Some(m),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Coupled Monte Carlo estimate of `sup_t E ||X(t) - X_N(t)||^2`.
    pub eps_mc: f64,
    /// Standard error of `eps_mc` at the maximizing time.
    pub eps_mc_stderr: f64,
    /// Parseval remainder `sup_t sum_k sum_c b_{c,k}^2 sum_{j > N} I_{k,j}(t)^2`.
    pub eps_analytic: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Number of explicitly sampled basis terms; the remainder beyond it is
    /// drawn exactly from its conditional Gaussian law.
    pub n_ref: usize,
    pub samples: usize,
    pub seed: u64,
    /// Fitted slope of `log eps` against `log N`.
    pub decay_order_mc: f64,
    pub decay_order_analytic: f64,
}

impl ConvergenceTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].eps_mc < w[0].eps_mc && w[1].eps_analytic < w[0].eps_analytic)
    }

    pub fn max_relative_gap(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.ratio - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Measures `eps(N) = sup_t E ||X(t) - X_N(t)||^2` for every `N` in `n_list`.
///
/// Each replica draws the coefficients `eta_{c,j}`, `j <= N_ref = 4 max(N)`,
/// once; every `X_N` reuses their prefix. The reference is the exact solution
/// `X = X_{N_ref} + R`, where the remainder `R(t)` (the basis terms beyond
/// `N_ref`) is independent of the drawn coefficients and is sampled from its
/// Gaussian law with per-channel covariance
/// `g(mu_k + mu_l, t) - sum_{j <= N_ref} I_{k,j}(t) I_{l,j}(t)`.
/// `X - X_N` therefore has exactly the law whose second moment the analytic
/// column computes.
pub fn convergence_study(
    model: &SpectralModel,
    grid: &TimeGrid,
    xi: &CoordVector,
    n_list: &[usize],
    m: usize,
    seed: u64,
    basis: &NoiseBasis,
) -> Result<ConvergenceTable> {
    require_initial(model, xi)?;
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Configuration(
            "N list must be nonempty, positive and strictly increasing".into(),
        ));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need M >= 2 samples, got {m}"
        )));
    }
    let n_ref = 4 * n_list[n_list.len() - 1];
    let basis = basis.with_size(n_ref)?;
    let table = ConvolutionTable::new(model, &basis, grid)?;
    let k = model.modes();
    let channels = model.channel_count();
    let mu = model.eigenvalues();
    let weight = model.physical_weights();
    let nt = grid.len();

    // Remainder factors per time.
    let factors: Vec<nalgebra::DMatrix<f64>> = grid
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut c =
                nalgebra::DMatrix::from_fn(k, k, |a, b| integrated_exponential(mu[a] + mu[b], t));
            for j in 1..=n_ref {
                let col = nalgebra::DVector::from_column_slice(table.column(i, j));
                c -= &col * col.transpose();
            }
            psd_factor(&c)
        })
        .collect();

    // Analytic column.
    let eps_analytic: Vec<f64> = n_list
        .iter()
        .map(|&n| {
            (0..nt)
                .map(|i| {
                    let t = grid.times()[i];
                    (0..k)
                        .map(|q| {
                            let head: f64 = (1..=n).map(|j| table.column(i, j)[q].powi(2)).sum();
                            weight[q] * (integrated_exponential(2.0 * mu[q], t) - head)
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    // Coupled Monte Carlo: observables ||X(t_i) - X_N(t_i)||^2 laid out [N][time].
    let width = n_list.len() * nt;
    let moments = reduce_replicas(m, width, |r| {
        let rs = replica_seed(seed, r);
        let draw = draw_noise(&basis, channels, rs).expect("channels >= 1");
        let rng = CounterRng::new(rs);
        let mut out = vec![0.0; width];
        let mut z = vec![0.0; k];
        for i in 0..nt {
            let mut y = vec![0.0; k];
            for c in 0..channels {
                rng.fill_normals(domain::REMAINDER | (i * channels + c) as u64, 0, &mut z);
                let b = &model.couplings()[c];
                let rem = &factors[i] * nalgebra::DVector::from_column_slice(&z);
                for q in 0..k {
                    y[q] += b[q] * rem[q];
                }
            }
            let mut upper = n_ref;
            for (slot, &n) in n_list.iter().enumerate().rev() {
                for j in (n + 1..=upper).rev() {
                    for (c, eta) in draw.coefficients.iter().enumerate() {
                        let e = eta[j - 1];
                        for (yq, &v) in y.iter_mut().zip(table.coupled_column(c, i, j)) {
                            *yq += e * v;
                        }
                    }
                }
                upper = n;
                out[slot * nt + i] = y.iter().map(|v| v * v).sum();
            }
        }
        out
    });

    let mf = m as f64;
    let rows: Vec<ConvergenceRow> = n_list
        .iter()
        .enumerate()
        .map(|(slot, &n)| {
            let per_time = &moments[slot * nt..(slot + 1) * nt];
            let best = per_time
                .iter()
                .max_by(|a, b| a.mean.total_cmp(&b.mean))
                .expect("grid is nonempty");
            ConvergenceRow {
                n,
                eps_mc: best.mean,
                eps_mc_stderr: (best.variance() / mf).sqrt(),
                eps_analytic: eps_analytic[slot],
                ratio: best.mean / eps_analytic[slot],
            }
        })
        .collect();
    let log_n: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let fit_of = |f: &dyn Fn(&ConvergenceRow) -> f64| {
        let y: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        if rows.len() >= 2 {
            fit_line(&log_n, &y).slope
        } else {
            f64::NAN
        }
    };
    let decay_order_mc = fit_of(&|r| r.eps_mc);
    let decay_order_analytic = fit_of(&|r| r.eps_analytic);
    Ok(ConvergenceTable {
        rows,
        n_ref,
        samples: m,
        seed,
        decay_order_mc,
        decay_order_analytic,
    })
}

/// Max-norm residual of the integrated-solution identity for a truncated-noise
/// path: `X_k(t) - xi_k + mu_k int_0^t X_k - sum_c b_{c,k} W_{N,c}(t)`, with the
/// time integral taken by the cumulative trapezoid rule.
pub fn definition_residual(
    path: &SamplePath,
    model: &SpectralModel,
    draw: &NoiseDraw,
) -> Result<f64> {
    if !matches!(path.provenance, Provenance::TruncatedN(_)) {
        return Err(Error::Usage(format!(
            "residual needs a truncated-noise path, got {}",
            path.provenance.tag()
        )));
    }
    check_draw(model, draw)?;
    if path.mode_count() != model.modes() {
        return Err(Error::InvalidSize(format!(
            "path has {} modes, model has {}",
            path.mode_count(),
            model.modes()
        )));
    }
    let times = path.grid.times();
    let mu = model.eigenvalues();
    let xi = &path.modes[0];
    let mut integral = vec![0.0; model.modes()];
    let mut worst: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let dt = t - times[i - 1];
            for (q, acc) in integral.iter_mut().enumerate() {
                *acc += 0.5 * dt * (path.modes[i - 1][q] + path.modes[i][q]);
            }
        }
        let w: Vec<f64> = (0..draw.channels)
            .map(|c| wn_eval(draw, c, t))
            .collect::<Result<_>>()?;
        for q in 0..model.modes() {
            let forcing: f64 = (0..draw.channels)
                .map(|c| model.coupling(c, q) * w[c])
                .sum();
            let r = path.modes[i][q] - xi[q] + mu[q] * integral[q] - forcing;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::BasisKind;
    use crate::quad::adaptive;

    fn neumann(k: usize) -> SpectralModel {
        SpectralModel::neumann_interval(k).unwrap()
    }

    #[test]
    fn zero_noise_gives_the_free_orbit() {
        let m = neumann(5);
        let basis = NoiseBasis::new(BasisKind::Trigonometric, 1.0, 8).unwrap();
        let mut draw = draw_noise(&basis, 2, 1).unwrap();
        draw.coefficients
            .iter_mut()
            .flatten()
            .for_each(|e| *e = 0.0);
        let grid = TimeGrid::uniform(1.0, 11).unwrap();
        let xi = CoordVector::interior(vec![1.0, 2.0, 0.0, -1.0, 0.5]);
        let p = simulate_xn(&m, &draw, &grid, &xi).unwrap();
        for (i, &t) in grid.times().iter().enumerate() {
            for q in 0..5 {
                let expect = (-m.eigenvalues()[q] * t).exp() * xi.modes[q];
                assert!((p.modes[i][q] - expect).abs() < 1e-15);
            }
        }
        assert_eq!(p.provenance, Provenance::TruncatedN(8));
    }

    #[test]
    fn single_zero_mode_with_constant_haar_term() {
        let m = SpectralModel::custom(vec![0.0], vec![vec![1.5]], 2.0, 1, None).unwrap();
        let basis = NoiseBasis::new(BasisKind::Haar, 2.0, 1).unwrap();
        let draw = draw_noise(&basis, 1, 5).unwrap();
        let eta = draw.coefficients[0][0];
        let grid = TimeGrid::uniform(2.0, 9).unwrap();
        let xi = CoordVector::interior(vec![0.25]);
        let p = simulate_xn(&m, &draw, &grid, &xi).unwrap();
        for (i, &t) in grid.times().iter().enumerate() {
            let expect = 0.25 + 1.5 * eta * t / 2f64.sqrt();
            assert!((p.modes[i][0] - expect).abs() < 1e-14);
        }
        assert!(definition_residual(&p, &m, &draw).unwrap() < 1e-14);
    }

    #[test]
    fn xn_matches_quadrature_of_the_noise_integral() {
        let m = neumann(4);
        let basis = NoiseBasis::new(BasisKind::Trigonometric, 1.0, 6).unwrap();
        let draw = draw_noise(&basis, 2, 77).unwrap();
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let p = simulate_xn(&m, &draw, &grid, &CoordVector::zeros(4)).unwrap();
        let wdot = |c: usize, s: f64| -> f64 {
            (1..=6)
                .map(|j| draw.coefficients[c][j - 1] * basis.phi(j, s).unwrap())
                .sum()
        };
        for (i, &t) in grid.times().iter().enumerate().skip(1) {
            for q in 0..4 {
                let mu = m.eigenvalues()[q];
                let f = |s: f64| {
                    (-mu * (t - s)).exp()
                        * (0..2).map(|c| m.coupling(c, q) * wdot(c, s)).sum::<f64>()
                };
                let (v, _) = adaptive(f, 0.0, t, 1e-14, 1e-12, 2000);
                assert!(
                    (v - p.modes[i][q]).abs() < 1e-8 * v.abs().max(1.0),
                    "t {t} mode {q}"
                );
            }
        }
    }

    #[test]
    fn finite_lambda_approaches_the_limit() {
        let m = neumann(6);
        let basis = NoiseBasis::new(BasisKind::Trigonometric, 1.0, 8).unwrap();
        let draw = draw_noise(&basis, 2, 3).unwrap();
        let grid = TimeGrid::uniform(1.0, 5).unwrap();
        let xi = CoordVector::zeros(6);
        let limit = simulate_xn(&m, &draw, &grid, &xi).unwrap();
        let mut prev = f64::INFINITY;
        for lambda in [1e2, 1e4, 1e6] {
            let p = simulate_xn_at_lambda(&m, &draw, &grid, &xi, lambda).unwrap();
            let gap = p
                .modes
                .iter()
                .flatten()
                .zip(limit.modes.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn channel_mismatch_is_a_configuration_error() {
        let m = neumann(4);
        let basis = NoiseBasis::new(BasisKind::Haar, 1.0, 4).unwrap();
        let draw = draw_noise(&basis, 1, 0).unwrap();
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        assert!(matches!(
            simulate_xn(&m, &draw, &grid, &CoordVector::zeros(4)),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn exact_sampling_without_couplings_is_deterministic() {
        let m = neumann(4).without_couplings();
        let grid = TimeGrid::uniform(1.0, 6).unwrap();
        let xi = CoordVector::interior(vec![1.0; 4]);
        let a = simulate_exact(&m, &grid, &xi, 1).unwrap();
        let b = simulate_exact(&m, &grid, &xi, 2).unwrap();
        assert_eq!(a.modes, b.modes);
        assert_eq!(a.modes[0], xi.modes);
    }

    #[test]
    fn covariance_limits() {
        let m = neumann(4);
        let xi = CoordVector::interior(vec![1.0, 2.0, 3.0, 4.0]);
        let r0 = covariance_exact(&m, 0.0, &xi).unwrap();
        assert!(r0.variance[0].iter().all(|&v| v == 0.0));
        assert_eq!(r0.mean[0], xi.modes);
        let r = covariance_exact(&m, 50.0, &xi).unwrap();
        for q in 1..4 {
            let mu = m.eigenvalues()[q];
            assert!((r.variance[0][q] - 4.0 / (2.0 * mu)).abs() < 1e-15);
        }
        assert!((r.variance[0][0] - 2.0 * 50.0).abs() < 1e-12);
        assert!(covariance_exact(&m, -1.0, &xi).is_err());
    }

    #[test]
    fn two_steps_compose_to_one() {
        // var(2d) = e^{-2 mu d} var(d) + var(d)
        let m = neumann(8);
        let xi = CoordVector::zeros(8);
        let d = 0.3;
        let one = covariance_exact(&m, d, &xi).unwrap().variance[0].clone();
        let two = covariance_exact(&m, 2.0 * d, &xi).unwrap().variance[0].clone();
        for q in 0..8 {
            let mu = m.eigenvalues()[q];
            let composed = (-2.0 * mu * d).exp() * one[q] + one[q];
            assert!((composed - two[q]).abs() <= 1e-14 * two[q]);
        }
    }

    #[test]
    fn residual_rejects_exact_paths() {
        let m = neumann(3);
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let p = simulate_exact(&m, &grid, &CoordVector::zeros(3), 0).unwrap();
        let basis = NoiseBasis::new(BasisKind::Haar, 1.0, 4).unwrap();
        let draw = draw_noise(&basis, 2, 0).unwrap();
        assert!(matches!(
            definition_residual(&p, &m, &draw),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn convergence_study_validates_the_n_list() {
        let m = neumann(3);
        let grid = TimeGrid::uniform(1.0, 3).unwrap();
        let basis = NoiseBasis::new(BasisKind::Trigonometric, 1.0, 1).unwrap();
        let xi = CoordVector::zeros(3);
        for bad in [vec![], vec![8, 8], vec![16, 8], vec![0, 4]] {
            assert!(matches!(
                convergence_study(&m, &grid, &xi, &bad, 10, 0, &basis),
                Err(Error::Configuration(_))
            ));
        }
    }
}
