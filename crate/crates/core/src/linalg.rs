//! Extreme eigenvalues of diagonal-plus-low-rank symmetric matrices.
//!
//! Every operator norm in this crate is the norm of a coordinate matrix of the
//! form `[diag(d) | u_1 ... u_c]`, whose Gram matrix `diag(d^2) + sum_c u_c u_c^T`
//! is diagonal plus rank `c`. Its top eigenvalue `sigma` is either `max d^2` or
//! the largest root of the secular equation `lambda_max(G(sigma)) = 1` with the
//! `c x c` matrix `G(sigma) = U^T (sigma - diag(d^2))^{-1} U`, which is
//! decreasing in `sigma`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 400;

/// Largest eigenvalue of `diag(d2) + sum_c u_c u_c^T`.
///
/// `d2` must be nonnegative and every `u_c` has the length of `d2`.
pub fn top_eigenvalue_diag_plus_low_rank(d2: &[f64], u: &[Vec<f64>]) -> Result<f64> {
    let n = d2.len();
    if n == 0 {
        return Err(Error::InvalidSize("empty diagonal".into()));
    }
    if u.iter().any(|col| col.len() != n) {
        return Err(Error::InvalidSize("low-rank factor length mismatch".into()));
    }
    let dmax = d2.iter().cloned().fold(0.0_f64, f64::max);
    let cols: Vec<&Vec<f64>> = u
        .iter()
        .filter(|col| col.iter().any(|&x| x != 0.0))
        .collect();
    if cols.is_empty() {
        return Ok(dmax);
    }
    let c = cols.len();

    // Rayleigh quotients on each column give a lower bound above dmax when the
    // coupling is strong.
    let mut lo = dmax;
    let mut frob = 0.0;
    for col in &cols {
        let nrm2: f64 = col.iter().map(|x| x * x).sum();
        frob += nrm2;
        let mut num = 0.0;
        for (k, &x) in col.iter().enumerate() {
            num += d2[k] * x * x;
        }
        for other in &cols {
            let dot: f64 = col.iter().zip(other.iter()).map(|(a, b)| a * b).sum();
            num += dot * dot;
        }
        lo = lo.max(num / nrm2);
    }
    let mut hi = dmax + frob;

    let eval = |sigma: f64| -> (f64, f64) { secular(d2, &cols, c, sigma) };

    if lo <= dmax {
        // Root may sit arbitrarily close to dmax or not exist at all.
        let probe = dmax + dmax.max(f64::MIN_POSITIVE) * 1e-15;
        let (f_probe, _) = eval(probe);
        if !f_probe.is_finite() || f_probe > 0.0 {
            lo = probe;
        } else {
            return Ok(dmax);
        }
    }

    let (f_hi, _) = eval(hi);
    if f_hi > 0.0 {
        return Err(Error::NumericalFailure(format!(
            "secular bracket failed: f(hi) = {f_hi:e} > 0"
        )));
    }
    let mut x = lo;
    let (mut fx, mut dfx) = eval(x);
    if fx == 0.0 {
        return Ok(x);
    }
    for _ in 0..MAX_ITERATIONS {
        // Newton step, falling back to bisection when it leaves the bracket.
        let mut next = if fx.is_finite() && dfx.is_finite() && dfx < 0.0 {
            x - fx / dfx
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let (fn_, dfn) = eval(next);
        if fn_ > 0.0 {
            lo = next;
        } else {
            hi = next;
        }
        let step = (next - x).abs();
        x = next;
        fx = fn_;
        dfx = dfn;
        if fx == 0.0 || hi - lo <= 4.0 * f64::EPSILON * hi || step <= 2.0 * f64::EPSILON * x {
            return Ok(x);
        }
    }
    Err(Error::NumericalFailure(format!(
        "secular iteration did not converge in {MAX_ITERATIONS} steps (bracket [{lo:e}, {hi:e}])"
    )))
}

/// `lambda_max(G(sigma)) - 1` and its derivative in `sigma`.
fn secular(d2: &[f64], cols: &[&Vec<f64>], c: usize, sigma: f64) -> (f64, f64) {
    let mut g = vec![0.0; c * c];
    let mut dg = vec![0.0; c * c];
    for k in 0..d2.len() {
        let inv = 1.0 / (sigma - d2[k]);
        let inv2 = inv * inv;
        for a in 0..c {
            let ua = cols[a][k];
            if ua == 0.0 {
                continue;
            }
            for b in a..c {
                let p = ua * cols[b][k];
                g[a * c + b] += p * inv;
                dg[a * c + b] += p * inv2;
            }
        }
    }
    for a in 0..c {
        for b in 0..a {
            g[a * c + b] = g[b * c + a];
            dg[a * c + b] = dg[b * c + a];
        }
    }
    let (lam, v) = symmetric_top_eigenpair(&g, c);
    // d lambda / d sigma = -v^T (sum u u^T / (sigma - d)^2) v
    let mut deriv = 0.0;
    for a in 0..c {
        for b in 0..c {
            deriv -= v[a] * dg[a * c + b] * v[b];
        }
    }
    (lam - 1.0, deriv)
}

/// Largest eigenvalue and a unit eigenvector of a small symmetric matrix
/// stored row-major.
pub fn symmetric_top_eigenpair(m: &[f64], c: usize) -> (f64, Vec<f64>) {
    match c {
        1 => (m[0], vec![1.0]),
        2 => {
            let (a, b, d) = (m[0], m[1], m[3]);
            let half_tr = 0.5 * (a + d);
            let half_diff = 0.5 * (a - d);
            let r = half_diff.hypot(b);
            let lam = half_tr + r;
            // eigenvector of [[a, b], [b, d]] for lam, picked for stability
            let v = if half_diff >= 0.0 {
                [half_diff + r, b]
            } else {
                [b, r - half_diff]
            };
            let n = v[0].hypot(v[1]);
            if n == 0.0 {
                (lam, vec![1.0, 0.0])
            } else {
                (lam, vec![v[0] / n, v[1] / n])
            }
        }
        _ => {
            let mat = DMatrix::from_row_slice(c, c, m);
            let eig = mat.symmetric_eigen();
            let (idx, lam) = eig
                .eigenvalues
                .iter()
                .cloned()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty");
            (lam, eig.eigenvectors.column(idx).iter().cloned().collect())
        }
    }
}

/// Operator norm of the matrix `[diag(d) | cols]`.
pub fn norm_diag_with_columns(d: &[f64], cols: &[Vec<f64>]) -> Result<f64> {
    let d2: Vec<f64> = d.iter().map(|x| x * x).collect();
    top_eigenvalue_diag_plus_low_rank(&d2, cols).map(f64::sqrt)
}

/// Symmetric positive semidefinite square root factor `L` with `L L^T = C`,
/// negative eigenvalues from round-off clipped to zero.
pub fn psd_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = c.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}
