use bwn_core::noise::{draw_noise, wn_eval, BasisKind, NoiseBasis};

/// Sample mean and unbiased variance, two-pass.
fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (
        m,
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0),
    )
}

#[test]
fn first_coefficient_is_standard_normal_across_seeds() {
    let basis = NoiseBasis::new(BasisKind::Trigonometric, 1.0, 2).unwrap();
    let mut first = Vec::new();
    let mut cross = 0.0;
    let n = 100_000u64;
    for seed in 0..n {
        let d = draw_noise(&basis, 2, seed).unwrap();
        let (a, b) = (d.coefficients[0][0], d.coefficients[1][1]);
        first.push(a);
        cross += a * b;
    }
    let (mean, v) = mean_var(&first);
    assert!(mean.abs() <= 0.02, "mean {mean}");
    assert!((0.98..=1.02).contains(&v), "variance {v}");
    // independent entries: correlation within 4 / sqrt(n)
    let corr = cross / n as f64;
    assert!(corr.abs() <= 4.0 / (n as f64).sqrt(), "correlation {corr}");
}

fn primitive_variance(kind: BasisKind) -> f64 {
    let tau = 2.0;
    let basis = NoiseBasis::new(kind, tau, 256).unwrap();
    let mut w = Vec::new();
    for seed in 0..10_000u64 {
        let d = draw_noise(&basis, 1, 7_000_000 + seed).unwrap();
        w.push(wn_eval(&d, 0, 0.5 * tau).unwrap());
    }
    mean_var(&w).1 / (0.5 * tau)
}

#[test]
fn truncated_noise_variance_matches_time() {
    for kind in [BasisKind::Trigonometric, BasisKind::Haar] {
        let r = primitive_variance(kind);
        assert!((0.95..=1.05).contains(&r), "{kind:?}: Var W_N(t) / t = {r}");
    }
}

#[test]
fn primitives_vanish_at_zero_and_full_periods() {
    let b = NoiseBasis::new(BasisKind::Trigonometric, 3.0, 8).unwrap();
    let h = NoiseBasis::new(BasisKind::Haar, 3.0, 8).unwrap();
    for j in 1..=8 {
        assert_eq!(b.primitive(j, 0.0).unwrap(), 0.0);
        assert_eq!(h.primitive(j, 0.0).unwrap(), 0.0);
    }
    assert!(b.primitive(2, 3.0).unwrap().abs() < 1e-15);
    assert!((h.primitive(1, 1.2).unwrap() - 1.2 / 3f64.sqrt()).abs() < 1e-15);
    let d = draw_noise(&b, 2, 5).unwrap();
    assert_eq!(wn_eval(&d, 1, 0.0).unwrap(), 0.0);
}

#[test]
fn out_of_range_requests_are_errors() {
    let b = NoiseBasis::new(BasisKind::Haar, 1.0, 4).unwrap();
    assert!(b.primitive(0, 0.5).is_err());
    assert!(b.primitive(5, 0.5).is_err());
    assert!(b.primitive(1, 1.5).is_err());
    let d = draw_noise(&b, 1, 0).unwrap();
    assert!(wn_eval(&d, 1, 0.5).is_err());
    assert!(NoiseBasis::new(BasisKind::Haar, 1.0, 0).is_err());
}
