use std::fs;
use std::path::Path;
use std::process::Command;

use bwn_core::cli::RunConfig;
use bwn_core::noise::BasisKind;
use bwn_core::semigroup::ForcingKind;
use proptest::prelude::*;

fn bwn(args: &[&str], dir: &Path) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_bwn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("bwn runs");
    out.status.code().expect("exit code")
}

fn with_config(body: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), body).unwrap();
    dir
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn malformed_or_missing_config_exits_64() {
    let dir = with_config("modes = [oops");
    assert_eq!(
        bwn(
            &["check", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        64
    );
    assert_eq!(
        bwn(
            &["check", "--config", "absent.toml", "--output", "o"],
            dir.path()
        ),
        64
    );
    let dir = with_config("beta = 1.5");
    assert_eq!(
        bwn(
            &["simulate", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        64
    );
    assert_eq!(bwn(&["frobnicate"], dir.path()), 64);
    assert_eq!(bwn(&["--help"], dir.path()), 0);
}

#[test]
fn check_neumann_interval_exits_0() {
    let dir = with_config("model = \"neumann_interval\"\n");
    assert_eq!(
        bwn(
            &["check", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        0
    );
    let r = json(&dir.path().join("o/check_report.json"));
    let p = r["resolvent_decay"]["ok"]["pstar_estimate"]
        .as_f64()
        .unwrap();
    assert!((p - 4.0 / 3.0).abs() < 0.05, "{p}");
    assert_eq!(r["trace_series_dsa"]["verdict"], "converged");
}

#[test]
fn check_neumann_square_exits_2() {
    let dir = with_config("model = \"neumann_square\"\n");
    assert_eq!(
        bwn(
            &["check", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        2
    );
    let r = json(&dir.path().join("o/check_report.json"));
    assert_eq!(r["trace_series_dsa"]["verdict"], "diverged");
    assert_eq!(
        r["trace_series_dsa"]["fitted_growth"]["kind"],
        "logarithmic"
    );
}

#[test]
fn check_with_too_few_terms_is_inconclusive() {
    // 300 terms: the Neumann trace tail ~ 1/(2 pi^2 K) is far above 1e-4
    let dir = with_config("[check]\nmodes = 300\nlambda_max = 1e4\n");
    assert_eq!(
        bwn(
            &["check", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        3
    );
}

#[test]
fn solve_reads_a_forcing_file() {
    let dir = with_config("modes = 3\nxi = [1.0]\n");
    let mut csv = String::from("t,w_0,w_1,mode_1\n");
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        csv.push_str(&format!("{t},{},0,{}\n", t.sin(), 1.0 - t));
    }
    fs::write(dir.path().join("f.csv"), csv).unwrap();
    assert_eq!(
        bwn(
            &[
                "solve",
                "--config",
                "run.toml",
                "--output",
                "o",
                "--forcing",
                "f.csv"
            ],
            dir.path()
        ),
        0
    );
    let text = fs::read_to_string(dir.path().join("o/solve_path.csv")).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with("t,mode_0,mode_1,mode_2\n"));
    let r = json(&dir.path().join("o/solve_report.json"));
    assert!(r["integrated_residual"].as_f64().unwrap() < 1e-2);
    assert!(dir.path().join("o/solve_path.json").exists());
    assert_eq!(
        bwn(
            &[
                "solve",
                "--config",
                "run.toml",
                "--output",
                "o",
                "--forcing",
                "nope.csv"
            ],
            dir.path()
        ),
        64
    );
}

#[test]
fn converge_and_covariance_exit_codes() {
    let cfg = "modes = 16\ngrid_points = 6\nsamples = 2000\n[converge]\nn_list = [4, 8, 16]\nrel_tol = 0.25\n";
    let dir = with_config(cfg);
    assert_eq!(
        bwn(
            &["converge", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        0
    );
    let csv = fs::read_to_string(dir.path().join("o/convergence.csv")).unwrap();
    assert!(csv.starts_with("N,eps_mc,eps_analytic,ratio\n"));
    let strict = cfg.replace("rel_tol = 0.25", "rel_tol = 1e-12");
    let dir = with_config(&strict);
    assert_eq!(
        bwn(
            &["converge", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        1
    );
    let dir = with_config("modes = 16\nsamples = 4000\n");
    assert_eq!(
        bwn(
            &["covariance", "--config", "run.toml", "--output", "o"],
            dir.path()
        ),
        0
    );
    assert_eq!(json(&dir.path().join("o/covariance.json"))["pass"], true);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = with_config("modes = 4\ngrid_points = 5\nsamples = 10\nseed = 1\n");
    assert_eq!(
        bwn(
            &["simulate", "--config", "run.toml", "--output", "a"],
            dir.path()
        ),
        0
    );
    assert_eq!(
        bwn(
            &["simulate", "--config", "run.toml", "--output", "b", "--seed", "1"],
            dir.path()
        ),
        0
    );
    assert_eq!(
        bwn(
            &["simulate", "--config", "run.toml", "--output", "c", "--seed", "2"],
            dir.path()
        ),
        0
    );
    let read = |d: &str| fs::read(dir.path().join(d).join("exact_path.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

prop_compose! {
    fn configs()(
        model in prop::sample::select(vec!["neumann_interval", "dirichlet_interval", "neumann_square"]),
        modes in 2usize..5000,
        tau in finite(1e-3, 1e3),
        grid_points in 2usize..500,
        haar in any::<bool>(),
        noise_terms in 1usize..4096,
        channels in prop::option::of(1usize..4),
        samples in 2usize..100_000,
        seed in any::<u64>(),
        beta in finite(1e-3, 0.999),
        linear in any::<bool>(),
        xi in prop::collection::vec(finite(-1e6, 1e6), 0..2),
        cov in prop::option::of(finite(0.01, 1.0)),
        rel_tol in finite(1e-9, 1.0),
        p_values in prop::collection::vec(finite(1.0, 10.0), 0..5),
        n_list in prop::collection::vec(1usize..1000, 1..6),
    ) -> RunConfig {
        RunConfig {
            model: model.to_string(),
            modes,
            tau,
            grid_points,
            basis: if haar { BasisKind::Haar } else { BasisKind::Trigonometric },
            noise_terms,
            channels,
            samples,
            seed,
            beta,
            output_dir: format!("out/{seed}").into(),
            forcing_kind: if linear { ForcingKind::PiecewiseLinear } else { ForcingKind::PiecewiseConstant },
            xi,
            covariance_time: cov.map(|c| c * tau),
            tolerances: bwn_core::cli::Tolerances { series_rel_tol: rel_tol, fit_r2_min: 0.99 },
            check: bwn_core::cli::CheckConfig { p_values, ..Default::default() },
            converge: bwn_core::cli::ConvergeConfig { n_list, rel_tol },
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn config_round_trips_through_toml(cfg in configs()) {
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
