//! End-to-end checks of the command-line surface: argument grammar,
//! schema-stable reports, and the integrate → fit round trip.

use planetary::cli;

fn run_capture(args: &[&str], out: &std::path::Path) -> i32 {
    let mut argv = vec!["planet"];
    argv.extend_from_slice(args);
    argv.push("--out");
    let out_str = out.to_str().unwrap();
    argv.push(out_str);
    cli::run(argv)
}

#[test]
fn laplace_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(run_capture(&["laplace", "--s", "2.5", "--k", "1", "--alpha", "0.1"], &a), 0);
    assert_eq!(run_capture(&["laplace", "--s", "2.5", "--k", "1", "--alpha", "0.1"], &b), 0);
    let ta = std::fs::read(&a).unwrap();
    let tb = std::fs::read(&b).unwrap();
    assert_eq!(ta, tb, "identical invocations must be byte-identical");
    let v: serde_json::Value = serde_json::from_slice(&ta).unwrap();
    let value = v["value"].as_f64().unwrap();
    assert!((value - 0.25 * (0.1 / 0.1)).abs() < 0.02, "b_5/2,1(0.1) ≈ 0.25(1+O(α²)), got {value}");
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(cli::run(["planet", "laplace", "--nonsense", "1"]), 2);
    assert_eq!(cli::run(["planet", "frobnicate"]), 2);
}

#[test]
fn domain_error_exits_one() {
    // alpha on the unit circle is a named module error, not a stack trace
    assert_eq!(cli::run(["planet", "laplace", "--s", "2.5", "--k", "0", "--alpha", "1.0"]), 1);
}

#[test]
fn dpmap_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fwd = dir.path().join("fwd.json");
    assert_eq!(
        run_capture(
            &["dpmap", "--direction", "forward", "--state", "[1.3,0.7,0.05,-0.02]"],
            &fwd
        ),
        0
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fwd).unwrap()).unwrap();
    let state = format!(
        "[{},{},{},{}]",
        v["y"][0], v["y"][1], v["x"][0], v["x"][1]
    );
    let inv = dir.path().join("inv.json");
    assert_eq!(run_capture(&["dpmap", "--direction", "inverse", "--state", &state], &inv), 0);
    let w: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&inv).unwrap()).unwrap();
    assert!((w["Lambda"].as_f64().unwrap() - 1.3).abs() < 1e-9);
    assert!((w["eta"].as_f64().unwrap() - 0.05).abs() < 1e-9);
}

#[test]
fn invariants_herman_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sys3.json");
    std::fs::write(
        &cfg,
        r#"{"m0_bar": 1.0, "m_bar": [1.0, 1.0, 1.0], "mu": 1e-4, "axes": [1.0, 3.0, 9.0]}"#,
    )
    .unwrap();
    let out = dir.path().join("inv.json");
    assert_eq!(
        run_capture(
            &["invariants", "--config", cfg.to_str().unwrap(), "--check", "herman"],
            &out
        ),
        0
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["herman_residual"].as_f64().unwrap() <= 1e-11);
    assert_eq!(v["torsion"]["label"], "birkhoff-invariants");
}

#[test]
fn key_value_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sys.conf");
    std::fs::write(
        &cfg,
        "# two planets\nm0_bar = 1.0\nm_bar = 1.0, 1.0\nmu = 1e-5\naxes = 1.0, 5.0\n",
    )
    .unwrap();
    let out = dir.path().join("sec.json");
    assert_eq!(run_capture(&["secular", "--config", cfg.to_str().unwrap()], &out), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["C0"].as_f64().unwrap() < 0.0);
    assert_eq!(v["F_h"].as_array().unwrap().len(), 2);
}

#[test]
fn integrate_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sys.json");
    // plane two-body setup with small eccentricities
    std::fs::write(
        &cfg,
        r#"{
  "m0_bar": 1.0, "m_bar": [1.0, 1.0], "mu": 1e-4, "axes": [1.0, 5.0],
  "state": {
    "y": [[0.0, 1.0239560770411522e0, 0.0], [0.0, -4.4699929367610676e-1, 0.0]],
    "x": [[9.5238095238095233e-1, 0.0, 0.0], [-5.0e0, 0.0, 0.0]]
  }
}"#,
    )
    .unwrap();
    let traj = dir.path().join("traj.csv");
    assert_eq!(
        run_capture(
            &[
                "integrate",
                "--config",
                cfg.to_str().unwrap(),
                "--t-end",
                "600",
                "--dt",
                "0.02",
                "--stride",
                "20",
            ],
            &traj
        ),
        0
    );
    let out = dir.path().join("fit.json");
    assert_eq!(
        run_capture(
            &[
                "fit",
                "--input",
                traj.to_str().unwrap(),
                "--config",
                cfg.to_str().unwrap(),
                "--body",
                "0",
            ],
            &out
        ),
        0
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["rate"].as_f64().unwrap().is_finite());
    assert!(v["stderr"].as_f64().unwrap() >= 0.0);
}

#[test]
fn kamcheck_constants_and_seeded_mc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("kam.json");
    std::fs::write(
        &cfg,
        r#"{"n_bar": 1, "n_hat": 1, "f": 1e-30, "m": 1.0, "m_hat": 1.0, "n": 1.0,
           "rho": 1.0, "s": 6.0, "gamma": 1.0, "gamma_hat": 1.0, "tau": 3.0}"#,
    )
    .unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        assert_eq!(
            run_capture(
                &["kamcheck", "--config", cfg.to_str().unwrap(), "--seed", "7", "--mc"],
                out
            ),
            0
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert!(v["passes"].as_bool().unwrap());
    assert!(v["mc"]["estimate"].as_f64().unwrap() <= v["mc"]["measure_bound"].as_f64().unwrap());
}

#[test]
fn empty_report_and_round_trip_emission() {
    // empty report renders as {}
    assert_eq!(cli::render_json(&serde_json::json!({})), "{}\n");
    // parse → emit is byte-identical (17 significant digits round-trip
    // every f64 exactly)
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sys.json");
    std::fs::write(
        &cfg,
        r#"{"m0_bar": 1.0, "m_bar": [1.0, 1.0, 1.0], "mu": 1e-4, "axes": [1.0, 3.0, 9.0]}"#,
    )
    .unwrap();
    let out = dir.path().join("inv.json");
    assert_eq!(run_capture(&["invariants", "--config", cfg.to_str().unwrap()], &out), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(cli::render_json(&parsed), text);
}

#[test]
fn deprit_full_chart_inverse_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let n = 3;
    // forward through the full chart, then invert
    let state = vec![
        1.0, 0.3, 1.45, 1.0, 1.9, 1.7, // (Λ, λ) pairs
        0.11, -0.04, 0.05, 0.08, -0.06, 0.02, // (η, ξ) pairs
        0.09, -0.03, // (p, q)
        4.1, 0.6, // (G, g)
        0.12, -0.07, // (P, Q)
    ];
    let cfg = dir.path().join("sys.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"m0_bar": 1.0, "m_bar": [1.0, 1.0, 1.0], "mu": 1e-3, "state": {}}}"#,
            serde_json::to_string(&state).unwrap()
        ),
    )
    .unwrap();
    let fwd = dir.path().join("cart.json");
    assert_eq!(
        run_capture(
            &["deprit", "--config", cfg.to_str().unwrap(), "--chart", "full"],
            &fwd
        ),
        0
    );
    let cart = std::fs::read_to_string(&fwd).unwrap();
    let cfg2 = dir.path().join("sys2.json");
    std::fs::write(
        &cfg2,
        format!(r#"{{"m0_bar": 1.0, "m_bar": [1.0, 1.0, 1.0], "mu": 1e-3, "state": {cart}}}"#),
    )
    .unwrap();
    let inv = dir.path().join("state.json");
    assert_eq!(
        run_capture(
            &[
                "deprit",
                "--config",
                cfg2.to_str().unwrap(),
                "--chart",
                "full",
                "--direction",
                "inverse"
            ],
            &inv
        ),
        0
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&inv).unwrap()).unwrap();
    let got: Vec<f64> = v["state"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(got.len(), 6 * n);
    for (i, (a, b)) in got.iter().zip(&state).enumerate() {
        assert!((a - b).abs() < 1e-8, "slot {i}: {a} vs {b}");
    }
}
