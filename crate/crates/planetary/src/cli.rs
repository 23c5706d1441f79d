//! Command-line orchestration: one subcommand per subsystem, JSON
//! configuration with flag overrides, schema-stable reports (floats at 17
//! significant digits so identical runs are byte-identical).

use crate::deprit::{self, flat};
use crate::kamcheck;
use crate::kepler::{self, PoincarePair, TwoBodyMasses};
use crate::laplace::{self, HalfInt, LaplaceKey};
use crate::nbody;
use crate::secular::{self, CartesianState, MassConfig};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, Vector3};
use serde::Deserialize;
use serde_json::{json, Value};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "planet",
    about = "Secular expansions, canonical charts and KAM-condition arithmetic for the planetary (1+N)-body problem",
    disable_help_subcommand = true
)]
struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Laplace coefficient b_{s,k}(alpha) by quadrature, series or table.
    Laplace(LaplaceArgs),
    /// Plane Delaunay-Poincaré chart, forward or inverse.
    Dpmap(DpmapArgs),
    /// Osculating elements of a Cartesian two-body state.
    Elements(ElementsArgs),
    /// Deprit charts between Cartesian and chart coordinates.
    Deprit(DepritArgs),
    /// Secular expansion report (C0, quadratic forms, quartic tensors).
    Secular(SecularArgs),
    /// Frequency, resonance, Herman and torsion certificates.
    Invariants(SecularArgs),
    /// Secular equilibrium of the fully reduced chart.
    Equilibrium(EquilibriumArgs),
    /// KAM-condition arithmetic and the Monte-Carlo resonant measure.
    Kamcheck(KamArgs),
    /// Direct N-body integration.
    Integrate(IntegrateArgs),
    /// Least-squares secular rate from a trajectory file.
    Fit(FitArgs),
    /// Run the acceptance battery.
    Verify,
}

#[derive(Args)]
struct LaplaceArgs {
    /// Exponent s as a decimal half-integer (e.g. 2.5).
    #[arg(long)]
    s: f64,
    #[arg(long)]
    k: i32,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value = "quad")]
    method: String,
}

#[derive(Args)]
struct DpmapArgs {
    #[arg(long, default_value_t = 1.0)]
    m_hat: f64,
    #[arg(long, default_value_t = 1.0)]
    m_tilde: f64,
    /// forward: state is [Lambda, lambda, eta, xi]; inverse: [y1, y2, x1, x2].
    #[arg(long, default_value = "forward")]
    direction: String,
    /// Chart or Cartesian state as a JSON array.
    #[arg(long)]
    state: String,
}

#[derive(Args)]
struct ElementsArgs {
    #[arg(long, default_value_t = 1.0)]
    m_hat: f64,
    #[arg(long, default_value_t = 1.0)]
    m_tilde: f64,
    /// JSON {"y": [...], "x": [...]} with 2- or 3-vectors.
    #[arg(long)]
    state: String,
}

#[derive(Args)]
struct DepritArgs {
    /// Configuration file with masses and the state.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "action-angle")]
    chart: String,
    #[arg(long, default_value = "forward")]
    direction: String,
}

#[derive(Args)]
struct SecularArgs {
    /// JSON or `key = value` file with masses and axes.
    #[arg(long)]
    config: PathBuf,
    /// Override the perturbation parameter from the config.
    #[arg(long)]
    mu: Option<f64>,
    /// Specific certificate to enforce (e.g. herman).
    #[arg(long)]
    check: Option<String>,
}

#[derive(Args)]
struct EquilibriumArgs {
    #[arg(long)]
    config: PathBuf,
    /// Angular-momentum deficit δ² = ΣΛ − G (alternative to --g).
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct KamArgs {
    /// JSON file with the norm bounds (see docs/schemas.md).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run the Monte-Carlo resonant-measure check on the linear map.
    #[arg(long, default_value_t = false)]
    mc: bool,
    #[arg(long, default_value_t = 64_000)]
    samples: usize,
}

#[derive(Args)]
struct IntegrateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value = "leapfrog")]
    method: String,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct FitArgs {
    /// Trajectory CSV produced by `integrate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    body: usize,
    #[arg(long, default_value = "perihelion")]
    element: String,
}

/// Entry point used by the `planet` binary: 0 on success, 1 on domain
/// errors, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(Outcome::Report(v)) => {
            let text = render_json(&v);
            match emit(&cli.out, &text) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: IoError: {e}");
                    1
                }
            }
        }
        Ok(Outcome::Raw(text)) => match emit(&cli.out, &text) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: IoError: {e}");
                1
            }
        },
        Ok(Outcome::Exit(code)) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

enum Outcome {
    Report(Value),
    Raw(String),
    Exit(i32),
}

fn dispatch(cli: &Cli) -> Result<Outcome, String> {
    match &cli.command {
        Command::Laplace(a) => laplace_cmd(a),
        Command::Dpmap(a) => dpmap_cmd(a),
        Command::Elements(a) => elements_cmd(a),
        Command::Deprit(a) => deprit_cmd(a),
        Command::Secular(a) => secular_cmd(a),
        Command::Invariants(a) => invariants_cmd(a),
        Command::Equilibrium(a) => equilibrium_cmd(a),
        Command::Kamcheck(a) => kamcheck_cmd(a),
        Command::Integrate(a) => integrate_cmd(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Verify => {
            let mut all = true;
            for c in crate::acceptance::run_all() {
                println!("{}", c.line());
                all &= c.passed;
            }
            Ok(Outcome::Exit(if all { 0 } else { 1 }))
        }
    }
}

// ------------------------------------------------------------ reports

/// Render JSON with every float at 17 significant digits; key order and
/// float formatting are platform-independent, so identical inputs give
/// byte-identical reports.
pub fn render_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().unwrap();
                if f.is_finite() {
                    out.push_str(&format!("{f:.16e}"));
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(a) => {
            out.push('[');
            for (i, item) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(o) => {
            out.push('{');
            for (i, (k, item)) in o.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                write_value(out, item);
            }
            out.push('}');
        }
    }
}

/// Surface a module error under its documented variant name, followed by
/// the human-readable message.
fn named<E: std::fmt::Debug + std::fmt::Display>(e: E) -> String {
    format!("{e:?}: {e}")
}

fn emit(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn mat_to_json(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect()))
        .collect();
    Value::Array(rows)
}

// ------------------------------------------------------------ configs

/// Masses-and-axes configuration, accepted as JSON or `key = value` text.
#[derive(Debug, Deserialize)]
struct SystemConfig {
    m0_bar: f64,
    m_bar: Vec<f64>,
    #[serde(default)]
    mu: f64,
    #[serde(default)]
    axes: Vec<f64>,
    #[serde(default)]
    state: Option<Value>,
}

fn load_system(path: &PathBuf) -> Result<SystemConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("IoError: cannot read {}: {e}", path.display()))?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| format!("ConfigError: {e}"))
    } else {
        parse_kv_config(&text)
    }
}

fn parse_kv_config(text: &str) -> Result<SystemConfig, String> {
    let mut m0_bar = None;
    let mut m_bar = Vec::new();
    let mut mu = 0.0;
    let mut axes = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("ConfigError: expected `key = value`, got {line:?}"))?;
        let nums: Result<Vec<f64>, _> =
            value.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|e| format!("ConfigError: {e} in {line:?}"))?;
        match key.trim() {
            "m0_bar" => m0_bar = Some(nums[0]),
            "m_bar" => m_bar = nums,
            "mu" => mu = nums[0],
            "axes" => axes = nums,
            other => return Err(format!("ConfigError: unknown key {other:?}")),
        }
    }
    Ok(SystemConfig {
        m0_bar: m0_bar.ok_or("ConfigError: missing m0_bar")?,
        m_bar,
        mu,
        axes,
        state: None,
    })
}

fn masses_of(cfg: &SystemConfig, mu_override: Option<f64>) -> MassConfig {
    MassConfig::new(cfg.m0_bar, cfg.m_bar.clone(), mu_override.unwrap_or(cfg.mu))
}

// ------------------------------------------------------------ commands

fn laplace_cmd(a: &LaplaceArgs) -> Result<Outcome, String> {
    let s2 = (a.s * 2.0).round();
    if (a.s * 2.0 - s2).abs() > 1e-12 {
        return Err("NonHalfInteger: s must be an integer or half-integer".into());
    }
    let s = HalfInt::halves(s2 as i64);
    let (value, method, nodes_or_order): (f64, &str, u64) = match a.method.as_str() {
        "quad" => {
            let key = LaplaceKey::new(s, a.k, a.alpha).map_err(named)?;
            let v = laplace::eval(&key).map_err(named)?;
            (v, "quad", laplace::MAX_QUADRATURE_NODES as u64)
        }
        "series" => {
            let key = LaplaceKey::new(s, a.k, a.alpha).map_err(named)?;
            let v = laplace::laplace_series(&key, 60).map_err(named)?;
            (v, "series", 60)
        }
        "table" => {
            let kmax = a.k.unsigned_abs().max(2) as usize;
            let table = laplace::laplace_table(s, kmax, a.alpha).map_err(named)?;
            (table[a.k.unsigned_abs() as usize], "table", kmax as u64)
        }
        other => return Err(format!("UsageError: unknown method {other:?}")),
    };
    Ok(Outcome::Report(json!({
        "s": a.s,
        "k": a.k,
        "alpha": a.alpha,
        "value": value,
        "method": method,
        "nodes_or_order": nodes_or_order,
    })))
}

fn dpmap_cmd(a: &DpmapArgs) -> Result<Outcome, String> {
    let state: Vec<f64> =
        serde_json::from_str(&a.state).map_err(|e| format!("StateError: {e}"))?;
    if state.len() != 4 {
        return Err("StateError: expected four components".into());
    }
    let tb = TwoBodyMasses::new(a.m_hat, a.m_tilde);
    match a.direction.as_str() {
        "forward" => {
            let st = PoincarePair::new(state[0], state[1], state[2], state[3]);
            let (y, x) = kepler::dp_forward(&tb, &st).map_err(named)?;
            Ok(Outcome::Report(json!({"y": [y[0], y[1]], "x": [x[0], x[1]]})))
        }
        "inverse" => {
            let st = kepler::dp_inverse(&tb, [state[0], state[1]], [state[2], state[3]])
                .map_err(named)?;
            Ok(Outcome::Report(json!({
                "Lambda": st.lam,
                "lambda": st.lam_angle,
                "eta": st.eta,
                "xi": st.xi,
            })))
        }
        other => Err(format!("UsageError: unknown direction {other:?}")),
    }
}

fn elements_cmd(a: &ElementsArgs) -> Result<Outcome, String> {
    #[derive(Deserialize)]
    struct In {
        y: Vec<f64>,
        x: Vec<f64>,
    }
    let input: In = serde_json::from_str(&a.state).map_err(|e| format!("StateError: {e}"))?;
    let tb = TwoBodyMasses::new(a.m_hat, a.m_tilde);
    let el = kepler::osculating_elements(&tb, &input.y, &input.x).map_err(named)?;
    Ok(Outcome::Report(json!({
        "a": el.a,
        "e": el.e,
        "mean_anomaly": el.mean_anomaly,
        "perihelion_arg": el.perihelion_arg,
        "Theta": el.theta,
        "node_longitude": el.node_longitude,
    })))
}

fn cartesian_from_value(v: &Value) -> Result<CartesianState, String> {
    #[derive(Deserialize)]
    struct In {
        y: Vec<[f64; 3]>,
        x: Vec<[f64; 3]>,
    }
    let input: In = serde_json::from_value(v.clone()).map_err(|e| format!("StateError: {e}"))?;
    Ok(CartesianState {
        y: input.y.iter().map(|v| Vector3::new(v[0], v[1], v[2])).collect(),
        x: input.x.iter().map(|v| Vector3::new(v[0], v[1], v[2])).collect(),
    })
}

fn cartesian_to_json(c: &CartesianState) -> Value {
    json!({
        "y": c.y.iter().map(|v| vec![v.x, v.y, v.z]).collect::<Vec<_>>(),
        "x": c.x.iter().map(|v| vec![v.x, v.y, v.z]).collect::<Vec<_>>(),
    })
}

fn deprit_cmd(a: &DepritArgs) -> Result<Outcome, String> {
    let cfg = load_system(&a.config)?;
    let masses = masses_of(&cfg, None);
    let n = masses.n();
    let state = cfg.state.as_ref().ok_or("ConfigError: missing `state`")?;
    match (a.chart.as_str(), a.direction.as_str()) {
        ("action-angle", "forward") => {
            let flatv: Vec<f64> =
                serde_json::from_value(state.clone()).map_err(|e| format!("StateError: {e}"))?;
            let st = flat::unflatten_action_angle(&flatv, n);
            let cart = deprit::deprit_forward(&masses, &st).map_err(named)?;
            Ok(Outcome::Report(cartesian_to_json(&cart)))
        }
        ("action-angle", "inverse") => {
            let cart = cartesian_from_value(state)?;
            let st = deprit::deprit_inverse(&masses, &cart).map_err(named)?;
            Ok(Outcome::Report(json!({
                "L": st.l, "Gamma": st.gamma, "Psi": st.psi,
                "ell": st.ell, "gamma": st.gamma_angle, "psi": st.psi_angle,
            })))
        }
        ("full", "inverse") => {
            let cart = cartesian_from_value(state)?;
            let st = deprit::regularized_inverse(&masses, &cart).map_err(named)?;
            Ok(Outcome::Report(json!({"state": flat::regularized(&st)})))
        }
        ("partial", "inverse") => {
            let cart = cartesian_from_value(state)?;
            let st = deprit::partial_inverse(&masses, &cart).map_err(named)?;
            Ok(Outcome::Report(json!({"state": flat::partial(&st)})))
        }
        ("full", "forward") => {
            let flatv: Vec<f64> =
                serde_json::from_value(state.clone()).map_err(|e| format!("StateError: {e}"))?;
            let st = flat::unflatten_regularized(&flatv, n);
            let cart = deprit::regularized_forward(&masses, &st).map_err(named)?;
            Ok(Outcome::Report(cartesian_to_json(&cart)))
        }
        ("partial", "forward") => {
            let flatv: Vec<f64> =
                serde_json::from_value(state.clone()).map_err(|e| format!("StateError: {e}"))?;
            let st = flat::unflatten_partial(&flatv, n);
            let cart = deprit::partial_forward(&masses, &st).map_err(named)?;
            Ok(Outcome::Report(cartesian_to_json(&cart)))
        }
        (chart, dir) => Err(format!("UsageError: unknown chart/direction {chart:?}/{dir:?}")),
    }
}

fn secular_cmd(a: &SecularArgs) -> Result<Outcome, String> {
    let cfg = load_system(&a.config)?;
    let masses = masses_of(&cfg, a.mu);
    if cfg.axes.len() != masses.n() {
        return Err("ConfigError: axes must match the number of planets".into());
    }
    let lam = masses.lambdas_from_axes(&cfg.axes);
    let c0 = secular::secular_c0(&masses, &cfg.axes).map_err(named)?;
    let f_h = secular::plane_quadratic_matrix(&masses, &lam).map_err(named)?;
    let forms = secular::spatial_quadratic_forms(&masses, &lam).map_err(named)?;
    let tensors = secular::quartic_tensors(&masses, &lam).map_err(named)?;
    let mut nonzeros = Vec::new();
    for (name, map) in [("q", &tensors.q), ("r", &tensors.r)] {
        for (&[i, j, k, l], &value) in map {
            nonzeros.push(json!({
                "i": i, "j": j, "k": k, "l": l,
                "tensor": name,
                "value": value,
            }));
        }
    }
    Ok(Outcome::Report(json!({
        "C0": c0,
        "F_h": mat_to_json(&f_h),
        "Q_h_star": mat_to_json(&forms.q_h_star),
        "G_v_star": mat_to_json(&forms.g_v_star),
        "quartic_nonzeros": nonzeros,
    })))
}

fn invariants_cmd(a: &SecularArgs) -> Result<Outcome, String> {
    let cfg = load_system(&a.config)?;
    let masses = masses_of(&cfg, a.mu);
    let n = masses.n();
    if cfg.axes.len() != n {
        return Err("ConfigError: axes must match the number of planets".into());
    }
    let lam = masses.lambdas_from_axes(&cfg.axes);
    let f_h = secular::plane_quadratic_matrix(&masses, &lam).map_err(named)?;
    let (omega, u) = crate::birkhoff::diagonalize_symmetric(&f_h).map_err(named)?;
    let (min_res, kvec) = crate::birkhoff::check_nonresonance(&omega, 4);
    let (s, z) = secular::secular_spectrum(&masses, &lam).map_err(named)?;
    let herman = crate::birkhoff::herman_residual(&s, &z);
    let tensors = secular::quartic_tensors(&masses, &lam).map_err(named)?;
    let (q, r) = crate::birkhoff::rotate_tensors(&tensors, &u);
    let torsion = crate::birkhoff::torsion_matrix(&q, &r);
    let det = torsion.determinant();
    // two planets have no order-4 normal form; the matrix is then only
    // the projected quartic form
    let label = if n >= 3 { "birkhoff-invariants" } else { "quartic-form matrix" };
    if let Some(check) = &a.check {
        if check == "herman" && herman > 1e-11 {
            return Err(format!("HermanResidualExceeded: {herman:e}"));
        }
    }
    Ok(Outcome::Report(json!({
        "omega": omega,
        "min_k_resonance": {"value": min_res, "k": kvec},
        "herman_residual": herman,
        "torsion": {"matrix": mat_to_json(&torsion), "det": det, "label": label},
        "spectrum": {"s": s, "z": z},
    })))
}

fn equilibrium_cmd(a: &EquilibriumArgs) -> Result<Outcome, String> {
    let cfg = load_system(&a.config)?;
    let masses = masses_of(&cfg, None);
    let lam = masses.lambdas_from_axes(&cfg.axes);
    let total: f64 = lam.iter().sum();
    let g = match (a.g, a.delta2) {
        (Some(g), _) => g,
        (None, Some(d2)) => total - d2,
        (None, None) => return Err("UsageError: provide --g or --delta2".into()),
    };
    let rep = crate::birkhoff::find_secular_equilibrium(&masses, &lam, g, a.tol)
        .map_err(named)?;
    Ok(Outcome::Report(json!({
        "z_eq": rep.z_eq,
        "residual": rep.residual,
        "iterations": rep.iterations,
        "ift_ratios": [rep.ift_ratios.0, rep.ift_ratios.1],
        "G": g,
        "delta2": total - g,
    })))
}

#[derive(Debug, Deserialize)]
struct KamConfig {
    n_bar: usize,
    n_hat: usize,
    f: f64,
    m: f64,
    m_hat: f64,
    n: f64,
    #[serde(default = "one")]
    n_bar_norm: f64,
    #[serde(default = "one")]
    n_hat_norm: f64,
    rho: f64,
    s: f64,
    #[serde(default = "one")]
    s_bar: f64,
    gamma: f64,
    gamma_hat: f64,
    tau: f64,
}

fn one() -> f64 {
    1.0
}

fn kamcheck_cmd(a: &KamArgs) -> Result<Outcome, String> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| format!("IoError: cannot read {}: {e}", a.config.display()))?;
    let cfg: KamConfig = serde_json::from_str(&text).map_err(|e| format!("ConfigError: {e}"))?;
    let inputs = kamcheck::KamInputs {
        n_bar: cfg.n_bar,
        n_hat: cfg.n_hat,
        f: cfg.f,
        m: cfg.m,
        m_hat: cfg.m_hat,
        n: cfg.n,
        n_bar_norm: cfg.n_bar_norm,
        n_hat_norm: cfg.n_hat_norm,
        rho: cfg.rho,
        s: cfg.s,
        s_bar: cfg.s_bar,
        gamma: cfg.gamma,
        gamma_hat: cfg.gamma_hat,
        tau: cfg.tau,
    };
    let rep = kamcheck::kam_constants(&inputs);
    let mut report = json!({
        "K": rep.k_cut,
        "rho_tilde": rep.rho_tilde,
        "L": rep.l,
        "E": rep.e,
        "c": rep.c,
        "cE": rep.ce,
        "passes": rep.passes,
        "measure_bound_terms": rep.measure_bound_terms.to_vec(),
    });
    if a.mc {
        let omega = |i: &[f64]| i.to_vec();
        let a_matrix = |_i: &[f64]| DMatrix::identity(cfg.n_hat, cfg.n_hat);
        let map = kamcheck::FrequencyMap {
            n_bar: cfg.n_bar,
            n_hat: cfg.n_hat,
            omega: &omega,
            a_matrix: &a_matrix,
            lo: vec![1.0; cfg.n_bar + cfg.n_hat],
            hi: vec![2.0; cfg.n_bar + cfg.n_hat],
        };
        let constants = kamcheck::MeasureBoundConstants {
            omega_inv_norm: 1.0,
            r_bar: 2.1,
            a_norm: 1.05,
            a_inv_norm: 1.0,
            covering_count: 1.0,
            meas_bar: 1.0,
            meas_unit_annulus: 1.0,
            r_hat: 1.0,
        };
        let mc = kamcheck::resonant_measure_mc(
            &map,
            cfg.gamma.min(0.1),
            cfg.gamma_hat.min(0.05),
            cfg.tau,
            20,
            a.samples,
            a.seed,
            &constants,
        )
        .map_err(named)?;
        report["mc"] = json!({
            "estimate": mc.estimate,
            "sigma": mc.sigma,
            "measure_bound": mc.measure_bound,
            "samples": mc.samples,
            "tail_bound": mc.tail_bound,
            "seed": a.seed,
        });
    }
    Ok(Outcome::Report(report))
}

fn integrate_cmd(a: &IntegrateArgs) -> Result<Outcome, String> {
    let cfg = load_system(&a.config)?;
    let masses = masses_of(&cfg, None);
    let state = cfg.state.as_ref().ok_or("ConfigError: missing `state`")?;
    let state0 = cartesian_from_value(state)?;
    let method = match a.method.as_str() {
        "leapfrog" | "leapfrog_split" => nbody::Method::LeapfrogSplit,
        "rk4" => nbody::Method::Rk4,
        other => return Err(format!("UsageError: unknown method {other:?}")),
    };
    let traj = nbody::integrate(&masses, &state0, a.t_end, a.dt, method, a.stride)
        .map_err(named)?;
    match a.format.as_str() {
        "csv" => Ok(Outcome::Raw(trajectory_csv(&traj))),
        "json" => {
            let states: Vec<Value> = traj.states.iter().map(cartesian_to_json).collect();
            Ok(Outcome::Report(json!({"times": traj.times, "states": states})))
        }
        other => Err(format!("UsageError: unknown format {other:?}")),
    }
}

fn trajectory_csv(traj: &nbody::Trajectory) -> String {
    let n = traj.states[0].x.len();
    let mut out = String::from("t");
    for i in 0..n {
        for c in ["x", "y", "z"] {
            out.push_str(&format!(",y{i}{c}"));
        }
        for c in ["x", "y", "z"] {
            out.push_str(&format!(",x{i}{c}"));
        }
    }
    out.push('\n');
    for (t, st) in traj.times.iter().zip(&traj.states) {
        out.push_str(&format!("{t:.17e}"));
        for i in 0..n {
            for k in 0..3 {
                out.push_str(&format!(",{:.17e}", st.y[i][k]));
            }
            for k in 0..3 {
                out.push_str(&format!(",{:.17e}", st.x[i][k]));
            }
        }
        out.push('\n');
    }
    out
}

/// Parse a trajectory CSV produced by `integrate` (used by `fit`).
pub fn parse_trajectory_csv(text: &str) -> Result<nbody::Trajectory, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("CsvError: empty file")?;
    let cols = header.split(',').count();
    if cols < 7 || (cols - 1) % 6 != 0 {
        return Err("CsvError: column count does not match t + 6 per body".into());
    }
    let n = (cols - 1) / 6;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|v| v.parse::<f64>()).collect();
        let vals = vals.map_err(|e| format!("CsvError: {e}"))?;
        times.push(vals[0]);
        let mut y = Vec::new();
        let mut x = Vec::new();
        for i in 0..n {
            let base = 1 + 6 * i;
            y.push(Vector3::new(vals[base], vals[base + 1], vals[base + 2]));
            x.push(Vector3::new(vals[base + 3], vals[base + 4], vals[base + 5]));
        }
        states.push(CartesianState { y, x });
    }
    Ok(nbody::Trajectory { times, states })
}

fn fit_cmd(a: &FitArgs) -> Result<Outcome, String> {
    let cfg = load_system(&a.config)?;
    let masses = masses_of(&cfg, None);
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| format!("IoError: cannot read {}: {e}", a.input.display()))?;
    let traj = parse_trajectory_csv(&text)?;
    let element = match a.element.as_str() {
        "perihelion" => nbody::Element::Perihelion,
        "node" => nbody::Element::Node,
        other => return Err(format!("UsageError: unknown element {other:?}")),
    };
    let (rate, stderr) = nbody::secular_frequency_fit(&masses, &traj, a.body, element)
        .map_err(named)?;
    Ok(Outcome::Report(json!({
        "body": a.body,
        "element": a.element,
        "rate": rate,
        "stderr": stderr,
    })))
}
