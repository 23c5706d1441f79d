//! Arithmetic evaluators for the quantitative smallness conditions of the
//! two-scale KAM and averaging theorems, plus a seeded Monte-Carlo
//! verifier of the resonant-set measure bound.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KamError {
    #[error("the action-to-frequency matrix A is singular")]
    SingularA,
}

/// Norm bounds and analyticity widths feeding the KAM condition.
#[derive(Debug, Clone, Copy)]
pub struct KamInputs {
    pub n_bar: usize,
    pub n_hat: usize,
    /// ‖f‖ bound F.
    pub f: f64,
    /// Hessian bounds M ≥ ‖∂²h‖ and M̂ (fast block).
    pub m: f64,
    pub m_hat: f64,
    /// Inverse-Hessian bounds N, N̄, N̂.
    pub n: f64,
    pub n_bar_norm: f64,
    pub n_hat_norm: f64,
    pub rho: f64,
    pub s: f64,
    pub s_bar: f64,
    pub gamma: f64,
    pub gamma_hat: f64,
    pub tau: f64,
}

/// Derived condition numbers; `passes ⇔ cE < 1`.
#[derive(Debug, Clone)]
pub struct KamReport {
    pub k_cut: f64,
    pub rho_tilde: f64,
    pub l: f64,
    pub e: f64,
    pub c: f64,
    pub ce: f64,
    pub passes: bool,
    /// Multipliers of the three summands of the invariant-measure bound.
    pub measure_bound_terms: [f64; 3],
    pub nan_inputs: bool,
}

/// `log₊(a) = max(1, ln a)`.
pub fn log_plus(a: f64) -> f64 {
    a.ln().max(1.0)
}

/// Evaluate K, ρ̃, L, E and the KAM condition `cE = c F L / ρ̃² < 1`.
pub fn kam_constants(inp: &KamInputs) -> KamReport {
    // the negated form also traps NaN inputs
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let bad = [inp.f, inp.m, inp.m_hat, inp.n, inp.rho, inp.s, inp.gamma, inp.gamma_hat]
        .iter()
        .any(|v| !(*v > 0.0));
    if bad {
        return KamReport {
            k_cut: f64::NAN,
            rho_tilde: f64::NAN,
            l: f64::NAN,
            e: f64::NAN,
            c: f64::NAN,
            ce: f64::NAN,
            passes: false,
            measure_bound_terms: [f64::NAN; 3],
            nan_inputs: true,
        };
    }
    let n_total = (inp.n_bar + inp.n_hat) as f64;
    let c = (2f64.powi(11) * n_total).max(2.0 / 3.0 * 12f64.powf(inp.tau + 1.0));
    let l = inp.n.max(1.0 / inp.m).max(1.0 / inp.m_hat);
    let k = 6.0 / inp.s * log_plus(inp.gamma * inp.gamma / (inp.f * inp.m * inp.m * l));
    let kt = k.powf(inp.tau + 1.0);
    let rho_tilde = (inp.gamma / (3.0 * inp.m * kt))
        .min(inp.gamma_hat / (3.0 * inp.m_hat * kt))
        .min(inp.rho);
    let e = inp.f * l / (rho_tilde * rho_tilde);
    let ce = c * e;
    let n2 = 2.0 * n_total;
    let t7 = (1.0 + 2f64.powi(7) * e).powf(n2);
    let t10 = (1.0 + 2f64.powi(10) * e).powf(n_total);
    KamReport {
        k_cut: k,
        rho_tilde,
        l,
        e,
        c,
        ce,
        passes: ce < 1.0,
        measure_bound_terms: [(1.0 + t7) * (1.0 + t10), (1.0 + t7) * t10, t7],
        nan_inputs: false,
    }
}

/// Outcome of the averaging smallness test `‖f‖ ≤ α r / (2⁷ K)`.
#[derive(Debug, Clone)]
pub struct AveragingReport {
    pub ok: bool,
    pub ks_precondition: bool,
    pub bound: f64,
    pub margin: f64,
    /// Bound on the normal-form correction, `2⁵ K ‖f‖² / (α r)`.
    pub post_quadratic: f64,
    /// Bound on the fast remainder, `e^{−Ks/6} ‖f‖`.
    pub post_exponential: f64,
}

pub fn averaging_threshold(
    norm_f: f64,
    alpha_bar: f64,
    alpha_hat: f64,
    r: f64,
    s: f64,
    k: f64,
) -> AveragingReport {
    let alpha = alpha_bar.min(alpha_hat);
    let bound = alpha * r / (2f64.powi(7) * k);
    AveragingReport {
        ok: norm_f <= bound,
        ks_precondition: k * s >= 6.0,
        bound,
        margin: bound - norm_f,
        post_quadratic: 2f64.powi(5) * k * norm_f * norm_f / (alpha * r),
        post_exponential: (-k * s / 6.0).exp() * norm_f,
    }
}

/// Outcome of the fast-averaging smallness test
/// `ε̄ < a d̄ / (2⁷ c_m K s̄)` with `c_m = e(1 + e m)/2`.
#[derive(Debug, Clone)]
pub struct FastAveragingReport {
    pub ok: bool,
    pub ks_precondition: bool,
    pub bound: f64,
    pub c_m: f64,
}

pub fn fast_averaging_threshold(
    eps_bar: f64,
    a: f64,
    d_bar: f64,
    k: f64,
    s_bar: f64,
    m: usize,
) -> FastAveragingReport {
    let e = std::f64::consts::E;
    let c_m = e * (1.0 + e * m as f64) / 2.0;
    let bound = a * d_bar / (2f64.powi(7) * c_m * k * s_bar);
    FastAveragingReport { ok: eps_bar < bound, ks_precondition: k * s_bar >= 6.0, bound, c_m }
}

/// Affine-in-the-fast-actions frequency map on a product box.
pub struct FrequencyMap<'a> {
    pub n_bar: usize,
    pub n_hat: usize,
    /// Full frequency vector ν(Ī, Î) ∈ ℝ^{n̄+n̂}.
    pub omega: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    /// The fast-block matrix A(Ī), needed for the nonsingularity check.
    pub a_matrix: &'a (dyn Fn(&[f64]) -> DMatrix<f64> + Sync),
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Constants feeding the resonant-measure bound.
#[derive(Debug, Clone, Copy)]
pub struct MeasureBoundConstants {
    /// sup ‖ω⁻¹‖ⁿ factor base.
    pub omega_inv_norm: f64,
    /// R̄ > max |ω̄|.
    pub r_bar: f64,
    /// 𝒜 > max ‖A‖ and sup ‖A⁻¹‖.
    pub a_norm: f64,
    pub a_inv_norm: f64,
    /// Covering count p of the frequency image.
    pub covering_count: f64,
    /// Measures of the slow box and of the unit fast annulus.
    pub meas_bar: f64,
    pub meas_unit_annulus: f64,
    /// Fast-action radius r̂.
    pub r_hat: f64,
}

#[derive(Debug, Clone)]
pub struct ResonantMeasure {
    pub estimate: f64,
    pub sigma: f64,
    pub measure_bound: f64,
    pub samples: usize,
    /// Neglected lattice tail of the Diophantine sum beyond the cutoff.
    pub tail_bound: f64,
}

/// Lattice zeta `Σ_{0≠k∈ℤⁿ} |k|₁^{−τ}`: partial sum up to `cutoff` plus a
/// crude tail bound (count of shell m grows like mⁿ⁻¹).
pub fn lattice_zeta(n: usize, tau: f64, cutoff: i32) -> (f64, f64) {
    let mut sum = 0.0;
    for m in 1..=cutoff {
        sum += shell_count(n, m) as f64 / (m as f64).powf(tau);
    }
    // shell_count(n, m) ≤ 2ⁿ C(n+m−1, n−1) ≤ 2ⁿ (m+n)^{n−1}/(n−1)!;
    // integral-compare the tail
    let fact: f64 = (1..n).map(|i| i as f64).product();
    let a = tau - (n as f64 - 1.0);
    let tail = if a > 1.0 {
        2f64.powi(n as i32) / fact * (cutoff as f64 + n as f64).powf(-(a - 1.0)) / (a - 1.0)
    } else {
        f64::INFINITY
    };
    (sum, tail)
}

/// Lattice points in ℤⁿ with |k|₁ = m.
fn shell_count(n: usize, m: i32) -> u64 {
    let mut total = 0u64;
    for j in 1..=n.min(m as usize) {
        total += binom(n as u64, j as u64)
            * binom(m as u64 - 1, j as u64 - 1)
            * (1u64 << j);
    }
    total
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1u64;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

/// Monte-Carlo fraction of the box whose frequency violates the two-scale
/// Diophantine inequalities for some `0 < |k| ≤ k_cut`, with the measure
/// bound `(c̄ g + ĉ ĝ/r̂)` evaluated from the supplied constants.
///
/// Sampling is chunked with one RNG stream per chunk and merged in chunk
/// order, so the estimate is identical for any thread count.
#[allow(clippy::too_many_arguments)]
pub fn resonant_measure_mc(
    map: &FrequencyMap,
    g: f64,
    g_hat: f64,
    tau: f64,
    k_cut: i32,
    samples: usize,
    seed: u64,
    constants: &MeasureBoundConstants,
) -> Result<ResonantMeasure, KamError> {
    assert!(samples >= 10_000, "need at least 1e4 samples");
    let n = map.n_bar + map.n_hat;
    // nonsingularity of A probed at box corners and center
    let mid: Vec<f64> = map
        .lo
        .iter()
        .zip(&map.hi)
        .take(map.n_bar)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let a_mid = (map.a_matrix)(&mid);
    if a_mid.determinant().abs() < 1e-12 {
        return Err(KamError::SingularA);
    }

    // lattice enumeration once
    let mut lattice: Vec<Vec<i32>> = Vec::new();
    let mut k = vec![0i32; n];
    enumerate(&mut lattice, &mut k, 0, k_cut);
    lattice.retain(|k| k.iter().any(|&c| c != 0));

    // fixed chunking with one RNG stream per chunk: the integer counts
    // are identical no matter how chunks are distributed over threads
    let chunks = 64usize;
    let per = samples / chunks;
    let run_chunk = |chunk: usize| -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(chunk as u64));
        let mut hits = 0usize;
        for _ in 0..per {
            let point: Vec<f64> = map
                .lo
                .iter()
                .zip(&map.hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect();
            let nu = (map.omega)(&point);
            for k in &lattice {
                let dot: f64 = nu.iter().zip(k).map(|(v, &c)| v * c as f64).sum();
                let k1: i32 = k.iter().map(|c| c.abs()).sum();
                let bar_nonzero = k[..map.n_bar].iter().any(|&c| c != 0);
                let thresh = if bar_nonzero { g } else { g_hat } / (k1 as f64).powf(tau);
                if dot.abs() < thresh {
                    hits += 1;
                    break;
                }
            }
        }
        hits
    };
    let threads = std::env::var("PLANET_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(1)
        .clamp(1, chunks);
    let hits: usize = if threads == 1 {
        (0..chunks).map(run_chunk).sum()
    } else {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads {
                let run_chunk = &run_chunk;
                handles.push(scope.spawn(move || {
                    (t..chunks).step_by(threads).map(run_chunk).sum::<usize>()
                }));
            }
            handles.into_iter().map(|h| h.join().unwrap()).sum()
        })
    };
    let total = per * chunks;
    let estimate = hits as f64 / total as f64;
    let sigma = (estimate * (1.0 - estimate) / total as f64).sqrt();

    let (zeta_n, tail_n) = lattice_zeta(n, tau, 200);
    let (zeta_hat, _) = lattice_zeta(map.n_hat, tau, 200);
    let c_bar = constants.omega_inv_norm.powi(n as i32)
        * constants.r_bar.powi(map.n_bar as i32 - 1)
        / constants.meas_bar
        * constants.a_norm.powi(map.n_hat as i32)
        / constants.meas_unit_annulus
        * (zeta_n + tail_n)
        * constants.covering_count;
    let c_hat = constants.a_inv_norm.powi(map.n_hat as i32)
        * constants.a_norm.powi(map.n_hat as i32 - 1)
        / constants.meas_unit_annulus
        * zeta_hat;
    let measure_bound = c_bar * g + c_hat * g_hat / constants.r_hat;

    // lattice tail neglected by the k_cut truncation, reported alongside
    let tail_bound = {
        let (z_full, t_full) = lattice_zeta(n, tau, 400);
        let (z_cut, _) = lattice_zeta(n, tau, k_cut);
        (z_full - z_cut + t_full).max(0.0)
    };
    return Ok(ResonantMeasure { estimate, sigma, measure_bound, samples: total, tail_bound });

    fn enumerate(out: &mut Vec<Vec<i32>>, k: &mut Vec<i32>, idx: usize, budget: i32) {
        if idx == k.len() {
            out.push(k.clone());
            return;
        }
        for c in -budget..=budget {
            k[idx] = c;
            enumerate(out, k, idx + 1, budget - c.abs());
            k[idx] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_plus_branches() {
        assert_eq!(log_plus(0.5), 1.0);
        assert_eq!(log_plus(std::f64::consts::E.powi(3)), 3.0);
    }

    #[test]
    fn constants_hand_checked() {
        // Inputs chosen so every min/max branch is decidable by hand.
        let inp = KamInputs {
            n_bar: 1,
            n_hat: 1,
            f: 1e-8,
            m: 1.0,
            m_hat: 1.0,
            n: 1.0,
            n_bar_norm: 1.0,
            n_hat_norm: 1.0,
            rho: 1.0,
            s: 6.0,
            s_bar: 0.5,
            gamma: 1.0,
            gamma_hat: 1.0,
            tau: 3.0,
        };
        let rep = kam_constants(&inp);
        // L = 1, K = max(1, ln 1e8) = ln 1e8, ρ̃ = 1/(3K⁴)
        let k = (1e8f64).ln();
        assert_eq!(rep.l, 1.0);
        assert!((rep.k_cut - k).abs() < 1e-13);
        let rho = 1.0 / (3.0 * k.powi(4));
        assert!((rep.rho_tilde - rho).abs() < 1e-15);
        assert!((rep.e - 1e-8 / (rho * rho)).abs() < 1e-9);
        // c = max(2¹¹·2, (2/3)·12⁴) = max(4096, 13824) = 13824
        assert_eq!(rep.c, 13824.0);
        assert_eq!(rep.passes, rep.ce < 1.0);
    }

    #[test]
    fn doubling_f_on_the_rho_branch() {
        // with ρ̃ pinned at ρ (tiny ρ), E = FL/ρ² is exactly linear in F
        // and `passes` can only switch off as F grows
        let mut inp = KamInputs {
            n_bar: 2,
            n_hat: 2,
            f: 1e-10,
            m: 2.0,
            m_hat: 0.5,
            n: 1.5,
            n_bar_norm: 1.0,
            n_hat_norm: 1.0,
            rho: 1e-15,
            s: 1.0,
            s_bar: 0.5,
            gamma: 0.01,
            gamma_hat: 0.005,
            tau: 5.0,
        };
        let mut prev = kam_constants(&inp);
        assert_eq!(prev.rho_tilde, 1e-15);
        let mut was_passing = prev.passes;
        for _ in 0..8 {
            inp.f *= 2.0;
            let rep = kam_constants(&inp);
            assert!((rep.e / prev.e - 2.0).abs() < 1e-12);
            assert!(was_passing || !rep.passes);
            was_passing = rep.passes;
            prev = rep;
        }
    }

    #[test]
    fn fast_averaging_equality_and_flag() {
        // bound = a d̄/(2⁷ c_m K s̄); at equality the test is strict
        let m = 2usize;
        let e = std::f64::consts::E;
        let c_m = e * (1.0 + e * m as f64) / 2.0;
        let bound = 1.0 * 0.5 / (128.0 * c_m * 12.0 * 0.5);
        let rep = fast_averaging_threshold(bound, 1.0, 0.5, 12.0, 0.5, m);
        assert!(!rep.ok && rep.ks_precondition);
        let rep = fast_averaging_threshold(bound * 0.99, 1.0, 0.5, 12.0, 0.5, m);
        assert!(rep.ok);
        let rep = fast_averaging_threshold(1e-9, 1.0, 0.5, 4.0, 1.0, m);
        assert!(!rep.ks_precondition);
    }

    #[test]
    fn averaging_threshold_on_secular_norms() {
        // a coarse planetary instance: the secular interaction scale and
        // the mean-motion gap feed the smallness test
        let masses = crate::secular::MassConfig::new(1.0, vec![1.0, 1.0], 1e-5);
        let axes = [1.0, 5.0];
        let lam = masses.lambdas_from_axes(&axes);
        let c0 = crate::secular::secular_c0(&masses, &axes).unwrap().abs();
        let n1 = masses.two_body(0).mean_motion(lam[0]);
        let n2 = masses.two_body(1).mean_motion(lam[1]);
        let alpha = (n1 - n2).abs();
        let rep = averaging_threshold(masses.mu * c0, alpha, alpha, 0.1 * lam[0], 0.5, 24.0);
        assert!(rep.ok, "margin {}", rep.margin);
        assert!(rep.post_quadratic.is_finite() && rep.post_exponential.is_finite());
        assert!(rep.post_quadratic < masses.mu * c0);
    }

    #[test]
    fn resonant_measure_scales_linearly_in_g() {
        let omega = |i: &[f64]| i.to_vec();
        let a_matrix = |_i: &[f64]| DMatrix::identity(1, 1);
        let map = FrequencyMap {
            n_bar: 1,
            n_hat: 1,
            omega: &omega,
            a_matrix: &a_matrix,
            lo: vec![1.0, 1.0],
            hi: vec![2.0, 2.0],
        };
        let constants = MeasureBoundConstants {
            omega_inv_norm: 1.0,
            r_bar: 2.1,
            a_norm: 1.05,
            a_inv_norm: 1.0,
            covering_count: 1.0,
            meas_bar: 1.0,
            meas_unit_annulus: 1.0,
            r_hat: 1.0,
        };
        let mut points = Vec::new();
        for g in [0.004, 0.012, 0.04] {
            let res =
                resonant_measure_mc(&map, g, g / 2.0, 3.0, 8, 64_000, 5, &constants).unwrap();
            points.push((g, res.estimate.max(1e-9)));
        }
        let slope =
            (points[2].1 / points[0].1).ln() / (points[2].0 / points[0].0).ln();
        assert!((slope - 1.0).abs() < 0.25, "slope {slope}, points {points:?}");
    }

    #[test]
    fn averaging_margins() {
        let r = averaging_threshold(1.0, 2.0, 4.0, 128.0, 1.0, 2.0);
        // bound = 2·128/(2⁷·2) = 1, equality counts as ok with zero margin
        assert!(r.ok && r.margin.abs() < 1e-15);
        let r = averaging_threshold(1.0, 2.0, 4.0, 128.0, 2.0, 2.5);
        assert!(!r.ks_precondition);
    }
}
