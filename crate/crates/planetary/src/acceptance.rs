//! The acceptance battery: every headline cross-validation of the crate
//! as a named pass/fail criterion with pinned tolerances.  `cargo test`
//! runs it through `tests/acceptance.rs`; the CLI exposes it as
//! `planet verify`.

use crate::birkhoff::{
    self, birkhoff_average, check_nonresonance, diagonalize_symmetric, herman_residual,
    rotate_tensors, torsion_matrix,
};
use crate::deprit::{self, flat};
use crate::kamcheck;
use crate::kepler::{self, PoincarePair};
use crate::laplace::{self, HalfInt, LaplaceKey};
use crate::nbody;
use crate::oracle;
use crate::poly::Poly;
use crate::secular::{self, CoefficientName, MassConfig, SecularState};
use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:<28} {:>7.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

fn run<F: FnOnce() -> (bool, String)>(name: &'static str, f: F) -> Criterion {
    let t0 = Instant::now();
    let (passed, detail) = f();
    Criterion { name, passed, detail, seconds: t0.elapsed().as_secs_f64() }
}

/// Run the full battery in criterion order.
pub fn run_all() -> Vec<Criterion> {
    vec![
        run("laplace-cross-validation", laplace_cross_validation),
        run("coefficient-oracles", coefficient_oracles),
        run("symplecticity", symplecticity),
        run("plane-eigen-asymptotics", plane_eigen_asymptotics),
        run("plane-torsion-det", plane_torsion_det),
        run("spatial-torsion-n2", spatial_torsion_n2),
        run("herman-and-trace", herman_and_trace),
        run("four-nonresonance", four_nonresonance),
        run("torsion-route-equivalence", torsion_route_equivalence),
        run("nbody-cross-validation", nbody_cross_validation),
        run("kamcheck-arithmetic-and-mc", kamcheck_arithmetic_and_mc),
        run("equilibrium-recentring", equilibrium_recentring),
    ]
}

// ---------------------------------------------------------------- 1
fn laplace_cross_validation() -> (bool, String) {
    let alphas = [0.05, 0.2, 0.4, 0.6, 0.8];
    let mut worst_sq: f64 = 0.0;
    let mut worst_rec: f64 = 0.0;
    for s_halves in [1i64, 3, 5, 7, 9] {
        for alpha in alphas {
            for k in 0..=6 {
                let key = LaplaceKey::new(HalfInt::halves(s_halves), k, alpha).unwrap();
                let q = laplace::laplace_quadrature(&key, 4096).unwrap();
                let s = laplace::laplace_series_auto(&key).unwrap();
                worst_sq = worst_sq.max((s - q).abs() / q.abs().max(1.0));
            }
            let table = laplace::laplace_table(HalfInt::halves(s_halves), 6, alpha).unwrap();
            let sf = s_halves as f64 / 2.0;
            let w = alpha + 1.0 / alpha;
            for k in 0..=4usize {
                let kf = k as f64;
                let t1 = (kf + 1.0) / (kf + 2.0 - sf) * w * table[k + 1];
                let t2 = (kf + sf) / (kf + 2.0 - sf) * table[k];
                let resid = (table[k + 2] - t1 + t2).abs();
                let scale = table[k + 2].abs().max(t1.abs()).max(t2.abs());
                worst_rec = worst_rec.max(resid / scale);
            }
        }
    }
    (
        worst_sq <= 1e-12 && worst_rec <= 1e-10,
        format!(
            "series-vs-quadrature {worst_sq:.2e} (<=1e-12), recurrence residual {worst_rec:.2e} (<=1e-10)"
        ),
    )
}

// ---------------------------------------------------------------- 2
fn coefficient_oracles() -> (bool, String) {
    use CoefficientName::*;
    let pairs = [(1.0, 3.0), (2.0, 5.0), (1.0, 4.0)];
    let mut worst2: f64 = 0.0;
    let mut worst4: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);

    for (a1, a2) in pairs {
        let g = |z: &[f64]| {
            oracle::pair_average_inverse_distance(a1, a2, [z[0], z[2]], [z[1], z[3]], 512)
        };
        let d2 = |orders: [usize; 4], norm: f64| {
            norm * oracle::fd_mixed_partial_richardson(&g, &[0.0; 4], &orders, 1e-2)
        };
        let d4 = |orders: [usize; 4], norm: f64| {
            norm * oracle::fd_mixed_partial_richardson2(&g, &[0.0; 4], &orders, 8e-2)
        };
        let c = |n: CoefficientName| secular::expansion_coefficient(n, a1, a2).unwrap();
        worst2 = worst2.max(rel(c(A2000), d2([2, 0, 0, 0], 0.5)));
        worst2 = worst2.max(rel(c(A1100), d2([1, 1, 0, 0], 1.0)));
        worst4 = worst4.max(rel(c(A4000), d4([4, 0, 0, 0], 1.0 / 24.0)));
        worst4 = worst4.max(rel(c(A3100), d4([3, 1, 0, 0], 1.0 / 6.0)));
        worst4 = worst4.max(rel(c(A2200), d4([2, 2, 0, 0], 0.25)));
        worst4 = worst4.max(rel(c(A2020), d4([2, 0, 2, 0], 0.25)));
        worst4 = worst4.max(rel(c(A0220), d4([0, 2, 2, 0], 0.25)));
        worst4 = worst4.max(rel(c(A1120), d4([1, 1, 2, 0], 0.5)));
        worst4 = worst4.max(rel(c(A1111), d4([1, 1, 1, 1], 1.0)));

        // projected-kernel coefficients
        let p11 = |z: &[f64]| {
            oracle::pair_average_projected(a1, a2, [z[0], z[2]], [z[1], z[3]], 0, 0, false, 512)
        };
        let p12 = |z: &[f64]| {
            oracle::pair_average_projected(a1, a2, [z[0], z[2]], [z[1], z[3]], 0, 1, false, 512)
        };
        let dp11 = |orders: [usize; 4], norm: f64| {
            norm * oracle::fd_mixed_partial_richardson(&p11, &[0.0; 4], &orders, 3e-3)
        };
        let dp12 = |orders: [usize; 4], norm: f64| {
            norm * oracle::fd_mixed_partial_richardson(&p12, &[0.0; 4], &orders, 3e-3)
        };
        worst2 = worst2.max(rel(c(C1), -p11(&[0.0; 4])));
        worst2 = worst2.max(rel(c(C2), -d2([1, 1, 0, 0], 1.0)));
        worst2 = worst2.max(rel(c(C3), dp11([2, 0, 0, 0], 0.5)));
        worst2 = worst2.max(rel(c(C4), dp11([1, 1, 0, 0], 1.0)));
        worst2 = worst2.max(rel(c(C5), dp11([0, 2, 0, 0], 0.5)));
        worst2 = worst2.max(rel(c(C6), dp11([0, 0, 2, 0], 0.5)));
        worst2 = worst2.max(rel(c(C7), dp11([0, 0, 1, 1], 1.0)));
        worst2 = worst2.max(rel(c(C8), dp11([0, 0, 0, 2], 0.5)));
        worst2 = worst2.max(rel(c(C9), dp12([1, 0, 1, 0], 1.0)));
        worst2 = worst2.max(rel(c(C10), dp12([1, 0, 0, 1], 1.0)));
        worst2 = worst2.max(rel(c(C11), dp12([0, 1, 1, 0], 1.0)));
        worst2 = worst2.max(rel(c(C12), dp12([0, 1, 0, 1], 1.0)));

        // C13 from the pure-vertical fourth derivative of the two-body
        // partial-chart average, with C1 already validated above
        let m = MassConfig::new(1.0, vec![1.0, 1.0], 1e-3);
        let lam = m.lambdas_from_axes(&[a1, a2]);
        let q4 =
            directional_quartic(&m, &lam, &[0.0, 0.0, 0.0, 0.0, 0.2, 0.0], 96) / 0.2f64.powi(4);
        let cbar4 = (1.0 / lam[0] + 1.0 / lam[1]).powi(2);
        let c13_oracle =
            (q4 / (m.m_bar[0] * m.m_bar[1]) - c(C1) / (8.0 * lam[0] * lam[1])) / cbar4;
        worst4 = worst4.max(rel(c(C13), c13_oracle));
    }

    // C14 per pair by a two-mass-configuration solve on an N = 3 system
    let axes = [1.0, 3.0, 9.0];
    for (pair, got) in c14_solve(&axes) {
        let claimed =
            secular::expansion_coefficient(C14, axes[pair.0], axes[pair.1]).unwrap();
        worst4 = worst4.max(rel(got, claimed));
    }

    (
        worst2 <= 1e-7 && worst4 <= 1e-5,
        format!("2nd-order worst {worst2:.2e} (<=1e-7), 4th-order worst {worst4:.2e} (<=1e-5)"),
    )
}

fn directional_quartic(masses: &MassConfig, lam: &[f64], z: &[f64], grid: usize) -> f64 {
    let n = masses.n();
    let f = |t: &[f64]| {
        let zt: Vec<f64> = z.iter().map(|v| v * t[0]).collect();
        let st = SecularState::Partial(deprit::DepritPartial {
            lam: lam.to_vec(),
            lam_angle: vec![0.0; n],
            eta: zt[0..n].to_vec(),
            xi: zt[n..2 * n].to_vec(),
            p: zt[2 * n..3 * n - 1].to_vec(),
            q: zt[3 * n - 1..4 * n - 2].to_vec(),
            big_p: 0.0,
            big_q: 0.0,
        });
        secular::secular_average_fixed_grid(masses, &st, grid, 0.0).unwrap()
    };
    oracle::fd_mixed_partial_richardson2(&f, &[0.0], &[4], 0.5) / 24.0
}

/// As above with a third Richardson level, for the hypersensitive solves.
fn directional_quartic_sharp(masses: &MassConfig, lam: &[f64], z: &[f64], grid: usize) -> f64 {
    let n = masses.n();
    let f = |t: &[f64]| {
        let zt: Vec<f64> = z.iter().map(|v| v * t[0]).collect();
        let st = SecularState::Partial(deprit::DepritPartial {
            lam: lam.to_vec(),
            lam_angle: vec![0.0; n],
            eta: zt[0..n].to_vec(),
            xi: zt[n..2 * n].to_vec(),
            p: zt[2 * n..3 * n - 1].to_vec(),
            q: zt[3 * n - 1..4 * n - 2].to_vec(),
            big_p: 0.0,
            big_q: 0.0,
        });
        secular::secular_average_fixed_grid(masses, &st, grid, 0.0).unwrap()
    };
    oracle::fd_mixed_partial_richardson3(&f, &[0.0], &[4], 0.6) / 24.0
}

/// Solve for the two pair-values of the antisymmetric vertical weight
/// from the quartic FD residual under two mass configurations.
fn c14_solve(axes: &[f64; 3]) -> Vec<((usize, usize), f64)> {
    // mass configurations chosen for the conditioning of the 2×2 solve
    // (their pair-weight ratios differ by a factor ≈ 20)
    let z = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.2];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for m_vec in [vec![1.0, 0.3, 2.0], vec![0.4, 2.5, 1.0]] {
        let m = MassConfig::new(1.0, m_vec, 1e-3);
        let lam = m.lambdas_from_axes(axes);
        let fd = directional_quartic_sharp(&m, &lam, &z, 128);
        let full = secular::spatial_quartic_value(&m, &lam, &z).unwrap();
        let op = secular::vertical_operator(&lam);
        let mut coef = [0.0f64; 2];
        let mut c14_term = 0.0;
        for (slot, (i, j)) in [(0usize, (0usize, 2usize)), (1, (1, 2))] {
            let lij: Vec<f64> = (0..2).map(|k| op.ell[(j, k)] - op.ell[(i, k)]).collect();
            let d = lij[0] * lij[1] * (z[6] * z[9] - z[7] * z[8]);
            let w = m.m_bar[i] * m.m_bar[j] * d * d;
            coef[slot] = w;
            c14_term += w
                * secular::expansion_coefficient(CoefficientName::C14, axes[i], axes[j])
                    .unwrap();
        }
        rows.push(coef);
        rhs.push(fd - (full - c14_term));
    }
    let det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
    let x0 = (rhs[0] * rows[1][1] - rows[0][1] * rhs[1]) / det;
    let x1 = (rows[0][0] * rhs[1] - rhs[0] * rows[1][0]) / det;
    vec![((0, 2), x0), ((1, 2), x1)]
}

// ---------------------------------------------------------------- 3
fn symplecticity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_dp: f64 = 0.0;
    let tb = kepler::TwoBodyMasses::new(1.0, 1.0);
    for _ in 0..10 {
        let point = [
            rng.gen_range(0.8..1.6),
            rng.gen_range(0.0..6.0),
            rng.gen_range(-0.15..0.15),
            rng.gen_range(-0.15..0.15),
        ];
        let map = |z: &[f64]| -> Option<Vec<f64>> {
            let st = PoincarePair::new(z[0], z[1], z[2], z[3]);
            let (y, x) = kepler::dp_forward(&tb, &st).ok()?;
            Some(vec![y[0], x[0], y[1], x[1]])
        };
        worst_dp = worst_dp.max(deprit::symplectic_defect(map, &point, 1e-6));
    }

    let n = 3;
    let masses = MassConfig::new(1.0, vec![1.0; n], 1e-3);
    let mut worst_aa: f64 = 0.0;
    let mut worst_reg: f64 = 0.0;
    let mut worst_pr: f64 = 0.0;
    for k in 0..10 {
        let st = random_interior_state(n, 1000 + k);
        let point = flat::action_angle(&st);
        let map = |z: &[f64]| -> Option<Vec<f64>> {
            let s = flat::unflatten_action_angle(z, n);
            deprit::deprit_forward(&masses, &s).ok().map(|c| flat::cartesian(&c))
        };
        worst_aa = worst_aa.max(deprit::symplectic_defect(map, &point, 1e-7));

        let reg = deprit::regularize(&st);
        let point = flat::regularized(&reg);
        let map = |z: &[f64]| -> Option<Vec<f64>> {
            let s = flat::unflatten_regularized(z, n);
            deprit::regularized_forward(&masses, &s).ok().map(|c| flat::cartesian(&c))
        };
        worst_reg = worst_reg.max(deprit::symplectic_defect(map, &point, 1e-7));

        let pr = deprit::regularized_to_partial(&reg);
        let point = flat::partial(&pr);
        let map = |z: &[f64]| -> Option<Vec<f64>> {
            let s = flat::unflatten_partial(z, n);
            deprit::partial_forward(&masses, &s).ok().map(|c| flat::cartesian(&c))
        };
        worst_pr = worst_pr.max(deprit::symplectic_defect(map, &point, 1e-7));
    }
    let worst = worst_dp.max(worst_aa).max(worst_reg).max(worst_pr);
    (
        worst <= 1e-5,
        format!(
            "defects: dp {worst_dp:.2e}, action-angle {worst_aa:.2e}, full {worst_reg:.2e}, partial {worst_pr:.2e} (<=1e-5)"
        ),
    )
}

fn random_interior_state(n: usize, seed: u64) -> deprit::DepritActionAngle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64 + rng.gen_range(0.0..0.1)).collect();
    let gamma: Vec<f64> = l.iter().map(|li| li * rng.gen_range(0.95..0.985)).collect();
    let mut psi = Vec::new();
    let mut prev = gamma[0];
    for g in gamma.iter().take(n).skip(1) {
        let hi = prev + g;
        let lo = (prev - g).abs();
        let v = lo + rng.gen_range(0.93..0.97) * (hi - lo);
        psi.push(v);
        prev = v;
    }
    psi.push(prev * rng.gen_range(0.88..0.95));
    deprit::DepritActionAngle {
        l,
        gamma,
        psi,
        ell: (0..n).map(|_| rng.gen_range(0.0..kepler::TAU)).collect(),
        gamma_angle: (0..n).map(|_| rng.gen_range(0.0..kepler::TAU)).collect(),
        psi_angle: (0..n).map(|_| rng.gen_range(0.0..kepler::TAU)).collect(),
    }
}

// ---------------------------------------------------------------- 4
fn plane_eigen_asymptotics() -> (bool, String) {
    let n = 3;
    let masses = MassConfig::new(1.0, vec![1.0; n], 1e-5);
    // leading magnitudes with â_i = 1: slot i carries δ^((3(i+1)−5)/2)
    // for i ≥ 1 and δ⁰ for the innermost slot
    let leading = |delta: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let tb = masses.two_body(i);
                let partner = if i == 0 { 1 } else { i - 1 };
                let base = 0.75 * masses.m_bar[i] * masses.m_bar[partner]
                    / (tb.m_tilde * tb.m_hat.sqrt());
                let exp = if i == 0 { 0.0 } else { (3.0 * (i + 1) as f64 - 5.0) / 2.0 };
                base * delta.powf(exp)
            })
            .collect()
    };
    let mut prev_err = vec![f64::INFINITY; n];
    let mut monotone = true;
    let mut ratio_at_start = Vec::new();
    let mut delta = 0.05f64;
    for step in 0..5 {
        let axes: Vec<f64> = (0..n).map(|i| delta.powi((n - 1 - i) as i32)).collect();
        let lam = masses.lambdas_from_axes(&axes);
        let f = secular::plane_quadratic_matrix(&masses, &lam).unwrap();
        let (vals, _) = diagonalize_symmetric(&f).unwrap();
        let lead = leading(delta);
        let mut errs = Vec::new();
        for i in 0..n {
            // ascending order puts the strongest (most negative) first
            let ratio = -vals[i] / lead[i];
            if step == 0 {
                ratio_at_start.push(ratio);
            }
            errs.push((ratio - 1.0).abs());
        }
        if step > 0 {
            for i in 0..n {
                if errs[i] > prev_err[i] * 1.0005 {
                    monotone = false;
                }
            }
        }
        prev_err = errs;
        delta /= 2.0;
    }
    let in_band = ratio_at_start.iter().all(|r| (0.9..=1.1).contains(r));
    (
        in_band && monotone,
        format!(
            "ratios at delta=0.05: [{:.4}, {:.4}, {:.4}] (in [0.9,1.1]), monotone: {monotone}",
            ratio_at_start[0], ratio_at_start[1], ratio_at_start[2]
        ),
    )
}

// ---------------------------------------------------------------- 5
fn plane_torsion_det() -> (bool, String) {
    let masses = MassConfig::new(1.0, vec![1.0, 1.0], 1e-5);
    let delta = 0.02;
    let axes = [delta, 1.0];
    let lam = masses.lambdas_from_axes(&axes);
    let f = secular::plane_quadratic_matrix(&masses, &lam).unwrap();
    let (_, u) = diagonalize_symmetric(&f).unwrap();
    let tensors = secular::quartic_tensors(&masses, &lam).unwrap();
    let (q, r) = rotate_tensors(&tensors, &u);
    let a = torsion_matrix(&q, &r);
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let tb1 = masses.two_body(0);
    let tb2 = masses.two_body(1);
    let predicted = -117.0 / 16.0
        * (masses.m_bar[0] * masses.m_bar[1]).powi(2)
        / (tb1.m_tilde.powi(2) * tb2.m_tilde.powi(2) * tb1.m_hat * tb2.m_hat)
        * delta.powi(3);
    let ratio = det / predicted;
    (
        (ratio - 1.0).abs() <= 0.05,
        format!("det A / leading = {ratio:.4} (within 5% of 1)"),
    )
}

// ---------------------------------------------------------------- 6
fn spatial_torsion_n2() -> (bool, String) {
    let masses = MassConfig::new(1.0, vec![1.0, 1.0], 1e-6);
    let axes = [1.0, 100.0];
    let lam = masses.lambdas_from_axes(&axes);
    let forms = secular::spatial_quadratic_forms(&masses, &lam).unwrap();
    let (_, rho_h_star) = diagonalize_symmetric(&forms.q_h_star).unwrap();
    let fpoly = secular::spatial_quartic_poly(&masses, &lam).unwrap();
    // substitute η̄ = ρ*_h η̃, ξ̄ = ρ*_h ξ̃ and reorder into the pair
    // layout (η̃₁, η̃₂, p̄ | ξ̃₁, ξ̃₂, q̄)
    let nv = 6;
    let mut subs = Vec::new();
    for row in 0..2 {
        let mut p = Poly::zero(nv);
        for col in 0..2 {
            p.add_term(unit_key(nv, col), rho_h_star[(row, col)]);
        }
        subs.push(p);
    }
    for row in 0..2 {
        let mut p = Poly::zero(nv);
        for col in 0..2 {
            p.add_term(unit_key(nv, 3 + col), rho_h_star[(row, col)]);
        }
        subs.push(p);
    }
    subs.push(Poly::var(nv, 2));
    subs.push(Poly::var(nv, 5));
    let rotated = fpoly.substitute(&subs, 4);
    let a = birkhoff_average(&rotated).unwrap();

    let unit = masses.m_bar[0] * masses.m_bar[1] / axes[1] * (axes[0] / axes[1]).powi(2);
    let (l1, l2) = (lam[0], lam[1]);
    let expect = [
        [3.0 / (4.0 * l1 * l1), -9.0 / (4.0 * l1 * l2), 3.0 / (l1 * l1)],
        [0.0, -3.0 / (l2 * l2), 9.0 / (4.0 * l1 * l2)],
        [0.0, 0.0, -3.0 / (4.0 * l1 * l1)],
    ];
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in i..3 {
            let e = expect[i][j] * unit;
            worst = worst.max((a[(i, j)] - e).abs() / e.abs());
        }
    }
    let det = a.determinant();
    let det_expect = -27.0 / (16.0 * l1.powi(4) * l2 * l2) * unit.powi(3);
    let det_ratio = det / det_expect;
    // the genuine subleading corrections at this separation scale like
    // √(a₁/a₂) (e.g. the vertical diagonal carries 1 + 3Λ₁/Λ₂); report
    // how far a four-fold separation increase moves the ratios so a
    // failure at the pinned separation is distinguishable from a defect
    let a4 = spatial_birkhoff_matrix(&MassConfig::new(1.0, vec![1.0, 1.0], 1e-6), &[1.0, 400.0]);
    let lam4 = masses.lambdas_from_axes(&[1.0, 400.0]);
    let unit4 = masses.m_bar[0] * masses.m_bar[1] / 400.0 * (1.0f64 / 400.0).powi(2);
    let det4_expect =
        -27.0 / (16.0 * lam4[0].powi(4) * lam4[1] * lam4[1]) * unit4.powi(3);
    let det4_ratio = a4.determinant() / det4_expect;
    (
        worst <= 0.10 && (det_ratio - 1.0).abs() <= 0.15,
        format!(
            "entry worst rel {worst:.3} (<=0.10), det ratio {det_ratio:.3} (within 15%); at separation 400 the det ratio is {det4_ratio:.3} (converging like sqrt(a1/a2))"
        ),
    )
}

/// Entry/determinant agreement with the leading two-body matrix at a
/// list of separations: returns (worst entry rel. deviation, det ratio)
/// per separation.  The deviations shrink like √(a₁/a₂).
pub fn spatial_torsion_study(separations: &[f64]) -> Vec<(f64, f64)> {
    separations
        .iter()
        .map(|&a2| {
            let masses = MassConfig::new(1.0, vec![1.0, 1.0], 1e-6);
            let a = spatial_birkhoff_matrix(&masses, &[1.0, a2]);
            let lam = masses.lambdas_from_axes(&[1.0, a2]);
            let unit = masses.m_bar[0] * masses.m_bar[1] / a2 * (1.0 / a2).powi(2);
            let (l1, l2) = (lam[0], lam[1]);
            let expect = [
                [3.0 / (4.0 * l1 * l1), -9.0 / (4.0 * l1 * l2), 3.0 / (l1 * l1)],
                [0.0, -3.0 / (l2 * l2), 9.0 / (4.0 * l1 * l2)],
                [0.0, 0.0, -3.0 / (4.0 * l1 * l1)],
            ];
            let mut worst: f64 = 0.0;
            for i in 0..3 {
                for j in i..3 {
                    let e = expect[i][j] * unit;
                    worst = worst.max((a[(i, j)] - e).abs() / e.abs());
                }
            }
            let det_expect = -27.0 / (16.0 * l1.powi(4) * l2 * l2) * unit.powi(3);
            (worst, a.determinant() / det_expect)
        })
        .collect()
}

/// The 3×3 spatial Birkhoff matrix of the two-body system at the given
/// axes (diagonalized quadratic modes, angular-averaged quartic).
fn spatial_birkhoff_matrix(masses: &MassConfig, axes: &[f64; 2]) -> DMatrix<f64> {
    let lam = masses.lambdas_from_axes(axes);
    let forms = secular::spatial_quadratic_forms(masses, &lam).unwrap();
    let (_, rho_h_star) = diagonalize_symmetric(&forms.q_h_star).unwrap();
    let fpoly = secular::spatial_quartic_poly(masses, &lam).unwrap();
    let nv = 6;
    let mut subs = Vec::new();
    for row in 0..2 {
        let mut p = Poly::zero(nv);
        for col in 0..2 {
            p.add_term(unit_key(nv, col), rho_h_star[(row, col)]);
        }
        subs.push(p);
    }
    for row in 0..2 {
        let mut p = Poly::zero(nv);
        for col in 0..2 {
            p.add_term(unit_key(nv, 3 + col), rho_h_star[(row, col)]);
        }
        subs.push(p);
    }
    subs.push(Poly::var(nv, 2));
    subs.push(Poly::var(nv, 5));
    birkhoff_average(&fpoly.substitute(&subs, 4)).unwrap()
}

fn unit_key(nv: usize, i: usize) -> Vec<u8> {
    let mut k = vec![0u8; nv];
    k[i] = 1;
    k
}

// ---------------------------------------------------------------- 7
fn herman_and_trace() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_h: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    for case in 0..20 {
        let n = [2usize, 3, 4][case % 3];
        let mut axes = Vec::new();
        let mut a = rng.gen_range(0.8..1.2);
        for _ in 0..n {
            axes.push(a);
            a *= rng.gen_range(2.2..3.5);
        }
        let m_bar: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let masses = MassConfig::new(1.0, m_bar, 1e-4);
        let lam = masses.lambdas_from_axes(&axes);
        let forms = secular::spatial_quadratic_forms(&masses, &lam).unwrap();
        let (s, _) = diagonalize_symmetric(&forms.q_h_star).unwrap();
        let (z, _) = diagonalize_symmetric(&forms.g_v_star).unwrap();
        worst_h = worst_h.max(herman_residual(&s, &z));
        let tr_g: f64 = (0..n - 1).map(|i| forms.g_v_star[(i, i)]).sum();
        let tr_f: f64 = (0..n).map(|i| forms.f_v[(i, i)]).sum();
        worst_t = worst_t.max((tr_g - tr_f).abs() / forms.f_v.amax());
    }
    (
        worst_h <= 1e-11 && worst_t <= 1e-12,
        format!("herman worst {worst_h:.2e} (<=1e-11), trace worst {worst_t:.2e} (<=1e-12)"),
    )
}

// ---------------------------------------------------------------- 8
fn four_nonresonance() -> (bool, String) {
    let masses = MassConfig::new(1.0, vec![1.0, 1.0, 1.0], 1e-5);
    let delta = 0.05f64;
    let axes = [delta * delta, delta, 1.0];
    let lam = masses.lambdas_from_axes(&axes);
    let f = secular::plane_quadratic_matrix(&masses, &lam).unwrap();
    let (omega, _) = diagonalize_symmetric(&f).unwrap();
    let scale = omega.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let (min_plane, _) = check_nonresonance(&omega, 4);

    let forms = secular::spatial_quadratic_forms(&masses, &lam).unwrap();
    let (s, _) = diagonalize_symmetric(&forms.q_h_star).unwrap();
    let (z, _) = diagonalize_symmetric(&forms.g_v_star).unwrap();
    let mut spectrum = s.clone();
    spectrum.extend_from_slice(&z);
    let sscale = spectrum.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let (min_spatial, _) = check_nonresonance(&spectrum, 4);
    let herman = herman_residual(&s, &z);
    let ok = min_plane / scale > 1e-6 && min_spatial / sscale > 1e-6 && herman <= 1e-11;
    (
        ok,
        format!(
            "plane min4/scale {:.2e}, spatial min4/scale {:.2e} (>1e-6), herman (order 5) {herman:.2e} (<=1e-11)",
            min_plane / scale,
            min_spatial / sscale
        ),
    )
}

// ---------------------------------------------------------------- 9
fn torsion_route_equivalence() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for case in 0..5 {
        let n = [2usize, 3, 2, 3, 4][case];
        let mut axes = Vec::new();
        let mut a = 1.0;
        for _ in 0..n {
            axes.push(a);
            a *= rng.gen_range(2.5..4.0);
        }
        let m_bar: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let masses = MassConfig::new(1.0, m_bar, 1e-4);
        let lam = masses.lambdas_from_axes(&axes);
        let f = secular::plane_quadratic_matrix(&masses, &lam).unwrap();
        let (_, u) = diagonalize_symmetric(&f).unwrap();
        let tensors = secular::quartic_tensors(&masses, &lam).unwrap();
        let (q, r) = rotate_tensors(&tensors, &u);
        let a1 = torsion_matrix(&q, &r);

        let nv = 2 * n;
        let mut poly = Poly::zero(nv);
        for (&[i, j, k, l], &v) in &tensors.q {
            poly.add_term(multi_key(nv, &[i, j, k, l]), v);
            poly.add_term(multi_key(nv, &[n + i, n + j, n + k, n + l]), v);
        }
        for (&[i, j, k, l], &v) in &tensors.r {
            poly.add_term(multi_key(nv, &[i, j, n + k, n + l]), v);
        }
        let mut subs = Vec::new();
        for block in [0usize, n] {
            for row in 0..n {
                let mut p = Poly::zero(nv);
                for col in 0..n {
                    p.add_term(unit_key(nv, block + col), u[(row, col)]);
                }
                subs.push(p);
            }
        }
        let a2 = birkhoff_average(&poly.substitute(&subs, 4)).unwrap();
        worst = worst.max((&a1 - &a2).amax() / a1.amax());
    }
    (worst <= 1e-10, format!("route difference {worst:.2e} (<=1e-10)"))
}

fn multi_key(nv: usize, idx: &[usize]) -> Vec<u8> {
    let mut k = vec![0u8; nv];
    for &i in idx {
        k[i] += 1;
    }
    k
}

// ---------------------------------------------------------------- 10
fn nbody_cross_validation() -> (bool, String) {
    let masses = MassConfig::new(1.0, vec![1.0, 1.0], 1e-5);
    let axes = [1.0, 5.0];
    let lam = masses.lambdas_from_axes(&axes);
    let e = 0.05f64;
    let f = secular::plane_quadratic_matrix(&masses, &lam).unwrap();
    let (omega, u) = diagonalize_symmetric(&f).unwrap();

    // one run per secular eigenmode: starting on a pure mode makes every
    // perihelion circulate at that mode's frequency, which is the clean
    // statement of the eigenfrequency cross-check
    let mut worst_rate: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for mode in 0..2 {
        // scale so the dominant body's eccentricity is ≈ e
        let dom = if u[(0, mode)].abs() >= u[(1, mode)].abs() { 0 } else { 1 };
        let h_dom = lam[dom] * (1.0 - (1.0 - e * e).sqrt());
        let amp = (2.0 * h_dom).sqrt() / u[(dom, mode)].abs();
        let mut y = Vec::new();
        let mut x = Vec::new();
        for i in 0..2 {
            let tb = masses.two_body(i);
            let eta = amp * u[(i, mode)];
            let st = PoincarePair::new(lam[i], 0.4 + 1.9 * i as f64, eta, 0.0);
            let (yi, xi) = kepler::dp_forward(&tb, &st).unwrap();
            y.push(Vector3::new(yi[0], yi[1], 0.0));
            x.push(Vector3::new(xi[0], xi[1], 0.0));
        }
        let state0 = secular::CartesianState { y, x };
        let tb1 = masses.two_body(0);
        let period = 2.0 * std::f64::consts::PI / tb1.mean_motion(lam[0]);
        let t_end = 1000.0 * period;
        let dt = period / 1000.0;
        let traj =
            nbody::integrate(&masses, &state0, t_end, dt, nbody::Method::LeapfrogSplit, 100)
                .unwrap();
        let h0 = nbody::hamiltonian(&masses, &state0);
        let h1 = nbody::hamiltonian(&masses, traj.states.last().unwrap());
        worst_drift = worst_drift.max(((h1 - h0) / h0).abs());

        let (rate, _) =
            nbody::secular_frequency_fit(&masses, &traj, dom, nbody::Element::Perihelion)
                .unwrap();
        let predicted = masses.mu * omega[mode].abs();
        worst_rate = worst_rate.max((rate.abs() - predicted).abs() / predicted);
    }
    (
        worst_rate <= 0.10 && worst_drift <= 1e-9,
        format!(
            "perihelion-rate worst rel {worst_rate:.3} (<=0.10), energy drift {worst_drift:.2e} (<=1e-9)"
        ),
    )
}

// ---------------------------------------------------------------- 11
fn kamcheck_arithmetic_and_mc() -> (bool, String) {
    let mut arithmetic_ok = true;
    {
        let inp = kamcheck::KamInputs {
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
        let rep = kamcheck::kam_constants(&inp);
        let k = (1e8f64).ln();
        let rho = 1.0 / (3.0 * k.powi(4));
        arithmetic_ok &= (rep.k_cut - k).abs() < 1e-12
            && (rep.rho_tilde - rho).abs() < 1e-15
            && (rep.e - 1e-8 / (rho * rho)).abs() < 1e-8 * rep.e.abs()
            && rep.c == 13824.0;
    }
    {
        // log₊ floor branch: γ²/(F M² L) ≤ e ⇒ K = 6/s
        let inp = kamcheck::KamInputs {
            n_bar: 2,
            n_hat: 1,
            f: 1.0,
            m: 2.0,
            m_hat: 4.0,
            n: 0.125,
            n_bar_norm: 1.0,
            n_hat_norm: 1.0,
            rho: 10.0,
            s: 2.0,
            s_bar: 0.5,
            gamma: 1.0,
            gamma_hat: 0.5,
            tau: 2.0,
        };
        let rep = kamcheck::kam_constants(&inp);
        // L = max(0.125, 1/2, 1/4) = 0.5; K = 3; ρ̃ = min(1/(6·27), 1/(24·27), 10)
        let rho = (1.0f64 / (3.0 * 2.0 * 27.0)).min(0.5 / (3.0 * 4.0 * 27.0)).min(10.0);
        // c = max(2¹¹·3, (2/3)·12³) = max(6144, 1152)
        arithmetic_ok &= rep.k_cut == 3.0
            && rep.l == 0.5
            && (rep.rho_tilde - rho).abs() < 1e-18
            && (rep.e - 0.5 / (rho * rho)).abs() < 1e-9 * rep.e
            && rep.c == 6144.0;
    }
    {
        let inp = kamcheck::KamInputs {
            n_bar: 1,
            n_hat: 2,
            f: 1e-12,
            m: 1.0,
            m_hat: 1.0,
            n: 2.0,
            n_bar_norm: 1.0,
            n_hat_norm: 1.0,
            rho: 1e-9,
            s: 6.0,
            s_bar: 0.5,
            gamma: 1.0,
            gamma_hat: 1.0,
            tau: 4.0,
        };
        let rep = kamcheck::kam_constants(&inp);
        arithmetic_ok &= rep.rho_tilde == 1e-9
            && (rep.e - 1e-12 * 2.0 / 1e-18).abs() < 1e-3
            && rep.passes == (rep.ce < 1.0);
    }

    let omega = |i: &[f64]| i.to_vec();
    let a_matrix = |_i: &[f64]| DMatrix::identity(1, 1);
    let map = kamcheck::FrequencyMap {
        n_bar: 1,
        n_hat: 1,
        omega: &omega,
        a_matrix: &a_matrix,
        lo: vec![1.0, 1.0],
        hi: vec![2.0, 2.0],
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
    let g = 0.01;
    let g_hat = 0.005;
    let res =
        kamcheck::resonant_measure_mc(&map, g, g_hat, 3.0, 10, 64_000, 42, &constants).unwrap();
    let mc_ok = res.estimate <= res.measure_bound + 3.0 * res.sigma;

    // deterministic grid oracle over the same box and lattice; coprime
    // grid sizes keep the mesh off the rational resonance lines (a square
    // mesh would sit exactly on the diagonal line and double-count it)
    let mut grid_hits = 0usize;
    let mut grid_total = 0usize;
    let (n1, n2) = (211, 193);
    for i in 0..n1 {
        for j in 0..n2 {
            let point = [
                1.0 + (i as f64 + 0.5) / n1 as f64,
                1.0 + (j as f64 + 0.5) / n2 as f64,
            ];
            let mut resonant = false;
            'kloop: for k1 in -10i32..=10 {
                for k2 in -10i32..=10 {
                    if (k1 == 0 && k2 == 0) || k1.abs() + k2.abs() > 10 {
                        continue;
                    }
                    let dot = point[0] * k1 as f64 + point[1] * k2 as f64;
                    let k1n = (k1.abs() + k2.abs()) as f64;
                    let thresh = if k1 != 0 { g } else { g_hat } / k1n.powi(3);
                    if dot.abs() < thresh {
                        resonant = true;
                        break 'kloop;
                    }
                }
            }
            grid_total += 1;
            if resonant {
                grid_hits += 1;
            }
        }
    }
    let grid_frac = grid_hits as f64 / grid_total as f64;
    let grid_ok = (res.estimate - grid_frac).abs() <= 4.0 * res.sigma + 2e-3;

    (
        arithmetic_ok && mc_ok && grid_ok,
        format!(
            "arithmetic {arithmetic_ok}, mc {:.4} <= bound {:.4} + 3σ, grid oracle {:.4} (Δ {:.1e})",
            res.estimate,
            res.measure_bound,
            grid_frac,
            (res.estimate - grid_frac).abs()
        ),
    )
}

// ---------------------------------------------------------------- 12
fn equilibrium_recentring() -> (bool, String) {
    let masses = MassConfig::new(1.0, vec![1.0, 1.0, 1.0], 1e-3);
    let lam = masses.lambdas_from_axes(&[1.0, 2.8, 7.5]);
    let total: f64 = lam.iter().sum();
    let mut deltas = Vec::new();
    let mut norms = Vec::new();
    let mut residual_ok = true;
    let mut d2 = 0.002 * total;
    for _ in 0..4 {
        let rep = birkhoff::find_secular_equilibrium(&masses, &lam, total - d2, 1e-9).unwrap();
        residual_ok &= rep.residual <= 1e-9;
        deltas.push(d2.sqrt());
        norms.push(rep.z_eq.iter().map(|v| v * v).sum::<f64>().sqrt());
        d2 /= 4.0; // halves δ
    }
    let slope = {
        let lx: Vec<f64> = deltas.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        num / den
    };
    (
        residual_ok && (slope - 1.0).abs() <= 0.2,
        format!("residuals <=1e-9: {residual_ok}, |z_eq| ~ δ^{slope:.3} (slope within 1±0.2)"),
    )
}
