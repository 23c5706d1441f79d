//! Independent reference routes used to cross-check the closed-form
//! expansions: bisection root-finding, tensor-product trapezoidal averages
//! of two-body interaction kernels, central-difference derivatives with
//! Richardson extrapolation, Monte-Carlo angular averages, and a brute
//! lattice scan for small divisors.
//!
//! Nothing here shares code with the closed forms it checks; that is the
//! entire point of the module.

use crate::kepler::dp_position_hat;
use crate::poly::Poly;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Plain bisection; assumes `f(lo)·f(hi) ≤ 0`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    assert!(
        flo * f(hi) <= 0.0,
        "bisection bracket does not straddle a root"
    );
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if flo * fm <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// Dimensionless positions of a body on its osculating ellipse at the
/// trapezoid nodes, scaled by the semimajor axis.
fn ring_positions(a: f64, eta_hat: f64, xi_hat: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let lam = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (x, _) = dp_position_hat(lam, eta_hat, xi_hat).expect("chart domain");
            [a * x[0], a * x[1]]
        })
        .collect()
}

/// Kahan-compensated accumulator; the finite-difference stencils divide
/// by tiny step powers, so the n² double sums must not lose digits.
#[derive(Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// `(1/4π²) ∬ dλᵢ dλⱼ / |x̂ᵢ − x̂ⱼ|` on an n×n trapezoid grid, the
/// building block of every secular oracle.  `zi = (η̂ᵢ, ξ̂ᵢ)` etc.
pub fn pair_average_inverse_distance(
    ai: f64,
    aj: f64,
    zi: [f64; 2],
    zj: [f64; 2],
    n: usize,
) -> f64 {
    let pi = ring_positions(ai, zi[0], zi[1], n);
    let pj = ring_positions(aj, zj[0], zj[1], n);
    let mut sum = Kahan::default();
    for p in &pi {
        for q in &pj {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            sum.add(1.0 / (dx * dx + dy * dy).sqrt());
        }
    }
    sum.sum / (n * n) as f64
}

/// `(1/4π²) ∬ x̂ᵢ^{(h)} x̂ⱼ^{(k)} / |x̂ᵢ − x̂ⱼ|³ dλᵢ dλⱼ` on an n×n grid,
/// with `flip_i` negating body i's position (aphelion-started first body).
#[allow(clippy::too_many_arguments)]
pub fn pair_average_projected(
    ai: f64,
    aj: f64,
    zi: [f64; 2],
    zj: [f64; 2],
    h: usize,
    k: usize,
    flip_i: bool,
    n: usize,
) -> f64 {
    let mut pi = ring_positions(ai, zi[0], zi[1], n);
    if flip_i {
        for p in &mut pi {
            p[0] = -p[0];
            p[1] = -p[1];
        }
    }
    let pj = ring_positions(aj, zj[0], zj[1], n);
    let mut sum = Kahan::default();
    for p in &pi {
        for q in &pj {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let d2 = dx * dx + dy * dy;
            sum.add(p[h] * q[k] / (d2 * d2.sqrt()));
        }
    }
    sum.sum / (n * n) as f64
}

/// Central-difference mixed partial of `f` at `x0`, one derivative order
/// per coordinate in `orders` (0 ≤ order ≤ 4), all with step `h`, O(h²).
pub fn fd_mixed_partial<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], orders: &[usize], h: f64) -> f64 {
    // per-direction central stencils of O(h²) accuracy
    fn stencil(order: usize) -> (&'static [f64], &'static [f64]) {
        match order {
            0 => (&[0.0], &[1.0]),
            1 => (&[-1.0, 1.0], &[-0.5, 0.5]),
            2 => (&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0]),
            3 => (&[-2.0, -1.0, 1.0, 2.0], &[-0.5, 1.0, -1.0, 0.5]),
            4 => (&[-2.0, -1.0, 0.0, 1.0, 2.0], &[1.0, -4.0, 6.0, -4.0, 1.0]),
            _ => panic!("unsupported derivative order"),
        }
    }
    let dims: Vec<(usize, &[f64], &[f64])> = orders
        .iter()
        .enumerate()
        .filter(|(_, &o)| o > 0)
        .map(|(i, &o)| {
            let (offs, w) = stencil(o);
            (i, offs, w)
        })
        .collect();
    if dims.is_empty() {
        return f(x0);
    }
    let mut idx = vec![0usize; dims.len()];
    let mut sum = 0.0;
    'outer: loop {
        let mut x = x0.to_vec();
        let mut w = 1.0;
        for (d, &(var, offs, wts)) in dims.iter().enumerate() {
            x[var] += offs[idx[d]] * h;
            w *= wts[idx[d]];
        }
        sum += w * f(&x);
        for d in 0..dims.len() {
            idx[d] += 1;
            if idx[d] < dims[d].1.len() {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    let total: usize = orders.iter().sum();
    sum / h.powi(total as i32)
}

/// One Richardson extrapolation of [`fd_mixed_partial`] (O(h²) → O(h⁴)).
pub fn fd_mixed_partial_richardson<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    orders: &[usize],
    h: f64,
) -> f64 {
    let coarse = fd_mixed_partial(f, x0, orders, h);
    let fine = fd_mixed_partial(f, x0, orders, h / 2.0);
    (4.0 * fine - coarse) / 3.0
}

/// Two Richardson levels (O(h⁶)); used where the acceptance tolerances
/// leave no budget for stencil truncation.
pub fn fd_mixed_partial_richardson2<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    orders: &[usize],
    h: f64,
) -> f64 {
    let r1 = fd_mixed_partial_richardson(f, x0, orders, h);
    let r2 = fd_mixed_partial_richardson(f, x0, orders, h / 2.0);
    (16.0 * r2 - r1) / 15.0
}

/// Three Richardson levels (O(h⁸)).
pub fn fd_mixed_partial_richardson3<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    orders: &[usize],
    h: f64,
) -> f64 {
    let r1 = fd_mixed_partial_richardson2(f, x0, orders, h);
    let r2 = fd_mixed_partial_richardson2(f, x0, orders, h / 2.0);
    (64.0 * r2 - r1) / 63.0
}

/// Monte-Carlo angular average of a polynomial in `(p₁…p_m, q₁…q_m)` over
/// the torus `pᵢ = √(2Jᵢ) cos φᵢ`, `qᵢ = √(2Jᵢ) sin φᵢ`.
pub fn mc_angular_average(poly: &Poly, actions: &[f64], samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let m = actions.len();
    assert_eq!(poly.nvars, 2 * m);
    let mut sum = 0.0;
    let mut x = vec![0.0; 2 * m];
    for _ in 0..samples {
        for i in 0..m {
            let phi: f64 = rng.gen_range(0.0..(2.0 * std::f64::consts::PI));
            let r = (2.0 * actions[i]).sqrt();
            x[i] = r * phi.cos();
            x[m + i] = r * phi.sin();
        }
        sum += poly.eval(&x);
    }
    sum / samples as f64
}

/// Exhaustive scan of `min |Ω·k|` over `0 < |k|₁ ≤ order`, recursively
/// enumerated (independent of the production lattice scan).
pub fn brute_force_min_resonance(omega: &[f64], order: i32) -> (f64, Vec<i32>) {
    fn recurse(
        omega: &[f64],
        budget: i32,
        k: &mut Vec<i32>,
        best: &mut (f64, Vec<i32>),
    ) {
        if k.len() == omega.len() {
            if k.iter().any(|&c| c != 0) {
                let dot: f64 = omega.iter().zip(k.iter()).map(|(o, &c)| o * c as f64).sum();
                if dot.abs() < best.0 {
                    *best = (dot.abs(), k.clone());
                }
            }
            return;
        }
        for c in -budget..=budget {
            k.push(c);
            recurse(omega, budget - c.abs(), k, best);
            k.pop();
        }
    }
    let mut best = (f64::INFINITY, vec![]);
    recurse(omega, order, &mut Vec::new(), &mut best);
    best
}
