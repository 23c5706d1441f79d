//! Closed-form expansion of the doubly-averaged (secular) interaction to
//! order 4 — in plane Poincaré variables and in spatial, partially
//! reduced Deprit variables — together with the tensor-product quadrature
//! oracle that every closed form is checked against.

mod coefficients;
mod spatial;

pub use coefficients::{expansion_coefficient, CoefficientName};
pub use spatial::{
    secular_spectrum, spatial_quadratic_forms, spatial_quartic_poly, spatial_quartic_value,
    vertical_operator, SpatialQuadratic, VarLayout, VerticalOperator,
};

use crate::deprit::{self, DepritPartial, DepritRegularized};
use crate::kepler::{self, PoincarePair, TwoBodyMasses};
use nalgebra::{DMatrix, Matrix3, Vector3};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SecularError {
    #[error("semimajor axes must be strictly increasing")]
    UnorderedAxes,
    #[error("axis ratio {0} outside the admissible range")]
    RatioOutOfRange(f64),
    #[error("close encounter: minimal pair distance below threshold")]
    CloseEncounter,
    #[error(transparent)]
    Chart(#[from] deprit::DepritError),
    #[error(transparent)]
    Kepler(#[from] kepler::KeplerError),
}

/// Heliocentric momenta and positions of the N planets.
#[derive(Debug, Clone)]
pub struct CartesianState {
    pub y: Vec<Vector3<f64>>,
    pub x: Vec<Vector3<f64>>,
}

impl CartesianState {
    pub fn n_bodies(&self) -> usize {
        self.x.len()
    }

    /// Total angular momentum Σ xᵢ × yᵢ.
    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(x, y)| x.cross(y))
            .fold(Vector3::zeros(), |a, b| a + b)
    }
}

/// Star mass, planet masses and the perturbation parameter μ, with the
/// derived reduced masses `m̂ᵢ = m̄₀ + μ m̄ᵢ`, `μ̃ᵢ = m̄₀ m̄ᵢ / m̂ᵢ`.
#[derive(Debug, Clone)]
pub struct MassConfig {
    pub m0_bar: f64,
    pub m_bar: Vec<f64>,
    pub mu: f64,
}

impl MassConfig {
    pub fn new(m0_bar: f64, m_bar: Vec<f64>, mu: f64) -> Self {
        assert!(m0_bar > 0.0 && mu >= 0.0);
        assert!(m_bar.iter().all(|m| *m > 0.0));
        MassConfig { m0_bar, m_bar, mu }
    }

    pub fn n(&self) -> usize {
        self.m_bar.len()
    }

    pub fn m_hat(&self, i: usize) -> f64 {
        self.m0_bar + self.mu * self.m_bar[i]
    }

    pub fn m_tilde(&self, i: usize) -> f64 {
        self.m0_bar * self.m_bar[i] / self.m_hat(i)
    }

    pub fn two_body(&self, i: usize) -> TwoBodyMasses {
        TwoBodyMasses::new(self.m_hat(i), self.m_tilde(i))
    }

    pub fn lambdas_from_axes(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .enumerate()
            .map(|(i, ai)| self.two_body(i).lambda_of_axis(*ai))
            .collect()
    }

    pub fn axes_from_lambdas(&self, lambda: &[f64]) -> Vec<f64> {
        lambda
            .iter()
            .enumerate()
            .map(|(i, l)| self.two_body(i).semimajor_axis(*l))
            .collect()
    }
}

pub(crate) fn check_ordered(a: &[f64]) -> Result<(), SecularError> {
    if a.windows(2).any(|w| w[0] >= w[1]) || a[0] <= 0.0 {
        return Err(SecularError::UnorderedAxes);
    }
    Ok(())
}

/// Zero-order secular term `−Σ_{i<j} m̄ᵢ m̄ⱼ / a_j · b_{1/2,0}(a_i/a_j)`.
pub fn secular_c0(masses: &MassConfig, a: &[f64]) -> Result<f64, SecularError> {
    check_ordered(a)?;
    let mut sum = 0.0;
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            sum -= masses.m_bar[i] * masses.m_bar[j] / a[j]
                * coefficients::b(1, 0, a[i] / a[j]);
        }
    }
    Ok(sum)
}

/// Quadratic secular matrix ℱ(Λ) of the plane problem.
pub fn plane_quadratic_matrix(
    masses: &MassConfig,
    lambda: &[f64],
) -> Result<DMatrix<f64>, SecularError> {
    let n = masses.n();
    assert_eq!(lambda.len(), n);
    let a = masses.axes_from_lambdas(lambda);
    check_ordered(&a)?;
    let mut f = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let (lo, hi) = (a[i.min(k)], a[i.max(k)]);
            diag += masses.m_bar[k] * coefficients::expansion_coefficient(
                CoefficientName::A2000,
                lo,
                hi,
            )?;
        }
        f[(i, i)] = -2.0 * masses.m_bar[i] / lambda[i] * diag;
        for j in (i + 1)..n {
            let v = -masses.m_bar[i] * masses.m_bar[j]
                * coefficients::expansion_coefficient(CoefficientName::A1100, a[i], a[j])?
                / (lambda[i] * lambda[j]).sqrt();
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    Ok(f)
}

/// Sparse quartic tensors of the plane secular expansion; keys are the
/// exact index patterns of the expansion, so `Σ q_{ijkl} ηᵢηⱼηₖηₗ`
/// ranges over stored entries only.  [`QuarticTensors::monomial_q`]
/// symmetrizes over index placement for callers that want the coefficient
/// of a monomial regardless of storage convention.
#[derive(Debug, Clone)]
pub struct QuarticTensors {
    pub n: usize,
    pub q: BTreeMap<[usize; 4], f64>,
    pub r: BTreeMap<[usize; 4], f64>,
}

impl QuarticTensors {
    /// Coefficient of ηᵢηⱼηₖηₗ (or the ξ copy) as a monomial: the sum of
    /// all stored q-entries whose index multiset matches.
    pub fn monomial_q(&self, mut idx: [usize; 4]) -> f64 {
        idx.sort_unstable();
        self.q
            .iter()
            .filter(|(k, _)| {
                let mut kk = **k;
                kk.sort_unstable();
                kk == idx
            })
            .map(|(_, v)| v)
            .sum()
    }

    /// Coefficient of the monomial η_{i}η_{j}ξ_{k}ξ_{l}: stored r-entries
    /// with matching η-pair and ξ-pair multisets.
    pub fn monomial_r(&self, eta: [usize; 2], xi: [usize; 2]) -> f64 {
        let norm = |mut p: [usize; 2]| {
            p.sort_unstable();
            p
        };
        let (e, x) = (norm(eta), norm(xi));
        self.r
            .iter()
            .filter(|(k, _)| norm([k[0], k[1]]) == e && norm([k[2], k[3]]) == x)
            .map(|(_, v)| v)
            .sum()
    }

    /// Evaluate `q·(η⁴+ξ⁴) + r·η²ξ²`.
    pub fn eval(&self, eta: &[f64], xi: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (k, v) in &self.q {
            sum += v * (eta[k[0]] * eta[k[1]] * eta[k[2]] * eta[k[3]]
                + xi[k[0]] * xi[k[1]] * xi[k[2]] * xi[k[3]]);
        }
        for (k, v) in &self.r {
            sum += v * eta[k[0]] * eta[k[1]] * xi[k[2]] * xi[k[3]];
        }
        sum
    }
}

/// Quartic tensors (q, r) of the plane secular expansion.
pub fn quartic_tensors(
    masses: &MassConfig,
    lambda: &[f64],
) -> Result<QuarticTensors, SecularError> {
    use CoefficientName::*;
    let n = masses.n();
    let a = masses.axes_from_lambdas(lambda);
    check_ordered(&a)?;
    let m = &masses.m_bar;
    let coef = coefficients::expansion_coefficient;
    let mut q = BTreeMap::new();
    let mut r = BTreeMap::new();
    for i in 0..n {
        let mut qd = 0.0;
        let mut rd = 0.0;
        for h in 0..n {
            if h == i {
                continue;
            }
            qd += m[h] * coef(A4000, a[i], a[h])?;
            rd += m[h] * coef(A2020, a[i], a[h])?;
        }
        let li2 = lambda[i] * lambda[i];
        q.insert([i, i, i, i], -m[i] / li2 * qd);
        r.insert([i, i, i, i], -m[i] / li2 * rd);
        for l in 0..n {
            if l == i {
                continue;
            }
            let w = m[i] * m[l] / (lambda[i] * (lambda[i] * lambda[l]).sqrt());
            q.insert([i, i, i, l], -w * coef(A3100, a[i], a[l])?);
            r.insert([i, i, i, l], -w * coef(A1120, a[i], a[l])?);
            r.insert([i, l, i, i], -w * coef(A1120, a[i], a[l])?);
            let w2 = m[i] * m[l] / (lambda[i] * lambda[l]);
            r.insert([i, i, l, l], -w2 * coef(A0220, a[l], a[i])?);
            if i < l {
                q.insert([i, i, l, l], -w2 * coef(A2200, a[i], a[l])?);
                r.insert([i, l, i, l], -w2 * coef(A1111, a[i], a[l])?);
            }
        }
    }
    Ok(QuarticTensors { n, q, r })
}

/// Chart in which a secular state is handed to the averaging oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Poincare,
    DepritPartial,
    DepritFull,
}

/// State payload for [`secular_average_numeric`].
#[derive(Debug, Clone)]
pub enum SecularState {
    Poincare(Vec<PoincarePair>),
    Partial(DepritPartial),
    Full(DepritRegularized),
}

struct BodySampler {
    tb: TwoBodyMasses,
    lam: f64,
    eta: f64,
    xi: f64,
    rot: Option<Matrix3<f64>>,
}

impl BodySampler {
    fn momentum_position(&self, angle: f64) -> (Vector3<f64>, Vector3<f64>) {
        let st = PoincarePair::new(self.lam, angle, self.eta, self.xi);
        let (y, x) = kepler::dp_forward(&self.tb, &st).expect("chart domain");
        let (y3, x3) = (Vector3::new(y[0], y[1], 0.0), Vector3::new(x[0], x[1], 0.0));
        match &self.rot {
            Some(r) => (r * y3, r * x3),
            None => (y3, x3),
        }
    }
}

fn samplers(masses: &MassConfig, state: &SecularState) -> Result<Vec<BodySampler>, SecularError> {
    Ok(match state {
        SecularState::Poincare(pairs) => pairs
            .iter()
            .enumerate()
            .map(|(i, p)| BodySampler {
                tb: masses.two_body(i),
                lam: p.lam,
                eta: p.eta,
                xi: p.xi,
                rot: None,
            })
            .collect(),
        SecularState::Partial(st) => {
            let rot = deprit::partial_rotations(st)?;
            (0..st.lam.len())
                .map(|i| BodySampler {
                    tb: masses.two_body(i),
                    lam: st.lam[i],
                    eta: st.eta[i],
                    xi: st.xi[i],
                    rot: Some(rot.body[i]),
                })
                .collect()
        }
        SecularState::Full(st) => {
            let rot = deprit::regularized_rotations(st)?;
            (0..st.lam.len())
                .map(|i| BodySampler {
                    tb: masses.two_body(i),
                    lam: st.lam[i],
                    eta: st.eta[i],
                    xi: st.xi[i],
                    rot: Some(rot.body[i]),
                })
                .collect()
        }
    })
}

/// Tensor-product trapezoid average of `−Σ_{i<j} m̄ᵢ m̄ⱼ / |xᵢ − xⱼ|`
/// over the mean longitudes, refined by grid doubling until the relative
/// change drops below 1e−12 (cap 4096 nodes per angle).
pub fn secular_average_numeric(
    masses: &MassConfig,
    state: &SecularState,
    grid: usize,
) -> Result<f64, SecularError> {
    secular_average_numeric_with_phase(masses, state, grid, 0.0)
}

/// Same, with the trapezoid nodes offset by `phase` (the result does not
/// depend on it; exercised by tests).
pub fn secular_average_numeric_with_phase(
    masses: &MassConfig,
    state: &SecularState,
    grid: usize,
    phase: f64,
) -> Result<f64, SecularError> {
    let bodies = samplers(masses, state)?;
    let mut n = grid.max(32);
    let mut prev = pair_potential_average(masses, &bodies, n, phase)?;
    while n < 4096 {
        n *= 2;
        let next = pair_potential_average(masses, &bodies, n, phase)?;
        if (next - prev).abs() <= 1e-12 * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Non-adaptive average on a fixed n×n grid per pair: smooth in the
/// state, which FD-based callers (oracles, the equilibrium solver) need.
pub fn secular_average_fixed_grid(
    masses: &MassConfig,
    state: &SecularState,
    n: usize,
    phase: f64,
) -> Result<f64, SecularError> {
    let bodies = samplers(masses, state)?;
    pair_potential_average(masses, &bodies, n, phase)
}

fn pair_potential_average(
    masses: &MassConfig,
    bodies: &[BodySampler],
    n: usize,
    phase: f64,
) -> Result<f64, SecularError> {
    let nb = bodies.len();
    let mut rings: Vec<Vec<Vector3<f64>>> = Vec::with_capacity(nb);
    let mut scale: f64 = 0.0;
    for b in bodies {
        let ring: Vec<Vector3<f64>> = (0..n)
            .map(|k| {
                let lam = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + phase;
                b.momentum_position(lam).1
            })
            .collect();
        for p in &ring {
            scale = scale.max(p.norm());
        }
        rings.push(ring);
    }
    let mut total = 0.0;
    for i in 0..nb {
        for j in (i + 1)..nb {
            // compensated sum: downstream finite differences divide by
            // small steps and must not see accumulation noise
            let mut sum = 0.0;
            let mut carry = 0.0;
            let mut min_d = f64::INFINITY;
            for p in &rings[i] {
                for q in &rings[j] {
                    let d = (p - q).norm();
                    min_d = min_d.min(d);
                    let v = 1.0 / d - carry;
                    let t = sum + v;
                    carry = (t - sum) - v;
                    sum = t;
                }
            }
            if min_d < 1e-9 * scale {
                return Err(SecularError::CloseEncounter);
            }
            total -= masses.m_bar[i] * masses.m_bar[j] * sum / (n * n) as f64;
        }
    }
    Ok(total)
}

/// Numeric double average of the secondary (momentum-coupling) part
/// `Σ_{i<j} yᵢ·yⱼ / m̄₀`; vanishes identically because each `yᵢ` has zero
/// mean in its own longitude.
pub fn secular_secondary_mean(
    masses: &MassConfig,
    state: &SecularState,
    grid: usize,
) -> Result<f64, SecularError> {
    let bodies = samplers(masses, state)?;
    let n = grid.max(32);
    let means: Vec<Vector3<f64>> = bodies
        .iter()
        .map(|b| {
            let mut acc = Vector3::zeros();
            for k in 0..n {
                let lam = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                acc += b.momentum_position(lam).0;
            }
            acc / n as f64
        })
        .collect();
    let mut total = 0.0;
    for i in 0..bodies.len() {
        for j in (i + 1)..bodies.len() {
            total += means[i].dot(&means[j]) / masses.m0_bar;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;

    fn gh(a1: f64, a2: f64) -> impl Fn(&[f64]) -> f64 {
        // ĝ(η̂₁, η̂₂, ξ̂₁, ξ̂₂) on a 512² grid
        move |z: &[f64]| {
            oracle::pair_average_inverse_distance(a1, a2, [z[0], z[2]], [z[1], z[3]], 512)
        }
    }

    fn second_order_oracle(a1: f64, a2: f64, orders: [usize; 4], norm: f64) -> f64 {
        let f = gh(a1, a2);
        norm * oracle::fd_mixed_partial_richardson(&f, &[0.0; 4], &orders, 1e-2)
    }

    fn fourth_order_oracle(a1: f64, a2: f64, orders: [usize; 4], norm: f64) -> f64 {
        let f = gh(a1, a2);
        norm * oracle::fd_mixed_partial_richardson2(&f, &[0.0; 4], &orders, 8e-2)
    }

    #[test]
    fn second_order_coefficients_match_oracle() {
        for (a1, a2) in [(1.0, 3.0), (1.0, 8.0), (2.0, 5.0)] {
            let o = second_order_oracle(a1, a2, [2, 0, 0, 0], 0.5);
            let v = coefficients::a2000(a1, a2);
            assert_relative_eq!(v, o, max_relative = 1e-7);
            let o = second_order_oracle(a1, a2, [1, 1, 0, 0], 1.0);
            let v = coefficients::a1100(a1, a2);
            assert_relative_eq!(v, o, max_relative = 1e-7);
        }
        // swapped argument order (analytic continuation through the
        // reflection identity)
        let o = second_order_oracle(3.0, 1.0, [2, 0, 0, 0], 0.5);
        assert_relative_eq!(coefficients::a2000(3.0, 1.0), o, max_relative = 1e-7);
    }

    #[test]
    fn c1_c2_are_the_quadratic_forms() {
        // C₁ = −2 a2000 and C₂ = −a1100, as Laplace-coefficient identities
        for (x, y) in [(1.0, 3.0), (2.0, 5.0), (1.0, 8.0), (3.0, 1.0)] {
            assert_relative_eq!(
                coefficients::c1(x, y),
                -2.0 * coefficients::a2000(x, y),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                coefficients::c2(x, y),
                -coefficients::a1100(x, y),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn fourth_order_coefficients_match_oracle() {
        use coefficients as c;
        for (a1, a2) in [(1.0, 3.0), (1.0, 8.0), (2.0, 5.0)] {
            let checks: [(&str, f64, [usize; 4], f64); 7] = [
                ("a4000", c::a4000(a1, a2), [4, 0, 0, 0], 1.0 / 24.0),
                ("a3100", c::a3100(a1, a2), [3, 1, 0, 0], 1.0 / 6.0),
                ("a2200", c::a2200(a1, a2), [2, 2, 0, 0], 0.25),
                ("a2020", c::a2020(a1, a2), [2, 0, 2, 0], 0.25),
                ("a0220", c::a0220(a1, a2), [0, 2, 2, 0], 0.25),
                ("a1120", c::a3100(a1, a2), [1, 1, 2, 0], 0.5),
                ("a1111", c::a1111(a1, a2), [1, 1, 1, 1], 1.0),
            ];
            for (name, v, orders, norm) in checks {
                let o = fourth_order_oracle(a1, a2, orders, norm);
                assert_relative_eq!(v, o, max_relative = 1e-5, epsilon = 1e-9 * v.abs().max(1e-12));
                let _ = name;
            }
            // swapped-argument continuation spot check
            let o = fourth_order_oracle(a2, a1, [4, 0, 0, 0], 1.0 / 24.0);
            assert_relative_eq!(c::a4000(a2, a1), o, max_relative = 1e-5);
        }
    }

    fn proj_oracle(
        a1: f64,
        a2: f64,
        h: usize,
        k: usize,
        orders: [usize; 4],
        norm: f64,
    ) -> f64 {
        let f = move |z: &[f64]| {
            oracle::pair_average_projected(a1, a2, [z[0], z[2]], [z[1], z[3]], h, k, false, 512)
        };
        norm * oracle::fd_mixed_partial_richardson(&f, &[0.0; 4], &orders, 3e-3)
    }

    #[test]
    fn projected_coefficients_match_oracle() {
        use coefficients as c;
        for (a1, a2) in [(1.0, 3.0), (2.0, 5.0)] {
            // C₁ is minus the unperturbed projected integral
            let base = oracle::pair_average_projected(
                a1, a2, [0.0, 0.0], [0.0, 0.0], 0, 0, false, 512,
            );
            assert_relative_eq!(c::c1(a1, a2), -base, max_relative = 1e-9);

            let checks: [(f64, usize, usize, [usize; 4], f64); 10] = [
                (c::c3(a1, a2), 0, 0, [2, 0, 0, 0], 0.5),
                (c::c4(a1, a2), 0, 0, [1, 1, 0, 0], 1.0),
                (c::c5(a1, a2), 0, 0, [0, 2, 0, 0], 0.5),
                (c::c6(a1, a2), 0, 0, [0, 0, 2, 0], 0.5),
                (c::c7(a1, a2), 0, 0, [0, 0, 1, 1], 1.0),
                (c::c8(a1, a2), 0, 0, [0, 0, 0, 2], 0.5),
                (c::c9(a1, a2), 0, 1, [1, 0, 1, 0], 1.0),
                (c::c10(a1, a2), 0, 1, [1, 0, 0, 1], 1.0),
                (c::c11(a1, a2), 0, 1, [0, 1, 1, 0], 1.0),
                (c::c12(a1, a2), 0, 1, [0, 1, 0, 1], 1.0),
            ];
            for (i, (v, h, k, orders, norm)) in checks.iter().enumerate() {
                let o = proj_oracle(a1, a2, *h, *k, *orders, *norm);
                assert_relative_eq!(
                    *v,
                    o,
                    max_relative = 1e-6,
                    epsilon = 1e-10 * v.abs().max(1e-12)
                );
                let _ = i;
            }
        }
    }

    #[test]
    fn c0_matches_numeric_average() {
        let m = MassConfig::new(1.0, vec![1.0, 1.0], 1e-3);
        let a = [1.0, 10.0];
        let c0 = secular_c0(&m, &a).unwrap();
        let lam = m.lambdas_from_axes(&a);
        let state = SecularState::Poincare(vec![
            PoincarePair::new(lam[0], 0.0, 0.0, 0.0),
            PoincarePair::new(lam[1], 0.0, 0.0, 0.0),
        ]);
        let num = secular_average_numeric(&m, &state, 64).unwrap();
        assert_relative_eq!(c0, num, max_relative = 1e-10);
        // single planet: no pairs, zero
        let m1 = MassConfig::new(1.0, vec![1.0], 0.0);
        assert_eq!(secular_c0(&m1, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn plane_matrix_is_average_hessian() {
        let m = MassConfig::new(1.0, vec![1.0, 2.0], 1e-3);
        let a = [1.0, 4.0];
        let lam = m.lambdas_from_axes(&a);
        let f_mat = plane_quadratic_matrix(&m, &lam).unwrap();
        // Hessian of the numeric average in (η₁, η₂) at the origin; the
        // fixed-grid evaluation keeps the objective smooth under FD
        let avg = |z: &[f64]| {
            let state = SecularState::Poincare(vec![
                PoincarePair::new(lam[0], 0.0, z[0], z[2]),
                PoincarePair::new(lam[1], 0.0, z[1], z[3]),
            ]);
            secular_average_fixed_grid(&m, &state, 256, 0.0).unwrap()
        };
        for (i, j, orders) in [
            (0, 0, [2usize, 0, 0, 0]),
            (0, 1, [1, 1, 0, 0]),
            (1, 1, [0, 2, 0, 0]),
        ] {
            let scale = lam[i].sqrt() * lam[j].sqrt();
            let d = oracle::fd_mixed_partial_richardson(&avg, &[0.0; 4], &orders, 1e-2 * scale.sqrt());
            let expect = f_mat[(i, j)];
            assert_relative_eq!(d, expect, max_relative = 1e-6);
        }
    }

    #[test]
    fn quadratic_matrix_permutation_symmetry() {
        // relabeling the two planets transposes the matrix accordingly
        let m = MassConfig::new(1.0, vec![1.0, 2.0, 1.5], 1e-4);
        let a = [1.0, 2.5, 6.0];
        let lam = m.lambdas_from_axes(&a);
        let f = plane_quadratic_matrix(&m, &lam).unwrap();
        assert_relative_eq!(f[(0, 1)], f[(1, 0)], epsilon = 1e-15);
        assert_relative_eq!(f[(0, 2)], f[(2, 0)], epsilon = 1e-15);
    }

    #[test]
    fn quartic_tensor_identities() {
        let m = MassConfig::new(1.0, vec![1.0, 1.3], 1e-3);
        let a = [1.0, 5.0];
        let lam = m.lambdas_from_axes(&a);
        let t = quartic_tensors(&m, &lam).unwrap();
        // r_iiii = 2 q_iiii
        for i in 0..2 {
            assert_relative_eq!(
                t.r[&[i, i, i, i]],
                2.0 * t.q[&[i, i, i, i]],
                max_relative = 1e-13
            );
        }
        // the a1120 = a3100 identity makes the mixed entries coincide
        assert_relative_eq!(t.q[&[0, 0, 0, 1]], t.r[&[0, 0, 0, 1]], max_relative = 1e-13);
        assert_relative_eq!(t.q[&[0, 0, 0, 1]], t.r[&[0, 1, 0, 0]], max_relative = 1e-13);
    }

    #[test]
    fn quartic_q1122_matches_oracle() {
        let m = MassConfig::new(1.0, vec![1.0, 1.0], 1e-3);
        let a = [1.0, 40.0];
        let lam = m.lambdas_from_axes(&a);
        let t = quartic_tensors(&m, &lam).unwrap();
        // q_{1122} = −m̄₁m̄₂ a2200/(Λ₁Λ₂); oracle via the hatted pair
        // function with the mass/action weights applied afterwards; the
        // widely separated pair leaves little FD headroom, hence 5e−5
        let o = fourth_order_oracle(1.0, 40.0, [2, 2, 0, 0], 0.25);
        let expect = -m.m_bar[0] * m.m_bar[1] * o / (lam[0] * lam[1]);
        assert_relative_eq!(t.q[&[0, 0, 1, 1]], expect, max_relative = 5e-5);
    }

    #[test]
    fn vertical_operator_identities() {
        let lam = [1.0, 1.7, 2.9, 4.1];
        let op = vertical_operator(&lam);
        let n = lam.len();
        // Gram telescoping: ℓℓᵀ = diag(1/Λᵢ) − E/L_N
        let gram = &op.ell * op.ell.transpose();
        let l_n: f64 = lam.iter().sum();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 / lam[i] - 1.0 / l_n } else { -1.0 / l_n };
                assert_relative_eq!(gram[(i, j)], expect, epsilon = 1e-13);
            }
        }
        // c̄ₖ² = 1/Λ_{k+1} + 1/Lₖ
        for k in 1..n {
            let lk: f64 = lam[..k].iter().sum();
            assert_relative_eq!(
                op.c_bar[k - 1] * op.c_bar[k - 1],
                1.0 / lam[k] + 1.0 / lk,
                epsilon = 1e-13
            );
        }
        // N = 2: (ℓ₂ − ℓ₁)p = c̄₁ p
        let op2 = vertical_operator(&lam[..2]);
        assert_relative_eq!(
            op2.ell[(1, 0)] - op2.ell[(0, 0)],
            (1.0 / lam[0] + 1.0 / lam[1]).sqrt(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn spatial_forms_trace_and_eigen() {
        let m = MassConfig::new(1.0, vec![1.0, 1.4, 0.8], 1e-4);
        let a = [1.0, 3.2, 9.0];
        let lam = m.lambdas_from_axes(&a);
        let forms = spatial_quadratic_forms(&m, &lam).unwrap();
        let tr_g: f64 = (0..2).map(|i| forms.g_v_star[(i, i)]).sum();
        let tr_f: f64 = (0..3).map(|i| forms.f_v[(i, i)]).sum();
        let scale = forms.f_v.amax();
        assert!((tr_g - tr_f).abs() <= 1e-12 * scale, "{tr_g} vs {tr_f}");

        let plane = plane_quadratic_matrix(&m, &lam).unwrap();
        let (e1, _) = crate::birkhoff::diagonalize_symmetric(&plane).unwrap();
        let (e2, _) = crate::birkhoff::diagonalize_symmetric(&forms.q_h_star).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn herman_residual_random_systems() {
        let m = MassConfig::new(1.0, vec![1.0, 1.2, 0.9], 1e-4);
        let a = [1.0, 2.9, 7.7];
        let lam = m.lambdas_from_axes(&a);
        let (s, z) = secular_spectrum(&m, &lam).unwrap();
        let res = crate::birkhoff::herman_residual(&s, &z);
        assert!(res <= 1e-11, "Herman residual {res}");
    }

    #[test]
    fn close_encounter_and_unordered_axes_are_rejected() {
        let m = MassConfig::new(1.0, vec![1.0, 1.0], 1e-4);
        // identical circular orbits touch everywhere
        let lam = m.lambdas_from_axes(&[1.0, 1.0 + 1e-12]);
        let st = SecularState::Poincare(vec![
            PoincarePair::new(lam[0], 0.0, 0.0, 0.0),
            PoincarePair::new(lam[1], 0.0, 0.0, 0.0),
        ]);
        assert!(matches!(
            secular_average_numeric(&m, &st, 64),
            Err(SecularError::CloseEncounter)
        ));
        assert!(matches!(
            secular_c0(&m, &[2.0, 1.0]),
            Err(SecularError::UnorderedAxes)
        ));
        assert!(matches!(
            plane_quadratic_matrix(&m, &m.lambdas_from_axes(&[2.0, 1.0])),
            Err(SecularError::UnorderedAxes)
        ));
    }

    #[test]
    fn coefficients_scale_with_axis_homogeneity() {
        // C₀ and every expansion coefficient are homogeneous in the axes:
        // the pair function scales like 1/length
        let m = MassConfig::new(1.0, vec![1.0, 1.0], 1e-4);
        let s = 3.7;
        let c0 = secular_c0(&m, &[1.0, 4.0]).unwrap();
        let c0s = secular_c0(&m, &[s, 4.0 * s]).unwrap();
        assert_relative_eq!(c0s, c0 / s, max_relative = 1e-13);
        for name in [CoefficientName::A2000, CoefficientName::A4000, CoefficientName::C3] {
            let v = expansion_coefficient(name, 1.0, 4.0).unwrap();
            let vs = expansion_coefficient(name, s, 4.0 * s).unwrap();
            assert_relative_eq!(vs, v / s, max_relative = 1e-13);
        }
    }

    #[test]
    fn average_even_and_phase_invariant() {
        let n = 3;
        let m = MassConfig::new(1.0, vec![1.0; n], 1e-4);
        let a = [1.0, 2.6, 6.5];
        let lam = m.lambdas_from_axes(&a);
        let mk = |sign: f64| {
            SecularState::Partial(DepritPartial {
                lam: lam.clone(),
                lam_angle: vec![0.0; n],
                eta: vec![sign * 0.05, sign * -0.03, sign * 0.02],
                xi: vec![sign * 0.01, sign * 0.04, sign * -0.02],
                p: vec![sign * 0.03, sign * -0.02],
                q: vec![sign * 0.01, sign * 0.02],
                big_p: 0.0,
                big_q: 0.0,
            })
        };
        let plus = secular_average_numeric(&m, &mk(1.0), 64).unwrap();
        let minus = secular_average_numeric(&m, &mk(-1.0), 64).unwrap();
        assert_relative_eq!(plus, minus, max_relative = 1e-12);

        let with_phase = secular_average_numeric_with_phase(&m, &mk(1.0), 64, 0.37).unwrap();
        assert_relative_eq!(plus, with_phase, max_relative = 1e-11);

        let sec = secular_secondary_mean(&m, &mk(1.0), 128).unwrap();
        assert!(sec.abs() < 1e-10, "secondary mean {sec}");
    }
}
