//! The Deprit angular-momentum reduction: the action-angle chart on the
//! domain cut out by the triangle-inequality chain, reconstruction of the
//! individual angular momenta, the rotation-matrix inversion formulas, the
//! Poincaré-style regularized full reduction, and the partial reduction
//! that keeps the secular origin regular.
//!
//! All charts map to heliocentric Cartesian momenta/positions and are
//! exact symplectomorphisms; `symplectic_defect` measures the numerical
//! defect of any of them through a central-difference Jacobian.
//!
//! Node convention: each body's perihelion angle is measured from its
//! mutual node line, and the node lines of consecutive momentum sums
//! oppose each other.  On the fully regular stratum this shows up as an
//! in-plane half-turn for every body beyond the first; the regularized
//! charts carry it inside their reflection factors.

use crate::kepler::{self, delaunay_map_3d, normalize_angle, oriented_angle, KeplerError};
use crate::secular::{CartesianState, MassConfig};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DepritError {
    #[error("triangle inequality degenerate at index {0}")]
    DegenerateTriangle(usize),
    #[error("derived actions leave the admissible chain at index {0}")]
    ChainViolation(usize),
    #[error("node vanished: {0}")]
    NodeDegenerate(&'static str),
    #[error("eccentricity out of (0,1) for body {0}")]
    EccentricityOutOfRange(usize),
    #[error(transparent)]
    Kepler(#[from] KeplerError),
}

/// Action-angle Deprit variables (L, Γ, Ψ, ℓ, γ, ψ), 0-based: `psi[i]`
/// for `i < N−2` are the partial momentum sums |C₁+…+C_{i+2}|,
/// `psi[N−2]` is the total modulus G = |C| and `psi[N−1]` is C_z.
#[derive(Debug, Clone)]
pub struct DepritActionAngle {
    pub l: Vec<f64>,
    pub gamma: Vec<f64>,
    pub psi: Vec<f64>,
    pub ell: Vec<f64>,
    pub gamma_angle: Vec<f64>,
    pub psi_angle: Vec<f64>,
}

impl DepritActionAngle {
    pub fn n_bodies(&self) -> usize {
        self.l.len()
    }

    /// Ψ with the convention Ψ₀ := Γ₁ prepended, so `psi0[i]` is Ψᵢ.
    fn psi_chain(&self) -> Vec<f64> {
        let mut chain = Vec::with_capacity(self.psi.len() + 1);
        chain.push(self.gamma[0]);
        chain.extend_from_slice(&self.psi);
        chain
    }

    /// Strict interior check of the defining inequality chain; negated
    /// comparisons double as NaN traps.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), DepritError> {
        let n = self.n_bodies();
        assert!(n >= 2, "Deprit variables need at least two bodies");
        assert_eq!(self.gamma.len(), n);
        assert_eq!(self.psi.len(), n);
        for i in 0..n {
            if !(0.0 < self.gamma[i] && self.gamma[i] < self.l[i]) {
                return Err(DepritError::ChainViolation(i));
            }
        }
        let psi = self.psi_chain();
        // |Ψ_{i-1} − Γ_{i+1}| < Ψ_i < Ψ_{i-1} + Γ_{i+1} for 1 ≤ i ≤ N−1
        for i in 1..n {
            let lo = (psi[i - 1] - self.gamma[i]).abs();
            let hi = psi[i - 1] + self.gamma[i];
            if !(lo < psi[i] && psi[i] < hi) {
                return Err(DepritError::DegenerateTriangle(i));
            }
        }
        if !(self.psi[n - 1].abs() < self.psi[n - 2]) {
            return Err(DepritError::DegenerateTriangle(n));
        }
        Ok(())
    }
}

/// Regularized (full reduction) Deprit variables
/// (Λ, λ, η, ξ, p, q, G, g, P, Q), with `p, q` of dimension N−2.
#[derive(Debug, Clone)]
pub struct DepritRegularized {
    pub lam: Vec<f64>,
    pub lam_angle: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub g_mod: f64,
    pub g_angle: f64,
    pub big_p: f64,
    pub big_q: f64,
}

/// Partially reduced, regularized Deprit variables; `p, q` have dimension
/// N−1 and the angular-momentum modulus G is a derived function.
#[derive(Debug, Clone)]
pub struct DepritPartial {
    pub lam: Vec<f64>,
    pub lam_angle: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub big_p: f64,
    pub big_q: f64,
}

/// Per-body rotations carrying each orbital plane to the inertial frame.
#[derive(Debug, Clone)]
pub struct RotationStack {
    pub body: Vec<Matrix3<f64>>,
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn reflect_z() -> Matrix3<f64> {
    Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0)
}

/// `R_z(κ) R_x(i) R_z(−κ)` written directly in the regularized pair
/// `(p, q)` with `c = (1−cos i)/(p²+q²)`: finite on the singular strata.
fn s_matrix(p: f64, q: f64, c: f64) -> Matrix3<f64> {
    let rho = p * p + q * q;
    let s = (c * (2.0 - rho * c)).max(0.0).sqrt();
    Matrix3::new(
        1.0 - q * q * c,
        -p * q * c,
        -q * s,
        -p * q * c,
        1.0 - p * p * c,
        -p * s,
        q * s,
        p * s,
        1.0 - rho * c,
    )
}

struct Triangles {
    r: Vec<f64>,       // r_i, index i-2 for 2 ≤ i ≤ N
    h: Vec<f64>,       // h_i, index i-1 for 1 ≤ i ≤ N
    h_tilde: Vec<f64>, // h̃_i, index i-2 for 2 ≤ i ≤ N−1
}

/// Triangle data of the chain (Ψ₀ := Γ₁ convention).
fn triangles(gamma: &[f64], psi_full: &[f64]) -> Result<Triangles, DepritError> {
    let n = gamma.len();
    let psi = {
        let mut v = Vec::with_capacity(n);
        v.push(gamma[0]);
        v.extend_from_slice(&psi_full[..n - 1]);
        v
    };
    let mut r = Vec::new();
    for i in 2..=n {
        let p2 = psi[i - 2] * psi[i - 2];
        let d = (p2 - (gamma[i - 1] - psi[i - 1]).powi(2))
            * ((gamma[i - 1] + psi[i - 1]).powi(2) - p2);
        if d <= 0.0 {
            return Err(DepritError::DegenerateTriangle(i - 1));
        }
        r.push(d.sqrt() / (2.0 * psi[i - 1]));
    }
    let mut h = vec![(gamma[0].powi(2) + psi[1] * psi[1] - gamma[1] * gamma[1]) / (2.0 * psi[1])];
    for i in 2..=n {
        h.push(
            (gamma[i - 1].powi(2) + psi[i - 1].powi(2) - psi[i - 2].powi(2))
                / (2.0 * psi[i - 1]),
        );
    }
    let mut h_tilde = Vec::new();
    for i in 2..=n.saturating_sub(1) {
        h_tilde.push((psi[i].powi(2) + psi[i - 1].powi(2) - gamma[i].powi(2)) / (2.0 * psi[i]));
    }
    Ok(Triangles { r, h, h_tilde })
}

/// Reconstruct the angular momenta C₁ … C_N from (Γ, Ψ, ψ).
pub fn reconstruct_momenta(state: &DepritActionAngle) -> Result<Vec<Vector3<f64>>, DepritError> {
    state.validate()?;
    let n = state.n_bodies();
    let tri = triangles(&state.gamma, &state.psi)?;
    let g_mod = state.psi[n - 2];
    let c_z = state.psi[n - 1];
    let zeta = state.psi_angle[n - 1];
    let sin_i = (1.0 - (c_z / g_mod).powi(2)).max(0.0).sqrt();
    let (sz, cz) = zeta.sin_cos();
    // top frame: e_z along C, e_x along −(k_z × C)
    let ex = Vector3::new(-cz, -sz, 0.0);
    let ez = Vector3::new(sin_i * sz, -sin_i * cz, c_z / g_mod);
    let ey = ez.cross(&ex);

    let mut frames = vec![(ex, ey, ez); n.max(2)]; // frames[i-2] will hold E_i
    // build E_i downwards: E_i from E_{i+1}, for i = N−1 … 2
    let psi = state.psi_chain();
    for i in (2..n).rev() {
        let (ex1, ey1, ez1) = frames[i - 1];
        let psi_i = state.psi_angle[i - 1]; // ψ_i
        let (sp, cp) = psi_i.sin_cos();
        let rn = tri.r[i - 1]; // r_{i+1}
        let ht = tri.h_tilde[i - 2]; // h̃_i
        let ezi = (-rn * sp * ex1 + rn * cp * ey1 + ht * ez1) / psi[i - 1];
        let exi = ex1 * cp + ey1 * sp;
        let eyi = ezi.cross(&exi);
        frames[i - 2] = (exi, eyi, ezi);
    }

    let mut c = vec![Vector3::zeros(); n];
    for i in 2..=n {
        let (ex, ey, ez) = frames[i - 2];
        let (sp, cp) = state.psi_angle[i - 2].sin_cos(); // ψ_{i-1}
        c[i - 1] = tri.r[i - 2] * sp * ex - tri.r[i - 2] * cp * ey + tri.h[i - 1] * ez;
    }
    {
        let (ex2, ey2, ez2) = frames[0];
        let (sp, cp) = state.psi_angle[0].sin_cos();
        c[0] = -tri.r[0] * sp * ex2 + tri.r[0] * cp * ey2 + tri.h[0] * ez2;
    }
    Ok(c)
}

/// Per-body rotations ℛᵢ of the action-angle chart.
pub fn action_angle_rotations(state: &DepritActionAngle) -> Result<RotationStack, DepritError> {
    state.validate()?;
    let n = state.n_bodies();
    let tri = triangles(&state.gamma, &state.psi)?;
    let psi = state.psi_chain();
    let g_mod = state.psi[n - 2];
    let c_z = state.psi[n - 1];
    let incl = (c_z / g_mod).clamp(-1.0, 1.0).acos();
    let zeta = state.psi_angle[n - 1];
    // R_j factors
    let r_factor = |j: usize| -> Matrix3<f64> {
        if j == n {
            rot_z(zeta) * rot_x(incl)
        } else {
            // cos ĩ_j = h̃_j / Ψ_{j-1}
            let it = (tri.h_tilde[j - 2] / psi[j - 1]).clamp(-1.0, 1.0).acos();
            rot_z(state.psi_angle[j - 1]) * rot_x(it)
        }
    };
    let s_factor = |j: usize| -> Matrix3<f64> {
        let ij = (tri.h[j - 1] / state.gamma[j - 1]).clamp(-1.0, 1.0).acos();
        if j == 1 {
            rot_z(state.psi_angle[0]) * rot_x(ij)
        } else {
            rot_z(state.psi_angle[j - 2]) * reflect_z() * rot_x(ij)
        }
    };
    // ℛᵢ = R_N ⋯ R_{max(i,2)} S_i
    let mut body = Vec::with_capacity(n);
    for i in 1..=n {
        let mut m: Matrix3<f64> = Matrix3::identity();
        for j in (i.max(2)..=n).rev() {
            m *= r_factor(j);
        }
        body.push(m * s_factor(i));
    }
    Ok(RotationStack { body })
}

/// Forward action-angle chart: Deprit variables to Cartesian state.
pub fn deprit_forward(
    masses: &MassConfig,
    state: &DepritActionAngle,
) -> Result<CartesianState, DepritError> {
    let rot = action_angle_rotations(state)?;
    let n = state.n_bodies();
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let tb = masses.two_body(i);
        let (yi, xi) = delaunay_map_3d(
            &tb,
            state.l[i],
            state.gamma[i],
            state.ell[i],
            state.gamma_angle[i],
        )?;
        y.push(rot.body[i] * yi);
        x.push(rot.body[i] * xi);
    }
    Ok(CartesianState { y, x })
}

/// Inverse action-angle chart: Cartesian state to Deprit variables.
pub fn deprit_inverse(
    masses: &MassConfig,
    cart: &CartesianState,
) -> Result<DepritActionAngle, DepritError> {
    let n = cart.x.len();
    assert!(n >= 2);
    let k_z = Vector3::z();
    let k_x = Vector3::x();

    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        c.push(cart.x[i].cross(&cart.y[i]));
    }
    let mut s = Vec::with_capacity(n);
    let mut acc = Vector3::zeros();
    for ci in &c {
        acc += ci;
        s.push(acc);
    }
    let c_tot = s[n - 1];

    // nodes: n₁ = C₂×C₁, nᵢ = Sᵢ×Cᵢ, n̄ = k_z×C
    let mut nodes = vec![Vector3::zeros(); n];
    nodes[0] = c[1].cross(&c[0]);
    for i in 1..n {
        nodes[i] = s[i].cross(&c[i]);
    }
    let nbar = k_z.cross(&c_tot);
    let scale = c_tot.norm();
    if nodes[0].norm() < 1e-14 * scale * scale {
        return Err(DepritError::NodeDegenerate("C1 x C2"));
    }
    for (i, nd) in nodes.iter().enumerate().skip(1) {
        if nd.norm() < 1e-14 * scale * scale {
            return Err(DepritError::NodeDegenerate("S_i x C_{i+1}"));
        }
        let _ = i;
    }
    if nbar.norm() < 1e-14 * scale {
        return Err(DepritError::NodeDegenerate("k_z x C"));
    }

    let mut l = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    let mut ell = Vec::with_capacity(n);
    let mut gamma_angle = Vec::with_capacity(n);
    for i in 0..n {
        let tb = masses.two_body(i);
        let el = kepler::osculating_elements(&tb, cart.y[i].as_slice(), cart.x[i].as_slice())?;
        if !(el.e > 0.0 && el.e < 1.0) {
            return Err(DepritError::EccentricityOutOfRange(i));
        }
        l.push(tb.lambda_of_axis(el.a));
        gamma.push(c[i].norm());
        ell.push(el.mean_anomaly);
        // perihelion direction from the eccentricity vector
        let v = cart.y[i] / masses.m_tilde(i);
        let r = cart.x[i].norm();
        let evec = (v.cross(&c[i]) / masses.m_tilde(i) - tb.m_hat * cart.x[i] / r) / tb.m_hat;
        gamma_angle.push(oriented_angle(&c[i], &nodes[i], &evec));
    }

    let mut psi = Vec::with_capacity(n);
    for si in s.iter().take(n - 1).skip(1) {
        psi.push(si.norm());
    }
    psi.push(c_tot.norm());
    psi.push(c_tot.z);

    let mut psi_angle = Vec::with_capacity(n);
    for i in 0..n.saturating_sub(2) {
        psi_angle.push(oriented_angle(&s[i + 1], &nodes[i + 2], &nodes[i + 1]));
    }
    psi_angle.push(oriented_angle(&c_tot, &nbar, &(-nodes[n - 1])));
    psi_angle.push(oriented_angle(&k_z, &k_x, &nbar));

    Ok(DepritActionAngle { l, gamma, psi, ell, gamma_angle, psi_angle })
}

/// Derived (Γ, Ψ) of the regularized chart, Ψ indexed 1..=N with
/// Ψ_{N−1} = G, Ψ_N = C_z.
fn regularized_actions(state: &DepritRegularized) -> (Vec<f64>, Vec<f64>) {
    let n = state.lam.len();
    let gamma: Vec<f64> = (0..n)
        .map(|i| state.lam[i] - (state.eta[i] * state.eta[i] + state.xi[i] * state.xi[i]) / 2.0)
        .collect();
    let mut psi = Vec::with_capacity(n);
    let mut acc = gamma[0];
    for i in 1..=n.saturating_sub(2) {
        acc += gamma[i];
        let rho: f64 = state.p[..i.min(state.p.len())]
            .iter()
            .zip(&state.q[..i.min(state.q.len())])
            .map(|(p, q)| (p * p + q * q) / 2.0)
            .sum();
        psi.push(acc - rho);
    }
    psi.push(state.g_mod);
    psi.push(state.g_mod - (state.big_p * state.big_p + state.big_q * state.big_q) / 2.0);
    (gamma, psi)
}

// the negated comparisons double as NaN traps
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn check_chain(gamma: &[f64], psi: &[f64]) -> Result<(), DepritError> {
    let n = gamma.len();
    for (i, g) in gamma.iter().enumerate() {
        if !(*g > 0.0) {
            return Err(DepritError::ChainViolation(i));
        }
    }
    let mut prev = gamma[0];
    for i in 1..n {
        let cur = psi[i - 1];
        if !((prev - gamma[i]).abs() <= cur + 1e-12 && cur <= prev + gamma[i] + 1e-12) {
            return Err(DepritError::ChainViolation(i));
        }
        prev = cur;
    }
    if psi[n - 1].abs() > psi[n - 2] {
        return Err(DepritError::ChainViolation(n));
    }
    Ok(())
}

/// Per-body rotations 𝔯₀𝔯ᵢ of the regularized full reduction.
pub fn regularized_rotations(state: &DepritRegularized) -> Result<RotationStack, DepritError> {
    let n = state.lam.len();
    assert!(n >= 2);
    let (gamma, psi) = regularized_actions(state);
    check_chain(&gamma, &psi)?;
    let g_mod = state.g_mod;
    // 𝔯₀ = R_z(ζ) R_x(i) R_z(−ζ) R_z(g); the conjugated block is the
    // S-matrix of (P, Q) with c = 1/(2G)
    let r0 = s_matrix(state.big_p, state.big_q, 1.0 / (2.0 * g_mod)) * rot_z(state.g_angle);

    // Ψ with the Ψ₀ = Γ₁ convention for easy indexing
    let psi0 = {
        let mut v = vec![gamma[0]];
        v.extend_from_slice(&psi);
        v
    };
    let pair = |j: usize| -> (f64, f64) {
        // (p_{j-1}, q_{j-1}) with (p₀, q₀) := (p₁, q₁)
        if j <= 1 {
            (state.p[0], state.q[0])
        } else {
            (state.p[j - 2], state.q[j - 2])
        }
    };
    let s_mat = |j: usize| -> Matrix3<f64> {
        let c = if j == 1 {
            (gamma[1] - gamma[0] + psi0[1]) / (4.0 * gamma[0] * psi0[1])
        } else {
            (psi0[j - 2] - gamma[j - 1] + psi0[j - 1]) / (4.0 * gamma[j - 1] * psi0[j - 1])
        };
        let (p, q) = pair(j);
        s_matrix(p, q, c)
    };
    let s_tilde = |j: usize| -> Matrix3<f64> {
        let c = (gamma[j] + psi0[j] - psi0[j - 1]) / (4.0 * psi0[j] * psi0[j - 1]);
        s_matrix(state.p[j - 1], state.q[j - 1], c)
    };

    let mut body = Vec::with_capacity(n);
    if n == 2 {
        // Jacobi unfolding: no (p, q) pairs; plain x-rotations
        let i1 = ((g_mod * g_mod + gamma[0] * gamma[0] - gamma[1] * gamma[1])
            / (2.0 * g_mod * gamma[0]))
            .clamp(-1.0, 1.0)
            .acos();
        let i2 = ((g_mod * g_mod + gamma[1] * gamma[1] - gamma[0] * gamma[0])
            / (2.0 * g_mod * gamma[1]))
            .clamp(-1.0, 1.0)
            .acos();
        body.push(r0 * rot_x(i1));
        body.push(r0 * reflect_z() * rot_x(i2));
        return Ok(RotationStack { body });
    }

    let it_last = ((g_mod * g_mod + psi0[n - 2] * psi0[n - 2] - gamma[n - 1] * gamma[n - 1])
        / (2.0 * g_mod * psi0[n - 2]))
        .clamp(-1.0, 1.0)
        .acos();
    let i_n = ((gamma[n - 1] * gamma[n - 1] + g_mod * g_mod - psi0[n - 2] * psi0[n - 2])
        / (2.0 * g_mod * gamma[n - 1]))
        .clamp(-1.0, 1.0)
        .acos();

    for i in 1..=n {
        let m = if i == n {
            reflect_z() * rot_x(i_n)
        } else if i == n - 1 {
            rot_x(it_last) * reflect_z() * s_mat(n - 1)
        } else {
            let mut m = rot_x(it_last);
            for j in ((i.max(2))..=(n - 2)).rev() {
                m *= s_tilde(j);
            }
            if i == 1 {
                m * s_mat(1)
            } else {
                m * reflect_z() * s_mat(i)
            }
        };
        body.push(r0 * m);
    }
    Ok(RotationStack { body })
}

/// Forward regularized full-reduction chart.
pub fn regularized_forward(
    masses: &MassConfig,
    state: &DepritRegularized,
) -> Result<CartesianState, DepritError> {
    let rot = regularized_rotations(state)?;
    plane_dp_compose(masses, &state.lam, &state.lam_angle, &state.eta, &state.xi, &rot)
}

/// Derived (Γ, Ψ) of the partially reduced chart; Ψ_{N−1} = G is derived.
fn partial_actions(state: &DepritPartial) -> (Vec<f64>, Vec<f64>) {
    let n = state.lam.len();
    let gamma: Vec<f64> = (0..n)
        .map(|i| state.lam[i] - (state.eta[i] * state.eta[i] + state.xi[i] * state.xi[i]) / 2.0)
        .collect();
    let mut psi = Vec::with_capacity(n);
    let mut acc = gamma[0];
    for i in 1..n {
        acc += gamma[i];
        let rho: f64 = state.p[..i]
            .iter()
            .zip(&state.q[..i])
            .map(|(p, q)| (p * p + q * q) / 2.0)
            .sum();
        psi.push(acc - rho);
    }
    let g = psi[n - 2];
    psi.push(g - (state.big_p * state.big_p + state.big_q * state.big_q) / 2.0);
    (gamma, psi)
}

/// Per-body rotations 𝔯₀^pr 𝔯ᵢ^pr of the partial reduction.
pub fn partial_rotations(state: &DepritPartial) -> Result<RotationStack, DepritError> {
    let n = state.lam.len();
    assert!(n >= 2);
    let (gamma, psi) = partial_actions(state);
    check_chain(&gamma, &psi)?;
    let g_mod = psi[n - 2];
    let r0 = s_matrix(state.big_p, state.big_q, 1.0 / (2.0 * g_mod));

    let psi0 = {
        let mut v = vec![gamma[0]];
        v.extend_from_slice(&psi);
        v
    };
    let pair = |j: usize| -> (f64, f64) {
        if j <= 1 {
            (state.p[0], state.q[0])
        } else {
            (state.p[j - 2], state.q[j - 2])
        }
    };
    let s_mat = |j: usize| -> Matrix3<f64> {
        let c = if j == 1 {
            (gamma[1] - gamma[0] + psi0[1]) / (4.0 * gamma[0] * psi0[1])
        } else {
            (psi0[j - 2] - gamma[j - 1] + psi0[j - 1]) / (4.0 * gamma[j - 1] * psi0[j - 1])
        };
        let (p, q) = pair(j);
        s_matrix(p, q, c)
    };
    let s_tilde = |j: usize| -> Matrix3<f64> {
        let c = (gamma[j] + psi0[j] - psi0[j - 1]) / (4.0 * psi0[j] * psi0[j - 1]);
        s_matrix(state.p[j - 1], state.q[j - 1], c)
    };

    let mut body = Vec::with_capacity(n);
    for i in 1..=n {
        let m = if i == n {
            reflect_z() * s_mat(n)
        } else {
            let mut m: Matrix3<f64> = Matrix3::identity();
            for j in (i.max(2)..=(n - 1)).rev() {
                m *= s_tilde(j);
            }
            if i == 1 {
                m * s_mat(1)
            } else {
                m * reflect_z() * s_mat(i)
            }
        };
        body.push(r0 * m);
    }
    Ok(RotationStack { body })
}

/// Forward partially reduced chart.
pub fn partial_forward(
    masses: &MassConfig,
    state: &DepritPartial,
) -> Result<CartesianState, DepritError> {
    let rot = partial_rotations(state)?;
    plane_dp_compose(masses, &state.lam, &state.lam_angle, &state.eta, &state.xi, &rot)
}

fn plane_dp_compose(
    masses: &MassConfig,
    lam: &[f64],
    lam_angle: &[f64],
    eta: &[f64],
    xi: &[f64],
    rot: &RotationStack,
) -> Result<CartesianState, DepritError> {
    let n = lam.len();
    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let tb = masses.two_body(i);
        let st = kepler::PoincarePair::new(lam[i], lam_angle[i], eta[i], xi[i]);
        let (yi, xi2) = kepler::dp_forward(&tb, &st)?;
        y.push(rot.body[i] * Vector3::new(yi[0], yi[1], 0.0));
        x.push(rot.body[i] * Vector3::new(xi2[0], xi2[1], 0.0));
    }
    Ok(CartesianState { y, x })
}

/// Regularization map Φ_r: action-angle chart to the regularized chart.
pub fn regularize(state: &DepritActionAngle) -> DepritRegularized {
    let n = state.n_bodies();
    let psi = state.psi_chain(); // psi[i] = Ψ_i with Ψ₀ = Γ₁
    // κ_i = Σ_{i ≤ j ≤ N−2} ψ_j, 1 ≤ i ≤ N−2
    let mut kappa = vec![0.0; n.saturating_sub(2)];
    let mut acc = 0.0;
    for i in (1..=n.saturating_sub(2)).rev() {
        acc += state.psi_angle[i - 1];
        kappa[i - 1] = acc;
    }
    let kappa_hat = |i: usize| -> f64 {
        // 1-based body index
        if i == 1 {
            *kappa.first().unwrap_or(&0.0)
        } else if i < n {
            kappa[i - 2]
        } else {
            0.0
        }
    };
    let mut lam = Vec::new();
    let mut lam_angle = Vec::new();
    let mut eta = Vec::new();
    let mut xi = Vec::new();
    for i in 1..=n {
        let h = state.l[i - 1] - state.gamma[i - 1];
        let ang = state.gamma_angle[i - 1] + kappa_hat(i);
        lam.push(state.l[i - 1]);
        lam_angle.push(normalize_angle(state.ell[i - 1] + ang));
        eta.push((2.0 * h).sqrt() * ang.cos());
        xi.push(-(2.0 * h).sqrt() * ang.sin());
    }
    let mut p = Vec::new();
    let mut q = Vec::new();
    for i in 1..=n.saturating_sub(2) {
        let k = if i == 1 {
            state.gamma[0] - psi[1] + state.gamma[1]
        } else {
            psi[i - 1] - psi[i] + state.gamma[i]
        };
        p.push((2.0 * k).sqrt() * kappa[i - 1].cos());
        q.push(-(2.0 * k).sqrt() * kappa[i - 1].sin());
    }
    let g_mod = state.psi[n - 2];
    let c_z = state.psi[n - 1];
    let zeta = state.psi_angle[n - 1];
    DepritRegularized {
        lam,
        lam_angle,
        eta,
        xi,
        p,
        q,
        g_mod,
        g_angle: normalize_angle(state.psi_angle[n - 2] + zeta),
        big_p: (2.0 * (g_mod - c_z)).sqrt() * zeta.cos(),
        big_q: -(2.0 * (g_mod - c_z)).sqrt() * zeta.sin(),
    }
}

/// Inverse charts by composition: Cartesian → action-angle → regularized
/// (and on to the partial variables).  Valid away from the singular
/// strata, where the action-angle inverse reports which node or
/// eccentricity degenerated.
pub fn regularized_inverse(
    masses: &MassConfig,
    cart: &CartesianState,
) -> Result<DepritRegularized, DepritError> {
    Ok(regularize(&deprit_inverse(masses, cart)?))
}

/// Cartesian state to partially reduced variables (composition through
/// the full reduction; same domain restrictions).
pub fn partial_inverse(
    masses: &MassConfig,
    cart: &CartesianState,
) -> Result<DepritPartial, DepritError> {
    Ok(regularized_to_partial(&regularized_inverse(masses, cart)?))
}

/// Inverse of [`partial_to_regularized`]: rotate the secular pairs back
/// by g and fold (G, g) into the (N−1)-th vertical pair.
pub fn regularized_to_partial(reg: &DepritRegularized) -> DepritPartial {
    let n = reg.lam.len();
    let g = reg.g_angle;
    let (sg, cg) = g.sin_cos();
    let unrot = |a: f64, b: f64| (cg * a + sg * b, -sg * a + cg * b);
    let mut pr = DepritPartial {
        lam: reg.lam.clone(),
        lam_angle: reg.lam_angle.iter().map(|l| normalize_angle(l + g)).collect(),
        eta: vec![0.0; n],
        xi: vec![0.0; n],
        p: vec![0.0; n - 1],
        q: vec![0.0; n - 1],
        big_p: reg.big_p,
        big_q: reg.big_q,
    };
    for i in 0..n {
        let (e, x) = unrot(reg.eta[i], reg.xi[i]);
        pr.eta[i] = e;
        pr.xi[i] = x;
    }
    for j in 0..n.saturating_sub(2) {
        let (a, b) = unrot(reg.p[j], reg.q[j]);
        pr.p[j] = a;
        pr.q[j] = b;
    }
    let gamma: Vec<f64> = (0..n)
        .map(|i| pr.lam[i] - (pr.eta[i] * pr.eta[i] + pr.xi[i] * pr.xi[i]) / 2.0)
        .collect();
    let mut psi_nm2 = gamma[..n - 1].iter().sum::<f64>();
    psi_nm2 -= pr.p[..n - 2]
        .iter()
        .zip(&pr.q[..n - 2])
        .map(|(p, q)| (p * p + q * q) / 2.0)
        .sum::<f64>();
    let k = (psi_nm2 + gamma[n - 1] - reg.g_mod).max(0.0);
    pr.p[n - 2] = (2.0 * k).sqrt() * g.cos();
    pr.q[n - 2] = -(2.0 * k).sqrt() * g.sin();
    pr
}

/// Partial-reduction map φ_pr: partially reduced variables to the fully
/// regularized chart (away from the (p̄_{N−1}, q̄_{N−1}) = 0 stratum).
pub fn partial_to_regularized(state: &DepritPartial) -> DepritRegularized {
    let n = state.lam.len();
    let (_, psi) = partial_actions(state);
    let g_mod = psi[n - 2];
    // g = arg(p̄_{N−1}, −q̄_{N−1})
    let g_angle = (-state.q[n - 2]).atan2(state.p[n - 2]);
    let (sg, cg) = g_angle.sin_cos();
    let rot = |a: f64, b: f64| (cg * a - sg * b, sg * a + cg * b);
    let mut eta = Vec::new();
    let mut xi = Vec::new();
    for i in 0..n {
        let (e, x) = rot(state.eta[i], state.xi[i]);
        eta.push(e);
        xi.push(x);
    }
    let mut p = Vec::new();
    let mut q = Vec::new();
    for j in 0..n - 2 {
        let (a, b) = rot(state.p[j], state.q[j]);
        p.push(a);
        q.push(b);
    }
    DepritRegularized {
        lam: state.lam.clone(),
        lam_angle: state.lam_angle.iter().map(|l| normalize_angle(l - g_angle)).collect(),
        eta,
        xi,
        p,
        q,
        g_mod,
        g_angle: normalize_angle(g_angle),
        big_p: state.big_p,
        big_q: state.big_q,
    }
}

/// Max-norm symplectic defect ‖Jᵀ𝕁J − 𝕁‖ of a chart map at `point`, with
/// the central-difference Jacobian taken at per-coordinate step
/// `h · max(|point_i|, 1)`.  Input and output coordinates must both be
/// flattened in canonical pairs (momentum before coordinate).
pub fn symplectic_defect<F>(map: F, point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let dim = point.len();
    assert!(dim.is_multiple_of(2));
    let out0 = match map(point) {
        Some(v) => v,
        None => return f64::INFINITY,
    };
    let odim = out0.len();
    assert!(odim.is_multiple_of(2));
    let mut jac = vec![vec![0.0; dim]; odim];
    for j in 0..dim {
        let step = h * point[j].abs().max(1.0);
        let mut plus = point.to_vec();
        plus[j] += step;
        let mut minus = point.to_vec();
        minus[j] -= step;
        let (fp, fm) = match (map(&plus), map(&minus)) {
            (Some(a), Some(b)) => (a, b),
            _ => return f64::INFINITY,
        };
        for i in 0..odim {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    // J^T O J − I where O, I are the block-diagonal symplectic forms
    let omega = |k: usize, l: usize| -> f64 {
        if k / 2 == l / 2 {
            if k + 1 == l {
                1.0
            } else if l + 1 == k {
                -1.0
            } else {
                0.0
            }
        } else {
            0.0
        }
    };
    let mut defect: f64 = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let mut s = 0.0;
            for k in 0..odim {
                // (J^T O J)_{ab} = Σ_k J_{ka} (O J)_{kb}; O couples 2k↔2k+1
                let oj = if k % 2 == 0 { jac[k + 1][b] } else { -jac[k - 1][b] };
                s += jac[k][a] * oj;
            }
            let target = omega(a, b);
            let d = (s - target).abs();
            if d.is_nan() {
                return f64::INFINITY;
            }
            defect = defect.max(d);
        }
    }
    defect
}

/// Flatten helpers pairing every action with its angle, η with ξ, p with
/// q, P with Q, in the order expected by [`symplectic_defect`].
pub mod flat {
    use super::*;

    pub fn cartesian(cart: &CartesianState) -> Vec<f64> {
        let mut v = Vec::new();
        for i in 0..cart.x.len() {
            for k in 0..3 {
                v.push(cart.y[i][k]);
                v.push(cart.x[i][k]);
            }
        }
        v
    }

    pub fn action_angle(s: &DepritActionAngle) -> Vec<f64> {
        let n = s.n_bodies();
        let mut v = Vec::new();
        for i in 0..n {
            v.push(s.l[i]);
            v.push(s.ell[i]);
        }
        for i in 0..n {
            v.push(s.gamma[i]);
            v.push(s.gamma_angle[i]);
        }
        for i in 0..n {
            v.push(s.psi[i]);
            v.push(s.psi_angle[i]);
        }
        v
    }

    pub fn unflatten_action_angle(v: &[f64], n: usize) -> DepritActionAngle {
        let grab = |k: usize| (v[2 * k], v[2 * k + 1]);
        let mut s = DepritActionAngle {
            l: vec![0.0; n],
            gamma: vec![0.0; n],
            psi: vec![0.0; n],
            ell: vec![0.0; n],
            gamma_angle: vec![0.0; n],
            psi_angle: vec![0.0; n],
        };
        for i in 0..n {
            let (a, b) = grab(i);
            s.l[i] = a;
            s.ell[i] = b;
            let (a, b) = grab(n + i);
            s.gamma[i] = a;
            s.gamma_angle[i] = b;
            let (a, b) = grab(2 * n + i);
            s.psi[i] = a;
            s.psi_angle[i] = b;
        }
        s
    }

    pub fn regularized(s: &DepritRegularized) -> Vec<f64> {
        let n = s.lam.len();
        let mut v = Vec::new();
        for i in 0..n {
            v.push(s.lam[i]);
            v.push(s.lam_angle[i]);
        }
        for i in 0..n {
            v.push(s.eta[i]);
            v.push(s.xi[i]);
        }
        for i in 0..n - 2 {
            v.push(s.p[i]);
            v.push(s.q[i]);
        }
        v.push(s.g_mod);
        v.push(s.g_angle);
        v.push(s.big_p);
        v.push(s.big_q);
        v
    }

    pub fn unflatten_regularized(v: &[f64], n: usize) -> DepritRegularized {
        let mut it = v.iter().copied();
        let mut pair = || (it.next().unwrap(), it.next().unwrap());
        let mut s = DepritRegularized {
            lam: vec![0.0; n],
            lam_angle: vec![0.0; n],
            eta: vec![0.0; n],
            xi: vec![0.0; n],
            p: vec![0.0; n - 2],
            q: vec![0.0; n - 2],
            g_mod: 0.0,
            g_angle: 0.0,
            big_p: 0.0,
            big_q: 0.0,
        };
        for i in 0..n {
            let (a, b) = pair();
            s.lam[i] = a;
            s.lam_angle[i] = b;
        }
        for i in 0..n {
            let (a, b) = pair();
            s.eta[i] = a;
            s.xi[i] = b;
        }
        for i in 0..n - 2 {
            let (a, b) = pair();
            s.p[i] = a;
            s.q[i] = b;
        }
        let (a, b) = pair();
        s.g_mod = a;
        s.g_angle = b;
        let (a, b) = pair();
        s.big_p = a;
        s.big_q = b;
        s
    }

    pub fn partial(s: &DepritPartial) -> Vec<f64> {
        let n = s.lam.len();
        let mut v = Vec::new();
        for i in 0..n {
            v.push(s.lam[i]);
            v.push(s.lam_angle[i]);
        }
        for i in 0..n {
            v.push(s.eta[i]);
            v.push(s.xi[i]);
        }
        for i in 0..n - 1 {
            v.push(s.p[i]);
            v.push(s.q[i]);
        }
        v.push(s.big_p);
        v.push(s.big_q);
        v
    }

    pub fn unflatten_partial(v: &[f64], n: usize) -> DepritPartial {
        let mut it = v.iter().copied();
        let mut pair = || (it.next().unwrap(), it.next().unwrap());
        let mut s = DepritPartial {
            lam: vec![0.0; n],
            lam_angle: vec![0.0; n],
            eta: vec![0.0; n],
            xi: vec![0.0; n],
            p: vec![0.0; n - 1],
            q: vec![0.0; n - 1],
            big_p: 0.0,
            big_q: 0.0,
        };
        for i in 0..n {
            let (a, b) = pair();
            s.lam[i] = a;
            s.lam_angle[i] = b;
        }
        for i in 0..n {
            let (a, b) = pair();
            s.eta[i] = a;
            s.xi[i] = b;
        }
        for i in 0..n - 1 {
            let (a, b) = pair();
            s.p[i] = a;
            s.q[i] = b;
        }
        let (a, b) = pair();
        s.big_p = a;
        s.big_q = b;
        s
    }
}
