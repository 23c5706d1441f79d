//! Two-body machinery: Kepler equation solvers, the plane Delaunay and
//! Delaunay-Poincaré charts (forward and inverse), osculating-element
//! extraction, and exact Keplerian propagation used by the splitting
//! integrator.
//!
//! Angles are normalized to [0, 2π).  Where an angle is undefined on a
//! degenerate stratum (perihelion argument at zero eccentricity) it is set
//! to 0; only the combination λ = ℓ + g is chart-meaningful there.

use nalgebra::Vector3;
use thiserror::Error;

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error, PartialEq)]
pub enum KeplerError {
    #[error("iteration failed to converge (internal error)")]
    NoConvergence,
    #[error("two-body energy {0} is non-negative (hyperbolic or parabolic orbit)")]
    HyperbolicOrbit(f64),
    #[error("state is at collision (x = 0)")]
    CollisionState,
    #[error("angular momentum vanishes (rectilinear orbit)")]
    RectilinearOrbit,
    #[error("retrograde orbit outside the chart domain (0 < G <= L)")]
    RetrogradeOrbit,
    #[error("ascending node undefined (orbit normal parallel to k_z)")]
    NodeUndefined,
}

/// Gravitational mass `m̂` and reduced mass `μ̃` of one star-planet pair.
#[derive(Debug, Clone, Copy)]
pub struct TwoBodyMasses {
    pub m_hat: f64,
    pub m_tilde: f64,
}

impl TwoBodyMasses {
    pub fn new(m_hat: f64, m_tilde: f64) -> Self {
        assert!(m_hat > 0.0 && m_tilde > 0.0);
        TwoBodyMasses { m_hat, m_tilde }
    }

    /// Semimajor axis from the circular action Λ: `a = (Λ/μ̃)²/m̂`.
    pub fn semimajor_axis(&self, lambda: f64) -> f64 {
        (lambda / self.m_tilde).powi(2) / self.m_hat
    }

    /// Circular action from the semimajor axis: `Λ = μ̃ √(m̂ a)`.
    pub fn lambda_of_axis(&self, a: f64) -> f64 {
        self.m_tilde * (self.m_hat * a).sqrt()
    }

    /// Mean motion `n` with `n² a³ = m̂`.
    pub fn mean_motion(&self, lambda: f64) -> f64 {
        self.m_hat.powi(2) * self.m_tilde.powi(3) / lambda.powi(3)
    }
}

/// One body's plane Poincaré variables (Λ, λ, η, ξ).
#[derive(Debug, Clone, Copy)]
pub struct PoincarePair {
    pub lam: f64,
    pub lam_angle: f64,
    pub eta: f64,
    pub xi: f64,
}

impl PoincarePair {
    pub fn new(lam: f64, lam_angle: f64, eta: f64, xi: f64) -> Self {
        assert!(lam > 0.0, "action must be positive");
        assert!(
            (eta * eta + xi * xi) / 2.0 < 2.0 * lam,
            "state outside the e < 1 disk"
        );
        PoincarePair { lam, lam_angle, eta, xi }
    }

    /// Eccentricity `e = √(1 − (1 − (η²+ξ²)/(2Λ))²)`.
    pub fn eccentricity(&self) -> f64 {
        let h = (self.eta * self.eta + self.xi * self.xi) / (2.0 * self.lam);
        (1.0 - (1.0 - h) * (1.0 - h)).max(0.0).sqrt()
    }
}

/// Plane Delaunay variables (L, G, ℓ, g) with 0 < G ≤ L.
#[derive(Debug, Clone, Copy)]
pub struct PlaneDelaunay {
    pub l: f64,
    pub g: f64,
    pub ell: f64,
    pub per: f64,
}

/// Instantaneous Keplerian elements of a Cartesian state.
#[derive(Debug, Clone, Copy)]
pub struct OsculatingElements {
    pub a: f64,
    pub e: f64,
    pub mean_anomaly: f64,
    pub perihelion_arg: f64,
    /// z-component of the angular momentum (spatial states only).
    pub theta: Option<f64>,
    /// Longitude of the ascending node (spatial states only).
    pub node_longitude: Option<f64>,
}

pub fn normalize_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r == TAU { 0.0 } else { r }
}

/// Solve `u − e sin u = ℓ` by Newton from `u₀ = ℓ + e sin ℓ` with a
/// bisection safeguard; the root is returned with `u − ℓ ∈ (−π, π]`.
pub fn solve_kepler(e: f64, ell: f64, tol: f64) -> Result<f64, KeplerError> {
    assert!((0.0..1.0).contains(&e), "eccentricity out of [0,1)");
    assert!(tol > 0.0);
    // Reduce to m ∈ (−π, π]; the root of u − e sin u = m then satisfies
    // |u − m| ≤ e < π and the shift restores the requested branch.
    let m = {
        let r = normalize_angle(ell);
        if r > std::f64::consts::PI { r - TAU } else { r }
    };
    let (mut lo, mut hi) = (m - e, m + e);
    let mut u = m + e * m.sin();
    for _ in 0..64 {
        let f = u - e * u.sin() - m;
        if f.abs() <= tol {
            return Ok(u + (ell - m));
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let du = f / (1.0 - e * u.cos());
        u -= du;
        if !(lo..=hi).contains(&u) {
            u = 0.5 * (lo + hi);
        }
    }
    // A final check: the safeguard makes divergence impossible for e < 1,
    // but tolerate tol at the last iterate before declaring failure.
    if (u - e * u.sin() - m).abs() <= tol.max(1e-14) {
        Ok(u + (ell - m))
    } else {
        Err(KeplerError::NoConvergence)
    }
}

/// Solve the regularized Kepler equation
/// `ζ = √(1 − (η̂²+ξ̂²)/4) (η̂ sin(ζ+λ) + ξ̂ cos(ζ+λ))`
/// in the hatted variables `η̂ = η/√Λ`, `ξ̂ = ξ/√Λ`.
pub fn solve_regularized_kepler_hat(
    eta_hat: f64,
    xi_hat: f64,
    lam_angle: f64,
    tol: f64,
) -> Result<f64, KeplerError> {
    assert!(tol > 0.0);
    let rho = eta_hat * eta_hat + xi_hat * xi_hat;
    if rho == 0.0 {
        return Ok(0.0);
    }
    let c = (1.0 - rho / 4.0).sqrt();
    let e = (c * c * rho).sqrt(); // |c (η̂, ξ̂)| = eccentricity < 1
    let f = |z: f64| z - c * (eta_hat * (z + lam_angle).sin() + xi_hat * (z + lam_angle).cos());
    let df = |z: f64| 1.0 - c * (eta_hat * (z + lam_angle).cos() - xi_hat * (z + lam_angle).sin());
    let (mut lo, mut hi) = (-e - tol, e + tol);
    let mut z = 0.0;
    for _ in 0..64 {
        let fz = f(z);
        if fz.abs() <= tol {
            return Ok(z);
        }
        if fz > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        z -= fz / df(z);
        if !(lo..=hi).contains(&z) {
            z = 0.5 * (lo + hi);
        }
    }
    if f(z).abs() <= tol.max(1e-14) {
        Ok(z)
    } else {
        Err(KeplerError::NoConvergence)
    }
}

/// Regularized Kepler equation in the unscaled Poincaré variables.
pub fn solve_regularized_kepler(state: &PoincarePair, tol: f64) -> Result<f64, KeplerError> {
    let rl = state.lam.sqrt();
    solve_regularized_kepler_hat(state.eta / rl, state.xi / rl, state.lam_angle, tol)
}

/// Dimensionless Delaunay-Poincaré position `x̂/a` and its λ-derivative,
/// as functions of (λ, η̂, ξ̂).  The derivative goes through the implicit
/// regularized anomaly in closed form, not by finite differences.
pub fn dp_position_hat(
    lam_angle: f64,
    eta_hat: f64,
    xi_hat: f64,
) -> Result<([f64; 2], [f64; 2]), KeplerError> {
    let rho = eta_hat * eta_hat + xi_hat * xi_hat;
    let c = (1.0 - rho / 4.0).sqrt();
    let zeta = solve_regularized_kepler_hat(eta_hat, xi_hat, lam_angle, 1e-14)?;
    let sigma = zeta + lam_angle;
    let (sin_s, cos_s) = sigma.sin_cos();
    let a_mix = eta_hat * sin_s + xi_hat * cos_s;
    let b_mix = eta_hat * cos_s - xi_hat * sin_s;
    let x1 = cos_s - 0.5 * xi_hat * a_mix - eta_hat * c;
    let x2 = sin_s - 0.5 * eta_hat * a_mix + xi_hat * c;
    // σ'(λ) from differentiating ζ = c·A(σ): σ' = 1/(1 − c B)
    let sig_p = 1.0 / (1.0 - c * b_mix);
    let dx1 = sig_p * (-sin_s - 0.5 * xi_hat * b_mix);
    let dx2 = sig_p * (cos_s - 0.5 * eta_hat * b_mix);
    Ok(([x1, x2], [dx1, dx2]))
}

/// Plane Delaunay-Poincaré map: Poincaré variables to momenta/positions.
pub fn dp_forward(
    masses: &TwoBodyMasses,
    state: &PoincarePair,
) -> Result<([f64; 2], [f64; 2]), KeplerError> {
    let a = masses.semimajor_axis(state.lam);
    let rl = state.lam.sqrt();
    let (xh, dxh) = dp_position_hat(state.lam_angle, state.eta / rl, state.xi / rl)?;
    let yfac = masses.m_hat.powi(2) * masses.m_tilde.powi(4) / state.lam.powi(3) * a;
    Ok((
        [yfac * dxh[0], yfac * dxh[1]],
        [a * xh[0], a * xh[1]],
    ))
}

/// Inverse Delaunay-Poincaré map via the osculating ellipse.  The chart
/// covers prograde orbits only (0 < G ≤ L).
pub fn dp_inverse(
    masses: &TwoBodyMasses,
    y: [f64; 2],
    x: [f64; 2],
) -> Result<PoincarePair, KeplerError> {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r == 0.0 {
        return Err(KeplerError::CollisionState);
    }
    let mu = masses.m_hat;
    let v = [y[0] / masses.m_tilde, y[1] / masses.m_tilde];
    let v2 = v[0] * v[0] + v[1] * v[1];
    let energy = v2 / 2.0 - mu / r;
    if energy >= 0.0 {
        return Err(KeplerError::HyperbolicOrbit(energy * masses.m_tilde));
    }
    let g_z = x[0] * y[1] - x[1] * y[0];
    if g_z == 0.0 {
        return Err(KeplerError::RectilinearOrbit);
    }
    if g_z < 0.0 {
        return Err(KeplerError::RetrogradeOrbit);
    }
    let a = -mu / (2.0 * energy);
    let lam = masses.lambda_of_axis(a);
    // in-plane eccentricity vector; g is its argument
    let rv = x[0] * v[0] + x[1] * v[1];
    let evec = [
        ((v2 - mu / r) * x[0] - rv * v[0]) / mu,
        ((v2 - mu / r) * x[1] - rv * v[1]) / mu,
    ];
    let e = (evec[0] * evec[0] + evec[1] * evec[1]).sqrt();
    let g = if e < 1e-13 { 0.0 } else { normalize_angle(evec[1].atan2(evec[0])) };
    // eccentric anomaly from e cos u = 1 − r/a, e sin u = (x·v)/√(μa)
    let ell = if e < 1e-13 {
        // circular: mean anomaly is the polar angle (g = 0 there)
        normalize_angle(x[1].atan2(x[0]))
    } else {
        let u = (rv / (mu * a).sqrt()).atan2(1.0 - r / a);
        normalize_angle(u - e * u.sin())
    };
    let lam_angle = normalize_angle(ell + g);
    let h = lam * (1.0 - (1.0 - e * e).sqrt());
    let root = (2.0 * h).sqrt();
    Ok(PoincarePair {
        lam,
        lam_angle,
        eta: root * g.cos(),
        xi: -root * g.sin(),
    })
}

/// Osculating elements of a planar (d = 2) or spatial (d = 3) state.
pub fn osculating_elements(
    masses: &TwoBodyMasses,
    y: &[f64],
    x: &[f64],
) -> Result<OsculatingElements, KeplerError> {
    assert!(x.len() == y.len() && (x.len() == 2 || x.len() == 3));
    let spatial = x.len() == 3;
    let xv = Vector3::new(x[0], x[1], if spatial { x[2] } else { 0.0 });
    let yv = Vector3::new(y[0], y[1], if spatial { y[2] } else { 0.0 });
    let r = xv.norm();
    if r == 0.0 {
        return Err(KeplerError::CollisionState);
    }
    let mu = masses.m_hat;
    let v = yv / masses.m_tilde;
    let energy = v.norm_squared() / 2.0 - mu / r;
    if energy >= 0.0 {
        return Err(KeplerError::HyperbolicOrbit(energy * masses.m_tilde));
    }
    let a = -mu / (2.0 * energy);
    let c = xv.cross(&v); // specific angular momentum
    if c.norm() == 0.0 {
        return Err(KeplerError::RectilinearOrbit);
    }
    let e2 = 1.0 - c.norm_squared() / (mu * a);
    let e = e2.max(0.0).sqrt();
    let evec = (v.cross(&c) - mu * xv / r) / mu;

    let rv = xv.dot(&v);
    let (mean_anomaly, perihelion_arg);
    if e < 1e-13 {
        perihelion_arg = 0.0;
        // anomaly measured from the node (spatial) or x-axis (plane)
        let reference = if spatial {
            let k_z = Vector3::z();
            let node = k_z.cross(&c);
            if node.norm() < 1e-13 * c.norm() {
                Vector3::x()
            } else {
                node.normalize()
            }
        } else {
            Vector3::x()
        };
        let n_dir = c.normalize();
        let theta = oriented_angle(&n_dir, &reference, &xv.normalize());
        mean_anomaly = normalize_angle(theta);
    } else {
        let cos_u = (1.0 - r / a) / e;
        let sin_u = rv / (e * (mu * a).sqrt());
        let u = sin_u.atan2(cos_u);
        mean_anomaly = normalize_angle(u - e * u.sin());
        perihelion_arg = if spatial {
            let k_z = Vector3::z();
            let node = k_z.cross(&c);
            if node.norm() < 1e-13 * c.norm() {
                return Err(KeplerError::NodeUndefined);
            }
            let n_dir = c.normalize();
            normalize_angle(oriented_angle(&n_dir, &node.normalize(), &evec.normalize()))
        } else {
            normalize_angle(evec.y.atan2(evec.x))
        };
    }

    let (theta, node_longitude) = if spatial {
        let cz = (xv.cross(&yv)).z;
        let node = Vector3::z().cross(&xv.cross(&yv));
        let long = if node.norm() < 1e-13 * xv.cross(&yv).norm() {
            None
        } else {
            Some(normalize_angle(node.y.atan2(node.x)))
        };
        (Some(cz), long)
    } else {
        (None, None)
    };

    Ok(OsculatingElements { a, e, mean_anomaly, perihelion_arg, theta, node_longitude })
}

/// Oriented angle from `u` to `v` seen from the unit vector `w` (all three
/// nonzero, `u`, `v` in the plane orthogonal to `w`).
pub fn oriented_angle(w: &Vector3<f64>, u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let ku = u.normalize();
    let kw = w.normalize();
    let kwu = kw.cross(&ku);
    normalize_angle(v.dot(&kwu).atan2(v.dot(&ku)))
}

/// Plane Delaunay map of one body, embedded in ℝ³: positions and momenta
/// from (L, G, ℓ, g) in the orbital plane, third components zero.
pub fn delaunay_map_3d(
    masses: &TwoBodyMasses,
    l: f64,
    g: f64,
    ell: f64,
    per: f64,
) -> Result<(Vector3<f64>, Vector3<f64>), KeplerError> {
    assert!(0.0 < g && g <= l, "need 0 < G <= L");
    let a = masses.semimajor_axis(l);
    let e = (1.0 - (g / l) * (g / l)).max(0.0).sqrt();
    let u = solve_kepler(e, ell, 1e-14)?;
    let (sin_u, cos_u) = u.sin_cos();
    let b = (1.0 - e * e).sqrt();
    let (sin_g, cos_g) = per.sin_cos();
    let px = cos_u - e;
    let py = b * sin_u;
    let x = Vector3::new(a * (cos_g * px - sin_g * py), a * (sin_g * px + cos_g * py), 0.0);
    // dX/dℓ through du/dℓ = 1/(1 − e cos u)
    let up = 1.0 / (1.0 - e * cos_u);
    let dpx = -sin_u * up;
    let dpy = b * cos_u * up;
    let yfac = masses.m_tilde.powi(4) * masses.m_hat.powi(2) / l.powi(3) * a;
    let y = Vector3::new(
        yfac * (cos_g * dpx - sin_g * dpy),
        yfac * (sin_g * dpx + cos_g * dpy),
        0.0,
    );
    Ok((y, x))
}

/// Exact Keplerian propagation of `(x, v)` with gravitational parameter
/// `gm` over `dt`, via the incremental eccentric-anomaly form of Kepler's
/// equation and Lagrange f-g coefficients.  Elliptic orbits only.
pub fn propagate_kepler(
    gm: f64,
    x: &Vector3<f64>,
    v: &Vector3<f64>,
    dt: f64,
) -> Result<(Vector3<f64>, Vector3<f64>), KeplerError> {
    let r0 = x.norm();
    if r0 == 0.0 {
        return Err(KeplerError::CollisionState);
    }
    let energy = v.norm_squared() / 2.0 - gm / r0;
    if energy >= 0.0 {
        return Err(KeplerError::HyperbolicOrbit(energy));
    }
    let a = -gm / (2.0 * energy);
    let n = (gm / a.powi(3)).sqrt();
    let ec = 1.0 - r0 / a; // e cos E₀
    let es = x.dot(v) / (n * a * a); // e sin E₀
    let m = n * dt;
    // Solve ΔE − ec sin ΔE + es (1 − cos ΔE) = n dt  (Newton + bisection
    // safeguard on a bracket of width 2e around n dt).
    let e_mag = (ec * ec + es * es).sqrt();
    let (mut lo, mut hi) = (m - e_mag - 1e-12, m + e_mag + 1e-12);
    let mut de = if e_mag < 0.1 { m } else { m + es.signum() * 0.85 * e_mag };
    let mut ok = false;
    for _ in 0..64 {
        let (sd, cd) = de.sin_cos();
        let f = de - ec * sd + es * (1.0 - cd) - m;
        if f.abs() < 1e-14 * m.abs().max(1.0) {
            ok = true;
            break;
        }
        if f > 0.0 {
            hi = de;
        } else {
            lo = de;
        }
        de -= f / (1.0 - ec * cd + es * sd);
        if !(lo..=hi).contains(&de) {
            de = 0.5 * (lo + hi);
        }
    }
    if !ok {
        let (sd, cd) = de.sin_cos();
        if (de - ec * sd + es * (1.0 - cd) - m).abs() > 1e-11 * m.abs().max(1.0) {
            return Err(KeplerError::NoConvergence);
        }
    }
    let (sd, cd) = de.sin_cos();
    let r = a * (1.0 - ec * cd + es * sd);
    let f = 1.0 - (a / r0) * (1.0 - cd);
    let g = dt + (sd - de) / n;
    let fdot = -a * a * n * sd / (r * r0);
    let gdot = 1.0 - (a / r) * (1.0 - cd);
    Ok((f * x + g * v, fdot * x + gdot * v))
}
