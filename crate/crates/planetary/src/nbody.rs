//! Direct numerical integration of the heliocentric planetary
//! Hamiltonian: canonical right-hand side, an RK4 reference integrator, a
//! Kepler-splitting leapfrog whose drift is propagated exactly, and
//! secular-frequency extraction from fitted element histories.

use crate::kepler::{self, propagate_kepler};
use crate::secular::{CartesianState, MassConfig};
use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NbodyError {
    #[error("close encounter or stellar collision during integration")]
    Collision,
    #[error("step rejected (non-finite state)")]
    StepRejected,
    #[error("element angle undefined: amplitude below threshold {0}")]
    ElementUndefined(f64),
    #[error(transparent)]
    Kepler(#[from] kepler::KeplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    LeapfrogSplit,
}

/// Sampled trajectory of the full system.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CartesianState>,
}

/// Momentum and position derivative fields along a state.
pub type RhsPair = (Vec<Vector3<f64>>, Vec<Vector3<f64>>);

/// Canonical equations of the heliocentric Hamiltonian:
/// `ẋᵢ = yᵢ/μ̃ᵢ + (μ/m̄₀) Σ_{j≠i} yⱼ`,
/// `ẏᵢ = −μ̃ᵢm̂ᵢ xᵢ/|xᵢ|³ − μ Σ_{j≠i} m̄ᵢm̄ⱼ (xᵢ−xⱼ)/|xᵢ−xⱼ|³`.
pub fn heliocentric_rhs(
    masses: &MassConfig,
    y: &[Vector3<f64>],
    x: &[Vector3<f64>],
) -> Result<RhsPair, NbodyError> {
    let n = masses.n();
    let scale = x.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    let mut xdot = Vec::with_capacity(n);
    let mut ydot = Vec::with_capacity(n);
    let ysum: Vector3<f64> = y.iter().sum();
    for i in 0..n {
        let r = x[i].norm();
        if r < 1e-12 * scale {
            return Err(NbodyError::Collision);
        }
        xdot.push(y[i] / masses.m_tilde(i) + masses.mu / masses.m0_bar * (ysum - y[i]));
        let mut f = -masses.m_tilde(i) * masses.m_hat(i) * x[i] / (r * r * r);
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = x[i] - x[j];
            let dn = d.norm();
            if dn < 1e-12 * scale {
                return Err(NbodyError::Collision);
            }
            f -= masses.mu * masses.m_bar[i] * masses.m_bar[j] * d / (dn * dn * dn);
        }
        ydot.push(f);
    }
    Ok((ydot, xdot))
}

/// Value of the heliocentric Hamiltonian.
pub fn hamiltonian(masses: &MassConfig, state: &CartesianState) -> f64 {
    let n = masses.n();
    let mut h = 0.0;
    for i in 0..n {
        h += state.y[i].norm_squared() / (2.0 * masses.m_tilde(i))
            - masses.m_tilde(i) * masses.m_hat(i) / state.x[i].norm();
    }
    for i in 0..n {
        for j in (i + 1)..n {
            h += masses.mu
                * (state.y[i].dot(&state.y[j]) / masses.m0_bar
                    - masses.m_bar[i] * masses.m_bar[j] / (state.x[i] - state.x[j]).norm());
        }
    }
    h
}

/// Fixed-step integration with sampling every `stride` steps (the initial
/// state is always included; the final state always lands on `t_end`).
pub fn integrate(
    masses: &MassConfig,
    state0: &CartesianState,
    t_end: f64,
    dt: f64,
    method: Method,
    stride: usize,
) -> Result<Trajectory, NbodyError> {
    assert!(dt > 0.0 && t_end > 0.0);
    let stride = stride.max(1);
    let steps = (t_end / dt).round() as usize;
    let mut state = state0.clone();
    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    for step in 1..=steps {
        match method {
            Method::Rk4 => rk4_step(masses, &mut state, dt)?,
            Method::LeapfrogSplit => leapfrog_step(masses, &mut state, dt)?,
        }
        if state.x.iter().chain(&state.y).any(|v| !v.x.is_finite() || !v.y.is_finite() || !v.z.is_finite()) {
            return Err(NbodyError::StepRejected);
        }
        if step % stride == 0 || step == steps {
            times.push(step as f64 * dt);
            states.push(state.clone());
        }
    }
    Ok(Trajectory { times, states })
}

fn rk4_step(masses: &MassConfig, state: &mut CartesianState, dt: f64) -> Result<(), NbodyError> {
    let n = state.x.len();
    let eval = |s: &CartesianState| heliocentric_rhs(masses, &s.y, &s.x);
    let advance = |s: &CartesianState, k: &RhsPair, h: f64| {
        let mut out = s.clone();
        for i in 0..n {
            out.y[i] += h * k.0[i];
            out.x[i] += h * k.1[i];
        }
        out
    };
    let k1 = eval(state)?;
    let k2 = eval(&advance(state, &k1, dt / 2.0))?;
    let k3 = eval(&advance(state, &k2, dt / 2.0))?;
    let k4 = eval(&advance(state, &k3, dt))?;
    for i in 0..n {
        state.y[i] += dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
        state.x[i] += dt / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
    }
    Ok(())
}

/// Kick (direct potential) — jump (momentum coupling) — exact Kepler
/// drift — jump — kick; each flow is exact, the palindrome is second
/// order overall.
fn leapfrog_step(masses: &MassConfig, state: &mut CartesianState, dt: f64) -> Result<(), NbodyError> {
    kick(masses, state, dt / 2.0)?;
    jump(masses, state, dt / 2.0);
    for i in 0..state.x.len() {
        let mt = masses.m_tilde(i);
        let v = state.y[i] / mt;
        let (x1, v1) = propagate_kepler(masses.m_hat(i), &state.x[i], &v, dt)?;
        state.x[i] = x1;
        state.y[i] = mt * v1;
    }
    jump(masses, state, dt / 2.0);
    kick(masses, state, dt / 2.0)?;
    Ok(())
}

fn kick(masses: &MassConfig, state: &mut CartesianState, h: f64) -> Result<(), NbodyError> {
    let n = state.x.len();
    let scale = state.x.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    let mut acc = vec![Vector3::zeros(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = state.x[i] - state.x[j];
            let dn = d.norm();
            if dn < 1e-12 * scale {
                return Err(NbodyError::Collision);
            }
            let f = masses.mu * masses.m_bar[i] * masses.m_bar[j] * d / (dn * dn * dn);
            acc[i] -= f;
            acc[j] += f;
        }
    }
    for i in 0..n {
        state.y[i] += h * acc[i];
    }
    Ok(())
}

fn jump(masses: &MassConfig, state: &mut CartesianState, h: f64) {
    let ysum: Vector3<f64> = state.y.iter().sum();
    for i in 0..state.x.len() {
        state.x[i] += h * masses.mu / masses.m0_bar * (ysum - state.y[i]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Perihelion,
    Node,
}

/// Least-squares rate of the unwrapped element angle, with its standard
/// error; the first 10% of the samples (transient) are discarded.
pub fn secular_frequency_fit(
    masses: &MassConfig,
    traj: &Trajectory,
    body: usize,
    element: Element,
) -> Result<(f64, f64), NbodyError> {
    const AMPLITUDE_FLOOR: f64 = 1e-4;
    let tb = masses.two_body(body);
    // plane problems stay exactly planar; use the 2D element branch there
    let planar = traj
        .states
        .iter()
        .all(|st| st.x[body].z == 0.0 && st.y[body].z == 0.0);
    let mut angles = Vec::with_capacity(traj.states.len());
    for st in &traj.states {
        let el = if planar {
            kepler::osculating_elements(
                &tb,
                &[st.y[body].x, st.y[body].y],
                &[st.x[body].x, st.x[body].y],
            )?
        } else {
            kepler::osculating_elements(&tb, st.y[body].as_slice(), st.x[body].as_slice())?
        };
        let angle = match element {
            Element::Perihelion => {
                if el.e < AMPLITUDE_FLOOR {
                    return Err(NbodyError::ElementUndefined(AMPLITUDE_FLOOR));
                }
                el.perihelion_arg
            }
            Element::Node => match el.node_longitude {
                Some(v) => v,
                None => return Err(NbodyError::ElementUndefined(AMPLITUDE_FLOOR)),
            },
        };
        angles.push(angle);
    }
    // nearest-branch unwrapping
    let mut unwrapped = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    let mut prev = angles[0];
    for &a in &angles {
        let mut d = a - prev;
        while d > std::f64::consts::PI {
            d -= kepler::TAU;
        }
        while d < -std::f64::consts::PI {
            d += kepler::TAU;
        }
        offset += d;
        unwrapped.push(angles[0] + offset);
        prev = a;
    }
    let skip = traj.times.len() / 10;
    let t = &traj.times[skip..];
    let y = &unwrapped[skip..];
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in t.iter().zip(y) {
        sxy += (a - tm) * (b - ym);
        sxx += (a - tm) * (a - tm);
    }
    let slope = sxy / sxx;
    let mut rss = 0.0;
    for (a, b) in t.iter().zip(y) {
        let r = b - ym - slope * (a - tm);
        rss += r * r;
    }
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;

    fn two_body_state(masses: &MassConfig, a: &[f64], e: &[f64]) -> CartesianState {
        let mut y = Vec::new();
        let mut x = Vec::new();
        for i in 0..masses.n() {
            let tb = masses.two_body(i);
            // start at perihelion of an ellipse with the given (a, e)
            let r = a[i] * (1.0 - e[i]);
            let v = (tb.m_hat * (2.0 / r - 1.0 / a[i])).sqrt();
            x.push(Vector3::new(r, 0.0, 0.0));
            y.push(Vector3::new(0.0, tb.m_tilde * v, 0.0));
        }
        x[1] = Vector3::new(-x[1].x, 0.0, 0.0);
        y[1] = Vector3::new(0.0, -y[1].y, 0.0);
        CartesianState { y, x }
    }

    #[test]
    fn rhs_is_hamiltonian_gradient() {
        let masses = MassConfig::new(1.0, vec![1.0, 1.5], 1e-3);
        let st = two_body_state(&masses, &[1.0, 3.1], &[0.1, 0.05]);
        let (ydot, xdot) = heliocentric_rhs(&masses, &st.y, &st.x).unwrap();
        // ẋ = ∂H/∂y, ẏ = −∂H/∂x by finite differences on H
        let h = 1e-6;
        for i in 0..2 {
            for k in 0..3 {
                let mut sp = st.clone();
                let mut sm = st.clone();
                sp.y[i][k] += h;
                sm.y[i][k] -= h;
                let d = (hamiltonian(&masses, &sp) - hamiltonian(&masses, &sm)) / (2.0 * h);
                assert_relative_eq!(d, xdot[i][k], epsilon = 1e-8, max_relative = 1e-6);
                let mut sp = st.clone();
                let mut sm = st.clone();
                sp.x[i][k] += h;
                sm.x[i][k] -= h;
                let d = (hamiltonian(&masses, &sp) - hamiltonian(&masses, &sm)) / (2.0 * h);
                assert_relative_eq!(d, -ydot[i][k], epsilon = 1e-8, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn angular_momentum_conserved_by_rhs() {
        let masses = MassConfig::new(1.0, vec![1.0, 2.0], 1e-2);
        let st = two_body_state(&masses, &[1.0, 2.7], &[0.2, 0.1]);
        let (ydot, xdot) = heliocentric_rhs(&masses, &st.y, &st.x).unwrap();
        let mut cdot = Vector3::zeros();
        for i in 0..2 {
            cdot += xdot[i].cross(&st.y[i]) + st.x[i].cross(&ydot[i]);
        }
        assert!(cdot.norm() < 1e-12, "dC/dt = {cdot:?}");
    }

    #[test]
    fn kepler_limit_keeps_orbit() {
        // μ = 0, one planet on a circle: position error small over many
        // periods with the splitting integrator
        let masses = MassConfig::new(1.0, vec![1e-3], 0.0);
        let tb = masses.two_body(0);
        let a = 1.0;
        let v = (tb.m_hat / a).sqrt();
        let st = CartesianState {
            y: vec![Vector3::new(0.0, tb.m_tilde * v, 0.0)],
            x: vec![Vector3::new(a, 0.0, 0.0)],
        };
        let period = kepler::TAU / (tb.m_hat / a.powi(3)).sqrt();
        let traj = integrate(&masses, &st, 10.0 * period, period / 64.0, Method::LeapfrogSplit, 64)
            .unwrap();
        let last = traj.states.last().unwrap();
        assert!((last.x[0] - st.x[0]).norm() < 1e-8, "{:?}", last.x[0]);
    }

    #[test]
    fn leapfrog_time_reversal() {
        let masses = MassConfig::new(1.0, vec![1.0, 1.0], 1e-4);
        let st = two_body_state(&masses, &[1.0, 4.0], &[0.05, 0.02]);
        let fwd = integrate(&masses, &st, 5.0, 0.01, Method::LeapfrogSplit, 1000).unwrap();
        let mut back_state = fwd.states.last().unwrap().clone();
        for y in &mut back_state.y {
            *y = -*y;
        }
        let back = integrate(&masses, &back_state, 5.0, 0.01, Method::LeapfrogSplit, 1000).unwrap();
        let fin = back.states.last().unwrap();
        for i in 0..2 {
            assert!((fin.x[i] - st.x[i]).norm() < 1e-8, "body {i}");
        }
    }

    #[test]
    fn secular_fit_zero_at_mu_zero() {
        let masses = MassConfig::new(1.0, vec![1.0, 1.0], 0.0);
        let st = two_body_state(&masses, &[1.0, 4.0], &[0.08, 0.05]);
        let traj = integrate(&masses, &st, 200.0, 0.02, Method::LeapfrogSplit, 50).unwrap();
        let (rate, err) = secular_frequency_fit(&masses, &traj, 0, Element::Perihelion).unwrap();
        assert!(rate.abs() < 5.0 * err.max(1e-12), "rate {rate} err {err}");
    }

    #[test]
    fn area_law_at_mu_zero() {
        // λ advances linearly with the mean motion along the two-body flow
        let masses = MassConfig::new(1.0, vec![1.0], 0.0);
        let tb = masses.two_body(0);
        let lam0 = tb.lambda_of_axis(1.3);
        let e = 0.2f64;
        let h = lam0 * (1.0 - (1.0 - e * e).sqrt());
        let st = crate::kepler::PoincarePair::new(lam0, 0.9, (2.0 * h).sqrt(), 0.0);
        let (y, x) = crate::kepler::dp_forward(&tb, &st).unwrap();
        let state = CartesianState {
            y: vec![Vector3::new(y[0], y[1], 0.0)],
            x: vec![Vector3::new(x[0], x[1], 0.0)],
        };
        let traj = integrate(&masses, &state, 40.0, 0.01, Method::LeapfrogSplit, 100).unwrap();
        let n_expected = tb.mean_motion(lam0);
        // unwrap λ = ℓ + g from osculating elements and fit the slope
        let mut prev = 0.0;
        let mut offset = 0.0;
        let mut lambdas = Vec::new();
        for (idx, s) in traj.states.iter().enumerate() {
            let el = crate::kepler::osculating_elements(
                &tb,
                &[s.y[0].x, s.y[0].y],
                &[s.x[0].x, s.x[0].y],
            )
            .unwrap();
            let lam_angle = crate::kepler::normalize_angle(el.mean_anomaly + el.perihelion_arg);
            if idx > 0 {
                let mut d = lam_angle - prev;
                while d > std::f64::consts::PI {
                    d -= crate::kepler::TAU;
                }
                while d < -std::f64::consts::PI {
                    d += crate::kepler::TAU;
                }
                offset += d;
            }
            prev = lam_angle;
            lambdas.push(offset);
        }
        let rate = (lambdas.last().unwrap() - lambdas[0])
            / (traj.times.last().unwrap() - traj.times[0]);
        assert_relative_eq!(rate, n_expected, max_relative = 1e-6);
    }

    #[test]
    fn heliocentric_embedding_kills_linear_momentum() {
        // reconstructing the barycentric momenta from (y, x) leaves the
        // total linear momentum exactly zero
        let masses = MassConfig::new(1.0, vec![1.0, 2.0], 1e-2);
        let st = two_body_state(&masses, &[1.0, 3.0], &[0.1, 0.2]);
        let u0: Vector3<f64> = -st.y.iter().sum::<Vector3<f64>>();
        let total = u0 + st.y.iter().sum::<Vector3<f64>>();
        assert_eq!(total, Vector3::zeros());
    }

    #[test]
    fn rhs_energy_consistency_oracle() {
        // RK4 and the oracle FD agree that energy is conserved along a
        // short integration
        let masses = MassConfig::new(1.0, vec![1.0, 1.0], 1e-3);
        let st = two_body_state(&masses, &[1.0, 3.0], &[0.1, 0.1]);
        let h0 = hamiltonian(&masses, &st);
        let traj = integrate(&masses, &st, 2.0, 1e-3, Method::Rk4, 2000).unwrap();
        let h1 = hamiltonian(&masses, traj.states.last().unwrap());
        assert!((h1 - h0).abs() < 1e-10 * h0.abs());
        let _ = oracle::bisect(|x| x, -1.0, 1.0, 1e-3);
    }
}
