//! Spatial (partially reduced) secular expansion: the verticalizing linear
//! operator, the horizontal/vertical quadratic forms, and the full
//! degree-4 polynomial assembled from the products of the expanded
//! plane-change matrices.

use super::coefficients::{self as coef};
use super::{plane_quadratic_matrix, quartic_tensors, MassConfig, SecularError};
use crate::poly::{Poly, PolyMat3};
use nalgebra::DMatrix;

/// The verticalizing operator 𝔏 : ℝ^{N−1} → ℝ^N and its building scalars.
#[derive(Debug, Clone)]
pub struct VerticalOperator {
    /// N×(N−1) matrix ℓ with ℓᵢ the i-th row.
    pub ell: DMatrix<f64>,
    pub c: Vec<f64>,       // c_1 … c_N      (index shifted by one)
    pub c_tilde: Vec<f64>, // c̃_2 … c̃_{N−1}
    pub c_bar: Vec<f64>,   // c̄_1 … c̄_{N−1}
    /// Partial sums L_j = Λ₁ + … + Λ_j.
    pub l_partial: Vec<f64>,
}

/// Build 𝔏 from the circular actions.
pub fn vertical_operator(lambda: &[f64]) -> VerticalOperator {
    let n = lambda.len();
    assert!(n >= 2);
    let mut l_partial = Vec::with_capacity(n);
    let mut acc = 0.0;
    for l in lambda {
        acc += l;
        l_partial.push(acc);
    }
    let lp = |j: usize| l_partial[j - 1];
    let mut c = vec![-(lambda[1] / (lambda[0] * lp(2))).sqrt()];
    for j in 2..=n {
        c.push((lp(j - 1) / (lp(j) * lambda[j - 1])).sqrt());
    }
    let mut c_tilde = Vec::new();
    for j in 2..=n - 1 {
        c_tilde.push(-(lambda[j] / (lp(j + 1) * lp(j))).sqrt());
    }
    let ct = |j: usize| c_tilde[j - 2];
    let mut ell = DMatrix::zeros(n, n - 1);
    // row 1: (c₁, c̃₂, …, c̃_{N−1});  row i: c_i at slot i−1 then c̃ tail
    ell[(0, 0)] = c[0];
    for j in 2..=n - 1 {
        ell[(0, j - 1)] = ct(j);
    }
    for i in 2..=n - 1 {
        ell[(i - 1, i - 2)] = c[i - 1];
        for j in i..=n - 1 {
            ell[(i - 1, j - 1)] = ct(j);
        }
    }
    ell[(n - 1, n - 2)] = c[n - 1];
    let mut c_bar = Vec::new();
    for k in 1..=n - 1 {
        let tilde = if k == 1 { c[0] } else { ct(k) };
        c_bar.push(c[k] - tilde);
    }
    VerticalOperator { ell, c, c_tilde, c_bar, l_partial }
}

/// The four matrices of the order-2 spatial expansion.
#[derive(Debug, Clone)]
pub struct SpatialQuadratic {
    /// Horizontal form in partially reduced variables (= I ℱ I).
    pub q_h_star: DMatrix<f64>,
    /// Vertical form ℓᵀ ℱ̂_v ℓ, order N−1.
    pub g_v_star: DMatrix<f64>,
    /// The auxiliary difference form ℱ̂_v of order N.
    pub f_v_hat: DMatrix<f64>,
    /// Delaunay-Poincaré vertical form ℓ₀ᵀ ℱ̂_v ℓ₀.
    pub f_v: DMatrix<f64>,
}

/// Horizontal + vertical quadratic forms of the secular expansion.
pub fn spatial_quadratic_forms(
    masses: &MassConfig,
    lambda: &[f64],
) -> Result<SpatialQuadratic, SecularError> {
    let n = masses.n();
    assert_eq!(lambda.len(), n);
    let f_h = plane_quadratic_matrix(masses, lambda)?;
    let mut q_h_star = f_h.clone();
    for j in 1..n {
        q_h_star[(0, j)] = -q_h_star[(0, j)];
        q_h_star[(j, 0)] = -q_h_star[(j, 0)];
    }

    let a = masses.axes_from_lambdas(lambda);
    let mut f_v_hat = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in (j + 1)..n {
            let c1 = coef::c1(a[j], a[k]);
            let w = masses.m_bar[j] * masses.m_bar[k] * c1;
            f_v_hat[(j, j)] -= w;
            f_v_hat[(k, k)] -= w;
            f_v_hat[(j, k)] += w;
            f_v_hat[(k, j)] += w;
        }
    }
    let op = vertical_operator(lambda);
    let g_v_star = op.ell.transpose() * &f_v_hat * &op.ell;
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        lambda.iter().map(|l| 1.0 / l.sqrt()),
    ));
    let f_v = &scale * &f_v_hat * &scale;
    Ok(SpatialQuadratic { q_h_star, g_v_star, f_v_hat, f_v })
}

/// Variable layout of the partially reduced secular polynomial ring:
/// `[η̄₁…η̄_N, ξ̄₁…ξ̄_N, p̄₁…p̄_{N−1}, q̄₁…q̄_{N−1}]`.
pub struct VarLayout {
    pub n: usize,
}

impl VarLayout {
    pub fn nvars(&self) -> usize {
        4 * self.n - 2
    }
    pub fn eta(&self, i: usize) -> usize {
        i
    }
    pub fn xi(&self, i: usize) -> usize {
        self.n + i
    }
    pub fn p(&self, j: usize) -> usize {
        2 * self.n + j
    }
    pub fn q(&self, j: usize) -> usize {
        2 * self.n + (self.n - 1) + j
    }
}

/// Expand the ratio `num/den` of even polynomials (constant + degree-2
/// parts only) to degree 2.
fn ratio_expand(num: &Poly, den: &Poly) -> Poly {
    let n0 = num.homogeneous_part(0).eval(&vec![0.0; num.nvars]);
    let d0 = den.homogeneous_part(0).eval(&vec![0.0; den.nvars]);
    let n2 = num.homogeneous_part(2);
    let d2 = den.homogeneous_part(2);
    let mut out = Poly::constant(num.nvars, n0 / d0);
    out = &out + &n2.scale(1.0 / d0);
    out = &out - &d2.scale(n0 / (d0 * d0));
    out
}

/// √ of an even polynomial with positive constant part, to degree 2.
fn sqrt_expand(sq: &Poly) -> Poly {
    let a0 = sq.homogeneous_part(0).eval(&vec![0.0; sq.nvars]);
    let a2 = sq.homogeneous_part(2);
    let s0 = a0.sqrt();
    &Poly::constant(sq.nvars, s0) + &a2.scale(0.5 / s0)
}

/// The plane-change matrix `R_z(κ) R_x(i) R_z(−κ)` written in a
/// regularized pair `(p, q)`, as a degree-4 polynomial matrix, given the
/// degree-2 expansions of `c = (1−cos i)/(p²+q²)`.
fn s_matrix_poly(layout: &VarLayout, pj: usize, qj: usize, c: &Poly) -> PolyMat3 {
    let nv = layout.nvars();
    let p = Poly::var(nv, pj);
    let q = Poly::var(nv, qj);
    let rho = &(&p * &p) + &(&q * &q);
    // s² = c(2 − ρc) expanded to degree 2
    let s = sqrt_expand(&(&c.scale(2.0) - &rho.mul_truncated(&c.mul_truncated(c, 0), 2)));
    let one = Poly::constant(nv, 1.0);
    let t = 4usize;
    let e00 = &one - &q.mul_truncated(&q.mul_truncated(c, t), t);
    let e01 = p.mul_truncated(&q.mul_truncated(c, t), t).scale(-1.0);
    let e02 = q.mul_truncated(&s, t).scale(-1.0);
    let e11 = &one - &p.mul_truncated(&p.mul_truncated(c, t), t);
    let e12 = p.mul_truncated(&s, t).scale(-1.0);
    let e20 = q.mul_truncated(&s, t);
    let e21 = p.mul_truncated(&s, t);
    let e22 = &one - &rho.mul_truncated(c, t);
    PolyMat3 {
        e: [
            [e00, e01.clone(), e02],
            [e01, e11, e12],
            [e20, e21, e22],
        ],
    }
}

fn i_z_poly(nv: usize) -> PolyMat3 {
    let mut m = PolyMat3::identity(nv);
    m.e[0][0] = Poly::constant(nv, -1.0);
    m.e[1][1] = Poly::constant(nv, -1.0);
    m
}

/// Degree-4 polynomial matrices 𝔯ᵢ^pr of the partial reduction, in the
/// secular variables (the common leftmost rotation is dropped since only
/// relative orientations enter pair distances).
fn body_matrices_poly(lambda: &[f64], layout: &VarLayout) -> Vec<PolyMat3> {
    let n = lambda.len();
    let nv = layout.nvars();
    // Γ, Ψ as even polynomials (exact)
    let tau = |i: usize| -> Poly {
        let e = Poly::var(nv, layout.eta(i));
        let x = Poly::var(nv, layout.xi(i));
        (&(&e * &e) + &(&x * &x)).scale(0.5)
    };
    let rho = |j: usize| -> Poly {
        let p = Poly::var(nv, layout.p(j));
        let q = Poly::var(nv, layout.q(j));
        (&(&p * &p) + &(&q * &q)).scale(0.5)
    };
    let gamma: Vec<Poly> = (0..n)
        .map(|i| &Poly::constant(nv, lambda[i]) - &tau(i))
        .collect();
    // psi0[i] = Ψ_i with Ψ₀ = Γ₁; Ψ_i for i = 1..N−1
    let mut psi0 = vec![gamma[0].clone()];
    let mut acc = gamma[0].clone();
    let mut rho_acc = Poly::zero(nv);
    for i in 1..n {
        acc = &acc + &gamma[i];
        rho_acc = &rho_acc + &rho(i - 1);
        psi0.push(&acc - &rho_acc);
    }

    let quarter = |x: &Poly, y: &Poly| -> Poly {
        // 4xy to degree 2
        x.mul_truncated(y, 2).scale(4.0)
    };
    let s_c = |j: usize| -> Poly {
        // 𝔠_j; pair (p_{j−1}, q_{j−1}) with (p₀,q₀) := (p₁,q₁)
        if j == 1 {
            ratio_expand(
                &(&(&gamma[1] - &gamma[0]) + &psi0[1]),
                &quarter(&gamma[0], &psi0[1]),
            )
        } else {
            ratio_expand(
                &(&(&psi0[j - 2] - &gamma[j - 1]) + &psi0[j - 1]),
                &quarter(&gamma[j - 1], &psi0[j - 1]),
            )
        }
    };
    let st_c = |j: usize| -> Poly {
        ratio_expand(
            &(&(&gamma[j] + &psi0[j]) - &psi0[j - 1]),
            &quarter(&psi0[j], &psi0[j - 1]),
        )
    };
    let s_mat = |j: usize| -> PolyMat3 {
        let (pj, qj) = if j <= 1 {
            (layout.p(0), layout.q(0))
        } else {
            (layout.p(j - 2), layout.q(j - 2))
        };
        s_matrix_poly(layout, pj, qj, &s_c(j))
    };
    let st_mat = |j: usize| -> PolyMat3 {
        s_matrix_poly(layout, layout.p(j - 1), layout.q(j - 1), &st_c(j))
    };

    let iz = i_z_poly(nv);
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let m = if i == n {
            iz.mul_truncated(&s_mat(n), 4)
        } else {
            let mut m = PolyMat3::identity(nv);
            for j in (i.max(2)..=(n - 1)).rev() {
                m = m.mul_truncated(&st_mat(j), 4);
            }
            if i == 1 {
                m.mul_truncated(&s_mat(1), 4)
            } else {
                m.mul_truncated(&iz, 4).mul_truncated(&s_mat(i), 4)
            }
        };
        out.push(m);
    }
    out
}

/// Full degree-4 secular polynomial 𝔉 = 𝔉_h + 𝔉_hv + 𝔉_v in the
/// partially reduced secular variables.
pub fn spatial_quartic_poly(masses: &MassConfig, lambda: &[f64]) -> Result<Poly, SecularError> {
    let n = masses.n();
    assert!(n >= 2);
    let layout = VarLayout { n };
    let nv = layout.nvars();
    let a = masses.axes_from_lambdas(lambda);
    super::check_ordered(&a)?;

    // ---- horizontal part: plane quartic at the starred variables
    let tensors = quartic_tensors(masses, lambda)?;
    let star = |i: usize| -> f64 {
        if i == 0 {
            -1.0
        } else {
            1.0
        }
    };
    let mut f = Poly::zero(nv);
    for (&[i, j, k, l], &v) in &tensors.q {
        let sgn = star(i) * star(j) * star(k) * star(l);
        f.add_term(key4(nv, layout.eta(i), layout.eta(j), layout.eta(k), layout.eta(l)), sgn * v);
        f.add_term(key4(nv, layout.xi(i), layout.xi(j), layout.xi(k), layout.xi(l)), sgn * v);
    }
    for (&[i, j, k, l], &v) in &tensors.r {
        let sgn = star(i) * star(j) * star(k) * star(l);
        f.add_term(key4(nv, layout.eta(i), layout.eta(j), layout.xi(k), layout.xi(l)), sgn * v);
    }

    // ---- shared linear/bilinear verticals
    let op = vertical_operator(lambda);
    let lp = |i: usize| -> Poly {
        let mut out = Poly::zero(nv);
        for j in 0..n - 1 {
            let c = op.ell[(i, j)];
            if c != 0.0 {
                out.add_term(key1(nv, layout.p(j)), c);
            }
        }
        out
    };
    let lq = |i: usize| -> Poly {
        let mut out = Poly::zero(nv);
        for j in 0..n - 1 {
            let c = op.ell[(i, j)];
            if c != 0.0 {
                out.add_term(key1(nv, layout.q(j)), c);
            }
        }
        out
    };
    let delta = |i: usize, j: usize| -> Poly {
        // Σ_{h<k} ℓ^{ij}_h ℓ^{ij}_k (p_h q_k − p_k q_h)
        let mut out = Poly::zero(nv);
        for h in 0..n - 1 {
            for k in (h + 1)..n - 1 {
                let c = (op.ell[(j, h)] - op.ell[(i, h)]) * (op.ell[(j, k)] - op.ell[(i, k)]);
                if c != 0.0 {
                    out.add_term(key2(nv, layout.p(h), layout.q(k)), c);
                    out.add_term(key2(nv, layout.p(k), layout.q(h)), -c);
                }
            }
        }
        out
    };

    // ---- horizontal-vertical coupling 𝔉_hv
    for i in 0..n {
        for j in (i + 1)..n {
            let mm = masses.m_bar[i] * masses.m_bar[j];
            let dq = &lq(j) - &lq(i);
            let dp = &lp(j) - &lp(i);
            let dl = delta(i, j);
            let q11 = q_form(&layout, nv, i, j, &a, lambda, QKind::Q11);
            let q22 = q_form(&layout, nv, i, j, &a, lambda, QKind::Q22);
            let q12 = q_form(&layout, nv, i, j, &a, lambda, QKind::Q12);
            let q21 = q_form(&layout, nv, i, j, &a, lambda, QKind::Q21);
            let mut term = q11.mul_truncated(&dq.mul_truncated(&dq, 4), 4);
            term = &term + &q22.mul_truncated(&dp.mul_truncated(&dp, 4), 4);
            term = &term
                + &(&q12 + &q21).mul_truncated(&dp.mul_truncated(&dq, 4), 4);
            term = &term + &(&q21 - &q12).mul_truncated(&dl, 4);
            f = &f + &term.scale(0.5 * mm);
        }
    }

    // ---- vertical part 𝔉_v
    let bodies = body_matrices_poly(lambda, &layout);
    for i in 0..n {
        for j in (i + 1)..n {
            let mm = masses.m_bar[i] * masses.m_bar[j];
            // hat-trace of 𝔖ᵢⱼ = Iᵢ 𝔯ᵢᵀ 𝔯ⱼ, degree-4 part
            let m = bodies[i].transpose().mul_truncated(&bodies[j], 4);
            let mut tr = &m.e[0][0] + &m.e[1][1];
            if i == 0 {
                tr = tr.scale(-1.0);
            }
            let qq = tr.homogeneous_part(4);
            f = &f + &qq.scale(mm * coef::c1(a[i], a[j]));

            let dp = &lp(i) - &lp(j);
            let dq = &lq(i) - &lq(j);
            let sum =
                &dp.mul_truncated(&dp, 4) + &dq.mul_truncated(&dq, 4);
            f = &f + &sum.mul_truncated(&sum, 4).scale(mm * coef::c13(a[i], a[j]));
            let dl = delta(i, j);
            f = &f + &dl.mul_truncated(&dl, 4).scale(mm * coef::c14(a[i], a[j]));
        }
    }
    Ok(f.prune(0.0))
}

/// Numeric value of the degree-4 polynomial at a secular point
/// `z = (η̄, ξ̄, p̄, q̄)`.
pub fn spatial_quartic_value(
    masses: &MassConfig,
    lambda: &[f64],
    z: &[f64],
) -> Result<f64, SecularError> {
    let poly = spatial_quartic_poly(masses, lambda)?;
    assert_eq!(z.len(), poly.nvars);
    Ok(poly.eval(z))
}

enum QKind {
    Q11,
    Q22,
    Q12,
    Q21,
}

/// The quadratic forms 𝒬ᵢⱼ^{hk} acting on the starred pair variables.
fn q_form(
    layout: &VarLayout,
    nv: usize,
    i: usize,
    j: usize,
    a: &[f64],
    lambda: &[f64],
    kind: QKind,
) -> Poly {
    let si = if i == 0 { -1.0 } else { 1.0 };
    let (ai, aj) = (a[i], a[j]);
    let (li, lj) = (lambda[i], lambda[j]);
    let rij = (li * lj).sqrt();
    let mut out = Poly::zero(nv);
    let mut put = |vi: usize, vj: usize, c: f64, sign: f64| {
        out.add_term(key2(nv, vi, vj), c * sign);
    };
    match kind {
        QKind::Q11 => {
            put(layout.eta(i), layout.eta(i), coef::c3(ai, aj) / li, 1.0);
            put(layout.eta(i), layout.eta(j), coef::c4(ai, aj) / rij, si);
            put(layout.eta(j), layout.eta(j), coef::c5(ai, aj) / lj, 1.0);
            put(layout.xi(i), layout.xi(i), coef::c6(ai, aj) / li, 1.0);
            put(layout.xi(i), layout.xi(j), coef::c7(ai, aj) / rij, si);
            put(layout.xi(j), layout.xi(j), coef::c8(ai, aj) / lj, 1.0);
        }
        QKind::Q22 => {
            put(layout.eta(i), layout.eta(i), coef::c6(ai, aj) / li, 1.0);
            put(layout.eta(i), layout.eta(j), coef::c7(ai, aj) / rij, si);
            put(layout.eta(j), layout.eta(j), coef::c8(ai, aj) / lj, 1.0);
            put(layout.xi(i), layout.xi(i), coef::c3(ai, aj) / li, 1.0);
            put(layout.xi(i), layout.xi(j), coef::c4(ai, aj) / rij, si);
            put(layout.xi(j), layout.xi(j), coef::c5(ai, aj) / lj, 1.0);
        }
        QKind::Q12 => {
            put(layout.eta(i), layout.xi(i), coef::c9(ai, aj) / li, 1.0);
            put(layout.eta(i), layout.xi(j), coef::c10(ai, aj) / rij, si);
            put(layout.eta(j), layout.xi(i), coef::c11(ai, aj) / rij, si);
            put(layout.eta(j), layout.xi(j), coef::c12(ai, aj) / lj, 1.0);
        }
        QKind::Q21 => {
            put(layout.eta(i), layout.xi(i), coef::c9(ai, aj) / li, 1.0);
            put(layout.eta(i), layout.xi(j), coef::c11(ai, aj) / rij, si);
            put(layout.eta(j), layout.xi(i), coef::c10(ai, aj) / rij, si);
            put(layout.eta(j), layout.xi(j), coef::c12(ai, aj) / lj, 1.0);
        }
    }
    out
}

fn key1(nv: usize, i: usize) -> Vec<u8> {
    let mut k = vec![0u8; nv];
    k[i] += 1;
    k
}

fn key2(nv: usize, i: usize, j: usize) -> Vec<u8> {
    let mut k = vec![0u8; nv];
    k[i] += 1;
    k[j] += 1;
    k
}

fn key4(nv: usize, i: usize, j: usize, k: usize, l: usize) -> Vec<u8> {
    let mut key = vec![0u8; nv];
    key[i] += 1;
    key[j] += 1;
    key[k] += 1;
    key[l] += 1;
    key
}

/// Herman trace identity material for tests: `Σ sᵢ + Σ zᵢ`, where the
/// spectra come from `q_h_star` and `g_v_star`.
pub fn secular_spectrum(
    masses: &MassConfig,
    lambda: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), SecularError> {
    let forms = spatial_quadratic_forms(masses, lambda)?;
    let s = crate::birkhoff::diagonalize_symmetric(&forms.q_h_star)
        .expect("symmetric by construction")
        .0;
    let z = crate::birkhoff::diagonalize_symmetric(&forms.g_v_star)
        .expect("symmetric by construction")
        .0;
    Ok((s, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deprit::DepritPartial;
    use crate::oracle;
    use crate::secular::{secular_average_fixed_grid, SecularState};
    use approx::assert_relative_eq;

    fn partial_state(lam: &[f64], z: &[f64]) -> DepritPartial {
        let n = lam.len();
        DepritPartial {
            lam: lam.to_vec(),
            lam_angle: vec![0.0; n],
            eta: z[0..n].to_vec(),
            xi: z[n..2 * n].to_vec(),
            p: z[2 * n..3 * n - 1].to_vec(),
            q: z[3 * n - 1..4 * n - 2].to_vec(),
            big_p: 0.0,
            big_q: 0.0,
        }
    }

    /// Directional quartic Taylor coefficient of the numeric average.
    fn quartic_fd(masses: &MassConfig, lam: &[f64], z: &[f64], grid: usize) -> f64 {
        let f = |t: &[f64]| {
            let zt: Vec<f64> = z.iter().map(|v| v * t[0]).collect();
            let st = SecularState::Partial(partial_state(lam, &zt));
            secular_average_fixed_grid(masses, &st, grid, 0.0).unwrap()
        };
        oracle::fd_mixed_partial_richardson2(&f, &[0.0], &[4], 0.5) / 24.0
    }

    #[test]
    fn quartic_vanishes_at_origin_and_restricts_to_plane() {
        let m = MassConfig::new(1.0, vec![1.0, 1.3], 1e-3);
        let lam = m.lambdas_from_axes(&[1.0, 5.0]);
        let zero = vec![0.0; 6];
        assert_eq!(spatial_quartic_value(&m, &lam, &zero).unwrap(), 0.0);

        // pure horizontal slice equals the plane quartic at the starred
        // variables
        let t = quartic_tensors(&m, &lam).unwrap();
        let z = [0.11, -0.07, 0.05, 0.09, 0.0, 0.0];
        let v = spatial_quartic_value(&m, &lam, &z).unwrap();
        let eta_star = [-z[0], z[1]];
        let xi_star = [-z[2], z[3]];
        let plane = t.eval(&eta_star, &xi_star);
        assert_relative_eq!(v, plane, max_relative = 1e-12);
    }

    #[test]
    fn sigma_products_match_closed_form_n2() {
        // for two bodies the product matrix collapses to a single factor
        // whose degree-4 trace block is −(p²+q²)·[2Λ₂²τ₁ + 2Λ₁²τ₂ −
        // Λ₁Λ₂ρ]/(4Λ₁²Λ₂²)
        let lam = [1.3, 2.1];
        let layout = VarLayout { n: 2 };
        let bodies = super::body_matrices_poly(&lam, &layout);
        let m12 = bodies[0].transpose().mul_truncated(&bodies[1], 4);
        let mut tr = &m12.e[0][0] + &m12.e[1][1];
        tr = tr.scale(-1.0); // i = 1 carries the in-plane flip
        let q4 = tr.homogeneous_part(4);
        let z = [0.13, -0.08, 0.06, 0.11, 0.07, -0.04];
        let got = q4.eval(&z);
        let tau1 = (z[0] * z[0] + z[2] * z[2]) / 2.0;
        let tau2 = (z[1] * z[1] + z[3] * z[3]) / 2.0;
        let rho = (z[4] * z[4] + z[5] * z[5]) / 2.0;
        let cbar = (2.0 * lam[1] * lam[1] * tau1 + 2.0 * lam[0] * lam[0] * tau2
            - lam[0] * lam[1] * rho)
            / (4.0 * lam[0] * lam[0] * lam[1] * lam[1]);
        let expect = -(z[4] * z[4] + z[5] * z[5]) * cbar;
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn quartic_matches_fd_of_average_n2() {
        let m = MassConfig::new(1.0, vec![1.0, 1.0], 1e-3);
        let lam = m.lambdas_from_axes(&[1.0, 8.0]);
        let z = [0.12, -0.09, 0.07, 0.11, 0.13, -0.06];
        let closed = spatial_quartic_value(&m, &lam, &z).unwrap();
        let fd = quartic_fd(&m, &lam, &z, 128);
        assert_relative_eq!(closed, fd, max_relative = 1e-5);
    }

    #[test]
    fn quartic_matches_fd_of_average_n3() {
        let m = MassConfig::new(1.0, vec![1.0, 1.2, 0.9], 1e-3);
        let lam = m.lambdas_from_axes(&[1.0, 3.1, 9.4]);
        // generic direction including the antisymmetric vertical mixture
        let z = [0.09, -0.06, 0.04, 0.05, 0.08, -0.07, 0.10, -0.05, 0.06, 0.04];
        let closed = spatial_quartic_value(&m, &lam, &z).unwrap();
        let fd = quartic_fd(&m, &lam, &z, 128);
        assert_relative_eq!(closed, fd, max_relative = 1e-5);
    }

    #[test]
    fn c13_isolated_from_pure_vertical_slice() {
        let m = MassConfig::new(1.0, vec![1.0, 1.0], 1e-3);
        let a = [1.0, 6.0];
        let lam = m.lambdas_from_axes(&a);
        let z = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let q4 = quartic_fd(&m, &lam, &[z[0], z[1], z[2], z[3], 0.2, 0.0], 128)
            / 0.2f64.powi(4);
        let c1 = coef::c1(a[0], a[1]);
        let cbar4 = (1.0 / lam[0] + 1.0 / lam[1]).powi(2);
        let c13_oracle =
            (q4 / (m.m_bar[0] * m.m_bar[1]) - c1 / (8.0 * lam[0] * lam[1])) / cbar4;
        assert_relative_eq!(coef::c13(a[0], a[1]), c13_oracle, max_relative = 1e-5);
    }
}
