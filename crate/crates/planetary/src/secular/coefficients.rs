//! Closed-form expansion coefficients of the averaged pair interaction,
//! expressed through Laplace coefficients.  Each formula is validated
//! against the finite-difference-of-quadrature oracle in the test suite;
//! the oracle is the authority on signs and prefactors.

use super::SecularError;
use crate::laplace::{laplace_quadrature_auto, laplace_reflect, HalfInt, LaplaceKey};

/// `b_{s/2,k}` at any |α| ∉ {0-neighborhood of 1}; reflection for |α| > 1.
pub(crate) fn b(s_halves: i64, k: i32, alpha: f64) -> f64 {
    let key = LaplaceKey::new(HalfInt::halves(s_halves), k, alpha).expect("valid Laplace key");
    if alpha.abs() > 1.0 {
        laplace_reflect(&key).expect("reflection")
    } else {
        laplace_quadrature_auto(&key).expect("quadrature")
    }
}

/// Names of the closed-form coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientName {
    A2000,
    A1100,
    A4000,
    A3100,
    A2200,
    A2020,
    A1120,
    A0220,
    A1111,
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
    C12,
    C13,
    C14,
}

impl CoefficientName {
    pub fn parse(s: &str) -> Option<Self> {
        use CoefficientName::*;
        Some(match s.to_ascii_lowercase().as_str() {
            "a2000" => A2000,
            "a1100" => A1100,
            "a4000" => A4000,
            "a3100" => A3100,
            "a2200" => A2200,
            "a2020" => A2020,
            "a1120" => A1120,
            "a0220" => A0220,
            "a1111" => A1111,
            "c1" => C1,
            "c2" => C2,
            "c3" => C3,
            "c4" => C4,
            "c5" => C5,
            "c6" => C6,
            "c7" => C7,
            "c8" => C8,
            "c9" => C9,
            "c10" => C10,
            "c11" => C11,
            "c12" => C12,
            "c13" => C13,
            "c14" => C14,
            _ => return None,
        })
    }
}

/// Dispatch on the coefficient name; `a` and `b` are the two semimajor
/// axes in the argument order of the corresponding closed form.
pub fn expansion_coefficient(
    name: CoefficientName,
    a: f64,
    bx: f64,
) -> Result<f64, SecularError> {
    use CoefficientName::*;
    if a <= 0.0 || bx <= 0.0 || a == bx {
        return Err(SecularError::RatioOutOfRange(a / bx));
    }
    Ok(match name {
        A2000 => a2000(a, bx),
        A1100 => a1100(a, bx),
        A4000 => a4000(a, bx),
        A3100 => a3100(a, bx),
        A2200 => a2200(a, bx),
        A2020 => a2020(a, bx),
        A1120 => a3100(a, bx), // the two coincide
        A0220 => a0220(a, bx),
        A1111 => a1111(a, bx),
        C1 => c1(a, bx),
        C2 => c2(a, bx),
        C3 => c3(a, bx),
        C4 => c4(a, bx),
        C5 => c5(a, bx),
        C6 => c6(a, bx),
        C7 => c7(a, bx),
        C8 => c8(a, bx),
        C9 => c9(a, bx),
        C10 => c10(a, bx),
        C11 => c11(a, bx),
        C12 => c12(a, bx),
        C13 => c13(a, bx),
        C14 => c14(a, bx),
    })
}

pub fn a2000(a: f64, bx: f64) -> f64 {
    let r = a / bx;
    a / (8.0 * bx * bx)
        * (-7.0 * r * b(5, 0, r) + 4.0 * (1.0 + r * r) * b(5, 1, r) - r * b(5, 2, r))
}

pub fn a1100(a: f64, bx: f64) -> f64 {
    let r = a / bx;
    a / (8.0 * bx * bx)
        * (-17.0 * r * b(5, 1, r) + 8.0 * (1.0 + r * r) * b(5, 2, r) + r * b(5, 3, r))
}

pub fn a4000(a: f64, bx: f64) -> f64 {
    let r = a / bx;
    let (r2, r3, r4, r5, r6) = powers(r);
    a / (512.0 * bx * bx)
        * ((-60.0 * r5 + 4311.0 * r3 - 300.0 * r) * b(9, 0, r)
            + 8.0 * (7.0 * r6 - 252.0 * r4 - 222.0 * r2 + 7.0) * b(9, 1, r)
            + 4.0 * (75.0 * r5 - 503.0 * r3 + 135.0 * r) * b(9, 2, r)
            + 24.0 * (23.0 * r4 + 13.0 * r2) * b(9, 3, r)
            + 37.0 * r3 * b(9, 4, r))
}

pub fn a3100(a: f64, bx: f64) -> f64 {
    let r = a / bx;
    let (r2, r3, r4, r5, r6) = powers(r);
    -a / (256.0 * bx * bx)
        * ((-744.0 * r5 + 2014.0 * r3 - 864.0 * r) * b(9, 1, r)
            + 8.0 * (28.0 * r6 - 321.0 * r4 - 321.0 * r2 + 28.0) * b(9, 2, r)
            + (552.0 * r5 + 423.0 * r3 + 672.0 * r) * b(9, 3, r)
            + (1146.0 * r4 + 1266.0 * r2) * b(9, 0, r)
            + 6.0 * (29.0 * r4 + 9.0 * r2) * b(9, 4, r)
            - 5.0 * r3 * b(9, 5, r))
}

pub fn a2200(a: f64, bx: f64) -> f64 {
    let r = a / bx;
    let (r2, r3, r4, r5, r6) = powers(r);
    a / (512.0 * bx * bx)
        * ((-324.0 * r5 + 10584.0 * r3 - 324.0 * r) * b(9, 0, r)
            + 8.0 * (17.0 * r6 - 300.0 * r4 - 300.0 * r2 + 17.0) * b(9, 1, r)
            - (1272.0 * r5 + 6337.0 * r3 + 1272.0 * r) * b(9, 2, r)
            + (648.0 * r6 + 396.0 * r4 + 396.0 * r2 + 648.0) * b(9, 3, r)
            + (348.0 * r5 + 800.0 * r3 + 348.0 * r) * b(9, 4, r)
            + (-60.0 * r4 - 60.0 * r2) * b(9, 5, r)
            + 9.0 * r3 * b(9, 6, r))
}

/// Identical bracket to [`a4000`] at twice the weight (the η²ξ² companion
/// of the η⁴ coefficient).
pub fn a2020(a: f64, bx: f64) -> f64 {
    2.0 * a4000(a, bx)
}

pub fn a0220(a: f64, bx: f64) -> f64 {
    let r = a / bx;
    let (r2, r3, r4, r5, r6) = powers(r);
    -3.0 * a / (512.0 * bx * bx)
        * ((84.0 * r5 - 8832.0 * r3 + 84.0 * r) * b(9, 0, r)
            - 8.0 * (5.0 * r6 - 652.0 * r4 - 652.0 * r2 + 5.0) * b(9, 1, r)
            - 5.0 * (328.0 * r5 - 561.0 * r3 + 328.0 * r) * b(9, 2, r)
            + (216.0 * r6 - 1020.0 * r4 - 1020.0 * r2 + 216.0) * b(9, 3, r)
            + (116.0 * r5 + 200.0 * r3 + 116.0 * r) * b(9, 4, r)
            - (20.0 * r4 + 20.0 * r2) * b(9, 5, r)
            + 3.0 * r3 * b(9, 6, r))
}

pub fn a1111(a: f64, bx: f64) -> f64 {
    let r = a / bx;
    let (r2, r3, r4, r5, r6) = powers(r);
    a / (128.0 * bx * bx)
        * ((-36.0 * r5 - 7956.0 * r3 - 36.0 * r) * b(9, 0, r)
            + 8.0 * (r6 + 828.0 * r4 + 828.0 * r2 + 1.0) * b(9, 1, r)
            + (-3096.0 * r5 + 1039.0 * r3 - 3096.0 * r) * b(9, 2, r)
            + (648.0 * r6 - 1332.0 * r4 - 1332.0 * r2 + 648.0) * b(9, 3, r)
            + (348.0 * r5 + 700.0 * r3 + 348.0 * r) * b(9, 4, r)
            - 60.0 * (r4 + r2) * b(9, 5, r)
            + 9.0 * r3 * b(9, 6, r))
}

/// `C₁(x, y) = −(y/2x²) b_{3/2,1}(y/x)`; the reflection identity makes
/// the two argument orders agree with the ordered-ratio form.
pub fn c1(x: f64, y: f64) -> f64 {
    -y / (2.0 * x * x) * b(3, 1, y / x)
}

/// `C₂(x, y) = (y/2x²) b_{3/2,2}(y/x)`, the off-diagonal companion of
/// `C₁` (equal to −a1100 of the ordered pair).
pub fn c2(x: f64, y: f64) -> f64 {
    y / (2.0 * x * x) * b(3, 2, y / x)
}

pub fn c3(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    r2 / (32.0 * aj) * (57.0 * r2 + 117.0) * b(7, 0, r)
        + r / (64.0 * aj) * (-12.0 * r4 - 291.0 * r2 - 12.0) * b(7, 1, r)
        + r2 / (32.0 * aj) * (15.0 * r2 - 45.0) * b(7, 2, r)
        + 27.0 * r3 / (64.0 * aj) * b(7, 3, r)
}

pub fn c4(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    277.0 * r3 / (32.0 * aj) * b(7, 0, r)
        + r2 / (64.0 * aj) * (-376.0 - 376.0 * r2) * b(7, 1, r)
        + r / (32.0 * aj) * (16.0 * r4 + 10.0 * r2 + 16.0) * b(7, 2, r)
        + 56.0 * r2 / (64.0 * aj) * (r2 + 1.0) * b(7, 3, r)
        + r3 / (32.0 * aj) * b(7, 4, r)
}

pub fn c5(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    r2 / (32.0 * aj) * (117.0 * r2 + 57.0) * b(7, 0, r)
        + r / (64.0 * aj) * (-12.0 * r4 - 291.0 * r2 - 12.0) * b(7, 1, r)
        + r2 / (32.0 * aj) * (-45.0 * r2 + 15.0) * b(7, 2, r)
        + 27.0 * r3 / (64.0 * aj) * b(7, 3, r)
}

pub fn c6(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    r2 / (32.0 * aj) * (71.0 * r2 + 11.0) * b(7, 0, r)
        + r / (64.0 * aj) * (-20.0 * r4 + 119.0 * r2 - 20.0) * b(7, 1, r)
        + r2 / (32.0 * aj) * (-79.0 * r2 - 19.0) * b(7, 2, r)
        - 47.0 * r3 / (64.0 * aj) * b(7, 3, r)
}

pub fn c7(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    -215.0 * r3 / (32.0 * aj) * b(7, 0, r)
        + r2 / (64.0 * aj) * (8.0 + 8.0 * r2) * b(7, 1, r)
        + r / (32.0 * aj) * (16.0 * r4 + 118.0 * r2 + 16.0) * b(7, 2, r)
        + 56.0 * r2 / (64.0 * aj) * (r2 + 1.0) * b(7, 3, r)
        + r3 / (32.0 * aj) * b(7, 4, r)
}

pub fn c8(ai: f64, aj: f64) -> f64 {
    // the b_{7/2,2} bracket mirrors c6 under the axis swap; validated
    // against the quadrature oracle
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    r2 / (32.0 * aj) * (11.0 * r2 + 71.0) * b(7, 0, r)
        + r / (64.0 * aj) * (-20.0 * r4 + 119.0 * r2 - 20.0) * b(7, 1, r)
        + r2 / (32.0 * aj) * (-19.0 * r2 - 79.0) * b(7, 2, r)
        - 47.0 * r3 / (64.0 * aj) * b(7, 3, r)
}

pub fn c9(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    r2 / (32.0 * aj) * (14.0 * r2 - 106.0) * b(7, 0, r)
        + r / (32.0 * aj) * (-4.0 * r4 + 205.0 * r2 - 4.0) * b(7, 1, r)
        + r2 / (16.0 * aj) * (-47.0 * r2 + 13.0) * b(7, 2, r)
        - 37.0 / (32.0 * aj) * r3 * b(7, 3, r)
}

pub fn c10(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    -35.0 / (32.0 * aj) * r3 * b(7, 0, r)
        + r2 / (32.0 * aj) * (4.0 * r2 + 4.0) * b(7, 1, r)
        + r / (16.0 * aj) * (8.0 * r4 - 31.0 * r2 + 8.0) * b(7, 2, r)
        + r2 / (32.0 * aj) * (28.0 * r2 + 28.0) * b(7, 3, r)
        + r3 / (32.0 * aj) * b(7, 4, r)
}

pub fn c11(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    -457.0 / (32.0 * aj) * r3 * b(7, 0, r)
        + r2 / (32.0 * aj) * (188.0 * r2 + 188.0) * b(7, 1, r)
        + r / (16.0 * aj) * (-8.0 * r4 + 85.0 * r2 - 8.0) * b(7, 2, r)
        + r2 / (32.0 * aj) * (-28.0 * r2 - 28.0) * b(7, 3, r)
        - r3 / (32.0 * aj) * b(7, 4, r)
}

pub fn c12(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    let (r2, r3, r4, _r5, _r6) = powers(r);
    r2 / (32.0 * aj) * (14.0 - 106.0 * r2) * b(7, 0, r)
        + r / (32.0 * aj) * (-4.0 * r4 + 205.0 * r2 - 4.0) * b(7, 1, r)
        + r2 / (16.0 * aj) * (-47.0 + 13.0 * r2) * b(7, 2, r)
        - 37.0 / (32.0 * aj) * r3 * b(7, 3, r)
}

pub fn c13(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    -3.0 / 64.0 * ai * ai / (aj * aj * aj) * (2.0 * b(5, 0, r) + b(5, 2, r))
}

/// Weight of the antisymmetric vertical mixture; the relative sign of
/// the two Laplace coefficients follows from the torus averages
/// ⟨cos²λᵢ cos²λⱼ/d⁵⟩ ± ⟨cosλᵢ sinλᵢ cosλⱼ sinλⱼ/d⁵⟩ and is pinned by
/// the finite-difference oracle.
pub fn c14(ai: f64, aj: f64) -> f64 {
    let r = ai / aj;
    -3.0 / 16.0 * ai * ai / (aj * aj * aj) * (b(5, 0, r) - b(5, 2, r))
}

fn powers(r: f64) -> (f64, f64, f64, f64, f64) {
    let r2 = r * r;
    (r2, r2 * r, r2 * r2, r2 * r2 * r, r2 * r2 * r2)
}
