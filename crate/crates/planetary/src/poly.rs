//! Sparse multivariate polynomials with `f64` coefficients, used for the
//! degree-truncated products of the spatial quartic assembly and for the
//! Birkhoff normal-form engine.  Exponent keys are stored in a `BTreeMap`
//! so every iteration order (and hence every floating-point reduction) is
//! deterministic.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

/// Polynomial in `nvars` variables; keys are exponent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u8>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut key = vec![0u8; nvars];
        key[i] = 1;
        let mut p = Poly::zero(nvars);
        p.terms.insert(key, 1.0);
        p
    }

    pub fn monomial(nvars: usize, exps: &[(usize, u8)], c: f64) -> Self {
        let mut key = vec![0u8; nvars];
        for &(i, e) in exps {
            key[i] += e;
        }
        let mut p = Poly::zero(nvars);
        if c != 0.0 {
            p.terms.insert(key, c);
        }
        p
    }

    pub fn add_term(&mut self, key: Vec<u8>, c: f64) {
        debug_assert_eq!(key.len(), self.nvars);
        let entry = self.terms.entry(key.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|k| k.iter().map(|&e| e as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// Drop every term of total degree above `max_deg`.
    pub fn truncate(&self, max_deg: usize) -> Self {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.iter().map(|&e| e as usize).sum::<usize>() <= max_deg)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Keep only terms of total degree exactly `deg`.
    pub fn homogeneous_part(&self, deg: usize) -> Self {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.iter().map(|&e| e as usize).sum::<usize>() == deg)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Remove stored terms with |coefficient| below `eps`.
    pub fn prune(&self, eps: f64) -> Self {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, v)| v.abs() > eps)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn mul_truncated(&self, other: &Poly, max_deg: usize) -> Poly {
        debug_assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ka, va) in &self.terms {
            let da: usize = ka.iter().map(|&e| e as usize).sum();
            for (kb, vb) in &other.terms {
                let db: usize = kb.iter().map(|&e| e as usize).sum();
                if da + db > max_deg {
                    continue;
                }
                let key: Vec<u8> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                *out.terms.entry(key).or_insert(0.0) += va * vb;
            }
        }
        out.prune(0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut sum = 0.0;
        for (k, v) in &self.terms {
            let mut m = *v;
            for (i, &e) in k.iter().enumerate() {
                for _ in 0..e {
                    m *= x[i];
                }
            }
            sum += m;
        }
        sum
    }

    pub fn partial(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (k, v) in &self.terms {
            if k[i] == 0 {
                continue;
            }
            let mut key = k.clone();
            key[i] -= 1;
            *out.terms.entry(key).or_insert(0.0) += v * (k[i] as f64);
        }
        out
    }

    /// Substitute variable `i ↦ subs[i]`, truncating products at `max_deg`.
    pub fn substitute(&self, subs: &[Poly], max_deg: usize) -> Poly {
        let nv = subs[0].nvars;
        let mut out = Poly::zero(nv);
        for (k, v) in &self.terms {
            let mut m = Poly::constant(nv, *v);
            for (i, &e) in k.iter().enumerate() {
                for _ in 0..e {
                    m = m.mul_truncated(&subs[i], max_deg);
                }
            }
            for (key, c) in m.terms {
                *out.terms.entry(key).or_insert(0.0) += c;
            }
        }
        out.prune(0.0)
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            *out.terms.entry(k.clone()).or_insert(0.0) += v;
        }
        out.prune(0.0)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            *out.terms.entry(k.clone()).or_insert(0.0) -= v;
        }
        out.prune(0.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        self.mul_truncated(rhs, usize::MAX)
    }
}

/// 3×3 matrix of polynomials; products truncate at a caller-chosen degree.
#[derive(Debug, Clone)]
pub struct PolyMat3 {
    pub e: [[Poly; 3]; 3],
}

impl PolyMat3 {
    pub fn identity(nvars: usize) -> Self {
        let z = || Poly::zero(nvars);
        let mut e = [
            [z(), z(), z()],
            [z(), z(), z()],
            [z(), z(), z()],
        ];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = Poly::constant(nvars, 1.0);
        }
        PolyMat3 { e }
    }

    pub fn transpose(&self) -> Self {
        let mut out = self.clone();
        for i in 0..3 {
            for j in 0..3 {
                out.e[i][j] = self.e[j][i].clone();
            }
        }
        out
    }

    pub fn mul_truncated(&self, rhs: &PolyMat3, max_deg: usize) -> PolyMat3 {
        let nv = self.e[0][0].nvars;
        let mut out = PolyMat3::identity(nv);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = Poly::zero(nv);
                for (k, rhs_col) in rhs.e.iter().enumerate() {
                    acc = &acc + &self.e[i][k].mul_truncated(&rhs_col[j], max_deg);
                }
                out.e[i][j] = acc;
            }
        }
        out
    }
}
