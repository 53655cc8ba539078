//! Scalar maps with closed-form first and second derivatives.
//!
//! Polynomials are differentiated symbolically when they are built, radial
//! profiles `u(|x′|)` use the chain rule. Both are the building blocks of
//! the metric, the vector potential and the electric potential of a model.

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat3, Vec3, ZERO3, ZERO33};

/// Multivariate polynomial in `(x1, x2, x3)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: Vec<(f64, [u32; 3])>,
}

impl Poly {
    pub fn new(terms: impl IntoIterator<Item = (f64, [u32; 3])>) -> Self {
        let mut p = Poly { terms: Vec::new() };
        for (c, e) in terms {
            p.push(c, e);
        }
        p
    }

    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: f64) -> Self {
        Poly::new([(c, [0, 0, 0])])
    }

    /// `c · x_i`
    pub fn linear(i: usize, c: f64) -> Self {
        let mut e = [0; 3];
        e[i] = 1;
        Poly::new([(c, e)])
    }

    fn push(&mut self, c: f64, e: [u32; 3]) {
        if c == 0.0 {
            return;
        }
        if let Some(t) = self.terms.iter_mut().find(|t| t.1 == e) {
            t.0 += c;
        } else {
            self.terms.push((c, e));
        }
        self.terms.retain(|t| t.0 != 0.0);
    }

    pub fn terms(&self) -> &[(f64, [u32; 3])] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest power of `x_i` appearing in any term.
    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.iter().map(|t| t.1[i]).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &Vec3) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero();
        for &(c, e) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e;
                e2[i] -= 1;
                out.push(c * e[i] as f64, e2);
            }
        }
        out
    }
}

/// Polynomial in `ρ = |x′| = (x1² + x2²)^{1/2}`: `u(ρ) = Σ c_n ρⁿ`.
///
/// Odd powers produce a cone singularity on the `x3` axis; derivatives there
/// are reported from the even part only.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPoly {
    coeffs: Vec<f64>,
}

impl RadialPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        RadialPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `(u, u′, u″)` at `ρ`.
    pub fn profile(&self, rho: f64) -> (f64, f64, f64) {
        let (mut u, mut du, mut d2u) = (0.0, 0.0, 0.0);
        for (n, &c) in self.coeffs.iter().enumerate() {
            let n_i = n as i32;
            u += c * rho.powi(n_i);
            if n >= 1 {
                du += c * n as f64 * rho.powi(n_i - 1);
            }
            if n >= 2 {
                d2u += c * (n * (n - 1)) as f64 * rho.powi(n_i - 2);
            }
        }
        (u, du, d2u)
    }

    pub fn negated(&self) -> RadialPoly {
        RadialPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }

    fn eval_full(&self, x: &Vec3) -> (f64, Vec3, Mat3) {
        let rho = x[0].hypot(x[1]);
        let (u, du, d2u) = self.profile(rho);
        let mut g = ZERO3;
        let mut h = ZERO33;
        if rho < 1e-150 {
            h[0][0] = d2u;
            h[1][1] = d2u;
            return (u, g, h);
        }
        let n = [x[0] / rho, x[1] / rho];
        g[0] = du * n[0];
        g[1] = du * n[1];
        for i in 0..2 {
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[i][j] = d2u * n[i] * n[j] + du / rho * (delta - n[i] * n[j]);
            }
        }
        (u, g, h)
    }
}

/// A scalar map with its gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarMap {
    Poly {
        p: Poly,
        grad: [Poly; 3],
        hess: Box<[[Poly; 3]; 3]>,
    },
    Radial(RadialPoly),
    Sum(Vec<ScalarMap>),
}

impl ScalarMap {
    pub fn poly(p: Poly) -> Self {
        let grad = [p.derivative(0), p.derivative(1), p.derivative(2)];
        let hess = Box::new([0, 1, 2].map(|i| [0, 1, 2].map(|j| grad[i].derivative(j))));
        ScalarMap::Poly { p, grad, hess }
    }

    pub fn zero() -> Self {
        ScalarMap::poly(Poly::zero())
    }

    pub fn constant(c: f64) -> Self {
        ScalarMap::poly(Poly::constant(c))
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        match self {
            ScalarMap::Poly { p, .. } => p.eval(x),
            ScalarMap::Radial(r) => r.profile(x[0].hypot(x[1])).0,
            ScalarMap::Sum(parts) => parts.iter().map(|m| m.value(x)).sum(),
        }
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        match self {
            ScalarMap::Poly { grad, .. } => [grad[0].eval(x), grad[1].eval(x), grad[2].eval(x)],
            ScalarMap::Radial(r) => r.eval_full(x).1,
            ScalarMap::Sum(parts) => parts.iter().fold(ZERO3, |acc, m| {
                let g = m.gradient(x);
                [acc[0] + g[0], acc[1] + g[1], acc[2] + g[2]]
            }),
        }
    }

    pub fn hessian(&self, x: &Vec3) -> Mat3 {
        match self {
            ScalarMap::Poly { hess, .. } => {
                let mut h = ZERO33;
                for i in 0..3 {
                    for j in 0..3 {
                        h[i][j] = hess[i][j].eval(x);
                    }
                }
                h
            }
            ScalarMap::Radial(r) => r.eval_full(x).2,
            ScalarMap::Sum(parts) => {
                let mut h = ZERO33;
                for m in parts {
                    let hm = m.hessian(x);
                    for i in 0..3 {
                        for j in 0..3 {
                            h[i][j] += hm[i][j];
                        }
                    }
                }
                h
            }
        }
    }

    /// Whether the map can depend on `x_i` at all.
    pub fn depends_on(&self, i: usize) -> bool {
        match self {
            ScalarMap::Poly { p, .. } => p.degree_in(i) > 0,
            ScalarMap::Radial(r) => i < 2 && r.coeffs().iter().skip(1).any(|&c| c != 0.0),
            ScalarMap::Sum(parts) => parts.iter().any(|m| m.depends_on(i)),
        }
    }
}

/// JSON form of a scalar map: `{"poly": [[c, e1, e2, e3], ...]}`,
/// `{"radial": [c0, c1, ...]}`, `{"sum": [...]}` or a bare number.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ScalarSpec {
    Constant(f64),
    Tagged(TaggedScalar),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TaggedScalar {
    Poly(Vec<[f64; 4]>),
    Radial(Vec<f64>),
    Sum(Vec<ScalarSpec>),
}

impl ScalarSpec {
    pub fn build(&self) -> crate::Result<ScalarMap> {
        Ok(match self {
            ScalarSpec::Constant(c) => ScalarMap::constant(*c),
            ScalarSpec::Tagged(TaggedScalar::Poly(terms)) => {
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    let mut e = [0u32; 3];
                    for (k, slot) in e.iter_mut().enumerate() {
                        let v = t[k + 1];
                        if v < 0.0 || v.fract() != 0.0 || v > 64.0 {
                            return Err(crate::Error::Config(format!(
                                "polynomial exponent {v} must be a small non-negative integer"
                            )));
                        }
                        *slot = v as u32;
                    }
                    out.push((t[0], e));
                }
                ScalarMap::poly(Poly::new(out))
            }
            ScalarSpec::Tagged(TaggedScalar::Radial(c)) => ScalarMap::Radial(RadialPoly::new(c.clone())),
            ScalarSpec::Tagged(TaggedScalar::Sum(parts)) => {
                ScalarMap::Sum(parts.iter().map(|p| p.build()).collect::<crate::Result<_>>()?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(m: &ScalarMap, x: &Vec3) -> Vec3 {
        let s = 1e-5;
        let mut g = ZERO3;
        for i in 0..3 {
            let (mut a, mut b) = (*x, *x);
            a[i] += s;
            b[i] -= s;
            g[i] = (m.value(&a) - m.value(&b)) / (2.0 * s);
        }
        g
    }

    #[test]
    fn polynomial_derivatives_match_hand_values() {
        // x1^2 x2 + 3 x3
        let m = ScalarMap::poly(Poly::new([(1.0, [2, 1, 0]), (3.0, [0, 0, 1])]));
        let x = [0.5, -2.0, 1.0];
        assert_eq!(m.value(&x), 0.25 * -2.0 + 3.0);
        assert_eq!(m.gradient(&x), [2.0 * 0.5 * -2.0, 0.25, 3.0]);
        let h = m.hessian(&x);
        assert_eq!(h[0][0], -4.0);
        assert_eq!(h[0][1], 1.0);
        assert_eq!(h[2][2], 0.0);
    }

    #[test]
    fn radial_gradient_matches_finite_differences() {
        let m = ScalarMap::Radial(RadialPoly::new(vec![0.1, 0.0, 0.5, 0.3]));
        let x = [0.4, -0.7, 2.0];
        let g = m.gradient(&x);
        let fd = fd_grad(&m, &x);
        for i in 0..3 {
            assert!((g[i] - fd[i]).abs() < 1e-8, "{i}: {} vs {}", g[i], fd[i]);
        }
    }

    #[test]
    fn cancelled_terms_are_dropped() {
        let p = Poly::new([(1.0, [1, 0, 0]), (-1.0, [1, 0, 0])]);
        assert!(p.is_zero());
    }

    #[test]
    fn spec_parses_poly_and_radial() {
        let s: ScalarSpec = serde_json::from_str(r#"{"poly": [[2.0, 0, 0, 2], [1.0, 1, 0, 0]]}"#).unwrap();
        let m = s.build().unwrap();
        assert_eq!(m.value(&[1.0, 0.0, 2.0]), 9.0);
        let r: ScalarSpec = serde_json::from_str(r#"{"radial": [0, 0, 0.5]}"#).unwrap();
        assert!((r.build().unwrap().value(&[0.6, 0.8, 0.0]) - 0.5).abs() < 1e-15);
        let c: ScalarSpec = serde_json::from_str("1.5").unwrap();
        assert_eq!(c.build().unwrap().value(&[0.0; 3]), 1.5);
        assert!(serde_json::from_str::<ScalarSpec>(r#"{"poly": [[1.0, 0.5, 0, 0]]}"#)
            .unwrap()
            .build()
            .is_err());
    }
}
