//! Problem instances: metric, magnetic and electric potentials, parameters,
//! and the field quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Mat3, Vec3, ZERO3, ZERO33};
use crate::poly::ScalarMap;
use crate::{Error, Result};

pub mod catalog;
mod conditions;

pub use conditions::{check_conditions, ConditionCheck, ConditionReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    #[default]
    #[serde(alias = "schroedinger")]
    Schrodinger,
    #[serde(rename = "pauli", alias = "schrodingerpauli")]
    SchrodingerPauli,
}

/// Half-space `{x3 > slope · x1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpace {
    pub slope: f64,
}

impl HalfSpace {
    /// Level function, positive inside.
    pub fn level(&self, x: &Vec3) -> f64 {
        x[2] - self.slope * x[0]
    }

    /// Covector `dφ`.
    pub fn normal(&self) -> Vec3 {
        [-self.slope, 0.0, 1.0]
    }
}

/// Axis-aligned box; the third axis is ignored for planar models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBox {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl DomainBox {
    pub fn new(lo: Vec3, hi: Vec3) -> Self {
        DomainBox { lo, hi }
    }

    pub fn contains(&self, x: &Vec3, dim: usize) -> bool {
        (0..dim).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }

    pub fn grid(&self, n: [usize; 3]) -> BoxGrid {
        BoxGrid { lo: self.lo, hi: self.hi, n }
    }
}

/// Tensor-product grid of nodes (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGrid {
    pub lo: Vec3,
    pub hi: Vec3,
    pub n: [usize; 3],
}

impl BoxGrid {
    /// Cubic grid of `lo..=hi` with the given step on every axis used by `dim`.
    pub fn with_step(lo: Vec3, hi: Vec3, step: f64, dim: usize) -> Self {
        let mut n = [1; 3];
        for i in 0..dim {
            n[i] = ((hi[i] - lo[i]) / step).round() as usize + 1;
        }
        BoxGrid { lo, hi, n }
    }

    pub fn step(&self, i: usize) -> f64 {
        if self.n[i] > 1 {
            (self.hi[i] - self.lo[i]) / (self.n[i] - 1) as f64
        } else {
            0.0
        }
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if self.n[axis] > 1 {
            self.lo[axis] + self.step(axis) * i as f64
        } else {
            self.lo[axis]
        }
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = Vec3> + '_ {
        let [n0, n1, n2] = self.n;
        (0..n0).flat_map(move |i| {
            (0..n1).flat_map(move |j| (0..n2).map(move |k| [self.coord(0, i), self.coord(1, j), self.coord(2, k)]))
        })
    }
}

/// Constants of the pointwise hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Lower ellipticity / intensity bound.
    pub eps0: f64,
    /// Upper ellipticity bound.
    pub c_upper: f64,
    /// Slab half-width and upper well-convexity bound.
    pub c0: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { eps0: 1e-3, c_upper: 1e3, c0: 2.0 }
    }
}

/// Field quantities at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldData {
    pub tensor: Mat3,
    pub intensity: f64,
    pub vector3: Option<Vec3>,
    pub sqrtg: f64,
    pub pseudoscalar2: Option<f64>,
}

/// A full problem instance.
///
/// The classical symbol is
/// `a(x, ξ) = Σ g^{jk}(ξ_j − μV_j)(ξ_k − μV_k) + V(x) − τ`, minus `μhF` for
/// the Pauli kind. `scalpot` stores `V` without the energy shift.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub dim: usize,
    /// Inverse metric `g^{jk}`, symmetric.
    pub metric: Box<[[ScalarMap; 3]; 3]>,
    pub vecpot: [ScalarMap; 3],
    pub scalpot: ScalarMap,
    pub mu: f64,
    pub h: f64,
    pub tau: f64,
    pub kind: OperatorKind,
    pub boundary: Option<HalfSpace>,
    pub domain: DomainBox,
    pub thresholds: Thresholds,
}

impl ModelSpec {
    /// Euclidean model with the given potentials.
    pub fn euclidean(name: &str, dim: usize, vecpot: [ScalarMap; 3], scalpot: ScalarMap, domain: DomainBox) -> Self {
        let metric = Box::new([0, 1, 2].map(|j| {
            [0, 1, 2].map(|k| if j == k && j < dim { ScalarMap::constant(1.0) } else { ScalarMap::zero() })
        }));
        ModelSpec {
            name: name.to_string(),
            dim,
            metric,
            vecpot,
            scalpot,
            mu: 1.0,
            h: 1.0,
            tau: 0.0,
            kind: OperatorKind::Schrodinger,
            boundary: None,
            domain,
            thresholds: Thresholds::default(),
        }
    }

    pub fn with_params(mut self, mu: f64, h: f64, tau: f64) -> Self {
        self.mu = mu;
        self.h = h;
        self.tau = tau;
        self
    }

    pub fn with_kind(mut self, kind: OperatorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidModel(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if !(self.mu >= 1.0) || !self.mu.is_finite() {
            return Err(Error::InvalidModel(format!("mu must be >= 1, got {}", self.mu)));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::InvalidModel(format!("h must lie in (0, 1], got {}", self.h)));
        }
        if !self.tau.is_finite() {
            return Err(Error::InvalidModel("tau must be finite".into()));
        }
        for j in 0..3 {
            for k in 0..3 {
                if self.metric[j][k] != self.metric[k][j] {
                    return Err(Error::InvalidModel(format!("metric entries ({j},{k}) and ({k},{j}) differ")));
                }
            }
        }
        if self.boundary.is_some() && self.dim != 3 {
            return Err(Error::InvalidModel("a half-space boundary needs a 3D model".into()));
        }
        Ok(())
    }

    pub fn metric_at(&self, x: &Vec3) -> Mat3 {
        let mut g = ZERO33;
        for j in 0..self.dim {
            for k in j..self.dim {
                let v = self.metric[j][k].value(x);
                g[j][k] = v;
                g[k][j] = v;
            }
        }
        g
    }

    /// `∂_i g^{jk}` as `out[i][j][k]`.
    pub fn metric_grad(&self, x: &Vec3) -> [Mat3; 3] {
        let mut out = [ZERO33; 3];
        for j in 0..self.dim {
            for k in j..self.dim {
                let d = self.metric[j][k].gradient(x);
                for i in 0..self.dim {
                    out[i][j][k] = d[i];
                    out[i][k][j] = d[i];
                }
            }
        }
        out
    }

    pub fn vecpot_at(&self, x: &Vec3) -> Vec3 {
        let mut v = ZERO3;
        for j in 0..self.dim {
            v[j] = self.vecpot[j].value(x);
        }
        v
    }

    /// `jac[j][i] = ∂_i V_j`.
    pub fn vecpot_jacobian(&self, x: &Vec3) -> Mat3 {
        let mut jac = ZERO33;
        for j in 0..self.dim {
            jac[j] = self.vecpot[j].gradient(x);
        }
        jac
    }

    /// Shifted electric potential `V − τ`.
    pub fn potential(&self, x: &Vec3) -> f64 {
        self.scalpot.value(x) - self.tau
    }

    pub fn potential_grad(&self, x: &Vec3) -> Vec3 {
        self.scalpot.gradient(x)
    }

    pub fn potential_hess(&self, x: &Vec3) -> Mat3 {
        self.scalpot.hessian(x)
    }

    /// `√g = (det g^{jk})^{-1/2}`.
    pub fn sqrt_g(&self, x: &Vec3) -> f64 {
        1.0 / linalg::det(&self.metric_at(x), self.dim).sqrt()
    }

    /// `F_{jk} = ∂_j V_k − ∂_k V_j`.
    pub fn field_tensor(&self, x: &Vec3) -> Mat3 {
        let jac = self.vecpot_jacobian(x);
        let mut f = ZERO33;
        for j in 0..self.dim {
            for k in (j + 1)..self.dim {
                let v = jac[k][j] - jac[j][k];
                f[j][k] = v;
                f[k][j] = -v;
            }
        }
        f
    }

    /// `∂_i F_{jk}` as `out[i]`.
    fn field_tensor_grad(&self, x: &Vec3) -> [Mat3; 3] {
        let hess: [Mat3; 3] = [0, 1, 2].map(|j| if j < self.dim { self.vecpot[j].hessian(x) } else { ZERO33 });
        let mut out = [ZERO33; 3];
        for (i, oi) in out.iter_mut().enumerate().take(self.dim) {
            for j in 0..self.dim {
                for k in (j + 1)..self.dim {
                    let v = hess[k][i][j] - hess[j][i][k];
                    oi[j][k] = v;
                    oi[k][j] = -v;
                }
            }
        }
        out
    }

    /// `F² = ½ Σ g^{jk} g^{lm} F_{jl} F_{km} = −½ tr(G F G F)`.
    fn intensity_sq(g: &Mat3, f: &Mat3, dim: usize) -> f64 {
        -0.5 * trace_prod4(g, f, g, f, dim)
    }

    pub fn scalar_intensity(&self, x: &Vec3) -> f64 {
        let f = self.field_tensor(x);
        match self.dim {
            2 => f[0][1].abs() / self.sqrt_g(x),
            _ => Self::intensity_sq(&self.metric_at(x), &f, 3).max(0.0).sqrt(),
        }
    }

    /// Contravariant field `F^j = (1/(2√g)) Σ ε^{jkl} F_{kl}`.
    pub fn field_vector_3d(&self, x: &Vec3) -> Vec3 {
        let f = self.field_tensor(x);
        let s = self.sqrt_g(x);
        [f[1][2] / s, f[2][0] / s, f[0][1] / s]
    }

    pub fn field(&self, x: &Vec3) -> FieldData {
        let tensor = self.field_tensor(x);
        let sqrtg = self.sqrt_g(x);
        FieldData {
            tensor,
            intensity: self.scalar_intensity(x),
            vector3: (self.dim == 3).then(|| self.field_vector_3d(x)),
            sqrtg,
            pseudoscalar2: (self.dim == 2).then(|| tensor[0][1] / sqrtg),
        }
    }

    /// Gradient of the scalar intensity, assembled from `∇(F²)/(2F)`.
    pub fn intensity_grad(&self, x: &Vec3) -> Vec3 {
        let d = self.dim;
        let g = self.metric_at(x);
        let f = self.field_tensor(x);
        let dg = self.metric_grad(x);
        let df = self.field_tensor_grad(x);
        let f2 = Self::intensity_sq(&g, &f, d);
        if f2 <= 0.0 {
            return ZERO3;
        }
        let big_f = f2.sqrt();
        let mut out = ZERO3;
        for i in 0..d {
            let d_f2 = -(trace_prod4(&dg[i], &f, &g, &f, d) + trace_prod4(&g, &df[i], &g, &f, d));
            out[i] = d_f2 / (2.0 * big_f);
        }
        out
    }

    /// Hessian of `F` by central differences of [`Self::intensity_grad`].
    pub fn intensity_hess(&self, x: &Vec3) -> Mat3 {
        let mut h = ZERO33;
        for j in 0..self.dim {
            let s = 1e-5 * x[j].abs().max(1.0);
            let (mut a, mut b) = (*x, *x);
            a[j] += s;
            b[j] -= s;
            let ga = self.intensity_grad(&a);
            let gb = self.intensity_grad(&b);
            for i in 0..self.dim {
                h[i][j] = (ga[i] - gb[i]) / (2.0 * s);
            }
        }
        for i in 0..self.dim {
            for j in 0..i {
                let m = 0.5 * (h[i][j] + h[j][i]);
                h[i][j] = m;
                h[j][i] = m;
            }
        }
        h
    }

    /// `(V − τ)/F` at `x` for an explicit energy level.
    pub fn vf(&self, x: &Vec3, tau: f64) -> Result<f64> {
        let f = self.scalar_intensity(x);
        if f < 1e-12 {
            return Err(Error::Hazard { what: "field intensity below 1e-12".into(), at: *x });
        }
        Ok((self.scalpot.value(x) - tau) / f)
    }

    /// Gradient and Hessian of `(V − τ)/F` by the quotient rule.
    pub fn vf_grad_hess(&self, x: &Vec3, tau: f64) -> Result<(Vec3, Mat3)> {
        let f = self.scalar_intensity(x);
        if f < 1e-12 {
            return Err(Error::Hazard { what: "field intensity below 1e-12".into(), at: *x });
        }
        let w = self.scalpot.value(x) - tau;
        let dw = self.scalpot.gradient(x);
        let hw = self.scalpot.hessian(x);
        let df = self.intensity_grad(x);
        let hf = self.intensity_hess(x);
        let d = self.dim;
        let mut grad = ZERO3;
        let mut hess = ZERO33;
        for i in 0..d {
            grad[i] = dw[i] / f - w * df[i] / (f * f);
            for j in 0..d {
                hess[i][j] = hw[i][j] / f - (dw[i] * df[j] + df[i] * dw[j]) / (f * f) - w * hf[i][j] / (f * f)
                    + 2.0 * w * df[i] * df[j] / (f * f * f);
            }
        }
        Ok((grad, hess))
    }

    /// True when the metric is constant and the vector potential is affine,
    /// so the intensity is constant in space.
    pub fn field_is_polynomial_const(&self) -> bool {
        let metric_const = (0..self.dim).all(|j| (0..self.dim).all(|k| !(0..3).any(|i| self.metric[j][k].depends_on(i))));
        let affine = self.vecpot.iter().all(|v| match v {
            ScalarMap::Poly { p, .. } => p.terms().iter().all(|(_, e)| e.iter().sum::<u32>() <= 1),
            _ => false,
        });
        metric_const && affine
    }

    /// Kinetic momenta `P_j = ξ_j − μV_j(x)`.
    pub fn kinetic(&self, x: &Vec3, xi: &Vec3) -> Vec3 {
        let v = self.vecpot_at(x);
        let mut p = ZERO3;
        for j in 0..self.dim {
            p[j] = xi[j] - self.mu * v[j];
        }
        p
    }

    /// Classical symbol `a(x, ξ)`.
    pub fn hamiltonian(&self, x: &Vec3, xi: &Vec3) -> f64 {
        let p = self.kinetic(x, xi);
        let g = self.metric_at(x);
        let mut a = linalg::quad(&g, &p, &p, self.dim) + self.potential(x);
        if self.kind == OperatorKind::SchrodingerPauli {
            a -= self.mu * self.h * self.scalar_intensity(x);
        }
        a
    }

    /// Hamilton's equations: returns `(ẋ, ξ̇) = (∂_ξ a, −∂_x a)`.
    pub fn hamilton_rhs(&self, x: &Vec3, xi: &Vec3) -> (Vec3, Vec3) {
        let d = self.dim;
        let p = self.kinetic(x, xi);
        let g = self.metric_at(x);
        let gp = linalg::mat_vec(&g, &p, d);
        let dg = self.metric_grad(x);
        let jac = self.vecpot_jacobian(x);
        let dv = self.scalpot.gradient(x);
        let df = if self.kind == OperatorKind::SchrodingerPauli {
            self.intensity_grad(x)
        } else {
            ZERO3
        };
        let mut xdot = ZERO3;
        let mut xidot = ZERO3;
        for j in 0..d {
            xdot[j] = 2.0 * gp[j];
        }
        for i in 0..d {
            let mut da = linalg::quad(&dg[i], &p, &p, d) + dv[i];
            for j in 0..d {
                da -= 2.0 * self.mu * gp[j] * jac[j][i];
            }
            da -= self.mu * self.h * df[i];
            xidot[i] = -da;
        }
        (xdot, xidot)
    }
}

/// `tr(A B C D)` over the leading `dim × dim` blocks.
fn trace_prod4(a: &Mat3, b: &Mat3, c: &Mat3, d: &Mat3, dim: usize) -> f64 {
    let mut ab = ZERO33;
    let mut cd = ZERO33;
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                ab[i][j] += a[i][k] * b[k][j];
                cd[i][j] += c[i][k] * d[k][j];
            }
        }
    }
    let mut t = 0.0;
    for i in 0..dim {
        for k in 0..dim {
            t += ab[i][k] * cd[k][i];
        }
    }
    t
}

/// Max over the grid of `|Σ_j ∂_j(F^j √g)|` by second-order central
/// differences with the grid step.
pub fn solenoidal_residual(model: &ModelSpec, grid: &BoxGrid) -> f64 {
    solenoidal_residual_of(grid, |x| {
        let s = model.sqrt_g(x);
        linalg::scale(&model.field_vector_3d(x), s)
    })
}

/// Same diagnostic for an arbitrary densitised vector field `x ↦ F^j √g`.
pub fn solenoidal_residual_of<G>(grid: &BoxGrid, field: G) -> f64
where
    G: Fn(&Vec3) -> Vec3,
{
    let mut worst: f64 = 0.0;
    for x in grid.points() {
        let mut div = 0.0;
        for j in 0..3 {
            let s = grid.step(j);
            if s == 0.0 {
                continue;
            }
            let (mut a, mut b) = (x, x);
            a[j] += s;
            b[j] -= s;
            div += (field(&a)[j] - field(&b)[j]) / (2.0 * s);
        }
        worst = worst.max(div.abs());
    }
    worst
}
