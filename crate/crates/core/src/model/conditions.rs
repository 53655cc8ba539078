use serde::Serialize;

use super::{BoxGrid, ModelSpec};
use crate::linalg::{self, Vec3};
use crate::Result;

/// Outcome of one pointwise hypothesis on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub holds: bool,
    /// Smallest value of the tested quantity (the margin), `None` if no node
    /// was relevant.
    pub worst: Option<f64>,
    /// Largest value, for two-sided conditions.
    pub largest: Option<f64>,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub checks: Vec<ConditionCheck>,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Default)]
struct Acc {
    min: Option<f64>,
    max: Option<f64>,
    n: usize,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.min = Some(self.min.map_or(v, |m| m.min(v)));
        self.max = Some(self.max.map_or(v, |m| m.max(v)));
        self.n += 1;
    }

    fn lower(self, name: &'static str, bound: f64) -> ConditionCheck {
        ConditionCheck {
            name,
            holds: self.min.is_none_or(|m| m >= bound),
            worst: self.min,
            largest: self.max,
            nodes: self.n,
        }
    }
}

const DIRECTIONS: [Vec3; 7] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, -1.0],
];

/// Evaluate the pointwise hypotheses of the model on `grid`.
///
/// `eps` is the threshold of the Hessian non-degeneracy test, independent of
/// the model's `eps0`. Conditions:
///
/// * `ellipticity`: `eps0 ≤ gⁱʲηᵢηⱼ/|η|² ≤ c_upper` over sampled directions;
/// * `intensity`: `F ≥ eps0`;
/// * `potential_nondegenerate`: `|V − τ| + |∇V| ≥ eps0`;
/// * `ratio_gradient`: `|∇((V − τ)/F)| ≥ eps0`;
/// * `confinement` (3D): `(V − τ)/F > 0` for `|x′| < 1`, `|x₃| ≥ c0`;
/// * `well_convexity` (3D): `eps0 ≤ (x₃ − z⁰)⁻¹ ∂₃((V − τ)/F) ≤ c0`;
/// * `hessian_nondegenerate`: `|∇(V/F)| ≤ eps ⟹ |det Hess(V/F)| ≥ eps`.
pub fn check_conditions(model: &ModelSpec, grid: &BoxGrid, eps: f64) -> Result<ConditionReport> {
    let d = model.dim;
    let th = model.thresholds;
    let mut ellip = Acc::default();
    let mut inten = Acc::default();
    let mut pot = Acc::default();
    let mut ratio = Acc::default();
    let mut conf = Acc::default();
    let mut conv = Acc::default();
    let mut hess = Acc::default();

    let mut z0_cache: Vec<([f64; 2], f64)> = Vec::new();
    for x in grid.points() {
        let g = model.metric_at(&x);
        for e in DIRECTIONS.iter().filter(|e| (d..3).all(|i| e[i] == 0.0)) {
            ellip.push(linalg::quad(&g, e, e, d) / linalg::dot(e, e, d));
        }
        let f = model.scalar_intensity(&x);
        inten.push(f);
        pot.push(model.potential(&x).abs() + linalg::norm(&model.potential_grad(&x), d));
        if f < 1e-12 {
            continue;
        }
        let (gr, hs) = model.vf_grad_hess(&x, model.tau)?;
        let gn = linalg::norm(&gr, d);
        ratio.push(gn);
        if gn <= eps {
            hess.push(linalg::det(&hs, d).abs());
        }
        if d == 3 {
            let xp = [x[0], x[1]];
            let inside = x[0].hypot(x[1]) < 1.0;
            if inside && x[2].abs() >= th.c0 {
                conf.push(model.vf(&x, model.tau)?);
            }
            if x[2].abs() <= th.c0 {
                let z0 = match z0_cache.iter().find(|(p, _)| *p == xp) {
                    Some(&(_, z)) => z,
                    None => {
                        let z = crate::action::minimize_z0(model, xp)?;
                        z0_cache.push((xp, z));
                        z
                    }
                };
                let dz = x[2] - z0;
                if dz.abs() > 1e-9 * th.c0 {
                    conv.push(gr[2] / dz);
                }
            }
        }
    }

    let mut checks = vec![
        {
            let mut c = ellip.lower("ellipticity", th.eps0);
            c.holds &= c.largest.is_none_or(|m| m <= th.c_upper);
            c
        },
        inten.lower("intensity", th.eps0),
        pot.lower("potential_nondegenerate", th.eps0),
        ratio.lower("ratio_gradient", th.eps0),
    ];
    if d == 3 {
        let mut c = conf.lower("confinement", 0.0);
        c.holds = c.worst.is_none_or(|m| m > 0.0);
        checks.push(c);
        let mut c = conv.lower("well_convexity", th.eps0);
        c.holds &= c.largest.is_none_or(|m| m <= th.c0 * (1.0 + 1e-9));
        checks.push(c);
    }
    checks.push(hess.lower("hessian_nondegenerate", eps));
    Ok(ConditionReport { checks })
}
