//! Landau ladders, exact eigenvalue counts for separable models, fiber
//! counts by Sturm sequences, Bohr–Sommerfeld counts and the second-term
//! integral `(2π)⁻¹ μ h⁻¹ Σ_j ∫ n(x′; r_j) dx′`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action;
use crate::model::{ModelSpec, OperatorKind};
use crate::sturm::Tridiagonal;
use crate::{Error, Result};

mod isotropic;
mod lattice;

pub use isotropic::{isotropic_exact_count, IsotropicParams};
pub use lattice::{lattice_count, lattice_weyl};

/// Transverse levels `r_j`: `(2j+1)μh` (Schrödinger) or `2jμh` (Pauli).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandauLadder {
    pub kind: OperatorKind,
    pub mu: f64,
    pub h: f64,
    pub r_values: Vec<f64>,
    /// Largest retained index; `None` when no level lies below `r̄`.
    pub j_max: Option<usize>,
}

/// Levels with `r_j < rbar_max`; higher ones close every well.
pub fn landau_ladder(kind: OperatorKind, mu: f64, h: f64, rbar_max: f64) -> LandauLadder {
    let base = match kind {
        OperatorKind::Schrodinger => mu * h,
        OperatorKind::SchrodingerPauli => 0.0,
    };
    let mut r_values = Vec::new();
    let mut j = 0usize;
    loop {
        let r = base + 2.0 * j as f64 * mu * h;
        if r >= rbar_max {
            break;
        }
        r_values.push(r);
        j += 1;
    }
    let j_max = r_values.len().checked_sub(1);
    LandauLadder { kind, mu, h, r_values, j_max }
}

pub fn model_ladder(model: &ModelSpec, rbar_max: f64) -> LandauLadder {
    landau_ladder(model.kind, model.mu, model.h, rbar_max)
}

/// Maximum of `r̄(x′)` over an `n × n` node grid of the box.
pub fn max_rbar(model: &ModelSpec, lo: [f64; 2], hi: [f64; 2], n: usize) -> Result<f64> {
    let nodes = node_grid(lo, hi, n);
    let best = nodes
        .par_iter()
        .filter_map(|&xp| action::rbar(model, xp).ok())
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::InvalidModel("no fiber in the box has a well".into()));
    }
    Ok(best)
}

fn node_grid(lo: [f64; 2], hi: [f64; 2], n: usize) -> Vec<[f64; 2]> {
    let c = |a: f64, b: f64, i: usize| if n == 1 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    (0..n).flat_map(|i| (0..n).map(move |j| [c(lo[0], hi[0], i), c(lo[1], hi[1], j)])).collect()
}

/// Sturm–Liouville problem `−h² m⁻¹ (p u′)′ + v u` on `[a, b]` with
/// Dirichlet ends; a face with `p = 0` (the origin in radial problems)
/// carries no flux.
pub(crate) struct SturmLiouville<'a> {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub p: &'a (dyn Fn(f64) -> f64 + Sync),
    pub m: &'a (dyn Fn(f64) -> f64 + Sync),
    pub v: &'a (dyn Fn(f64) -> f64 + Sync),
}

impl SturmLiouville<'_> {
    /// Symmetrised cell-centred discretisation with `n` cells.
    pub fn assemble(&self, n: usize) -> Tridiagonal {
        let dx = (self.b - self.a) / n as f64;
        let c = self.h * self.h / (dx * dx);
        let s = |i: usize| self.a + (i as f64 + 0.5) * dx;
        let face = |i: usize| (self.p)(self.a + i as f64 * dx);
        let ms: Vec<f64> = (0..n).map(|i| (self.m)(s(i))).collect();
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let left = if i == 0 { 2.0 * face(0) } else { face(i) };
            let right = if i + 1 == n { 2.0 * face(n) } else { face(i + 1) };
            diag.push(c * (left + right) / ms[i] + (self.v)(s(i)));
            if i + 1 < n {
                off.push(-c * face(i + 1) / (ms[i] * ms[i + 1]).sqrt());
            }
        }
        Tridiagonal::new(diag, off)
    }

    /// Eigenvalues below `upper` on `n` and `2n` cells, combined by one
    /// Richardson step.
    pub fn richardson_eigenvalues(&self, n: usize, upper: f64) -> Vec<f64> {
        let tol = 1e-13 * upper.abs().max(1.0);
        let coarse = self.assemble(n);
        let fine = self.assemble(2 * n);
        let lo = coarse.bounds().0.min(fine.bounds().0) - 1.0;
        // eigenvalues rise under refinement; look a little above on the coarse grid
        let ec = coarse.eigenvalues_in(lo, upper, tol);
        let ef = fine.eigenvalues_in(lo, upper, tol);
        ec.iter().zip(&ef).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
    }
}

/// Interval around `center` beyond which the potential exceeds `level` by
/// at least 0.5 and the Agmon distance `∫ (v − level)^{1/2} / h` exceeds 36.
pub(crate) fn confining_span(
    v: &dyn Fn(f64) -> f64,
    center: f64,
    level: f64,
    h: f64,
    floor: Option<f64>,
    limit: f64,
) -> Result<(f64, f64)> {
    let walk = |dir: f64| -> Result<f64> {
        let mut z = center;
        let mut agmon = 0.0;
        let mut ds = 1e-3 * (1.0 + center.abs());
        loop {
            let zn = z + dir * ds;
            if let Some(f) = floor {
                if zn <= f {
                    return Ok(f);
                }
            }
            if (zn - center).abs() > limit {
                return Err(Error::NonConfinement(format!(
                    "potential stays within 0.5 of the level {level} up to distance {limit}"
                )));
            }
            let excess = v(zn) - level;
            if excess > 0.0 {
                agmon += excess.sqrt() * ds / h;
            }
            z = zn;
            if excess >= 0.5 && agmon >= 36.0 {
                return Ok(z);
            }
            ds = (ds * 1.05).min(0.02 * (1.0 + center.abs()));
        }
    };
    Ok((walk(-1.0)?, walk(1.0)?))
}

/// Minimum of `v` on `[−c, c]`: coarse sampling then golden section.
fn minimise_on(v: &dyn Fn(f64) -> f64, c: f64) -> (f64, f64) {
    let n = 200;
    let z = |i: usize| -c + 2.0 * c * i as f64 / n as f64;
    let best = (0..=n).min_by(|&a, &b| v(z(a)).total_cmp(&v(z(b)))).unwrap_or(0);
    let (mut a, mut b) = (z(best.saturating_sub(1)), z((best + 1).min(n)));
    let g = 0.618_033_988_749_894_9;
    while b - a > 1e-10 * c {
        let c1 = b - g * (b - a);
        let c2 = a + g * (b - a);
        if v(c1) < v(c2) {
            b = c2;
        } else {
            a = c1;
        }
    }
    let m = 0.5 * (a + b);
    (m, v(m))
}

/// Fiber operator `−h² ∂₃ g³³ ∂₃ + (V − τ) + rF` over `x′`.
struct FiberOperator<'a> {
    model: &'a ModelSpec,
    xp: [f64; 2],
    r: f64,
}

impl FiberOperator<'_> {
    fn potential(&self, z: f64) -> f64 {
        let x = [self.xp[0], self.xp[1], z];
        self.model.potential(&x) + self.r * self.model.scalar_intensity(&x)
    }

    fn stiffness(&self, z: f64) -> f64 {
        self.model.metric_at(&[self.xp[0], self.xp[1], z])[2][2]
    }

    fn min(&self) -> (f64, f64) {
        minimise_on(&|z| self.potential(z), self.model.thresholds.c0)
    }

    fn eigenvalues(&self, upper: f64, grid_n: usize, refine: u32) -> Result<Vec<f64>> {
        let (z0, vmin) = self.min();
        if vmin >= upper {
            return Ok(Vec::new());
        }
        let v = |z: f64| self.potential(z);
        let (a, b) = confining_span(&v, z0, upper, self.model.h, None, 64.0 * self.model.thresholds.c0)?;
        let n = resolution(b - a, upper - vmin, self.model.h, grid_n) << refine;
        let sl = SturmLiouville { a, b, h: self.model.h, p: &|z| self.stiffness(z), m: &|_| 1.0, v: &v };
        Ok(sl.richardson_eigenvalues(n, upper))
    }
}

/// Cells needed for about eight cells per local wavelength over `[a, b]`.
pub(crate) fn resolution(width: f64, depth: f64, h: f64, min_cells: usize) -> usize {
    let n = (8.0 * width * depth.max(0.0).sqrt() / h).ceil() as usize;
    n.max(min_cells).max(16)
}

/// Eigenvalues below `upper` of the fiber operator over `x′`, Richardson
/// extrapolated from two nested grids.
pub fn fiber_eigenvalues(model: &ModelSpec, xp: [f64; 2], r: f64, upper: f64, grid_n: usize) -> Result<Vec<f64>> {
    FiberOperator { model, xp, r }.eigenvalues(upper, grid_n, 0)
}

const MAX_REFINE: u32 = 8;

/// Number of eigenvalues below `level` of the fiber operator over `x′`.
/// The grid is doubled until two consecutive extrapolated counts agree.
pub fn fiber_count(model: &ModelSpec, xp: [f64; 2], r: f64, level: f64, grid_n: usize) -> Result<usize> {
    let op = FiberOperator { model, xp, r };
    let margin = 0.05 * (1.0 + level.abs());
    let count = |refine| -> Result<usize> {
        Ok(op.eigenvalues(level + margin, grid_n, refine)?.iter().filter(|&&e| e < level).count())
    };
    let mut last = count(0)?;
    for refine in 1..=MAX_REFINE {
        let next = count(refine)?;
        if next == last {
            return Ok(next);
        }
        last = next;
    }
    Err(Error::NonConvergence { nodes: grid_n << MAX_REFINE })
}

/// Semiclassical fiber count `η(x′, r) / (πh)`.
pub fn bohr_sommerfeld_count(model: &ModelSpec, xp: [f64; 2], r: f64) -> Result<f64> {
    Ok(action::eta(model, xp, r)? / (PI * model.h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SecondTermMethod {
    /// Fiber eigenvalues on nodes, bicubic interpolation, exact area of
    /// the sub-level sets of the piecewise-linear interpolant.
    #[default]
    FiberContour,
    /// Fiber counts at cell midpoints.
    FiberMidpoint,
    /// `η/(πh)` at cell midpoints.
    BohrSommerfeld,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondTermOptions {
    pub nodes: usize,
    pub refine: usize,
    pub grid_n: usize,
    pub method: SecondTermMethod,
}

impl Default for SecondTermOptions {
    fn default() -> Self {
        SecondTermOptions { nodes: 65, refine: 16, grid_n: 64, method: SecondTermMethod::FiberContour }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondTerm {
    pub value: f64,
    /// `∫ n(x′; r_j) dx′` per ladder level.
    pub per_level: Vec<f64>,
    /// Some fiber on the box boundary has a level below zero, so the
    /// integrand is truncated.
    pub touches_boundary: bool,
}

/// `(2π)⁻¹ μ h⁻¹ Σ_j ∫ n(x′; r_j) dx′` over the box `[lo, hi]`, where
/// `n(x′; r)` counts eigenvalues below zero of the fiber operator.
pub fn second_term_integral(
    model: &ModelSpec,
    ladder: &LandauLadder,
    lo: [f64; 2],
    hi: [f64; 2],
    opts: &SecondTermOptions,
) -> Result<SecondTerm> {
    let mut per_level = Vec::with_capacity(ladder.r_values.len());
    let mut touches = false;
    for &r in &ladder.r_values {
        let (area, t) = match opts.method {
            SecondTermMethod::FiberContour => contour_area(model, r, lo, hi, opts)?,
            SecondTermMethod::FiberMidpoint => midpoint_area(model, r, lo, hi, opts, |xp| {
                fiber_count(model, xp, r, 0.0, opts.grid_n).map(|c| c as f64)
            })?,
            SecondTermMethod::BohrSommerfeld => {
                let o = SecondTermOptions { nodes: (opts.nodes - 1) * 4 + 1, ..*opts };
                midpoint_area(model, r, lo, hi, &o, |xp| bohr_sommerfeld_count(model, xp, r))?
            }
        };
        per_level.push(area);
        touches |= t;
    }
    let value = model.mu / (2.0 * PI * model.h) * per_level.iter().sum::<f64>();
    Ok(SecondTerm { value, per_level, touches_boundary: touches })
}

fn midpoint_area<F>(
    _model: &ModelSpec,
    _r: f64,
    lo: [f64; 2],
    hi: [f64; 2],
    opts: &SecondTermOptions,
    f: F,
) -> Result<(f64, bool)>
where
    F: Fn([f64; 2]) -> Result<f64> + Sync,
{
    let n = opts.nodes - 1;
    let d = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| f([lo[0] + (i as f64 + 0.5) * d[0], lo[1] + (j as f64 + 0.5) * d[1]]))
        .collect::<Result<_>>()?;
    let touches = cells.iter().zip(&vals).any(|(&(i, j), &v)| (i == 0 || j == 0 || i + 1 == n || j + 1 == n) && v > 0.0);
    Ok((vals.iter().sum::<f64>() * d[0] * d[1], touches))
}

/// Area of `{x′ : λ_m(x′) < 0}` summed over fiber eigenvalue indices `m`.
fn contour_area(model: &ModelSpec, r: f64, lo: [f64; 2], hi: [f64; 2], opts: &SecondTermOptions) -> Result<(f64, bool)> {
    let n = opts.nodes;
    let nodes = node_grid(lo, hi, n);
    // bound on the node-to-node change of the fiber minimum sets the window
    let mins: Vec<f64> = nodes.par_iter().map(|&xp| FiberOperator { model, xp, r }.min().1).collect();
    let mut jump: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n {
                jump = jump.max((mins[(i + 1) * n + j] - mins[i * n + j]).abs());
            }
            if j + 1 < n {
                jump = jump.max((mins[i * n + j + 1] - mins[i * n + j]).abs());
            }
        }
    }
    let window = 4.0 * jump + 0.05;
    let eig: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&xp| FiberOperator { model, xp, r }.eigenvalues(window, opts.grid_n, 0))
        .collect::<Result<_>>()?;
    let levels = eig.iter().map(|e| e.iter().filter(|&&x| x < 0.0).count()).max().unwrap_or(0);
    let touches = (0..n).any(|k| {
        [(0, k), (n - 1, k), (k, 0), (k, n - 1)].iter().any(|&(i, j)| eig[i * n + j].first().is_some_and(|&e| e < 0.0))
    });
    let d = [(hi[0] - lo[0]) / (n - 1) as f64, (hi[1] - lo[1]) / (n - 1) as f64];
    // collected before summing so the result does not depend on scheduling
    let areas: Vec<f64> = (0..levels)
        .into_par_iter()
        .map(|m| {
            let f: Vec<f64> = eig.iter().map(|e| e.get(m).copied().unwrap_or(f64::NAN)).collect();
            sublevel_area(&f, n, window, opts.refine) * d[0] * d[1]
        })
        .collect();
    let area: f64 = areas.iter().sum();
    Ok((area, touches))
}

/// Area in cell units of `{f < 0}` for node values `f` on an `n × n` grid;
/// `NaN` marks values known to exceed `missing`.
fn sublevel_area(f: &[f64], n: usize, missing: f64, refine: usize) -> f64 {
    let at = |i: isize, j: isize| -> Option<f64> {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            return None;
        }
        let v = f[i as usize * n + j as usize];
        if v.is_nan() {
            None
        } else {
            Some(v)
        }
    };
    let mut total = 0.0;
    let s = 1.0 / refine as f64;
    let mut sub = vec![0.0; (refine + 1) * (refine + 1)];
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let (ii, jj) = (i as isize, j as isize);
            let corners = [at(ii, jj), at(ii + 1, jj), at(ii, jj + 1), at(ii + 1, jj + 1)];
            if corners.iter().all(|c| c.is_none_or(|v| v > 0.0)) && corners.iter().any(|c| c.is_none()) {
                continue;
            }
            let fill = |c: Option<f64>| c.unwrap_or(missing);
            if corners.iter().all(|c| c.is_some_and(|v| v < 0.0)) && corners.iter().all(|c| c.is_some()) {
                let stencil_neg = (-1..3).all(|a| (-1..3).all(|b| at(ii + a, jj + b).is_some_and(|v| v < 0.0)));
                if stencil_neg {
                    total += 1.0;
                    continue;
                }
            }
            let mut stencil = [[0.0; 4]; 4];
            let mut full = true;
            for (a, row) in stencil.iter_mut().enumerate() {
                for (b, v) in row.iter_mut().enumerate() {
                    match at(ii + a as isize - 1, jj + b as isize - 1) {
                        Some(x) => *v = x,
                        None => full = false,
                    }
                }
            }
            for p in 0..=refine {
                for q in 0..=refine {
                    let (t, u) = (p as f64 * s, q as f64 * s);
                    sub[p * (refine + 1) + q] = if full {
                        bicubic(&stencil, t, u)
                    } else {
                        let c = corners.map(fill);
                        (1.0 - t) * (1.0 - u) * c[0] + t * (1.0 - u) * c[1] + (1.0 - t) * u * c[2] + t * u * c[3]
                    };
                }
            }
            let mut a = 0.0;
            for p in 0..refine {
                for q in 0..refine {
                    let v = |dp: usize, dq: usize| sub[(p + dp) * (refine + 1) + q + dq];
                    a += triangle_fraction(v(0, 0), v(1, 0), v(1, 1)) + triangle_fraction(v(0, 0), v(1, 1), v(0, 1));
                }
            }
            total += a * 0.5 * s * s;
        }
    }
    total
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    0.5 * (2.0 * p[1]
        + (p[2] - p[0]) * t
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t * t
        + (3.0 * p[1] - p[0] - 3.0 * p[2] + p[3]) * t * t * t)
}

fn bicubic(s: &[[f64; 4]; 4], t: f64, u: f64) -> f64 {
    let rows = [0, 1, 2, 3].map(|a| catmull_rom(s[a], u));
    catmull_rom(rows, t)
}

/// Fraction of a triangle where the linear interpolant of the vertex
/// values is negative.
pub(crate) fn triangle_fraction(a: f64, b: f64, c: f64) -> f64 {
    let neg = [a, b, c].iter().filter(|&&v| v < 0.0).count();
    let lone = |x: f64, y: f64, z: f64| x * x / ((x - y) * (x - z));
    match neg {
        0 => 0.0,
        3 => 1.0,
        1 => {
            if a < 0.0 {
                lone(a, b, c)
            } else if b < 0.0 {
                lone(b, a, c)
            } else {
                lone(c, a, b)
            }
        }
        _ => {
            1.0 - if a >= 0.0 {
                lone(a, b, c)
            } else if b >= 0.0 {
                lone(b, a, c)
            } else {
                lone(c, a, b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMethod {
    Lattice,
    IsotropicRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxMethod {
    LatticeWeyl,
    SecondTerm(SecondTermMethod),
}

/// Exact count, its approximation and the remainder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountResult {
    pub mu: f64,
    pub h: f64,
    pub tau: f64,
    pub kind: OperatorKind,
    pub n_exact: u64,
    pub n_approx: f64,
    pub remainder: f64,
    pub method_exact: ExactMethod,
    pub method_approx: ApproxMethod,
}

impl CountResult {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: f64,
        h: f64,
        tau: f64,
        kind: OperatorKind,
        n_exact: u64,
        n_approx: f64,
        method_exact: ExactMethod,
        method_approx: ApproxMethod,
    ) -> Self {
        CountResult { mu, h, tau, kind, n_exact, n_approx, remainder: n_exact as f64 - n_approx, method_exact, method_approx }
    }
}

#[cfg(test)]
mod tests;
