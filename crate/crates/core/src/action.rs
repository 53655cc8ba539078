//! One-dimensional wells along vertical magnetic lines: the minimiser `z⁰`
//! of `(V − τ)/F`, the maximal Landau parameter `r̄`, turning points, the
//! action `η(x′, r) = ∫ (−(V − τ) − rF)^{1/2} ds`, the bounce period `T`, and
//! non-degeneracy diagnostics of `η` in `x′`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{self, Vec3};
use crate::model::ModelSpec;
use crate::{Error, Result};

/// Well data along the fiber over `x′` at Landau parameter `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurningData {
    pub z0: f64,
    pub rbar: f64,
    pub zminus: f64,
    pub zplus: f64,
    pub level_r: f64,
}

/// `r`-independent data of one fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberProfile {
    pub xp: [f64; 2],
    pub z0: f64,
    pub rbar: f64,
    /// `∂²_{x₃}((V − τ)/F)` at `z0`.
    pub curvature: f64,
}

/// The restriction of the model to the vertical line over `x′`.
struct Fiber<'a> {
    model: &'a ModelSpec,
    xp: [f64; 2],
}

impl Fiber<'_> {
    fn x(&self, z: f64) -> Vec3 {
        [self.xp[0], self.xp[1], z]
    }

    /// `(V − τ, F)` at height `z`.
    fn wf(&self, z: f64) -> (f64, f64) {
        let x = self.x(z);
        (self.model.potential(&x), self.model.scalar_intensity(&x))
    }

    fn q(&self, z: f64) -> f64 {
        let (w, f) = self.wf(z);
        w / f
    }

    fn dq(&self, z: f64) -> f64 {
        let x = self.x(z);
        let (w, f) = self.wf(z);
        let dw = self.model.potential_grad(&x)[2];
        let df = self.model.intensity_grad(&x)[2];
        (dw * f - w * df) / (f * f)
    }

    fn phi(&self, z: f64, r: f64) -> f64 {
        let (w, f) = self.wf(z);
        w + r * f
    }

    fn dphi(&self, z: f64, r: f64) -> f64 {
        let x = self.x(z);
        self.model.potential_grad(&x)[2] + r * self.model.intensity_grad(&x)[2]
    }

    /// Arclength factor `√g₃₃` along the vertical line.
    fn ds(&self, z: f64) -> f64 {
        let g = self.model.metric_at(&self.x(z));
        match linalg::inverse(&g, 3) {
            Some(lower) => lower[2][2].sqrt(),
            None => f64::NAN,
        }
    }
}

fn check_fiber(model: &ModelSpec, xp: [f64; 2]) -> Result<()> {
    if model.dim != 3 {
        return Err(Error::InvalidModel("the action machinery needs a 3D model".into()));
    }
    let x = [xp[0], xp[1], 0.0];
    let f = model.field_vector_3d(&x);
    if f[0].abs() + f[1].abs() > 1e-12 * f[2].abs().max(1e-300) || f[2] == 0.0 {
        return Err(Error::FiberNotVertical { at: x });
    }
    Ok(())
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Unique minimiser of `(V − τ)/F` in `x₃ ∈ [−C₀, C₀]`.
pub fn minimize_z0(model: &ModelSpec, xp: [f64; 2]) -> Result<f64> {
    check_fiber(model, xp)?;
    let fib = Fiber { model, xp };
    let c0 = model.thresholds.c0;
    let n = 40;
    let mut changes = 0;
    let mut last = 0.0f64;
    for i in 0..=n {
        let z = -c0 + 2.0 * c0 * i as f64 / n as f64;
        let d = fib.dq(z);
        if d != 0.0 {
            if last != 0.0 && d.signum() != last.signum() {
                changes += 1;
            }
            last = d;
        }
    }
    if changes > 1 {
        return Err(Error::MultipleMinima { xp, sign_changes: changes });
    }
    if !(fib.dq(-c0) < 0.0 && fib.dq(c0) > 0.0) {
        return Err(Error::NonConfinement(format!(
            "(V - tau)/F has no interior minimum in |x3| <= {c0} over x' = {xp:?}"
        )));
    }
    let (mut a, mut b) = (-c0, c0);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (fib.q(c), fib.q(d));
    while b - a > 1e-7 * c0 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = fib.q(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = fib.q(d);
        }
    }
    let mut z = 0.5 * (a + b);
    // Newton polish on ∂₃q with a difference quotient for ∂²₃q
    for _ in 0..8 {
        let g = fib.dq(z);
        if g == 0.0 {
            break;
        }
        let s = 1e-6 * c0;
        let h2 = (fib.dq(z + s) - fib.dq(z - s)) / (2.0 * s);
        if !(h2 > 0.0) {
            break;
        }
        let step = g / h2;
        let zn = (z - step).clamp(-c0, c0);
        if fib.q(zn) > fib.q(z) + 1e-15 * fib.q(z).abs() {
            break;
        }
        z = zn;
        if step.abs() < 1e-15 * c0 {
            break;
        }
    }
    Ok(z)
}

pub fn fiber_profile(model: &ModelSpec, xp: [f64; 2]) -> Result<FiberProfile> {
    let z0 = minimize_z0(model, xp)?;
    let fib = Fiber { model, xp };
    let s = 1e-4 * model.thresholds.c0;
    let curvature = (fib.q(z0 + s) - 2.0 * fib.q(z0) + fib.q(z0 - s)) / (s * s);
    Ok(FiberProfile { xp, z0, rbar: -fib.q(z0), curvature })
}

/// `r̄(x′) = −((V − τ)/F)(x′, z⁰)`.
pub fn rbar(model: &ModelSpec, xp: [f64; 2]) -> Result<f64> {
    Ok(fiber_profile(model, xp)?.rbar)
}

/// Root of `φ(z) = V − τ + rF` between `inner` (where `φ < 0`) and the
/// first outward point where `φ > 0`.
fn turning_point(fib: &Fiber, r: f64, inner: f64, dir: f64) -> Result<f64> {
    let c0 = fib.model.thresholds.c0;
    let mut span = (c0 - dir * inner).max(0.25 * c0);
    let mut outer = inner + dir * span;
    let mut tries = 0;
    while fib.phi(outer, r) <= 0.0 {
        span *= 2.0;
        outer = inner + dir * span;
        tries += 1;
        if tries > 12 {
            return Err(Error::NonConfinement(format!(
                "V + rF stays negative up to x3 = {outer} over x' = {:?}",
                fib.xp
            )));
        }
    }
    let (mut a, mut b) = (inner, outer);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-9 * c0 {
            break;
        }
        let m = 0.5 * (a + b);
        if fib.phi(m, r) <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let mut z = 0.5 * (a + b);
    for _ in 0..20 {
        let p = fib.phi(z, r);
        if p.abs() <= 1e-14 {
            break;
        }
        let dp = fib.dphi(z, r);
        if dp == 0.0 {
            break;
        }
        let zn = z - p / dp;
        if !((zn - a) * (zn - b) <= 0.0) {
            break;
        }
        if (zn - z).abs() <= 1e-16 * z.abs().max(1e-300) {
            z = zn;
            break;
        }
        z = zn;
    }
    Ok(z)
}

fn turning_from_profile(model: &ModelSpec, prof: &FiberProfile, r: f64) -> Result<TurningData> {
    if r >= prof.rbar {
        return Err(Error::EmptyWell { xp: prof.xp, r, rbar: prof.rbar });
    }
    let fib = Fiber { model, xp: prof.xp };
    let zminus = turning_point(&fib, r, prof.z0, -1.0)?;
    let zplus = turning_point(&fib, r, prof.z0, 1.0)?;
    Ok(TurningData { z0: prof.z0, rbar: prof.rbar, zminus, zplus, level_r: r })
}

/// Roots `z∓` of `V − τ + rF = 0` on either side of `z⁰`.
pub fn turning_points(model: &ModelSpec, xp: [f64; 2], r: f64) -> Result<TurningData> {
    let prof = fiber_profile(model, xp)?;
    turning_from_profile(model, &prof, r)
}

/// Action and period of one well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellData {
    pub turning: Option<TurningData>,
    pub eta: f64,
    /// `None` when the well is closed (`r ≥ r̄`).
    pub period: Option<f64>,
    pub nodes: usize,
}

const MIN_NODES: usize = 16;
const MAX_NODES: usize = 1 << 16;
const DEGENERATE_GAP: f64 = 1e-10;

/// Midpoint rule in `θ` for `z = m + w sin θ`; returns `(η, T)`.
fn sine_quadrature(fib: &Fiber, r: f64, td: &TurningData, n: usize) -> (f64, f64) {
    let m = 0.5 * (td.zplus + td.zminus);
    let w = 0.5 * (td.zplus - td.zminus);
    let dth = PI / n as f64;
    let (mut eta, mut period) = (0.0, 0.0);
    for k in 0..n {
        let th = -0.5 * PI + (k as f64 + 0.5) * dth;
        let (s, c) = th.sin_cos();
        let z = m + w * s;
        let ds = fib.ds(z);
        let mut neg = -fib.phi(z, r);
        if neg <= 0.0 {
            // node within rounding of a turning point: use the linear profile
            let end = if s > 0.0 { td.zplus } else { td.zminus };
            neg = fib.dphi(end, r).abs() * (z - end).abs();
        }
        eta += neg.sqrt() * ds * w * c;
        if neg > 0.0 {
            period += ds * w * c / neg.sqrt();
        }
    }
    (eta * dth, period * dth)
}

fn well_from_profile(model: &ModelSpec, prof: &FiberProfile, r: f64) -> Result<WellData> {
    if r >= prof.rbar {
        return Ok(WellData { turning: None, eta: 0.0, period: None, nodes: 0 });
    }
    let fib = Fiber { model, xp: prof.xp };
    if prof.rbar - r <= DEGENERATE_GAP * prof.rbar.abs().max(1.0) {
        if !(prof.curvature > 1e-12) {
            return Err(Error::DegenerateWell { xp: prof.xp });
        }
        let (_, f) = fib.wf(prof.z0);
        let period = PI * (2.0 / (f * prof.curvature)).sqrt() * fib.ds(prof.z0);
        let td = TurningData { z0: prof.z0, rbar: prof.rbar, zminus: prof.z0, zplus: prof.z0, level_r: r };
        return Ok(WellData { turning: Some(td), eta: 0.0, period: Some(period), nodes: 0 });
    }
    let td = turning_from_profile(model, prof, r)?;
    // in shallow wells the integrand is a difference of O(1) terms
    let tol = 1e-9f64.max(64.0 * f64::EPSILON * prof.rbar.abs().max(1.0) / (prof.rbar - r));
    let mut n = MIN_NODES;
    let (mut eta, mut period) = sine_quadrature(&fib, r, &td, n);
    loop {
        if n >= MAX_NODES {
            return Err(Error::NonConvergence { nodes: n });
        }
        n *= 2;
        let (e2, p2) = sine_quadrature(&fib, r, &td, n);
        let de = (e2 - eta).abs() / e2.abs().max(1e-300);
        let dp = (p2 - period).abs() / p2.abs().max(1e-300);
        eta = e2;
        period = p2;
        if de <= tol && dp <= tol {
            break;
        }
    }
    Ok(WellData { turning: Some(td), eta, period: Some(period), nodes: n })
}

pub fn well(model: &ModelSpec, xp: [f64; 2], r: f64) -> Result<WellData> {
    let prof = fiber_profile(model, xp)?;
    well_from_profile(model, &prof, r)
}

/// `η(x′, r)`; zero when `r ≥ r̄(x′)`.
pub fn eta(model: &ModelSpec, xp: [f64; 2], r: f64) -> Result<f64> {
    Ok(well(model, xp, r)?.eta)
}

/// Bounce period `T(x′, r) = ∫ ds / (−(V − τ) − rF)^{1/2}`.
pub fn period_t(model: &ModelSpec, xp: [f64; 2], r: f64) -> Result<f64> {
    let prof = fiber_profile(model, xp)?;
    well_from_profile(model, &prof, r)?
        .period
        .ok_or(Error::EmptyWell { xp, r, rbar: prof.rbar })
}

/// Gradient and Hessian of `η` in `x′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaDerivatives {
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
    /// Relative disagreement of the two Richardson levels.
    pub spread: f64,
    /// Some stencil point had a closed well (η is not smooth there).
    pub touches_closed: bool,
}

fn eta_derivatives(model: &ModelSpec, xp: [f64; 2], r: f64, step: f64) -> Result<EtaDerivatives> {
    let mut closed = false;
    let mut ev = |dx: f64, dy: f64| -> Result<f64> {
        let w = well(model, [xp[0] + dx, xp[1] + dy], r)?;
        closed |= w.period.is_none();
        Ok(w.eta)
    };
    let e0 = ev(0.0, 0.0)?;
    let mut grad = [[0.0; 2]; 2];
    let mut diag = [[0.0; 2]; 2];
    let mut mixed = [0.0; 2];
    for (lvl, h) in [step, 0.5 * step].into_iter().enumerate() {
        for i in 0..2 {
            let (dx, dy) = if i == 0 { (h, 0.0) } else { (0.0, h) };
            let ep = ev(dx, dy)?;
            let em = ev(-dx, -dy)?;
            grad[lvl][i] = (ep - em) / (2.0 * h);
            diag[lvl][i] = (ep - 2.0 * e0 + em) / (h * h);
        }
        let pp = ev(h, h)?;
        let pm = ev(h, -h)?;
        let mp = ev(-h, h)?;
        let mm = ev(-h, -h)?;
        mixed[lvl] = (pp - pm - mp + mm) / (4.0 * h * h);
    }
    let rich = |coarse: f64, fine: f64| (4.0 * fine - coarse) / 3.0;
    let floor = 1e-3 * e0.abs().max(1.0);
    let mut spread: f64 = 0.0;
    let mut upd = |coarse: f64, fine: f64| {
        let r = rich(coarse, fine);
        spread = spread.max((r - fine).abs() / r.abs().max(floor));
        r
    };
    let g = [upd(grad[0][0], grad[1][0]), upd(grad[0][1], grad[1][1])];
    let h11 = upd(diag[0][0], diag[1][0]);
    let h22 = upd(diag[0][1], diag[1][1]);
    let h12 = upd(mixed[0], mixed[1]);
    Ok(EtaDerivatives { grad: g, hess: [[h11, h12], [h12, h22]], spread, touches_closed: closed })
}

/// Central differences with one Richardson level. Fails with
/// [`Error::NoisyDerivative`] when the levels disagree by more than 1e-4.
pub fn eta_grad_hess(model: &ModelSpec, xp: [f64; 2], r: f64, step: f64) -> Result<EtaDerivatives> {
    let d = eta_derivatives(model, xp, r, step)?;
    if d.spread > 1e-4 {
        return Err(Error::NoisyDerivative { spread: d.spread });
    }
    Ok(d)
}

pub const FLAG_CLOSED: u32 = 1;
pub const FLAG_NEAR_DEGENERATE: u32 = 2;
pub const FLAG_STENCIL_CLOSED: u32 = 4;
pub const FLAG_NOISY: u32 = 8;
pub const FLAG_FAILED: u32 = 16;

/// Action data on a tensor grid of `x′` for several Landau parameters.
/// Arrays are indexed by [`ActionGrid::index`].
#[derive(Debug, Clone, Serialize)]
pub struct ActionGrid {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub r_values: Vec<f64>,
    pub rbar: Vec<f64>,
    pub eta: Vec<f64>,
    pub period: Vec<f64>,
    pub grad_eta: Vec<[f64; 2]>,
    pub hess_eta: Vec<[[f64; 2]; 2]>,
    pub flags: Vec<u32>,
}

impl ActionGrid {
    pub fn index(&self, ri: usize, i: usize, j: usize) -> usize {
        (ri * self.x1.len() + i) * self.x2.len() + j
    }

    pub fn spacing(&self) -> [f64; 2] {
        let s = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 0.0 };
        [s(&self.x1), s(&self.x2)]
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Evaluate `η`, `T`, `∇η`, `Hess η` on the `n[0] × n[1]` node grid of the
/// box `[lo, hi]` for every `r` in `r_values`. Cells are computed in
/// parallel; failures are recorded in the flags.
pub fn action_grid(
    model: &ModelSpec,
    lo: [f64; 2],
    hi: [f64; 2],
    n: [usize; 2],
    r_values: &[f64],
    step: f64,
) -> Result<ActionGrid> {
    let x1 = linspace(lo[0], hi[0], n[0]);
    let x2 = linspace(lo[1], hi[1], n[1]);
    let nodes: Vec<(usize, usize)> = (0..n[0]).flat_map(|i| (0..n[1]).map(move |j| (i, j))).collect();
    type Cell = (f64, f64, f64, [f64; 2], [[f64; 2]; 2], u32);
    let cells: Vec<Vec<Cell>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let xp = [x1[i], x2[j]];
            let prof = match fiber_profile(model, xp) {
                Ok(p) => p,
                Err(_) => {
                    return r_values.iter().map(|_| (f64::NAN, f64::NAN, f64::NAN, [f64::NAN; 2], [[f64::NAN; 2]; 2], FLAG_FAILED)).collect();
                }
            };
            r_values
                .iter()
                .map(|&r| {
                    let mut flags = 0;
                    let w = match well_from_profile(model, &prof, r) {
                        Ok(w) => w,
                        Err(_) => return (prof.rbar, f64::NAN, f64::NAN, [f64::NAN; 2], [[f64::NAN; 2]; 2], FLAG_FAILED),
                    };
                    if w.period.is_none() {
                        flags |= FLAG_CLOSED;
                    }
                    if (prof.rbar - r).abs() <= 1e-8 {
                        flags |= FLAG_NEAR_DEGENERATE;
                    }
                    let (g, h) = match eta_derivatives(model, xp, r, step) {
                        Ok(d) => {
                            if d.touches_closed {
                                flags |= FLAG_STENCIL_CLOSED;
                            }
                            if d.spread > 1e-4 {
                                flags |= FLAG_NOISY;
                            }
                            (d.grad, d.hess)
                        }
                        Err(_) => {
                            flags |= FLAG_FAILED;
                            ([f64::NAN; 2], [[f64::NAN; 2]; 2])
                        }
                    };
                    (prof.rbar, w.eta, w.period.unwrap_or(f64::NAN), g, h, flags)
                })
                .collect()
        })
        .collect();
    let total = r_values.len() * nodes.len();
    let mut grid = ActionGrid {
        x1,
        x2,
        r_values: r_values.to_vec(),
        rbar: vec![0.0; total],
        eta: vec![0.0; total],
        period: vec![0.0; total],
        grad_eta: vec![[0.0; 2]; total],
        hess_eta: vec![[[0.0; 2]; 2]; total],
        flags: vec![0; total],
    };
    for (c, &(i, j)) in cells.iter().zip(&nodes) {
        for (ri, v) in c.iter().enumerate() {
            let k = grid.index(ri, i, j);
            grid.rbar[k] = v.0;
            grid.eta[k] = v.1;
            grid.period[k] = v.2;
            grid.grad_eta[k] = v.3;
            grid.hess_eta[k] = v.4;
            grid.flags[k] = v.5;
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    /// Worst value of the tested quantity; `None` when no cell was relevant.
    pub worst: Option<f64>,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RVerdicts {
    pub r: f64,
    /// `|∇η| ≥ ε` on every open well.
    pub gradient_bound: Verdict,
    /// `|∇η| ≤ ε ⟹ |det Hess η| ≥ ε`.
    pub hessian_determinant: Verdict,
    /// `|∇η| ≤ ε ⟹ ‖Hess η‖ ≥ ε`, with the largest singular value as norm.
    pub hessian_norm: Verdict,
    /// Fraction of open cells with `|∇η| < t` for `t = ε, ε/4, ε/16`; the
    /// critical set is judged null when the last fraction is below one half.
    pub critical_fractions: Vec<(f64, f64)>,
    pub critical_set_null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NondegeneracyReport {
    pub eps: f64,
    pub per_r: Vec<RVerdicts>,
}

/// Cells whose flags exclude them from the statistics.
const EXCLUDE: u32 = FLAG_CLOSED | FLAG_NEAR_DEGENERATE | FLAG_STENCIL_CLOSED | FLAG_FAILED;

/// Verdicts of the non-degeneracy conditions of `η` on a populated grid.
pub fn classify_nondegeneracy(grid: &ActionGrid, eps: f64) -> NondegeneracyReport {
    let nx = grid.x1.len();
    let ny = grid.x2.len();
    let mut per_r = Vec::new();
    for (ri, &r) in grid.r_values.iter().enumerate() {
        let mut min_grad: Option<f64> = None;
        let mut min_det: Option<f64> = None;
        let mut min_norm: Option<f64> = None;
        let (mut open, mut near) = (0usize, 0usize);
        let thresholds = [eps, eps / 4.0, eps / 16.0];
        let mut below = [0usize; 3];
        for i in 0..nx {
            for j in 0..ny {
                let k = grid.index(ri, i, j);
                if grid.flags[k] & EXCLUDE != 0 {
                    continue;
                }
                open += 1;
                let g = grid.grad_eta[k];
                let gn = g[0].hypot(g[1]);
                min_grad = Some(min_grad.map_or(gn, |m: f64| m.min(gn)));
                for (b, t) in below.iter_mut().zip(thresholds) {
                    if gn < t {
                        *b += 1;
                    }
                }
                if gn <= eps {
                    near += 1;
                    let h = grid.hess_eta[k];
                    let det = (h[0][0] * h[1][1] - h[0][1] * h[1][0]).abs();
                    let (e1, e2) = linalg::sym2_eigenvalues(h[0][0], h[0][1], h[1][1]);
                    let norm = e1.abs().max(e2.abs());
                    min_det = Some(min_det.map_or(det, |m: f64| m.min(det)));
                    min_norm = Some(min_norm.map_or(norm, |m: f64| m.min(norm)));
                }
            }
        }
        let fractions: Vec<(f64, f64)> = thresholds
            .iter()
            .zip(below)
            .map(|(&t, b)| (t, if open > 0 { b as f64 / open as f64 } else { 0.0 }))
            .collect();
        per_r.push(RVerdicts {
            r,
            gradient_bound: Verdict { holds: min_grad.is_none_or(|m| m >= eps), worst: min_grad, cells: open },
            hessian_determinant: Verdict { holds: min_det.is_none_or(|m| m >= eps), worst: min_det, cells: near },
            hessian_norm: Verdict { holds: min_norm.is_none_or(|m| m >= eps), worst: min_norm, cells: near },
            critical_set_null: fractions.last().is_none_or(|f| f.1 < 0.5),
            critical_fractions: fractions,
        });
    }
    NondegeneracyReport { eps, per_r }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZoneMeasure {
    /// Area of `{x′ ∈ box : r < r̄(x′), |∇η(x′, r)| ≤ γ̄}`.
    pub area: f64,
    /// Area of the open-well part of the box.
    pub open_area: f64,
    /// The zone fills the whole open region.
    pub degenerate: bool,
}

fn grad_norm(model: &ModelSpec, xp: [f64; 2], r: f64, step: f64) -> Option<f64> {
    let e = |dx: f64, dy: f64| well(model, [xp[0] + dx, xp[1] + dy], r).ok();
    let gx = (e(step, 0.0)?.eta - e(-step, 0.0)?.eta) / (2.0 * step);
    let gy = (e(0.0, step)?.eta - e(0.0, -step)?.eta) / (2.0 * step);
    Some(gx.hypot(gy))
}

/// Area of the critical zone `{|∇η| ≤ γ̄}` within the open wells over the
/// model's `x′` box, by adaptive quadtree refinement. Cells are split while
/// Lipschitz bounds on `|∇η|` and `r̄` (estimated on a coarse grid) leave
/// their classification undecided.
pub fn critical_zone_measure(model: &ModelSpec, r: f64, gammabar: f64) -> Result<ZoneMeasure> {
    let lo = [model.domain.lo[0], model.domain.lo[1]];
    let hi = [model.domain.hi[0], model.domain.hi[1]];
    let step = 1e-4 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let coarse = action_grid(model, lo, hi, [9, 9], &[r], step)?;
    let usable = |f: u32| f & EXCLUDE == 0;
    let lip_grad = 2.0
        * coarse
            .hess_eta
            .iter()
            .zip(&coarse.flags)
            .filter(|(_, f)| usable(**f))
            .map(|(h, _)| {
                let (a, b) = linalg::sym2_eigenvalues(h[0][0], h[0][1], h[1][1]);
                a.abs().max(b.abs())
            })
            .fold(0.0, f64::max)
        + 1e-9;
    let sp = coarse.spacing();
    let mut lip_rbar: f64 = 1e-9;
    for i in 0..9 {
        for j in 0..9 {
            let k = coarse.index(0, i, j);
            if i + 1 < 9 {
                let k2 = coarse.index(0, i + 1, j);
                lip_rbar = lip_rbar.max((coarse.rbar[k2] - coarse.rbar[k]).abs() / sp[0]);
            }
            if j + 1 < 9 {
                let k2 = coarse.index(0, i, j + 1);
                lip_rbar = lip_rbar.max((coarse.rbar[k2] - coarse.rbar[k]).abs() / sp[1]);
            }
        }
    }
    lip_rbar *= 2.0;

    let base = 16usize;
    let max_depth = 8u32;
    let cw = [(hi[0] - lo[0]) / base as f64, (hi[1] - lo[1]) / base as f64];
    let roots: Vec<[f64; 2]> = (0..base)
        .flat_map(|i| (0..base).map(move |j| [lo[0] + (i as f64 + 0.5) * cw[0], lo[1] + (j as f64 + 0.5) * cw[1]]))
        .collect();
    let areas: Vec<(f64, f64)> = roots
        .par_iter()
        .map(|&c| {
            let mut stack = vec![(c, 0u32)];
            let (mut zone, mut open) = (0.0, 0.0);
            while let Some((c, depth)) = stack.pop() {
                let s = 0.5f64.powi(depth as i32);
                let (wx, wy) = (cw[0] * s, cw[1] * s);
                let area = wx * wy;
                let half_diag = 0.5 * wx.hypot(wy);
                let leaf = depth >= max_depth;
                let margin = match fiber_profile(model, c) {
                    Ok(p) => p.rbar - r,
                    Err(_) => continue,
                };
                if margin <= 0.0 {
                    // partly open cells only matter for the open area
                    if depth < 6 && -margin <= lip_rbar * half_diag {
                        push_children(&mut stack, c, wx, wy, depth);
                    }
                    continue;
                }
                let g = grad_norm(model, c, r, step);
                let undecided = match g {
                    Some(g) => {
                        (g - gammabar).abs() <= lip_grad * half_diag
                            || (margin <= lip_rbar * half_diag && (g <= gammabar || depth < 6))
                    }
                    None => true,
                };
                if undecided && !leaf {
                    push_children(&mut stack, c, wx, wy, depth);
                    continue;
                }
                let Some(g) = g else { continue };
                open += area;
                if g <= gammabar {
                    zone += area;
                }
            }
            (zone, open)
        })
        .collect();
    let area: f64 = areas.iter().map(|a| a.0).sum();
    let open_area: f64 = areas.iter().map(|a| a.1).sum();
    Ok(ZoneMeasure { area, open_area, degenerate: open_area > 0.0 && (area - open_area).abs() <= 1e-9 * open_area })
}

fn push_children(stack: &mut Vec<([f64; 2], u32)>, c: [f64; 2], wx: f64, wy: f64, depth: u32) {
    for (sx, sy) in [(-0.25, -0.25), (-0.25, 0.25), (0.25, -0.25), (0.25, 0.25)] {
        stack.push(([c[0] + sx * wx, c[1] + sy * wy], depth + 1));
    }
}

#[cfg(test)]
mod tests;
