use serde::Serialize;

use super::{flow_rhs, flow_steps, PhasePoint, Trajectory};
use crate::linalg::{self, Vec3};
use crate::model::ModelSpec;
use crate::ode::Dopri5;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectionEvent {
    pub t_hit: f64,
    pub p_in: PhasePoint,
    pub p_out: PhasePoint,
    pub rho: f64,
    pub sigma: f64,
    pub rho_out: f64,
    pub sigma_out: f64,
    pub xbar: Vec3,
    pub xbar_out: Vec3,
    /// `⟨n, P_in⟩_g / ⟨n, n⟩_g` for the boundary covector `n`; the momentum
    /// is reflected as `P_out = P_in − 2 l n`.
    pub l_cos: f64,
}

impl ReflectionEvent {
    pub fn xbar2_jump(&self) -> f64 {
        self.xbar_out[1] - self.xbar[1]
    }
}

/// Gyration parameters `(ρ, σ, x̄)` of a phase point, for a constant field
/// along `x₃` with an isotropic constant metric: `ρ = |P′|`, `σ = P₃`,
/// `x̄′ = x′ + (P₂, −P₁)/(μF₁₂)`, `x̄₃ = x₃`.
pub fn gyro_parameters(model: &ModelSpec, p: &PhasePoint) -> (f64, f64, Vec3) {
    let pk = model.kinetic(&p.x, &p.xi);
    let b = model.field_tensor(&p.x)[0][1];
    let rho = pk[0].hypot(pk[1]);
    let xbar = [p.x[0] + pk[1] / (model.mu * b), p.x[1] - pk[0] / (model.mu * b), p.x[2]];
    (rho, pk[2], xbar)
}

/// Integrate the flow inside the model's half-space, reflecting the momentum
/// specularly in the kinetic metric at every boundary hit, until
/// `n_reflections` events were recorded or `t_max` is reached.
pub fn billiard_flow(
    model: &ModelSpec,
    p0: PhasePoint,
    n_reflections: usize,
    tol: f64,
    t_max: f64,
) -> Result<Trajectory> {
    let wall = model
        .boundary
        .ok_or_else(|| Error::InvalidModel("billiard flow needs a model with a boundary".into()))?;
    if model.dim != 3 {
        return Err(Error::InvalidModel("billiard flow needs a 3D model".into()));
    }
    if !(wall.level(&p0.x) > 0.0) {
        return Err(Error::InvalidModel("initial point is not strictly inside the half-space".into()));
    }
    let f = flow_rhs(model);
    let (dt, h_max) = flow_steps(model, &p0.x, t_max.min(1.0));
    let local = (tol * 1e-3).max(1e-14);
    let solver = Dopri5::new(local, local).with_max_step(h_max);
    let n = wall.normal();

    let mut traj = Trajectory { dim: 3, ..Default::default() };
    let mut t = 0.0;
    let mut y = p0.to_state();
    let mut h = dt;
    let mut next_sample = 0.0;
    traj.push(model, t, p0);
    next_sample += dt;
    let phi = |y: &[f64; 6]| wall.level(&[y[0], y[1], y[2]]);

    while traj.events.len() < n_reflections && t < t_max {
        let limit = next_sample.min(t_max);
        let (tn, yn, hn) = solver.advance(&f, t, &y, h, limit)?;
        if phi(&yn) > 0.0 {
            t = tn;
            y = yn;
            h = hn;
            if t >= next_sample {
                traj.push(model, t, PhasePoint::from_state(&y));
                next_sample += dt;
            }
            continue;
        }
        // bisection on the sub-step length for the hit
        let (mut a, mut b) = (0.0, tn - t);
        let mut hit = (t, y);
        for _ in 0..200 {
            let s = 0.5 * (a + b);
            let (ys, _) = solver.try_step(&f, t, &y, s);
            let v = phi(&ys);
            hit = (t + s, ys);
            if v.abs() <= 1e-12 {
                break;
            }
            if v > 0.0 {
                a = s;
            } else {
                b = s;
            }
            if b - a <= f64::EPSILON * t.abs().max(1.0) {
                break;
            }
        }
        let (th, yh) = hit;
        let p_in = PhasePoint::from_state(&yh);
        let g = model.metric_at(&p_in.x);
        let pk = model.kinetic(&p_in.x, &p_in.xi);
        let nn = linalg::quad(&g, &n, &n, 3);
        let np = linalg::quad(&g, &n, &pk, 3);
        let normal_velocity = 2.0 * np / nn.sqrt();
        if normal_velocity.abs() < tol {
            return Err(Error::GrazingIncidence { t: th, normal_velocity });
        }
        let l = np / nn;
        let xi_out = linalg::sub(&p_in.xi, &linalg::scale(&n, 2.0 * l));
        let p_out = PhasePoint::new(p_in.x, xi_out);
        let (rho, sigma, xbar) = gyro_parameters(model, &p_in);
        let (rho_out, sigma_out, xbar_out) = gyro_parameters(model, &p_out);
        traj.events.push(ReflectionEvent {
            t_hit: th,
            p_in,
            p_out,
            rho,
            sigma,
            rho_out,
            sigma_out,
            xbar,
            xbar_out,
            l_cos: l,
        });
        traj.push(model, th, p_in);
        traj.push(model, th, p_out);
        t = th;
        y = p_out.to_state();
        // the hit point sits on the wall; nudge off it along the flow
        if phi(&y) <= 0.0 {
            let (ys, _) = solver.try_step(&f, t, &y, 1e-9 * h_max.min(1.0));
            t += 1e-9 * h_max.min(1.0);
            y = ys;
        }
        if next_sample <= t {
            next_sample = t + dt;
        }
    }
    Ok(traj)
}

/// Jump sequences of `x̄₂` and `σ` over the reflection events.
#[derive(Debug, Clone, Serialize)]
pub struct WobbleSummary {
    pub xbar2_jumps: Vec<f64>,
    pub sigma_jumps: Vec<f64>,
    pub running_mean_xbar2: Vec<f64>,
    pub running_var_xbar2: Vec<f64>,
    pub total_xbar2_shift: f64,
}

pub fn wobble_statistics(traj: &Trajectory) -> Result<WobbleSummary> {
    if traj.events.len() < 2 {
        return Err(Error::InsufficientPoints { found: traj.events.len(), needed: 2 });
    }
    let xbar2_jumps: Vec<f64> = traj.events.iter().map(|e| e.xbar2_jump()).collect();
    let sigma_jumps: Vec<f64> = traj.events.iter().map(|e| e.sigma_out - e.sigma).collect();
    let mut running_mean_xbar2 = Vec::with_capacity(xbar2_jumps.len());
    let mut running_var_xbar2 = Vec::with_capacity(xbar2_jumps.len());
    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xbar2_jumps.iter().enumerate() {
        let n = (i + 1) as f64;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
        running_mean_xbar2.push(mean);
        running_var_xbar2.push(if i > 0 { m2 / (n - 1.0) } else { 0.0 });
    }
    Ok(WobbleSummary {
        total_xbar2_shift: xbar2_jumps.iter().sum(),
        xbar2_jumps,
        sigma_jumps,
        running_mean_xbar2,
        running_var_xbar2,
    })
}
