//! Hamiltonian flow of the classical symbol, drift lines, magnetic lines,
//! guiding centres and half-space billiards.

use std::f64::consts::PI;

use serde::Serialize;

use crate::linalg::{self, Vec3, ZERO3};
use crate::model::ModelSpec;
use crate::ode::{Control, Dopri5};
use crate::{Error, Result};

mod billiard;
mod guiding;

pub use billiard::{billiard_flow, gyro_parameters, wobble_statistics, ReflectionEvent, WobbleSummary};
pub use guiding::{guiding_center, gyro_phase, GuidingCenterSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub x: Vec3,
    pub xi: Vec3,
}

impl PhasePoint {
    pub fn new(x: Vec3, xi: Vec3) -> Self {
        PhasePoint { x, xi }
    }

    /// Phase point with prescribed kinetic momentum `P = ξ − μV(x)`.
    pub fn from_kinetic(model: &ModelSpec, x: Vec3, p: Vec3) -> Self {
        let v = model.vecpot_at(&x);
        let mut xi = p;
        for j in 0..model.dim {
            xi[j] += model.mu * v[j];
        }
        PhasePoint { x, xi }
    }

    fn to_state(self) -> [f64; 6] {
        [self.x[0], self.x[1], self.x[2], self.xi[0], self.xi[1], self.xi[2]]
    }

    fn from_state(y: &[f64; 6]) -> Self {
        PhasePoint { x: [y[0], y[1], y[2]], xi: [y[3], y[4], y[5]] }
    }
}

/// Time-sampled flow with the energy at every sample.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub energies: Vec<f64>,
    pub events: Vec<ReflectionEvent>,
}

impl Trajectory {
    /// Largest `|E_i − E_0| / max(1, |E_0|)`.
    pub fn energy_drift(&self) -> f64 {
        let Some(&e0) = self.energies.first() else { return 0.0 };
        self.energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs().max(1.0)
    }

    fn push(&mut self, model: &ModelSpec, t: f64, p: PhasePoint) {
        self.times.push(t);
        self.points.push(p);
        self.energies.push(model.hamiltonian(&p.x, &p.xi));
    }
}

pub fn hamiltonian(model: &ModelSpec, p: &PhasePoint) -> f64 {
    model.hamiltonian(&p.x, &p.xi)
}

fn flow_rhs(model: &ModelSpec) -> impl Fn(f64, &[f64; 6]) -> [f64; 6] + '_ {
    move |_t, y| {
        let (xd, xid) = model.hamilton_rhs(&[y[0], y[1], y[2]], &[y[3], y[4], y[5]]);
        [xd[0], xd[1], xd[2], xid[0], xid[1], xid[2]]
    }
}

/// Cyclotron angular frequency `2μF` at `x`.
pub fn cyclotron_frequency(model: &ModelSpec, x: &Vec3) -> f64 {
    2.0 * model.mu * model.scalar_intensity(x)
}

/// Sample spacing and step ceiling used for flows started at `x`.
fn flow_steps(model: &ModelSpec, x: &Vec3, t_end: f64) -> (f64, f64) {
    let w = cyclotron_frequency(model, x);
    if w > 0.0 {
        let period = 2.0 * PI / w;
        let dt = period / 64.0;
        let n = (t_end / dt).ceil().max(1.0);
        (t_end / n, period / 32.0)
    } else {
        (t_end / 1024.0, f64::INFINITY)
    }
}

/// Integrate Hamilton's equations `ẋ = ∂_ξ a`, `ξ̇ = −∂_x a` up to `t_end`.
///
/// The run is repeated with a ten times tighter local tolerance (at most
/// twice) when the relative energy drift exceeds `tol`.
pub fn integrate_flow(model: &ModelSpec, p0: PhasePoint, t_end: f64, tol: f64) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
    }
    if !hamiltonian(model, &p0).is_finite() {
        return Err(Error::InvalidModel("energy is not finite at the initial point".into()));
    }
    let (dt, h_max) = flow_steps(model, &p0.x, t_end);
    let f = flow_rhs(model);
    let mut local = (tol * 1e-3).max(1e-14);
    let mut traj = Trajectory::default();
    for _ in 0..3 {
        traj = Trajectory { dim: model.dim, ..Default::default() };
        let solver = Dopri5::new(local, local).with_max_step(h_max);
        solver.integrate(&f, 0.0, p0.to_state(), t_end, dt, |t, y| {
            traj.push(model, t, PhasePoint::from_state(y));
            Control::Continue
        })?;
        if traj.energy_drift() <= tol || local <= 1e-14 {
            break;
        }
        local = (local * 0.1).max(1e-14);
    }
    Ok(traj)
}

/// A sampled curve in configuration space.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Curve {
    pub times: Vec<f64>,
    pub points: Vec<Vec3>,
    /// Set when the run stopped at a critical point.
    pub terminated_at: Option<Vec3>,
}

/// Integral curve of `((1/√g)∂₂q, −(1/√g)∂₁q)` with `q = (V − τ)/f`, `f` the
/// signed pseudoscalar field. Stops when `|∇((V − τ)/F)| < 1e-8`.
pub fn integrate_drift_line_2d(model: &ModelSpec, x0: [f64; 2], t_end: f64) -> Result<Curve> {
    if model.dim != 2 {
        return Err(Error::InvalidModel("drift lines need a planar model".into()));
    }
    let x0 = [x0[0], x0[1], 0.0];
    if model.scalar_intensity(&x0) < model.thresholds.eps0 {
        return Err(Error::Hazard { what: "field intensity below eps0 at drift-line start".into(), at: x0 });
    }
    let tau = model.tau;
    let rhs = |_t: f64, y: &[f64; 2]| -> [f64; 2] {
        let x = [y[0], y[1], 0.0];
        match model.vf_grad_hess(&x, tau) {
            Ok((g, _)) => {
                // (V−τ)/f = ±(V−τ)/F with the sign of f
                let sgn = model.field_tensor(&x)[0][1].signum();
                let s = sgn / model.sqrt_g(&x);
                [s * g[1], -s * g[0]]
            }
            Err(_) => [f64::NAN, f64::NAN],
        }
    };
    let mut curve = Curve::default();
    let solver = Dopri5::new(1e-13, 1e-13);
    let mut err = None;
    solver.integrate(&rhs, 0.0, [x0[0], x0[1]], t_end, t_end / 2000.0, |t, y| {
        let x = [y[0], y[1], 0.0];
        curve.times.push(t);
        curve.points.push(x);
        match model.vf_grad_hess(&x, tau) {
            Ok((g, _)) if linalg::norm(&g, 2) < 1e-8 => {
                curve.terminated_at = Some(x);
                Control::Stop
            }
            Ok(_) => Control::Continue,
            Err(e) => {
                err = Some(e);
                Control::Stop
            }
        }
    })
    .or_else(|e| match e {
        // approaching a critical point the speed collapses; the last sample stands
        Error::StepUnderflow { .. } | Error::TooManySteps { .. } if curve.points.len() > 1 => Ok((0.0, [0.0; 2])),
        e => Err(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(curve)
}

/// Integral curve of `dx_j/dt = (2/F) ω F^j`, with `ω ≡ 1` when omitted.
pub fn integrate_magnetic_line_3d(
    model: &ModelSpec,
    x0: Vec3,
    t_end: f64,
    omega: Option<&dyn Fn(&Vec3) -> f64>,
) -> Result<Curve> {
    if model.dim != 3 {
        return Err(Error::InvalidModel("magnetic lines need a 3D model".into()));
    }
    if model.scalar_intensity(&x0) < model.thresholds.eps0 {
        return Err(Error::Hazard { what: "field intensity below eps0 at line start".into(), at: x0 });
    }
    let rhs = |_t: f64, x: &[f64; 3]| -> [f64; 3] {
        let f = model.scalar_intensity(x);
        let w = omega.map_or(1.0, |o| o(x));
        linalg::scale(&model.field_vector_3d(x), 2.0 * w / f)
    };
    let mut curve = Curve::default();
    Dopri5::new(1e-13, 1e-13).integrate(&rhs, 0.0, x0, t_end, t_end / 1000.0, |t, x| {
        curve.times.push(t);
        curve.points.push(*x);
        Control::Continue
    })?;
    Ok(curve)
}

/// `π μ⁻¹ F(x)⁻¹`.
pub fn predicted_period(model: &ModelSpec, x: &Vec3) -> f64 {
    PI / (model.mu * model.scalar_intensity(x))
}

/// Leading-order guiding-centre velocity at `x`.
///
/// Planar models: `μ⁻¹(1/√g)(−∂₂q, ∂₁q)` with `q = (V − τ)/f`, i.e. the
/// physical drift runs opposite to the tangent used by
/// [`integrate_drift_line_2d`]. 3D models (Euclidean metric):
/// `μ⁻¹ F̂ × ∇((V − τ)/F)`.
pub fn predicted_drift_velocity(model: &ModelSpec, x: &Vec3) -> Result<Vec3> {
    let (g, _) = model.vf_grad_hess(x, model.tau)?;
    let mu = model.mu;
    Ok(if model.dim == 2 {
        let s = model.field_tensor(x)[0][1].signum() / model.sqrt_g(x);
        [-s * g[1] / mu, s * g[0] / mu, 0.0]
    } else {
        let fv = model.field_vector_3d(x);
        let n = linalg::norm(&fv, 3);
        if n == 0.0 {
            ZERO3
        } else {
            linalg::scale(&linalg::cross(&fv, &g), 1.0 / (n * mu))
        }
    })
}
