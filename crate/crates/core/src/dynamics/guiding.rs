use std::f64::consts::TAU;

use serde::Serialize;

use super::{PhasePoint, Trajectory};
use crate::linalg::{self, Vec3, ZERO3};
use crate::model::ModelSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct GuidingCenterSeries {
    pub window_times: Vec<f64>,
    pub centers: Vec<Vec3>,
    pub period_meas: f64,
    pub drift_velocity_meas: Vec3,
    pub drift_speed_meas: f64,
    /// Number of full gyrations used in the period fit.
    pub gyrations: usize,
}

/// Angle of the velocity `2gP` (planar) or of its component normal to the
/// field (3D), measured in a frame built from the field direction.
pub fn gyro_phase(model: &ModelSpec, p: &PhasePoint) -> f64 {
    let d = model.dim;
    let g = model.metric_at(&p.x);
    let v = linalg::mat_vec(&g, &model.kinetic(&p.x, &p.xi), d);
    if d == 2 {
        return v[1].atan2(v[0]);
    }
    let lower = linalg::inverse(&g, 3).unwrap_or_else(|| linalg::identity(3));
    let ip = |a: &Vec3, b: &Vec3| linalg::quad(&lower, a, b, 3);
    let f = model.field_vector_3d(&p.x);
    let ff = ip(&f, &f);
    if ff == 0.0 {
        return v[1].atan2(v[0]);
    }
    // reference axis least aligned with the field
    let axis = (0..3)
        .min_by(|&a, &b| f[a].abs().partial_cmp(&f[b].abs()).unwrap())
        .unwrap();
    let mut e1 = ZERO3;
    e1[axis] = 1.0;
    e1 = linalg::sub(&e1, &linalg::scale(&f, ip(&e1, &f) / ff));
    e1 = linalg::scale(&e1, 1.0 / ip(&e1, &e1).sqrt());
    let mut e2 = linalg::cross(&f, &e1);
    e2 = linalg::sub(&e2, &linalg::scale(&f, ip(&e2, &f) / ff));
    e2 = linalg::sub(&e2, &linalg::scale(&e1, ip(&e2, &e1)));
    e2 = linalg::scale(&e2, 1.0 / ip(&e2, &e2).sqrt());
    ip(&v, &e2).atan2(ip(&v, &e1))
}

fn unwrap(phases: &mut [f64]) {
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        d -= TAU * (d / TAU).round();
        phases[i] = phases[i - 1] + d;
    }
}

/// Inverse cubic interpolation of the time at which `psi` reaches `level`,
/// from the four samples around index `i` (between `i` and `i + 1`).
fn crossing_time(times: &[f64], psi: &[f64], i: usize, level: f64) -> f64 {
    let lo = i.saturating_sub(1).min(psi.len().saturating_sub(4));
    let idx: Vec<usize> = (lo..(lo + 4).min(psi.len())).collect();
    let monotone = idx.windows(2).all(|w| psi[w[1]] > psi[w[0]]);
    if idx.len() == 4 && monotone {
        let mut t = 0.0;
        for &a in &idx {
            let mut w = 1.0;
            for &b in &idx {
                if a != b {
                    w *= (level - psi[b]) / (psi[a] - psi[b]);
                }
            }
            t += w * times[a];
        }
        t
    } else {
        let s = (level - psi[i]) / (psi[i + 1] - psi[i]);
        times[i] + s * (times[i + 1] - times[i])
    }
}

/// Position at time `t` by linear interpolation on the samples.
fn position_at(traj: &Trajectory, t: f64) -> Vec3 {
    let i = match traj.times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => return traj.points[i].x,
        Err(i) => i.clamp(1, traj.times.len() - 1),
    };
    let (t0, t1) = (traj.times[i - 1], traj.times[i]);
    let s = (t - t0) / (t1 - t0);
    let (a, b) = (traj.points[i - 1].x, traj.points[i].x);
    linalg::add(&a, &linalg::scale(&linalg::sub(&b, &a), s))
}

/// Trapezoidal mean of the position over `[a, b]`.
fn window_mean(traj: &Trajectory, a: f64, b: f64) -> Vec3 {
    let mut nodes: Vec<(f64, Vec3)> = vec![(a, position_at(traj, a))];
    for (t, p) in traj.times.iter().zip(&traj.points) {
        if *t > a && *t < b {
            nodes.push((*t, p.x));
        }
    }
    nodes.push((b, position_at(traj, b)));
    let mut acc = ZERO3;
    for w in nodes.windows(2) {
        let dt = w[1].0 - w[0].0;
        acc = linalg::add(&acc, &linalg::scale(&linalg::add(&w[0].1, &w[1].1), 0.5 * dt));
    }
    linalg::scale(&acc, 1.0 / (b - a))
}

/// Measure the gyration period and the guiding-centre drift of a trajectory.
///
/// The period is the least-squares slope of the times at which the unwrapped
/// gyro-phase crosses multiples of 2π; centres are position averages over
/// consecutive one-period windows; the drift velocity is the least-squares
/// slope of the centres against window mid-times.
pub fn guiding_center(traj: &Trajectory, model: &ModelSpec) -> Result<GuidingCenterSeries> {
    if traj.points.len() < 8 {
        return Err(Error::NoOscillation);
    }
    let mut psi: Vec<f64> = traj.points.iter().map(|p| gyro_phase(model, p)).collect();
    unwrap(&mut psi);
    let total = psi[psi.len() - 1] - psi[0];
    if total.abs() < 3.0 * TAU {
        return Err(Error::NoOscillation);
    }
    if total < 0.0 {
        psi.iter_mut().for_each(|v| *v = -*v);
    }
    let mut crossings = Vec::new();
    for i in 0..psi.len() - 1 {
        let (a, b) = (psi[i], psi[i + 1]);
        let mut n = (a / TAU).floor() + 1.0;
        while n * TAU <= b && b > a {
            crossings.push(crossing_time(&traj.times, &psi, i, n * TAU));
            n += 1.0;
        }
    }
    if crossings.len() < 3 {
        return Err(Error::NoOscillation);
    }
    let idx: Vec<f64> = (0..crossings.len()).map(|i| i as f64).collect();
    let (_, period, _) = linalg::linear_fit(&idx, &crossings).ok_or(Error::NoOscillation)?;
    if !(period > 0.0) {
        return Err(Error::NoOscillation);
    }
    let t_last = *traj.times.last().unwrap();
    let mut window_times = Vec::new();
    let mut centers = Vec::new();
    for &c in &crossings {
        if c + period > t_last {
            break;
        }
        window_times.push(c + 0.5 * period);
        centers.push(window_mean(traj, c, c + period));
    }
    let mut drift = ZERO3;
    if centers.len() >= 2 {
        for (j, d) in drift.iter_mut().enumerate().take(model.dim) {
            let ys: Vec<f64> = centers.iter().map(|c| c[j]).collect();
            *d = linalg::linear_fit(&window_times, &ys).map_or(0.0, |f| f.1);
        }
    }
    Ok(GuidingCenterSeries {
        window_times,
        centers,
        period_meas: period,
        drift_velocity_meas: drift,
        drift_speed_meas: linalg::norm(&drift, model.dim),
        gyrations: crossings.len() - 1,
    })
}
