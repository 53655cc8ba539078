use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confining_span, resolution, SturmLiouville};
use crate::model::OperatorKind;
use crate::{Error, Result};

/// `H = (hD − μA)² + l²|x′|² + k²x₃² (− μh for Pauli)` with `curl A = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicParams {
    pub k: f64,
    pub l: f64,
    pub mu: f64,
    pub h: f64,
    pub tau: f64,
    pub kind: OperatorKind,
}

impl IsotropicParams {
    /// `τ` plus the Pauli shift.
    fn top(&self) -> f64 {
        match self.kind {
            OperatorKind::Schrodinger => self.tau,
            OperatorKind::SchrodingerPauli => self.tau + self.mu * self.h,
        }
    }

    fn omega(&self) -> f64 {
        0.5 * (self.mu * self.mu + 4.0 * self.l * self.l).sqrt()
    }
}

/// Number of axial levels `(2m+1)kh` with `e + (2m+1)kh < top`.
fn axial_levels(e: f64, p: &IsotropicParams, top: f64) -> u64 {
    let kh = p.k * p.h;
    let mut m = 0u64;
    while e + (2 * m + 1) as f64 * kh < top {
        m += 1;
    }
    m
}

/// Eigenvalues of `H` below `τ`, counted by separating the axial
/// oscillator and decomposing the planar part by angular momentum `q`;
/// each radial operator `−h²ρ⁻¹∂ρ ρ∂ρ + h²q²/ρ² + ω²ρ² − μhq` is
/// discretised and counted with Sturm sequences.
pub fn isotropic_exact_count(p: &IsotropicParams) -> Result<u64> {
    for (name, v) in [("k", p.k), ("l", p.l), ("mu", p.mu), ("h", p.h)] {
        if !(v > 0.0) {
            return Err(Error::InvalidModel(format!("parameter {name} must be positive, got {v}")));
        }
    }
    let top = p.top();
    let e_max = top - p.k * p.h;
    if e_max <= 0.0 {
        return Ok(0);
    }
    let omega = p.omega();
    let (h, mu) = (p.h, p.mu);
    // the radial operator is bounded below by 2hω|q| − μhq
    let q_hi = (e_max / (h * (2.0 * omega - mu))).floor() as i64 + 1;
    let q_lo = -((e_max / (h * (2.0 * omega + mu))).floor() as i64 + 1);
    let counts: Vec<u64> = (q_lo..=q_hi)
        .into_par_iter()
        .map(|q| -> Result<u64> {
            let qf = q as f64;
            let vmin = 2.0 * h * omega * qf.abs() - mu * h * qf;
            if vmin >= e_max {
                return Ok(0);
            }
            let v = move |rho: f64| {
                let c = if q == 0 { 0.0 } else { h * h * qf * qf / (rho * rho) };
                c + omega * omega * rho * rho - mu * h * qf
            };
            let center = (h * qf.abs() / omega).sqrt();
            let margin = 0.05 * (1.0 + e_max.abs());
            let upper = e_max + margin;
            let (a, b) = confining_span(&v, center, upper, h, Some(0.0), 1e3 * (1.0 + center))?;
            let n = resolution(b - a, upper - vmin, h, 32);
            let sl = SturmLiouville { a, b, h, p: &|r| r, m: &|r| r, v: &v };
            let eig = sl.richardson_eigenvalues(n, upper);
            Ok(eig.iter().map(|&e| axial_levels(e, p, top)).sum())
        })
        .collect::<Result<_>>()?;
    counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c).ok_or(Error::Overflow))
}
