use crate::{Error, Result};

fn admissible(i: u64, j: u64, a: f64, b: f64, tau: f64) -> bool {
    (2 * i + 1) as f64 * a + (2 * j + 1) as f64 * b < tau
}

/// `#{(i, j) ∈ ℤ₊² : (2i+1) l μ⁻¹ h + (2j+1) k h < τ}`.
pub fn lattice_count(l: f64, k: f64, mu: f64, h: f64, tau: f64) -> Result<u64> {
    let a = l * h / mu;
    let b = k * h;
    let mut total: u64 = 0;
    let mut j = 0u64;
    while admissible(0, j, a, b, tau) {
        let rest = tau - (2 * j + 1) as f64 * b;
        // first guess from the closed form, corrected against the predicate
        let mut n = (((rest / a - 1.0) / 2.0).ceil().max(0.0)) as u64;
        while n > 0 && !admissible(n - 1, j, a, b, tau) {
            n -= 1;
        }
        while admissible(n, j, a, b, tau) {
            n += 1;
        }
        total = total.checked_add(n).filter(|&t| t <= 1 << 62).ok_or(Error::Overflow)?;
        j += 1;
    }
    Ok(total)
}

/// The `i`-sum of [`lattice_count`] replaced by its integral:
/// `Σ_j μ (τ − (2j+1)kh)₊ / (2lh)`.
pub fn lattice_weyl(l: f64, k: f64, mu: f64, h: f64, tau: f64) -> f64 {
    let mut s = 0.0;
    let mut j = 0u64;
    loop {
        let rest = tau - (2 * j + 1) as f64 * k * h;
        if rest <= 0.0 {
            break;
        }
        s += rest;
        j += 1;
    }
    mu * s / (2.0 * l * h)
}
