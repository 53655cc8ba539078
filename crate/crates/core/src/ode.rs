//! Adaptive Dormand–Prince 5(4) integrator on fixed-size states.

use crate::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
// fifth- minus fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Whether an observer wants the integration to go on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 { rtol: 1e-10, atol: 1e-12, h_max: f64::INFINITY, h_min: 1e-14, max_steps: 50_000_000 }
    }
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dopri5 { rtol, atol, ..Default::default() }
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    /// One explicit step; returns the fifth-order solution and the scaled
    /// error norm (≤ 1 means acceptable).
    pub fn try_step<const N: usize, F>(&self, f: &F, t: f64, y: &[f64; N], h: f64) -> ([f64; N], f64)
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut k = [[0.0; N]; 7];
        k[0] = f(t, y);
        for s in 1..7 {
            let mut ys = *y;
            for (i, v) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                *v += h * acc;
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y_new = *y;
        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut incr = 0.0;
            let mut e = 0.0;
            for s in 0..7 {
                incr += B[s] * k[s][i];
                e += E[s] * k[s][i];
            }
            y_new[i] = y[i] + h * incr;
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        (y_new, err)
    }

    /// One accepted adaptive step of at most `t_limit − t`.
    /// Returns `(t_new, y_new, suggested next step)`.
    pub fn advance<const N: usize, F>(
        &self,
        f: &F,
        t: f64,
        y: &[f64; N],
        h: f64,
        t_limit: f64,
    ) -> Result<(f64, [f64; N], f64)>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        let mut h = h.min(self.h_max);
        loop {
            let remaining = t_limit - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };
            let (y_new, err) = self.try_step(f, t, y, hs);
            if !y_new.iter().all(|v| v.is_finite()) {
                h *= 0.25;
            } else if err <= 1.0 {
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                let t_new = if last { t_limit } else { t + hs };
                return Ok((t_new, y_new, (h * fac).min(self.h_max)));
            } else {
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            if h < self.h_min * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t });
            }
        }
    }

    /// Integrate from `t0` to `t_end`, reporting the state at `t0 + i·dt`
    /// (and at `t_end`). The observer may stop the run early. Returns the
    /// final time and state.
    pub fn integrate<const N: usize, F, O>(
        &self,
        f: &F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        dt: f64,
        mut observer: O,
    ) -> Result<(f64, [f64; N])>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]) -> Control,
    {
        let mut t = t0;
        let mut y = y0;
        if observer(t, &y) == Control::Stop {
            return Ok((t, y));
        }
        let mut h = dt.min(self.h_max).min(1e-3 * (t_end - t0).abs().max(1e-300));
        let mut steps = 0usize;
        let mut i = 1usize;
        while t < t_end {
            let target = (t0 + i as f64 * dt).min(t_end);
            while t < target {
                let (tn, yn, hn) = self.advance(f, t, &y, h, target)?;
                t = tn;
                y = yn;
                // keep the step that would have been used without the sample cut
                if tn < target || hn > h {
                    h = hn;
                }
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::TooManySteps { steps });
                }
            }
            if observer(t, &y) == Control::Stop {
                break;
            }
            i += 1;
        }
        Ok((t, y))
    }
}
