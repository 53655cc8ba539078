//! Parameter sweeps over `(μ, h)` on solvable models and log-log slope fits
//! of the remainders `n_exact − n_approx`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::catalog::{self, CatalogParams};
use crate::model::OperatorKind;
use crate::spectral::{
    self, ApproxMethod, CountResult, ExactMethod, IsotropicParams, SecondTermMethod, SecondTermOptions,
};
use crate::{Error, Result};

/// Remainders below this are raised to it before taking logarithms.
pub const REMAINDER_FLOOR: f64 = 0.5;
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Least squares of `log y` against `log x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!("{} abscissae for {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints { found: xs.len(), needed: MIN_FIT_POINTS });
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateFit("slope fits need positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (intercept, slope, stderr) =
        linalg::linear_fit(&lx, &ly).ok_or_else(|| Error::DegenerateFit("all abscissae are equal".into()))?;
    Ok(SlopeFit { slope, intercept, stderr })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    MuhLe1,
    MuhGe1,
}

/// How `μ` is tied to `h` along the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `μ = 1/h` for each `h` in the grid.
    MuInverseH,
    /// `μh = c` for each `h` in the grid.
    FixedMuh(f64),
    /// Every `μ` in the grid at the first `h`.
    FixedH,
}

/// Abscissa of the slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    InvH,
    InvMu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum Template {
    /// Lattice points against the integrated `i`-sum.
    Lattice { l: f64, k: f64, tau: f64 },
    /// Radial exact count against the second-term integral.
    Isotropic {
        k: f64,
        l: f64,
        tau: f64,
        kind: OperatorKind,
        #[serde(default)]
        second_term: SecondTermOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub template: Template,
    pub regime: Regime,
    pub coupling: Coupling,
    #[serde(default)]
    pub h_grid: Vec<f64>,
    #[serde(default)]
    pub mu_grid: Vec<f64>,
    pub envelope: Envelope,
    pub reference_slope: f64,
    pub tolerance: f64,
}

impl SweepPlan {
    /// Lattice model along `μ = 1/h`, `h = 2⁻⁴ … 2⁻⁹`, expected slope 1.
    pub fn lattice(l: f64, k: f64, tau: f64) -> Self {
        SweepPlan {
            template: Template::Lattice { l, k, tau },
            regime: Regime::MuhGe1,
            coupling: Coupling::MuInverseH,
            h_grid: (4..=9).map(|e| 0.5f64.powi(e)).collect(),
            mu_grid: Vec::new(),
            envelope: Envelope::InvH,
            reference_slope: 1.0,
            tolerance: 0.3,
        }
    }

    /// Isotropic Pauli model at fixed `μh ≥ 1`, expected slope 1 in `h⁻¹`.
    pub fn pauli(k: f64, l: f64, tau: f64, muh: f64, h_grid: Vec<f64>, method: SecondTermMethod) -> Self {
        SweepPlan {
            template: Template::Isotropic {
                k,
                l,
                tau,
                kind: OperatorKind::SchrodingerPauli,
                second_term: SecondTermOptions { method, ..Default::default() },
            },
            regime: Regime::MuhGe1,
            coupling: Coupling::FixedMuh(muh),
            h_grid,
            mu_grid: Vec::new(),
            envelope: Envelope::InvH,
            reference_slope: 1.0,
            tolerance: 0.4,
        }
    }

    /// Isotropic Schrödinger model at fixed `h` with `μh ≤ 1`, expected
    /// slope 1 in `μ⁻¹`.
    pub fn schrodinger(k: f64, l: f64, tau: f64, h: f64, mu_grid: Vec<f64>) -> Self {
        SweepPlan {
            template: Template::Isotropic {
                k,
                l,
                tau,
                kind: OperatorKind::Schrodinger,
                second_term: SecondTermOptions::default(),
            },
            regime: Regime::MuhLe1,
            coupling: Coupling::FixedH,
            h_grid: vec![h],
            mu_grid,
            envelope: Envelope::InvMu,
            reference_slope: 1.0,
            tolerance: 0.4,
        }
    }

    /// The `(μ, h)` pairs of the sweep, checked against the regime.
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        let pts: Vec<(f64, f64)> = match self.coupling {
            Coupling::MuInverseH => self.h_grid.iter().map(|&h| (1.0 / h, h)).collect(),
            Coupling::FixedMuh(c) => self.h_grid.iter().map(|&h| (c / h, h)).collect(),
            Coupling::FixedH => {
                let h = *self.h_grid.first().ok_or_else(|| Error::Config("h_grid is empty".into()))?;
                self.mu_grid.iter().map(|&mu| (mu, h)).collect()
            }
        };
        for &(mu, h) in &pts {
            if !(mu > 0.0 && h > 0.0) {
                return Err(Error::Config(format!("sweep point mu = {mu}, h = {h} is not positive")));
            }
            let muh = mu * h;
            let ok = match self.regime {
                Regime::MuhLe1 => muh <= 1.0 + 1e-12,
                Regime::MuhGe1 => muh >= 1.0 - 1e-12,
            };
            if !ok {
                return Err(Error::Config(format!("sweep point mu*h = {muh} violates regime {:?}", self.regime)));
            }
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Every remainder vanished; there is nothing to fit.
    Vacuous,
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub plan: SweepPlan,
    pub rows: Vec<CountResult>,
    /// Abscissae of the fit (`h⁻¹` or `μ⁻¹`).
    pub envelope_x: Vec<f64>,
    pub fitted_slope: Option<f64>,
    pub stderr: Option<f64>,
    pub intercept: Option<f64>,
    pub reference_slope: f64,
    pub tolerance: f64,
    /// `|remainder| / n_approx` per row.
    pub relative_remainder: Vec<f64>,
    /// Log-log slope of the relative remainder; negative when it decays.
    pub relative_trend: Option<f64>,
    pub verdict: Verdict,
}

impl SweepReport {
    /// Relative remainder trends down and ends below where it starts
    /// (rows ordered by growing envelope variable).
    pub fn relative_remainder_decreasing(&self) -> bool {
        let r = &self.relative_remainder;
        let (first, last) = match (self.envelope_order().first(), self.envelope_order().last()) {
            (Some(&a), Some(&b)) => (r[a], r[b]),
            _ => return false,
        };
        self.relative_trend.is_some_and(|t| t < 0.0) && last < first
    }

    fn envelope_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.envelope_x.len()).collect();
        idx.sort_by(|&a, &b| self.envelope_x[a].total_cmp(&self.envelope_x[b]));
        idx
    }
}

fn count_point(template: &Template, mu: f64, h: f64) -> Result<CountResult> {
    match template {
        Template::Lattice { l, k, tau } => {
            let n = spectral::lattice_count(*l, *k, mu, h, *tau)?;
            let w = spectral::lattice_weyl(*l, *k, mu, h, *tau);
            Ok(CountResult::new(
                mu,
                h,
                *tau,
                OperatorKind::SchrodingerPauli,
                n,
                w,
                ExactMethod::Lattice,
                ApproxMethod::LatticeWeyl,
            ))
        }
        Template::Isotropic { k, l, tau, kind, second_term } => {
            let p = IsotropicParams { k: *k, l: *l, mu, h, tau: *tau, kind: *kind };
            let n = spectral::isotropic_exact_count(&p)?;
            let approx = isotropic_second_term(&p, second_term)?;
            Ok(CountResult::new(
                mu,
                h,
                *tau,
                *kind,
                n,
                approx,
                ExactMethod::IsotropicRadial,
                ApproxMethod::SecondTerm(second_term.method),
            ))
        }
    }
}

/// Second-term integral of the isotropic model `k²x₃² + l²|x′|² − τ` over a
/// box enclosing every open well.
pub fn isotropic_second_term(p: &IsotropicParams, opts: &SecondTermOptions) -> Result<f64> {
    let l2 = p.l * p.l;
    let cp = CatalogParams { k: Some(p.k), l1: Some(l2), l2: Some(l2), ..Default::default() };
    let model = catalog::build("ex-13-6-34-ii", &cp)?.with_params(p.mu, p.h, p.tau).with_kind(p.kind);
    let half = 1.05 * p.tau.max(0.0).sqrt() / p.l + 1e-3;
    let ladder = spectral::landau_ladder(p.kind, p.mu, p.h, p.tau);
    let st = spectral::second_term_integral(&model, &ladder, [-half, -half], [half, half], opts)?;
    Ok(st.value)
}

fn assemble(plan: &SweepPlan, rows: Vec<CountResult>) -> Result<SweepReport> {
    let envelope_x: Vec<f64> = rows
        .iter()
        .map(|r| match plan.envelope {
            Envelope::InvH => 1.0 / r.h,
            Envelope::InvMu => 1.0 / r.mu,
        })
        .collect();
    let relative_remainder: Vec<f64> =
        rows.iter().map(|r| if r.n_approx != 0.0 { r.remainder.abs() / r.n_approx.abs() } else { 0.0 }).collect();
    let relative_trend = {
        let pos: Vec<(f64, f64)> =
            envelope_x.iter().zip(&relative_remainder).filter(|(_, &r)| r > 0.0).map(|(&x, &r)| (x, r)).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pos.into_iter().unzip();
        fit_slope(&xs, &ys).ok().map(|f| f.slope)
    };
    let nonzero = rows.iter().filter(|r| r.remainder != 0.0).count();
    let mut report = SweepReport {
        plan: plan.clone(),
        envelope_x: envelope_x.clone(),
        fitted_slope: None,
        stderr: None,
        intercept: None,
        reference_slope: plan.reference_slope,
        tolerance: plan.tolerance,
        relative_remainder,
        relative_trend,
        verdict: Verdict::Vacuous,
        rows,
    };
    if nonzero == 0 {
        return Ok(report);
    }
    if nonzero < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints { found: nonzero, needed: MIN_FIT_POINTS });
    }
    let ys: Vec<f64> = report.rows.iter().map(|r| r.remainder.abs().max(REMAINDER_FLOOR)).collect();
    let fit = fit_slope(&envelope_x, &ys)?;
    report.fitted_slope = Some(fit.slope);
    report.stderr = Some(fit.stderr);
    report.intercept = Some(fit.intercept);
    report.verdict = if (fit.slope - plan.reference_slope).abs() <= plan.tolerance { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

fn rows(plan: &SweepPlan) -> Result<Vec<CountResult>> {
    let pts = plan.points()?;
    pts.par_iter().map(|&(mu, h)| count_point(&plan.template, mu, h)).collect()
}

/// Evaluate every grid point, then fit `log |remainder|` against the log of
/// the envelope variable. Fails when fewer than four remainders are non-zero.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepReport> {
    let report = assemble(plan, rows(plan)?)?;
    if report.verdict == Verdict::Vacuous {
        return Err(Error::InsufficientPoints { found: 0, needed: MIN_FIT_POINTS });
    }
    Ok(report)
}

/// Isotropic Pauli model with `μh` fixed: radial exact count against the
/// second-term integral, fitted against `h⁻¹` with reference slope 1.
/// All-zero remainders give a [`Verdict::Vacuous`] report.
pub fn pauli_second_term_check(
    k: f64,
    l: f64,
    tau: f64,
    muh: f64,
    h_grid: &[f64],
    method: SecondTermMethod,
) -> Result<SweepReport> {
    let plan = SweepPlan::pauli(k, l, tau, muh, h_grid.to_vec(), method);
    assemble(&plan, rows(&plan)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn fit_examples() {
        let xs: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let f = fit_slope(&xs, &xs).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        let ys: Vec<f64> = xs.iter().map(|x| 7.0 * x * x).collect();
        let f = fit_slope(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 7f64.ln()).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * (1.0 + rng.gen_range(-0.05..0.05))).collect();
        let f = fit_slope(&xs, &ys).unwrap();
        assert!((0.85..=1.15).contains(&f.slope));
        assert!(matches!(fit_slope(&[2.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_slope(&xs[..3], &ys[..3]), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn lattice_sweep_resolves_second_term() {
        let rep = run_sweep(&SweepPlan::lattice(1.0, 1.0, 0.9)).unwrap();
        assert_eq!(rep.rows.len(), 6);
        let s = rep.fitted_slope.unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "slope {s}");
        assert!(rep.relative_remainder_decreasing());
        for r in &rep.rows {
            assert_eq!(r.remainder, r.n_exact as f64 - r.n_approx);
        }
    }

    #[test]
    fn constant_zero_remainder_is_insufficient() {
        let mut plan = SweepPlan::lattice(1.0, 1.0, 0.01);
        plan.h_grid = vec![0.5, 0.25, 0.125, 0.0625];
        assert!(matches!(run_sweep(&plan), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn empty_wells_are_vacuous() {
        let rep = pauli_second_term_check(1.0, 1.0, 0.01, 1.5, &[0.125, 0.0625, 0.03125, 0.015625], SecondTermMethod::FiberContour)
            .unwrap();
        assert_eq!(rep.verdict, Verdict::Vacuous);
        assert!(rep.rows.iter().all(|r| r.n_exact == 0));
    }

    #[test]
    fn regime_is_enforced() {
        let mut plan = SweepPlan::lattice(1.0, 1.0, 1.0);
        plan.regime = Regime::MuhLe1;
        plan.coupling = Coupling::FixedMuh(2.0);
        assert!(matches!(plan.points(), Err(Error::Config(_))));
    }

    #[test]
    fn sweeps_are_reproducible() {
        let plan = SweepPlan::lattice(1.0, 1.0, 0.9);
        let a = serde_json::to_string(&run_sweep(&plan).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sweep(&plan).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
