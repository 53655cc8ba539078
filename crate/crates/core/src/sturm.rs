//! Symmetric tridiagonal eigenvalues by Sturm sequences (LDLᵀ pivot signs).

/// Symmetric tridiagonal matrix: `diag[i]`, `off[i]` couples `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length must be n - 1");
        Tridiagonal { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for (i, &a) in self.diag.iter().enumerate() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = a - lambda - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                // pivots decrease in λ, so a zero pivot is positive just below λ
                d = f64::EPSILON * (a.abs() + lambda.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based), to absolute accuracy `tol`.
    pub fn eigenvalue(&self, k: usize, tol: f64) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        assert!(k < self.len());
        while hi - lo > tol.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues in `[lo, hi)`, ascending, to absolute accuracy `tol`.
    /// Intervals are split until each holds one eigenvalue.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let (c_lo, c_hi) = (self.count_below(lo), self.count_below(hi));
        self.slice(lo, hi, c_lo, c_hi, tol, &mut out);
        out
    }

    fn slice(&self, lo: f64, hi: f64, c_lo: usize, c_hi: usize, tol: f64, out: &mut Vec<f64>) {
        if c_hi <= c_lo {
            return;
        }
        let width = tol.max(4.0 * f64::EPSILON * lo.abs().max(hi.abs()));
        if c_hi - c_lo == 1 || hi - lo <= width {
            if c_hi - c_lo == 1 {
                let (mut a, mut b) = (lo, hi);
                while b - a > width {
                    let m = 0.5 * (a + b);
                    if self.count_below(m) > c_lo {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                out.push(0.5 * (a + b));
            } else {
                // cluster narrower than the tolerance
                out.extend(std::iter::repeat_n(0.5 * (lo + hi), c_hi - c_lo));
            }
            return;
        }
        let mid = 0.5 * (lo + hi);
        let c_mid = self.count_below(mid);
        self.slice(lo, mid, c_lo, c_mid, tol, out);
        self.slice(mid, hi, c_mid, c_hi, tol, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn dense(t: &Tridiagonal) -> Vec<f64> {
        let n = t.len();
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.diag[i]
            } else if j == i + 1 {
                t.off[i]
            } else if i == j + 1 {
                t.off[j]
            } else {
                0.0
            }
        });
        let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn laplacian_spectrum() {
        let n = 50;
        let t = Tridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]);
        for k in 0..n {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((t.eigenvalue(k, 1e-13) - exact).abs() < 1e-12);
        }
        assert_eq!(t.count_below(0.0), 0);
        assert_eq!(t.count_below(4.0), n);
    }

    #[test]
    fn slicing_matches_single_bisection() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let t = Tridiagonal::new(diag, vec![0.8; n - 1]);
        let all = t.eigenvalues_in(-10.0, 10.0, 1e-13);
        assert_eq!(all.len(), n);
        for (k, e) in all.iter().enumerate() {
            assert!((e - t.eigenvalue(k, 1e-13)).abs() < 1e-11);
        }
    }

    #[test]
    fn decoupled_blocks_and_zero_pivot() {
        let t = Tridiagonal::new(vec![1.0, 1.0, 3.0], vec![0.0, 0.0]);
        assert_eq!(t.count_below(1.0), 0);
        assert_eq!(t.count_below(1.0 + 1e-12), 2);
        let e = t.eigenvalues_in(0.0, 5.0, 1e-14);
        assert_eq!(e.len(), 3);
        assert!((e[0] - 1.0).abs() < 1e-13 && (e[1] - 1.0).abs() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn counts_agree_with_dense_diagonalisation(
            n in 1usize..200,
            seed in any::<u64>(),
            probes in proptest::collection::vec(-6.0f64..6.0, 5),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let off: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let t = Tridiagonal::new(diag, off);
            let eig = dense(&t);
            for lam in probes {
                let want = eig.iter().filter(|&&e| e < lam).count();
                // skip probes within rounding of an eigenvalue
                prop_assume!(eig.iter().all(|e| (e - lam).abs() > 1e-9));
                prop_assert_eq!(t.count_below(lam), want);
            }
        }
    }
}
