//! Cubic smoothing splines (Reinsch form) with the smoothing parameter
//! chosen by the discrepancy principle.

use crate::error::{Error, Result, Warning};
use crate::linalg::{solve_tridiagonal, BandedSpd};
use crate::scalar::{lit, Real};

/// Natural cubic spline through `(x_i, f_i)` with knot second derivatives `γ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingSpline<T> {
    pub knots: Vec<T>,
    pub values: Vec<T>,
    pub second: Vec<T>,
    pub lambda: T,
}

impl<T: Real> SmoothingSpline<T> {
    /// Minimiser of `Σ (y_i − f(x_i))² + λ ∫ f''²`. `λ = 0` interpolates.
    pub fn fit(x: &[T], y: &[T], lambda: T) -> Result<Self> {
        let n = x.len();
        if n != y.len() || n < 3 {
            return Err(Error::invalid("a smoothing spline needs at least 3 matching samples"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) || lambda < T::zero() {
            return Err(Error::invalid("knots must increase strictly and λ ≥ 0"));
        }
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m = n - 2;
        let three = lit::<T>(3.0);
        let six = lit::<T>(6.0);
        // Qᵀy
        let qty: Vec<T> = (1..n - 1).map(|i| (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]).collect();
        // column i of Q (interior knot i): rows i-1, i, i+1
        let qcol = |i: usize| [T::one() / h[i - 1], -T::one() / h[i - 1] - T::one() / h[i], T::one() / h[i]];
        let gamma_inner = if lambda == T::zero() {
            let diag: Vec<T> = (1..n - 1).map(|i| (h[i - 1] + h[i]) / three).collect();
            let off: Vec<T> = (1..n - 1).map(|i| h[i] / six).collect();
            let mut lower = vec![T::zero(); m];
            lower[1..].copy_from_slice(&off[..m - 1]);
            let mut upper = off.clone();
            upper[m - 1] = T::zero();
            solve_tridiagonal(&lower, &diag, &upper, &qty)?
        } else {
            let mut a = BandedSpd::zeros(m, 2);
            for r in 0..m {
                let i = r + 1;
                a.add(r, r, (h[i - 1] + h[i]) / three);
                if r + 1 < m {
                    a.add(r, r + 1, h[i] / six);
                }
            }
            // λ QᵀQ: columns i and j overlap when |i − j| ≤ 2
            for r in 0..m {
                let ci = qcol(r + 1);
                for s in r..(r + 3).min(m) {
                    let cj = qcol(s + 1);
                    let mut v = T::zero();
                    for (ri, &qi) in ci.iter().enumerate() {
                        let row = r + ri; // global row index (r+1) - 1 + ri
                        if row >= s && row < s + 3 {
                            v = v + qi * cj[row - s];
                        }
                    }
                    if v != T::zero() {
                        a.add(r, s, lambda * v);
                    }
                }
            }
            a.solve(&qty)?
        };
        let mut second = vec![T::zero(); n];
        second[1..n - 1].copy_from_slice(&gamma_inner);
        let mut values = y.to_vec();
        if lambda > T::zero() {
            for (r, &g) in gamma_inner.iter().enumerate() {
                let c = qcol(r + 1);
                for (k, &q) in c.iter().enumerate() {
                    values[r + k] = values[r + k] - lambda * q * g;
                }
            }
        }
        Ok(Self { knots: x.to_vec(), values, second, lambda })
    }

    fn segment(&self, t: T) -> usize {
        let n = self.knots.len();
        self.knots.partition_point(|&k| k <= t).clamp(1, n - 1) - 1
    }

    pub fn eval(&self, t: T) -> T {
        let i = self.segment(t);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = T::one() - a;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / lit(6.0)
    }

    pub fn derivative(&self, t: T) -> T {
        let i = self.segment(t);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - t) / h;
        let b = T::one() - a;
        let three = lit::<T>(3.0);
        (self.values[i + 1] - self.values[i]) / h - (three * a * a - T::one()) / lit(6.0) * h * self.second[i]
            + (three * b * b - T::one()) / lit(6.0) * h * self.second[i + 1]
    }

    /// `f'` at every knot.
    pub fn knot_derivatives(&self) -> Vec<T> {
        self.knots.iter().map(|&t| self.derivative(t)).collect()
    }

    pub fn fitted(&self) -> &[T] {
        &self.values
    }
}

#[derive(Debug, Clone)]
pub struct DiscrepancyFit<T> {
    pub spline: SmoothingSpline<T>,
    pub residual: T,
    pub target: T,
    pub warning: Option<Warning>,
}

/// Chooses `λ` so that `‖f − y‖ ≈ δ √n` by bisection in `log λ` over
/// `[1e-10, 1e10] · h̄³`. `δ = 0` interpolates. When the target is not
/// bracketed the nearest end is used and a warning is returned.
pub fn fit_discrepancy<T: Real>(x: &[T], y: &[T], delta: T) -> Result<DiscrepancyFit<T>> {
    let n = x.len();
    if delta <= T::zero() {
        let spline = SmoothingSpline::fit(x, y, T::zero())?;
        return Ok(DiscrepancyFit { spline, residual: T::zero(), target: T::zero(), warning: None });
    }
    if n < 3 {
        return Err(Error::invalid("a smoothing spline needs at least 3 samples"));
    }
    let target = delta * T::from_usize_lossy(n).sqrt();
    let hbar = (x[n - 1] - x[0]) / T::from_usize_lossy(n - 1);
    let scale = (hbar * hbar * hbar).as_f64();
    let residual = |lam: f64| -> Result<(SmoothingSpline<T>, T)> {
        let s = SmoothingSpline::fit(x, y, lit(lam))?;
        let r = s.values.iter().zip(y).map(|(&f, &v)| (f - v) * (f - v)).sum::<T>().sqrt();
        Ok((s, r))
    };
    let (mut lo, mut hi) = ((1e-10 * scale).ln(), (1e10 * scale).ln());
    let (s_hi, r_hi) = residual(hi.exp())?;
    if r_hi <= target {
        let lambda = s_hi.lambda.as_f64();
        return Ok(DiscrepancyFit {
            spline: s_hi,
            residual: r_hi,
            target,
            warning: Some(Warning::PenaltyGridBoundary { lambda }.emit()),
        });
    }
    let (s_lo, r_lo) = residual(lo.exp())?;
    if r_lo >= target {
        let lambda = s_lo.lambda.as_f64();
        return Ok(DiscrepancyFit {
            spline: s_lo,
            residual: r_lo,
            target,
            warning: Some(Warning::PenaltyGridBoundary { lambda }.emit()),
        });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let (_, r) = residual(mid.exp())?;
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let (spline, r) = residual((0.5 * (lo + hi)).exp())?;
    Ok(DiscrepancyFit { spline, residual: r, target, warning: None })
}
