//! Reconstruction of the initial size profile `u⁰` from moment time series.
//!
//! Two steps: moments → boundary trace `u(t, 0)` (differentiation of the
//! moment dynamics), then trace → `u⁰`, either by characteristics (transport
//! model, `u(t,0) = u⁰(bt)`) or by Tikhonov / Kalman estimation against the
//! transport–diffusion model.

mod spline;

pub use spline::{fit_discrepancy, DiscrepancyFit, SmoothingSpline};

use rayon::prelude::*;
use serde::Serialize;

use crate::depoly::{second_order_trace, GridFunction, MomentSeries, SecondOrderParams};
use crate::error::{Error, Result, Warning};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::{lit, Real};

/// Samples of the boundary trace `u(t, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> Trace<T> {
    pub fn new(times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("trace needs ≥ 2 samples at strictly increasing times"));
        }
        Ok(Self { times, values })
    }

    /// Linear interpolation, constant extrapolation.
    pub fn at(&self, t: T) -> T {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let f = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        self.values[j] * (T::one() - f) + self.values[j + 1] * f
    }
}

#[derive(Debug, Clone)]
pub struct TraceEstimate<T> {
    pub trace: Trace<T>,
    /// Smoothing parameter of every differentiation stage, in order.
    pub lambdas: Vec<T>,
    pub warnings: Vec<Warning>,
}

struct Stage<T> {
    deriv: Vec<T>,
    smooth: Vec<T>,
}

fn differentiate<T: Real>(
    times: &[T],
    values: &[T],
    delta: T,
    lambdas: &mut Vec<T>,
    warnings: &mut Vec<Warning>,
) -> Result<Stage<T>> {
    let fit = fit_discrepancy(times, values, delta)?;
    lambdas.push(fit.spline.lambda);
    warnings.extend(fit.warning);
    Ok(Stage { deriv: fit.spline.knot_derivatives(), smooth: fit.spline.fitted().to_vec() })
}

/// Noise level of a derived series from its second differences (median
/// absolute deviation, rescaled to a Gaussian standard deviation).
fn estimate_noise<T: Real>(v: &[T]) -> T {
    if v.len() < 3 {
        return T::zero();
    }
    let mut d: Vec<f64> =
        v.windows(3).map(|w| ((w[0] - lit::<T>(2.0) * w[1] + w[2]).as_f64() / 6f64.sqrt()).abs()).collect();
    d.sort_by(|a, b| a.total_cmp(b));
    lit(d[d.len() / 2] / 0.6745)
}

/// Boundary trace from a moment series.
///
/// * `k = 0`: `u(t,0) = −M0'/b`.
/// * `k = 1` with `M0` co-observed and `i0 ≥ 2`: the exact balance
///   `M1' = −b M0 − bε(i0−1) u(t,0)` is solved for the trace.
/// * `k = 1` otherwise: `M0 ≈ −M1'/b`, then the `k = 0` step.
/// * `k = 2`: `M1 ≈ −M2'/(2b)`, then the `k = 1` reduction.
///
/// Derivatives come from smoothing splines tuned by the discrepancy
/// principle against `series.delta`; derived intermediate series use an
/// estimated noise level.
pub fn moments_to_trace<T: Real>(
    series: &MomentSeries<T>,
    m0: Option<&MomentSeries<T>>,
    b: T,
    eps: T,
    i0: usize,
) -> Result<TraceEstimate<T>> {
    if !(b > T::zero()) {
        return Err(Error::invalid("b must be positive"));
    }
    let times = &series.times;
    let mut lambdas = Vec::new();
    let mut warnings = Vec::new();
    let values: Vec<T> = match series.k {
        0 => {
            let s = differentiate(times, &series.values, series.delta, &mut lambdas, &mut warnings)?;
            s.deriv.iter().map(|&d| -d / b).collect()
        }
        1 if m0.is_some() && i0 >= 2 => {
            let m0 = m0.expect("checked");
            if m0.times != *times || m0.k != 0 {
                return Err(Error::invalid("co-observed M0 must be a k = 0 series on the same times"));
            }
            let s1 = differentiate(times, &series.values, series.delta, &mut lambdas, &mut warnings)?;
            let s0 = differentiate(times, &m0.values, m0.delta, &mut lambdas, &mut warnings)?;
            let denom = b * eps * T::from_usize_lossy(i0 - 1);
            s1.deriv.iter().zip(&s0.smooth).map(|(&d, &m)| -(d + b * m) / denom).collect()
        }
        k @ (1 | 2) => {
            warnings.push(Warning::HighOrderDifferentiation { order: k as usize + 1 }.emit());
            let mut current = series.values.clone();
            let mut delta = series.delta;
            for order in (1..=k).rev() {
                let s = differentiate(times, &current, delta, &mut lambdas, &mut warnings)?;
                // dM_order/dt ≈ −order · b · M_{order−1}
                current = s.deriv.iter().map(|&d| -d / (b * T::from_usize_lossy(order as usize))).collect();
                delta = if series.delta > T::zero() { estimate_noise(&current) } else { T::zero() };
            }
            let s = differentiate(times, &current, delta, &mut lambdas, &mut warnings)?;
            s.deriv.iter().map(|&d| -d / b).collect()
        }
        _ => return Err(Error::MissingMoment(0)),
    };
    Ok(TraceEstimate { trace: Trace::new(times.clone(), values)?, lambdas, warnings })
}

/// `u⁰(x) = trace(x/b)` on the grid `x_j = j·ε`, `0 ≤ x_j ≤ L`. Requires `bT ≥ L`.
pub fn trace_to_initial_first_order<T: Real>(trace: &Trace<T>, b: T, length: T, eps: T) -> Result<GridFunction<T>> {
    let reach = b * *trace.times.last().expect("nonempty trace");
    if reach < length * lit(1.0 - 1e-9) {
        return Err(Error::Horizon { reach: reach.as_f64(), length: length.as_f64() });
    }
    let cells = (length / eps).round().to_usize().unwrap_or(0);
    Ok(GridFunction::sample(eps, cells, |x| trace.at(x / b)))
}

/// Linear map from the free nodes of `u⁰` (all but the Dirichlet node at `L`)
/// to the boundary trace of the transport–diffusion model at the solver times.
#[derive(Debug, Clone)]
pub struct ObservationOperator<T: Real> {
    pub matrix: Matrix<T>,
    pub params: SecondOrderParams<T>,
    pub times: Vec<T>,
}

impl<T: Real> ObservationOperator<T> {
    /// One solver run per basis vector, in parallel.
    pub fn assemble(params: &SecondOrderParams<T>) -> Result<Self> {
        let nx = params.nx;
        let dx = params.dx();
        let columns = (0..nx)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![T::zero(); nx + 1];
                e[j] = T::one();
                second_order_trace(&GridFunction { dx, values: e }, params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { matrix: Matrix::from_columns(params.nt + 1, &columns), params: *params, times: params.times() })
    }

    pub fn unknowns(&self) -> usize {
        self.matrix.cols()
    }

    /// Trace of `u⁰` (given on the free nodes).
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        self.matrix.mul_vec(u)
    }

    /// Trapezoid weights of the time grid.
    pub fn time_weights(&self) -> Vec<T> {
        let dt = self.params.dt();
        let n = self.times.len();
        (0..n).map(|i| if i == 0 || i == n - 1 { dt / lit(2.0) } else { dt }).collect()
    }

    /// Discrete `H¹` Gram matrix: `dx Σ u_j² + dx Σ ((u_{j+1} − u_j)/dx)²`
    /// with `u_{nx} = 0`.
    pub fn h1_gram(&self) -> Matrix<T> {
        let n = self.unknowns();
        let dx = self.params.dx();
        let mut g = Matrix::identity(n).scaled(dx);
        let k = T::one() / dx;
        for j in 0..n {
            // difference (u_{j+1} − u_j), u_n = 0
            g[(j, j)] = g[(j, j)] + k;
            if j + 1 < n {
                g[(j + 1, j + 1)] = g[(j + 1, j + 1)] + k;
                g[(j, j + 1)] = g[(j, j + 1)] - k;
                g[(j + 1, j)] = g[(j + 1, j)] - k;
            }
        }
        g
    }

    /// Free-node vector of a grid function on the solver grid.
    pub fn restrict(&self, u: &GridFunction<T>) -> Vec<T> {
        let dx = self.params.dx();
        (0..self.unknowns()).map(|j| u.interpolate(dx * T::from_usize_lossy(j))).collect()
    }

    /// Grid function (Dirichlet node appended) from free-node values.
    pub fn extend(&self, u: &[T]) -> GridFunction<T> {
        let mut v = u.to_vec();
        v.push(T::zero());
        GridFunction { dx: self.params.dx(), values: v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TikhonovConfig<T> {
    /// Radius `M` of the prior `H¹` ball.
    pub m_radius: T,
    /// Noise level `δ`.
    pub delta: T,
}

impl<T: Real> TikhonovConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.m_radius > T::zero() && self.delta > T::zero()) {
            return Err(Error::invalid("M and δ must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct Reconstruction<T: Real> {
    pub estimate: GridFunction<T>,
    /// `(1/2M²)‖u‖²_{H¹} + (1/2δ²)‖y − Au‖²_{L²(0,T)}`.
    pub objective: T,
    /// `‖y − Au‖_{L²(0,T)}`.
    pub residual: T,
    pub iterations: usize,
    pub warnings: Vec<Warning>,
}

/// Value of the Tikhonov objective at free-node vector `u`.
pub fn tikhonov_objective<T: Real>(y: &[T], op: &ObservationOperator<T>, cfg: &TikhonovConfig<T>, u: &[T]) -> T {
    let g = op.h1_gram();
    let gu = g.mul_vec(u);
    let r = residual_norm(y, op, u);
    dot(u, &gu) / (lit::<T>(2.0) * cfg.m_radius * cfg.m_radius) + r * r / (lit::<T>(2.0) * cfg.delta * cfg.delta)
}

fn residual_norm<T: Real>(y: &[T], op: &ObservationOperator<T>, u: &[T]) -> T {
    let w = op.time_weights();
    let au = op.apply(u);
    y.iter().zip(&au).zip(&w).map(|((&a, &b), &w)| w * (a - b) * (a - b)).sum::<T>().sqrt()
}

fn check_trace<T: Real>(y: &[T], op: &ObservationOperator<T>) -> Result<()> {
    if y.len() != op.times.len() {
        return Err(Error::invalid(format!(
            "observed trace has {} samples, operator expects {}",
            y.len(),
            op.times.len()
        )));
    }
    Ok(())
}

/// Minimiser of the Tikhonov functional via the normal equations
/// `(G/M² + AᵀWA/δ²) u = AᵀWy/δ²` (Cholesky).
pub fn tikhonov_reconstruct<T: Real>(
    y: &[T],
    op: &ObservationOperator<T>,
    cfg: &TikhonovConfig<T>,
) -> Result<Reconstruction<T>> {
    cfg.validate()?;
    check_trace(y, op)?;
    let w = op.time_weights();
    let inv_d2 = T::one() / (cfg.delta * cfg.delta);
    let lhs =
        op.h1_gram().scaled(T::one() / (cfg.m_radius * cfg.m_radius)).add(&op.matrix.weighted_gram(&w).scaled(inv_d2));
    let wy: Vec<T> = y.iter().zip(&w).map(|(&a, &b)| a * b * inv_d2).collect();
    let rhs = op.matrix.tr_mul_vec(&wy);
    let u = Cholesky::new(&lhs)?.solve(&rhs);
    Ok(Reconstruction {
        objective: tikhonov_objective(y, op, cfg, &u),
        residual: residual_norm(y, op, &u),
        estimate: op.extend(&u),
        iterations: 1,
        warnings: Vec::new(),
    })
}

/// Sequential (Kalman / recursive least squares) version of
/// [`tikhonov_reconstruct`]: prior `N(0, M² G⁻¹)`, observation `n` with
/// variance `δ²/w_n`, rank-one updates. The final mean equals the Tikhonov
/// minimiser.
pub fn kalman_reconstruct<T: Real>(
    y: &[T],
    op: &ObservationOperator<T>,
    cfg: &TikhonovConfig<T>,
) -> Result<Reconstruction<T>> {
    kalman_assimilate(y, op, cfg, y.len())
}

/// Assimilates only the first `count` samples of `y`.
pub fn kalman_assimilate<T: Real>(
    y: &[T],
    op: &ObservationOperator<T>,
    cfg: &TikhonovConfig<T>,
    count: usize,
) -> Result<Reconstruction<T>> {
    cfg.validate()?;
    check_trace(y, op)?;
    let n = op.unknowns();
    let w = op.time_weights();
    let mut p = Cholesky::new(&op.h1_gram())?.inverse().scaled(cfg.m_radius * cfg.m_radius);
    let mut u = vec![T::zero(); n];
    let mut pa = vec![T::zero(); n];
    let mut min_ratio = T::infinity();
    for k in 0..count.min(y.len()) {
        let a = op.matrix.row(k);
        for i in 0..n {
            pa[i] = dot(p.row(i), a);
        }
        let r = cfg.delta * cfg.delta / w[k];
        let s = dot(a, &pa) + r;
        min_ratio = min_ratio.min(s / r);
        let innov = (y[k] - dot(a, &u)) / s;
        for i in 0..n {
            u[i] = u[i] + pa[i] * innov;
        }
        for i in 0..n {
            let f = pa[i] / s;
            for j in 0..n {
                p[(i, j)] = p[(i, j)] - f * pa[j];
            }
        }
        // keep P symmetric against rounding drift
        for i in 0..n {
            for j in i + 1..n {
                let m = (p[(i, j)] + p[(j, i)]) / lit(2.0);
                p[(i, j)] = m;
                p[(j, i)] = m;
            }
        }
    }
    let mut warnings = Vec::new();
    if min_ratio < T::one() - lit(1e-8) {
        warnings.push(Warning::CovarianceConditioning { min_innovation: min_ratio.as_f64() }.emit());
    }
    Ok(Reconstruction {
        objective: tikhonov_objective(y, op, cfg, &u),
        residual: residual_norm(y, op, &u),
        estimate: op.extend(&u),
        iterations: count.min(y.len()),
        warnings,
    })
}
