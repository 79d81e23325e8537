//! Forward depolymerisation: the rescaled discrete system
//! `dc_i/dt = (b/ε)(c_{i+1} − c_i)`, `i ≥ i0`, its exact Poisson-kernel
//! solution, the transport (first-order) and transport–diffusion
//! (second-order) approximations, and the moment observables.

mod pde;

pub use pde::{second_order_solve, second_order_trace, SecondOrderParams};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Concentrations `c_i`, `i0 ≤ i ≤ i_max`, of the rescaled discrete system.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState<T> {
    pub eps: T,
    pub i0: usize,
    pub b: T,
    /// `c[j]` is `c_{i0 + j}`.
    pub c: Vec<T>,
}

impl<T: Real> DiscreteState<T> {
    pub fn new(eps: T, i0: usize, b: T, c: Vec<T>) -> Result<Self> {
        if !(eps > T::zero()) || i0 == 0 || b < T::zero() || c.is_empty() {
            return Err(Error::invalid("need ε > 0, i0 ≥ 1, b ≥ 0 and at least one size class"));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("concentrations must be finite"));
        }
        Ok(Self { eps, i0, b, c })
    }

    /// Samples `u0` at `x_i = ε(i − i0)` for `x_i ∈ [0, L]`.
    pub fn from_profile(profile: &InitialProfile<T>, eps: T, i0: usize, b: T, length: T) -> Result<Self> {
        let n = (length / eps).round().to_usize().unwrap_or(0) + 1;
        let c = (0..n).map(|j| profile.eval(eps * T::from_usize_lossy(j))).collect();
        Self::new(eps, i0, b, c)
    }

    /// Uses the nodal values of `u` as `c_i`; the grid spacing must equal `ε`.
    pub fn from_grid_function(u: &GridFunction<T>, i0: usize, b: T) -> Result<Self> {
        Self::new(u.dx, i0, b, u.values.clone())
    }

    pub fn i_max(&self) -> usize {
        self.i0 + self.c.len() - 1
    }

    /// `L = ε (i_max − i0)`.
    pub fn length(&self) -> T {
        self.eps * T::from_usize_lossy(self.c.len() - 1)
    }

    /// Stepwise interpolant `u^ε(x) = c_i` on `[x_i, x_{i+1})`.
    pub fn to_grid_function(&self) -> GridFunction<T> {
        GridFunction { dx: self.eps, values: self.c.clone() }
    }

    /// `M_k^ε = ε Σ (εi)^k c_i`.
    pub fn moment(&self, k: u32) -> T {
        let e = self.eps;
        self.c.iter().enumerate().map(|(j, &c)| (e * T::from_usize_lossy(self.i0 + j)).powi(k as i32) * c).sum::<T>()
            * e
    }

    fn rhs(&self, c: &[T], out: &mut [T]) {
        let r = self.b / self.eps;
        let n = c.len();
        for j in 0..n {
            let next = if j + 1 < n { c[j + 1] } else { T::zero() };
            out[j] = r * (next - c[j]);
        }
    }

    fn with_values(&self, c: Vec<T>) -> Self {
        Self { c, ..self.clone() }
    }
}

/// Exact right-hand side of the moment dynamics for `k ∈ {0, 1}`:
/// `dM0/dt = −b c_{i0}` and `dM1/dt = −b M0 − bε(i0 − 1) c_{i0}`.
///
/// The `k = 1` correction is `O(ε c_{i0})`; it is what summation by parts of
/// the discrete system gives with the smallest tracked size `i0`.
pub fn moment_rhs<T: Real>(state: &DiscreteState<T>, k: u32) -> Result<T> {
    let c0 = state.c[0];
    match k {
        0 => Ok(-state.b * c0),
        1 => {
            let corr = state.b * state.eps * T::from_usize_lossy(state.i0 - 1) * c0;
            Ok(-state.b * state.moment(0) - corr)
        }
        _ => Err(Error::invalid("moment dynamics are closed only for k ∈ {0, 1}")),
    }
}

/// Nodal values on the uniform grid `x_j = j·dx`, `j = 0..n`.
///
/// Read as a step function (`u(x) = values[j]` on `[x_j, x_{j+1})`) when it
/// interpolates a discrete state, and as nodal samples when it carries a PDE
/// solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GridFunction<T> {
    pub dx: T,
    pub values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(dx: T, values: Vec<T>) -> Result<Self> {
        if !(dx > T::zero()) || values.is_empty() {
            return Err(Error::invalid("grid function needs dx > 0 and at least one value"));
        }
        Ok(Self { dx, values })
    }

    /// `f` sampled at `x_j = j·dx`, `j = 0..=cells`.
    pub fn sample(dx: T, cells: usize, f: impl Fn(T) -> T) -> Self {
        Self { dx, values: (0..=cells).map(|j| f(dx * T::from_usize_lossy(j))).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, j: usize) -> T {
        self.dx * T::from_usize_lossy(j)
    }

    pub fn xs(&self) -> Vec<T> {
        (0..self.values.len()).map(|j| self.x(j)).collect()
    }

    pub fn length(&self) -> T {
        self.x(self.values.len() - 1)
    }

    /// Linear interpolation between nodes; zero outside `[0, x_last]`.
    pub fn interpolate(&self, x: T) -> T {
        let n = self.values.len();
        if x < T::zero() || x > self.length() {
            return T::zero();
        }
        let u = x / self.dx;
        let j = u.floor().to_usize().unwrap_or(0).min(n - 1);
        if j + 1 >= n {
            return self.values[n - 1];
        }
        let f = u - T::from_usize_lossy(j);
        self.values[j] * (T::one() - f) + self.values[j + 1] * f
    }

    /// Resamples onto spacing `dx` over the same length (linear interpolation).
    pub fn resampled(&self, dx: T) -> Self {
        let cells = (self.length() / dx).round().to_usize().unwrap_or(0);
        Self::sample(dx, cells, |x| self.interpolate(x))
    }

    /// Every `stride`-th node.
    pub fn decimated(&self, stride: usize) -> Self {
        Self {
            dx: self.dx * T::from_usize_lossy(stride),
            values: self.values.iter().step_by(stride).copied().collect(),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { dx: self.dx, values: self.values.iter().map(|&v| v * c).collect() }
    }

    /// Node-wise difference; the shorter function is padded with zeros.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if (self.dx - other.dx).abs() > self.dx * lit(1e-9) {
            return Err(Error::invalid("grid functions have different spacings"));
        }
        let n = self.values.len().max(other.values.len());
        let get = |v: &[T], j: usize| v.get(j).copied().unwrap_or(T::zero());
        Ok(Self { dx: self.dx, values: (0..n).map(|j| get(&self.values, j) - get(&other.values, j)).collect() })
    }
}

/// `‖u‖_{2,ε} = sqrt(Σ dx |u(x_i)|²)`, the L² norm of the step interpolant.
pub fn discrete_norm<T: Real>(u: &GridFunction<T>) -> T {
    (u.values.iter().map(|&v| v * v).sum::<T>() * u.dx).sqrt()
}

/// Smooth or piecewise initial size profiles used by scenarios and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile<T> {
    /// `exp(−(x − center)² / (2 width²))`, truncated to `[0, L]` by the caller's grid.
    Gaussian { center: T, width: T },
    /// `1` on `[lo, hi)`.
    Indicator { lo: T, hi: T },
    /// `cos²` bump of the given half-width, `C¹` and compactly supported.
    CosineBump { center: T, half_width: T },
}

impl<T: Real> InitialProfile<T> {
    pub fn eval(&self, x: T) -> T {
        match *self {
            InitialProfile::Gaussian { center, width } => {
                let z = (x - center) / width;
                (-(z * z) / lit(2.0)).exp()
            }
            InitialProfile::Indicator { lo, hi } => {
                if x >= lo && x < hi {
                    T::one()
                } else {
                    T::zero()
                }
            }
            InitialProfile::CosineBump { center, half_width } => {
                let z = (x - center) / half_width;
                if z.abs() >= T::one() {
                    T::zero()
                } else {
                    let c = (T::FRAC_PI_2() * z).cos();
                    c * c
                }
            }
        }
    }
}

/// States recorded at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T, S> {
    pub times: Vec<T>,
    pub states: Vec<S>,
}

impl<T: Real, S> Trajectory<T, S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }
}

fn check_step<T: Real>(state: &DiscreteState<T>, dt: T) -> Result<()> {
    let limit = if state.b > T::zero() { state.eps / (lit::<T>(2.0) * state.b) } else { T::infinity() };
    if !(dt > T::zero()) || dt > limit * lit(1.0 + 1e-12) {
        return Err(Error::StepSize { dt: dt.as_f64(), limit: limit.as_f64() });
    }
    Ok(())
}

fn rk4_step<T: Real>(state: &DiscreteState<T>, c: &mut [T], h: T, k: &mut [Vec<T>; 4], tmp: &mut [T]) {
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    let n = c.len();
    state.rhs(c, &mut k[0]);
    for j in 0..n {
        tmp[j] = c[j] + h / two * k[0][j];
    }
    state.rhs(tmp, &mut k[1]);
    for j in 0..n {
        tmp[j] = c[j] + h / two * k[1][j];
    }
    state.rhs(tmp, &mut k[2]);
    for j in 0..n {
        tmp[j] = c[j] + h * k[2][j];
    }
    state.rhs(tmp, &mut k[3]);
    for j in 0..n {
        c[j] = c[j] + h / six * (k[0][j] + two * k[1][j] + two * k[2][j] + k[3][j]);
    }
}

/// Classical RK4 on `[0, horizon]`, recording every step. The step is
/// shortened uniformly so that the last step lands on `horizon`; it must not
/// exceed `ε/(2b)`.
pub fn simulate_discrete<T: Real>(
    state0: &DiscreteState<T>,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T, DiscreteState<T>>> {
    if !(horizon > T::zero()) {
        return Err(Error::invalid("horizon must be positive"));
    }
    check_step(state0, dt)?;
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(1).max(1);
    let times: Vec<T> = (0..=steps).map(|n| horizon * T::from_usize_lossy(n) / T::from_usize_lossy(steps)).collect();
    simulate_discrete_at(state0, &times, dt)
}

/// RK4 recording only at `times` (sorted, nonnegative); each interval is
/// covered by equal steps no longer than `dt`.
pub fn simulate_discrete_at<T: Real>(
    state0: &DiscreteState<T>,
    times: &[T],
    dt: T,
) -> Result<Trajectory<T, DiscreteState<T>>> {
    check_step(state0, dt)?;
    if times.iter().any(|t| *t < T::zero()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("record times must be sorted and nonnegative"));
    }
    let n = state0.c.len();
    let mut c = state0.c.clone();
    let mut k = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
    let mut tmp = vec![T::zero(); n];
    let mut t = T::zero();
    let mut states = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > T::zero() {
            let steps = (span / dt).ceil().to_usize().unwrap_or(1).max(1);
            let h = span / T::from_usize_lossy(steps);
            for _ in 0..steps {
                rk4_step(state0, &mut c, h, &mut k, &mut tmp);
            }
            t = target;
        }
        states.push(state0.with_values(c.clone()));
    }
    Ok(Trajectory { times: times.to_vec(), states })
}

/// Exact solution `c_i(t) = Σ_{j≥i} e^{−s} s^{j−i}/(j−i)! c_j(0)`, `s = bt/ε`,
/// with the Poisson weights evaluated in log space.
pub fn poisson_solution<T: Real>(state0: &DiscreteState<T>, t: T) -> Result<DiscreteState<T>> {
    if t < T::zero() {
        return Err(Error::invalid("time must be nonnegative"));
    }
    let n = state0.c.len();
    let s = (state0.b * t / state0.eps).as_f64();
    let weights: Vec<f64> = if s == 0.0 {
        let mut w = vec![0.0; n];
        w[0] = 1.0;
        w
    } else {
        let ls = s.ln();
        let mut lf = 0.0f64; // ln m!
        (0..n)
            .map(|m| {
                if m > 0 {
                    lf += (m as f64).ln();
                }
                (-s + m as f64 * ls - lf).exp()
            })
            .collect()
    };
    let c0: Vec<f64> = state0.c.iter().map(|v| v.as_f64()).collect();
    let c = (0..n)
        .map(|i| {
            let mut acc = 0.0f64;
            for (m, cj) in c0[i..].iter().enumerate() {
                acc += weights[m] * cj;
            }
            lit::<T>(acc)
        })
        .collect();
    Ok(state0.with_values(c))
}

/// Time series of one moment `M_k^ε` with a noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MomentSeries<T> {
    pub k: u32,
    pub times: Vec<T>,
    pub values: Vec<T>,
    /// Noise standard deviation per sample.
    pub delta: T,
}

impl<T: Real> MomentSeries<T> {
    pub fn new(k: u32, times: Vec<T>, values: Vec<T>, delta: T) -> Result<Self> {
        if k > 2 {
            return Err(Error::invalid("moment order must be 0, 1 or 2"));
        }
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::invalid("need matching times and values, at least two samples"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("times must be strictly increasing"));
        }
        if values.iter().chain(&times).any(|v| !v.is_finite()) || delta < T::zero() {
            return Err(Error::invalid("values must be finite and δ ≥ 0"));
        }
        Ok(Self { k, times, values, delta })
    }

    /// Adds i.i.d. `N(0, δ²)` noise and records `δ`.
    pub fn with_noise(&self, delta: T, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = self.values.clone();
        if delta > T::zero() {
            let normal = Normal::new(0.0, delta.as_f64()).expect("positive σ");
            for v in values.iter_mut() {
                *v = *v + lit(normal.sample(&mut rng));
            }
        }
        Self { values, delta, ..self.clone() }
    }
}

/// `M_k^ε` at every recorded time.
pub fn moment_series<T: Real>(traj: &Trajectory<T, DiscreteState<T>>, k: u32) -> Result<MomentSeries<T>> {
    let values = traj.states.iter().map(|s| s.moment(k)).collect();
    MomentSeries::new(k, traj.times.clone(), values, T::zero())
}

/// `u(t, x) = u0(x + bt)`, with `u0` read by linear interpolation and taken
/// as zero beyond its last node.
pub fn first_order_solve<T: Real>(u0: &GridFunction<T>, b: T, t: T) -> Result<GridFunction<T>> {
    if t < T::zero() {
        return Err(Error::invalid("time must be nonnegative"));
    }
    let shift = b * t;
    if shift == T::zero() {
        return Ok(u0.clone());
    }
    let values = (0..u0.len()).map(|j| u0.interpolate(u0.x(j) + shift)).collect();
    Ok(GridFunction { dx: u0.dx, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac_state(eps: f64, b: f64) -> DiscreteState<f64> {
        let mut c = vec![0.0; 6];
        c[4] = 1.0; // i = 5 with i0 = 1
        DiscreteState::new(eps, 1, b, c).unwrap()
    }

    #[test]
    fn poisson_kernel_values() {
        let s0 = dirac_state(0.1, 1.0);
        let s = poisson_solution(&s0, 0.1).unwrap(); // s = bt/ε = 1
        let e = (-1.0f64).exp();
        assert!((s.c[4] - e).abs() < 1e-15);
        assert!((s.c[3] - e).abs() < 1e-15);
        assert!((s.c[2] - e / 2.0).abs() < 1e-15);
        assert_eq!(poisson_solution(&s0, 0.0).unwrap(), s0);
    }

    #[test]
    fn rk4_matches_poisson() {
        let s0 = DiscreteState::<f64>::from_profile(
            &InitialProfile::Gaussian { center: 0.5, width: 0.1 },
            1.0 / 64.0,
            1,
            1.0,
            1.0,
        )
        .unwrap();
        let dt = s0.eps / 2.0;
        let tr = simulate_discrete(&s0, 0.5, dt).unwrap();
        let exact = poisson_solution(&s0, 0.5).unwrap();
        let err = tr.last().unwrap().c.iter().zip(&exact.c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 10.0 * dt * dt * 0.5, "{err}");
        // top size only decays
        let top = *s0.c.last().unwrap() * (-(0.5 / s0.eps)).exp();
        assert!((exact.c.last().unwrap() - top).abs() < 1e-15);
    }

    #[test]
    fn step_limit_enforced_and_b_zero_is_static() {
        let s0 = dirac_state(0.1, 1.0);
        assert!(matches!(simulate_discrete(&s0, 1.0, 0.06), Err(Error::StepSize { .. })));
        let frozen = dirac_state(0.1, 0.0);
        let tr = simulate_discrete(&frozen, 1.0, 0.3).unwrap();
        assert!(tr.states.iter().all(|s| s.c == frozen.c));
    }

    #[test]
    fn moment_formula() {
        let mut c = vec![0.0f64; 51];
        c[49] = 1.0; // i = 50 with i0 = 1, εi = 0.5
        let s = DiscreteState::new(0.01, 1, 1.0, c).unwrap();
        assert!((s.moment(2) - 0.01 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn first_order_shift_and_trace() {
        let u0 = GridFunction::<f64>::sample(0.01, 100, |x| x * (1.0 - x));
        let u = first_order_solve(&u0, 2.0, 0.1).unwrap();
        assert!((u.values[0] - 0.2 * 0.8).abs() < 1e-12);
        assert!(u.values[81..].iter().all(|&v| v == 0.0));
        assert_eq!(first_order_solve(&u0, 2.0, 0.0).unwrap(), u0);
    }

    #[test]
    fn norm_examples() {
        let u = GridFunction::<f64>::new(0.25, vec![1.0; 8]).unwrap();
        assert!((discrete_norm(&u) - 2.0f64.sqrt()).abs() < 1e-15);
        assert!((discrete_norm(&u.scaled(2.0)) - 2.0 * discrete_norm(&u)).abs() < 1e-15);
    }
}
