//! Method-of-lines solver on a fixed size grid and the long-time profile.

use rayon::prelude::*;

use super::{FragmentationKernel, FragmentationParams};
use crate::depoly::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{self, accumulate_box, accumulate_point, power_integral, CellWeight};
use crate::measures::{weighted_tv_norm, Measure};
use crate::quadrature::GaussRule;
use crate::scalar::{lit, Real};

/// Largest admissible `dt · α · L^γ`.
const STEP_LIMIT: f64 = 0.1;
/// Share of the mass below which the largest cells are dropped.
const ACTIVE_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct GridOdeOptions<T> {
    /// Explicit grid; otherwise `cells` log cells on `[lower_ratio · L, L]` plus `[0, lower_ratio · L]`.
    pub grid: Option<Vec<T>>,
    pub cells: usize,
    pub lower_ratio: T,
    /// Fixed time step. By default the step follows the stability limit of
    /// the largest cell that still carries mass.
    pub dt: Option<T>,
    /// Disable to integrate the loss term alone.
    pub gain: bool,
}

impl<T: Real> Default for GridOdeOptions<T> {
    fn default() -> Self {
        Self { grid: None, cells: 512, lower_ratio: lit(1e-4), dt: None, gain: true }
    }
}

/// Cell values `u_i` evolve by `u_i' = −λ_i u_i + Σ_j G_ij u_j`, with first-moment
/// cell averages so that `Σ_i X_i u_i` (the mass) is conserved exactly.
struct GridOde<T> {
    grid: Vec<T>,
    x1: Vec<T>,
    loss: Vec<T>,
    gain: Vec<T>,
    n: usize,
    alpha: T,
    gamma: T,
    dt: T,
    fixed_dt: bool,
    step_fraction: T,
    time: T,
    state: Vec<T>,
}

impl<T: Real> GridOde<T> {
    fn new(
        u0: &Measure<T>,
        params: &FragmentationParams<T>,
        kappa: &FragmentationKernel<T>,
        opts: &GridOdeOptions<T>,
    ) -> Result<Self> {
        if !u0.atoms().is_empty() {
            return Err(Error::invalid("the grid solver needs a density initial datum"));
        }
        let Some((_, l)) = u0.support() else {
            return Err(Error::invalid("initial datum is zero"));
        };
        let grid = match &opts.grid {
            Some(g) => {
                grid::validate_grid(g)?;
                g.clone()
            }
            None => grid::log_grid(opts.lower_ratio * l, l, opts.cells, true),
        };
        let top = *grid.last().unwrap();
        let scale = params.rate(top);
        let limit = lit::<T>(STEP_LIMIT);
        let dt = match opts.dt {
            Some(dt) => dt,
            None => lit::<T>(0.99) * limit / scale,
        };
        if !(dt > T::zero()) || dt * scale > limit {
            return Err(Error::StepSize { dt: dt.as_f64(), limit: (limit / scale).as_f64() });
        }
        let state = u0.project(&grid, CellWeight::FirstMoment)?.density().to_vec();
        let n = grid.len() - 1;
        let one = T::one();
        let x1: Vec<T> = grid.windows(2).map(|w| power_integral(w[0], w[1], one)).collect();
        let rule = GaussRule::<T>::new(4);
        let k = kappa.measure();
        let loss: Vec<T> = (0..n)
            .map(|i| rule.points(grid[i], grid[i + 1]).map(|(y, w)| w * y * params.rate(y)).sum::<T>() / x1[i])
            .collect();
        let mut gain = vec![T::zero(); n * n];
        if opts.gain {
            let columns: Vec<Vec<T>> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let mut col = vec![T::zero(); n];
                    for (y, w) in rule.points(grid[j], grid[j + 1]) {
                        let c = w * params.rate(y);
                        for (a, b, v) in k.cells() {
                            accumulate_box(&grid, &mut col, a * y, b * y, c * v / y, one);
                        }
                        for &(z, m) in k.atoms() {
                            accumulate_point(&grid, &mut col, z * y, c * m, one);
                        }
                    }
                    col
                })
                .collect();
            for (j, col) in columns.iter().enumerate() {
                for i in 0..n {
                    gain[i * n + j] = col[i] / x1[i];
                }
            }
        }
        Ok(Self {
            grid,
            x1,
            loss,
            gain,
            n,
            alpha: params.alpha,
            gamma: params.gamma,
            dt,
            fixed_dt: opts.dt.is_some(),
            step_fraction: lit::<T>(0.99) * limit / params.alpha,
            time: T::zero(),
            state,
        })
    }

    fn rhs(&self, y: &[T], out: &mut [T]) {
        let n = self.n;
        let m = y.len();
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let row = &self.gain[i * n + i..i * n + m];
            let g: T = row.iter().zip(&y[i..]).fold(T::zero(), |s, (&a, &b)| s + a * b);
            *o = g - self.loss[i] * y[i];
        });
    }

    /// Cells above the last one holding a non-negligible share of the mass
    /// are zeroed: fragments only move to smaller sizes, and those cells have
    /// decayed like `e^{−α t x^γ}`.
    fn active_len(&mut self) -> usize {
        let mass: Vec<T> = self.state.iter().zip(&self.x1).map(|(&u, &w)| (u * w).abs()).collect();
        let total: T = mass.iter().copied().sum();
        let floor = total * lit(ACTIVE_FLOOR);
        let len = mass.iter().rposition(|&m| m > floor).map_or(1, |i| i + 1);
        self.state[len..].iter_mut().for_each(|u| *u = T::zero());
        len
    }

    fn advance(&mut self, target: T) {
        let two = lit::<T>(2.0);
        while self.time < target {
            let m = if self.fixed_dt { self.n } else { self.active_len() };
            let dt = if self.fixed_dt { self.dt } else { self.step_fraction / self.rate(self.grid[m]) };
            let remaining = target - self.time;
            let steps = (remaining / dt).ceil().to_usize().unwrap_or(1).max(1);
            let h = remaining / T::from_usize_lossy(steps);
            let y = self.state[..m].to_vec();
            let (mut k1, mut k2, mut k3, mut k4) =
                (vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m]);
            let mut tmp = vec![T::zero(); m];
            self.rhs(&y, &mut k1);
            tmp.iter_mut().enumerate().for_each(|(i, t)| *t = y[i] + h / two * k1[i]);
            self.rhs(&tmp, &mut k2);
            tmp.iter_mut().enumerate().for_each(|(i, t)| *t = y[i] + h / two * k2[i]);
            self.rhs(&tmp, &mut k3);
            tmp.iter_mut().enumerate().for_each(|(i, t)| *t = y[i] + h * k3[i]);
            self.rhs(&tmp, &mut k4);
            let sixth = h / lit(6.0);
            for i in 0..m {
                self.state[i] = y[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]);
            }
            self.time = if steps == 1 { target } else { self.time + h };
        }
    }

    fn rate(&self, x: T) -> T {
        self.alpha * x.powf(self.gamma)
    }

    fn measure(&self) -> Measure<T> {
        Measure::from_density(self.grid.clone(), self.state.clone()).expect("grid validated")
    }
}

/// Integrates from `u0` (a density) and records the state at `times`.
pub fn solve_grid_ode<T: Real>(
    u0: &Measure<T>,
    params: &FragmentationParams<T>,
    kappa: &FragmentationKernel<T>,
    times: &[T],
    opts: &GridOdeOptions<T>,
) -> Result<Trajectory<T, Measure<T>>> {
    if times.iter().any(|t| !(*t >= T::zero())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("record times must be nonnegative and sorted"));
    }
    let mut ode = GridOde::new(u0, params, kappa, opts)?;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        ode.advance(t);
        states.push(ode.measure());
    }
    Ok(Trajectory { times: times.to_vec(), states })
}

#[derive(Debug, Clone)]
pub struct ProfileOptions<T: Real> {
    /// Defaults to a uniform density on `(0, 1]`.
    pub initial: Option<Measure<T>>,
    pub t_start: T,
    pub ratio: T,
    pub horizon: T,
    /// Stop once successive rescaled profiles differ by less than this in `∫ x |·| dx`.
    pub tol: T,
    pub ode: GridOdeOptions<T>,
}

impl<T: Real> Default for ProfileOptions<T> {
    fn default() -> Self {
        Self {
            initial: None,
            t_start: T::one(),
            ratio: lit(2.0),
            horizon: lit(1e4),
            tol: lit(1e-3),
            ode: GridOdeOptions { cells: 256, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelfSimilarProfile<T: Real> {
    /// `g` with `∫ g = 1`.
    pub profile: Measure<T>,
    pub time: T,
    /// `(t, weighted L¹ change against the previous checkpoint)`.
    pub checkpoints: Vec<(T, T)>,
    /// `1 − αγ ∫ z^γ g`, which vanishes for the exact profile.
    pub identity_residual: T,
}

/// Runs the grid solver and rescales `y ↦ t^{1/γ} y` at geometric checkpoints
/// until the normalised profile settles.
pub fn self_similar_profile<T: Real>(
    params: &FragmentationParams<T>,
    kappa: &FragmentationKernel<T>,
    opts: &ProfileOptions<T>,
) -> Result<SelfSimilarProfile<T>> {
    if !(params.gamma > T::zero()) {
        return Err(Error::invalid("a self-similar profile needs γ > 0"));
    }
    if !(opts.ratio > T::one() && opts.t_start > T::zero()) {
        return Err(Error::invalid("checkpoints need t_start > 0 and ratio > 1"));
    }
    let initial = match &opts.initial {
        Some(m) => m.clone(),
        None => Measure::from_density(vec![T::zero(), T::one()], vec![T::one()])?,
    };
    let mut ode = GridOde::new(&initial, params, kappa, &opts.ode)?;
    // On the default log grid, snap the ratio to a whole number of cells so
    // that successive rescaled grids coincide and comparisons carry no
    // interpolation error.
    let ratio = if opts.ode.grid.is_none() {
        let cell = (T::one() / opts.ode.lower_ratio).ln() / T::from_usize_lossy(opts.ode.cells);
        let k = (opts.ratio.ln() / (params.gamma * cell)).round().max(T::one());
        (k * params.gamma * cell).exp()
    } else {
        opts.ratio
    };
    let inv_gamma = T::one() / params.gamma;
    let rescale = |m: Measure<T>, t: T| m.dilated(t.powf(inv_gamma)).normalized();
    let mut t = opts.t_start;
    ode.advance(t);
    let mut prev = rescale(ode.measure(), t)?;
    let mut checkpoints = Vec::new();
    loop {
        let next_t = t * ratio;
        if next_t > opts.horizon {
            return Err(Error::NonConvergence(format!(
                "profile still changing by {:.3e} at t = {}",
                checkpoints.last().map_or(f64::NAN, |c: &(T, T)| c.1.as_f64()),
                t.as_f64()
            )));
        }
        ode.advance(next_t);
        let cur = rescale(ode.measure(), next_t)?;
        let change = weighted_tv_norm(&cur.sub(&prev), T::one());
        checkpoints.push((next_t, change));
        t = next_t;
        prev = cur;
        if change < opts.tol {
            break;
        }
    }
    let m_gamma = prev.moment(params.gamma)?;
    Ok(SelfSimilarProfile {
        identity_residual: T::one() - params.alpha * params.gamma * m_gamma,
        profile: prev,
        time: t,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frag_forward::{solve_series, SeriesOptions};
    use crate::measures::tv_norm;

    fn bump() -> Measure<f64> {
        let g = grid::uniform_grid(0.5, 1.0, 100);
        Measure::from_fn(g, |x| (-(x - 0.8f64).powi(2) / 0.005).exp()).unwrap()
    }

    #[test]
    fn conserves_mass_and_matches_series() {
        let p = FragmentationParams::new(1.0, 1.0).unwrap();
        let k = FragmentationKernel::uniform();
        let u0 = bump();
        let traj =
            solve_grid_ode(&u0, &p, &k, &[0.0, 0.5], &GridOdeOptions { cells: 256, ..Default::default() }).unwrap();
        let m0 = traj.states[0].moment(1.0).unwrap();
        let m1 = traj.states[1].moment(1.0).unwrap();
        assert!((m1 / m0 - 1.0).abs() < 1e-12);
        let start = &traj.states[0];
        let opts = SeriesOptions { output_grid: Some(start.grid().to_vec()), ..Default::default() };
        let series = solve_series(start, &p, &k, 0.5, &opts).unwrap();
        let diff = tv_norm(&series.measure.sub(&traj.states[1])) / tv_norm(&traj.states[1]);
        assert!(diff < 1e-2, "relative TV gap {diff}");
    }

    #[test]
    fn pure_loss_is_exponential() {
        let p = FragmentationParams::new(2.0, 0.0).unwrap();
        let k = FragmentationKernel::uniform();
        let u0 = bump();
        let opts = GridOdeOptions { cells: 64, gain: false, ..Default::default() };
        let traj = solve_grid_ode(&u0, &p, &k, &[0.0, 0.3], &opts).unwrap();
        let ratio = traj.states[1].total_mass() / traj.states[0].total_mass();
        assert!((ratio - (-0.6f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn step_guard() {
        let p = FragmentationParams::new(1.0, 2.0).unwrap();
        let k = FragmentationKernel::uniform();
        let opts = GridOdeOptions { dt: Some(0.5), cells: 32, ..Default::default() };
        assert!(matches!(solve_grid_ode(&bump(), &p, &k, &[1.0], &opts), Err(Error::StepSize { .. })));
    }

    #[test]
    fn profile_satisfies_moment_identity() {
        let p = FragmentationParams::<f64>::new(1.0, 2.0).unwrap();
        let k = FragmentationKernel::uniform();
        let opts = ProfileOptions { ode: GridOdeOptions { cells: 192, ..Default::default() }, ..Default::default() };
        let prof = self_similar_profile::<f64>(&p, &k, &opts).unwrap();
        assert!((prof.profile.total_mass() - 1.0).abs() < 1e-12);
        assert!(prof.identity_residual.abs() < 2e-2, "{:?}", prof.identity_residual);
    }
}
