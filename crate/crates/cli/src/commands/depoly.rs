use std::path::Path;

use polyshrink::depoly::{
    discrete_norm, first_order_solve, moment_series, poisson_solution, second_order_solve, simulate_discrete_at,
    DiscreteState, GridFunction, InitialProfile, MomentSeries, SecondOrderParams, Trajectory,
};
use polyshrink::depoly_inverse::{
    kalman_reconstruct, moments_to_trace, tikhonov_reconstruct, trace_to_initial_first_order, ObservationOperator,
    TikhonovConfig,
};
use polyshrink::{io, Warning};
use serde::Serialize;

use crate::config::Config;
use crate::failure::Failure;
use crate::manifest::OutputDir;

fn profile(cfg: &Config) -> InitialProfile<f64> {
    let (center, width) = (cfg.float("depoly.profile.center"), cfg.float("depoly.profile.width"));
    match cfg.text("depoly.profile") {
        "gaussian" => InitialProfile::Gaussian { center, width },
        "indicator" => InitialProfile::Indicator { lo: center - width, hi: center + width },
        _ => InitialProfile::CosineBump { center, half_width: width },
    }
}

fn initial_state(cfg: &Config) -> Result<DiscreteState<f64>, Failure> {
    Ok(DiscreteState::from_profile(
        &profile(cfg),
        cfg.float("depoly.eps"),
        cfg.usize("depoly.i0"),
        cfg.float("depoly.b"),
        cfg.float("depoly.length"),
    )?)
}

fn pde_params(cfg: &Config, horizon: f64) -> SecondOrderParams<f64> {
    SecondOrderParams {
        b: cfg.float("depoly.b"),
        eps: cfg.float("depoly.eps"),
        length: cfg.float("depoly.length"),
        horizon,
        nx: cfg.usize("depoly.pde.nx"),
        nt: cfg.usize("depoly.pde.nt"),
    }
}

fn relative_error(u: &GridFunction<f64>, reference: &GridFunction<f64>) -> Result<f64, Failure> {
    Ok(discrete_norm(&u.sub(reference)?) / discrete_norm(reference))
}

/// Moment series of the configured scenario (plus `M0` when `k ≥ 1`) and the true initial profile.
pub fn gen_synthetic(cfg: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    let state0 = initial_state(cfg)?;
    let (horizon, n) = (cfg.float("depoly.horizon"), cfg.usize("depoly.samples"));
    if n < 2 {
        return Err(Failure::validation("config: `depoly.samples`: need at least two moment samples"));
    }
    let times: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
    let dt = cfg.float("depoly.step_fraction") * state0.eps / state0.b;
    let traj = simulate_discrete_at(&state0, &times, dt)?;
    let (k, delta, seed) = (cfg.int("depoly.moment") as u32, cfg.float("depoly.delta"), cfg.int("seed"));
    let series = moment_series(&traj, k)?.with_noise(delta, seed);
    out.write_with("moments.csv", |w| io::write_moment_series(&series, w))?;
    if k >= 1 {
        let m0 = moment_series(&traj, 0)?.with_noise(delta, seed.wrapping_add(1));
        out.write_with("m0.csv", |w| io::write_moment_series(&m0, w))?;
    }
    out.write_with("initial.csv", |w| io::write_grid_function(&state0.to_grid_function(), w))
}

/// Exact, first-order and second-order solutions at the record times, on the `ε` grid.
pub fn simulate(cfg: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    let state0 = initial_state(cfg)?;
    let u0 = state0.to_grid_function();
    let times = cfg.list("depoly.record_times").to_vec();
    let mut exact = Trajectory { times: times.clone(), states: Vec::new() };
    let mut first = exact.clone();
    let mut second = exact.clone();
    let mut errors = Vec::new();
    for &t in &times {
        let e = poisson_solution(&state0, t)?.to_grid_function();
        let f = first_order_solve(&u0, state0.b, t)?;
        let s = if t > 0.0 {
            let traj = second_order_solve(&u0, &pde_params(cfg, t))?;
            traj.last().expect("nonempty trajectory").resampled(state0.eps)
        } else {
            u0.clone()
        };
        errors.push(vec![t, discrete_norm(&f.sub(&e)?), discrete_norm(&s.sub(&e)?)]);
        exact.states.push(e);
        first.states.push(f);
        second.states.push(s);
    }
    out.write_with("exact.csv", |w| io::write_grid_trajectory(&exact, w))?;
    out.write_with("first_order.csv", |w| io::write_grid_trajectory(&first, w))?;
    out.write_with("second_order.csv", |w| io::write_grid_trajectory(&second, w))?;
    out.write_with("errors.csv", |w| io::write_table(&["t", "first_order", "second_order"], &errors, w))
}

#[derive(Serialize)]
struct InvertDiagnostics<'a> {
    route: &'a str,
    moment: u32,
    delta: f64,
    smoothing_lambdas: Vec<f64>,
    tikhonov_residual: Option<f64>,
    tikhonov_objective: Option<f64>,
    /// Relative `‖·‖_{2,ε}` distance to the configured initial profile.
    relative_error_to_config_profile: f64,
    warnings: Vec<Warning>,
}

fn read_series(out: &mut OutputDir, path: &Path, delta: f64) -> Result<MomentSeries<f64>, Failure> {
    let bytes = out.input(path)?;
    Ok(io::read_moment_series(bytes.as_slice(), delta)?)
}

pub fn invert(cfg: &Config, moments: &Path, m0: Option<&Path>, out: &mut OutputDir) -> Result<(), Failure> {
    let delta = cfg.float("depoly.delta");
    let series = read_series(out, moments, delta)?;
    let m0 = m0.map(|p| read_series(out, p, delta)).transpose()?;
    let (b, eps, length) = (cfg.float("depoly.b"), cfg.float("depoly.eps"), cfg.float("depoly.length"));
    let est = moments_to_trace(&series, m0.as_ref(), b, eps, cfg.usize("depoly.i0"))?;
    let mut warnings = est.warnings.clone();
    let route = cfg.text("depoly.route");
    let (estimate, residual, objective) = if route == "first-order" {
        (trace_to_initial_first_order(&est.trace, b, length, eps)?, None, None)
    } else {
        let horizon = *series.times.last().expect("validated series");
        let op = ObservationOperator::assemble(&pde_params(cfg, horizon))?;
        let y: Vec<f64> = op.times.iter().map(|&t| est.trace.at(t)).collect();
        let tk =
            TikhonovConfig { m_radius: cfg.float("depoly.tikhonov.radius"), delta: cfg.float("depoly.tikhonov.delta") };
        let rec =
            if route == "tikhonov" { tikhonov_reconstruct(&y, &op, &tk)? } else { kalman_reconstruct(&y, &op, &tk)? };
        warnings.extend(rec.warnings.iter().cloned());
        (rec.estimate, Some(rec.residual), Some(rec.objective))
    };
    let p = profile(cfg);
    let cells = estimate.len() - 1;
    let reference = GridFunction::sample(estimate.dx, cells, |x| p.eval(x));
    let trace_rows: Vec<Vec<f64>> = est.trace.times.iter().zip(&est.trace.values).map(|(&t, &v)| vec![t, v]).collect();
    out.write_with("estimate.csv", |w| io::write_grid_function(&estimate, w))?;
    out.write_with("trace.csv", |w| io::write_table(&["t", "boundary_value"], &trace_rows, w))?;
    out.write_json(
        "diagnostics.json",
        &InvertDiagnostics {
            route,
            moment: series.k,
            delta,
            smoothing_lambdas: est.lambdas.clone(),
            tikhonov_residual: residual,
            tikhonov_objective: objective,
            relative_error_to_config_profile: relative_error(&estimate, &reference)?,
            warnings,
        },
    )
}
