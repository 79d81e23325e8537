use std::path::Path;

use polyshrink::depoly::Trajectory;
use polyshrink::frag_forward::{
    solve_grid_ode, solve_series, FragmentationKernel, FragmentationParams, GridOdeOptions, SeriesOptions,
};
use polyshrink::frag_inverse::{
    estimate_alpha, fit_gamma_with, kappa_est_short_time, kappa_from_profile, mellin_kappa_est, validate_pipeline,
    KappaEstimate, KappaRoute, MellinRouteOptions, MomentNormalization, Regularization, ValidationOptions,
    ValidationReport,
};
use polyshrink::grid::log_grid;
use polyshrink::measures::{kde_estimate_with, mellin_real, KdeOptions, Measure, MellinLineSpec, SampleSet};
use polyshrink::{io, Warning};
use serde::Serialize;

use crate::config::Config;
use crate::failure::Failure;
use crate::manifest::OutputDir;

fn params(cfg: &Config) -> Result<FragmentationParams<f64>, Failure> {
    Ok(FragmentationParams::new(cfg.float("frag.alpha"), cfg.float("frag.gamma"))?)
}

fn kernel(cfg: &Config) -> Result<FragmentationKernel<f64>, Failure> {
    Ok(FragmentationKernel::preset(
        cfg.text("frag.kernel"),
        cfg.float("frag.kernel.shape"),
        cfg.usize("frag.kernel.cells"),
    )?)
}

/// Gaussian bump on a log grid of `(0, 1]`.
fn initial(cfg: &Config) -> Result<Measure<f64>, Failure> {
    let (c, w) = (cfg.float("frag.initial.center"), cfg.float("frag.initial.width"));
    let grid = log_grid(cfg.float("frag.grid.lower"), 1.0, cfg.usize("frag.grid.cells"), true);
    Ok(Measure::from_fn(grid, |x| (-(x - c).powi(2) / (2.0 * w * w)).exp())?)
}

fn forward(cfg: &Config) -> Result<Trajectory<f64, Measure<f64>>, Failure> {
    let (p, k, u0) = (params(cfg)?, kernel(cfg)?, initial(cfg)?);
    let times = cfg.list("frag.times").to_vec();
    if cfg.text("frag.solver") == "grid-ode" {
        let opts = GridOdeOptions { grid: Some(u0.grid().to_vec()), ..Default::default() };
        return Ok(solve_grid_ode(&u0, &p, &k, &times, &opts)?);
    }
    let opts = SeriesOptions { output_grid: Some(u0.grid().to_vec()), ..Default::default() };
    let states =
        times.iter().map(|&t| Ok(solve_series(&u0, &p, &k, t, &opts)?.measure)).collect::<Result<Vec<_>, Failure>>()?;
    Ok(Trajectory { times, states })
}

pub fn gen_synthetic(cfg: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    let traj = forward(cfg)?;
    let samples = SampleSet::draw(traj.times.clone(), &traj.states, cfg.usize("frag.samples"), cfg.int("seed"))?;
    out.write_with("samples.csv", |w| samples.write_csv(w))?;
    let kappa = kernel(cfg)?;
    out.write_with("kernel.csv", |w| io::write_measure(kappa.measure(), w))?;
    out.write_with("initial.csv", |w| io::write_measure(&traj.states[0], w))
}

pub fn simulate(cfg: &Config, out: &mut OutputDir) -> Result<(), Failure> {
    let traj = forward(cfg)?;
    let gamma = cfg.float("frag.gamma");
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, m)| Ok(vec![t, m.moment(0.0)?, m.moment(1.0)?, m.moment(gamma)?]))
        .collect::<Result<Vec<_>, Failure>>()?;
    out.write_with("trajectory.csv", |w| io::write_measure_trajectory(&traj, w))?;
    out.write_with("moments.csv", |w| io::write_table(&["t", "M0", "M1", "M_gamma"], &rows, w))
}

fn load_samples(out: &mut OutputDir, path: &Path) -> Result<SampleSet<f64>, Failure> {
    let bytes = out.input(path)?;
    Ok(SampleSet::read_csv(bytes.as_slice())?)
}

fn kde_options(cfg: &Config) -> KdeOptions<f64> {
    KdeOptions { bandwidth: cfg.auto_float("frag.kde.bandwidth"), cells: cfg.usize("frag.kde.cells") }
}

fn validation_options(cfg: &Config) -> ValidationOptions<f64> {
    let mut opts = ValidationOptions { kde: kde_options(cfg), ..Default::default() };
    opts.ode.cells = cfg.usize("frag.validate.cells");
    opts
}

fn mellin_options(cfg: &Config) -> MellinRouteOptions<f64> {
    MellinRouteOptions {
        line: MellinLineSpec {
            sigma: cfg.float("frag.mellin.sigma"),
            tau_max: cfg.float("frag.mellin.tau_max"),
            half_points: cfg.usize("frag.mellin.half_points"),
        },
        floor: cfg.float("frag.mellin.floor"),
        ..Default::default()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Selected kernel estimator on sample data.
///
/// The short-time and Mellin routes compare the first observation with the
/// one at `frag.lag_index`: sizes are divided by the mean size `x̄` of the
/// first observation, both KDEs are scaled to unit first moment (mass is
/// conserved), and the rate becomes `α̂ x̄^γ̂` in those units. The profile
/// route reads the last observation as `g(z) ∝ u(t, z t^{−1/γ̂})`.
fn estimate_kernel(
    cfg: &Config,
    samples: &SampleSet<f64>,
    route: KappaRoute,
    alpha: f64,
    gamma: f64,
) -> Result<KappaEstimate<f64>, Failure> {
    let kde = kde_options(cfg);
    let times = samples.time_points();
    if route == KappaRoute::Profile {
        let (t_last, sizes) = samples.iter().last().expect("nonempty sample set");
        let lag = t_last - times[0];
        if !(lag > 0.0) {
            return Err(Failure::validation("profile route needs a last observation after the first"));
        }
        let scale = lag.powf(1.0 / gamma);
        let scaled: Vec<f64> = sizes.iter().map(|x| x * scale).collect();
        let g = kde_estimate_with(&scaled, &kde)?;
        let mut opts = mellin_options(cfg);
        opts.line.tau_max = opts.line.tau_max.min(MellinRouteOptions::<f64>::for_profile().line.tau_max);
        return Ok(kappa_from_profile(&g, alpha, gamma, &opts)?.1);
    }
    let j = cfg.usize("frag.lag_index");
    if j == 0 || j >= samples.len() {
        return Err(Failure::validation(format!(
            "config: `frag.lag_index`: {j} is not a later observation (have {} time points)",
            samples.len()
        )));
    }
    let sizes = samples.sizes();
    let xbar = mean(&sizes[0]);
    let unit = |xs: &[f64]| -> Result<Measure<f64>, Failure> {
        let scaled: Vec<f64> = xs.iter().map(|x| x / xbar).collect();
        let m = kde_estimate_with(&scaled, &kde)?;
        let m1 = m.moment(1.0)?;
        Ok(m.scaled(1.0 / m1))
    };
    let (u0, ut) = (unit(&sizes[0])?, unit(&sizes[j])?);
    let (alpha_eff, lag) = (alpha * xbar.powf(gamma), times[j] - times[0]);
    Ok(match route {
        KappaRoute::ShortTime => kappa_est_short_time(&u0, &ut, alpha_eff, lag)?,
        _ => mellin_kappa_est(&u0, &ut, alpha_eff, gamma, lag, &mellin_options(cfg))?.1,
    })
}

#[derive(Serialize)]
struct GammaReport {
    gamma_hat: f64,
    t_asymp: f64,
    intercept: f64,
    r_squared: f64,
    normalization: MomentNormalization,
}

#[derive(Serialize)]
struct AlphaReport {
    alpha_hat: f64,
    dispersion: f64,
}

#[derive(Serialize)]
struct KernelReport {
    route: KappaRoute,
    regularization: Regularization,
    raw_mass: f64,
    /// `(s, M[κ̂](s))` of the projected estimate.
    mellin_moments: Vec<(f64, f64)>,
    warnings: Vec<Warning>,
}

#[derive(Serialize)]
struct EstimationReport {
    gamma: GammaReport,
    alpha: AlphaReport,
    kernel: KernelReport,
    validation: ValidationReport,
}

fn validation_rows(report: &ValidationReport) -> Vec<Vec<f64>> {
    report.rows.iter().map(|r| vec![r.time, r.samples as f64, r.bl, r.tv]).collect()
}

/// γ fit → α → kernel → validation replay.
pub fn estimate(cfg: &Config, samples_path: &Path, out: &mut OutputDir) -> Result<(), Failure> {
    let samples = load_samples(out, samples_path)?;
    let norm: MomentNormalization = cfg.text("frag.moments").parse()?;
    let fit = fit_gamma_with(&samples, norm)?;
    let alpha = estimate_alpha(&samples, &fit)?;
    let route: KappaRoute = cfg.text("frag.kappa_route").parse()?;
    let est = estimate_kernel(cfg, &samples, route, alpha.alpha_hat, fit.gamma_hat)?;
    let validation =
        validate_pipeline(&samples, alpha.alpha_hat, fit.gamma_hat, &est.kernel, &validation_options(cfg))?;

    let kmeasure = est.kernel.measure();
    let mellin_moments =
        [2.0, 3.0, 4.0].iter().map(|&s| Ok((s, mellin_real(kmeasure, s)?))).collect::<Result<Vec<_>, Failure>>()?;
    let fit_rows: Vec<Vec<f64>> = fit
        .times
        .iter()
        .zip(&fit.log_moments)
        .zip(&fit.residuals)
        .map(|((&t, &y), &r)| vec![t, y, fit.predict(t), r])
        .collect();
    let alpha_rows: Vec<Vec<f64>> = alpha.per_point.iter().map(|&(t, a)| vec![t, a]).collect();
    out.write_with("gamma_fit.csv", |w| io::write_table(&["t", "log_moment", "fitted", "residual"], &fit_rows, w))?;
    out.write_with("alpha.csv", |w| io::write_table(&["t", "alpha"], &alpha_rows, w))?;
    out.write_with("kernel_raw.csv", |w| io::write_measure(&est.raw, w))?;
    out.write_with("kernel.csv", |w| io::write_measure(kmeasure, w))?;
    out.write_with("validation.csv", |w| {
        io::write_table(&["t", "samples", "bl", "tv"], &validation_rows(&validation), w)
    })?;
    out.write_json(
        "report.json",
        &EstimationReport {
            gamma: GammaReport {
                gamma_hat: fit.gamma_hat,
                t_asymp: fit.t_asymp,
                intercept: fit.intercept,
                r_squared: fit.r_squared,
                normalization: fit.normalization,
            },
            alpha: AlphaReport { alpha_hat: alpha.alpha_hat, dispersion: alpha.dispersion },
            kernel: KernelReport {
                route: est.route,
                regularization: est.regularization,
                raw_mass: est.raw.total_mass(),
                mellin_moments,
                warnings: est.warnings.clone(),
            },
            validation,
        },
    )
}

/// Replays the configured model from the first observation.
pub fn validate(cfg: &Config, samples_path: &Path, out: &mut OutputDir) -> Result<(), Failure> {
    let samples = load_samples(out, samples_path)?;
    let p = params(cfg)?;
    let report = validate_pipeline(&samples, p.alpha, p.gamma, &kernel(cfg)?, &validation_options(cfg))?;
    out.write_with("validation.csv", |w| io::write_table(&["t", "samples", "bl", "tv"], &validation_rows(&report), w))?;
    out.write_json("validation.json", &report)
}
