//! A-posteriori check of fitted parameters against the full data set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frag_forward::{solve_grid_ode, FragmentationKernel, FragmentationParams, GridOdeOptions};
use crate::measures::{bl_norm, kde_estimate_with, tv_norm, KdeOptions, SampleSet};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct ValidationOptions<T> {
    pub kde: KdeOptions<T>,
    pub ode: GridOdeOptions<T>,
}

impl<T: Real> Default for ValidationOptions<T> {
    fn default() -> Self {
        Self { kde: KdeOptions::default(), ode: GridOdeOptions { cells: 256, ..Default::default() } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub time: f64,
    pub samples: usize,
    pub bl: f64,
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub mean_bl: f64,
    pub mean_tv: f64,
    /// Mean BL distance over the rows after the first (the first row only
    /// measures the projection of the initial estimate).
    pub score: f64,
}

/// KDE of the first sample → forward grid solve with the fitted parameters →
/// BL and TV distances between the normalised simulation and the KDE of
/// every later sample.
pub fn validate_pipeline<T: Real>(
    samples: &SampleSet<T>,
    alpha_hat: T,
    gamma_hat: T,
    kappa: &FragmentationKernel<T>,
    opts: &ValidationOptions<T>,
) -> Result<ValidationReport> {
    let obs: Vec<(T, &[T])> = samples.iter().filter(|(_, s)| !s.is_empty()).collect();
    let Some(&(t1, first)) = obs.first() else {
        return Err(Error::invalid("validation needs at least one non-empty time point"));
    };
    let params = FragmentationParams::new(alpha_hat, gamma_hat)?;
    let f0 = kde_estimate_with(first, &opts.kde)?;
    let lags: Vec<T> = obs.iter().map(|(t, _)| *t - t1).collect();
    let traj = solve_grid_ode(&f0, &params, kappa, &lags, &opts.ode)?;
    let rows = obs
        .par_iter()
        .zip(traj.states.par_iter())
        .enumerate()
        .map(|(i, (&(t, sizes), state))| {
            let kde = if i == 0 { f0.clone() } else { kde_estimate_with(sizes, &opts.kde)? };
            let diff = state.normalized()?.sub(&kde);
            Ok(ValidationRow {
                time: t.as_f64(),
                samples: sizes.len(),
                bl: bl_norm(&diff)?.as_f64(),
                tv: tv_norm(&diff).as_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let mean_bl = rows.iter().map(|r| r.bl).sum::<f64>() / n;
    let mean_tv = rows.iter().map(|r| r.tv).sum::<f64>() / n;
    let score = if rows.len() > 1 { rows[1..].iter().map(|r| r.bl).sum::<f64>() / (n - 1.0) } else { rows[0].bl };
    Ok(ValidationReport { rows, mean_bl, mean_tv, score })
}
