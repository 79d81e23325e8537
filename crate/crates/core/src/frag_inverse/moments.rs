//! Rate parameters from the time course of empirical size moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{empirical_moment, SampleSet};
use crate::scalar::Real;

/// How empirical moments are normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentNormalization {
    /// `Σ x^p / n`: moment per particle.
    #[default]
    Mean,
    /// `Σ x^p`: raw sum.
    Sum,
}

impl MomentNormalization {
    pub fn moment<T: Real>(self, sizes: &[T], p: T) -> T {
        let s = empirical_moment(sizes, p);
        match self {
            Self::Mean => s / T::from_usize_lossy(sizes.len().max(1)),
            Self::Sum => s,
        }
    }
}

impl std::str::FromStr for MomentNormalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "sum" => Ok(Self::Sum),
            other => Err(Error::invalid(format!("unknown moment normalization `{other}` (mean | sum)"))),
        }
    }
}

/// Fit of `ln M̂₁(t) = C − (1/γ̂) · max(0, ln(t / t_asymp))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GammaFit<T> {
    pub gamma_hat: T,
    pub t_asymp: T,
    pub intercept: T,
    pub times: Vec<T>,
    pub log_moments: Vec<T>,
    pub residuals: Vec<T>,
    pub r_squared: T,
    pub normalization: MomentNormalization,
}

impl<T: Real> GammaFit<T> {
    /// Fitted `ln M̂₁` at `t`.
    pub fn predict(&self, t: T) -> T {
        let x = (t / self.t_asymp).ln().max(T::zero());
        self.intercept - x / self.gamma_hat
    }
}

/// Minimum number of positive observation times.
pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_gamma<T: Real>(samples: &SampleSet<T>) -> Result<GammaFit<T>> {
    fit_gamma_with(samples, MomentNormalization::Mean)
}

/// Breakpoint search over the observed times with a closed-form least-squares
/// fit of `(C, 1/γ̂)` for each candidate; `t = 0` is skipped (log scale).
pub fn fit_gamma_with<T: Real>(samples: &SampleSet<T>, norm: MomentNormalization) -> Result<GammaFit<T>> {
    let (times, ys): (Vec<T>, Vec<T>) = samples
        .iter()
        .filter(|(t, sizes)| *t > T::zero() && !sizes.is_empty())
        .map(|(t, sizes)| (t, norm.moment(sizes, T::one()).ln()))
        .unzip();
    if times.len() < MIN_FIT_POINTS {
        return Err(Error::GammaFit(format!(
            "need at least {MIN_FIT_POINTS} positive time points, got {}",
            times.len()
        )));
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::GammaFit("empirical first moment is not positive".into()));
    }
    let n = T::from_usize_lossy(times.len());
    let y_mean = ys.iter().copied().sum::<T>() / n;
    let sst: T = ys.iter().map(|&y| (y - y_mean) * (y - y_mean)).sum();

    let mut best: Option<(T, usize, T, T)> = None; // (sse, k, C, β)
    for (k, &ta) in times.iter().enumerate() {
        if times.iter().filter(|&&t| t > ta).count() < 1 {
            continue;
        }
        let xs: Vec<T> = times.iter().map(|&t| (t / ta).ln().max(T::zero())).collect();
        let x_mean = xs.iter().copied().sum::<T>() / n;
        let sxx: T = xs.iter().map(|&x| (x - x_mean) * (x - x_mean)).sum();
        if !(sxx > T::zero()) {
            continue;
        }
        let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - x_mean) * (y - y_mean)).sum();
        let slope = sxy / sxx;
        let c = y_mean - slope * x_mean;
        let sse: T = xs.iter().zip(&ys).map(|(&x, &y)| (y - c - slope * x).powi(2)).sum();
        if best.is_none_or(|b| sse < b.0) {
            best = Some((sse, k, c, -slope));
        }
    }
    let Some((sse, k, c, beta)) = best else {
        return Err(Error::GammaFit("no breakpoint leaves two points in the decaying segment".into()));
    };
    if !(beta > T::zero()) {
        return Err(Error::GammaFit(format!("mean size does not decrease (slope {})", (-beta).as_f64())));
    }
    let t_asymp = times[k];
    let residuals = times.iter().zip(&ys).map(|(&t, &y)| y - (c - beta * (t / t_asymp).ln().max(T::zero()))).collect();
    let r_squared = if sst > T::zero() { T::one() - sse / sst } else { T::one() };
    Ok(GammaFit {
        gamma_hat: T::one() / beta,
        t_asymp,
        intercept: c,
        times,
        log_moments: ys,
        residuals,
        r_squared,
        normalization: norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct AlphaEstimate<T> {
    pub alpha_hat: T,
    /// Standard deviation of the per-time estimates.
    pub dispersion: T,
    /// `(t_i, 1/(γ̂ t_i M̂_γ̂(t_i)))` for every `t_i ≥ t_asymp`.
    pub per_point: Vec<(T, T)>,
}

/// Averages `α ≈ 1/(γ̂ t M̂_γ̂(t))` over the self-similar time range, with
/// per-particle moments.
pub fn estimate_alpha<T: Real>(samples: &SampleSet<T>, fit: &GammaFit<T>) -> Result<AlphaEstimate<T>> {
    let g = fit.gamma_hat;
    let per_point: Vec<(T, T)> = samples
        .iter()
        .filter(|(t, sizes)| *t >= fit.t_asymp && *t > T::zero() && !sizes.is_empty())
        .map(|(t, sizes)| (t, T::one() / (g * t * MomentNormalization::Mean.moment(sizes, g))))
        .collect();
    if per_point.is_empty() {
        return Err(Error::invalid("no observation time at or after t_asymp"));
    }
    let m = T::from_usize_lossy(per_point.len());
    let alpha_hat = per_point.iter().map(|p| p.1).sum::<T>() / m;
    let var = per_point.iter().map(|p| (p.1 - alpha_hat).powi(2)).sum::<T>() / m;
    if !alpha_hat.is_finite() {
        return Err(Error::invalid("α estimate is not finite"));
    }
    Ok(AlphaEstimate { alpha_hat, dispersion: var.sqrt(), per_point })
}

/// Per-particle moment of order `p` at each time (plot data).
pub fn moment_curve<T: Real>(samples: &SampleSet<T>, p: T, norm: MomentNormalization) -> Vec<(T, T)> {
    samples.iter().filter(|(_, s)| !s.is_empty()).map(|(t, s)| (t, norm.moment(s, p))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_per_time(times: &[f64], m1: impl Fn(f64) -> f64) -> SampleSet<f64> {
        SampleSet::new(times.to_vec(), times.iter().map(|&t| vec![m1(t)]).collect()).unwrap()
    }

    #[test]
    fn recovers_breakpoint_and_exponent() {
        let times = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
        let s = one_per_time(&times, |t| if t >= 1.0 { 5.0 * t.powf(-0.5) } else { 5.0 });
        let fit = fit_gamma(&s).unwrap();
        assert!((fit.gamma_hat - 2.0).abs() < 1e-6);
        assert_eq!(fit.t_asymp, 1.0);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn pure_power_law_breaks_at_first_time() {
        let times = [0.5, 1.0, 2.0, 3.0, 5.0];
        let s = one_per_time(&times, |t| 2.0 * t.powf(-1.0 / 3.0));
        let fit = fit_gamma(&s).unwrap();
        assert_eq!(fit.t_asymp, 0.5);
        assert!((fit.gamma_hat - 3.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let s = one_per_time(&[0.0, 1.0], |t| 1.0 / (1.0 + t));
        assert!(matches!(fit_gamma(&s), Err(Error::GammaFit(_))));
    }

    #[test]
    fn alpha_is_invariant_under_time_doubling() {
        let times = [1.0, 2.0, 4.0, 8.0];
        let s = one_per_time(&times, |t| t.powf(-0.5));
        let fit = fit_gamma(&s).unwrap();
        let a = estimate_alpha(&s, &fit).unwrap();
        // M_γ(t) = 1/t for γ = 2, so every point gives α = 1/2
        assert!((a.alpha_hat - 0.5).abs() < 1e-9 && a.dispersion < 1e-9);
        let doubled = one_per_time(&times.map(|t| 2.0 * t), |t| (t / 2.0).powf(-0.5) / 2f64.sqrt());
        let fit2 = fit_gamma(&doubled).unwrap();
        let b = estimate_alpha(&doubled, &fit2).unwrap();
        assert!((a.alpha_hat - b.alpha_hat).abs() < 1e-9);
    }

    #[test]
    fn single_qualifying_point() {
        let fit = GammaFit {
            gamma_hat: 2.0,
            t_asymp: 4.0,
            intercept: 0.0,
            times: vec![],
            log_moments: vec![],
            residuals: vec![],
            r_squared: 1.0,
            normalization: MomentNormalization::Mean,
        };
        let s = one_per_time(&[1.0, 2.0, 4.0], |_| 0.5);
        let a = estimate_alpha(&s, &fit).unwrap();
        assert_eq!(a.per_point.len(), 1);
        assert_eq!(a.dispersion, 0.0);
        assert!((a.alpha_hat - 1.0 / (2.0 * 4.0 * 0.25)).abs() < 1e-12);
    }
}
