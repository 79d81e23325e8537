//! Kernel estimates built on Mellin lines.

use num_complex::Complex;

use super::{finish_estimate, KappaEstimate, KappaRoute, Regularization};
use crate::error::{Error, Result};
use crate::grid;
use crate::measures::{mellin, mellin_invert, Measure, MellinLine, MellinLineSpec, MellinWindow};
use crate::quadrature::GaussRule;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone)]
pub struct MellinRouteOptions<T> {
    pub line: MellinLineSpec<T>,
    pub window: MellinWindow<T>,
    /// Cells on `(0, 1)` receiving the inverted kernel.
    pub out_grid: Vec<T>,
    /// Smallest admissible `|M[u₀](s + γ)|` (or `|M[g](s + γ)|`).
    pub floor: T,
}

impl<T: Real> Default for MellinRouteOptions<T> {
    fn default() -> Self {
        Self {
            line: MellinLineSpec::default(),
            window: MellinWindow::default(),
            out_grid: grid::uniform_grid(T::zero(), T::one(), 100),
            floor: lit(1e-8),
        }
    }
}

impl<T: Real> MellinRouteOptions<T> {
    /// Shorter line for profile data: a smooth profile's transform decays
    /// fast, and the denominator `M[g](s + γ)` reaches the floor early.
    pub fn for_profile() -> Self {
        Self {
            line: MellinLineSpec { tau_max: lit(20.0), half_points: 512, ..Default::default() },
            ..Default::default()
        }
    }
}

fn cpow<T: Real>(x: T, s: Complex<T>) -> Complex<T> {
    (s * x.ln()).exp()
}

/// `M[(1 − e^{−αtx^γ}) u₀](s)`, atoms exactly and cells by 8-point Gauss.
fn mellin_of_loss<T: Real>(u0: &Measure<T>, at: T, gamma: T, s: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let f = |x: T| cpow(x, s - one) * (-(-at * x.powf(gamma)).exp_m1());
    let mut acc = Complex::new(T::zero(), T::zero());
    for &(x, w) in u0.atoms() {
        acc = acc + f(x) * w;
    }
    let rule = GaussRule::<T>::new(8);
    for (lo, hi, v) in u0.cells() {
        if v != T::zero() {
            for (x, w) in rule.points(lo, hi) {
                acc = acc + f(x) * (w * v);
            }
        }
    }
    acc
}

fn check_floor<T: Real>(what: &str, value: Complex<T>, floor: T) -> Result<()> {
    if !(value.norm() >= floor) {
        return Err(Error::SmallDenominator { what: what.into(), value: value.norm().as_f64(), floor: floor.as_f64() });
    }
    Ok(())
}

/// `(M[u_t](s) − M[e^{−αtx^γ}u₀](s)) / (αt M[u₀](s+γ))` at one point `s`.
///
/// The decayed term is written as `M[u₀] − M[(1 − e^{−αtx^γ})u₀]` so that the
/// quadrature error is not amplified by `1/(αt)`.
pub fn mellin_kappa_at<T: Real>(
    u0: &Measure<T>,
    ut: &Measure<T>,
    alpha: T,
    gamma: T,
    t: T,
    s: Complex<T>,
    floor: T,
) -> Result<Complex<T>> {
    super::check_lag(alpha, t)?;
    let at = alpha * t;
    let den = mellin(u0, s + Complex::new(gamma, T::zero()))?;
    check_floor("M[u0](s+γ)", den, floor)?;
    let num = mellin(ut, s)? - mellin(u0, s)? + mellin_of_loss(u0, at, gamma, s);
    Ok(num / (den * at))
}

/// Mellin-line estimate of `κ` from two observations, inverted onto `out_grid`.
pub fn mellin_kappa_est<T: Real>(
    u0: &Measure<T>,
    ut: &Measure<T>,
    alpha: T,
    gamma: T,
    t: T,
    opts: &MellinRouteOptions<T>,
) -> Result<(MellinLine<T>, KappaEstimate<T>)> {
    let line = MellinLine::try_from_fn(&opts.line, |s| mellin_kappa_at(u0, ut, alpha, gamma, t, s, opts.floor))?;
    let inv = mellin_invert(&line, &opts.out_grid, &opts.window)?;
    let reg = Regularization::MellinCutoff { sigma: opts.line.sigma.as_f64(), tau_max: opts.line.tau_max.as_f64() };
    let est = finish_estimate(inv.measure, KappaRoute::Mellin, reg, inv.warnings)?;
    Ok((line, est))
}

/// `M[κ](s) = 1 + (2 − s) M[g](s) / (αγ M[g](s + γ))` for a self-similar profile `g`.
pub fn kappa_mellin_from_profile<T: Real>(
    g: &Measure<T>,
    alpha: T,
    gamma: T,
    s: Complex<T>,
    floor: T,
) -> Result<Complex<T>> {
    if !(alpha > T::zero() && gamma > T::zero()) {
        return Err(Error::invalid("profile route needs α > 0 and γ > 0"));
    }
    let den = mellin(g, s + Complex::new(gamma, T::zero()))?;
    check_floor("M[g](s+γ)", den, floor)?;
    let two = Complex::new(lit::<T>(2.0), T::zero());
    Ok(Complex::new(T::one(), T::zero()) + (two - s) * mellin(g, s)? / (den * (alpha * gamma)))
}

pub fn kappa_from_profile<T: Real>(
    g: &Measure<T>,
    alpha: T,
    gamma: T,
    opts: &MellinRouteOptions<T>,
) -> Result<(MellinLine<T>, KappaEstimate<T>)> {
    let line = MellinLine::try_from_fn(&opts.line, |s| kappa_mellin_from_profile(g, alpha, gamma, s, opts.floor))?;
    let inv = mellin_invert(&line, &opts.out_grid, &opts.window)?;
    let reg = Regularization::MellinCutoff { sigma: opts.line.sigma.as_f64(), tau_max: opts.line.tau_max.as_f64() };
    let est = finish_estimate(inv.measure, KappaRoute::Profile, reg, inv.warnings)?;
    Ok((line, est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::frag_forward::{fundamental_solution, FragmentationKernel, FragmentationParams, SeriesOptions};

    fn re(x: f64) -> Complex<f64> {
        Complex::new(x, 0.0)
    }

    #[test]
    fn exact_data_converges_to_kernel_transform() {
        let p = FragmentationParams::new(1.0, 1.0).unwrap();
        let k = FragmentationKernel::uniform();
        let u0 = Measure::dirac(1.0);
        for s in [2.0, 3.0, 4.0] {
            let mut errs = Vec::new();
            for t in [0.01, 0.02] {
                let ut = fundamental_solution(&p, &k, t, &SeriesOptions::default()).unwrap().measure;
                let v = mellin_kappa_at(&u0, &ut, 1.0, 1.0, t, re(s), 1e-8).unwrap();
                errs.push((v.re - 2.0 / s).abs());
            }
            let slope = (errs[1] / errs[0]).log2();
            assert!((slope - 1.0).abs() < 0.1, "s = {s}: {errs:?}");
        }
    }

    #[test]
    fn profile_identity_at_two() {
        let g = Measure::<f64>::from_density(vec![0.0, 0.5, 2.0], vec![1.0, 0.3]).unwrap();
        let v = kappa_mellin_from_profile(&g, 1.3, 0.7, re(2.0), 1e-12).unwrap();
        assert!((v - re(1.0)).norm() < 1e-15);
        let scaled = g.scaled(3.0);
        let w = kappa_mellin_from_profile(&scaled, 1.3, 0.7, re(3.0), 1e-12).unwrap();
        let w0 = kappa_mellin_from_profile(&g, 1.3, 0.7, re(3.0), 1e-12).unwrap();
        assert!((w - w0).norm() < 1e-12);
    }

    #[test]
    fn small_denominator_is_reported() {
        let g = grid::uniform_grid(0.09, 0.11, 4);
        let u0 = Measure::<f64>::from_density(g, vec![1.0; 4]).unwrap();
        let err = mellin_kappa_at(&u0, &u0, 1.0, 10.0, 0.1, re(1.5), 1e-8).unwrap_err();
        assert!(matches!(err, Error::SmallDenominator { .. }));
    }
}
