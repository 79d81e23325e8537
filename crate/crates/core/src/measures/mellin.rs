//! Mellin transform of measures and its numerical inverse along a vertical line.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::Measure;
use crate::error::{Error, Result, Warning};
use crate::grid;
use crate::quadrature::GaussRule;
use crate::scalar::{lit, Real};

/// `M[μ](s) = ∫ x^{s−1} dμ(x)`.
///
/// Density cells use the closed-form antiderivative `(b^s − a^s)/s`, which
/// is exact for complex `s` as well.
pub fn mellin<T: Real>(mu: &Measure<T>, s: Complex<T>) -> Result<Complex<T>> {
    let one = Complex::new(T::one(), T::zero());
    let mut acc = Complex::new(T::zero(), T::zero());
    for &(x, w) in mu.atoms() {
        if x == T::zero() {
            if s.re > T::one() {
                continue;
            }
            return Err(Error::Divergent(format!("atom at 0 with Re(s) = {} ≤ 1", s.re)));
        }
        acc = acc + cpow(x, s - one) * w;
    }
    for (a, b, v) in mu.cells() {
        if v == T::zero() {
            continue;
        }
        acc = acc + cell_integral(a, b, s)? * v;
    }
    Ok(acc)
}

/// Real-argument Mellin transform.
pub fn mellin_real<T: Real>(mu: &Measure<T>, s: T) -> Result<T> {
    // x^{s-1} moment, exact
    if s > T::one() || mu.atoms().iter().all(|a| a.0 > T::zero()) {
        mu.moment(s - T::one())
    } else {
        Err(Error::Divergent(format!("atom at 0 with s = {s} ≤ 1")))
    }
}

fn cpow<T: Real>(x: T, s: Complex<T>) -> Complex<T> {
    (s * x.ln()).exp()
}

/// `∫_a^b x^{s−1} dx`.
fn cell_integral<T: Real>(a: T, b: T, s: Complex<T>) -> Result<Complex<T>> {
    if a == T::zero() {
        if s.re <= T::zero() {
            return Err(Error::Divergent(format!("density at 0 with Re(s) = {} ≤ 0", s.re)));
        }
        return Ok(cpow(b, s) / s);
    }
    let r = (b / a).ln();
    let z = s * r;
    // a^s (e^z − 1)/s = a^s · r · (e^z − 1)/z
    Ok(cpow(a, s) * r * expm1_over(z))
}

/// `(e^z − 1)/z`, accurate near `z = 0`.
fn expm1_over<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < lit(1e-3) {
        let one = Complex::new(T::one(), T::zero());
        // 1 + z/2 + z²/6 + z³/24
        one + z * (one / lit::<T>(2.0) + z * (one / lit::<T>(6.0) + z / lit::<T>(24.0)))
    } else {
        (z.exp() - Complex::new(T::one(), T::zero())) / z
    }
}

/// Sampling of a vertical line `s = σ + iτ`, `τ ∈ [−τ_max, τ_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MellinLineSpec<T> {
    pub sigma: T,
    pub tau_max: T,
    /// Number of positive τ nodes; the line has `2·half_points + 1` nodes.
    pub half_points: usize,
}

impl<T: Real> Default for MellinLineSpec<T> {
    fn default() -> Self {
        Self { sigma: lit(1.5), tau_max: lit(200.0), half_points: 2048 }
    }
}

impl<T: Real> MellinLineSpec<T> {
    pub fn tau_grid(&self) -> Vec<T> {
        let m = self.half_points as i64;
        let h = self.tau_max / T::from_usize_lossy(self.half_points);
        (-m..=m).map(|k| h * lit::<T>(k as f64)).collect()
    }
}

/// Values of a Mellin transform on a symmetric τ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MellinLine<T> {
    pub sigma: T,
    pub tau: Vec<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> MellinLine<T> {
    /// Checks that `tau` is uniform, odd-length and symmetric about 0.
    pub fn new(sigma: T, tau: Vec<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if tau.len() != values.len() || tau.len() < 3 || tau.len().is_multiple_of(2) {
            return Err(Error::invalid("a Mellin line needs an odd number (≥ 3) of nodes"));
        }
        let n = tau.len();
        let h = tau[1] - tau[0];
        let tol = h * lit(1e-6);
        for k in 0..n {
            if (tau[k] + tau[n - 1 - k]).abs() > tol || (k > 0 && ((tau[k] - tau[k - 1]) - h).abs() > tol) {
                return Err(Error::invalid("τ grid must be uniform and symmetric about 0"));
            }
        }
        Ok(Self { sigma, tau, values })
    }

    pub fn from_fn(spec: &MellinLineSpec<T>, f: impl Fn(Complex<T>) -> Complex<T> + Sync) -> Self {
        let tau = spec.tau_grid();
        let values = tau.par_iter().map(|&t| f(Complex::new(spec.sigma, t))).collect();
        Self { sigma: spec.sigma, tau, values }
    }

    pub fn try_from_fn(spec: &MellinLineSpec<T>, f: impl Fn(Complex<T>) -> Result<Complex<T>> + Sync) -> Result<Self> {
        let tau = spec.tau_grid();
        let values = tau.par_iter().map(|&t| f(Complex::new(spec.sigma, t))).collect::<Result<Vec<_>>>()?;
        Ok(Self { sigma: spec.sigma, tau, values })
    }

    pub fn of_measure(mu: &Measure<T>, spec: &MellinLineSpec<T>) -> Result<Self> {
        Self::try_from_fn(spec, |s| mellin(mu, s))
    }

    pub fn step(&self) -> T {
        self.tau[1] - self.tau[0]
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.tau != other.tau || self.sigma != other.sigma {
            return Err(Error::invalid("Mellin lines live on different grids"));
        }
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| x * a + y * b).collect();
        Ok(Self { sigma: self.sigma, tau: self.tau.clone(), values })
    }

    /// `max(|L(±τ_max)|) / max |L|`.
    pub fn tail_ratio(&self) -> T {
        let peak = self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        if peak == T::zero() {
            return T::zero();
        }
        let n = self.values.len();
        self.values[0].norm().max(self.values[n - 1].norm()) / peak
    }
}

/// Window and resolution settings for [`mellin_invert`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MellinWindow<T> {
    /// Tukey taper fraction in `[0, 1]` (0: rectangular, 1: Hann).
    pub taper: T,
    /// Tail-to-peak ratio above which a warning is raised.
    pub tail_threshold: T,
    /// FFT length as a multiple of the number of τ nodes (refines the log grid).
    pub oversample: usize,
}

impl<T: Real> Default for MellinWindow<T> {
    fn default() -> Self {
        Self { taper: lit(0.25), tail_threshold: lit(1e-2), oversample: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct MellinInversion<T: Real> {
    pub measure: Measure<T>,
    pub warnings: Vec<Warning>,
}

/// Inverse Mellin transform `f(x) = (1/2π) ∫ x^{−σ−iτ} L(τ) dτ` onto the
/// cells of `out_grid`.
///
/// In `y = ln x` the integral is a Fourier transform; it is evaluated by FFT
/// on a uniform `y` grid of spacing `2π/(N Δτ)`, then interpolated (cubic)
/// and averaged over each output cell. The line is conjugate-symmetrised
/// first, so the result is real.
pub fn mellin_invert<T: Real>(
    line: &MellinLine<T>,
    out_grid: &[T],
    window: &MellinWindow<T>,
) -> Result<MellinInversion<T>> {
    grid::validate_grid(out_grid)?;
    if out_grid.len() < 2 {
        return Err(Error::invalid("output grid needs at least one cell"));
    }
    let mut warnings = Vec::new();
    let ratio = line.tail_ratio();
    if ratio > window.tail_threshold {
        warnings.push(Warning::MellinTail { ratio: ratio.as_f64(), threshold: window.tail_threshold.as_f64() }.emit());
    }

    let n_tau = line.tau.len();
    let m = n_tau / 2;
    let dtau = line.step();
    let tau_max = line.tau[n_tau - 1];
    let two = lit::<T>(2.0);
    let pi = T::PI();

    let taper = window.taper.max(T::zero()).min(T::one());
    let flat = (T::one() - taper) * tau_max;
    let w = |t: T| -> T {
        let a = t.abs();
        if a <= flat || taper == T::zero() {
            T::one()
        } else {
            (T::one() + (pi * (a - flat) / (taper * tau_max)).cos()) / two
        }
    };

    // evaluation nodes (Gauss points inside each output cell)
    let rule = GaussRule::<T>::new(4);
    let nodes: Vec<Vec<(T, T)>> = out_grid.windows(2).map(|c| rule.points(c[0], c[1]).collect()).collect();
    let (mut ylo, mut yhi) = (T::infinity(), T::neg_infinity());
    for (x, _) in nodes.iter().flatten() {
        let y = x.ln();
        ylo = ylo.min(y);
        yhi = yhi.max(y);
    }

    let n_fft = (window.oversample.max(1) * n_tau).next_power_of_two();
    let period = two * pi / dtau;
    if yhi - ylo > period * lit(0.95) {
        return Err(Error::invalid(format!(
            "output grid spans {} in log-size but the τ step only resolves a period of {}",
            (yhi - ylo).as_f64(),
            period.as_f64()
        )));
    }
    let dy = period / T::from_usize_lossy(n_fft);
    let y0 = (ylo + yhi) / two - period / two;

    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    for k in 0..n_tau {
        let sym = (line.values[k] + line.values[n_tau - 1 - k].conj()) / two;
        let t = line.tau[k];
        buf[k] = sym * w(t) * Complex::new(T::zero(), -t * y0).exp();
    }
    FftPlanner::<T>::new().plan_fft_forward(n_fft).process(&mut buf);

    // g_j ≈ f(e^{y_j}) on y_j = y0 + j dy
    let scale = dtau / (two * pi);
    let mf = T::from_usize_lossy(m);
    let g: Vec<T> = (0..n_fft)
        .map(|j| {
            let jf = T::from_usize_lossy(j);
            let y = y0 + jf * dy;
            let phase = Complex::new(T::zero(), two * pi * mf * jf / T::from_usize_lossy(n_fft)).exp();
            (buf[j] * phase).re * scale * (-line.sigma * y).exp()
        })
        .collect();

    let interp = |y: T| -> T {
        let u = (y - y0) / dy;
        let i = u.floor().to_isize().unwrap_or(0);
        let fr = u - T::from_isize(i).unwrap_or(T::zero());
        let at = |k: isize| g[k.clamp(0, n_fft as isize - 1) as usize];
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        // Catmull–Rom
        let half = lit::<T>(0.5);
        p1 + half
            * fr
            * (p2 - p0
                + fr * (two * p0 - lit::<T>(5.0) * p1 + lit::<T>(4.0) * p2 - p3
                    + fr * (lit::<T>(3.0) * (p1 - p2) + p3 - p0)))
    };

    let density: Vec<T> = out_grid
        .windows(2)
        .zip(&nodes)
        .map(|(c, pts)| pts.iter().map(|&(x, wq)| wq * interp(x.ln())).sum::<T>() / (c[1] - c[0]))
        .collect();
    let measure = Measure::from_density(out_grid.to_vec(), density)?;
    Ok(MellinInversion { measure, warnings })
}
