//! Gaussian kernel density estimation on the half-line.

use statrs::function::erf::erf;

use super::Measure;
use crate::error::{Error, Result};
use crate::grid;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeOptions<T> {
    /// Kernel standard deviation; Silverman's rule when `None`.
    pub bandwidth: Option<T>,
    pub cells: usize,
}

impl<T> Default for KdeOptions<T> {
    fn default() -> Self {
        Self { bandwidth: None, cells: 400 }
    }
}

/// `0.9 · min(sd, IQR/1.34) · n^{−1/5}`.
///
/// Falls back to whichever spread measure is nonzero, and to
/// `1e-3 · max(|mean|, 1)` for a constant sample.
pub fn silverman_bandwidth<T: Real>(samples: &[T]) -> Result<T> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::invalid("bandwidth of an empty sample"));
    }
    let xs: Vec<f64> = samples.iter().map(|x| x.as_f64()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    let mut sorted = xs.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        let r = p * (n - 1) as f64;
        let (i, f) = (r.floor() as usize, r.fract());
        if i + 1 < n {
            sorted[i] * (1.0 - f) + sorted[i + 1] * f
        } else {
            sorted[i]
        }
    };
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => 1e-3 * mean.abs().max(1.0) / 0.9,
    };
    Ok(lit(0.9 * spread * (n as f64).powf(-0.2)))
}

/// Kernel density estimate with cell masses computed exactly from the normal
/// distribution function, restricted to `x ≥ 0` and renormalised to mass 1.
pub fn kde_estimate<T: Real>(samples: &[T], bandwidth: Option<T>) -> Result<Measure<T>> {
    kde_estimate_with(samples, &KdeOptions { bandwidth, ..KdeOptions::default() })
}

pub fn kde_estimate_with<T: Real>(samples: &[T], opts: &KdeOptions<T>) -> Result<Measure<T>> {
    if samples.is_empty() {
        return Err(Error::invalid("kernel density estimate of an empty sample"));
    }
    let h = match opts.bandwidth {
        Some(h) if h > T::zero() && h.is_finite() => h.as_f64(),
        Some(_) => return Err(Error::invalid("bandwidth must be positive")),
        None => silverman_bandwidth(samples)?.as_f64(),
    };
    let xs: Vec<f64> = samples.iter().map(|x| x.as_f64()).collect();
    let (mn, mx) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let lo = (mn - 4.0 * h).max(0.0);
    let hi = mx + 4.0 * h;
    let cells = opts.cells.max(1);
    let g: Vec<f64> = grid::uniform_grid(lo, hi, cells);
    let dx = (hi - lo) / cells as f64;
    let mut mass = vec![0.0f64; cells];
    let cdf = |z: f64| 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
    for &x in &xs {
        // only breakpoints within 9 bandwidths matter
        let first = (((x - 9.0 * h - lo) / dx).floor().max(0.0) as usize).min(cells);
        let last = (((x + 9.0 * h - lo) / dx).ceil().max(0.0) as usize).min(cells);
        let mut prev = cdf((g[first] - x) / h);
        for j in first..last {
            let c = cdf((g[j + 1] - x) / h);
            mass[j] += c - prev;
            prev = c;
        }
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonConvergence("kernel density estimate has no mass on x ≥ 0".into()));
    }
    let density = mass.iter().map(|m| lit::<T>(m / total / dx)).collect();
    Measure::from_density(g.into_iter().map(lit).collect(), density)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_mass_and_centred_bump() {
        let m = kde_estimate(&[1.0f64; 10], Some(0.1)).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert!((m.moment(1.0).unwrap() - 1.0).abs() < 1e-3);
        let m = kde_estimate(&[0.01f64, 0.02, 0.5], None).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(m.grid()[0], 0.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(kde_estimate::<f64>(&[], None).is_err());
    }

    #[test]
    fn silverman_reference() {
        // sd = 1.2910, IQR/1.34 = 1.1194 for 1..4
        let h: f64 = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let expect = 0.9 * (1.5f64 / 1.34) * 4f64.powf(-0.2);
        assert!((h - expect).abs() < 1e-12);
        assert!(silverman_bandwidth(&[2.0f64; 3]).unwrap() > 0.0);
    }
}
