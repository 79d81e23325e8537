//! Forward fragmentation: `∂_t u = −α x^γ u + α ∫_x^∞ κ(x/y) y^{γ−1} u(y) dy`.
//!
//! The kernel follows the binary convention `∫κ = 2`, `∫zκ = 1`, `κ`
//! symmetric on `(0, 1)`. [`solve_series`] evaluates the explicit series
//! representation for measure data; [`solve_grid_ode`] is an independent
//! method-of-lines solver used as an oracle and for long-time runs.

mod grid_ode;
mod series;

pub use grid_ode::{self_similar_profile, solve_grid_ode, GridOdeOptions, ProfileOptions, SelfSimilarProfile};
pub use series::{build_series, fundamental_solution, solve_series, SeriesOptions, SeriesSolution, SeriesTable};

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::measures::{bl_norm, Measure};
use crate::scalar::{lit, Real};

/// Rate `α x^γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct FragmentationParams<T> {
    pub alpha: T,
    pub gamma: T,
}

impl<T: Real> FragmentationParams<T> {
    pub fn new(alpha: T, gamma: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha.is_finite()) || !(gamma >= T::zero() && gamma.is_finite()) {
            return Err(Error::invalid("need α > 0 and finite γ ≥ 0"));
        }
        Ok(Self { alpha, gamma })
    }

    pub fn rate(&self, x: T) -> T {
        if x == T::zero() {
            if self.gamma == T::zero() {
                self.alpha
            } else {
                T::zero()
            }
        } else {
            self.alpha * x.powf(self.gamma)
        }
    }
}

/// Binary fragmentation kernel on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentationKernel<T: Real> {
    measure: Measure<T>,
}

const KERNEL_TOL: f64 = 1e-9;

impl<T: Real> FragmentationKernel<T> {
    /// Checks `∫κ = 2`, `∫zκ = 1`, symmetry and support inside `(0, 1)`.
    pub fn new(measure: Measure<T>) -> Result<Self> {
        if measure.atoms().iter().any(|&(z, _)| z <= T::zero() || z >= T::one()) {
            return Err(Error::invalid("kernel atoms must lie strictly inside (0, 1)"));
        }
        if measure.has_density() && (measure.grid()[0] < T::zero() || *measure.grid().last().unwrap() > T::one()) {
            return Err(Error::invalid("kernel density must live on [0, 1]"));
        }
        let tol = lit::<T>(KERNEL_TOL);
        let mass = measure.total_mass();
        let first = measure.moment(T::one())?;
        if (mass - lit(2.0)).abs() > tol || (first - T::one()).abs() > tol {
            return Err(Error::invalid(format!(
                "kernel needs ∫κ = 2 and ∫zκ = 1, got {} and {}",
                mass.as_f64(),
                first.as_f64()
            )));
        }
        // BL rather than TV: reflected atoms may move by an ulp
        let asym = bl_norm(&measure.sub(&measure.reflected(T::one())?))?;
        if asym > tol {
            return Err(Error::invalid(format!("kernel is not symmetric (BL asymmetry {})", asym.as_f64())));
        }
        Ok(Self { measure })
    }

    /// `κ = 2` on `(0, 1)`.
    pub fn uniform() -> Self {
        Self { measure: Measure::from_density(vec![T::zero(), T::one()], vec![lit(2.0)]).expect("valid") }
    }

    /// `2 · Beta(a, a)` density averaged over `cells` equal cells. `a > 1`
    /// concentrates breakage near the middle, `a < 1` near the ends.
    pub fn beta(a: T, cells: usize) -> Result<Self> {
        if !(a > T::zero()) || cells == 0 {
            return Err(Error::invalid("beta kernel needs a > 0 and at least one cell"));
        }
        let m = cells;
        let mut grid: Vec<T> = (0..=m).map(|j| T::from_usize_lossy(j) / T::from_usize_lossy(m)).collect();
        for j in m.div_ceil(2)..=m {
            grid[j] = T::one() - grid[m - j];
        }
        let af = a.as_f64();
        let cdf: Vec<f64> = grid.iter().map(|g| beta_reg(af, af, g.as_f64().clamp(0.0, 1.0))).collect();
        let mut dens: Vec<T> =
            (0..m).map(|j| lit::<T>(2.0 * (cdf[j + 1] - cdf[j])) / (grid[j + 1] - grid[j])).collect();
        for j in 0..m / 2 {
            let avg = (dens[j] + dens[m - 1 - j]) / lit(2.0);
            dens[j] = avg;
            dens[m - 1 - j] = avg;
        }
        let measure = Measure::from_density(grid, dens)?;
        let measure = measure.scaled(lit::<T>(2.0) / measure.total_mass());
        Self::new(measure)
    }

    pub fn center_weighted(a: T, cells: usize) -> Result<Self> {
        if a <= T::one() {
            return Err(Error::invalid("center-weighted kernel needs a > 1"));
        }
        Self::beta(a, cells)
    }

    pub fn edge_weighted(a: T, cells: usize) -> Result<Self> {
        if a >= T::one() {
            return Err(Error::invalid("edge-weighted kernel needs a < 1"));
        }
        Self::beta(a, cells)
    }

    /// Named preset: `uniform`, `center-weighted`, `edge-weighted`.
    pub fn preset(name: &str, shape: T, cells: usize) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::uniform()),
            "center-weighted" => Self::center_weighted(shape, cells),
            "edge-weighted" => Self::edge_weighted(shape, cells),
            other => Err(Error::invalid(format!("unknown kernel preset `{other}`"))),
        }
    }

    pub fn measure(&self) -> &Measure<T> {
        &self.measure
    }

    pub fn into_measure(self) -> Measure<T> {
        self.measure
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::mellin_real;

    #[test]
    fn presets_satisfy_constraints() {
        for k in [
            FragmentationKernel::<f64>::uniform(),
            FragmentationKernel::center_weighted(3.0, 64).unwrap(),
            FragmentationKernel::edge_weighted(0.5, 64).unwrap(),
            FragmentationKernel::center_weighted(2.0, 33).unwrap(),
        ] {
            let m = k.measure();
            assert!((m.total_mass() - 2.0).abs() < 1e-12);
            assert!((mellin_real(m, 2.0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_kernels() {
        let lopsided = Measure::<f64>::from_density(vec![0.0, 0.5, 1.0], vec![3.0, 1.0]).unwrap();
        assert!(FragmentationKernel::new(lopsided).is_err());
        let atom_at_zero = Measure::from_atoms(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert!(FragmentationKernel::new(atom_at_zero).is_err());
        let halves = Measure::from_atoms(vec![(0.5, 2.0)]).unwrap();
        assert!(FragmentationKernel::new(halves).is_ok());
        assert!(FragmentationKernel::<f64>::preset("nope", 1.0, 4).is_err());
    }
}
