//! Signed measures on the half-line and the operations both problem
//! families share.
//!
//! A [`Measure`] is a finite list of atoms plus a piecewise-constant density
//! on a breakpoint grid. Every object handled by the fragmentation and
//! depolymerisation pipelines has this form.

mod convolution;
mod kde;
mod mellin;
mod norms;
mod sampling;

pub use convolution::{mult_convolve, mult_convolve_onto, ConvolutionGrid};
pub use kde::{kde_estimate, kde_estimate_with, silverman_bandwidth, KdeOptions};
pub use mellin::{mellin, mellin_invert, mellin_real, MellinInversion, MellinLine, MellinLineSpec, MellinWindow};
pub use norms::{bl_norm, chain_lp_max, tv_norm, weighted_tv_norm};
pub use sampling::{empirical_moment, sample, SampleSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, power_integral, CellWeight};
use crate::quadrature::GaussRule;
use crate::scalar::{lit, Real};

/// Atoms + piecewise-constant density.
///
/// Invariants (checked by every constructor): atom locations are finite,
/// nonnegative and strictly increasing with nonzero weights; the grid is
/// strictly increasing, nonnegative, and has exactly one more entry than the
/// density (or both are empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr<T>", into = "MeasureRepr<T>", bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Measure<T: Real> {
    atoms: Vec<(T, T)>,
    grid: Vec<T>,
    density: Vec<T>,
}

/// Wire form: `{"atoms": [[x, w], ...], "grid": [...], "density": [...]}`.
#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
struct MeasureRepr<T: Real> {
    #[serde(default)]
    atoms: Vec<(T, T)>,
    #[serde(default)]
    grid: Vec<T>,
    #[serde(default)]
    density: Vec<T>,
}

impl<T: Real> TryFrom<MeasureRepr<T>> for Measure<T> {
    type Error = Error;
    fn try_from(r: MeasureRepr<T>) -> Result<Self> {
        Measure::new(r.atoms, r.grid, r.density)
    }
}

impl<T: Real> From<Measure<T>> for MeasureRepr<T> {
    fn from(m: Measure<T>) -> Self {
        MeasureRepr { atoms: m.atoms, grid: m.grid, density: m.density }
    }
}

impl<T: Real> Default for Measure<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Real> Measure<T> {
    pub fn zero() -> Self {
        Self { atoms: Vec::new(), grid: Vec::new(), density: Vec::new() }
    }

    /// Validating constructor; atoms must already be strictly sorted.
    /// Zero-weight atoms are dropped.
    pub fn new(atoms: Vec<(T, T)>, grid: Vec<T>, density: Vec<T>) -> Result<Self> {
        for &(x, w) in &atoms {
            if !x.is_finite() || !w.is_finite() || x < T::zero() {
                return Err(Error::invalid("atom locations must be finite and nonnegative"));
            }
        }
        if atoms.windows(2).any(|p| p[1].0 <= p[0].0) {
            return Err(Error::invalid("atom locations must be strictly increasing"));
        }
        if grid.is_empty() != density.is_empty() || (!grid.is_empty() && grid.len() != density.len() + 1) {
            return Err(Error::invalid(format!(
                "grid has {} breakpoints but density has {} cells",
                grid.len(),
                density.len()
            )));
        }
        grid::validate_grid(&grid)?;
        if grid.first().is_some_and(|&g| g < T::zero()) {
            return Err(Error::invalid("density support must lie in [0, inf)"));
        }
        if density.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("density values must be finite"));
        }
        let atoms = atoms.into_iter().filter(|&(_, w)| w != T::zero()).collect();
        Ok(Self { atoms, grid, density })
    }

    /// Builds the atomic measure `Σ w δ_x`, sorting and merging repeated locations.
    pub fn from_atoms(mut atoms: Vec<(T, T)>) -> Result<Self> {
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 = last.1 + w,
                _ => merged.push((x, w)),
            }
        }
        Self::new(merged, Vec::new(), Vec::new())
    }

    pub fn dirac(x: T) -> Self {
        Self::from_atoms(vec![(x, T::one())]).expect("finite nonnegative location")
    }

    pub fn from_density(grid: Vec<T>, density: Vec<T>) -> Result<Self> {
        Self::new(Vec::new(), grid, density)
    }

    /// Density obtained by averaging `f` over each cell (Gauss–Legendre).
    pub fn from_fn(grid: Vec<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let rule = GaussRule::new(6);
        let density = grid.windows(2).map(|w| rule.integrate(w[0], w[1], &f) / (w[1] - w[0])).collect();
        Self::from_density(grid, density)
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn density(&self) -> &[T] {
        &self.density
    }

    pub fn has_density(&self) -> bool {
        !self.density.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.density.iter().all(|&v| v == T::zero())
    }

    /// `(lo, hi, value)` for each density cell.
    pub fn cells(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.grid.windows(2).zip(self.density.iter()).map(|(w, &v)| (w[0], w[1], v))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.min_value() >= T::zero()
    }

    /// Smallest atom weight or density value (zero for the zero measure).
    pub fn min_value(&self) -> T {
        self.atoms.iter().map(|a| a.1).chain(self.density.iter().copied()).fold(T::zero(), |m, v| m.min(v))
    }

    /// Signed total mass.
    pub fn total_mass(&self) -> T {
        let a: T = self.atoms.iter().map(|a| a.1).sum();
        let d: T = self.cells().map(|(lo, hi, v)| v * (hi - lo)).sum();
        a + d
    }

    /// `∫ x^p dμ` computed exactly.
    pub fn moment(&self, p: T) -> Result<T> {
        let mut s = T::zero();
        for &(x, w) in &self.atoms {
            if x == T::zero() {
                if p < T::zero() {
                    return Err(Error::Divergent(format!("atom at 0 with moment order {p}")));
                }
                if p == T::zero() {
                    s = s + w;
                }
            } else {
                s = s + w * x.powf(p);
            }
        }
        for (lo, hi, v) in self.cells() {
            if v == T::zero() {
                continue;
            }
            if lo == T::zero() && p <= -T::one() {
                return Err(Error::Divergent(format!("density at 0 with moment order {p}")));
            }
            s = s + v * power_integral(lo, hi, p);
        }
        Ok(s)
    }

    /// `∫ f dμ`, exact on atoms and Gauss–Legendre on density cells.
    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        let rule = GaussRule::new(8);
        let a: T = self.atoms.iter().map(|&(x, w)| w * f(x)).sum();
        let d: T = self.cells().filter(|c| c.2 != T::zero()).map(|(lo, hi, v)| v * rule.integrate(lo, hi, &f)).sum();
        a + d
    }

    /// Smallest interval containing all atoms and nonzero density cells.
    pub fn support(&self) -> Option<(T, T)> {
        let mut lo: Option<T> = None;
        let mut hi: Option<T> = None;
        let mut upd = |a: T, b: T| {
            lo = Some(lo.map_or(a, |l| l.min(a)));
            hi = Some(hi.map_or(b, |h| h.max(b)));
        };
        for &(x, _) in &self.atoms {
            upd(x, x);
        }
        for (a, b, v) in self.cells() {
            if v != T::zero() {
                upd(a, b);
            }
        }
        lo.zip(hi)
    }

    pub fn density_at(&self, x: T) -> T {
        grid::locate(&self.grid, x).map_or(T::zero(), |i| self.density[i])
    }

    pub fn scaled(&self, c: T) -> Self {
        if c == T::zero() {
            return Self::zero();
        }
        Self {
            atoms: self.atoms.iter().map(|&(x, w)| (x, w * c)).collect(),
            grid: self.grid.clone(),
            density: self.density.iter().map(|&v| v * c).collect(),
        }
    }

    /// Density values of `self` on a grid that refines its own grid.
    fn density_on(&self, target: &[T]) -> Vec<T> {
        if self.grid.is_empty() {
            return vec![T::zero(); target.len().saturating_sub(1)];
        }
        if self.grid == target {
            return self.density.clone();
        }
        grid::project_density(&self.grid, &self.density, target, CellWeight::Mass)
    }

    /// `self + c * other`
    pub fn add_scaled(&self, other: &Self, c: T) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().map(|&(x, w)| (x, w * c)));
        let grid = grid::merge_grids(&self.grid, &other.grid);
        let mut density = self.density_on(&grid);
        for (d, o) in density.iter_mut().zip(other.density_on(&grid)) {
            *d = *d + c * o;
        }
        let mut m = Self::from_atoms(atoms).expect("atoms of valid measures");
        if grid.len() >= 2 {
            m.grid = grid;
            m.density = density;
        }
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -T::one())
    }

    /// Drops atoms with `|w| ≤ tol`.
    pub fn pruned(mut self, tol: T) -> Self {
        self.atoms.retain(|a| a.1.abs() > tol);
        self
    }

    /// Restriction to the open interval `(lo, hi)`.
    pub fn restrict_open(&self, lo: T, hi: T) -> Self {
        let atoms: Vec<(T, T)> = self.atoms.iter().copied().filter(|&(x, _)| x > lo && x < hi).collect();
        let mut grid_out = Vec::new();
        let mut dens = Vec::new();
        for (a, b, v) in self.cells() {
            let (a2, b2) = (a.max(lo), b.min(hi));
            if b2 > a2 {
                if grid_out.last() != Some(&a2) {
                    if !grid_out.is_empty() {
                        // gap between cells
                        dens.push(T::zero());
                    }
                    grid_out.push(a2);
                }
                grid_out.push(b2);
                dens.push(v);
            }
        }
        Self { atoms, grid: grid_out, density: dens }
    }

    /// Image under `x ↦ c - x`; requires the support inside `[0, c]`.
    pub fn reflected(&self, c: T) -> Result<Self> {
        if let Some((lo, hi)) = self.support() {
            if lo < T::zero() || hi > c {
                return Err(Error::invalid("reflection needs support inside [0, c]"));
            }
        }
        let atoms = self.atoms.iter().rev().map(|&(x, w)| (c - x, w)).collect();
        let mut grid: Vec<T> = self.grid.iter().rev().map(|&g| (c - g).max(T::zero())).collect();
        let density = self.density.iter().rev().copied().collect();
        // trim cells outside [0, c] introduced by grid extent beyond support
        if grid.first().is_some_and(|&g| g < T::zero()) {
            grid[0] = T::zero();
        }
        let mut m = Self::new(atoms, grid, density)?;
        if m.grid.first().is_some_and(|&g| g < T::zero()) {
            m = m.restrict_open(T::zero(), c);
        }
        Ok(m)
    }

    /// Density-only projection onto `target`, preserving `weight` cell by
    /// cell; atoms are deposited into the cell that contains them. Mass
    /// outside the target grid is dropped.
    pub fn project(&self, target: &[T], weight: CellWeight) -> Result<Self> {
        grid::validate_grid(target)?;
        let p = weight.exponent::<T>();
        let mut acc = vec![T::zero(); target.len() - 1];
        for (lo, hi, v) in self.cells() {
            grid::accumulate_box(target, &mut acc, lo, hi, v, p);
        }
        for &(x, w) in &self.atoms {
            grid::accumulate_point(target, &mut acc, x, w, p);
        }
        grid::finalize_moments(target, &mut acc, p);
        Self::from_density(target.to_vec(), acc)
    }

    /// Same measure with the density part expressed on a refinement of its grid.
    pub fn refined(&self, target: &[T]) -> Self {
        let g = grid::merge_grids(&self.grid, target);
        Self { atoms: self.atoms.clone(), density: self.density_on(&g), grid: g }
    }

    /// Multiplies by `f`: atoms exactly, density cells by the `weight`-averaged
    /// value of `f` over the cell, so that `∫ x^p f dμ` is preserved per cell.
    pub fn multiplied_by(&self, f: impl Fn(T) -> T, weight: CellWeight) -> Self {
        let rule = GaussRule::new(8);
        let p = weight.exponent::<T>();
        let atoms = self.atoms.iter().map(|&(x, w)| (x, w * f(x))).filter(|a| a.1 != T::zero()).collect();
        let density = self
            .cells()
            .map(|(lo, hi, v)| {
                if v == T::zero() {
                    return T::zero();
                }
                let num = rule.integrate(lo, hi, |x| f(x) * x.powf(p));
                v * num / power_integral(lo, hi, p)
            })
            .collect();
        Self { atoms, grid: self.grid.clone(), density }
    }

    /// Multiplication by `x^γ` with exact cell moments.
    pub fn times_power(&self, gamma: T, weight: CellWeight) -> Self {
        let p = weight.exponent::<T>();
        let atoms = self
            .atoms
            .iter()
            .map(|&(x, w)| (x, if x == T::zero() && gamma > T::zero() { T::zero() } else { w * x.powf(gamma) }))
            .filter(|a| a.1 != T::zero())
            .collect();
        let density = self
            .cells()
            .map(|(lo, hi, v)| {
                if v == T::zero() {
                    T::zero()
                } else {
                    v * power_integral(lo, hi, p + gamma) / power_integral(lo, hi, p)
                }
            })
            .collect();
        Self { atoms, grid: self.grid.clone(), density }
    }

    /// Atoms plus one atom per density cell at its midpoint carrying the cell mass.
    pub fn quantized(&self) -> Vec<(T, T)> {
        let two = lit::<T>(2.0);
        let mut pts: Vec<(T, T)> = self.atoms.clone();
        pts.extend(self.cells().filter(|c| c.2 != T::zero()).map(|(lo, hi, v)| ((lo + hi) / two, v * (hi - lo))));
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut merged: Vec<(T, T)> = Vec::with_capacity(pts.len());
        for (x, w) in pts {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 = last.1 + w,
                _ => merged.push((x, w)),
            }
        }
        merged
    }

    /// Scaled to unit total mass.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.total_mass();
        if !(m.abs() > T::zero()) {
            return Err(Error::invalid("cannot normalize a measure with zero mass"));
        }
        Ok(self.scaled(T::one() / m))
    }

    /// Pushforward under `x ↦ ℓ x` (`ℓ > 0`).
    pub fn dilated(&self, ell: T) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(x, w)| (x * ell, w)).collect(),
            grid: self.grid.iter().map(|&g| g * ell).collect(),
            density: self.density.iter().map(|&v| v / ell).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse { context: "measure JSON".into(), message: e.to_string() })
    }
}
