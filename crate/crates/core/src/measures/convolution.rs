//! Multiplicative convolution `(f ∗ g)(x) = ∫ f(y) g(x/y) dy/y`.

use rayon::prelude::*;

use super::Measure;
use crate::error::{Error, Result};
use crate::grid::{self, CellWeight};
use crate::scalar::{lit, Real};

/// Where the density part of a convolution is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvolutionGrid<T> {
    /// Atom–atom products stay atoms, atom–density products are exact
    /// dilations, density–density products land on a log grid of `cells`
    /// cells covering the product support.
    Auto { cells: usize },
    /// Everything is projected onto this grid (atoms included); mass outside
    /// the grid is dropped.
    Explicit(Vec<T>),
}

impl<T> Default for ConvolutionGrid<T> {
    fn default() -> Self {
        ConvolutionGrid::Auto { cells: 400 }
    }
}

/// `f ∗ g` with the default output grid.
pub fn mult_convolve<T: Real>(f: &Measure<T>, g: &Measure<T>) -> Result<Measure<T>> {
    mult_convolve_onto(f, g, &ConvolutionGrid::default(), CellWeight::Mass)
}

/// `f ∗ g` on a chosen output grid; with an explicit grid each output cell
/// receives the exact `∫ x^p d(f∗g)` (`p` from `weight`) over the cell.
pub fn mult_convolve_onto<T: Real>(
    f: &Measure<T>,
    g: &Measure<T>,
    out: &ConvolutionGrid<T>,
    weight: CellWeight,
) -> Result<Measure<T>> {
    for m in [f, g] {
        if m.atoms().iter().any(|a| a.0 == T::zero()) {
            return Err(Error::invalid("multiplicative convolution needs measures without mass at 0"));
        }
    }
    let mut atoms = Vec::with_capacity(f.atoms().len() * g.atoms().len());
    for &(x, w) in f.atoms() {
        for &(y, v) in g.atoms() {
            atoms.push((x * y, w * v));
        }
    }
    let atom_part = Measure::from_atoms(atoms)?;

    match out {
        ConvolutionGrid::Explicit(grid_out) => {
            grid::validate_grid(grid_out)?;
            let p = weight.exponent::<T>();
            let mut acc = box_products(f, g, grid_out, p);
            grid::finalize_moments(grid_out, &mut acc, p);
            let mut mixed = atom_part;
            for (a, d) in [(f, g), (g, f)] {
                for &(x, w) in a.atoms() {
                    mixed = mixed.add_scaled(&d.dilated(x).without_atoms(), w);
                }
            }
            let proj = mixed.project(grid_out, weight)?;
            for (s, v) in acc.iter_mut().zip(proj.density()) {
                *s = *s + *v;
            }
            Measure::from_density(grid_out.clone(), acc)
        }
        ConvolutionGrid::Auto { cells } => {
            let mut result = atom_part;
            for (a, d) in [(f, g), (g, f)] {
                for &(x, w) in a.atoms() {
                    result = result.add_scaled(&d.dilated(x).without_atoms(), w);
                }
            }
            if f.has_density() && g.has_density() {
                let (fl, fh) = (f.grid()[0], *f.grid().last().unwrap());
                let (gl, gh) = (g.grid()[0], *g.grid().last().unwrap());
                let (lo, hi) = (fl * gl, fh * gh);
                let floor = hi * lit(1e-6);
                let grid_out = if lo > floor {
                    grid::log_grid(lo, hi, *cells, false)
                } else {
                    grid::log_grid(floor, hi, *cells, true)
                };
                let p = weight.exponent::<T>();
                let mut acc = box_products(f, g, &grid_out, p);
                grid::finalize_moments(&grid_out, &mut acc, p);
                let dd = Measure::from_density(grid_out, acc)?;
                result = result.add(&dd);
            }
            Ok(result)
        }
    }
}

/// Accumulated `∫_cell x^p` of the density–density part (not yet divided by cell moments).
fn box_products<T: Real>(f: &Measure<T>, g: &Measure<T>, out: &[T], p: T) -> Vec<T> {
    let n = out.len() - 1;
    let fc: Vec<(T, T, T)> = f.cells().filter(|c| c.2 != T::zero()).collect();
    let gc: Vec<(T, T, T)> = g.cells().filter(|c| c.2 != T::zero()).collect();
    if fc.is_empty() || gc.is_empty() {
        return vec![T::zero(); n];
    }
    let chunks: Vec<Vec<T>> = fc
        .par_iter()
        .map(|&(a1, b1, v1)| {
            let mut acc = vec![T::zero(); n];
            for &(a2, b2, v2) in &gc {
                let (lo, hi) = (a1 * a2, b1 * b2);
                let start = out.partition_point(|&x| x <= lo).saturating_sub(1);
                let mut prev = T::zero();
                for j in start..n {
                    if out[j] >= hi {
                        break;
                    }
                    let x = out[j + 1].min(hi);
                    let c = box_cumulative(a1, b1, a2, b2, x, p);
                    let below = if j == start { box_cumulative(a1, b1, a2, b2, out[j].max(lo), p) } else { prev };
                    acc[j] = acc[j] + v1 * v2 * (c - below);
                    prev = c;
                }
            }
            acc
        })
        .collect();
    let mut acc = vec![T::zero(); n];
    for c in chunks {
        for (s, v) in acc.iter_mut().zip(c) {
            *s = *s + v;
        }
    }
    acc
}

/// `∬_{[a1,b1]×[a2,b2], yz ≤ X} (yz)^p dy dz` for `p ∈ {0, 1}`.
fn box_cumulative<T: Real>(a1: T, b1: T, a2: T, b2: T, x: T, p: T) -> T {
    if x <= a1 * a2 {
        return T::zero();
    }
    let two = lit::<T>(2.0);
    let full_end = b1.min(x / b2).max(a1);
    let y1 = a1.max(x / b2);
    let y2 = if a2 > T::zero() { b1.min(x / a2) } else { b1 };
    let partial = y2 > y1 && y1 > T::zero();
    if p == T::zero() {
        let mut c = (b2 - a2) * (full_end - a1);
        if partial {
            c = c + x * (y2 / y1).ln() - a2 * (y2 - y1);
        }
        c
    } else {
        let mut c = (full_end * full_end - a1 * a1) / two * (b2 * b2 - a2 * a2) / two;
        if partial {
            c = c + (x * x * (y2 / y1).ln() - a2 * a2 * (y2 * y2 - y1 * y1) / two) / two;
        }
        c
    }
}

impl<T: Real> Measure<T> {
    pub(crate) fn without_atoms(&self) -> Self {
        Measure::from_density(self.grid().to_vec(), self.density().to_vec()).expect("valid density part")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::mellin_real;

    #[test]
    fn atoms_multiply() {
        let c = mult_convolve(&Measure::<f64>::dirac(2.0), &Measure::dirac(3.0)).unwrap();
        assert_eq!(c.atoms(), &[(6.0, 1.0)]);
    }

    #[test]
    fn dirac_one_is_identity() {
        let g = Measure::new(vec![(0.5, 0.25)], vec![0.2, 0.6, 1.0], vec![1.0, 3.0]).unwrap();
        let c = mult_convolve(&Measure::dirac(1.0), &g).unwrap();
        assert_eq!(c, g);
    }

    #[test]
    fn rejects_mass_at_zero() {
        let f = Measure::<f64>::dirac(0.0);
        assert!(mult_convolve(&f, &Measure::dirac(1.0)).is_err());
    }

    #[test]
    fn explicit_grid_preserves_cell_moments() {
        let f = Measure::<f64>::from_density(vec![0.2, 0.5, 1.0], vec![1.0, 2.0]).unwrap();
        let g = Measure::from_density(vec![0.0, 1.0], vec![2.0]).unwrap();
        let out = grid::log_grid(1e-3, 1.0, 40, true);
        for w in [CellWeight::Mass, CellWeight::FirstMoment] {
            let c = mult_convolve_onto(&f, &g, &ConvolutionGrid::Explicit(out.clone()), w).unwrap();
            let p = w.exponent::<f64>();
            let want = mellin_real(&f, p + 1.0).unwrap() * mellin_real(&g, p + 1.0).unwrap();
            assert!((c.moment(p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn box_cumulative_total_matches_product_of_moments() {
        let (a1, b1, a2, b2): (f64, f64, f64, f64) = (0.3, 0.9, 0.0, 0.5);
        let total0 = box_cumulative(a1, b1, a2, b2, b1 * b2, 0.0);
        assert!((total0 - (b1 - a1) * (b2 - a2)).abs() < 1e-14);
        let total1 = box_cumulative(a1, b1, a2, b2, b1 * b2, 1.0);
        let m1 = (b1 * b1 - a1 * a1) / 2.0 * (b2 * b2 - a2 * a2) / 2.0;
        assert!((total1 - m1).abs() < 1e-14);
    }

    #[test]
    fn density_product_moments_multiply() {
        let f = Measure::<f64>::from_density(vec![0.2, 0.5, 1.0], vec![1.0, 2.0]).unwrap();
        let g = Measure::new(vec![(0.7, 0.5)], vec![0.0, 0.4, 1.5], vec![0.5, 1.0]).unwrap();
        for weight in [CellWeight::Mass, CellWeight::FirstMoment] {
            let c = mult_convolve_onto(&f, &g, &ConvolutionGrid::Auto { cells: 50 }, weight).unwrap();
            let s = if weight == CellWeight::Mass { 1.0 } else { 2.0 };
            let lhs = mellin_real(&c, s).unwrap();
            let rhs = mellin_real(&f, s).unwrap() * mellin_real(&g, s).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{weight:?}: {lhs} vs {rhs}");
        }
    }
}
