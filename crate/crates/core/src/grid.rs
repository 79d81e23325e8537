//! Breakpoint grids and moment-preserving projection of piecewise-constant
//! densities between them.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Which moment a projection between grids preserves cell by cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellWeight {
    /// `∫_cell f dx` is preserved.
    #[default]
    Mass,
    /// `∫_cell x f dx` is preserved (polymerised mass in fragmentation).
    FirstMoment,
}

impl CellWeight {
    pub fn exponent<T: Real>(self) -> T {
        match self {
            CellWeight::Mass => T::zero(),
            CellWeight::FirstMoment => T::one(),
        }
    }
}

pub fn validate_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.len() == 1 {
        return Err(Error::invalid("a grid needs at least two breakpoints"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("grid breakpoints must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid breakpoints must be strictly increasing"));
    }
    Ok(())
}

pub fn uniform_grid<T: Real>(lo: T, hi: T, cells: usize) -> Vec<T> {
    let h = (hi - lo) / T::from_usize_lossy(cells);
    let mut g: Vec<T> = (0..=cells).map(|i| lo + h * T::from_usize_lossy(i)).collect();
    g[cells] = hi;
    g
}

/// `cells` geometric cells on `[lo, hi]`, optionally preceded by `[0, lo]`.
pub fn log_grid<T: Real>(lo: T, hi: T, cells: usize, with_zero: bool) -> Vec<T> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let h = (lhi - llo) / T::from_usize_lossy(cells);
    let mut g = Vec::with_capacity(cells + 2);
    if with_zero {
        g.push(T::zero());
    }
    for i in 0..=cells {
        g.push((llo + h * T::from_usize_lossy(i)).exp());
    }
    let n = g.len();
    g[n - 1] = hi;
    g[if with_zero { 1 } else { 0 }] = lo;
    g
}

/// Sorted union of two grids; points closer than `rel_tol` (relative to the
/// overall span) are identified.
pub fn merge_grids<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() {
        return b.to_vec();
    }
    if b.is_empty() || a == b {
        return a.to_vec();
    }
    let mut all: Vec<T> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).expect("finite grid"));
    let span = all[all.len() - 1] - all[0];
    let tol = span * lit::<T>(1e-12);
    let mut out: Vec<T> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&last) if x - last <= tol => {}
            _ => out.push(x),
        }
    }
    out
}

/// Index of the cell containing `x` (cells are `[g_i, g_{i+1})`, the last one closed).
pub fn locate<T: Real>(grid: &[T], x: T) -> Option<usize> {
    let n = grid.len();
    if n < 2 || x < grid[0] || x > grid[n - 1] {
        return None;
    }
    if x == grid[n - 1] {
        return Some(n - 2);
    }
    // partition_point returns the first index with grid[i] > x
    let i = grid.partition_point(|&g| g <= x);
    Some(i - 1)
}

/// `∫_a^b x^p dx` for `0 ≤ a ≤ b`.
pub fn power_integral<T: Real>(a: T, b: T, p: T) -> T {
    if p == T::zero() {
        b - a
    } else if p == T::one() {
        (b * b - a * a) / lit(2.0)
    } else if (p + T::one()).abs() < lit(1e-14) {
        (b / a).ln()
    } else {
        let q = p + T::one();
        (b.powf(q) - a.powf(q)) / q
    }
}

/// Adds `value * ∫_{[lo,hi] ∩ cell} x^p dx` into `acc[cell]` for every cell
/// of `grid` overlapping `[lo, hi]`. Returns the part of the integral that fell
/// outside the grid.
pub fn accumulate_box<T: Real>(grid: &[T], acc: &mut [T], lo: T, hi: T, value: T, p: T) -> T {
    let n = grid.len();
    let mut outside = T::zero();
    if hi <= lo || value == T::zero() {
        return outside;
    }
    if lo < grid[0] {
        outside = outside + value * power_integral(lo, hi.min(grid[0]), p);
    }
    if hi > grid[n - 1] {
        outside = outside + value * power_integral(lo.max(grid[n - 1]), hi, p);
    }
    let start = grid.partition_point(|&g| g <= lo).saturating_sub(1);
    for i in start..n - 1 {
        let a = grid[i].max(lo);
        let b = grid[i + 1].min(hi);
        if grid[i] >= hi {
            break;
        }
        if b > a {
            acc[i] = acc[i] + value * power_integral(a, b, p);
        }
    }
    outside
}

/// Adds a point mass `weight` at `x` into `acc` so that the `x^p`-moment is
/// preserved: the cell containing `x` receives `weight * x^p`.
pub fn accumulate_point<T: Real>(grid: &[T], acc: &mut [T], x: T, weight: T, p: T) -> bool {
    match locate(grid, x) {
        Some(i) => {
            let xp = if p == T::zero() { T::one() } else { x.powf(p) };
            acc[i] = acc[i] + weight * xp;
            true
        }
        None => false,
    }
}

/// Converts accumulated cell moments into cell values.
pub fn finalize_moments<T: Real>(grid: &[T], acc: &mut [T], p: T) {
    for (i, v) in acc.iter_mut().enumerate() {
        let w = power_integral(grid[i], grid[i + 1], p);
        *v = if w > T::zero() { *v / w } else { T::zero() };
    }
}

/// Projects a piecewise-constant density from `src` to `dst` preserving the
/// chosen moment on every destination cell (up to the part outside `dst`).
pub fn project_density<T: Real>(src: &[T], values: &[T], dst: &[T], weight: CellWeight) -> Vec<T> {
    let p = weight.exponent::<T>();
    let mut acc = vec![T::zero(); dst.len().saturating_sub(1)];
    if src.len() < 2 || dst.len() < 2 {
        return acc;
    }
    // two-pointer sweep
    let (mut i, mut j) = (0usize, 0usize);
    while i + 1 < src.len() && j + 1 < dst.len() {
        let a = src[i].max(dst[j]);
        let b = src[i + 1].min(dst[j + 1]);
        if b > a && values[i] != T::zero() {
            acc[j] = acc[j] + values[i] * power_integral(a, b, p);
        }
        if src[i + 1] < dst[j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    finalize_moments(dst, &mut acc, p);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_edges() {
        let g = vec![0.0, 1.0, 2.0, 4.0];
        assert_eq!(locate(&g, 0.0), Some(0));
        assert_eq!(locate(&g, 1.0), Some(1));
        assert_eq!(locate(&g, 3.9), Some(2));
        assert_eq!(locate(&g, 4.0), Some(2));
        assert_eq!(locate(&g, 4.1), None);
        assert_eq!(locate(&g, -0.1), None);
    }

    #[test]
    fn merge_identifies_close_points() {
        let a = vec![0.0, 0.5, 1.0];
        let b = vec![0.25, 0.5 + 1e-15, 1.0];
        assert_eq!(merge_grids(&a, &b), vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1.0, 30, true);
        assert_eq!(g.len(), 32);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 1e-3);
        assert_eq!(*g.last().unwrap(), 1.0);
        validate_grid(&g).unwrap();
    }

    #[test]
    fn projection_preserves_mass_and_first_moment() {
        let src = uniform_grid(0.0, 1.0, 7);
        let vals: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).sin() + 1.5).collect();
        let dst = log_grid(1e-3, 1.0, 11, true);
        for (w, p) in [(CellWeight::Mass, 0.0), (CellWeight::FirstMoment, 1.0)] {
            let out = project_density(&src, &vals, &dst, w);
            let before: f64 = (0..7).map(|i| vals[i] * power_integral(src[i], src[i + 1], p)).sum();
            let after: f64 = (0..out.len()).map(|i| out[i] * power_integral(dst[i], dst[i + 1], p)).sum();
            assert!((before - after).abs() < 1e-13, "{w:?}: {before} vs {after}");
        }
    }

    #[test]
    fn accumulate_box_reports_outside_part() {
        let g: Vec<f64> = vec![0.0, 1.0, 2.0];
        let mut acc = vec![0.0; 2];
        let out = accumulate_box(&g, &mut acc, 1.5, 3.0, 2.0, 0.0);
        assert_eq!(acc, vec![0.0, 1.0]);
        assert!((out - 2.0).abs() < 1e-15);
    }
}
