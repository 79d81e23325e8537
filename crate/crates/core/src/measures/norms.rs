//! Total-variation and bounded-Lipschitz norms.

use super::Measure;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// `Σ|w| + ∫|density|`, which realises the TV supremum for this representation.
pub fn tv_norm<T: Real>(mu: &Measure<T>) -> T {
    let a: T = mu.atoms().iter().map(|a| a.1.abs()).sum();
    let d: T = mu.cells().map(|(lo, hi, v)| v.abs() * (hi - lo)).sum();
    a + d
}

/// Weighted total variation `∫ x^p d|μ|`.
pub fn weighted_tv_norm<T: Real>(mu: &Measure<T>, p: T) -> T {
    let a: T = mu.atoms().iter().map(|&(x, w)| w.abs() * x.powf(p)).sum();
    let d: T = mu.cells().map(|(lo, hi, v)| v.abs() * crate::grid::power_integral(lo, hi, p)).sum();
    a + d
}

/// Bounded-Lipschitz norm `sup { ∫φ dμ : |φ| ≤ 1, Lip(φ) ≤ 1 }`.
///
/// Density cells are replaced by midpoint atoms carrying the cell mass first;
/// this changes the value by at most `Σ_cells width · |mass|`. The remaining
/// linear program over `φ(x_i)` has only box and adjacent Lipschitz
/// constraints and is solved exactly by [`chain_lp_max`].
pub fn bl_norm<T: Real>(mu: &Measure<T>) -> Result<T> {
    let pts = mu.quantized();
    let (xs, ws): (Vec<T>, Vec<T>) = pts.into_iter().unzip();
    chain_lp_max(&xs, &ws)
}

/// Maximises `Σ w_i φ_i` subject to `|φ_i| ≤ 1` and
/// `|φ_{i+1} − φ_i| ≤ x_{i+1} − x_i` for sorted `xs`.
///
/// Dynamic programming on the chain: the best value of the prefix as a
/// function of the last `φ` is concave and piecewise linear; each step
/// dilates it by the allowed Lipschitz slack (shift the rising part left,
/// the falling part right, plateau in between), clips to `[-1, 1]` and adds
/// the next linear term. Exact up to rounding, `O(n²)` in the worst case.
pub fn chain_lp_max<T: Real>(xs: &[T], ws: &[T]) -> Result<T> {
    if xs.len() != ws.len() {
        return Err(Error::invalid("locations and weights differ in length"));
    }
    if xs.is_empty() {
        return Ok(T::zero());
    }
    if xs.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::invalid("locations must be sorted"));
    }
    let one = T::one();
    // breakpoints (φ, value), strictly increasing φ spanning [-1, 1]
    let mut f: Vec<(T, T)> = vec![(-one, -ws[0]), (one, ws[0])];
    for i in 1..xs.len() {
        let d = xs[i] - xs[i - 1];
        f = dilate(&f, d);
        for p in f.iter_mut() {
            p.1 = p.1 + ws[i] * p.0;
        }
        simplify(&mut f);
    }
    let best = f.iter().fold(T::neg_infinity(), |m, p| m.max(p.1));
    if !best.is_finite() {
        return Err(Error::NonConvergence("bounded-Lipschitz program produced a non-finite value".into()));
    }
    Ok(best.max(T::zero()))
}

fn dilate<T: Real>(f: &[(T, T)], d: T) -> Vec<(T, T)> {
    let one = T::one();
    if d <= T::zero() {
        return f.to_vec();
    }
    let vmax = f.iter().fold(T::neg_infinity(), |m, p| m.max(p.1));
    let k1 = f.iter().position(|p| p.1 == vmax).expect("nonempty");
    let k2 = f.iter().rposition(|p| p.1 == vmax).expect("nonempty");
    let mut g: Vec<(T, T)> = Vec::with_capacity(f.len() + 2);
    g.extend(f[..=k1].iter().map(|&(x, v)| (x - d, v)));
    g.extend(f[k2..].iter().map(|&(x, v)| (x + d, v)));
    // clip to [-1, 1]
    let at = |x: T| -> T {
        let j = g.partition_point(|p| p.0 <= x).clamp(1, g.len() - 1);
        let (a, b) = (g[j - 1], g[j]);
        if b.0 == a.0 {
            a.1.max(b.1)
        } else {
            a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
        }
    };
    let mut out = Vec::with_capacity(g.len() + 2);
    out.push((-one, at(-one)));
    out.extend(g.iter().copied().filter(|p| p.0 > -one && p.0 < one));
    out.push((one, at(one)));
    out
}

/// Removes duplicate abscissae and collinear interior points.
fn simplify<T: Real>(f: &mut Vec<(T, T)>) {
    let tol = lit::<T>(1e-14);
    let mut out: Vec<(T, T)> = Vec::with_capacity(f.len());
    for &p in f.iter() {
        if let Some(last) = out.last_mut() {
            if p.0 - last.0 <= tol {
                last.1 = last.1.max(p.1);
                continue;
            }
        }
        while out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let s1 = (b.1 - a.1) / (b.0 - a.0);
            let s2 = (p.1 - b.1) / (p.0 - b.0);
            if (s1 - s2).abs() <= tol * (T::one() + s1.abs()) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(p);
    }
    *f = out;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diracs(pts: &[(f64, f64)]) -> Measure<f64> {
        Measure::from_atoms(pts.to_vec()).unwrap()
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_norm(&Measure::<f64>::dirac(1.0)), 1.0);
        assert_eq!(tv_norm(&diracs(&[(1.0, 1.0), (1.5, -1.0)])), 2.0);
        let m = Measure::from_density(vec![0.0, 1.0], vec![2.0]).unwrap();
        assert_eq!(tv_norm(&m), 2.0);
    }

    #[test]
    fn bl_examples() {
        assert_eq!(bl_norm(&Measure::<f64>::zero()).unwrap(), 0.0);
        let v = bl_norm(&diracs(&[(1.0, 1.0), (1.5, -1.0)])).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        let v = bl_norm(&diracs(&[(0.0, 1.0), (5.0, -1.0)])).unwrap();
        assert!((v - 2.0).abs() < 1e-14);
        assert!((bl_norm(&diracs(&[(3.0, -0.7)])).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn bl_of_three_atoms() {
        // φ = (1, 0, 1) is admissible for unit gaps and collects 1 + 1;
        // the middle atom of weight -1 is best met with φ = 0.
        let v = bl_norm(&diracs(&[(0.0, 1.0), (1.0, -1.0), (2.0, 1.0)])).unwrap();
        assert!((v - 2.0).abs() < 1e-14, "{v}");
    }
}
