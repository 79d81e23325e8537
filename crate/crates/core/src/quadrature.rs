//! Gauss–Legendre rules.

use crate::scalar::{lit, Real};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes.into_iter().map(lit).collect(), weights.into_iter().map(lit).collect())
}

/// A rule mapped to `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(x_q, w_q)` on `[a, b]`.
    pub fn points(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) / lit(2.0);
        let mid = (a + b) / lit(2.0);
        self.nodes.iter().zip(self.weights.iter()).map(move |(&z, &w)| (mid + half * z, w * half))
    }

    pub fn integrate(&self, a: T, b: T, f: impl Fn(T) -> T) -> T {
        self.points(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        for n in 1..=10 {
            let rule = GaussRule::<f64>::new(n);
            let deg = 2 * n - 1;
            let got = rule.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let want = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-12 * want, "n={n}: {got} vs {want}");
        }
    }
}
