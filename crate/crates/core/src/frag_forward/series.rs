//! Series representation `u_t = e^{−αtx^γ}μ0 + Σ_n (αtℓ^γ)^n (a_n)_ℓ` integrated over `μ0(dℓ)`.

use rayon::prelude::*;

use super::{FragmentationKernel, FragmentationParams};
use crate::error::{Error, Result, Warning};
use crate::grid::{self, accumulate_box, accumulate_point, finalize_moments, CellWeight};
use crate::measures::{mult_convolve_onto, tv_norm, ConvolutionGrid, Measure};
use crate::quadrature::GaussRule;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone)]
pub struct SeriesOptions<T> {
    /// Log-spaced cells of the coefficient grid on `[x_min, 1]`.
    pub cells: usize,
    pub x_min: T,
    /// Target bound on the TV norm of the truncation remainder.
    pub budget: T,
    pub max_terms: usize,
    /// Use exactly this many terms instead of growing the table to the budget;
    /// an unmet budget is then reported as a warning.
    pub fixed_terms: Option<usize>,
    /// Largest admissible `τ^n ‖a_n‖`; beyond it cancellation ruins the sum.
    pub cancellation_limit: T,
    /// Log cells of the default output grid on `[1e-4 L, L]`.
    pub output_cells: usize,
    pub output_grid: Option<Vec<T>>,
}

impl<T: Real> Default for SeriesOptions<T> {
    fn default() -> Self {
        Self {
            cells: 400,
            x_min: lit(1e-5),
            budget: lit(1e-6),
            max_terms: 60,
            fixed_terms: None,
            cancellation_limit: lit(1e6),
            output_cells: 400,
            output_grid: None,
        }
    }
}

/// Coefficients `a_1 = κ, a_2, …` of the fundamental solution, all but the
/// first stored as densities on a common grid of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SeriesTable<T: Real> {
    kappa: FragmentationKernel<T>,
    gamma: T,
    grid: Vec<T>,
    kappa_on_grid: Vec<T>,
    coeffs: Vec<Measure<T>>,
    norms: Vec<T>,
    cancellation_limit: T,
}

/// Builds `a_1, …, a_{n_max}` via
/// `a_{n+1} = (−x^γ a_n + (x^γ a_n) ∗ κ + (−1)^n κ / n!) / (n + 1)`.
pub fn build_series<T: Real>(
    kappa: &FragmentationKernel<T>,
    gamma: T,
    n_max: usize,
    opts: &SeriesOptions<T>,
) -> Result<SeriesTable<T>> {
    let mut table = SeriesTable::start(kappa, gamma, opts)?;
    while table.terms() < n_max {
        table.push_term()?;
    }
    Ok(table)
}

impl<T: Real> SeriesTable<T> {
    fn start(kappa: &FragmentationKernel<T>, gamma: T, opts: &SeriesOptions<T>) -> Result<Self> {
        if !(opts.x_min > T::zero() && opts.x_min < T::one()) || opts.cells == 0 {
            return Err(Error::invalid("series grid needs 0 < x_min < 1 and cells > 0"));
        }
        let k = kappa.measure();
        let mut grid = grid::log_grid(opts.x_min, T::one(), opts.cells, true);
        if k.has_density() {
            grid = grid::merge_grids(&grid, k.grid());
        }
        let a1 = if k.has_density() { k.refined(&grid) } else { k.clone() };
        let kappa_on_grid = if k.has_density() { a1.density().to_vec() } else { vec![T::zero(); grid.len() - 1] };
        Ok(Self {
            kappa: kappa.clone(),
            gamma,
            grid,
            kappa_on_grid,
            norms: vec![tv_norm(&a1)],
            coeffs: vec![a1],
            cancellation_limit: opts.cancellation_limit,
        })
    }

    fn push_term(&mut self) -> Result<()> {
        let n = self.coeffs.len();
        let a_n = &self.coeffs[n - 1];
        let k = self.kappa.measure();
        let w = a_n.times_power(self.gamma, CellWeight::FirstMoment);
        let conv = mult_convolve_onto(&w, k, &ConvolutionGrid::Explicit(self.grid.clone()), CellWeight::FirstMoment)?;
        let sign = if n.is_multiple_of(2) { T::one() } else { -T::one() };
        let c = sign / factorial::<T>(n);
        let next = conv.sub(&w).add_scaled(k, c).scaled(T::one() / T::from_usize_lossy(n + 1));
        let next = next.project(&self.grid, CellWeight::FirstMoment)?;
        self.norms.push(tv_norm(&next));
        self.coeffs.push(next);
        Ok(())
    }

    /// Grows the table until the remainder at `tau_max = α t L^γ` fits the budget.
    pub fn for_budget(kappa: &FragmentationKernel<T>, gamma: T, tau_max: T, opts: &SeriesOptions<T>) -> Result<Self> {
        if let Some(n) = opts.fixed_terms {
            let table = build_series(kappa, gamma, n.max(1), opts)?;
            table.check_cancellation(tau_max)?;
            return Ok(table);
        }
        let mut table = Self::start(kappa, gamma, opts)?;
        loop {
            table.check_cancellation(tau_max)?;
            let rem = table.remainder_bound(tau_max);
            if rem <= opts.budget {
                return Ok(table);
            }
            if table.terms() >= opts.max_terms {
                return Err(Error::TruncationBudget(format!(
                    "remainder {:.3e} > budget {:.3e} after {} terms at τ = {}",
                    rem.as_f64(),
                    opts.budget.as_f64(),
                    table.terms(),
                    tau_max.as_f64()
                )));
            }
            table.push_term()?;
        }
    }

    fn check_cancellation(&self, tau: T) -> Result<()> {
        let mut p = T::one();
        for (n, b) in self.norms.iter().enumerate() {
            p = p * tau;
            if p * *b > self.cancellation_limit {
                return Err(Error::TruncationBudget(format!(
                    "term {} has size {:.3e}: cancellation would dominate at τ = {}",
                    n + 1,
                    (p * *b).as_f64(),
                    tau.as_f64()
                )));
            }
        }
        Ok(())
    }

    pub fn terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn kernel(&self) -> &FragmentationKernel<T> {
        &self.kappa
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    /// `a_n` for `n ≥ 1`.
    pub fn coefficient(&self, n: usize) -> &Measure<T> {
        &self.coeffs[n - 1]
    }

    /// `‖a_n‖_TV` for `n = 1..=terms`.
    pub fn norms(&self) -> &[T] {
        &self.norms
    }

    /// Bound on `‖Σ_{n>N} τ^n a_n‖_TV` from `‖a_{n+1}‖ ≤ (3‖a_n‖ + 2/n!)/(n+1)`.
    pub fn remainder_bound(&self, tau: T) -> T {
        let tau = tau.as_f64();
        let mut n = self.terms();
        let mut b = self.norms[n - 1].as_f64();
        let mut inv_fact = 1.0 / factorial::<f64>(n);
        let mut p = tau.powi(n as i32);
        let mut sum = 0.0;
        for _ in 0..2000 {
            b = (3.0 * b + 2.0 * inv_fact) / (n + 1) as f64;
            n += 1;
            inv_fact /= n as f64;
            p *= tau;
            let term = p * b;
            sum += term;
            if term <= 1e-18 * sum.max(1e-300) || (p == 0.0) {
                break;
            }
        }
        lit(sum)
    }

    /// `Σ_n τ^n a_n` as cell values on [`grid`](Self::grid) plus the atoms of `τκ`.
    fn combination(&self, tau: T) -> (Vec<T>, Vec<(T, T)>) {
        let mut values: Vec<T> = self.kappa_on_grid.iter().map(|&v| v * tau).collect();
        let mut p = tau;
        for a in &self.coeffs[1..] {
            p = p * tau;
            for (s, &v) in values.iter_mut().zip(a.density()) {
                *s = *s + p * v;
            }
        }
        let atoms = self.kappa.measure().atoms().iter().map(|&(z, w)| (z, w * tau)).collect();
        (values, atoms)
    }

    /// Fundamental solution `e^{−τ}δ_1 + Σ_n τ^n a_n` at `τ = αt`.
    pub fn evaluate(&self, tau: T) -> Result<Measure<T>> {
        let (values, mut atoms) = self.combination(tau);
        atoms.push((T::one(), (-tau).exp()));
        Measure::new(atoms, self.grid.clone(), values)
    }
}

fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |f, k| f * T::from_usize_lossy(k))
}

const SOURCE_CHUNK: usize = 32;

/// Measure-valued solution with its truncation diagnostics.
#[derive(Debug, Clone)]
pub struct SeriesSolution<T: Real> {
    pub measure: Measure<T>,
    /// TV bound on the neglected tail, scaled by `‖μ0‖_TV`.
    pub remainder: T,
    pub terms: usize,
    pub warnings: Vec<Warning>,
}

/// Solution started from `δ_1` at time `t`.
pub fn fundamental_solution<T: Real>(
    params: &FragmentationParams<T>,
    kappa: &FragmentationKernel<T>,
    t: T,
    opts: &SeriesOptions<T>,
) -> Result<SeriesSolution<T>> {
    let tau = params.alpha * t;
    let table = SeriesTable::for_budget(kappa, params.gamma, tau, opts)?;
    let remainder = table.remainder_bound(tau);
    let warnings = if remainder > opts.budget {
        vec![Warning::SeriesDivergence { remainder: remainder.as_f64(), budget: opts.budget.as_f64() }.emit()]
    } else {
        Vec::new()
    };
    Ok(SeriesSolution { measure: table.evaluate(tau)?, remainder, terms: table.terms(), warnings })
}

/// Evaluates the series solution at time `t` for a nonnegative `μ0` on `(0, L]`.
pub fn solve_series<T: Real>(
    mu0: &Measure<T>,
    params: &FragmentationParams<T>,
    kappa: &FragmentationKernel<T>,
    t: T,
    opts: &SeriesOptions<T>,
) -> Result<SeriesSolution<T>> {
    if !(t >= T::zero()) {
        return Err(Error::invalid("time must be nonnegative"));
    }
    if mu0.atoms().iter().any(|a| a.0 <= T::zero()) {
        return Err(Error::invalid("initial measure must not charge 0"));
    }
    let Some((_, l)) = mu0.support() else {
        return Ok(SeriesSolution { measure: Measure::zero(), remainder: T::zero(), terms: 0, warnings: Vec::new() });
    };
    let tau_max = params.alpha * t * l.powf(params.gamma);
    let table = SeriesTable::for_budget(kappa, params.gamma, tau_max, opts)?;
    let rate = |x: T| params.alpha * t * x.powf(params.gamma);

    let out = match &opts.output_grid {
        Some(g) => {
            grid::validate_grid(g)?;
            g.clone()
        }
        None => {
            let base = grid::log_grid(lit::<T>(1e-4) * l, l, opts.output_cells, true);
            if mu0.has_density() {
                grid::merge_grids(&base, mu0.grid())
            } else {
                base
            }
        }
    };

    // loss part, cell-averaged with first-moment weights
    let loss = mu0.multiplied_by(|x| (-rate(x)).exp(), CellWeight::FirstMoment);
    let loss_atoms = loss.atoms().to_vec();
    let loss_density = if loss.has_density() {
        loss.without_atoms().project(&out, CellWeight::FirstMoment)?.density().to_vec()
    } else {
        vec![T::zero(); out.len() - 1]
    };

    // gain part: superpose dilated copies of Σ τ^n a_n
    let rule = GaussRule::<T>::new(8);
    let mut sources: Vec<(T, T)> = mu0.atoms().to_vec();
    for (lo, hi, v) in mu0.cells() {
        if v != T::zero() {
            sources.extend(rule.points(lo.max(T::zero()), hi).map(|(x, w)| (x, w * v)));
        }
    }
    let one = T::one();
    let s = table.grid();
    // fixed chunks summed in order keep the result bitwise reproducible
    let partials: Vec<Vec<T>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![T::zero(); out.len() - 1];
            for &(ell, m) in chunk {
                if m == T::zero() || ell <= T::zero() {
                    continue;
                }
                let (values, atoms) = table.combination(rate(ell));
                for (j, &v) in values.iter().enumerate() {
                    if v != T::zero() {
                        accumulate_box(&out, &mut acc, s[j] * ell, s[j + 1] * ell, v * m / ell, one);
                    }
                }
                for (z, w) in atoms {
                    accumulate_point(&out, &mut acc, z * ell, w * m, one);
                }
            }
            acc
        })
        .collect();
    let mut gain = vec![T::zero(); out.len() - 1];
    for part in partials {
        gain.iter_mut().zip(part).for_each(|(g, p)| *g = *g + p);
    }
    let mut density = gain;
    finalize_moments(&out, &mut density, one);
    density.iter_mut().zip(&loss_density).for_each(|(d, l)| *d = *d + *l);

    let measure = Measure::new(loss_atoms, out, density)?;
    let remainder = table.remainder_bound(tau_max) * tv_norm(mu0);
    let mut warnings = Vec::new();
    if remainder > opts.budget {
        warnings.push(Warning::SeriesDivergence { remainder: remainder.as_f64(), budget: opts.budget.as_f64() }.emit());
    }
    let min = measure.min_value();
    if min < T::zero() {
        let scale = measure.density().iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if -min > lit::<T>(1e-8) * scale {
            warnings.push(Warning::SignViolation { min_value: min.as_f64() }.emit());
        }
    }
    Ok(SeriesSolution { measure, remainder, terms: table.terms(), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SeriesOptions<f64> {
        SeriesOptions { cells: 200, ..Default::default() }
    }

    #[test]
    fn second_coefficient_for_uniform_kernel() {
        // γ = 1: a_2 = 1 − 3x;  γ = 2: a_2 = −2x²
        let k = FragmentationKernel::uniform();
        let fine = SeriesOptions::<f64> { cells: 2000, ..Default::default() };
        let t1 = build_series(&k, 1.0, 2, &fine).unwrap();
        let t2 = build_series(&k, 2.0, 2, &fine).unwrap();
        let g = t1.grid();
        for (j, (v1, v2)) in t1.coefficient(2).density().iter().zip(t2.coefficient(2).density()).enumerate() {
            let (a, b) = (g[j], g[j + 1]);
            let mid1 = 2.0 * (b.powi(3) - a.powi(3)) / 3.0 / (b * b - a * a);
            assert!((v1 - (1.0 - 3.0 * mid1)).abs() < 1e-2, "cell {j}: {v1}");
            let m4 = (b.powi(4) - a.powi(4)) / 4.0 / ((b * b - a * a) / 2.0);
            assert!((v2 + 2.0 * m4).abs() < 1e-2, "cell {j}: {v2}");
        }
    }

    #[test]
    fn first_moments_follow_exponential_series() {
        let k = FragmentationKernel::center_weighted(3.0, 32).unwrap();
        let table = build_series(&k, 1.5, 8, &opts()).unwrap();
        for n in 1..=8 {
            let m = table.coefficient(n).moment(1.0).unwrap();
            let want = -(-1f64).powi(n as i32) / factorial::<f64>(n);
            assert!((m - want).abs() < 1e-12, "n = {n}: {m} vs {want}");
        }
    }

    #[test]
    fn fundamental_solution_conserves_mass() {
        let p = FragmentationParams::new(1.0, 1.0).unwrap();
        let k = FragmentationKernel::uniform();
        for t in [0.0, 0.3, 2.0] {
            let sol = fundamental_solution(&p, &k, t, &opts()).unwrap();
            assert!((sol.measure.moment(1.0).unwrap() - 1.0).abs() < 1e-6);
            assert!(sol.remainder <= 1e-6);
        }
    }

    #[test]
    fn binary_kernel_with_gamma_zero_has_closed_form() {
        // constant rate and binary splitting: the particle count grows like e^{αt}
        let p = FragmentationParams::new(1.0, 0.0).unwrap();
        let k = FragmentationKernel::uniform();
        let t = 0.7f64;
        let sol = fundamental_solution(&p, &k, t, &SeriesOptions::default()).unwrap();
        // cells carry first-moment averages, so the count is only second-order accurate
        assert!((sol.measure.total_mass() - t.exp()).abs() < 1e-3);
    }

    #[test]
    fn series_agrees_with_fundamental_for_dirac() {
        let p = FragmentationParams::new(2.0, 1.0).unwrap();
        let k = FragmentationKernel::uniform();
        let a = solve_series(&Measure::dirac(1.0), &p, &k, 0.4, &opts()).unwrap();
        let b = fundamental_solution(&p, &k, 0.4, &opts()).unwrap();
        let g = a.measure.grid().to_vec();
        let dens = b.measure.without_atoms().project(&g, CellWeight::FirstMoment).unwrap();
        let b_on_g = Measure::new(b.measure.atoms().to_vec(), g, dens.density().to_vec()).unwrap();
        let diff = a.measure.sub(&b_on_g);
        assert!(tv_norm(&diff) < 1e-8, "{}", tv_norm(&diff));
    }

    #[test]
    fn fixed_terms_warn_when_budget_is_missed() {
        let p = FragmentationParams::new(1.0, 1.0).unwrap();
        let k = FragmentationKernel::uniform();
        let o = SeriesOptions { fixed_terms: Some(3), ..opts() };
        let sol = fundamental_solution(&p, &k, 1.0, &o).unwrap();
        assert_eq!(sol.terms, 3);
        assert!(matches!(sol.warnings[..], [Warning::SeriesDivergence { .. }]));
        let small = fundamental_solution(&p, &k, 1e-4, &o).unwrap();
        assert!(small.warnings.is_empty());
    }

    #[test]
    fn divergent_regime_is_reported() {
        let p = FragmentationParams::new(1.0, 1.0).unwrap();
        let k = FragmentationKernel::uniform();
        let err = fundamental_solution(&p, &k, 80.0, &opts()).unwrap_err();
        assert!(matches!(err, Error::TruncationBudget(_)));
    }
}
