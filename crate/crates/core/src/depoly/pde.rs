//! Crank–Nicolson solver for `u_t − b u_x − (bε/2) u_xx = 0` on `(0, L)` with
//! the transport condition `u_t = b u_x` at `x = 0` and `u(t, L) = 0`.

use super::{GridFunction, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderParams<T> {
    pub b: T,
    pub eps: T,
    pub length: T,
    pub horizon: T,
    /// Space cells; `L/nx ≤ ε/4` is required.
    pub nx: usize,
    /// Time steps.
    pub nt: usize,
}

impl<T: Real> SecondOrderParams<T> {
    pub fn dx(&self) -> T {
        self.length / T::from_usize_lossy(self.nx)
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.nt)
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.nt).map(|n| self.dt() * T::from_usize_lossy(n)).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.b > T::zero() && self.eps > T::zero() && self.length > T::zero() && self.horizon > T::zero()) {
            return Err(Error::invalid("b, ε, L and T must be positive"));
        }
        if self.nx < 3 || self.nt == 0 {
            return Err(Error::invalid("need at least 3 space cells and 1 time step"));
        }
        let limit = self.eps / lit(4.0);
        if self.dx() > limit * lit(1.0 + 1e-12) {
            return Err(Error::Resolution { dx: self.dx().as_f64(), limit: limit.as_f64() });
        }
        Ok(())
    }
}

/// Factorised implicit step. Unknowns are the nodes `0..nx` (node `nx` is
/// the Dirichlet node). The boundary row uses the one-sided difference
/// `(−3u_0 + 4u_1 − u_2)/(2Δx)`; its `u_2` entry is eliminated with row 1 so
/// the system stays tridiagonal.
struct Stepper<T> {
    n: usize,
    // explicit half: rows of (I + Δt/2 A)
    e0: [T; 3],
    e_lo: T,
    e_di: T,
    e_up: T,
    // implicit half after elimination, Thomas-factorised
    lower: Vec<T>,
    cprime: Vec<T>,
    denom: Vec<T>,
    // row-0 elimination factor
    elim: T,
}

impl<T: Real> Stepper<T> {
    fn new(p: &SecondOrderParams<T>) -> Result<Self> {
        let n = p.nx;
        let (dx, dt) = (p.dx(), p.dt());
        let two = lit::<T>(2.0);
        let d = p.b * p.eps / two;
        let h = dt / two;
        let a_lo = -p.b / (two * dx) + d / (dx * dx);
        let a_di = -two * d / (dx * dx);
        let a_up = p.b / (two * dx) + d / (dx * dx);
        let a0 = [-lit::<T>(3.0) * p.b / (two * dx), lit::<T>(4.0) * p.b / (two * dx), -p.b / (two * dx)];

        let one = T::one();
        let l0 = [one - h * a0[0], -h * a0[1], -h * a0[2]];
        let (l_lo, l_di, l_up) = (-h * a_lo, one - h * a_di, -h * a_up);
        let elim = l0[2] / l_up;

        let mut lower = vec![l_lo; n];
        let mut diag = vec![l_di; n];
        let mut upper = vec![l_up; n];
        lower[0] = T::zero();
        diag[0] = l0[0] - elim * l_lo;
        upper[0] = l0[1] - elim * l_di;
        upper[n - 1] = T::zero();

        let mut cprime = vec![T::zero(); n];
        let mut denom = vec![T::zero(); n];
        for i in 0..n {
            let dd = if i == 0 { diag[0] } else { diag[i] - lower[i] * cprime[i - 1] };
            if dd.abs() < T::min_positive_value().sqrt() {
                return Err(Error::Singular("Crank–Nicolson matrix".into()));
            }
            denom[i] = dd;
            cprime[i] = upper[i] / dd;
        }
        Ok(Self {
            n,
            e0: [one + h * a0[0], h * a0[1], h * a0[2]],
            e_lo: h * a_lo,
            e_di: one + h * a_di,
            e_up: h * a_up,
            lower,
            cprime,
            denom,
            elim,
        })
    }

    /// Advances `u` (length `n + 1`, last entry 0) by one step; `r` is scratch.
    fn step(&self, u: &mut [T], r: &mut [T]) {
        let n = self.n;
        r[0] = self.e0[0] * u[0] + self.e0[1] * u[1] + self.e0[2] * u[2];
        for j in 1..n {
            r[j] = self.e_lo * u[j - 1] + self.e_di * u[j] + self.e_up * u[j + 1];
        }
        r[0] = r[0] - self.elim * r[1];
        // forward sweep, then back substitution
        r[0] = r[0] / self.denom[0];
        for i in 1..n {
            r[i] = (r[i] - self.lower[i] * r[i - 1]) / self.denom[i];
        }
        u[n - 1] = r[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = r[i] - self.cprime[i] * u[i + 1];
        }
        u[n] = T::zero();
    }
}

fn initial_values<T: Real>(u0: &GridFunction<T>, p: &SecondOrderParams<T>) -> Vec<T> {
    let dx = p.dx();
    let same = u0.len() == p.nx + 1 && (u0.dx - dx).abs() <= dx * lit(1e-9);
    let mut v: Vec<T> = if same {
        u0.values.clone()
    } else {
        (0..=p.nx).map(|j| u0.interpolate(dx * T::from_usize_lossy(j))).collect()
    };
    v[p.nx] = T::zero();
    v
}

/// Full trajectory at `t_n = n T / nt`, `n = 0..=nt`. `u0` is resampled
/// (linear interpolation) if it does not live on the solver grid.
pub fn second_order_solve<T: Real>(
    u0: &GridFunction<T>,
    p: &SecondOrderParams<T>,
) -> Result<Trajectory<T, GridFunction<T>>> {
    p.validate()?;
    let st = Stepper::new(p)?;
    let mut u = initial_values(u0, p);
    let mut r = vec![T::zero(); p.nx];
    let dx = p.dx();
    let mut states = Vec::with_capacity(p.nt + 1);
    states.push(GridFunction { dx, values: u.clone() });
    for _ in 0..p.nt {
        st.step(&mut u, &mut r);
        states.push(GridFunction { dx, values: u.clone() });
    }
    Ok(Trajectory { times: p.times(), states })
}

/// Boundary trace `u(t_n, 0)`, `n = 0..=nt`, without storing the trajectory.
pub fn second_order_trace<T: Real>(u0: &GridFunction<T>, p: &SecondOrderParams<T>) -> Result<Vec<T>> {
    p.validate()?;
    let st = Stepper::new(p)?;
    let mut u = initial_values(u0, p);
    let mut r = vec![T::zero(); p.nx];
    let mut trace = Vec::with_capacity(p.nt + 1);
    trace.push(u[0]);
    for _ in 0..p.nt {
        st.step(&mut u, &mut r);
        trace.push(u[0]);
    }
    Ok(trace)
}
