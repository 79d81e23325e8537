//! Size samples: synthetic draws, the per-time sample container and its CSV form.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Measure;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// `n` i.i.d. draws from `μ / μ(ℝ⁺)` by inversion of the distribution function.
///
/// `μ` must be nonnegative with positive mass; it is normalised internally.
pub fn sample<T: Real>(mu: &Measure<T>, n: usize, seed: u64) -> Result<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(mu, n, &mut rng)
}

pub(crate) fn sample_with<T: Real, R: Rng>(mu: &Measure<T>, n: usize, rng: &mut R) -> Result<Vec<T>> {
    if !mu.is_nonnegative() {
        return Err(Error::invalid("cannot sample from a signed measure"));
    }
    // pieces in increasing position: (cumulative mass after piece, kind)
    enum Piece<T> {
        Atom(T),
        Cell(T, T, T),
    }
    let mut pieces: Vec<(T, T, Piece<T>)> = Vec::new(); // (start position, mass, piece)
    for &(x, w) in mu.atoms() {
        pieces.push((x, w, Piece::Atom(x)));
    }
    for (lo, hi, v) in mu.cells() {
        if v > T::zero() {
            pieces.push((lo, v * (hi - lo), Piece::Cell(lo, hi, v)));
        }
    }
    pieces.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = Vec::with_capacity(pieces.len());
    let mut total = T::zero();
    for p in &pieces {
        total = total + p.1;
        cum.push(total);
    }
    if !(total > T::zero()) {
        return Err(Error::invalid("cannot sample from a measure with zero mass"));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = lit::<T>(rng.gen::<f64>()) * total;
        let k = cum.partition_point(|&c| c <= u).min(pieces.len() - 1);
        let before = if k == 0 { T::zero() } else { cum[k - 1] };
        let x = match pieces[k].2 {
            Piece::Atom(x) => x,
            Piece::Cell(lo, hi, v) => (lo + (u - before) / v).min(hi),
        };
        out.push(x);
    }
    Ok(out)
}

/// `Σ_k x_k^p` — a sum, not a mean.
pub fn empirical_moment<T: Real>(samples: &[T], p: T) -> T {
    if p == T::zero() {
        return T::from_usize_lossy(samples.len());
    }
    samples.iter().map(|&x| x.powf(p)).sum()
}

/// Particle sizes observed at a sorted list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T> {
    time_points: Vec<T>,
    sizes: Vec<Vec<T>>,
}

impl<T: Real> SampleSet<T> {
    pub fn new(time_points: Vec<T>, sizes: Vec<Vec<T>>) -> Result<Self> {
        if time_points.len() != sizes.len() {
            return Err(Error::invalid("one size list per time point is required"));
        }
        if time_points.iter().any(|t| !t.is_finite() || *t < T::zero()) {
            return Err(Error::invalid("time points must be finite and nonnegative"));
        }
        if time_points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time points must be strictly increasing"));
        }
        for s in &sizes {
            if s.is_empty() {
                return Err(Error::invalid("every time point needs at least one sample"));
            }
            if s.iter().any(|x| !(x.is_finite() && *x > T::zero())) {
                return Err(Error::invalid("sizes must be finite and strictly positive"));
            }
        }
        Ok(Self { time_points, sizes })
    }

    /// Draws `n` sizes from each `μ(t_i)`, one ChaCha8 stream for the whole set.
    pub fn draw(time_points: Vec<T>, measures: &[Measure<T>], n: usize, seed: u64) -> Result<Self> {
        if measures.len() != time_points.len() {
            return Err(Error::invalid("one measure per time point is required"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = measures.iter().map(|m| sample_with(m, n, &mut rng)).collect::<Result<Vec<_>>>()?;
        Self::new(time_points, sizes)
    }

    pub fn time_points(&self) -> &[T] {
        &self.time_points
    }

    pub fn sizes(&self) -> &[Vec<T>] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.time_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &[T])> + '_ {
        self.time_points.iter().copied().zip(self.sizes.iter().map(|v| v.as_slice()))
    }

    /// Reads `time,size` rows; rows are grouped by exact time value.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.len() != 2 || &headers[0] != "time" || &headers[1] != "size" {
            return Err(Error::Parse { context: "sample CSV".into(), message: "expected header `time,size`".into() });
        }
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for rec in rdr.deserialize() {
            let (t, x): (f64, f64) = rec.map_err(csv_err)?;
            rows.push((t, x));
        }
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut times: Vec<T> = Vec::new();
        let mut sizes: Vec<Vec<T>> = Vec::new();
        let mut last: Option<f64> = None;
        for (t, x) in rows {
            if last != Some(t) {
                times.push(lit(t));
                sizes.push(Vec::new());
                last = Some(t);
            }
            sizes.last_mut().expect("pushed").push(lit(x));
        }
        Self::new(times, sizes)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "size"]).map_err(csv_err)?;
        for (t, xs) in self.iter() {
            for &x in xs {
                w.serialize((t.as_f64(), x.as_f64())).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::Io { path: "<sample CSV>".into(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse { context: "sample CSV".into(), message: e.to_string() }
}
