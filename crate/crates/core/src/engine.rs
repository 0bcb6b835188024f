//! Crossing probability of a piecewise-affine boundary over `[q, d]`.
//!
//! Given a partition `q = t_0 < … < t_n = d` containing every boundary knot,
//! the non-crossing probability is the integral over the orthant
//! `x_i <= g(t_i)` of the density of `(W_{t_0}, …, W_{t_n})`, written as the
//! pair density of `(x_0, x_n)` times conditional densities of `x_i` given
//! `(x_0, x_{i+1})`, times the bridge non-crossing probability of every
//! partition interval. Three evaluators are provided:
//!
//! * [`bcp_quadrature`]: tensor Gauss–Legendre over the full `(n+1)`-box,
//!   evaluating [`theorem1_integrand`] at every node (`n <= 4`).
//! * [`bcp_nested`]: the same integral performed one variable at a time,
//!   innermost `x_1` first, as a chain of matrix products (any `n`).
//! * [`bcp_montecarlo`]: `E[∏ 1{X_i <= g(t_i)} ∏ bridge_i(X_i, X_{i+1})]`
//!   with `X ~ N(0, Σ)` sampled through a Cholesky factor.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::PiecewiseAffineBoundary;
use crate::bridge::{noncross_affine, noncross_constant, BridgeSpec};
use crate::error::{Error, Result};
use crate::numerics::{cholesky, gaussian_stream, GaussLegendre};
use crate::process::ProcessParams;
use crate::scalar::Real;

/// Tensor quadrature handles integral dimension `n + 1 <= 5`.
pub const MAX_TENSOR_PIECES: usize = 4;

/// Lower truncation offset below `min(g(t_i), 0)`.
pub const TRUNCATION_DEPTH: f64 = 8.0;

/// Samples per random stream in [`bcp_montecarlo`].
pub const MC_BLOCK: usize = 8192;

const TENSOR_ORDERS: [usize; 9] = [8, 12, 16, 24, 32, 48, 64, 96, 128];
const TENSOR_POINT_BUDGET: usize = 60_000_000;
const NESTED_PANELS: [usize; 10] = [2, 3, 4, 6, 8, 12, 16, 24, 32, 48];
const NESTED_PANEL_ORDER: usize = 8;
const NESTED_FLOP_BUDGET: f64 = 6.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "quad")]
    Quadrature,
    Nested,
    #[serde(rename = "mc")]
    MonteCarlo,
    #[serde(rename = "oracle")]
    PathSimulation,
    #[serde(rename = "analytic")]
    ClosedForm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Quadrature => "quad",
            Method::Nested => "nested",
            Method::MonteCarlo => "mc",
            Method::PathSimulation => "oracle",
            Method::ClosedForm => "analytic",
        })
    }
}

/// A probability with its error indication: quadrature refinement
/// difference, Monte-Carlo standard error, or binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub method: Method,
    /// Quadrature nodes or samples used.
    pub evaluations: usize,
    pub seed: Option<u64>,
}

/// `q = t_0 < t_1 < … < t_n = d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    params: ProcessParams<T>,
    times: Vec<T>,
}

impl<T: Real> Partition<T> {
    pub fn new(params: ProcessParams<T>, times: Vec<T>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidArgument("partition needs at least t_0 and t_n".into()));
        }
        if times[0] != params.q() || times[times.len() - 1] != params.d() {
            return Err(Error::InvalidArgument(format!(
                "partition must start at q = {} and end at d = {}",
                params.q(),
                params.d()
            )));
        }
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Ordering(format!("{} then {}", w[0], w[1])));
            }
        }
        Ok(Self { params, times })
    }

    pub fn equidistant(params: ProcessParams<T>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("partition needs n >= 1 intervals".into()));
        }
        let (q, d) = (params.q(), params.d());
        let times = (0..=n)
            .map(|k| {
                if k == n {
                    d
                } else {
                    q + (d - q) * T::from_usize_lossy(k) / T::from_usize_lossy(n)
                }
            })
            .collect();
        Self::new(params, times)
    }

    /// The boundary's own knots: the coarsest admissible partition.
    pub fn from_boundary(boundary: &PiecewiseAffineBoundary<T>) -> Self {
        Self {
            params: *boundary.params(),
            times: boundary.knots(),
        }
    }

    /// Union of the boundary knots and `extra` (times inside `(q, d)`).
    pub fn with_boundary_knots(boundary: &PiecewiseAffineBoundary<T>, extra: &[T]) -> Result<Self> {
        let mut times = boundary.knots();
        for &t in extra {
            boundary.params().check_time(t)?;
            times.push(t);
        }
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        times.dedup();
        Self::new(*boundary.params(), times)
    }

    pub fn params(&self) -> &ProcessParams<T> {
        &self.params
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    /// Number of intervals.
    pub fn n(&self) -> usize {
        self.times.len() - 1
    }
}

/// Boundary data for one partition interval.
#[derive(Debug, Clone, Copy)]
struct Segment<T> {
    t_start: T,
    t_end: T,
    intercept: T,
    slope: T,
}

/// Boundary seen through a partition: segment pieces and knot limits.
#[derive(Debug, Clone)]
struct Layout<T> {
    params: ProcessParams<T>,
    times: Vec<T>,
    segments: Vec<Segment<T>>,
    upper: Vec<T>,
}

impl<T: Real> Layout<T> {
    fn new(boundary: &PiecewiseAffineBoundary<T>, partition: &Partition<T>) -> Result<Self> {
        if boundary.params() != partition.params() {
            return Err(Error::InvalidArgument(
                "boundary and partition use different process parameters".into(),
            ));
        }
        let times = partition.times().to_vec();
        for &knot in &boundary.knots() {
            if !times.contains(&knot) {
                return Err(Error::KnotMismatch(knot.as_f64()));
            }
        }
        let segments = times
            .windows(2)
            .map(|w| {
                let piece = boundary
                    .piece_covering(w[0], w[1])
                    .ok_or(Error::KnotMismatch(w[0].as_f64()))?;
                Ok(Segment {
                    t_start: w[0],
                    t_end: w[1],
                    intercept: piece.value_at(w[0]),
                    slope: piece.slope,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let upper = times.iter().map(|&t| boundary.evaluate(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *partition.params(),
            times,
            segments,
            upper,
        })
    }

    fn n(&self) -> usize {
        self.segments.len()
    }

    fn lower(&self, i: usize) -> T {
        self.upper[i].min(T::zero()) - T::lit(TRUNCATION_DEPTH)
    }

    fn inside(&self, x: &[T]) -> bool {
        x.iter().zip(&self.upper).all(|(xi, ui)| xi <= ui)
    }

    /// Non-crossing probability of segment `i` pinned at `(x, y)`.
    fn bridge(&self, i: usize, x: T, y: T) -> Result<T> {
        let seg = &self.segments[i];
        let h = seg.t_end - seg.t_start;
        if x >= seg.intercept || y >= seg.intercept + seg.slope * h {
            return Ok(T::zero());
        }
        let spec = BridgeSpec::new(self.params, seg.t_start, seg.t_end, x, y)?;
        if seg.slope == T::zero() {
            noncross_constant(&spec, seg.intercept)
        } else {
            noncross_affine(&spec, seg.intercept, seg.slope)
        }
    }

    /// `table[j * len + l] = bridge(i, a[j], b[l])`, skipping pairs whose
    /// weight `mask(j, l)` is zero.
    fn bridge_table<M: Fn(usize, usize) -> bool + Sync>(&self, i: usize, a: &[T], b: &[T], mask: M) -> Result<Vec<T>> {
        let rows = a
            .par_iter()
            .enumerate()
            .map(|(j, &x)| {
                b.iter()
                    .enumerate()
                    .map(|(l, &y)| if mask(j, l) { self.bridge(i, x, y) } else { Ok(T::zero()) })
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(rows.into_iter().flatten().collect())
    }

    /// Log of the product of the Gaussian factors of the integrand.
    fn ln_gaussian_part(&self, ln_const: T, x: &[T]) -> T {
        let q = self.params.q();
        let d = self.params.d();
        let n = self.n();
        let quarter_q = T::lit(0.25) * q;
        let (x0, xn) = (x[0], x[n]);
        let mut exponent = (x0 + xn).powi(2) / (T::lit(3.0) * q - d) + (x0 - xn).powi(2) / (d - q);
        for i in 1..n {
            let ti = self.times[i];
            let tj = self.times[i + 1];
            exponent = exponent + (x[i] - x0).powi(2) / (ti - q) + (x[i + 1] - x[i]).powi(2) / (tj - ti)
                - (x[i + 1] - x0).powi(2) / (tj - q);
        }
        ln_const - quarter_q * exponent
    }

    /// `ln c + ln ∏ √(t_{i+1}-q)/√((t_{i+1}-t_i)(t_i-q))`.
    fn ln_prefactor(&self) -> T {
        let q = self.params.q();
        let d = self.params.d();
        let n = self.n();
        let half = T::lit(0.5);
        let np1 = T::from_usize_lossy(n + 1);
        let mut ln_c = half * np1 * q.ln()
            - T::from_usize_lossy(n) * T::LN_2()
            - half * np1 * T::PI().ln()
            - half * ((T::lit(3.0) * q - d) * (d - q)).ln();
        for i in 1..n {
            let ti = self.times[i];
            let tj = self.times[i + 1];
            ln_c = ln_c + half * ((tj - q).ln() - (tj - ti).ln() - (ti - q).ln());
        }
        ln_c
    }
}

/// The full integrand at `x = (x_0, …, x_n)`; zero outside the orthant
/// `x_i <= g(t_i)`.
pub fn theorem1_integrand<T: Real>(
    partition: &Partition<T>,
    boundary: &PiecewiseAffineBoundary<T>,
    x: &[T],
) -> Result<T> {
    let layout = Layout::new(boundary, partition)?;
    let n = layout.n();
    if x.len() != n + 1 {
        return Err(Error::InvalidArgument(format!("{} values for {} knots", x.len(), n + 1)));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite integrand argument".into()));
    }
    if !layout.inside(x) {
        return Ok(T::zero());
    }
    let mut value = layout.ln_gaussian_part(layout.ln_prefactor(), x).exp();
    for i in 0..n {
        value = value * layout.bridge(i, x[i], x[i + 1])?;
    }
    Ok(value)
}

fn check_tol<T: Real>(tol: T) -> Result<()> {
    if tol > T::zero() && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")))
    }
}

fn finish<T: Real>(noncross: T, error: T, method: Method, evaluations: usize) -> Estimate<T> {
    Estimate {
        value: (T::one() - noncross).max(T::zero()).min(T::one()),
        error,
        method,
        evaluations,
        seed: None,
    }
}

/// Tensor-product Gauss–Legendre evaluation of the `(n+1)`-dimensional
/// integral, refining the per-axis order until successive values differ by
/// at most `tol`.
pub fn bcp_quadrature<T: Real>(
    boundary: &PiecewiseAffineBoundary<T>,
    partition: &Partition<T>,
    tol: T,
) -> Result<Estimate<T>> {
    check_tol(tol)?;
    let layout = Layout::new(boundary, partition)?;
    let n = layout.n();
    if n > MAX_TENSOR_PIECES {
        return Err(Error::DimensionTooLarge {
            dimension: n + 1,
            max: MAX_TENSOR_PIECES + 1,
        });
    }
    let dim = n + 1;
    let ln_const = layout.ln_prefactor();
    let mut previous: Option<T> = None;
    let mut evaluations = 0usize;
    let mut last = (T::zero(), T::infinity());
    for &order in &TENSOR_ORDERS {
        let points = order.pow(dim as u32);
        if evaluations + points > TENSOR_POINT_BUDGET {
            break;
        }
        let base = GaussLegendre::<T>::new(order);
        let rules: Vec<GaussLegendre<T>> = (0..dim)
            .map(|i| base.on_interval(layout.lower(i), layout.upper[i]))
            .collect();
        let tables = (0..n)
            .map(|i| layout.bridge_table(i, &rules[i].nodes, &rules[i + 1].nodes, |_, _| true))
            .collect::<Result<Vec<_>>>()?;
        let partial: Vec<T> = (0..order)
            .into_par_iter()
            .map(|j0| {
                let mut idx = vec![0usize; dim];
                idx[0] = j0;
                let mut x = vec![T::zero(); dim];
                let mut sum = T::zero();
                loop {
                    let mut w = T::one();
                    for k in 0..dim {
                        x[k] = rules[k].nodes[idx[k]];
                        w = w * rules[k].weights[idx[k]];
                    }
                    let mut f = layout.ln_gaussian_part(ln_const, &x).exp();
                    for i in 0..n {
                        f = f * tables[i][idx[i] * order + idx[i + 1]];
                    }
                    sum = sum + w * f;
                    // Odometer over axes 1..dim.
                    let mut k = dim - 1;
                    loop {
                        if k == 0 {
                            return sum;
                        }
                        idx[k] += 1;
                        if idx[k] < order {
                            break;
                        }
                        idx[k] = 0;
                        k -= 1;
                    }
                }
            })
            .collect();
        let value: T = partial.into_iter().sum();
        evaluations += points;
        if let Some(prev) = previous {
            let diff = (value - prev).abs();
            last = (value, diff);
            if diff <= tol {
                return Ok(finish(value, diff, Method::Quadrature, evaluations));
            }
        }
        previous = Some(value);
    }
    Err(Error::NonConvergence {
        value: (T::one() - last.0).as_f64(),
        error_bound: last.1.as_f64(),
        evaluations,
    })
}

/// Iterated quadrature of the same integral along the conditioning chain:
/// integrate out `x_1`, then `x_2`, … , leaving a kernel in `(x_0, x_n)`.
/// Cost grows like `n N³` in the per-axis node count `N`.
pub fn bcp_nested<T: Real>(
    boundary: &PiecewiseAffineBoundary<T>,
    partition: &Partition<T>,
    tol: T,
) -> Result<Estimate<T>> {
    check_tol(tol)?;
    let layout = Layout::new(boundary, partition)?;
    let n = layout.n();
    let base = GaussLegendre::<T>::new(NESTED_PANEL_ORDER);
    let mut previous: Option<T> = None;
    let mut last = (T::zero(), T::infinity());
    let mut evaluations = 0usize;
    let mut flops = 0.0;
    for &panels in &NESTED_PANELS {
        let size = panels * NESTED_PANEL_ORDER;
        let cost = (n.max(1) as f64) * (size as f64).powi(3);
        if flops + cost > NESTED_FLOP_BUDGET {
            break;
        }
        flops += cost;
        let rules: Vec<GaussLegendre<T>> = (0..=n)
            .map(|i| base.composite(layout.lower(i), layout.upper[i], panels))
            .collect();
        let value = nested_level(&layout, &rules)?;
        evaluations += (n + 1) * size;
        if let Some(prev) = previous {
            let diff = (value - prev).abs();
            last = (value, diff);
            if diff <= tol {
                return Ok(finish(value, diff, Method::Nested, evaluations));
            }
        }
        previous = Some(value);
    }
    Err(Error::NonConvergence {
        value: (T::one() - last.0).as_f64(),
        error_bound: last.1.as_f64(),
        evaluations,
    })
}

/// Transition weights below `exp(-CUTOFF)` are dropped.
const KERNEL_CUTOFF: f64 = 700.0;

fn nested_level<T: Real>(layout: &Layout<T>, rules: &[GaussLegendre<T>]) -> Result<T> {
    let q = layout.params.q();
    let d = layout.params.d();
    let n = layout.n();
    let t = &layout.times;
    let size = rules[0].len();
    let quarter_q = T::lit(0.25) * q;
    let cutoff = T::lit(KERNEL_CUTOFF);
    let z = |k: usize, j: usize| rules[k].nodes[j];

    // Gaussian factor exp(-q/4 (y - x)²/gap) between grids k and k+1.
    let kernel = |k: usize, gap: T| -> Vec<T> {
        let mut out = vec![T::zero(); size * size];
        for j in 0..size {
            for l in 0..size {
                let e = quarter_q * (z(k + 1, l) - z(k, j)).powi(2) / gap;
                if e < cutoff {
                    out[j * size + l] = (-e).exp();
                }
            }
        }
        out
    };

    // H_1(x_0, x_1) = bridge_0(x_0, x_1) · exp(-q/4 (x_1 - x_0)²/(t_1 - q)).
    let k0 = kernel(0, t[1] - q);
    let b0 = layout.bridge_table(0, &rules[0].nodes, &rules[1].nodes, |j, l| k0[j * size + l] > T::zero())?;
    let mut h: Vec<T> = b0.iter().zip(&k0).map(|(&b, &k)| b * k).collect();

    for k in 1..n {
        let alpha = t[k] - q;
        let beta = t[k + 1] - t[k];
        let alpha_next = t[k + 1] - q;
        // Prefactor of the conditional density of x_k given (x_0, x_{k+1}).
        let c = (q * alpha_next).sqrt() / (T::lit(2.0) * (T::PI() * beta * alpha).sqrt());
        let kk = kernel(k, beta);
        let bk = layout.bridge_table(k, &rules[k].nodes, &rules[k + 1].nodes, |j, l| kk[j * size + l] > T::zero())?;
        let w = &rules[k].weights;
        let m: Vec<T> = (0..size * size)
            .map(|idx| c * w[idx / size] * bk[idx] * kk[idx])
            .collect();
        h = h
            .par_chunks(size)
            .flat_map_iter(|row| {
                let mut out = vec![T::zero(); size];
                for (j, &hj) in row.iter().enumerate() {
                    if hj == T::zero() {
                        continue;
                    }
                    let mrow = &m[j * size..(j + 1) * size];
                    for (o, &mv) in out.iter_mut().zip(mrow) {
                        *o = *o + hj * mv;
                    }
                }
                out
            })
            .collect();
    }

    // Pair density with the (x_0 - x_n)² part already carried by H_n.
    let pair_const = q / (T::lit(2.0) * T::PI() * ((T::lit(3.0) * q - d) * (d - q)).sqrt());
    let span = T::lit(3.0) * q - d;
    let total: T = (0..size)
        .map(|a| {
            let x0 = z(0, a);
            let inner: T = (0..size)
                .map(|l| {
                    let xn = z(n, l);
                    rules[n].weights[l] * (-quarter_q * (x0 + xn).powi(2) / span).exp() * h[a * size + l]
                })
                .sum();
            rules[0].weights[a] * inner
        })
        .sum();
    Ok(pair_const * total)
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn empty() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, y: f64) {
        self.count += 1;
        let delta = y - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (y - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64) * (other.count as f64) / count as f64;
        Self { count, mean, m2 }
    }
}

/// Monte-Carlo estimate from `n_paths` Gaussian knot vectors. Block `k` of
/// [`MC_BLOCK`] samples reads stream `k` of `seed`, so the result does not
/// depend on the number of worker threads.
pub fn bcp_montecarlo<T: Real>(
    boundary: &PiecewiseAffineBoundary<T>,
    partition: &Partition<T>,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate<T>> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
    }
    let layout = Layout::new(boundary, partition)?;
    let dim = layout.n() + 1;
    let sigma = layout.params.covariance_matrix(&layout.times)?;
    let chol = cholesky(&sigma, dim)?;
    let blocks = n_paths.div_ceil(MC_BLOCK);
    let per_block = (0..blocks)
        .into_par_iter()
        .map(|blk| -> Result<Moments> {
            let count = MC_BLOCK.min(n_paths - blk * MC_BLOCK);
            let mut stream = gaussian_stream(seed, blk as u64);
            let mut z = vec![T::zero(); dim];
            let mut x = vec![T::zero(); dim];
            let mut acc = Moments::empty();
            for _ in 0..count {
                for zi in z.iter_mut() {
                    *zi = T::lit(stream.next_normal());
                }
                chol.mul_vec_into(&z, &mut x);
                let mut weight = T::zero();
                if layout.inside(&x) {
                    weight = T::one();
                    for i in 0..dim - 1 {
                        weight = weight * layout.bridge(i, x[i], x[i + 1])?;
                        if weight == T::zero() {
                            break;
                        }
                    }
                }
                acc.push(weight.as_f64());
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = per_block.into_iter().fold(Moments::empty(), Moments::merge);
    let se = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        value: T::lit((1.0 - total.mean).clamp(0.0, 1.0)),
        error: T::lit(se),
        method: Method::MonteCarlo,
        evaluations: n_paths,
        seed: Some(seed),
    })
}
