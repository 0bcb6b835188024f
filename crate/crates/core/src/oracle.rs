//! Brute-force path simulation used to validate the analytic routines.
//!
//! Paths come from `W_t = (B_t - B_{t-q})/√q` with B a Brownian motion built
//! from independent `N(0, Δ)` increments on a grid of step Δ. Crossings are
//! detected at grid nodes only, so crossing probabilities are biased low,
//! by roughly `√Δ`.

use std::io::Write;

use rayon::prelude::*;

use crate::boundary::PiecewiseAffineBoundary;
use crate::bridge::BridgeSpec;
use crate::engine::{Estimate, Method};
use crate::error::{Error, Result};
use crate::numerics::gaussian_stream;
use crate::process::ProcessParams;
use crate::scalar::Real;

const PATH_CHUNK: usize = 1024;

fn steps_in<T: Real>(span: T, step: T, what: &str) -> Result<usize> {
    let ratio = span / step;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > T::lit(1e-6) * ratio.max(T::one()) || rounded < T::one() {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} does not divide {what} = {span}"
        )));
    }
    rounded
        .to_usize()
        .ok_or_else(|| Error::InvalidArgument(format!("grid for {what} too large")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    params: ProcessParams<T>,
    grid_step: T,
    n_paths: usize,
    seed: u64,
    window_steps: usize,
    span_steps: usize,
}

impl<T: Real> SimConfig<T> {
    /// `grid_step` must divide both `q` and `d - q` and be at most
    /// `(d - q)/10`.
    pub fn new(params: ProcessParams<T>, grid_step: T, n_paths: usize, seed: u64) -> Result<Self> {
        if !(grid_step > T::zero()) {
            return Err(Error::InvalidArgument(format!("grid step {grid_step} must be positive")));
        }
        let span = params.d() - params.q();
        if grid_step > span / T::lit(10.0) * (T::one() + T::lit(1e-9)) {
            return Err(Error::InvalidArgument(format!(
                "grid step {grid_step} coarser than (d - q)/10"
            )));
        }
        if n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
        }
        let window_steps = steps_in(params.q(), grid_step, "q")?;
        let span_steps = steps_in(span, grid_step, "d - q")?;
        Ok(Self {
            params,
            grid_step,
            n_paths,
            seed,
            window_steps,
            span_steps,
        })
    }

    pub fn params(&self) -> &ProcessParams<T> {
        &self.params
    }

    pub fn grid_step(&self) -> T {
        self.grid_step
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of grid intervals in `[q, d]`.
    pub fn span_steps(&self) -> usize {
        self.span_steps
    }
}

/// Values of W at grid nodes `q + kΔ` from one Brownian path on
/// `[0, (window + span)Δ]`.
fn simulate_window<T: Real>(seed: u64, path: usize, step: T, window: usize, span: usize, q: T, out: &mut Vec<T>) {
    let mut stream = gaussian_stream(seed, path as u64);
    let scale = step.sqrt();
    let total = window + span;
    let mut b = Vec::with_capacity(total + 1);
    let mut acc = T::zero();
    b.push(acc);
    for _ in 0..total {
        acc = acc + scale * T::lit(stream.next_normal());
        b.push(acc);
    }
    let norm = q.sqrt().recip();
    out.clear();
    out.extend((0..=span).map(|k| (b[k + window] - b[k]) * norm));
}

/// Lazily simulated ensemble; path `i` depends only on `(seed, i)`.
#[derive(Debug, Clone, Copy)]
pub struct PathEnsemble<T> {
    cfg: SimConfig<T>,
}

pub fn simulate_paths<T: Real>(cfg: &SimConfig<T>) -> PathEnsemble<T> {
    PathEnsemble { cfg: *cfg }
}

impl<T: Real> PathEnsemble<T> {
    pub fn len(&self) -> usize {
        self.cfg.n_paths
    }

    pub fn is_empty(&self) -> bool {
        self.cfg.n_paths == 0
    }

    /// Grid times `q, q + Δ, …, d`.
    pub fn times(&self) -> Vec<T> {
        let c = &self.cfg;
        (0..=c.span_steps)
            .map(|k| {
                if k == c.span_steps {
                    c.params.d()
                } else {
                    c.params.q() + c.grid_step * T::from_usize_lossy(k)
                }
            })
            .collect()
    }

    pub fn path(&self, index: usize) -> Vec<T> {
        let mut out = Vec::new();
        self.path_into(index, &mut out);
        out
    }

    fn path_into(&self, index: usize, out: &mut Vec<T>) {
        let c = &self.cfg;
        simulate_window(c.seed, index, c.grid_step, c.window_steps, c.span_steps, c.params.q(), out);
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<T>> + '_ {
        (0..self.cfg.n_paths).map(move |i| self.path(i))
    }

    /// Delimited dump: a header `path,t_0,…,t_K` then one row per path.
    pub fn write_csv<W: Write>(&self, out: &mut W, limit: usize) -> std::io::Result<()> {
        let times = self.times();
        write!(out, "path")?;
        for t in &times {
            write!(out, ",{}", t.as_f64())?;
        }
        writeln!(out)?;
        for i in 0..self.cfg.n_paths.min(limit) {
            write!(out, "{i}")?;
            for v in self.path(i) {
                write!(out, ",{}", v.as_f64())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Count paths per stride for which `crossed(path, stride)` holds.
    fn count<F>(&self, strides: &[usize], crossed: F) -> Vec<usize>
    where
        F: Fn(&[T], usize) -> bool + Sync,
    {
        let chunks = self.cfg.n_paths.div_ceil(PATH_CHUNK);
        let per_chunk: Vec<Vec<usize>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut counts = vec![0usize; strides.len()];
                let mut buf = Vec::new();
                for i in c * PATH_CHUNK..((c + 1) * PATH_CHUNK).min(self.cfg.n_paths) {
                    self.path_into(i, &mut buf);
                    for (slot, &s) in counts.iter_mut().zip(strides) {
                        if crossed(&buf, s) {
                            *slot += 1;
                        }
                    }
                }
                counts
            })
            .collect();
        per_chunk.into_iter().fold(vec![0; strides.len()], |mut acc, c| {
            acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
            acc
        })
    }
}

fn check_strides(span_steps: usize, strides: &[usize]) -> Result<()> {
    for &s in strides {
        if s == 0 || !span_steps.is_multiple_of(s) {
            return Err(Error::InvalidArgument(format!(
                "stride {s} does not divide the {span_steps} grid intervals"
            )));
        }
    }
    Ok(())
}

fn binomial<T: Real>(count: usize, n: usize, seed: u64) -> Estimate<T> {
    let p = count as f64 / n as f64;
    Estimate {
        value: T::lit(p),
        error: T::lit((p * (1.0 - p) / n as f64).sqrt()),
        method: Method::PathSimulation,
        evaluations: n,
        seed: Some(seed),
    }
}

/// Fraction of simulated paths exceeding `g` at some grid node.
pub fn empirical_bcp<T: Real>(cfg: &SimConfig<T>, boundary: &PiecewiseAffineBoundary<T>) -> Result<Estimate<T>> {
    Ok(empirical_bcp_multigrid(cfg, boundary, &[1])?.remove(0))
}

/// [`empirical_bcp`] on the sub-grids of every `stride`-th node of the same
/// paths, so coarser estimates never exceed finer ones.
pub fn empirical_bcp_multigrid<T: Real>(
    cfg: &SimConfig<T>,
    boundary: &PiecewiseAffineBoundary<T>,
    strides: &[usize],
) -> Result<Vec<Estimate<T>>> {
    if boundary.params() != cfg.params() {
        return Err(Error::InvalidArgument(
            "boundary and simulation use different process parameters".into(),
        ));
    }
    check_strides(cfg.span_steps, strides)?;
    let ensemble = simulate_paths(cfg);
    let g = ensemble
        .times()
        .into_iter()
        .map(|t| boundary.evaluate(t))
        .collect::<Result<Vec<T>>>()?;
    let counts = ensemble.count(strides, |w, s| w.iter().zip(&g).step_by(s).any(|(x, b)| x > b));
    Ok(counts.into_iter().map(|c| binomial(c, cfg.n_paths, cfg.seed)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSample<T> {
    pub lag: T,
    pub value: T,
    pub std_error: T,
}

/// Sample second moment of `(W_q, W_{q+lag})` for each lag (a multiple of
/// the grid step), with its empirical standard error.
pub fn empirical_covariance<T: Real>(cfg: &SimConfig<T>, lags: &[T]) -> Result<Vec<CovarianceSample<T>>> {
    let steps = lags
        .iter()
        .map(|&lag| {
            if lag == T::zero() {
                Ok(0)
            } else {
                let k = steps_in(lag, cfg.grid_step, "lag")?;
                if k > cfg.span_steps {
                    Err(Error::InvalidArgument(format!("lag {lag} exceeds d - q")))
                } else {
                    Ok(k)
                }
            }
        })
        .collect::<Result<Vec<usize>>>()?;
    let ensemble = simulate_paths(cfg);
    let chunks = cfg.n_paths.div_ceil(PATH_CHUNK);
    let sums: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![(0.0, 0.0); steps.len()];
            let mut buf = Vec::new();
            for i in c * PATH_CHUNK..((c + 1) * PATH_CHUNK).min(cfg.n_paths) {
                ensemble.path_into(i, &mut buf);
                for (a, &k) in acc.iter_mut().zip(&steps) {
                    let prod = (buf[0] * buf[k]).as_f64();
                    a.0 += prod;
                    a.1 += prod * prod;
                }
            }
            acc
        })
        .collect();
    let n = cfg.n_paths as f64;
    Ok(lags
        .iter()
        .enumerate()
        .map(|(j, &lag)| {
            let (s1, s2) = sums.iter().fold((0.0, 0.0), |acc, c| (acc.0 + c[j].0, acc.1 + c[j].1));
            let mean = s1 / n;
            let var = ((s2 - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
            CovarianceSample {
                lag,
                value: T::lit(mean),
                std_error: T::lit((var / n).sqrt()),
            }
        })
        .collect())
}

/// Non-crossing fraction of simulated bridges under `b + a (t - t_i)`.
pub fn empirical_bridge_noncross<T: Real>(
    spec: &BridgeSpec<T>,
    intercept: T,
    slope: T,
    n_paths: usize,
    grid_step: T,
    seed: u64,
) -> Result<Estimate<T>> {
    Ok(empirical_bridge_noncross_multigrid(spec, intercept, slope, n_paths, grid_step, seed, &[1])?.remove(0))
}

/// Paths on `[t_i, t_i1]` are simulated unconditionally (shifted to
/// `[q, q + h]` by stationarity) and pinned by Gaussian conditioning on the
/// endpoint values: `W + Σ_{t,e} Σ_{e,e}⁻¹ (x - W_e)`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_bridge_noncross_multigrid<T: Real>(
    spec: &BridgeSpec<T>,
    intercept: T,
    slope: T,
    n_paths: usize,
    grid_step: T,
    seed: u64,
    strides: &[usize],
) -> Result<Vec<Estimate<T>>> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
    }
    if !(grid_step > T::zero()) {
        return Err(Error::InvalidArgument(format!("grid step {grid_step} must be positive")));
    }
    let params = spec.params();
    let h = spec.h();
    let (xi, xj) = (spec.x_start(), spec.x_end());
    if xi >= intercept || xj >= intercept + slope * h {
        return Ok(strides
            .iter()
            .map(|_| Estimate {
                value: T::zero(),
                error: T::zero(),
                method: Method::PathSimulation,
                evaluations: n_paths,
                seed: Some(seed),
            })
            .collect());
    }
    let window = steps_in(params.q(), grid_step, "q")?;
    let span = steps_in(h, grid_step, "h")?;
    check_strides(span, strides)?;
    let rho = params.covariance_at_lag(h);
    let det = T::one() - rho * rho;
    if !(det > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            row: 1,
            pivot: det.as_f64(),
        });
    }
    let mut lambda = Vec::with_capacity(span + 1);
    let mut level = Vec::with_capacity(span + 1);
    for k in 0..=span {
        let s = grid_step * T::from_usize_lossy(k);
        let c1 = params.covariance_at_lag(s);
        let c2 = params.covariance_at_lag(h - s);
        let l1 = (c1 - rho * c2) / det;
        let l2 = (c2 - rho * c1) / det;
        let cond_var = T::one() - (c1 * l1 + c2 * l2);
        if cond_var < -T::lit(1e-10) {
            return Err(Error::NotPositiveDefinite {
                row: k,
                pivot: cond_var.as_f64(),
            });
        }
        lambda.push((l1, l2));
        level.push(intercept + slope * s);
    }
    let chunks = n_paths.div_ceil(PATH_CHUNK);
    let per_chunk: Vec<Vec<usize>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut crossed = vec![0usize; strides.len()];
            let mut w = Vec::new();
            for i in c * PATH_CHUNK..((c + 1) * PATH_CHUNK).min(n_paths) {
                simulate_window(seed, i, grid_step, window, span, params.q(), &mut w);
                let (d0, d1) = (xi - w[0], xj - w[span]);
                for (slot, &s) in crossed.iter_mut().zip(strides) {
                    let hit = (0..=span)
                        .step_by(s)
                        .any(|k| w[k] + lambda[k].0 * d0 + lambda[k].1 * d1 > level[k]);
                    if hit {
                        *slot += 1;
                    }
                }
            }
            crossed
        })
        .collect();
    let totals = per_chunk.into_iter().fold(vec![0; strides.len()], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        acc
    });
    Ok(totals
        .into_iter()
        .map(|crossed| binomial(n_paths - crossed, n_paths, seed))
        .collect())
}
