//! The (q,d)-Slepian process: parameters, covariance, rescaling to the
//! canonical window `[1, e]` and the Gaussian finite-dimensional densities.
//!
//! W on `[q, d]` has the law of `u ↦ W'(u)` with `u = t/q`, where W' is the
//! canonical Slepian process on `[1, d/q]`. Only time is rescaled; the values
//! keep unit marginal variance, so densities in `x` carry no Jacobian.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Window length `q` and horizon `d` with `0 < q < d <= 2q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessParams<T> {
    q: T,
    d: T,
}

impl<T: Real> ProcessParams<T> {
    pub fn new(q: T, d: T) -> Result<Self> {
        let ok = q.is_finite() && d.is_finite() && q > T::zero() && q < d && d <= q + q;
        if !ok {
            return Err(Error::InvalidParams {
                q: q.as_f64(),
                d: d.as_f64(),
            });
        }
        Ok(Self { q, d })
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn d(&self) -> T {
        self.d
    }

    /// `e = d/q`, the right end of the canonical window.
    pub fn e(&self) -> T {
        self.d / self.q
    }

    pub fn contains(&self, t: T) -> bool {
        t >= self.q && t <= self.d
    }

    pub fn check_time(&self, t: T) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain {
                t: t.as_f64(),
                lo: self.q.as_f64(),
                hi: self.d.as_f64(),
            })
        }
    }

    /// `(1 - |t - s|/q)^+`.
    pub fn covariance(&self, s: T, t: T) -> Result<T> {
        self.check_time(s)?;
        self.check_time(t)?;
        Ok(self.covariance_at_lag((t - s).abs()))
    }

    pub fn covariance_at_lag(&self, lag: T) -> T {
        (T::one() - lag.abs() / self.q).positive_part()
    }

    /// `(e, u) = (d/q, t/q)`.
    pub fn rescale(&self, t: T) -> Result<(T, T)> {
        self.check_time(t)?;
        Ok((self.e(), t / self.q))
    }

    /// Inverse of [`rescale`](Self::rescale): canonical `u` back to `t = u q`.
    pub fn unscale(&self, u: T) -> T {
        u * self.q
    }

    /// The same process on the canonical window `[1, e]`.
    pub fn canonical(&self) -> Self {
        Self {
            q: T::one(),
            d: self.e(),
        }
    }

    /// Row-major covariance matrix at the given times.
    pub fn covariance_matrix(&self, times: &[T]) -> Result<Vec<T>> {
        let m = times.len();
        let mut out = Vec::with_capacity(m * m);
        for &s in times {
            for &t in times {
                out.push(self.covariance(s, t)?);
            }
        }
        Ok(out)
    }
}

/// Strictly increasing times in `[q, d]` at which the process is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVectorSpec<T> {
    params: ProcessParams<T>,
    times: Vec<T>,
}

impl<T: Real> GaussianVectorSpec<T> {
    pub fn new(params: ProcessParams<T>, times: Vec<T>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArgument("at least one time point required".into()));
        }
        for &t in &times {
            params.check_time(t)?;
        }
        for w in times.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DegenerateTimes(w[0].as_f64()));
            }
            if w[0] > w[1] {
                return Err(Error::Ordering(format!("{} follows {}", w[1], w[0])));
            }
        }
        Ok(Self { params, times })
    }

    pub fn params(&self) -> &ProcessParams<T> {
        &self.params
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }
}

fn ln_pi<T: Real>() -> T {
    T::PI().ln()
}

/// Log of the joint density of `(W_{s_1}, …, W_{s_m})` at `x`.
pub fn ln_fdd_density<T: Real>(spec: &GaussianVectorSpec<T>, x: &[T]) -> Result<T> {
    let m = spec.times.len();
    if x.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} values for {} time points",
            x.len(),
            m
        )));
    }
    let quarter = T::lit(0.25);
    let half = T::lit(0.5);
    if m == 1 {
        return Ok(-half * x[0] * x[0] - half * (T::lit(2.0) * T::PI()).ln());
    }
    let q = spec.params.q;
    let u: Vec<T> = spec.times.iter().map(|&t| t / q).collect();
    let span = T::lit(2.0) - u[m - 1] + u[0];
    let mut log_norm = -T::from_usize_lossy(m - 1) * T::LN_2()
        - half * T::from_usize_lossy(m) * ln_pi::<T>()
        - half * span.ln();
    let mut quad = (x[0] + x[m - 1]).powi(2) / span;
    for i in 1..m {
        let gap = u[i] - u[i - 1];
        log_norm = log_norm - half * gap.ln();
        quad = quad + (x[i] - x[i - 1]).powi(2) / gap;
    }
    Ok(log_norm - quarter * quad)
}

/// Joint density of `(W_{s_1}, …, W_{s_m})`; standard normal for `m = 1`.
pub fn fdd_density<T: Real>(spec: &GaussianVectorSpec<T>, x: &[T]) -> Result<T> {
    ln_fdd_density(spec, x).map(|v| v.exp())
}

fn check_anchor<T: Real>(params: &ProcessParams<T>, t0: T) -> Result<()> {
    let q = params.q;
    if (t0 - q).abs() > T::lit(4.0) * T::epsilon() * q {
        return Err(Error::Precondition(format!(
            "densities are anchored at t0 = q = {q}, got {t0}"
        )));
    }
    Ok(())
}

pub fn ln_pair_density<T: Real>(params: &ProcessParams<T>, t0: T, ti: T, x0: T, xi: T) -> Result<T> {
    check_anchor(params, t0)?;
    if !(ti > params.q && ti <= params.d) {
        return Err(Error::Domain {
            t: ti.as_f64(),
            lo: params.q.as_f64(),
            hi: params.d.as_f64(),
        });
    }
    let u = ti / params.q;
    let left = T::lit(3.0) - u;
    let right = u - T::one();
    let quarter = T::lit(0.25);
    Ok(-(T::lit(2.0) * T::PI()).ln()
        - T::lit(0.5) * (left * right).ln()
        - quarter * ((x0 + xi).powi(2) / left + (x0 - xi).powi(2) / right))
}

/// Density of `(W_q, W_{ti})` at `(x0, xi)`.
pub fn pair_density<T: Real>(params: &ProcessParams<T>, t0: T, ti: T, x0: T, xi: T) -> Result<T> {
    ln_pair_density(params, t0, ti, x0, xi).map(|v| v.exp())
}

#[allow(clippy::too_many_arguments)]
pub fn ln_conditional_density<T: Real>(
    params: &ProcessParams<T>,
    t0: T,
    ti: T,
    ti1: T,
    x0: T,
    xi: T,
    xi1: T,
) -> Result<T> {
    check_anchor(params, t0)?;
    if !(params.q < ti && ti < ti1 && ti1 <= params.d) {
        return Err(Error::Ordering(format!(
            "need q = {} < ti = {ti} < ti1 = {ti1} <= d = {}",
            params.q, params.d
        )));
    }
    let q = params.q;
    let a = (ti - q) / q;
    let b = (ti1 - ti) / q;
    let ab = (ti1 - q) / q;
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    Ok(half * ab.ln()
        - T::LN_2()
        - half * (ln_pi::<T>() + b.ln() + a.ln())
        - quarter * ((xi - x0).powi(2) / a + (xi1 - xi).powi(2) / b - (xi1 - x0).powi(2) / ab))
}

/// Density of `W_{ti}` at `xi` given `W_q = x0` and `W_{ti1} = xi1`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_density<T: Real>(
    params: &ProcessParams<T>,
    t0: T,
    ti: T,
    ti1: T,
    x0: T,
    xi: T,
    xi1: T,
) -> Result<T> {
    ln_conditional_density(params, t0, ti, ti1, x0, xi, xi1).map(|v| v.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::GaussLegendre;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn p(q: f64, d: f64) -> ProcessParams<f64> {
        ProcessParams::new(q, d).unwrap()
    }

    // Independent oracle: N(0, Σ) density via nalgebra's LU determinant/inverse.
    fn mvn_oracle(params: &ProcessParams<f64>, times: &[f64], x: &[f64]) -> f64 {
        ln_mvn_oracle(params, times, x).exp()
    }

    fn ln_mvn_oracle(params: &ProcessParams<f64>, times: &[f64], x: &[f64]) -> f64 {
        let m = times.len();
        let sigma = DMatrix::from_fn(m, m, |i, j| (1.0 - (times[i] - times[j]).abs() / params.q()).max(0.0));
        let inv = sigma.clone().try_inverse().unwrap();
        let xv = DVector::from_row_slice(x);
        let quad = (xv.transpose() * inv * &xv)[(0, 0)];
        -0.5 * quad - 0.5 * ((2.0 * std::f64::consts::PI).powi(m as i32) * sigma.determinant()).ln()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ProcessParams::new(1.0, 2.5).is_err());
        assert!(ProcessParams::new(1.0, 1.0).is_err());
        assert!(ProcessParams::new(0.0, 1.0).is_err());
        assert!(ProcessParams::new(-1.0, 1.0).is_err());
        assert!(ProcessParams::new(f64::NAN, 1.0).is_err());
        assert!(ProcessParams::new(1.0, 2.0).is_ok());
        assert_eq!(p(0.5, 0.8).e(), 1.6);
    }

    #[test]
    fn covariance_examples() {
        let pr = p(1.0, 2.0);
        assert_eq!(pr.covariance(1.3, 1.3).unwrap(), 1.0);
        assert_eq!(pr.covariance(1.0, 2.0).unwrap(), 0.0);
        assert_eq!(pr.covariance(1.0, 1.5).unwrap(), 0.5);
        assert_eq!(pr.covariance(1.5, 1.0).unwrap(), 0.5);
        assert!(pr.covariance(0.9, 1.5).is_err());
        assert!(pr.covariance(1.5, 2.1).is_err());
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(p(2.0, 4.0).rescale(2.0).unwrap(), (2.0, 1.0));
        assert_eq!(p(2.0, 4.0).rescale(4.0).unwrap(), (2.0, 2.0));
        let (e, u) = p(0.5, 0.8).rescale(0.6).unwrap();
        assert_relative_eq!(e, 1.6, max_relative = 1e-15);
        assert_relative_eq!(u, 1.2, max_relative = 1e-15);
        assert!(p(0.5, 0.8).rescale(0.4).is_err());
        assert_relative_eq!(p(0.5, 0.8).unscale(u), 0.6, max_relative = 1e-15);
    }

    #[test]
    fn duplicate_times_rejected() {
        let err = GaussianVectorSpec::new(p(1.0, 2.0), vec![1.0, 1.5, 1.5]).unwrap_err();
        assert_eq!(err, Error::DegenerateTimes(1.5));
        assert!(matches!(
            GaussianVectorSpec::new(p(1.0, 2.0), vec![1.5, 1.2]),
            Err(Error::Ordering(_))
        ));
        assert!(GaussianVectorSpec::new(p(1.0, 2.0), vec![1.5, 2.2]).is_err());
    }

    #[test]
    fn single_time_is_standard_normal() {
        let spec = GaussianVectorSpec::new(p(1.0, 2.0), vec![1.7]).unwrap();
        let v = fdd_density(&spec, &[0.3]).unwrap();
        assert_relative_eq!(v, (-0.045f64).exp() / (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn pair_density_examples() {
        let pr = p(1.0, 2.0);
        let v = pair_density(&pr, 1.0, 2.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * std::f64::consts::PI), max_relative = 1e-15);
        let spec = GaussianVectorSpec::new(pr, vec![1.0, 2.0]).unwrap();
        assert_relative_eq!(fdd_density(&spec, &[0.0, 0.0]).unwrap(), v, max_relative = 1e-14);
        // Unit variances, correlation 0.5.
        let rho: f64 = 0.5;
        let (x, y) = (0.4, -1.1);
        let bvn = (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * (1.0 - rho * rho))).exp()
            / (2.0 * std::f64::consts::PI * (1.0 - rho * rho).sqrt());
        assert_relative_eq!(pair_density(&pr, 1.0, 1.5, x, y).unwrap(), bvn, max_relative = 1e-13);
        assert!(pair_density(&pr, 1.1, 1.5, x, y).is_err());
        assert!(pair_density(&pr, 1.0, 1.0, x, y).is_err());
        assert!(pair_density(&pr, 1.0, 2.1, x, y).is_err());
    }

    #[test]
    fn trivariate_matches_oracle() {
        let pr = p(1.0, 2.0);
        let times = [1.0, 1.4, 1.8];
        let spec = GaussianVectorSpec::new(pr, times.to_vec()).unwrap();
        let got = fdd_density(&spec, &[0.0, 0.0, 0.0]).unwrap();
        assert_relative_eq!(got, mvn_oracle(&pr, &times, &[0.0, 0.0, 0.0]), max_relative = 1e-10);
    }

    #[test]
    fn pair_density_normalizes() {
        let pr = p(1.0, 2.0);
        let rule = GaussLegendre::<f64>::new(16).composite(-8.0, 8.0, 8);
        let mass = rule.integrate(|x| rule.integrate(|y| pair_density(&pr, 1.0, 1.5, x, y).unwrap()));
        assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
    }

    #[test]
    fn conditional_density_examples() {
        let pr = p(1.0, 2.0);
        let rule = GaussLegendre::<f64>::new(16).composite(-10.0, 10.0, 8);
        let mass = rule.integrate(|x| conditional_density(&pr, 1.0, 1.4, 1.9, 0.3, x, -0.2).unwrap());
        assert!((mass - 1.0).abs() < 1e-10);

        let pair = pair_density(&pr, 1.0, 1.9, 0.3, -0.2).unwrap();
        let cond = conditional_density(&pr, 1.0, 1.4, 1.9, 0.3, 0.7, -0.2).unwrap();
        let spec = GaussianVectorSpec::new(pr, vec![1.0, 1.4, 1.9]).unwrap();
        let joint = fdd_density(&spec, &[0.3, 0.7, -0.2]).unwrap();
        assert_relative_eq!(pair * cond, joint, max_relative = 1e-12);

        assert!(conditional_density(&pr, 1.0, 1.9, 1.4, 0.0, 0.0, 0.0).is_err());
        assert!(conditional_density(&pr, 1.0, 1.0, 1.4, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn conditional_mode_is_bridge_interpolant() {
        let pr = p(1.0, 2.0);
        let (x0, x2) = (0.8, -0.6);
        let (ti, ti1) = (1.5, 2.0);
        // Golden-section search for the argmax.
        let f = |x: f64| ln_conditional_density(&pr, 1.0, ti, ti1, x0, x, x2).unwrap();
        let (mut lo, mut hi) = (-3.0, 3.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if f(a) > f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let argmax = 0.5 * (lo + hi);
        // Vertex of -(x-x0)²/α - (x2-x)²/β.
        let (alpha, beta) = (ti - 1.0, ti1 - ti);
        let vertex = x0 + alpha / (alpha + beta) * (x2 - x0);
        assert!((argmax - vertex).abs() < 1e-7);
        assert!(argmax < x0 && argmax > x2);
    }

    #[test]
    fn rescaled_density_agrees_with_canonical() {
        let pr = p(0.5, 0.8);
        let canon = pr.canonical();
        let times = [0.5, 0.62, 0.8];
        let canon_times: Vec<f64> = times.iter().map(|&t| pr.rescale(t).unwrap().1).collect();
        let x = [0.2, -0.4, 1.3];
        let a = fdd_density(&GaussianVectorSpec::new(pr, times.to_vec()).unwrap(), &x).unwrap();
        let b = fdd_density(&GaussianVectorSpec::new(canon, canon_times).unwrap(), &x).unwrap();
        // Values are not rescaled, so the Jacobian is one.
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }

    #[test]
    fn single_precision_pair_density() {
        let pr = ProcessParams::<f32>::new(1.0, 2.0).unwrap();
        let v = pair_density(&pr, 1.0, 2.0, 0.0, 0.0).unwrap();
        assert!((v - 1.0 / (2.0 * std::f32::consts::PI)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn covariance_bounded_and_symmetric(s in 1.0f64..2.0, t in 1.0f64..2.0) {
            let pr = p(1.0, 2.0);
            let c = pr.covariance(s, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert_eq!(c, pr.covariance(t, s).unwrap());
            prop_assert_eq!(c == 1.0, s == t);
        }

        #[test]
        fn covariance_matrices_are_pd(
            q in 0.5f64..3.0,
            ratio in 1.05f64..2.0,
            raw in prop::collection::btree_set(0u32..10_000, 2..8),
        ) {
            let pr = p(q, q * ratio);
            let times: Vec<f64> = raw.iter().map(|&k| q + (pr.d() - q) * k as f64 / 9_999.0).collect();
            let sigma = pr.covariance_matrix(&times).unwrap();
            prop_assert!(crate::numerics::cholesky(&sigma, times.len()).is_ok());
        }

        #[test]
        fn pair_equals_fdd_and_symmetry(
            q in 0.3f64..3.0,
            ratio in 1.05f64..2.0,
            frac in 0.01f64..1.0,
            x0 in -4.0f64..4.0,
            xi in -4.0f64..4.0,
        ) {
            let pr = p(q, q * ratio);
            let ti = q + frac * (pr.d() - q);
            let pair = pair_density(&pr, q, ti, x0, xi).unwrap();
            let spec = GaussianVectorSpec::new(pr, vec![q, ti]).unwrap();
            let fdd = fdd_density(&spec, &[x0, xi]).unwrap();
            prop_assert!((pair - fdd).abs() <= 1e-12 * pair);
            let mirrored = pair_density(&pr, q, ti, -x0, -xi).unwrap();
            prop_assert!((pair - mirrored).abs() <= 1e-14 * pair);
        }

        #[test]
        fn fdd_matches_mvn_oracle(
            q in 0.3f64..3.0,
            ratio in 1.1f64..2.0,
            raw in prop::collection::btree_set(0u32..1_000, 2..=4),
            xs in prop::collection::vec(-2.5f64..2.5, 4),
        ) {
            let pr = p(q, q * ratio);
            let times: Vec<f64> = raw.iter().map(|&k| q + (pr.d() - q) * k as f64 / 999.0).collect();
            let x = &xs[..times.len()];
            let spec = GaussianVectorSpec::new(pr, times.clone()).unwrap();
            // Far-tail values sit near underflow; compare on the log scale.
            let lg = ln_fdd_density(&spec, x).unwrap();
            let lw = ln_mvn_oracle(&pr, &times, x);
            prop_assert!((lg - lw).abs() <= 1e-9 * lw.abs().max(1.0), "got {} want {}", lg, lw);
        }
    }
}
