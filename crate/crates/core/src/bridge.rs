//! Non-crossing probabilities and first-hitting densities of Slepian
//! bridges, i.e. the process pinned at two times `t_i < t_i1` inside
//! `[q, d]`.
//!
//! For an affine boundary `b + a (t - t_i)` the hitting density is
//!
//! ```text
//! π(s) = √(qh)(b - x_i) / (2√π) · s^(-3/2) (h - s)^(-1/2)
//!        · exp[ q(x_i1 - x_i)²/(4h) - q/4 ((b + a s - x_i)²/s + (x_i1 - b - a s)²/(h - s)) ]
//! ```
//!
//! and the exponent is evaluated as `-q/4 · (p(h-s) - r s)² / (s h (h-s))`
//! with `p = b + a s - x_i`, `r = x_i1 - b - a s`, which is the same
//! quantity written without cancellation.

use crate::error::{Error, Result};
use crate::numerics::{integrate_adaptive, QuadResult};
use crate::process::ProcessParams;
use crate::scalar::Real;

/// Pins closer than this to the boundary give probability zero.
pub const DEGENERATE_PIN_GAP: f64 = 1e-12;

/// Default absolute tolerance for the affine-boundary integral.
pub const AFFINE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSpec<T> {
    params: ProcessParams<T>,
    t_start: T,
    t_end: T,
    x_start: T,
    x_end: T,
}

impl<T: Real> BridgeSpec<T> {
    pub fn new(params: ProcessParams<T>, t_start: T, t_end: T, x_start: T, x_end: T) -> Result<Self> {
        params.check_time(t_start)?;
        params.check_time(t_end)?;
        if !(t_start < t_end) {
            return Err(Error::Ordering(format!(
                "bridge needs t_start < t_end, got {t_start} and {t_end}"
            )));
        }
        if !(x_start.is_finite() && x_end.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pinned values".into()));
        }
        Ok(Self {
            params,
            t_start,
            t_end,
            x_start,
            x_end,
        })
    }

    pub fn params(&self) -> &ProcessParams<T> {
        &self.params
    }

    pub fn t_start(&self) -> T {
        self.t_start
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn x_start(&self) -> T {
        self.x_start
    }

    pub fn x_end(&self) -> T {
        self.x_end
    }

    pub fn h(&self) -> T {
        self.t_end - self.t_start
    }

    /// Same bridge run backwards in time.
    pub fn reversed(&self) -> Self {
        Self {
            x_start: self.x_end,
            x_end: self.x_start,
            ..*self
        }
    }

    /// Shift the bridge window by `dt`, keeping it inside `[q, d]`.
    pub fn translated(&self, dt: T) -> Result<Self> {
        Self::new(self.params, self.t_start + dt, self.t_end + dt, self.x_start, self.x_end)
    }
}

/// `P(W_t <= b on (t_i, t_i1) | W_{t_i} = x_i, W_{t_i1} = x_i1)
///  = 1 - exp(-q (b - x_i)(b - x_i1) / h)`.
pub fn noncross_constant<T: Real>(spec: &BridgeSpec<T>, b: T) -> Result<T> {
    if spec.x_start > b || spec.x_end > b {
        return Err(Error::Precondition(format!(
            "pinned values ({}, {}) above constant boundary {b}",
            spec.x_start, spec.x_end
        )));
    }
    let rate = spec.params.q() * (b - spec.x_start) * (b - spec.x_end) / spec.h();
    Ok(-(-rate).exp_m1())
}

fn ln_hitting_prefactor<T: Real>(spec: &BridgeSpec<T>, b: T) -> T {
    let q = spec.params.q();
    T::lit(0.5) * (q * spec.h()).ln() + (b - spec.x_start).ln() - T::LN_2() - T::lit(0.5) * T::PI().ln()
}

fn hitting_exponent<T: Real>(spec: &BridgeSpec<T>, b: T, a: T, s: T, rest: T) -> T {
    let h = spec.h();
    let level = b + a * s;
    let p = level - spec.x_start;
    let r = spec.x_end - level;
    let num = p * rest - r * s;
    -T::lit(0.25) * spec.params.q() * num * num / (s * h * rest)
}

fn check_affine_pins<T: Real>(spec: &BridgeSpec<T>, b: T, a: T) -> Result<()> {
    let end = b + a * spec.h();
    if spec.x_start > b || spec.x_end > end {
        return Err(Error::Precondition(format!(
            "pinned values ({}, {}) above boundary values ({b}, {end})",
            spec.x_start, spec.x_end
        )));
    }
    Ok(())
}

fn degenerate<T: Real>(spec: &BridgeSpec<T>, b: T, a: T) -> bool {
    let gap = T::lit(DEGENERATE_PIN_GAP);
    b - spec.x_start < gap || b + a * spec.h() - spec.x_end < gap
}

/// [`noncross_affine`] with an explicit absolute tolerance; the returned
/// bound is the quadrature error estimate of the crossing mass.
pub fn noncross_affine_with_tol<T: Real>(spec: &BridgeSpec<T>, b: T, a: T, tol: T) -> Result<QuadResult<T>> {
    check_affine_pins(spec, b, a)?;
    if degenerate(spec, b, a) {
        return Ok(QuadResult {
            value: T::zero(),
            error_bound: T::zero(),
            evaluations: 0,
        });
    }
    let h = spec.h();
    let half_h = T::lit(0.5) * h;
    let ln_pref = ln_hitting_prefactor(spec, b) + T::LN_2();
    let root = half_h.sqrt();
    let half_tol = T::lit(0.5) * tol;

    // s = v², ds = 2v dv on [0, h/2].
    let left = integrate_adaptive(
        |v: T| {
            let s = v * v;
            let rest = h - s;
            (ln_pref - T::lit(2.0) * v.ln() - T::lit(0.5) * rest.ln() + hitting_exponent(spec, b, a, s, rest)).exp()
        },
        T::zero(),
        root,
        half_tol,
    )?;
    // h - s = w², ds = -2w dw on [h/2, h].
    let right = integrate_adaptive(
        |w: T| {
            let rest = w * w;
            let s = h - rest;
            (ln_pref - T::lit(1.5) * s.ln() + hitting_exponent(spec, b, a, s, rest)).exp()
        },
        T::zero(),
        root,
        half_tol,
    )?;
    let crossing = left.value + right.value;
    Ok(QuadResult {
        value: (T::one() - crossing).max(T::zero()).min(T::one()),
        error_bound: left.error_bound + right.error_bound,
        evaluations: left.evaluations + right.evaluations,
    })
}

/// `P(W_t <= b + a (t - t_i) on [t_i, t_i1] | pins)` as one minus the
/// integral of the double-conditioned hitting density. Pins on the
/// boundary give 0.
pub fn noncross_affine<T: Real>(spec: &BridgeSpec<T>, b: T, a: T) -> Result<T> {
    noncross_affine_with_tol(spec, b, a, T::lit(AFFINE_TOL)).map(|r| r.value)
}

/// Density at `t` of the first time the bridge exceeds `b + a (t - t_i)`,
/// given both pins.
pub fn hitting_density_double<T: Real>(spec: &BridgeSpec<T>, b: T, a: T, t: T) -> Result<T> {
    if !(t > spec.t_start && t < spec.t_end) {
        return Err(Error::Domain {
            t: t.as_f64(),
            lo: spec.t_start.as_f64(),
            hi: spec.t_end.as_f64(),
        });
    }
    let end = b + a * spec.h();
    if !(spec.x_start < b && spec.x_end < end) {
        return Err(Error::Precondition(format!(
            "pinned values ({}, {}) must lie strictly below ({b}, {end})",
            spec.x_start, spec.x_end
        )));
    }
    let s = t - spec.t_start;
    let rest = spec.t_end - t;
    let ln = ln_hitting_prefactor(spec, b) - T::lit(1.5) * s.ln() - T::lit(0.5) * rest.ln()
        + hitting_exponent(spec, b, a, s, rest);
    Ok(ln.exp())
}

/// Density at `t ∈ (q, d]` of the first time W exceeds `b + a (t - q)`
/// given only `W_q = x1`.
pub fn hitting_density_single<T: Real>(params: &ProcessParams<T>, b: T, a: T, x1: T, t: T) -> Result<T> {
    if !(t > params.q() && t <= params.d()) {
        return Err(Error::Domain {
            t: t.as_f64(),
            lo: params.q().as_f64(),
            hi: params.d().as_f64(),
        });
    }
    if !(x1 < b) {
        return Err(Error::Precondition(format!("start value {x1} not below boundary {b}")));
    }
    let q = params.q();
    // Canonical elapsed time and slope.
    let tau = (t - q) / q;
    let slope = a * q;
    let two = T::lit(2.0);
    let var = tau * (two - tau);
    let dev = b + slope * tau - x1 * (T::one() - tau);
    let canonical = (b - x1) / (tau * (two * T::PI() * var).sqrt()) * (-dev * dev / (two * var)).exp();
    Ok(canonical / q)
}
