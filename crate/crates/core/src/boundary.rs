//! Piecewise-affine boundaries `g` on `[q, d]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::ProcessParams;
use crate::scalar::Real;

/// `b + a (t - t_start)` on `[t_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePiece<T> {
    pub t_start: T,
    pub t_end: T,
    pub intercept: T,
    pub slope: T,
}

impl<T: Real> AffinePiece<T> {
    pub fn new(t_start: T, t_end: T, intercept: T, slope: T) -> Result<Self> {
        if !(t_start < t_end) {
            return Err(Error::InvalidArgument(format!(
                "piece [{t_start}, {t_end}] is empty"
            )));
        }
        if !(intercept.is_finite() && slope.is_finite()) {
            return Err(Error::InvalidArgument("non-finite piece coefficients".into()));
        }
        Ok(Self {
            t_start,
            t_end,
            intercept,
            slope,
        })
    }

    pub fn value_at(&self, t: T) -> T {
        self.intercept + self.slope * (t - self.t_start)
    }

    pub fn end_value(&self) -> T {
        self.value_at(self.t_end)
    }

    pub fn len(&self) -> T {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxMode {
    /// Continuous interpolant through the knots.
    Interpolate,
    /// One constant per interval (the midpoint value); knots take the
    /// smaller neighbour.
    PiecewiseConstant,
}

/// Pieces tiling `[q, d]` plus the boundary value at each interior knot.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineBoundary<T> {
    params: ProcessParams<T>,
    pieces: Vec<AffinePiece<T>>,
    knot_values: Vec<T>,
}

impl<T: Real> PiecewiseAffineBoundary<T> {
    /// Validates the tiling. Absent knot values default to the minimum of
    /// the two one-sided limits.
    pub fn new(params: ProcessParams<T>, pieces: Vec<AffinePiece<T>>, knot_values: Option<Vec<T>>) -> Result<Self> {
        let tiling = |reason: String| Error::Tiling {
            q: params.q().as_f64(),
            d: params.d().as_f64(),
            reason,
        };
        let first = pieces.first().ok_or_else(|| tiling("no pieces".into()))?;
        let last = pieces.last().expect("non-empty");
        if first.t_start != params.q() {
            return Err(tiling(format!("first piece starts at {}", first.t_start)));
        }
        if last.t_end != params.d() {
            return Err(tiling(format!("last piece ends at {}", last.t_end)));
        }
        for piece in &pieces {
            if !(piece.t_start < piece.t_end) {
                return Err(tiling(format!("empty piece [{}, {}]", piece.t_start, piece.t_end)));
            }
        }
        for (i, w) in pieces.windows(2).enumerate() {
            if w[0].t_end != w[1].t_start {
                let kind = if w[0].t_end < w[1].t_start { "gap" } else { "overlap" };
                return Err(tiling(format!(
                    "{kind} between piece {i} ending at {} and piece {} starting at {}",
                    w[0].t_end,
                    i + 1,
                    w[1].t_start
                )));
            }
        }
        let limits: Vec<T> = pieces
            .windows(2)
            .map(|w| w[0].end_value().min(w[1].intercept))
            .collect();
        let knot_values = match knot_values {
            None => limits,
            Some(values) => {
                if values.len() != limits.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} knot values for {} interior knots",
                        values.len(),
                        limits.len()
                    )));
                }
                for (i, (&v, &lim)) in values.iter().zip(&limits).enumerate() {
                    if !v.is_finite() || v > lim + T::lit(8.0) * T::epsilon() * (T::one() + lim.abs()) {
                        return Err(Error::InvalidArgument(format!(
                            "knot value {v} at knot {} exceeds one-sided limit {lim}",
                            i + 1
                        )));
                    }
                }
                values
            }
        };
        Ok(Self {
            params,
            pieces,
            knot_values,
        })
    }

    pub fn constant(params: ProcessParams<T>, value: T) -> Result<Self> {
        Self::affine(params, value, T::zero())
    }

    /// Single piece `b + a (t - q)`.
    pub fn affine(params: ProcessParams<T>, intercept: T, slope: T) -> Result<Self> {
        let piece = AffinePiece::new(params.q(), params.d(), intercept, slope)?;
        Self::new(params, vec![piece], None)
    }

    /// Continuous interpolant through `(times[k], values[k])`; `times` must
    /// start at `q` and end at `d`.
    pub fn from_knots(params: ProcessParams<T>, times: &[T], values: &[T]) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::InvalidArgument(
                "need matching knot times and values, at least two".into(),
            ));
        }
        let pieces = times
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| AffinePiece::new(t[0], t[1], v[0], (v[1] - v[0]) / (t[1] - t[0])))
            .collect::<Result<Vec<_>>>()?;
        Self::new(params, pieces, None)
    }

    pub fn params(&self) -> &ProcessParams<T> {
        &self.params
    }

    pub fn pieces(&self) -> &[AffinePiece<T>] {
        &self.pieces
    }

    pub fn knot_values(&self) -> &[T] {
        &self.knot_values
    }

    /// All knot times `t_0 = q, …, t_n = d`.
    pub fn knots(&self) -> Vec<T> {
        let mut out: Vec<T> = self.pieces.iter().map(|p| p.t_start).collect();
        out.push(self.params.d());
        out
    }

    /// `g(t)`; interior knots return their knot value.
    pub fn evaluate(&self, t: T) -> Result<T> {
        self.params.check_time(t)?;
        let idx = self.pieces.partition_point(|p| p.t_end < t);
        let piece = &self.pieces[idx];
        if t == piece.t_end && idx + 1 < self.pieces.len() {
            return Ok(self.knot_values[idx]);
        }
        Ok(piece.value_at(t))
    }

    /// The piece whose closed interval contains `[s, t]`, for `s < t`.
    pub fn piece_covering(&self, s: T, t: T) -> Option<&AffinePiece<T>> {
        self.pieces.iter().find(|p| p.t_start <= s && t <= p.t_end)
    }

    /// Same function with additional knots inserted at `times`. Knot values
    /// of inserted points are the (continuous) piece values.
    pub fn refine(&self, times: &[T]) -> Result<Self> {
        let mut pieces = Vec::new();
        let mut knot_values = Vec::new();
        for (i, piece) in self.pieces.iter().enumerate() {
            let mut cuts: Vec<T> = times
                .iter()
                .copied()
                .filter(|&t| t > piece.t_start && t < piece.t_end)
                .collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
            cuts.dedup();
            let mut start = piece.t_start;
            for cut in cuts {
                let left = AffinePiece::new(start, cut, piece.value_at(start), piece.slope)?;
                knot_values.push(left.end_value().min(piece.value_at(cut)));
                pieces.push(left);
                start = cut;
            }
            pieces.push(AffinePiece::new(start, piece.t_end, piece.value_at(start), piece.slope)?);
            if i + 1 < self.pieces.len() {
                knot_values.push(self.knot_values[i]);
            }
        }
        Self::new(self.params, pieces, Some(knot_values))
    }

    /// Pointwise shifted copy `g + delta`.
    pub fn shifted(&self, delta: T) -> Self {
        Self {
            params: self.params,
            pieces: self
                .pieces
                .iter()
                .map(|p| AffinePiece {
                    intercept: p.intercept + delta,
                    ..*p
                })
                .collect(),
            knot_values: self.knot_values.iter().map(|&v| v + delta).collect(),
        }
    }
}

/// Piecewise-affine approximation of `f` on `n_pieces` equal intervals.
pub fn approximate<T: Real, F: Fn(T) -> T>(
    params: ProcessParams<T>,
    f: F,
    n_pieces: usize,
    mode: ApproxMode,
) -> Result<PiecewiseAffineBoundary<T>> {
    if n_pieces == 0 {
        return Err(Error::InvalidArgument("n_pieces must be at least 1".into()));
    }
    let (q, d) = (params.q(), params.d());
    let n = T::from_usize_lossy(n_pieces);
    let knots: Vec<T> = (0..=n_pieces)
        .map(|k| {
            if k == n_pieces {
                d
            } else {
                q + (d - q) * T::from_usize_lossy(k) / n
            }
        })
        .collect();
    let eval = |t: T| -> Result<T> {
        let v = f(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!("boundary function not finite at t = {t}")))
        }
    };
    match mode {
        ApproxMode::Interpolate => {
            let values = knots.iter().map(|&t| eval(t)).collect::<Result<Vec<_>>>()?;
            PiecewiseAffineBoundary::from_knots(params, &knots, &values)
        }
        ApproxMode::PiecewiseConstant => {
            let pieces = knots
                .windows(2)
                .map(|w| {
                    let mid = T::lit(0.5) * (w[0] + w[1]);
                    AffinePiece::new(w[0], w[1], eval(mid)?, T::zero())
                })
                .collect::<Result<Vec<_>>>()?;
            PiecewiseAffineBoundary::new(params, pieces, None)
        }
    }
}

/// On-disk boundary specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryFile {
    pub q: f64,
    pub d: f64,
    pub pieces: Vec<PieceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knot_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceRecord {
    pub t_start: f64,
    pub t_end: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl BoundaryFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("boundary file serializes")
    }

    pub fn into_boundary(self) -> Result<PiecewiseAffineBoundary<f64>> {
        let params = ProcessParams::new(self.q, self.d)?;
        let pieces = self
            .pieces
            .iter()
            .map(|p| AffinePiece::new(p.t_start, p.t_end, p.intercept, p.slope))
            .collect::<Result<Vec<_>>>()?;
        PiecewiseAffineBoundary::new(params, pieces, self.knot_values)
    }

    pub fn from_boundary(boundary: &PiecewiseAffineBoundary<f64>) -> Self {
        Self {
            q: boundary.params.q(),
            d: boundary.params.d(),
            pieces: boundary
                .pieces
                .iter()
                .map(|p| PieceRecord {
                    t_start: p.t_start,
                    t_end: p.t_end,
                    intercept: p.intercept,
                    slope: p.slope,
                })
                .collect(),
            knot_values: Some(boundary.knot_values.clone()),
        }
    }
}
