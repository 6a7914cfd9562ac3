//! The dilation scan `λ ↦ (S, Q, I)(v^λ)` and the roots `λ₀` (of `Q`) and
//! `λ₁` (of `I`).
//!
//! [`scan`] resamples the field at every `λ`; the root finders use the
//! change-of-variables route in [`ScaledFunctionals`], so the two can be
//! compared against each other.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::functionals::{evaluate, FunctionalReport, ScaledFunctionals};
use crate::nonlinearity::NonlinearityModel;

/// Smallest dilation the root finders will consider.
pub const LAMBDA_FLOOR: f64 = 1e-3;
/// Roots are accepted once `|F(v^λ)| ≤ ROOT_TOL · kinetic(v^λ)`.
pub const ROOT_TOL: f64 = 1e-10;
/// Floor of the derivative-identity error, as a fraction of `max |Q/λ|`.
pub const DERIVATIVE_FLOOR: f64 = 1e-6;
/// Allowed excess of `S` below the chord of its neighbours, relative to `|S|`.
pub const CONCAVITY_TOL: f64 = 1e-10;

/// Log-spaced dilation grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for LambdaRange {
    fn default() -> Self {
        Self { min: 0.5, max: 2.0, count: 400 }
    }
}

impl LambdaRange {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0 && self.max > self.min && self.max.is_finite()) || self.count < 5 {
            return Err(Error::Domain(format!("invalid lambda range {self:?}")));
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        let last = (self.count - 1) as f64;
        Ok((0..self.count).map(|i| (a + (b - a) * i as f64 / last).exp()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingScan {
    pub lambdas: Vec<f64>,
    pub s_curve: Vec<f64>,
    pub q_curve: Vec<f64>,
    pub i_curve: Vec<f64>,
    /// Sign change of `Q` from positive to negative, by linear interpolation.
    pub lambda0: Option<f64>,
    /// Sign change of `I` from positive to negative, by linear interpolation.
    pub lambda1: Option<f64>,
    pub concave_past_lambda0: bool,
    /// `dS/dλ > 0` two grid steps below `λ₀` and `< 0` two steps above.
    pub sign_pattern_ok: bool,
    pub derivative_identity_max_error: f64,
    pub notes: String,
}

/// The scalar part of a [`ScalingScan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub count: usize,
    pub lambda0: Option<f64>,
    pub lambda1: Option<f64>,
    pub concave_past_lambda0: bool,
    pub sign_pattern_ok: bool,
    pub derivative_identity_max_error: f64,
    pub notes: String,
}

impl ScalingScan {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Centered derivative of `S` on the nonuniform grid at interior index `i`.
    pub fn action_slope(&self, i: usize) -> f64 {
        let (l, s) = (&self.lambdas, &self.s_curve);
        let (h0, h1) = (l[i] - l[i - 1], l[i + 1] - l[i]);
        (h0 * h0 * (s[i + 1] - s[i]) + h1 * h1 * (s[i] - s[i - 1])) / (h0 * h1 * (h0 + h1))
    }

    /// Five-point centered derivative of `S` in `ln λ`, converted to `d/dλ`,
    /// at index `i` with two neighbours on each side.
    pub fn action_slope_fine(&self, i: usize) -> f64 {
        let (l, s) = (&self.lambdas, &self.s_curve);
        let h = (l[i + 1] / l[i - 1]).ln() / 2.0;
        (s[i - 2] - 8.0 * s[i - 1] + 8.0 * s[i + 1] - s[i + 2]) / (12.0 * h * l[i])
    }

    pub fn summary(&self) -> ScanSummary {
        ScanSummary {
            lambda_min: self.lambdas.first().copied().unwrap_or(f64::NAN),
            lambda_max: self.lambdas.last().copied().unwrap_or(f64::NAN),
            count: self.len(),
            lambda0: self.lambda0,
            lambda1: self.lambda1,
            concave_past_lambda0: self.concave_past_lambda0,
            sign_pattern_ok: self.sign_pattern_ok,
            derivative_identity_max_error: self.derivative_identity_max_error,
            notes: self.notes.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,S,Q,I\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.lambdas[i], self.s_curve[i], self.q_curve[i], self.i_curve[i]
            ));
        }
        out
    }
}

fn sign_change(lambdas: &[f64], values: &[f64]) -> Option<f64> {
    if let Some(i) = values.iter().position(|&v| v == 0.0) {
        return Some(lambdas[i]);
    }
    values.windows(2).position(|w| w[0] > 0.0 && w[1] < 0.0).map(|i| {
        let (a, b) = (values[i], values[i + 1]);
        lambdas[i] + (lambdas[i + 1] - lambdas[i]) * a / (a - b)
    })
}

pub fn scan(v: &ComplexField, model: &NonlinearityModel, omega: f64, range: LambdaRange) -> Result<ScalingScan> {
    let lambdas = range.points()?;
    let reports: Vec<Result<FunctionalReport>> = lambdas
        .par_iter()
        .map(|&l| v.rescale(l).and_then(|w| evaluate(&w, model, omega)))
        .collect();

    // keep the longest contiguous run of representable dilations
    let (mut best, mut start) = ((0, 0), 0);
    for (i, r) in reports.iter().enumerate() {
        if r.is_err() {
            start = i + 1;
        } else if i + 1 - start > best.1 - best.0 {
            best = (start, i + 1);
        }
    }
    let mut notes = String::new();
    if best.1 - best.0 < reports.len() {
        if let Some(Err(e)) = reports.iter().find(|r| r.is_err()) {
            if let Error::Numeric(_) = e {
                return Err(e.clone());
            }
            notes = format!("scan truncated to [{}, {}]: {e}", lambdas[best.0.min(lambdas.len() - 1)], lambdas[best.1.max(1) - 1]);
        }
    }
    if best.1 - best.0 < 5 {
        return Err(Error::Truncation(format!("fewer than five representable dilations; {notes}")));
    }
    let lambdas = lambdas[best.0..best.1].to_vec();
    let kept: Vec<FunctionalReport> = reports[best.0..best.1].iter().map(|r| *r.as_ref().unwrap()).collect();

    let mut out = ScalingScan {
        s_curve: kept.iter().map(|r| r.action).collect(),
        q_curve: kept.iter().map(|r| r.virial).collect(),
        i_curve: kept.iter().map(|r| r.nehari).collect(),
        lambda0: None,
        lambda1: None,
        concave_past_lambda0: true,
        sign_pattern_ok: true,
        derivative_identity_max_error: 0.0,
        notes,
        lambdas,
    };
    out.lambda0 = sign_change(&out.lambdas, &out.q_curve);
    out.lambda1 = sign_change(&out.lambdas, &out.i_curve);

    let n = out.len();
    let floor = DERIVATIVE_FLOOR
        * out.lambdas.iter().zip(&out.q_curve).map(|(l, q)| (q / l).abs()).fold(0.0, f64::max);
    for i in 2..n.saturating_sub(2) {
        let slope = out.action_slope_fine(i);
        let target = out.q_curve[i] / out.lambdas[i];
        let err = (slope - target).abs() / (target.abs() + floor);
        out.derivative_identity_max_error = out.derivative_identity_max_error.max(err);
    }

    if let Some(l0) = out.lambda0 {
        let pivot = out.lambdas.partition_point(|&l| l < l0);
        for i in 1..n - 1 {
            let slope = out.action_slope(i);
            if i + 2 < pivot && slope <= 0.0 || i >= pivot + 2 && slope >= 0.0 {
                out.sign_pattern_ok = false;
            }
            if out.lambdas[i - 1] > l0 {
                let (l, s) = (&out.lambdas, &out.s_curve);
                let w = (l[i] - l[i - 1]) / (l[i + 1] - l[i - 1]);
                let chord = (1.0 - w) * s[i - 1] + w * s[i + 1];
                if s[i] - chord < -CONCAVITY_TOL * s[i].abs() {
                    out.concave_past_lambda0 = false;
                }
            }
        }
    }
    Ok(out)
}

/// Bisection in `ln λ` for the root of a function positive at `lo` and
/// negative at `hi` (or the reverse), stopping once `|F| ≤ tol(λ)`.
fn bisect<F, T>(f: F, tol: T, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let positive_low = f(lo) > 0.0;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let value = f(mid);
        if value.abs() <= tol(mid) || hi / lo - 1.0 < 4.0 * f64::EPSILON {
            return Ok(mid);
        }
        if (value > 0.0) == positive_low {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(format!("bisection stalled in [{lo}, {hi}]")))
}

fn nonzero(v: &ComplexField) -> Result<()> {
    if v.mass() > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain("the zero field has no dilation roots".into()))
    }
}

/// The unique `λ` with `Q(v^λ) = 0`, for any nonzero `v`. Searches upward
/// by doubling when `Q(v) > 0`.
pub fn find_q_root(v: &ComplexField, model: &NonlinearityModel, omega: f64) -> Result<f64> {
    nonzero(v)?;
    let sf = ScaledFunctionals::new(v, model, omega)?;
    let q = |l: f64| sf.dilated(l).virial;
    let tol = |l: f64| ROOT_TOL * l * l * sf.kinetic();
    let q1 = q(1.0);
    if q1.abs() <= tol(1.0) {
        return Ok(1.0);
    }
    if q1 < 0.0 {
        if q(LAMBDA_FLOOR) <= 0.0 {
            return Err(Error::RootNotBracketed(format!("Q(v^λ) ≤ 0 down to λ = {LAMBDA_FLOOR}")));
        }
        return bisect(q, tol, LAMBDA_FLOOR, 1.0);
    }
    let mut hi = 2.0;
    for _ in 0..60 {
        if q(hi) < 0.0 {
            return bisect(q, tol, hi / 2.0, hi);
        }
        hi *= 2.0;
    }
    Err(Error::RootNotBracketed("Q(v^λ) stays positive for λ up to 2^60".into()))
}

/// `λ₀ ≤ 1` with `Q(v^{λ₀}) = 0`; requires `Q(v) ≤ 0`.
pub fn find_lambda0(v: &ComplexField, model: &NonlinearityModel, omega: f64) -> Result<f64> {
    let r = evaluate(v, model, omega)?;
    if r.virial > ROOT_TOL * r.kinetic {
        return Err(Error::Domain(format!("Q(v) = {} is positive", r.virial)));
    }
    find_q_root(v, model, omega)
}

/// `λ₁ ≤ 1` with `I(v^{λ₁}) = 0`; requires `I(v) ≤ 0`.
pub fn find_lambda1(v: &ComplexField, model: &NonlinearityModel, omega: f64) -> Result<f64> {
    nonzero(v)?;
    let sf = ScaledFunctionals::new(v, model, omega)?;
    let i = |l: f64| sf.dilated(l).nehari;
    let tol = |l: f64| ROOT_TOL * l * l * sf.kinetic();
    let i1 = i(1.0);
    if i1.abs() <= tol(1.0) {
        return Ok(1.0);
    }
    if i1 > 0.0 {
        return Err(Error::Domain(format!("I(v) = {i1} is positive")));
    }
    if i(LAMBDA_FLOOR) <= 0.0 {
        return Err(Error::RootNotBracketed(format!("I(v^λ) ≤ 0 down to λ = {LAMBDA_FLOOR}")));
    }
    bisect(i, tol, LAMBDA_FLOOR, 1.0)
}
