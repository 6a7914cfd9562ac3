//! Nonlinearity models `g`, their primitives `G`, the monotonicity witness
//! `h(s) = (s g(s) - 2 G(s)) s^{-(2 + 4/N)}` and sample-based admissibility
//! checks.
//!
//! All models are odd on the real line and extended to the complex plane by
//! `g(z) = g(|z|) z / |z|`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Relative tolerance used for the primitive of tabulated models.
pub const TABULATED_QUAD_TOL: f64 = 1e-10;

/// One term `c |s|^{p-1} s` of a sum of powers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

/// Serializable description of a nonlinearity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearitySpec {
    PurePower { p: f64 },
    SumOfPowers { terms: Vec<PowerTerm> },
    /// Samples of `g` on `s >= 0`; a leading `(0, 0)` knot is added if missing.
    Tabulated { s: Vec<f64>, g: Vec<f64> },
}

impl NonlinearitySpec {
    pub fn pure_power(p: f64) -> Self {
        Self::PurePower { p }
    }

    /// Largest exponent of a power-type model.
    pub fn leading_exponent(&self) -> Option<f64> {
        match self {
            Self::PurePower { p } => Some(*p),
            Self::SumOfPowers { terms } => terms.iter().map(|t| t.exponent).reduce(f64::max),
            Self::Tabulated { .. } => None,
        }
    }

    /// Smallest exponent of a power-type model.
    pub fn smallest_exponent(&self) -> Option<f64> {
        match self {
            Self::PurePower { p } => Some(*p),
            Self::SumOfPowers { terms } => terms.iter().map(|t| t.exponent).reduce(f64::min),
            Self::Tabulated { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Power {
    Int(i32),
    Real(f64),
}

impl Power {
    fn new(e: f64) -> Self {
        if e.fract() == 0.0 && e.abs() <= 64.0 {
            Power::Int(e as i32)
        } else {
            Power::Real(e)
        }
    }

    #[inline]
    fn of(self, s: f64) -> f64 {
        match self {
            Power::Int(k) => int_pow(s, k),
            Power::Real(e) => s.powf(e),
        }
    }

    /// `s^e` from `s²`, avoiding the square root for even integer powers.
    #[inline]
    fn of_sq(self, s2: f64) -> f64 {
        match self {
            Power::Int(k) if k % 2 == 0 => int_pow(s2, k / 2),
            Power::Int(k) => int_pow(s2.sqrt(), k),
            Power::Real(e) => s2.powf(0.5 * e),
        }
    }
}

/// `x^k` by repeated squaring.
#[inline]
fn int_pow(x: f64, k: i32) -> f64 {
    let mut base = if k < 0 { 1.0 / x } else { x };
    let mut n = k.unsigned_abs();
    let mut acc = 1.0;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        base *= base;
        n >>= 1;
    }
    acc
}

#[derive(Clone, Debug)]
struct Term {
    coefficient: f64,
    exponent: f64,
    /// |s|^{p-1}
    rate: Power,
    /// |s|^{p+1}
    primitive: Power,
}

impl Term {
    fn new(coefficient: f64, exponent: f64) -> Self {
        Self {
            coefficient,
            exponent,
            rate: Power::new(exponent - 1.0),
            primitive: Power::new(exponent + 1.0),
        }
    }
}

/// Monotone piecewise-cubic Hermite interpolant of tabulated `g`, with the
/// primitive accumulated knot by knot.
#[derive(Debug)]
struct Tabulation {
    s: Vec<f64>,
    g: Vec<f64>,
    slope: Vec<f64>,
    primitive_at_knot: Vec<f64>,
}

impl Tabulation {
    fn new(s: &[f64], g: &[f64]) -> Result<Self> {
        if s.len() != g.len() {
            return Err(Error::Domain("tabulated s and g differ in length".into()));
        }
        let (mut s, mut g) = (s.to_vec(), g.to_vec());
        if s.first().copied() != Some(0.0) {
            s.insert(0, 0.0);
            g.insert(0, 0.0);
        }
        if s.len() < 3 {
            return Err(Error::Domain("tabulated model needs at least two positive knots".into()));
        }
        if g[0] != 0.0 {
            return Err(Error::Domain("tabulated g must vanish at s = 0".into()));
        }
        if s.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulated data must be finite".into()));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("tabulated knots must be strictly increasing".into()));
        }
        let slope = pchip_slopes(&s, &g);
        let mut tab = Self {
            s,
            g,
            slope,
            primitive_at_knot: Vec::new(),
        };
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(tab.s.len());
        cumulative.push(0.0);
        for k in 0..tab.s.len() - 1 {
            acc += adaptive_simpson(|x| tab.eval(x), tab.s[k], tab.s[k + 1], TABULATED_QUAD_TOL)?;
            cumulative.push(acc);
        }
        tab.primitive_at_knot = cumulative;
        Ok(tab)
    }

    /// Interpolated `g` for `x >= 0`; linear extension past the last knot.
    fn eval(&self, x: f64) -> f64 {
        let n = self.s.len();
        if x >= self.s[n - 1] {
            return self.g[n - 1] + self.slope[n - 1] * (x - self.s[n - 1]);
        }
        let k = self.s.partition_point(|&v| v <= x).saturating_sub(1);
        let h = self.s[k + 1] - self.s[k];
        let t = (x - self.s[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.g[k] + h10 * h * self.slope[k] + h01 * self.g[k + 1] + h11 * h * self.slope[k + 1]
    }

    fn primitive(&self, x: f64) -> Result<f64> {
        let n = self.s.len();
        let k = if x >= self.s[n - 1] {
            n - 1
        } else {
            self.s.partition_point(|&v| v <= x).saturating_sub(1)
        };
        if x == self.s[k] {
            return Ok(self.primitive_at_knot[k]);
        }
        let rest = adaptive_simpson(|y| self.eval(y), self.s[k], x, TABULATED_QUAD_TOL)?;
        Ok(self.primitive_at_knot[k] + rest)
    }
}

/// Shape-preserving derivative estimates (Fritsch–Butland interior,
/// three-point one-sided ends).
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let v = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if v.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && v.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            v
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

#[derive(Clone, Debug)]
enum Repr {
    Powers(Vec<Term>),
    Tabulated(Arc<Tabulation>),
}

/// A validated nonlinearity in a fixed space dimension. Immutable and cheap
/// to clone.
#[derive(Clone, Debug)]
pub struct NonlinearityModel {
    spec: NonlinearitySpec,
    dim: usize,
    repr: Repr,
}

impl NonlinearityModel {
    pub fn new(spec: NonlinearitySpec, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension {dim} not in {{1, 2, 3}}")));
        }
        let repr = match &spec {
            NonlinearitySpec::PurePower { p } => {
                check_exponent(*p)?;
                Repr::Powers(vec![Term::new(1.0, *p)])
            }
            NonlinearitySpec::SumOfPowers { terms } => {
                if terms.is_empty() {
                    return Err(Error::Domain("sum of powers needs at least one term".into()));
                }
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    check_exponent(t.exponent)?;
                    if !t.coefficient.is_finite() {
                        return Err(Error::Domain("non-finite coefficient".into()));
                    }
                    out.push(Term::new(t.coefficient, t.exponent));
                }
                Repr::Powers(out)
            }
            NonlinearitySpec::Tabulated { s, g } => Repr::Tabulated(Arc::new(Tabulation::new(s, g)?)),
        };
        Ok(Self { spec, dim, repr })
    }

    pub fn pure_power(p: f64, dim: usize) -> Result<Self> {
        Self::new(NonlinearitySpec::pure_power(p), dim)
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `2 + 4/N`, the exponent in the definition of `h`.
    pub fn h_exponent(&self) -> f64 {
        2.0 + 4.0 / self.dim as f64
    }

    /// `1 + 4/N`.
    pub fn critical_exponent(&self) -> f64 {
        1.0 + 4.0 / self.dim as f64
    }

    /// Lipschitz growth exponent `alpha = p - 1` of power kinds. Metadata only.
    pub fn lipschitz_alpha(&self) -> Option<f64> {
        self.spec.leading_exponent().map(|p| p - 1.0)
    }

    /// Homogeneity degree used by the Petviashvili stabilizer.
    pub fn stabilizing_degree(&self) -> Option<f64> {
        self.spec.leading_exponent()
    }

    /// `g(s)` without input validation.
    #[inline]
    pub fn g(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Powers(terms) => {
                let a = s.abs();
                terms.iter().map(|t| t.coefficient * t.rate.of(a)).sum::<f64>() * s
            }
            Repr::Tabulated(tab) => tab.eval(s.abs()).copysign(s),
        }
    }

    /// `g(s)/s` for `s >= 0`, with the removable singularity at 0 set to its
    /// limit 0.
    #[inline]
    pub fn rate(&self, s: f64) -> f64 {
        match &self.repr {
            Repr::Powers(terms) => terms.iter().map(|t| t.coefficient * t.rate.of(s)).sum(),
            Repr::Tabulated(tab) => {
                if s == 0.0 {
                    0.0
                } else {
                    tab.eval(s) / s
                }
            }
        }
    }

    /// `rate(s)` from `s²`.
    #[inline]
    pub fn rate_sq(&self, s2: f64) -> f64 {
        match &self.repr {
            Repr::Powers(terms) => terms.iter().map(|t| t.coefficient * t.rate.of_sq(s2)).sum(),
            Repr::Tabulated(_) => self.rate(s2.sqrt()),
        }
    }

    /// `primitive(s)` from `s²`.
    #[inline]
    pub fn primitive_sq(&self, s2: f64) -> f64 {
        match &self.repr {
            Repr::Powers(terms) => terms
                .iter()
                .map(|t| t.coefficient * t.primitive.of_sq(s2) / (t.exponent + 1.0))
                .sum(),
            Repr::Tabulated(_) => self.primitive(s2.sqrt()),
        }
    }

    /// `G(s)` for `s >= 0`. Exact for power kinds.
    #[inline]
    pub fn primitive(&self, s: f64) -> f64 {
        let a = s.abs();
        match &self.repr {
            Repr::Powers(terms) => terms
                .iter()
                .map(|t| t.coefficient * t.primitive.of(a) / (t.exponent + 1.0))
                .sum(),
            Repr::Tabulated(tab) => tab.primitive(a).unwrap_or(f64::NAN),
        }
    }

    /// `(c, p, Σ s^{p+1})` for each power term; `None` for tabulated `g`.
    pub(crate) fn term_moments(&self, moduli: &[f64]) -> Option<Vec<(f64, f64, f64)>> {
        match &self.repr {
            Repr::Powers(terms) => Some(
                terms
                    .iter()
                    .map(|t| (t.coefficient, t.exponent, moduli.iter().map(|&s| t.primitive.of(s)).sum()))
                    .collect(),
            ),
            Repr::Tabulated(_) => None,
        }
    }

    /// Evaluates `(g(s) s, G(s))` together for `s >= 0`.
    #[inline]
    pub fn pair(&self, s: f64) -> (f64, f64) {
        match &self.repr {
            Repr::Powers(terms) => {
                let mut gs = 0.0;
                let mut big = 0.0;
                for t in terms {
                    let q = t.primitive.of(s);
                    gs += t.coefficient * q;
                    big += t.coefficient * q / (t.exponent + 1.0);
                }
                (gs, big)
            }
            Repr::Tabulated(_) => (self.g(s) * s, self.primitive(s)),
        }
    }

    pub fn g_eval(&self, s: f64) -> Result<f64> {
        finite(s)?;
        Ok(self.g(s))
    }

    /// `g(|z|) z / |z|`, exactly zero at the origin.
    pub fn g_complex(&self, z: Complex64) -> Result<Complex64> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Domain(format!("non-finite input {z}")));
        }
        Ok(z * self.rate(z.norm()))
    }

    pub fn antiderivative_eval(&self, s: f64) -> Result<f64> {
        finite(s)?;
        match &self.repr {
            Repr::Tabulated(tab) => tab.primitive(s.abs()),
            Repr::Powers(_) => Ok(self.primitive(s)),
        }
    }

    /// The monotonicity witness `h(s) = (s g(s) - 2 G(s)) s^{-(2+4/N)}`.
    pub fn h_eval(&self, s: f64) -> Result<f64> {
        finite(s)?;
        if s <= 0.0 {
            return Err(Error::Domain(format!("h is defined for s > 0, got {s}")));
        }
        let big = self.antiderivative_eval(s)?;
        Ok((s * self.g(s) - 2.0 * big) * s.powf(-self.h_exponent()))
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::Domain(format!("power exponent must be finite and > 1, got {p}")));
    }
    Ok(())
}

fn finite(s: f64) -> Result<()> {
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite input {s}")))
    }
}

/// Log-spaced sampling window for the admissibility checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRange {
    pub s_min: f64,
    pub s_max: f64,
    pub count: usize,
}

impl Default for SampleRange {
    fn default() -> Self {
        Self {
            s_min: 1e-6,
            s_max: 1e3,
            count: 256,
        }
    }
}

impl SampleRange {
    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.s_min.ln(), self.s_max.ln());
        let n = self.count;
        (0..n)
            .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// Outcome of the sampled admissibility checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `g(s)/s -> 0` as `s -> 0`.
    pub a0b_ok: bool,
    /// `h` strictly increasing and `h -> 0` at the left end.
    pub a1_ok: bool,
    /// `g(s)/s` strictly increasing.
    pub cond3_ok: bool,
    /// `g(s)/s` unbounded as `s` grows.
    pub cond4_ok: bool,
    /// Witness of property (P), when a frequency was supplied and one exists.
    pub s0: Option<f64>,
    pub supercritical: bool,
    /// Leading exponent exactly `1 + 4/N`.
    pub borderline: bool,
    /// `alpha` of the Lipschitz growth condition, recorded but not enforced.
    pub lipschitz_alpha: Option<f64>,
    pub notes: String,
}

/// Runs the sampled checks of the growth assumptions on `model`.
///
/// When `omega` is given, also locates `s0` by bisection on
/// `omega s^2 / 2 - G(s)`.
pub fn check_admissibility(
    model: &NonlinearityModel,
    range: SampleRange,
    omega: Option<f64>,
) -> AdmissibilityReport {
    let mut notes = Vec::new();
    let valid_range = range.s_min > 0.0 && range.s_min < range.s_max && range.count >= 10;
    let grid = if valid_range {
        range.points()
    } else {
        notes.push(format!("invalid sample range {range:?}; using the default window"));
        SampleRange::default().points()
    };

    let h: Vec<f64> = grid.iter().map(|&s| model.h_eval(s).unwrap_or(f64::NAN)).collect();
    let rate: Vec<f64> = grid.iter().map(|&s| model.rate(s)).collect();

    let h_increasing = h.windows(2).all(|w| w[1] > w[0]);
    let h_vanishes = tends_to_zero(&grid, &h);
    if !h_increasing {
        notes.push("h is not strictly increasing on the sample".into());
    }
    if !h_vanishes {
        notes.push("h does not tend to 0 at the left end".into());
    }
    let a1_ok = h_increasing && h_vanishes;

    let a0b_ok = tends_to_zero(&grid, &rate);
    if !a0b_ok {
        notes.push("g(s)/s does not tend to 0 at the left end".into());
    }
    let cond3_ok = rate.windows(2).all(|w| w[1] > w[0]);
    let cond4_ok = cond3_ok && unbounded(&grid, &rate);
    if !cond3_ok {
        notes.push("g(s)/s is not strictly increasing".into());
    } else if !cond4_ok {
        notes.push("g(s)/s appears bounded".into());
    }

    let critical = model.critical_exponent();
    let (supercritical, borderline) = match model.spec().smallest_exponent() {
        Some(p_min) => {
            let p_max = model.spec().leading_exponent().unwrap_or(p_min);
            let positive = match model.spec() {
                NonlinearitySpec::SumOfPowers { terms } => terms.iter().all(|t| t.coefficient > 0.0),
                _ => true,
            };
            (positive && p_min > critical, p_max == critical)
        }
        None => (a1_ok, false),
    };
    if borderline {
        notes.push(format!("leading exponent equals the critical value 1 + 4/N = {critical}"));
    }

    let s0 = omega.and_then(|w| match locate_s0(model, w) {
        Ok(s) => Some(s),
        Err(e) => {
            notes.push(format!("no s0 found: {e}"));
            None
        }
    });

    AdmissibilityReport {
        a0b_ok,
        a1_ok,
        cond3_ok,
        cond4_ok,
        s0,
        supercritical,
        borderline,
        lipschitz_alpha: model.lipschitz_alpha(),
        notes: notes.join("; "),
    }
}

/// Nonnegative values decaying to 0 at the left end: either already
/// negligible against the sample maximum, or following a positive power law.
fn tends_to_zero(s: &[f64], v: &[f64]) -> bool {
    if v.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if v[0] < 0.0 {
        return false;
    }
    if v[0] <= 1e-8 * vmax.max(1.0) {
        return true;
    }
    // local log-log slope over the first decade of samples
    let k = (s.len() / 10).max(2);
    v[0] > 0.0 && v[k] > v[0] && (v[k] / v[0]).ln() / (s[k] / s[0]).ln() > 1e-3
}

fn unbounded(s: &[f64], v: &[f64]) -> bool {
    let n = s.len();
    let k = n - 1 - (n / 10).max(2);
    v[n - 1] > 0.0 && v[k] > 0.0 && (v[n - 1] / v[k]).ln() / (s[n - 1] / s[k]).ln() > 1e-3
}

/// Property (P): the first crossing of `omega s^2 / 2 = G(s)`. For `N >= 2`
/// the returned point satisfies the strict inequality `omega s0^2 / 2 < G(s0)`.
pub fn locate_s0(model: &NonlinearityModel, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    let f = |s: f64| 0.5 * omega * s * s - model.primitive(s);
    let mut lo = 1.0;
    let mut guard = 0;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 200 {
            return Err(Error::RootNotBracketed("G(s) dominates omega s^2/2 near 0".into()));
        }
    }
    let mut hi = lo;
    guard = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::RootNotBracketed("omega s^2/2 dominates G(s) everywhere".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if model.dim() == 1 {
        let s0 = 0.5 * (lo + hi);
        if omega * s0 < model.g(s0) {
            Ok(s0)
        } else {
            Err(Error::Domain(format!("omega s0 >= g(s0) at s0 = {s0}")))
        }
    } else {
        Ok(hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p7() -> NonlinearityModel {
        NonlinearityModel::pure_power(7.0, 1).unwrap()
    }

    fn tabulated_s7(n: usize, s_max: f64) -> NonlinearityModel {
        let s: Vec<f64> = (0..=n).map(|i| s_max * i as f64 / n as f64).collect();
        let g: Vec<f64> = s.iter().map(|x| x.powi(7)).collect();
        NonlinearityModel::new(NonlinearitySpec::Tabulated { s, g }, 1).unwrap()
    }

    #[test]
    fn g_eval_examples() {
        let m = p7();
        assert_eq!(m.g_eval(0.0).unwrap(), 0.0);
        assert_eq!(m.g_eval(2.0).unwrap(), 128.0);
        assert_eq!(m.g_eval(-2.0).unwrap(), -128.0);
        assert!(m.g_eval(f64::NAN).is_err());
        assert!(m.g_eval(f64::INFINITY).is_err());
    }

    #[test]
    fn g_complex_examples() {
        let m = p7();
        assert_eq!(m.g_complex(Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        let z = m.g_complex(Complex64::new(0.0, 2.0)).unwrap();
        assert!((z - Complex64::new(0.0, 128.0)).norm() < 1e-12);
        // oracle: |z| = sqrt 2, g(sqrt 2) = 8 sqrt 2, times z/|z|
        let w = Complex64::new(1.0, 1.0);
        let r = w.norm();
        let expected = w / r * r.powi(7);
        let got = m.g_complex(w).unwrap();
        assert!((got - expected).norm() < 1e-12);
        assert!((got - Complex64::new(8.0, 8.0)).norm() < 1e-12);
        assert!(m.g_complex(Complex64::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn antiderivative_examples() {
        let m = p7();
        assert_eq!(m.antiderivative_eval(0.0).unwrap(), 0.0);
        assert!((m.antiderivative_eval(1.0).unwrap() - 0.125).abs() < 1e-15);
        let tab = tabulated_s7(20_000, 2.0);
        assert!((tab.antiderivative_eval(1.0).unwrap() - 0.125).abs() < 1e-9);
        assert!(tab.antiderivative_eval(0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn h_eval_examples() {
        let m = p7();
        assert!((m.h_eval(1.0).unwrap() - 0.75).abs() < 1e-15);
        let m5 = NonlinearityModel::pure_power(5.0, 1).unwrap();
        assert!((m5.h_eval(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // oracle: h(s) = (p-1)/(p+1) s^{p-1-4/N}
        let direct = 6.0 / 8.0 * 2f64.powf(7.0 - 1.0 - 4.0);
        assert!((m.h_eval(2.0).unwrap() - direct).abs() < 1e-12);
        assert!((m.h_eval(2.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(m.h_eval(0.0).is_err());
        assert!(m.h_eval(-1.0).is_err());
    }

    #[test]
    fn admissibility_supercritical_and_subcritical() {
        let r = check_admissibility(&p7(), SampleRange::default(), None);
        assert!(r.a1_ok && r.a0b_ok && r.cond3_ok && r.cond4_ok, "{r:?}");
        assert!(r.supercritical && !r.borderline);
        assert_eq!(r.lipschitz_alpha, Some(6.0));

        let cubic = NonlinearityModel::pure_power(3.0, 1).unwrap();
        let r = check_admissibility(&cubic, SampleRange::default(), None);
        assert!(!r.supercritical);
        assert!(!r.a1_ok, "h is decreasing for subcritical powers");

        let quintic = NonlinearityModel::pure_power(5.0, 1).unwrap();
        let r = check_admissibility(&quintic, SampleRange::default(), None);
        assert!(r.borderline && !r.supercritical && !r.a1_ok);

        // 1 + 4/3 < 3 in three dimensions
        let cubic3 = NonlinearityModel::pure_power(3.0, 3).unwrap();
        let r = check_admissibility(&cubic3, SampleRange::default(), Some(1.0));
        assert!(r.supercritical && r.a1_ok);
        let s0 = r.s0.unwrap();
        assert!(0.5 * s0 * s0 < cubic3.primitive(s0));
    }

    #[test]
    fn s0_for_septic_power() {
        let r = check_admissibility(&p7(), SampleRange::default(), Some(1.0));
        let s0 = r.s0.unwrap();
        // oracle: plain bisection on s^2/2 - s^8/8
        let (mut lo, mut hi) = (0.5f64, 3.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.5 * mid * mid - mid.powi(8) / 8.0 > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((s0 - lo).abs() < 1e-12);
        assert!((0.5 * s0 * s0 - s0.powi(8) / 8.0).abs() < 1e-12);
        assert!(s0 < p7().g(s0));
    }

    #[test]
    fn tabulated_septic_is_admissible() {
        let tab = tabulated_s7(4000, 4.0);
        let r = check_admissibility(&tab, SampleRange { s_min: 1e-2, s_max: 3.0, count: 64 }, None);
        assert!(r.cond3_ok && r.a0b_ok, "{r:?}");
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(NonlinearityModel::pure_power(1.0, 1).is_err());
        assert!(NonlinearityModel::pure_power(3.0, 4).is_err());
        let bad = NonlinearitySpec::Tabulated { s: vec![0.0, 2.0, 1.0], g: vec![0.0, 1.0, 2.0] };
        assert!(NonlinearityModel::new(bad, 1).is_err());
        assert!(NonlinearityModel::new(NonlinearitySpec::SumOfPowers { terms: vec![] }, 1).is_err());
    }

    #[test]
    fn spec_serializes_with_kind_tag() {
        let v: NonlinearitySpec = serde_json::from_str(r#"{"kind": "pure_power", "p": 7.0}"#).unwrap();
        assert_eq!(v, NonlinearitySpec::PurePower { p: 7.0 });
    }

    fn models() -> Vec<NonlinearityModel> {
        vec![
            p7(),
            NonlinearityModel::pure_power(3.0, 1).unwrap(),
            NonlinearityModel::pure_power(4.5, 2).unwrap(),
            NonlinearityModel::new(
                NonlinearitySpec::SumOfPowers {
                    terms: vec![
                        PowerTerm { coefficient: 1.0, exponent: 3.0 },
                        PowerTerm { coefficient: 0.5, exponent: 7.0 },
                    ],
                },
                1,
            )
            .unwrap(),
            tabulated_s7(2000, 3.0),
        ]
    }

    proptest! {
        #[test]
        fn power_models_are_odd(s in -50.0f64..50.0) {
            for m in models().iter().take(4) {
                prop_assert_eq!(m.g(-s), -m.g(s));
            }
        }

        #[test]
        fn primitive_differentiates_to_g(s in 0.05f64..2.5) {
            for m in models() {
                let e = 1e-5 * s;
                let fd = (m.antiderivative_eval(s + e).unwrap() - m.antiderivative_eval(s - e).unwrap()) / (2.0 * e);
                let g = m.g(s);
                prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1e-3), "{fd} vs {g}");
            }
        }

        #[test]
        fn gauge_covariance(theta in 0.0f64..6.283, r in 0.0f64..3.0) {
            let m = p7();
            let z = Complex64::from_polar(r, 0.3);
            let rot = Complex64::from_polar(1.0, theta);
            let lhs = m.g_complex(rot * z).unwrap();
            let rhs = rot * m.g_complex(z).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn supercritical_powers_satisfy_growth_bounds() {
        for p in [5.5, 7.0, 9.0] {
            let m = NonlinearityModel::pure_power(p, 1).unwrap();
            let grid = SampleRange::default().points();
            assert!(grid.windows(2).all(|w| m.rate(w[1]) > m.rate(w[0])));
            let growing: Vec<f64> = [1e1, 1e2, 1e3].iter().map(|&s| m.rate(s)).collect();
            assert!(growing[2] > 1e3 * growing[0].max(1.0) || growing[2] > 1e6);
        }
    }
}
