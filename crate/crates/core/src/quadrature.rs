//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // absolute floor keeps integrals that vanish identically from recursing forever
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;
    let value = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)?;
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "quadrature produced a non-finite value on [{a}, {b}]"
        )));
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numeric(format!(
            "adaptive quadrature did not converge on [{a}, {b}]"
        )));
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|s| s.powi(7), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 0.125).abs() < 1e-13);
    }

    #[test]
    fn smooth_integrand() {
        let v = adaptive_simpson(|x: f64| x.cos(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        assert!(adaptive_simpson(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
