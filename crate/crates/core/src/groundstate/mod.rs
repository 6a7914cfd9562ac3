//! Ground states of `-Δφ + ωφ = g(φ)`: the 1D closed form for pure powers,
//! the Petviashvili iteration on the spectral grid, and radial shooting.
//! Every result is certified before it is returned.

mod shooting;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid};
use crate::functionals::{action_gradient, evaluate, FunctionalReport};
use crate::nonlinearity::{NonlinearityModel, NonlinearitySpec};

pub use shooting::{shoot_radial, solve_radial, RadialProfile, ShootingBracket};

/// Residual bound for an accepted ground state.
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Bound on `|I|` and `|Q|` relative to the kinetic energy.
pub const IDENTITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Petviashvili,
    Shooting,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateResult {
    pub field: ComplexField,
    pub omega: f64,
    /// The action `S(φ)`.
    pub level_m: f64,
    /// `‖-Δφ + ωφ - g(φ)‖₂ / ‖φ‖₂`.
    pub residual_rel: f64,
    pub method: Method,
    pub iterations: usize,
    pub report: FunctionalReport,
}

/// Metadata written next to an exported profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateSummary {
    pub method: Method,
    pub omega: f64,
    pub level_m: f64,
    pub residual_rel: f64,
    pub iterations: usize,
    pub peak: f64,
    pub report: FunctionalReport,
}

impl GroundStateResult {
    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            method: self.method,
            omega: self.omega,
            level_m: self.level_m,
            residual_rel: self.residual_rel,
            iterations: self.iterations,
            peak: self.field.sup_norm(),
            report: self.report,
        }
    }
}

/// Checks residual, `I`, `Q`, positivity of the level and of the profile.
pub fn certify(
    field: ComplexField,
    model: &NonlinearityModel,
    omega: f64,
    method: Method,
    iterations: usize,
) -> Result<GroundStateResult> {
    let norm = field.l2_norm();
    if norm == 0.0 {
        return Err(Error::DegenerateSeed("profile vanishes".into()));
    }
    let residual_rel = action_gradient(&field, model, omega)?.l2_norm() / norm;
    let report = evaluate(&field, model, omega)?;
    let peak = field.sup_norm();
    let negative = field.values().iter().map(|z| -z.re).fold(0.0, f64::max);
    let imaginary = field.values().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let mut failures = Vec::new();
    if residual_rel > RESIDUAL_TOL {
        failures.push(format!("residual {residual_rel:e}"));
    }
    if report.nehari.abs() > IDENTITY_TOL * report.kinetic || report.virial.abs() > IDENTITY_TOL * report.kinetic {
        failures.push(format!("I = {:e}, Q = {:e}", report.nehari, report.virial));
    }
    if report.action <= 0.0 {
        failures.push(format!("level {:e} not positive", report.action));
    }
    if negative > 1e-8 * peak || imaginary > 1e-12 * peak {
        failures.push("profile is not real and positive".into());
    }
    if !failures.is_empty() {
        return Err(Error::Convergence(format!("certification failed: {}", failures.join("; "))));
    }
    Ok(GroundStateResult { field, omega, level_m: report.action, residual_rel, method, iterations, report })
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("omega must be positive, got {omega}")))
    }
}

/// Peak value of the 1D solitary wave of `|φ|^{p-1}φ` at frequency `ω`.
pub fn closed_form_peak(p: f64, omega: f64) -> f64 {
    ((p + 1.0) * omega / 2.0).powf(1.0 / (p - 1.0))
}

/// The closed form for 1D pure powers, the Petviashvili iteration from a
/// Gaussian seed otherwise.
pub fn compute(
    model: &NonlinearityModel,
    omega: f64,
    grid: &Arc<Grid>,
    options: PetviashviliOptions,
) -> Result<GroundStateResult> {
    if let (NonlinearitySpec::PurePower { .. }, 1) = (model.spec(), grid.dim()) {
        return closed_form_1d(model, omega, grid);
    }
    let seed = ComplexField::sample_radial(grid, |r| (-r * r).exp())?;
    petviashvili(model, omega, &seed, options)
}

/// `[(p+1)ω/2]^{1/(p-1)} sech^{2/(p-1)}((p-1)√ω x / 2)`.
pub fn closed_form_1d(model: &NonlinearityModel, omega: f64, grid: &Arc<Grid>) -> Result<GroundStateResult> {
    check_omega(omega)?;
    let p = match (model.spec(), model.dim(), grid.dim()) {
        (NonlinearitySpec::PurePower { p }, 1, 1) => *p,
        _ => return Err(Error::Domain("closed form needs a 1D pure power model on a 1D grid".into())),
    };
    let amp = closed_form_peak(p, omega);
    let rate = 0.5 * (p - 1.0) * omega.sqrt();
    let expo = -2.0 / (p - 1.0);
    // sech(y)^e = (2e^{-|y|}/(1+e^{-2|y|}))^e avoids overflow in cosh
    let field = ComplexField::sample_radial_periodic(grid, |r| {
        let y = rate * r;
        let e = (-y).exp();
        amp * (2.0 * e / (1.0 + e * e)).powf(-expo)
    })?;
    certify(field, model, omega, Method::ClosedForm, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PetviashviliOptions {
    /// Stabilizing exponent; `d/(d-1)` for the leading degree `d` when absent.
    pub gamma: Option<f64>,
    /// Stop once the relative sup-norm update falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PetviashviliOptions {
    fn default() -> Self {
        Self { gamma: None, tol: 1e-13, max_iter: 5000 }
    }
}

pub fn petviashvili(
    model: &NonlinearityModel,
    omega: f64,
    seed: &ComplexField,
    options: PetviashviliOptions,
) -> Result<GroundStateResult> {
    check_omega(omega)?;
    let grid = seed.grid().clone();
    if grid.dim() != model.dim() {
        return Err(Error::Domain("seed and model dimensions differ".into()));
    }
    let gamma = match options.gamma {
        Some(g) => g,
        None => {
            let d = model
                .stabilizing_degree()
                .ok_or_else(|| Error::Domain("no leading degree; pass gamma explicitly".into()))?;
            d / (d - 1.0)
        }
    };
    if seed.l2_norm() == 0.0 {
        return Err(Error::DegenerateSeed("seed is zero".into()));
    }
    let symbol: Vec<f64> = grid.k_squared().iter().map(|k2| omega + k2).collect();
    let mut w: Vec<Complex64> = seed.dealiased().values().iter().map(|z| Complex64::new(z.re, 0.0)).collect();
    for iter in 1..=options.max_iter {
        let nl: Vec<Complex64> = w.iter().map(|z| Complex64::new(model.g(z.re), 0.0)).collect();
        let w_hat = ComplexField::from_values(&grid, w.clone())?.spectrum();
        let nl_hat = ComplexField::from_values(&grid, nl)
            .map_err(|e| Error::Convergence(format!("iteration {iter}: {e}")))?
            .dealiased()
            .spectrum();
        let lhs: f64 = w_hat.iter().zip(&symbol).map(|(a, s)| s * a.norm_sqr()).sum();
        let rhs: f64 = w_hat.iter().zip(&nl_hat).map(|(a, b)| (a.conj() * b).re).sum();
        if !(rhs > 0.0) || !(lhs > 0.0) {
            return Err(Error::DegenerateSeed(format!("iteration {iter}: ⟨g(w), w⟩ = {rhs:e}")));
        }
        let factor = (lhs / rhs).powf(gamma);
        if !factor.is_finite() {
            return Err(Error::Convergence(format!("stabilizing factor diverged at iteration {iter}")));
        }
        let next_hat: Vec<Complex64> = nl_hat.iter().zip(&symbol).map(|(b, s)| b * (factor / s)).collect();
        let next: Vec<Complex64> =
            ComplexField::from_spectrum(&grid, next_hat).values().iter().map(|z| Complex64::new(z.re, 0.0)).collect();
        let peak = next.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        if peak == 0.0 || !peak.is_finite() {
            return Err(Error::DegenerateSeed(format!("iterate collapsed at iteration {iter}")));
        }
        let change = next.iter().zip(&w).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / peak;
        w = next;
        if change <= options.tol {
            let field = ComplexField::from_values(&grid, w)?;
            return certify(field, model, omega, Method::Petviashvili, iter);
        }
    }
    Err(Error::Convergence(format!("no convergence in {} iterations", options.max_iter)))
}

#[cfg(test)]
mod tests;
