//! The action `S`, Nehari functional `I`, virial functional `Q`, the action
//! gradient, and membership in the invariant set `{S < m, Q < 0, I < 0}`.
//!
//! Nonlinear integrands are evaluated on the 2/3-rule projection of the
//! field; mass and kinetic energy use the field as is.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::nonlinearity::NonlinearityModel;

/// Scalar diagnostics of one field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    /// Action `S = K/2 + ω M/2 - ∫G`.
    #[serde(rename = "S")]
    pub action: f64,
    /// Nehari functional `I = K + ω M - ∫g(|v|)|v|`.
    #[serde(rename = "I")]
    pub nehari: f64,
    /// Virial functional `Q = K - (N/2) ∫(g(|v|)|v| - 2G)`.
    #[serde(rename = "Q")]
    pub virial: f64,
    pub mass: f64,
    pub kinetic: f64,
    /// `∫G(v)`.
    pub potential: f64,
    /// `∫g(|v|)|v|`.
    pub nonlinear_moment: f64,
    pub omega: f64,
    pub dim: usize,
}

impl FunctionalReport {
    pub fn assemble(dim: usize, omega: f64, mass: f64, kinetic: f64, potential: f64, moment: f64) -> Self {
        let n = dim as f64;
        Self {
            action: 0.5 * kinetic + 0.5 * omega * mass - potential,
            nehari: kinetic + omega * mass - moment,
            virial: kinetic - 0.5 * n * (moment - 2.0 * potential),
            mass,
            kinetic,
            potential,
            nonlinear_moment: moment,
            omega,
            dim,
        }
    }

    pub fn zero(dim: usize, omega: f64) -> Self {
        Self::assemble(dim, omega, 0.0, 0.0, 0.0, 0.0)
    }

    pub(crate) fn check_finite(self) -> Result<Self> {
        let all = [self.action, self.nehari, self.virial, self.mass, self.kinetic, self.potential];
        if all.iter().all(|v| v.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Numeric(format!("non-finite functional value in {self:?}")))
        }
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("omega must be positive, got {omega}")))
    }
}

/// `(∫G(a), ∫g(a) a)` for a slice of moduli scaled by `factor`.
fn nonlinear_sums(model: &NonlinearityModel, moduli: &[f64], factor: f64, cell: f64) -> (f64, f64) {
    let mut potential = 0.0;
    let mut moment = 0.0;
    for &a in moduli {
        let (gs, big) = model.pair(factor * a);
        moment += gs;
        potential += big;
    }
    (cell * potential, cell * moment)
}

pub fn evaluate(v: &ComplexField, model: &NonlinearityModel, omega: f64) -> Result<FunctionalReport> {
    check_omega(omega)?;
    check_dim(v, model)?;
    let grid = v.grid();
    let spectrum = v.spectrum();
    let kinetic = crate::field::spectral_kinetic(grid, &spectrum);
    let mass = v.mass();
    let moduli: Vec<f64> = v.dealiased().values().iter().map(|z| z.norm()).collect();
    let (potential, moment) = nonlinear_sums(model, &moduli, 1.0, grid.cell_volume());
    FunctionalReport::assemble(grid.dim(), omega, mass, kinetic, potential, moment).check_finite()
}

fn check_dim(v: &ComplexField, model: &NonlinearityModel) -> Result<()> {
    if v.grid().dim() != model.dim() {
        return Err(Error::Domain(format!(
            "field dimension {} does not match model dimension {}",
            v.grid().dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// `-Δv + ωv - P g(Pv)`, the gradient of `S` for the real inner product,
/// with `P` the 2/3-rule projection used by [`evaluate`].
pub fn action_gradient(v: &ComplexField, model: &NonlinearityModel, omega: f64) -> Result<ComplexField> {
    check_omega(omega)?;
    check_dim(v, model)?;
    let filtered = v.dealiased();
    let nl: Vec<Complex64> = filtered.values().iter().map(|z| z * model.rate(z.norm())).collect();
    let nl = ComplexField::from_values(v.grid(), nl)?.dealiased();
    let lap = v.laplacian();
    let values = v
        .values()
        .iter()
        .zip(lap.values())
        .zip(nl.values())
        .map(|((u, l), n)| -l + omega * u - n)
        .collect();
    ComplexField::from_values(v.grid(), values)
}

/// Strict-inequality flags for `{S < m, Q < 0, I < 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub below_level: bool,
    pub q_negative: bool,
    pub i_negative: bool,
    pub in_invariant_set: bool,
}

pub fn set_membership(report: &FunctionalReport, m: f64) -> Membership {
    let below_level = report.action < m;
    let q_negative = report.virial < 0.0;
    let i_negative = report.nehari < 0.0;
    Membership {
        below_level,
        q_negative,
        i_negative,
        in_invariant_set: below_level && q_negative && i_negative,
    }
}

/// Functionals of `t · v^λ`, `v^λ = λ^{N/2} v(λ·)`, by change of variables:
/// `K(t v^λ) = t²λ²K(v)`, `M(t v^λ) = t²M(v)` and
/// `∫F(t v^λ) = λ^{-N} ∫F(t λ^{N/2} v)`.
///
/// This route never resamples the field, so it is valid for any `λ > 0`
/// and is independent of [`ComplexField::rescale`].
#[derive(Clone, Debug)]
pub struct ScaledFunctionals<'a> {
    model: &'a NonlinearityModel,
    omega: f64,
    dim: usize,
    kinetic: f64,
    mass: f64,
    moduli: Vec<f64>,
    /// Power terms with their moments, which scale exactly in the amplitude.
    terms: Option<Vec<(f64, f64, f64)>>,
    cell: f64,
}

impl<'a> ScaledFunctionals<'a> {
    pub fn new(v: &ComplexField, model: &'a NonlinearityModel, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        check_dim(v, model)?;
        let moduli: Vec<f64> = v.dealiased().values().iter().map(|z| z.norm()).collect();
        let terms = model.term_moments(&moduli);
        Ok(Self {
            model,
            omega,
            dim: v.grid().dim(),
            kinetic: v.kinetic(),
            mass: v.mass(),
            moduli: if terms.is_some() { Vec::new() } else { moduli },
            terms,
            cell: v.grid().cell_volume(),
        })
    }

    pub fn kinetic(&self) -> f64 {
        self.kinetic
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn model(&self) -> &NonlinearityModel {
        self.model
    }

    /// Report of `t · v^λ`.
    pub fn report(&self, lambda: f64, t: f64) -> FunctionalReport {
        let n = self.dim as f64;
        let amp = t * lambda.powf(0.5 * n);
        let jac = lambda.powf(-n);
        let (potential, moment) = match &self.terms {
            Some(terms) => terms.iter().fold((0.0, 0.0), |(big, gs), &(c, p, sum)| {
                let q = c * amp.powf(p + 1.0) * sum * self.cell;
                (big + q / (p + 1.0), gs + q)
            }),
            None => nonlinear_sums(self.model, &self.moduli, amp, self.cell),
        };
        FunctionalReport::assemble(
            self.dim,
            self.omega,
            t * t * self.mass,
            t * t * lambda * lambda * self.kinetic,
            jac * potential,
            jac * moment,
        )
    }

    pub fn dilated(&self, lambda: f64) -> FunctionalReport {
        self.report(lambda, 1.0)
    }

    pub fn ray(&self, t: f64) -> FunctionalReport {
        self.report(1.0, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid, GridSpec};
    use crate::nonlinearity::{NonlinearitySpec, PowerTerm};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn grid() -> Arc<Grid> {
        Grid::new(GridSpec::default()).unwrap()
    }

    /// 1D solitary wave of `-φ'' + ωφ = φ^p`, sampled directly.
    fn soliton(grid: &Arc<Grid>, p: f64, omega: f64, scale: f64) -> ComplexField {
        let amp = ((p + 1.0) * omega / 2.0).powf(1.0 / (p - 1.0));
        let width = (p - 1.0) * omega.sqrt() / 2.0;
        ComplexField::sample(grid, |x| {
            let y = scale * x[0];
            Complex64::new(scale.sqrt() * amp * (width * y).cosh().powf(-2.0 / (p - 1.0)), 0.0)
        })
        .unwrap()
    }

    fn p7() -> NonlinearityModel {
        NonlinearityModel::pure_power(7.0, 1).unwrap()
    }

    #[test]
    fn zero_field() {
        let r = evaluate(&ComplexField::zeros(&grid()), &p7(), 1.0).unwrap();
        assert_eq!((r.action, r.nehari, r.virial), (0.0, 0.0, 0.0));
        let g = action_gradient(&ComplexField::zeros(&grid()), &p7(), 1.0).unwrap();
        assert_eq!(g.sup_norm(), 0.0);
    }

    #[test]
    fn ground_state_identities() {
        let g = grid();
        let phi = soliton(&g, 7.0, 1.0, 1.0);
        let r = evaluate(&phi, &p7(), 1.0).unwrap();
        assert!(r.nehari.abs() <= 1e-8 * r.kinetic, "{r:?}");
        assert!(r.virial.abs() <= 1e-8 * r.kinetic, "{r:?}");
        let res = action_gradient(&phi, &p7(), 1.0).unwrap();
        assert!(res.l2_norm() <= 1e-6 * phi.l2_norm());
    }

    #[test]
    fn gauge_invariance() {
        let g = grid();
        let w = soliton(&g, 7.0, 1.0, 1.1);
        let a = evaluate(&w, &p7(), 1.0).unwrap();
        for theta in [0.3, 1.7, 4.0] {
            let b = evaluate(&w.scaled(Complex64::from_polar(1.0, theta)), &p7(), 1.0).unwrap();
            for (x, y) in [(a.action, b.action), (a.virial, b.virial), (a.nehari, b.nehari)] {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(a.kinetic));
            }
        }
    }

    #[test]
    fn membership_examples() {
        let g = grid();
        let zero = evaluate(&ComplexField::zeros(&g), &p7(), 1.0).unwrap();
        let f = set_membership(&zero, 0.5);
        assert!(f.below_level && !f.q_negative && !f.i_negative && !f.in_invariant_set);

        let phi = evaluate(&soliton(&g, 7.0, 1.0, 1.0), &p7(), 1.0).unwrap();
        let f = set_membership(&phi, phi.action);
        assert!(!f.below_level && !f.in_invariant_set);

        let pert = evaluate(&soliton(&g, 7.0, 1.0, 1.05), &p7(), 1.0).unwrap();
        let f = set_membership(&pert, phi.action);
        assert!(f.below_level && f.q_negative && f.i_negative && f.in_invariant_set, "{pert:?}");
    }

    #[test]
    fn scaled_route_matches_direct_route() {
        let g = grid();
        let phi = soliton(&g, 7.0, 1.0, 1.0);
        let m = p7();
        let scaled = ScaledFunctionals::new(&phi, &m, 1.0).unwrap();
        let direct = evaluate(&phi, &m, 1.0).unwrap();
        let same = scaled.report(1.0, 1.0);
        for (a, b) in [(same.action, direct.action), (same.virial, direct.virial), (same.nehari, direct.nehari)] {
            assert!((a - b).abs() < 1e-13 * direct.kinetic, "{a} {b}");
        }
        for lambda in [0.7, 1.05, 1.6] {
            let a = scaled.dilated(lambda);
            let b = evaluate(&phi.rescale(lambda).unwrap(), &m, 1.0).unwrap();
            assert!((a.action - b.action).abs() < 1e-10 * b.kinetic);
            assert!((a.virial - b.virial).abs() < 1e-10 * b.kinetic);
            assert!((a.nehari - b.nehari).abs() < 1e-10 * b.kinetic);
        }
        let two = evaluate(&phi.scaled_real(2.0), &m, 1.0).unwrap();
        assert!((scaled.ray(2.0).action - two.action).abs() < 1e-12 * two.kinetic);
    }

    #[test]
    fn mixed_powers_scale_term_by_term() {
        let g = grid();
        let v = soliton(&g, 5.0, 1.0, 1.0);
        let spec = NonlinearitySpec::SumOfPowers {
            terms: vec![PowerTerm { coefficient: 1.0, exponent: 3.0 }, PowerTerm { coefficient: -0.5, exponent: 4.5 }],
        };
        let m = NonlinearityModel::new(spec, 1).unwrap();
        let scaled = ScaledFunctionals::new(&v, &m, 1.0).unwrap();
        for t in [0.3, 1.0, 1.7] {
            let a = scaled.ray(t);
            let b = evaluate(&v.scaled_real(t), &m, 1.0).unwrap();
            assert!((a.potential - b.potential).abs() < 1e-13 * b.potential.abs().max(1.0), "{a:?} {b:?}");
            assert!((a.nonlinear_moment - b.nonlinear_moment).abs() < 1e-13 * b.nonlinear_moment.abs().max(1.0));
        }
    }

    #[test]
    fn invalid_inputs() {
        let g = grid();
        assert!(evaluate(&ComplexField::zeros(&g), &p7(), 0.0).is_err());
        let m3 = NonlinearityModel::pure_power(3.0, 3).unwrap();
        assert!(evaluate(&ComplexField::zeros(&g), &m3, 1.0).is_err());
    }

    fn localized(grid: &Arc<Grid>, parts: &[(f64, f64, f64, f64)]) -> ComplexField {
        ComplexField::sample(grid, |x| {
            parts
                .iter()
                .map(|&(c, w, re, im)| Complex64::new(re, im) * (-((x[0] - c) / w).powi(2)).exp())
                .sum()
        })
        .unwrap()
    }

    fn parts() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
        prop::collection::vec((-3.0f64..3.0, 0.5f64..1.5, -1.2f64..1.2, -1.2f64..1.2), 1..=3)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_pairs_to_nehari(parts in parts()) {
            let g = Grid::new(GridSpec::one_d(20.0, 1024)).unwrap();
            let v = localized(&g, &parts);
            let m = p7();
            let r = evaluate(&v, &m, 1.0).unwrap();
            let pairing = action_gradient(&v, &m, 1.0).unwrap().inner_real(&v);
            prop_assert!((pairing - r.nehari).abs() <= 1e-8 * r.nehari.abs() + 1e-12 * (1.0 + r.kinetic + r.mass + r.nonlinear_moment));
        }

        #[test]
        fn directional_derivative_is_nehari(parts in parts()) {
            let g = Grid::new(GridSpec::one_d(20.0, 1024)).unwrap();
            let v = localized(&g, &parts);
            let m = p7();
            let r = evaluate(&v, &m, 1.0).unwrap();
            let h = 1e-5;
            let up = evaluate(&v.scaled_real(1.0 + h), &m, 1.0).unwrap().action;
            let down = evaluate(&v.scaled_real(1.0 - h), &m, 1.0).unwrap().action;
            let fd = (up - down) / (2.0 * h);
            let scale = r.kinetic + r.mass + r.nonlinear_moment;
            prop_assert!((fd - r.nehari).abs() <= 1e-4 * r.nehari.abs().max(1e-3 * scale), "{} vs {}", fd, r.nehari);
        }

        #[test]
        fn pohozaev_combination(parts in parts(), omega in 0.2f64..3.0) {
            let g = Grid::new(GridSpec::one_d(20.0, 1024)).unwrap();
            let v = localized(&g, &parts);
            let r = evaluate(&v, &p7(), omega).unwrap();
            let n = r.dim as f64;
            let rhs = 2.0 * r.action + 2.0 / n * r.virial - 2.0 / n * r.kinetic;
            let scale = r.kinetic + omega * r.mass + r.nonlinear_moment;
            prop_assert!((r.nehari - rhs).abs() <= 1e-13 * scale);
        }
    }
}
