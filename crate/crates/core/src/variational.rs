//! Variational levels over explicit profile families: the Nehari level
//! `d(ω)`, the level `d_𝓜` on `{Q = 0, I ≤ 0}`, and the mountain-pass level
//! over straight rays. All three should reproduce the ground-state action.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid};
use crate::functionals::ScaledFunctionals;
use crate::nonlinearity::NonlinearityModel;
use crate::rescale::{find_q_root, ROOT_TOL};

/// Number of amplitude doublings or halvings tried when bracketing on a ray.
pub const MAX_BRACKET_STEPS: usize = 60;
/// Amplitudes sampled when confirming the ray maximum.
pub const RAY_SAMPLES: usize = 100;
/// `I(v^{λ₀}) ≤ ADMISSION_TOL · kinetic` admits a member to the `d_𝓜` minimum.
pub const ADMISSION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `amplitude · φ^dilation`.
    GroundState {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        dilation: f64,
    },
    /// `amplitude · exp(-|x|²/width²)`.
    Gaussian { width: f64, amplitude: f64 },
    /// `amplitude · sech(|x|/width)^power`.
    SechPower { width: f64, amplitude: f64, power: f64 },
    /// Two Gaussians at `±separation/2` along the first axis.
    TwoBump { separation: f64, width: f64, amplitude: f64 },
}

fn one() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn label(&self) -> String {
        match self {
            Self::GroundState { amplitude, dilation } => format!("ground_state(a={amplitude},l={dilation})"),
            Self::Gaussian { width, amplitude } => format!("gaussian(w={width},a={amplitude})"),
            Self::SechPower { width, amplitude, power } => format!("sech_power(w={width},a={amplitude},p={power})"),
            Self::TwoBump { separation, width, amplitude } => {
                format!("two_bump(s={separation},w={width},a={amplitude})")
            }
        }
    }

    pub fn build(&self, grid: &Arc<Grid>, ground_state: Option<&ComplexField>) -> Result<ComplexField> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            Self::GroundState { amplitude, dilation } => {
                let phi = ground_state.ok_or_else(|| Error::Family("ground-state member without a ground state".into()))?;
                positive("dilation", dilation)?;
                Ok(phi.rescale(dilation)?.scaled_real(amplitude))
            }
            Self::Gaussian { width, amplitude } => {
                positive("width", width)?;
                ComplexField::sample_radial(grid, |r| amplitude * (-(r / width).powi(2)).exp())
            }
            Self::SechPower { width, amplitude, power } => {
                positive("width", width)?;
                positive("power", power)?;
                ComplexField::sample_radial(grid, |r| {
                    let e = (-r / width).exp();
                    amplitude * (2.0 * e / (1.0 + e * e)).powf(power)
                })
            }
            Self::TwoBump { separation, width, amplitude } => {
                positive("width", width)?;
                ComplexField::sample(grid, |x| {
                    let rest: f64 = x[1..].iter().map(|y| y * y).sum();
                    let bump = |c: f64| (-((x[0] - c).powi(2) + rest) / (width * width)).exp();
                    Complex64::new(amplitude * (bump(0.5 * separation) + bump(-0.5 * separation)), 0.0)
                })
            }
        }
    }
}

/// A profile family: optional ground state, a width × amplitude grid of
/// Gaussians, a width × power grid of sech powers, and explicit members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    pub include_ground_state: bool,
    pub gaussian_widths: Vec<f64>,
    pub gaussian_amplitudes: Vec<f64>,
    pub sech_widths: Vec<f64>,
    pub sech_powers: Vec<f64>,
    pub members: Vec<ProfileSpec>,
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            include_ground_state: true,
            gaussian_widths: log_spaced(0.3, 3.0, 10),
            gaussian_amplitudes: vec![0.5, 1.0, 1.5, 2.0],
            sech_widths: log_spaced(0.2, 2.0, 5),
            sech_powers: vec![1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0],
            members: Vec::new(),
        }
    }
}

impl FamilySpec {
    /// `widths × amplitudes` Gaussians with log-spaced widths, no ground state.
    pub fn gaussians(widths: (f64, f64, usize), amplitudes: (f64, f64, usize)) -> Self {
        Self {
            include_ground_state: false,
            gaussian_widths: log_spaced(widths.0, widths.1, widths.2),
            gaussian_amplitudes: log_spaced(amplitudes.0, amplitudes.1, amplitudes.2),
            sech_widths: Vec::new(),
            sech_powers: Vec::new(),
            members: Vec::new(),
        }
    }

    pub fn only(members: Vec<ProfileSpec>) -> Self {
        Self {
            include_ground_state: false,
            gaussian_widths: Vec::new(),
            gaussian_amplitudes: Vec::new(),
            sech_widths: Vec::new(),
            sech_powers: Vec::new(),
            members,
        }
    }

    pub fn profiles(&self) -> Vec<ProfileSpec> {
        let mut out = Vec::new();
        if self.include_ground_state {
            out.push(ProfileSpec::GroundState { amplitude: 1.0, dilation: 1.0 });
        }
        for &width in &self.gaussian_widths {
            for &amplitude in &self.gaussian_amplitudes {
                out.push(ProfileSpec::Gaussian { width, amplitude });
            }
        }
        for &width in &self.sech_widths {
            for &power in &self.sech_powers {
                out.push(ProfileSpec::SechPower { width, amplitude: 1.0, power });
            }
        }
        out.extend(self.members.iter().cloned());
        out
    }

    /// Labelled fields; members that cannot be built are reported as errors.
    pub fn build(&self, grid: &Arc<Grid>, ground_state: Option<&ComplexField>) -> Vec<(String, Result<ComplexField>)> {
        self.profiles().into_iter().map(|p| (p.label(), p.build(grid, ground_state))).collect()
    }
}

#[derive(Clone, Debug)]
pub struct NehariProjection {
    pub t_star: f64,
    pub projected: ComplexField,
    /// `S(t* v)`.
    pub action: f64,
    /// `S(t v) ≤ S(t* v)` at every sampled amplitude.
    pub ray_max_ok: bool,
}

/// Bisection in `ln t` on a function that is positive at `lo`, negative at `hi`.
fn bisect_log<F: Fn(f64) -> f64, T: Fn(f64) -> f64>(f: F, tol: T, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let v = f(mid);
        if v.abs() <= tol(mid) || hi / lo - 1.0 < 4.0 * f64::EPSILON {
            return mid;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

fn nehari_amplitude(sf: &ScaledFunctionals) -> Result<f64> {
    if sf.mass() == 0.0 {
        return Err(Error::Projection("zero field".into()));
    }
    let i = |t: f64| sf.ray(t).nehari;
    let tol = |t: f64| ROOT_TOL * t * t * sf.kinetic();
    let i1 = i(1.0);
    if i1.abs() <= tol(1.0) {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    for _ in 0..MAX_BRACKET_STEPS {
        if i1 > 0.0 {
            hi *= 2.0;
            if i(hi) < 0.0 {
                return Ok(bisect_log(i, tol, hi / 2.0, hi));
            }
        } else {
            lo *= 0.5;
            if i(lo) > 0.0 {
                return Ok(bisect_log(i, tol, lo, lo * 2.0));
            }
        }
    }
    Err(Error::Projection(format!("no sign change of I(tv) within 2^±{MAX_BRACKET_STEPS}")))
}

/// The unique `t* > 0` with `I(t* v) = 0`, and `t* v`.
pub fn nehari_project(v: &ComplexField, model: &NonlinearityModel, omega: f64) -> Result<NehariProjection> {
    let sf = ScaledFunctionals::new(v, model, omega)?;
    let t_star = nehari_amplitude(&sf)?;
    let action = sf.ray(t_star).action;
    let ray_max_ok = (1..=RAY_SAMPLES).all(|j| {
        let t = 2.0 * t_star * j as f64 / RAY_SAMPLES as f64;
        sf.ray(t).action <= action + 1e-12 * action.abs()
    });
    Ok(NehariProjection { t_star, projected: v.scaled_real(t_star), action, ray_max_ok })
}

/// One family member's contribution to the three level estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub member_id: String,
    /// `S` at the Nehari projection.
    #[serde(rename = "S_projected")]
    pub s_projected: Option<f64>,
    pub t_star: Option<f64>,
    pub ray_max_ok: bool,
    /// Root of `λ ↦ Q(v^λ)`.
    pub lambda0: Option<f64>,
    /// `S(v^{λ₀})`.
    pub s_on_manifold: Option<f64>,
    /// Whether `v^{λ₀}` satisfies `I ≤ 0`.
    pub admitted: bool,
    /// `max_t S(t A v)` over the ray to negative action.
    pub ray_level: Option<f64>,
    pub unique_ray_max: bool,
    /// `max(|I(t* v)|, |Q(v^{λ₀})|) / kinetic`.
    pub constraint_violation: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalReport {
    pub m_ref: f64,
    pub d_omega_est: f64,
    #[serde(rename = "d_M_est")]
    pub d_m_est: f64,
    pub c_est: f64,
    pub family_size: usize,
    pub worst_constraint_violation: f64,
    pub all_rays_unique_max: bool,
    pub members: Vec<MemberRecord>,
}

impl VariationalReport {
    pub fn members_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        let mut out = String::from("member_id,S_projected,t_star,lambda0,admitted\n");
        for m in &self.members {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                m.member_id,
                opt(m.s_projected),
                opt(m.t_star),
                opt(m.lambda0),
                m.admitted
            ));
        }
        out
    }
}

/// `Q(v^λ) ≤ 0`-root level: `S(v^{λ₀})` and `I(v^{λ₀})`, computed by change
/// of variables.
fn manifold_point(v: &ComplexField, model: &NonlinearityModel, omega: f64) -> Result<(f64, f64, f64, f64)> {
    let lambda0 = find_q_root(v, model, omega)?;
    let sf = ScaledFunctionals::new(v, model, omega)?;
    let r = sf.dilated(lambda0);
    Ok((lambda0, r.action, r.nehari, r.virial.abs() / r.kinetic))
}

/// Maximum of `S(t A v)` over `t ∈ [0, 1]` and whether the sampled slope
/// changes sign exactly once.
fn ray_level(sf: &ScaledFunctionals, amplitude: Option<f64>) -> Result<(f64, bool)> {
    let end = match amplitude {
        Some(a) => {
            if !(sf.ray(a).action < 0.0) {
                return Err(Error::Ray(format!("S(Av) = {} is not negative at A = {a}", sf.ray(a).action)));
            }
            a
        }
        None => {
            let mut a = 1.0;
            let mut found = None;
            for _ in 0..MAX_BRACKET_STEPS {
                if sf.ray(a).action < 0.0 {
                    found = Some(a);
                    break;
                }
                a *= 2.0;
            }
            found.ok_or_else(|| Error::Ray("S(tv) stays nonnegative".into()))?
        }
    };
    const SAMPLES: usize = 400;
    let s = |t: f64| sf.ray(t * end).action;
    let values: Vec<f64> = (0..=SAMPLES).map(|j| s(j as f64 / SAMPLES as f64)).collect();
    let slopes: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let changes = slopes.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count();
    let best = (0..=SAMPLES).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let (mut a, mut b) = ((best.max(1) - 1) as f64 / SAMPLES as f64, (best + 1).min(SAMPLES) as f64 / SAMPLES as f64);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - ratio * (b - a), a + ratio * (b - a));
    let (mut fc, mut fd) = (s(c), s(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = s(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = s(d);
        }
    }
    let level = values[best].max(fc).max(fd);
    Ok((level, changes == 1))
}

fn evaluate_member(
    id: String,
    field: Result<ComplexField>,
    model: &NonlinearityModel,
    omega: f64,
    amplitude: Option<f64>,
) -> MemberRecord {
    let mut rec = MemberRecord {
        member_id: id,
        s_projected: None,
        t_star: None,
        ray_max_ok: false,
        lambda0: None,
        s_on_manifold: None,
        admitted: false,
        ray_level: None,
        unique_ray_max: false,
        constraint_violation: 0.0,
        error: None,
    };
    let mut errors = Vec::new();
    let v = match field {
        Ok(v) => v,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    match nehari_project(&v, model, omega) {
        Ok(p) => {
            rec.s_projected = Some(p.action);
            rec.t_star = Some(p.t_star);
            rec.ray_max_ok = p.ray_max_ok;
            if let Ok(sf) = ScaledFunctionals::new(&v, model, omega) {
                let r = sf.ray(p.t_star);
                rec.constraint_violation = rec.constraint_violation.max(r.nehari.abs() / r.kinetic);
            }
        }
        Err(e) => errors.push(e.to_string()),
    }
    match manifold_point(&v, model, omega) {
        Ok((lambda0, s, i, q_violation)) => {
            rec.lambda0 = Some(lambda0);
            rec.s_on_manifold = Some(s);
            rec.admitted = i <= ADMISSION_TOL * v.kinetic() * lambda0 * lambda0;
            rec.constraint_violation = rec.constraint_violation.max(q_violation);
        }
        Err(e) => errors.push(e.to_string()),
    }
    match ScaledFunctionals::new(&v, model, omega).and_then(|sf| ray_level(&sf, amplitude)) {
        Ok((level, unique)) => {
            rec.ray_level = Some(level);
            rec.unique_ray_max = unique;
        }
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        rec.error = Some(errors.join("; "));
    }
    rec
}

fn members(
    family: &FamilySpec,
    grid: &Arc<Grid>,
    ground_state: Option<&ComplexField>,
    model: &NonlinearityModel,
    omega: f64,
    amplitude: Option<f64>,
) -> Vec<MemberRecord> {
    family
        .build(grid, ground_state)
        .into_par_iter()
        .map(|(id, field)| evaluate_member(id, field, model, omega, amplitude))
        .collect()
}

fn minimum<I: Iterator<Item = f64>>(values: I, what: &str) -> Result<f64> {
    values
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
        .ok_or_else(|| Error::Family(format!("no member yields {what}")))
}

/// Minimum of `S` over the Nehari projections of the family.
pub fn estimate_d_omega(
    family: &FamilySpec,
    grid: &Arc<Grid>,
    ground_state: Option<&ComplexField>,
    model: &NonlinearityModel,
    omega: f64,
) -> Result<f64> {
    let recs = members(family, grid, ground_state, model, omega, None);
    minimum(recs.iter().filter_map(|r| r.s_projected), "a Nehari projection")
}

/// Minimum of `S(v^{λ₀})` over members with `I(v^{λ₀}) ≤ 0`.
pub fn estimate_d_m(
    family: &FamilySpec,
    grid: &Arc<Grid>,
    ground_state: Option<&ComplexField>,
    model: &NonlinearityModel,
    omega: f64,
) -> Result<f64> {
    let recs = members(family, grid, ground_state, model, omega, None);
    minimum(recs.iter().filter(|r| r.admitted).filter_map(|r| r.s_on_manifold), "an admitted manifold point")
}

/// Minimum over seeds of `max_{t∈[0,1]} S(t A v)`; `A` is found by doubling
/// when absent.
pub fn mountain_pass_level(
    family: &FamilySpec,
    grid: &Arc<Grid>,
    ground_state: Option<&ComplexField>,
    model: &NonlinearityModel,
    omega: f64,
    amplitude: Option<f64>,
) -> Result<f64> {
    let recs = members(family, grid, ground_state, model, omega, amplitude);
    minimum(recs.iter().filter_map(|r| r.ray_level), "a ray level")
}

/// All three estimates from one pass over the family.
pub fn variational_report(
    family: &FamilySpec,
    ground_state: &ComplexField,
    m_ref: f64,
    model: &NonlinearityModel,
    omega: f64,
) -> Result<VariationalReport> {
    let recs = members(family, ground_state.grid(), Some(ground_state), model, omega, None);
    Ok(VariationalReport {
        m_ref,
        d_omega_est: minimum(recs.iter().filter_map(|r| r.s_projected), "a Nehari projection")?,
        d_m_est: minimum(recs.iter().filter(|r| r.admitted).filter_map(|r| r.s_on_manifold), "an admitted manifold point")?,
        c_est: minimum(recs.iter().filter_map(|r| r.ray_level), "a ray level")?,
        family_size: recs.len(),
        worst_constraint_violation: recs.iter().map(|r| r.constraint_violation).fold(0.0, f64::max),
        all_rays_unique_max: recs.iter().filter(|r| r.ray_level.is_some()).all(|r| r.unique_ray_max),
        members: recs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::functionals::evaluate;
    use crate::groundstate::closed_form_1d;

    struct Setup {
        grid: Arc<Grid>,
        model: NonlinearityModel,
        phi: ComplexField,
        m: f64,
    }

    fn setup() -> Setup {
        let grid = Grid::new(GridSpec::default()).unwrap();
        let model = NonlinearityModel::pure_power(7.0, 1).unwrap();
        let gs = closed_form_1d(&model, 1.0, &grid).unwrap();
        Setup { grid, model, m: gs.level_m, phi: gs.field }
    }

    #[test]
    fn nehari_projection_examples() {
        let s = setup();
        let p = nehari_project(&s.phi, &s.model, 1.0).unwrap();
        assert!((p.t_star - 1.0).abs() < 1e-8);
        let p = nehari_project(&s.phi.scaled_real(2.0), &s.model, 1.0).unwrap();
        assert!((p.t_star - 0.5).abs() < 1e-8);

        let gauss = ComplexField::sample_radial(&s.grid, |r| (-r * r).exp()).unwrap();
        let p = nehari_project(&gauss, &s.model, 1.0).unwrap();
        let r = evaluate(&p.projected, &s.model, 1.0).unwrap();
        assert!(r.nehari.abs() <= 1e-10 * r.kinetic, "{r:?}");
        assert!(p.ray_max_ok);
        // dense ray scan oracle
        let best = (1..=2000)
            .map(|j| evaluate(&gauss.scaled_real(3.0 * p.t_star * j as f64 / 2000.0), &s.model, 1.0).unwrap().action)
            .fold(f64::MIN, f64::max);
        assert!(best <= p.action + 1e-12 && best > p.action - 1e-5);

        assert!(matches!(nehari_project(&ComplexField::zeros(&s.grid), &s.model, 1.0), Err(Error::Projection(_))));
    }

    #[test]
    fn ground_state_family_levels() {
        let s = setup();
        let fam = FamilySpec::only(vec![ProfileSpec::GroundState { amplitude: 1.0, dilation: 1.0 }]);
        let d = estimate_d_omega(&fam, &s.grid, Some(&s.phi), &s.model, 1.0).unwrap();
        assert!((d - s.m).abs() <= 1e-10 * s.m);
        let dm = estimate_d_m(&fam, &s.grid, Some(&s.phi), &s.model, 1.0).unwrap();
        assert!((dm - s.m).abs() <= 1e-6);
        let c = mountain_pass_level(&fam, &s.grid, Some(&s.phi), &s.model, 1.0, Some(2.0)).unwrap();
        assert!((c - s.m).abs() <= 1e-6);
        let c4 = mountain_pass_level(&fam, &s.grid, Some(&s.phi), &s.model, 1.0, Some(4.0)).unwrap();
        assert!((c4 - c).abs() <= 1e-8);
    }

    #[test]
    fn transformed_ground_states() {
        let s = setup();
        let fam = FamilySpec::only(vec![
            ProfileSpec::GroundState { amplitude: 1.0, dilation: 1.0 },
            ProfileSpec::GroundState { amplitude: 2.0, dilation: 1.0 },
            ProfileSpec::GroundState { amplitude: 1.0, dilation: 1.3 },
        ]);
        let d = estimate_d_omega(&fam, &s.grid, Some(&s.phi), &s.model, 1.0).unwrap();
        assert!((d - s.m).abs() <= 1e-6);
        let dilated = FamilySpec::only(vec![ProfileSpec::GroundState { amplitude: 1.0, dilation: 1.1 }]);
        let dm = estimate_d_m(&dilated, &s.grid, Some(&s.phi), &s.model, 1.0).unwrap();
        assert!((dm - s.m).abs() <= 1e-3);
    }

    #[test]
    fn gaussian_family_bounds() {
        let s = setup();
        let fam = FamilySpec::gaussians((0.2, 4.0, 20), (0.3, 3.0, 10));
        assert_eq!(fam.profiles().len(), 200);
        let d = estimate_d_omega(&fam, &s.grid, None, &s.model, 1.0).unwrap();
        // analytic Nehari level of e^{-x²/w²}: (3/8)(K+M)^{4/3}/(∫v⁸)^{1/3}
        let level = |w: f64| {
            let c = (std::f64::consts::PI / 2.0).sqrt();
            let (k, m, n) = (c / w, c * w, w * (std::f64::consts::PI / 8.0).sqrt());
            0.375 * (k + m).powf(4.0 / 3.0) / n.powf(1.0 / 3.0)
        };
        let best = (0..=20000).map(|j| level(0.2 * 20f64.powf(j as f64 / 20000.0))).fold(f64::MAX, f64::min);
        assert!(d >= s.m - 1e-6, "{d} vs {}", s.m);
        assert!(d >= best - 1e-8 && d <= best * (1.0 + 1e-3), "{d} vs {best}");
        let dm = estimate_d_m(&fam, &s.grid, None, &s.model, 1.0).unwrap();
        assert!(dm >= s.m - 1e-6);
        let c = mountain_pass_level(&fam, &s.grid, None, &s.model, 1.0, None).unwrap();
        assert!(c >= s.m - 1e-6);
    }

    #[test]
    fn report_and_csv() {
        let s = setup();
        let r = variational_report(&FamilySpec::default(), &s.phi, s.m, &s.model, 1.0).unwrap();
        assert!((r.d_omega_est - s.m).abs() <= 1e-6);
        assert!((r.d_m_est - s.m).abs() <= 1e-6);
        assert!((r.c_est - s.m).abs() <= 1e-6);
        assert!(r.all_rays_unique_max);
        assert!(r.members.iter().all(|m| m.ray_max_ok));
        let csv = r.members_csv();
        assert!(csv.starts_with("member_id,S_projected,t_star,lambda0,admitted\n"));
        assert_eq!(csv.lines().count(), r.family_size + 1);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["d_M_est"].is_number());
    }

    #[test]
    fn ray_without_negative_action() {
        let s = setup();
        let sf = ScaledFunctionals::new(&s.phi, &s.model, 1.0).unwrap();
        assert!(matches!(ray_level(&sf, Some(0.5)), Err(Error::Ray(_))));
    }

    #[test]
    fn family_spec_parses() {
        let spec: FamilySpec = serde_json::from_str(
            r#"{"include_ground_state": false, "members": [{"kind": "two_bump", "separation": 3.0, "width": 0.7, "amplitude": 1.2}]}"#,
        )
        .unwrap();
        assert_eq!(spec.profiles().len(), FamilySpec::default().profiles().len());
        assert_eq!(spec.profiles().last().unwrap().label(), "two_bump(s=3,w=0.7,a=1.2)");
        assert!(!spec.profiles().iter().any(|p| matches!(p, ProfileSpec::GroundState { .. })));
        assert!(serde_json::from_str::<FamilySpec>(r#"{"bogus": 1}"#).is_err());
    }
}
