//! Time integration of `i u_t + Δu + g(u) = 0` by Strang splitting on the
//! periodic grid, with adaptive steps, sampled diagnostics, validity guards
//! and a blow-up classification.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{spectral_kinetic, spectral_tail_fraction, ComplexField, Grid, GridSpec};
use crate::functionals::{set_membership, FunctionalReport, Membership};
use crate::nonlinearity::NonlinearityModel;

/// Smallest points per axis a refining run starts from.
pub const MIN_REFINE_POINTS: usize = 64;
/// Clean steps after which the step size may double.
pub const CLEAN_STEPS_BEFORE_GROWTH: usize = 10;
/// Relative slack on the `Q` bound and the parabola bound.
pub const BOUND_SLACK: f64 = 1e-3;
/// Floor of the virial comparison relative to the initial kinetic energy:
/// eight times the tolerance to which `Q` vanishes on a certified ground state.
pub const VIRIAL_FLOOR: f64 = 8.0 * crate::groundstate::IDENTITY_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorControls {
    pub t_max: f64,
    pub dt_initial: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// `t_max / 2000` when absent.
    pub sample_interval: Option<f64>,
    /// Per-step bound on `|ΔS|` relative to the current `|S| + K`.
    pub energy_drift_tol: f64,
    /// Bound on `dt · max g(|u|)/|u|`.
    pub phase_rotation_cap: f64,
    pub blowup_gradient_ratio: f64,
    /// Bound on the mass fraction outside the core box.
    pub leak_tol: f64,
    /// Half-width of the core box relative to the box.
    pub core_fraction: f64,
    /// Bound on the spectral energy fraction outside the 2/3 band.
    pub resolution_tol: f64,
    /// When set, the run starts on the coarsest grid of the same box whose
    /// 2/3-band tail is below this bound, and doubles the points per axis
    /// whenever a step would exceed it, up to the grid of `u₀`.
    pub refine_tol: Option<f64>,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            dt_initial: 1e-3,
            dt_min: 1e-14,
            dt_max: 1e-2,
            sample_interval: None,
            energy_drift_tol: 1e-6,
            phase_rotation_cap: 0.1,
            blowup_gradient_ratio: 1e3,
            leak_tol: 1e-6,
            core_fraction: 0.8,
            resolution_tol: 1e-8,
            refine_tol: None,
        }
    }
}

impl IntegratorControls {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_max", self.t_max),
            ("dt_initial", self.dt_initial),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("energy_drift_tol", self.energy_drift_tol),
            ("phase_rotation_cap", self.phase_rotation_cap),
            ("blowup_gradient_ratio", self.blowup_gradient_ratio),
            ("leak_tol", self.leak_tol),
            ("resolution_tol", self.resolution_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Configuration(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.dt_min < self.dt_initial && self.dt_initial <= self.dt_max) {
            return Err(Error::Configuration("need dt_min < dt_initial <= dt_max".into()));
        }
        if !(self.core_fraction > 0.0 && self.core_fraction < 1.0) {
            return Err(Error::Configuration("core_fraction must lie in (0, 1)".into()));
        }
        if let Some(tol) = self.refine_tol {
            if !(tol > 0.0 && tol <= self.resolution_tol) {
                return Err(Error::Configuration(format!("refine_tol must lie in (0, resolution_tol], got {tol}")));
            }
        }
        if let Some(h) = self.sample_interval {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Configuration(format!("sample_interval must be positive, got {h}")));
            }
        }
        Ok(())
    }

    pub fn sampling(&self) -> f64 {
        self.sample_interval.unwrap_or(self.t_max / 2000.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedTMax,
    BlowupDetected,
    LeakViolation,
    StepUnderflow,
    ResolutionLoss,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub dt: f64,
    pub report: FunctionalReport,
    pub grad_norm: f64,
    /// `‖x u‖₂²`.
    pub f_moment: f64,
    pub leak: f64,
    pub spectral_tail: f64,
    /// On the regular sampling lattice; false for gradient milestones.
    pub uniform: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub sample_interval: f64,
    /// Time and size of every accepted step.
    pub step_times: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub rejected_steps: usize,
    /// Largest accepted per-step drift of `S` relative to `|S| + K`.
    pub max_step_drift: f64,
    pub final_time: f64,
    pub max_grad_ratio: f64,
    /// Time and new points per axis of every grid refinement.
    pub refinements: Vec<(f64, usize)>,
    #[serde(skip)]
    pub final_field: Option<ComplexField>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn initial(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn membership(&self, level_m: f64) -> Vec<Membership> {
        self.samples.iter().map(|s| set_membership(&s.report, level_m)).collect()
    }

    pub fn grad_ratio(&self) -> f64 {
        self.max_grad_ratio
    }

    /// `t,dt,mass,S,I,Q,grad_norm,f,leak,in_set`; `in_set` is empty without a level.
    pub fn to_csv(&self, level_m: Option<f64>) -> String {
        let mut out = String::from("t,dt,mass,S,I,Q,grad_norm,f,leak,in_set\n");
        for s in &self.samples {
            let in_set = level_m.map(|m| set_membership(&s.report, m).in_invariant_set.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                s.t,
                s.dt,
                s.report.mass,
                s.report.action,
                s.report.nehari,
                s.report.virial,
                s.grad_norm,
                s.f_moment,
                s.leak,
                in_set
            ));
        }
        out
    }
}

/// One Strang step: half kinetic, exact nonlinear phase, half kinetic.
pub fn step_strang(u: &ComplexField, dt: f64, model: &NonlinearityModel) -> Result<ComplexField> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let grid = u.grid().clone();
    let mut stepper = Stepper::new(&grid, model, u)?;
    stepper.advance(dt)?;
    Ok(stepper.accept_field())
}

/// Spectral state plus cached propagators.
struct Stepper<'a> {
    grid: Arc<Grid>,
    model: &'a NonlinearityModel,
    spectrum: Vec<Complex64>,
    candidate: Vec<Complex64>,
    work: Vec<Complex64>,
    /// Half-step kinetic propagators for the two most recent step sizes.
    half: [(f64, Vec<Complex64>); 2],
    band: Vec<bool>,
    /// `max g(|u|)/|u|` over the last nonlinear substep.
    max_rate: f64,
}

/// `S` and `K` of a spectrum, nonlinear terms on its 2/3 band.
struct Energy {
    action: f64,
    kinetic: f64,
}

impl<'a> Stepper<'a> {
    fn new(grid: &Arc<Grid>, model: &'a NonlinearityModel, u: &ComplexField) -> Result<Self> {
        if grid.dim() != model.dim() {
            return Err(Error::Domain("field and model dimensions differ".into()));
        }
        let spectrum = u.spectrum();
        let band = grid.dealias_band().to_vec();
        let max_rate = u.values().iter().map(|z| model.rate(z.norm())).fold(0.0, f64::max);
        Ok(Self {
            grid: grid.clone(),
            model,
            candidate: spectrum.clone(),
            work: vec![Complex64::new(0.0, 0.0); spectrum.len()],
            spectrum,
            half: [(f64::NAN, Vec::new()), (f64::NAN, Vec::new())],
            band,
            max_rate,
        })
    }

    fn propagator(&mut self, dt: f64) {
        if self.half[0].0 == dt {
            return;
        }
        self.half.swap(0, 1);
        if self.half[0].0 != dt {
            self.half[0] = (dt, self.grid.k_squared().iter().map(|k2| Complex64::cis(-0.5 * k2 * dt)).collect());
        }
    }

    /// Computes the step from the accepted state into `candidate`.
    fn advance(&mut self, dt: f64) -> Result<()> {
        self.propagator(dt);
        for ((w, s), h) in self.work.iter_mut().zip(&self.spectrum).zip(&self.half[0].1) {
            *w = s * h;
        }
        self.grid.inverse(&mut self.work);
        let mut max_rate = 0.0f64;
        for z in self.work.iter_mut() {
            let rate = self.model.rate_sq(z.norm_sqr());
            max_rate = max_rate.max(rate);
            *z *= Complex64::cis(dt * rate);
        }
        self.max_rate = max_rate;
        self.grid.forward(&mut self.work);
        let mut finite = true;
        for ((c, w), h) in self.candidate.iter_mut().zip(&self.work).zip(&self.half[0].1) {
            *c = w * h;
            finite &= c.re.is_finite() && c.im.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Numeric("non-finite values after step".into()))
        }
    }

    fn energy_of(&mut self, which: bool, omega: f64) -> Energy {
        let spec = if which { &self.candidate } else { &self.spectrum };
        let kinetic = spectral_kinetic(&self.grid, spec);
        let weight = self.grid.cell_volume() / self.grid.len() as f64;
        let mass = weight * spec.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for ((w, s), &keep) in self.work.iter_mut().zip(spec).zip(&self.band) {
            *w = if keep { *s } else { Complex64::new(0.0, 0.0) };
        }
        self.grid.inverse(&mut self.work);
        let potential = self.grid.cell_volume() * self.work.iter().map(|z| self.model.primitive_sq(z.norm_sqr())).sum::<f64>();
        Energy { action: 0.5 * kinetic + 0.5 * omega * mass - potential, kinetic }
    }

    /// Spectral energy fraction of the candidate outside the 2/3 band.
    fn candidate_tail(&self) -> f64 {
        let (mut total, mut tail) = (0.0, 0.0);
        for (z, &keep) in self.candidate.iter().zip(&self.band) {
            let e = z.norm_sqr();
            total += e;
            if !keep {
                tail += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    fn is_finest(&self, target: &Grid) -> bool {
        self.grid.points() >= target.points()
    }

    /// The accepted state prolonged to twice the points per axis.
    fn refined(&self, target: &Arc<Grid>) -> Result<Self> {
        let spec = GridSpec { points: 2 * self.grid.points(), ..self.grid.spec() };
        let grid = if spec == target.spec() { target.clone() } else { Grid::new(spec)? };
        let u = self.field().prolong(&grid)?;
        Self::new(&grid, self.model, &u)
    }

    fn accept(&mut self) {
        std::mem::swap(&mut self.spectrum, &mut self.candidate);
    }

    fn accept_field(mut self) -> ComplexField {
        self.accept();
        self.field()
    }

    fn field(&self) -> ComplexField {
        ComplexField::from_spectrum(&self.grid, self.spectrum.clone())
    }

    /// Diagnostics of the accepted state together with its field.
    fn sample(&mut self, t: f64, dt: f64, omega: f64, controls: &IntegratorControls, uniform: bool) -> Result<(Sample, ComplexField)> {
        let grid = self.grid.clone();
        let kinetic = spectral_kinetic(&grid, &self.spectrum);
        let weight = grid.cell_volume() / grid.len() as f64;
        let mass = weight * self.spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>();
        for ((w, s), &keep) in self.work.iter_mut().zip(&self.spectrum).zip(&self.band) {
            *w = if keep { *s } else { Complex64::new(0.0, 0.0) };
        }
        grid.inverse(&mut self.work);
        let (mut potential, mut moment) = (0.0, 0.0);
        for z in &self.work {
            let (gs, big) = self.model.pair(z.norm());
            moment += gs;
            potential += big;
        }
        let cell = grid.cell_volume();
        let report =
            FunctionalReport::assemble(grid.dim(), omega, mass, kinetic, cell * potential, cell * moment).check_finite()?;
        let u = self.field();
        let sample = Sample {
            t,
            dt,
            grad_norm: kinetic.sqrt(),
            report,
            f_moment: u.weighted_moment(),
            leak: u.boundary_mass_fraction(controls.core_fraction),
            spectral_tail: spectral_tail_fraction(&grid, &self.spectrum),
            uniform,
        };
        Ok((sample, u))
    }
}

/// [`evolve_observed`] without an observer.
pub fn evolve(u0: &ComplexField, model: &NonlinearityModel, omega: f64, controls: &IntegratorControls) -> Result<TrajectoryRecord> {
    evolve_observed(u0, model, omega, controls, |_, _| {})
}

/// Integrates from `u0`; `observer` sees every recorded sample with its field.
/// Failure modes of the flow end the record instead of returning an error.
pub fn evolve_observed<F: FnMut(&Sample, &ComplexField)>(
    u0: &ComplexField,
    model: &NonlinearityModel,
    omega: f64,
    controls: &IntegratorControls,
    mut observer: F,
) -> Result<TrajectoryRecord> {
    controls.validate()?;
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("omega must be positive, got {omega}")));
    }
    u0.check_finite()?;
    let target = u0.grid().clone();
    let start = match controls.refine_tol {
        Some(tol) => coarsest_resolving(u0, tol)?,
        None => u0.clone(),
    };
    let mut stepper = Stepper::new(start.grid(), model, &start)?;
    let h = controls.sampling();
    let (first, u) = stepper.sample(0.0, controls.dt_initial, omega, controls, true)?;
    observer(&first, &u);
    let grad0 = first.grad_norm;
    let mut record = TrajectoryRecord {
        samples: vec![first],
        termination: Termination::ReachedTMax,
        sample_interval: h,
        step_times: Vec::new(),
        step_sizes: Vec::new(),
        rejected_steps: 0,
        max_step_drift: 0.0,
        final_time: 0.0,
        max_grad_ratio: 1.0,
        refinements: Vec::new(),
        final_field: None,
    };
    if first.leak > controls.leak_tol {
        record.termination = Termination::LeakViolation;
        record.final_field = Some(u0.clone());
        return Ok(record);
    }

    let mut t = 0.0;
    let mut dt = controls.dt_initial;
    let mut clean = 0usize;
    let mut next_index = 1usize;
    let mut milestone = 2.0;
    let mut current = stepper.energy_of(false, omega);
    let ratio_of = |kinetic: f64| if grad0 > 0.0 { kinetic.sqrt() / grad0 } else { 1.0 };

    while t < controls.t_max {
        let next_sample = (next_index as f64 * h).min(controls.t_max);
        if stepper.max_rate > 0.0 {
            dt = dt.min(controls.phase_rotation_cap / stepper.max_rate);
        }
        if dt < controls.dt_min {
            record.termination = Termination::StepUnderflow;
            break;
        }
        let lands = t + dt >= next_sample - 1e-12 * next_sample.max(1.0);
        let step = if lands { next_sample - t } else { dt };

        let advanced = stepper.advance(step);
        if let Some(tol) = controls.refine_tol {
            if advanced.is_ok() && !stepper.is_finest(&target) && stepper.candidate_tail() > tol {
                stepper = stepper.refined(&target)?;
                record.refinements.push((t, stepper.grid.points()));
                current = stepper.energy_of(false, omega);
                continue;
            }
        }
        let rotation_ok = stepper.max_rate * step <= controls.phase_rotation_cap * (1.0 + 1e-12);
        let candidate = stepper.energy_of(true, omega);
        let scale = current.action.abs() + current.kinetic;
        let change = (candidate.action - current.action).abs();
        let drift = if scale > 0.0 { change / scale } else { change };
        if advanced.is_err() || !rotation_ok || !(drift <= controls.energy_drift_tol) {
            record.rejected_steps += 1;
            dt = 0.5 * step.min(dt);
            clean = 0;
            continue;
        }
        if stepper.candidate_tail() > controls.resolution_tol {
            record.termination = Termination::ResolutionLoss;
            break;
        }
        stepper.accept();
        current = candidate;
        t = if lands { next_sample } else { t + step };
        record.step_times.push(t);
        record.step_sizes.push(step);
        record.max_step_drift = record.max_step_drift.max(drift);
        record.final_time = t;
        let ratio = ratio_of(current.kinetic);
        record.max_grad_ratio = record.max_grad_ratio.max(ratio);
        clean += 1;
        if clean >= CLEAN_STEPS_BEFORE_GROWTH {
            dt = (2.0 * dt).min(controls.dt_max);
            clean = 0;
        }

        let blowup = ratio >= controls.blowup_gradient_ratio;
        let at_milestone = ratio >= milestone;
        if lands || blowup || at_milestone {
            let (sample, u) = stepper.sample(t, step, omega, controls, lands)?;
            if sample.leak > controls.leak_tol {
                record.termination = Termination::LeakViolation;
                break;
            }
            observer(&sample, &u);
            record.samples.push(sample);
            if lands {
                next_index += 1;
            }
            while milestone <= ratio {
                milestone *= 2.0;
            }
        }
        if blowup {
            record.termination = Termination::BlowupDetected;
            break;
        }
    }
    let last = stepper.field();
    record.final_field = Some(if stepper.is_finest(&target) { last } else { last.prolong(&target)? });
    Ok(record)
}

/// `u0` restricted to the coarsest grid, halving from its own, on which
/// the spectrum outside the 2/3 band stays below `tol`.
fn coarsest_resolving(u0: &ComplexField, tol: f64) -> Result<ComplexField> {
    let grid = u0.grid();
    let spectrum = u0.spectrum();
    let total: f64 = spectrum.iter().map(|z| z.norm_sqr()).sum();
    let (m, dim) = (grid.points(), grid.dim());
    let mut points = m;
    while points / 2 >= MIN_REFINE_POINTS {
        let coarse = points / 2;
        let tail: f64 = spectrum
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                let mut rest = *idx;
                (0..dim).any(|_| {
                    let j = rest % m;
                    rest /= m;
                    3 * j.min(m - j) > coarse
                })
            })
            .map(|(_, z)| z.norm_sqr())
            .sum();
        if total > 0.0 && tail > tol * total {
            break;
        }
        points = coarse;
    }
    if points == m {
        return Ok(u0.clone());
    }
    u0.restrict(&Grid::new(GridSpec { points, ..grid.spec() })?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    BlewUp,
    StableWindow,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupVerdict {
    pub status: VerdictStatus,
    /// Extrapolated zero of the step-size collapse.
    #[serde(rename = "T_estimate")]
    pub t_estimate: Option<f64>,
    /// Positive root of `f(0) + f'(0) t - δ t²`.
    pub parabola_time: Option<f64>,
    pub delta: Option<f64>,
    pub parabola_ok: bool,
    pub q_bound_ok: bool,
    pub grad_ratio: f64,
}

/// Zero of a least-squares line through the last quarter of `(t, dt)`.
pub fn collapse_time(record: &TrajectoryRecord) -> Option<f64> {
    let n = record.step_times.len();
    if n < 8 {
        return None;
    }
    let start = n - n / 4;
    let ts = &record.step_times[start..];
    let ds = &record.step_sizes[start..];
    let k = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / k;
    let md = ds.iter().sum::<f64>() / k;
    let sxy: f64 = ts.iter().zip(ds).map(|(t, d)| (t - mt) * (d - md)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    let root = mt - md / slope;
    (root.is_finite() && root >= record.final_time).then_some(root)
}

/// `f'(0)` from the one-sided second-order difference of the first uniform samples.
fn initial_slope(record: &TrajectoryRecord) -> Option<f64> {
    let u: Vec<&Sample> = record.samples.iter().filter(|s| s.uniform).take(3).collect();
    if u.len() < 3 {
        return None;
    }
    let h = u[1].t - u[0].t;
    Some((-3.0 * u[0].f_moment + 4.0 * u[1].f_moment - u[2].f_moment) / (2.0 * h))
}

/// Positive root of `f0 + f1 t - δ t²`.
pub fn parabola_root(f0: f64, f1: f64, delta: f64) -> Option<f64> {
    if !(delta > 0.0) {
        return None;
    }
    Some((f1 + (f1 * f1 + 4.0 * delta * f0).sqrt()) / (2.0 * delta))
}

/// `Q(u(t)) ≤ -δ + slack·δ` at every sample.
pub fn q_bound_holds(record: &TrajectoryRecord, delta: f64) -> bool {
    delta > 0.0 && record.samples.iter().all(|s| s.report.virial <= -delta + BOUND_SLACK * delta)
}

/// `f(t) ≤ f(0) + f'(0) t - δ t² + slack·δ t²` at every sample.
pub fn parabola_holds(record: &TrajectoryRecord, delta: f64) -> bool {
    let Some(f1) = initial_slope(record) else { return false };
    let f0 = record.initial().f_moment;
    delta > 0.0
        && record
            .samples
            .iter()
            .all(|s| s.f_moment <= f0 + f1 * s.t - delta * s.t * s.t + BOUND_SLACK * delta * s.t * s.t + 1e-12 * f0)
}

fn dt_collapsing(record: &TrajectoryRecord) -> bool {
    let n = record.step_sizes.len();
    n >= 20 && {
        let tail = &record.step_sizes[n - 20..];
        tail[tail.len() - 1] < 0.5 * tail[0]
    }
}

/// Classifies a record. `delta` enables the `Q` and parabola bounds.
pub fn classify(record: &TrajectoryRecord, controls: &IntegratorControls, delta: Option<f64>) -> BlowupVerdict {
    let ratio = record.max_grad_ratio;
    let status = match record.termination {
        Termination::BlowupDetected => VerdictStatus::BlewUp,
        Termination::StepUnderflow if ratio >= controls.blowup_gradient_ratio.sqrt() && dt_collapsing(record) => {
            VerdictStatus::BlewUp
        }
        Termination::ReachedTMax if ratio <= 2.0 => VerdictStatus::StableWindow,
        _ => VerdictStatus::Inconclusive,
    };
    let f0 = record.initial().f_moment;
    let parabola_time = match (delta, initial_slope(record)) {
        (Some(d), Some(f1)) => parabola_root(f0, f1, d),
        _ => None,
    };
    BlowupVerdict {
        status,
        t_estimate: if status == VerdictStatus::BlewUp { collapse_time(record) } else { None },
        parabola_time,
        delta,
        parabola_ok: delta.is_some_and(|d| parabola_holds(record, d)),
        q_bound_ok: delta.is_some_and(|d| q_bound_holds(record, d)),
        grad_ratio: ratio,
    }
}

/// Worst relative error between the centered second difference of `f` and
/// `8Q` over the leading uniformly spaced samples.
pub fn virial_check(record: &TrajectoryRecord) -> Result<f64> {
    let uniform: Vec<&Sample> = record.samples.iter().filter(|s| s.uniform).collect();
    let h = record.sample_interval;
    let mut run = uniform.len().min(1);
    while run < uniform.len() && ((uniform[run].t - uniform[run - 1].t) - h).abs() <= 1e-9 * h.max(uniform[run].t) {
        run += 1;
    }
    if uniform.len() >= 2 && run < 2 {
        return Err(Error::Resampling("samples are not uniformly spaced".into()));
    }
    if run < 5 {
        return Err(Error::Domain(format!("virial check needs 5 uniform samples, got {run}")));
    }
    let floor = VIRIAL_FLOOR * record.initial().report.kinetic.max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 1..run - 1 {
        let second = (uniform[i + 1].f_moment - 2.0 * uniform[i].f_moment + uniform[i - 1].f_moment) / (h * h);
        let eight_q = 8.0 * uniform[i].report.virial;
        worst = worst.max((second - eight_q).abs() / (eight_q.abs() + floor));
    }
    Ok(worst)
}

/// Largest relative deviations of mass and action from their initial values;
/// the action is measured against `|S(u₀)| + K(u₀)`.
pub fn conservation_check(record: &TrajectoryRecord) -> (f64, f64) {
    let first = record.initial().report;
    let mass_scale = first.mass;
    let action_scale = first.action.abs() + first.kinetic;
    let rel = |d: f64, scale: f64| if scale > 0.0 { d.abs() / scale } else { 0.0 };
    record.samples.iter().fold((0.0f64, 0.0f64), |(m, s), x| {
        (m.max(rel(x.report.mass - first.mass, mass_scale)), s.max(rel(x.report.action - first.action, action_scale)))
    })
}
