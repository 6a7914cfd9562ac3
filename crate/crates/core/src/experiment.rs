//! End-to-end instability experiment from a perturbed ground state, and the
//! subcritical stability contrast.
//!
//! [`run_instability`] builds `φ`, perturbs it to `u₀ = φ^λ`, checks that
//! `u₀` sits in `{S < m, Q < 0, I < 0}`, evolves it and audits every sample
//! against the bounds that force blow-up.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    classify, conservation_check, evolve_observed, virial_check, BlowupVerdict, IntegratorControls, Termination,
    TrajectoryRecord, VerdictStatus,
};
use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid, GridSpec};
use crate::functionals::{evaluate, set_membership, FunctionalReport, ScaledFunctionals};
use crate::groundstate::{compute, GroundStateResult, GroundStateSummary, PetviashviliOptions};
use crate::nonlinearity::{check_admissibility, NonlinearityModel, NonlinearitySpec, SampleRange};
use crate::rescale::find_lambda0;
use crate::variational::{variational_report, FamilySpec};

/// Spectral tail bound of the refining evolution.
pub const REFINE_TOL: f64 = 1e-20;
/// Relative slack of the per-sample chord bound.
pub const CHORD_SLACK: f64 = 1e-3;
/// Fewest samples on which the chord bound must be exercised.
pub const MIN_CHORD_CHECKS: usize = 10;
/// Tolerance of the one-sided variational bounds.
pub const LEVEL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: NonlinearitySpec,
    pub dim: usize,
    pub omega: f64,
    /// Perturbation scale of `u₀ = φ^λ`.
    pub lambda: f64,
    /// Grid on which `φ` is computed and certified.
    pub certification_grid: GridSpec,
    /// Grid of the evolution; `φ` is prolonged onto it.
    pub grid: GridSpec,
    pub controls: IntegratorControls,
    /// Family of the variational cross-check, run on the certification grid.
    pub family: FamilySpec,
    /// Every `chord_stride`-th uniform sample, and every milestone sample,
    /// is checked against the chord bound.
    pub chord_stride: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: NonlinearitySpec::pure_power(7.0),
            dim: 1,
            omega: 1.0,
            lambda: 1.05,
            certification_grid: GridSpec::one_d(20.0, 4096),
            grid: GridSpec::one_d(20.0, 1 << 20),
            controls: IntegratorControls { t_max: 5.0, refine_tol: Some(REFINE_TOL), ..IntegratorControls::default() },
            family: FamilySpec::default(),
            chord_stride: 8,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Defaults of the subcritical contrast run.
    pub fn contrast() -> Self {
        Self {
            model: NonlinearitySpec::pure_power(3.0),
            grid: GridSpec::one_d(20.0, 4096),
            controls: IntegratorControls { t_max: 50.0, leak_tol: 1e-3, ..IntegratorControls::default() },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Configuration(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::Configuration(format!("omega must be positive, got {}", self.omega)));
        }
        if self.grid.dim != self.dim || self.certification_grid.dim != self.dim {
            return Err(Error::Configuration(format!("grids must have dimension {}", self.dim)));
        }
        if self.chord_stride == 0 {
            return Err(Error::Configuration("chord_stride must be at least 1".into()));
        }
        self.controls.validate().map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn build_model(&self) -> Result<NonlinearityModel> {
        NonlinearityModel::new(self.model.clone(), self.dim).map_err(|e| Error::Configuration(format!("model: {e}")))
    }
}

/// Strict-inequality entry conditions with their margins; a margin is
/// positive exactly when its condition holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryConditions {
    pub below_level: bool,
    pub q_negative: bool,
    pub i_negative: bool,
    /// `m - S(u₀)`.
    pub level_margin: f64,
    /// `-Q(u₀)`.
    pub q_margin: f64,
    /// `-I(u₀)`.
    pub i_margin: f64,
}

impl EntryConditions {
    pub fn of(report: &FunctionalReport, m: f64) -> Self {
        let s = set_membership(report, m);
        Self {
            below_level: s.below_level,
            q_negative: s.q_negative,
            i_negative: s.i_negative,
            level_margin: m - report.action,
            q_margin: -report.virial,
            i_margin: -report.nehari,
        }
    }

    pub fn all(&self) -> bool {
        self.below_level && self.q_negative && self.i_negative
    }
}

/// Ground state on the certification grid, with its level on the evolution grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundStateInfo {
    pub certified: GroundStateSummary,
    pub certification_grid: GridSpec,
    /// `S(φ)` after prolongation to the evolution grid.
    pub level_m: f64,
}

/// One evaluation of `S(u) - S(u^{β₀}) ≥ Q(u)` at a sampled time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChordCheck {
    pub t: f64,
    pub beta0: Option<f64>,
    /// `S(u) - S(u^{β₀})`.
    pub chord: Option<f64>,
    pub q: f64,
    pub ok: bool,
    pub error: Option<String>,
}

/// Counts of sign changes of `S - m`, `Q` and `I` between consecutive samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignFlips {
    pub level: usize,
    pub q: usize,
    pub i: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalSummary {
    pub m_ref: f64,
    pub d_omega_est: f64,
    #[serde(rename = "d_M_est")]
    pub d_m_est: f64,
    pub c_est: f64,
    pub family_size: usize,
    /// All three estimates are at least `m_ref - LEVEL_TOL`.
    pub one_sided_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 2,
            Outcome::Inconclusive => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub lambda: f64,
    pub omega: f64,
    pub grid: GridSpec,
    pub ground_state: GroundStateInfo,
    pub initial: FunctionalReport,
    pub entry_conditions: EntryConditions,
    /// `m - S(u₀)`; absent when `u₀` is not below the level.
    pub delta: Option<f64>,
    /// The same difference with `S(φ^λ)` from the change-of-variables route.
    pub delta_scaling_route: Option<f64>,
    /// Grid `H¹` distance `‖u₀ - φ‖`.
    pub epsilon_h1: f64,
    pub supercritical: bool,
    pub borderline: bool,
    pub invariance_ok: bool,
    pub sign_flips: SignFlips,
    /// Whether any sample lies in the invariant set.
    pub entered_invariant_set: bool,
    pub q_bound_ok: bool,
    pub parabola_ok: bool,
    pub chord_ok: bool,
    pub chord_checks: Vec<ChordCheck>,
    pub verdict: BlowupVerdict,
    pub termination: Termination,
    pub samples: usize,
    pub steps: usize,
    pub mass_drift: f64,
    pub action_drift: f64,
    pub virial_error: Option<f64>,
    pub variational: Option<VariationalSummary>,
    pub outcome: Outcome,
    pub notes: Vec<String>,
}

/// A report with the trajectory it summarizes.
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub trajectory: TrajectoryRecord,
    pub variational_members_csv: Option<String>,
}

impl ExperimentRun {
    pub fn trajectory_csv(&self) -> String {
        self.trajectory.to_csv(Some(self.report.ground_state.level_m))
    }
}

/// `δ = m - S(u₀)`.
pub fn delta_of(s_u0: f64, m: f64) -> Result<f64> {
    if s_u0 < m {
        Ok(m - s_u0)
    } else {
        Err(Error::Ordering(format!("S(u0) = {s_u0} is not below m = {m}")))
    }
}

/// Certified ground state on the certification grid, prolonged to the
/// evolution grid.
pub fn ground_state(config: &ExperimentConfig, model: &NonlinearityModel) -> Result<(GroundStateResult, ComplexField)> {
    let coarse = Grid::new(config.certification_grid)?;
    let gs = compute(model, config.omega, &coarse, PetviashviliOptions::default())?;
    let fine = if config.grid == config.certification_grid {
        gs.field.clone()
    } else {
        gs.field.prolong(&Grid::new(config.grid)?)?
    };
    Ok((gs, fine))
}

fn sign_flips(record: &TrajectoryRecord, m: f64) -> SignFlips {
    let mut flips = SignFlips::default();
    for w in record.membership(m).windows(2) {
        flips.level += usize::from(w[0].below_level != w[1].below_level);
        flips.q += usize::from(w[0].q_negative != w[1].q_negative);
        flips.i += usize::from(w[0].i_negative != w[1].i_negative);
    }
    flips
}

fn chord_check(t: f64, report: &FunctionalReport, u: &ComplexField, model: &NonlinearityModel, omega: f64) -> ChordCheck {
    let q = report.virial;
    let attempt = || -> Result<(f64, f64)> {
        let beta0 = find_lambda0(u, model, omega)?;
        let s_beta = ScaledFunctionals::new(u, model, omega)?.dilated(beta0).action;
        Ok((beta0, report.action - s_beta))
    };
    match attempt() {
        Ok((beta0, chord)) => ChordCheck {
            t,
            beta0: Some(beta0),
            chord: Some(chord),
            q,
            ok: q < 0.0 && chord >= q - CHORD_SLACK * q.abs(),
            error: None,
        },
        Err(e) => ChordCheck { t, beta0: None, chord: None, q, ok: false, error: Some(e.to_string()) },
    }
}

fn variational_summary(
    config: &ExperimentConfig,
    gs: &GroundStateResult,
    model: &NonlinearityModel,
) -> Result<(VariationalSummary, String)> {
    let r = variational_report(&config.family, &gs.field, gs.level_m, model, config.omega)?;
    let floor = r.m_ref - LEVEL_TOL;
    let summary = VariationalSummary {
        m_ref: r.m_ref,
        d_omega_est: r.d_omega_est,
        d_m_est: r.d_m_est,
        c_est: r.c_est,
        family_size: r.family_size,
        one_sided_ok: r.d_omega_est >= floor && r.d_m_est >= floor && r.c_est >= floor,
    };
    Ok((summary, r.members_csv()))
}

struct Prepared {
    model: NonlinearityModel,
    gs: GroundStateResult,
    info: GroundStateInfo,
    phi: ComplexField,
    u0: ComplexField,
    initial: FunctionalReport,
    supercritical: bool,
    borderline: bool,
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let model = config.build_model()?;
    let adm = check_admissibility(&model, SampleRange::default(), Some(config.omega));
    let (gs, phi) = ground_state(config, &model)?;
    let level_m = evaluate(&phi, &model, config.omega)?.action;
    let u0 = phi.rescale(config.lambda)?;
    let initial = evaluate(&u0, &model, config.omega)?;
    Ok(Prepared {
        info: GroundStateInfo { certified: gs.summary(), certification_grid: config.certification_grid, level_m },
        model,
        gs,
        phi,
        u0,
        initial,
        supercritical: adm.supercritical,
        borderline: adm.borderline,
    })
}

fn base_report(config: &ExperimentConfig, p: &Prepared, record: &TrajectoryRecord, verdict: BlowupVerdict) -> ExperimentReport {
    let m = p.info.level_m;
    let entry = EntryConditions::of(&p.initial, m);
    let flips = sign_flips(record, m);
    let membership = record.membership(m);
    let (mass_drift, action_drift) = conservation_check(record);
    let mut notes = Vec::new();
    let virial_error = match virial_check(record) {
        Ok(e) => Some(e),
        Err(e) => {
            notes.push(format!("virial check skipped: {e}"));
            None
        }
    };
    ExperimentReport {
        lambda: config.lambda,
        omega: config.omega,
        grid: config.grid,
        ground_state: p.info.clone(),
        initial: p.initial,
        entry_conditions: entry,
        delta: delta_of(p.initial.action, m).ok(),
        delta_scaling_route: None,
        epsilon_h1: h1_distance(&p.u0, &p.phi).unwrap_or(f64::NAN),
        supercritical: p.supercritical,
        borderline: p.borderline,
        invariance_ok: !membership.is_empty() && membership.iter().all(|s| s.in_invariant_set),
        sign_flips: flips,
        entered_invariant_set: membership.iter().any(|s| s.in_invariant_set),
        q_bound_ok: verdict.q_bound_ok,
        parabola_ok: verdict.parabola_ok,
        chord_ok: false,
        chord_checks: Vec::new(),
        verdict,
        termination: record.termination,
        samples: record.samples.len(),
        steps: record.step_sizes.len(),
        mass_drift,
        action_drift,
        virial_error,
        variational: None,
        outcome: Outcome::Inconclusive,
        notes,
    }
}

/// The instability pipeline. Fails with a configuration error when the model
/// is not supercritical or `u₀` misses an entry condition.
pub fn run_instability(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let p = prepare(config)?;
    if !p.supercritical {
        return Err(Error::Configuration("instability runs need a mass-supercritical model".into()));
    }
    let m = p.info.level_m;
    let entry = EntryConditions::of(&p.initial, m);
    if !entry.all() {
        return Err(Error::Configuration(format!(
            "entry conditions fail at lambda = {}: m - S = {:e}, -Q = {:e}, -I = {:e}",
            config.lambda, entry.level_margin, entry.q_margin, entry.i_margin
        )));
    }
    let delta = delta_of(p.initial.action, m)?;
    let scaled = ScaledFunctionals::new(&p.phi, &p.model, config.omega)?.dilated(config.lambda).action;

    let mut checks = Vec::new();
    let mut uniform_index = 0usize;
    let record = evolve_observed(&p.u0, &p.model, config.omega, &config.controls, |s, u| {
        let due = if s.uniform {
            uniform_index += 1;
            (uniform_index - 1) % config.chord_stride == 0
        } else {
            true
        };
        if due {
            checks.push(chord_check(s.t, &s.report, u, &p.model, config.omega));
        }
    })?;
    let verdict = classify(&record, &config.controls, Some(delta));
    let mut report = base_report(config, &p, &record, verdict);
    report.delta_scaling_route = Some(m - scaled);
    report.chord_ok = checks.len() >= MIN_CHORD_CHECKS && checks.iter().all(|c| c.ok);
    if checks.len() < MIN_CHORD_CHECKS {
        report.notes.push(format!("only {} chord checks; lower chord_stride", checks.len()));
    }
    report.chord_checks = checks;

    let members_csv = match variational_summary(config, &p.gs, &p.model) {
        Ok((summary, csv)) => {
            report.variational = Some(summary);
            Some(csv)
        }
        Err(e) => {
            report.notes.push(format!("variational cross-check failed: {e}"));
            None
        }
    };

    let all_ok = report.invariance_ok && report.q_bound_ok && report.parabola_ok && report.chord_ok;
    report.outcome = match report.verdict.status {
        VerdictStatus::BlewUp if all_ok => Outcome::Pass,
        VerdictStatus::Inconclusive if all_ok => Outcome::Inconclusive,
        _ => Outcome::Fail,
    };
    Ok(ExperimentRun { report, trajectory: record, variational_members_csv: members_csv })
}

/// The same pipeline for a subcritical model, expecting a bounded gradient
/// and no entry into the invariant set. A model at the critical exponent is
/// run and flagged borderline with an inconclusive outcome.
pub fn run_stability_contrast(config: &ExperimentConfig) -> Result<ExperimentRun> {
    let p = prepare(config)?;
    if p.supercritical {
        return Err(Error::Configuration("the stability contrast needs a subcritical model".into()));
    }
    let record = evolve_observed(&p.u0, &p.model, config.omega, &config.controls, |_, _| {})?;
    let verdict = classify(&record, &config.controls, None);
    let mut report = base_report(config, &p, &record, verdict);
    report.outcome = if p.borderline {
        report.notes.push("critical exponent: no outcome asserted".into());
        Outcome::Inconclusive
    } else if verdict.status == VerdictStatus::StableWindow && !report.entered_invariant_set {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(ExperimentRun { report, trajectory: record, variational_members_csv: None })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub delta: Option<f64>,
    pub t_estimate: Option<f64>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// `δ` strictly increasing in `λ`.
    pub delta_increasing: bool,
    /// `T_estimate` strictly decreasing in `λ`.
    pub t_estimate_decreasing: bool,
}

impl SweepReport {
    pub fn from_reports(reports: &[&ExperimentReport]) -> Self {
        let mut entries: Vec<SweepEntry> = reports
            .iter()
            .map(|r| SweepEntry { lambda: r.lambda, delta: r.delta, t_estimate: r.verdict.t_estimate, outcome: r.outcome })
            .collect();
        entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let strictly = |values: Vec<Option<f64>>, up: bool| {
            values.iter().all(Option::is_some)
                && values.windows(2).all(|w| {
                    let (a, b) = (w[0].unwrap(), w[1].unwrap());
                    if up {
                        b > a
                    } else {
                        b < a
                    }
                })
        };
        Self {
            delta_increasing: strictly(entries.iter().map(|e| e.delta).collect(), true),
            t_estimate_decreasing: strictly(entries.iter().map(|e| e.t_estimate).collect(), false),
            entries,
        }
    }
}

/// Instability runs at every `λ` in `lambdas`, in parallel.
pub fn run_sweep(config: &ExperimentConfig, lambdas: &[f64]) -> Result<(SweepReport, Vec<ExperimentRun>)> {
    let runs = lambdas
        .par_iter()
        .map(|&lambda| run_instability(&ExperimentConfig { lambda, ..config.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<&ExperimentReport> = runs.iter().map(|r| &r.report).collect();
    Ok((SweepReport::from_reports(&reports), runs))
}

/// `‖u - v‖` in the grid `H¹` norm for fields on a shared grid.
pub fn h1_distance(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    if !Arc::ptr_eq(u.grid(), v.grid()) && u.grid().spec() != v.grid().spec() {
        return Err(Error::Grid("fields live on different grids".into()));
    }
    Ok(u.difference(v).h1_norm())
}
