use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{certify, check_omega, GroundStateResult, Method};
use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid};
use crate::nonlinearity::NonlinearityModel;

/// Bracket for the central value `φ(0)`: `low` must turn upward before
/// crossing zero, `high` must cross zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootingBracket {
    pub low: f64,
    pub high: f64,
}

/// Relative disagreement between the two bracketing trajectories past
/// which the integrated profile is replaced by its linear tail.
const SPLIT_TOL: f64 = 1e-9;
const STEPS_PER_LENGTH: f64 = 1600.0;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    Crossed,
    Turned,
    Exhausted,
}

struct Trajectory {
    outcome: Outcome,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

struct Shooter<'a> {
    model: &'a NonlinearityModel,
    dim: usize,
    omega: f64,
    r_max: f64,
}

impl Shooter<'_> {
    fn step_for(&self, a: f64) -> f64 {
        1.0 / ((self.omega + self.model.rate(a.abs())).sqrt() * STEPS_PER_LENGTH)
    }

    fn second(&self, r: f64, phi: f64, dphi: f64) -> f64 {
        let n = self.dim as f64;
        if r == 0.0 {
            (self.omega * phi - self.model.g(phi)) / n
        } else {
            self.omega * phi - self.model.g(phi) - (n - 1.0) / r * dphi
        }
    }

    /// Integrates from the centre with step `h` on the nodes `r_j = j h`.
    fn run(&self, a: f64, h: f64, record: bool) -> Trajectory {
        let n = self.dim as f64;
        let c = (self.omega * a - self.model.g(a)) / n;
        let mut phi = a + 0.5 * c * h * h;
        let mut dphi = c * h;
        let mut out = Trajectory { outcome: Outcome::Exhausted, phi: vec![a], dphi: vec![0.0] };
        let steps = (self.r_max / h).ceil() as usize;
        for j in 1..steps {
            if record {
                out.phi.push(phi);
                out.dphi.push(dphi);
            }
            if phi < 0.0 {
                out.outcome = Outcome::Crossed;
                return out;
            }
            if dphi > 0.0 {
                out.outcome = Outcome::Turned;
                return out;
            }
            let r = j as f64 * h;
            let f = |r: f64, p: f64, d: f64| (d, self.second(r, p, d));
            let (k1p, k1d) = f(r, phi, dphi);
            let (k2p, k2d) = f(r + 0.5 * h, phi + 0.5 * h * k1p, dphi + 0.5 * h * k1d);
            let (k3p, k3d) = f(r + 0.5 * h, phi + 0.5 * h * k2p, dphi + 0.5 * h * k2d);
            let (k4p, k4d) = f(r + h, phi + h * k3p, dphi + h * k3d);
            phi += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            dphi += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        }
        out
    }

    fn classify(&self, a: f64) -> Outcome {
        self.run(a, self.step_for(a), false).outcome
    }
}

/// A radial ground-state profile: integrated nodes up to `cut`, then the
/// decaying solution `A r^{1-N/2} K_{N/2-1}(√ω r)` of the linearized equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dim: usize,
    pub omega: f64,
    /// `φ(0)`.
    pub peak: f64,
    pub step: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub ddphi: Vec<f64>,
    pub cut: f64,
    pub tail_amplitude: f64,
    pub bisections: usize,
}

/// `r^{1-N/2} K_ν(√ω r)` up to a constant, with `ν = |N/2 - 1|`, by the
/// large-argument expansion of `K_ν`.
fn linear_tail(dim: usize, omega: f64, r: f64) -> f64 {
    let nu = (dim as f64 / 2.0 - 1.0).abs();
    let z = omega.sqrt() * r;
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let next = term * (mu - ((2 * k - 1) as f64).powi(2)) / (k as f64 * 8.0 * z);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    r.powf(1.0 - dim as f64 / 2.0) * (-z).exp() / z.sqrt() * sum
}

impl RadialProfile {
    /// `(φ, φ', φ'')` at radius `r` by quintic Hermite interpolation of the
    /// integrated nodes, or from the tail past `cut`.
    pub fn jet(&self, r: f64) -> (f64, f64, f64) {
        let r = r.abs();
        if r >= self.cut {
            let e = 1e-4 * r.max(1.0);
            let f = |x: f64| self.tail_amplitude * linear_tail(self.dim, self.omega, x);
            let (m, c, p) = (f(r - e), f(r), f(r + e));
            return (c, (p - m) / (2.0 * e), (p - 2.0 * c + m) / (e * e));
        }
        let h = self.step;
        let j = ((r / h) as usize).min(self.phi.len() - 2);
        let t = r / h - j as f64;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let basis = [
            (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5, -30.0 * t2 + 60.0 * t3 - 30.0 * t4, -60.0 * t + 180.0 * t2 - 120.0 * t3),
            (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5, 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4, -36.0 * t + 96.0 * t2 - 60.0 * t3),
            (
                0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
                0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
                0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
            ),
            (10.0 * t3 - 15.0 * t4 + 6.0 * t5, 30.0 * t2 - 60.0 * t3 + 30.0 * t4, 60.0 * t - 180.0 * t2 + 120.0 * t3),
            (-4.0 * t3 + 7.0 * t4 - 3.0 * t5, -12.0 * t2 + 28.0 * t3 - 15.0 * t4, -24.0 * t + 84.0 * t2 - 60.0 * t3),
            (0.5 * (t3 - 2.0 * t4 + t5), 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4), 0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3)),
        ];
        let data = [
            self.phi[j],
            h * self.dphi[j],
            h * h * self.ddphi[j],
            self.phi[j + 1],
            h * self.dphi[j + 1],
            h * h * self.ddphi[j + 1],
        ];
        let mut out = (0.0, 0.0, 0.0);
        for (b, d) in basis.iter().zip(data) {
            out.0 += b.0 * d;
            out.1 += b.1 * d / h;
            out.2 += b.2 * d / (h * h);
        }
        out
    }

    pub fn value(&self, r: f64) -> f64 {
        self.jet(r).0
    }

    /// Relative `L²(r^{N-1} dr)` residual of the radial equation, sampled at
    /// the midpoints between integration nodes out to `r_max`.
    pub fn radial_residual_rel(&self, model: &NonlinearityModel, r_max: f64) -> f64 {
        let n = self.dim as f64;
        let (mut res, mut norm) = (0.0, 0.0);
        let count = (r_max / self.step) as usize;
        for j in 0..count {
            let r = (j as f64 + 0.5) * self.step;
            let (f, d1, d2) = self.jet(r);
            let w = r.powf(n - 1.0);
            let e = d2 + (n - 1.0) / r * d1 - self.omega * f + model.g(f);
            res += w * e * e;
            norm += w * f * f;
        }
        (res / norm).sqrt()
    }
}

fn automatic_bracket(shooter: &Shooter) -> Result<ShootingBracket> {
    let mut low = 1.0;
    for _ in 0..200 {
        if shooter.model.rate(low) < 0.5 * shooter.omega {
            break;
        }
        low *= 0.5;
    }
    let mut high = low;
    for _ in 0..60 {
        high *= 2.0;
        if shooter.classify(high) == Outcome::Crossed {
            return Ok(ShootingBracket { low, high });
        }
    }
    Err(Error::Bracket(format!("no zero-crossing central value up to {high}")))
}

/// Bisects on `φ(0)` between trajectories that turn upward and trajectories
/// that cross zero, then samples the resulting profile on `grid`.
pub fn shoot_radial(
    model: &NonlinearityModel,
    omega: f64,
    bracket: Option<ShootingBracket>,
    grid: &Arc<Grid>,
) -> Result<(RadialProfile, GroundStateResult)> {
    if grid.dim() != model.dim() {
        return Err(Error::Domain("grid and model dimensions differ".into()));
    }
    let profile = solve_radial(model, omega, bracket)?;
    let field = ComplexField::sample_radial_periodic(grid, |r| profile.value(r))?;
    let result = certify(field, model, omega, Method::Shooting, profile.bisections)?;
    Ok((profile, result))
}

/// The radial profile alone, without sampling or certification.
pub fn solve_radial(model: &NonlinearityModel, omega: f64, bracket: Option<ShootingBracket>) -> Result<RadialProfile> {
    check_omega(omega)?;
    let dim = model.dim();
    let shooter = Shooter { model, dim, omega, r_max: 60.0 / omega.sqrt() };
    let bracket = match bracket {
        Some(b) => b,
        None => automatic_bracket(&shooter)?,
    };
    let (mut lo, mut hi) = (bracket.low, bracket.high);
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Bracket(format!("invalid bracket {bracket:?}")));
    }
    if shooter.classify(lo) != Outcome::Turned || shooter.classify(hi) != Outcome::Crossed {
        return Err(Error::Bracket(format!("{bracket:?}")));
    }
    let mut bisections = 0;
    while bisections < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shooter.classify(mid) {
            Outcome::Crossed => hi = mid,
            Outcome::Turned => lo = mid,
            Outcome::Exhausted => {
                lo = mid;
                hi = mid;
            }
        }
        bisections += 1;
    }
    if (hi - lo) > 1e-12 * lo {
        return Err(Error::Convergence(format!("central value unresolved in [{lo}, {hi}]")));
    }

    let h = shooter.step_for(hi);
    let below = shooter.run(lo, h, true);
    let above = shooter.run(hi, h, true);
    let len = below.phi.len().min(above.phi.len());
    let split = (0..len)
        .find(|&j| (below.phi[j] - above.phi[j]).abs() > SPLIT_TOL * below.phi[j].abs())
        .unwrap_or(len);
    if split < 8 {
        return Err(Error::Convergence("bracketing trajectories separate immediately".into()));
    }
    let keep = split - 1;
    let phi: Vec<f64> = below.phi[..=keep].to_vec();
    let dphi: Vec<f64> = below.dphi[..=keep].to_vec();
    let ddphi: Vec<f64> = (0..=keep).map(|j| shooter.second(j as f64 * h, phi[j], dphi[j])).collect();
    let cut = keep as f64 * h;
    let profile = RadialProfile {
        dim,
        omega,
        peak: lo,
        step: h,
        tail_amplitude: phi[keep] / linear_tail(dim, omega, cut),
        phi,
        dphi,
        ddphi,
        cut,
        bisections,
    };
    Ok(profile)
}
