//! Time evolution of
//!
//! ```text
//! i dΨ_n/dt = J_L Ψ_{n+1} + J_R Ψ_{n−1} + γ(t)|Ψ_n|²Ψ_n − i g Ψ_n,   γ(t) = γ_0 − v t,
//! ```
//!
//! by the Dormand-Prince 5(4) pair, plus the adiabatic-following protocol.

use std::cell::Cell;
use std::rc::Rc;

use nalgebra::DVector;
use num_complex::Complex64;
use ode_solvers::dop_shared::IntegrationError;
use ode_solvers::dopri5::Dopri5;
use ode_solvers::{OutputType, System};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatticeParams, StationaryState};
use crate::stationary::{solve_sdb_branch, track_sdb, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampProtocol {
    pub gamma0: f64,
    pub speed: f64,
    pub t_end: f64,
}

impl RampProtocol {
    pub fn new(gamma0: f64, speed: f64, t_end: f64) -> Result<Self> {
        if !(t_end >= 0.0) || !t_end.is_finite() || !gamma0.is_finite() || !speed.is_finite() {
            return Err(Error::Argument(format!(
                "invalid ramp ({gamma0}, {speed}, {t_end})"
            )));
        }
        Ok(RampProtocol {
            gamma0,
            speed,
            t_end,
        })
    }

    /// Constant nonlinearity.
    pub fn constant(gamma: f64, t_end: f64) -> Result<Self> {
        RampProtocol::new(gamma, 0.0, t_end)
    }

    pub fn gamma_at(&self, t: f64) -> f64 {
        self.gamma0 - self.speed * t
    }
}

/// Steps are controlled at `LOCAL_FACTOR · reltol` so that `reltol` bounds the
/// accumulated error over runs of a few hundred steps rather than the error
/// per step.
const LOCAL_FACTOR: f64 = 0.01;
const MIN_STEP_RTOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub reltol: f64,
    pub abstol: f64,
    /// Uniform output points over `[0, t_end]`, ends included.
    pub samples: usize,
    /// Step budget per output interval.
    pub max_steps: u32,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            reltol: 1e-9,
            abstol: 1e-12,
            samples: 400,
            max_steps: 10_000_000,
        }
    }
}

impl IntegrationOptions {
    pub fn with_reltol(reltol: f64) -> Self {
        IntegrationOptions {
            reltol,
            ..Self::default()
        }
    }

    /// Local tolerance handed to the stepper.
    fn step_rtol(&self) -> f64 {
        (self.reltol * LOCAL_FACTOR).max(MIN_STEP_RTOL)
    }

    fn validate(&self) -> Result<()> {
        if !(self.reltol > 1e-14 && self.reltol < 1e-3) {
            return Err(Error::Argument(format!(
                "reltol {} outside (1e-14, 1e-3)",
                self.reltol
            )));
        }
        if !(self.abstol > 0.0) {
            return Err(Error::Argument("abstol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `fields[k][n]` is Ψ_n at `times[k]`.
    pub fields: Vec<Vec<Complex64>>,
    pub intensity: Vec<f64>,
    pub gamma_bare: Vec<f64>,
    pub gamma_eff: Vec<f64>,
    /// NaN where no reference state is available.
    pub fidelity: Vec<f64>,
    /// Set where warm-started tracking landed on a different sign pattern.
    pub branch_jump: Vec<bool>,
    /// Why fidelity tracking stopped early, if it did.
    pub truncated: Option<String>,
}

fn intensity(psi: &[Complex64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

/// `dΨ/dt` at fixed γ.
pub fn rhs(psi: &[Complex64], gamma: f64, params: &LatticeParams) -> Result<Vec<Complex64>> {
    if psi.len() != params.sites {
        return Err(Error::Argument(format!(
            "field has {} sites, lattice has {}",
            psi.len(),
            params.sites
        )));
    }
    let minus_i = Complex64::new(0.0, -1.0);
    Ok((0..psi.len())
        .map(|n| {
            let mut h = gamma * psi[n].norm_sqr() * psi[n];
            if let Some(k) = params.next(n) {
                h += params.hop_left * psi[k];
            }
            if let Some(k) = params.prev(n) {
                h += params.hop_right * psi[k];
            }
            minus_i * h - params.loss * psi[n]
        })
        .collect())
}

struct Lattice<'a> {
    params: &'a LatticeParams,
    protocol: &'a RampProtocol,
    nonfinite: Rc<Cell<bool>>,
}

impl System<f64, DVector<f64>> for Lattice<'_> {
    fn system(&self, t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let l = self.params.sites;
        let gamma = self.protocol.gamma_at(t);
        if y.iter().any(|v| !v.is_finite()) {
            self.nonfinite.set(true);
        }
        for n in 0..l {
            let (re, im) = (y[n], y[l + n]);
            let mut hr = gamma * (re * re + im * im) * re;
            let mut hi = gamma * (re * re + im * im) * im;
            if let Some(k) = self.params.next(n) {
                hr += self.params.hop_left * y[k];
                hi += self.params.hop_left * y[l + k];
            }
            if let Some(k) = self.params.prev(n) {
                hr += self.params.hop_right * y[k];
                hi += self.params.hop_right * y[l + k];
            }
            dy[n] = hi - self.params.loss * re;
            dy[l + n] = -hr - self.params.loss * im;
        }
    }
}

fn pack(psi: &[Complex64]) -> DVector<f64> {
    let l = psi.len();
    DVector::from_fn(2 * l, |i, _| if i < l { psi[i].re } else { psi[i - l].im })
}

fn unpack(y: &DVector<f64>) -> Vec<Complex64> {
    let l = y.len() / 2;
    (0..l).map(|n| Complex64::new(y[n], y[l + n])).collect()
}

/// Uniform output grid over `[0, t_end]`.
pub fn output_times(t_end: f64, samples: usize) -> Vec<f64> {
    if t_end == 0.0 || samples <= 1 {
        return vec![0.0];
    }
    (0..samples)
        .map(|k| t_end * k as f64 / (samples - 1) as f64)
        .collect()
}

/// Integrates on the uniform grid of `opts.samples` points.
pub fn integrate(
    psi0: &[Complex64],
    protocol: &RampProtocol,
    params: &LatticeParams,
    opts: &IntegrationOptions,
) -> Result<TrajectoryRecord> {
    integrate_at(
        psi0,
        protocol,
        params,
        &output_times(protocol.t_end, opts.samples),
        opts,
    )
}

/// Integrates and reports the field at the given nondecreasing times,
/// restarting the stepper on each output interval so that every reported
/// value is a step endpoint rather than an interpolant.
pub fn integrate_at(
    psi0: &[Complex64],
    protocol: &RampProtocol,
    params: &LatticeParams,
    times: &[f64],
    opts: &IntegrationOptions,
) -> Result<TrajectoryRecord> {
    opts.validate()?;
    if psi0.len() != params.sites {
        return Err(Error::Argument(format!(
            "field has {} sites, lattice has {}",
            psi0.len(),
            params.sites
        )));
    }
    if psi0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Argument("initial field is not finite".into()));
    }
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument(
            "output times must be nonnegative and nondecreasing".into(),
        ));
    }
    let mut rec = TrajectoryRecord::default();
    let mut t = 0.0;
    let mut y = pack(psi0);
    for &target in times {
        if target > t {
            y = advance(params, protocol, y, t, target, opts)?;
            t = target;
        }
        let field = unpack(&y);
        let i = intensity(&field);
        let g = protocol.gamma_at(t);
        rec.times.push(t);
        rec.intensity.push(i);
        rec.gamma_bare.push(g);
        rec.gamma_eff.push(g * i);
        rec.fidelity.push(f64::NAN);
        rec.branch_jump.push(false);
        rec.fields.push(field);
    }
    Ok(rec)
}

fn advance(
    params: &LatticeParams,
    protocol: &RampProtocol,
    y: DVector<f64>,
    t0: f64,
    t1: f64,
    opts: &IntegrationOptions,
) -> Result<DVector<f64>> {
    let nonfinite = Rc::new(Cell::new(false));
    let system = Lattice {
        params,
        protocol,
        nonfinite: Rc::clone(&nonfinite),
    };
    let mut stepper = Dopri5::from_param(
        system,
        t0,
        t1,
        t1 - t0,
        y,
        opts.step_rtol(),
        opts.abstol * LOCAL_FACTOR,
        0.9,
        0.04,
        0.2,
        10.0,
        t1 - t0,
        0.0,
        opts.max_steps,
        u32::MAX,
        OutputType::Sparse,
    );
    let outcome = stepper.integrate();
    let last_finite = || {
        stepper
            .x_out()
            .iter()
            .zip(stepper.y_out())
            .rev()
            .find(|(_, y)| y.iter().all(|v| v.is_finite()))
            .map_or(t0, |(x, _)| *x)
    };
    match outcome {
        Ok(_) => {
            let y = stepper
                .y_out()
                .last()
                .cloned()
                .ok_or_else(|| Error::Numeric("empty integrator output".into()))?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    last_valid_t: last_finite(),
                });
            }
            Ok(y)
        }
        Err(e) => {
            let blown = stepper
                .y_out()
                .iter()
                .any(|y| y.iter().any(|v| !v.is_finite()));
            if blown || nonfinite.get() {
                return Err(Error::BlowUp {
                    last_valid_t: last_finite(),
                });
            }
            match e {
                IntegrationError::StepSizeUnderflow { x }
                | IntegrationError::StiffnessDetected { x } => Err(Error::Stiffness { t: x }),
                IntegrationError::MaxNumStepReached { x, n_step } => Err(Error::Numeric(format!(
                    "step budget of {n_step} exhausted at t = {x}"
                ))),
            }
        }
    }
}

/// `|Σ Ψ_n ψ_n|² / I`.
pub fn nonlinear_fidelity(psi: &[Complex64], reference: &StationaryState) -> Result<f64> {
    if psi.len() != reference.psi.len() {
        return Err(Error::Argument(
            "field and reference differ in length".into(),
        ));
    }
    let i = intensity(psi);
    if i == 0.0 {
        return Err(Error::Domain("fidelity of the zero field".into()));
    }
    let overlap: Complex64 = psi.iter().zip(&reference.psi).map(|(z, p)| z * *p).sum();
    Ok(overlap.norm_sqr() / i)
}

/// `min_θ ‖Ψ − e^{iθ}ψ‖` for a real reference `ψ`.
pub fn phase_distance(psi: &[Complex64], reference: &[f64]) -> f64 {
    let overlap: Complex64 = psi.iter().zip(reference).map(|(z, p)| z * *p).sum();
    let r2: f64 = reference.iter().map(|p| p * p).sum();
    (intensity(psi) + r2 - 2.0 * overlap.norm()).max(0.0).sqrt()
}

/// Largest ratio `d(t)/d(0)` of the phase-removed distance from the
/// stationary state, evolving `ψ + δ` at constant `γ = Γ`.
pub fn perturbation_growth(
    state: &StationaryState,
    params: &LatticeParams,
    delta: &[Complex64],
    t_end: f64,
    opts: &IntegrationOptions,
) -> Result<f64> {
    if delta.len() != state.psi.len() {
        return Err(Error::Argument("perturbation length mismatch".into()));
    }
    let psi0: Vec<Complex64> = state.psi.iter().zip(delta).map(|(p, d)| *p + d).collect();
    let d0 = phase_distance(&psi0, &state.psi);
    if d0 == 0.0 {
        return Err(Error::Argument(
            "perturbation vanishes after removing the phase".into(),
        ));
    }
    let protocol = RampProtocol::constant(state.gamma, t_end)?;
    let rec = integrate(&psi0, &protocol, params, opts)?;
    Ok(rec
        .fields
        .iter()
        .map(|f| phase_distance(f, &state.psi))
        .fold(0.0, f64::max)
        / d0)
}

/// Starts on the m-th SDB at `Γ = γ_0` (unit intensity), ramps `γ(t)` and
/// records the fidelity against the instantaneous SDB at `Γ(t) = γ(t) I(t)`.
/// `t_end` defaults to the time at which `γ` reaches zero.
pub fn adiabatic_experiment(
    m: usize,
    gamma0: f64,
    speed: f64,
    t_end: Option<f64>,
    params: &LatticeParams,
    cfg: &SolverConfig,
    opts: &IntegrationOptions,
) -> Result<TrajectoryRecord> {
    if !params.is_unidirectional_open() || params.hop_left != 1.0 {
        return Err(Error::Argument(
            "the adiabatic protocol runs on the unit unidirectional chain".into(),
        ));
    }
    let t_end = match t_end {
        Some(t) => t,
        None if speed > 0.0 => gamma0 / speed,
        None => {
            return Err(Error::Argument(
                "t_end is required when γ is not ramped down".into(),
            ))
        }
    };
    let protocol = RampProtocol::new(gamma0, speed, t_end)?;
    let start: StationaryState = solve_sdb_branch(params.sites, m, gamma0, cfg)?;
    let psi0: Vec<Complex64> = start.psi.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let mut rec = integrate(&psi0, &protocol, params, opts)?;

    let mut previous = Some(start);
    for k in 0..rec.times.len() {
        let gamma = rec.gamma_eff[k];
        if !(gamma > 0.0) {
            rec.truncated = Some(format!(
                "Γ(t) = {gamma:e} left the branch domain at t = {}",
                rec.times[k]
            ));
            break;
        }
        let tracked = match track_sdb(params.sites, m, gamma, previous.as_ref(), cfg) {
            Ok(s) => s,
            Err(e) => {
                rec.truncated = Some(format!(
                    "instantaneous SDB lost at t = {}: {e}",
                    rec.times[k]
                ));
                break;
            }
        };
        if let Some(prev) = &previous {
            rec.branch_jump[k] = sign_pattern(prev, m) != sign_pattern(&tracked, m);
        }
        rec.fidelity[k] = nonlinear_fidelity(&rec.fields[k], &tracked)?;
        previous = Some(tracked);
    }
    Ok(rec)
}

fn sign_pattern(s: &StationaryState, m: usize) -> Vec<bool> {
    s.psi[..m].iter().map(|p| *p < 0.0).collect()
}
