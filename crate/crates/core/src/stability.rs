//! Linear stability of stationary states.
//!
//! Writing `Ψ_n = (ψ_n + u_n) e^{−iEt}` with `u = U^r + iU^i` and keeping
//! first order gives `d/dt (U^r, U^i) = C (U^r, U^i)` with
//!
//! ```text
//! C = [[0, A], [−B, 0]],  A = diag(Γψ² − E) + S,  B = diag(3Γψ² − E) + S,
//! ```
//!
//! where `(S u)_n = J_L u_{n+1} + J_R u_{n−1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Dense};
use crate::model::{max_abs, residual, Boundary, LatticeParams, StationaryState};
use crate::real::{Ext, Real};
use crate::stationary::{newton_full, Branch};

/// Double-precision threshold on max Re λ.
pub const DEFAULT_TAU: f64 = 1e-8;
/// Threshold used with extended precision.
pub const EXTENDED_TAU: f64 = 1e-16;

/// Residual above which a state is rejected as input.
const SOLUTION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Complex64>,
    pub max_real: f64,
    pub stable: bool,
    pub tau: f64,
    /// Set when `J_R ≠ 0` or the chain is periodic: the matrix generalizes
    /// the unidirectional open-chain form.
    pub extended_form: bool,
    /// Decimal digits of the eigenvalue computation (15 for plain double).
    pub digits: u32,
}

impl StabilityReport {
    fn new(eigenvalues: Vec<Complex64>, tau: f64, extended_form: bool, digits: u32) -> Self {
        let max_real = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        StabilityReport {
            stable: max_real <= tau,
            eigenvalues,
            max_real,
            tau,
            extended_form,
            digits,
        }
    }
}

pub fn is_extended_form(params: &LatticeParams) -> bool {
    params.hop_right != 0.0 || params.boundary == Boundary::Periodic
}

/// The `2L × 2L` matrix `C`, ordered `(U^r_1..U^r_L, U^i_1..U^i_L)`.
pub fn build_stability_matrix<T: Real>(
    state: &StationaryState<T>,
    params: &LatticeParams,
) -> Result<Dense<T>> {
    let r = max_abs(&residual(state, params)?);
    if !(r <= SOLUTION_TOL) {
        return Err(Error::Argument(format!(
            "not a stationary state: residual {r:e}"
        )));
    }
    let l = params.sites;
    let g = &state.gamma;
    let e = &state.energy;
    let mut c = Dense::zeros(2 * l, g);
    let three = g.cast(3.0);
    let jl = g.cast(params.hop_left);
    let jr = g.cast(params.hop_right);
    for n in 0..l {
        let gp2 = g.clone() * state.psi[n].square();
        // A sits in the upper-right block, −B in the lower-left
        add(&mut c, n, l + n, gp2.clone() - e.clone());
        add(&mut c, l + n, n, e.clone() - three.clone() * gp2);
        if let Some(k) = params.next(n) {
            add(&mut c, n, l + k, jl.clone());
            add(&mut c, l + n, k, -jl.clone());
        }
        if let Some(k) = params.prev(n) {
            add(&mut c, n, l + k, jr.clone());
            add(&mut c, l + n, k, -jr.clone());
        }
    }
    Ok(c)
}

fn add<T: Real>(c: &mut Dense<T>, i: usize, j: usize, v: T) {
    let cur = c.get(i, j).clone();
    c.set(i, j, cur + v);
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma == 0.0 {
        return Err(Error::Domain(
            "stability at Γ = 0 (the linear exceptional point) is not classified".into(),
        ));
    }
    Ok(())
}

/// Eigenvalues of `C` by the double-precision real Schur form, falling back
/// to the generic Hessenberg QR when the Schur iteration stalls.
pub fn eigenvalues_f64(c: &Dense<f64>) -> Result<Vec<Complex64>> {
    let m = DMatrix::from_row_slice(c.n, c.n, &c.data);
    match nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100_000) {
        Some(schur) => Ok(schur.complex_eigenvalues().iter().copied().collect()),
        None => linalg::eigenvalues(c),
    }
}

/// Digits needed so that a Jordan block of the full size `2L` splits below
/// `tau / 100`.
pub fn refinement_digits(sites: usize, tau: f64) -> u32 {
    let need = 2.0 * sites as f64 * (-(tau.log10()) + 2.0);
    (need.ceil() as u32).clamp(60, 400)
}

/// Classifies a double-precision state.
///
/// Nilpotent parts of `C` (at the exceptional point and along the SDB
/// branches) split into spurious eigenvalues of size `ε^{1/k}` in double
/// precision. When the double-precision verdict is unstable but the real
/// parts are small enough to be such an artifact, the state is polished and
/// the spectrum recomputed in extended precision; that result is final.
pub fn classify(
    state: &StationaryState,
    params: &LatticeParams,
    tau: f64,
) -> Result<StabilityReport> {
    if !(tau >= 0.0) {
        return Err(Error::Argument(format!(
            "tau must be nonnegative, got {tau}"
        )));
    }
    check_gamma(state.gamma)?;
    let c = build_stability_matrix(state, params)?;
    let report = StabilityReport::new(eigenvalues_f64(&c)?, tau, is_extended_form(params), 15);
    let scale = 1.0 + c.data.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if report.stable || report.max_real > 1e-3 * scale {
        return Ok(report);
    }
    let digits = refinement_digits(params.sites, tau);
    match polish_extended(state, params, digits) {
        Ok(exact) => classify_exact(&exact, params, tau),
        Err(_) => Ok(report),
    }
}

/// Classifies in the working precision of `T` with the generic QR solver.
pub fn classify_exact<T: Real>(
    state: &StationaryState<T>,
    params: &LatticeParams,
    tau: f64,
) -> Result<StabilityReport> {
    check_gamma(state.gamma.to_f64())?;
    let c = build_stability_matrix(state, params)?;
    let eig = linalg::eigenvalues(&c)?;
    Ok(StabilityReport::new(
        eig,
        tau,
        is_extended_form(params),
        state.gamma.digits(),
    ))
}

/// Lifts a double-precision state and re-solves it in `digits` digits.
pub fn polish_extended(
    state: &StationaryState,
    params: &LatticeParams,
    digits: u32,
) -> Result<StationaryState<Ext>> {
    let lifted: StationaryState<Ext> = state.lift(digits);
    let tol = 10f64.powi(-(digits as i32) + 5);
    let (mut psi, e, _) = newton_full(
        params,
        &lifted.gamma,
        lifted.psi.clone(),
        lifted.energy.clone(),
        tol,
        50,
    )?;
    // keep exact zeros exact
    for (p, orig) in psi.iter_mut().zip(&state.psi) {
        if *orig == 0.0 && p.abs().to_f64() < 1e-30 {
            *p = p.zero_like();
        }
    }
    Ok(StationaryState::with_pattern(
        psi,
        e,
        lifted.gamma,
        state.pattern.clone(),
    ))
}

#[derive(Clone, Debug)]
pub struct AnnotatedBranch {
    pub branch: Branch,
    pub reports: Vec<Result<StabilityReport>>,
}

/// Classifies every sample of every branch; failures stay per sample.
pub fn stability_map(
    branches: &[Branch],
    params: &LatticeParams,
    tau: f64,
) -> Vec<AnnotatedBranch> {
    branches
        .iter()
        .map(|b| AnnotatedBranch {
            branch: b.clone(),
            reports: b
                .samples
                .par_iter()
                .map(|(_, s)| classify(s, params, tau))
                .collect(),
        })
        .collect()
}
