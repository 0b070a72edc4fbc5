//! Damped Newton iterations over any [`Real`].

use crate::error::{Error, Result};
use crate::linalg::{self, Dense};
use crate::model::{max_abs, residual_parts, LatticeParams};
use crate::real::Real;

/// Step halvings allowed per iteration before giving up.
const MAX_HALVINGS: usize = 30;

/// Effective tolerance: never tighter than what the working precision can
/// deliver.
pub(crate) fn effective_tol(tol: f64, like: &impl Real, magnitude: f64) -> f64 {
    tol.max(8.0 * like.epsilon() * (1.0 + magnitude))
}

/// Unidirectional tail `ψ_{n+1} = (E − Γψ_n²)ψ_n` from `ψ_1 = u`, with its
/// derivatives in `E` and `u`.
pub(crate) fn recurrence_tail<T: Real>(
    m: usize,
    energy: &T,
    u: &T,
    gamma: &T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut psi = Vec::with_capacity(m);
    let mut de = Vec::with_capacity(m);
    let mut du = Vec::with_capacity(m);
    psi.push(u.clone());
    de.push(u.zero_like());
    du.push(u.one_like());
    for n in 0..m - 1 {
        let p = psi[n].clone();
        let p2 = p.square();
        let lin = energy.clone() - gamma.clone() * p2.clone();
        let jac = energy.clone() - gamma.cast(3.0) * gamma.clone() * p2;
        de.push(p.clone() + jac.clone() * de[n].clone());
        du.push(jac * du[n].clone());
        psi.push(lin * p);
    }
    (psi, de, du)
}

struct RecurrenceEval<T> {
    psi: Vec<T>,
    f1: T,
    f2: T,
    /// Scale of the closure residual `E − Γψ_m²`.
    scale: f64,
}

fn eval_recurrence<T: Real>(
    m: usize,
    e: &T,
    u: &T,
    gamma: &T,
) -> (RecurrenceEval<T>, Vec<T>, Vec<T>) {
    let (psi, de, du) = recurrence_tail(m, e, u, gamma);
    let last = psi[m - 1].clone();
    let closure = gamma.clone() * last.square();
    let f1 = e.clone() - closure.clone();
    let f2 = psi.iter().fold(e.zero_like(), |acc, p| acc + p.square()) - e.one_like();
    let scale = (e.abs() + closure.abs()).to_f64();
    (RecurrenceEval { psi, f1, f2, scale }, de, du)
}

fn merit<T: Real>(ev: &RecurrenceEval<T>) -> f64 {
    let r1 = if ev.scale > 0.0 {
        // relative for small energies (ratio taken in T so that they keep
        // their size), absolute once the scale exceeds one
        let s = ev.f1.cast(ev.scale.min(1.0));
        (ev.f1.abs() / s).to_f64()
    } else {
        ev.f1.abs().to_f64()
    };
    r1.max(ev.f2.abs().to_f64())
}

/// Output of the (E, ψ_1) Newton iteration.
#[derive(Clone, Debug)]
pub struct RecurrenceRoot<T> {
    pub energy: T,
    pub psi: Vec<T>,
    pub iterations: usize,
}

/// Two-variable Newton on `{E − Γψ_m², Σψ_n² − 1}` with the tail generated
/// by the recurrence. Below unit scale the first row is judged relative to
/// `|E|`, since SDB energies near the exceptional point can be
/// astronomically small.
pub fn newton_recurrence<T: Real>(
    m: usize,
    gamma: &T,
    mut e: T,
    mut u: T,
    tol: f64,
    max_iter: usize,
) -> Result<RecurrenceRoot<T>> {
    if m == 0 {
        return Err(Error::Argument("m must be at least 1".into()));
    }
    let tol = effective_tol(tol, gamma, 0.0);
    let (mut ev, mut de, mut du) = eval_recurrence(m, &e, &u, gamma);
    let mut current = merit(&ev);
    for iter in 0..=max_iter {
        if !current.is_finite() {
            return Err(Error::Convergence {
                iterations: iter,
                residual: current,
            });
        }
        if current <= tol {
            return Ok(RecurrenceRoot {
                energy: e,
                psi: ev.psi,
                iterations: iter,
            });
        }
        if iter == max_iter {
            break;
        }
        let two = gamma.cast(2.0);
        let last = ev.psi[m - 1].clone();
        let j11 = e.one_like() - two.clone() * gamma.clone() * last.clone() * de[m - 1].clone();
        let j12 = -(two.clone() * gamma.clone() * last * du[m - 1].clone());
        let mut j21 = e.zero_like();
        let mut j22 = e.zero_like();
        for n in 0..m {
            j21 = j21 + two.clone() * ev.psi[n].clone() * de[n].clone();
            j22 = j22 + two.clone() * ev.psi[n].clone() * du[n].clone();
        }
        let det = j11.clone() * j22.clone() - j12.clone() * j21.clone();
        if det.is_zero() {
            return Err(Error::Numeric("singular recurrence Jacobian".into()));
        }
        let step_e = -(j22 * ev.f1.clone() - j12 * ev.f2.clone()) / det.clone();
        let step_u = -(j11 * ev.f2.clone() - j21 * ev.f1.clone()) / det;

        let mut lambda = e.one_like();
        let half = e.cast(0.5);
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let e_try = e.clone() + lambda.clone() * step_e.clone();
            let u_try = u.clone() + lambda.clone() * step_u.clone();
            let trial = eval_recurrence(m, &e_try, &u_try, gamma);
            let value = merit(&trial.0);
            if value < current {
                e = e_try;
                u = u_try;
                (ev, de, du) = trial;
                current = value;
                accepted = true;
                break;
            }
            lambda = lambda * half.clone();
        }
        if !accepted {
            return Err(Error::Convergence {
                iterations: iter + 1,
                residual: current,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: current,
    })
}

/// Newton on the full system `(ψ_1..ψ_L, E)` with the normalization row.
pub fn newton_full<T: Real>(
    params: &LatticeParams,
    gamma: &T,
    mut psi: Vec<T>,
    mut e: T,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<T>, T, usize)> {
    let l = params.sites;
    if psi.len() != l {
        return Err(Error::Argument(format!(
            "seed has {} sites, lattice has {l}",
            psi.len()
        )));
    }
    let magnitude = gamma.abs().to_f64() + params.hop_left.abs() + params.hop_right.abs();
    let tol = effective_tol(tol, gamma, magnitude);
    let mut r = residual_parts(&psi, &e, gamma, params)?;
    let mut current = max_abs(&r);
    let jl = gamma.cast(params.hop_left);
    let jr = gamma.cast(params.hop_right);
    for iter in 0..=max_iter {
        if !current.is_finite() {
            return Err(Error::Convergence {
                iterations: iter,
                residual: current,
            });
        }
        if current <= tol {
            return Ok((psi, e, iter));
        }
        if iter == max_iter {
            break;
        }
        let mut jac = Dense::zeros(l + 1, gamma);
        let three = gamma.cast(3.0);
        let two = gamma.cast(2.0);
        for n in 0..l {
            let diag = three.clone() * gamma.clone() * psi[n].square() - e.clone();
            jac.set(n, n, diag);
            if let Some(k) = params.next(n) {
                let v = jac.get(n, k).clone() + jl.clone();
                jac.set(n, k, v);
            }
            if let Some(k) = params.prev(n) {
                let v = jac.get(n, k).clone() + jr.clone();
                jac.set(n, k, v);
            }
            jac.set(n, l, -psi[n].clone());
            jac.set(l, n, two.clone() * psi[n].clone());
        }
        let neg: Vec<T> = r.iter().map(|x| -x.clone()).collect();
        let step = linalg::solve(&jac, &neg)?;

        let mut lambda = e.one_like();
        let half = e.cast(0.5);
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let psi_try: Vec<T> = psi
                .iter()
                .zip(&step)
                .map(|(p, s)| p.clone() + lambda.clone() * s.clone())
                .collect();
            let e_try = e.clone() + lambda.clone() * step[l].clone();
            let r_try = residual_parts(&psi_try, &e_try, gamma, params)?;
            let value = max_abs(&r_try);
            if value < current {
                psi = psi_try;
                e = e_try;
                r = r_try;
                current = value;
                accepted = true;
                break;
            }
            lambda = lambda * half.clone();
        }
        if !accepted {
            return Err(Error::Convergence {
                iterations: iter + 1,
                residual: current,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: current,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatticeParams;

    #[test]
    fn tail_derivatives_match_finite_differences() {
        let (g, e, u) = (2.0, 0.7, 0.8);
        let (psi, de, du) = recurrence_tail(4, &e, &u, &g);
        let h = 1e-6;
        let (pe, _, _) = recurrence_tail(4, &(e + h), &u, &g);
        let (pu, _, _) = recurrence_tail(4, &e, &(u + h), &g);
        for n in 0..4 {
            assert!(((pe[n] - psi[n]) / h - de[n]).abs() < 1e-4);
            assert!(((pu[n] - psi[n]) / h - du[n]).abs() < 1e-4);
        }
    }

    #[test]
    fn recurrence_finds_boundary_mode() {
        let root = newton_recurrence(1, &3.0, 2.0, 0.7, 1e-13, 50).unwrap();
        assert!((root.energy - 3.0).abs() < 1e-12);
        assert!((root.psi[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_newton_converges_on_single_site_pattern() {
        let p = LatticeParams::unidirectional(3);
        let (psi, e, _) = newton_full(&p, &10.0, vec![1.0, 0.05, 0.0], 9.0, 1e-12, 50).unwrap();
        assert!((e - 10.0).abs() < 1e-10);
        assert!(psi[1].abs() < 1e-10);
    }
}
