//! Leading-order weak- and strong-coupling laws and the fits that check
//! the solvers against them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StationaryState;
use crate::real::Real;

/// α_m = 3^{m−1}.
pub fn energy_exponent(m: usize) -> u64 {
    assert!(
        (1..=40).contains(&m),
        "exponent 3^(m-1) overflows for m = {m}"
    );
    3u64.pow(m as u32 - 1)
}

/// β_n = (3^{n−1} − 1)/2.
pub fn amplitude_exponent(n: usize) -> u64 {
    (energy_exponent(n) - 1) / 2
}

/// `Γ^{3^{m−1}}`.
pub fn weak_energy<T: Real>(m: usize, gamma: T) -> T {
    gamma.powu(energy_exponent(m))
}

/// Unnormalized `ψ_n = (−Γ)^{(3^{n−1}−1)/2}`, `n = 1..=m`.
pub fn weak_wavefunction<T: Real>(m: usize, gamma: T) -> Vec<T> {
    let neg = -gamma;
    (1..=m).map(|n| neg.powu(amplitude_exponent(n))).collect()
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `(Γ/m, C(L, m))`: self-trapped energy and the number of patterns with
/// `m` occupied sites.
pub fn strong_energy(sites: usize, m: usize, gamma: f64) -> (f64, u64) {
    (gamma / m as f64, binomial(sites as u64, m as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub gamma_range: (f64, f64),
}

/// Least-squares line through `(ln Γ, ln E)`. Logarithms go through
/// [`Real::ln`], so energies below the double-precision range are fine.
pub fn fit_power_law<T: Real>(points: &[(T, T)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for (g, e) in points {
        let zero = g.zero_like();
        if !(*g > zero) || !(*e > e.zero_like()) {
            return Err(Error::Domain("power-law fit needs positive Γ and E".into()));
        }
        xs.push(g.ln());
        ys.push(e.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all Γ values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    let lo = points
        .iter()
        .map(|p| p.0.to_f64())
        .fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p.0.to_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingFit {
        exponent: slope,
        intercept,
        r_squared,
        gamma_range: (lo, hi),
    })
}

/// `y_n = log₃[3 log_Γ(Γψ_n²)]` for every nonzero amplitude; an ideal SDB
/// gives `y_n = n`. Sites are reported 1-based.
pub fn decay_coordinates<T: Real>(state: &StationaryState<T>) -> Result<Vec<(usize, f64)>> {
    let g = state.gamma.to_f64();
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::Domain(format!(
            "decay coordinates need 0 < Γ < 1, got {g}"
        )));
    }
    let ln_g = state.gamma.ln();
    Ok(state
        .psi
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_zero())
        .map(|(n, p)| {
            let ln_gp2 = ln_g + 2.0 * p.abs().ln();
            (n + 1, (3.0 * ln_gp2 / ln_g).ln() / 3f64.ln())
        })
        .collect())
}

/// Evenly log-spaced grid including both ends.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Ext;

    #[test]
    fn exponents_are_exact() {
        assert_eq!(
            (1..=4).map(energy_exponent).collect::<Vec<_>>(),
            vec![1, 3, 9, 27]
        );
        assert_eq!(
            (1..=4).map(amplitude_exponent).collect::<Vec<_>>(),
            vec![0, 1, 4, 13]
        );
    }

    #[test]
    fn weak_laws_examples() {
        assert_eq!(weak_energy(1, 0.1), 0.1);
        assert!((weak_energy(3, 0.1) - 1e-9).abs() < 1e-22);
        let psi = weak_wavefunction(4, 0.1);
        assert_eq!(psi[0], 1.0);
        assert!((psi[1] + 0.1).abs() < 1e-16);
        for n in 0..3 {
            let ratio = psi[n + 1] / psi[n];
            let expected = (-0.1f64).powi(3i32.pow(n as u32));
            assert!((ratio / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn strong_laws_examples() {
        assert_eq!(strong_energy(4, 1, 100.0), (100.0, 4));
        assert_eq!(strong_energy(4, 4, 12.0), (3.0, 1));
        assert_eq!((1..=4).map(|m| binomial(4, m)).sum::<u64>(), 15);
    }

    #[test]
    fn fit_recovers_cubic() {
        let pts: Vec<(f64, f64)> = log_grid(1e-3, 1e-1, 10)
            .into_iter()
            .map(|g| (g, g.powi(3)))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_power_law(&pts[..2]).is_err());
        assert!(matches!(
            fit_power_law(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fit_works_below_double_range() {
        let pts: Vec<(Ext, Ext)> = [1e-3, 3e-3, 1e-2]
            .iter()
            .map(|&g| {
                let g = Ext::from_f64(g, 60);
                (g.clone(), g.powu(243))
            })
            .collect();
        assert!((fit_power_law(&pts).unwrap().exponent - 243.0).abs() < 1e-9);
    }

    #[test]
    fn ideal_profile_decays_doubly_exponentially() {
        let psi = weak_wavefunction(4, 0.1);
        let state = StationaryState::new(psi, 1e-27, 0.1);
        for (n, y) in decay_coordinates(&state).unwrap() {
            assert!((y - n as f64).abs() < 1e-12, "{n}: {y}");
        }
        let bad = StationaryState::new(vec![1.0], 2.0, 2.0);
        assert!(decay_coordinates(&bad).is_err());
    }
}
