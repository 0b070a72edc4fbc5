//! Lattice parameters, stationary states and the exact transformations of
//! the stationary equation
//!
//! ```text
//! J_L ψ_{n+1} + J_R ψ_{n-1} + Γ ψ_n³ = E ψ_n,    Σ ψ_n² = 1.
//! ```
//!
//! Sites are stored 0-based; everything user-facing (patterns, CSV output,
//! the `m` label) is 1-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[serde(rename = "obc")]
    Open,
    #[serde(rename = "pbc")]
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Open => "obc",
            Boundary::Periodic => "pbc",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub sites: usize,
    /// Amplitude multiplying ψ_{n+1}.
    pub hop_left: f64,
    /// Amplitude multiplying ψ_{n-1}.
    pub hop_right: f64,
    pub boundary: Boundary,
    /// Uniform loss rate; only the time evolution uses it.
    pub loss: f64,
}

impl LatticeParams {
    pub fn new(sites: usize, hop_left: f64, hop_right: f64, boundary: Boundary) -> Result<Self> {
        if sites == 0 {
            return Err(Error::Argument("a lattice needs at least one site".into()));
        }
        if !hop_left.is_finite() || !hop_right.is_finite() {
            return Err(Error::Argument("hopping amplitudes must be finite".into()));
        }
        Ok(LatticeParams {
            sites,
            hop_left,
            hop_right,
            boundary,
            loss: 0.0,
        })
    }

    /// `J_L = 1`, `J_R = 0`, open boundaries: the order-`sites` exceptional point.
    pub fn unidirectional(sites: usize) -> Self {
        LatticeParams {
            sites: sites.max(1),
            hop_left: 1.0,
            hop_right: 0.0,
            boundary: Boundary::Open,
            loss: 0.0,
        }
    }

    pub fn with_loss(mut self, loss: f64) -> Result<Self> {
        if !(loss >= 0.0) || !loss.is_finite() {
            return Err(Error::Argument(format!(
                "loss rate must be nonnegative, got {loss}"
            )));
        }
        self.loss = loss;
        Ok(self)
    }

    pub fn is_unidirectional_open(&self) -> bool {
        self.boundary == Boundary::Open && self.hop_right == 0.0 && self.hop_left != 0.0
    }

    /// Real-spectrum guarantee holds only for `J_L·J_R ≥ 0`.
    pub fn require_real_spectrum(&self) -> Result<()> {
        if self.hop_left * self.hop_right < 0.0 {
            return Err(Error::Domain(format!(
                "J_L·J_R = {} < 0: energies are not guaranteed real",
                self.hop_left * self.hop_right
            )));
        }
        Ok(())
    }

    /// Index of site `n + 1` (left-hopping partner), if coupled.
    pub fn next(&self, n: usize) -> Option<usize> {
        if n + 1 < self.sites {
            Some(n + 1)
        } else if self.boundary == Boundary::Periodic {
            Some(0)
        } else {
            None
        }
    }

    /// Index of site `n - 1` (right-hopping partner), if coupled.
    pub fn prev(&self, n: usize) -> Option<usize> {
        if n > 0 {
            Some(n - 1)
        } else if self.boundary == Boundary::Periodic {
            Some(self.sites - 1)
        } else {
            None
        }
    }
}

/// Occupied sites, sorted, 0-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern(Vec<usize>);

impl Pattern {
    pub fn new(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Pattern(sites)
    }

    /// Sites `0..m`.
    pub fn leading(m: usize) -> Self {
        Pattern((0..m).collect())
    }

    pub fn from_amplitudes<T: Real>(psi: &[T], threshold: f64) -> Self {
        Pattern(
            psi.iter()
                .enumerate()
                .filter(|(_, p)| p.abs().to_f64() > threshold || (threshold == 0.0 && !p.is_zero()))
                .map(|(n, _)| n)
                .collect(),
        )
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, n: usize) -> bool {
        self.0.binary_search(&n).is_ok()
    }

    /// 1-based index of the farthest occupied site.
    pub fn farthest(&self) -> Option<usize> {
        self.0.last().map(|n| n + 1)
    }

    pub fn overlaps(&self, other: &Pattern) -> bool {
        self.0.iter().any(|n| other.contains(*n))
    }

    /// All nonempty subsets of `0..sites`, ordered by bitmask.
    pub fn all_nonempty(sites: usize) -> Vec<Pattern> {
        assert!(sites < 32, "pattern enumeration is limited to 31 sites");
        (1u32..(1 << sites))
            .map(|mask| Pattern((0..sites).filter(|n| mask & (1 << n) != 0).collect()))
            .collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| (n + 1).to_string()).collect();
        f.write_str(&parts.join("|"))
    }
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Ok(Pattern::default());
        }
        s.split('|')
            .map(|t| match t.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n - 1),
                _ => Err(Error::Argument(format!("bad site index {t:?} in pattern"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Pattern::new)
    }
}

/// |ψ_n| above this counts as occupied: 1e-8 in double precision, scaled by
/// the square root of the unit roundoff otherwise.
pub fn occupation_threshold(epsilon: f64) -> f64 {
    1e-8 * (epsilon / f64::EPSILON).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryState<T = f64> {
    pub psi: Vec<T>,
    pub energy: T,
    pub gamma: T,
    pub pattern: Pattern,
}

impl<T: Real> StationaryState<T> {
    /// Applies the phase convention and derives the occupation pattern.
    pub fn new(psi: Vec<T>, energy: T, gamma: T) -> Self {
        let threshold = occupation_threshold(gamma.epsilon());
        let pattern = Pattern::from_amplitudes(&psi, threshold);
        let mut state = StationaryState {
            psi,
            energy,
            gamma,
            pattern,
        };
        state.fix_phase();
        state
    }

    /// As [`StationaryState::new`] but with an explicit pattern, for solvers
    /// that know the support exactly.
    pub fn with_pattern(psi: Vec<T>, energy: T, gamma: T, pattern: Pattern) -> Self {
        let mut state = StationaryState {
            psi,
            energy,
            gamma,
            pattern,
        };
        state.fix_phase();
        state
    }

    pub fn sites(&self) -> usize {
        self.psi.len()
    }

    /// Farthest occupied site, 1-based.
    pub fn m_label(&self) -> usize {
        self.pattern.farthest().unwrap_or(0)
    }

    /// Makes the first occupied amplitude nonnegative (ψ_1 for every
    /// boundary-anchored state).
    pub fn fix_phase(&mut self) {
        let threshold = occupation_threshold(self.gamma.epsilon());
        let lead = self
            .pattern
            .sites()
            .first()
            .copied()
            .or_else(|| self.psi.iter().position(|p| p.abs().to_f64() > threshold));
        if let Some(n) = lead {
            if self.psi[n] < self.psi[n].zero_like() {
                for p in &mut self.psi {
                    *p = -p.clone();
                }
            }
        }
    }

    /// Sites carrying more than half the intensity of a uniformly trapped
    /// state, `ψ_n² > 1/(2L)`: the self-trapping label used at strong coupling.
    pub fn trapped_sites(&self) -> Pattern {
        let cut = 0.5 / self.sites() as f64;
        Pattern::new(
            self.psi
                .iter()
                .enumerate()
                .filter(|(_, p)| p.square().to_f64() > cut)
                .map(|(n, _)| n)
                .collect(),
        )
    }

    pub fn to_f64(&self) -> StationaryState<f64> {
        StationaryState {
            psi: self.psi.iter().map(Real::to_f64).collect(),
            energy: self.energy.to_f64(),
            gamma: self.gamma.to_f64(),
            pattern: self.pattern.clone(),
        }
    }

    /// Max-norm distance in (E, ψ).
    pub fn distance(&self, other: &Self) -> f64 {
        if self.psi.len() != other.psi.len() {
            return f64::INFINITY;
        }
        let de = (self.energy.clone() - other.energy.clone()).abs().to_f64();
        self.psi
            .iter()
            .zip(&other.psi)
            .map(|(a, b)| (a.clone() - b.clone()).abs().to_f64())
            .fold(de, f64::max)
    }
}

impl StationaryState<f64> {
    /// Exact conversion into another precision.
    pub fn lift<U: Real>(&self, digits: u32) -> StationaryState<U> {
        StationaryState {
            psi: self.psi.iter().map(|&p| U::from_f64(p, digits)).collect(),
            energy: U::from_f64(self.energy, digits),
            gamma: U::from_f64(self.gamma, digits),
            pattern: self.pattern.clone(),
        }
    }
}

/// Residual of the stationary equation: `L` lattice rows followed by
/// `Σψ² − 1`.
pub fn residual<T: Real>(state: &StationaryState<T>, params: &LatticeParams) -> Result<Vec<T>> {
    residual_parts(&state.psi, &state.energy, &state.gamma, params)
}

pub(crate) fn residual_parts<T: Real>(
    psi: &[T],
    energy: &T,
    gamma: &T,
    params: &LatticeParams,
) -> Result<Vec<T>> {
    if psi.len() != params.sites {
        return Err(Error::Argument(format!(
            "state has {} sites, lattice has {}",
            psi.len(),
            params.sites
        )));
    }
    let jl = energy.cast(params.hop_left);
    let jr = energy.cast(params.hop_right);
    let mut out = Vec::with_capacity(psi.len() + 1);
    let mut norm = energy.zero_like();
    for (n, p) in psi.iter().enumerate() {
        let mut r = (gamma.clone() * p.square() - energy.clone()) * p.clone();
        if let Some(k) = params.next(n) {
            r = r + jl.clone() * psi[k].clone();
        }
        if let Some(k) = params.prev(n) {
            r = r + jr.clone() * psi[k].clone();
        }
        out.push(r);
        norm = norm + p.square();
    }
    out.push(norm - energy.one_like());
    Ok(out)
}

pub fn max_abs<T: Real>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs().to_f64()).fold(0.0, f64::max)
}

/// `(Γ, E, ψ_n) → (−Γ, −E, (−1)^n ψ_n)`, then the phase convention.
///
/// An exact symmetry under open boundaries and under periodic boundaries
/// with an even number of sites.
pub fn sign_map<T: Real>(state: &StationaryState<T>) -> StationaryState<T> {
    let psi = state
        .psi
        .iter()
        .enumerate()
        // site index n = i + 1 is odd for even i
        .map(|(i, p)| if i % 2 == 0 { -p.clone() } else { p.clone() })
        .collect();
    StationaryState::with_pattern(
        psi,
        -state.energy.clone(),
        -state.gamma.clone(),
        state.pattern.clone(),
    )
}

/// `φ_n = ψ_n / tⁿ` with `t = √(J_R/J_L)`.
pub fn gauge_transform<T: Real>(
    state: &StationaryState<T>,
    params: &LatticeParams,
) -> Result<Vec<T>> {
    let t = gauge_factor(params, &state.energy)?;
    let mut scale = state.energy.one_like();
    Ok(state
        .psi
        .iter()
        .map(|p| {
            scale = scale.clone() * t.clone();
            p.clone() / scale.clone()
        })
        .collect())
}

/// Inverse of [`gauge_transform`].
pub fn inverse_gauge_transform<T: Real>(phi: &[T], params: &LatticeParams) -> Result<Vec<T>> {
    let Some(first) = phi.first() else {
        return Ok(Vec::new());
    };
    let t = gauge_factor(params, first)?;
    let mut scale = first.one_like();
    Ok(phi
        .iter()
        .map(|p| {
            scale = scale.clone() * t.clone();
            p.clone() * scale.clone()
        })
        .collect())
}

fn gauge_factor<T: Real>(params: &LatticeParams, like: &T) -> Result<T> {
    let ratio = params.hop_right / params.hop_left;
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::Domain(format!(
            "J_R/J_L = {ratio}: gauge transform needs J_L·J_R > 0"
        )));
    }
    Ok((like.cast(params.hop_right) / like.cast(params.hop_left)).sqrt())
}

/// Residual of the gauge-transformed equation with symmetric hopping
/// `J = J_L t` and site-dependent nonlinearity `t^{2n} Γ`, plus the weighted
/// normalization `Σ t^{2n} φ_n² − 1`.
pub fn gauge_residual<T: Real>(
    phi: &[T],
    energy: &T,
    gamma: &T,
    params: &LatticeParams,
) -> Result<Vec<T>> {
    let t = gauge_factor(params, energy)?;
    let j = energy.cast(params.hop_left) * t.clone();
    let t2 = t.square();
    let mut weight = energy.one_like();
    let mut out = Vec::with_capacity(phi.len() + 1);
    let mut norm = energy.zero_like();
    for (n, p) in phi.iter().enumerate() {
        weight = weight.clone() * t2.clone();
        let mut r = (gamma.clone() * weight.clone() * p.square() - energy.clone()) * p.clone();
        if let Some(k) = params.next(n) {
            r = r + j.clone() * phi[k].clone();
        }
        if let Some(k) = params.prev(n) {
            r = r + j.clone() * phi[k].clone();
        }
        out.push(r);
        norm = norm + weight.clone() * p.square();
    }
    out.push(norm - energy.one_like());
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveModelParams {
    pub hop_left: f64,
    pub hop_right: f64,
    pub gamma: f64,
    pub loss: f64,
}

impl EffectiveModelParams {
    pub fn lattice(&self, sites: usize, boundary: Boundary) -> Result<LatticeParams> {
        LatticeParams::new(sites, self.hop_left, self.hop_right, boundary)?.with_loss(self.loss)
    }
}

/// Mean-field reduction of a Bose-Hubbard chain with correlated loss
/// `L_i = √g (a_i − i a_{i+1})`: `J_{L,R} = −(J ± g/2)`, Kerr strength `U`,
/// and an overall loss `g`.
pub fn lindblad_to_dnlse(
    hopping: f64,
    loss: f64,
    interaction: f64,
) -> Result<EffectiveModelParams> {
    if !(loss >= 0.0) {
        return Err(Error::Domain(format!(
            "loss rate must be nonnegative, got {loss}"
        )));
    }
    Ok(EffectiveModelParams {
        hop_left: -(hopping + loss / 2.0),
        hop_right: -(hopping - loss / 2.0),
        gamma: interaction,
        loss,
    })
}
