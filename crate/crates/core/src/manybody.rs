//! Exact diagonalization of the Bose-Hubbard chain with leftward hopping only,
//!
//! ```text
//! H = −J_L Σ_i a_i† a_{i+1} + (U/2) Σ_i n_i(n_i − 1).
//! ```
//!
//! In descending lexicographic order every hop moves a state to an earlier
//! index, so `H` is upper triangular and its spectrum is the interaction
//! diagonal.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{fit_power_law, ScalingFit};
use crate::error::{Error, Result};

pub const DEFAULT_DIMENSION_CAP: usize = 1_000_000;

/// Rank tolerance for `H − λI`, relative to `max(1, ‖H‖)`.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockBasis {
    pub sites: usize,
    pub bosons: usize,
    /// Occupation vectors in descending lexicographic order.
    pub states: Vec<Vec<u32>>,
}

fn dimension(sites: usize, bosons: usize) -> u128 {
    // binomial(N + L − 1, L − 1), saturating
    let (n, k) = ((bosons + sites - 1) as u128, (sites - 1) as u128);
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

impl FockBasis {
    pub fn new(sites: usize, bosons: usize) -> Result<Self> {
        Self::with_cap(sites, bosons, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(sites: usize, bosons: usize, cap: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::Argument("the chain needs at least one site".into()));
        }
        let requested = dimension(sites, bosons);
        if requested > cap as u128 {
            return Err(Error::Capacity { requested, cap });
        }
        let mut states = Vec::with_capacity(requested as usize);
        let mut current = vec![0u32; sites];
        fill(&mut states, &mut current, 0, bosons as u32);
        Ok(FockBasis {
            sites,
            bosons,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Σ_i i·n_i with 1-based i.
    pub fn center_of_mass(state: &[u32]) -> u64 {
        state
            .iter()
            .enumerate()
            .map(|(i, &n)| (i as u64 + 1) * n as u64)
            .sum()
    }

    pub fn interaction_diagonal(&self, u: f64) -> Vec<f64> {
        self.states.iter().map(|s| interaction(s, u)).collect()
    }
}

fn fill(out: &mut Vec<Vec<u32>>, current: &mut [u32], site: usize, left: u32) {
    if site == current.len() - 1 {
        current[site] = left;
        out.push(current.to_vec());
        return;
    }
    for n in (0..=left).rev() {
        current[site] = n;
        fill(out, current, site + 1, left - n);
    }
}

fn interaction(state: &[u32], u: f64) -> f64 {
    0.5 * u
        * state
            .iter()
            .map(|&n| n as f64 * (n as f64 - 1.0))
            .sum::<f64>()
}

pub fn build_basis(sites: usize, bosons: usize) -> Result<FockBasis> {
    FockBasis::new(sites, bosons)
}

pub fn build_hamiltonian(basis: &FockBasis, hop_left: f64, u: f64) -> DMatrix<f64> {
    let dim = basis.len();
    let index: HashMap<&[u32], usize> = basis
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_slice(), k))
        .collect();
    let mut h = DMatrix::zeros(dim, dim);
    for (col, state) in basis.states.iter().enumerate() {
        h[(col, col)] = interaction(state, u);
        for i in 0..basis.sites.saturating_sub(1) {
            if state[i + 1] == 0 {
                continue;
            }
            let mut target = state.clone();
            target[i] += 1;
            target[i + 1] -= 1;
            let row = index[target.as_slice()];
            let amp = ((state[i] as f64 + 1.0) * state[i + 1] as f64).sqrt();
            h[(row, col)] += -hop_left * amp;
        }
    }
    h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManyBodyResult {
    pub u: f64,
    /// Sorted by descending real part, then descending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// `⟨n_i⟩` per eigenvalue, `None` where the eigenvalue is defective.
    pub distributions: Vec<Option<Vec<f64>>>,
    pub defective: Vec<bool>,
}

/// Eigenvalues, occupation profiles and defectiveness at every `U`.
pub fn spectrum(
    basis: &FockBasis,
    hop_left: f64,
    u_grid: &[f64],
) -> Result<Vec<Result<ManyBodyResult>>> {
    if u_grid.is_empty() {
        return Err(Error::Argument("empty U grid".into()));
    }
    Ok(u_grid
        .par_iter()
        .map(|&u| spectrum_at(basis, hop_left, u))
        .collect())
}

pub fn spectrum_at(basis: &FockBasis, hop_left: f64, u: f64) -> Result<ManyBodyResult> {
    if !u.is_finite() {
        return Err(Error::Argument(format!("U must be finite, got {u}")));
    }
    let h = build_hamiltonian(basis, hop_left, u);
    let dim = h.nrows();
    let schur = nalgebra::linalg::Schur::try_new(h.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric(format!("Schur iteration did not converge at U = {u}")))?;
    let mut eig: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));

    let scale = 1.0f64.max(h.norm());
    let cluster_tol = 1e-6 * scale;
    let hc: DMatrix<Complex64> = h.map(|x| Complex64::new(x, 0.0));
    let occupations: Vec<Vec<f64>> = basis
        .states
        .iter()
        .map(|s| s.iter().map(|&n| n as f64).collect())
        .collect();

    let mut distributions = vec![None; dim];
    let mut defective = vec![false; dim];
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && (eig[end] - eig[start]).norm() <= cluster_tol {
            end += 1;
        }
        let lambda = eig[start..end].iter().sum::<Complex64>() / (end - start) as f64;
        let null = null_space(&hc, lambda, RANK_TOL * scale);
        if null.len() < end - start {
            defective[start..end].fill(true);
        } else {
            for (k, v) in (start..end).zip(null) {
                distributions[k] = Some(profile(&v, &occupations, basis.sites));
            }
        }
        start = end;
    }
    Ok(ManyBodyResult {
        u,
        eigenvalues: eig,
        distributions,
        defective,
    })
}

/// Orthonormal basis of the numerical kernel of `H − λI`.
fn null_space(h: &DMatrix<Complex64>, lambda: Complex64, tol: f64) -> Vec<Vec<Complex64>> {
    let n = h.nrows();
    let shifted = h - DMatrix::from_diagonal_element(n, n, lambda);
    // kernel of M = right singular vectors of M with small singular values;
    // work with M† so that they come out as left singular vectors (columns of U)
    let svd = shifted.adjoint().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol)
        .map(|(k, _)| u.column(k).iter().copied().collect())
        .collect()
}

/// `⟨n_i⟩` normalized so that the profile sums to N.
fn profile(v: &[Complex64], occupations: &[Vec<f64>], sites: usize) -> Vec<f64> {
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let mut out = vec![0.0; sites];
    for (c, occ) in v.iter().zip(occupations) {
        let w = c.norm_sqr() / norm;
        for (o, n) in out.iter_mut().zip(occ) {
            *o += w * n;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandFit {
    /// 1 is the top band.
    pub band: usize,
    pub values: Vec<(f64, f64)>,
    /// `None` for a band that vanishes identically.
    pub fit: Option<ScalingFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingAbsenceReport {
    pub bands: Vec<BandFit>,
    /// Every nonvanishing band has exponent 1 within 0.01.
    pub all_linear: bool,
}

/// Fits `log|E_band|` against `log U` for each distinct eigenvalue band.
pub fn scaling_absence_check(
    sites: usize,
    bosons: usize,
    hop_left: f64,
    u_grid: &[f64],
) -> Result<ScalingAbsenceReport> {
    let basis = build_basis(sites, bosons)?;
    let positive: Vec<f64> = u_grid.iter().copied().filter(|&u| u > 0.0).collect();
    if positive.len() < 3 {
        return Err(Error::Argument(
            "need at least three positive U values".into(),
        ));
    }
    let mut per_u = Vec::with_capacity(positive.len());
    for r in spectrum(&basis, hop_left, &positive)? {
        let r = r?;
        let tol = 1e-6 * (1.0 + r.u.abs());
        let mut distinct: Vec<f64> = Vec::new();
        for z in &r.eigenvalues {
            if distinct.last().is_none_or(|&d| (d - z.re).abs() > tol) {
                distinct.push(z.re);
            }
        }
        per_u.push((r.u, distinct));
    }
    let n_bands = per_u.iter().map(|(_, d)| d.len()).min().unwrap_or(0);
    let mut bands = Vec::with_capacity(n_bands);
    for b in 0..n_bands {
        let values: Vec<(f64, f64)> = per_u.iter().map(|(u, d)| (*u, d[b])).collect();
        let vanishing = values.iter().all(|(u, e)| e.abs() <= 1e-10 * (1.0 + u));
        let fit = if vanishing {
            None
        } else {
            let pts: Vec<(f64, f64)> = values.iter().map(|&(u, e)| (u, e.abs())).collect();
            Some(fit_power_law(&pts)?)
        };
        bands.push(BandFit {
            band: b + 1,
            values,
            fit,
        });
    }
    let all_linear = bands.iter().all(|b| {
        b.fit
            .as_ref()
            .is_none_or(|f| (f.exponent - 1.0).abs() <= 0.01)
    });
    Ok(ScalingAbsenceReport { bands, all_linear })
}
