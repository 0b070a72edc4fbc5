//! Real stationary solutions: SDB branches by the (E, ψ_1) recurrence,
//! complete solution sets by multi-start Newton with deflation, and
//! continuation sweeps in Γ.

pub mod cubic;
mod newton;
mod sweep;

use serde::{Deserialize, Serialize};

pub use cubic::{bifurcation_gamma_c, site2_cubic, site2_cubic_roots, site2_discriminant};
pub use newton::{newton_full, newton_recurrence, RecurrenceRoot};
pub use sweep::{stitch_branches, sweep_spectrum, SpectrumPoint, SpectrumSweep};

use crate::asymptotics::weak_energy;
use crate::error::{Error, Result};
use crate::model::{max_abs, residual, Boundary, LatticeParams, Pattern, StationaryState};
use crate::real::{Real, F64_DIGITS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Energy seeds per branch in the multi-start search; half as many
    /// amplitude seeds are paired with each.
    pub n_seeds: usize,
    pub dedup_tol: f64,
    pub precision_digits: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-12,
            max_iter: 100,
            n_seeds: 48,
            dedup_tol: 1e-6,
            precision_digits: F64_DIGITS,
        }
    }
}

impl SolverConfig {
    /// Settings for a software float carrying `digits` decimal digits.
    pub fn extended(digits: u32) -> Self {
        let digits = digits.max(F64_DIGITS);
        SolverConfig {
            newton_tol: 10f64.powi(-(digits as i32 - 5)).max(1e-300),
            precision_digits: digits,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::Argument(format!(
                "newton_tol must be positive, got {}",
                self.newton_tol
            )));
        }
        if self.precision_digits < F64_DIGITS {
            return Err(Error::Argument(format!(
                "precision_digits must be at least {F64_DIGITS}, got {}",
                self.precision_digits
            )));
        }
        if self.max_iter == 0 || self.n_seeds == 0 {
            return Err(Error::Argument(
                "max_iter and n_seeds must be positive".into(),
            ));
        }
        if !(self.dedup_tol > 0.0) {
            return Err(Error::Argument("dedup_tol must be positive".into()));
        }
        Ok(())
    }
}

/// A family of states followed across the Γ grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub pattern: Pattern,
    /// Farthest occupied site (1-based) at the first sample.
    pub m: usize,
    pub samples: Vec<(f64, StationaryState)>,
}

/// Distinct states at one Γ. Two states coincide when their patterns agree
/// and their (E, ψ) max-norm distance is below the tolerance.
#[derive(Clone, Debug, Default)]
pub struct SolutionSet {
    states: Vec<StationaryState>,
    tol: f64,
}

impl SolutionSet {
    pub fn new(tol: f64) -> Self {
        SolutionSet {
            states: Vec::new(),
            tol,
        }
    }

    pub fn insert(&mut self, state: StationaryState) -> bool {
        if self.contains(&state) {
            return false;
        }
        self.states.push(state);
        true
    }

    pub fn contains(&self, state: &StationaryState) -> bool {
        self.states
            .iter()
            .any(|s| s.pattern == state.pattern && s.distance(state) < self.tol)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StationaryState] {
        &self.states
    }

    /// Sorted by farthest occupied site, then energy.
    pub fn into_sorted(mut self) -> Vec<StationaryState> {
        sort_states(&mut self.states);
        self.states
    }
}

pub(crate) fn sort_states(states: &mut [StationaryState]) {
    states.sort_by(|a, b| {
        a.m_label()
            .cmp(&b.m_label())
            .then(a.energy.total_cmp(&b.energy))
            .then_with(|| a.pattern.cmp(&b.pattern))
            .then_with(|| {
                a.psi
                    .iter()
                    .zip(&b.psi)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
}

/// Recurrence tolerance for seeds and continuation steps; results are
/// tightened afterwards.
const SEED_TOL: f64 = 1e-9;

/// Below this Γ the weak-coupling law is an adequate Newton seed.
const WEAK_START: f64 = 0.05;

/// The SDB occupying sites `1..=m` of the unidirectional chain with unit
/// hopping, continued from the exceptional point.
pub fn solve_sdb_branch<T: Real>(
    sites: usize,
    m: usize,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<StationaryState<T>> {
    cfg.validate()?;
    if m == 0 || m > sites {
        return Err(Error::Argument(format!("m = {m} outside 1..={sites}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!(
            "SDB branches are continued for Γ > 0, got {gamma}"
        )));
    }
    let digits = cfg.precision_digits;
    let g = T::from_f64(gamma, digits);
    let mut psi = vec![g.zero_like(); sites];
    if m == 1 {
        psi[0] = g.one_like();
        return Ok(StationaryState::with_pattern(
            psi,
            g.clone(),
            g,
            Pattern::leading(1),
        ));
    }

    let alpha = 3u64.pow(m as u32 - 1);
    let start = gamma.min(WEAK_START);
    let (e0, u0) = if weak_energy(m, start).ln() < -650.0 {
        // Beyond the double-precision exponent range: only the working
        // precision can represent the branch, and Γ is tiny anyway.
        (g.powu(alpha), g.one_like())
    } else {
        let (e, u) = continue_sdb_f64(m, start, gamma, alpha, cfg)?;
        (T::from_f64(e, digits), T::from_f64(u, digits))
    };
    let root = recurrence_or_polish(sites, m, &g, e0, u0, cfg)?;
    for (n, p) in root.psi.iter().enumerate() {
        if p.is_zero() {
            return Err(Error::BranchIdentity(format!(
                "ψ_{} vanished on the m = {m} branch",
                n + 1
            )));
        }
    }
    for (slot, p) in psi.iter_mut().zip(root.psi) {
        *slot = p;
    }
    Ok(StationaryState::with_pattern(
        psi,
        root.energy,
        g,
        Pattern::leading(m),
    ))
}

/// The m-th SDB at `gamma`, warm-started from a nearby point of the same
/// branch when one is given; falls back to continuation from the
/// exceptional point if the warm start fails.
pub fn track_sdb(
    sites: usize,
    m: usize,
    gamma: f64,
    previous: Option<&StationaryState>,
    cfg: &SolverConfig,
) -> Result<StationaryState> {
    if let Some(prev) = previous.filter(|p| m > 1 && p.psi.len() == sites && gamma > 0.0) {
        if let Ok(root) = recurrence_or_polish(sites, m, &gamma, prev.energy, prev.psi[0], cfg) {
            if root.psi.iter().all(|p| *p != 0.0) {
                let mut psi = vec![0.0; sites];
                psi[..m].copy_from_slice(&root.psi);
                return Ok(StationaryState::with_pattern(
                    psi,
                    root.energy,
                    gamma,
                    Pattern::leading(m),
                ));
            }
        }
    }
    solve_sdb_branch(sites, m, gamma, cfg)
}

/// Recurrence Newton at the configured tolerance. At strong coupling the
/// tail amplifies rounding in ψ_1 by roughly Γ^{m−1}, so when that stalls
/// the looser recurrence root is polished by full Newton with the tail
/// beyond site `m` held at exactly zero.
fn recurrence_or_polish<T: Real>(
    sites: usize,
    m: usize,
    g: &T,
    e0: T,
    u0: T,
    cfg: &SolverConfig,
) -> Result<RecurrenceRoot<T>> {
    match newton_recurrence(m, g, e0.clone(), u0.clone(), cfg.newton_tol, cfg.max_iter) {
        Ok(root) => Ok(root),
        Err(Error::Convergence { .. }) => {
            let loose = newton_recurrence(m, g, e0, u0, cfg.newton_tol.sqrt(), cfg.max_iter)?;
            polish_support(&LatticeParams::unidirectional(sites), m, g, loose, cfg)
        }
        Err(e) => Err(e),
    }
}

fn polish_support<T: Real>(
    params: &LatticeParams,
    m: usize,
    g: &T,
    root: RecurrenceRoot<T>,
    cfg: &SolverConfig,
) -> Result<RecurrenceRoot<T>> {
    let mut psi = vec![g.zero_like(); params.sites];
    for (slot, p) in psi.iter_mut().zip(&root.psi) {
        *slot = p.clone();
    }
    let (mut psi, energy, iterations) = newton_full(
        params,
        g,
        psi,
        root.energy,
        cfg.newton_tol,
        cfg.max_iter.min(20),
    )?;
    if psi[m..].iter().any(|p| p.abs().to_f64() > 1e-8) {
        return Err(Error::BranchIdentity(format!(
            "polishing moved the m = {m} state off its support"
        )));
    }
    psi.truncate(m);
    Ok(RecurrenceRoot {
        energy,
        psi,
        iterations: root.iterations + iterations,
    })
}

/// Double-precision continuation in log Γ from `start` up to `target`.
fn continue_sdb_f64(
    m: usize,
    start: f64,
    target: f64,
    alpha: u64,
    cfg: &SolverConfig,
) -> Result<(f64, f64)> {
    let seed = start.powf(alpha as f64);
    let first = newton_recurrence(m, &start, seed, 1.0, SEED_TOL, cfg.max_iter)?;
    let (mut g_prev, mut e_prev) = (start, first.energy);
    let mut u = first.psi[0];
    let mut slope = alpha as f64;
    let mut ratio = 1.25f64;
    while g_prev < target {
        let g_next = (g_prev * ratio).min(target);
        let e_seed = e_prev * (g_next / g_prev).powf(slope);
        match newton_recurrence(m, &g_next, e_seed, u, SEED_TOL, cfg.max_iter) {
            Ok(root) => {
                if root.energy != 0.0 && e_prev != 0.0 && root.energy.signum() == e_prev.signum() {
                    slope = (root.energy / e_prev).ln() / (g_next / g_prev).ln();
                }
                g_prev = g_next;
                e_prev = root.energy;
                u = root.psi[0].abs();
                ratio = (ratio * ratio).min(1.25);
            }
            Err(err) => {
                ratio = ratio.sqrt();
                if ratio < 1.0 + 1e-6 {
                    return Err(err);
                }
            }
        }
    }
    Ok((e_prev, u))
}

/// Lifts a recurrence root to a full state; `None` if the tail has a zero
/// before site `m` or the full residual misses the tolerance.
fn recurrence_state(
    params: &LatticeParams,
    gamma: f64,
    m: usize,
    root: &RecurrenceRoot<f64>,
    tol: f64,
) -> Option<StationaryState> {
    if root.psi.iter().any(|p| *p == 0.0 || !p.is_finite()) {
        return None;
    }
    let build = |root: &RecurrenceRoot<f64>| {
        let mut psi = vec![0.0; params.sites];
        psi[..m].copy_from_slice(&root.psi);
        let state = StationaryState::new(psi, root.energy * params.hop_left, gamma);
        let r = max_abs(&residual(&state, params).ok()?);
        Some((state, r))
    };
    let (state, r) = build(root)?;
    if r <= tol {
        return Some(state);
    }
    // strong-coupling shooting loses digits; finish on the full system
    let g = gamma / params.hop_left;
    let cfg = SolverConfig {
        newton_tol: tol,
        ..SolverConfig::default()
    };
    let unit = RecurrenceRoot {
        energy: root.energy,
        psi: root.psi.clone(),
        iterations: 0,
    };
    let polished = polish_support(
        &LatticeParams::unidirectional(params.sites),
        m,
        &g,
        unit,
        &cfg,
    )
    .ok()?;
    if polished.psi.contains(&0.0) {
        return None;
    }
    let (state, r) = build(&polished)?;
    (r <= tol).then_some(state)
}

fn full_tol(cfg: &SolverConfig, params: &LatticeParams, gamma: f64) -> f64 {
    newton::effective_tol(
        cfg.newton_tol,
        &gamma,
        gamma.abs() + params.hop_left.abs() + params.hop_right.abs(),
    )
}

/// Strong-coupling seeds: `±1/√|p|` on each nonempty pattern, every sign
/// assignment with a positive first entry (positive-only for long chains).
fn pattern_seeds(sites: usize, gamma: f64) -> Vec<(Vec<f64>, f64)> {
    if sites > 12 {
        return Vec::new();
    }
    let mut seeds = Vec::new();
    for pattern in Pattern::all_nonempty(sites) {
        let k = pattern.len();
        let amp = 1.0 / (k as f64).sqrt();
        let variants = if sites <= 10 { 1u32 << (k - 1) } else { 1 };
        for signs in 0..variants {
            let mut psi = vec![0.0; sites];
            for (j, &n) in pattern.sites().iter().enumerate() {
                let negative = j > 0 && signs & (1 << (j - 1)) != 0;
                psi[n] = if negative { -amp } else { amp };
            }
            seeds.push((psi, gamma / k as f64));
        }
    }
    seeds
}

fn polish_seeds(
    params: &LatticeParams,
    gamma: f64,
    seeds: impl IntoIterator<Item = (Vec<f64>, f64)>,
    cfg: &SolverConfig,
    set: &mut SolutionSet,
) {
    for (psi, e) in seeds {
        if let Ok((psi, e, _)) = newton_full(params, &gamma, psi, e, cfg.newton_tol, cfg.max_iter) {
            if psi.iter().all(|p| p.is_finite()) {
                set.insert(StationaryState::new(psi, e, gamma));
            }
        }
    }
}

/// All real solutions found at one Γ, plus failures of the deterministic
/// branch solves.
#[derive(Clone, Debug)]
pub struct PointSolution {
    pub states: Vec<StationaryState>,
    pub failures: Vec<Error>,
}

/// Dispatches on boundary and hopping: unidirectional chains use the
/// recurrence, everything else the full Newton system.
pub fn solve_point(
    params: &LatticeParams,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<PointSolution> {
    cfg.validate()?;
    params.require_real_spectrum()?;
    if !gamma.is_finite() {
        return Err(Error::Argument(format!("Γ must be finite, got {gamma}")));
    }
    match params.boundary {
        Boundary::Periodic => Ok(PointSolution {
            states: solve_pbc(params, gamma, cfg)?,
            failures: Vec::new(),
        }),
        Boundary::Open if params.is_unidirectional_open() => {
            solve_unidirectional(params, gamma, cfg)
        }
        Boundary::Open if params.hop_left == 0.0 && params.hop_right != 0.0 => {
            // mirror image of the unidirectional chain
            let mirrored = LatticeParams {
                hop_left: params.hop_right,
                hop_right: 0.0,
                ..params.clone()
            };
            let mut sol = solve_unidirectional(&mirrored, gamma, cfg)?;
            for s in &mut sol.states {
                let mut psi = s.psi.clone();
                psi.reverse();
                *s = StationaryState::new(psi, s.energy, s.gamma);
            }
            sort_states(&mut sol.states);
            Ok(sol)
        }
        Boundary::Open if params.hop_left * params.hop_right > 0.0 => Ok(PointSolution {
            states: solve_nonreciprocal(params, gamma, cfg)?,
            failures: Vec::new(),
        }),
        Boundary::Open => {
            let mut set = SolutionSet::new(cfg.dedup_tol);
            polish_seeds(
                params,
                gamma,
                pattern_seeds(params.sites, gamma),
                cfg,
                &mut set,
            );
            Ok(PointSolution {
                states: set.into_sorted(),
                failures: Vec::new(),
            })
        }
    }
}

/// Unidirectional open chain: every real solution occupies sites `1..=m`
/// contiguously, so the recurrence over `m = 1..=L` is exhaustive up to
/// seeding.
pub fn solve_unidirectional(
    params: &LatticeParams,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<PointSolution> {
    if !params.is_unidirectional_open() {
        return Err(Error::Argument(
            "expected J_R = 0 with open boundaries".into(),
        ));
    }
    cfg.validate()?;
    let l = params.sites;
    // unit-hopping problem: Γ' = Γ/J_L, E = J_L E'
    let g = gamma / params.hop_left;
    let tol = full_tol(cfg, params, gamma);
    let mut set = SolutionSet::new(cfg.dedup_tol);
    let mut failures = Vec::new();

    let unit = LatticeParams::unidirectional(l);
    for m in 1..=l {
        let sdb = if g > 0.0 {
            solve_sdb_branch::<f64>(l, m, g, cfg)
        } else if g < 0.0 {
            solve_sdb_branch::<f64>(l, m, -g, cfg).map(|s| crate::model::sign_map(&s))
        } else if m == 1 {
            let mut psi = vec![0.0; l];
            psi[0] = 1.0;
            Ok(StationaryState::new(psi, 0.0, 0.0))
        } else {
            continue;
        };
        match sdb {
            Ok(s) => {
                let root = RecurrenceRoot {
                    energy: s.energy,
                    psi: s.psi[..m].to_vec(),
                    iterations: 0,
                };
                if let Some(state) = recurrence_state(params, gamma, m, &root, tol) {
                    insert_labelled(&mut set, state, m);
                }
            }
            Err(e) => failures.push(e),
        }
    }

    if g != 0.0 {
        let bound = 1.05 * (1.0 + g.abs());
        let ne = cfg.n_seeds.max(2);
        let nu = (cfg.n_seeds / 2).max(4);
        let iters = cfg.max_iter.min(60);
        for m in 2..=l {
            let mut energies: Vec<f64> = (0..ne)
                .map(|i| -bound + 2.0 * bound * i as f64 / (ne - 1) as f64)
                .collect();
            energies.extend((1..=m).map(|k| g / k as f64));
            for &e0 in &energies {
                for k in 1..=nu {
                    let u0 = k as f64 / nu as f64;
                    let Ok(root) = newton_recurrence(m, &g, e0, u0, SEED_TOL, iters) else {
                        continue;
                    };
                    if let Some(state) = recurrence_state(&unit, g, m, &root, tol) {
                        let state =
                            StationaryState::new(state.psi, state.energy * params.hop_left, gamma);
                        insert_labelled(&mut set, state, m);
                    }
                }
            }
        }
    }

    // Full-Newton hits are re-expressed through the recurrence so that they
    // carry the same support labels as the states found above.
    if g != 0.0 {
        for (seed, e0) in pattern_seeds(l, gamma) {
            let Ok((psi, e, _)) =
                newton_full(params, &gamma, seed, e0, cfg.newton_tol, cfg.max_iter)
            else {
                continue;
            };
            if !psi.iter().all(|p| p.is_finite()) {
                continue;
            }
            let full = StationaryState::new(psi, e, gamma);
            for m in 1..=l {
                let Ok(root) =
                    newton_recurrence(m, &g, e / params.hop_left, full.psi[0], SEED_TOL, 20)
                else {
                    continue;
                };
                if let Some(state) = recurrence_state(&unit, g, m, &root, tol) {
                    let state =
                        StationaryState::new(state.psi, state.energy * params.hop_left, gamma);
                    if state.distance(&full) < cfg.dedup_tol {
                        insert_labelled(&mut set, state, m);
                    }
                }
            }
        }
    }
    if let Err(e) = check_residuals(set.states(), params, tol) {
        failures.push(e);
    }
    Ok(PointSolution {
        states: set.into_sorted(),
        failures,
    })
}

/// Recurrence states keep the full support `1..=m` as their label, even
/// when the far tail falls below the occupation threshold.
fn insert_labelled(set: &mut SolutionSet, state: StationaryState, m: usize) {
    let StationaryState {
        psi, energy, gamma, ..
    } = state;
    set.insert(StationaryState::with_pattern(
        psi,
        energy,
        gamma,
        Pattern::leading(m),
    ));
}

fn check_residuals(states: &[StationaryState], params: &LatticeParams, tol: f64) -> Result<()> {
    for s in states {
        let r = max_abs(&residual(s, params)?);
        if r > tol {
            return Err(Error::Convergence {
                iterations: 0,
                residual: r,
            });
        }
    }
    Ok(())
}

/// Periodic chain; the returned set is closed under lattice translation.
pub fn solve_pbc(
    params: &LatticeParams,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<Vec<StationaryState>> {
    if params.boundary != Boundary::Periodic {
        return Err(Error::Argument(
            "solve_pbc needs periodic boundaries".into(),
        ));
    }
    cfg.validate()?;
    params.require_real_spectrum()?;
    let l = params.sites;
    let mut seeds = pattern_seeds(l, gamma);
    for k in 0..l {
        let q = 2.0 * std::f64::consts::PI * k as f64 / l as f64;
        for phase in [0.0, std::f64::consts::FRAC_PI_2] {
            let psi: Vec<f64> = (0..l).map(|n| (q * n as f64 + phase).cos()).collect();
            let norm = psi.iter().map(|p| p * p).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            let psi: Vec<f64> = psi.iter().map(|p| p / norm).collect();
            let e = (params.hop_left + params.hop_right) * q.cos()
                + gamma * psi.iter().map(|p| p.powi(4)).sum::<f64>();
            seeds.push((psi, e));
        }
    }
    let mut set = SolutionSet::new(cfg.dedup_tol);
    polish_seeds(params, gamma, seeds, cfg, &mut set);
    let found: Vec<StationaryState> = set.states().to_vec();
    for s in found {
        for shift in 1..l {
            let psi: Vec<f64> = (0..l).map(|n| s.psi[(n + l - shift) % l]).collect();
            set.insert(StationaryState::new(psi, s.energy, s.gamma));
        }
    }
    Ok(set.into_sorted())
}

/// Open chain with `J_L·J_R > 0`: full Newton seeded by strong-coupling
/// patterns and by the gauge images of the reciprocal chain's linear modes.
pub fn solve_nonreciprocal(
    params: &LatticeParams,
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<Vec<StationaryState>> {
    if params.boundary != Boundary::Open {
        return Err(Error::Argument(
            "solve_nonreciprocal needs open boundaries".into(),
        ));
    }
    if !(params.hop_left * params.hop_right > 0.0) {
        return Err(Error::Domain(
            "solve_nonreciprocal needs J_L·J_R > 0".into(),
        ));
    }
    cfg.validate()?;
    let l = params.sites;
    let t = (params.hop_right / params.hop_left).sqrt();
    let j = params.hop_left * t;
    let mut seeds = pattern_seeds(l, gamma);
    for k in 1..=l {
        let q = std::f64::consts::PI * k as f64 / (l + 1) as f64;
        let psi: Vec<f64> = (1..=l)
            .map(|n| t.powi(n as i32) * (q * n as f64).sin())
            .collect();
        let norm = psi.iter().map(|p| p * p).sum::<f64>().sqrt();
        let psi: Vec<f64> = psi.iter().map(|p| p / norm).collect();
        let e = 2.0 * j * q.cos() + gamma * psi.iter().map(|p| p.powi(4)).sum::<f64>();
        seeds.push((psi, e));
    }
    let mut set = SolutionSet::new(cfg.dedup_tol);
    polish_seeds(params, gamma, seeds, cfg, &mut set);
    Ok(set.into_sorted())
}

/// Newton from a neighbouring solution, keeping the solver family.
pub(crate) fn continue_state(
    params: &LatticeParams,
    from: &StationaryState,
    gamma: f64,
    cfg: &SolverConfig,
) -> Option<StationaryState> {
    let tol = full_tol(cfg, params, gamma);
    if params.is_unidirectional_open() {
        let m = from.m_label();
        if m == 0 {
            return None;
        }
        let g = gamma / params.hop_left;
        let root = newton_recurrence(
            m,
            &g,
            from.energy / params.hop_left,
            from.psi[0],
            SEED_TOL,
            cfg.max_iter,
        )
        .ok()?;
        let unit = LatticeParams::unidirectional(params.sites);
        let state = recurrence_state(&unit, g, m, &root, tol)?;
        let state = StationaryState::with_pattern(
            state.psi,
            state.energy * params.hop_left,
            gamma,
            Pattern::leading(m),
        );
        Some(state)
    } else {
        let (psi, e, _) = newton_full(
            params,
            &gamma,
            from.psi.clone(),
            from.energy,
            cfg.newton_tol,
            cfg.max_iter,
        )
        .ok()?;
        psi.iter()
            .all(|p| p.is_finite())
            .then(|| StationaryState::new(psi, e, gamma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_branch_is_exact() {
        let s = solve_sdb_branch::<f64>(4, 1, 5.0, &SolverConfig::default()).unwrap();
        assert_eq!(s.energy, 5.0);
        assert_eq!(s.psi, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn second_branch_matches_smallest_cubic_root() {
        let s = solve_sdb_branch::<f64>(4, 2, 4.0, &SolverConfig::default()).unwrap();
        let roots = site2_cubic_roots(4.0);
        assert!(
            (s.energy - roots[0]).abs() < 1e-12,
            "{} vs {:?}",
            s.energy,
            roots
        );
        assert!((s.psi[1].abs() - (s.energy / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!((s.psi[2], s.psi[3]), (0.0, 0.0));
    }

    #[test]
    fn sdb_rejects_bad_arguments() {
        let cfg = SolverConfig::default();
        assert!(matches!(
            solve_sdb_branch::<f64>(4, 5, 1.0, &cfg),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            solve_sdb_branch::<f64>(4, 2, -1.0, &cfg),
            Err(Error::Domain(_))
        ));
        let bad = SolverConfig {
            precision_digits: 10,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_site_has_one_solution() {
        let p = LatticeParams::unidirectional(1);
        let sol = solve_point(&p, 3.0, &SolverConfig::default()).unwrap();
        assert_eq!(sol.states.len(), 1);
        assert_eq!(sol.states[0].energy, 3.0);
    }

    #[test]
    fn strong_coupling_census() {
        let p = LatticeParams::unidirectional(4);
        let sol = solve_point(&p, 12.0, &SolverConfig::default()).unwrap();
        let mut trapped: Vec<_> = sol.states.iter().map(|s| s.trapped_sites()).collect();
        trapped.sort();
        trapped.dedup();
        assert_eq!(trapped.len(), 15, "{} states", sol.states.len());
    }
}
