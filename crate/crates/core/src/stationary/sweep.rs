use rayon::prelude::*;

use super::{continue_state, solve_point, Branch, SolutionSet, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{LatticeParams, StationaryState};

#[derive(Clone, Debug)]
pub struct SpectrumPoint {
    pub gamma: f64,
    pub states: Vec<StationaryState>,
    pub failures: Vec<Error>,
}

#[derive(Clone, Debug)]
pub struct SpectrumSweep {
    pub points: Vec<SpectrumPoint>,
    pub branches: Vec<Branch>,
}

/// Every real solution found on each grid point, completed by forward and
/// backward continuation and stitched into branches.
pub fn sweep_spectrum(
    params: &LatticeParams,
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<SpectrumSweep> {
    if grid.is_empty() {
        return Err(Error::Argument("empty Γ grid".into()));
    }
    if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "Γ grid must be finite and strictly increasing".into(),
        ));
    }
    cfg.validate()?;
    params.require_real_spectrum()?;

    let solved: Vec<Result<super::PointSolution>> = grid
        .par_iter()
        .map(|&g| solve_point(params, g, cfg))
        .collect();
    let mut sets = Vec::with_capacity(grid.len());
    let mut failures = Vec::with_capacity(grid.len());
    for r in solved {
        let mut set = SolutionSet::new(cfg.dedup_tol);
        match r {
            Ok(sol) => {
                for s in sol.states {
                    set.insert(s);
                }
                failures.push(sol.failures);
            }
            Err(e) => failures.push(vec![e]),
        }
        sets.push(set);
    }

    let n = grid.len();
    for k in 1..n {
        continue_into(params, grid, &mut sets, k - 1, k, cfg);
    }
    for k in (0..n.saturating_sub(1)).rev() {
        continue_into(params, grid, &mut sets, k + 1, k, cfg);
    }

    let points: Vec<SpectrumPoint> = grid
        .iter()
        .zip(sets)
        .zip(failures)
        .map(|((&gamma, set), failures)| SpectrumPoint {
            gamma,
            states: set.into_sorted(),
            failures,
        })
        .collect();
    let branches = stitch_branches(&points, link_tolerance(grid));
    Ok(SpectrumSweep { points, branches })
}

fn continue_into(
    params: &LatticeParams,
    grid: &[f64],
    sets: &mut [SolutionSet],
    from: usize,
    to: usize,
    cfg: &SolverConfig,
) {
    let sources: Vec<StationaryState> = sets[from].states().to_vec();
    let found: Vec<StationaryState> = sources
        .par_iter()
        .filter_map(|s| continue_state(params, s, grid[to], cfg))
        .collect();
    for s in found {
        sets[to].insert(s);
    }
}

fn link_tolerance(grid: &[f64]) -> f64 {
    let step = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    0.2 + 2.0 * step
}

/// Greedy nearest-neighbour linking of consecutive grid points. A state
/// joins an open branch when the patterns overlap and the (E, ψ) distance is
/// below `link_tol`; otherwise it opens a new branch.
pub fn stitch_branches(points: &[SpectrumPoint], link_tol: f64) -> Vec<Branch> {
    let mut closed: Vec<Branch> = Vec::new();
    let mut open: Vec<Branch> = Vec::new();
    for point in points {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, branch) in open.iter().enumerate() {
            let last = &branch.samples.last().unwrap().1;
            for (si, s) in point.states.iter().enumerate() {
                if !last.pattern.overlaps(&s.pattern) {
                    continue;
                }
                let d = last.distance(s);
                if d < link_tol {
                    candidates.push((d, bi, si));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut branch_used = vec![false; open.len()];
        let mut state_used = vec![false; point.states.len()];
        for (_, bi, si) in candidates {
            if branch_used[bi] || state_used[si] {
                continue;
            }
            branch_used[bi] = true;
            state_used[si] = true;
            open[bi]
                .samples
                .push((point.gamma, point.states[si].clone()));
        }
        let mut still_open = Vec::with_capacity(open.len());
        for (branch, used) in open.into_iter().zip(branch_used) {
            if used {
                still_open.push(branch);
            } else {
                closed.push(branch);
            }
        }
        for (s, used) in point.states.iter().zip(state_used) {
            if !used {
                still_open.push(Branch {
                    pattern: s.pattern.clone(),
                    m: s.m_label(),
                    samples: vec![(point.gamma, s.clone())],
                });
            }
        }
        open = still_open;
    }
    closed.extend(open);
    closed.sort_by(|a, b| {
        a.m.cmp(&b.m)
            .then(a.samples[0].0.total_cmp(&b.samples[0].0))
            .then(a.samples[0].1.energy.total_cmp(&b.samples[0].1.energy))
    });
    closed
}
