use proptest::prelude::*;

use sdb_core::model::{
    gauge_residual, gauge_transform, inverse_gauge_transform, max_abs, residual, sign_map,
    Boundary, LatticeParams, Pattern, StationaryState,
};
use sdb_core::stability::{build_stability_matrix, classify, eigenvalues_f64, DEFAULT_TAU};
use sdb_core::stationary::{
    bifurcation_gamma_c, solve_point, solve_sdb_branch, sweep_spectrum, SolverConfig,
};

fn lattice(sites: usize, jr: f64, periodic: bool) -> LatticeParams {
    let boundary = if periodic {
        Boundary::Periodic
    } else {
        Boundary::Open
    };
    LatticeParams::new(sites, 1.0, jr, boundary).unwrap()
}

fn matched(a: &[StationaryState], b: &[StationaryState], tol: f64) -> bool {
    a.len() == b.len() && a.iter().all(|s| b.iter().any(|t| s.distance(t) < tol))
}

fn gamma_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![0.05f64..14.0, -14.0f64..-0.05]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn returned_states_solve_the_equation(
        sites in 1usize..=4,
        jr in prop_oneof![Just(0.0), 0.2f64..1.0],
        periodic in any::<bool>(),
        g in gamma_strategy(),
    ) {
        let params = lattice(sites, jr, periodic);
        let cfg = SolverConfig::default();
        let found = solve_point(&params, g, &cfg).unwrap();
        prop_assert!(!found.states.is_empty());
        for s in &found.states {
            let r = max_abs(&residual(s, &params).unwrap());
            prop_assert!(r < 1e-10, "residual {r:e} for {s:?}");
            prop_assert!(s.energy.is_finite());
        }
    }

    #[test]
    fn sign_map_conjugates_the_solution_set(
        sites in 2usize..=4,
        jr in prop_oneof![Just(0.0), 0.2f64..1.0],
        periodic in any::<bool>(),
        g in 0.05f64..14.0,
    ) {
        // the map needs an even ring
        let sites = if periodic && sites % 2 == 1 { sites + 1 } else { sites };
        let params = lattice(sites, jr, periodic);
        let cfg = SolverConfig::default();
        let here = solve_point(&params, g, &cfg).unwrap().states;
        let there = solve_point(&params, -g, &cfg).unwrap().states;
        let mapped: Vec<StationaryState> = here.iter().map(sign_map).collect();
        prop_assert!(matched(&mapped, &there, 1e-8), "{} states at Γ, {} at −Γ", here.len(), there.len());
    }

    #[test]
    fn gauge_round_trip(
        psi in prop::collection::vec(-1.0f64..1.0, 1..10),
        ratio in 0.01f64..1.0,
    ) {
        let params = LatticeParams::new(psi.len(), 1.0, ratio, Boundary::Open).unwrap();
        let state = StationaryState::new(psi.clone(), 0.3, 1.0);
        let back = inverse_gauge_transform(&gauge_transform(&state, &params).unwrap(), &params).unwrap();
        for (a, b) in back.iter().zip(&state.psi) {
            prop_assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn gauge_image_solves_the_symmetric_problem(ratio in 0.1f64..1.0, g in 0.5f64..10.0) {
        let params = LatticeParams::new(3, 1.0, ratio, Boundary::Open).unwrap();
        for s in solve_point(&params, g, &SolverConfig::default()).unwrap().states {
            let phi = gauge_transform(&s, &params).unwrap();
            let r = gauge_residual(&phi, &s.energy, &s.gamma, &params).unwrap();
            prop_assert!(max_abs(&r) < 1e-9, "gauge residual {:e}", max_abs(&r));
        }
    }

    #[test]
    fn stability_spectrum_pairs_and_trace(
        sites in 1usize..=4,
        jr in prop_oneof![Just(0.0), 0.2f64..1.0],
        g in 0.1f64..14.0,
    ) {
        let params = lattice(sites, jr, false);
        for s in solve_point(&params, g, &SolverConfig::default()).unwrap().states {
            let c = build_stability_matrix(&s, &params).unwrap();
            let trace: f64 = (0..c.n).map(|i| *c.get(i, i)).sum();
            prop_assert_eq!(trace, 0.0);
            let report = classify(&s, &params, DEFAULT_TAU).unwrap();
            // compare |λ| to the partner −λ with the splitting that a
            // Jordan block of full size can produce in the working precision
            let spread = if report.digits > 15 { 1e-8 } else { 1e-3 * (1.0 + g) };
            for z in &report.eigenvalues {
                let d = report.eigenvalues.iter().map(|w| (w + z).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(d < spread, "no partner for {z} (digits {})", report.digits);
            }
        }
    }

    #[test]
    fn boundary_mode_is_always_stable(g in 1e-3f64..100.0, sites in 1usize..=5) {
        let params = LatticeParams::unidirectional(sites);
        let s: StationaryState = solve_sdb_branch(sites, 1, g, &SolverConfig::default()).unwrap();
        prop_assert!(classify(&s, &params, DEFAULT_TAU).unwrap().stable);
    }

    #[test]
    fn periodic_sets_are_closed_under_translation(
        sites in 2usize..=4,
        jr in 0.2f64..1.0,
        g in gamma_strategy(),
    ) {
        let params = lattice(sites, jr, true);
        let states = solve_point(&params, g, &SolverConfig::default()).unwrap().states;
        for s in &states {
            let mut psi = s.psi.clone();
            psi.rotate_right(1);
            let shifted = StationaryState::new(psi, s.energy, s.gamma);
            prop_assert!(states.iter().any(|t| t.distance(&shifted) < 1e-8), "translate of {s:?} missing");
        }
    }

    #[test]
    fn pattern_text_round_trip(sites in prop::collection::btree_set(1usize..20, 1..6)) {
        let p = Pattern::new(sites.into_iter().collect());
        prop_assert_eq!(p.to_string().parse::<Pattern>().unwrap(), p);
    }
}

#[test]
fn sweep_commutes_with_sign_map() {
    let params = LatticeParams::unidirectional(3);
    let cfg = SolverConfig::default();
    let grid: Vec<f64> = (1..=12).map(|k| 0.5 * k as f64).collect();
    let neg: Vec<f64> = grid.iter().rev().map(|g| -g).collect();
    let up = sweep_spectrum(&params, &grid, &cfg).unwrap();
    let down = sweep_spectrum(&params, &neg, &cfg).unwrap();
    for p in &up.points {
        let q = down.points.iter().find(|q| q.gamma == -p.gamma).unwrap();
        let mapped: Vec<StationaryState> = p.states.iter().map(sign_map).collect();
        assert!(matched(&mapped, &q.states, 1e-8), "Γ = {}", p.gamma);
    }
}

#[test]
fn sdb_energies_are_ordered_below_gamma_c() {
    let cfg = SolverConfig::default();
    let gc = bifurcation_gamma_c();
    for g in [1e-3, 0.05, 0.5, 1.5, 3.0, gc - 1e-3] {
        let e: Vec<f64> = (1..=4)
            .map(|m| solve_sdb_branch::<f64>(4, m, g, &cfg).unwrap().energy)
            .collect();
        assert!(e.windows(2).all(|w| w[0] > w[1]), "Γ = {g}: {e:?}");
    }
}

#[test]
fn phase_convention() {
    let params = LatticeParams::unidirectional(4);
    for s in solve_point(&params, 5.0, &SolverConfig::default())
        .unwrap()
        .states
    {
        let first = s.psi.iter().find(|p| **p != 0.0).unwrap();
        assert!(*first > 0.0);
    }
}

#[test]
fn f64_eigenvalues_of_a_rotation() {
    let s = StationaryState::new(vec![1.0, 0.0], 2.0, 2.0);
    let params = LatticeParams::unidirectional(2);
    let c = build_stability_matrix(&s, &params).unwrap();
    let eig = eigenvalues_f64(&c).unwrap();
    assert_eq!(eig.len(), 4);
    assert!(eig.iter().all(|z| z.re.abs() < 1e-6));
}
