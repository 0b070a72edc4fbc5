use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::json;

use sdb_core::asymptotics::{decay_coordinates, energy_exponent, fit_power_law, log_grid};
use sdb_core::dynamics::{adiabatic_experiment, IntegrationOptions};
use sdb_core::manybody::{build_basis, spectrum as manybody_spectrum};
use sdb_core::model::{Boundary, LatticeParams, StationaryState};
use sdb_core::real::{format_f64, Ext, Real, F64_DIGITS};
use sdb_core::stability::{
    classify, classify_exact, polish_extended, StabilityReport, DEFAULT_TAU, EXTENDED_TAU,
};
use sdb_core::stationary::{bifurcation_gamma_c, solve_sdb_branch, sweep_spectrum, SolverConfig};
use sdb_core::Error;

use crate::manifest::{derived_path, read_table, write_table, RunManifest, Table};
use crate::{
    AdiabaticArgs, BoundaryArg, CliError, ManybodyArgs, RerunArgs, ScalingArgs, SpectrumArgs,
    StabilityArgs, PRECISION_ENV,
};

fn core_err(e: Error) -> CliError {
    match e {
        Error::Argument(_) | Error::Domain(_) | Error::Capacity { .. } => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Failed(e.to_string()),
    }
}

fn usage(cond: bool, msg: impl Into<String>) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg.into()))
    }
}

/// Flag, then the environment, then the command's own default.
fn resolve_digits(flag: Option<u32>, fallback: u32) -> Result<u32, CliError> {
    let digits = match flag {
        Some(d) => d,
        None => match std::env::var(PRECISION_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                CliError::Usage(format!("{PRECISION_ENV}={v} is not a digit count"))
            })?,
            Err(_) => fallback,
        },
    };
    usage(
        (F64_DIGITS..=2000).contains(&digits),
        format!("precision must be within 15..=2000 digits, got {digits}"),
    )?;
    Ok(digits)
}

fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![lo];
    }
    (0..=steps)
        .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
        .collect()
}

fn opt_f64(x: f64) -> String {
    if x.is_finite() {
        format_f64(x)
    } else {
        String::new()
    }
}

fn lattice(sites: usize, boundary: BoundaryArg, jr_ratio: f64) -> Result<LatticeParams, CliError> {
    let b = match boundary {
        BoundaryArg::Obc => Boundary::Open,
        BoundaryArg::Pbc => Boundary::Periodic,
    };
    let params = LatticeParams::new(sites, 1.0, jr_ratio, b).map_err(core_err)?;
    params.require_real_spectrum().map_err(core_err)?;
    Ok(params)
}

struct Classifier {
    digits: u32,
    tau: f64,
}

impl Classifier {
    fn new(precision: Option<u32>, tau: Option<f64>) -> Result<Self, CliError> {
        let digits = resolve_digits(precision, F64_DIGITS)?;
        let tau = tau.unwrap_or(if digits > F64_DIGITS {
            EXTENDED_TAU
        } else {
            DEFAULT_TAU
        });
        usage(
            tau >= 0.0 && tau.is_finite(),
            format!("tau must be a nonnegative number, got {tau}"),
        )?;
        Ok(Classifier { digits, tau })
    }

    fn run(&self, s: &StationaryState, params: &LatticeParams) -> Result<StabilityReport, Error> {
        if self.digits > F64_DIGITS {
            let exact = polish_extended(s, params, self.digits)?;
            classify_exact(&exact, params, self.tau)
        } else {
            classify(s, params, self.tau)
        }
    }

    fn config(&self) -> serde_json::Value {
        json!({ "stability_digits": self.digits, "tau": self.tau })
    }
}

fn spectrum_header(sites: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "gamma",
        "energy",
        "pattern",
        "m_label",
        "stable",
        "max_re_lambda",
        "trapped",
    ]
    .map(String::from)
    .to_vec();
    h.extend((1..=sites).map(|n| format!("psi{n}")));
    h
}

/// Classifies every state and formats the rows; returns the number of
/// states that could not be classified.
fn classified_rows(
    states: &[StationaryState],
    params: &LatticeParams,
    cl: &Classifier,
) -> (Vec<Vec<String>>, usize) {
    let reports: Vec<Result<StabilityReport, Error>> =
        states.par_iter().map(|s| cl.run(s, params)).collect();
    let mut failed = 0;
    let rows = states
        .iter()
        .zip(reports)
        .map(|(s, r)| {
            let (stable, max_re) = match r {
                Ok(r) => (r.stable.to_string(), format_f64(r.max_real)),
                Err(_) => {
                    failed += 1;
                    (String::new(), String::new())
                }
            };
            let mut row = vec![
                format_f64(s.gamma),
                format_f64(s.energy),
                s.pattern.to_string(),
                s.m_label().to_string(),
                stable,
                max_re,
                s.trapped_sites().to_string(),
            ];
            row.extend(s.psi.iter().map(|&p| format_f64(p)));
            row
        })
        .collect();
    (rows, failed)
}

pub fn spectrum(mut args: SpectrumArgs) -> Result<(), CliError> {
    usage(args.sites >= 1, "--sites must be at least 1")?;
    usage(
        args.gamma_min.is_finite() && args.gamma_max.is_finite(),
        "Γ bounds must be finite",
    )?;
    usage(
        args.gamma_max > args.gamma_min || (args.steps == 0 && args.gamma_max == args.gamma_min),
        "--gamma-max must exceed --gamma-min",
    )?;
    let params = lattice(args.sites, args.boundary, args.jr_ratio)?;
    let cl = Classifier::new(args.precision, args.tau)?;
    args.precision = Some(cl.digits);
    args.tau = Some(cl.tau);
    let cfg = SolverConfig::default();
    let grid = linear_grid(args.gamma_min, args.gamma_max, args.steps);
    let sweep = sweep_spectrum(&params, &grid, &cfg).map_err(core_err)?;

    let mut table = Table::new(spectrum_header(args.sites));
    let mut unclassified = 0;
    let mut solver_failures = 0;
    for p in &sweep.points {
        solver_failures += p.failures.len();
        let (rows, failed) = classified_rows(&p.states, &params, &cl);
        unclassified += failed;
        table.rows.extend(rows);
    }
    let config = json!({ "solver": cfg, "stability": cl.config(), "residual_tol": 1e-10 });
    let manifest = RunManifest::new("spectrum", &args, config, vec![args.out.clone()]);
    write_table(&args.out, &manifest, &table)?;
    if solver_failures > 0 {
        eprintln!("{solver_failures} seed/branch failures across {} Γ points (other seeds covered them where rows exist)", grid.len());
    }
    if unclassified > 0 {
        eprintln!("{unclassified} states left unclassified (Γ = 0 or no convergence)");
    }
    println!(
        "{} states at {} Γ points -> {}",
        table.rows.len(),
        grid.len(),
        args.out.display()
    );
    if table.rows.is_empty() {
        return Err(CliError::Failed("no stationary states found".into()));
    }
    Ok(())
}

pub fn stability(mut args: StabilityArgs) -> Result<(), CliError> {
    let (source, input) = read_table(&args.input)?;
    usage(
        source.command == "spectrum",
        format!("{} was not written by `spectrum`", args.input.display()),
    )?;
    let recorded_args: SpectrumArgs = serde_json::from_value(source.parameters.clone())
        .map_err(|e| CliError::Usage(format!("unreadable spectrum manifest: {e}")))?;
    let params = lattice(
        recorded_args.sites,
        recorded_args.boundary,
        recorded_args.jr_ratio,
    )?;
    let cl = Classifier::new(args.precision, args.tau)?;
    args.precision = Some(cl.digits);
    args.tau = Some(cl.tau);

    let col = |name: &str| {
        input
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("missing column {name}")))
    };
    let (cg, ce) = (col("gamma")?, col("energy")?);
    let cpsi: Vec<usize> = (1..=recorded_args.sites)
        .map(|n| col(&format!("psi{n}")))
        .collect::<Result<_, _>>()?;
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("not a number: {s:?}")))
    };
    let mut states = Vec::with_capacity(input.rows.len());
    for row in &input.rows {
        let psi = cpsi
            .iter()
            .map(|&k| num(&row[k]))
            .collect::<Result<Vec<_>, _>>()?;
        states.push(StationaryState::new(psi, num(&row[ce])?, num(&row[cg])?));
    }
    let (rows, unclassified) = classified_rows(&states, &params, &cl);
    let mut table = Table::new(spectrum_header(recorded_args.sites));
    table.rows = rows;
    let config = json!({ "stability": cl.config(), "source": source.parameters });
    let manifest = RunManifest::new("stability", &args, config, vec![args.out.clone()]);
    write_table(&args.out, &manifest, &table)?;
    if unclassified > 0 {
        eprintln!("{unclassified} states left unclassified");
    }
    println!(
        "{} states reclassified -> {}",
        table.rows.len(),
        args.out.display()
    );
    if unclassified == table.rows.len() && !table.rows.is_empty() {
        return Err(CliError::Failed("no state could be classified".into()));
    }
    Ok(())
}

/// The fitted branch and the state used for the decay coordinates.
type BranchRun<T> = (Vec<StationaryState<T>>, StationaryState<T>);

fn scaling_tables<T: Real>(
    args: &ScalingArgs,
    ms: &[usize],
    grid: &[f64],
    cfg: &SolverConfig,
) -> Result<[Table; 3], CliError> {
    let mut fits = Table::new(
        [
            "m",
            "exponent",
            "expected",
            "intercept",
            "r_squared",
            "gamma_lo",
            "gamma_hi",
        ]
        .map(String::from)
        .to_vec(),
    );
    let mut energies = Table::new(["m", "gamma", "energy"].map(String::from).to_vec());
    let mut decay = Table::new(["m", "n", "y"].map(String::from).to_vec());
    let solved: Vec<Result<BranchRun<T>, Error>> = ms
        .par_iter()
        .map(|&m| {
            let branch = grid
                .iter()
                .map(|&g| solve_sdb_branch::<T>(args.sites, m, g, cfg))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((
                branch,
                solve_sdb_branch::<T>(args.sites, m, args.decay_gamma, cfg)?,
            ))
        })
        .collect();
    for (&m, r) in ms.iter().zip(solved) {
        let (branch, at_decay) = r.map_err(|e| CliError::Failed(format!("m = {m}: {e}")))?;
        for s in &branch {
            energies.rows.push(vec![
                m.to_string(),
                s.gamma.to_decimal(),
                s.energy.to_decimal(),
            ]);
        }
        let pts: Vec<(T, T)> = branch
            .iter()
            .map(|s| (s.gamma.clone(), s.energy.clone()))
            .collect();
        let fit = fit_power_law(&pts).map_err(|e| CliError::Failed(format!("m = {m}: {e}")))?;
        fits.rows.push(vec![
            m.to_string(),
            format_f64(fit.exponent),
            energy_exponent(m).to_string(),
            format_f64(fit.intercept),
            format_f64(fit.r_squared),
            format_f64(fit.gamma_range.0),
            format_f64(fit.gamma_range.1),
        ]);
        println!(
            "m = {m}: exponent {:.6} (expected {}), r² = {:.8}",
            fit.exponent,
            energy_exponent(m),
            fit.r_squared
        );
        for (n, y) in decay_coordinates(&at_decay).map_err(core_err)? {
            decay
                .rows
                .push(vec![m.to_string(), n.to_string(), format_f64(y)]);
        }
    }
    Ok([fits, energies, decay])
}

pub fn scaling(mut args: ScalingArgs) -> Result<(), CliError> {
    usage(args.sites >= 1, "--sites must be at least 1")?;
    if args.m.is_empty() {
        args.m = (1..=args.sites).collect();
    }
    usage(
        args.m.iter().all(|&m| (1..=args.sites).contains(&m)),
        format!("--m must lie in 1..={}", args.sites),
    )?;
    let (lo, hi) = (args.gamma_window[0], args.gamma_window[1]);
    usage(
        lo > 0.0 && hi > lo && hi.is_finite(),
        "--gamma-window needs 0 < LO < HI",
    )?;
    usage(args.points >= 3, "--points must be at least 3")?;
    usage(
        args.decay_gamma > 0.0 && args.decay_gamma < 1.0,
        "--decay-gamma must lie in (0, 1)",
    )?;
    let digits = resolve_digits(args.precision_digits, 60)?;
    args.precision_digits = Some(digits);
    let grid = log_grid(lo, hi, args.points);
    let cfg = SolverConfig::extended(digits);
    let ms = args.m.clone();
    let tables = if digits > F64_DIGITS {
        scaling_tables::<Ext>(&args, &ms, &grid, &cfg)?
    } else {
        scaling_tables::<f64>(&args, &ms, &grid, &SolverConfig::default())?
    };
    let paths: Vec<PathBuf> = ["fits", "energies", "decay"]
        .iter()
        .map(|s| derived_path(&args.out, s))
        .collect();
    let manifest = RunManifest::new("scaling", &args, json!({ "solver": cfg }), paths.clone());
    for (p, t) in paths.iter().zip(&tables) {
        write_table(p, &manifest, t)?;
    }
    Ok(())
}

pub fn adiabatic(mut args: AdiabaticArgs) -> Result<(), CliError> {
    usage(
        args.m >= 1 && args.m <= args.sites,
        format!("--m must lie in 1..={}", args.sites),
    )?;
    usage(
        args.gamma0 > 0.0 && args.gamma0.is_finite(),
        "--gamma0 must be positive",
    )?;
    usage(
        args.speed.iter().all(|v| *v >= 0.0 && v.is_finite()),
        "speeds must be nonnegative",
    )?;
    usage(
        args.t_end.is_some() || args.speed.iter().all(|&v| v > 0.0),
        "--t-end is required for a zero speed",
    )?;
    usage(args.samples >= 2, "--samples must be at least 2")?;
    args.speed.dedup();
    let params = LatticeParams::unidirectional(args.sites);
    let cfg = SolverConfig::default();
    let opts = IntegrationOptions {
        samples: args.samples,
        ..IntegrationOptions::with_reltol(args.reltol)
    };
    let runs: Vec<_> = args
        .speed
        .par_iter()
        .map(|&v| adiabatic_experiment(args.m, args.gamma0, v, args.t_end, &params, &cfg, &opts))
        .collect();
    let paths: Vec<PathBuf> = args
        .speed
        .iter()
        .map(|&v| derived_path(&args.out, &format!("v{}", format_f64(v))))
        .collect();
    let manifest = RunManifest::new(
        "adiabatic",
        &args,
        json!({ "solver": cfg, "integrator": opts }),
        paths.clone(),
    );
    let mut failures = Vec::new();
    for ((&v, run), path) in args.speed.iter().zip(runs).zip(&paths) {
        let rec = match run {
            Ok(r) => r,
            Err(e @ (Error::Argument(_) | Error::Domain(_))) => return Err(core_err(e)),
            Err(e) => {
                failures.push(format!("v = {v}: {e}"));
                continue;
            }
        };
        let mut t = Table::new(
            ["t", "gamma_bare", "intensity", "gamma_eff", "fidelity"]
                .map(String::from)
                .to_vec(),
        );
        for k in 0..rec.times.len() {
            t.rows.push(vec![
                format_f64(rec.times[k]),
                format_f64(rec.gamma_bare[k]),
                format_f64(rec.intensity[k]),
                format_f64(rec.gamma_eff[k]),
                opt_f64(rec.fidelity[k]),
            ]);
        }
        write_table(path, &manifest, &t)?;
        let fmin = rec
            .fidelity
            .iter()
            .copied()
            .filter(|f| f.is_finite())
            .fold(f64::INFINITY, f64::min);
        let jumps = rec.branch_jump.iter().filter(|j| **j).count();
        println!(
            "v = {v}: min fidelity {fmin:.8}, {jumps} branch jumps -> {}",
            path.display()
        );
        if let Some(why) = rec.truncated {
            eprintln!("v = {v}: fidelity tracking stopped: {why}");
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Failed(failures.join("; ")));
    }
    Ok(())
}

pub fn manybody(args: ManybodyArgs) -> Result<(), CliError> {
    usage(
        args.u_min.is_finite() && args.u_max.is_finite(),
        "U bounds must be finite",
    )?;
    usage(
        args.u_max > args.u_min || (args.steps == 0 && args.u_max == args.u_min),
        "--u-max must exceed --u-min",
    )?;
    let basis = build_basis(args.sites, args.bosons).map_err(core_err)?;
    let grid = linear_grid(args.u_min, args.u_max, args.steps);
    let results = manybody_spectrum(&basis, args.hop, &grid).map_err(core_err)?;
    let mut header: Vec<String> = ["U", "eigenvalue_index", "re_E", "im_E"]
        .map(String::from)
        .to_vec();
    header.extend((1..=args.sites).map(|n| format!("n{n}")));
    header.push("defective".into());
    let mut table = Table::new(header);
    let mut failures = Vec::new();
    for (u, r) in grid.iter().zip(results) {
        let r = match r {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("U = {u}: {e}"));
                continue;
            }
        };
        for (k, z) in r.eigenvalues.iter().enumerate() {
            let mut row = vec![
                format_f64(*u),
                (k + 1).to_string(),
                format_f64(z.re),
                format_f64(z.im),
            ];
            match &r.distributions[k] {
                Some(d) => row.extend(d.iter().map(|&x| format_f64(x))),
                None => row.extend(std::iter::repeat_n(String::new(), args.sites)),
            }
            row.push(r.defective[k].to_string());
            table.rows.push(row);
        }
    }
    let config = json!({ "dimension": basis.len(), "rank_tol": sdb_core::manybody::RANK_TOL });
    let manifest = RunManifest::new("manybody", &args, config, vec![args.out.clone()]);
    write_table(&args.out, &manifest, &table)?;
    println!(
        "dimension {}, {} U points -> {}",
        basis.len(),
        grid.len(),
        args.out.display()
    );
    if !failures.is_empty() {
        eprintln!("{}", failures.join("\n"));
        if table.rows.is_empty() {
            return Err(CliError::Failed("every U point failed".into()));
        }
    }
    Ok(())
}

pub fn bifurcation() -> Result<(), CliError> {
    println!("{}", format_f64(bifurcation_gamma_c()));
    Ok(())
}

fn recorded<T: DeserializeOwned>(params: serde_json::Value, file: &Path) -> Result<T, CliError> {
    serde_json::from_value(params)
        .map_err(|e| CliError::Usage(format!("{}: unreadable parameters: {e}", file.display())))
}

pub fn rerun(args: RerunArgs) -> Result<(), CliError> {
    let (manifest, _) = read_table(&args.manifest)?;
    let mut params = manifest.parameters;
    if let Some(out) = &args.out {
        params["out"] = json!(out);
    }
    let file = args.manifest.as_path();
    match manifest.command.as_str() {
        "spectrum" => spectrum(recorded(params, file)?),
        "scaling" => scaling(recorded(params, file)?),
        "stability" => stability(recorded(params, file)?),
        "adiabatic" => adiabatic(recorded(params, file)?),
        "manybody" => manybody(recorded(params, file)?),
        other => Err(CliError::Usage(format!(
            "unknown command {other:?} in manifest"
        ))),
    }
}
