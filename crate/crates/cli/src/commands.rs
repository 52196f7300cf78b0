use std::path::Path;

use clap::ValueEnum;
use thiserror::Error;

use crate::config::{RunConfig, Setup};
use crate::report::{write_plot, Report};
use towb::harmonic::{fourier_cascade_check, normalize_weight, solve_harmonic};
use towb::sigspace::{
    defect_breakdown, defect_search, hutchinson_iterate, l1_membership, random_starts,
};
use towb::solenoid::{
    harmonic_from_measure, markov_deviation, multires_check, quasi_invariance_defect,
    random_cylinder, unitarity_check, Mode,
};
use towb::transfer::{identity_suite, SuiteOptions};
use towb::{Check, GridFunction, Measure, PathMeasure, TransferOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Verify,
    Harmonic,
    Measure,
    Defect,
    Cylinder,
    Sample,
    Quasi,
    Markov,
    HarmonicFromMeasure,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Verify => "verify",
            Self::Harmonic => "harmonic",
            Self::Measure => "measure",
            Self::Defect => "defect",
            Self::Cylinder => "cylinder",
            Self::Sample => "sample",
            Self::Quasi => "quasi",
            Self::Markov => "markov",
            Self::HarmonicFromMeasure => "harmonic-from-measure",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] towb::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(towb::Error::DepthExceeded { .. } | towb::Error::InvalidArgument(_)) => 2,
            Self::Numerical(_) | Self::Io(_) => 3,
        }
    }
}

/// Runs `command`, filling `report`; plot files go to `plot_dir` when given.
pub fn run(
    command: Command,
    config: &RunConfig,
    report: &mut Report,
    plot_dir: Option<&Path>,
) -> Result<(), RunError> {
    let setup = config.setup()?;
    match command {
        Command::Verify => verify(config, &setup, report, plot_dir),
        Command::Harmonic => harmonic(config, &setup, report, plot_dir),
        Command::Measure => measure(config, &setup, report, plot_dir),
        Command::Defect => defect(config, &setup, report, plot_dir),
        Command::Cylinder => cylinder(config, &setup, report, plot_dir),
        Command::Sample => sample(config, &setup, report, plot_dir),
        Command::Quasi => quasi(config, &setup, report),
        Command::Markov => markov(config, &setup, report, plot_dir),
        Command::HarmonicFromMeasure => from_measure(config, &setup, report, plot_dir),
    }
}

fn node_rows(f: &GridFunction) -> Vec<(f64, f64)> {
    (0..f.n()).map(|j| (f.node(j), f.values()[j])).collect()
}

fn cell_rows(m: &Measure) -> Vec<(f64, f64)> {
    let n = m.n() as f64;
    m.density()
        .iter()
        .enumerate()
        .map(|(j, &d)| ((j as f64 + 0.5) / n, d))
        .collect()
}

fn plot(dir: Option<&Path>, name: &str, rows: &[(f64, f64)]) -> Result<(), RunError> {
    if let Some(dir) = dir {
        write_plot(dir, name, rows)?;
    }
    Ok(())
}

/// Harmonic `h` for the configured `lambda`, after optional weight normalisation.
fn harmonic_h(config: &RunConfig, setup: &Setup, report: &mut Report) -> Result<(TransferOperator, GridFunction), RunError> {
    let opts = config.harmonic_options();
    let mut op = setup.op.clone();
    if config.solver.normalize_weight {
        op = TransferOperator::new(normalize_weight(&op, &setup.lambda, &opts)?, op.n())?;
    }
    let limit = config.solver.check_tol;
    if config.solver.harmonic == "unit" {
        let h = GridFunction::constant(op.n(), 1.0 / setup.lambda.total())?;
        let residual = op.apply_r(&h)?.max_diff(&h)?;
        report.set("harmonic_residual", residual);
        if residual > limit {
            return Err(towb::Error::HarmonicResidual { residual, limit }.into());
        }
        return Ok((op, h));
    }
    let sol = solve_harmonic(&op, &setup.lambda, &opts)?.require_converged()?;
    report.set("rho", sol.rho);
    report.set("harmonic_residual", sol.residual);
    if (sol.rho - 1.0).abs() > limit {
        return Err(towb::Error::HarmonicResidual {
            residual: (sol.rho - 1.0).abs(),
            limit,
        }
        .into());
    }
    Ok((op, sol.h))
}

fn path_measure(config: &RunConfig, setup: &Setup, report: &mut Report) -> Result<PathMeasure, RunError> {
    let (op, h) = harmonic_h(config, setup, report)?;
    Ok(PathMeasure::new(op, h, setup.lambda.clone())?)
}

fn verify(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let (_, h) = harmonic_h(config, setup, report)?;
    let opts = SuiteOptions {
        trials: config.solver.trials,
        seed: config.solver.seed,
        tol: config.solver.identity_tol,
        max_degree: config.solver.max_degree,
    };
    let suite = identity_suite(&setup.op, &setup.lambda, &h, &opts)?;
    report.set("passed", suite.count_passed());
    report.set("failed", suite.count_failed());
    report.set("skipped", suite.count_skipped());
    for c in suite.checks {
        report.check(c);
    }
    plot(plot_dir, "rw.dat", &node_rows(&setup.op.rw_multiplier()?))
}

fn harmonic(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let sol = solve_harmonic(&setup.op, &setup.lambda, &config.harmonic_options())?;
    report.set("rho", sol.rho);
    report.set("residual", sol.residual);
    report.set("iterations", sol.iterations);
    report.set("converged", sol.converged);
    if !sol.converged {
        return Err(towb::Error::NonConvergence {
            iterations: sol.iterations,
            change: sol.residual,
        }
        .into());
    }
    report.check(Check::from_residual("harmonic_residual", sol.residual, config.solver.check_tol));
    if (sol.rho - 1.0).abs() > config.solver.check_tol {
        let fixed = TransferOperator::new(normalize_weight(&setup.op, &setup.lambda, &config.harmonic_options())?, setup.op.n())?;
        let again = solve_harmonic(&fixed, &setup.lambda, &config.harmonic_options())?;
        report.set("normalized_rho", again.rho);
        report.check(Check::from_residual("normalized_rho", (again.rho - 1.0).abs(), config.solver.check_tol));
    }
    let cascade = match fourier_cascade_check(&setup.op, &sol.h, config.solver.k_max, config.solver.n_max) {
        Ok(dev) => Check::from_residual("fourier_cascade", dev, config.solver.cascade_tol),
        Err(towb::Error::NotDoubling) => Check::skipped("fourier_cascade", "NOT_DOUBLING", config.solver.cascade_tol),
        Err(towb::Error::InvalidArgument(m)) => Check::skipped("fourier_cascade", format!("GRID: {m}"), config.solver.cascade_tol),
        Err(e) => return Err(e.into()),
    };
    report.check(cascade);
    plot(plot_dir, "h.dat", &node_rows(&sol.h))
}

fn measure(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let out = hutchinson_iterate(setup.op.system(), &setup.lambda, config.solver.steps)?;
    let leb = Measure::lebesgue(out.n())?;
    report.set("steps", config.solver.steps);
    report.set("total_mass", out.total());
    report.set("atoms", out.atoms().len());
    report.set("tv_to_lebesgue", out.binned().total_variation(&leb)?);
    report.check(Check::from_residual("mass_preserved", (out.total() - setup.lambda.total()).abs(), 1e-12));
    plot(plot_dir, "measure.dat", &cell_rows(&out.binned()))?;
    if !out.atoms().is_empty() {
        let atoms: Vec<(f64, f64)> = out.atoms().iter().map(|a| (a.position, a.mass)).collect();
        plot(plot_dir, "atoms.dat", &atoms)?;
    }
    Ok(())
}

fn defect(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let op = &setup.op;
    let b = defect_breakdown(&setup.lambda, op)?;
    let m = l1_membership(&setup.lambda, op, config.solver.defect_tol)?;
    report.set("defect", b.square_density);
    report.set("defect_as_printed", b.as_printed);
    report.set("singular_mass", b.singular_mass);
    report.set("member", m.member);
    let mut starts = vec![setup.lambda.clone()];
    starts.extend(random_starts(config.solver.search_starts, op.n(), config.solver.seed)?);
    let search = defect_search(op, &starts, config.solver.search_steps)?;
    report.set("search_defect", search.defect);
    report.set("search_start", search.start);
    report.set("search_history", &search.history);
    let monotone = search.history.windows(2).all(|w| w[1] < w[0]);
    report.check(Check::from_residual("search_monotone", if monotone { 0.0 } else { 1.0 }, 0.5));
    let dec = op.rn_derivative(&setup.lambda)?;
    plot(plot_dir, "w_lambda.dat", &towb::sigspace::density_samples(&dec))
}

fn cylinder(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let pm = path_measure(config, setup, report)?;
    let x = config.sampler.x;
    let mass = pm.cylinder_mass(x, &setup.spec)?;
    let extended = pm.cylinder_mass(x, &setup.spec.extended())?;
    report.set("x", x);
    report.set("sets", setup.spec.to_string());
    report.set("mass", mass);
    report.set("conditional", mass / pm.h().interpolate(x));
    report.check(Check::from_residual(
        "kolmogorov_consistency",
        (mass - extended).abs(),
        10.0 * pm.residual() + 1e-12,
    ));
    if plot_dir.is_some() {
        let rows = (0..pm.op().n())
            .map(|j| {
                let y = pm.op().node(j);
                Ok((y, pm.cylinder_mass(y, &setup.spec)?))
            })
            .collect::<Result<Vec<_>, towb::Error>>()?;
        plot(plot_dir, "cylinder.dat", &rows)?;
    }
    Ok(())
}

fn sample(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let pm = path_measure(config, setup, report)?;
    let s = &config.sampler;
    let depth = s.depth.max(setup.spec.depth());
    let paths = pm.sample_paths(s.x, depth, s.paths, s.seed)?;
    let c = pm.compare_cylinder(s.x, &setup.spec, &paths)?;
    report.set("x", s.x);
    report.set("sets", setup.spec.to_string());
    report.set("paths", s.paths);
    report.set("exact", c.exact);
    report.set("empirical", c.empirical);
    report.set("std_error", c.std_error);
    report.check(Check::from_residual("empirical_vs_exact", c.z_score().abs(), 4.0));
    let zeros = paths.iter().filter(|p| p.digits().first() == Some(&0)).count();
    report.set("digit0_frequency", zeros as f64 / s.paths.max(1) as f64);
    if plot_dir.is_some() && s.bins > 0 {
        let mut hist = vec![0.0; s.bins];
        for p in &paths {
            let z = *p.coordinates().last().unwrap();
            hist[((z * s.bins as f64) as usize).min(s.bins - 1)] += 1.0;
        }
        let scale = s.bins as f64 / paths.len().max(1) as f64;
        let rows: Vec<(f64, f64)> = hist
            .iter()
            .enumerate()
            .map(|(k, c)| ((k as f64 + 0.5) / s.bins as f64, c * scale))
            .collect();
        plot(plot_dir, "histogram.dat", &rows)?;
    }
    Ok(())
}

fn quasi(config: &RunConfig, setup: &Setup, report: &mut Report) -> Result<(), RunError> {
    use rand::{Rng, SeedableRng};
    let pm = path_measure(config, setup, report)?;
    let s = &config.sampler;
    let tol = config.solver.check_tol;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed);
    let mut worst: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    for t in 0..s.trials {
        let depth = rng.random_range(0..=s.depth);
        let psi = random_cylinder(depth, 4, &mut rng);
        worst = worst.max(quasi_invariance_defect(&pm, &psi, Mode::Exact)?.value.abs());
        if t == 0 {
            let mc = quasi_invariance_defect(&pm, &psi, Mode::MonteCarlo { paths: s.paths, seed: s.seed })?;
            worst_z = if mc.value == 0.0 { 0.0 } else { (mc.value / mc.std_error).abs() };
            report.set("mc_defect", mc.value);
            report.set("mc_std_error", mc.std_error);
        }
    }
    report.check(Check::from_residual("quasi_invariance", worst, tol));
    report.check(Check::from_residual("quasi_invariance_mc", worst_z, 4.0));
    report.check(Check::from_residual("unitarity", unitarity_check(&pm, s.trials, s.depth, s.seed)?, tol));
    let mr = multires_check(&pm, s.n_max, 100, s.seed)?;
    report.check(Check::from_residual("multires_nesting", mr.nesting, 1e-12));
    report.check(Check::from_residual("multires_shift", mr.shift, 1e-12));
    Ok(())
}

fn markov(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let pm = path_measure(config, setup, report)?;
    let s = &config.sampler;
    let d = markov_deviation(&pm, &setup.markov_a, &setup.markov_b, s.x, s.markov_n)?;
    report.set("x", s.x);
    report.set("n", s.markov_n);
    report.set("m1", d.m1);
    report.set("mn", d.mn);
    report.set("difference", d.difference);
    report.set("product_limit", d.product_limit);
    if plot_dir.is_some() {
        let rows = (2..=s.markov_n)
            .map(|k| Ok((k as f64, markov_deviation(&pm, &setup.markov_a, &setup.markov_b, s.x, k)?.mn)))
            .collect::<Result<Vec<_>, towb::Error>>()?;
        let mut all = vec![(1.0, d.m1)];
        all.extend(rows);
        plot(plot_dir, "markov.dat", &all)?;
    }
    Ok(())
}

fn from_measure(config: &RunConfig, setup: &Setup, report: &mut Report, plot_dir: Option<&Path>) -> Result<(), RunError> {
    let pm = path_measure(config, setup, report)?;
    let r = harmonic_from_measure(&pm, 1)?;
    report.set("residual", r.residual);
    report.set("input_deviation", r.input_deviation);
    report.set("consistency", r.consistency);
    let tol = config.solver.check_tol;
    report.check(Check::from_residual("harmonic_residual", r.residual, tol));
    report.check(Check::from_residual("input_reproduced", r.input_deviation, tol));
    report.check(Check::from_residual("kernel_consistency", r.consistency, tol));
    plot(plot_dir, "h_tilde.dat", &node_rows(&r.h))
}
