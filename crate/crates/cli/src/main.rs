use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use towb_cli::{load_config, run, Command, Report};

/// Transfer-operator workbench for iterated function systems on the circle.
#[derive(Debug, Parser)]
#[command(name = "towb", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for two-column plot data files.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides both solver.seed and sampler.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Overrides sampler.x.
    #[arg(long)]
    x: Option<f64>,
    /// Overrides sampler.sets, e.g. "[0,0.25);all".
    #[arg(long)]
    sets: Option<String>,
    /// Overrides sampler.paths.
    #[arg(long)]
    paths: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("towb: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = cli.seed {
        config.solver.seed = s;
        config.sampler.seed = s;
    }
    if let Some(x) = cli.x {
        config.sampler.x = x;
    }
    if let Some(sets) = cli.sets {
        config.sampler.sets = sets;
    }
    if let Some(p) = cli.paths {
        config.sampler.paths = p;
    }
    if let Err(e) = config.validate() {
        eprintln!("towb: {e}");
        return ExitCode::from(2);
    }
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("towb: cannot configure {k} threads: {e}");
            return ExitCode::from(2);
        }
    }

    let start = Instant::now();
    let mut report = Report::new(cli.command.name(), &config);
    let outcome = run(cli.command, &config, &mut report, cli.plot_data.as_deref());
    let mut code = match &outcome {
        Ok(()) if report.status() == "FAIL" => 1,
        Ok(()) => 0,
        Err(e) => {
            report.error = Some(e.to_string());
            e.exit_code()
        }
    };
    eprintln!("towb: {} finished in {:.3}s", cli.command.name(), start.elapsed().as_secs_f64());

    let json = report.to_json();
    match &cli.json {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                eprintln!("towb: cannot write {}: {e}", path.display());
                code = code.max(3);
            }
            print!("{}", report.summary());
        }
        None => print!("{json}"),
    }
    ExitCode::from(code)
}
