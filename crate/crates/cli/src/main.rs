use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alfven_core::experiments::{self, ExperimentConfig, ExperimentKind, RunManifest};
use alfven_core::{io, DomainSpec, Error};
use clap::{Args, Parser, Subcommand};

/// Pseudo-spectral Alfven-wave collision experiments with weighted-norm and
/// scattering diagnostics.
#[derive(Parser)]
#[command(name = "alfven", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment kind from a config file.
    Run(RunArgs),
    /// Recompute instantaneous norms from the field dumps of a run.
    Norms(RescanArgs),
    /// Recompute scattering norms from the scattering dumps of a run.
    Scatter(RescanArgs),
    /// Run the 1D wave-equation model (defaults when no config is given).
    Model1d(Model1dArgs),
    /// Print the JSON Schema of manifest.json.
    Schema,
}

#[derive(Args)]
struct Common {
    /// Output directory; defaults to the config's [output] dir, then runs/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Offset added to every random and nonzero polarization seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Base time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Print nothing but errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Model1dArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RescanArgs {
    /// Run directory containing manifest.json.
    #[arg(long)]
    run: PathBuf,
    /// Output file; defaults to a file inside the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

/// Relative mismatch above which `scatter` reports a failure.
const RESCAN_TOLERANCE: f64 = 1e-9;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => io::parse_config(&a.config).and_then(|cfg| run(cfg, &a.common)),
        Command::Model1d(a) => match &a.config {
            Some(p) => io::parse_config(p),
            None => model1d_default(),
        }
        .and_then(|cfg| {
            if cfg.kind == ExperimentKind::Model1d {
                run(cfg, &a.common)
            } else {
                Err(Error::Config(vec![format!(
                    "experiment.kind = {:?}, the model1d command needs \"model1d\"",
                    cfg.kind.label()
                )]))
            }
        }),
        Command::Norms(a) => norms(&a),
        Command::Scatter(a) => scatter(&a),
        Command::Schema => {
            print!("{}", io::MANIFEST_SCHEMA);
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn model1d_default() -> alfven_core::Result<ExperimentConfig> {
    let placeholder = DomainSpec::new([8, 8, 8], [1.0, 1.0, 1.0])?;
    Ok(ExperimentConfig::new(ExperimentKind::Model1d, placeholder))
}

fn run(mut cfg: ExperimentConfig, c: &Common) -> alfven_core::Result<bool> {
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(dt) = c.dt {
        cfg.stepper.dt = dt;
    }
    cfg.validate()?;
    experiments::check_margins(&cfg)?;
    let dir = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("runs").join(&cfg.name));
    if !c.quiet {
        eprintln!("running {} ({}) into {}", cfg.name, cfg.kind.label(), dir.display());
    }
    let out = experiments::run(&cfg)?;
    let manifest = io::write_run(&dir, &out)?;
    if !c.quiet {
        report(&manifest);
    }
    Ok(manifest.passed)
}

fn report(m: &RunManifest) {
    for a in &m.assertions {
        println!(
            "{} {:<48} value {:>11.3e}  threshold {:>10.3e}  {}",
            if a.passed { "PASS" } else { "FAIL" },
            a.name,
            a.value,
            a.threshold,
            a.detail
        );
    }
    let failed = m.failures().len();
    println!(
        "{}: {} of {} assertions passed, {} steps, {:.1} s",
        m.name,
        m.assertions.len() - failed,
        m.assertions.len(),
        m.steps,
        m.wall_clock_s
    );
}

fn norms(a: &RescanArgs) -> alfven_core::Result<bool> {
    let series = io::snapshot_norms(&a.run)?;
    let path = a.out.clone().unwrap_or_else(|| a.run.join("snapshot_norms.csv"));
    io::write_norms_csv(&path, &series)?;
    if !a.quiet {
        for s in &series.samples {
            println!(
                "t {:>9.4}  E+ {:.6e}  E- {:.6e}  energy {:.6e}  sep {:.3e}",
                s.t, s.e_plus, s.e_minus, s.energy, s.sep_ratio
            );
        }
        println!("{} snapshots -> {}", series.samples.len(), path.display());
    }
    Ok(true)
}

fn scatter(a: &RescanArgs) -> alfven_core::Result<bool> {
    let rescans = io::rescan_scattering(&a.run)?;
    let path = a.out.clone().unwrap_or_else(|| a.run.join("scattering_rescan.json"));
    let bytes = serde_json::to_vec_pretty(&rescans).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    io::write_atomic(&path, &bytes)?;
    let ok = rescans.iter().all(|r| r.max_rel_diff <= RESCAN_TOLERANCE);
    if !a.quiet {
        for r in &rescans {
            let norms: Vec<String> = r.recomputed.iter().map(|v| format!("{v:.6e}")).collect();
            println!(
                "{} {:<28} norms [{}]  max rel diff {:.2e}",
                if r.max_rel_diff <= RESCAN_TOLERANCE { "PASS" } else { "FAIL" },
                r.sidecar,
                norms.join(", "),
                r.max_rel_diff
            );
        }
        println!("{} scattering fields -> {}", rescans.len(), path.display());
    }
    Ok(ok)
}
