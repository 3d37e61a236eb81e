use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mpsim::config::{ModelConfig, RunConfig};
use mpsim::engine::simulate;
use mpsim::io::{audit_csv, path_csv, report_csv, report_summary, write_run, RunManifest};
use mpsim::lab::{run_convergence_study, StudyConfig};
use mpsim::noise::generate_tape;
use mpsim::scenarios::{build, run_scenario, ScenarioId, ScenarioRun};
use mpsim::{Result, SimError};

#[derive(Parser)]
#[command(name = "mpsim", version, about = "Hybrid SDE simulation with path-dependent switching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path from a TOML config.
    Simulate(SimulateArgs),
    /// Run one of the built-in scenarios.
    Scenario(ScenarioArgs),
    /// Coupled convergence study across discretisation levels.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Discretisation level (overrides `run.level` and `run.reference_level`).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the binary noise tape.
    #[arg(long)]
    dump_tape: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    name: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    #[arg(long, default_value = "out")]
    outdir: PathBuf,
}

#[derive(Args)]
struct ConvergeArgs {
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated levels, strictly increasing.
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<usize>,
    #[arg(long)]
    n_fine: usize,
    #[arg(long, default_value_t = 200)]
    paths: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    horizon: Option<f64>,
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    outdir: PathBuf,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(h) = args.horizon {
        cfg.run.horizon_time = h;
    }
    if let Some(n) = args.n {
        cfg.run.level = n;
        cfg.run.reference_level = None;
    }
    cfg.run.validate()?;
    let model = cfg.model.build()?;
    let tape = generate_tape(
        cfg.run.seed,
        0,
        &model.tape_spec(cfg.run.horizon_time, cfg.run.n_ref()),
    )?;
    if let Some(p) = &args.dump_tape {
        let f = File::create(p).map_err(|e| SimError::io(p, e))?;
        tape.write_to(BufWriter::new(f)).map_err(|e| SimError::io(p, e))?;
    }
    let out = simulate(&model, cfg.run.horizon_time, cfg.run.level, &tape)?;
    log::info!(
        "simulated {} discrete events over {} atoms",
        out.path.events().len(),
        out.audit.len()
    );
    let files = vec![
        ("path.csv", path_csv(&out.path).into_bytes()),
        ("audit.csv", audit_csv(&out.audit).into_bytes()),
    ];
    write_run(&args.out, &files, RunManifest::new("simulate", &cfg, cfg.run.seed)?)?;
    Ok(())
}

fn cmd_scenario(args: &ScenarioArgs) -> Result<()> {
    let id: ScenarioId = args.name.parse()?;
    let scenario = build(id);
    let run = ScenarioRun {
        horizon_time: args.horizon.unwrap_or(scenario.default_horizon),
        scenario,
        seed: args.seed,
        level: args.n,
    };
    run_scenario(&run, &args.outdir)?;
    Ok(())
}

#[derive(Serialize)]
struct ConvergeManifestConfig<'a> {
    source: String,
    model: &'a ModelConfig,
    study: &'a StudyConfig,
}

fn cmd_converge(args: &ConvergeArgs) -> Result<()> {
    let (source, model_cfg, default_horizon) = match (&args.config, &args.scenario) {
        (Some(p), _) => {
            let cfg = RunConfig::load(p)?;
            (p.display().to_string(), cfg.model, cfg.run.horizon_time)
        }
        (None, Some(name)) => {
            let s = build(name.parse()?);
            (format!("scenario:{}", s.id.name()), s.model, s.default_horizon)
        }
        (None, None) => return Err(SimError::config("either --config or --scenario is required")),
    };
    let study = StudyConfig {
        horizon: args.horizon.unwrap_or(default_horizon),
        levels: args.levels.clone(),
        n_fine: args.n_fine,
        paths: args.paths,
        seed: args.seed,
    };
    study.validate()?;
    let model = model_cfg.build()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| SimError::Resource(format!("cannot start thread pool: {e}")))?;
    let report = pool.install(|| run_convergence_study(&model, &study))?;
    let summary = report_summary(&report);
    print!("{summary}");
    let files = vec![
        ("report.csv", report_csv(&report).into_bytes()),
        ("summary.txt", summary.into_bytes()),
    ];
    let manifest_cfg = ConvergeManifestConfig {
        source,
        model: &model_cfg,
        study: &study,
    };
    write_run(&args.outdir, &files, RunManifest::new("converge", &manifest_cfg, study.seed)?)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Scenario(a) => cmd_scenario(a),
        Command::Converge(a) => cmd_converge(a),
    }
}

fn report(err: &SimError) -> ExitCode {
    eprintln!("error[{}]: {err}", err.category());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
