//! `qtraj-witness`: deterministic scenario runner for the trajectory
//! engines. Each subcommand resolves a strict JSON config (file or inline),
//! runs the matching engine, and writes CSV/JSON artifacts plus a manifest
//! with the resolved config and per-file checksums.

mod config;
mod output;
mod scenarios;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{load_document, parse_config, Scenario, ScenarioConfig};
use output::Format;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qtraj-witness", version, about = "Trajectory-ensemble witness statistics runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Concurrence time series of a static detuned pair (closed form)
    StaticPair(CommonArgs),
    /// Mediated-pair concurrence over a diffusivity grid, plus two sample
    /// trajectories of the diffusing coupler
    BrownianEnsemble(CommonArgs),
    /// Susceptibility-witness histogram over noise realizations
    ChiDistribution(CommonArgs),
    /// Ensemble-averaged vs trajectory-resolved concurrence under
    /// photodetection, with subensemble averages
    EsdCompare(CommonArgs),
    /// Terminal collective-spin outcomes binned by photon record
    S2Channels(CommonArgs),
    /// Witness scatter over random coherence-damped density matrices
    WitnessScatter(CommonArgs),
}

impl Command {
    fn split(&self) -> (Scenario, &CommonArgs) {
        match self {
            Command::StaticPair(a) => (Scenario::StaticPair, a),
            Command::BrownianEnsemble(a) => (Scenario::BrownianEnsemble, a),
            Command::ChiDistribution(a) => (Scenario::ChiDistribution, a),
            Command::EsdCompare(a) => (Scenario::EsdCompare, a),
            Command::S2Channels(a) => (Scenario::S2Channels, a),
            Command::WitnessScatter(a) => (Scenario::WitnessScatter, a),
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Config document: a JSON file path, or inline JSON starting with '{'.
    /// Omitted keys take documented defaults, echoed in the manifest.
    #[arg(long)]
    config: Option<String>,
    /// Master seed; overrides the config document (default 1)
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory or sample count; overrides the config document
    #[arg(long)]
    trajectories: Option<usize>,
    /// Output directory (created if missing)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker thread cap; 0 means automatic. Outputs do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Table format: CSV is canonical, JSON mirrors the same records
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

/// Fold the `--trajectories` override into the typed config.
fn apply_trajectories(config: &mut ScenarioConfig, n: usize) -> Result<()> {
    if n == 0 {
        bail!("--trajectories must be at least 1");
    }
    match config {
        ScenarioConfig::StaticPair(_) => {
            bail!("static-pair is deterministic and has no trajectory count")
        }
        ScenarioConfig::BrownianEnsemble(c) => c.n_traj = n,
        ScenarioConfig::ChiDistribution(c) => c.n_traj = n,
        ScenarioConfig::EsdCompare(c) => c.n_traj = n,
        ScenarioConfig::S2Channels(c) => c.n_traj = n,
        ScenarioConfig::WitnessScatter(c) => c.n_samples = n,
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_cli() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run_cli() -> Result<()> {
    let cli = Cli::parse();
    let (scenario, args) = cli.command.split();
    let doc = args
        .config
        .as_deref()
        .map(load_document)
        .transpose()
        .context("cannot load config")?;
    let (mut config, doc_seed) = parse_config(scenario, doc)?;
    let seed = args.seed.unwrap_or(doc_seed);
    if let Some(n) = args.trajectories {
        apply_trajectories(&mut config, n)?;
    }

    let run = || scenarios::run(&config, seed);
    let result = if args.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build()
            .context("cannot build worker pool")?;
        pool.install(run)
    } else {
        run()
    }?;

    let summary = result.summary.clone();
    let names = scenarios::write_artifacts(result, scenario.name(), seed, &args.out, args.format.into())?;
    println!("{summary}");
    println!("wrote {} to {}", names.join(", "), args.out.display());
    Ok(())
}
