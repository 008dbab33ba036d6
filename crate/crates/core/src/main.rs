use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spcausal::cli::{cmd_estimate, cmd_simulate, cmd_sweep};
use spcausal::config::RunConfig;
use spcausal::error::{Error, Result};
use spcausal::gps::MarginalMode;
use spcausal::synthetic::DgpSpec;

#[derive(Parser)]
#[command(
    name = "spcausal",
    version,
    about = "Spatially deconfounded causal effect estimation for continuous treatments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a spatially confounded synthetic dataset with known effect.
    Simulate(SimulateArgs),
    /// Basis-dimension sweep with the residual Moran selection rule.
    Sweep(ConfigArgs),
    /// Doubly robust effect estimation for every configured treatment.
    Estimate(ConfigArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Lattice side m (n = m*m units)
    #[arg(long, default_value_t = 30)]
    grid_side: usize,
    /// True treatment effect
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Number of iid standard-normal confounders
    #[arg(long, default_value_t = 3)]
    confounders: usize,
    /// Number of smooth eigenvectors driving the latent field
    #[arg(long, default_value_t = 30)]
    spatial_rank: usize,
    /// Loading of the latent field on the treatment
    #[arg(long, default_value_t = 5.0)]
    confounding: f64,
    /// Treatment noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    noise_treatment: f64,
    /// Outcome noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    noise_outcome: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for data.csv, edges.csv, truth.json
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; flags below override file values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    id_col: Option<String>,
    #[arg(long)]
    outcome_col: Option<String>,
    /// Comma-separated treatment column names
    #[arg(long)]
    treatments: Option<String>,
    /// Comma-separated confounder column names
    #[arg(long)]
    confounders: Option<String>,
    /// Basis family: icar, mem, or both (sweep only)
    #[arg(long)]
    family: Option<String>,
    /// Basis dimension for estimate
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated ascending K grid for sweep
    #[arg(long)]
    k_grid: Option<String>,
    /// Cross-fitting folds
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Inner CV folds for lambda selection
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long)]
    lambda_grid_size: Option<usize>,
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    /// Marginal density for stabilized weights: normal or kde
    #[arg(long)]
    marginal: Option<String>,
    /// Weight truncation percentiles as "lo,hi" (e.g. 1,99), or "none"
    #[arg(long)]
    truncation: Option<String>,
    /// Moran significance level for the sweep selection rule
    #[arg(long)]
    alpha: Option<f64>,
    /// Worker thread cap
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.data {
        config.data_path = Some(v.clone());
    }
    if let Some(v) = &args.edges {
        config.edge_list_path = Some(v.clone());
    }
    if let Some(v) = &args.id_col {
        config.id_col = v.clone();
    }
    if let Some(v) = &args.outcome_col {
        config.outcome_col = v.clone();
    }
    if let Some(v) = &args.treatments {
        config.treatment_cols = split_list(v);
    }
    if let Some(v) = &args.confounders {
        config.confounder_cols = split_list(v);
    }
    if let Some(v) = &args.family {
        config.family = v.parse()?;
    }
    if let Some(v) = args.k {
        config.k = v;
    }
    if let Some(v) = &args.k_grid {
        config.k_grid = split_list(v)
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| Error::Config(format!("bad k_grid entry '{s}': {e}")))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(v) = args.folds {
        config.folds = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.cv_folds {
        config.cv_folds = v;
    }
    if let Some(v) = args.lambda_grid_size {
        config.lambda_grid_size = v;
    }
    if let Some(v) = args.lambda_min_ratio {
        config.lambda_min_ratio = v;
    }
    if let Some(v) = &args.marginal {
        config.marginal_density = match v.to_ascii_lowercase().as_str() {
            "normal" => MarginalMode::Normal,
            "kde" => MarginalMode::Kde,
            other => {
                return Err(Error::Config(format!(
                    "unknown marginal density '{other}' (expected normal or kde)"
                )))
            }
        };
    }
    if let Some(v) = &args.truncation {
        if v.eq_ignore_ascii_case("none") {
            config.truncation = None;
        } else {
            let parts = split_list(v);
            if parts.len() != 2 {
                return Err(Error::Config(format!(
                    "truncation must be 'lo,hi' percentiles, got '{v}'"
                )));
            }
            let lo: f64 = parts[0]
                .parse()
                .map_err(|e| Error::Config(format!("bad truncation '{v}': {e}")))?;
            let hi: f64 = parts[1]
                .parse()
                .map_err(|e| Error::Config(format!("bad truncation '{v}': {e}")))?;
            config.truncation = Some((lo, hi));
        }
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.threads {
        config.threads = Some(v);
    }
    if let Some(v) = &args.out_dir {
        config.output_dir = v.clone();
    }
    Ok(config)
}

fn in_thread_pool<T>(threads: Option<usize>, task: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match threads {
        None => task(),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            pool.install(task)
        }
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => {
            let spec = DgpSpec {
                grid_side: args.grid_side,
                tau: args.tau,
                confounder_count: args.confounders,
                spatial_rank: args.spatial_rank,
                confounding_strength: args.confounding,
                noise_sd_treatment: args.noise_treatment,
                noise_sd_outcome: args.noise_outcome,
                seed: args.seed,
            };
            cmd_simulate(&spec, &args.out_dir)?;
            Ok(())
        }
        Command::Sweep(args) => {
            let config = resolve_config(&args)?;
            in_thread_pool(config.threads, || cmd_sweep(&config).map(|_| ()))
        }
        Command::Estimate(args) => {
            let config = resolve_config(&args)?;
            in_thread_pool(config.threads, || cmd_estimate(&config).map(|_| ()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
