use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carmo_cli::commands;
use carmo_cli::{exit_code, RunConfig};
use carmo_core::errbound::{BoundMethod, SubsetStrategy};
use carmo_core::model::Mode;
use carmo_core::safety::RegionShape;

/// Moment propagation and probabilistic safety regions for discrete-time
/// stochastic polynomial systems.
#[derive(Parser)]
#[command(name = "carmo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline phase: build the truncated propagator and error
    /// expansions, persist them with a manifest.
    Build(CommonArgs),
    /// Propagate moments through a persisted propagator (online).
    Propagate(CommonArgs),
    /// Evaluate error certificates from persisted expansions (online).
    Bound(CommonArgs),
    /// Emit probabilistic safety regions (online).
    Region(CommonArgs),
    /// Monte Carlo simulation of the raw dynamics.
    Montecarlo(CommonArgs),
    /// Comparison harness: truncated vs exact vs empirical moments and
    /// region coverage (may build blocks).
    Compare(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// System specification file (TOML)
    #[arg(long)]
    spec: PathBuf,

    /// Coordinate mode: full Kronecker positions or distinct monomials
    #[arg(long, default_value = "reduced", value_parser = parse_mode)]
    mode: Mode,

    /// Truncation degree of the propagator
    #[arg(long, default_value_t = 4)]
    nt: u32,

    /// Number of time steps
    #[arg(long, default_value_t = 2)]
    horizon: u32,

    /// Moment degrees of interest (comma-separated)
    #[arg(long, default_value = "1,2", value_delimiter = ',')]
    j0: Vec<u32>,

    /// Error bound method: global, J (degree subsets), K (coordinate
    /// subsets), or exact
    #[arg(long, default_value = "K", value_parser = parse_bound)]
    bound: BoundMethod,

    /// Subset selection strategy: initial-moment, row-norm, coordinate
    #[arg(long, default_value = "coordinate", value_parser = parse_strategy)]
    strategy: SubsetStrategy,

    /// Subset sizes for the J/K bounds (comma-separated; "all" = every
    /// candidate)
    #[arg(long, default_value = "all", value_delimiter = ',', value_parser = parse_size)]
    subset_size: Vec<usize>,

    /// Tail probability budget b: the state stays inside the region
    /// with probability at least 1-b
    #[arg(long, default_value_t = 0.1)]
    prob_bound: f64,

    /// Seminorm level of the region before inflation
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Dimensions of interest (comma-separated state indices; default
    /// the first two)
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,

    /// Region shape: ellipsoid or ball
    #[arg(long, default_value = "ellipsoid", value_parser = parse_shape)]
    shape: RegionShape,

    /// Random seed for Monte Carlo
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Monte Carlo sample count
    #[arg(long, default_value_t = 10_000)]
    samples: usize,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Memory budget in bytes for offline construction
    #[arg(long, default_value_t = 1 << 30)]
    mem_budget: u64,

    /// Also write per-sample trajectories (montecarlo)
    #[arg(long, default_value_t = false)]
    dump_trajectories: bool,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "full" => Ok(Mode::Full),
        "reduced" => Ok(Mode::Reduced),
        _ => Err(format!("unknown mode {s:?} (expected full or reduced)")),
    }
}

fn parse_bound(s: &str) -> Result<BoundMethod, String> {
    match s {
        "global" => Ok(BoundMethod::Global),
        "J" | "j" => Ok(BoundMethod::SubsetJ),
        "K" | "k" => Ok(BoundMethod::SubsetK),
        "exact" => Ok(BoundMethod::Exact),
        _ => Err(format!("unknown bound method {s:?}")),
    }
}

fn parse_strategy(s: &str) -> Result<SubsetStrategy, String> {
    match s {
        "initial-moment" => Ok(SubsetStrategy::LargestInitialMoment),
        "row-norm" => Ok(SubsetStrategy::LargestRowNorm),
        "coordinate" => Ok(SubsetStrategy::LargestStackedCoordinate),
        _ => Err(format!("unknown strategy {s:?}")),
    }
}

fn parse_shape(s: &str) -> Result<RegionShape, String> {
    match s {
        "ellipsoid" => Ok(RegionShape::Ellipsoid),
        "ball" => Ok(RegionShape::Ball),
        _ => Err(format!("unknown shape {s:?}")),
    }
}

fn parse_size(s: &str) -> Result<usize, String> {
    if s == "all" {
        return Ok(usize::MAX);
    }
    s.parse().map_err(|_| format!("bad subset size {s:?}"))
}

impl CommonArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            spec_path: self.spec,
            mode: self.mode,
            n_t: self.nt,
            horizon: self.horizon,
            j0: self.j0,
            bound: self.bound,
            strategy: self.strategy,
            subset_sizes: self.subset_size,
            prob_bound: self.prob_bound,
            alpha: self.alpha,
            dims: self.dims,
            shape: self.shape,
            seed: self.seed,
            samples: self.samples,
            out_dir: self.out,
            mem_budget: self.mem_budget,
            dump_trajectories: self.dump_trajectories,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => commands::cmd_build(&a.into_config()),
        Command::Propagate(a) => commands::cmd_propagate(&a.into_config()),
        Command::Bound(a) => commands::cmd_bound(&a.into_config()),
        Command::Region(a) => commands::cmd_region(&a.into_config()),
        Command::Montecarlo(a) => commands::cmd_montecarlo(&a.into_config()),
        Command::Compare(a) => commands::cmd_compare(&a.into_config()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
