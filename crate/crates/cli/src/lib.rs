//! `rkmeans` command-line front end.
//!
//! Exit codes: 0 success (and a Euclidean verdict for `check`), 1 a
//! non-Euclidean verdict, 2 usage error, 3 input or parse error, 4 solver
//! error. Failures print a single `error: ...` line on standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use relational_kmeans::io::{self, MatrixProvenance, ReadOptions};
use relational_kmeans::{
    apply_beta_spread, gower_center, min_restricted_eigenvalue, solve, BetaMode, EmptyClusterPolicy,
    Error, InitMethod, SolverConfig, SquaredDissimilarityMatrix,
};

#[derive(Debug, Parser)]
#[command(name = "rkmeans", version, about = "k-means on a squared dissimilarity matrix")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster the input and write labels and a JSON report.
    Cluster(ClusterArgs),
    /// Report whether the input is Euclidean and the spread needed to make it so.
    Check(CheckArgs),
    /// Write the input with a uniform spread added to every off-diagonal entry.
    Spread(SpreadArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["matrix", "points"])))]
pub struct InputArgs {
    /// Squared dissimilarity matrix (CSV, or TSV for .tsv/.tab).
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// One point per row; squared Euclidean distances are computed from it.
    #[arg(long, value_name = "PATH")]
    pub points: Option<PathBuf>,
    /// Matrix entries are plain distances; square them on load.
    #[arg(long)]
    pub square_input: bool,
    /// Field delimiter, overriding the file extension.
    #[arg(long, value_parser = parse_delimiter)]
    pub delimiter: Option<u8>,
    /// The first row holds names (default: detected).
    #[arg(long, conflicts_with = "no_header")]
    pub header: bool,
    /// The first row holds data.
    #[arg(long)]
    pub no_header: bool,
    /// The first column holds point names.
    #[arg(long)]
    pub row_names: bool,
    /// Relative tolerance for treating the smallest restricted eigenvalue as zero.
    #[arg(long, default_value_t = relational_kmeans::spectral::DEFAULT_EIGEN_TOLERANCE)]
    pub eig_tol: f64,
    /// Suppress the summary line.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Random,
    Plusplus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BetaModeArg {
    Off,
    Eager,
    Lazy,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of clusters.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub clusters: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Plusplus)]
    pub init: InitArg,
    #[arg(long, value_enum, default_value_t = BetaModeArg::Eager)]
    pub beta_mode: BetaModeArg,
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    /// Relative objective improvement below which iteration stops.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    /// Fail instead of refilling clusters that become empty.
    #[arg(long)]
    pub strict_empty: bool,
    #[arg(long, value_name = "PATH")]
    pub labels_out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub report_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct SpreadArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Spread to apply instead of the minimal one.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Where to write the spread matrix; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub matrix_out: Option<PathBuf>,
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("expected a single ASCII character or 'tab', got {s:?}")),
    }
}

enum Failure {
    Usage(String),
    Input(Error),
    Solver(Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Solver(_) => 4,
        }
    }

    fn message(&self) -> String {
        let text = match self {
            Failure::Usage(m) => m.clone(),
            Failure::Input(e) | Failure::Solver(e) => e.to_string(),
        };
        text.replace(['\n', '\r'], " ")
    }
}

/// Input errors are the caller's data; everything else is the solver's.
fn classify(e: Error) -> Failure {
    match e {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Json { .. }
        | Error::NonSquare { .. }
        | Error::AsymmetryExceedsTolerance { .. }
        | Error::NonzeroDiagonal { .. }
        | Error::NonFiniteEntry { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyInput => Failure::Input(e),
        _ => Failure::Solver(e),
    }
}

struct Loaded {
    matrix: SquaredDissimilarityMatrix,
    names: Option<Vec<String>>,
    provenance: MatrixProvenance,
}

fn load(input: &InputArgs) -> Result<Loaded, Failure> {
    if input.square_input && input.points.is_some() {
        return Err(Failure::Usage("--square-input applies only to --matrix".into()));
    }
    let options = ReadOptions {
        delimiter: input.delimiter,
        header: if input.header {
            Some(true)
        } else if input.no_header {
            Some(false)
        } else {
            None
        },
        row_names: input.row_names,
        square_input: input.square_input,
        tolerance: None,
    };
    let (matrix, names, source, kind) = match (&input.matrix, &input.points) {
        (Some(path), None) => {
            let (m, names) = io::read_matrix(path, &options).map_err(Failure::Input)?;
            (m, names, path.clone(), "matrix")
        }
        (None, Some(path)) => {
            let (points, names) = io::read_points(path, &options).map_err(Failure::Input)?;
            let m = SquaredDissimilarityMatrix::from_points(&points).map_err(Failure::Input)?;
            (m, names, path.clone(), "points")
        }
        _ => return Err(Failure::Usage("exactly one of --matrix or --points is required".into())),
    };
    let provenance = MatrixProvenance {
        source,
        kind: kind.to_string(),
        square_input: input.square_input,
        has_negative_entries: matrix.has_negative_entries(),
        scale: matrix.scale(),
    };
    Ok(Loaded {
        matrix,
        names,
        provenance,
    })
}

fn write_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |source| {
        Failure::Input(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn stdout_failure(e: std::io::Error) -> Failure {
    Failure::Input(Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    })
}

/// Parses `args` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid usage");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            let _ = writeln!(err, "error: {first}");
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Cluster(args) => cmd_cluster(args, out),
        Command::Check(args) => cmd_check(args, out),
        Command::Spread(args) => cmd_spread(args, out, err),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn cluster_config(args: &ClusterArgs) -> SolverConfig {
    let mut config = SolverConfig::new(args.clusters as usize);
    config.max_iterations = args.max_iter as usize;
    config.objective_tolerance = args.tol;
    config.seed = args.seed;
    config.init_method = match args.init {
        InitArg::Random => InitMethod::RandomPartition,
        InitArg::Plusplus => InitMethod::PlusPlus,
    };
    config.beta_mode = match args.beta_mode {
        BetaModeArg::Off => BetaMode::Off,
        BetaModeArg::Eager => BetaMode::Eager,
        BetaModeArg::Lazy => BetaMode::Lazy,
    };
    config.restarts = args.restarts as usize;
    config.eigen_tolerance = args.input.eig_tol;
    if args.strict_empty {
        config.empty_cluster_policy = EmptyClusterPolicy::Error;
    }
    config
}

fn cmd_cluster(args: &ClusterArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let started = Instant::now();
    let loaded = load(&args.input)?;
    let config = cluster_config(args);
    config
        .validate(loaded.matrix.n())
        .map_err(|e| match e {
            Error::InvalidConfig(m) => Failure::Usage(m),
            other => Failure::Solver(other),
        })?;
    let report = solve(&loaded.matrix, &config).map_err(classify)?;
    if let Some(path) = &args.labels_out {
        io::write_labels(path, loaded.names.as_deref(), &report.labels).map_err(Failure::Input)?;
    }
    if let Some(path) = &args.report_out {
        let elapsed = started.elapsed().as_secs_f64();
        io::write_report(
            path,
            &report,
            &config,
            &loaded.provenance,
            args.labels_out.as_deref(),
            elapsed,
        )
        .map_err(Failure::Input)?;
    }
    if !args.input.quiet {
        writeln!(
            out,
            "n={} N={} objective={} beta={} iters={} converged={}",
            loaded.matrix.n(),
            config.num_clusters,
            format_number(report.final_objective),
            format_number(report.beta_final),
            report.iterations,
            report.converged
        )
        .map_err(stdout_failure)?;
    }
    Ok(0)
}

fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&args.input)?;
    let tol = args.input.eig_tol;
    if !(tol >= 0.0) {
        return Err(Failure::Usage(format!("--eig-tol must be non-negative, got {tol}")));
    }
    let lambda_min = min_restricted_eigenvalue(&gower_center(&loaded.matrix), tol).map_err(classify)?;
    let euclidean = lambda_min >= -tol * loaded.matrix.scale();
    let beta_star = if euclidean { 0.0 } else { -2.0 * lambda_min };
    if !args.input.quiet {
        writeln!(
            out,
            "n={} min_restricted_eigenvalue={}",
            loaded.matrix.n(),
            format_number(lambda_min)
        )
            .map_err(stdout_failure)?;
    }
    writeln!(out, "euclidean={euclidean} beta_star={}", format_number(beta_star))
        .map_err(stdout_failure)?;
    Ok(if euclidean { 0 } else { 1 })
}

fn cmd_spread(args: &SpreadArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let loaded = load(&args.input)?;
    let beta = match args.beta {
        Some(b) if !(b >= 0.0) || !b.is_finite() => {
            return Err(Failure::Usage(format!("--beta must be a non-negative number, got {b}")))
        }
        Some(b) => b,
        None => relational_kmeans::beta_star(&loaded.matrix, args.input.eig_tol).map_err(classify)?,
    };
    let spread = apply_beta_spread(&loaded.matrix, beta).map_err(classify)?;
    let names = loaded.names.as_deref();
    match &args.matrix_out {
        Some(path) => {
            let delimiter = args.input.delimiter.unwrap_or_else(|| io::delimiter_for(path));
            io::write_matrix(path, &spread, names, Some(delimiter)).map_err(Failure::Input)?;
            if !args.input.quiet {
                writeln!(out, "beta={}", format_number(beta)).map_err(stdout_failure)?;
            }
        }
        None => {
            let delimiter = args.input.delimiter.unwrap_or(b',');
            io::write_matrix_to(out, &spread, names, delimiter).map_err(stdout_failure)?;
            if !args.input.quiet {
                writeln!(err, "beta={}", format_number(beta)).map_err(write_failure(Path::new("<stderr>")))?;
            }
        }
    }
    Ok(0)
}
