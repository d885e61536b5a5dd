//! `sig` — decide Euclidean equivalence of complex plane curves and classify
//! their symmetry groups through signature maps and numerical witness sets.
//!
//! Every command is deterministic for a fixed seed and input files: rerunning
//! with the same arguments reproduces the output byte for byte, regardless of
//! `--jobs`.  JSON (or CSV for `noise`) goes to stdout, logs to stderr.
//!
//! Exit codes: 0 success / `Equivalent`; 1 validation or input error;
//! 2 sampling gave up; 3 `NotEquivalent`; 4 `Inconclusive`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, ElementSource};
use config::{resolve_seed, FileConfig};

fn version_string() -> String {
    format!(
        "{} (witness format {})",
        env!("CARGO_PKG_VERSION"),
        curvesig::witness::WITNESS_FORMAT_VERSION
    )
}

#[derive(Parser)]
#[command(
    name = "sig",
    version = version_string(),
    about = "Signature-based equivalence and symmetry of complex plane curves",
    after_help = "Seed precedence: --seed flag, SIG_SEED environment variable, config file, 0."
)]
struct Cli {
    /// Optional TOML config file (seed, [tracker] overrides); flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for path tracking and trials (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample random points on a curve.
    Sample {
        curve: PathBuf,
        /// Number of points.
        #[arg(short = 'n', long = "count", default_value_t = 10)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute a pseudowitness set of a curve's signature image.
    Witness {
        curve: PathBuf,
        /// Signature map: euclid_diff | euclid_joint_diff | euclid_joint |
        /// equiaffine_joint.
        #[arg(long)]
        map: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the witness set here (stdout gets a summary); without
        /// this, the full set goes to stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Decide whether two curves are equivalent under the map's group.
    Compare {
        curve0: PathBuf,
        curve1: PathBuf,
        #[arg(long)]
        map: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify a curve's group of Euclidean symmetries.
    Symmetry {
        curve: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Include the recovered group elements in the output.
        #[arg(long)]
        elements: bool,
    },
    /// Apply a motion to a curve (fixture generation).
    Transform {
        curve: PathBuf,
        /// Draw a random Euclidean motion.
        #[arg(long)]
        random_euclidean: bool,
        /// Draw a random equi-affine motion.
        #[arg(long)]
        random_equiaffine: bool,
        /// Read the motion from a JSON element file.
        #[arg(long, value_name = "FILE")]
        element: Option<PathBuf>,
        /// Apply the motion's inverse instead.
        #[arg(long)]
        inverse: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the transformed curve to this file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Verdict rates under relative coefficient noise, as CSV.
    Noise {
        curve: PathBuf,
        #[arg(long)]
        map: String,
        /// Comma-separated perturbation magnitudes, e.g. 0,1e-8,1e-4.
        #[arg(long = "eps-list", value_delimiter = ',', required = true)]
        eps_list: Vec<String>,
        /// Compare trials per magnitude.
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    let file_cfg = FileConfig::load(cli.config.as_deref())?;
    let settings = file_cfg.tracker_settings()?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::validation("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot size thread pool: {e}")))?;
    }

    match cli.cmd {
        Cmd::Sample { curve, count, seed } => {
            let seed = resolve_seed(seed, &file_cfg)?;
            commands::cmd_sample(&curve, count, seed, &settings)
        }
        Cmd::Witness { curve, map, seed, out } => {
            let seed = resolve_seed(seed, &file_cfg)?;
            commands::cmd_witness(&curve, &map, seed, out.as_deref(), &settings)
        }
        Cmd::Compare { curve0, curve1, map, seed } => {
            let seed = resolve_seed(seed, &file_cfg)?;
            commands::cmd_compare(&curve0, &curve1, &map, seed, &settings)
        }
        Cmd::Symmetry { curve, seed, elements } => {
            let seed = resolve_seed(seed, &file_cfg)?;
            commands::cmd_symmetry(&curve, seed, elements, &settings)
        }
        Cmd::Transform { curve, random_euclidean, random_equiaffine, element, inverse, seed, out } => {
            let seed = resolve_seed(seed, &file_cfg)?;
            let source = match (random_euclidean, random_equiaffine, element) {
                (true, false, None) => ElementSource::RandomEuclidean,
                (false, true, None) => ElementSource::RandomEquiaffine,
                (false, false, Some(path)) => ElementSource::File(path),
                _ => {
                    return Err(CliError::validation(
                        "pass exactly one of --random-euclidean, --random-equiaffine, --element",
                    ))
                }
            };
            commands::cmd_transform(&curve, source, inverse, seed, out.as_deref(), &settings)
        }
        Cmd::Noise { curve, map, eps_list, trials, seed } => {
            let seed = resolve_seed(seed, &file_cfg)?;
            commands::cmd_noise(&curve, &map, &eps_list, trials, seed, &settings)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => commands::EXIT_VALIDATION,
            };
            e.print().expect("write clap message");
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
