//! Command-line front end for `singfde`.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 criterion
//! refusal, 3 non-convergence.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{CliError, Format, Overrides, EXIT_CONFIG, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "singfde", version, about = "Singular functional differential equations: solvers and solvability criteria")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct MeshArgs {
    /// Number of mesh intervals.
    #[arg(long)]
    pub mesh: Option<usize>,
    /// Grading exponent of the mesh.
    #[arg(long)]
    pub grading: Option<f64>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

impl MeshArgs {
    fn overrides(&self) -> Overrides {
        Overrides { mesh: self.mesh, grading: self.grading, tol: self.tol }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem described by a configuration file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        #[command(flatten)]
        mesh: MeshArgs,
    },
    /// Sample the frontier of a solvability region.
    Region {
        /// plus, minus or nonsingular.
        #[arg(long)]
        case: String,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Grid-search the two-point determinant and condition extremal witnesses.
    Sharpness {
        /// plus or minus.
        #[arg(long)]
        case: String,
        #[arg(long = "t-plus", allow_negative_numbers = true)]
        t_plus: f64,
        #[arg(long = "t-minus", allow_negative_numbers = true)]
        t_minus: f64,
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        /// Intervals of the witness collocation mesh.
        #[arg(long, default_value_t = singfde::mesh::DEFAULT_NODES)]
        mesh: usize,
        #[arg(long, default_value_t = singfde::mesh::DEFAULT_GRADING)]
        grading: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical convergence order over a list of meshes.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated interval counts, e.g. 64,128,256,512.
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
        meshes: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        #[arg(long)]
        grading: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Evaluate the criteria and gains of a configuration without solving.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        mesh: MeshArgs,
    },
}

/// Caps rayon's pool at `SINGFDE_THREADS` when it is set.
pub fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SINGFDE_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("SINGFDE_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("SINGFDE_THREADS must be positive".into());
    }
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve { config, out, format, mesh } => commands::cmd_solve(&config, out.as_deref(), format, &mesh.overrides()),
        Command::Region { case, samples, out, format } => commands::cmd_region(&case, samples, out.as_deref(), format),
        Command::Sharpness { case, t_plus, t_minus, resolution, mesh, grading, out } => {
            let mesh = singfde::Mesh::graded(mesh, grading).map_err(|e| CliError::Usage(e.to_string()))?;
            commands::cmd_sharpness(&case, t_plus, t_minus, resolution, &mesh, out.as_deref())
        }
        Command::Converge { config, meshes, out, format, grading, tol } => {
            let ov = Overrides { mesh: None, grading, tol };
            commands::cmd_converge(&config, &meshes, out.as_deref(), format, &ov)
        }
        Command::Check { config, out, mesh } => commands::cmd_check(&config, out.as_deref(), &mesh.overrides()),
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
