mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use tracelab::mesh::MeshFamily;
use tracelab::par::{init_thread_pool, Exec};
use tracelab::space::DegreeConfig;
use tracelab::TraceLabError;

/// Batch driver for the hybrid trace-inequality experiments.
///
/// Every run writes its artifacts into the output directory and prints a one
/// line summary. The worker count can be capped with TRACELAB_THREADS.
#[derive(Parser, Debug)]
#[command(name = "tracelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a mesh, print its statistics and optionally validate or save it
    Mesh(MeshCmd),
    /// Assemble the H^1 and H^{1/2} matrices and export them
    Assemble(AssembleCmd),
    /// Sweep the pencil spectrum over mesh sizes and polynomial degrees
    EvpSweep(SweepCmd),
    /// Check the glued (or flat-side) lifting on random and smooth traces
    LiftCheck(LiftCmd),
    /// Estimate the discrete trace constant
    TraceCheck(TraceCmd),
    /// Build the set catalog of one side and evaluate the lemma constants
    LemmaCheck(LemmaCmd),
    /// Test the discrete Hardy inequality on random sequences
    Hardy(HardyCmd),
    /// Merge every run artifact of a directory into one JSON summary
    Report(ReportCmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Cartesian,
    Perturbed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExecArg {
    Serial,
    Parallel,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Seed for every random choice (probes and mesh perturbation)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving the run artifacts
    #[arg(long, default_value = "tracelab-out")]
    out: PathBuf,
    /// Execution strategy of the inner loops
    #[arg(long, value_enum, default_value_t = ExecArg::Parallel)]
    exec: ExecArg,
}

#[derive(Args, Debug, Clone)]
struct MeshOpts {
    /// Space dimension (2 or 3)
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Mesh family
    #[arg(long, value_enum, default_value_t = FamilyArg::Cartesian)]
    family: FamilyArg,
    /// Vertex perturbation amplitude, relative to the cell size (perturbed family)
    #[arg(long, default_value_t = 0.2)]
    amplitude: f64,
}

#[derive(Args, Debug, Clone)]
struct DegreeOpts {
    /// Polynomial degree used for both cells and faces
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Cell degree, overrides --k [default: same as --k]
    #[arg(long)]
    k_cell: Option<usize>,
    /// Face degree, overrides --k [default: same as --k]
    #[arg(long)]
    k_face: Option<usize>,
}

impl DegreeOpts {
    fn config(&self) -> tracelab::Result<DegreeConfig> {
        DegreeConfig::new(self.k_cell.unwrap_or(self.k), self.k_face.unwrap_or(self.k))
    }
}

#[derive(Args, Debug)]
struct MeshCmd {
    #[command(flatten)]
    mesh: MeshOpts,
    /// Subdivisions per axis
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Print the validation diagnostics as a JSON array and exit non-zero if any [default: off]
    #[arg(long)]
    validate: bool,
    /// Also write the mesh JSON document [default: off]
    #[arg(long)]
    save: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AssembleCmd {
    #[command(flatten)]
    mesh: MeshOpts,
    /// Subdivisions per axis
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[command(flatten)]
    degrees: DegreeOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepCmd {
    #[command(flatten)]
    mesh: MeshOpts,
    /// Comma-separated subdivision counts
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    n: Vec<usize>,
    /// Comma-separated uniform degrees
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    k: Vec<usize>,
    /// Write zero in the seconds column so that repeated runs are byte-identical [default: off]
    #[arg(long)]
    no_timings: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LiftKind {
    Glued,
    Flat,
}

#[derive(Args, Debug)]
struct LiftCmd {
    #[command(flatten)]
    mesh: MeshOpts,
    /// Subdivisions per axis
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[command(flatten)]
    degrees: DegreeOpts,
    /// Lifting operator
    #[arg(long, value_enum, default_value_t = LiftKind::Glued)]
    lift: LiftKind,
    /// Side of the flat lifting: bottom, right, top, left, or xmin, zmax and so on
    #[arg(long, default_value = "bottom")]
    side: String,
    /// Number of probe traces
    #[arg(long, default_value_t = 50)]
    probes: usize,
    /// Fail when the mesh is too coarse for the chart overlaps [default: off]
    #[arg(long)]
    strict_h0: bool,
    /// Write the (t, f, rho) weight triples as CSV [default: off]
    #[arg(long)]
    dump_weights: bool,
    /// Write the first probe trace and its lifting as coefficient files [default: off]
    #[arg(long)]
    save_vectors: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TraceCmd {
    #[command(flatten)]
    mesh: MeshOpts,
    /// Subdivisions per axis
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[command(flatten)]
    degrees: DegreeOpts,
    /// Number of probe traces
    #[arg(long, default_value_t = 60)]
    probes: usize,
    /// Side used for the long-range split of the seminorm (bottom, xmin, zmax, ...)
    #[arg(long, default_value = "bottom")]
    side: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LemmaCmd {
    #[command(flatten)]
    mesh: MeshOpts,
    /// Subdivisions per axis
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[command(flatten)]
    degrees: DegreeOpts,
    /// Flat side of the catalog (bottom, xmin, zmax, ...)
    #[arg(long, default_value = "bottom")]
    side: String,
    /// Number of probes for the sampled constants
    #[arg(long, default_value_t = 200)]
    probes: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct HardyCmd {
    /// Number of random sequences
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Largest sequence length L
    #[arg(long, default_value_t = 200)]
    max_len: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReportCmd {
    /// Directory holding run artifacts
    #[arg(long, default_value = "tracelab-out")]
    dir: PathBuf,
    /// Write the summary here instead of standard output [default: standard output]
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn exec(&self) -> Exec {
        match self.exec {
            ExecArg::Serial => Exec::Serial,
            ExecArg::Parallel => Exec::Parallel,
        }
    }
}

impl MeshOpts {
    fn family(&self, seed: u64) -> MeshFamily {
        match self.family {
            FamilyArg::Cartesian => MeshFamily::Cartesian,
            FamilyArg::Perturbed => MeshFamily::Perturbed { amplitude: self.amplitude, seed },
        }
    }
}

fn threads_from_env() -> Result<Option<usize>, String> {
    match std::env::var("TRACELAB_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(format!("TRACELAB_THREADS must be a positive integer, got {v:?}")),
        },
        _ => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let msg = e.render().to_string();
            eprint!("{msg}");
            // value errors carry no usage line of their own
            if !msg.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    match threads_from_env() {
        Ok(t) => init_thread_pool(t),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome: Result<bool, TraceLabError> = match &cli.command {
        Command::Mesh(c) => commands::mesh(c),
        Command::Assemble(c) => commands::assemble(c),
        Command::EvpSweep(c) => commands::evp_sweep(c),
        Command::LiftCheck(c) => commands::lift_check(c),
        Command::TraceCheck(c) => commands::trace_check(c),
        Command::LemmaCheck(c) => commands::lemma_check(c),
        Command::Hardy(c) => commands::hardy(c),
        Command::Report(c) => report::run(&c.dir, c.output.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
