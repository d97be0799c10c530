mod commands;
mod pes;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ionvqe", version, about = "Variational eigensolver toolkit for trapped-ion molecular simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map a fermionic coefficient table to qubits, optionally tapering.
    Transform(TransformArgs),
    /// Build a reduced ansatz from excitation amplitudes.
    Ansatz(AnsatzArgs),
    /// Energies and term expectations over a parameter grid.
    Scan(ScanArgs),
    /// Variational minimization at each geometry.
    Vqe(VqeArgs),
    /// Fit scan or trace files and emit potential energy points.
    Fit(FitArgs),
    /// Noisy variational minima over a sweep of entangling-gate fidelities.
    NoiseSim(NoiseSimArgs),
    /// Exact ground-state energies of a qubit table.
    Exact(ExactArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MappingArg {
    Jw,
    Bk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseArg {
    Off,
    Iid,
    Collective,
}

/// Whether to keep the table's frame or flip it so the reference is all ones.
#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DfsArg {
    Protected,
    Unprotected,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OptimizerArg {
    Nm,
    Anneal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PolicyArg {
    Unrestricted,
    Conserving,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReductionArg {
    Auto,
    Exact,
    LowestWeight,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Sinusoid,
    Quad2d,
    Gpr,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NormalizationArg {
    Absolute,
    LargeROffset,
}

#[derive(Args)]
pub struct TransformArgs {
    /// Fermionic coefficient table.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "bk")]
    pub mapping: MappingArg,
    /// `none`, `auto`, or a comma-separated list of qubits to keep.
    #[arg(long, default_value = "none")]
    pub taper: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Term listing; defaults to the output path with a `.txt` extension.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct AnsatzArgs {
    /// Fermionic coefficient table.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub amplitudes: PathBuf,
    #[arg(long, value_enum, default_value = "bk")]
    pub mapping: MappingArg,
    /// `none`, `auto`, or a comma-separated list of qubits to keep.
    #[arg(long, default_value = "none")]
    pub taper: String,
    #[arg(long, value_enum, default_value = "unrestricted")]
    pub policy: PolicyArg,
    /// Excitations with smaller |amplitude| at every geometry are dropped.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub reduction: ReductionArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone)]
pub struct ProblemArgs {
    /// Qubit coefficient table.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub ansatz: PathBuf,
    /// Bond lengths to run, in angstrom; all geometries when omitted.
    #[arg(long = "r", value_delimiter = ',')]
    pub r: Vec<f64>,
    #[arg(long, value_enum, default_value = "protected")]
    pub dfs: DfsArg,
}

#[derive(Args, Clone)]
pub struct NoiseArgs {
    #[arg(long, value_enum, default_value = "off")]
    pub noise: NoiseArg,
    /// Coherence time in milliseconds; required with dephasing.
    #[arg(long)]
    pub t2_ms: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub ms_fidelity: f64,
}

#[derive(Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Parameter axis as `start:stop:step`, once per ansatz parameter.
    #[arg(long = "axis", required = true)]
    pub axes: Vec<String>,
    /// Shots per measurement setting; exact expectations when omitted.
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct VqeArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "nm")]
    pub optimizer: OptimizerArg,
    /// Range of the annealing offsets in hartree, `lo:hi`.
    #[arg(long, default_value = "0.01:0.08")]
    pub anneal: String,
    /// Starting parameters; zeros when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Vec<f64>,
    /// First simplex step; half a period for one parameter, 0.5 otherwise.
    #[arg(long)]
    pub initial_step: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    /// Angular frequency of the single-parameter fit; derived from the ansatz when omitted.
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long, value_enum, default_value = "absolute")]
    pub normalization: NormalizationArg,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct FitArgs {
    /// Scan files (`.json`) or optimizer traces (`.jsonl`).
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long = "method", value_enum, required = true)]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 2.0)]
    pub frequency: f64,
    /// Keep quadratic-fit points within this many standard deviations of the median energy.
    #[arg(long, default_value_t = 4.0)]
    pub median_sigma: f64,
    /// Restrict quadratic fits to a box, `a0:a1,b0:b1`.
    #[arg(long)]
    pub window: Option<String>,
    /// Restrict quadratic fits to a box around the lowest sample, `wa,wb`.
    #[arg(long, value_delimiter = ',')]
    pub around: Vec<f64>,
    /// Qubit table whose exact energies are added as a reference curve.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "absolute")]
    pub normalization: NormalizationArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-file fit parameters; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct NoiseSimArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "iid")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 40.0)]
    pub t2_ms: f64,
    #[arg(long = "fidelity", value_delimiter = ',', default_value = "1,0.99,0.97,0.95,0.93")]
    pub fidelities: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Well depths and error summaries; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long = "r", value_delimiter = ',')]
    pub r: Vec<f64>,
    #[arg(long, value_enum, default_value = "absolute")]
    pub normalization: NormalizationArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Transform(a) => commands::transform(a),
        Command::Ansatz(a) => commands::ansatz(a),
        Command::Scan(a) => commands::scan(a),
        Command::Vqe(a) => commands::vqe(a),
        Command::Fit(a) => commands::fit(a),
        Command::NoiseSim(a) => commands::noise_sim(a),
        Command::Exact(a) => commands::exact(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
