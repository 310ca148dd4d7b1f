use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cqe",
    version,
    about = "Quantize superconducting circuits described by a netlist",
    long_about = "Quantize superconducting circuits described by a netlist.\n\n\
        The netlist is transformed into harmonic and charge modes, the Hamiltonian is built on a \
        truncated Fock ⊗ charge basis and diagonalized. Spectra, phase-space wavefunctions, \
        coupling matrix elements and decoherence rates can be exported.\n\n\
        Exit codes: 0 success, 2 input error, 3 numerical failure.",
    after_help = "Examples:\n  \
        cqe describe fixtures/zero_pi.net\n  \
        cqe spectrum fixtures/zero_pi.net -t 25,1,25 -n 5 --sweep loop1=0:1:100 -o spec.csv\n  \
        cqe decoherence fixtures/fluxonium.net -t 100 --channel capacitive --states 0,1"
)]
pub struct Cli {
    /// Worker threads for sweeps (1 gives byte-identical reruns).
    #[arg(long, global = true, env = "CQE_THREADS")]
    pub threads: Option<usize>,

    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, env = "CQE_LOG", default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the transformed Hamiltonian: modes, frequencies, charging energies and junction terms.
    #[command(after_help = "Examples:\n  cqe describe zero_pi.net\n  cqe describe fluxonium.net --format json")]
    Describe(DescribeArgs),

    /// Lowest eigenfrequencies, at one point or over a parameter sweep.
    #[command(after_help = "Examples:\n  \
        cqe spectrum lc.net -t 30 -n 5\n  \
        cqe spectrum zero_pi.net -t 25,1,25 -n 5 --sweep loop1=0:1:100 -o spec.csv --plot-script spec.gp\n  \
        cqe spectrum cpb.net -t 31 -n 4 --sweep ng1=-1:1:201 --format json")]
    Spectrum(SpectrumArgs),

    /// Probability density |ψ|² of an eigenstate on a phase grid.
    #[command(after_help = "Grid: one entry per mode, `start:stop:count` or a scalar; `pi` is accepted \
        (e.g. `-pi:pi:100,0,-pi/2:3pi/2:100`).\n\nExamples:\n  \
        cqe wavefunction zero_pi.net -t 25,1,25 --state 0 --grid=-pi:pi:100,0,-pi/2:3pi/2:100 -o psi0.csv\n  \
        cqe wavefunction lc.net -t 20 --state 0 --grid=-4:4:401 --format bin -o psi.bin")]
    Wavefunction(WavefunctionArgs),

    /// Matrix element ⟨m|O|n⟩ of a capacitive (volt) or inductive (ampere) coupling operator.
    #[command(name = "matrix-element", after_help = "Examples:\n  \
        cqe matrix-element lc.net -t 20 --type capacitive --nodes 1,0 --states 0,1\n  \
        cqe matrix-element fluxonium.net -t 100 --type inductive --nodes 0,1 --states 0,1")]
    MatrixElement(MatrixElementArgs),

    /// Decay or 1/f dephasing rate between two eigenstates, optionally over a sweep.
    #[command(after_help = "Examples:\n  \
        cqe decoherence fluxonium.net -t 100 --channel capacitive --states 0,1\n  \
        cqe decoherence fluxonium.net -t 100 --channel cc --states 0,1 --sweep l1=0:1:300 -o tphi.csv\n  \
        cqe decoherence fluxonium.net -t 100 --channel quasiparticle --states 0,1 --detailed-balance")]
    Decoherence(DecoherenceArgs),

    /// Write the classical matrices C, L*, W, B, G (and the transformation) as CSV files.
    #[command(name = "dump-matrices", after_help = "Example:\n  cqe dump-matrices two_loop.net --out-dir matrices/")]
    DumpMatrices(DumpArgs),

    /// Print the manual page (roff) to stdout.
    #[command(hide = true)]
    Man,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TreeArg {
    Standard,
    Alternate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FluxDistArg {
    Junctions,
    All,
}

/// Netlist and construction options shared by every command.
#[derive(Debug, Args)]
pub struct CircuitArgs {
    /// Netlist file.
    pub netlist: PathBuf,

    /// Override a loop flux, in Φ0 (repeatable).
    #[arg(long = "flux", value_name = "LOOP=VALUE")]
    pub fluxes: Vec<String>,

    /// Override a charge offset of a charge mode, in units of 2e (repeatable, 1-based mode).
    #[arg(long = "ng", value_name = "MODE=VALUE")]
    pub offsets: Vec<String>,

    /// Rule used to choose closure branches.
    #[arg(long, value_enum, default_value = "standard")]
    pub tree: TreeArg,

    /// Override the netlist's external-flux distribution.
    #[arg(long, value_enum)]
    pub flux_dist: Option<FluxDistArg>,
}

/// Options for commands that diagonalize.
#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Truncation per mode, harmonic modes first (e.g. 25,1,25).
    #[arg(short = 't', long = "trunc", value_delimiter = ',', required = true)]
    pub truncations: Vec<usize>,

    /// Eigensolver residual tolerance relative to ‖H‖∞.
    #[arg(long, env = "CQE_TOL")]
    pub tol: Option<f64>,

    /// Eigensolver iteration limit.
    #[arg(long, env = "CQE_MAX_ITER")]
    pub max_iter: Option<usize>,

    /// Largest dimension solved densely.
    #[arg(long)]
    pub dense_threshold: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TextFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,

    #[arg(long, value_enum, default_value = "text")]
    pub format: TextFormat,

    /// Frequency unit of the printed values.
    #[arg(long, default_value = "GHz")]
    pub unit: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,

    #[command(flatten)]
    pub solve: SolveArgs,

    /// Number of eigenvalues.
    #[arg(short = 'n', long, default_value_t = 5)]
    pub n_eig: usize,

    /// Sweep `TARGET=start:stop:count` or `TARGET=v1,v2,...`; TARGET is a loop id,
    /// `ng<mode>`, or an element `(i,j)#k` (value in its netlist unit).
    #[arg(long, value_name = "TARGET=VALUES")]
    pub sweep: Option<String>,

    /// Output file (stdout when omitted).
    #[arg(short, long)]
    pub out: Option<PathBuf>,

    /// Output format (inferred from the extension of --out, else CSV).
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,

    /// Frequency unit of the output.
    #[arg(long, default_value = "GHz")]
    pub unit: String,

    /// Also write a gnuplot script plotting the CSV output.
    #[arg(long, value_name = "PATH")]
    pub plot_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridFormat {
    Csv,
    /// Little-endian f64 array plus a JSON header file `<out>.json`.
    Bin,
}

#[derive(Debug, Args)]
pub struct WavefunctionArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,

    #[command(flatten)]
    pub solve: SolveArgs,

    /// Eigenstate index (0 = ground state).
    #[arg(long, default_value_t = 0)]
    pub state: usize,

    /// Grid per mode, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,

    /// Also export Re ψ and Im ψ.
    #[arg(long)]
    pub components: bool,

    #[arg(short, long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: GridFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CouplingArg {
    Capacitive,
    Inductive,
}

#[derive(Debug, Args)]
pub struct MatrixElementArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,

    #[command(flatten)]
    pub solve: SolveArgs,

    #[arg(long = "type", value_enum)]
    pub kind: CouplingArg,

    /// Node pair i,j (0 is ground).
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub nodes: Vec<usize>,

    /// States m,n.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub states: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Capacitive,
    Inductive,
    Quasiparticle,
    Cc,
    Charge,
    Flux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Down,
    Up,
    Total,
}

#[derive(Debug, Args)]
pub struct DecoherenceArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,

    #[command(flatten)]
    pub solve: SolveArgs,

    #[arg(long, value_enum)]
    pub channel: ChannelArg,

    /// States m,n.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub states: Vec<usize>,

    /// Direction of a decay rate.
    #[arg(long, value_enum, default_value = "down")]
    pub direction: DirectionArg,

    /// Shorthand for --direction total.
    #[arg(long)]
    pub total: bool,

    /// Bath temperature in kelvin (netlist value when omitted).
    #[arg(long, env = "CQE_TEMPERATURE")]
    pub temperature: Option<f64>,

    /// Print Γ_up, Γ_down, their ratio and the Boltzmann factor.
    #[arg(long)]
    pub detailed_balance: bool,

    /// Sweep as for `spectrum`; writes value, rate and 1/rate.
    #[arg(long, value_name = "TARGET=VALUES")]
    pub sweep: Option<String>,

    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub circuit: CircuitArgs,

    /// Directory receiving the CSV files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}
