//! `epdiff` — spectral solver for geodesics of Sobolev-type metrics on
//! periodic velocity fields.
//!
//! Three subcommands share one flag set:
//!
//! * `solve`    — integrate one geodesic, write the final field, the energy
//!                log, and the initial right-hand side;
//! * `converge` — run a truncation convergence study over lists of cutoffs
//!                and regularity exponents, write per-exponent reports, a
//!                summary, and plot-ready data;
//! * `diagnose` — integrate a geodesic together with its particle flow and
//!                write conservation diagnostics (energy drift, momentum
//!                transport residuals, flow-map Jacobians).
//!
//! Configuration comes from defaults, then an optional `--config` key=value
//! file, then explicit flags (flags win). Exit codes: 0 success, 1 bad
//! configuration or input, 2 numerical blow-up, 3 degenerate flow map.

mod commands;
mod config;

use clap::{ArgAction, Args, Parser, Subcommand};
use config::{parse_seed, Resolved};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "epdiff",
    version,
    about = "Spectral geodesic solver on periodic velocity fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one geodesic and write the final state.
    Solve(CommonArgs),
    /// Run a truncation convergence study.
    Converge(CommonArgs),
    /// Run conservation and flow-map diagnostics along one geodesic.
    Diagnose(CommonArgs),
}

/// One flag set for all subcommands; each command validates the subset it
/// actually needs. Flag names match the configuration-file keys.
#[derive(Args)]
struct CommonArgs {
    /// Key=value configuration file applied before explicit flags.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Spatial dimension (1, 2, or 3).
    #[arg(long)]
    d: Option<usize>,

    /// Metric order of the inertia operator (m ≥ 2 for well-posed dynamics).
    #[arg(long)]
    m: Option<i32>,

    /// Solver frequency cutoff.
    #[arg(long = "R")]
    r: Option<i64>,

    /// Reference cutoff for convergence studies.
    #[arg(long = "R-ref")]
    r_ref: Option<i64>,

    /// Regularity exponent for random initial data.
    #[arg(long)]
    s: Option<f64>,

    /// Comma-separated regularity exponents for convergence studies.
    #[arg(long = "s-list", value_delimiter = ',')]
    s_list: Option<Vec<f64>>,

    /// Comma-separated run cutoffs for convergence studies.
    #[arg(long = "R-list", value_delimiter = ',')]
    r_list: Option<Vec<i64>>,

    /// Number of time steps on [0, 1].
    #[arg(long)]
    steps: Option<usize>,

    /// Runge–Kutta tableau: rk4 or dopri5.
    #[arg(long)]
    tableau: Option<String>,

    /// RNG seed for random initial data, or "none" to require --in.
    #[arg(long)]
    seed: Option<String>,

    /// Tail exponent of the random-field spectral envelope.
    #[arg(long)]
    eps: Option<f64>,

    /// Truncate the initial field to this inner cutoff before solving.
    #[arg(long = "r-inner")]
    r_inner: Option<i64>,

    /// Particle-grid size per axis for flow-map integration.
    #[arg(long = "N-flow")]
    n_flow: Option<usize>,

    /// Initial velocity field as CSV (spectral coefficients).
    #[arg(long = "in")]
    input: Option<PathBuf>,

    /// Directory for output CSVs (created if missing).
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,

    /// Draw spectral magnitudes directly as real coefficients (no phases).
    #[arg(long = "literal-real-draw", action = ArgAction::SetTrue)]
    literal_real_draw: bool,
}

impl CommonArgs {
    /// Defaults → config file → flags.
    fn resolve(self) -> Result<Resolved, config::ConfigError> {
        let mut cfg = Resolved::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        if let Some(v) = self.d {
            cfg.d = Some(v);
        }
        if let Some(v) = self.m {
            cfg.m = Some(v);
        }
        if let Some(v) = self.r {
            cfg.r = Some(v);
        }
        if let Some(v) = self.r_ref {
            cfg.r_ref = Some(v);
        }
        if let Some(v) = self.s {
            cfg.s = Some(v);
        }
        if let Some(v) = self.s_list {
            cfg.s_list = Some(v);
        }
        if let Some(v) = self.r_list {
            cfg.r_list = Some(v);
        }
        if let Some(v) = self.steps {
            cfg.steps = Some(v);
        }
        if let Some(v) = self.tableau {
            cfg.tableau = Some(v);
        }
        if let Some(raw) = self.seed {
            cfg.seed = Some(parse_seed(&raw)?);
        }
        if let Some(v) = self.eps {
            cfg.eps = Some(v);
        }
        if let Some(v) = self.r_inner {
            cfg.r_inner = Some(v);
        }
        if let Some(v) = self.n_flow {
            cfg.n_flow = Some(v);
        }
        if let Some(v) = self.input {
            cfg.input = Some(v);
        }
        if let Some(v) = self.out_dir {
            cfg.out_dir = Some(v);
        }
        if self.literal_real_draw {
            cfg.literal_real_draw = true;
        }
        Ok(cfg)
    }
}

/// Honors EPDIFF_THREADS by sizing the global worker pool before any
/// parallel region starts.
fn init_threads() -> Result<(), String> {
    match std::env::var("EPDIFF_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(format!("EPDIFF_THREADS: {e}")),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|e| format!("EPDIFF_THREADS: bad value {raw:?}: {e}"))?;
            if n == 0 {
                return Err("EPDIFF_THREADS: must be at least 1".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("EPDIFF_THREADS: cannot size thread pool: {e}"))
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Routes --help/--version to stdout and usage errors to stderr;
            // a closed pipe is not worth a panic.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    if let Err(msg) = init_threads() {
        eprintln!("epdiff: {msg}");
        std::process::exit(1);
    }

    let (run, args): (fn(&Resolved) -> Result<(), commands::CmdError>, CommonArgs) =
        match cli.command {
            Command::Solve(a) => (commands::cmd_solve, a),
            Command::Converge(a) => (commands::cmd_converge, a),
            Command::Diagnose(a) => (commands::cmd_diagnose, a),
        };

    let cfg = match args.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("epdiff: {e}");
            std::process::exit(1);
        }
    };

    if let Err(e) = run(&cfg) {
        eprintln!("epdiff: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
