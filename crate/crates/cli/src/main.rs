//! Command-line front end: pole selection, projection bias, identification,
//! and sample-complexity experiments, emitted as CSV or JSON artifacts.

mod exec;
mod inputs;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use inputs::MethodArg;
use obf_ident::error::Error;

#[derive(Parser)]
#[command(
    name = "obf-ident",
    version,
    about = "Rational-basis pole selection and identification experiments on the unit disk"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the analytic decay rate of a pole region (and the numeric
    /// minimax rate at order Q when --q is given).
    Tau {
        /// Pole region: disk:R, interval:A:B, inline JSON, or a JSON file.
        #[arg(long)]
        region: String,
        /// Order for the numeric minimax rate.
        #[arg(long)]
        q: Option<usize>,
    },
    /// Select a pole configuration and report it as JSON with its boundary
    /// worst case.
    Poles {
        #[arg(long)]
        region: String,
        /// Number of poles.
        #[arg(long)]
        q: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Tsuji)]
        method: MethodArg,
        /// Required by --method random.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Asymptotic projection bias of a system on a selected basis, with the
    /// a priori bounds, per order.
    ApproxBias {
        /// System: benchmark, benchmark:SEED, diffusion, or a JSON file.
        #[arg(long)]
        system: String,
        #[arg(long)]
        region: String,
        #[arg(long)]
        q: Option<usize>,
        /// Inclusive order range LO:HI (alternative to --q).
        #[arg(long)]
        q_range: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Tsuji)]
        method: MethodArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate, fit on a selected basis, and report residuals and relative
    /// errors per sample size and trial.
    Identify {
        #[arg(long)]
        system: String,
        #[arg(long)]
        region: String,
        #[arg(long)]
        q: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Tsuji)]
        method: MethodArg,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record open-loop input/output trajectories under unit white probing;
    /// row k holds the input at step k and the output measured one step
    /// later.
    Simulate {
        #[arg(long)]
        system: String,
        /// Comma-separated trajectory lengths.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Relative projection bias of a random four-pole system ensemble per
    /// order and selection method.
    SweepQ {
        /// Basis-selection region (default interval:-0.95:0.95).
        #[arg(long)]
        region: Option<String>,
        #[arg(long, default_value = "5:15")]
        q_range: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// Run a single method instead of all four.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean fit error against the asymptotic projection per sample size,
    /// with the fitted log-log slope.
    Convergence {
        #[arg(long)]
        system: String,
        #[arg(long)]
        region: String,
        #[arg(long)]
        q: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::Tsuji)]
        method: MethodArg,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the heat-plant model, perturb it per trial, and sweep the
    /// relative projection bias per order and selection method.
    Diffusion {
        /// Plant geometry JSON (the built-in room when omitted).
        #[arg(long)]
        config: Option<String>,
        /// Basis-selection region (default interval:-0.99:0.99).
        #[arg(long)]
        region: Option<String>,
        #[arg(long, default_value = "5:15")]
        q_range: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-order minimax decay rates and the sample-size floor they imply.
    Hardness {
        #[arg(long)]
        region: String,
        /// Inclusive order range LO:HI.
        #[arg(long, default_value = "1:6")]
        q_range: String,
        /// Optional system whose residue energy and pole radius set the
        /// budget (defaults to a unit budget at the region's outer radius).
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: Cmd) -> obf_ident::Result<()> {
    match cmd {
        Cmd::Tau { region, q } => exec::run_tau(&region, q),
        Cmd::Poles {
            region,
            q,
            method,
            seed,
            out,
        } => exec::run_poles(&region, q, method, seed, out.as_deref()),
        Cmd::ApproxBias {
            system,
            region,
            q,
            q_range,
            method,
            seed,
            out,
        } => exec::run_approx_bias(
            &system,
            &region,
            q,
            q_range.as_deref(),
            method,
            seed,
            out.as_deref(),
        ),
        Cmd::Identify {
            system,
            region,
            q,
            method,
            n_list,
            trials,
            seed,
            out,
        } => exec::run_identify(
            &system,
            &region,
            q,
            method,
            &n_list,
            trials,
            seed,
            out.as_deref(),
        ),
        Cmd::Simulate {
            system,
            n_list,
            seed,
            out,
        } => exec::run_simulate(&system, &n_list, seed, out.as_deref()),
        Cmd::SweepQ {
            region,
            q_range,
            trials,
            seed,
            method,
            out,
        } => exec::run_sweep_q(
            region.as_deref(),
            &q_range,
            trials,
            seed,
            method,
            out.as_deref(),
        ),
        Cmd::Convergence {
            system,
            region,
            q,
            method,
            n_list,
            trials,
            seed,
            out,
        } => exec::run_convergence(
            &system,
            &region,
            q,
            method,
            &n_list,
            trials,
            seed,
            out.as_deref(),
        ),
        Cmd::Diffusion {
            config,
            region,
            q_range,
            trials,
            seed,
            method,
            out,
        } => exec::run_diffusion(
            config.as_deref(),
            region.as_deref(),
            &q_range,
            trials,
            seed,
            method,
            out.as_deref(),
        ),
        Cmd::Hardness {
            region,
            q_range,
            system,
            out,
        } => exec::run_hardness(&region, &q_range, system.as_deref(), out.as_deref()),
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Domain(_) => "domain",
        Error::Arity(_) => "arity",
        Error::UnsupportedRegion(_) => "unsupported-region",
        Error::Branch(_) => "branch",
        Error::Convergence(_) => "convergence",
        Error::Singularity(_) => "singularity",
        Error::Numerical(_) => "numerical",
        Error::Instability(_) => "instability",
        Error::RankDeficient(_) => "rank-deficient",
        Error::Rank(_) => "rank",
        Error::Size(_) => "size",
        Error::Dimension(_) => "dimension",
        Error::Degenerate(_) => "degenerate",
        Error::Stability(_) => "stability",
        Error::Residue(_) => "residue",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "kind": error_kind(&err), "message": err.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::from(2)
        }
    }
}
