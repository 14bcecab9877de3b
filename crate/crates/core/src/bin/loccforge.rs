use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loccforge::experiment::{run, timing_report, ExperimentConfig, ExperimentKind};
use loccforge::Error;

#[derive(Parser)]
#[command(name = "loccforge", version, about = "Optimize fixed-round LOCC protocols and compute PPT bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average distillation fidelity over a noise grid.
    DistillAvg(Common),
    /// Post-selected distillation fidelity over a noise grid.
    DistillFid(Common),
    /// Per-copy coherent information of GADC Choi states.
    CoherentInfo(Common),
    /// State merging on Haar-random three-qubit states.
    Merge(Common),
    /// PPT relaxation bounds only.
    PptBound(Common),
    /// Wall times of CMPS optimization against the fixed-probability SDP.
    Timing(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn split(&self) -> (ExperimentKind, &Common) {
        match self {
            Command::DistillAvg(c) => (ExperimentKind::DistillAvg, c),
            Command::DistillFid(c) => (ExperimentKind::DistillFid, c),
            Command::CoherentInfo(c) => (ExperimentKind::CoherentInfo, c),
            Command::Merge(c) => (ExperimentKind::Merge, c),
            Command::PptBound(c) => (ExperimentKind::PptBound, c),
            Command::Timing(c) => (ExperimentKind::Timing, c),
        }
    }
}

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    match cfg.experiment {
        Some(k) if k != kind => {
            return Err(Error::Config { field: "experiment".into(), msg: format!("config is for `{}`, not `{}`", k.label(), kind.label()) })
        }
        _ => cfg.experiment = Some(kind),
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let (kind, common) = cli.command.split();
    let cfg = load(kind, common)?;
    if kind == ExperimentKind::Timing {
        let (rows, path) = timing_report(&cfg)?;
        for r in &rows {
            println!("{:>4} M={} trial={} {:>10.3}s {}", r.method, r.copies, r.trial, r.wall_time_s, r.status);
        }
        println!("wrote {}", path.display());
        return Ok(());
    }
    let out = run(&cfg)?;
    println!("wrote {} rows to {}", out.rows.len(), out.csv_path.display());
    println!("manifest {}", out.manifest_path.display());
    if !out.protocol_paths.is_empty() {
        println!("{} protocol documents", out.protocol_paths.len());
    }
    if out.dominance.checked > 0 {
        println!("dominance: {} rows checked, {} violations (bound < value - 1e-4)", out.dominance.checked, out.dominance.violations.len());
        for (i, v, b) in &out.dominance.violations {
            println!("  row {i}: value {v} bound {b}");
        }
    }
    if out.failures > 0 {
        eprintln!("{} of {} tasks failed; see the status column", out.failures, out.rows.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("loccforge: usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("loccforge: {e}");
            ExitCode::FAILURE
        }
    }
}
