use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bchflow::config::RunConfig;
use bchflow::harness::{
    check_config, check_snapshot, exp_continuous_dependence, exp_darcy_limit, exp_energy_decay,
    exp_galerkin_refinement, exp_regularization_ablation, exp_self_convergence, exp_self_convergence_linear,
    exp_self_convergence_uniform, fixed_steps,
};
use bchflow::io::report::ExperimentReport;
use bchflow::io::snapshot::Snapshot;
use bchflow::runner::{execute_run, resume, RunOutputs};
use bchflow::{Error, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

/// Output directory used when `--out` is not given.
const OUT_DIR_ENV: &str = "BCHFLOW_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "bchflow", version, about = "Brinkman / sixth-order Cahn–Hilliard simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// INI configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $BCHFLOW_OUT_DIR, else ./bchflow-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Reject unknown or inapplicable configuration keys.
    #[arg(long, default_value_t = true, action = ArgAction::Set, value_name = "BOOL")]
    strict: bool,
    /// Suppress progress and verdict output.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single simulation: run CSV, snapshots, checkpoints and a report.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Harness experiment; exits with 1 if any verdict fails.
    Sweep {
        kind: SweepKind,
        /// Viscosity levels of the Darcy sweep.
        #[arg(long)]
        levels: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Invariant checks on a snapshot or on a configuration.
    Check {
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Continue a run from a checkpoint written by `run`.
    Resume {
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepKind {
    Darcy,
    Galerkin,
    Beta,
    Dt,
    Energy,
    Dependence,
}

enum Outcome {
    Done,
    VerdictFailed,
}

fn load(common: &Common, needs_config: bool) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let parsed = RunConfig::parse_file(path, common.strict)?;
            if !common.quiet {
                for w in &parsed.warnings {
                    eprintln!("warning: {w}");
                }
            }
            parsed.config
        }
        None if needs_config => return Err(Error::Config("--config is required here".into())),
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("bchflow-out"))
}

fn init_threads(common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot set up the thread pool: {e}")))?;
    }
    Ok(())
}

fn publish(reports: &[ExperimentReport], cfg: &RunConfig, out: &Path, quiet: bool) -> Result<Outcome> {
    let dir = out.join(&cfg.output.report_dir);
    let mut ok = true;
    for r in reports {
        let path = r.write_to_dir(&dir, cfg.seed)?;
        if !quiet {
            println!("{}", r.experiment);
            for v in &r.verdicts {
                println!("  {}", v.line());
            }
            for (k, v) in &r.scalars {
                println!("  {k} = {v:e}");
            }
            println!("  report: {}", path.display());
        }
        ok &= r.passed();
    }
    Ok(if ok { Outcome::Done } else { Outcome::VerdictFailed })
}

fn summarize(outputs: &RunOutputs, quiet: bool) {
    if quiet {
        return;
    }
    println!("csv: {}", outputs.csv.display());
    println!("snapshots: {}", outputs.snapshots.len());
    if let Some(c) = &outputs.checkpoint {
        println!("checkpoint: {}", c.display());
    }
    println!("report: {}", outputs.report.display());
}

fn progress(quiet: bool) -> impl FnMut(&bchflow::evolution::StepRecord) {
    move |r| {
        if !quiet && r.accepted && r.step % 100 == 0 {
            eprintln!("step {:>8}  t = {:.6e}  E = {:.9e}", r.step, r.t, r.e_total);
        }
    }
}

fn sweep(kind: SweepKind, levels: Option<usize>, cfg: &RunConfig) -> Result<Vec<ExperimentReport>> {
    let sw = &cfg.sweep;
    Ok(match kind {
        SweepKind::Darcy => vec![exp_darcy_limit(cfg, levels.unwrap_or(sw.levels))?],
        SweepKind::Galerkin => vec![exp_galerkin_refinement(cfg, &sw.cutoffs)?],
        SweepKind::Beta => vec![exp_regularization_ablation(cfg, &sw.betas)?],
        SweepKind::Energy => vec![exp_energy_decay(cfg)?],
        SweepKind::Dependence => vec![exp_continuous_dependence(cfg)?],
        SweepKind::Dt => {
            let mut fixed = cfg.clone();
            fixed.stepper = fixed_steps(&cfg.stepper);
            let mut r = vec![
                exp_self_convergence(&fixed, &sw.dts)?,
                exp_self_convergence_linear(&fixed, &sw.dts)?,
            ];
            if fixed.model.sigma > 0.0 {
                r.push(exp_self_convergence_uniform(&fixed, &sw.dts)?);
            }
            r
        }
    })
}

fn execute(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run { common } => {
            init_threads(&common)?;
            let cfg = load(&common, false)?;
            let (_, outputs) = execute_run(&cfg, &out_dir(&common), &mut progress(common.quiet))?;
            summarize(&outputs, common.quiet);
            Ok(Outcome::Done)
        }
        Command::Resume { checkpoint, common } => {
            init_threads(&common)?;
            let cfg = load(&common, false)?;
            let (_, outputs) = resume(&cfg, &checkpoint, &out_dir(&common), &mut progress(common.quiet))?;
            summarize(&outputs, common.quiet);
            Ok(Outcome::Done)
        }
        Command::Sweep { kind, levels, common } => {
            init_threads(&common)?;
            let cfg = load(&common, false)?;
            let reports = sweep(kind, levels, &cfg)?;
            publish(&reports, &cfg, &out_dir(&common), common.quiet)
        }
        Command::Check { snapshot, common } => {
            init_threads(&common)?;
            let report = match &snapshot {
                Some(path) => {
                    let cfg = load(&common, false)?;
                    (check_snapshot(&Snapshot::read(path)?, &cfg)?, cfg)
                }
                None => {
                    let cfg = load(&common, true)?;
                    (check_config(&cfg)?, cfg)
                }
            };
            publish(&[report.0], &report.1, &out_dir(&common), common.quiet)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
