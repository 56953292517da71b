//! Single runs with file output: run CSV, periodic snapshots and
//! checkpoints, and a closing report.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::Result;
use crate::evolution::{run, RunSummary, SimState, StepRecord};
use crate::harness::{new_report, setup, Setup};
use crate::io::checkpoint::{read_checkpoint, state_snapshot, write_checkpoint};
use crate::io::csv::RunCsv;

pub const CHECKPOINT_FILE: &str = "checkpoint.chbk";

pub fn snapshot_name(step: u64) -> String {
    format!("snap_{step:08}.chbk")
}

/// Files produced by [`execute_run`] or [`resume`].
#[derive(Clone, Debug)]
pub struct RunOutputs {
    pub csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report: PathBuf,
}

fn resolve(out: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out.join(p)
    }
}

fn drive(
    cfg: &RunConfig,
    s: &Setup,
    start: SimState,
    seed: u64,
    out: &Path,
    progress: &mut dyn FnMut(&StepRecord),
) -> Result<(RunSummary, RunOutputs)> {
    std::fs::create_dir_all(out).map_err(|e| crate::Error::io(out, e))?;
    let csv_path = resolve(out, &cfg.output.csv);
    let mut csv = RunCsv::create(&csv_path)?;
    let snap_stride = cfg.output.snapshot_stride as u64;
    let ckpt_stride = cfg.output.checkpoint_stride as u64;
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let mut snapshots = Vec::new();
    let mut checkpoint = None;
    let mut obs = |rec: &StepRecord, st: Option<&SimState>| -> Result<()> {
        csv.write(rec)?;
        progress(rec);
        if let Some(st) = st {
            if snap_stride > 0 && st.step % snap_stride == 0 {
                let p = out.join(snapshot_name(st.step));
                state_snapshot(st).write(&p)?;
                snapshots.push(p);
            }
            if ckpt_stride > 0 && st.step % ckpt_stride == 0 && st.step > 0 {
                write_checkpoint(&ckpt_path, st, seed)?;
                checkpoint = Some(ckpt_path.clone());
            }
        }
        Ok(())
    };
    let result = run(&s.sim, start, &mut obs);
    csv.flush()?;
    let summary = result?;

    let mut report = new_report("run", cfg);
    for (k, v) in summary.stability.as_pairs() {
        report.scalars.push((k.into(), v));
    }
    let last = &summary.final_state;
    report.scalars.extend([
        ("final_t".into(), last.t),
        ("final_step".into(), last.step as f64),
        ("accepted_steps".into(), (summary.records.len() - 1) as f64),
        ("rejected_steps".into(), summary.rejected as f64),
        ("final_energy".into(), last.energy.total),
        ("max_mass_balance_defect".into(), summary.ledger.max_balance_defect()),
    ]);
    let report_dir = resolve(out, &cfg.output.report_dir);
    let report = report.write_to_dir(&report_dir, seed)?;
    Ok((
        summary,
        RunOutputs {
            csv: csv_path,
            snapshots,
            checkpoint,
            report,
        },
    ))
}

/// Runs the configuration from its initial data, writing into `out`.
pub fn execute_run(
    cfg: &RunConfig,
    out: &Path,
    progress: &mut dyn FnMut(&StepRecord),
) -> Result<(RunSummary, RunOutputs)> {
    let s = setup(cfg)?;
    let start = s.sim.initial_state(&s.phi0)?;
    drive(cfg, &s, start, cfg.seed, out, progress)
}

/// Continues from a checkpoint. The CSV starts with the row of the
/// checkpointed step and matches the uninterrupted run from there on.
pub fn resume(
    cfg: &RunConfig,
    checkpoint: &Path,
    out: &Path,
    progress: &mut dyn FnMut(&StepRecord),
) -> Result<(RunSummary, RunOutputs)> {
    let s = setup(cfg)?;
    let ck = read_checkpoint(checkpoint, &s.sim, &s.grid)?;
    drive(cfg, &s, ck.state, ck.seed, out, progress)
}
