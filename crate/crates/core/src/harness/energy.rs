use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{run, SimState, StepRecord};
use crate::forcing::ForcingSpec;
use crate::io::report::{ExperimentReport, Relation, Series, Verdict};

use super::{new_report, setup};

/// Energy decay without sources: per-step monotonicity, cumulative
/// dissipation bookkeeping, conservation of the mean and the mean-μ
/// identity along the trajectory.
pub fn exp_energy_decay(cfg: &RunConfig) -> Result<ExperimentReport> {
    if cfg.forcing != ForcingSpec::Zero || cfg.model.has_source() {
        return Err(Error::Precondition(
            "energy decay needs u ≡ 0, σ = 0 and h ≡ 0".into(),
        ));
    }
    let s = setup(cfg)?;
    let start = s.sim.initial_state(&s.phi0)?;
    let mut series = Series::new(
        "energy",
        &["step", "t", "dt", "E_total", "E_willmore", "E_GL", "mean_phi", "diss_mu", "diss_v", "accepted"],
    );
    let mut obs = |r: &StepRecord, _: Option<&SimState>| -> Result<()> {
        series.push(vec![
            r.step as f64,
            r.t,
            r.dt,
            r.e_total,
            r.e_willmore,
            r.e_gl,
            r.mean_phi,
            r.diss_mu,
            r.diss_v,
            r.accepted as u8 as f64,
        ]);
        Ok(())
    };
    let summary = run(&s.sim, start, &mut obs)?;
    let recs = &summary.records;
    let v = &cfg.verdicts;

    let max_increase = recs
        .windows(2)
        .map(|w| w[1].e_total - w[0].e_total)
        .fold(f64::NEG_INFINITY, f64::max);
    // Right-endpoint quadrature of the dissipation rate.
    let dissipated: f64 = recs.iter().skip(1).map(|r| r.dt * (r.diss_mu + r.diss_v)).sum();
    let released = recs[0].e_total - recs[recs.len() - 1].e_total;
    let bookkeeping = if dissipated > 0.0 { released / dissipated } else { 1.0 };
    let mean_mu_defect = recs
        .iter()
        .map(|r| (r.mean_mu - r.mean_mu_identity).abs() / r.mean_mu.abs().max(1.0))
        .fold(0.0, f64::max);

    let mut report = new_report("energy_decay", cfg);
    report.verdicts = vec![
        Verdict::new(
            "energy_nonincreasing",
            if recs.len() > 1 { max_increase } else { 0.0 },
            Relation::AtMost,
            v.energy_tol,
        ),
        Verdict::new("dissipation_bookkeeping", bookkeeping, Relation::AtLeast, 1.0 - v.dissipation_tol),
        Verdict::new("mass_constant", summary.ledger.max_mean_jump(), Relation::AtMost, v.mass_tol),
        Verdict::new("mean_mu_identity", mean_mu_defect, Relation::Below, v.mean_mu_tol),
    ];
    report.scalars.push(("accepted_steps".into(), (recs.len() - 1) as f64));
    report.scalars.push(("rejected_steps".into(), summary.rejected as f64));
    report.scalars.push(("energy_released".into(), released));
    report.scalars.push(("dissipation_integral".into(), dissipated));
    for (k, x) in summary.stability.as_pairs() {
        report.scalars.push((k.into(), x));
    }
    report.series.push(series);
    Ok(report)
}
