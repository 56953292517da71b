use rayon::prelude::*;

use crate::config::{max_cutoff, RunConfig};
use crate::error::{Error, Result};
use crate::evolution::{run, Silent, Simulation};
use crate::io::report::{ExperimentReport, Series, Verdict};
use crate::spectral::galerkin_project;

use super::{fixed_steps, new_report, setup, strictly_decreasing};

/// Galerkin refinement: the same run at increasing mode cutoffs, with
/// Cauchy differences of the final states and projection errors of `φ₀`.
pub fn exp_galerkin_refinement(cfg: &RunConfig, cutoffs: &[f64]) -> Result<ExperimentReport> {
    if cutoffs.len() < 3 {
        return Err(Error::Config(format!("need at least 3 cutoffs, got {}", cutoffs.len())));
    }
    if !cutoffs.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config(format!("cutoffs must be strictly increasing, got {cutoffs:?}")));
    }
    let s = setup(cfg)?;
    let band = max_cutoff(&s.grid);
    if let Some(c) = cutoffs.iter().find(|c| **c > band) {
        return Err(Error::Config(format!("cutoff {c} exceeds the dealiased band {band} of the grid")));
    }
    let runs: Vec<Result<_>> = cutoffs
        .par_iter()
        .map(|&c| {
            let mut stepper = fixed_steps(&cfg.stepper);
            stepper.cutoff = Some(c);
            let sim = Simulation::new(s.sim.spec.clone(), cfg.flow.clone(), stepper, s.sim.forcing.clone())?;
            let summary = run(&sim, sim.initial_state(&s.phi0)?, &mut Silent)?;
            let projection_error = galerkin_project(&s.phi0, Some(c)).sub(&s.phi0).l2_norm();
            Ok((summary, projection_error))
        })
        .collect();
    let runs: Vec<_> = runs.into_iter().collect::<Result<_>>()?;
    let cauchy: Vec<f64> = runs
        .windows(2)
        .map(|w| w[1].0.final_state.phi.sub(&w[0].0.final_state.phi).l2_norm())
        .collect();
    let projection: Vec<f64> = runs.iter().map(|r| r.1).collect();

    let mut report = new_report("galerkin_refinement", cfg);
    report.verdicts = vec![
        Verdict::holds("cauchy_differences_decreasing", strictly_decreasing(&cauchy)),
        Verdict::holds("projection_error_decreasing", strictly_decreasing(&projection)),
    ];
    let mut series = Series::new(
        "cutoffs",
        &[
            "cutoff",
            "projection_error",
            "cauchy_to_next",
            "max_phi_W",
            "int_grad_mu_sq",
            "int_v_L2_sq",
            "int_v_V_sq",
        ],
    );
    for (i, (c, (summary, p))) in cutoffs.iter().zip(&runs).enumerate() {
        let st = summary.stability.as_pairs();
        series.push(vec![
            *c,
            *p,
            cauchy.get(i).copied().unwrap_or(f64::NAN),
            st[0].1,
            st[1].1,
            st[2].1,
            st[3].1,
        ]);
    }
    report.series.push(series);
    Ok(report)
}
