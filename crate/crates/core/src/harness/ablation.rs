use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::Simulation;
use crate::flow::{solve_brinkman, FlowMode, FlowParams, Regularization};
use crate::io::report::{ExperimentReport, Relation, Series, Verdict};
use crate::spectral::VectorField;

use super::{aligned, decreasing, fixed_steps, max_over_min, new_report, run_visiting, setup, trajectory};

/// Ablation of the pseudo-time term `β(v − v_prev)/dt` in the velocity
/// equation: coupled runs for each `β` against `β = 0`, and a frozen-φ
/// single solve from `v_prev = 0` that exposes the `O(β)` rate.
pub fn exp_regularization_ablation(cfg: &RunConfig, betas: &[f64]) -> Result<ExperimentReport> {
    if betas.len() < 2 || betas.last() != Some(&0.0) || !betas.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::Config(format!(
            "betas must decrease strictly and end with 0, got {betas:?}"
        )));
    }
    if cfg.flow.mode != FlowMode::Brinkman {
        return Err(Error::Precondition("the regularization acts on the Brinkman solve only".into()));
    }
    let s = setup(cfg)?;
    let stepper = fixed_steps(&cfg.stepper);
    let sim_for = |beta: f64| {
        Simulation::new(
            s.sim.spec.clone(),
            FlowParams {
                regularization_beta: beta,
                ..cfg.flow.clone()
            },
            stepper.clone(),
            s.sim.forcing.clone(),
        )
    };
    let (_, reference) = trajectory(&sim_for(0.0)?, &s.phi0)?;

    let gaps: Vec<Result<(f64, f64)>> = betas
        .par_iter()
        .map(|&beta| {
            let sim = sim_for(beta)?;
            let mut v_gap = 0.0;
            let mut phi_gap = 0.0;
            let summary = run_visiting(&sim, &s.phi0, |k, st| {
                let r = aligned(&reference, k, st)?;
                if k > 0 {
                    let d = st.v.sub(&r.v);
                    v_gap += st.dt_used * d.inner(&d);
                }
                phi_gap = st.phi.sub(&r.phi).l2_norm();
                Ok(())
            })?;
            if summary.records.len() != reference.len() {
                return Err(Error::Mismatch("ablation runs took different step counts".into()));
            }
            Ok((v_gap.sqrt(), phi_gap))
        })
        .collect();
    let gaps: Vec<(f64, f64)> = gaps.into_iter().collect::<Result<_>>()?;
    let v_gaps: Vec<f64> = gaps.iter().map(|g| g.0).collect();
    let phi_gaps: Vec<f64> = gaps.iter().map(|g| g.1).collect();

    let start = s.sim.initial_state(&s.phi0)?;
    let u0 = s.sim.forcing.at(&s.grid, 0.0);
    let zero = VectorField::zeros(&s.grid);
    let dt = cfg.sweep.stationary_dt;
    let positive: Vec<f64> = betas.iter().copied().filter(|b| *b > 0.0).collect();
    let stationary: Vec<Result<f64>> = positive
        .par_iter()
        .map(|&beta| {
            let params = FlowParams {
                regularization_beta: beta,
                ..s.sim.flow.clone()
            };
            let reg = Regularization { v_prev: &zero, dt };
            let sol = solve_brinkman(&start.phi, &start.mu, &u0, &s.sim.spec, &params, Some(reg))?;
            Ok(sol.v.sub(&start.v).l2_norm())
        })
        .collect();
    let stationary: Vec<f64> = stationary.into_iter().collect::<Result<_>>()?;
    let rates: Vec<f64> = stationary.iter().zip(&positive).map(|(g, b)| g / b).collect();
    let spread = if rates.iter().all(|r| *r == 0.0) { 1.0 } else { max_over_min(&rates) };

    let mut report = new_report("regularization_ablation", cfg);
    report.verdicts = vec![
        Verdict::holds("velocity_gap_decreasing", decreasing(&v_gaps)),
        Verdict::holds("phase_gap_decreasing", decreasing(&phi_gaps)),
        Verdict::new("stationary_rate_bounded", spread, Relation::AtMost, cfg.verdicts.rate_factor),
    ];
    let mut series = Series::new("betas", &["beta", "v_gap_L2Q", "phi_gap_T", "stationary_gap", "stationary_rate"]);
    for (i, (beta, (vg, pg))) in betas.iter().zip(&gaps).enumerate() {
        let (sg, sr) = if i < positive.len() {
            (stationary[i], rates[i])
        } else {
            (0.0, f64::NAN)
        };
        series.push(vec![*beta, *vg, *pg, sg, sr]);
    }
    report.series.push(series);
    report.scalars.push(("stationary_dt".into(), dt));
    Ok(report)
}
