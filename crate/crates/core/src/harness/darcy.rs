use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{Simulation, StabilityNorms};
use crate::flow::{viscous_dissipation, viscous_stress_norm_sq, FlowMode, FlowParams};
use crate::io::report::{ExperimentReport, Relation, Series, Verdict};

use super::{aligned, decreasing, fixed_steps, max_over_min, new_report, run_visiting, setup, trajectory};

struct Level {
    eta_scale: f64,
    v_gap: f64,
    phi_gap: f64,
    viscous: f64,
    stress: f64,
    stationary_gap: f64,
    stability: StabilityNorms,
    max_flow_iters: usize,
}

/// Largest relative spread `(max − min)/max` of each stability norm
/// across levels.
fn stability_spread(levels: &[Level]) -> f64 {
    (0..4)
        .map(|i| {
            let vals: Vec<f64> = levels.iter().map(|l| l.stability.as_pairs()[i].1).collect();
            let max = vals.iter().cloned().fold(0.0, f64::max);
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if max > 0.0 {
                (max - min) / max
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Vanishing-viscosity sweep: the coupled evolution with viscosity
/// `eta0 · 2⁻ⁿ · η`, `n = 0..levels`, against a run in Darcy mode.
///
/// The stationary sub-mode compares the velocities at `t = 0`, where both
/// runs solve the flow for the same frozen `φ₀`.
pub fn exp_darcy_limit(cfg: &RunConfig, levels: usize) -> Result<ExperimentReport> {
    if levels < 4 {
        return Err(Error::Precondition(format!("the Darcy sweep needs at least 4 levels, got {levels}")));
    }
    let s = setup(cfg)?;
    let stepper = fixed_steps(&cfg.stepper);
    let darcy_sim = Simulation::new(
        s.sim.spec.clone(),
        FlowParams {
            mode: FlowMode::Darcy,
            ..cfg.flow.clone()
        },
        stepper.clone(),
        s.sim.forcing.clone(),
    )?;
    let (_, reference) = trajectory(&darcy_sim, &s.phi0)?;
    let phi_d = &reference.last().expect("trajectory holds the start").phi;

    let results: Vec<Result<Level>> = (0..levels)
        .into_par_iter()
        .map(|n| {
            let eta_scale = cfg.sweep.eta0 * 0.5f64.powi(n as i32);
            let mut spec = s.sim.spec.clone();
            spec.eta = spec.eta.scaled(eta_scale);
            let sim = Simulation::new(
                spec.clone(),
                FlowParams {
                    mode: FlowMode::Brinkman,
                    ..cfg.flow.clone()
                },
                stepper.clone(),
                s.sim.forcing.clone(),
            )?;
            let (mut v_gap, mut viscous, mut stress, mut stationary_gap) = (0.0, 0.0, 0.0, 0.0);
            let mut max_flow_iters = 0;
            let mut last_phi = None;
            let summary = run_visiting(&sim, &s.phi0, |k, st| {
                let r = aligned(&reference, k, st)?;
                let gap = st.v.sub(&r.v).inner(&st.v.sub(&r.v));
                if k == 0 {
                    stationary_gap = gap.sqrt();
                } else {
                    let dt = st.dt_used;
                    v_gap += dt * gap;
                    viscous += dt * viscous_dissipation(&st.v, &st.phi, &spec);
                    stress += dt * viscous_stress_norm_sq(&st.v, &st.phi, &spec);
                }
                max_flow_iters = max_flow_iters.max(st.flow.iterations);
                last_phi = Some(st.phi.clone());
                Ok(())
            })?;
            if summary.records.len() != reference.len() {
                return Err(Error::Mismatch("level and Darcy runs took different step counts".into()));
            }
            let phi_gap = last_phi.expect("start state visited").sub(phi_d).l2_norm();
            Ok(Level {
                eta_scale,
                v_gap: v_gap.sqrt(),
                phi_gap,
                viscous,
                stress,
                stationary_gap,
                stability: summary.stability,
                max_flow_iters,
            })
        })
        .collect();
    let levels: Vec<Level> = results.into_iter().collect::<Result<_>>()?;

    let v_gaps: Vec<f64> = levels.iter().map(|l| l.v_gap).collect();
    let phi_gaps: Vec<f64> = levels.iter().map(|l| l.phi_gap).collect();
    let viscous: Vec<f64> = levels.iter().map(|l| l.viscous).collect();
    let first = viscous[0];
    let ratio = |x: f64, base: f64| if base > 0.0 { x / base } else { 0.0 };
    let viscous_ratio = ratio(viscous[viscous.len() - 1], first);
    let stress_ratio = ratio(levels[levels.len() - 1].stress, levels[0].stress);
    let rates: Vec<f64> = levels.iter().map(|l| l.stationary_gap / l.eta_scale).collect();
    let rate_spread = if rates.iter().all(|r| *r == 0.0) { 1.0 } else { max_over_min(&rates) };

    let v = &cfg.verdicts;
    let mut report = new_report("darcy_limit", cfg);
    report.verdicts = vec![
        Verdict::holds("velocity_gap_decreasing", decreasing(&v_gaps)),
        Verdict::holds("viscous_dissipation_decreasing", decreasing(&viscous)),
        Verdict::new("viscous_dissipation_ratio", viscous_ratio, Relation::Below, v.darcy_dissipation_ratio),
        Verdict::holds("phase_gap_decreasing", decreasing(&phi_gaps)),
        Verdict::new("stability_uniform", stability_spread(&levels), Relation::Below, v.stability_spread),
        Verdict::new("stationary_rate_bounded", rate_spread, Relation::AtMost, v.rate_factor),
    ];
    report.scalars.push(("viscous_stress_ratio".into(), stress_ratio));
    report.scalars.push(("darcy_steps".into(), (reference.len() - 1) as f64));
    let mut series = Series::new(
        "levels",
        &[
            "n",
            "eta_scale",
            "v_gap_L2Q",
            "phi_gap_T",
            "int_eta_Dv_sq",
            "int_eta_Dv_norm_sq",
            "stationary_gap",
            "stationary_rate",
            "max_phi_W",
            "int_grad_mu_sq",
            "int_v_L2_sq",
            "int_v_V_sq",
            "max_flow_iters",
        ],
    );
    for (n, (l, rate)) in levels.iter().zip(&rates).enumerate() {
        let st = l.stability.as_pairs();
        series.push(vec![
            n as f64,
            l.eta_scale,
            l.v_gap,
            l.phi_gap,
            l.viscous,
            l.stress,
            l.stationary_gap,
            *rate,
            st[0].1,
            st[1].1,
            st[2].1,
            st[3].1,
            l.max_flow_iters as f64,
        ]);
    }
    report.series.push(series);
    Ok(report)
}
