use std::f64::consts::PI;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{run, Silent, Simulation};
use crate::flow::{FlowMode, FlowParams};
use crate::forcing::Forcing;
use crate::io::report::{ExperimentReport, Relation, Series, Verdict};
use crate::model::{ModelSpec, PotentialFamily, PotentialSpec, SourceShape};
use crate::spectral::{Grid, ScalarField};

use super::{new_report, setup};

fn check_dts(cfg: &RunConfig, dts: &[f64]) -> Result<()> {
    if dts.len() < 3 {
        return Err(Error::Config(format!("need at least 3 step sizes, got {}", dts.len())));
    }
    if !dts.windows(2).all(|w| (w[1] - 0.5 * w[0]).abs() <= 1e-12 * w[0]) {
        return Err(Error::Config(format!("step sizes must halve successively, got {dts:?}")));
    }
    if cfg.stepper.adapt.enabled {
        return Err(Error::Precondition(
            "self-convergence needs stepper.adaptive = false".into(),
        ));
    }
    Ok(())
}

/// Final `φ` of `sim` with each step size.
fn finals(sim: &Simulation, phi0: &ScalarField, dts: &[f64]) -> Result<Vec<ScalarField>> {
    let out: Vec<Result<ScalarField>> = dts
        .par_iter()
        .map(|&dt| {
            let mut stepper = sim.stepper.clone();
            stepper.dt = dt;
            stepper.dt_min = stepper.dt_min.min(dt);
            stepper.dt_max = stepper.dt_max.max(dt);
            let s = Simulation::new(sim.spec.clone(), sim.flow.clone(), stepper, sim.forcing.clone())?;
            Ok(run(&s, s.initial_state(phi0)?, &mut Silent)?.final_state.phi)
        })
        .collect();
    out.into_iter().collect()
}

/// `log₂` of successive error ratios.
fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn order_verdicts(report: &mut ExperimentReport, cfg: &RunConfig, orders: &[f64]) {
    let v = &cfg.verdicts;
    let lo = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    report.verdicts.push(Verdict::new("order_at_least", lo, Relation::AtLeast, v.order_min));
    report.verdicts.push(Verdict::new("order_at_most", hi, Relation::AtMost, v.order_max));
}

/// Richardson orders `log₂(‖φ_dt − φ_{dt/2}‖ / ‖φ_{dt/2} − φ_{dt/4}‖)` of
/// the configured run.
pub fn exp_self_convergence(cfg: &RunConfig, dts: &[f64]) -> Result<ExperimentReport> {
    check_dts(cfg, dts)?;
    let s = setup(cfg)?;
    let phis = finals(&s.sim, &s.phi0, dts)?;
    let diffs: Vec<f64> = phis.windows(2).map(|w| w[0].sub(&w[1]).l2_norm()).collect();
    let p = orders(&diffs);
    let mut report = new_report("self_convergence", cfg);
    order_verdicts(&mut report, cfg, &p);
    let mut series = Series::new("dts", &["dt", "difference_to_next", "richardson_order"]);
    for (i, dt) in dts.iter().enumerate() {
        series.push(vec![
            *dt,
            diffs.get(i).copied().unwrap_or(f64::NAN),
            p.get(i).copied().unwrap_or(f64::NAN),
        ]);
    }
    report.series.push(series);
    Ok(report)
}

fn exact_study(
    name: &str,
    cfg: &RunConfig,
    sim: &Simulation,
    phi0: &ScalarField,
    exact: &ScalarField,
    dts: &[f64],
) -> Result<ExperimentReport> {
    let phis = finals(sim, phi0, dts)?;
    let errors: Vec<f64> = phis.iter().map(|p| p.sub(exact).l2_norm()).collect();
    let diffs: Vec<f64> = phis.windows(2).map(|w| w[0].sub(&w[1]).l2_norm()).collect();
    let p = orders(&errors);
    let richardson = orders(&diffs);
    let mut report = new_report(name, cfg);
    order_verdicts(&mut report, cfg, &p);
    let mut series = Series::new("dts", &["dt", "error", "observed_order", "richardson_order"]);
    for (i, dt) in dts.iter().enumerate() {
        series.push(vec![
            *dt,
            errors[i],
            p.get(i).copied().unwrap_or(f64::NAN),
            richardson.get(i).copied().unwrap_or(f64::NAN),
        ]);
    }
    report.series.push(series);
    Ok(report)
}

fn cosine(grid: &Grid, m: &[i64], amplitude: f64) -> (ScalarField, f64) {
    let lengths = grid.lengths().to_vec();
    let k2: f64 = m
        .iter()
        .zip(&lengths)
        .map(|(m, l)| (2.0 * PI * *m as f64 / l).powi(2))
        .sum();
    let f = ScalarField::from_fn(grid, |x| {
        let phase: f64 = x.iter().zip(m).zip(&lengths).map(|((x, m), l)| 2.0 * PI * *m as f64 * x / l).sum();
        amplitude * phase.cos()
    });
    (f, k2)
}

/// Linear sub-problem: `F ≡ 0`, `ν = 0`, no source, no flow. Each Fourier
/// mode decays like `exp(−m|k|⁶t)`; errors are measured against that.
pub fn exp_self_convergence_linear(cfg: &RunConfig, dts: &[f64]) -> Result<ExperimentReport> {
    check_dts(cfg, dts)?;
    if !cfg.model.mobility.is_constant() {
        return Err(Error::Precondition("the linear study needs a constant mobility".into()));
    }
    let grid = cfg.grid.build()?;
    let spec = ModelSpec {
        potential: PotentialSpec::new(PotentialFamily::Zero),
        nu: 0.0,
        sigma: 0.0,
        h: SourceShape::none(),
        ..cfg.model.clone()
    };
    let m = spec.mobility.eval(0.0);
    let t = cfg.stepper.t_final;
    let mut axis1 = vec![0; grid.dims()];
    axis1[0] = 1;
    let mut diag = vec![0; grid.dims()];
    diag[0] = 1;
    diag[1] = 1;
    let (a, ka) = cosine(&grid, &axis1, 0.1);
    let (b, kb) = cosine(&grid, &diag, 0.1);
    let phi0 = a.add(&b);
    let exact = a
        .scaled((-m * ka.powi(3) * t).exp())
        .add(&b.scaled((-m * kb.powi(3) * t).exp()));
    let flow = FlowParams {
        mode: FlowMode::Frozen,
        ..cfg.flow.clone()
    };
    let sim = Simulation::new(spec, flow, cfg.stepper.clone(), Forcing::zero())?;
    exact_study("self_convergence_linear", cfg, &sim, &phi0, &exact, dts)
}

/// Uniform state with a linear decay source: `φ(t) = exp(−σt) φ₀`.
pub fn exp_self_convergence_uniform(cfg: &RunConfig, dts: &[f64]) -> Result<ExperimentReport> {
    check_dts(cfg, dts)?;
    if !(cfg.model.sigma > 0.0) {
        return Err(Error::Precondition("the uniform-source study needs sigma > 0".into()));
    }
    let grid = cfg.grid.build()?;
    let spec = ModelSpec {
        h: SourceShape::none(),
        ..cfg.model.clone()
    };
    let c = 0.5;
    let phi0 = ScalarField::constant(&grid, c);
    let exact = ScalarField::constant(&grid, c * (-spec.sigma * cfg.stepper.t_final).exp());
    let sim = Simulation::new(spec, cfg.flow.clone(), cfg.stepper.clone(), Forcing::zero())?;
    exact_study("self_convergence_uniform", cfg, &sim, &phi0, &exact, dts)
}
