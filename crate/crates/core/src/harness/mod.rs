//! Experiment drivers. Each returns an [`ExperimentReport`] whose verdict
//! thresholds come from the `[verdicts]` section of the configuration.
//!
//! Sweeps compare trajectories step by step, so they run with the
//! configured `dt` held fixed (the adaptive controller is switched off).
//! Independent sweep members run on the rayon pool and are reduced in
//! member order.

mod ablation;
mod checks;
mod convergence;
mod darcy;
mod dependence;
mod energy;
mod galerkin;

pub use ablation::exp_regularization_ablation;
pub use checks::{check_config, check_snapshot, structural_identities, variational_check, VariationalCheck};
pub use convergence::{exp_self_convergence, exp_self_convergence_linear, exp_self_convergence_uniform};
pub use darcy::exp_darcy_limit;
pub use dependence::exp_continuous_dependence;
pub use energy::exp_energy_decay;
pub use galerkin::exp_galerkin_refinement;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::{run, RunSummary, SimState, Simulation, StepRecord, StepperConfig};
use crate::forcing::{build_initial, Forcing};
use crate::io::report::ExperimentReport;
use crate::spectral::{Grid, ScalarField, VectorField};

/// Grid, initial data and simulation built from a configuration.
pub struct Setup {
    pub grid: Grid,
    pub phi0: ScalarField,
    pub sim: Simulation,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    let grid = cfg.grid.build()?;
    let forcing = Forcing::build(&cfg.forcing, &grid)?;
    let phi0 = build_initial(&cfg.initial, &grid, cfg.seed, None)?;
    let sim = Simulation::new(cfg.model.clone(), cfg.flow.clone(), cfg.stepper.clone(), forcing)?;
    Ok(Setup { grid, phi0, sim })
}

pub fn fixed_steps(stepper: &StepperConfig) -> StepperConfig {
    let mut s = stepper.clone();
    s.adapt.enabled = false;
    s
}

/// Report header: environment block and parameter echo.
pub fn new_report(name: &str, cfg: &RunConfig) -> ExperimentReport {
    let mut r = ExperimentReport::new(name);
    let g = &cfg.grid;
    r.environment = vec![
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("seed".into(), cfg.seed.to_string()),
        (
            "grid".into(),
            format!(
                "{} on {}",
                g.sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("x"),
                g.lengths.iter().map(|l| format!("{l}")).collect::<Vec<_>>().join("x")
            ),
        ),
        ("threads".into(), rayon::current_num_threads().to_string()),
    ];
    r.parameters = cfg.to_text();
    r
}

/// The part of an accepted state that sweeps compare.
#[derive(Clone, Debug)]
pub(crate) struct Slice {
    pub t: f64,
    pub dt_used: f64,
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub w: ScalarField,
    pub v: VectorField,
}

impl Slice {
    fn of(s: &SimState) -> Self {
        Slice {
            t: s.t,
            dt_used: s.dt_used,
            phi: s.phi.clone(),
            mu: s.mu.clone(),
            w: s.w.clone(),
            v: s.v.clone(),
        }
    }
}

/// Runs to `t_final` and calls `visit` with the index and state of every
/// accepted step (the starting state has index 0).
pub(crate) fn run_visiting(
    sim: &Simulation,
    phi0: &ScalarField,
    mut visit: impl FnMut(usize, &SimState) -> Result<()>,
) -> Result<RunSummary> {
    let start = sim.initial_state(phi0)?;
    let mut k = 0;
    let mut obs = |_: &StepRecord, s: Option<&SimState>| -> Result<()> {
        if let Some(s) = s {
            visit(k, s)?;
            k += 1;
        }
        Ok(())
    };
    run(sim, start, &mut obs)
}

/// Runs and keeps every accepted slice.
pub(crate) fn trajectory(sim: &Simulation, phi0: &ScalarField) -> Result<(RunSummary, Vec<Slice>)> {
    let mut slices = Vec::new();
    let summary = run_visiting(sim, phi0, |_, s| {
        slices.push(Slice::of(s));
        Ok(())
    })?;
    Ok((summary, slices))
}

/// The reference slice matching step `k` of a compared run.
pub(crate) fn aligned<'a>(reference: &'a [Slice], k: usize, s: &SimState) -> Result<&'a Slice> {
    let r = reference
        .get(k)
        .ok_or_else(|| Error::Mismatch(format!("compared run has more steps than the reference ({k})")))?;
    if (r.t - s.t).abs() > 1e-12 * s.t.abs().max(1.0) {
        return Err(Error::Mismatch(format!(
            "time grids differ at step {k}: {} vs {}",
            r.t, s.t
        )));
    }
    Ok(r)
}

pub(crate) fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Strictly decreasing, except that a run of exact zeros counts as
/// decreasing (identical trajectories).
pub(crate) fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

pub(crate) fn max_over_min(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotonicity_helpers() {
        assert!(strictly_decreasing(&[3.0, 2.0, 0.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        assert!(strictly_decreasing(&[1.0]));
        assert!(decreasing(&[1.0, 0.0, 0.0]));
        assert!(!decreasing(&[1.0, 1.0]));
        assert_eq!(max_over_min(&[2.0, 1.0, 4.0]), 4.0);
    }
}
