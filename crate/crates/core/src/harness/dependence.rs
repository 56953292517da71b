use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolution::Simulation;
use crate::forcing::{Forcing, ForcingMode, ForcingSpec, TimeProfile};
use crate::io::report::{ExperimentReport, Relation, Series, Verdict};
use crate::spectral::ops::{h1_norm, h1_norm_vector, w_norm};
use crate::spectral::{ScalarField, VectorField};

use super::{aligned, fixed_steps, max_over_min, new_report, run_visiting, setup, Slice};

/// Discrete norms of a trajectory (or of a difference of trajectories):
/// `L²(V)` of `v`, `C⁰(V)` of `φ`, `L²(L²)` of `μ` and `L²(W)` of `w`, with
/// right-endpoint time quadrature.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Norms {
    v: f64,
    phi: f64,
    mu: f64,
    w: f64,
    u: f64,
}

impl Norms {
    fn add(&mut self, dt: f64, v: &VectorField, phi: &ScalarField, mu: &ScalarField, w: &ScalarField, u: f64) {
        self.phi = self.phi.max(h1_norm(phi));
        self.v += dt * h1_norm_vector(v).powi(2);
        self.mu += dt * mu.inner(mu);
        self.w += dt * w_norm(w).powi(2);
        self.u += dt * u;
    }

    fn finish(mut self) -> Self {
        self.v = self.v.sqrt();
        self.mu = self.mu.sqrt();
        self.w = self.w.sqrt();
        self.u = self.u.sqrt();
        self
    }

    fn sum(&self) -> f64 {
        self.v + self.phi + self.mu + self.w
    }
}

fn reference_norms(reference: &[Slice]) -> Norms {
    let mut n = Norms::default();
    for (k, s) in reference.iter().enumerate() {
        let dt = if k == 0 { 0.0 } else { s.dt_used };
        n.add(dt, &s.v, &s.phi, &s.mu, &s.w, 0.0);
    }
    n.finish()
}

/// Differences between the reference run (forcing `u₁`) and a run forced
/// by `u₂`.
fn difference_norms(
    sim: &Simulation,
    phi0: &ScalarField,
    reference: &[Slice],
    u1: &Forcing,
) -> Result<Norms> {
    let grid = phi0.grid();
    let mut n = Norms::default();
    let summary = run_visiting(sim, phi0, |k, s| {
        let r = aligned(reference, k, s)?;
        let du = u1.at(grid, s.t).sub(&sim.forcing.at(grid, s.t));
        let dt = if k == 0 { 0.0 } else { s.dt_used };
        n.add(
            dt,
            &s.v.sub(&r.v),
            &s.phi.sub(&r.phi),
            &s.mu.sub(&r.mu),
            &s.w.sub(&r.w),
            du.inner(&du),
        );
        Ok(())
    })?;
    if summary.records.len() != reference.len() {
        return Err(Error::Mismatch("compared runs took different step counts".into()));
    }
    Ok(n.finish())
}

/// Continuous dependence on the forcing: the ratio `R` of the solution
/// difference norms to `‖u₁ − u₂‖` over a family of perturbation
/// amplitudes, and a replay with `u₂ = u₁`.
pub fn exp_continuous_dependence(cfg: &RunConfig) -> Result<ExperimentReport> {
    if !cfg.model.eta.is_constant() || !cfg.model.mobility.is_constant() {
        return Err(Error::Precondition(
            "continuous dependence is stated for constant viscosity and mobility".into(),
        ));
    }
    if cfg.sweep.amplitudes.is_empty() {
        return Err(Error::Config("sweep.amplitudes must not be empty".into()));
    }
    let s = setup(cfg)?;
    let stepper = fixed_steps(&cfg.stepper);
    let base = Simulation::new(s.sim.spec.clone(), cfg.flow.clone(), stepper.clone(), s.sim.forcing.clone())?;
    let mut reference = Vec::new();
    run_visiting(&base, &s.phi0, |_, st| {
        reference.push(Slice {
            t: st.t,
            dt_used: st.dt_used,
            phi: st.phi.clone(),
            mu: st.mu.clone(),
            w: st.w.clone(),
            v: st.v.clone(),
        });
        Ok(())
    })?;
    let scale = reference_norms(&reference);

    let shape = ForcingMode {
        amplitude: 1.0,
        ..cfg.sweep.perturbation_or_default(s.grid.dims())
    };
    let shape = Forcing::build(
        &ForcingSpec::Modes {
            modes: vec![shape],
            divergence_free: true,
            profile: TimeProfile::Constant,
        },
        &s.grid,
    )?;
    let shape = shape.spatial().expect("modal forcing has a spatial part").clone();

    let replay = {
        let u2 = Forcing::build(&cfg.forcing, &s.grid)?;
        let sim = Simulation::new(s.sim.spec.clone(), cfg.flow.clone(), stepper.clone(), u2)?;
        difference_norms(&sim, &s.phi0, &reference, &base.forcing)?
    };
    let rel = |d: f64, sc: f64| if sc > 0.0 { d / sc } else { d };
    let uniqueness = [
        rel(replay.v, scale.v),
        rel(replay.phi, scale.phi),
        rel(replay.mu, scale.mu),
        rel(replay.w, scale.w),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let scans: Vec<Result<Norms>> = cfg
        .sweep
        .amplitudes
        .par_iter()
        .map(|&a| {
            let u2 = base.forcing.plus(&shape.scaled(a));
            let sim = Simulation::new(s.sim.spec.clone(), cfg.flow.clone(), stepper.clone(), u2)?;
            difference_norms(&sim, &s.phi0, &reference, &base.forcing)
        })
        .collect();
    let scans: Vec<Norms> = scans.into_iter().collect::<Result<_>>()?;
    let ratios: Vec<f64> = scans.iter().map(|n| n.sum() / n.u).collect();

    let v = &cfg.verdicts;
    let mut report = new_report("continuous_dependence", cfg);
    report.verdicts = vec![
        Verdict::new("uniqueness", uniqueness, Relation::AtMost, v.uniqueness_tol),
        Verdict::new("dependence_ratio_spread", max_over_min(&ratios), Relation::Below, v.dependence_factor),
    ];
    report.scalars.push((
        "K2_estimate".into(),
        ratios.iter().cloned().fold(0.0, f64::max),
    ));
    let mut series = Series::new(
        "amplitudes",
        &["amplitude", "u_L2Q", "v_L2V", "phi_C0V", "mu_L2L2", "w_L2W", "R"],
    );
    for ((a, n), r) in cfg.sweep.amplitudes.iter().zip(&scans).zip(&ratios) {
        series.push(vec![*a, n.u, n.v, n.phi, n.mu, n.w, *r]);
    }
    report.series.push(series);
    Ok(report)
}
