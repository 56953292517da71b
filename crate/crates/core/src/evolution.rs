//! Time integration of the coupled phase-field / flow system.
//!
//! One step of the stabilized IMEX scheme reads, mode by mode,
//!
//! `φ̂ⁿ⁺¹ = φ̂ⁿ + dt · R̂ⁿ / (1 + dt · m̄ · (A|k|⁶ + κ|k|²))`,
//!
//! with `R = div(m(φ)∇μ) − v·∇φ + S(φ)` evaluated at the old state. For a
//! linear problem with constant mobility and `A = 1` this is backward Euler.
//! After the update `w`, `μ`, the velocity (quasi-static, forced by `u(tⁿ⁺¹)`)
//! and the energy are re-derived from `φⁿ⁺¹`.

use num_complex::Complex64;

use crate::energetics::{chemical_potentials, compute_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::flow::{solve_flow, FlowDiagnostics, FlowMode, FlowParams, Regularization};
use crate::forcing::Forcing;
use crate::model::{eval_source, ModelSpec};
use crate::spectral::dealias::{pad, pad_spectrum, padded_integral, truncate_padded};
use crate::spectral::ops::{
    advect, derivative_spectrum, galerkin_spectrum, gradient_norm_sq, h1_norm_vector, laplacian_norm_sq,
    w_norm,
};
use crate::spectral::{galerkin_project, ScalarField, VectorField};

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptConfig {
    /// Whether the energy-based controller is active at all.
    pub enabled: bool,
    /// Largest tolerated energy increase per step when sources are inactive.
    pub energy_increase_tol: f64,
    pub shrink: f64,
    pub grow: f64,
    /// Number of consecutive accepted steps before `dt` grows.
    pub grow_after: u32,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            enabled: true,
            energy_increase_tol: 1e-8,
            shrink: 0.5,
            grow: 1.1,
            grow_after: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Coefficient of the implicit `m̄|k|⁶` term.
    pub stab_a: f64,
    /// Coefficient of the implicit `m̄|k|²` term.
    pub kappa: f64,
    pub adapt: AdaptConfig,
    pub t_final: f64,
    /// Galerkin cutoff on the integer mode-index magnitude.
    pub cutoff: Option<f64>,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt: 1e-4,
            dt_min: 1e-10,
            dt_max: 1e-2,
            stab_a: 1.0,
            kappa: 0.0,
            adapt: AdaptConfig::default(),
            t_final: 1.0,
            cutoff: None,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            problems.push(format!(
                "need 0 < dt_min ≤ dt ≤ dt_max, got {} ≤ {} ≤ {}",
                self.dt_min, self.dt, self.dt_max
            ));
        }
        if !(self.stab_a >= 0.0) || !(self.kappa >= 0.0) {
            problems.push("stabilization coefficients must be nonnegative".into());
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            problems.push(format!("t_final must be finite and nonnegative, got {}", self.t_final));
        }
        let a = &self.adapt;
        if !(a.shrink > 0.0 && a.shrink < 1.0) || !(a.grow >= 1.0) || !(a.energy_increase_tol >= 0.0) {
            problems.push("adaptivity needs 0 < shrink < 1, grow ≥ 1, tolerance ≥ 0".into());
        }
        if let Some(c) = self.cutoff {
            if !(c >= 1.0) {
                problems.push(format!("Galerkin cutoff must be ≥ 1, got {c}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// One time slice `(φ, μ, w, v)` plus cached diagnostics.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    /// Step size the controller will try next.
    pub dt: f64,
    /// Step size that produced this state (0 for the initial state).
    pub dt_used: f64,
    /// Consecutive accepted steps since the last growth or rejection.
    pub streak: u32,
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub w: ScalarField,
    pub v: VectorField,
    pub pressure: Option<ScalarField>,
    pub energy: EnergyBreakdown,
    /// `(1/|Ω|)∫(f'(φ) + ν) w`.
    pub mean_mu_identity: f64,
    pub flow: FlowDiagnostics,
}

/// Scalar summary of one attempted step; one CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub e_total: f64,
    pub e_willmore: f64,
    pub e_gl: f64,
    pub mean_phi: f64,
    pub mean_s: f64,
    pub mean_mu: f64,
    pub mean_mu_identity: f64,
    pub norm_phi: f64,
    pub norm_lap_phi: f64,
    pub norm_grad_mu: f64,
    pub norm_v: f64,
    pub flow_iters: usize,
    pub flow_residual: f64,
    pub accepted: bool,
    /// `∫ m(φ)|∇μ|²`.
    pub diss_mu: f64,
    /// `∫ (η(φ)|Dv|² + λ(φ)|v|²)`.
    pub diss_v: f64,
    pub flow_mode: FlowMode,
    pub alpha: f64,
}

/// Running maxima and time integrals behind the stability estimate.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StabilityNorms {
    /// `max_t (‖φ‖² + ‖Δφ‖²)^½`.
    pub max_phi_w: f64,
    /// `∫₀ᵀ ‖∇μ‖²`.
    pub int_grad_mu_sq: f64,
    /// `∫₀ᵀ ‖v‖²`.
    pub int_v_sq: f64,
    /// `∫₀ᵀ (‖v‖² + ‖∇v‖²)`.
    pub int_v_h1_sq: f64,
}

impl StabilityNorms {
    pub fn observe_initial(&mut self, s: &SimState) {
        self.max_phi_w = self.max_phi_w.max(w_norm(&s.phi));
    }

    /// Right-endpoint accumulation over an accepted step.
    pub fn observe_step(&mut self, s: &SimState) {
        self.max_phi_w = self.max_phi_w.max(w_norm(&s.phi));
        self.int_grad_mu_sq += s.dt_used * gradient_norm_sq(&s.mu);
        self.int_v_sq += s.dt_used * s.v.inner(&s.v);
        self.int_v_h1_sq += s.dt_used * h1_norm_vector(&s.v).powi(2);
    }

    pub fn as_pairs(&self) -> [(&'static str, f64); 4] {
        [
            ("max_phi_W", self.max_phi_w),
            ("int_grad_mu_sq", self.int_grad_mu_sq),
            ("int_v_L2_sq", self.int_v_sq),
            ("int_v_V_sq", self.int_v_h1_sq),
        ]
    }
}

/// Mean of `φ` and of `S(φ)` at every accepted state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MassLedger {
    pub t: Vec<f64>,
    pub mean_phi: Vec<f64>,
    pub mean_source: Vec<f64>,
}

impl MassLedger {
    pub fn push(&mut self, rec: &StepRecord) {
        self.t.push(rec.t);
        self.mean_phi.push(rec.mean_phi);
        self.mean_source.push(rec.mean_s);
    }

    /// `max_k |(φ̄ₖ₊₁ − φ̄ₖ)/dt − mean S(φₖ)|`.
    pub fn max_balance_defect(&self) -> f64 {
        (1..self.t.len())
            .map(|k| {
                let dt = self.t[k] - self.t[k - 1];
                ((self.mean_phi[k] - self.mean_phi[k - 1]) / dt - self.mean_source[k - 1]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max_k |φ̄ₖ₊₁ − φ̄ₖ|`.
    pub fn max_mean_jump(&self) -> f64 {
        self.mean_phi
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max)
    }
}

/// Outcome of the step-size controller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtDecision {
    pub accept: bool,
    pub next_dt: f64,
    pub streak: u32,
}

/// Accept or reject a step from the energy change and propose the next `dt`.
pub fn adapt_dt(
    energy_before: f64,
    energy_after: f64,
    sources_active: bool,
    dt: f64,
    streak: u32,
    cfg: &StepperConfig,
) -> DtDecision {
    let a = &cfg.adapt;
    if !a.enabled {
        return DtDecision {
            accept: true,
            next_dt: dt,
            streak,
        };
    }
    if !sources_active && !(energy_after <= energy_before + a.energy_increase_tol) {
        return DtDecision {
            accept: false,
            next_dt: dt * a.shrink,
            streak: 0,
        };
    }
    let streak = streak + 1;
    if streak >= a.grow_after {
        DtDecision {
            accept: true,
            next_dt: (dt * a.grow).min(cfg.dt_max),
            streak: 0,
        }
    } else {
        DtDecision {
            accept: true,
            next_dt: dt.min(cfg.dt_max),
            streak,
        }
    }
}

/// Dealiased `v·∇φ`.
pub fn transport_term(v: &VectorField, phi: &ScalarField) -> ScalarField {
    advect(v, phi)
}

fn weighted(phi_grid: &crate::spectral::Grid, spectrum: &[Complex64], weight: &[f64]) -> Vec<Complex64> {
    let mut vals = pad_spectrum(phi_grid, spectrum);
    for (v, w) in vals.iter_mut().zip(weight) {
        *v *= w;
    }
    truncate_padded(phi_grid, &vals)
}

/// Spectrum of `div(m(φ)∇μ)`.
fn mobility_divergence(spec: &ModelSpec, phi: &ScalarField, mu: &ScalarField) -> Vec<Complex64> {
    let grid = phi.grid();
    if spec.mobility.is_constant() {
        let m = spec.mobility.eval(0.0);
        return mu
            .spectrum()
            .iter()
            .zip(grid.derivative_k_squared())
            .map(|(c, k2)| c * (-m * k2))
            .collect();
    }
    let m_m: Vec<f64> = pad(phi).iter().map(|&s| spec.mobility.eval(s)).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for axis in 0..grid.dims() {
        let flux = weighted(grid, &derivative_spectrum(grid, mu.spectrum(), axis), &m_m);
        for (a, d) in acc.iter_mut().zip(derivative_spectrum(grid, &flux, axis)) {
            *a += d;
        }
    }
    acc
}

/// `∫ m(φ)|∇μ|²` by padded-grid quadrature.
pub fn mobility_dissipation(spec: &ModelSpec, phi: &ScalarField, mu: &ScalarField) -> f64 {
    let grid = phi.grid();
    let phi_m = pad(phi);
    let mut density = vec![0.0; phi_m.len()];
    for axis in 0..grid.dims() {
        let g = pad_spectrum(grid, &derivative_spectrum(grid, mu.spectrum(), axis));
        for (d, x) in density.iter_mut().zip(g) {
            *d += x * x;
        }
    }
    for (d, s) in density.iter_mut().zip(&phi_m) {
        *d *= spec.mobility.eval(*s);
    }
    padded_integral(grid, &density)
}

/// Everything needed to advance states: model, flow and stepper settings
/// and the forcing.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub spec: ModelSpec,
    pub flow: FlowParams,
    pub stepper: StepperConfig,
    pub forcing: Forcing,
}

impl Simulation {
    pub fn new(spec: ModelSpec, flow: FlowParams, stepper: StepperConfig, forcing: Forcing) -> Result<Self> {
        stepper.validate()?;
        flow.validate()?;
        let flow = FlowParams {
            galerkin_cutoff: stepper.cutoff,
            ..flow
        };
        Ok(Simulation {
            spec,
            flow,
            stepper,
            forcing,
        })
    }

    /// True when the energy law carries source terms (`σ`, `h` or `u` nonzero).
    pub fn sources_active(&self) -> bool {
        self.spec.has_source() || !self.forcing.is_zero()
    }

    /// State at `t = 0` from `φ₀`; the velocity comes from a stationary solve.
    pub fn initial_state(&self, phi0: &ScalarField) -> Result<SimState> {
        let phi = galerkin_project(phi0, self.stepper.cutoff).detached();
        self.derive(phi, 0.0, 0, self.stepper.dt, 0.0, 0, None)
    }

    /// Re-derives `w`, `μ`, `v` and the energy from `φ`.
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        &self,
        phi: ScalarField,
        t: f64,
        step: u64,
        dt: f64,
        dt_used: f64,
        streak: u32,
        v_prev: Option<&VectorField>,
    ) -> Result<SimState> {
        let grid = phi.grid().clone();
        let cutoff = self.stepper.cutoff;
        let pots = chemical_potentials(&phi, &self.spec);
        let w = galerkin_project(&pots.w, cutoff).detached();
        let mu = galerkin_project(&pots.mu, cutoff).detached();
        let u = self.forcing.at(&grid, t);
        let regularization = v_prev.map(|v| Regularization { v_prev: v, dt: dt_used });
        let sol = solve_flow(&phi, &mu, &u, &self.spec, &self.flow, regularization)?;
        let v = VectorField::from_components_flagged(
            sol.v.into_components().into_iter().map(|c| c.detached()).collect(),
            true,
        );
        let energy = compute_energy(&phi, &self.spec);
        Ok(SimState {
            t,
            step,
            dt,
            dt_used,
            streak,
            phi,
            mu,
            w,
            v,
            pressure: sol.pressure.map(|p| p.detached()),
            energy,
            mean_mu_identity: pots.mean_mu,
            flow: sol.diagnostics,
        })
    }

    /// Updated `φ` after one step of size `dt` from `state`.
    pub fn advance_phi(&self, state: &SimState, dt: f64) -> ScalarField {
        let grid = state.phi.grid();
        let flux = mobility_divergence(&self.spec, &state.phi, &state.mu);
        let transport = transport_term(&state.v, &state.phi);
        let source = eval_source(&self.spec, &state.phi);
        let mut rhs: Vec<Complex64> = flux
            .iter()
            .zip(transport.spectrum())
            .zip(source.spectrum())
            .map(|((f, a), s)| f - a + s)
            .collect();
        galerkin_spectrum(grid, &mut rhs, self.stepper.cutoff);
        let m_bar = self.spec.mobility.midpoint();
        let (a, kappa) = (self.stepper.stab_a, self.stepper.kappa);
        let next: Vec<Complex64> = state
            .phi
            .spectrum()
            .iter()
            .zip(&rhs)
            .zip(grid.derivative_k_squared())
            .map(|((p, r), &k2)| p + r * (dt / (1.0 + dt * m_bar * (a * k2 * k2 * k2 + kappa * k2))))
            .collect();
        ScalarField::from_values_unchecked(grid, grid.inverse(&next))
    }

    /// One step of size `dt` without step-size control.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let phi = self.advance_phi(state, dt);
        let v_prev = (self.flow.regularization_beta > 0.0).then_some(&state.v);
        self.derive(phi, state.t + dt, state.step + 1, state.dt, dt, state.streak, v_prev)
    }

    pub fn record(&self, s: &SimState, accepted: bool) -> StepRecord {
        StepRecord {
            step: s.step,
            t: s.t,
            dt: s.dt_used,
            e_total: s.energy.total,
            e_willmore: s.energy.willmore,
            e_gl: s.energy.ginzburg_landau,
            mean_phi: s.phi.mean(),
            mean_s: eval_source(&self.spec, &s.phi).mean(),
            mean_mu: s.mu.mean(),
            mean_mu_identity: s.mean_mu_identity,
            norm_phi: s.phi.l2_norm(),
            norm_lap_phi: laplacian_norm_sq(&s.phi).sqrt(),
            norm_grad_mu: gradient_norm_sq(&s.mu).sqrt(),
            norm_v: s.v.l2_norm(),
            flow_iters: s.flow.iterations,
            flow_residual: s.flow.final_residual,
            accepted,
            diss_mu: mobility_dissipation(&self.spec, &s.phi, &s.mu),
            diss_v: s.flow.dissipation,
            flow_mode: s.flow.mode,
            alpha: s.flow.coercivity_alpha,
        }
    }
}

/// Result of [`run`].
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub final_state: SimState,
    /// Records of the starting state and every accepted step.
    pub records: Vec<StepRecord>,
    pub rejected: usize,
    pub stability: StabilityNorms,
    pub ledger: MassLedger,
}

/// Receives every attempted step. Accepted steps come with their state.
pub trait Observer {
    fn observe(&mut self, record: &StepRecord, state: Option<&SimState>) -> Result<()>;
}

impl<F: FnMut(&StepRecord, Option<&SimState>) -> Result<()>> Observer for F {
    fn observe(&mut self, record: &StepRecord, state: Option<&SimState>) -> Result<()> {
        self(record, state)
    }
}

/// Observer that ignores everything.
pub struct Silent;

impl Observer for Silent {
    fn observe(&mut self, _: &StepRecord, _: Option<&SimState>) -> Result<()> {
        Ok(())
    }
}

/// Integrates from `start` to `sim.stepper.t_final`. The starting state is
/// reported to the observer as an accepted record.
pub fn run(sim: &Simulation, start: SimState, observer: &mut dyn Observer) -> Result<RunSummary> {
    let cfg = &sim.stepper;
    let sources = sim.sources_active();
    let mut stability = StabilityNorms::default();
    let mut ledger = MassLedger::default();
    let mut records = Vec::new();
    let mut rejected = 0;

    let first = sim.record(&start, true);
    observer.observe(&first, Some(&start))?;
    stability.observe_initial(&start);
    ledger.push(&first);
    records.push(first);

    let t_final = cfg.t_final;
    let mut state = start;
    loop {
        let remaining = t_final - state.t;
        if remaining <= 1e-12 * t_final.max(1.0) {
            break;
        }
        let mut dt = state.dt.min(remaining);
        if remaining - dt < 1e-9 * dt {
            dt = remaining;
        }
        let mut candidate = sim.step(&state, dt)?;
        if dt == remaining {
            candidate.t = t_final;
        }
        let decision = adapt_dt(
            state.energy.total,
            candidate.energy.total,
            sources,
            state.dt,
            state.streak,
            cfg,
        );
        if !decision.accept {
            rejected += 1;
            observer.observe(&sim.record(&candidate, false), None)?;
            if decision.next_dt < cfg.dt_min {
                return Err(Error::StepFailure {
                    t: state.t,
                    dt: decision.next_dt,
                    dt_min: cfg.dt_min,
                    state: Box::new(state),
                });
            }
            state.dt = decision.next_dt;
            state.streak = decision.streak;
            continue;
        }
        candidate.dt = decision.next_dt;
        candidate.streak = decision.streak;
        let rec = sim.record(&candidate, true);
        observer.observe(&rec, Some(&candidate))?;
        stability.observe_step(&candidate);
        ledger.push(&rec);
        records.push(rec);
        state = candidate;
    }
    Ok(RunSummary {
        final_state: state,
        records,
        rejected,
        stability,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SourceShape;
    use crate::spectral::{leray_project, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sim(spec: ModelSpec, mode: FlowMode, stepper: StepperConfig) -> Simulation {
        Simulation::new(
            spec,
            FlowParams {
                mode,
                ..FlowParams::default()
            },
            stepper,
            Forcing::zero(),
        )
        .unwrap()
    }

    #[test]
    fn uniform_state_with_decay_source() {
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let (c, sigma, dt) = (0.6, 0.8, 0.01);
        let spec = ModelSpec {
            sigma,
            ..ModelSpec::default()
        };
        let s = sim(spec, FlowMode::Brinkman, StepperConfig { dt, ..StepperConfig::default() });
        let st = s.initial_state(&ScalarField::constant(&g, c)).unwrap();
        let next = s.step(&st, dt).unwrap();
        let expected = c - dt * sigma * c;
        assert!(next.phi.values().iter().all(|v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn adapt_policy() {
        let cfg = StepperConfig {
            dt_max: 1.0,
            ..StepperConfig::default()
        };
        let d = adapt_dt(1.0, 0.5, false, 0.1, 0, &cfg);
        assert!(d.accept && (d.next_dt - 0.11).abs() < 1e-15);
        let d = adapt_dt(1.0, 1.1, false, 0.1, 0, &cfg);
        assert!(!d.accept && d.next_dt == 0.05);
        let d = adapt_dt(1.0, 1.1, true, 0.1, 0, &cfg);
        assert!(d.accept);
        let d = adapt_dt(1.0, 0.5, false, 0.99, 0, &cfg);
        assert_eq!(d.next_dt, 1.0);
    }

    #[test]
    fn transport_cases() {
        let g = Grid::uniform(2, 32, 1.0).unwrap();
        let c = [0.7, -0.2];
        let v = VectorField::from_components(vec![ScalarField::constant(&g, c[0]), ScalarField::constant(&g, c[1])])
            .unwrap();
        assert!(transport_term(&v, &ScalarField::constant(&g, 2.0)).max_abs() < 1e-15);
        let phi = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos());
        let t = transport_term(&v, &phi);
        for (x, val) in g.coordinates().zip(t.values()) {
            assert!((val + 2.0 * PI * c[0] * (2.0 * PI * x[0]).sin()).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rand_field = |rng: &mut ChaCha8Rng| {
            let vals = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            crate::spectral::truncate_modes(&ScalarField::from_values(&g, vals).unwrap(), 2.0 * PI * 8.0)
        };
        let v = leray_project(&VectorField::from_components(vec![rand_field(&mut rng), rand_field(&mut rng)]).unwrap());
        let phi = rand_field(&mut rng);
        let t = transport_term(&v, &phi);
        let scale = v.l2_norm() * phi.l2_norm() * 2.0 * PI * 8.0;
        assert!(t.mean().abs() < 1e-10 * scale);
        assert!(t.inner(&phi).abs() < 1e-9 * scale * phi.l2_norm());
    }

    #[test]
    fn linear_growth_rate_matches_dispersion_relation() {
        let g = Grid::uniform(2, 32, 2.0 * PI).unwrap();
        let spec = ModelSpec {
            nu: 0.0,
            ..ModelSpec::default()
        };
        let dt = 1e-6;
        let s = sim(spec, FlowMode::Brinkman, StepperConfig { dt, ..StepperConfig::default() });
        let eps = 1e-6;
        let phi0 = ScalarField::from_fn(&g, |x| eps * (x[0].cos() + (2.0 * x[1]).cos() + (x[0] + x[1]).cos()));
        let st = s.initial_state(&phi0).unwrap();
        let next = s.step(&st, dt).unwrap();
        for (flat, k2) in [(32usize, 1.0f64), (2, 4.0), (32 + 1, 2.0)] {
            let rate = ((next.phi.spectrum()[flat] / st.phi.spectrum()[flat]).re - 1.0) / dt;
            // Oracle: d/dt φ̂ = −m k² (k² − 1)² φ̂ for ν = 0, f'(0) = −1.
            let oracle = -k2 * (k2 - 1.0).powi(2);
            let tol = 1e-2 * oracle.abs().max(1e-2);
            assert!((rate - oracle).abs() < tol, "k² = {k2}: {rate} vs {oracle}");
        }
    }

    #[test]
    fn energy_law_and_mass_without_sources() {
        let g = Grid::uniform(2, 32, 1.0).unwrap();
        let s = sim(
            ModelSpec::default(),
            FlowMode::Brinkman,
            StepperConfig {
                dt: 1e-6,
                dt_max: 1e-3,
                t_final: 2e-3,
                ..StepperConfig::default()
            },
        );
        let phi0 = ScalarField::from_fn(&g, |x| 0.1 * (2.0 * PI * x[0]).cos() + 0.05 * (2.0 * PI * x[1]).cos());
        let st = s.initial_state(&phi0).unwrap();
        let summary = run(&s, st, &mut Silent).unwrap();
        for w in summary.records.windows(2) {
            assert!(w[1].e_total <= w[0].e_total + 1e-8);
        }
        assert!(summary.ledger.max_mean_jump() < 1e-10);
        assert!((summary.final_state.t - 2e-3).abs() < 1e-15);
        for r in &summary.records {
            assert!((r.mean_mu - r.mean_mu_identity).abs() < 1e-10 * r.mean_mu.abs().max(1.0));
        }
    }

    #[test]
    fn mass_balance_with_source() {
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let spec = ModelSpec {
            sigma: 0.3,
            h: SourceShape {
                amplitude: 0.2,
                scale: 1.0,
            },
            ..ModelSpec::default()
        };
        let s = sim(
            spec,
            FlowMode::Frozen,
            StepperConfig {
                dt: 1e-4,
                t_final: 1e-3,
                ..StepperConfig::default()
            },
        );
        let phi0 = ScalarField::from_fn(&g, |x| 0.3 + 0.1 * (2.0 * PI * x[0]).cos());
        let summary = run(&s, s.initial_state(&phi0).unwrap(), &mut Silent).unwrap();
        assert!(summary.ledger.max_balance_defect() < 1e-9);
    }

    #[test]
    fn t_final_zero_returns_initial_state() {
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let s = sim(
            ModelSpec::default(),
            FlowMode::Brinkman,
            StepperConfig {
                t_final: 0.0,
                ..StepperConfig::default()
            },
        );
        let phi0 = ScalarField::from_fn(&g, |x| 0.2 * (2.0 * PI * x[1]).sin());
        let summary = run(&s, s.initial_state(&phi0).unwrap(), &mut Silent).unwrap();
        assert_eq!(summary.records.len(), 1);
        assert_eq!(summary.final_state.step, 0);
        let mu = crate::energetics::compute_mu(&phi0, &ModelSpec::default());
        assert!(summary.final_state.mu.sub(&mu).max_abs() < 1e-12 * mu.max_abs());
    }

    #[test]
    fn step_underflow_reports_state() {
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        // A negative tolerance rejects every step; it bypasses validation on purpose.
        let s = Simulation {
            spec: ModelSpec::default(),
            flow: FlowParams {
                mode: FlowMode::Frozen,
                ..FlowParams::default()
            },
            stepper: StepperConfig {
                dt: 1e-3,
                dt_min: 1e-3,
                dt_max: 1e-3,
                t_final: 1.0,
                adapt: AdaptConfig {
                    energy_increase_tol: -1e9,
                    ..AdaptConfig::default()
                },
                ..StepperConfig::default()
            },
            forcing: Forcing::zero(),
        };
        let phi0 = ScalarField::from_fn(&g, |x| 0.2 * (2.0 * PI * x[1]).sin());
        match run(&s, s.initial_state(&phi0).unwrap(), &mut Silent) {
            Err(Error::StepFailure { state, .. }) => assert_eq!(state.step, 0),
            other => panic!("expected step failure, got {other:?}"),
        }
    }
}
