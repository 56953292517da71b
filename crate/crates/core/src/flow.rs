//! Stationary velocity solves: Brinkman and Darcy with phase-dependent
//! coefficients, both posed on divergence-free fields.
//!
//! Unknowns live in spectral space. The Brinkman operator is
//! `ζ ↦ P(−div(η(φ) Dζ) + λ(φ) ζ + (β/dt) ζ)` where `P` is the Leray projector
//! (optionally followed by a Galerkin cutoff) and coefficient products are
//! taken on the padded grid. Padding and truncation are adjoint, so the
//! operator is symmetric positive definite on the projected subspace and is
//! solved by preconditioned conjugate gradients.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spectral::dealias::{pad, pad_spectrum, padded_integral, truncate_padded};
use crate::spectral::ops::{derivative_spectrum, galerkin_spectrum, project_spectra};
use crate::spectral::{symmetrized_gradient, Grid, ScalarField, VectorField};

/// Korn constant of the periodic divergence-free setting, `‖Dζ‖² = ½‖∇ζ‖²`.
pub const KORN_CONSTANT: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowMode {
    Brinkman,
    Darcy,
    /// `v ≡ 0`; decouples the phase equation for linear diagnostics.
    Frozen,
}

impl FlowMode {
    pub fn name(self) -> &'static str {
        match self {
            FlowMode::Brinkman => "brinkman",
            FlowMode::Darcy => "darcy",
            FlowMode::Frozen => "frozen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "brinkman" => Some(FlowMode::Brinkman),
            "darcy" => Some(FlowMode::Darcy),
            "frozen" => Some(FlowMode::Frozen),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    pub mode: FlowMode,
    /// Coefficient of the pseudo-time term `β(v − v_prev)/dt`.
    pub regularization_beta: f64,
    pub max_iterations: usize,
    /// Relative residual target, in `(0, 1e-3]`.
    pub residual_tolerance: f64,
    /// Integer mode-index cutoff of the Galerkin space, if any.
    pub galerkin_cutoff: Option<f64>,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            mode: FlowMode::Brinkman,
            regularization_beta: 0.0,
            max_iterations: 500,
            residual_tolerance: 1e-9,
            galerkin_cutoff: None,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tolerance > 0.0 && self.residual_tolerance <= 1e-3) {
            return Err(Error::Config(format!(
                "flow.tolerance must lie in (0, 1e-3], got {}",
                self.residual_tolerance
            )));
        }
        if !(self.regularization_beta >= 0.0) {
            return Err(Error::Config(format!(
                "flow.beta must be nonnegative, got {}",
                self.regularization_beta
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("flow.max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowDiagnostics {
    pub mode: FlowMode,
    pub iterations: usize,
    /// True residual `‖P(f − Av)‖ / ‖f‖` of the projected system, with `f`
    /// the unprojected right-hand side.
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
    pub coercivity_alpha: f64,
    /// `∫(η(φ)|Dv|² + λ(φ)|v|²)`.
    pub dissipation: f64,
}

#[derive(Clone, Debug)]
pub struct FlowSolution {
    pub v: VectorField,
    /// Zero-mean pressure; only reconstructed in Darcy mode.
    pub pressure: Option<ScalarField>,
    pub diagnostics: FlowDiagnostics,
}

/// Previous velocity and step size for the pseudo-time term.
#[derive(Clone, Copy, Debug)]
pub struct Regularization<'a> {
    pub v_prev: &'a VectorField,
    pub dt: f64,
}

type Spectra = Vec<Vec<Complex64>>;

fn zero_spectra(d: usize, n: usize) -> Spectra {
    vec![vec![Complex64::new(0.0, 0.0); n]; d]
}

fn dot(grid: &Grid, a: &Spectra, b: &Spectra) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y))
        .map(|(x, y)| (x * y.conj()).re)
        .sum();
    s * grid.volume()
}

fn axpy(alpha: f64, x: &Spectra, y: &mut Spectra) {
    for (xs, ys) in x.iter().zip(y.iter_mut()) {
        for (a, b) in xs.iter().zip(ys.iter_mut()) {
            *b += a * alpha;
        }
    }
}

/// `μ ∇φ` with dealiased products.
pub fn korteweg_force(mu: &ScalarField, phi: &ScalarField) -> VectorField {
    assert_eq!(mu.grid().sizes(), phi.grid().sizes(), "fields on different grids");
    let grid = phi.grid();
    let mu_m = pad(mu);
    let comps = (0..grid.dims())
        .map(|axis| {
            let d_m = pad_spectrum(grid, &derivative_spectrum(grid, phi.spectrum(), axis));
            let prod: Vec<f64> = mu_m.iter().zip(&d_m).map(|(a, b)| a * b).collect();
            ScalarField::from_spectrum(grid, truncate_padded(grid, &prod)).expect("same grid")
        })
        .collect();
    VectorField::from_components(comps).expect("consistent components")
}

/// Projected variable-coefficient operator.
struct FlowOperator<'a> {
    grid: &'a Grid,
    eta_m: Option<Vec<f64>>,
    lambda_m: Vec<f64>,
    shift: f64,
    cutoff: Option<f64>,
    precond: Vec<f64>,
}

impl<'a> FlowOperator<'a> {
    fn new(phi: &'a ScalarField, spec: &ModelSpec, viscous: bool, shift: f64, cutoff: Option<f64>) -> Self {
        let grid = phi.grid();
        let phi_m = pad(phi);
        let eta_m = viscous.then(|| phi_m.iter().map(|&s| spec.eta.eval(s)).collect());
        let lambda_m = phi_m.iter().map(|&s| spec.lambda.eval(s)).collect();
        let eta_bar = if viscous { spec.eta.midpoint() } else { 0.0 };
        let lambda_bar = spec.lambda.midpoint();
        let precond = grid
            .derivative_k_squared()
            .iter()
            .map(|k2| 1.0 / (0.5 * eta_bar * k2 + lambda_bar + shift))
            .collect();
        FlowOperator {
            grid,
            eta_m,
            lambda_m,
            shift,
            cutoff,
            precond,
        }
    }

    fn project(&self, spectra: &mut Spectra) {
        project_spectra(self.grid, spectra);
        for s in spectra.iter_mut() {
            galerkin_spectrum(self.grid, s, self.cutoff);
        }
    }

    fn weighted(&self, spectrum: &[Complex64], weight: &[f64]) -> Vec<Complex64> {
        let mut vals = pad_spectrum(self.grid, spectrum);
        for (v, w) in vals.iter_mut().zip(weight) {
            *v *= w;
        }
        truncate_padded(self.grid, &vals)
    }

    fn apply(&self, z: &Spectra) -> Spectra {
        let grid = self.grid;
        let d = grid.dims();
        let mut out = zero_spectra(d, grid.len());
        if let Some(eta_m) = &self.eta_m {
            let grads: Vec<Vec<Vec<Complex64>>> = z
                .iter()
                .map(|zi| (0..d).map(|j| derivative_spectrum(grid, zi, j)).collect())
                .collect();
            for i in 0..d {
                for j in i..d {
                    let dij: Vec<Complex64> = grads[i][j]
                        .iter()
                        .zip(&grads[j][i])
                        .map(|(a, b)| (a + b) * 0.5)
                        .collect();
                    let t = self.weighted(&dij, eta_m);
                    for (o, x) in out[i].iter_mut().zip(derivative_spectrum(grid, &t, j)) {
                        *o -= x;
                    }
                    if i != j {
                        for (o, x) in out[j].iter_mut().zip(derivative_spectrum(grid, &t, i)) {
                            *o -= x;
                        }
                    }
                }
            }
        }
        for (o, zi) in out.iter_mut().zip(z) {
            for ((o, x), zz) in o.iter_mut().zip(self.weighted(zi, &self.lambda_m)).zip(zi) {
                *o += x + zz * self.shift;
            }
        }
        self.project(&mut out);
        out
    }

    fn precondition(&self, r: &Spectra) -> Spectra {
        r.iter()
            .map(|s| s.iter().zip(&self.precond).map(|(c, p)| c * p).collect())
            .collect()
    }

    fn random_element(&self, rng: &mut ChaCha8Rng) -> Spectra {
        let d = self.grid.dims();
        let mut z: Spectra = (0..d)
            .map(|_| {
                let vals: Vec<f64> = (0..self.grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                self.grid.forward(&vals)
            })
            .collect();
        self.project(&mut z);
        z
    }

    fn symmetry_defect(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let x = self.random_element(&mut rng);
        let y = self.random_element(&mut rng);
        let (ax, ay) = (self.apply(&x), self.apply(&y));
        let a = dot(self.grid, &ax, &y);
        let b = dot(self.grid, &x, &ay);
        (a - b).abs() / (dot(self.grid, &ax, &ax) * dot(self.grid, &y, &y)).sqrt()
    }
}

struct CgOutcome {
    x: Spectra,
    iterations: usize,
    history: Vec<f64>,
}

/// Solves `A x = b` from a zero initial guess. Residuals are measured
/// relative to `scale`, the norm of the unprojected right-hand side.
fn pcg(
    op: &FlowOperator,
    b: &Spectra,
    scale: f64,
    tol: f64,
    max_iter: usize,
    solver: &'static str,
) -> Result<CgOutcome> {
    let grid = op.grid;
    let b_norm = scale;
    let mut x = zero_spectra(grid.dims(), grid.len());
    let mut history = vec![if b_norm > 0.0 { dot(grid, b, b).sqrt() / b_norm } else { 0.0 }];
    if b_norm == 0.0 || history[0] <= tol {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            history,
        });
    }
    let mut r = b.clone();
    let mut z = op.precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(grid, &r, &z);
    for it in 1..=max_iter {
        let ap = op.apply(&p);
        let pap = dot(grid, &p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver {
                solver,
                iterations: it,
                residual: *history.last().unwrap(),
                history,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rel = dot(grid, &r, &r).sqrt() / b_norm;
        history.push(rel);
        if rel <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                history,
            });
        }
        z = op.precondition(&r);
        let rz_new = dot(grid, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (ps, zs) in p.iter_mut().zip(&z) {
            for (pp, zz) in ps.iter_mut().zip(zs) {
                *pp = zz + *pp * beta;
            }
        }
    }
    Err(Error::Solver {
        solver,
        iterations: max_iter,
        residual: *history.last().unwrap(),
        history,
    })
}

fn spectra_of(v: &VectorField) -> Spectra {
    v.components().iter().map(|c| c.spectrum().to_vec()).collect()
}

fn field_of(grid: &Grid, x: Spectra) -> VectorField {
    let comps = x
        .into_iter()
        .map(|s| ScalarField::from_spectrum(grid, s).expect("same grid"))
        .collect();
    crate::spectral::leray_project(&VectorField::from_components(comps).expect("consistent components"))
}

fn true_residual(op: &FlowOperator, b: &Spectra, scale: f64, x: &Spectra) -> f64 {
    let b_norm = scale;
    if b_norm == 0.0 {
        return 0.0;
    }
    let mut r = b.clone();
    axpy(-1.0, &op.apply(x), &mut r);
    dot(op.grid, &r, &r).sqrt() / b_norm
}

fn check_inputs(phi: &ScalarField, mu: &ScalarField, u: &VectorField) -> Result<()> {
    if phi.grid().sizes() != mu.grid().sizes() || phi.grid().sizes() != u.grid().sizes() {
        return Err(Error::Mismatch("flow inputs live on different grids".into()));
    }
    Ok(())
}

/// Brinkman velocity `v` with `∫η(φ)Dv:∇ζ + λ(φ)v·ζ = ∫(μ∇φ + u)·ζ` for all
/// divergence-free `ζ`.
pub fn solve_brinkman(
    phi: &ScalarField,
    mu: &ScalarField,
    u: &VectorField,
    spec: &ModelSpec,
    params: &FlowParams,
    regularization: Option<Regularization>,
) -> Result<FlowSolution> {
    check_inputs(phi, mu, u)?;
    params.validate()?;
    let grid = phi.grid();
    let shift = match regularization {
        Some(r) if params.regularization_beta > 0.0 => params.regularization_beta / r.dt,
        _ => 0.0,
    };
    let op = FlowOperator::new(phi, spec, true, shift, params.galerkin_cutoff);
    debug_assert!(op.symmetry_defect() < 1e-10, "flow operator lost symmetry");

    let force = korteweg_force(mu, phi).add(u);
    let mut b = spectra_of(&force);
    if shift > 0.0 {
        if let Some(r) = regularization {
            axpy(shift, &spectra_of(r.v_prev), &mut b);
        }
    }
    let scale = dot(grid, &b, &b).sqrt();
    op.project(&mut b);
    let out = pcg(&op, &b, scale, params.residual_tolerance, params.max_iterations, "brinkman-pcg")?;
    let final_residual = true_residual(&op, &b, scale, &out.x);
    let v = field_of(grid, out.x);
    let dissipation = flow_dissipation(&v, phi, spec);
    Ok(FlowSolution {
        v,
        pressure: None,
        diagnostics: FlowDiagnostics {
            mode: FlowMode::Brinkman,
            iterations: out.iterations,
            final_residual,
            residual_history: out.history,
            coercivity_alpha: spec.eta.lower.min(spec.lambda.lower) / KORN_CONSTANT,
            dissipation,
        },
    })
}

/// Darcy velocity `λ(φ)v = μ∇φ + u − ∇p`, `div v = 0`, with zero-mean `p`.
///
/// The velocity is found by conjugate gradients on `P(λ(φ)·)` restricted to
/// divergence-free fields; the pressure gradient is then the gradient part of
/// `f − λ(φ)v`.
pub fn solve_darcy(
    phi: &ScalarField,
    mu: &ScalarField,
    u: &VectorField,
    spec: &ModelSpec,
    params: &FlowParams,
) -> Result<FlowSolution> {
    check_inputs(phi, mu, u)?;
    params.validate()?;
    let grid = phi.grid();
    let op = FlowOperator::new(phi, spec, false, 0.0, params.galerkin_cutoff);
    debug_assert!(op.symmetry_defect() < 1e-10, "flow operator lost symmetry");

    let force = korteweg_force(mu, phi).add(u);
    let mut b = spectra_of(&force);
    let scale = dot(grid, &b, &b).sqrt();
    op.project(&mut b);
    let out = pcg(&op, &b, scale, params.residual_tolerance, params.max_iterations, "darcy-pcg")?;
    let final_residual = true_residual(&op, &b, scale, &out.x);
    let v = field_of(grid, out.x);

    // ∇p = (I − P)(f − λv); p̂ = −i k̃·ĝ / |k̃|².
    let mut g = spectra_of(&force);
    for (gi, vi) in g.iter_mut().zip(v.components()) {
        for (a, b) in gi.iter_mut().zip(op.weighted(vi.spectrum(), &op.lambda_m)) {
            *a -= b;
        }
    }
    let k2 = grid.derivative_k_squared();
    let mut p_hat = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (flat, ph) in p_hat.iter_mut().enumerate() {
        if k2[flat] == 0.0 {
            continue;
        }
        let kg: Complex64 = (0..grid.dims())
            .map(|a| g[a][flat] * grid.derivative_k_flat(a)[flat])
            .sum();
        *ph = Complex64::new(0.0, -1.0) * kg / k2[flat];
    }
    let pressure = ScalarField::from_spectrum(grid, p_hat)?;
    let dissipation = flow_dissipation_with(&v, phi, spec, false);
    Ok(FlowSolution {
        v,
        pressure: Some(pressure),
        diagnostics: FlowDiagnostics {
            mode: FlowMode::Darcy,
            iterations: out.iterations,
            final_residual,
            residual_history: out.history,
            coercivity_alpha: spec.lambda.lower,
            dissipation,
        },
    })
}

/// Dispatches on `params.mode`.
pub fn solve_flow(
    phi: &ScalarField,
    mu: &ScalarField,
    u: &VectorField,
    spec: &ModelSpec,
    params: &FlowParams,
    regularization: Option<Regularization>,
) -> Result<FlowSolution> {
    match params.mode {
        FlowMode::Brinkman => solve_brinkman(phi, mu, u, spec, params, regularization),
        FlowMode::Darcy => solve_darcy(phi, mu, u, spec, params),
        FlowMode::Frozen => Ok(FlowSolution {
            v: VectorField::zeros(phi.grid()),
            pressure: None,
            diagnostics: FlowDiagnostics {
                mode: FlowMode::Frozen,
                iterations: 0,
                final_residual: 0.0,
                residual_history: Vec::new(),
                coercivity_alpha: 0.0,
                dissipation: 0.0,
            },
        }),
    }
}

fn flow_dissipation_with(v: &VectorField, phi: &ScalarField, spec: &ModelSpec, viscous: bool) -> f64 {
    let grid = phi.grid();
    let phi_m = pad(phi);
    let mut density: Vec<f64> = vec![0.0; phi_m.len()];
    for c in v.components() {
        for (acc, x) in density.iter_mut().zip(pad(c)) {
            *acc += x * x;
        }
    }
    for (acc, s) in density.iter_mut().zip(&phi_m) {
        *acc *= spec.lambda.eval(*s);
    }
    if viscous {
        let dv = symmetrized_gradient(v);
        let d = v.dims();
        let mut strain = vec![0.0; phi_m.len()];
        for i in 0..d {
            for j in 0..d {
                for (acc, x) in strain.iter_mut().zip(pad(dv.entry(i, j))) {
                    *acc += x * x;
                }
            }
        }
        for ((acc, s), e) in density.iter_mut().zip(&phi_m).zip(strain) {
            *acc += spec.eta.eval(*s) * e;
        }
    }
    padded_integral(grid, &density)
}

/// `∫(η(φ)|Dv|² + λ(φ)|v|²)`.
pub fn flow_dissipation(v: &VectorField, phi: &ScalarField, spec: &ModelSpec) -> f64 {
    flow_dissipation_with(v, phi, spec, true)
}

/// `∫ |η(φ) Dv|²`.
pub fn viscous_stress_norm_sq(v: &VectorField, phi: &ScalarField, spec: &ModelSpec) -> f64 {
    let phi_m = pad(phi);
    let dv = symmetrized_gradient(v);
    let d = v.dims();
    let mut acc = vec![0.0; phi_m.len()];
    for i in 0..d {
        for j in 0..d {
            for (a, x) in acc.iter_mut().zip(pad(dv.entry(i, j))) {
                *a += x * x;
            }
        }
    }
    for (a, s) in acc.iter_mut().zip(&phi_m) {
        let e = spec.eta.eval(*s);
        *a *= e * e;
    }
    padded_integral(phi.grid(), &acc)
}

/// `∫ η(φ) |Dv|²`.
pub fn viscous_dissipation(v: &VectorField, phi: &ScalarField, spec: &ModelSpec) -> f64 {
    flow_dissipation_with(v, phi, spec, true) - flow_dissipation_with(v, phi, spec, false)
}
