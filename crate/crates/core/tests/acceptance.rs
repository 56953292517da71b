//! Acceptance criteria 1–10. Each test prints one `PASS`/`FAIL` line with
//! the measured quantities, then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use bchflow::config::RunConfig;
use bchflow::flow::{korteweg_force, solve_brinkman, solve_darcy, FlowMode, FlowParams};
use bchflow::forcing::random_band_limited;
use bchflow::harness::{
    exp_continuous_dependence, exp_darcy_limit, exp_energy_decay, exp_galerkin_refinement,
    exp_regularization_ablation, exp_self_convergence_linear, exp_self_convergence_uniform, structural_identities,
    variational_check,
};
use bchflow::io::report::{ExperimentReport, Relation, Verdict};
use bchflow::model::{Coefficient, ModelSpec};
use bchflow::spectral::dealias::pad;
use bchflow::spectral::ops::galerkin_project_vector;
use bchflow::spectral::{leray_project, symmetrized_gradient, Grid, ScalarField, VectorField};
use nalgebra::{DMatrix, DVector};

const TWO_PI: &str = "6.283185307179586";

fn config(text: &str) -> RunConfig {
    RunConfig::parse_str(text, true).unwrap().config
}

fn runtime(started: Instant, limit_s: f64) -> Verdict {
    Verdict::new("runtime_s", started.elapsed().as_secs_f64(), Relation::Below, limit_s)
}

/// Prints the criterion line and fails the test if any verdict fails.
fn conclude(criterion: u32, title: &str, verdicts: &[Verdict], notes: &[(String, f64)]) {
    let pass = verdicts.iter().all(|v| v.pass);
    let mut line = format!(
        "{} criterion {criterion} ({title}): {}",
        if pass { "PASS" } else { "FAIL" },
        verdicts
            .iter()
            .map(|v| format!("{} {:e} {} {:e}", v.name, v.measured, v.relation.symbol(), v.threshold))
            .collect::<Vec<_>>()
            .join("; ")
    );
    for (k, v) in notes {
        line.push_str(&format!("; {k} = {v:e}"));
    }
    writeln!(std::io::stderr(), "{line}").unwrap();
    for v in verdicts {
        assert!(v.pass, "criterion {criterion}: {}", v.line());
    }
}

fn verdicts<'a>(report: &'a ExperimentReport, names: &[&str]) -> Vec<Verdict> {
    names
        .iter()
        .map(|n| report.verdict(n).unwrap_or_else(|| panic!("missing verdict {n}")).clone())
        .collect()
}

#[test]
fn criterion_01_variational_derivatives() {
    let started = Instant::now();
    let g = Grid::uniform(2, 64, 1.0).unwrap();
    let phi = random_band_limited(&g, 8.0, 0.4, 0.1, 2024);
    let mut out = Vec::new();
    for nu in [-1.0, 0.0, 1.0] {
        let spec = ModelSpec { nu, ..ModelSpec::default() };
        let c = variational_check(&phi, &spec, 20, 1e-5, 7);
        out.push(Verdict::new(format!("mu_nu={nu}"), c.mu, Relation::Below, 1e-5));
        out.push(Verdict::new(format!("w_nu={nu}"), c.w, Relation::Below, 1e-5));
    }
    out.push(runtime(started, 10.0));
    conclude(1, "variational derivatives", &out, &[]);
}

fn energy_config() -> RunConfig {
    config(
        "seed = 1
[grid]
n = 64
length = 1
[stepper]
dt = 1e-6
dt_max = 1e-2
t_final = 1
adaptive = true
[initial]
kind = modes
modes = 0.1:1,0; 0.05:0,1
",
    )
}

#[test]
fn criterion_02_discrete_energy_law() {
    let started = Instant::now();
    let report = exp_energy_decay(&energy_config()).unwrap();
    let mut out = verdicts(&report, &["energy_nonincreasing", "mass_constant"]);
    out.push(runtime(started, 120.0));
    let notes = vec![
        ("accepted_steps".into(), report.scalar("accepted_steps").unwrap()),
        ("energy_released".into(), report.scalar("energy_released").unwrap()),
    ];
    conclude(2, "discrete energy law", &out, &notes);
}

#[test]
fn criterion_03_mean_mu_identity() {
    let report = exp_energy_decay(&energy_config()).unwrap();
    let out = verdicts(&report, &["mean_mu_identity"]);
    conclude(3, "mean-mu identity", &out, &[]);
}

fn random_field(g: &Grid, amp: f64, seed: u64) -> ScalarField {
    random_band_limited(g, 3.0, amp, 0.0, seed)
}

fn random_vector(g: &Grid, seed: u64) -> VectorField {
    VectorField::from_components((0..2).map(|i| random_field(g, 1.0, seed * 7 + i)).collect()).unwrap()
}

fn flatten(v: &VectorField) -> DVector<f64> {
    DVector::from_iterator(v.dims() * v.grid().len(), v.components().iter().flat_map(|c| c.values().to_vec()))
}

/// Dense projected system `Q A Q x + (I − Q) x = Q f` for grid-value
/// unknowns, with `A` the bilinear form `∫ λ v·w + η Dv:Dw` evaluated by
/// quadrature on the 3/2-padded grid.
fn dense_oracle(g: &Grid, phi: &ScalarField, spec: &ModelSpec, viscous: bool, f: &VectorField) -> DVector<f64> {
    let d = g.dims();
    let n = g.len();
    let phi_p = pad(phi);
    let eta: Vec<f64> = phi_p.iter().map(|&s| spec.eta.eval(s)).collect();
    let lam: Vec<f64> = phi_p.iter().map(|&s| spec.lambda.eval(s)).collect();
    let mut q = DMatrix::zeros(d * n, d * n);
    let mut bv = Vec::new();
    let mut bd = Vec::new();
    for col in 0..d * n {
        let comps = (0..d)
            .map(|c| {
                let mut f = ScalarField::zeros(g);
                if c == col / n {
                    f.values_mut()[col % n] = 1.0;
                }
                f
            })
            .collect();
        let e = VectorField::from_components(comps).unwrap();
        let pe = galerkin_project_vector(&leray_project(&e), None);
        for c in 0..d {
            for (r, x) in pe.component(c).values().iter().enumerate() {
                q[(c * n + r, col)] = *x;
            }
        }
        bv.push((0..d).map(|c| pad(e.component(c))).collect::<Vec<_>>());
        let s = symmetrized_gradient(&e);
        bd.push((0..d * d).map(|ij| pad(s.entry(ij / d, ij % d))).collect::<Vec<_>>());
    }
    let w = g.padded().cell_volume() / g.cell_volume();
    let mut a = DMatrix::zeros(d * n, d * n);
    for i in 0..d * n {
        for j in 0..=i {
            let mut s = 0.0;
            for p in 0..phi_p.len() {
                let vv: f64 = (0..d).map(|c| bv[i][c][p] * bv[j][c][p]).sum();
                s += lam[p] * vv;
                if viscous {
                    let dd: f64 = (0..d * d).map(|ij| bd[i][ij][p] * bd[j][ij][p]).sum();
                    s += eta[p] * dd;
                }
            }
            a[(i, j)] = s * w;
            a[(j, i)] = s * w;
        }
    }
    let id = DMatrix::<f64>::identity(d * n, d * n);
    let system = &q * a * &q + (&id - &q);
    system.lu().solve(&(&q * flatten(f))).unwrap()
}

#[test]
fn criterion_04_flow_solver_oracles() {
    let started = Instant::now();
    let g = Grid::uniform(2, 8, 1.0).unwrap();
    let spec = ModelSpec {
        eta: Coefficient::tanh(1.0, 0.5, 1.0),
        lambda: Coefficient::saturated_quadratic(1.0, 0.25),
        ..ModelSpec::default()
    };
    let phi = random_field(&g, 1.5, 1);
    let mu = random_field(&g, 1.0, 2);
    let u = random_vector(&g, 3);
    let f = korteweg_force(&mu, &phi).add(&u);
    let tight = FlowParams {
        residual_tolerance: 1e-13,
        ..FlowParams::default()
    };
    let rel = |got: &VectorField, x: &DVector<f64>| (flatten(got) - x).norm() / x.norm();

    let brinkman = solve_brinkman(&phi, &mu, &u, &spec, &tight, None).unwrap();
    let b_err = rel(&brinkman.v, &dense_oracle(&g, &phi, &spec, true, &f));
    let darcy_params = FlowParams {
        mode: FlowMode::Darcy,
        ..tight.clone()
    };
    let darcy = solve_darcy(&phi, &mu, &u, &spec, &darcy_params).unwrap();
    let d_err = rel(&darcy.v, &dense_oracle(&g, &phi, &spec, false, &f));

    let (eta, lambda) = (0.7, 1.3);
    let constant = ModelSpec {
        eta: Coefficient::constant(eta),
        lambda: Coefficient::constant(lambda),
        ..ModelSpec::default()
    };
    let mode = VectorField::from_components(vec![
        ScalarField::from_fn(&g, |x| (2.0 * PI * x[1]).sin()),
        ScalarField::zeros(&g),
    ])
    .unwrap();
    let zero = ScalarField::zeros(&g);
    let single = solve_brinkman(&zero, &zero, &mode, &constant, &tight, None).unwrap();
    let k2 = 4.0 * PI * PI;
    let closed = mode.scaled(1.0 / (0.5 * eta * k2 + lambda));
    let s_err = single.v.sub(&closed).l2_norm() / closed.l2_norm();

    let out = vec![
        Verdict::new("brinkman_vs_dense", b_err, Relation::Below, 1e-8),
        Verdict::new("darcy_vs_dense", d_err, Relation::Below, 1e-8),
        Verdict::new("single_mode_closed_form", s_err, Relation::Below, 1e-10),
        runtime(started, 10.0),
    ];
    conclude(4, "flow-solver oracles", &out, &[]);
}

#[test]
fn criterion_05_darcy_limit() {
    let started = Instant::now();
    let cfg = config(&format!(
        "seed = 5
[grid]
n = 64
length = {TWO_PI}
[model]
friction.value = 20
nu = 1
sigma = 0.1
h.amplitude = 0.1
h.scale = 1
[stepper]
dt = 1e-3
t_final = 0.5
adaptive = false
[forcing]
kind = modes
modes = 1:1:0,1; 2:0.5:1,1
[initial]
kind = random
band = 4
amplitude = 0.2
[sweep]
levels = 6
"
    ));
    let report = exp_darcy_limit(&cfg, 6).unwrap();
    let mut out = verdicts(
        &report,
        &["velocity_gap_decreasing", "viscous_dissipation_decreasing", "viscous_dissipation_ratio", "stability_uniform"],
    );
    out.push(runtime(started, 900.0));
    let notes = vec![("viscous_stress_ratio".into(), report.scalar("viscous_stress_ratio").unwrap())];
    conclude(5, "Darcy limit", &out, &notes);
}

#[test]
fn criterion_06_continuous_dependence() {
    let started = Instant::now();
    let cfg = config(&format!(
        "seed = 6
[grid]
n = 32
length = {TWO_PI}
[stepper]
dt = 5e-3
t_final = 0.5
adaptive = false
[forcing]
kind = modes
modes = 1:0.5:0,1
[initial]
kind = random
band = 4
amplitude = 0.2
[sweep]
amplitudes = 1e-3, 1e-2, 1e-1
"
    ));
    let report = exp_continuous_dependence(&cfg).unwrap();
    let mut out = verdicts(&report, &["uniqueness", "dependence_ratio_spread"]);
    out.push(runtime(started, 600.0));
    let notes = vec![("K2_estimate".into(), report.scalar("K2_estimate").unwrap())];
    conclude(6, "continuous dependence", &out, &notes);
}

#[test]
fn criterion_07_galerkin_refinement() {
    let cfg = config(
        "seed = 7
[grid]
n = 128
length = 100.53096491487338
[stepper]
dt = 1e-2
t_final = 1
adaptive = false
[initial]
kind = random
band = 63
amplitude = 0.2
",
    );
    let report = exp_galerkin_refinement(&cfg, &[8.0, 16.0, 32.0]).unwrap();
    let out = verdicts(&report, &["cauchy_differences_decreasing", "projection_error_decreasing"]);
    let s = report.series("cutoffs").unwrap();
    let notes: Vec<(String, f64)> = s
        .column("cauchy_to_next")
        .unwrap()
        .into_iter()
        .take(2)
        .enumerate()
        .map(|(i, c)| (format!("cauchy_{i}"), c))
        .collect();
    conclude(7, "Galerkin refinement", &out, &notes);
}

#[test]
fn criterion_08_temporal_self_convergence() {
    let cfg = config(&format!(
        "seed = 8
[grid]
n = 32
length = {TWO_PI}
[model]
sigma = 1
[stepper]
t_final = 1
adaptive = false
"
    ));
    let dts = [0.02, 0.01, 0.005];
    let order = |r: &ExperimentReport, tag: &str| -> Vec<Verdict> {
        let p = r.series("dts").unwrap().column("observed_order").unwrap();
        p.iter()
            .filter(|x| x.is_finite())
            .enumerate()
            .map(|(i, x)| Verdict::new(format!("{tag}_order_{i}_dev"), (x - 1.0).abs(), Relation::AtMost, 0.2))
            .collect()
    };
    let mut out = order(&exp_self_convergence_linear(&cfg, &dts).unwrap(), "linear");
    out.extend(order(&exp_self_convergence_uniform(&cfg, &dts).unwrap(), "uniform"));
    conclude(8, "temporal self-convergence", &out, &[]);
}

#[test]
fn criterion_09_regularization_ablation() {
    let cfg = config(&format!(
        "seed = 9
[grid]
n = 32
length = {TWO_PI}
[stepper]
dt = 5e-3
t_final = 0.5
adaptive = false
[forcing]
kind = modes
modes = 1:1:0,1
[initial]
kind = random
band = 4
amplitude = 0.2
[sweep]
stationary_dt = 5
"
    ));
    let report = exp_regularization_ablation(&cfg, &[1.0, 0.1, 0.01, 0.0]).unwrap();
    let out = verdicts(&report, &["velocity_gap_decreasing", "stationary_rate_bounded"]);
    conclude(9, "regularization ablation", &out, &[]);
}

#[test]
fn criterion_10_structural_identities() {
    let mut out = Vec::new();
    for (n, seed) in [(32, 10), (48, 11)] {
        let g = Grid::new(&[n, n], &[1.0, 1.7]).unwrap();
        out.extend(structural_identities(&g, seed, 1e-12, 1e-10));
    }
    conclude(10, "structural identities", &out, &[]);
}
