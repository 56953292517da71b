//! Invariant checks that need no time stepping.

use crate::config::{max_cutoff, RunConfig};
use crate::energetics::{chemical_potentials, compute_energy};
use crate::error::Result;
use crate::forcing::random_band_limited;
use crate::io::report::{ExperimentReport, Relation, Verdict};
use crate::io::snapshot::Snapshot;
use crate::model::{validate_assumptions, ModelSpec};
use crate::spectral::ops::{gradient_norm_sq, h1_norm_vector};
use crate::spectral::{
    divergence, galerkin_project, leray_project, symmetrized_gradient, velocity_gradient, Grid, ScalarField,
    VectorField,
};

use super::new_report;

/// Largest relative mismatch between `⟨μ, ψ⟩` (resp. `⟨w, ψ⟩`) and a
/// central difference of the total (resp. Ginzburg–Landau) energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariationalCheck {
    pub mu: f64,
    pub w: f64,
}

/// Central differences with step `h` along `directions` seeded random
/// directions covering the whole resolved band.
pub fn variational_check(phi: &ScalarField, spec: &ModelSpec, directions: usize, h: f64, seed: u64) -> VariationalCheck {
    let grid = phi.grid();
    let pots = chemical_potentials(phi, spec);
    let band = max_cutoff(grid);
    let mut worst = VariationalCheck { mu: 0.0, w: 0.0 };
    for i in 0..directions {
        let psi = random_band_limited(grid, band, 1.0, 0.1, seed.wrapping_add(i as u64));
        let plus = compute_energy(&phi.add(&psi.scaled(h)), spec);
        let minus = compute_energy(&phi.sub(&psi.scaled(h)), spec);
        let fd_e = (plus.total - minus.total) / (2.0 * h);
        let fd_g = (plus.ginzburg_landau - minus.ginzburg_landau) / (2.0 * h);
        let pair_mu = pots.mu.inner(&psi);
        let pair_w = pots.w.inner(&psi);
        worst.mu = worst.mu.max((pair_mu - fd_e).abs() / pair_mu.abs());
        worst.w = worst.w.max((pair_w - fd_g).abs() / pair_w.abs());
    }
    worst
}

fn random_vector(grid: &Grid, seed: u64) -> VectorField {
    let band = max_cutoff(grid);
    let comps = (0..grid.dims())
        .map(|i| random_band_limited(grid, band, 1.0, 0.0, seed.wrapping_mul(31).wrapping_add(i as u64)))
        .collect();
    VectorField::from_components(comps).expect("components share a grid")
}

/// Pointwise `Dζ:∇ζ = |Dζ|²`, `‖Dζ‖² = ½‖∇ζ‖²` for divergence-free `ζ`,
/// and idempotence and symmetry of the Leray projector, on seeded random
/// fields.
pub fn structural_identities(grid: &Grid, seed: u64, pointwise_tol: f64, identity_tol: f64) -> Vec<Verdict> {
    let z = random_vector(grid, seed);
    let d = symmetrized_gradient(&z);
    let g = velocity_gradient(&z);
    let lhs = d.contract(&g);
    let rhs = d.contract(&d);
    let scale = rhs.max_abs();
    let pointwise = lhs.sub(&rhs).max_abs() / scale;

    let zeta = leray_project(&z);
    let dz = symmetrized_gradient(&zeta);
    let grad_sq: f64 = zeta.components().iter().map(gradient_norm_sq).sum();
    let korn = (dz.squared_norm() - 0.5 * grad_sq).abs() / (0.5 * grad_sq);

    let twice = leray_project(&zeta);
    let idempotent = twice.sub(&zeta).l2_norm() / z.l2_norm();
    let b = random_vector(grid, seed.wrapping_add(1));
    let symmetric = (zeta.inner(&b) - z.inner(&leray_project(&b))).abs() / (z.l2_norm() * b.l2_norm());

    vec![
        Verdict::new("strain_contraction_pointwise", pointwise, Relation::AtMost, pointwise_tol),
        Verdict::new("korn_identity_divergence_free", korn, Relation::AtMost, identity_tol),
        Verdict::new("leray_idempotent", idempotent, Relation::AtMost, identity_tol),
        Verdict::new("leray_symmetric", symmetric, Relation::AtMost, identity_tol),
    ]
}

/// Assumption certificate, variational check on `φ₀` and structural
/// identities on the configured grid.
pub fn check_config(cfg: &RunConfig) -> Result<ExperimentReport> {
    let setup = super::setup(cfg)?;
    let mut report = new_report("check", cfg);
    let cert = validate_assumptions(&cfg.model, cfg.validation.range, cfg.validation.samples)?;
    report.scalars.extend([
        ("C1".to_string(), cert.c1),
        ("C2".to_string(), cert.c2),
        ("C3".to_string(), cert.c3),
        ("C3_prime".to_string(), cert.c3_prime),
        ("source_sup".to_string(), cert.source_sup),
        ("source_lipschitz".to_string(), cert.source_lipschitz),
    ]);
    for c in &cert.coefficients {
        report.scalars.push((format!("{}_lipschitz", c.name), c.lipschitz_estimate));
    }
    let phi0 = galerkin_project(&setup.phi0, cfg.stepper.cutoff);
    let vc = variational_check(&phi0, &cfg.model, 20, 1e-5, cfg.seed);
    let tol = cfg.verdicts.variational_tol;
    report.verdicts.push(Verdict::new("variational_mu", vc.mu, Relation::Below, tol));
    report.verdicts.push(Verdict::new("variational_w", vc.w, Relation::Below, tol));
    report.verdicts.extend(structural_identities(
        &setup.grid,
        cfg.seed,
        cfg.verdicts.pointwise_tol,
        cfg.verdicts.identity_tol,
    ));
    Ok(report)
}

/// Recomputes `w` and `μ` from the stored `φ` and compares them with the
/// stored fields; checks the mean-μ identity and, when a velocity is
/// stored, its divergence.
pub fn check_snapshot(snap: &Snapshot, cfg: &RunConfig) -> Result<ExperimentReport> {
    let grid = snap.grid()?;
    let mut report = new_report("check_snapshot", cfg);
    let phi = snap.scalar(&grid, "phi")?;
    let pots = chemical_potentials(&phi, &cfg.model);
    let cutoff = cfg.stepper.cutoff;
    let w = galerkin_project(&pots.w, cutoff);
    let mu = galerkin_project(&pots.mu, cutoff);
    let tol = cfg.verdicts.mean_mu_tol;
    let rel = |a: &ScalarField, b: &ScalarField| a.sub(b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE);
    if snap.field("w").is_some() {
        let stored = snap.scalar(&grid, "w")?;
        report.verdicts.push(Verdict::new("w_consistent", rel(&stored, &w), Relation::AtMost, tol));
    }
    if snap.field("mu").is_some() {
        let stored = snap.scalar(&grid, "mu")?;
        report.verdicts.push(Verdict::new("mu_consistent", rel(&stored, &mu), Relation::AtMost, tol));
    }
    let mean = mu.mean();
    let identity = (mean - pots.mean_mu).abs() / mean.abs().max(1.0);
    report.verdicts.push(Verdict::new("mean_mu_identity", identity, Relation::Below, tol));
    let names: Vec<String> = (1..=grid.dims()).map(|i| format!("v_{i}")).collect();
    if names.iter().all(|n| snap.field(n).is_some()) {
        let comps = names
            .iter()
            .map(|n| snap.scalar(&grid, n))
            .collect::<Result<Vec<_>>>()?;
        let v = VectorField::from_components(comps)?;
        let scale = h1_norm_vector(&v).max(f64::MIN_POSITIVE);
        let div = divergence(&v).l2_norm() / scale;
        report
            .verdicts
            .push(Verdict::new("velocity_divergence_free", div, Relation::AtMost, cfg.verdicts.identity_tol));
    }
    let e = compute_energy(&phi, &cfg.model);
    report.scalars.extend([
        ("E_total".to_string(), e.total),
        ("E_willmore".to_string(), e.willmore),
        ("E_GL".to_string(), e.ginzburg_landau),
        ("mean_phi".to_string(), phi.mean()),
        ("mean_mu".to_string(), mean),
    ]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_hold_on_a_small_grid() {
        let g = Grid::new(&[16, 12], &[1.0, 2.0]).unwrap();
        for v in structural_identities(&g, 3, 1e-12, 1e-10) {
            assert!(v.pass, "{}", v.line());
        }
    }

    #[test]
    fn variational_check_small() {
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let phi = random_band_limited(&g, 4.0, 0.3, 0.1, 1);
        let vc = variational_check(&phi, &ModelSpec::default(), 5, 1e-5, 2);
        assert!(vc.mu < 1e-5 && vc.w < 1e-5, "{vc:?}");
    }
}
