//! Energies and chemical potentials.
//!
//! Every nonlinear term is sampled on the 3/2-padded grid and the potential
//! integral is the padded-grid quadrature. With this choice `w` and `μ` are
//! the exact gradients of the discrete energies, so directional derivatives
//! of the energy agree with `⟨μ, ψ⟩` up to rounding.

use crate::model::ModelSpec;
use crate::spectral::dealias::{from_padded, pad, padded_integral};
use crate::spectral::ops::{gradient_norm_sq, laplacian_norm_sq};
use crate::spectral::{gradient, laplacian, ScalarField};

/// The four terms of the rewritten energy
/// `¼∫w² + ¼∫(|Δφ|² + f(φ)²) + ½∫f'(φ)|∇φ|² + ν∫(½|∇φ|² + F(φ))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitForm {
    pub quarter_w: f64,
    pub quarter_lap_f: f64,
    pub half_fprime_grad: f64,
    pub nu_gl: f64,
}

impl SplitForm {
    pub fn sum(&self) -> f64 {
        self.quarter_w + self.quarter_lap_f + self.half_fprime_grad + self.nu_gl
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    /// `½∫w²`.
    pub willmore: f64,
    /// `∫(½|∇φ|² + F(φ))`.
    pub ginzburg_landau: f64,
    /// `willmore + ν · ginzburg_landau`.
    pub total: f64,
    pub split_form: SplitForm,
}

/// `w`, `μ` and the padded-grid samples they were built from.
#[derive(Clone, Debug)]
pub struct Potentials {
    pub w: ScalarField,
    pub mu: ScalarField,
    /// `(1/|Ω|)∫(f'(φ) + ν) w`.
    pub mean_mu: f64,
}

struct Padded {
    f: Vec<f64>,
    f_prime: Vec<f64>,
}

fn padded_potential(spec: &ModelSpec, phi: &ScalarField) -> Padded {
    let phi_m = pad(phi);
    let pot = &spec.potential;
    Padded {
        f: phi_m.iter().map(|&s| pot.f(s)).collect(),
        f_prime: phi_m.iter().map(|&s| pot.f_prime(s)).collect(),
    }
}

fn w_from(phi: &ScalarField, padded: &Padded) -> ScalarField {
    from_padded(phi.grid(), &padded.f).sub(&laplacian(phi))
}

/// `w = −Δφ + f(φ)`.
pub fn compute_w(phi: &ScalarField, spec: &ModelSpec) -> ScalarField {
    w_from(phi, &padded_potential(spec, phi))
}

/// `μ = −Δw + (f'(φ) + ν) w`.
pub fn compute_mu(phi: &ScalarField, spec: &ModelSpec) -> ScalarField {
    chemical_potentials(phi, spec).mu
}

/// `w` and `μ` together, sharing the padded samples.
pub fn chemical_potentials(phi: &ScalarField, spec: &ModelSpec) -> Potentials {
    let grid = phi.grid();
    let padded = padded_potential(spec, phi);
    let w = w_from(phi, &padded);
    let w_m = pad(&w);
    let reaction: Vec<f64> = padded
        .f_prime
        .iter()
        .zip(&w_m)
        .map(|(fp, w)| (fp + spec.nu) * w)
        .collect();
    let mean_mu = padded_integral(grid, &reaction) / grid.volume();
    let mu = from_padded(grid, &reaction).sub(&laplacian(&w));
    Potentials { w, mu, mean_mu }
}

/// `(1/|Ω|)∫(f'(φ) + ν)(−Δφ + f(φ))`.
pub fn mean_mu(phi: &ScalarField, spec: &ModelSpec) -> f64 {
    chemical_potentials(phi, spec).mean_mu
}

pub fn compute_energy(phi: &ScalarField, spec: &ModelSpec) -> EnergyBreakdown {
    let grid = phi.grid();
    let phi_m = pad(phi);
    let pot = &spec.potential;
    let padded = padded_potential(spec, phi);
    let w = w_from(phi, &padded);

    let grad_sq = gradient_norm_sq(phi);
    let potential_integral = padded_integral(
        grid,
        &phi_m.iter().map(|&s| pot.potential(s)).collect::<Vec<_>>(),
    );
    let willmore = 0.5 * w.inner(&w);
    let ginzburg_landau = 0.5 * grad_sq + potential_integral;
    let total = willmore + spec.nu * ginzburg_landau;

    let f_sq = padded_integral(grid, &padded.f.iter().map(|f| f * f).collect::<Vec<_>>());
    let mut grad_m = vec![0.0; phi_m.len()];
    for c in gradient(phi).components() {
        for (acc, g) in grad_m.iter_mut().zip(pad(c)) {
            *acc += g * g;
        }
    }
    let fprime_grad = padded_integral(
        grid,
        &padded
            .f_prime
            .iter()
            .zip(&grad_m)
            .map(|(fp, g)| fp * g)
            .collect::<Vec<_>>(),
    );
    let split_form = SplitForm {
        quarter_w: 0.5 * willmore,
        quarter_lap_f: 0.25 * (laplacian_norm_sq(phi) + f_sq),
        half_fprime_grad: 0.5 * fprime_grad,
        nu_gl: spec.nu * ginzburg_landau,
    };
    EnergyBreakdown {
        willmore,
        ginzburg_landau,
        total,
        split_form,
    }
}

/// Chain-rule rate `∫w(−Δψ + f'(φ)ψ) + ν∫(∇φ·∇ψ + f(φ)ψ)` for `ψ = ∂tφ`.
pub fn energy_rate(phi: &ScalarField, psi: &ScalarField, spec: &ModelSpec) -> f64 {
    assert_eq!(phi.grid().sizes(), psi.grid().sizes(), "fields on different grids");
    let grid = phi.grid();
    let padded = padded_potential(spec, phi);
    let w = w_from(phi, &padded);
    let w_m = pad(&w);
    let psi_m = pad(psi);
    let lap_psi = laplacian(psi);
    let nonlinear: Vec<f64> = (0..psi_m.len())
        .map(|i| (w_m[i] * padded.f_prime[i] + spec.nu * padded.f[i]) * psi_m[i])
        .collect();
    let grad_inner = -phi.inner(&lap_psi);
    -w.inner(&lap_psi) + spec.nu * grad_inner + padded_integral(grid, &nonlinear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PotentialFamily, PotentialSpec};
    use crate::spectral::Grid;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn spec(nu: f64) -> ModelSpec {
        ModelSpec {
            nu,
            ..ModelSpec::default()
        }
    }

    /// Random real field supported on modes with index magnitude ≤ `band`.
    fn band_limited(grid: &Grid, band: f64, amp: f64, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mags = grid.mode_index_magnitude();
        let raw: Vec<Complex64> = mags
            .iter()
            .map(|&m| {
                if m <= band {
                    Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let values = grid.inverse(&raw);
        ScalarField::from_values(grid, values).unwrap()
    }

    #[test]
    fn constant_fields() {
        let g = Grid::uniform(2, 16, 1.5).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!(compute_w(&one, &spec(1.0)).max_abs() < 1e-15);
        assert!(compute_mu(&one, &spec(-2.0)).max_abs() < 1e-15);
        assert_eq!(compute_energy(&one, &spec(3.0)).total, 0.0);
        assert_eq!(mean_mu(&one, &spec(3.0)), 0.0);

        let c = 0.7;
        let w = compute_w(&ScalarField::constant(&g, c), &spec(1.0));
        assert!(w.values().iter().all(|v| (v - (c * c * c - c)).abs() < 1e-14));

        let two = ScalarField::constant(&g, 2.0);
        let mu = compute_mu(&two, &spec(0.0));
        assert!(mu.values().iter().all(|v| (v - 66.0).abs() < 1e-12));

        let nu = 0.4;
        let m = mean_mu(&ScalarField::constant(&g, c), &spec(nu));
        assert!((m - (3.0 * c * c - 1.0 + nu) * (c * c * c - c)).abs() < 1e-14);

        let e = compute_energy(&ScalarField::zeros(&g), &spec(nu));
        assert_eq!(e.willmore, 0.0);
        assert!((e.ginzburg_landau - 0.25 * g.volume()).abs() < 1e-14);
        assert!((e.total - 0.25 * nu * g.volume()).abs() < 1e-14);
    }

    #[test]
    fn w_of_cosine_matches_pointwise_oracle() {
        let g = Grid::uniform(2, 32, 1.0).unwrap();
        let a = 0.8;
        let phi = ScalarField::from_fn(&g, |x| a * (2.0 * PI * x[0]).cos());
        let w = compute_w(&phi, &spec(1.0));
        for (x, v) in g.coordinates().zip(w.values()) {
            let s = a * (2.0 * PI * x[0]).cos();
            let oracle = 4.0 * PI * PI * s + s * s * s - s;
            assert!((v - oracle).abs() < 1e-11, "{v} vs {oracle}");
        }
    }

    #[test]
    fn mu_is_the_variational_derivative() {
        let g = Grid::new(&[16, 16], &[2.0, 2.5]).unwrap();
        let phi = band_limited(&g, 5.0, 0.3, 1).map(|v| v + 0.1);
        let s = spec(0.7);
        let pots = chemical_potentials(&phi, &s);
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..20 {
            let shift = rng.gen_range(-0.5..0.5);
            let psi = band_limited(&g, 6.0, 1.0, 100 + trial).map(|v| v + shift);
            let plus = phi.add(&psi.scaled(h));
            let minus = phi.sub(&psi.scaled(h));
            let fd_e = (compute_energy(&plus, &s).total - compute_energy(&minus, &s).total) / (2.0 * h);
            let exact_e = pots.mu.inner(&psi);
            assert!((fd_e - exact_e).abs() < 1e-5 * exact_e.abs().max(1.0), "{fd_e} {exact_e}");
            let fd_g = (compute_energy(&plus, &s).ginzburg_landau
                - compute_energy(&minus, &s).ginzburg_landau)
                / (2.0 * h);
            let exact_g = pots.w.inner(&psi);
            assert!((fd_g - exact_g).abs() < 1e-5 * exact_g.abs().max(1.0));
        }
    }

    #[test]
    fn mean_mu_identity() {
        let g = Grid::uniform(3, 16, 1.0).unwrap();
        let phi = band_limited(&g, 6.0, 0.2, 5);
        let s = spec(-0.3);
        let p = chemical_potentials(&phi, &s);
        let scale = p.mu.max_abs().max(1.0);
        assert!((p.mean_mu - p.mu.mean()).abs() < 1e-10 * scale);
    }

    #[test]
    fn split_form_for_band_limited_fields() {
        let g = Grid::uniform(2, 32, 1.0).unwrap();
        let phi = band_limited(&g, 2.0, 0.3, 7);
        for nu in [0.0, 1.0, -0.5] {
            let e = compute_energy(&phi, &spec(nu));
            assert!((e.split_form.sum() - e.total).abs() < 1e-10 * e.total.abs());
            assert!((e.total - (e.willmore + nu * e.ginzburg_landau)).abs() <= 1e-12 * e.total.abs());
        }
    }

    #[test]
    fn energy_rate_is_mu_pairing() {
        let g = Grid::new(&[16, 24], &[1.0, 1.5]).unwrap();
        let s = spec(1.3);
        let phi = band_limited(&g, 7.0, 0.4, 11);
        let zero = ScalarField::zeros(&g);
        assert_eq!(energy_rate(&phi, &zero, &s), 0.0);
        let mu = compute_mu(&phi, &s);
        for seed in 0..5 {
            let psi = band_limited(&g, 9.0, 1.0, 40 + seed);
            let r = energy_rate(&phi, &psi, &s);
            let pair = mu.inner(&psi);
            assert!((r - pair).abs() < 1e-9 * pair.abs().max(1e-300), "{r} {pair}");
        }
    }

    #[test]
    fn energy_invariant_under_truncation_beyond_support() {
        let g = Grid::uniform(2, 32, 2.0 * PI).unwrap();
        let phi = ScalarField::from_fn(&g, |x| 0.5 * x[0].cos() + 0.2 * (2.0 * x[1]).sin());
        let e = compute_energy(&phi, &spec(1.0)).total;
        for cutoff in [3.0, 5.0, 10.0, f64::INFINITY] {
            let t = crate::spectral::truncate_modes(&phi, cutoff);
            assert!((compute_energy(&t, &spec(1.0)).total - e).abs() < 1e-12 * e);
        }
    }

    #[test]
    fn general_even_polynomial_is_consistent() {
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let s = ModelSpec {
            potential: PotentialSpec::new(PotentialFamily::EvenPolynomial(vec![0.1, -0.3, 0.0, 0.05])),
            ..spec(0.5)
        };
        let phi = band_limited(&g, 4.0, 0.3, 3);
        let psi = band_limited(&g, 4.0, 1.0, 4);
        let h = 1e-5;
        let fd = (compute_energy(&phi.add(&psi.scaled(h)), &s).total
            - compute_energy(&phi.sub(&psi.scaled(h)), &s).total)
            / (2.0 * h);
        let exact = compute_mu(&phi, &s).inner(&psi);
        assert!((fd - exact).abs() < 1e-5 * exact.abs());
    }
}
