//! Spectral differential operators, the Leray projector and mode truncation.
//!
//! Derivatives multiply mode `k` by `i k`, with the Nyquist component of `k`
//! set to zero on every axis. The Laplacian uses the same wavenumbers, so
//! `div grad = Δ` holds exactly.

use num_complex::Complex64;

use super::dealias;
use super::field::{ScalarField, TensorField, VectorField};
use super::grid::Grid;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Spectrum of `∂f/∂x_axis` given the spectrum of `f`.
pub(crate) fn derivative_spectrum(grid: &Grid, spectrum: &[Complex64], axis: usize) -> Vec<Complex64> {
    grid.derivative_k_flat(axis)
        .iter()
        .zip(spectrum)
        .map(|(&k, &c)| I * k * c)
        .collect()
}

pub(crate) fn laplacian_spectrum(grid: &Grid, spectrum: &[Complex64]) -> Vec<Complex64> {
    grid.derivative_k_squared()
        .iter()
        .zip(spectrum)
        .map(|(&k2, &c)| -k2 * c)
        .collect()
}

/// Leray projection `(I - k kᵀ/|k|²) v̂` applied in place to component spectra.
pub(crate) fn project_spectra(grid: &Grid, spectra: &mut [Vec<Complex64>]) {
    let d = spectra.len();
    let k2 = grid.derivative_k_squared();
    let ks: Vec<&[f64]> = (0..d).map(|a| grid.derivative_k_flat(a)).collect();
    for flat in 0..grid.len() {
        if k2[flat] == 0.0 {
            continue;
        }
        let mut kdotv = Complex64::new(0.0, 0.0);
        for a in 0..d {
            kdotv += ks[a][flat] * spectra[a][flat];
        }
        let factor = kdotv / k2[flat];
        for a in 0..d {
            spectra[a][flat] -= ks[a][flat] * factor;
        }
    }
}

/// Spectrum of `div v` from component spectra.
pub(crate) fn divergence_spectrum(grid: &Grid, spectra: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (a, s) in spectra.iter().enumerate() {
        for ((o, &k), &c) in out.iter_mut().zip(grid.derivative_k_flat(a)).zip(s) {
            *o += I * k * c;
        }
    }
    out
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    ScalarField::from_spectrum_unchecked(f.grid(), laplacian_spectrum(f.grid(), f.spectrum()))
}

pub fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField::from_spectrum_unchecked(f.grid(), derivative_spectrum(f.grid(), f.spectrum(), axis))
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let comps = (0..f.grid().dims()).map(|a| derivative(f, a)).collect();
    VectorField::from_components_flagged(comps, false)
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let spectra: Vec<Vec<Complex64>> = v.components().iter().map(|c| c.spectrum().to_vec()).collect();
    ScalarField::from_spectrum_unchecked(v.grid(), divergence_spectrum(v.grid(), &spectra))
}

/// Orthogonal projection onto divergence-free fields. The mean (`k = 0`) passes
/// through unchanged.
pub fn leray_project(v: &VectorField) -> VectorField {
    let grid = v.grid();
    let mut spectra: Vec<Vec<Complex64>> = v.components().iter().map(|c| c.spectrum().to_vec()).collect();
    project_spectra(grid, &mut spectra);
    let comps = spectra
        .into_iter()
        .map(|s| ScalarField::from_spectrum_unchecked(grid, s))
        .collect();
    VectorField::from_components_flagged(comps, true)
}

/// Zeroes every mode with physical wavenumber magnitude `|k| > cutoff`.
pub fn truncate_modes(f: &ScalarField, cutoff: f64) -> ScalarField {
    assert!(cutoff >= 0.0, "cutoff must be nonnegative");
    if cutoff.is_infinite() {
        return f.clone();
    }
    let grid = f.grid();
    let mut spectrum = f.spectrum().to_vec();
    grid.for_each_mode(|flat, k, _| {
        if k.iter().map(|k| k * k).sum::<f64>().sqrt() > cutoff {
            spectrum[flat] = Complex64::new(0.0, 0.0);
        }
    });
    ScalarField::from_spectrum_unchecked(grid, spectrum)
}

/// Galerkin projection used by the time stepper: drops Nyquist modes and,
/// if `cutoff` is given, every mode whose integer index magnitude exceeds it.
pub(crate) fn galerkin_spectrum(grid: &Grid, spectrum: &mut [Complex64], cutoff: Option<f64>) {
    let magnitude = cutoff.map(|_| grid.mode_index_magnitude());
    for flat in 0..grid.len() {
        let outside = match (&magnitude, cutoff) {
            (Some(m), Some(c)) => m[flat] > c,
            _ => false,
        };
        if outside || grid.has_nyquist_component(flat) {
            spectrum[flat] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Galerkin projection `P_n` onto modes of index magnitude at most `cutoff`
/// (Nyquist modes excluded).
pub fn galerkin_project(f: &ScalarField, cutoff: Option<f64>) -> ScalarField {
    let mut spectrum = f.spectrum().to_vec();
    galerkin_spectrum(f.grid(), &mut spectrum, cutoff);
    ScalarField::from_spectrum_unchecked(f.grid(), spectrum)
}

pub fn galerkin_project_vector(v: &VectorField, cutoff: Option<f64>) -> VectorField {
    let comps = v
        .components()
        .iter()
        .map(|c| galerkin_project(c, cutoff))
        .collect();
    VectorField::from_components_flagged(comps, v.is_divergence_free())
}

/// Velocity gradient with `entry(i, j) = ∂v_i/∂x_j`.
pub fn velocity_gradient(v: &VectorField) -> TensorField {
    let d = v.dims();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            entries.push(derivative(v.component(i), j));
        }
    }
    TensorField::new(d, entries)
}

/// Symmetrized gradient `Dv = ½(∇v + ∇vᵀ)`.
pub fn symmetrized_gradient(v: &VectorField) -> TensorField {
    let g = velocity_gradient(v);
    let d = v.dims();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            entries.push(g.entry(i, j).zip_map(g.entry(j, i), |a, b| 0.5 * (a + b)));
        }
    }
    TensorField::new(d, entries)
}

/// `∫ |∇f|²`, evaluated mode-wise.
pub fn gradient_norm_sq(f: &ScalarField) -> f64 {
    f.grid().volume()
        * f.grid()
            .derivative_k_squared()
            .iter()
            .zip(f.spectrum())
            .map(|(&k2, c)| k2 * c.norm_sqr())
            .sum::<f64>()
}

/// `∫ |Δf|²`, evaluated mode-wise.
pub fn laplacian_norm_sq(f: &ScalarField) -> f64 {
    f.grid().volume()
        * f.grid()
            .derivative_k_squared()
            .iter()
            .zip(f.spectrum())
            .map(|(&k2, c)| k2 * k2 * c.norm_sqr())
            .sum::<f64>()
}

/// V-norm surrogate `(‖f‖² + ‖∇f‖²)^½`.
pub fn h1_norm(f: &ScalarField) -> f64 {
    (f.inner(f) + gradient_norm_sq(f)).sqrt()
}

/// W-norm surrogate `(‖f‖² + ‖Δf‖²)^½`.
pub fn w_norm(f: &ScalarField) -> f64 {
    (f.inner(f) + laplacian_norm_sq(f)).sqrt()
}

/// V-norm surrogate of a vector field, `(‖v‖² + ‖∇v‖²)^½`.
pub fn h1_norm_vector(v: &VectorField) -> f64 {
    v.components()
        .iter()
        .map(|c| c.inner(c) + gradient_norm_sq(c))
        .sum::<f64>()
        .sqrt()
}

/// Dealiased `a · ∇b` style contraction `Σ_i a_i ∂_i b`.
pub fn advect(v: &VectorField, f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let mut acc = vec![0.0; grid.padded().len()];
    for (axis, vi) in v.components().iter().enumerate() {
        let vp = dealias::pad(vi);
        let dp = dealias::pad_spectrum(grid, &derivative_spectrum(grid, f.spectrum(), axis));
        for ((o, a), b) in acc.iter_mut().zip(&vp).zip(&dp) {
            *o += a * b;
        }
    }
    dealias::from_padded(grid, &acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: &Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ScalarField::from_values(grid, values).unwrap()
    }

    fn random_vector(grid: &Grid, seed: u64) -> VectorField {
        VectorField::from_components(
            (0..grid.dims())
                .map(|a| random_field(grid, seed + a as u64))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_has_single_zero_mode() {
        let g = Grid::uniform(2, 8, 1.0).unwrap();
        let f = ScalarField::constant(&g, 2.5);
        let s = f.spectrum();
        assert!((s[0].re - 2.5).abs() < 1e-15);
        assert!(s[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn cosine_has_two_conjugate_modes() {
        let g = Grid::new(&[16, 8], &[2.0, 1.0]).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0] / 2.0).cos());
        let s = f.spectrum();
        // Flat index of (m1, m2) = m1 * 8 + m2.
        let plus = 8;
        let minus = 15 * 8;
        assert!((s[plus] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((s[minus] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let others: f64 = s
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != plus && *i != minus)
            .map(|(_, c)| c.norm())
            .sum();
        assert!(others < 1e-13);
        assert!((g.wavenumbers(0)[1] - PI).abs() < 1e-15);
    }

    #[test]
    fn roundtrip_and_parseval() {
        let g = Grid::new(&[16, 12, 8], &[1.0, 2.0, 0.5]).unwrap();
        let f = random_field(&g, 7);
        let back = ScalarField::from_spectrum(&g, f.spectrum().to_vec()).unwrap();
        let err: f64 = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err / f.values().iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12);
        assert!((f.l2_norm() - f.spectral_l2_norm()).abs() / f.l2_norm() < 1e-12);
    }

    #[test]
    fn size_mismatch_is_config_error() {
        let g = Grid::uniform(2, 8, 1.0).unwrap();
        assert!(ScalarField::from_values(&g, vec![0.0; 10]).is_err());
        assert!(ScalarField::from_spectrum(&g, vec![Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn laplacian_of_cosine_eigenfunction() {
        let g = Grid::new(&[16, 16], &[1.5, 1.0]).unwrap();
        let k = 2.0 * PI / 1.5;
        let f = ScalarField::from_fn(&g, |x| (k * x[0]).cos());
        let lap = laplacian(&f);
        for (l, v) in lap.values().iter().zip(f.values()) {
            assert!((l + k * k * v).abs() < 1e-11);
        }
    }

    #[test]
    fn div_grad_is_laplacian() {
        let g = Grid::uniform(3, 8, 1.0).unwrap();
        let f = random_field(&g, 3);
        let a = divergence(&gradient(&f));
        let b = laplacian(&f);
        let scale = b.max_abs();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    /// Second-order centered differences on the same grid.
    fn fd_laplacian(f: &ScalarField) -> Vec<f64> {
        let g = f.grid();
        let (n0, n1) = (g.sizes()[0], g.sizes()[1]);
        let (h0, h1) = (g.spacing(0), g.spacing(1));
        let v = f.values();
        let at = |i: usize, j: usize| v[(i % n0) * n1 + (j % n1)];
        let mut out = vec![0.0; v.len()];
        for i in 0..n0 {
            for j in 0..n1 {
                out[i * n1 + j] = (at(i + 1, j) - 2.0 * at(i, j) + at(i + n0 - 1, j)) / (h0 * h0)
                    + (at(i, j + 1) - 2.0 * at(i, j) + at(i, j + n1 - 1)) / (h1 * h1);
            }
        }
        out
    }

    #[test]
    fn laplacian_matches_finite_differences_at_second_order() {
        // Smooth periodic function with random phases; the FD error must fall
        // by ~4 per halving of h.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phases: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        let f = |x: &[f64]| {
            (2.0 * PI * x[0] + phases[0]).sin() * (2.0 * PI * x[1] + phases[1]).cos()
                + 0.5 * (4.0 * PI * x[0] + phases[2]).cos()
                + 0.3 * (2.0 * PI * (x[0] + 2.0 * x[1]) + phases[3]).sin()
        };
        let errors: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let g = Grid::uniform(2, n, 1.0).unwrap();
                let field = ScalarField::from_fn(&g, f);
                let spectral = laplacian(&field);
                fd_laplacian(&field)
                    .iter()
                    .zip(spectral.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn leray_of_constant_and_gradient() {
        let g = Grid::uniform(2, 8, 1.0).unwrap();
        let c = VectorField::from_components(vec![
            ScalarField::constant(&g, 1.5),
            ScalarField::constant(&g, -0.5),
        ])
        .unwrap();
        let pc = leray_project(&c);
        assert!(pc.sub(&c).l2_norm() < 1e-15);

        let mut p = random_field(&g, 5);
        let mean = p.mean();
        p.values_mut().iter_mut().for_each(|v| *v -= mean);
        let pg = leray_project(&gradient(&p));
        assert!(pg.l2_norm() < 1e-12);
    }

    #[test]
    fn leray_is_idempotent_symmetric_and_divergence_free() {
        let g = Grid::new(&[16, 8, 8], &[1.0, 0.5, 2.0]).unwrap();
        let v = random_vector(&g, 21);
        let w = random_vector(&g, 42);
        let pv = leray_project(&v);
        let ppv = leray_project(&pv);
        assert!(ppv.sub(&pv).l2_norm() <= 1e-12 * pv.l2_norm());
        let div = divergence(&pv).max_abs();
        assert!(div <= 1e-10 * pv.max_magnitude() / g.min_length());
        let lhs = pv.inner(&w);
        let rhs = v.inner(&leray_project(&w));
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        assert!(pv.l2_norm() <= v.l2_norm());
    }

    #[test]
    fn truncation_limits_and_monotone_error() {
        let g = Grid::uniform(2, 32, 1.0).unwrap();
        let f = ScalarField::from_fn(&g, |x| {
            (0.7 * (2.0 * PI * x[0]).sin() + 0.4 * (2.0 * PI * x[1]).cos()).exp()
        });
        let same = truncate_modes(&f, f64::INFINITY);
        assert_eq!(same.values(), f.values());
        let mean = truncate_modes(&f, 0.0);
        assert!(mean.values().iter().all(|v| (v - f.mean()).abs() < 1e-12));
        let mut last = f64::INFINITY;
        for n in 1..12 {
            let t = truncate_modes(&f, 2.0 * PI * n as f64);
            assert!(t.l2_norm() <= f.l2_norm() + 1e-14);
            let err = t.sub(&f).l2_norm();
            assert!(err < last, "error must decrease at n = {n}");
            last = err;
        }
    }

    #[test]
    fn symmetrized_gradient_of_single_mode() {
        // v = (sin(2πy), 0): ∂v1/∂y = 2π cos(2πy), D12 = D21 = π cos(2πy).
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let v = VectorField::from_components(vec![
            ScalarField::from_fn(&g, |x| (2.0 * PI * x[1]).sin()),
            ScalarField::zeros(&g),
        ])
        .unwrap();
        let d = symmetrized_gradient(&v);
        let expected = ScalarField::from_fn(&g, |x| PI * (2.0 * PI * x[1]).cos());
        for (a, b) in d.entry(0, 1).values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(d.entry(1, 0).sub(d.entry(0, 1)).max_abs() < 1e-15);
        assert!(d.entry(0, 0).max_abs() < 1e-12);
        assert!(d.entry(1, 1).max_abs() < 1e-12);
    }

    #[test]
    fn rigid_rotation_has_vanishing_strain_inside_bump() {
        // Rotation about the box centre cut off by a wide smooth bump; near
        // the centre the field is an exact rotation so Dv ≈ 0 there.
        let g = Grid::uniform(2, 128, 1.0).unwrap();
        let bump = |x: &[f64]| {
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            (-(r2 / 0.04).powi(4)).exp()
        };
        let v = VectorField::from_components(vec![
            ScalarField::from_fn(&g, |x| -(x[1] - 0.5) * bump(x)),
            ScalarField::from_fn(&g, |x| (x[0] - 0.5) * bump(x)),
        ])
        .unwrap();
        let d = symmetrized_gradient(&v);
        let grad = velocity_gradient(&v);
        let centre = 64 * 128 + 64;
        for i in 0..2 {
            for j in 0..2 {
                assert!(d.entry(i, j).values()[centre].abs() < 1e-6);
            }
        }
        assert!((grad.entry(1, 0).values()[centre] - 1.0).abs() < 1e-6);
    }
}
