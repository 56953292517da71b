//! Dealiased pointwise nonlinearities.
//!
//! Products are evaluated on the 3/2-refined grid (the zero-padding form of the
//! 2/3 rule): spectra are zero-padded, synthesized on the fine grid, combined
//! pointwise, analysed, and truncated back. Nyquist modes are dropped in both
//! directions, so padding and truncation are adjoint to each other and every
//! field leaving this module has a zero Nyquist coefficient.

use num_complex::Complex64;

use super::field::ScalarField;
use super::grid::Grid;

/// Position of each coarse mode in the padded spectrum, `None` for Nyquist.
pub(super) fn compute_padded_positions(grid: &Grid) -> Vec<Option<usize>> {
    let fine = grid.padded();
    let d = grid.dims();
    let mut axis_maps: Vec<Vec<Option<usize>>> = Vec::with_capacity(d);
    for a in 0..d {
        let m_fine = fine.sizes()[a] as i64;
        axis_maps.push(
            grid.modes(a)
                .iter()
                .map(|&m| {
                    if grid.is_nyquist_mode(a, m) {
                        None
                    } else if m >= 0 {
                        Some(m as usize)
                    } else {
                        Some((m_fine + m) as usize)
                    }
                })
                .collect(),
        );
    }
    let mut strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * fine.sizes()[a + 1];
    }
    let mut idx = vec![0; d];
    (0..grid.len())
        .map(|flat| {
            grid.unflatten(flat, &mut idx);
            let mut dest = 0;
            for a in 0..d {
                dest += axis_maps[a][idx[a]]? * strides[a];
            }
            Some(dest)
        })
        .collect()
}

/// Synthesizes a coarse spectrum on the padded grid.
pub fn pad_spectrum(grid: &Grid, spectrum: &[Complex64]) -> Vec<f64> {
    let fine = grid.padded();
    let mut padded = vec![Complex64::new(0.0, 0.0); fine.len()];
    for (c, pos) in spectrum.iter().zip(grid.padded_positions()) {
        if let Some(p) = pos {
            padded[*p] = *c;
        }
    }
    fine.inverse(&padded)
}

/// Samples of `field` on the padded grid (exact trigonometric interpolation).
pub fn pad(field: &ScalarField) -> Vec<f64> {
    pad_spectrum(field.grid(), field.spectrum())
}

/// Analyses padded-grid samples and keeps the coarse, non-Nyquist modes.
pub fn truncate_padded(grid: &Grid, padded_values: &[f64]) -> Vec<Complex64> {
    let fine_spec = grid.padded().forward(padded_values);
    grid.padded_positions()
        .iter()
        .map(|pos| pos.map_or(Complex64::new(0.0, 0.0), |p| fine_spec[p]))
        .collect()
}

/// Field on `grid` obtained from padded-grid samples.
pub fn from_padded(grid: &Grid, padded_values: &[f64]) -> ScalarField {
    ScalarField::from_spectrum_unchecked(grid, truncate_padded(grid, padded_values))
}

/// Quadrature `∫ g` of padded-grid samples.
pub fn padded_integral(grid: &Grid, padded_values: &[f64]) -> f64 {
    padded_values.iter().sum::<f64>() * grid.padded().cell_volume()
}

/// Dealiased pointwise map of several fields.
pub fn dealiased_map(fields: &[&ScalarField], f: impl Fn(&[f64]) -> f64) -> ScalarField {
    let grid = fields[0].grid();
    let padded: Vec<Vec<f64>> = fields.iter().map(|g| pad(g)).collect();
    let mut args = vec![0.0; fields.len()];
    let out: Vec<f64> = (0..grid.padded().len())
        .map(|i| {
            for (a, p) in args.iter_mut().zip(&padded) {
                *a = p[i];
            }
            f(&args)
        })
        .collect();
    from_padded(grid, &out)
}

/// Dealiased product `a * b`.
pub fn dealiased_product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    dealiased_map(&[a, b], |x| x[0] * x[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn product_of_band_limited_modes_is_exact() {
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let a = ScalarField::from_fn(&g, |x| (2.0 * PI * 3.0 * x[0]).cos());
        let b = ScalarField::from_fn(&g, |x| (2.0 * PI * 4.0 * x[0]).sin());
        // sin(8πx)cos(6πx) = ½[sin(14πx) + sin(2πx)]; mode 7 < 8 survives.
        let p = dealiased_product(&a, &b);
        let exact = ScalarField::from_fn(&g, |x| {
            0.5 * ((2.0 * PI * 7.0 * x[0]).sin() + (2.0 * PI * x[0]).sin())
        });
        for (u, v) in p.values().iter().zip(exact.values()) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn aliased_product_is_removed() {
        // cos(2π·6x)² has a mode 12 that the 16-point grid would alias onto 4.
        let g = Grid::uniform(2, 16, 1.0).unwrap();
        let a = ScalarField::from_fn(&g, |x| (2.0 * PI * 6.0 * x[1]).cos());
        let p = dealiased_product(&a, &a);
        for v in p.values() {
            assert!((v - 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn pad_then_truncate_is_identity_off_nyquist() {
        let g = Grid::new(&[8, 10], &[1.0, 2.0]).unwrap();
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin() * (PI * 2.0 * x[1]).cos() + 0.3);
        let back = from_padded(&g, &pad(&f));
        for (u, v) in back.values().iter().zip(f.values()) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
