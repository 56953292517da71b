use std::sync::OnceLock;

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// A real periodic field sampled on a [`Grid`].
///
/// The Fourier coefficients are computed on first use and cached until the
/// samples are mutated through [`ScalarField::values_mut`].
#[derive(Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("len", &self.values.len())
            .finish()
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::from_values_unchecked(grid, vec![value; grid.len()])
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} samples, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    pub(crate) fn from_values_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField {
            grid: grid.clone(),
            values,
            spectrum: OnceLock::new(),
        }
    }

    /// Samples `f` at the grid coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.coordinates().map(|x| f(&x)).collect();
        Self::from_values_unchecked(grid, values)
    }

    /// Builds a field from Fourier coefficients (see [`Grid::forward`] for the
    /// normalization).
    pub fn from_spectrum(grid: &Grid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.len() {
            return Err(Error::Config(format!(
                "spectrum has {} modes, grid expects {}",
                spectrum.len(),
                grid.len()
            )));
        }
        Ok(Self::from_spectrum_unchecked(grid, spectrum))
    }

    pub(crate) fn from_spectrum_unchecked(grid: &Grid, spectrum: Vec<Complex64>) -> Self {
        let values = grid.inverse(&spectrum);
        let cache = OnceLock::new();
        let _ = cache.set(spectrum);
        ScalarField {
            grid: grid.clone(),
            values,
            spectrum: cache,
        }
    }

    /// Drops the cached spectrum so that later transforms start from the
    /// samples alone. Fields restored from disk behave identically.
    pub(crate) fn detached(self) -> Self {
        Self::from_values_unchecked(&self.grid, self.values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.spectrum = OnceLock::new();
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid == other.grid, "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values_unchecked(&self.grid, values)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| factor * v)
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Grid quadrature of the field over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// L2 inner product `∫ f g`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert!(self.grid == other.grid, "fields live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L2 norm computed from the Fourier coefficients, `(|Ω| Σ |c_k|²)^½`.
    pub fn spectral_l2_norm(&self) -> f64 {
        (self.grid.volume() * self.spectrum().iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// A `d`-component vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
    divergence_free: bool,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            components: (0..grid.dims()).map(|_| ScalarField::zeros(grid)).collect(),
            divergence_free: true,
        }
    }

    pub fn from_components(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Config("vector field needs components".into()));
        };
        let grid = first.grid().clone();
        if components.len() != grid.dims() || components.iter().any(|c| *c.grid() != grid) {
            return Err(Error::Config(
                "vector components must match the grid dimension".into(),
            ));
        }
        Ok(VectorField {
            components,
            divergence_free: false,
        })
    }

    pub(crate) fn from_components_flagged(components: Vec<ScalarField>, divergence_free: bool) -> Self {
        VectorField {
            components,
            divergence_free,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn dims(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_free
    }

    pub fn inner(&self, other: &VectorField) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Pointwise sup of the Euclidean norm.
    pub fn max_magnitude(&self) -> f64 {
        let n = self.grid().len();
        (0..n)
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.values()[i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect(),
            divergence_free: self.divergence_free && other.divergence_free,
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
            divergence_free: self.divergence_free && other.divergence_free,
        }
    }

    pub fn scaled(&self, factor: f64) -> VectorField {
        VectorField {
            components: self.components.iter().map(|c| c.scaled(factor)).collect(),
            divergence_free: self.divergence_free,
        }
    }
}

/// A `d x d` matrix-valued field stored row-major (`entry(i, j)`).
#[derive(Clone, Debug)]
pub struct TensorField {
    dims: usize,
    entries: Vec<ScalarField>,
}

impl TensorField {
    pub(crate) fn new(dims: usize, entries: Vec<ScalarField>) -> Self {
        debug_assert_eq!(entries.len(), dims * dims);
        TensorField { dims, entries }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.dims + j]
    }

    /// Pointwise Frobenius product `A : B`.
    pub fn contract(&self, other: &TensorField) -> ScalarField {
        let grid = self.entries[0].grid();
        let mut out = vec![0.0; grid.len()];
        for (a, b) in self.entries.iter().zip(&other.entries) {
            for ((o, x), y) in out.iter_mut().zip(a.values()).zip(b.values()) {
                *o += x * y;
            }
        }
        ScalarField::from_values_unchecked(grid, out)
    }

    /// `∫ |A|²`.
    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.inner(e)).sum()
    }
}
