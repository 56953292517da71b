use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible number of grid points per axis.
pub const MIN_POINTS: usize = 8;

struct AxisPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

struct GridInner {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    /// Signed mode index per axis, in FFT storage order.
    modes: Vec<Vec<i64>>,
    /// Physical wavenumber per axis.
    wavenumbers: Vec<Vec<f64>>,
    /// Wavenumber used by derivative operators: the Nyquist entry is zero.
    derivative_wavenumbers: Vec<Vec<f64>>,
    plans: Vec<AxisPlan>,
    padded: OnceLock<Grid>,
    padded_positions: OnceLock<Vec<Option<usize>>>,
    k_squared: OnceLock<Vec<f64>>,
    k_flat: OnceLock<Vec<Vec<f64>>>,
}

/// A uniform periodic grid on the box `[0, L_1) x ... x [0, L_d)`.
///
/// Samples are stored row-major: axis 0 varies slowest. The grid is cheap to
/// clone; clones share FFT plans.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.sizes == other.inner.sizes && self.inner.lengths == other.inner.lengths)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("sizes", &self.inner.sizes)
            .field("lengths", &self.inner.lengths)
            .finish()
    }
}

impl Grid {
    /// Creates a 2-D or 3-D grid. Every axis needs an even number of points,
    /// at least [`MIN_POINTS`], and a positive finite length.
    pub fn new(sizes: &[usize], lengths: &[f64]) -> Result<Self> {
        if !(sizes.len() == 2 || sizes.len() == 3) {
            return Err(Error::Config(format!(
                "grid dimension must be 2 or 3, got {}",
                sizes.len()
            )));
        }
        if lengths.len() != sizes.len() {
            return Err(Error::Config(format!(
                "grid has {} sizes but {} lengths",
                sizes.len(),
                lengths.len()
            )));
        }
        for (axis, &n) in sizes.iter().enumerate() {
            if n < MIN_POINTS || n % 2 != 0 {
                return Err(Error::Config(format!(
                    "axis {axis}: grid size {n} must be even and at least {MIN_POINTS}"
                )));
            }
        }
        for (axis, &l) in lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Config(format!(
                    "axis {axis}: box length {l} must be positive"
                )));
            }
        }
        Ok(Self::build(sizes, lengths))
    }

    /// Square (or cubic) grid with `n` points and length `length` per axis.
    pub fn uniform(dims: usize, n: usize, length: f64) -> Result<Self> {
        Self::new(&vec![n; dims], &vec![length; dims])
    }

    fn build(sizes: &[usize], lengths: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let mut modes = Vec::with_capacity(sizes.len());
        let mut wavenumbers = Vec::with_capacity(sizes.len());
        let mut derivative_wavenumbers = Vec::with_capacity(sizes.len());
        let mut plans = Vec::with_capacity(sizes.len());
        for (&n, &l) in sizes.iter().zip(lengths) {
            let m: Vec<i64> = (0..n).map(|j| signed_mode(j, n)).collect();
            let k: Vec<f64> = m.iter().map(|&m| 2.0 * PI * m as f64 / l).collect();
            let kd: Vec<f64> = m
                .iter()
                .zip(&k)
                .map(|(&m, &k)| if is_nyquist(m, n) { 0.0 } else { k })
                .collect();
            modes.push(m);
            wavenumbers.push(k);
            derivative_wavenumbers.push(kd);
            plans.push(AxisPlan {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            });
        }
        Grid {
            inner: Arc::new(GridInner {
                sizes: sizes.to_vec(),
                lengths: lengths.to_vec(),
                modes,
                wavenumbers,
                derivative_wavenumbers,
                plans,
                padded: OnceLock::new(),
                padded_positions: OnceLock::new(),
                k_squared: OnceLock::new(),
                k_flat: OnceLock::new(),
            }),
        }
    }

    pub fn dims(&self) -> usize {
        self.inner.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.inner.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.inner.lengths
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.inner.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.inner.lengths.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.inner.lengths[axis] / self.inner.sizes[axis] as f64
    }

    pub fn min_length(&self) -> f64 {
        self.inner.lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn modes(&self, axis: usize) -> &[i64] {
        &self.inner.modes[axis]
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.wavenumbers[axis]
    }

    pub fn derivative_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.derivative_wavenumbers[axis]
    }

    /// Whether the signed mode index lies on the Nyquist frequency of `axis`.
    pub fn is_nyquist_mode(&self, axis: usize, mode: i64) -> bool {
        is_nyquist(mode, self.inner.sizes[axis])
    }

    /// Splits a flat index into per-axis indices.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dims()).rev() {
            let n = self.inner.sizes[axis];
            out[axis] = flat % n;
            flat /= n;
        }
    }

    /// Physical coordinates of every grid point, flattened row-major.
    pub fn coordinates(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let d = self.dims();
        (0..self.len()).map(move |flat| {
            let mut idx = vec![0; d];
            self.unflatten(flat, &mut idx);
            idx.iter()
                .enumerate()
                .map(|(a, &i)| i as f64 * self.spacing(a))
                .collect()
        })
    }

    /// Calls `f(flat, k_physical, k_derivative)` for every mode in storage order.
    pub fn for_each_mode(&self, mut f: impl FnMut(usize, &[f64], &[f64])) {
        let d = self.dims();
        let mut idx = vec![0; d];
        let mut k = vec![0.0; d];
        let mut kd = vec![0.0; d];
        for flat in 0..self.len() {
            self.unflatten(flat, &mut idx);
            for a in 0..d {
                k[a] = self.inner.wavenumbers[a][idx[a]];
                kd[a] = self.inner.derivative_wavenumbers[a][idx[a]];
            }
            f(flat, &k, &kd);
        }
    }

    /// Squared magnitude of the derivative wavenumber for every mode.
    pub fn derivative_k_squared(&self) -> &[f64] {
        self.inner.k_squared.get_or_init(|| {
            let mut out = vec![0.0; self.len()];
            self.for_each_mode(|flat, _, kd| out[flat] = kd.iter().map(|k| k * k).sum());
            out
        })
    }

    /// Derivative wavenumber along `axis` for every mode, in storage order.
    pub fn derivative_k_flat(&self, axis: usize) -> &[f64] {
        &self.inner.k_flat.get_or_init(|| {
            let mut out = vec![vec![0.0; self.len()]; self.dims()];
            self.for_each_mode(|flat, _, kd| {
                for (a, k) in kd.iter().enumerate() {
                    out[a][flat] = *k;
                }
            });
            out
        })[axis]
    }

    /// Integer mode-index magnitude `sqrt(sum m_i^2)` for every mode.
    pub fn mode_index_magnitude(&self) -> Vec<f64> {
        let d = self.dims();
        let mut idx = vec![0; d];
        (0..self.len())
            .map(|flat| {
                self.unflatten(flat, &mut idx);
                (0..d)
                    .map(|a| {
                        let m = self.inner.modes[a][idx[a]] as f64;
                        m * m
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// True if the mode at `flat` has a Nyquist index on any axis.
    pub fn has_nyquist_component(&self, flat: usize) -> bool {
        let d = self.dims();
        let mut idx = vec![0; d];
        self.unflatten(flat, &mut idx);
        (0..d).any(|a| self.is_nyquist_mode(a, self.inner.modes[a][idx[a]]))
    }

    /// The 3/2-refined grid used for dealiased pointwise products.
    pub fn padded(&self) -> &Grid {
        self.inner.padded.get_or_init(|| {
            let sizes: Vec<usize> = self.inner.sizes.iter().map(|&n| 3 * n / 2).collect();
            Grid::build(&sizes, &self.inner.lengths)
        })
    }

    /// Index of each mode inside the padded spectrum (`None` for Nyquist modes).
    pub(crate) fn padded_positions(&self) -> &[Option<usize>] {
        self.inner
            .padded_positions
            .get_or_init(|| super::dealias::compute_padded_positions(self))
    }

    /// Forward transform: `c_k = (1/N) sum_x f(x) exp(-i k.x)`, so that
    /// `f(x) = sum_k c_k exp(i k.x)`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len(), "field size does not match grid");
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        let scale = 1.0 / self.len() as f64;
        for c in &mut data {
            *c *= scale;
        }
        data
    }

    /// Inverse of [`Grid::forward`]; returns the real part of the synthesis.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        assert_eq!(spectrum.len(), self.len(), "spectrum size does not match grid");
        let mut data = spectrum.to_vec();
        self.transform(&mut data, false);
        data.into_iter().map(|c| c.re).collect()
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let sizes = &self.inner.sizes;
        let total = data.len();
        for (axis, plan) in self.inner.plans.iter().enumerate() {
            let n = sizes[axis];
            let stride: usize = sizes[axis + 1..].iter().product();
            let fft = if forward { &plan.forward } else { &plan.inverse };
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            let block = n * stride;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}

fn signed_mode(j: usize, n: usize) -> i64 {
    let j = j as i64;
    let n = n as i64;
    if 2 * j < n || (n % 2 == 1 && 2 * j <= n) {
        j
    } else {
        j - n
    }
}

fn is_nyquist(mode: i64, n: usize) -> bool {
    n % 2 == 0 && mode == -(n as i64) / 2
}
