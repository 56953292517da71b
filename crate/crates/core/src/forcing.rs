//! External forcing `u(t, x)` and initial data `φ₀`.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::io::snapshot::Snapshot;
use crate::spectral::{galerkin_project, leray_project, Grid, ScalarField, VectorField};

/// Time modulation `g(t)` of the forcing amplitude.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `min(t / duration, 1)`.
    Ramp { duration: f64 },
    /// `sin(2π t / period)`.
    Sinusoid { period: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Ramp { duration } => (t / duration).min(1.0),
            TimeProfile::Sinusoid { period } => (2.0 * PI * t / period).sin(),
        }
    }
}

/// `amplitude · e_component · cos(2π Σ k_i x_i / L_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingMode {
    pub component: usize,
    pub wavevector: Vec<i64>,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForcingSpec {
    Zero,
    Modes {
        modes: Vec<ForcingMode>,
        divergence_free: bool,
        profile: TimeProfile,
    },
    /// Components `u_1..u_d` of a CHBK snapshot.
    File { path: PathBuf, profile: TimeProfile },
}

/// A forcing built on a grid: a fixed spatial field times `g(t)`.
#[derive(Clone, Debug)]
pub struct Forcing {
    spatial: Option<VectorField>,
    profile: TimeProfile,
}

fn check_wavevector(grid: &Grid, k: &[i64], what: &str) -> Result<()> {
    if k.len() != grid.dims() {
        return Err(Error::Config(format!(
            "{what}: wavevector {k:?} has {} entries, grid has {} axes",
            k.len(),
            grid.dims()
        )));
    }
    for (axis, &m) in k.iter().enumerate() {
        if 2 * m.unsigned_abs() as usize >= grid.sizes()[axis] {
            return Err(Error::Config(format!(
                "{what}: mode {m} on axis {axis} is not resolved by {} points",
                grid.sizes()[axis]
            )));
        }
    }
    Ok(())
}

fn cosine_mode(grid: &Grid, k: &[i64]) -> ScalarField {
    let lengths = grid.lengths().to_vec();
    ScalarField::from_fn(grid, |x| {
        let phase: f64 = x
            .iter()
            .zip(k)
            .zip(&lengths)
            .map(|((x, k), l)| 2.0 * PI * *k as f64 * x / l)
            .sum();
        phase.cos()
    })
}

impl Forcing {
    pub fn zero() -> Self {
        Forcing {
            spatial: None,
            profile: TimeProfile::Constant,
        }
    }

    pub fn from_field(field: VectorField, profile: TimeProfile) -> Self {
        Forcing {
            spatial: Some(field),
            profile,
        }
    }

    pub fn build(spec: &ForcingSpec, grid: &Grid) -> Result<Self> {
        match spec {
            ForcingSpec::Zero => Ok(Self::zero()),
            ForcingSpec::Modes {
                modes,
                divergence_free,
                profile,
            } => {
                let mut comps = vec![ScalarField::zeros(grid); grid.dims()];
                for m in modes {
                    if m.component >= grid.dims() {
                        return Err(Error::Config(format!(
                            "forcing component {} out of range for d = {}",
                            m.component + 1,
                            grid.dims()
                        )));
                    }
                    if !m.amplitude.is_finite() {
                        return Err(Error::Config("forcing amplitude must be finite".into()));
                    }
                    check_wavevector(grid, &m.wavevector, "forcing")?;
                    let term = cosine_mode(grid, &m.wavevector).scaled(m.amplitude);
                    comps[m.component] = comps[m.component].add(&term);
                }
                let mut field = VectorField::from_components(comps)?;
                if *divergence_free {
                    field = leray_project(&field);
                }
                Ok(Self::from_field(field, profile.clone()))
            }
            ForcingSpec::File { path, profile } => {
                let snap = Snapshot::read(path)?;
                if snap.sizes != grid.sizes() || snap.lengths != grid.lengths() {
                    return Err(Error::Mismatch(format!(
                        "forcing file {} is on a different grid",
                        path.display()
                    )));
                }
                let comps = (1..=grid.dims())
                    .map(|i| snap.scalar(grid, &format!("u_{i}")))
                    .collect::<Result<Vec<_>>>()?;
                if comps.iter().any(|c| c.values().iter().any(|v| !v.is_finite())) {
                    return Err(Error::Config("forcing file contains non-finite samples".into()));
                }
                Ok(Self::from_field(VectorField::from_components(comps)?, profile.clone()))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.spatial
            .as_ref()
            .map_or(true, |s| s.max_magnitude() == 0.0)
    }

    pub fn spatial(&self) -> Option<&VectorField> {
        self.spatial.as_ref()
    }

    pub fn profile(&self) -> &TimeProfile {
        &self.profile
    }

    pub fn at(&self, grid: &Grid, t: f64) -> VectorField {
        match &self.spatial {
            None => VectorField::zeros(grid),
            Some(s) => s.scaled(self.profile.eval(t)),
        }
    }

    /// Sum of two forcings sharing a time profile.
    pub fn plus(&self, other: &VectorField) -> Self {
        let spatial = match &self.spatial {
            None => other.clone(),
            Some(s) => s.add(other),
        };
        Forcing {
            spatial: Some(spatial),
            profile: self.profile.clone(),
        }
    }
}

/// One term `amplitude · cos(2π Σ k_i x_i / L_i)` of a modal initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTerm {
    pub amplitude: f64,
    pub wavevector: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Constant(f64),
    Modes { offset: f64, terms: Vec<ModeTerm> },
    /// Random field supported on `0 < |mode index| ≤ band`, scaled to RMS
    /// `amplitude` about `mean`.
    Random { band: f64, amplitude: f64, mean: f64 },
    /// Field `phi` of a CHBK snapshot.
    File(PathBuf),
}

/// Samples `φ₀` on `grid` and applies the Galerkin projection.
pub fn build_initial(spec: &InitialSpec, grid: &Grid, seed: u64, cutoff: Option<f64>) -> Result<ScalarField> {
    let raw = match spec {
        InitialSpec::Constant(c) => ScalarField::constant(grid, *c),
        InitialSpec::Modes { offset, terms } => {
            let mut f = ScalarField::constant(grid, *offset);
            for t in terms {
                check_wavevector(grid, &t.wavevector, "initial")?;
                f = f.add(&cosine_mode(grid, &t.wavevector).scaled(t.amplitude));
            }
            f
        }
        InitialSpec::Random {
            band,
            amplitude,
            mean,
        } => random_band_limited(grid, *band, *amplitude, *mean, seed),
        InitialSpec::File(path) => {
            let snap = Snapshot::read(path)?;
            if snap.sizes != grid.sizes() || snap.lengths != grid.lengths() {
                return Err(Error::Mismatch(format!(
                    "initial file {} is on a different grid",
                    path.display()
                )));
            }
            snap.scalar(grid, "phi")?
        }
    };
    if raw.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial condition has non-finite samples".into()));
    }
    Ok(galerkin_project(&raw, cutoff).detached())
}

/// Portable seeded random field with spectrum on `0 < |mode index| ≤ band`.
pub fn random_band_limited(grid: &Grid, band: f64, amplitude: f64, mean: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mags = grid.mode_index_magnitude();
    let spectrum: Vec<Complex64> = mags
        .iter()
        .enumerate()
        .map(|(flat, &m)| {
            let (re, im) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if m > 0.0 && m <= band && !grid.has_nyquist_component(flat) {
                Complex64::new(re, im)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let values = grid.inverse(&spectrum);
    let fluct = ScalarField::from_values_unchecked(grid, values);
    let rms = (fluct.inner(&fluct) / grid.volume()).sqrt();
    let scale = if rms > 0.0 { amplitude / rms } else { 0.0 };
    fluct.map(|v| mean + scale * v)
}
