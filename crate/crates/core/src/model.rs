//! Double-well potential, phase-dependent coefficients, the mass source and
//! a sample-based certifier for the structural assumptions on them.

use crate::error::{Error, Result};
use crate::spectral::ScalarField;

/// Family of the double-well potential `F`.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialFamily {
    /// `F(s) = ¼ (s² − 1)²`.
    Quartic,
    /// `F(s) = Σ_q a_q s^{2q}` with the listed `a_q` (constant term first).
    EvenPolynomial(Vec<f64>),
    /// `F ≡ 0`. Only meaningful for linear diagnostics; fails validation.
    Zero,
}

/// A polynomial potential together with its first three derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    family: PotentialFamily,
    /// Ascending coefficients of `F`, `F'`, `F''`, `F'''`.
    derivatives: [Vec<f64>; 4],
}

/// `(F, f, f', f'')` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValues {
    pub potential: f64,
    pub f: f64,
    pub f_prime: f64,
    pub f_second: f64,
}

fn differentiate(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| j as f64 * c)
        .collect()
}

fn horner(p: &[f64], s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

impl PotentialSpec {
    pub fn new(family: PotentialFamily) -> Self {
        let poly = match &family {
            PotentialFamily::Quartic => vec![0.25, 0.0, -0.5, 0.0, 0.25],
            PotentialFamily::EvenPolynomial(a) => {
                let mut p = vec![0.0; 2 * a.len().max(1) - 1];
                for (q, c) in a.iter().enumerate() {
                    p[2 * q] = *c;
                }
                p
            }
            PotentialFamily::Zero => vec![0.0],
        };
        let d1 = differentiate(&poly);
        let d2 = differentiate(&d1);
        let d3 = differentiate(&d2);
        PotentialSpec {
            family,
            derivatives: [poly, d1, d2, d3],
        }
    }

    pub fn quartic() -> Self {
        Self::new(PotentialFamily::Quartic)
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    /// Degree of `F` after dropping trailing zero coefficients.
    pub fn degree(&self) -> usize {
        self.derivatives[0]
            .iter()
            .rposition(|c| *c != 0.0)
            .unwrap_or(0)
    }

    pub fn eval(&self, s: f64) -> PotentialValues {
        PotentialValues {
            potential: horner(&self.derivatives[0], s),
            f: horner(&self.derivatives[1], s),
            f_prime: horner(&self.derivatives[2], s),
            f_second: horner(&self.derivatives[3], s),
        }
    }

    #[inline]
    pub fn potential(&self, s: f64) -> f64 {
        horner(&self.derivatives[0], s)
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        horner(&self.derivatives[1], s)
    }

    #[inline]
    pub fn f_prime(&self, s: f64) -> f64 {
        horner(&self.derivatives[2], s)
    }

    /// `f(s)/s → +∞` as `|s| → ∞`: `F` must have even degree ≥ 4 and a
    /// positive leading coefficient.
    pub fn is_superlinear(&self) -> bool {
        let deg = self.degree();
        deg >= 4 && deg % 2 == 0 && self.derivatives[0][deg] > 0.0
    }
}

/// Shape of a bounded phase-dependent coefficient.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientKind {
    Constant(f64),
    /// `base + amplitude · tanh(s / scale)`.
    Tanh { base: f64, amplitude: f64, scale: f64 },
    /// `base + amplitude · s² / (1 + s²)`, a smoothly saturating quadratic.
    SaturatedQuadratic { base: f64, amplitude: f64 },
}

/// A coefficient function with its declared bounds `lower ≤ c(s) ≤ upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficient {
    pub kind: CoefficientKind,
    pub lower: f64,
    pub upper: f64,
}

impl Coefficient {
    pub fn constant(c: f64) -> Self {
        Coefficient {
            kind: CoefficientKind::Constant(c),
            lower: c,
            upper: c,
        }
    }

    pub fn tanh(base: f64, amplitude: f64, scale: f64) -> Self {
        Coefficient {
            kind: CoefficientKind::Tanh {
                base,
                amplitude,
                scale,
            },
            lower: base - amplitude.abs(),
            upper: base + amplitude.abs(),
        }
    }

    pub fn saturated_quadratic(base: f64, amplitude: f64) -> Self {
        Coefficient {
            kind: CoefficientKind::SaturatedQuadratic { base, amplitude },
            lower: base.min(base + amplitude),
            upper: base.max(base + amplitude),
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self.kind {
            CoefficientKind::Constant(c) => c,
            CoefficientKind::Tanh {
                base,
                amplitude,
                scale,
            } => base + amplitude * (s / scale).tanh(),
            CoefficientKind::SaturatedQuadratic { base, amplitude } => {
                let s2 = s * s;
                base + amplitude * s2 / (1.0 + s2)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, CoefficientKind::Constant(_))
    }

    /// Midpoint of the declared bounds.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    /// Analytic Lipschitz constant of the shape.
    pub fn lipschitz(&self) -> f64 {
        match self.kind {
            CoefficientKind::Constant(_) => 0.0,
            CoefficientKind::Tanh {
                amplitude, scale, ..
            } => amplitude.abs() / scale.abs(),
            // max of d/ds [s²/(1+s²)] is 3√3/8 at s = 1/√3.
            CoefficientKind::SaturatedQuadratic { amplitude, .. } => {
                amplitude.abs() * 3.0 * 3f64.sqrt() / 8.0
            }
        }
    }

    /// Same shape with every value multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let kind = match self.kind {
            CoefficientKind::Constant(c) => CoefficientKind::Constant(c * factor),
            CoefficientKind::Tanh {
                base,
                amplitude,
                scale,
            } => CoefficientKind::Tanh {
                base: base * factor,
                amplitude: amplitude * factor,
                scale,
            },
            CoefficientKind::SaturatedQuadratic { base, amplitude } => {
                CoefficientKind::SaturatedQuadratic {
                    base: base * factor,
                    amplitude: amplitude * factor,
                }
            }
        };
        Coefficient {
            kind,
            lower: self.lower * factor,
            upper: self.upper * factor,
        }
    }
}

/// Bounded Lipschitz part of the source, `h(s) = amplitude · tanh(s / scale)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceShape {
    pub amplitude: f64,
    pub scale: f64,
}

impl SourceShape {
    pub fn none() -> Self {
        SourceShape {
            amplitude: 0.0,
            scale: 1.0,
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * (s / self.scale).tanh()
        }
    }

    pub fn sup(&self) -> f64 {
        self.amplitude.abs()
    }

    pub fn lipschitz(&self) -> f64 {
        self.amplitude.abs() / self.scale.abs()
    }
}

/// Complete constitutive description of the model. The interface width is
/// normalized to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub potential: PotentialSpec,
    pub eta: Coefficient,
    pub lambda: Coefficient,
    pub mobility: Coefficient,
    pub nu: f64,
    pub sigma: f64,
    pub h: SourceShape,
    pub epsilon: f64,
}

impl Default for ModelSpec {
    /// Quartic potential, unit coefficients, `ν = 1`, no source.
    fn default() -> Self {
        ModelSpec {
            potential: PotentialSpec::quartic(),
            eta: Coefficient::constant(1.0),
            lambda: Coefficient::constant(1.0),
            mobility: Coefficient::constant(1.0),
            nu: 1.0,
            sigma: 0.0,
            h: SourceShape::none(),
            epsilon: 1.0,
        }
    }
}

impl ModelSpec {
    /// Pointwise `S(s) = −σ s + h(s)`.
    #[inline]
    pub fn source(&self, s: f64) -> f64 {
        -self.sigma * s + self.h.eval(s)
    }

    /// True when `σ ≠ 0` or `h ≢ 0`.
    pub fn has_source(&self) -> bool {
        self.sigma != 0.0 || self.h.amplitude != 0.0
    }
}

/// Evaluates `(F, f, f', f'')` at `s`.
pub fn eval_potential(spec: &PotentialSpec, s: f64) -> PotentialValues {
    spec.eval(s)
}

/// Pointwise source `S(φ)` on the grid.
pub fn eval_source(spec: &ModelSpec, phi: &ScalarField) -> ScalarField {
    phi.map(|s| spec.source(s))
}

/// Sampled range and extrema of one coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientCheck {
    pub name: &'static str,
    pub sampled_min: f64,
    pub sampled_max: f64,
    pub declared_lower: f64,
    pub declared_upper: f64,
    pub lipschitz_estimate: f64,
}

/// Smallest constants that make the structural inequalities hold on the
/// sampled range, plus coefficient bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub range: f64,
    pub samples: usize,
    /// `f'(s) ≥ −C₁`.
    pub c1: f64,
    /// `|F(s)| ≤ C₂ (|s f(s)| + 1)`.
    pub c2: f64,
    /// `|s f'(s)| ≤ C₃ (|f(s)| + 1)`.
    pub c3: f64,
    /// `|f'(s)| ≤ C₃' (|f(s)| + 1)`.
    pub c3_prime: f64,
    pub coefficients: Vec<CoefficientCheck>,
    pub source_sup: f64,
    pub source_lipschitz: f64,
}

/// Maximizes `g` over `[-range, range]`: dense sampling followed by a
/// golden-section refinement around the best sample.
fn sampled_max(g: impl Fn(f64) -> f64, range: f64, samples: usize) -> f64 {
    let h = 2.0 * range / (samples - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..samples {
        let v = g(-range + i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let centre = -range + best_i as f64 * h;
    let (mut a, mut b) = ((centre - h).max(-range), (centre + h).min(range));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if g(x1) > g(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    best.max(g(0.5 * (a + b)))
}

const BOUND_SLACK: f64 = 1e-12;

/// Certifies the structural assumptions on `[-range, range]`.
pub fn validate_assumptions(spec: &ModelSpec, range: f64, samples: usize) -> Result<ValidationReport> {
    if range < 4.0 || samples < 1000 {
        return Err(Error::Precondition(format!(
            "assumption sampling needs range ≥ 4 and ≥ 1000 samples (got {range}, {samples})"
        )));
    }
    let pot = &spec.potential;
    if !pot.is_superlinear() {
        return Err(Error::Assumption {
            inequality: "potential growth",
            detail: "f(s)/s must tend to +∞: F needs even degree ≥ 4 and a positive leading coefficient"
                .into(),
        });
    }
    if spec.epsilon != 1.0 {
        return Err(Error::Assumption {
            inequality: "interface normalization",
            detail: format!("epsilon is fixed to 1, got {}", spec.epsilon),
        });
    }
    let c1 = sampled_max(|s| -pot.f_prime(s), range, samples).max(0.0);
    let c2 = sampled_max(
        |s| pot.potential(s).abs() / ((s * pot.f(s)).abs() + 1.0),
        range,
        samples,
    );
    let c3 = sampled_max(
        |s| (s * pot.f_prime(s)).abs() / (pot.f(s).abs() + 1.0),
        range,
        samples,
    );
    let c3_prime = sampled_max(
        |s| pot.f_prime(s).abs() / (pot.f(s).abs() + 1.0),
        range,
        samples,
    );

    let mut coefficients = Vec::new();
    for (name, c) in [
        ("eta", &spec.eta),
        ("lambda", &spec.lambda),
        ("m", &spec.mobility),
    ] {
        if !(c.lower > 0.0) {
            return Err(Error::Assumption {
                inequality: "coefficient positivity",
                detail: format!("{name} lower bound must be positive, got {}", c.lower),
            });
        }
        if c.upper < c.lower {
            return Err(Error::Assumption {
                inequality: "coefficient positivity",
                detail: format!("{name} upper bound {} is below lower bound {}", c.upper, c.lower),
            });
        }
        let h = 2.0 * range / (samples - 1) as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut lip: f64 = 0.0;
        let mut prev = c.eval(-range);
        for i in 0..samples {
            let s = -range + i as f64 * h;
            let v = c.eval(s);
            if !(v > 0.0) {
                return Err(Error::Assumption {
                    inequality: "coefficient positivity",
                    detail: format!("{name}({s}) = {v} is not positive"),
                });
            }
            lo = lo.min(v);
            hi = hi.max(v);
            if i > 0 {
                lip = lip.max((v - prev).abs() / h);
            }
            prev = v;
        }
        let slack = BOUND_SLACK * c.upper.abs().max(1.0);
        if lo < c.lower - slack || hi > c.upper + slack {
            return Err(Error::Assumption {
                inequality: "coefficient bounds",
                detail: format!(
                    "{name} takes values in [{lo}, {hi}] outside its declared bounds [{}, {}]",
                    c.lower, c.upper
                ),
            });
        }
        if !lip.is_finite() || lip > c.lipschitz() * (1.0 + 1e-6) + 1e-12 {
            return Err(Error::Assumption {
                inequality: "coefficient Lipschitz continuity",
                detail: format!("{name} difference quotients reach {lip}"),
            });
        }
        coefficients.push(CoefficientCheck {
            name,
            sampled_min: lo,
            sampled_max: hi,
            declared_lower: c.lower,
            declared_upper: c.upper,
            lipschitz_estimate: lip,
        });
    }

    if !(spec.h.amplitude >= 0.0) || !(spec.h.scale > 0.0) {
        return Err(Error::Assumption {
            inequality: "source boundedness",
            detail: format!(
                "h needs amplitude ≥ 0 and scale > 0 (got {}, {})",
                spec.h.amplitude, spec.h.scale
            ),
        });
    }
    if !spec.nu.is_finite() || !spec.sigma.is_finite() {
        return Err(Error::Assumption {
            inequality: "source boundedness",
            detail: "nu and sigma must be finite".into(),
        });
    }

    Ok(ValidationReport {
        range,
        samples,
        c1,
        c2,
        c3,
        c3_prime,
        coefficients,
        source_sup: spec.h.sup(),
        source_lipschitz: spec.h.lipschitz(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quartic_values() {
        let q = PotentialSpec::quartic();
        let v = eval_potential(&q, 0.0);
        assert_eq!((v.potential, v.f, v.f_prime, v.f_second), (0.25, 0.0, -1.0, 0.0));
        let v = eval_potential(&q, 1.0);
        assert_eq!((v.potential, v.f, v.f_prime, v.f_second), (0.0, 0.0, 2.0, 6.0));
        let v = eval_potential(&q, 2.0);
        assert_eq!((v.potential, v.f, v.f_prime, v.f_second), (2.25, 6.0, 11.0, 12.0));
    }

    #[test]
    fn even_polynomial_matches_quartic() {
        let e = PotentialSpec::new(PotentialFamily::EvenPolynomial(vec![0.25, -0.5, 0.25]));
        let q = PotentialSpec::quartic();
        for s in [-1.7, -0.3, 0.0, 0.9, 2.4] {
            assert_eq!(e.eval(s), q.eval(s));
        }
        assert!(e.is_superlinear());
        assert!(!PotentialSpec::new(PotentialFamily::Zero).is_superlinear());
        assert!(!PotentialSpec::new(PotentialFamily::EvenPolynomial(vec![0.0, 1.0])).is_superlinear());
        assert!(!PotentialSpec::new(PotentialFamily::EvenPolynomial(vec![0.0, 1.0, -0.1])).is_superlinear());
    }

    #[test]
    fn quartic_certifies_c1_equal_one() {
        let report = validate_assumptions(&ModelSpec::default(), 4.0, 1000).unwrap();
        assert!((report.c1 - 1.0).abs() < 1e-6, "c1 = {}", report.c1);
        for c in &report.coefficients {
            assert_eq!((c.sampled_min, c.sampled_max), (1.0, 1.0));
        }
        // Sanity of the other constants: the inequalities hold with them on a
        // fine independent sweep.
        let q = &ModelSpec::default().potential;
        for i in 0..=20000 {
            let s = -4.0 + 8.0 * i as f64 / 20000.0;
            let v = q.eval(s);
            assert!(v.f_prime >= -report.c1 - 1e-9);
            assert!(v.potential.abs() <= report.c2 * ((s * v.f).abs() + 1.0) + 1e-9);
            assert!((s * v.f_prime).abs() <= report.c3 * (v.f.abs() + 1.0) + 1e-9);
            assert!(v.f_prime.abs() <= report.c3_prime * (v.f.abs() + 1.0) + 1e-9);
        }
    }

    #[test]
    fn vanishing_lambda_is_rejected() {
        let mut spec = ModelSpec::default();
        spec.lambda = Coefficient::tanh(0.5, 0.5, 1.0);
        match validate_assumptions(&spec, 4.0, 1000) {
            Err(Error::Assumption { inequality, .. }) => assert_eq!(inequality, "coefficient positivity"),
            other => panic!("expected assumption error, got {other:?}"),
        }
        // A coefficient dipping to zero while bounds claim positivity.
        spec.lambda = Coefficient {
            kind: CoefficientKind::SaturatedQuadratic {
                base: 1.0,
                amplitude: -1.0,
            },
            lower: 0.1,
            upper: 1.0,
        };
        assert!(validate_assumptions(&spec, 4.0, 1000).is_err());
    }

    #[test]
    fn undeclared_excursion_is_rejected() {
        let mut spec = ModelSpec::default();
        spec.eta = Coefficient {
            kind: CoefficientKind::Tanh {
                base: 1.0,
                amplitude: 0.5,
                scale: 1.0,
            },
            lower: 0.8,
            upper: 1.5,
        };
        assert!(matches!(
            validate_assumptions(&spec, 4.0, 1000),
            Err(Error::Assumption { inequality: "coefficient bounds", .. })
        ));
    }

    #[test]
    fn small_sampling_is_a_precondition_error() {
        assert!(matches!(
            validate_assumptions(&ModelSpec::default(), 3.0, 1000),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            validate_assumptions(&ModelSpec::default(), 4.0, 999),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn source_cases() {
        let g = Grid::uniform(2, 8, 1.0).unwrap();
        let phi = ScalarField::constant(&g, 1.0);
        let zero = eval_source(&ModelSpec::default(), &phi);
        assert!(zero.values().iter().all(|v| *v == 0.0));
        let spec = ModelSpec {
            sigma: 1.0,
            ..ModelSpec::default()
        };
        assert!(eval_source(&spec, &phi).values().iter().all(|v| *v == -1.0));

        let spec = ModelSpec {
            sigma: 0.5,
            h: SourceShape {
                amplitude: 0.3,
                scale: 1.0,
            },
            ..ModelSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phi = ScalarField::from_values(&g, (0..g.len()).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let s = eval_source(&spec, &phi);
        for (v, p) in s.values().iter().zip(phi.values()) {
            let oracle = -0.5 * p + 0.3 * p.tanh();
            assert!((v - oracle).abs() <= 1e-14);
        }
    }

    proptest! {
        #[test]
        fn source_is_lipschitz(a in -3.0f64..3.0, b in -3.0f64..3.0, sigma in -2.0f64..2.0,
                               amp in 0.0f64..1.0, scale in 0.2f64..3.0) {
            let spec = ModelSpec { sigma, h: SourceShape { amplitude: amp, scale }, ..ModelSpec::default() };
            let bound = sigma.abs() + spec.h.lipschitz();
            prop_assert!((spec.source(a) - spec.source(b)).abs() <= bound * (a - b).abs() + 1e-12);
        }

        #[test]
        fn coefficient_stays_in_declared_bounds(base in 0.5f64..2.0, amp in -0.4f64..0.4, s in -50.0f64..50.0) {
            for c in [Coefficient::tanh(base, amp, 0.7), Coefficient::saturated_quadratic(base, amp)] {
                let v = c.eval(s);
                prop_assert!(v >= c.lower - 1e-12 && v <= c.upper + 1e-12);
            }
        }
    }
}
