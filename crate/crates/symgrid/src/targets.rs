//! Analytic corpus of symmetric test functions on `[0,1]^d`.
//!
//! Every builtin vanishes on the boundary, is exactly permutation
//! invariant, and ships closed-form gradients, the full mixed derivative
//! `D^(2,...,2) f`, and reference norms where they have a clean closed
//! form. Finite differences appear only in the test suite as oracles; the
//! library path is fully analytic.

use std::sync::Arc;

use crate::{Error, Result, MAX_DIM};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A smooth univariate factor with closed-form derivatives, used to expose
/// separable structure to the exact error machinery.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothFactor {
    /// `sin(pi x)`.
    SinPi,
    /// Polynomial with coefficients in increasing degree order.
    Poly(Vec<f64>),
}

impl SmoothFactor {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SmoothFactor::SinPi => (std::f64::consts::PI * x).sin(),
            SmoothFactor::Poly(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            SmoothFactor::SinPi => std::f64::consts::PI * (std::f64::consts::PI * x).cos(),
            SmoothFactor::Poly(c) => {
                let mut acc = 0.0;
                for (k, &ck) in c.iter().enumerate().skip(1).rev() {
                    acc = acc * x + ck * k as f64;
                }
                acc
            }
        }
    }
}

/// Separable representation `f(x) = Σ_k c_k Π_j g_{k,j}(x_j)`.
///
/// All builtins admit one; it lets error norms against piecewise
/// expansions be computed from one-dimensional integrals.
#[derive(Debug, Clone)]
pub struct SeparableForm {
    pub terms: Vec<(f64, Vec<SmoothFactor>)>,
}

/// A symmetric test function bundle: evaluation, gradient, mixed
/// derivative `∂^(2d) f / ∂x_1² ... ∂x_d²`, and optional analytic norms.
#[derive(Clone)]
pub struct TargetFunction {
    pub name: String,
    pub d: usize,
    eval: ScalarFn,
    grad: VectorFn,
    mixed2: Option<ScalarFn>,
    /// Analytic `|f|_{2,2}` when available.
    pub seminorm_2_2: Option<f64>,
    /// Analytic energy norm `‖f‖_E` when available.
    pub energy_norm: Option<f64>,
    /// Separable structure when available.
    pub separable: Option<SeparableForm>,
}

impl std::fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("seminorm_2_2", &self.seminorm_2_2)
            .field("energy_norm", &self.energy_norm)
            .finish()
    }
}

impl TargetFunction {
    /// Builds a custom target. `mixed2` may be omitted, in which case the
    /// integral surplus route and `seminorm_2_2` estimation are
    /// unavailable.
    pub fn custom(
        name: impl Into<String>,
        d: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        mixed2: Option<ScalarFn>,
    ) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::DimensionOutOfRange { got: d, max: MAX_DIM });
        }
        Ok(Self {
            name: name.into(),
            d,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            mixed2,
            seminorm_2_2: None,
            energy_norm: None,
            separable: None,
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.d);
        (self.grad)(x)
    }

    pub fn has_mixed2(&self) -> bool {
        self.mixed2.is_some()
    }

    /// The full mixed derivative, erroring when the bundle lacks it.
    pub fn mixed2(&self, x: &[f64]) -> Result<f64> {
        let f = self.mixed2.as_ref().ok_or(Error::MissingMixedDerivative)?;
        Ok(f(x))
    }

    /// Spot-checks permutation invariance at a few deterministic points.
    /// Used before symmetric table construction to reject asymmetric
    /// inputs early.
    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5e_1f_c0_de);
        let d = self.d;
        let mut max_dev: f64 = 0.0;
        for _ in 0..10 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let base = self.value(&x);
            let mut perm = x.clone();
            for _ in 0..d.max(2) {
                let a = rng.gen_range(0..d);
                let b = rng.gen_range(0..d);
                perm.swap(a, b);
                max_dev = max_dev.max((self.value(&perm) - base).abs());
            }
        }
        if max_dev > tol {
            return Err(Error::AsymmetricTarget { max_dev });
        }
        Ok(())
    }
}

/// `f(x) = Π_j sin(pi x_j)`.
fn prod_sine(d: usize) -> TargetFunction {
    use std::f64::consts::PI;
    let eval = move |x: &[f64]| x.iter().map(|&v| (PI * v).sin()).product::<f64>();
    let grad = move |x: &[f64]| {
        let s: Vec<f64> = x.iter().map(|&v| (PI * v).sin()).collect();
        let c: Vec<f64> = x.iter().map(|&v| PI * (PI * v).cos()).collect();
        (0..x.len())
            .map(|m| c[m] * prod_skipping(&s, m))
            .collect()
    };
    // D^(2,...,2) f = (-pi^2)^d f.
    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
    let factor = sign * PI.powi(2 * d as i32);
    let mixed2 = move |x: &[f64]| factor * x.iter().map(|&v| (PI * v).sin()).product::<f64>();
    TargetFunction {
        name: "prod_sine".into(),
        d,
        eval: Arc::new(eval),
        grad: Arc::new(grad),
        mixed2: Some(Arc::new(mixed2)),
        // |f|_{2,2} = pi^(2d) ||f||_L2 = pi^(2d) 2^(-d/2).
        seminorm_2_2: Some(PI.powi(2 * d as i32) * 2f64.powf(-(d as f64) / 2.0)),
        // ||f||_E^2 = d pi^2 2^(-d).
        energy_norm: Some((d as f64 * PI * PI * 2f64.powi(-(d as i32))).sqrt()),
        separable: Some(SeparableForm {
            terms: vec![(1.0, vec![SmoothFactor::SinPi; d])],
        }),
    }
}

/// `f(x) = Π_j x_j (1 - x_j)`.
fn prod_quadratic(d: usize) -> TargetFunction {
    let eval = move |x: &[f64]| x.iter().map(|&v| v * (1.0 - v)).product::<f64>();
    let grad = move |x: &[f64]| {
        let w: Vec<f64> = x.iter().map(|&v| v * (1.0 - v)).collect();
        (0..x.len())
            .map(|m| (1.0 - 2.0 * x[m]) * prod_skipping(&w, m))
            .collect()
    };
    // D^(2,...,2) f = (-2)^d.
    let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
    let value = sign * 2f64.powi(d as i32);
    let mixed2 = move |_x: &[f64]| value;
    // ||f||_E^2 = d (1/3) (1/30)^(d-1).
    let energy = (d as f64 / 3.0 * (1.0f64 / 30.0).powi(d as i32 - 1)).sqrt();
    let quad = SmoothFactor::Poly(vec![0.0, 1.0, -1.0]);
    TargetFunction {
        name: "prod_quadratic".into(),
        d,
        eval: Arc::new(eval),
        grad: Arc::new(grad),
        mixed2: Some(Arc::new(mixed2)),
        seminorm_2_2: Some(2f64.powi(d as i32)),
        energy_norm: Some(energy),
        separable: Some(SeparableForm {
            terms: vec![(1.0, vec![quad; d])],
        }),
    }
}

/// Symmetrized non-product polynomial
/// `f(x) = Σ_j a(x_j) Π_{k≠j} b(x_k)` with `a = x³(1-x)²`, `b = x(1-x)`.
///
/// It vanishes on the boundary and `|f|_{2,2}² = 4^(d-1) d ∫ a''² =
/// 4^(d-1) d · 12/35`, using `∫ a'' = 0` so the cross terms drop out.
fn mixed_poly(d: usize) -> TargetFunction {
    // a(x) = x^3 - 2x^4 + x^5, b(x) = x - x^2.
    let a = |x: f64| x * x * x * (1.0 - x) * (1.0 - x);
    let ap = |x: f64| 3.0 * x * x - 8.0 * x * x * x + 5.0 * x * x * x * x;
    let app = |x: f64| 6.0 * x - 24.0 * x * x + 20.0 * x * x * x;
    let b = |x: f64| x * (1.0 - x);
    let bp = |x: f64| 1.0 - 2.0 * x;

    let eval = move |x: &[f64]| {
        let bs: Vec<f64> = x.iter().map(|&v| b(v)).collect();
        (0..x.len()).map(|j| a(x[j]) * prod_skipping(&bs, j)).sum()
    };
    let grad = move |x: &[f64]| {
        let d = x.len();
        let bs: Vec<f64> = x.iter().map(|&v| b(v)).collect();
        (0..d)
            .map(|m| {
                let mut g = ap(x[m]) * prod_skipping(&bs, m);
                for j in 0..d {
                    if j == m {
                        continue;
                    }
                    let mut term = a(x[j]) * bp(x[m]);
                    for k in 0..d {
                        if k != j && k != m {
                            term *= bs[k];
                        }
                    }
                    g += term;
                }
                g
            })
            .collect()
    };
    // b'' = -2, so D^(2,...,2) f = Σ_j a''(x_j) (-2)^(d-1).
    let bpp_prod = if d % 2 == 0 { -1.0 } else { 1.0 } * 2f64.powi(d as i32 - 1);
    let mixed2 = move |x: &[f64]| bpp_prod * x.iter().map(|&v| app(v)).sum::<f64>();
    let seminorm = 2f64.powi(d as i32 - 1) * (d as f64 * 12.0 / 35.0).sqrt();

    let fa = SmoothFactor::Poly(vec![0.0, 0.0, 0.0, 1.0, -2.0, 1.0]);
    let fb = SmoothFactor::Poly(vec![0.0, 1.0, -1.0]);
    let mut terms = Vec::with_capacity(d);
    for j in 0..d {
        let factors: Vec<SmoothFactor> = (0..d)
            .map(|k| if k == j { fa.clone() } else { fb.clone() })
            .collect();
        terms.push((1.0, factors));
    }

    TargetFunction {
        name: "mixed_poly".into(),
        d,
        eval: Arc::new(eval),
        grad: Arc::new(grad),
        mixed2: Some(Arc::new(mixed2)),
        seminorm_2_2: Some(seminorm),
        energy_norm: None,
        separable: Some(SeparableForm { terms }),
    }
}

fn prod_skipping(vals: &[f64], skip: usize) -> f64 {
    vals.iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, &v)| v)
        .product()
}

/// Names accepted by [`builtin_target`].
pub const BUILTIN_NAMES: [&str; 3] = ["prod_sine", "prod_quadratic", "mixed_poly"];

/// Instantiates a builtin target in dimension `d`.
pub fn builtin_target(name: &str, d: usize) -> Result<TargetFunction> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::DimensionOutOfRange { got: d, max: MAX_DIM });
    }
    match name {
        "prod_sine" => Ok(prod_sine(d)),
        "prod_quadratic" => Ok(prod_quadratic(d)),
        "mixed_poly" => Ok(mixed_poly(d)),
        other => Err(Error::UnknownTarget(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn prod_sine_reference_norms() {
        let f = builtin_target("prod_sine", 2).unwrap();
        assert!((f.energy_norm.unwrap() - PI / 2f64.sqrt()).abs() < 1e-12);
        assert!((f.seminorm_2_2.unwrap() - PI.powi(4) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn prod_quadratic_mixed2_is_constant() {
        let f = builtin_target("prod_quadratic", 1).unwrap();
        assert_eq!(f.mixed2(&[0.3]).unwrap(), -2.0);
        let f = builtin_target("prod_quadratic", 2).unwrap();
        assert_eq!(f.mixed2(&[0.3, 0.9]).unwrap(), 4.0);
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(matches!(
            builtin_target("nope", 2),
            Err(crate::Error::UnknownTarget(_))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = rng();
        let step = 1e-6;
        for name in BUILTIN_NAMES {
            for d in 1..=3 {
                let f = builtin_target(name, d).unwrap();
                for _ in 0..(1000 / d) {
                    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.01..0.99)).collect();
                    let g = f.gradient(&x);
                    for m in 0..d {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[m] += step;
                        xm[m] -= step;
                        let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * step);
                        let denom = g[m].abs().max(1.0);
                        assert!(
                            ((fd - g[m]) / denom).abs() < 1e-5,
                            "{name} d={d} axis={m}: fd={fd} grad={}",
                            g[m]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mixed2_matches_iterated_finite_differences() {
        // Iterated second differences along every axis, step 1e-3,
        // tolerance 1e-3 relative.
        let mut rng = rng();
        let step = 1e-3;
        for name in BUILTIN_NAMES {
            for d in 1..=3usize {
                let f = builtin_target(name, d).unwrap();
                for _ in 0..(100 / d) {
                    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..0.95)).collect();
                    // Tensor stencil of second differences: sum over
                    // offsets in {-1,0,1}^d with weights (1,-2,1)/step^2.
                    let mut acc = 0.0;
                    let mut offsets = vec![-1i32; d];
                    'sum: loop {
                        let mut w = 1.0;
                        let mut xs = x.clone();
                        for j in 0..d {
                            w *= match offsets[j] {
                                0 => -2.0,
                                _ => 1.0,
                            };
                            xs[j] += offsets[j] as f64 * step;
                        }
                        acc += w * f.value(&xs);
                        let mut axis = d;
                        loop {
                            if axis == 0 {
                                break 'sum;
                            }
                            axis -= 1;
                            offsets[axis] += 1;
                            if offsets[axis] <= 1 {
                                break;
                            }
                            offsets[axis] = -1;
                        }
                    }
                    let fd = acc / step.powi(2 * d as i32);
                    let exact = f.mixed2(&x).unwrap();
                    let denom = exact.abs().max(1.0);
                    assert!(
                        ((fd - exact) / denom).abs() < 1e-3,
                        "{name} d={d}: fd={fd} exact={exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn builtins_are_symmetric_and_vanish_on_boundary() {
        let mut rng = rng();
        for name in BUILTIN_NAMES {
            for d in 1..=4usize {
                let f = builtin_target(name, d).unwrap();
                f.check_symmetric(1e-12).unwrap();
                // 100 samples per face, both faces per axis.
                for axis in 0..d {
                    for &face in &[0.0, 1.0] {
                        for _ in 0..100 {
                            let mut x: Vec<f64> =
                                (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
                            x[axis] = face;
                            assert!(
                                f.value(&x).abs() < 1e-12,
                                "{name} d={d} axis={axis} face={face}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn separable_form_agrees_with_eval() {
        let mut rng = rng();
        for name in BUILTIN_NAMES {
            for d in 1..=3usize {
                let f = builtin_target(name, d).unwrap();
                let sep = f.separable.as_ref().unwrap();
                for _ in 0..50 {
                    let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
                    let via_sep: f64 = sep
                        .terms
                        .iter()
                        .map(|(c, fs)| {
                            c * fs
                                .iter()
                                .zip(&x)
                                .map(|(g, &v)| g.eval(v))
                                .product::<f64>()
                        })
                        .sum();
                    assert!((via_sep - f.value(&x)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn asymmetric_target_detected() {
        let f = TargetFunction::custom(
            "lopsided",
            2,
            |x| x[0] * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]),
            |_| vec![0.0, 0.0],
            None,
        )
        .unwrap();
        assert!(matches!(
            f.check_symmetric(1e-10),
            Err(crate::Error::AsymmetricTarget { .. })
        ));
    }
}
