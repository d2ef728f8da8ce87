//! `L²`, energy and `H¹` error estimation between targets, expansions and
//! networks.
//!
//! Two estimators are provided. Cell-aligned tensor Gauss quadrature is
//! exact for piecewise-polynomial integrands once the cells resolve every
//! breakpoint (the per-axis cell grid is refined by the breakpoints the
//! compared objects advertise). A deterministic Halton set with
//! Cranley–Patterson random shifts covers higher dimensions, reporting a
//! standard error across shifts. Gradients at quadrature nodes always come
//! from the exact piecewise formulas, never finite differences.
//!
//! For targets with separable structure an exact route is also available:
//! every norm reduces to one-dimensional integrals against the univariate
//! factors, so errors against [`FactoredSum`] expansions are computed to
//! machine precision without any tensor sweep.

use serde::{Deserialize, Serialize};

use crate::factored::{self, FactoredSum, Func1, InnerProducts};
use crate::interpolant::SurplusTable;
use crate::targets::{SmoothFactor, TargetFunction};
use crate::{Error, Result};

/// Anything with a value and an exact gradient on `[0,1]^d`.
pub trait ScalarField {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the value.
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// Finest dyadic level appearing in the object, as a quadrature hint.
    fn finest_level(&self) -> Option<u8> {
        None
    }
    /// Extra per-axis breakpoints the tensor rule must respect.
    fn axis_breakpoints(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// The zero function, for plain norms via [`norm_diff`].
pub struct ZeroField(pub usize);

impl ScalarField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn value_and_grad(&self, _x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        0.0
    }
}

impl ScalarField for TargetFunction {
    fn dim(&self) -> usize {
        self.d
    }
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let g = self.gradient(x);
        grad.copy_from_slice(&g);
        self.value(x)
    }
}

impl ScalarField for SurplusTable {
    fn dim(&self) -> usize {
        self.spec().d
    }
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (v, g) = self.value_and_gradient(x);
        grad.copy_from_slice(&g);
        v
    }
    fn finest_level(&self) -> Option<u8> {
        Some(self.spec().n)
    }
}

impl ScalarField for FactoredSum {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (v, g) = self.value_and_gradient(x);
        grad.copy_from_slice(&g);
        v
    }
    fn finest_level(&self) -> Option<u8> {
        Some(FactoredSum::finest_level(self))
    }
    fn axis_breakpoints(&self, _axis: usize) -> Vec<f64> {
        self.breakpoints()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadratureMode {
    TensorGaussPerCell,
    LowDiscrepancy,
}

/// Quadrature configuration. `cell_level` must dominate the finest dyadic
/// level of the compared objects in tensor mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub mode: QuadratureMode,
    pub cell_level: u8,
    pub points_per_cell_per_axis: usize,
    pub sample_count: usize,
    pub seed: u64,
}

pub const MIN_SAMPLE_COUNT: usize = 1000;
const SHIFT_COUNT: usize = 8;

impl QuadratureSpec {
    pub fn tensor(cell_level: u8, points_per_cell_per_axis: usize) -> Self {
        Self {
            mode: QuadratureMode::TensorGaussPerCell,
            cell_level,
            points_per_cell_per_axis,
            sample_count: 1 << 14,
            seed: 0,
        }
    }

    pub fn low_discrepancy(sample_count: usize, seed: u64) -> Self {
        Self {
            mode: QuadratureMode::LowDiscrepancy,
            cell_level: 0,
            points_per_cell_per_axis: 3,
            sample_count,
            seed,
        }
    }

    /// Tensor cells for low dimensions, low-discrepancy sampling once the
    /// tensor cell count would explode (`cell_level·d > 24`).
    pub fn auto(d: usize, finest_level: u8) -> Self {
        let cell_level = finest_level.max(1);
        if d <= 3 || cell_level as usize * d <= 24 {
            Self::tensor(cell_level, 3)
        } else {
            Self::low_discrepancy(1 << 14, 0)
        }
    }
}

/// `L²`, energy and `H¹` distances, with the quadrature spec echoed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l2: f64,
    pub energy: f64,
    pub h1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator_stderr: Option<f64>,
    pub quadrature: QuadratureSpec,
}

impl ErrorReport {
    fn from_squares(l2_sq: f64, energy_sq: f64, stderr: Option<f64>, spec: QuadratureSpec) -> Self {
        let l2_sq = l2_sq.max(0.0);
        let energy_sq = energy_sq.max(0.0);
        Self {
            l2: l2_sq.sqrt(),
            energy: energy_sq.sqrt(),
            h1: (l2_sq + energy_sq).sqrt(),
            estimator_stderr: stderr,
            quadrature: spec,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on the
/// three-term recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && n <= 64);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

/// Radical-inverse Halton coordinate.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

const HALTON_BASES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// `‖a - b‖` in `L²`, energy and `H¹`, by the requested quadrature.
pub fn norm_diff(
    a: &impl ScalarField,
    b: &impl ScalarField,
    spec: &QuadratureSpec,
) -> Result<ErrorReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let d = a.dim();
    match spec.mode {
        QuadratureMode::TensorGaussPerCell => tensor_sweep(a, b, d, spec),
        QuadratureMode::LowDiscrepancy => low_discrepancy_sweep(a, b, d, spec),
    }
}

fn tensor_sweep(
    a: &impl ScalarField,
    b: &impl ScalarField,
    d: usize,
    spec: &QuadratureSpec,
) -> Result<ErrorReport> {
    let required = a.finest_level().unwrap_or(0).max(b.finest_level().unwrap_or(0));
    if spec.cell_level < required {
        return Err(Error::CellLevelTooCoarse {
            cell_level: spec.cell_level,
            required,
        });
    }
    let (nodes, weights) = gauss_legendre(spec.points_per_cell_per_axis);

    // Per-axis panels: the dyadic grid at cell_level refined by advertised
    // breakpoints, then Gauss nodes per panel.
    let mut axis_points: Vec<Vec<(f64, f64)>> = Vec::with_capacity(d);
    for axis in 0..d {
        let cells = 1u64 << spec.cell_level;
        let mut cuts: Vec<f64> = (0..=cells).map(|c| c as f64 / cells as f64).collect();
        cuts.extend(
            a.axis_breakpoints(axis)
                .into_iter()
                .chain(b.axis_breakpoints(axis))
                .filter(|&t| t > 0.0 && t < 1.0),
        );
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        cuts.dedup();
        let mut pts = Vec::with_capacity((cuts.len() - 1) * nodes.len());
        for panel in cuts.windows(2) {
            let width = panel[1] - panel[0];
            if width < 1e-300 {
                continue;
            }
            let mid = 0.5 * (panel[0] + panel[1]);
            let half = 0.5 * width;
            for (t, w) in nodes.iter().zip(&weights) {
                pts.push((mid + half * t, half * w));
            }
        }
        axis_points.push(pts);
    }

    let mut l2_sq = 0.0;
    let mut energy_sq = 0.0;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut ga = vec![0.0; d];
    let mut gb = vec![0.0; d];
    'sweep: loop {
        let mut w = 1.0;
        for j in 0..d {
            let (xj, wj) = axis_points[j][idx[j]];
            x[j] = xj;
            w *= wj;
        }
        let va = a.value_and_grad(&x, &mut ga);
        let vb = b.value_and_grad(&x, &mut gb);
        let dv = va - vb;
        l2_sq += w * dv * dv;
        let mut gsum = 0.0;
        for j in 0..d {
            let dg = ga[j] - gb[j];
            gsum += dg * dg;
        }
        energy_sq += w * gsum;

        let mut axis = d;
        loop {
            if axis == 0 {
                break 'sweep;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < axis_points[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
    Ok(ErrorReport::from_squares(l2_sq, energy_sq, None, *spec))
}

fn low_discrepancy_sweep(
    a: &impl ScalarField,
    b: &impl ScalarField,
    d: usize,
    spec: &QuadratureSpec,
) -> Result<ErrorReport> {
    use rand::{Rng, SeedableRng};
    if spec.sample_count < MIN_SAMPLE_COUNT {
        return Err(Error::SampleCountTooSmall {
            got: spec.sample_count,
            min: MIN_SAMPLE_COUNT,
        });
    }
    assert!(d <= HALTON_BASES.len());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let shifts: Vec<Vec<f64>> = (0..SHIFT_COUNT)
        .map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();

    let mut l2_means = Vec::with_capacity(SHIFT_COUNT);
    let mut energy_means = Vec::with_capacity(SHIFT_COUNT);
    let mut x = vec![0.0; d];
    let mut ga = vec![0.0; d];
    let mut gb = vec![0.0; d];
    for shift in &shifts {
        let mut l2_acc = 0.0;
        let mut energy_acc = 0.0;
        for k in 1..=spec.sample_count as u64 {
            for j in 0..d {
                let t = halton(k, HALTON_BASES[j]) + shift[j];
                x[j] = t - t.floor();
            }
            let va = a.value_and_grad(&x, &mut ga);
            let vb = b.value_and_grad(&x, &mut gb);
            let dv = va - vb;
            l2_acc += dv * dv;
            for j in 0..d {
                let dg = ga[j] - gb[j];
                energy_acc += dg * dg;
            }
        }
        l2_means.push(l2_acc / spec.sample_count as f64);
        energy_means.push(energy_acc / spec.sample_count as f64);
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let l2_sq = mean(&l2_means);
    let energy_sq = mean(&energy_means);
    let h1_per_shift: Vec<f64> = l2_means
        .iter()
        .zip(&energy_means)
        .map(|(&l, &e)| (l.max(0.0) + e.max(0.0)).sqrt())
        .collect();
    let h1_mean = mean(&h1_per_shift);
    let var = h1_per_shift
        .iter()
        .map(|&v| (v - h1_mean) * (v - h1_mean))
        .sum::<f64>()
        / (h1_per_shift.len() - 1) as f64;
    let stderr = (var / h1_per_shift.len() as f64).sqrt();
    Ok(ErrorReport::from_squares(
        l2_sq,
        energy_sq,
        Some(stderr),
        *spec,
    ))
}

/// `|f|_{2,2} = ‖D^(2,...,2) f‖_{L²}` by quadrature.
pub fn seminorm_2_2(f: &TargetFunction, spec: &QuadratureSpec) -> Result<f64> {
    if !f.has_mixed2() {
        return Err(Error::MissingMixedDerivative);
    }
    let d = f.d;
    match spec.mode {
        QuadratureMode::TensorGaussPerCell => {
            let (nodes, weights) = gauss_legendre(spec.points_per_cell_per_axis);
            let cells = 1u64 << spec.cell_level;
            let mut axis_points = Vec::with_capacity(d);
            for _ in 0..d {
                let mut pts = Vec::with_capacity(cells as usize * nodes.len());
                for c in 0..cells {
                    let a = c as f64 / cells as f64;
                    let b = (c + 1) as f64 / cells as f64;
                    let mid = 0.5 * (a + b);
                    let half = 0.5 * (b - a);
                    for (t, w) in nodes.iter().zip(&weights) {
                        pts.push((mid + half * t, half * w));
                    }
                }
                axis_points.push(pts);
            }
            let mut acc = 0.0;
            let mut idx = vec![0usize; d];
            let mut x = vec![0.0; d];
            'sweep: loop {
                let mut w = 1.0;
                for j in 0..d {
                    let (xj, wj) = axis_points[j][idx[j]];
                    x[j] = xj;
                    w *= wj;
                }
                let v = f.mixed2(&x)?;
                acc += w * v * v;
                let mut axis = d;
                loop {
                    if axis == 0 {
                        break 'sweep;
                    }
                    axis -= 1;
                    idx[axis] += 1;
                    if idx[axis] < axis_points[axis].len() {
                        break;
                    }
                    idx[axis] = 0;
                }
            }
            Ok(acc.max(0.0).sqrt())
        }
        QuadratureMode::LowDiscrepancy => {
            use rand::{Rng, SeedableRng};
            if spec.sample_count < MIN_SAMPLE_COUNT {
                return Err(Error::SampleCountTooSmall {
                    got: spec.sample_count,
                    min: MIN_SAMPLE_COUNT,
                });
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
            let mut acc = 0.0;
            let mut x = vec![0.0; d];
            let total = SHIFT_COUNT * spec.sample_count;
            for _ in 0..SHIFT_COUNT {
                let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
                for k in 1..=spec.sample_count as u64 {
                    for j in 0..d {
                        let t = halton(k, HALTON_BASES[j]) + shift[j];
                        x[j] = t - t.floor();
                    }
                    let v = f.mixed2(&x)?;
                    acc += v * v;
                }
            }
            Ok((acc / total as f64).max(0.0).sqrt())
        }
    }
}

// ----- exact separable route -----

/// 1D integrals `(∫ g·g̃, ∫ g'·g̃')` over [0,1] for smooth factors.
fn smooth_smooth(g: &SmoothFactor, h: &SmoothFactor) -> (f64, f64) {
    let (nodes, weights) = gauss_legendre(12);
    let mut g0 = 0.0;
    let mut g1 = 0.0;
    for panel in 0..4 {
        let a = panel as f64 / 4.0;
        let b = (panel + 1) as f64 / 4.0;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (t, w) in nodes.iter().zip(&weights) {
            let x = mid + half * t;
            g0 += half * w * g.eval(x) * h.eval(x);
            g1 += half * w * g.deriv(x) * h.deriv(x);
        }
    }
    (g0, g1)
}

/// 1D integrals `(∫ g·u, ∫ g'·u')` over the support of a piecewise factor.
fn smooth_piecewise(g: &SmoothFactor, u: &Func1) -> (f64, f64) {
    let (nodes, weights) = gauss_legendre(8);
    let (lo, hi) = u.support();
    let mut cuts: Vec<f64> = u.breakpoints().into_iter().filter(|&t| t > lo && t < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup();
    let mut g0 = 0.0;
    let mut g1 = 0.0;
    for panel in cuts.windows(2) {
        let width = panel[1] - panel[0];
        if width < 1e-300 {
            continue;
        }
        let mid = 0.5 * (panel[0] + panel[1]);
        let half = 0.5 * width;
        for (t, w) in nodes.iter().zip(&weights) {
            let x = mid + half * t;
            let (uv, ud) = u.eval_with_deriv(x);
            g0 += half * w * g.eval(x) * uv;
            g1 += half * w * g.deriv(x) * ud;
        }
    }
    (g0, g1)
}

/// Exact `‖f - approx‖` quantities for a separable target against a
/// factored sum, via one-dimensional cross integrals:
/// `‖f - A‖² = ‖f‖² - 2⟨f, A⟩ + ‖A‖²` termwise in both expansions.
pub fn separable_distance(f: &TargetFunction, approx: &FactoredSum) -> Result<InnerProducts> {
    let sep = f.separable.as_ref().ok_or(Error::MissingSeparableForm)?;
    if f.d != approx.dim() {
        return Err(Error::DimensionMismatch {
            left: f.d,
            right: approx.dim(),
        });
    }
    let d = f.d;

    // Distinct smooth factors.
    let mut smooth: Vec<&SmoothFactor> = Vec::new();
    let mut term_ids: Vec<Vec<usize>> = Vec::new();
    for (_, factors) in &sep.terms {
        let ids = factors
            .iter()
            .map(|g| {
                if let Some(pos) = smooth.iter().position(|s| *s == g) {
                    pos
                } else {
                    smooth.push(g);
                    smooth.len() - 1
                }
            })
            .collect();
        term_ids.push(ids);
    }

    // Gram blocks: smooth-smooth and smooth-piecewise.
    let ns = smooth.len();
    let mut ss = vec![vec![(0.0, 0.0); ns]; ns];
    for a in 0..ns {
        for b in a..ns {
            let g = smooth_smooth(smooth[a], smooth[b]);
            ss[a][b] = g;
            ss[b][a] = g;
        }
    }
    let pool = approx.pool();
    let mut sp = vec![vec![(0.0, 0.0); pool.len()]; ns];
    for a in 0..ns {
        for (pid, u) in pool.iter().enumerate() {
            sp[a][pid] = smooth_piecewise(smooth[a], u);
        }
    }

    let bilinear = |fa: &[usize], ca: f64, fb: &[usize], cb: f64, gram: &dyn Fn(usize, usize) -> (f64, f64)| {
        let mut l2 = ca * cb;
        for ax in 0..d {
            l2 *= gram(fa[ax], fb[ax]).0;
        }
        let mut energy = 0.0;
        for m in 0..d {
            let mut term = ca * cb;
            for ax in 0..d {
                let g = gram(fa[ax], fb[ax]);
                term *= if ax == m { g.1 } else { g.0 };
            }
            energy += term;
        }
        (l2, energy)
    };

    // ‖f‖².
    let mut f_l2 = 0.0;
    let mut f_energy = 0.0;
    for (s, (cs, _)) in sep.terms.iter().enumerate() {
        for (t, (ct, _)) in sep.terms.iter().enumerate() {
            let (l2, en) = bilinear(&term_ids[s], *cs, &term_ids[t], *ct, &|a, b| ss[a][b]);
            f_l2 += l2;
            f_energy += en;
        }
    }

    // ⟨f, A⟩.
    let mut x_l2 = 0.0;
    let mut x_energy = 0.0;
    for (s, (cs, _)) in sep.terms.iter().enumerate() {
        for term in approx.terms() {
            let fb: Vec<usize> = term.factors.iter().map(|&id| id as usize).collect();
            let (l2, en) = bilinear(&term_ids[s], *cs, &fb, term.coeff, &|a, b| sp[a][b]);
            x_l2 += l2;
            x_energy += en;
        }
    }

    // ‖A‖².
    let a_norm = factored::norm(approx);

    Ok(InnerProducts {
        l2_sq: (f_l2 - 2.0 * x_l2 + a_norm.l2_sq).max(0.0),
        energy_sq: (f_energy - 2.0 * x_energy + a_norm.energy_sq).max(0.0),
    })
}

/// Exact norms of a separable target itself.
pub fn separable_norm(f: &TargetFunction) -> Result<InnerProducts> {
    separable_distance(f, &FactoredSum::new(f.d))
}
