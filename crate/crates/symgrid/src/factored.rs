//! Exact `L²` and energy inner products for sums of tensor products of
//! univariate piecewise polynomials.
//!
//! Both the hierarchical expansions and the synthesized networks are, as
//! functions, finite sums `Σ_k c_k Π_s u_{k,s}(x_s)` where every
//! univariate factor is a hat or a smoothed hat. Inner products of such
//! sums reduce to one-dimensional Gram integrals
//! `∫ u v dx` and `∫ u' v' dx`, which are computed exactly with 3-point
//! Gauss panels between merged breakpoints (the integrands are piecewise
//! polynomials of degree at most four). This sidesteps full tensor
//! quadrature sweeps entirely and keeps distances accurate to machine
//! precision.

use crate::grid::hat1;

/// Sanity limit for the smoothing parameter: below `1/2` the five pieces
/// of the smoothed hat do not overlap.
pub const MAX_DELTA: f64 = 0.5;

/// A univariate basis factor on `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func1 {
    /// `φ((x - i h)/h)` with `φ(t) = max(0, 1 - |t|)`, `h = 2^-level`.
    Hat { level: u8, index: u32 },
    /// The squared-ReLU smoothing `h_δ((x - i h)/h)`: each kink of the hat
    /// is replaced by a quadratic ramp of width `δ` in unit-hat
    /// coordinates. Support shrinks to `[(i-1+δ)h, (i+1)h]`; the function
    /// is C¹ and nonnegative.
    SmoothHat { level: u8, index: u32, delta: f64 },
}

/// `h_δ` and its `u`-derivative in unit-hat coordinates.
pub fn smooth_hat_u(u: f64, delta: f64) -> (f64, f64) {
    debug_assert!(delta > 0.0 && delta < MAX_DELTA);
    if u < -1.0 + delta || u >= 1.0 {
        return (0.0, 0.0);
    }
    if u < -1.0 + 2.0 * delta {
        let s = u + 1.0 - delta;
        (s * s / (2.0 * delta), s / delta)
    } else if u < 0.0 {
        (u + 1.0 - 1.5 * delta, 1.0)
    } else if u < delta {
        (u + 1.0 - 1.5 * delta - u * u / delta, 1.0 - 2.0 * u / delta)
    } else if u < 1.0 - delta {
        (1.0 - 0.5 * delta - u, -1.0)
    } else {
        let w = u - 1.0;
        (w * w / (2.0 * delta), w / delta)
    }
}

impl Func1 {
    pub fn level(&self) -> u8 {
        match *self {
            Func1::Hat { level, .. } | Func1::SmoothHat { level, .. } => level,
        }
    }

    /// Closed support `[lo, hi]` in `[0,1]`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Func1::Hat { level, index } => {
                let h = 0.5f64.powi(level as i32);
                ((index - 1) as f64 * h, (index + 1) as f64 * h)
            }
            Func1::SmoothHat {
                level,
                index,
                delta,
            } => {
                let h = 0.5f64.powi(level as i32);
                ((index as f64 - 1.0 + delta) * h, (index + 1) as f64 * h)
            }
        }
    }

    /// Points where the piecewise polynomial changes, inside the support.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Func1::Hat { level, index } => {
                let h = 0.5f64.powi(level as i32);
                vec![
                    (index - 1) as f64 * h,
                    index as f64 * h,
                    (index + 1) as f64 * h,
                ]
            }
            Func1::SmoothHat {
                level,
                index,
                delta,
            } => {
                let h = 0.5f64.powi(level as i32);
                let c = index as f64;
                [
                    c - 1.0 + delta,
                    c - 1.0 + 2.0 * delta,
                    c,
                    c + delta,
                    c + 1.0 - delta,
                    c + 1.0,
                ]
                .iter()
                .map(|u| u * h)
                .collect()
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_deriv(x).0
    }

    /// `(value, d/dx)`.
    pub fn eval_with_deriv(&self, x: f64) -> (f64, f64) {
        match *self {
            Func1::Hat { level, index } => hat1(level, index, x),
            Func1::SmoothHat {
                level,
                index,
                delta,
            } => {
                let scale = 2f64.powi(level as i32);
                let u = x * scale - index as f64;
                let (v, du) = smooth_hat_u(u, delta);
                (v, du * scale)
            }
        }
    }

    fn dedup_key(&self) -> (u8, u8, u32, u64) {
        match *self {
            Func1::Hat { level, index } => (0, level, index, 0),
            Func1::SmoothHat {
                level,
                index,
                delta,
            } => (1, level, index, delta.to_bits()),
        }
    }
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774596669241483377035853079956, 0.555555555555555555555555555556),
    (0.0, 0.888888888888888888888888888889),
    (0.774596669241483377035853079956, 0.555555555555555555555555555556),
];

/// Exact `( ∫ u v dx , ∫ u' v' dx )` on `[0,1]`.
pub fn gram_pair(u: &Func1, v: &Func1) -> (f64, f64) {
    let (ulo, uhi) = u.support();
    let (vlo, vhi) = v.support();
    let lo = ulo.max(vlo);
    let hi = uhi.min(vhi);
    if lo >= hi {
        return (0.0, 0.0);
    }
    let mut cuts: Vec<f64> = u
        .breakpoints()
        .into_iter()
        .chain(v.breakpoints())
        .filter(|&c| c > lo && c < hi)
        .collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup();

    let mut g0 = 0.0;
    let mut g1 = 0.0;
    for panel in cuts.windows(2) {
        let (a, b) = (panel[0], panel[1]);
        if b - a < 1e-300 {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for &(node, weight) in &GAUSS3 {
            let x = mid + half * node;
            let (uv, ud) = u.eval_with_deriv(x);
            let (vv, vd) = v.eval_with_deriv(x);
            g0 += weight * half * uv * vv;
            g1 += weight * half * ud * vd;
        }
    }
    (g0, g1)
}

/// One tensor-product term `coeff · Π_s pool[factors[s]](x_s)`.
#[derive(Debug, Clone)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<u32>,
}

/// A finite sum of tensor-product terms over a shared univariate pool.
#[derive(Debug, Clone, Default)]
pub struct FactoredSum {
    d: usize,
    pool: Vec<Func1>,
    terms: Vec<Term>,
}

impl FactoredSum {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            pool: Vec::new(),
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn pool(&self) -> &[Func1] {
        &self.pool
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Interns a factor, deduplicating exact repeats.
    pub fn intern(&mut self, f: Func1) -> u32 {
        let key = f.dedup_key();
        if let Some(pos) = self.pool.iter().position(|g| g.dedup_key() == key) {
            return pos as u32;
        }
        self.pool.push(f);
        (self.pool.len() - 1) as u32
    }

    pub fn push_term(&mut self, coeff: f64, factors: Vec<u32>) {
        debug_assert_eq!(factors.len(), self.d);
        self.terms.push(Term { coeff, factors });
    }

    /// The finest dyadic level among the factors, as a quadrature hint.
    pub fn finest_level(&self) -> u8 {
        self.pool.iter().map(|f| f.level()).max().unwrap_or(1)
    }

    /// Distinct breakpoints of all factors along one axis (factors are
    /// shared across axes, so the set is axis-independent).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut cuts: Vec<f64> = self.pool.iter().flat_map(|f| f.breakpoints()).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        cuts.dedup();
        cuts
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }

    /// Evaluates value and gradient with one pass over the pool.
    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(x.len(), self.d);
        let d = self.d;
        // evals[id][axis] = (value, d/dx) of pool[id] at x[axis].
        let evals: Vec<Vec<(f64, f64)>> = self
            .pool
            .iter()
            .map(|f| x.iter().map(|&v| f.eval_with_deriv(v)).collect())
            .collect();
        let mut value = 0.0;
        let mut grad = vec![0.0; d];
        let mut prefix = vec![0.0; d + 1];
        let mut suffix = vec![0.0; d + 1];
        for term in &self.terms {
            prefix[0] = 1.0;
            for s in 0..d {
                prefix[s + 1] = prefix[s] * evals[term.factors[s] as usize][s].0;
            }
            suffix[d] = 1.0;
            for s in (0..d).rev() {
                suffix[s] = suffix[s + 1] * evals[term.factors[s] as usize][s].0;
            }
            value += term.coeff * prefix[d];
            for s in 0..d {
                let dv = evals[term.factors[s] as usize][s].1;
                grad[s] += term.coeff * dv * prefix[s] * suffix[s + 1];
            }
        }
        (value, grad)
    }
}

/// Squared `L²` and energy (gradient `L²`) quantities; `H¹` squared is
/// their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProducts {
    pub l2_sq: f64,
    pub energy_sq: f64,
}

impl InnerProducts {
    pub fn l2(&self) -> f64 {
        self.l2_sq.max(0.0).sqrt()
    }

    pub fn energy(&self) -> f64 {
        self.energy_sq.max(0.0).sqrt()
    }

    pub fn h1(&self) -> f64 {
        (self.l2_sq.max(0.0) + self.energy_sq.max(0.0)).sqrt()
    }
}

/// Exact `‖a - b‖` quantities via the 1D Gram route.
pub fn distance(a: &FactoredSum, b: &FactoredSum) -> InnerProducts {
    assert_eq!(a.dim(), b.dim());
    let d = a.dim();
    // Merge pools; remap b's factor ids.
    let mut merged = a.clone();
    let remap: Vec<u32> = b.pool.iter().map(|&f| merged.intern(f)).collect();
    for term in &b.terms {
        let factors = term.factors.iter().map(|&id| remap[id as usize]).collect();
        merged.push_term(-term.coeff, factors);
    }

    let p = merged.pool.len();
    let mut g0 = vec![vec![0.0; p]; p];
    let mut g1 = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i..p {
            let (a0, a1) = gram_pair(&merged.pool[i], &merged.pool[j]);
            g0[i][j] = a0;
            g0[j][i] = a0;
            g1[i][j] = a1;
            g1[j][i] = a1;
        }
    }

    let mut l2_sq = 0.0;
    let mut energy_sq = 0.0;
    let terms = &merged.terms;
    let mut pre = vec![0.0; d + 1];
    let mut suf = vec![0.0; d + 1];
    for s in 0..terms.len() {
        for t in s..terms.len() {
            let scale = if s == t { 1.0 } else { 2.0 };
            let c = scale * terms[s].coeff * terms[t].coeff;
            if c == 0.0 {
                continue;
            }
            pre[0] = 1.0;
            for ax in 0..d {
                pre[ax + 1] = pre[ax]
                    * g0[terms[s].factors[ax] as usize][terms[t].factors[ax] as usize];
            }
            suf[d] = 1.0;
            for ax in (0..d).rev() {
                suf[ax] = suf[ax + 1]
                    * g0[terms[s].factors[ax] as usize][terms[t].factors[ax] as usize];
            }
            if pre[d] != 0.0 {
                l2_sq += c * pre[d];
            }
            for ax in 0..d {
                let outer = pre[ax] * suf[ax + 1];
                if outer == 0.0 {
                    continue;
                }
                let gd = g1[terms[s].factors[ax] as usize][terms[t].factors[ax] as usize];
                energy_sq += c * gd * outer;
            }
        }
    }
    InnerProducts { l2_sq, energy_sq }
}

/// Exact norms of a single sum (distance to zero).
pub fn norm(a: &FactoredSum) -> InnerProducts {
    distance(a, &FactoredSum::new(a.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singleton(d: usize, f: Func1) -> FactoredSum {
        let mut sum = FactoredSum::new(d);
        let id = sum.intern(f);
        sum.push_term(1.0, vec![id; d]);
        sum
    }

    #[test]
    fn hat_norms_closed_form() {
        // 1D level-1 hat: energy^2 = 4, l2^2 = 1/3.
        let n = norm(&singleton(1, Func1::Hat { level: 1, index: 1 }));
        assert!((n.energy_sq - 4.0).abs() < 1e-14);
        assert!((n.l2_sq - 1.0 / 3.0).abs() < 1e-15);
        assert!((n.energy() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tensor_hat_norms() {
        // 2D tensor of level-1 hats: l2^2 = (1/3)^2, energy^2 = 2·4·(1/3).
        let n = norm(&singleton(2, Func1::Hat { level: 1, index: 1 }));
        assert!((n.l2_sq - 1.0 / 9.0).abs() < 1e-15);
        assert!((n.energy_sq - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_hat_distance_closed_form() {
        // In unit-hat coordinates: energy^2 = 3δ exactly and
        // l2^2 = 2.5δ² - 1.95δ³ exactly; dilation to level l scales them
        // by 2^l and 2^-l.
        for level in [1u8, 2, 3] {
            for delta in [0.25, 0.125, 0.0625] {
                let h = 0.5f64.powi(level as i32);
                let hat = singleton(1, Func1::Hat { level, index: 1 });
                let smooth = singleton(
                    1,
                    Func1::SmoothHat {
                        level,
                        index: 1,
                        delta,
                    },
                );
                let d = distance(&smooth, &hat);
                let energy_exact = 3.0 * delta / h;
                let l2_exact = h * (2.5 * delta * delta - 1.95 * delta * delta * delta);
                assert!(
                    (d.energy_sq - energy_exact).abs() < 1e-12 * energy_exact,
                    "level={level} delta={delta}: {} vs {energy_exact}",
                    d.energy_sq
                );
                assert!(
                    (d.l2_sq - l2_exact).abs() < 1e-12 * l2_exact,
                    "level={level} delta={delta}: {} vs {l2_exact}",
                    d.l2_sq
                );
            }
        }
    }

    #[test]
    fn smooth_hat_h1_contracts_by_sqrt2() {
        let hat = singleton(1, Func1::Hat { level: 1, index: 1 });
        let dist = |delta: f64| {
            distance(
                &singleton(
                    1,
                    Func1::SmoothHat {
                        level: 1,
                        index: 1,
                        delta,
                    },
                ),
                &hat,
            )
            .h1()
        };
        let mut delta = 1.0 / 16.0;
        for _ in 0..3 {
            let ratio = dist(delta / 2.0) / dist(delta);
            assert!(
                (0.6..=0.8).contains(&ratio),
                "delta={delta}: ratio {ratio}"
            );
            delta /= 2.0;
        }
    }

    #[test]
    fn smooth_hat_is_c1_and_nonnegative() {
        let f = Func1::SmoothHat {
            level: 2,
            index: 3,
            delta: 0.125,
        };
        let mut prev_x: Option<f64> = None;
        for k in 0..=4000 {
            let x = k as f64 / 4000.0;
            let (v, _) = f.eval_with_deriv(x);
            assert!(v >= 0.0, "negative at {x}");
            // Bounded below the hat.
            let (hv, _) = Func1::Hat { level: 2, index: 3 }.eval_with_deriv(x);
            assert!(v <= hv + 1e-12, "exceeds hat at {x}");
            prev_x = Some(x);
        }
        let _ = prev_x;
        // Derivative continuity at the seam points.
        let h = 0.25;
        for u in [-0.875, -0.75, 0.0, 0.125, 0.875, 1.0] {
            let x = (3.0 + u) * h;
            let (_, dl) = f.eval_with_deriv(x - 1e-9);
            let (_, dr) = f.eval_with_deriv(x + 1e-9);
            assert!((dl - dr).abs() < 1e-5, "kink at u={u}");
        }
    }

    #[test]
    fn eval_matches_gradient_by_finite_differences() {
        let mut sum = FactoredSum::new(2);
        let a = sum.intern(Func1::Hat { level: 2, index: 3 });
        let b = sum.intern(Func1::SmoothHat {
            level: 1,
            index: 1,
            delta: 0.1,
        });
        sum.push_term(0.7, vec![a, b]);
        sum.push_term(-0.3, vec![b, b]);
        let x = [0.71, 0.43];
        let (_, grad) = sum.value_and_gradient(&x);
        for m in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[m] += 1e-7;
            xm[m] -= 1e-7;
            let fd = (sum.value(&xp) - sum.value(&xm)) / 2e-7;
            assert!((fd - grad[m]).abs() < 1e-6, "axis {m}");
        }
    }

    #[test]
    fn disjoint_supports_have_zero_gram() {
        let u = Func1::Hat { level: 2, index: 1 };
        let v = Func1::Hat { level: 2, index: 5 };
        assert_eq!(gram_pair(&u, &v), (0.0, 0.0));
    }
}
