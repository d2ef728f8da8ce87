//! Dyadic multi-indices, odd grid indices, sparse index sets, and tensor
//! hat functions with exact piecewise derivatives.
//!
//! A hierarchical basis function on `[0,1]^d` is identified by a level
//! vector `l >= 1` (per-axis mesh width `h_j = 2^-l_j`) together with an odd
//! index vector `i`, `1 <= i_j <= 2^l_j - 1`, placing the grid point
//! `x_{l,i} = i ⊙ 2^-l`. Odd indices make the representation unique, so the
//! grids attached to distinct levels are disjoint.
//!
//! Two truncations of the level lattice are provided:
//!
//! * total-degree: `V_n = { l : |l|_1 <= n + d - 1 }`,
//! * energy-based: all `l` with
//!   `|l|_1 - log2(Σ_j 4^l_j)/5 <= (n+d-1) - log2(4^n + 4d - 4)/5`.
//!
//! Energy-based membership is decided in exact integer arithmetic: with
//! `k = |l|_1 - (n+d-1)` the defining inequality is equivalent to
//! `2^(5k) · (4^n + 4d - 4) <= Σ_j 4^l_j`, which is evaluated with
//! overflow-checked shifts. Ties are kept, matching the `<=` in the
//! defining inequality.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, MAX_DIM, MAX_LEVEL};

/// Level multi-index `l = (l_1, ..., l_d)`, every component `>= 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelIndex {
    levels: Vec<u8>,
}

impl LevelIndex {
    pub fn new(levels: Vec<u8>) -> Result<Self> {
        if levels.is_empty() || levels.len() > MAX_DIM {
            return Err(Error::DimensionOutOfRange {
                got: levels.len(),
                max: MAX_DIM,
            });
        }
        if levels.iter().any(|&l| l == 0) {
            return Err(Error::InvalidLevel);
        }
        if let Some(&l) = levels.iter().find(|&&l| l > MAX_LEVEL) {
            return Err(Error::LevelOutOfRange {
                got: l as u32,
                max: MAX_LEVEL as u32,
            });
        }
        Ok(Self { levels })
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    /// `|l|_1 = l_1 + ... + l_d`.
    pub fn l1(&self) -> u32 {
        self.levels.iter().map(|&l| l as u32).sum()
    }

    pub fn max_level(&self) -> u8 {
        *self.levels.iter().max().expect("nonempty")
    }

    /// Mesh width `h_j = 2^-l_j` of axis `j`.
    pub fn mesh_width(&self, axis: usize) -> f64 {
        0.5f64.powi(self.levels[axis] as i32)
    }

    /// Levels non-decreasing, i.e. the canonical orbit representative.
    pub fn is_ordered(&self) -> bool {
        self.levels.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Odd index multi-index `i`, compatible with some [`LevelIndex`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OddIndex {
    indices: Vec<u32>,
}

impl OddIndex {
    pub fn new(indices: Vec<u32>) -> Result<Self> {
        if indices.is_empty() || indices.len() > MAX_DIM {
            return Err(Error::DimensionOutOfRange {
                got: indices.len(),
                max: MAX_DIM,
            });
        }
        if let Some(&i) = indices.iter().find(|&&i| i % 2 == 0) {
            return Err(Error::InvalidOddIndex {
                level: 0,
                index: i,
            });
        }
        Ok(Self { indices })
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

/// Checks that `i` is a valid odd index for `l` componentwise.
pub fn check_pair(l: &LevelIndex, i: &OddIndex) -> Result<()> {
    if l.dim() != i.dim() {
        return Err(Error::PairLengthMismatch {
            levels: l.dim(),
            indices: i.dim(),
        });
    }
    for (&lv, &ix) in l.levels().iter().zip(i.indices()) {
        if ix % 2 == 0 || ix >= 1u32 << lv {
            return Err(Error::InvalidOddIndex {
                level: lv,
                index: ix,
            });
        }
    }
    Ok(())
}

/// Which truncation of the level lattice to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexSetKind {
    /// `|l|_1 <= n + d - 1`.
    TotalDegree,
    /// Energy-based cost–benefit truncation; always a subset of the
    /// total-degree set at the same `n`.
    EnergyBased,
}

/// A fully specified index set: kind, refinement level `n`, dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSetSpec {
    pub kind: IndexSetKind,
    pub n: u8,
    pub d: usize,
}

impl IndexSetSpec {
    pub fn new(kind: IndexSetKind, n: u8, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::DimensionOutOfRange { got: d, max: MAX_DIM });
        }
        if n == 0 || n > MAX_LEVEL {
            return Err(Error::LevelOutOfRange {
                got: n as u32,
                max: MAX_LEVEL as u32,
            });
        }
        Ok(Self { kind, n, d })
    }

    pub fn total_degree(n: u8, d: usize) -> Result<Self> {
        Self::new(IndexSetKind::TotalDegree, n, d)
    }

    pub fn energy_based(n: u8, d: usize) -> Result<Self> {
        Self::new(IndexSetKind::EnergyBased, n, d)
    }
}

/// All odd indices compatible with `l`; exactly `2^(|l|_1 - d)` of them,
/// in lexicographic order.
pub fn odd_index_set(l: &LevelIndex) -> Vec<OddIndex> {
    let d = l.dim();
    let mut out = Vec::new();
    let mut cur = vec![1u32; d];
    loop {
        out.push(OddIndex {
            indices: cur.clone(),
        });
        // Odometer over odd values per axis.
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            cur[axis] += 2;
            if cur[axis] < 1u32 << l.levels[axis] {
                break;
            }
            cur[axis] = 1;
        }
    }
}

/// The dyadic grid point `i ⊙ 2^-l`; all coordinates in `(0,1)`.
pub fn grid_point(l: &LevelIndex, i: &OddIndex) -> Result<Vec<f64>> {
    check_pair(l, i)?;
    Ok(l.levels()
        .iter()
        .zip(i.indices())
        .map(|(&lv, &ix)| ix as f64 * 0.5f64.powi(lv as i32))
        .collect())
}

/// One-dimensional hat `φ((x - i·h)/h)` with `φ(t) = max(0, 1-|t|)`,
/// returning `(value, d/dx)`. The slope at a kink is the right-continuous
/// one; kinks have measure zero, so quadrature results are unaffected.
pub fn hat1(level: u8, index: u32, x: f64) -> (f64, f64) {
    let scale = f64::from(1u32 << level.min(31)) * 2f64.powi(level as i32 - level.min(31) as i32);
    let t = x * scale - index as f64;
    if !(-1.0..1.0).contains(&t) {
        let value = if t == 1.0 { 0.0 } else { (1.0 - t.abs()).max(0.0) };
        return (value, 0.0);
    }
    if t < 0.0 {
        (1.0 + t, scale)
    } else {
        (1.0 - t, -scale)
    }
}

/// Tensor hat `φ_{l,i}(x) = Π_j φ_{l_j,i_j}(x_j)` with its exact gradient.
pub fn hat_eval(l: &LevelIndex, i: &OddIndex, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_pair(l, i)?;
    if x.len() != l.dim() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: l.dim(),
        });
    }
    let d = l.dim();
    let mut vals = Vec::with_capacity(d);
    let mut slopes = Vec::with_capacity(d);
    for j in 0..d {
        let (v, s) = hat1(l.levels[j], i.indices()[j], x[j]);
        vals.push(v);
        slopes.push(s);
    }
    // Prefix/suffix products so a zero factor still yields the one-sided
    // gradient on the remaining axis.
    let mut prefix = vec![1.0; d + 1];
    for j in 0..d {
        prefix[j + 1] = prefix[j] * vals[j];
    }
    let mut suffix = vec![1.0; d + 1];
    for j in (0..d).rev() {
        suffix[j] = suffix[j + 1] * vals[j];
    }
    let grad = (0..d)
        .map(|j| slopes[j] * prefix[j] * suffix[j + 1])
        .collect();
    Ok((prefix[d], grad))
}

/// Exact membership test for the energy-based set.
///
/// With `k = |l|_1 - (n+d-1)`, `A = Σ_j 4^l_j` and `B = 4^n + 4d - 4`, the
/// defining inequality is `2^(5k)·B <= A` after clearing the base-2
/// logarithms; equality is included.
pub fn energy_based_contains(levels: &[u8], n: u8, d: usize) -> bool {
    debug_assert_eq!(levels.len(), d);
    let l1: i64 = levels.iter().map(|&l| i64::from(l)).sum();
    let k = l1 - (i64::from(n) + d as i64 - 1);
    let a: u128 = levels.iter().map(|&l| 1u128 << (2 * u32::from(l))).sum();
    let b: u128 = (1u128 << (2 * u32::from(n))) + 4 * d as u128 - 4;
    if k >= 0 {
        let shift = 5 * k as u32;
        if shift > b.leading_zeros() {
            return false; // B·2^(5k) exceeds u128, hence exceeds A
        }
        (b << shift) <= a
    } else {
        let shift = 5 * (-k) as u32;
        if shift > a.leading_zeros() {
            return true; // A·2^(-5k) exceeds u128, hence exceeds B
        }
        b <= (a << shift)
    }
}

fn for_each_level_rec(d: usize, budget: u32, prefix: &mut Vec<u8>, f: &mut impl FnMut(&[u8])) {
    if prefix.len() == d {
        f(prefix);
        return;
    }
    let remaining = d - prefix.len();
    // Leave at least 1 per remaining axis.
    let max_here = budget.saturating_sub(remaining as u32 - 1);
    for l in 1..=max_here.min(u32::from(MAX_LEVEL)) {
        prefix.push(l as u8);
        for_each_level_rec(d, budget - l, prefix, f);
        prefix.pop();
    }
}

/// Visits every `l >= 1` with `|l|_1 <= budget`, in lexicographic order.
pub fn for_each_level(d: usize, budget: u32, mut f: impl FnMut(&[u8])) {
    let mut prefix = Vec::with_capacity(d);
    for_each_level_rec(d, budget, &mut prefix, &mut f);
}

/// Enumerates the requested index set, in lexicographic order.
///
/// The energy-based set is produced by filtering the total-degree
/// candidates; this is sound because any `l` with `|l|_1 > n+d-1` fails the
/// energy inequality (the left side gains a factor `2^(5k)` while
/// `Σ 4^l_j <= 4^(n+k) + 4d - 4`).
pub fn index_set(spec: &IndexSetSpec) -> Vec<LevelIndex> {
    let budget = u32::from(spec.n) + spec.d as u32 - 1;
    let mut out = Vec::new();
    for_each_level(spec.d, budget, |levels| {
        let keep = match spec.kind {
            IndexSetKind::TotalDegree => true,
            IndexSetKind::EnergyBased => energy_based_contains(levels, spec.n, spec.d),
        };
        if keep {
            out.push(LevelIndex {
                levels: levels.to_vec(),
            });
        }
    });
    out
}

/// Number of grid points `|∪_{l} i_l|` carried by the index set.
///
/// Odd indices make level grids disjoint, so the union size is
/// `Σ_l 2^(|l|_1 - d)` with no inclusion–exclusion. With `symmetric` set,
/// only levels with non-decreasing components are counted, which is the
/// grid underlying the symmetrized expansion.
pub fn count_grid_points(spec: &IndexSetSpec, symmetric: bool) -> u128 {
    let mut total: u128 = 0;
    for l in index_set(spec) {
        if symmetric && !l.is_ordered() {
            continue;
        }
        total += 1u128 << (l.l1() - spec.d as u32);
    }
    total
}

/// The closed-form cardinality bound `2^n · (d/2) · e^d` for the
/// energy-based grid.
pub fn grid_count_bound(n: u8, d: usize) -> f64 {
    2f64.powi(i32::from(n)) * (d as f64 / 2.0) * (d as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(levels: &[u8]) -> LevelIndex {
        LevelIndex::new(levels.to_vec()).unwrap()
    }

    fn ix(indices: &[u32]) -> OddIndex {
        OddIndex::new(indices.to_vec()).unwrap()
    }

    #[test]
    fn odd_index_set_level_one() {
        let set = odd_index_set(&lv(&[1]));
        assert_eq!(set, vec![ix(&[1])]);
    }

    #[test]
    fn odd_index_set_level_two_three() {
        let set = odd_index_set(&lv(&[2, 3]));
        let expected: Vec<OddIndex> = [
            [1, 1], [1, 3], [1, 5], [1, 7], [3, 1], [3, 3], [3, 5], [3, 7],
        ]
        .iter()
        .map(|p| ix(p))
        .collect();
        assert_eq!(set, expected);
    }

    #[test]
    fn odd_index_set_level_three() {
        let set = odd_index_set(&lv(&[3]));
        assert_eq!(set, vec![ix(&[1]), ix(&[3]), ix(&[5]), ix(&[7])]);
    }

    #[test]
    fn odd_index_set_cardinality_exhaustive() {
        // |i_l| = 2^(|l|_1 - d) for every l with |l|_1 <= 12.
        for d in 1..=4 {
            for_each_level(d, 12, |levels| {
                let l = lv(levels);
                let expected = 1usize << (l.l1() - d as u32);
                assert_eq!(odd_index_set(&l).len(), expected, "l={levels:?}");
            });
        }
    }

    #[test]
    fn grid_point_examples() {
        assert_eq!(grid_point(&lv(&[2]), &ix(&[3])).unwrap(), vec![0.75]);
        assert_eq!(
            grid_point(&lv(&[1, 1]), &ix(&[1, 1])).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(grid_point(&lv(&[3]), &ix(&[5])).unwrap(), vec![0.625]);
    }

    #[test]
    fn grid_point_rejects_incompatible_pair() {
        assert!(grid_point(&lv(&[2]), &ix(&[5])).is_err());
        assert!(grid_point(&lv(&[2, 2]), &ix(&[1])).is_err());
    }

    #[test]
    fn hat_eval_center_edge_slope() {
        let (v, _) = hat_eval(&lv(&[1]), &ix(&[1]), &[0.5]).unwrap();
        assert_eq!(v, 1.0);

        let (v, _) = hat_eval(&lv(&[2]), &ix(&[1]), &[0.5]).unwrap();
        assert_eq!(v, 0.0);

        let (_, g) = hat_eval(&lv(&[2]), &ix(&[1]), &[0.1]).unwrap();
        assert_eq!(g[0], 4.0);
    }

    #[test]
    fn hat_gradient_matches_central_differences() {
        // Away from kinks the piecewise slope must agree with central
        // finite differences to 1e-5 relative.
        let step = 1e-6;
        let cases = [
            (lv(&[2]), ix(&[3]), vec![0.709]),
            (lv(&[3, 1]), ix(&[5, 1]), vec![0.61, 0.39]),
            (lv(&[2, 2, 1]), ix(&[1, 3, 1]), vec![0.21, 0.66, 0.44]),
        ];
        for (l, i, x) in cases {
            let (_, grad) = hat_eval(&l, &i, &x).unwrap();
            for m in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[m] += step;
                xm[m] -= step;
                let (vp, _) = hat_eval(&l, &i, &xp).unwrap();
                let (vm, _) = hat_eval(&l, &i, &xm).unwrap();
                let fd = (vp - vm) / (2.0 * step);
                let denom = grad[m].abs().max(1.0);
                assert!(
                    ((fd - grad[m]) / denom).abs() < 1e-5,
                    "axis {m}: fd={fd} grad={}",
                    grad[m]
                );
            }
        }
    }

    #[test]
    fn energy_set_is_first_n_levels_in_1d() {
        for n in 1..=10u8 {
            let spec = IndexSetSpec::energy_based(n, 1).unwrap();
            let got = index_set(&spec);
            let expected: Vec<LevelIndex> = (1..=n).map(|l| lv(&[l])).collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn total_degree_d2_n5_has_15_levels() {
        let spec = IndexSetSpec::total_degree(5, 2).unwrap();
        assert_eq!(index_set(&spec).len(), 15);
    }

    #[test]
    fn energy_d2_n5_frozen_regression() {
        // Enumerated by the exact membership test; also reproducible by
        // hand from 2^(5k)·1028 <= 4^l1 + 4^l2.
        let spec = IndexSetSpec::energy_based(5, 2).unwrap();
        let got = index_set(&spec);
        assert_eq!(got.len(), 12);
        let expected: Vec<LevelIndex> = [
            [1u8, 1], [1, 2], [1, 3], [1, 4], [1, 5],
            [2, 1], [2, 2], [2, 3], [3, 1], [3, 2], [4, 1], [5, 1],
        ]
        .iter()
        .map(|p| lv(p))
        .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn energy_subset_of_total_degree() {
        for d in 1..=6 {
            for n in 1..=8 {
                let energy = index_set(&IndexSetSpec::energy_based(n, d).unwrap());
                let total = index_set(&IndexSetSpec::total_degree(n, d).unwrap());
                let total_set: std::collections::BTreeSet<_> = total.into_iter().collect();
                assert!(energy.iter().all(|l| total_set.contains(l)), "d={d} n={n}");
            }
        }
    }

    #[test]
    fn energy_membership_box_oracle() {
        // Independent of the V_n-candidate enumeration: scan a box that
        // strictly contains V_n and check that the members found this way
        // are exactly the enumerated set.
        for (d, n) in [(1usize, 4u8), (2, 4), (3, 3)] {
            let spec = IndexSetSpec::energy_based(n, d).unwrap();
            let from_enum = index_set(&spec);
            let side = u32::from(n) + 4;
            let mut from_box = Vec::new();
            let mut cur = vec![1u8; d];
            'outer: loop {
                if energy_based_contains(&cur, n, d) {
                    from_box.push(lv(&cur));
                }
                let mut axis = d;
                loop {
                    if axis == 0 {
                        break 'outer;
                    }
                    axis -= 1;
                    cur[axis] += 1;
                    if u32::from(cur[axis]) <= side {
                        break;
                    }
                    cur[axis] = 1;
                }
            }
            from_box.sort();
            let mut sorted_enum = from_enum.clone();
            sorted_enum.sort();
            assert_eq!(from_box, sorted_enum, "d={d} n={n}");
        }
    }

    #[test]
    fn index_sets_are_permutation_closed() {
        for d in 2..=4 {
            for n in 1..=6 {
                for kind in [IndexSetKind::TotalDegree, IndexSetKind::EnergyBased] {
                    let spec = IndexSetSpec::new(kind, n, d).unwrap();
                    let set: std::collections::BTreeSet<_> =
                        index_set(&spec).into_iter().collect();
                    for l in &set {
                        let mut rev = l.levels().to_vec();
                        rev.reverse();
                        assert!(set.contains(&lv(&rev)));
                        if d >= 3 {
                            let mut rot = l.levels().to_vec();
                            rot.rotate_left(1);
                            assert!(set.contains(&lv(&rot)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn count_examples_and_bound() {
        let spec = IndexSetSpec::energy_based(3, 1).unwrap();
        assert_eq!(count_grid_points(&spec, false), 7);

        let spec = IndexSetSpec::energy_based(2, 2).unwrap();
        assert!(count_grid_points(&spec, true) <= count_grid_points(&spec, false));

        for d in 1..=6 {
            for n in 1..=8 {
                let spec = IndexSetSpec::energy_based(n, d).unwrap();
                let count = count_grid_points(&spec, false) as f64;
                assert!(
                    count <= grid_count_bound(n, d),
                    "d={d} n={n}: {count} > {}",
                    grid_count_bound(n, d)
                );
            }
        }
    }

    #[test]
    fn frozen_grid_counts_d2_n5() {
        let spec = IndexSetSpec::energy_based(5, 2).unwrap();
        assert_eq!(count_grid_points(&spec, false), 81);
        assert_eq!(count_grid_points(&spec, true), 43);
        let total = IndexSetSpec::total_degree(5, 2).unwrap();
        assert_eq!(count_grid_points(&total, false), 129);
    }

    #[test]
    fn symmetric_count_doubles_per_level() {
        for d in 1..=5 {
            for n in 4..=7u8 {
                let a = count_grid_points(&IndexSetSpec::energy_based(n, d).unwrap(), true) as f64;
                let b =
                    count_grid_points(&IndexSetSpec::energy_based(n + 1, d).unwrap(), true) as f64;
                let ratio = b / a;
                assert!(
                    (1.8..=2.2).contains(&ratio),
                    "d={d} n={n}: ratio {ratio}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn hat_values_stay_in_unit_range(level in 1u8..6, x in 0.0f64..1.0) {
            let max_index = (1u32 << level) - 1;
            let index = if max_index == 1 { 1 } else { 2 * (max_index / 4) + 1 };
            let (v, _) = hat1(level, index, x);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn odd_set_cardinality(levels in proptest::collection::vec(1u8..5, 1..4)) {
            let l = LevelIndex::new(levels).unwrap();
            let expected = 1usize << (l.l1() - l.dim() as u32);
            prop_assert_eq!(odd_index_set(&l).len(), expected);
        }
    }
}
