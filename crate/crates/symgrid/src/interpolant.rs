//! Hierarchical surplus coefficients and truncated hat expansions.
//!
//! The surplus attached to a grid point is the defect between the function
//! value and the piecewise-linear interpolant of the coarser levels; the
//! tensor stencil `[-1/2, 1, -1/2]` per axis computes it from function
//! values alone (boundary values vanish for the class of targets handled
//! here). The same coefficient also equals
//! `Π_j (-h_j/2) · ∫ φ_{l,i} D^(2,...,2) f dx`: integrating the hat
//! against the mixed derivative by parts twice per axis collapses the
//! integral onto the stencil. The displayed coefficient in the source
//! material omits the `Π_j (-h_j/2)` factor, without which the expansion
//! fails to reproduce piecewise-linear functions; the scaled form is used
//! here and the two routes are kept as mutual cross-checks.
//!
//! Symmetric tables store one coefficient per canonical orbit,
//! `v̄ = v / |Stab(l,i)|`, so that the orbit sum
//! `ψ_{l,i} = Σ_{τ ∈ S_d} φ_{l,i} ∘ τ` counts every distinct permuted
//! basis function exactly once.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::factored::{FactoredSum, Func1};
use crate::grid::{self, IndexSetKind, IndexSetSpec, LevelIndex, OddIndex};
use crate::symmetry;
use crate::targets::TargetFunction;
use crate::{Error, Result};

/// Tensor application of the 1D stencil `[-1/2, 1, -1/2]` at spacing
/// `h_{l_j}` around the grid point, using function values only. Neighbors
/// on the boundary contribute zero.
pub fn surplus_stencil(f: &TargetFunction, l: &LevelIndex, i: &OddIndex) -> Result<f64> {
    grid::check_pair(l, i)?;
    let d = l.dim();
    let mut acc = 0.0;
    let mut offsets = vec![-1i32; d];
    let mut x = vec![0.0; d];
    'sum: loop {
        let mut weight = 1.0;
        let mut boundary = false;
        for j in 0..d {
            let pos = i.indices()[j] as i64 + offsets[j] as i64;
            if pos == 0 || pos == 1i64 << l.levels()[j] {
                boundary = true;
                break;
            }
            if offsets[j] != 0 {
                weight *= -0.5;
            }
            x[j] = pos as f64 * l.mesh_width(j);
        }
        if !boundary {
            acc += weight * f.value(&x);
        }
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
    Ok(acc)
}

/// The integral route: `Π_j (-h_j/2) · ∫ φ_{l,i}(x) D^(2,...,2) f(x) dx`
/// over the support of the hat, by tensor Gauss quadrature with
/// `quad_points` nodes per axis per half-cell. Agrees with the stencil to
/// quadrature accuracy for smooth targets.
pub fn surplus_integral(
    f: &TargetFunction,
    l: &LevelIndex,
    i: &OddIndex,
    quad_points: usize,
) -> Result<f64> {
    grid::check_pair(l, i)?;
    if !f.has_mixed2() {
        return Err(Error::MissingMixedDerivative);
    }
    let d = l.dim();
    let (nodes, weights) = crate::norms::gauss_legendre(quad_points);

    // Per axis: two half-cells [(i-1)h, ih] and [ih, (i+1)h].
    let mut axis_nodes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(d);
    for j in 0..d {
        let h = l.mesh_width(j);
        let center = i.indices()[j] as f64 * h;
        let mut pts = Vec::with_capacity(2 * quad_points);
        for half in 0..2 {
            let (a, b) = if half == 0 {
                (center - h, center)
            } else {
                (center, center + h)
            };
            let mid = 0.5 * (a + b);
            let scale = 0.5 * (b - a);
            for (t, w) in nodes.iter().zip(&weights) {
                pts.push((mid + scale * t, scale * w));
            }
        }
        axis_nodes.push(pts);
    }

    let mut acc = 0.0;
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    'sum: loop {
        let mut w = 1.0;
        for j in 0..d {
            let (xj, wj) = axis_nodes[j][idx[j]];
            x[j] = xj;
            let (hat, _) = grid::hat1(l.levels()[j], i.indices()[j], xj);
            w *= wj * hat;
        }
        acc += w * f.mixed2(&x)?;
        let mut axis = d;
        loop {
            if axis == 0 {
                break 'sum;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < axis_nodes[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }

    let scale: f64 = (0..d).map(|j| -0.5 * l.mesh_width(j)).product();
    Ok(scale * acc)
}

/// A truncated hierarchical expansion: coefficients keyed by `(l, i)`.
#[derive(Debug, Clone)]
pub struct SurplusTable {
    spec: IndexSetSpec,
    symmetric: bool,
    entries: BTreeMap<(LevelIndex, OddIndex), f64>,
    /// Per-level coefficient maps for point evaluation. For symmetric
    /// tables this is the orbit expansion (`v̄ · |Stab|` per member).
    eval_index: Vec<(LevelIndex, BTreeMap<Vec<u32>, f64>)>,
}

impl SurplusTable {
    pub fn spec(&self) -> &IndexSetSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.d
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Number of stored coefficients (canonical orbits when symmetric).
    pub fn basis_count(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(LevelIndex, OddIndex), &f64)> {
        self.entries.iter()
    }

    pub fn coefficient(&self, l: &LevelIndex, i: &OddIndex) -> Option<f64> {
        self.entries.get(&(l.clone(), i.clone())).copied()
    }

    /// Builds a table with externally supplied coefficients (used by the
    /// gradient-fit experiment). Keys must be canonical for symmetric
    /// tables and must belong to the declared index set.
    pub fn with_coefficients(
        spec: IndexSetSpec,
        symmetric: bool,
        coeffs: Vec<(LevelIndex, OddIndex, f64)>,
    ) -> Result<Self> {
        let allowed: std::collections::BTreeSet<LevelIndex> =
            grid::index_set(&spec).into_iter().collect();
        let mut entries = BTreeMap::new();
        for (l, i, v) in coeffs {
            grid::check_pair(&l, &i)?;
            if !allowed.contains(&l) {
                return Err(Error::NonCanonicalPair);
            }
            if symmetric && !symmetry::is_canonical(&l, &i) {
                return Err(Error::NonCanonicalPair);
            }
            entries.insert((l, i), v);
        }
        let mut table = Self {
            spec,
            symmetric,
            entries,
            eval_index: Vec::new(),
        };
        table.rebuild_eval_index();
        Ok(table)
    }

    fn rebuild_eval_index(&mut self) {
        let mut levels: BTreeMap<LevelIndex, BTreeMap<Vec<u32>, f64>> = BTreeMap::new();
        for ((l, i), &v) in &self.entries {
            if self.symmetric {
                let stab = symmetry::stabilizer_size(l, i) as f64;
                for (ml, mi) in symmetry::orbit_members(l, i) {
                    levels
                        .entry(ml)
                        .or_default()
                        .insert(mi.indices().to_vec(), v * stab);
                }
            } else {
                levels
                    .entry(l.clone())
                    .or_default()
                    .insert(i.indices().to_vec(), v);
            }
        }
        self.eval_index = levels.into_iter().collect();
    }

    /// Value of the expansion at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut grad = vec![0.0; self.dim()];
        self.value_and_gradient_into(x, &mut grad, false)
    }

    /// Value and exact piecewise gradient.
    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.dim()];
        let v = self.value_and_gradient_into(x, &mut grad, true);
        (v, grad)
    }

    fn value_and_gradient_into(&self, x: &[f64], grad: &mut [f64], want_grad: bool) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let d = self.dim();
        let mut value = 0.0;
        let mut key = vec![0u32; d];
        let mut vals = vec![0.0; d];
        let mut slopes = vec![0.0; d];
        for (l, coeffs) in &self.eval_index {
            // The single index per level whose support contains x.
            for j in 0..d {
                let lv = l.levels()[j];
                let u = x[j] * 2f64.powi(lv as i32);
                let c = u.floor() as i64;
                let mut ix = if c % 2 == 1 { c } else { c + 1 };
                let max = (1i64 << lv) - 1;
                ix = ix.clamp(1, max);
                key[j] = ix as u32;
            }
            let Some(&v) = coeffs.get(key.as_slice()) else {
                continue;
            };
            let mut prod = 1.0;
            for j in 0..d {
                let (hv, hs) = grid::hat1(l.levels()[j], key[j], x[j]);
                vals[j] = hv;
                slopes[j] = hs;
                prod *= hv;
            }
            value += v * prod;
            if want_grad {
                for m in 0..d {
                    let mut g = slopes[m];
                    for j in 0..d {
                        if j != m {
                            g *= vals[j];
                        }
                    }
                    grad[m] += v * g;
                }
            }
        }
        value
    }

    /// The expansion as a sum of tensor products of hats (symmetric
    /// tables are orbit-expanded, which is the same function).
    pub fn to_factored(&self) -> FactoredSum {
        let d = self.dim();
        let mut sum = FactoredSum::new(d);
        for (l, coeffs) in &self.eval_index {
            for (indices, &v) in coeffs {
                let factors = (0..d)
                    .map(|j| {
                        sum.intern(Func1::Hat {
                            level: l.levels()[j],
                            index: indices[j],
                        })
                    })
                    .collect();
                sum.push_term(v, factors);
            }
        }
        sum
    }

    /// Symmetrized basis value and gradient `ψ_{l,i}` under the same
    /// convention as symmetric evaluation (all `d!` permutations, i.e.
    /// `|Stab| ×` the distinct orbit members).
    pub fn psi_value_and_gradient(l: &LevelIndex, i: &OddIndex, x: &[f64]) -> (f64, Vec<f64>) {
        let stab = symmetry::stabilizer_size(l, i) as f64;
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (ml, mi) in symmetry::orbit_members(l, i) {
            let (v, g) = grid::hat_eval(&ml, &mi, x).expect("orbit members are valid pairs");
            value += v;
            for (gm, gv) in grad.iter_mut().zip(g) {
                *gm += gv;
            }
        }
        for gm in grad.iter_mut() {
            *gm *= stab;
        }
        (value * stab, grad)
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<(Vec<u8>, Vec<u32>, f64)> = self
            .entries
            .iter()
            .map(|((l, i), &v)| (l.levels().to_vec(), i.indices().to_vec(), v))
            .collect();
        let doc = TableJson {
            schema: TABLE_SCHEMA.to_string(),
            spec: self.spec,
            symmetric: self.symmetric,
            entries,
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TableJson = serde_json::from_str(text)?;
        if doc.schema != TABLE_SCHEMA {
            return Err(Error::SchemaMismatch {
                got: doc.schema,
                expected: TABLE_SCHEMA,
            });
        }
        let coeffs = doc
            .entries
            .into_iter()
            .map(|(l, i, v)| Ok((LevelIndex::new(l)?, OddIndex::new(i)?, v)))
            .collect::<Result<Vec<_>>>()?;
        Self::with_coefficients(doc.spec, doc.symmetric, coeffs)
    }
}

const TABLE_SCHEMA: &str = "symgrid.surplus-table.v1";

#[derive(Serialize, Deserialize)]
struct TableJson {
    schema: String,
    spec: IndexSetSpec,
    symmetric: bool,
    entries: Vec<(Vec<u8>, Vec<u32>, f64)>,
}

/// Hierarchizes `f` over the requested index set.
///
/// Symmetric construction keeps one coefficient per canonical orbit with
/// `v̄ = v / |Stab|`; the target is spot-checked for permutation
/// invariance first and rejected if it fails.
pub fn build_interpolant(
    f: &TargetFunction,
    spec: &IndexSetSpec,
    symmetric: bool,
) -> Result<SurplusTable> {
    if f.d != spec.d {
        return Err(Error::DimensionMismatch {
            left: f.d,
            right: spec.d,
        });
    }
    let mut entries = BTreeMap::new();
    if symmetric {
        f.check_symmetric(1e-10)?;
        for orbit in symmetry::canonical_orbits(spec) {
            let v = surplus_stencil(f, &orbit.canonical_level, &orbit.canonical_index)?;
            entries.insert(
                (orbit.canonical_level, orbit.canonical_index),
                v / orbit.stabilizer_size as f64,
            );
        }
    } else {
        for l in grid::index_set(spec) {
            for i in grid::odd_index_set(&l) {
                let v = surplus_stencil(f, &l, &i)?;
                entries.insert((l.clone(), i), v);
            }
        }
    }
    let mut table = SurplusTable {
        spec: *spec,
        symmetric,
        entries,
        eval_index: Vec::new(),
    };
    table.rebuild_eval_index();
    Ok(table)
}

/// Convenience: the spec pair `(f_n^(1), f_n^(2))` uses the total-degree
/// set for the first and the energy-based set for the second.
pub fn spec_for(kind: IndexSetKind, n: u8, d: usize) -> Result<IndexSetSpec> {
    IndexSetSpec::new(kind, n, d)
}
