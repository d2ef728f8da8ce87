//! Permutation orbits of level/index pairs, stabilizers, and exact integer
//! partition counting.
//!
//! The symmetric expansion keeps one representative per equivalence class
//! of pairs `(l, i)` under simultaneous coordinate permutation. A class is
//! canonically represented by sorting the per-axis pairs `(l_j, i_j)`
//! lexicographically, which makes the level vector non-decreasing and the
//! indices sorted inside each block of equal levels.

use crate::grid::{IndexSetSpec, LevelIndex, OddIndex};
use crate::{grid, Error, Result};

/// A canonical orbit of level/index pairs under simultaneous permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymOrbit {
    pub canonical_level: LevelIndex,
    pub canonical_index: OddIndex,
    /// Number of distinct pairs `(τ(l), τ(i))` over `τ ∈ S_d`.
    pub orbit_size: u64,
    /// Number of permutations fixing the pair; `orbit × stabilizer = d!`.
    pub stabilizer_size: u64,
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Sorts the per-axis pairs, returning the canonical representative.
pub fn canonicalize(l: &LevelIndex, i: &OddIndex) -> Result<(LevelIndex, OddIndex)> {
    grid::check_pair(l, i)?;
    let mut pairs: Vec<(u8, u32)> = l
        .levels()
        .iter()
        .copied()
        .zip(i.indices().iter().copied())
        .collect();
    pairs.sort_unstable();
    let levels = pairs.iter().map(|&(lv, _)| lv).collect();
    let indices = pairs.iter().map(|&(_, ix)| ix).collect();
    Ok((LevelIndex::new(levels)?, OddIndex::new(indices)?))
}

/// True when `(l, i)` already is its own canonical representative.
pub fn is_canonical(l: &LevelIndex, i: &OddIndex) -> bool {
    l.levels()
        .iter()
        .zip(i.indices())
        .zip(l.levels().iter().zip(i.indices()).skip(1))
        .all(|((l0, i0), (l1, i1))| (l0, i0) <= (l1, i1))
}

/// `|Stab(l, i)| = Π m_p!` over the multiplicities of distinct pairs.
pub fn stabilizer_size(l: &LevelIndex, i: &OddIndex) -> u64 {
    let mut pairs: Vec<(u8, u32)> = l
        .levels()
        .iter()
        .copied()
        .zip(i.indices().iter().copied())
        .collect();
    pairs.sort_unstable();
    let mut size = 1u64;
    let mut run = 1usize;
    for w in pairs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            size *= factorial(run);
            run = 1;
        }
    }
    size * factorial(run)
}

/// The distinct members of the orbit of a canonical pair, as pair vectors.
/// The canonical member comes first.
pub fn orbit_members(l: &LevelIndex, i: &OddIndex) -> Vec<(LevelIndex, OddIndex)> {
    let pairs: Vec<(u8, u32)> = l
        .levels()
        .iter()
        .copied()
        .zip(i.indices().iter().copied())
        .collect();
    let mut members = Vec::new();
    distinct_permutations(&pairs, &mut members);
    members
        .into_iter()
        .map(|p| {
            let levels = p.iter().map(|&(lv, _)| lv).collect();
            let indices = p.iter().map(|&(_, ix)| ix).collect();
            (
                LevelIndex::new(levels).expect("valid orbit member"),
                OddIndex::new(indices).expect("valid orbit member"),
            )
        })
        .collect()
}

/// Lexicographic multiset-permutation enumeration (sorted input first).
fn distinct_permutations(pairs: &[(u8, u32)], out: &mut Vec<Vec<(u8, u32)>>) {
    let mut cur = pairs.to_vec();
    cur.sort_unstable();
    loop {
        out.push(cur.clone());
        // Next lexicographic permutation; stop after the last one.
        let Some(k) = (0..cur.len() - 1).rev().find(|&k| cur[k] < cur[k + 1]) else {
            return;
        };
        let j = (k + 1..cur.len()).rev().find(|&j| cur[j] > cur[k]).unwrap();
        cur.swap(k, j);
        cur[k + 1..].reverse();
    }
}

/// Enumerates one [`SymOrbit`] per equivalence class of pairs `(l, i)` with
/// `l` in the index set. The union of the orbits reconstructs the full
/// pair set with correct multiplicities.
pub fn canonical_orbits(spec: &IndexSetSpec) -> Vec<SymOrbit> {
    let d = spec.d;
    let dfact = factorial(d);
    let mut out = Vec::new();
    for l in grid::index_set(spec) {
        if !l.is_ordered() {
            continue;
        }
        // Enumerate index vectors that are non-decreasing inside each block
        // of equal levels; those are exactly the canonical ones.
        let blocks = level_blocks(l.levels());
        let mut block_choices: Vec<Vec<Vec<u32>>> = Vec::with_capacity(blocks.len());
        for &(level, len) in &blocks {
            block_choices.push(nondecreasing_odd_tuples(level, len));
        }
        let mut cursor = vec![0usize; blocks.len()];
        'outer: loop {
            let mut indices = Vec::with_capacity(d);
            for (b, choice) in cursor.iter().enumerate() {
                indices.extend_from_slice(&block_choices[b][*choice]);
            }
            let i = OddIndex::new(indices).expect("odd by construction");
            let stab = stabilizer_size(&l, &i);
            out.push(SymOrbit {
                canonical_level: l.clone(),
                canonical_index: i,
                orbit_size: dfact / stab,
                stabilizer_size: stab,
            });
            let mut b = blocks.len();
            loop {
                if b == 0 {
                    break 'outer;
                }
                b -= 1;
                cursor[b] += 1;
                if cursor[b] < block_choices[b].len() {
                    break;
                }
                cursor[b] = 0;
            }
        }
    }
    out
}

/// Counts canonical orbits without materializing them: per block of `m`
/// equal levels `v` there are `C(2^(v-1) + m - 1, m)` non-decreasing odd
/// index tuples.
pub fn canonical_orbit_count(spec: &IndexSetSpec) -> u128 {
    let mut total = 0u128;
    for l in grid::index_set(spec) {
        if !l.is_ordered() {
            continue;
        }
        let mut count = 1u128;
        for (level, len) in level_blocks(l.levels()) {
            let values = 1u128 << (level - 1);
            count *= multiset_choose(values, len as u128);
        }
        total += count;
    }
    total
}

fn multiset_choose(values: u128, slots: u128) -> u128 {
    // C(values + slots - 1, slots)
    let mut num = 1u128;
    for k in 0..slots {
        num = num * (values + k) / (k + 1);
    }
    num
}

fn level_blocks(levels: &[u8]) -> Vec<(u8, usize)> {
    let mut blocks = Vec::new();
    for &l in levels {
        match blocks.last_mut() {
            Some((v, n)) if *v == l => *n += 1,
            _ => blocks.push((l, 1)),
        }
    }
    blocks
}

fn nondecreasing_odd_tuples(level: u8, len: usize) -> Vec<Vec<u32>> {
    let max = 1u32 << level;
    let mut out = Vec::new();
    let mut cur = vec![1u32; len];
    'outer: loop {
        out.push(cur.clone());
        let mut pos = len;
        loop {
            if pos == 0 {
                break 'outer;
            }
            pos -= 1;
            cur[pos] += 2;
            if cur[pos] < max {
                for p in pos + 1..len {
                    cur[p] = cur[pos];
                }
                break;
            }
        }
    }
    out
}

const MAX_PARTITION_ARG: u64 = 400; // p(400) is the last value below u64::MAX

/// Number of unrestricted integer partitions `p(k)`; `p(0) = 1`.
pub fn partition_count(k: u64) -> u64 {
    assert!(k <= MAX_PARTITION_ARG, "partition argument exceeds u64 range");
    let k = k as usize;
    // Bottom-up over allowed part sizes.
    let mut table = vec![0u64; k + 1];
    table[0] = 1;
    for part in 1..=k {
        for s in part..=k {
            table[s] += table[s - part];
        }
    }
    table[k]
}

/// Partitions of `s` into exactly `parts` positive parts.
pub fn partition_count_parts(s: u64, parts: u64) -> u64 {
    assert!(s <= MAX_PARTITION_ARG, "partition argument exceeds u64 range");
    if parts > s {
        return if s == 0 && parts == 0 { 1 } else { 0 };
    }
    let (s, parts) = (s as usize, parts as usize);
    // p(s, t) = p(s-1, t-1) + p(s-t, t).
    let mut table = vec![vec![0u64; parts + 1]; s + 1];
    table[0][0] = 1;
    for sv in 1..=s {
        for t in 1..=parts.min(sv) {
            table[sv][t] = table[sv - 1][t - 1]
                + if sv >= t { table[sv - t][t] } else { 0 };
        }
    }
    table[s][parts]
}

/// Visits every permutation of `0..d` exactly once (Heap's algorithm).
pub fn for_each_permutation(d: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..d).collect();
    let mut c = vec![0usize; d];
    f(&perm);
    let mut k = 0;
    while k < d {
        if c[k] < k {
            if k % 2 == 0 {
                perm.swap(0, k);
            } else {
                perm.swap(c[k], k);
            }
            f(&perm);
            c[k] += 1;
            k = 0;
        } else {
            c[k] = 0;
            k += 1;
        }
    }
}

/// Literal symmetrization `ψ_{l,i}(x) = Σ_{τ ∈ S_d} φ_{l,i}(τ(x))`,
/// summing over all `d!` permutations. Test oracle; the production paths
/// use orbit sums instead.
pub fn sym_basis_oracle(l: &LevelIndex, i: &OddIndex, x: &[f64]) -> Result<f64> {
    grid::check_pair(l, i)?;
    if x.len() != l.dim() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: l.dim(),
        });
    }
    let d = l.dim();
    let mut total = 0.0;
    for_each_permutation(d, |perm| {
        let mut v = 1.0;
        for j in 0..d {
            let (h, _) = grid::hat1(l.levels()[j], i.indices()[j], x[perm[j]]);
            v *= h;
            if v == 0.0 {
                break;
            }
        }
        total += v;
    });
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::IndexSetSpec;

    fn lv(levels: &[u8]) -> LevelIndex {
        LevelIndex::new(levels.to_vec()).unwrap()
    }

    fn ixn(indices: &[u32]) -> OddIndex {
        OddIndex::new(indices.to_vec()).unwrap()
    }

    #[test]
    fn orbit_sizes_for_small_pairs() {
        assert_eq!(stabilizer_size(&lv(&[1, 1]), &ixn(&[1, 1])), 2);
        assert_eq!(stabilizer_size(&lv(&[1, 2]), &ixn(&[1, 1])), 1);
        assert_eq!(stabilizer_size(&lv(&[2, 2]), &ixn(&[1, 3])), 1);
        assert_eq!(stabilizer_size(&lv(&[2, 2, 2]), &ixn(&[1, 1, 3])), 2);
    }

    #[test]
    fn orbits_reconstruct_full_grid() {
        for (d, n) in [(2usize, 4u8), (3, 3), (4, 3)] {
            let spec = IndexSetSpec::energy_based(n, d).unwrap();
            let orbits = canonical_orbits(&spec);
            let total: u128 = orbits.iter().map(|o| o.orbit_size as u128).sum();
            assert_eq!(total, grid::count_grid_points(&spec, false), "d={d} n={n}");
            for o in &orbits {
                assert_eq!(o.orbit_size * o.stabilizer_size, factorial(d));
                assert!(is_canonical(&o.canonical_level, &o.canonical_index));
                let members = orbit_members(&o.canonical_level, &o.canonical_index);
                assert_eq!(members.len() as u64, o.orbit_size);
            }
            assert_eq!(orbits.len() as u128, canonical_orbit_count(&spec));
        }
    }

    #[test]
    fn canonicalize_sorts_pairs() {
        let (cl, ci) = canonicalize(&lv(&[2, 1]), &ixn(&[3, 1])).unwrap();
        assert_eq!(cl, lv(&[1, 2]));
        assert_eq!(ci, ixn(&[1, 3]));
        // Equal levels: indices sort inside the block.
        let (cl, ci) = canonicalize(&lv(&[2, 2]), &ixn(&[3, 1])).unwrap();
        assert_eq!(cl, lv(&[2, 2]));
        assert_eq!(ci, ixn(&[1, 3]));
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition_count(4), 5);
        assert_eq!(partition_count_parts(5, 2), 2);
        assert_eq!(partition_count(0), 1);
        assert_eq!(partition_count_parts(0, 0), 1);
        assert_eq!(partition_count_parts(3, 0), 0);
        // p(k, t) <= p(k) for all k <= 60.
        for k in 0..=60u64 {
            let pk = partition_count(k);
            for t in 0..=k {
                assert!(partition_count_parts(k, t) <= pk);
            }
            // And p(k) = sum over exact part counts.
            let total: u64 = (0..=k).map(|t| partition_count_parts(k, t)).sum();
            assert_eq!(total, pk);
        }
    }

    #[test]
    fn partition_count_against_brute_force() {
        // Direct enumeration of non-increasing sequences for small k.
        fn brute(k: u64, max: u64) -> u64 {
            if k == 0 {
                return 1;
            }
            (1..=k.min(max)).map(|first| brute(k - first, first)).sum()
        }
        for k in 0..=20u64 {
            assert_eq!(partition_count(k), brute(k, k), "k={k}");
        }
    }

    #[test]
    fn sym_oracle_small_cases() {
        // d=1 reduces to the hat itself.
        let v = sym_basis_oracle(&lv(&[2]), &ixn(&[3]), &[0.7]).unwrap();
        let (h, _) = grid::hat1(2, 3, 0.7);
        assert_eq!(v, h);
        // Both permutations contribute 1 at the center.
        let v = sym_basis_oracle(&lv(&[1, 1]), &ixn(&[1, 1]), &[0.5, 0.5]).unwrap();
        assert_eq!(v, 2.0);
        // A point outside every permuted support.
        let v = sym_basis_oracle(&lv(&[2, 2]), &ixn(&[1, 1]), &[0.9, 0.9]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn symmetric_orbit_count_growth() {
        // ~2x per unit n, mirroring the 2^n scaling of the symmetric grid.
        for d in 1..=5usize {
            for n in 4..=7u8 {
                let a = canonical_orbit_count(&IndexSetSpec::energy_based(n, d).unwrap()) as f64;
                let b =
                    canonical_orbit_count(&IndexSetSpec::energy_based(n + 1, d).unwrap()) as f64;
                let ratio = b / a;
                assert!((1.8..=2.2).contains(&ratio), "d={d} n={n} ratio={ratio}");
            }
        }
    }
}
