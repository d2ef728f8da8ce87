//! Exact symmetrization coefficients from a generalized Vandermonde
//! system.
//!
//! For univariate factors `φ_1, ..., φ_d` and
//! `G_ξ(x) = Π_s ( Σ_j ξ^(2^(j-1)) φ_j(x_s) )`, there are rationals
//! `a_1, ..., a_D` with `Σ_ξ a_ξ G_ξ = Σ_{τ ∈ S_d} Π_ν φ_ν(x_{τ(ν)})`.
//! Expanding `G_ξ` groups terms by `Λ(j) = Σ_q 2^(j_q - 1)`; the exponent
//! `K = 2^d - 1` is hit exactly by the tuples that use every factor once,
//! so solving `Σ_ξ a_ξ ξ^(λ_m) = [λ_m = K]` over the distinct values
//! `λ_1 < ... < λ_D` of `Λ` extracts the symmetrization. The matrix is a
//! generalized Vandermonde with nodes `ξ = 1..D`, hence nonsingular, and
//! the solve is carried out exactly over the integers.
//!
//! Two exact solvers are provided. Fraction-free (Bareiss) elimination is
//! used for small systems and doubles as an independent oracle. For the
//! larger systems (`d >= 5`; `D` reaches 187 at `d = 6` with entries near
//! `10^436`) fraction-free elimination is far too slow, so the solve runs
//! modulo many 31-bit primes with CRT reconstruction of the cofactors and
//! determinant, followed by an exact BigInt residual verification. The
//! verification makes the result unconditional.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest dimension accepted by [`coefficients`]. Exactness is preserved
/// at any accepted `d`; runtime grows steeply past `d = 6`.
pub const MAX_VANDERMONDE_DIM: usize = 8;

/// Exact symmetrization coefficients for dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VandermondeCoefficients {
    pub d: usize,
    /// Sorted distinct values of `Λ(j) = Σ_q 2^(j_q - 1)` over `{1..d}^d`.
    pub lambdas: Vec<u32>,
    /// Target exponent `K = 2^d - 1`.
    pub k_exponent: u32,
    /// Exact solution of `a · V_D = e_K`.
    pub a: Vec<BigRational>,
}

impl VandermondeCoefficients {
    pub fn degree(&self) -> usize {
        self.lambdas.len()
    }

    /// Coefficients rounded to `f64` (within ~1 ulp of nearest).
    pub fn a_f64(&self) -> Vec<f64> {
        self.a.iter().map(ratio_to_f64).collect()
    }

    /// `Σ_ξ â_ξ ξ^λ` for arbitrary `λ`, evaluated exactly for the exact
    /// coefficients. Equals 1 at `λ = K` and 0 at every other enumerated
    /// `λ`; off-lattice exponents measure channel leakage of rounded
    /// coefficient vectors.
    pub fn channel_weight(a: &[BigRational], lambda: u32) -> BigRational {
        let mut acc = BigRational::zero();
        for (xi, coeff) in a.iter().enumerate() {
            let base = BigInt::from(xi + 1).pow(lambda);
            acc += coeff * BigRational::from_integer(base);
        }
        acc
    }

    pub fn to_json(&self) -> String {
        let a: Vec<RationalJson> = self
            .a
            .iter()
            .map(|r| RationalJson {
                num: r.numer().to_string(),
                den: r.denom().to_string(),
            })
            .collect();
        let doc = CoefficientsJson {
            schema: SCHEMA.to_string(),
            d: self.d,
            k_exponent: self.k_exponent,
            lambdas: self.lambdas.clone(),
            a,
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CoefficientsJson = serde_json::from_str(text)?;
        if doc.schema != SCHEMA {
            return Err(Error::SchemaMismatch {
                got: doc.schema,
                expected: SCHEMA,
            });
        }
        let parse = |s: &str| -> Result<BigInt> {
            s.parse::<BigInt>()
                .map_err(|e| Error::Serde(format!("bad integer `{s}`: {e}")))
        };
        let mut a = Vec::with_capacity(doc.a.len());
        for r in &doc.a {
            a.push(BigRational::new(parse(&r.num)?, parse(&r.den)?));
        }
        Ok(Self {
            d: doc.d,
            lambdas: doc.lambdas,
            k_exponent: doc.k_exponent,
            a,
        })
    }
}

const SCHEMA: &str = "symgrid.vandermonde-coefficients.v1";

#[derive(Serialize, Deserialize)]
struct RationalJson {
    num: String,
    den: String,
}

#[derive(Serialize, Deserialize)]
struct CoefficientsJson {
    schema: String,
    d: usize,
    k_exponent: u32,
    lambdas: Vec<u32>,
    a: Vec<RationalJson>,
}

/// Distinct values of `Λ` over `{1..d}^d`, sorted ascending.
pub fn lambda_values(d: usize) -> Vec<u32> {
    let singles: Vec<u32> = (0..d).map(|j| 1u32 << j).collect();
    let max = d as u32 * (1u32 << (d - 1));
    let mut reachable = vec![false; max as usize + 1];
    reachable[0] = true;
    for _ in 0..d {
        let mut next = vec![false; max as usize + 1];
        for (s, &ok) in reachable.iter().enumerate() {
            if !ok {
                continue;
            }
            for &v in &singles {
                let t = s + v as usize;
                if t <= max as usize {
                    next[t] = true;
                }
            }
        }
        reachable = next;
    }
    (0..=max).filter(|&v| reachable[v as usize]).collect()
}

/// Computes the exact coefficient vector for dimension `d`.
pub fn coefficients(d: usize) -> Result<VandermondeCoefficients> {
    if d == 0 || d > MAX_VANDERMONDE_DIM {
        return Err(Error::DimensionOutOfRange {
            got: d,
            max: MAX_VANDERMONDE_DIM,
        });
    }
    let lambdas = lambda_values(d);
    let k_exponent = (1u32 << d) - 1;
    let k_pos = lambdas
        .binary_search(&k_exponent)
        .expect("K is always attained (all factors once)");
    let dim = lambdas.len();
    debug_assert!(dim <= d * (1 << (d - 1)) - d + 1);

    let a = if dim <= 32 {
        solve_bareiss(&lambdas, k_pos)
    } else {
        solve_modular(&lambdas, k_pos)
    };

    Ok(VandermondeCoefficients {
        d,
        lambdas,
        k_exponent,
        a,
    })
}

fn matrix_entry(xi: usize, lambda: u32) -> BigInt {
    BigInt::from(xi).pow(lambda)
}

/// Fraction-free Gaussian elimination (Bareiss) on the augmented system
/// `M a = e`, `M[m][ξ] = ξ^(λ_m)`. Exact division keeps entries integral.
fn solve_bareiss(lambdas: &[u32], k_pos: usize) -> Vec<BigRational> {
    let n = lambdas.len();
    // Augmented matrix: columns 0..n = M, column n = rhs.
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|row| {
            let mut r: Vec<BigInt> = (1..=n).map(|xi| matrix_entry(xi, lambdas[row])).collect();
            r.push(if row == k_pos {
                BigInt::one()
            } else {
                BigInt::zero()
            });
            r
        })
        .collect();

    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let swap = (k + 1..n)
                .find(|&r| !m[r][k].is_zero())
                .expect("generalized Vandermonde is nonsingular");
            m.swap(k, swap);
            // A row swap flips the determinant sign; the final back
            // substitution only uses ratios, so no bookkeeping is needed.
        }
        for i in k + 1..n {
            for j in k + 1..=n {
                let num = &m[k][k] * &m[i][j] - &m[i][k] * &m[k][j];
                m[i][j] = num / &prev; // exact by Sylvester's identity
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }

    // Back substitution over rationals.
    let mut a = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = BigRational::from_integer(m[i][n].clone());
        for j in i + 1..n {
            acc -= BigRational::from_integer(m[i][j].clone()) * &a[j];
        }
        a[i] = acc / BigRational::from_integer(m[i][i].clone());
    }
    a
}

/// Deterministic Miller-Rabin for `u32` (bases 2, 7, 61).
fn is_prime_u32(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u32, 3, 5, 7, 11, 13] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 7, 61] {
        let mut x = 1u64;
        let mut base = a % n as u64;
        let mut e = d;
        while e > 0 {
            if e & 1 == 1 {
                x = x * base % n as u64;
            }
            base = base * base % n as u64;
            e >>= 1;
        }
        if x == 1 || x == n as u64 - 1 {
            continue;
        }
        for _ in 1..s {
            x = x * x % n as u64;
            if x == n as u64 - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pow_mod(mut base: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

/// Gaussian elimination mod `p`. Returns `(det, cofactors)` with
/// `cofactors[ξ] = a_ξ · det mod p`, or `None` when `p` divides the
/// determinant.
fn solve_mod_p(lambdas: &[u32], k_pos: usize, p: u64) -> Option<(u64, Vec<u64>)> {
    let n = lambdas.len();
    let mut m: Vec<Vec<u64>> = (0..n)
        .map(|row| {
            let mut r: Vec<u64> = (1..=n)
                .map(|xi| pow_mod(xi as u64, lambdas[row] as u64, p))
                .collect();
            r.push(if row == k_pos { 1 } else { 0 });
            r
        })
        .collect();

    let mut det = 1u64;
    for k in 0..n {
        let pivot_row = (k..n).find(|&r| m[r][k] != 0)?;
        if pivot_row != k {
            m.swap(k, pivot_row);
            det = p - det;
            if det == p {
                det = 0;
            }
        }
        let pivot = m[k][k];
        det = det * pivot % p;
        let inv = pow_mod(pivot, p - 2, p);
        for j in k..=n {
            m[k][j] = m[k][j] * inv % p;
        }
        for i in 0..n {
            if i == k || m[i][k] == 0 {
                continue;
            }
            let factor = m[i][k];
            for j in k..=n {
                let sub = factor * m[k][j] % p;
                m[i][j] = (m[i][j] + p - sub) % p;
            }
        }
    }
    let cof: Vec<u64> = (0..n).map(|i| m[i][n] * det % p).collect();
    Some((det, cof))
}

/// CRT state for one signed integer unknown.
struct CrtValue {
    residue: BigUint,
}

impl CrtValue {
    fn signed(&self, modulus: &BigUint) -> BigInt {
        let half = modulus >> 1;
        if self.residue > half {
            BigInt::from_biguint(Sign::Minus, modulus - &self.residue)
        } else {
            BigInt::from_biguint(Sign::Plus, self.residue.clone())
        }
    }
}

fn crt_update(values: &mut [CrtValue], modulus: &BigUint, new: &[u64], p: u64) -> BigUint {
    // x_new = x + M * ((r - x) * M^-1 mod p)
    let p_big = BigUint::from(p);
    let m_mod_p = (modulus % &p_big).to_u64_digits();
    let m_mod_p = if m_mod_p.is_empty() { 0 } else { m_mod_p[0] };
    let m_inv = pow_mod(m_mod_p, p - 2, p);
    for (v, &r) in values.iter_mut().zip(new) {
        let x_mod_p = (&v.residue % &p_big).to_u64_digits();
        let x_mod_p = if x_mod_p.is_empty() { 0 } else { x_mod_p[0] };
        let t = (r + p - x_mod_p) % p * m_inv % p;
        v.residue += modulus * BigUint::from(t);
    }
    modulus * p_big
}

/// Exact solve through many 31-bit primes, with an unconditional BigInt
/// residual verification of the reconstructed cofactors.
fn solve_modular(lambdas: &[u32], k_pos: usize) -> Vec<BigRational> {
    let n = lambdas.len();
    // Hadamard bound on |det| and on the cofactors (which are minors).
    let log2_row_norm: f64 = lambdas
        .iter()
        .map(|&l| f64::from(l) * (n as f64).log2() + 0.5 * (n as f64).log2())
        .sum();
    let bound_bits = log2_row_norm + n as f64 + 16.0;

    let mut prime = 1u32 << 31;
    let mut next_prime = move || loop {
        prime -= 1;
        if is_prime_u32(prime) {
            return u64::from(prime);
        }
    };

    // Unknowns: n cofactors plus the determinant.
    let mut values: Vec<CrtValue> = (0..=n)
        .map(|_| CrtValue {
            residue: BigUint::zero(),
        })
        .collect();
    let mut modulus = BigUint::one();
    let mut used_bits = 0f64;
    let mut last_snapshot: Option<Vec<BigInt>> = None;
    let mut since_check = 0usize;

    loop {
        let p = next_prime();
        let Some((det_p, cof_p)) = solve_mod_p(lambdas, k_pos, p) else {
            continue; // p divides the determinant
        };
        let mut residues = cof_p;
        residues.push(det_p);
        modulus = crt_update(&mut values, &modulus, &residues, p);
        used_bits += (p as f64).log2();
        since_check += 1;

        let enough = used_bits > bound_bits + 1.0;
        if since_check >= 24 || enough {
            since_check = 0;
            let snapshot: Vec<BigInt> = values.iter().map(|v| v.signed(&modulus)).collect();
            let stable = last_snapshot.as_deref() == Some(&snapshot[..]);
            if enough || stable {
                let det = snapshot[n].clone();
                if !det.is_zero() && verify_cofactors(lambdas, k_pos, &snapshot[..n], &det) {
                    return snapshot[..n]
                        .iter()
                        .map(|c| BigRational::new(c.clone(), det.clone()))
                        .collect();
                }
            }
            last_snapshot = Some(snapshot);
        }
    }
}

/// Checks `Σ_ξ c_ξ ξ^(λ_m) = [m = k_pos] · det` over the integers.
fn verify_cofactors(lambdas: &[u32], k_pos: usize, cof: &[BigInt], det: &BigInt) -> bool {
    for (m, &lambda) in lambdas.iter().enumerate() {
        let mut acc = BigInt::zero();
        for (xi, c) in cof.iter().enumerate() {
            acc += c * matrix_entry(xi + 1, lambda);
        }
        let expected = if m == k_pos { det.clone() } else { BigInt::zero() };
        if acc != expected {
            return false;
        }
    }
    true
}

/// Rounds an arbitrary-size rational to `f64` (within ~1 ulp of nearest),
/// saturating to zero / infinity outside the representable range.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    let num = r.numer().abs().to_biguint().expect("abs is nonnegative");
    let den = r.denom().abs().to_biguint().expect("abs is nonnegative");
    let shift = 57i64 - (num.bits() as i64 - den.bits() as i64);
    let (num_s, den_s) = if shift >= 0 {
        (num << shift as u64, den)
    } else {
        (num, den << (-shift) as u64)
    };
    let q = (num_s / den_s).to_f64().unwrap_or(f64::INFINITY);
    let e = (-shift).clamp(-2100, 2100) as i32;
    sign * q * 2f64.powi(e)
}

/// Feature weight `ξ^(2^(j-1))` for 1-indexed factor position `j`.
pub fn feature_weight(xi: usize, j: usize) -> BigInt {
    debug_assert!(j >= 1);
    BigInt::from(xi).pow(1u32 << (j - 1))
}

/// `lhs - rhs` of the symmetrization identity for explicit rational factor
/// samples `samples[ν][s] = φ_(ν+1)(x_(s+1))`, computed entirely in
/// rational arithmetic. Zero for exact coefficients.
pub fn symmetrization_identity_gap(
    coeffs: &VandermondeCoefficients,
    samples: &[Vec<BigRational>],
) -> BigRational {
    let d = coeffs.d;
    assert_eq!(samples.len(), d);
    assert!(samples.iter().all(|row| row.len() == d));
    let dim = coeffs.degree();

    // lhs = Σ_ξ a_ξ Π_s Σ_j ξ^(2^(j-1)) φ_j(x_s)
    let mut lhs = BigRational::zero();
    for (pos, coeff) in coeffs.a.iter().enumerate() {
        let xi = pos + 1;
        let mut product = BigRational::one();
        for s in 0..d {
            let mut feature = BigRational::zero();
            for j in 0..d {
                let w = BigRational::from_integer(feature_weight(xi, j + 1));
                feature += w * &samples[j][s];
            }
            product *= feature;
        }
        lhs += coeff * product;
        let _ = dim;
    }

    // rhs = Σ_τ Π_ν φ_ν(x_τ(ν))
    let mut rhs = BigRational::zero();
    crate::symmetry::for_each_permutation(d, |perm| {
        let mut product = BigRational::one();
        for (nu, &target) in perm.iter().enumerate() {
            product *= &samples[nu][target];
        }
        rhs += product;
    });

    lhs - rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn lambda_enumeration_small_dims() {
        assert_eq!(lambda_values(1), vec![1]);
        assert_eq!(lambda_values(2), vec![2, 3, 4]);
        assert_eq!(lambda_values(3), vec![3, 4, 5, 6, 7, 8, 9, 10, 12]);
    }

    #[test]
    fn lambda_bounds_through_d8() {
        for d in 1..=8usize {
            let lambdas = lambda_values(d);
            let lo = d as u32;
            let hi = d as u32 * (1 << (d - 1));
            assert!(lambdas.iter().all(|&l| (lo..=hi).contains(&l)), "d={d}");
            assert!(lambdas.len() <= (hi - lo + 1) as usize, "d={d}");
            // K = 2^d - 1 is always attained.
            assert!(lambdas.contains(&((1u32 << d) - 1)), "d={d}");
        }
    }

    #[test]
    fn d1_is_trivial() {
        let c = coefficients(1).unwrap();
        assert_eq!(c.degree(), 1);
        assert_eq!(c.lambdas, vec![1]);
        assert_eq!(c.k_exponent, 1);
        assert_eq!(c.a, vec![ratio(1, 1)]);
    }

    #[test]
    fn d2_frozen_coefficients() {
        // Hand solve of a·V = e_K with lambdas (2,3,4), nodes 1..3:
        // a = (-5/2, 1, -1/6).
        let c = coefficients(2).unwrap();
        assert_eq!(c.degree(), 3);
        assert_eq!(c.k_exponent, 3);
        assert_eq!(c.a, vec![ratio(-5, 2), ratio(1, 1), ratio(-1, 6)]);
    }

    #[test]
    fn channel_weights_are_kronecker_delta() {
        for d in 2..=4usize {
            let c = coefficients(d).unwrap();
            for &lambda in &c.lambdas {
                let w = VandermondeCoefficients::channel_weight(&c.a, lambda);
                let expected = if lambda == c.k_exponent {
                    BigRational::one()
                } else {
                    BigRational::zero()
                };
                assert_eq!(w, expected, "d={d} lambda={lambda}");
            }
        }
    }

    #[test]
    fn modular_solver_matches_bareiss() {
        for d in 3..=4usize {
            let lambdas = lambda_values(d);
            let k_pos = lambdas
                .binary_search(&((1u32 << d) - 1))
                .unwrap();
            let exact = solve_bareiss(&lambdas, k_pos);
            let modular = solve_modular(&lambdas, k_pos);
            assert_eq!(exact, modular, "d={d}");
        }
    }

    #[test]
    fn identity_gap_is_zero_for_random_rational_samples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for d in 2..=3usize {
            let c = coefficients(d).unwrap();
            for _ in 0..5 {
                let samples: Vec<Vec<BigRational>> = (0..d)
                    .map(|_| {
                        (0..d)
                            .map(|_| ratio(rng.gen_range(-20..20), rng.gen_range(1..12)))
                            .collect()
                    })
                    .collect();
                let gap = symmetrization_identity_gap(&c, &samples);
                assert!(gap.is_zero(), "d={d}: gap={gap}");
            }
        }
    }

    #[test]
    fn ratio_to_f64_rounding() {
        assert_eq!(ratio_to_f64(&ratio(1, 2)), 0.5);
        assert_eq!(ratio_to_f64(&ratio(-5, 2)), -2.5);
        let third = ratio_to_f64(&ratio(1, 3));
        assert!((third - 1.0 / 3.0).abs() <= f64::EPSILON);
        // Saturation far outside the exponent range.
        let huge = BigRational::from_integer(BigInt::from(2).pow(5000));
        assert_eq!(ratio_to_f64(&huge), f64::INFINITY);
        assert_eq!(ratio_to_f64(&huge.recip()), 0.0);
    }

    #[test]
    fn json_round_trip_preserves_exact_values() {
        let c = coefficients(3).unwrap();
        let text = c.to_json();
        let back = VandermondeCoefficients::from_json(&text).unwrap();
        assert_eq!(c, back);
    }
}
