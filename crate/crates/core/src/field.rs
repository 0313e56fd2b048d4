//! GF(2^m) arithmetic, the affine pairwise-independent permutation family,
//! and the subgraph labeling maps.
//!
//! Field elements are bitmasks: bit `i` is the coefficient of `t^i` in the
//! polynomial basis modulo a fixed monic irreducible `f(t)`. External ids
//! are 1-based (`[1, 2^m]`); the bijection `phi` maps id `x` to field
//! element `x - 1`.

use crate::error::{Error, Result};
use crate::rng::{domain, Stream};

/// One fixed low-weight monic irreducible polynomial per degree, chosen as
/// the trinomial `t^m + t^k + 1` with smallest `k` when one exists and the
/// lexicographically smallest pentanomial otherwise. The choice is a
/// convention (any irreducible of the right degree works); a fixed table
/// gives bit-exact reproducibility. Entry `i` is the polynomial of degree
/// `i + 1`. Verified irreducible by the test suite.
const POLY_TABLE: [u64; 32] = [
    0x3,
    0x7,
    0xB,
    0x13,
    0x25,
    0x43,
    0x83,
    0x11B,
    0x203,
    0x409,
    0x805,
    0x1009,
    0x201B,
    0x4021,
    0x8003,
    0x1002B,
    0x20009,
    0x40009,
    0x80027,
    0x100009,
    0x200005,
    0x400003,
    0x800021,
    0x100001B,
    0x2000009,
    0x400001B,
    0x8000027,
    0x10000003,
    0x20000005,
    0x40000003,
    0x80000009,
    0x1_0000_008D,
];

/// A binary extension field GF(2^m), m in [1, 32].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    m: u32,
    poly: u64,
}

impl FieldSpec {
    /// Field of degree `m` over the embedded polynomial table.
    pub fn new(m: u32) -> Result<FieldSpec> {
        if !(1..=32).contains(&m) {
            return Err(Error::Parameter(format!("need m in [1, 32], got {m}")));
        }
        Ok(FieldSpec {
            m,
            poly: POLY_TABLE[(m - 1) as usize],
        })
    }

    /// Field over a caller-provided modulus; the polynomial must be monic of
    /// degree exactly `m` and irreducible (checked with Rabin's test).
    pub fn with_poly(m: u32, poly: u64) -> Result<FieldSpec> {
        if !(1..=32).contains(&m) {
            return Err(Error::Parameter(format!("need m in [1, 32], got {m}")));
        }
        if poly_degree(poly) != m as i32 {
            return Err(Error::Parameter(format!(
                "polynomial {poly:#x} does not have degree {m}"
            )));
        }
        if !is_irreducible(poly, m) {
            return Err(Error::Parameter(format!(
                "polynomial {poly:#x} is reducible over GF(2)"
            )));
        }
        Ok(FieldSpec { m, poly })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn poly(&self) -> u64 {
        self.poly
    }

    /// Field order `2^m`.
    pub fn order(&self) -> u64 {
        1u64 << self.m
    }

    /// Addition = coefficient-wise XOR.
    #[inline(always)]
    pub fn add(&self, x: u64, y: u64) -> u64 {
        x ^ y
    }

    /// Carry-less product reduced modulo the field polynomial.
    #[inline]
    pub fn mul(&self, x: u64, y: u64) -> u64 {
        debug_assert!(x < self.order() && y < self.order());
        reduce(clmul(x, y), self.poly, self.m)
    }

    /// `x^e` by square-and-multiply.
    pub fn pow(&self, mut x: u64, mut e: u64) -> u64 {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, x);
            }
            x = self.mul(x, x);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by exponentiation to `2^m - 2`.
    pub fn inv(&self, x: u64) -> Result<u64> {
        if x == 0 {
            return Err(Error::Domain("inverse of 0 is undefined".into()));
        }
        debug_assert!(x < self.order());
        Ok(self.pow(x, self.order() - 2))
    }

    /// Multiplicative inverse via the extended binary-polynomial Euclid.
    /// Kept as an independent route; disagreement with [`Self::inv`] signals
    /// a reduction bug.
    pub fn inv_euclid(&self, x: u64) -> Result<u64> {
        if x == 0 {
            return Err(Error::Domain("inverse of 0 is undefined".into()));
        }
        // Invariants: a = f*_ + u*x, b = f*_ + v*x (mod f).
        let mut a = self.poly as u128;
        let mut b = x as u128;
        let mut u = 0u128; // coefficient of x for a
        let mut v = 1u128; // coefficient of x for b
        while b != 1 {
            let shift = poly_degree128(a) - poly_degree128(b);
            if shift < 0 {
                std::mem::swap(&mut a, &mut b);
                std::mem::swap(&mut u, &mut v);
                continue;
            }
            a ^= b << shift;
            u ^= v << shift;
            if a == 0 {
                // gcd(x, f) != 1 cannot happen for irreducible f and x != 0
                return Err(Error::Domain("element not invertible".into()));
            }
            if poly_degree128(a) < poly_degree128(b) {
                std::mem::swap(&mut a, &mut b);
                std::mem::swap(&mut u, &mut v);
            }
        }
        Ok(reduce(v as u64, self.poly, self.m))
    }
}

fn poly_degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn poly_degree128(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

/// Carry-less (XOR) product of two polynomials over GF(2). Inputs are below
/// 2^32 so the product fits in a u64.
#[inline]
fn clmul(x: u64, y: u64) -> u64 {
    let mut acc = 0u64;
    let mut y = y;
    let mut xs = x;
    while y != 0 {
        if y & 1 == 1 {
            acc ^= xs;
        }
        xs <<= 1;
        y >>= 1;
    }
    acc
}

/// Reduces a polynomial of degree < 2m modulo `poly` (degree m).
#[inline]
fn reduce(mut acc: u64, poly: u64, m: u32) -> u64 {
    let mut bit = 63 - acc.leading_zeros().min(63) as i32;
    while acc != 0 && bit >= m as i32 {
        if (acc >> bit) & 1 == 1 {
            acc ^= poly << (bit - m as i32);
        }
        bit -= 1;
    }
    acc
}

fn poly_mod(mut a: u128, f: u128) -> u128 {
    let df = poly_degree128(f);
    while a != 0 && poly_degree128(a) >= df {
        a ^= f << (poly_degree128(a) - df);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Rabin's irreducibility test: `f` of degree `m` is irreducible over GF(2)
/// iff `x^(2^m) = x (mod f)` and `gcd(x^(2^(m/p)) - x, f) = 1` for every
/// prime `p` dividing `m`.
fn is_irreducible(f: u64, m: u32) -> bool {
    let spec = FieldSpec { m, poly: f }; // mul/reduce work for any modulus
    let x_mod_f = reduce(2, f, m); // differs from "t" only when m = 1
    let frob = |e: u32| -> u64 {
        let mut t = x_mod_f;
        for _ in 0..e {
            t = spec.mul(t, t);
        }
        t
    };
    if frob(m) != x_mod_f {
        return false;
    }
    let mut mm = m;
    let mut p = 2u32;
    let mut primes = Vec::new();
    while p * p <= mm {
        if mm % p == 0 {
            primes.push(p);
            while mm % p == 0 {
                mm /= p;
            }
        }
        p += 1;
    }
    if mm > 1 {
        primes.push(mm);
    }
    for p in primes {
        let t = frob(m / p);
        if poly_gcd(f as u128, (t ^ x_mod_f) as u128) != 1 {
            return false;
        }
    }
    true
}

/// An affine permutation `x -> a * x + b` over GF(2^m), transported to the
/// id space `[1, 2^m]` by `phi(x) = x - 1`. O(1) forward and inverse
/// evaluation; described completely by `(m, a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AffinePermutation {
    spec: FieldSpec,
    a: u64,
    b: u64,
    a_inv: u64,
}

impl AffinePermutation {
    pub fn new(spec: FieldSpec, a: u64, b: u64) -> Result<AffinePermutation> {
        if a == 0 || a >= spec.order() {
            return Err(Error::Parameter(format!(
                "need a in [1, 2^m - 1], got {a}"
            )));
        }
        if b >= spec.order() {
            return Err(Error::Parameter(format!("need b < 2^m, got {b}")));
        }
        let a_inv = spec.inv(a)?;
        Ok(AffinePermutation { spec, a, b, a_inv })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn a_inv(&self) -> u64 {
        self.a_inv
    }

    /// Domain size `N = 2^m`.
    pub fn n(&self) -> u64 {
        self.spec.order()
    }

    /// Forward evaluation on ids: `phi^-1(a * phi(x) + b)`.
    #[inline]
    pub fn eval(&self, x: u64) -> Result<u64> {
        if x < 1 || x > self.n() {
            return Err(Error::Range(format!("id {x} outside [1, {}]", self.n())));
        }
        Ok(self.eval_unchecked(x))
    }

    #[inline(always)]
    pub(crate) fn eval_unchecked(&self, x: u64) -> u64 {
        (self.spec.mul(self.a, x - 1) ^ self.b) + 1
    }

    /// Inverse evaluation on ids: `phi^-1(a^-1 * (phi(y) - b))`.
    #[inline]
    pub fn eval_inverse(&self, y: u64) -> Result<u64> {
        if y < 1 || y > self.n() {
            return Err(Error::Range(format!("id {y} outside [1, {}]", self.n())));
        }
        Ok(self.eval_inverse_unchecked(y))
    }

    #[inline(always)]
    pub(crate) fn eval_inverse_unchecked(&self, y: u64) -> u64 {
        self.spec.mul(self.a_inv, (y - 1) ^ self.b) + 1
    }
}

/// Samples a family member uniformly: `a` uniform over the 2^m - 1 nonzero
/// elements and `b` uniform over all 2^m elements, from the seeded stream.
pub fn sample_perm(spec: FieldSpec, seed: u64) -> AffinePermutation {
    let stream = Stream::new(seed, domain::PERMUTATION);
    sample_perm_from(spec, &stream)
}

/// Samples from an already-derived stream (used to draw the shared tuple of
/// permutations in the partitioned design).
pub(crate) fn sample_perm_from(spec: FieldSpec, stream: &Stream) -> AffinePermutation {
    let nm1 = (spec.order() - 1) as u32; // order() <= 2^32; a-range fits u32
    let a = 1 + stream.uniform(0, nm1) as u64;
    let b = if spec.m == 32 {
        stream.value(1) & (spec.order() - 1)
    } else {
        stream.uniform(1, spec.order() as u32) as u64
    };
    AffinePermutation::new(spec, a, b).expect("sampled parameters are always in range")
}

/// Exhaustive pairwise-independence census for small fields.
///
/// For every ordered pair of distinct inputs `(x1, x2)` and every ordered
/// pair of distinct outputs `(y1, y2)`, counts the family members with
/// `pi(x1) = y1` and `pi(x2) = y2`. Pairwise independence is exact: every
/// cell equals 1.
#[derive(Clone, Debug)]
pub struct CensusTable {
    pub m: u32,
    /// Number of ordered distinct pairs, `N (N - 1)`.
    pub pairs: usize,
    /// Row-major counts: `counts[input_pair * pairs + output_pair]`.
    pub counts: Vec<u32>,
}

impl CensusTable {
    pub fn all_ones(&self) -> bool {
        self.counts.iter().all(|&c| c == 1)
    }

    pub fn min(&self) -> u32 {
        self.counts.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

/// Index of the ordered distinct pair `(x, y)`, both in `[1, n]`, in the
/// lexicographic enumeration skipping the diagonal.
fn ordered_pair_index(x: u64, y: u64, n: u64) -> usize {
    debug_assert!(x != y);
    let row = (x - 1) * (n - 1);
    let col = if y < x { y - 1 } else { y - 2 };
    (row + col) as usize
}

/// Enumerates the whole family over GF(2^m) and tallies two-point hits.
/// Refuses `m > 5` (the table has `(N(N-1))^2` cells).
pub fn independence_census(m: u32) -> Result<CensusTable> {
    if m > 5 {
        return Err(Error::Refusal(format!(
            "census is exhaustive over (N(N-1))^2 cells; m = {m} > 5 is too large"
        )));
    }
    let spec = FieldSpec::new(m)?;
    let n = spec.order();
    let pairs = (n * (n - 1)) as usize;
    let mut counts = vec![0u32; pairs * pairs];
    for a in 1..n {
        for b in 0..n {
            let perm = AffinePermutation::new(spec, a, b)?;
            for x1 in 1..=n {
                let y1 = perm.eval_unchecked(x1);
                for x2 in 1..=n {
                    if x1 == x2 {
                        continue;
                    }
                    let y2 = perm.eval_unchecked(x2);
                    let i = ordered_pair_index(x1, x2, n);
                    let o = ordered_pair_index(y1, y2, n);
                    counts[i * pairs + o] += 1;
                }
            }
        }
    }
    Ok(CensusTable { m, pairs, counts })
}

/// The bijection relabeling `S_i U S_j` (global vertex ids) to `[1, 2n/m]`:
/// the p-th vertex of `S_i` maps to `p`, the p-th vertex of `S_j` to
/// `p + n/m`. Fully determined by `(i, j)`; O(1) both ways.
#[derive(Clone, Copy, Debug)]
pub struct LabelMap {
    pub i: u32,
    pub j: u32,
    pub n: u32,
    pub m_parts: u32,
    part_size: u32,
}

impl LabelMap {
    pub fn new(i: u32, j: u32, n: u32, m_parts: u32) -> Result<LabelMap> {
        if m_parts < 2 || n % m_parts != 0 {
            return Err(Error::Parameter(format!(
                "need m_parts >= 2 dividing n, got m_parts = {m_parts}, n = {n}"
            )));
        }
        if !(1 <= i && i < j && j <= m_parts) {
            return Err(Error::Parameter(format!(
                "need 1 <= i < j <= m_parts, got ({i}, {j})"
            )));
        }
        Ok(LabelMap {
            i,
            j,
            n,
            m_parts,
            part_size: n / m_parts,
        })
    }

    /// Size of the image, `2 n / m_parts`.
    pub fn image_size(&self) -> u32 {
        2 * self.part_size
    }

    fn part_start(&self, part: u32) -> u32 {
        (part - 1) * self.part_size
    }

    /// Local id of global vertex `x` in `S_i U S_j`.
    pub fn eval(&self, x: u32) -> Result<u32> {
        let si = self.part_start(self.i);
        let sj = self.part_start(self.j);
        if x > si && x <= si + self.part_size {
            Ok(x - si)
        } else if x > sj && x <= sj + self.part_size {
            Ok(x - sj + self.part_size)
        } else {
            Err(Error::Domain(format!(
                "vertex {x} is not in S_{} or S_{}",
                self.i, self.j
            )))
        }
    }

    /// Global vertex of local id `y` in `[1, 2n/m_parts]`.
    pub fn inverse(&self, y: u32) -> Result<u32> {
        if y >= 1 && y <= self.part_size {
            Ok(self.part_start(self.i) + y)
        } else if y > self.part_size && y <= 2 * self.part_size {
            Ok(self.part_start(self.j) + (y - self.part_size))
        } else {
            Err(Error::Range(format!(
                "local id {y} outside [1, {}]",
                self.image_size()
            )))
        }
    }
}

/// Serializes a permutation as the decimal triple `m a b` (the polynomial is
/// implied by the embedded table).
pub fn perm_to_string(p: &AffinePermutation) -> String {
    format!("{} {} {}", p.spec.m(), p.a, p.b)
}

/// Parses the `m a b` triple written by [`perm_to_string`].
pub fn perm_from_string(s: &str) -> Result<AffinePermutation> {
    let fields: Vec<&str> = s.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse(format!(
            "expected `m a b`, got {} fields",
            fields.len()
        )));
    }
    let m: u32 = fields[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad m: {}", fields[0])))?;
    let a: u64 = fields[1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad a: {}", fields[1])))?;
    let b: u64 = fields[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad b: {}", fields[2])))?;
    AffinePermutation::new(FieldSpec::new(m)?, a, b)
}
