//! Exact big-integer number theory: primality, benchmark biprime generation,
//! factor bases, smoothness testing and Dickman–de Bruijn smoothness
//! estimates.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Witnesses that make Miller–Rabin deterministic for all n < 2^64.
const SMALL_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn mulmod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc: u64 = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod_u64(acc, base, m);
        }
        base = mulmod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

fn miller_rabin_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &SMALL_WITNESSES {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    'witness: for &a in &SMALL_WITNESSES {
        let mut x = powmod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Miller–Rabin primality test.
///
/// Deterministic (fixed witness set) for `n < 2^64`; for larger inputs runs
/// `rounds` random-base rounds with error probability at most `4^-rounds`.
/// The random bases are derived from `n` itself so repeated calls agree.
pub fn is_probable_prime(n: &BigUint, rounds: u32) -> bool {
    if let Some(small) = n.to_u64() {
        return miller_rabin_u64(small);
    }
    let two = BigUint::from(2u32);
    if n.is_even() {
        return false;
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    // Seed from the number's low words so the test is a pure function of n.
    let digits = n.to_u64_digits();
    let seed = digits
        .iter()
        .fold(0xd1b5_4a32_d192_ed03u64, |acc, &w| {
            acc.rotate_left(17) ^ w.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    'round: for _ in 0..rounds.max(1) {
        let a = rng.gen_biguint_range(&two, &(n - 2u32));
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'round;
            }
        }
        return false;
    }
    true
}

/// A benchmark biprime `n = p*q` with both factors of exactly `bits/2` bits,
/// first and last bit set, and `n` of exactly `bits` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkBiprime {
    pub n: BigUint,
    pub p: BigUint,
    pub q: BigUint,
    pub bits_n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BiprimeError {
    OddBits(usize),
    TooSmall(usize),
    AttemptsExhausted { bits: usize, attempts: usize },
}

impl fmt::Display for BiprimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiprimeError::OddBits(b) => write!(f, "biprime bit length must be even, got {b}"),
            BiprimeError::TooSmall(b) => write!(f, "biprime bit length must be >= 8, got {b}"),
            BiprimeError::AttemptsExhausted { bits, attempts } => write!(
                f,
                "no benchmark biprime of {bits} bits found within {attempts} attempts"
            ),
        }
    }
}

impl std::error::Error for BiprimeError {}

const DEFAULT_BIPRIME_ATTEMPTS: usize = 100_000;

/// Generates a benchmark biprime: two distinct random primes of `bits/2`
/// bits each (leading and trailing bit forced to 1) whose product has
/// exactly `bits` bits. Deterministic for a given seed.
pub fn generate_benchmark_biprime(bits: usize, seed: u64) -> Result<BenchmarkBiprime, BiprimeError> {
    generate_benchmark_biprime_with_budget(bits, seed, DEFAULT_BIPRIME_ATTEMPTS)
}

pub fn generate_benchmark_biprime_with_budget(
    bits: usize,
    seed: u64,
    attempt_budget: usize,
) -> Result<BenchmarkBiprime, BiprimeError> {
    if bits % 2 != 0 {
        return Err(BiprimeError::OddBits(bits));
    }
    if bits < 8 {
        return Err(BiprimeError::TooSmall(bits));
    }
    let half = bits / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00c0_ffee_1234_5678);

    let mut attempts = 0usize;
    let draw_prime = |rng: &mut ChaCha8Rng, attempts: &mut usize| -> Option<BigUint> {
        while *attempts < attempt_budget {
            *attempts += 1;
            let candidate = random_pinned_odd(rng, half);
            if is_probable_prime(&candidate, 40) {
                return Some(candidate);
            }
        }
        None
    };

    loop {
        let p = match draw_prime(&mut rng, &mut attempts) {
            Some(p) => p,
            None => {
                return Err(BiprimeError::AttemptsExhausted {
                    bits,
                    attempts: attempt_budget,
                })
            }
        };
        let q = loop {
            match draw_prime(&mut rng, &mut attempts) {
                Some(q) if q != p => break q,
                Some(_) => continue,
                None => {
                    return Err(BiprimeError::AttemptsExhausted {
                        bits,
                        attempts: attempt_budget,
                    })
                }
            }
        };
        let n = &p * &q;
        if n.bits() as usize == bits {
            return Ok(BenchmarkBiprime { n, p, q, bits_n: bits });
        }
        // Product came out one bit short; redraw the pair.
    }
}

fn random_pinned_odd(rng: &mut ChaCha8Rng, bits: usize) -> BigUint {
    // First and last bit set; the bits in between are uniform.
    let mut v = BigUint::one() << (bits - 1);
    v |= BigUint::one();
    if bits > 2 {
        let middle = rng.gen_biguint((bits - 2) as u64);
        v |= middle << 1;
    }
    v
}

/// The primes `<= bound`, in increasing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorBase {
    pub bound: u64,
    pub primes: Vec<u64>,
}

impl FactorBase {
    /// Number of primes in the base, `π(bound)`.
    pub fn size(&self) -> usize {
        self.primes.len()
    }

    /// Column index of a prime in exponent vectors, if it is in the base.
    pub fn index_of(&self, p: u64) -> Option<usize> {
        self.primes.binary_search(&p).ok()
    }
}

/// Sieve of Eratosthenes up to `b` inclusive. `b >= 2`.
pub fn build_factor_base(b: u64) -> FactorBase {
    assert!(b >= 2, "factor base bound must be >= 2");
    let n = b as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    FactorBase { bound: b, primes }
}

/// A factorization of `value` over a factor base, with at most one
/// "large" prime between the base bound and a cutoff.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothFactorization {
    pub value: BigUint,
    pub exponents: BTreeMap<u64, u32>,
    pub large_prime: Option<u64>,
}

impl SmoothFactorization {
    /// Recomputes `value` from the certificate; used by validation code.
    pub fn reconstruct(&self) -> BigUint {
        let mut acc = BigUint::one();
        for (&p, &e) in &self.exponents {
            acc *= BigUint::from(p).pow(e);
        }
        if let Some(lp) = self.large_prime {
            acc *= BigUint::from(lp);
        }
        acc
    }

    pub fn is_fully_smooth(&self) -> bool {
        self.large_prime.is_none()
    }
}

/// Outcome of trial division against a factor base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmoothOutcome {
    Smooth(SmoothFactorization),
    /// Cofactor left after removing all base primes was neither 1 nor a
    /// prime within the large-prime cutoff.
    Rejected { cofactor: BigUint },
}

impl SmoothOutcome {
    pub fn into_smooth(self) -> Option<SmoothFactorization> {
        match self {
            SmoothOutcome::Smooth(s) => Some(s),
            SmoothOutcome::Rejected { .. } => None,
        }
    }
}

/// Trial-divides `v >= 1` by the factor base primes. Full success leaves
/// cofactor 1; a prime cofactor in `(bound, cutoff]` is kept as the large
/// prime; anything else is a rejection.
pub fn smooth_factorize(v: &BigUint, fb: &FactorBase, large_prime_cutoff: u64) -> SmoothOutcome {
    assert!(!v.is_zero(), "cannot smooth-factorize 0");
    let mut rest = v.clone();
    let mut exponents = BTreeMap::new();
    for &p in &fb.primes {
        if rest.is_one() {
            break;
        }
        let pb = BigUint::from(p);
        let mut e = 0u32;
        loop {
            let (q, r) = rest.div_rem(&pb);
            if r.is_zero() {
                rest = q;
                e += 1;
            } else {
                break;
            }
        }
        if e > 0 {
            exponents.insert(p, e);
        }
    }
    if rest.is_one() {
        return SmoothOutcome::Smooth(SmoothFactorization {
            value: v.clone(),
            exponents,
            large_prime: None,
        });
    }
    if let Some(c) = rest.to_u64() {
        if c > fb.bound && c <= large_prime_cutoff && miller_rabin_u64(c) {
            return SmoothOutcome::Smooth(SmoothFactorization {
                value: v.clone(),
                exponents,
                large_prime: Some(c),
            });
        }
    }
    SmoothOutcome::Rejected { cofactor: rest }
}

/// How to evaluate the Dickman–de Bruijn function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DickmanMethod {
    /// Numerical integration of the delay equation `r ρ'(r) = -ρ(r-1)`.
    AnalyticDelayOde,
    /// The rough estimate `ρ(r) ≈ r^-r`.
    PowerApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DickmanEstimate {
    pub r: f64,
    pub rho: f64,
    pub method: DickmanMethod,
}

const DICKMAN_STEP: f64 = 1e-3;

/// Probability that a random integer of `r*h` bits is `2^h`-smooth,
/// asymptotically. `ρ(r) = 1` for `r <= 1`.
pub fn dickman_rho(r: f64, method: DickmanMethod) -> DickmanEstimate {
    assert!(r > 0.0, "dickman_rho needs r > 0");
    let rho = match method {
        DickmanMethod::PowerApprox => {
            if r <= 1.0 {
                1.0
            } else {
                r.powf(-r)
            }
        }
        DickmanMethod::AnalyticDelayOde => dickman_analytic(r),
    };
    DickmanEstimate {
        r,
        rho: rho.clamp(0.0, 1.0),
        method,
    }
}

/// RK4 on the delay ODE `ρ'(r) = -ρ(r-1)/r` with ρ = 1 on [0,1] and linear
/// interpolation of the delayed term. Fixed step keeps the table addressable
/// by index.
fn dickman_analytic(r: f64) -> f64 {
    if r <= 1.0 {
        return 1.0;
    }
    let h = DICKMAN_STEP;
    let steps_total = ((r - 1.0) / h).ceil() as usize;
    // table[i] = rho at 1 + i*h (rho(<=1) handled by lookup)
    let mut table = Vec::with_capacity(steps_total + 1);
    table.push(1.0f64);
    let lookup = |table: &Vec<f64>, x: f64| -> f64 {
        if x <= 1.0 {
            return 1.0;
        }
        let pos = (x - 1.0) / h;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let a = table[i.min(table.len() - 1)];
        let b = table[(i + 1).min(table.len() - 1)];
        a + frac * (b - a)
    };
    let mut rho = 1.0f64;
    for i in 0..steps_total {
        let x = 1.0 + i as f64 * h;
        // Last step may be short so that we land exactly on r.
        let step = if x + h > r { r - x } else { h };
        if step <= 0.0 {
            break;
        }
        let f = |t: f64, _y: f64, table: &Vec<f64>| -> f64 { -lookup(table, t - 1.0) / t };
        let k1 = f(x, rho, &table);
        let k2 = f(x + step / 2.0, rho + step / 2.0 * k1, &table);
        let k3 = f(x + step / 2.0, rho + step / 2.0 * k2, &table);
        let k4 = f(x + step, rho + step * k3, &table);
        rho += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        table.push(rho);
    }
    rho.max(0.0)
}

/// Probability that an integer split into chunks of the given bit lengths is
/// `2^h`-smooth: independent Dickman factors for every chunk longer than `h`.
pub fn smoothness_probability(bit_lengths: &[usize], h: usize) -> f64 {
    assert!(h >= 1);
    bit_lengths
        .iter()
        .filter(|&&len| len > h)
        .map(|&len| dickman_rho(len as f64 / h as f64, DickmanMethod::AnalyticDelayOde).rho)
        .product()
}
