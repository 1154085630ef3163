//! Miller-Rabin primality over arbitrary-precision integers.
//!
//! Below [`DETERMINISTIC_BOUND`] the first thirteen primes form a witness set
//! that never misclassifies. Above it the engine falls back to random bases
//! drawn from a ChaCha stream seeded by the candidate itself, so answers are
//! reproducible run to run.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::sync::OnceLock;

const WITNESSES: [u64; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// Default number of random rounds used above the deterministic bound.
pub const DEFAULT_ROUNDS: u32 = 64;

/// The least strong pseudoprime to every base in `2..=41`.
pub const DETERMINISTIC_BOUND: &str = "3317044064679887385961981";

/// Integers strictly below this value are classified without error.
pub fn deterministic_bound() -> &'static BigUint {
    static BOUND: OnceLock<BigUint> = OnceLock::new();
    BOUND.get_or_init(|| DETERMINISTIC_BOUND.parse().expect("valid decimal"))
}

/// Which regime produced a primality verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Deterministic,
    Probabilistic,
}

#[derive(Debug, Clone, Copy)]
pub struct PrimalityEngine {
    rounds: u32,
}

impl Default for PrimalityEngine {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
        }
    }
}

impl PrimalityEngine {
    pub fn with_rounds(rounds: u32) -> Self {
        Self {
            rounds: rounds.max(1),
        }
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn regime(&self, n: &BigUint) -> Regime {
        if n < deterministic_bound() {
            Regime::Deterministic
        } else {
            Regime::Probabilistic
        }
    }

    pub fn is_prime_u64(&self, n: u64) -> bool {
        if n < 2 {
            return false;
        }
        for &p in &WITNESSES {
            if n == p {
                return true;
            }
            if n % p == 0 {
                return false;
            }
        }
        let (d, s) = split_odd(n - 1);
        WITNESSES
            .iter()
            .all(|&a| strong_probable_prime_u64(n, a, d, s))
    }

    pub fn is_prime(&self, n: &BigUint) -> bool {
        if let Some(small) = n.to_u64() {
            return self.is_prime_u64(small);
        }
        for &p in &WITNESSES {
            if (n % p).is_zero() {
                return false;
            }
        }
        let one = BigUint::one();
        let n_minus_1 = n - &one;
        let s = n_minus_1.trailing_zeros().expect("n > 1");
        let d = &n_minus_1 >> s;

        if n < deterministic_bound() {
            return WITNESSES
                .iter()
                .all(|&a| strong_probable_prime(n, &BigUint::from(a), &d, s));
        }

        let mut seed = [0u8; 32];
        for (slot, byte) in seed.iter_mut().zip(n.to_bytes_le()) {
            *slot ^= byte;
        }
        let mut rng = ChaCha20Rng::from_seed(seed);
        let two = BigUint::from(2u8);
        (0..self.rounds).all(|_| {
            let a = rng.gen_biguint_range(&two, &n_minus_1);
            strong_probable_prime(n, &a, &d, s)
        })
    }

    /// Smallest prime strictly greater than `n`.
    pub fn next_prime_after(&self, n: &BigUint) -> BigUint {
        let two = BigUint::from(2u8);
        if n < &two {
            return two;
        }
        let mut candidate = n + 1u32;
        if candidate.is_even() {
            if candidate == two {
                return candidate;
            }
            candidate += 1u32;
        }
        while !self.is_prime(&candidate) {
            candidate += 2u32;
        }
        candidate
    }
}

fn split_odd(mut d: u64) -> (u64, u32) {
    let s = d.trailing_zeros();
    d >>= s;
    (d, s)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn strong_probable_prime_u64(n: u64, a: u64, d: u64, s: u32) -> bool {
    let mut x = pow_mod(a, d, n);
    if x == 1 || x == n - 1 {
        return true;
    }
    for _ in 1..s {
        x = mul_mod(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

fn strong_probable_prime(n: &BigUint, a: &BigUint, d: &BigUint, s: u64) -> bool {
    let n_minus_1 = n - 1u32;
    let mut x = a.modpow(d, n);
    if x.is_one() || x == n_minus_1 {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if x == n_minus_1 {
            return true;
        }
    }
    false
}

/// Plain sieve of Eratosthenes; primes `<= limit` in increasing order.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::with_capacity(estimate_prime_count(limit));
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i.saturating_mul(i);
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

fn estimate_prime_count(limit: usize) -> usize {
    let x = limit as f64;
    if x < 17.0 {
        8
    } else {
        (1.26 * x / x.ln()) as usize
    }
}
