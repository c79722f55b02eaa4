//! Exact integer arithmetic: factoring, totients, divisor enumeration,
//! multiplicative orders, lcm folds.
//!
//! Everything downstream leans on `factorize`. It runs trial division by all
//! primes below one million, then certifies or splits what survives with
//! Miller-Rabin and Brent's variant of Pollard rho. Rho draws its parameters
//! from a deterministic per-input stream, so runs are reproducible, and it
//! counts every iteration against `Limits::factor_budget`: a number that
//! resists within budget comes back as `Error::FactorBudget` naming the
//! cofactor that survived, never as a hang.

use std::sync::OnceLock;

use dashmap::DashMap;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Limits, Result};

const TRIAL_LIMIT: u64 = 1_000_000;

/// A complete factorization: primes strictly ascending, exponents >= 1,
/// product reconstructing the input exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    entries: Vec<(BigUint, u32)>,
}

impl Factorization {
    /// The factorization of 1: no entries.
    pub fn one() -> Self {
        Factorization { entries: vec![] }
    }

    fn from_sorted(entries: Vec<(BigUint, u32)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        Factorization { entries }
    }

    /// `(prime, exponent)` pairs, primes ascending.
    pub fn entries(&self) -> &[(BigUint, u32)] {
        &self.entries
    }

    /// Reconstructs the factored integer.
    pub fn value(&self) -> BigUint {
        self.entries
            .iter()
            .fold(BigUint::one(), |acc, (p, e)| acc * p.pow(*e))
    }

    /// Euler's totient from the factorization.
    pub fn phi(&self) -> BigUint {
        self.entries.iter().fold(BigUint::one(), |acc, (p, e)| {
            acc * p.pow(e - 1) * (p - 1u32)
        })
    }

    /// Divisor count as an exact integer.
    pub fn divisor_count(&self) -> BigUint {
        self.entries
            .iter()
            .fold(BigUint::one(), |acc, (_, e)| acc * BigUint::from(e + 1))
    }

    /// All divisors in ascending order. Refuses to materialize more than
    /// `cap` of them.
    pub fn divisors(&self, cap: u64) -> Result<Vec<BigUint>> {
        let mut ds = self.divisor_lattice(cap)?;
        Ok(ds.drain(..).map(|(d, _)| d).collect())
    }

    /// All divisors paired with their exponent vectors (indexed like
    /// `entries`), ascending by value.
    pub fn divisor_lattice(&self, cap: u64) -> Result<Vec<(BigUint, Vec<u32>)>> {
        let count = self.divisor_count();
        if count > BigUint::from(cap) {
            return Err(Error::Resource(format!(
                "divisor count {count} exceeds cap {cap}"
            )));
        }
        let mut out: Vec<(BigUint, Vec<u32>)> =
            vec![(BigUint::one(), vec![0; self.entries.len()])];
        for (i, (p, e)) in self.entries.iter().enumerate() {
            let prior = out.len();
            let mut power = BigUint::one();
            for k in 1..=*e {
                power *= p;
                for j in 0..prior {
                    let (d, exps) = &out[j];
                    let mut exps = exps.clone();
                    exps[i] = k;
                    out.push((d * &power, exps));
                }
            }
        }
        out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    /// Totient of `value() / q`, where `q` is the divisor described by the
    /// exponent vector `sub` (entry-wise <= the stored exponents).
    pub fn phi_of_quotient(&self, sub: &[u32]) -> BigUint {
        debug_assert_eq!(sub.len(), self.entries.len());
        let mut acc = BigUint::one();
        for ((p, e), s) in self.entries.iter().zip(sub) {
            debug_assert!(s <= e);
            let k = e - s;
            if k > 0 {
                acc *= p.pow(k - 1) * (p - 1u32);
            }
        }
        acc
    }

    /// Factored lcm: entry-wise maximum of exponents.
    pub fn lcm_with(&self, other: &Factorization) -> Factorization {
        let mut merged: Vec<(BigUint, u32)> = Vec::with_capacity(self.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() && j < other.entries.len() {
            let (pa, ea) = &self.entries[i];
            let (pb, eb) = &other.entries[j];
            match pa.cmp(pb) {
                std::cmp::Ordering::Less => {
                    merged.push((pa.clone(), *ea));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push((pb.clone(), *eb));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    merged.push((pa.clone(), (*ea).max(*eb)));
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&self.entries[i..]);
        merged.extend_from_slice(&other.entries[j..]);
        Factorization::from_sorted(merged)
    }
}

/// Primes below `TRIAL_LIMIT`, sieved once per process.
pub(crate) fn prime_table() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = TRIAL_LIMIT as usize;
        let mut composite = vec![false; n + 1];
        let mut primes = Vec::with_capacity(80_000);
        for p in 2..=n {
            if !composite[p] {
                primes.push(p as u32);
                let mut m = p * p;
                while m <= n {
                    composite[m] = true;
                    m += p;
                }
            }
        }
        primes
    })
}

/// Deterministic stream for rho parameters (splitmix64).
struct ParamStream(u64);

impl ParamStream {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// `y^2 + c mod n` without intermediate overflow.
fn rho_step(y: u64, c: u64, n: u64) -> u64 {
    ((mul_mod(y, y, n) as u128 + c as u128) % n as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
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

/// Deterministic Miller-Rabin for `u64` (the twelve-prime base set decides
/// primality exactly below 2^64).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
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
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Miller-Rabin for arbitrary-size inputs: exact below 2^64, and above that
/// forty fixed-plus-derived bases, deterministic per input.
pub fn is_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    if n.is_even() {
        return false;
    }
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let mut stream = ParamStream(0x5EED_BA5E ^ n.to_u64_digits()[0]);
    let mut bases: Vec<BigUint> = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
        .iter()
        .map(|&b| BigUint::from(b))
        .collect();
    for _ in 0..28 {
        bases.push(BigUint::from(stream.next() | 2) % (n - 3u32) + &two);
    }
    'witness: for a in bases {
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Brent-cycle rho on `u64`, gcds batched 128 iterations at a time.
fn rho_u64(n: u64, budget: &mut u64, stream: &mut ParamStream) -> Result<u64> {
    debug_assert!(n > 1 && !is_prime_u64(n));
    if n % 2 == 0 {
        return Ok(2);
    }
    loop {
        let c = stream.next() % (n - 2) + 1;
        let mut y = stream.next() % n;
        let (mut r, mut q, mut g) = (1u64, 1u64, 1u64);
        let (mut x, mut ys) = (0u64, 0u64);
        while g == 1 {
            x = y;
            if *budget < r {
                *budget = 0;
                return Err(Error::FactorBudget {
                    cofactor: BigUint::from(n),
                    budget: 0,
                });
            }
            *budget -= r;
            for _ in 0..r {
                y = rho_step(y, c, n);
            }
            let mut k = 0u64;
            while k < r && g == 1 {
                ys = y;
                let steps = 128.min(r - k);
                if *budget < steps {
                    *budget = 0;
                    return Err(Error::FactorBudget {
                        cofactor: BigUint::from(n),
                        budget: 0,
                    });
                }
                *budget -= steps;
                for _ in 0..steps {
                    y = rho_step(y, c, n);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += steps;
            }
            r *= 2;
        }
        if g == n {
            // the batch overshot: replay one step at a time
            g = 1;
            while g == 1 {
                ys = rho_step(ys, c, n);
                g = x.abs_diff(ys).gcd(&n);
            }
        }
        if g != n {
            return Ok(g);
        }
    }
}

/// Brent-cycle rho on big integers; same scheme as the `u64` path.
fn rho_big(n: &BigUint, budget: &mut u64, stream: &mut ParamStream) -> Result<BigUint> {
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    if n.is_even() {
        return Ok(two);
    }
    let abs_diff = |a: &BigUint, b: &BigUint| if a > b { a - b } else { b - a };
    loop {
        let c = BigUint::from(stream.next()) % (n - &two) + &one;
        let mut y = BigUint::from(stream.next()) % n;
        let mut r = 1u64;
        let mut q = BigUint::one();
        let mut g = BigUint::one();
        let mut x = BigUint::zero();
        let mut ys = BigUint::zero();
        while g == one {
            x = y.clone();
            if *budget < r {
                *budget = 0;
                return Err(Error::FactorBudget {
                    cofactor: n.clone(),
                    budget: 0,
                });
            }
            *budget -= r;
            for _ in 0..r {
                y = (&y * &y + &c) % n;
            }
            let mut k = 0u64;
            while k < r && g == one {
                ys = y.clone();
                let steps = 128.min(r - k);
                if *budget < steps {
                    *budget = 0;
                    return Err(Error::FactorBudget {
                        cofactor: n.clone(),
                        budget: 0,
                    });
                }
                *budget -= steps;
                for _ in 0..steps {
                    y = (&y * &y + &c) % n;
                    q = q * abs_diff(&x, &y) % n;
                }
                g = q.gcd(n);
                k += steps;
            }
            r *= 2;
        }
        if g == *n {
            g = BigUint::one();
            while g == one {
                ys = (&ys * &ys + &c) % n;
                g = abs_diff(&x, &ys).gcd(n);
            }
        }
        if g != *n {
            return Ok(g);
        }
    }
}

/// Process-wide memo of completed factorizations for inputs too large for the
/// `u64` fast path. Inserts of identical values are idempotent, so concurrent
/// fills are harmless.
pub struct FactorCache {
    inner: DashMap<BigUint, Vec<(BigUint, u32)>>,
}

impl FactorCache {
    /// Cached entries, largest keys included; order unspecified.
    pub fn snapshot(&self) -> Vec<(BigUint, Factorization)> {
        self.inner
            .iter()
            .map(|kv| (kv.key().clone(), Factorization::from_sorted(kv.value().clone())))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn clear(&self) {
        self.inner.clear()
    }

    pub fn get(&self, n: &BigUint) -> Option<Factorization> {
        self.inner
            .get(n)
            .map(|v| Factorization::from_sorted(v.clone()))
    }

    /// Validated insert for entries arriving from outside the process (a
    /// persisted cache file, say): the product must reconstruct `n`, primes
    /// must be certified, ascending, with positive exponents.
    pub fn insert_checked(&self, n: BigUint, entries: Vec<(BigUint, u32)>) -> Result<()> {
        let mut product = BigUint::one();
        let mut prev: Option<&BigUint> = None;
        for (p, e) in &entries {
            if *e == 0 {
                return Err(Error::Domain(format!("zero exponent on {p}")));
            }
            if let Some(q) = prev {
                if q >= p {
                    return Err(Error::Domain("primes not ascending".into()));
                }
            }
            if !is_prime(p) {
                return Err(Error::Domain(format!("{p} is not prime")));
            }
            product *= p.pow(*e);
            prev = Some(p);
        }
        if product != n {
            return Err(Error::Domain(format!(
                "factors reconstruct {product}, not {n}"
            )));
        }
        self.inner.insert(n, entries);
        Ok(())
    }

    fn insert_raw(&self, n: BigUint, f: &Factorization) {
        self.inner.insert(n, f.entries.clone());
    }
}

/// The shared cache instance.
pub fn factor_cache() -> &'static FactorCache {
    static CACHE: OnceLock<FactorCache> = OnceLock::new();
    CACHE.get_or_init(|| FactorCache {
        inner: DashMap::new(),
    })
}

fn factorize_u64(mut n: u64, start_idx: usize, budget: &mut u64) -> Result<Vec<(u64, u32)>> {
    let mut out: Vec<(u64, u32)> = Vec::new();
    for &p in &prime_table()[start_idx..] {
        let p = p as u64;
        if p * p > n {
            break;
        }
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
    }
    if n > 1 {
        let mut pending = vec![n];
        while let Some(m) = pending.pop() {
            if is_prime_u64(m) {
                match out.iter_mut().find(|(p, _)| *p == m) {
                    Some((_, e)) => *e += 1,
                    None => out.push((m, 1)),
                }
            } else {
                let mut stream = ParamStream(0xB0DE ^ m);
                let d = rho_u64(m, budget, &mut stream)?;
                pending.push(d);
                pending.push(m / d);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Complete factorization of `n >= 1`.
///
/// `n = 0` is a domain error; running out of `limits.factor_budget` reports
/// the unfactored cofactor. Results for inputs beyond `u64` are memoized in
/// [`factor_cache`].
pub fn factorize(n: &BigUint, limits: &Limits) -> Result<Factorization> {
    if n.is_zero() {
        return Err(Error::Domain("factorize(0) is undefined".into()));
    }
    if n.is_one() {
        return Ok(Factorization::one());
    }
    let mut budget = limits.factor_budget;
    if let Some(small) = n.to_u64() {
        let fs = factorize_u64(small, 0, &mut budget).map_err(|e| rebudget(e, limits))?;
        return Ok(Factorization::from_sorted(
            fs.into_iter().map(|(p, e)| (BigUint::from(p), e)).collect(),
        ));
    }
    if let Some(hit) = factor_cache().get(n) {
        return Ok(hit);
    }

    let mut entries: Vec<(BigUint, u32)> = Vec::new();
    let mut cofactor = n.clone();
    let mut idx = 0;
    let table = prime_table();
    while idx < table.len() && cofactor.to_u64().is_none() {
        let p = table[idx] as u64;
        if (&cofactor % p).is_zero() {
            let mut e = 0;
            while (&cofactor % p).is_zero() {
                cofactor /= p;
                e += 1;
            }
            entries.push((BigUint::from(p), e));
        }
        idx += 1;
    }

    let mut small_entries: Vec<(u64, u32)> = Vec::new();
    let mut pending: Vec<BigUint> = Vec::new();
    if let Some(small) = cofactor.to_u64() {
        if small > 1 {
            small_entries = factorize_u64(small, idx, &mut budget).map_err(|e| rebudget(e, limits))?;
        }
    } else {
        pending.push(cofactor);
    }
    while let Some(m) = pending.pop() {
        if let Some(small) = m.to_u64() {
            let fs = factorize_u64(small, 0, &mut budget).map_err(|e| rebudget(e, limits))?;
            for (p, e) in fs {
                merge_u64(&mut small_entries, p, e);
            }
            continue;
        }
        if is_prime(&m) {
            merge_big(&mut entries, m, 1);
            continue;
        }
        let mut stream = ParamStream(0xB0DE ^ m.to_u64_digits()[0]);
        let d = rho_big(&m, &mut budget, &mut stream).map_err(|e| rebudget(e, limits))?;
        pending.push(&m / &d);
        pending.push(d);
    }
    for (p, e) in small_entries {
        merge_big(&mut entries, BigUint::from(p), e);
    }
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let result = Factorization::from_sorted(entries);
    debug_assert_eq!(result.value(), *n);
    factor_cache().insert_raw(n.clone(), &result);
    Ok(result)
}

fn rebudget(e: Error, limits: &Limits) -> Error {
    match e {
        Error::FactorBudget { cofactor, .. } => Error::FactorBudget {
            cofactor,
            budget: limits.factor_budget,
        },
        other => other,
    }
}

fn merge_u64(entries: &mut Vec<(u64, u32)>, p: u64, e: u32) {
    match entries.iter_mut().find(|(q, _)| *q == p) {
        Some((_, old)) => *old += e,
        None => entries.push((p, e)),
    }
}

fn merge_big(entries: &mut Vec<(BigUint, u32)>, p: BigUint, e: u32) {
    match entries.iter_mut().find(|(q, _)| *q == p) {
        Some((_, old)) => *old += e,
        None => entries.push((p, e)),
    }
}

/// Euler's totient of `n >= 1`.
pub fn euler_phi(n: &BigUint, limits: &Limits) -> Result<BigUint> {
    Ok(factorize(n, limits)?.phi())
}

/// All divisors of `n >= 1`, ascending; at most `limits.divisor_cap` of them.
pub fn divisors(n: &BigUint, limits: &Limits) -> Result<Vec<BigUint>> {
    factorize(n, limits)?.divisors(limits.divisor_cap)
}

/// Divisor count of `n >= 1`.
pub fn sigma0(n: &BigUint, limits: &Limits) -> Result<BigUint> {
    Ok(factorize(n, limits)?.divisor_count())
}

/// Multiplicative order of `a` modulo `m >= 1`; `m = 1` yields 1 (every
/// residue is the identity there). Requires `gcd(a, m) = 1`.
pub fn multiplicative_order(a: &BigUint, m: &BigUint, limits: &Limits) -> Result<BigUint> {
    if m.is_zero() {
        return Err(Error::Domain("order modulo 0 is undefined".into()));
    }
    if m.is_one() {
        return Ok(BigUint::one());
    }
    let a = a % m;
    if a.gcd(m) != BigUint::one() {
        return Err(Error::Domain(format!(
            "{a} is not invertible modulo {m}"
        )));
    }
    let phi = euler_phi(m, limits)?;
    let phi_factors = factorize(&phi, limits)?;
    let mut order = phi;
    for (p, e) in phi_factors.entries() {
        for _ in 0..*e {
            let candidate = &order / p;
            if (&order % p).is_zero() && a.modpow(&candidate, m).is_one() {
                order = candidate;
            } else {
                break;
            }
        }
    }
    debug_assert!(a.modpow(&order, m).is_one());
    Ok(order)
}

/// Least common multiple of a list; the empty fold is 1.
pub fn lcm_fold(values: &[BigUint]) -> BigUint {
    values.iter().fold(BigUint::one(), |acc, v| acc.lcm(v))
}

/// Writes `n = p^m` with `p` prime, if possible. Tries exponents from the
/// largest that bit-length allows, so the returned base is the true prime.
pub fn prime_power_base(n: &BigUint) -> Option<(BigUint, u32)> {
    if n < &BigUint::from(2u32) {
        return None;
    }
    let max_m = n.bits() as u32;
    for m in (1..=max_m).rev() {
        let r = n.nth_root(m);
        if &r.pow(m) == n && is_prime(&r) {
            return Some((r, m));
        }
    }
    None
}

/// `a / b` as `f64`, stable even when both operands overflow `f64` range.
pub fn ratio_f64(a: &BigUint, b: &BigUint) -> f64 {
    debug_assert!(!b.is_zero());
    let bits = a.bits().max(b.bits());
    if bits <= 996 {
        return a.to_f64().unwrap_or(f64::INFINITY) / b.to_f64().unwrap_or(f64::INFINITY);
    }
    let shift = bits - 996;
    let a = a >> shift;
    let b = b >> shift;
    a.to_f64().unwrap_or(f64::INFINITY) / b.to_f64().unwrap_or(f64::INFINITY)
}
