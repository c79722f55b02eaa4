// Randomized checks of the arithmetic layer and the two inequality lemmas
// the closed-form bounds lean on.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use proptest::prelude::*;

use densimean::engine::product_lower_bound;
use densimean::numtheory::{
    self, factorize, is_prime_u64, multiplicative_order, prime_power_base, ratio_f64,
};
use densimean::Limits;

fn lim() -> Limits {
    Limits::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // Weierstrass-style bound: prod (1 - x_i)^{e_i} >= 1 - sum e_i x_i,
    // for x_i in [0, 1) and real exponents e_i >= 1.
    #[test]
    fn product_bound_holds(
        pairs in prop::collection::vec(((0.0f64..0.99), (1.0f64..4.0)), 1..8)
    ) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let es: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (lhs, rhs) = product_lower_bound(&xs, &es).unwrap();
        prop_assert!(lhs >= rhs - 1e-12, "lhs {lhs} < rhs {rhs}");
        prop_assert!(lhs > 0.0);
        prop_assert!(lhs <= 1.0 + 1e-12);
    }

    // The log bound used for geometric tails: -x^2 - x < ln(1 - x) <= -x
    // on (0, 1/2]. The right half is standard; the left half is what makes
    // truncated log-sums finite.
    #[test]
    fn log_one_minus_bounds(x in 1e-9f64..=0.5) {
        let l = (1.0 - x).ln();
        prop_assert!(l <= -x + 1e-15);
        prop_assert!(-x * x - x < l, "x = {x}: {} vs {l}", -x * x - x);
    }

    // factorize returns certified primes whose product reconstructs the input.
    #[test]
    fn factorize_roundtrip(n in 2u64..u64::MAX) {
        let big = BigUint::from(n);
        let f = factorize(&big, &lim()).unwrap();
        prop_assert_eq!(f.value(), big);
        let mut prev: Option<BigUint> = None;
        for (p, k) in f.entries() {
            prop_assert!(*k >= 1);
            prop_assert!(numtheory::is_prime(p), "{p} not prime");
            if let Some(q) = prev {
                prop_assert!(&q < p, "entries not strictly ascending");
            }
            prev = Some(p.clone());
        }
    }

    // multiplicative_order returns the minimal exponent: a^ord = 1 and
    // a^(ord/r) != 1 for every prime r | ord.
    #[test]
    fn order_is_minimal(a in 2u64..10_000, m in 3u64..100_000) {
        let g = numtheory_gcd(a, m);
        let a_big = BigUint::from(a);
        let m_big = BigUint::from(m);
        if g != 1 {
            prop_assert!(multiplicative_order(&a_big, &m_big, &lim()).is_err());
            return Ok(());
        }
        let ord = multiplicative_order(&a_big, &m_big, &lim()).unwrap();
        prop_assert!(a_big.modpow(&ord, &m_big).is_one());
        for (r, _) in factorize(&ord, &lim()).unwrap().entries() {
            let partial = &ord / r;
            prop_assert!(
                !a_big.modpow(&partial, &m_big).is_one(),
                "order {ord} not minimal for {a} mod {m}: {partial} works"
            );
        }
    }

    // prime_power_base inverts exponentiation of a prime, and rejects
    // anything with two distinct prime factors.
    #[test]
    fn prime_power_roundtrip(p_idx in 0usize..100, k in 1u32..6) {
        let p = nth_prime(p_idx);
        let n = BigUint::from(p).pow(k);
        let (base, exp) = prime_power_base(&n).unwrap();
        prop_assert_eq!(base, BigUint::from(p));
        prop_assert_eq!(exp, k);
    }

    #[test]
    fn composite_mixed_is_not_prime_power(i in 0usize..80, j in 0usize..80, a in 1u32..4, b in 1u32..4) {
        prop_assume!(i != j);
        let n = BigUint::from(nth_prime(i)).pow(a) * BigUint::from(nth_prime(j)).pow(b);
        prop_assert!(prime_power_base(&n).is_none());
    }

    // ratio_f64 agrees with plain division while both fit in f64 exactly.
    #[test]
    fn ratio_matches_division(a in 1u64..(1 << 52), b in 1u64..(1 << 52)) {
        let r = ratio_f64(&BigUint::from(a), &BigUint::from(b));
        let direct = a as f64 / b as f64;
        prop_assert!((r - direct).abs() <= 1e-15 * direct.abs().max(1.0));
    }

    // f multiplicative data: phi(ab) = phi(a) phi(b) gcd(a,b)=1 via factorize.
    #[test]
    fn phi_multiplicative(a in 2u64..100_000, b in 2u64..100_000) {
        prop_assume!(numtheory_gcd(a, b) == 1);
        let phi = |x: u64| numtheory::euler_phi(&BigUint::from(x), &lim()).unwrap();
        prop_assert_eq!(phi(a * b), phi(a) * phi(b));
    }
}

// Plain u64 gcd for test-side filtering.
fn numtheory_gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn nth_prime(idx: usize) -> u64 {
    let mut count = 0;
    let mut n = 1u64;
    loop {
        n += 1;
        if is_prime_u64(n) {
            if count == idx {
                return n;
            }
            count += 1;
        }
    }
}

#[test]
fn zero_and_one_reject_factorize() {
    assert!(factorize(&BigUint::zero(), &lim()).is_err());
    let one = factorize(&BigUint::one(), &lim()).unwrap();
    assert!(one.entries().is_empty());
    assert!(one.value().is_one());
}
