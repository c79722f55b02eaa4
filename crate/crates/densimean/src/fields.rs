//! Densities of primitive and normal elements in finite field extensions.
//!
//! Fix a prime power `q = p^s` and write `F` for the field with `q`
//! elements. Two classical element counts in the degree-`n` extension of `F`
//! drive this module:
//!
//! * **Primitive elements** (generators of the multiplicative group): there
//!   are `phi(q^n - 1)` of them, so their density among nonzero elements is
//!   `phi(q^n - 1) / (q^n - 1)`. That density factors over the divisors of
//!   `n`: the divisor `d` contributes one factor `1 - 1/l` per prime `l` at
//!   which `q` has multiplicative order exactly `d` (equivalently, per prime
//!   appearing in `q^d - 1` for the first time).
//!
//! * **Normal elements** (elements whose Frobenius orbit is a basis over
//!   `F`): their density is again a product over divisors, this time of the
//!   `p`-free part of `n`. The divisor `d` contributes
//!   `(1 - q^{-e})^{phi(d)/e}` where `e` is the multiplicative order of `q`
//!   modulo `d`: each of the `phi(d)/e` irreducible factors of the `d`-th
//!   cyclotomic polynomial over `F` knocks out a `q^{-e}` share.
//!
//! Both factor maps are density-like in the sense of
//! [`crate::engine::DensityLikeSpec`] (the normal one with modulus `p`), so
//! all the mean-value machinery applies; [`primitive_density_spec`] and
//! [`normal_density_spec`] do the packaging. The closed-form bounds at the
//! bottom of the module (mean window, variance cap, proportion threshold for
//! the normal family; a vanishing-liminf witness for the primitive family)
//! are cheap arithmetic consequences exposed for reporting and testing.
//!
//! Everything here is exact integer arithmetic until the final division.
//! Cross-checks against brute-force field enumeration live in
//! [`crate::oracle`].

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::engine::{CompensatedSum, DensityLikeSpec};
use crate::numtheory::{self, Factorization};
use crate::{Error, Limits, Result};

/// A validated prime power `q = base^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimePower {
    value: u64,
    base: u64,
    exponent: u32,
}

impl PrimePower {
    pub fn new(q: u64) -> Result<PrimePower> {
        let (base, exponent) = numtheory::prime_power_base(&BigUint::from(q))
            .ok_or_else(|| Error::Domain(format!("{q} is not a prime power")))?;
        Ok(PrimePower {
            value: q,
            base: base.to_u64().expect("base divides a u64"),
            exponent,
        })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    /// The characteristic `p`.
    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }
}

fn pow_minus_one(q: u64, d: u64, limits: &Limits) -> Result<(BigUint, Factorization)> {
    if d == 0 {
        return Err(Error::Domain("extension degrees start at 1".into()));
    }
    let d32 = u32::try_from(d)
        .map_err(|_| Error::Resource(format!("degree {d} is far past factoring reach")))?;
    let m = BigUint::from(q).pow(d32) - 1u32;
    let f = numtheory::factorize(&m, limits)?;
    Ok((m, f))
}

/// The primes whose multiplicative order of `q` is exactly `d`, ascending.
/// These are the primes dividing `q^d - 1` but no smaller `q^i - 1`.
pub fn primes_with_order(q: u64, d: u64, limits: &Limits) -> Result<Vec<BigUint>> {
    PrimePower::new(q)?;
    let q_big = BigUint::from(q);
    let (_, factors) = pow_minus_one(q, d, limits)?;
    let mut out = Vec::new();
    for (l, _) in factors.entries() {
        let ord = numtheory::multiplicative_order(&q_big, l, limits)?;
        if ord == BigUint::from(d) {
            out.push(l.clone());
        }
    }
    Ok(out)
}

/// The divisor-`d` factor of the primitive-element density:
/// `prod (1 - 1/l)` over the primes `l` at which `q` has order `d`.
pub fn primitive_factor(q: u64, d: u64, limits: &Limits) -> Result<f64> {
    let mut out = 1.0f64;
    for l in primes_with_order(q, d, limits)? {
        out *= numtheory::ratio_f64(&(&l - 1u32), &l);
    }
    Ok(out)
}

/// Density of primitive elements among the nonzero elements of the
/// degree-`n` extension: `phi(q^n - 1) / (q^n - 1)`.
///
/// Computed twice, by the totient ratio and by the divisor product, and the
/// two paths must agree to 1e-10 relative or the call fails; the totient
/// path's value is returned.
pub fn primitive_density(q: u64, n: u64, limits: &Limits) -> Result<f64> {
    let (m, factors) = pow_minus_one(q, n, limits)?;
    let direct = numtheory::ratio_f64(&factors.phi(), &m);
    let mut product = 1.0f64;
    for d in numtheory::divisors(&BigUint::from(n), limits)? {
        let d = d.to_u64().expect("divisor of a u64 fits");
        product *= primitive_factor(q, d, limits)?;
    }
    if (product - direct).abs() > 1e-10 * direct {
        return Err(Error::IdentityMismatch(format!(
            "primitive density at q = {q}, n = {n}: divisor product {product} vs totient ratio {direct}"
        )));
    }
    Ok(direct)
}

/// Density of primitive elements among *all* `q^n` elements:
/// `phi(q^n - 1) / q^n`. Sits strictly below [`primitive_density`], within
/// `q^{-n}` of it.
pub fn primitive_fraction(q: u64, n: u64, limits: &Limits) -> Result<f64> {
    let (_, factors) = pow_minus_one(q, n, limits)?;
    let d32 = u32::try_from(n).expect("checked by pow_minus_one");
    Ok(numtheory::ratio_f64(
        &factors.phi(),
        &BigUint::from(q).pow(d32),
    ))
}

/// How the powers of `q` act modulo `d`: the multiplicative order `e`, the
/// totient `phi(d)`, and the orbit count `phi(d) / e`, which is the number
/// of irreducible factors (each of degree `e`) of the `d`-th cyclotomic
/// polynomial over the field with `q` elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrderProfile {
    pub order: u64,
    pub totient: u64,
    pub orbit_count: u64,
}

/// The [`OrderProfile`] of `q` modulo `d`; requires `gcd(d, q) = 1`.
pub fn order_profile(q: u64, d: u64, limits: &Limits) -> Result<OrderProfile> {
    if d == 0 {
        return Err(Error::Domain("order profiles need d >= 1".into()));
    }
    if d.gcd(&q) != 1 {
        return Err(Error::Domain(format!(
            "order of {q} modulo {d} undefined: they share a factor"
        )));
    }
    let d_big = BigUint::from(d);
    let order = numtheory::multiplicative_order(&BigUint::from(q), &d_big, limits)?
        .to_u64()
        .expect("order divides phi(d) which fits u64");
    let totient = numtheory::euler_phi(&d_big, limits)?
        .to_u64()
        .expect("phi(d) <= d fits u64");
    debug_assert_eq!(totient % order, 0);
    Ok(OrderProfile {
        order,
        totient,
        orbit_count: totient / order,
    })
}

/// The divisor-`d` factor of the normal-element density:
/// `(1 - q^{-e})^{phi(d)/e}` with `e` the order of `q` mod `d`, and 1 when
/// `d` shares a factor with `q` (those divisors never appear in the
/// density's support).
pub fn normal_factor(q: u64, d: u64, limits: &Limits) -> Result<f64> {
    normal_factor_big(q, &BigUint::from(d), limits)
}

/// [`normal_factor`] for moduli past `u64`; divisor ladders over `q = 8`
/// already cross that line by their eighth term. Never underflows: the
/// exponent satisfies `phi(d)/e * q^{-e} < 1` because `d <= q^e - 1`, so
/// every factor stays above `exp(-2)`.
pub fn normal_factor_big(q: u64, d: &BigUint, limits: &Limits) -> Result<f64> {
    PrimePower::new(q)?;
    if d.is_zero() {
        return Err(Error::Domain("normal factors need d >= 1".into()));
    }
    let q_big = BigUint::from(q);
    if !d.gcd(&q_big).is_one() {
        return Ok(1.0);
    }
    let e = numtheory::multiplicative_order(&q_big, d, limits)?;
    // q^{-e} below f64's floor: the factor rounds to exactly 1.
    if e.to_f64().unwrap_or(f64::INFINITY) * (q as f64).log2() > 1000.0 {
        return Ok(1.0);
    }
    let e32 = u32::try_from(e.to_u64().expect("despite the bit check"))
        .expect("e bounded by the bit check");
    let big_q = q_big.pow(e32);
    let base = numtheory::ratio_f64(&(&big_q - 1u32), &big_q);
    let k = numtheory::euler_phi(d, limits)? / &e;
    if k.is_one() {
        Ok(base)
    } else if let Some(k32) = k.to_u64().and_then(|v| i32::try_from(v).ok()) {
        Ok(base.powi(k32))
    } else {
        let x = numtheory::ratio_f64(&BigUint::one(), &big_q);
        Ok((k.to_f64().expect("nonzero") * (-x).ln_1p()).exp())
    }
}

fn stable_product(factors: &[f64]) -> f64 {
    if factors.iter().any(|&v| v < 0.5) {
        let mut acc = CompensatedSum::default();
        for &v in factors {
            acc.add(v.ln());
        }
        acc.value().exp()
    } else {
        factors.iter().product()
    }
}

/// Density of normal elements in the degree-`n` extension of the field with
/// `q` elements: the product of [`normal_factor`] over the divisors of the
/// `p`-free part of `n`.
pub fn normal_density(q: u64, n: u64, limits: &Limits) -> Result<f64> {
    let pp = PrimePower::new(q)?;
    if n == 0 {
        return Err(Error::Domain("extension degrees start at 1".into()));
    }
    let mut coprime_part = n;
    while coprime_part % pp.base() == 0 {
        coprime_part /= pp.base();
    }
    let mut factors = Vec::new();
    for d in numtheory::divisors(&BigUint::from(coprime_part), limits)? {
        let d = d.to_u64().expect("divisor of a u64 fits");
        factors.push(normal_factor(q, d, limits)?);
    }
    Ok(stable_product(&factors))
}

/// Exact count of normal elements in the degree-`n` extension, by the
/// closed form: writing `n = p^u * M` with `gcd(M, p) = 1`,
///
/// ```text
/// count = prod_{d | M} [ q^{(p^u - 1) e_d} * (q^{e_d} - 1) ]^{phi(d)/e_d}
/// ```
///
/// where `e_d` is the order of `q` mod `d`. Equals `q^n` times
/// [`normal_density`] exactly; the brute-force oracle confirms it on small
/// fields.
pub fn normal_count_formula(q: u64, n: u64, limits: &Limits) -> Result<BigUint> {
    let pp = PrimePower::new(q)?;
    if n == 0 {
        return Err(Error::Domain("extension degrees start at 1".into()));
    }
    if n as f64 * (q as f64).log2() > 1_000_000.0 {
        return Err(Error::Resource(format!(
            "normal count for q = {q}, n = {n} would span millions of bits"
        )));
    }
    let mut p_part = 1u64;
    let mut coprime_part = n;
    while coprime_part % pp.base() == 0 {
        coprime_part /= pp.base();
        p_part *= pp.base();
    }
    let q_big = BigUint::from(q);
    let mut count = BigUint::one();
    for d in numtheory::divisors(&BigUint::from(coprime_part), limits)? {
        let d = d.to_u64().expect("divisor of a u64 fits");
        let profile = order_profile(q, d, limits)?;
        let e = u32::try_from(profile.order).expect("order bounded by d");
        let repeat_exp = u32::try_from((p_part - 1) * profile.order as u64)
            .map_err(|_| Error::Resource("repeated-factor exponent overflows".into()))?;
        let term = q_big.pow(repeat_exp) * (q_big.pow(e) - 1u32);
        let orbit = u32::try_from(profile.orbit_count)
            .map_err(|_| Error::Resource("orbit count overflows an exponent".into()))?;
        count *= term.pow(orbit);
    }
    Ok(count)
}

/// The moduli `d` at which `q` has multiplicative order exactly `j`
/// (equivalently: `d` divides `q^j - 1` but no earlier `q^i - 1`),
/// together with `sum phi(d)/d` over them and that sum spread per unit
/// of order, floored at one.
#[derive(Clone, Debug, PartialEq)]
pub struct DivisorOrderClass {
    pub order: u64,
    pub members: Vec<BigUint>,
    pub totient_ratio_sum: f64,
    /// `max(1, totient_ratio_sum / order)`. Feeds tail estimates that pay
    /// one unit per order regardless and extra only when the class is fat.
    pub per_order_weight: f64,
}

/// Collects the order-`j` divisor class of `q^j - 1`. Finite for each `j`;
/// for `q >= 4` the totient-ratio sum stays below `q^{j/2}`, which is what
/// makes the normal-density mean bounds close.
pub fn divisor_order_class(q: u64, j: u64, limits: &Limits) -> Result<DivisorOrderClass> {
    PrimePower::new(q)?;
    let q_big = BigUint::from(q);
    let (_, factors) = pow_minus_one(q, j, limits)?;
    let mut members = Vec::new();
    let mut acc = CompensatedSum::default();
    for d in factors.divisors(limits.divisor_cap)? {
        let ord = numtheory::multiplicative_order(&q_big, &d, limits)?;
        if ord == BigUint::from(j) {
            let phi = numtheory::euler_phi(&d, limits)?;
            acc.add(numtheory::ratio_f64(&phi, &d));
            members.push(d);
        }
    }
    members.sort();
    let totient_ratio_sum = acc.value();
    Ok(DivisorOrderClass {
        order: j,
        members,
        totient_ratio_sum,
        per_order_weight: (totient_ratio_sum / j as f64).max(1.0),
    })
}

/// Just the `sum phi(d)/d` part of [`divisor_order_class`].
pub fn order_class_totient_sum(q: u64, j: u64, limits: &Limits) -> Result<f64> {
    Ok(divisor_order_class(q, j, limits)?.totient_ratio_sum)
}

fn require_q_at_least_4(q: u64) -> Result<PrimePower> {
    let pp = PrimePower::new(q)?;
    if q < 4 {
        return Err(Error::Domain(format!(
            "the closed-form normal bounds need q >= 4, got {q}"
        )));
    }
    Ok(pp)
}

/// The window the mean normal-element density is confined to for `q >= 4`:
/// `(1 - 1/q - 1/sqrt(q), 1 - 1/q]`. The upper end is the `d = 1` factor
/// alone; the lower end subtracts the geometric tail that the
/// `q^{j/2}`-bound on [`order_class_totient_sum`] yields.
pub fn normal_mean_bounds(q: u64) -> Result<(f64, f64)> {
    require_q_at_least_4(q)?;
    let qf = q as f64;
    let upper = 1.0 - 1.0 / qf;
    let lower = upper - 1.0 / qf.sqrt();
    Ok((lower, upper))
}

/// Upper bound on the variance of the normal-element density for `q >= 4`:
/// `2/sqrt(q) - 1/q - 2/(q sqrt(q))`. Follows from the mean window, since a
/// `[0, B]`-valued quantity with mean at least `B - s` has variance at most
/// `s (B - s)` and here `B = 1 - 1/q`, `s = 1/sqrt(q)` gives this after
/// expanding (the quoted form keeps the `q^{-3/2}` term, dropping only the
/// positive `q^{-2}` one).
pub fn normal_variance_bound(q: u64) -> Result<f64> {
    require_q_at_least_4(q)?;
    let qf = q as f64;
    Ok(2.0 / qf.sqrt() - 1.0 / qf - 2.0 / (qf * qf.sqrt()))
}

/// A Chebyshev-style consequence of the mean window: among degrees `n <= N`
/// (any `N`), the fraction whose normal-element density is at least
/// `threshold = 1 - 1/q - 1/sqrt(q) - margin` is at least
/// `fraction = 1 - 1/(1 + margin * sqrt(q))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProportionBound {
    pub threshold: f64,
    pub fraction: f64,
}

/// The [`ProportionBound`] at a given positive `margin`, for `q >= 4`.
pub fn proportion_bound(q: u64, margin: f64) -> Result<ProportionBound> {
    require_q_at_least_4(q)?;
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::Domain(format!("margin must be positive, got {margin}")));
    }
    let qf = q as f64;
    Ok(ProportionBound {
        threshold: 1.0 - 1.0 / qf - 1.0 / qf.sqrt() - margin,
        fraction: 1.0 - 1.0 / (1.0 + margin * qf.sqrt()),
    })
}

/// One rung of the vanishing-liminf witness for the primitive density: at
/// every extension degree divisible by `exponent_lcm`, all the primes in
/// `prime_product` divide `q^n - 1`, so the primitive density is at most
/// `bound` there.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessStep {
    pub index: u32,
    /// Product of the first `index` primes not dividing `q`.
    pub prime_product: BigUint,
    /// lcm of the orders of `q` modulo those primes.
    pub exponent_lcm: BigUint,
    /// `prod (1 - 1/l)` over those primes; strictly decreasing in `index`.
    pub bound: f64,
}

/// Builds the first `steps` rungs of the witness showing the primitive
/// density has no positive lower bound along multiples of suitable degrees:
/// each rung adds the next prime `l` not dividing `q`, forces `l | q^n - 1`
/// by taking `n` divisible by the order of `q` mod `l`, and sharpens the
/// ceiling by another factor `1 - 1/l`.
pub fn primitive_mean_witness(q: u64, steps: u32, limits: &Limits) -> Result<Vec<WitnessStep>> {
    PrimePower::new(q)?;
    if steps == 0 {
        return Err(Error::Domain("the witness needs at least one step".into()));
    }
    if steps > 1_000 {
        return Err(Error::Resource(format!(
            "{steps} witness steps would exhaust the prime table"
        )));
    }
    let q_big = BigUint::from(q);
    let mut out = Vec::with_capacity(steps as usize);
    let mut prime_product = BigUint::one();
    let mut exponent_lcm = BigUint::one();
    let mut bound = 1.0f64;
    let mut taken = 0u32;
    for &l in numtheory::prime_table() {
        if q % l as u64 == 0 {
            continue;
        }
        let l_big = BigUint::from(l);
        let ord = numtheory::multiplicative_order(&q_big, &l_big, limits)?;
        prime_product *= &l_big;
        exponent_lcm = exponent_lcm.lcm(&ord);
        bound *= numtheory::ratio_f64(&(&l_big - 1u32), &l_big);
        taken += 1;
        out.push(WitnessStep {
            index: taken,
            prime_product: prime_product.clone(),
            exponent_lcm: exponent_lcm.clone(),
            bound,
        });
        if taken == steps {
            return Ok(out);
        }
    }
    Err(Error::Resource("prime table exhausted".into()))
}

/// The coarsest upper bound on the mean primitive density: the density at
/// any `n` already carries the `d = 1` factor, so the mean cannot exceed
/// [`primitive_factor`] at `d = 1` (that is, `prod (1 - 1/l)` over primes
/// `l` dividing `q - 1`).
pub fn primitive_mean_trivial_upper(q: u64, limits: &Limits) -> Result<f64> {
    PrimePower::new(q)?;
    primitive_factor(q, 1, limits)
}

/// The primitive-element density packaged for the mean-value engine:
/// modulus 1, certified floor 0.05 (comfortably below any per-divisor
/// factor that a feasible factoring budget can reach).
pub fn primitive_density_spec(q: u64, limits: Limits) -> Result<DensityLikeSpec> {
    PrimePower::new(q)?;
    Ok(DensityLikeSpec::new(
        format!("primitive(q={q})"),
        BigUint::one(),
        Some(0.05),
        limits,
        move |d: &BigUint| {
            let d = d.to_u64().ok_or_else(|| {
                Error::Resource(format!("divisor {d} is far past factoring reach"))
            })?;
            primitive_factor(q, d, &limits)
        },
    ))
}

/// The normal-element density packaged for the mean-value engine: modulus
/// `p`, certified floor 0.3 (each factor is at least `(1 - 1/Q)^{Q-1} >
/// 1/e` for `Q = q^e`, because `phi(d) < q^e` when `q` has order `e`
/// mod `d`).
pub fn normal_density_spec(q: u64, limits: Limits) -> Result<DensityLikeSpec> {
    let pp = PrimePower::new(q)?;
    Ok(DensityLikeSpec::new(
        format!("normal(q={q})"),
        BigUint::from(pp.base()),
        Some(0.3),
        limits,
        move |d: &BigUint| normal_factor_big(q, d, &limits),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{self, Ladder};

    fn lim() -> Limits {
        Limits::default()
    }

    #[test]
    fn prime_power_recognition() {
        let pp = PrimePower::new(8).unwrap();
        assert_eq!((pp.value(), pp.base(), pp.exponent()), (8, 2, 3));
        let pp = PrimePower::new(1681).unwrap();
        assert_eq!((pp.base(), pp.exponent()), (41, 2));
        assert!(PrimePower::new(6).is_err());
        assert!(PrimePower::new(1).is_err());
        assert!(PrimePower::new(0).is_err());
    }

    #[test]
    fn primitive_factors_for_q2() {
        // 2^1-1 = 1 has no primes; 2^2-1 = 3 and 2^4-1 = 15 bring in 3 and 5.
        assert_eq!(primitive_factor(2, 1, &lim()).unwrap(), 1.0);
        let g2 = primitive_factor(2, 2, &lim()).unwrap();
        assert!((g2 - 2.0 / 3.0).abs() < 1e-15);
        let g4 = primitive_factor(2, 4, &lim()).unwrap();
        assert!((g4 - 4.0 / 5.0).abs() < 1e-15);
        // 2^3-1 = 7: order of 2 mod 7 is 3.
        let g3 = primitive_factor(2, 3, &lim()).unwrap();
        assert!((g3 - 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn primitive_density_matches_hand_counts() {
        // F_4: phi(3)/3 = 2/3. F_16: phi(15)/15 = 8/15. F_64: phi(63)/63 = 36/63.
        let f2 = primitive_density(2, 2, &lim()).unwrap();
        assert!((f2 - 2.0 / 3.0).abs() < 1e-15);
        let f4 = primitive_density(2, 4, &lim()).unwrap();
        assert!((f4 - 8.0 / 15.0).abs() < 1e-15);
        let f6 = primitive_density(2, 6, &lim()).unwrap();
        assert!((f6 - 36.0 / 63.0).abs() < 1e-15);
        let f1 = primitive_density(2, 1, &lim()).unwrap();
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn primitive_fraction_sits_just_below_density() {
        for (q, n) in [(2u64, 4u64), (3, 3), (5, 2), (9, 2)] {
            let f = primitive_density(q, n, &lim()).unwrap();
            let rho = primitive_fraction(q, n, &lim()).unwrap();
            let gap = f - rho;
            let ceiling = (q as f64).powi(-(n as i32));
            assert!(gap > 0.0, "q={q} n={n}");
            assert!(gap <= ceiling * (1.0 + 1e-12), "q={q} n={n}: {gap} vs {ceiling}");
        }
    }

    #[test]
    fn order_profiles() {
        let p = order_profile(2, 1, &lim()).unwrap();
        assert_eq!((p.order, p.totient, p.orbit_count), (1, 1, 1));
        let p = order_profile(2, 7, &lim()).unwrap();
        assert_eq!((p.order, p.totient, p.orbit_count), (3, 6, 2));
        let p = order_profile(4, 9, &lim()).unwrap();
        // 4 has order 3 mod 9 (4^3 = 64 = 63 + 1).
        assert_eq!((p.order, p.totient, p.orbit_count), (3, 6, 2));
        assert!(order_profile(2, 4, &lim()).is_err());
    }

    #[test]
    fn normal_factors_for_q2() {
        assert_eq!(normal_factor(2, 1, &lim()).unwrap(), 0.5);
        // d = 2 shares a factor with q: forced to 1.
        assert_eq!(normal_factor(2, 2, &lim()).unwrap(), 1.0);
        // d = 3: order 2, phi = 2, one orbit: 1 - 1/4.
        assert_eq!(normal_factor(2, 3, &lim()).unwrap(), 0.75);
        // d = 7: order 3, two orbits: (1 - 1/8)^2.
        let g7 = normal_factor(2, 7, &lim()).unwrap();
        assert!((g7 - (7.0f64 / 8.0).powi(2)).abs() < 1e-15);
        // d = 2047 = 23 * 89: 2 has order 11 mod both, phi = 1936, 176 orbits.
        let g2047 = normal_factor(2, 2047, &lim()).unwrap();
        let want = (2047.0f64 / 2048.0).powi(176);
        assert!((g2047 - want).abs() < 1e-15, "{g2047} vs {want}");
    }

    #[test]
    fn normal_density_small_degrees_over_f2() {
        let want = [0.5, 0.5, 0.375, 0.5, 0.46875, 0.375];
        for (i, &w) in want.iter().enumerate() {
            let n = (i + 1) as u64;
            let got = normal_density(2, n, &lim()).unwrap();
            assert!((got - w).abs() < 1e-12, "mu_2({n}) = {got}, want {w}");
        }
    }

    #[test]
    fn normal_density_strips_the_characteristic_part() {
        let l = lim();
        for n in [3u64, 5, 15] {
            let base = normal_density(2, n, &l).unwrap();
            assert_eq!(normal_density(2, 2 * n, &l).unwrap(), base);
            assert_eq!(normal_density(2, 4 * n, &l).unwrap(), base);
        }
        assert_eq!(
            normal_density(9, 5, &l).unwrap(),
            normal_density(9, 45, &l).unwrap()
        );
    }

    #[test]
    fn normal_count_examples() {
        // F_4 over F_2: 2 normal elements. F_8 over F_2: 3. F_16 over F_2: 8.
        assert_eq!(normal_count_formula(2, 2, &lim()).unwrap(), BigUint::from(2u32));
        assert_eq!(normal_count_formula(2, 3, &lim()).unwrap(), BigUint::from(3u32));
        assert_eq!(normal_count_formula(2, 4, &lim()).unwrap(), BigUint::from(8u32));
        // F_16 over F_4: 12.
        assert_eq!(normal_count_formula(4, 2, &lim()).unwrap(), BigUint::from(12u32));
    }

    #[test]
    fn normal_count_is_density_times_field_size() {
        let l = lim();
        for (q, n) in [(2u64, 6u64), (3, 4), (4, 3), (5, 4), (8, 2), (9, 3)] {
            let count = normal_count_formula(q, n, &l).unwrap();
            let size = BigUint::from(q).pow(n as u32);
            let via_count = numtheory::ratio_f64(&count, &size);
            let density = normal_density(q, n, &l).unwrap();
            assert!(
                (via_count - density).abs() < 1e-12,
                "q={q} n={n}: {via_count} vs {density}"
            );
        }
    }

    #[test]
    fn order_class_sums() {
        assert_eq!(order_class_totient_sum(2, 1, &lim()).unwrap(), 1.0);
        let s2 = order_class_totient_sum(2, 2, &lim()).unwrap();
        assert!((s2 - 2.0 / 3.0).abs() < 1e-15);
        // q = 4, j = 2: d | 15 with order exactly 2: d = 5 (4 has order 2 mod 5)
        // and d = 15 (order lcm(1,2) = 2); d = 3 has order 1.
        let s42 = order_class_totient_sum(4, 2, &lim()).unwrap();
        assert!((s42 - (4.0 / 5.0 + 8.0 / 15.0)).abs() < 1e-14);

        let class = divisor_order_class(4, 2, &lim()).unwrap();
        assert_eq!(class.order, 2);
        assert_eq!(
            class.members,
            vec![BigUint::from(5u32), BigUint::from(15u32)]
        );
        assert_eq!(class.totient_ratio_sum, s42);
        // s/j < 1 here, so the weight floors at one.
        assert_eq!(class.per_order_weight, 1.0);
        // j = 1 over q = 2: members 1 (trivially order 1... order of 2 mod 1 is 1)
        // and the sum includes d = 1 at ratio 1.
        let c1 = divisor_order_class(2, 1, &lim()).unwrap();
        assert_eq!(c1.members, vec![BigUint::from(1u32)]);
        assert_eq!(c1.per_order_weight, 1.0);
    }

    #[test]
    fn mean_bounds_and_variance_examples() {
        let (lo, hi) = normal_mean_bounds(4).unwrap();
        assert!((lo - 0.25).abs() < 1e-15);
        assert!((hi - 0.75).abs() < 1e-15);
        let (lo, hi) = normal_mean_bounds(9).unwrap();
        assert!((lo - (1.0 - 1.0 / 9.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert!((hi - (8.0 / 9.0)).abs() < 1e-15);
        assert!(normal_mean_bounds(3).is_err());
        assert!(normal_mean_bounds(6).is_err());

        assert!((normal_variance_bound(4).unwrap() - 0.5).abs() < 1e-15);
        assert!((normal_variance_bound(16).unwrap() - 0.40625).abs() < 1e-15);
    }

    #[test]
    fn proportion_bound_example() {
        let q = 7u64;
        let margin = 1.0 / (q as f64).sqrt();
        let pb = proportion_bound(q, margin).unwrap();
        assert!((pb.fraction - 0.5).abs() < 1e-15);
        assert!(pb.threshold > 0.0);
        assert!(proportion_bound(7, 0.0).is_err());
    }

    #[test]
    fn witness_over_f2_matches_hand_table() {
        let steps = primitive_mean_witness(2, 6, &lim()).unwrap();
        let products: Vec<u64> = steps
            .iter()
            .map(|s| s.prime_product.to_u64().unwrap())
            .collect();
        assert_eq!(products, vec![3, 15, 105, 1155, 15015, 255255]);
        let lcms: Vec<u64> = steps
            .iter()
            .map(|s| s.exponent_lcm.to_u64().unwrap())
            .collect();
        assert_eq!(lcms, vec![2, 4, 12, 60, 60, 120]);
        let bounds: Vec<f64> = steps.iter().map(|s| s.bound).collect();
        assert!((bounds[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((bounds[1] - 8.0 / 15.0).abs() < 1e-15);
        for w in bounds.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn witness_bound_dominates_density_at_its_degrees() {
        // At n = exponent_lcm the witness's primes all divide q^n - 1, so the
        // true density must sit at or below the advertised ceiling.
        let l = lim();
        for step in primitive_mean_witness(2, 4, &l).unwrap() {
            let n = step.exponent_lcm.to_u64().unwrap();
            let f = primitive_density(2, n, &l).unwrap();
            assert!(
                f <= step.bound + 1e-12,
                "step {}: f_2({n}) = {f} above {}",
                step.index,
                step.bound
            );
        }
    }

    #[test]
    fn trivial_upper_examples() {
        assert_eq!(primitive_mean_trivial_upper(2, &lim()).unwrap(), 1.0);
        assert_eq!(primitive_mean_trivial_upper(3, &lim()).unwrap(), 0.5);
        let u7 = primitive_mean_trivial_upper(7, &lim()).unwrap();
        assert!((u7 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn packaged_specs_run_through_the_engine() {
        let spec = normal_density_spec(4, lim()).unwrap();
        let mut ladder = Ladder::prime_power_lcm(BigUint::from(4u32), lim()).unwrap();
        ladder.extend_to(3).unwrap();
        let a1 = engine::convolution_mean(&spec, &ladder, 1, 1.0).unwrap();
        let a3 = engine::convolution_mean(&spec, &ladder, 3, 1.0).unwrap();
        assert!(a3 <= a1 + 1e-12);
        let (lo, hi) = normal_mean_bounds(4).unwrap();
        assert!(a3 > lo && a3 <= hi + 1e-12, "A_3 = {a3} outside ({lo}, {hi}]");

        let spec = primitive_density_spec(2, lim()).unwrap();
        let mut ladder = Ladder::integer_lcm(lim());
        ladder.extend_to(4).unwrap();
        let a4 = engine::convolution_mean(&spec, &ladder, 4, 1.0).unwrap();
        assert!(a4 > 0.0 && a4 < 1.0);
    }

    #[test]
    fn spec_density_agrees_with_direct_density() {
        let l = lim();
        let spec = normal_density_spec(9, l).unwrap();
        for n in 1u64..=12 {
            // The engine's f leaves out nothing: divisors sharing a factor
            // with q contribute 1, so f over ALL divisors of n equals the
            // density over the p-free part.
            let via_spec = spec.f_value(&BigUint::from(n)).unwrap();
            let direct = normal_density(9, n, &l).unwrap();
            assert!(
                (via_spec - direct).abs() < 1e-12,
                "n = {n}: {via_spec} vs {direct}"
            );
        }
    }
}
