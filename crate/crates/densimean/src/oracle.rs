//! Brute-force verification on explicitly constructed finite fields.
//!
//! Everything in [`crate::fields`] is closed-form arithmetic; this module is
//! the referee. It builds small fields as explicit quotient rings, walks
//! every element, and counts primitive and normal elements by definition:
//!
//! * a tower `F_p <= K <= E` is materialized as `K = F_p[x]/(F)` and
//!   `E = K[y]/(G)` with `F`, `G` the lexicographically first monic
//!   irreducible polynomials of the requested degrees,
//! * "primitive" is tested by the generator criterion (no proper prime-index
//!   power of the element hits 1), with an even dumber order-by-stepping
//!   path for cross-validation on tiny fields,
//! * "normal over `K`" is tested by Gaussian elimination on the matrix of
//!   Frobenius conjugates, literally checking that the conjugates span.
//!
//! Nothing here shares code with the closed forms it checks: polynomial
//! arithmetic is generic over a minimal [`Field`] trait, fields are walked
//! by index, and the only number theory imported is integer factorization
//! for the generator criterion. Enumerations refuse to start when the field
//! order exceeds `Limits::enum_cap`.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::numtheory;
use crate::{Error, Limits, Result};

/// The little a brute-force enumerator needs from a field: exact arithmetic,
/// and a bijection between elements and `0..order`.
pub trait Field: Clone + Send + Sync {
    type Elem: Clone + PartialEq + Send + Sync + std::fmt::Debug;

    fn order(&self) -> u64;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    /// Multiplicative inverse; `None` exactly for zero.
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;
    /// The `index`-th element; panics when `index >= order`. Index 0 is zero.
    fn element(&self, index: u64) -> Self::Elem;

    fn is_zero(&self, a: &Self::Elem) -> bool {
        *a == self.zero()
    }

    fn neg(&self, a: &Self::Elem) -> Self::Elem {
        let z = self.zero();
        self.sub(&z, a)
    }

    fn pow(&self, a: &Self::Elem, mut e: u64) -> Self::Elem {
        let mut acc = self.one();
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }
}

/// `Z/p` for a prime `p < 2^32`; elements are canonical residues.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u32,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<PrimeField> {
        if !numtheory::is_prime_u64(p) {
            return Err(Error::Domain(format!("{p} is not prime")));
        }
        let p = u32::try_from(p)
            .map_err(|_| Error::Resource(format!("characteristic {p} is past enumeration reach")))?;
        Ok(PrimeField { p })
    }
}

impl Field for PrimeField {
    type Elem = u32;

    fn order(&self) -> u64 {
        self.p as u64
    }

    fn zero(&self) -> u32 {
        0
    }

    fn one(&self) -> u32 {
        1 % self.p
    }

    fn add(&self, a: &u32, b: &u32) -> u32 {
        (((*a as u64) + (*b as u64)) % self.p as u64) as u32
    }

    fn sub(&self, a: &u32, b: &u32) -> u32 {
        (((*a as u64) + self.p as u64 - (*b as u64)) % self.p as u64) as u32
    }

    fn mul(&self, a: &u32, b: &u32) -> u32 {
        (((*a as u64) * (*b as u64)) % self.p as u64) as u32
    }

    fn inv(&self, a: &u32) -> Option<u32> {
        if *a == 0 {
            None
        } else {
            Some(self.pow(a, self.p as u64 - 2))
        }
    }

    fn element(&self, index: u64) -> u32 {
        assert!(index < self.p as u64, "index {index} out of field");
        index as u32
    }
}

// Polynomials are coefficient vectors, little-endian (index = degree), with
// no trailing zeros after `poly_trim`. The zero polynomial is the empty
// vector.

pub fn poly_trim<F: Field>(fld: &F, mut v: Vec<F::Elem>) -> Vec<F::Elem> {
    while v.last().is_some_and(|c| fld.is_zero(c)) {
        v.pop();
    }
    v
}

/// Degree, or `None` for the zero polynomial.
pub fn poly_deg<F: Field>(fld: &F, v: &[F::Elem]) -> Option<usize> {
    v.iter().rposition(|c| !fld.is_zero(c))
}

pub fn poly_add<F: Field>(fld: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    for i in 0..a.len().max(b.len()) {
        let x = a.get(i).cloned().unwrap_or_else(|| fld.zero());
        let y = b.get(i).cloned().unwrap_or_else(|| fld.zero());
        out.push(fld.add(&x, &y));
    }
    poly_trim(fld, out)
}

pub fn poly_sub<F: Field>(fld: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    for i in 0..a.len().max(b.len()) {
        let x = a.get(i).cloned().unwrap_or_else(|| fld.zero());
        let y = b.get(i).cloned().unwrap_or_else(|| fld.zero());
        out.push(fld.sub(&x, &y));
    }
    poly_trim(fld, out)
}

pub fn poly_mul<F: Field>(fld: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![fld.zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if fld.is_zero(x) {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            let prod = fld.mul(x, y);
            out[i + j] = fld.add(&out[i + j], &prod);
        }
    }
    poly_trim(fld, out)
}

/// Remainder of `a` modulo a nonzero `b`.
pub fn poly_rem<F: Field>(fld: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    let db = poly_deg(fld, b).expect("division by the zero polynomial");
    let lead_inv = fld.inv(&b[db]).expect("leading coefficient is nonzero");
    let mut r: Vec<F::Elem> = poly_trim(fld, a.to_vec());
    while let Some(dr) = poly_deg(fld, &r) {
        if dr < db {
            break;
        }
        let scale = fld.mul(&r[dr], &lead_inv);
        let shift = dr - db;
        for (j, c) in b.iter().enumerate().take(db + 1) {
            let sub = fld.mul(&scale, c);
            r[j + shift] = fld.sub(&r[j + shift], &sub);
        }
        r = poly_trim(fld, r);
    }
    r
}

/// Monic gcd (or the zero polynomial when both inputs are zero).
pub fn poly_gcd<F: Field>(fld: &F, a: &[F::Elem], b: &[F::Elem]) -> Vec<F::Elem> {
    let mut a = poly_trim(fld, a.to_vec());
    let mut b = poly_trim(fld, b.to_vec());
    while !b.is_empty() {
        let r = poly_rem(fld, &a, &b);
        a = b;
        b = r;
    }
    if let Some(d) = poly_deg(fld, &a) {
        let inv = fld.inv(&a[d]).expect("nonzero lead");
        for c in &mut a {
            *c = fld.mul(c, &inv);
        }
    }
    a
}

/// `base^e` modulo `m`.
pub fn poly_pow_mod<F: Field>(fld: &F, base: &[F::Elem], mut e: u64, m: &[F::Elem]) -> Vec<F::Elem> {
    let mut acc = vec![fld.one()];
    acc = poly_rem(fld, &acc, m);
    let mut b = poly_rem(fld, base, m);
    while e > 0 {
        if e & 1 == 1 {
            let prod = poly_mul(fld, &acc, &b);
            acc = poly_rem(fld, &prod, m);
        }
        e >>= 1;
        if e > 0 {
            let sq = poly_mul(fld, &b, &b);
            b = poly_rem(fld, &sq, m);
        }
    }
    acc
}

/// Irreducibility of a monic polynomial of degree >= 1 over `fld`, by the
/// distinct-power criterion: `x^{q^n} = x (mod m)` and, for every prime
/// `r | n`, `x^{q^{n/r}} - x` is coprime to `m`.
pub fn poly_is_irreducible<F: Field>(fld: &F, m: &[F::Elem]) -> bool {
    let n = match poly_deg(fld, m) {
        Some(0) | None => return false,
        Some(n) => n,
    };
    let q = fld.order();
    let x = vec![fld.zero(), fld.one()];
    // x^(q^j) mod m for j = 1..=n, each step one q-th powering
    let mut frob = Vec::with_capacity(n);
    let mut h = poly_rem(fld, &x, m);
    for _ in 0..n {
        h = poly_pow_mod(fld, &h, q, m);
        frob.push(h.clone());
    }
    let x_mod = poly_rem(fld, &x, m);
    if frob[n - 1] != x_mod {
        return false;
    }
    let mut k = n;
    let mut prime_parts = Vec::new();
    let mut d = 2;
    while d * d <= k {
        if k % d == 0 {
            prime_parts.push(d);
            while k % d == 0 {
                k /= d;
            }
        }
        d += 1;
    }
    if k > 1 {
        prime_parts.push(k);
    }
    for r in prime_parts {
        let diff = poly_sub(fld, &frob[n / r - 1], &x_mod);
        let g = poly_gcd(fld, &diff, m);
        if poly_deg(fld, &g) != Some(0) {
            return false;
        }
    }
    true
}

/// The lexicographically first monic irreducible of the given degree: lower
/// coefficients are enumerated as base-`order` digits of an ascending index.
pub fn find_irreducible<F: Field>(fld: &F, degree: u32) -> Result<Vec<F::Elem>> {
    if degree == 0 {
        return Err(Error::Domain("irreducibles have degree >= 1".into()));
    }
    let q = fld.order();
    let count = q
        .checked_pow(degree)
        .ok_or_else(|| Error::Resource("candidate space overflows".into()))?;
    for index in 0..count {
        let mut candidate = Vec::with_capacity(degree as usize + 1);
        let mut rest = index;
        for _ in 0..degree {
            candidate.push(fld.element(rest % q));
            rest /= q;
        }
        candidate.push(fld.one());
        if poly_is_irreducible(fld, &candidate) {
            return Ok(candidate);
        }
    }
    unreachable!("every degree has an irreducible polynomial")
}

/// A quotient field `fld[x]/(modulus)`; elements are coefficient vectors of
/// fixed length `degree`.
#[derive(Clone, Debug)]
pub struct PolyQuotient<F: Field> {
    base: F,
    modulus: Vec<F::Elem>,
    degree: u32,
    order: u64,
}

impl<F: Field> PolyQuotient<F> {
    /// Validates that `modulus` is monic irreducible of degree >= 1 and
    /// that the resulting order fits a `u64`.
    pub fn new(base: F, modulus: Vec<F::Elem>) -> Result<PolyQuotient<F>> {
        let deg = match poly_deg(&base, &modulus) {
            Some(d) if d >= 1 => d,
            _ => return Err(Error::Domain("quotient modulus must have degree >= 1".into())),
        };
        if modulus.len() != deg + 1 || modulus[deg] != base.one() {
            return Err(Error::Domain("quotient modulus must be monic and trimmed".into()));
        }
        if !poly_is_irreducible(&base, &modulus) {
            return Err(Error::Domain("quotient modulus is reducible".into()));
        }
        let order = base
            .order()
            .checked_pow(deg as u32)
            .ok_or_else(|| Error::Resource("field order overflows u64".into()))?;
        Ok(PolyQuotient {
            base,
            modulus,
            degree: deg as u32,
            order,
        })
    }

    pub fn base(&self) -> &F {
        &self.base
    }

    pub fn modulus(&self) -> &[F::Elem] {
        &self.modulus
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    fn pad(&self, mut v: Vec<F::Elem>) -> Vec<F::Elem> {
        while v.len() < self.degree as usize {
            v.push(self.base.zero());
        }
        v
    }

    /// Reduce an arbitrary coefficient vector into the quotient.
    pub fn reduce(&self, poly: &[F::Elem]) -> Vec<F::Elem> {
        let r = poly_rem(&self.base, poly, &self.modulus);
        self.pad(r)
    }
}

impl<F: Field> Field for PolyQuotient<F> {
    type Elem = Vec<F::Elem>;

    fn order(&self) -> u64 {
        self.order
    }

    fn zero(&self) -> Vec<F::Elem> {
        vec![self.base.zero(); self.degree as usize]
    }

    fn one(&self) -> Vec<F::Elem> {
        let mut v = self.zero();
        v[0] = self.base.one();
        v
    }

    fn add(&self, a: &Vec<F::Elem>, b: &Vec<F::Elem>) -> Vec<F::Elem> {
        (0..self.degree as usize)
            .map(|i| self.base.add(&a[i], &b[i]))
            .collect()
    }

    fn sub(&self, a: &Vec<F::Elem>, b: &Vec<F::Elem>) -> Vec<F::Elem> {
        (0..self.degree as usize)
            .map(|i| self.base.sub(&a[i], &b[i]))
            .collect()
    }

    fn mul(&self, a: &Vec<F::Elem>, b: &Vec<F::Elem>) -> Vec<F::Elem> {
        let prod = poly_mul(&self.base, a, b);
        self.reduce(&prod)
    }

    fn inv(&self, a: &Vec<F::Elem>) -> Option<Vec<F::Elem>> {
        if self.is_zero(a) {
            None
        } else {
            // the unit group has order `order - 1`
            Some(self.pow(a, self.order - 2))
        }
    }

    fn element(&self, index: u64) -> Vec<F::Elem> {
        assert!(index < self.order, "index {index} out of field");
        let q = self.base.order();
        let mut rest = index;
        let mut v = Vec::with_capacity(self.degree as usize);
        for _ in 0..self.degree {
            v.push(self.base.element(rest % q));
            rest /= q;
        }
        v
    }
}

/// An explicit pair of nested quotients `F_p <= K <= E` with
/// `[K : F_p] = m` and `[E : K] = n`.
pub struct Tower {
    prime: u64,
    base_degree: u32,
    top_degree: u32,
    base_field: PolyQuotient<PrimeField>,
    top_field: PolyQuotient<PolyQuotient<PrimeField>>,
}

/// Elements of a tower's top field: `n` coordinates over the base field.
pub type TowerElem = Vec<Vec<u32>>;

impl Tower {
    /// Builds the tower with the lexicographically first irreducible moduli.
    /// Refuses orders above `limits.enum_cap`.
    pub fn build(p: u64, m: u32, n: u32, limits: &Limits) -> Result<Tower> {
        if m == 0 || n == 0 {
            return Err(Error::Domain("tower degrees start at 1".into()));
        }
        let order = m
            .checked_mul(n)
            .and_then(|mn| p.checked_pow(mn))
            .ok_or_else(|| Error::Resource("tower order overflows u64".into()))?;
        if order > limits.enum_cap {
            return Err(Error::Resource(format!(
                "tower order {order} exceeds the enumeration cap {}",
                limits.enum_cap
            )));
        }
        let prime_field = PrimeField::new(p)?;
        let base_modulus = find_irreducible(&prime_field, m)?;
        let base_field = PolyQuotient::new(prime_field, base_modulus)?;
        let top_modulus = find_irreducible(&base_field, n)?;
        let top_field = PolyQuotient::new(base_field.clone(), top_modulus)?;
        Ok(Tower {
            prime: p,
            base_degree: m,
            top_degree: n,
            base_field,
            top_field,
        })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn base_degree(&self) -> u32 {
        self.base_degree
    }

    pub fn top_degree(&self) -> u32 {
        self.top_degree
    }

    pub fn base_field(&self) -> &PolyQuotient<PrimeField> {
        &self.base_field
    }

    pub fn top_field(&self) -> &PolyQuotient<PolyQuotient<PrimeField>> {
        &self.top_field
    }

    /// The relative Frobenius: raising to the base field's order.
    pub fn frobenius(&self, e: &TowerElem) -> TowerElem {
        self.top_field.pow(e, self.base_field.order())
    }

    /// Whether the Frobenius orbit of `e` spans the top field over the base
    /// field: Gaussian elimination on the n x n matrix of conjugate
    /// coordinates.
    pub fn is_normal(&self, e: &TowerElem) -> bool {
        let n = self.top_degree as usize;
        let k = &self.base_field;
        let mut rows: Vec<TowerElem> = Vec::with_capacity(n);
        let mut c = e.clone();
        for _ in 0..n {
            rows.push(c.clone());
            c = self.frobenius(&c);
        }
        let mut rank = 0usize;
        for col in 0..n {
            let Some(pivot) = (rank..n).find(|&r| !k.is_zero(&rows[r][col])) else {
                return false;
            };
            rows.swap(rank, pivot);
            let inv = k.inv(&rows[rank][col]).expect("pivot is nonzero");
            for j in col..n {
                rows[rank][j] = k.mul(&rows[rank][j], &inv);
            }
            for r in 0..n {
                if r != rank && !k.is_zero(&rows[r][col]) {
                    let factor = rows[r][col].clone();
                    for j in col..n {
                        let scaled = k.mul(&factor, &rows[rank][j]);
                        rows[r][j] = k.sub(&rows[r][j], &scaled);
                    }
                }
            }
            rank += 1;
        }
        rank == n
    }

    /// Count of normal elements of the top field over the base field, by
    /// walking every element.
    pub fn count_normal(&self) -> u64 {
        let mut count = 0;
        for i in 0..self.top_field.order() {
            if self.is_normal(&self.top_field.element(i)) {
                count += 1;
            }
        }
        count
    }
}

/// Count of generators of the multiplicative group, by the generator
/// criterion: `e` generates iff no power `(order-1)/r` for prime `r`
/// collapses it to 1. Walks every nonzero element.
pub fn count_primitive<F: Field>(fld: &F, limits: &Limits) -> Result<u64> {
    if fld.order() > limits.enum_cap {
        return Err(Error::Resource(format!(
            "field order {} exceeds the enumeration cap {}",
            fld.order(),
            limits.enum_cap
        )));
    }
    let group = fld.order() - 1;
    let prime_indices: Vec<u64> = if group == 1 {
        Vec::new()
    } else {
        numtheory::factorize(&BigUint::from(group), limits)?
            .entries()
            .iter()
            .map(|(p, _)| p.to_u64().expect("divides a u64"))
            .collect()
    };
    let one = fld.one();
    let mut count = 0;
    for i in 1..fld.order() {
        let e = fld.element(i);
        if prime_indices
            .iter()
            .all(|&r| fld.pow(&e, group / r) != one)
        {
            count += 1;
        }
    }
    Ok(count)
}

/// The multiplicative order of a nonzero element, by stepping. Quadratic in
/// the field order over a full count; only for cross-validation on tiny
/// fields.
pub fn multiplicative_order_naive<F: Field>(fld: &F, e: &F::Elem) -> Result<u64> {
    if fld.is_zero(e) {
        return Err(Error::Domain("zero has no multiplicative order".into()));
    }
    let one = fld.one();
    let mut acc = e.clone();
    let mut ord = 1;
    while acc != one {
        acc = fld.mul(&acc, e);
        ord += 1;
    }
    Ok(ord)
}

/// [`count_primitive`] by the dumbest route: step out each element's order.
pub fn count_primitive_naive<F: Field>(fld: &F) -> Result<u64> {
    let group = fld.order() - 1;
    let mut count = 0;
    for i in 1..fld.order() {
        if multiplicative_order_naive(fld, &fld.element(i))? == group {
            count += 1;
        }
    }
    Ok(count)
}

/// The number of residues modulo a monic `modulus` (degree >= 1) that are
/// coprime to it: the polynomial analogue of Euler's totient, by walking
/// all `order^deg` residues.
pub fn coprime_residue_count<F: Field>(
    fld: &F,
    modulus: &[F::Elem],
    limits: &Limits,
) -> Result<u64> {
    let deg = match poly_deg(fld, modulus) {
        Some(d) if d >= 1 => d as u32,
        _ => return Err(Error::Domain("modulus must have degree >= 1".into())),
    };
    let residues = fld
        .order()
        .checked_pow(deg)
        .filter(|&r| r <= limits.enum_cap)
        .ok_or_else(|| {
            Error::Resource(format!(
                "residue count for degree {deg} exceeds the enumeration cap"
            ))
        })?;
    let q = fld.order();
    let mut count = 0;
    for index in 0..residues {
        let mut poly = Vec::with_capacity(deg as usize);
        let mut rest = index;
        for _ in 0..deg {
            poly.push(fld.element(rest % q));
            rest /= q;
        }
        let poly = poly_trim(fld, poly);
        let g = poly_gcd(fld, &poly, modulus);
        if poly_deg(fld, &g) == Some(0) {
            count += 1;
        }
    }
    Ok(count)
}
