//! The mean-value machinery for divisor-product functions.
//!
//! A [`DensityLikeSpec`] packages the per-divisor factor `g` together with its
//! modulus `N` (where `gcd(d, N) > 1` forces `g(d) = 1`) and an optional
//! certified lower bound `c` with `g(d) > c > 0`. The induced function is
//! `f(n) = prod_{d | n} g(d)`.
//!
//! A [`Ladder`] is a divisibility chain `L_1 | L_2 | ...` whose coprime
//! coverage grows without bound: every `n <= h_floor(t)` coprime to `N`
//! divides `L_t`. Along such a chain the convolution averages
//!
//! ```text
//! A_t = (f * phi)(L_t) / L_t = (1/L_t) * sum_{r | L_t} f(r) * phi(L_t / r)
//! ```
//!
//! are nonincreasing in `t` and converge to the mean value of `f`; the same
//! quantity with `f^alpha` in place of `f` gives higher moments, and
//! `A_t(2) - A_t(1)^2` estimates the variance. Two cross-checks keep the
//! convolution path honest: a literal gcd scan over `1..=L_t` (equal by
//! rearrangement, feasible for small `L_t`) and the direct divisor-sieve
//! average over `n <= x` (equal in the limit; `window_index` picks the `t`
//! whose `A_t` a given sample size `x` should be compared against).
//!
//! All floating accumulation in this module is compensated (Neumaier
//! summation), so comparisons at 1e-12 relative tolerance measure the math,
//! not the summation order.

use std::collections::HashMap;

use dashmap::DashMap;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::numtheory::{self, Factorization};
use crate::{Error, Limits, Result};

/// Compensated (Neumaier) accumulator.
#[derive(Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn moment_power(f: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        f
    } else if alpha == 2.0 {
        f * f
    } else {
        f.powf(alpha)
    }
}

type GFn = Box<dyn Fn(&BigUint) -> Result<f64> + Send + Sync>;

/// A per-divisor density factor `g` with its modulus and evaluation caches.
///
/// Contract, enforced at every evaluation: `0 < g(d) <= 1`; `g(d) = 1`
/// whenever `gcd(d, N) > 1`; and `g(d) > c` when a lower bound `c` is
/// declared. Violations surface as [`Error::SpecViolation`] naming the
/// offending `d`.
pub struct DensityLikeSpec {
    label: String,
    modulus: BigUint,
    lower_bound: Option<f64>,
    limits: Limits,
    g: GFn,
    g_memo: DashMap<BigUint, f64>,
    f_memo: DashMap<BigUint, f64>,
}

impl std::fmt::Debug for DensityLikeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityLikeSpec")
            .field("label", &self.label)
            .field("modulus", &self.modulus)
            .field("lower_bound", &self.lower_bound)
            .finish_non_exhaustive()
    }
}

impl DensityLikeSpec {
    pub fn new(
        label: impl Into<String>,
        modulus: BigUint,
        lower_bound: Option<f64>,
        limits: Limits,
        g: impl Fn(&BigUint) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        DensityLikeSpec {
            label: label.into(),
            modulus,
            lower_bound,
            limits,
            g: Box::new(g),
            g_memo: DashMap::new(),
            f_memo: DashMap::new(),
        }
    }

    /// `g(d) = 1 - 1/d` on primes, 1 elsewhere; the induced `f` is
    /// `phi(n)/n`, whose mean value is `6/pi^2`.
    pub fn euler_ratio(limits: Limits) -> Self {
        DensityLikeSpec::new("euler-ratio", BigUint::one(), Some(0.4), limits, |d| {
            Ok(match d.to_u64() {
                Some(small) if numtheory::is_prime_u64(small) => 1.0 - 1.0 / small as f64,
                Some(_) => 1.0,
                None => {
                    if numtheory::is_prime(d) {
                        1.0 - numtheory::ratio_f64(&BigUint::one(), d)
                    } else {
                        1.0
                    }
                }
            })
        })
    }

    /// `g` identically 1; the induced `f` is identically 1. Test anchor.
    pub fn constant_one(limits: Limits) -> Self {
        DensityLikeSpec::new("constant-one", BigUint::one(), Some(0.5), limits, |_| Ok(1.0))
    }

    /// `g` identically `c` (0 < c <= 1). Test anchor with closed forms:
    /// `f(n) = c^sigma0(n)`, truncated log mean `ln(c) * H_D`.
    pub fn constant(c: f64, limits: Limits) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Domain(format!("constant spec needs c in (0,1], got {c}")));
        }
        Ok(DensityLikeSpec::new(
            format!("constant({c})"),
            BigUint::one(),
            Some(c * 0.5),
            limits,
            move |_| Ok(c),
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn lower_bound(&self) -> Option<f64> {
        self.lower_bound
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    /// `g(d)` for `d >= 1`, memoized, contract-checked.
    pub fn g_value(&self, d: &BigUint) -> Result<f64> {
        if d.is_zero() {
            return Err(Error::Domain("g is defined on positive integers".into()));
        }
        if let Some(hit) = self.g_memo.get(d) {
            return Ok(*hit);
        }
        let v = (self.g)(d)?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::SpecViolation {
                label: self.label.clone(),
                d: d.clone(),
                reason: format!("g(d) = {v} is outside (0, 1]"),
            });
        }
        if !self.modulus.is_one() && d.gcd(&self.modulus) > BigUint::one() && v != 1.0 {
            return Err(Error::SpecViolation {
                label: self.label.clone(),
                d: d.clone(),
                reason: format!("g(d) = {v} but d shares a factor with the modulus, forcing 1"),
            });
        }
        if let Some(c) = self.lower_bound {
            if v <= c {
                return Err(Error::SpecViolation {
                    label: self.label.clone(),
                    d: d.clone(),
                    reason: format!("g(d) = {v} is at or below the declared bound {c}"),
                });
            }
        }
        self.g_memo.insert(d.clone(), v);
        Ok(v)
    }

    /// `f(n) = prod_{d | n} g(d)` for `n >= 1`, memoized.
    ///
    /// Factors are multiplied directly while all of them exceed 1/2; if any
    /// factor is smaller the whole product moves to log space, so long runs
    /// of small factors cannot quietly degrade.
    pub fn f_value(&self, n: &BigUint) -> Result<f64> {
        if n.is_zero() {
            return Err(Error::Domain("f is defined on positive integers".into()));
        }
        if let Some(hit) = self.f_memo.get(n) {
            return Ok(*hit);
        }
        let ds = numtheory::divisors(n, &self.limits)?;
        let mut gs = Vec::with_capacity(ds.len());
        for d in &ds {
            gs.push(self.g_value(d)?);
        }
        let value = if gs.iter().any(|&g| g < 0.5) {
            let mut acc = CompensatedSum::default();
            for g in &gs {
                acc.add(g.ln());
            }
            acc.value().exp()
        } else {
            gs.iter().product()
        };
        self.f_memo.insert(n.clone(), value);
        Ok(value)
    }
}

/// Which family a [`Ladder`] belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LadderKind {
    /// `L_t = lcm(1, ..., t)`; serves modulus 1; `h_floor(t) = t`.
    IntegerLcm,
    /// `L_t = lcm(q^i - 1 : i <= t)` for a prime power `q = p^m`; serves
    /// modulus `p`. Every `n <= t` coprime to `p` divides `L_t` because the
    /// order of `q` mod `n` is at most `n`, so `h_floor(t) = t`.
    PrimePowerLcm,
    /// Caller-supplied terms with a caller-declared coverage floor.
    Custom,
}

/// A divisibility chain of moduli with growing coprime coverage.
///
/// Terms are materialized on demand (`extend_to`) and carried together with
/// their factorizations, which the lcm construction yields for free.
pub struct Ladder {
    kind: LadderKind,
    label: String,
    q: Option<BigUint>,
    modulus: BigUint,
    limits: Limits,
    terms: Vec<(BigUint, Factorization)>,
    declared_floor: Option<Vec<u64>>,
}

impl Ladder {
    /// The `lcm(1..=t)` ladder.
    pub fn integer_lcm(limits: Limits) -> Ladder {
        Ladder {
            kind: LadderKind::IntegerLcm,
            label: "lcm-integers".into(),
            q: None,
            modulus: BigUint::one(),
            limits,
            terms: vec![(BigUint::one(), Factorization::one())],
            declared_floor: None,
        }
    }

    /// The `lcm(q^i - 1 : i <= t)` ladder for a prime power `q`.
    pub fn prime_power_lcm(q: BigUint, limits: Limits) -> Result<Ladder> {
        let (p, _m) = numtheory::prime_power_base(&q).ok_or_else(|| {
            Error::Domain(format!("{q} is not a prime power"))
        })?;
        let first = &q - 1u32;
        let first_factors = numtheory::factorize(&first, &limits)?;
        Ok(Ladder {
            kind: LadderKind::PrimePowerLcm,
            label: format!("lcm-q-powers(q={q})"),
            q: Some(q),
            modulus: p,
            limits,
            terms: vec![(first, first_factors)],
            declared_floor: None,
        })
    }

    /// A caller-supplied chain. `terms` must be a nonempty divisibility
    /// chain; `floor[t-1]` declares the coverage height of `terms[t-1]`.
    pub fn custom(
        label: impl Into<String>,
        terms: Vec<BigUint>,
        floor: Vec<u64>,
        modulus: BigUint,
        limits: Limits,
    ) -> Result<Ladder> {
        if terms.is_empty() || terms.len() != floor.len() {
            return Err(Error::Domain(
                "custom ladder needs matching nonempty terms and floors".into(),
            ));
        }
        for w in terms.windows(2) {
            if !(&w[1] % &w[0]).is_zero() {
                return Err(Error::Domain(format!(
                    "custom ladder breaks divisibility: {} does not divide {}",
                    w[0], w[1]
                )));
            }
        }
        let mut stored = Vec::with_capacity(terms.len());
        for term in terms {
            let f = numtheory::factorize(&term, &limits)?;
            stored.push((term, f));
        }
        Ok(Ladder {
            kind: LadderKind::Custom,
            label: label.into(),
            q: None,
            modulus,
            limits,
            terms: stored,
            declared_floor: Some(floor),
        })
    }

    pub fn kind(&self) -> &LadderKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The modulus whose coprime integers this ladder covers.
    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    /// Number of materialized terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Materialize terms through index `t` (1-based).
    pub fn extend_to(&mut self, t: usize) -> Result<()> {
        while self.terms.len() < t {
            let next_idx = self.terms.len() + 1;
            let (last, last_f) = self.terms.last().expect("ladder never empty");
            let (value, factors) = match self.kind {
                LadderKind::IntegerLcm => {
                    let step = numtheory::factorize(&BigUint::from(next_idx), &self.limits)?;
                    let merged = last_f.lcm_with(&step);
                    (merged.value(), merged)
                }
                LadderKind::PrimePowerLcm => {
                    let q = self.q.as_ref().expect("q present for prime-power ladder");
                    let new = q.pow(next_idx as u32) - 1u32;
                    let step = numtheory::factorize(&new, &self.limits)?;
                    let merged = last_f.lcm_with(&step);
                    (merged.value(), merged)
                }
                LadderKind::Custom => {
                    return Err(Error::Domain(format!(
                        "custom ladder `{}` has only {} terms",
                        self.label,
                        self.terms.len()
                    )));
                }
            };
            debug_assert!((&value % last).is_zero());
            self.terms.push((value, factors));
        }
        Ok(())
    }

    /// The materialized term `L_t` (1-based).
    pub fn term(&self, t: usize) -> Result<&BigUint> {
        self.checked_index(t).map(|i| &self.terms[i].0)
    }

    /// The factorization carried alongside `L_t`.
    pub fn factorization(&self, t: usize) -> Result<&Factorization> {
        self.checked_index(t).map(|i| &self.terms[i].1)
    }

    fn checked_index(&self, t: usize) -> Result<usize> {
        if t == 0 {
            return Err(Error::Domain("ladder indices are 1-based".into()));
        }
        if t > self.terms.len() {
            return Err(Error::Domain(format!(
                "ladder term {t} not materialized (have {})",
                self.terms.len()
            )));
        }
        Ok(t - 1)
    }

    /// Height through which coprime coverage is guaranteed at index `t`.
    pub fn h_floor(&self, t: usize) -> Result<u64> {
        self.checked_index(t)?;
        Ok(match &self.declared_floor {
            Some(floor) => floor[t - 1],
            None => t as u64,
        })
    }

    /// Finite check of the coverage invariant at index `t`: every
    /// `n <= h_floor(t)` coprime to the modulus divides `L_t`.
    pub fn coverage_holds(&self, t: usize) -> Result<bool> {
        let h = self.h_floor(t)?;
        let l = self.term(t)?;
        for n in 1..=h {
            let n = BigUint::from(n);
            if n.gcd(&self.modulus).is_one() && !(l % &n).is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `A_t = (1/L_t) sum_{r | L_t} f(r)^alpha * phi(L_t / r)`, the ladder's
/// convolution average of `f^alpha` at index `t` (materialized beforehand).
pub fn convolution_mean(
    spec: &DensityLikeSpec,
    ladder: &Ladder,
    t: usize,
    alpha: f64,
) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("moment order must be >= 1, got {alpha}")));
    }
    let l = ladder.term(t)?;
    let factors = ladder.factorization(t)?;
    let lattice = factors.divisor_lattice(ladder.limits.divisor_cap)?;
    let mut acc = CompensatedSum::default();
    for (r, exps) in &lattice {
        let f = spec.f_value(r)?;
        let weight = numtheory::ratio_f64(&factors.phi_of_quotient(exps), l);
        acc.add(moment_power(f, alpha) * weight);
    }
    Ok(acc.value())
}

/// The same average computed the slow way: `(1/L_t) sum_{n=1}^{L_t}
/// f(gcd(n, L_t))^alpha`, walking every residue. Equal to
/// [`convolution_mean`] by rearrangement; kept as an independent check and
/// capped at `Limits::scan_cap`.
pub fn gcd_scan_mean(
    spec: &DensityLikeSpec,
    ladder: &Ladder,
    t: usize,
    alpha: f64,
) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("moment order must be >= 1, got {alpha}")));
    }
    let l = ladder.term(t)?;
    let cap = ladder.limits.scan_cap;
    let l64 = match l.to_u64() {
        Some(v) if v <= cap => v,
        _ => {
            return Err(Error::Resource(format!(
                "gcd scan over L = {l} exceeds cap {cap}"
            )))
        }
    };
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for n in 1..=l64 {
        *counts.entry(n.gcd(&l64)).or_insert(0) += 1;
    }
    let mut acc = CompensatedSum::default();
    for (d, count) in counts {
        let f = spec.f_value(&BigUint::from(d))?;
        acc.add(moment_power(f, alpha) * (count as f64 / l64 as f64));
    }
    Ok(acc.value())
}

/// `(1/x) sum_{n <= x} f(n)^alpha` by divisor sieve: each `d` contributes
/// `ln g(d)` to all of its multiples, one pass, `O(x log x)` additions, never
/// one factorization per `n`. Capped at `Limits::scan_cap`.
pub fn empirical_average(spec: &DensityLikeSpec, x: u64, alpha: f64) -> Result<f64> {
    if x == 0 {
        return Err(Error::Domain("empirical average needs x >= 1".into()));
    }
    if x > spec.limits.scan_cap {
        return Err(Error::Resource(format!(
            "empirical average over x = {x} exceeds cap {}",
            spec.limits.scan_cap
        )));
    }
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("moment order must be >= 1, got {alpha}")));
    }
    let mut log_f = vec![0f64; (x + 1) as usize];
    for d in 1..=x {
        let g = spec.g_value(&BigUint::from(d))?;
        if g < 1.0 {
            let lg = g.ln();
            let mut m = d;
            while m <= x {
                log_f[m as usize] += lg;
                m += d;
            }
        }
    }
    let mut acc = CompensatedSum::default();
    for &lf in &log_f[1..] {
        acc.add((alpha * lf).exp());
    }
    Ok(acc.value() / x as f64)
}

/// The unique (largest) `t` with `L_t^2 <= x`, materializing terms as needed.
/// This is the ladder index whose `A_t` the sample average over `n <= x`
/// tracks. `x` below `L_1^2` is a domain error.
pub fn window_index(ladder: &mut Ladder, x: u64) -> Result<usize> {
    let x = BigUint::from(x);
    let first = ladder.term(1)?;
    if &(first * first) > &x {
        return Err(Error::Domain(format!(
            "sample size {x} is below the square of the first ladder term"
        )));
    }
    let mut t = 1;
    loop {
        if ladder.len() < t + 1 {
            match ladder.extend_to(t + 1) {
                Ok(()) => {}
                Err(Error::Domain(_)) if ladder.kind() == &LadderKind::Custom => {
                    // a finite custom chain ends; its last index wins
                    return Ok(t);
                }
                Err(e) => return Err(e),
            }
        }
        let next = ladder.term(t + 1)?;
        if &(next * next) > &x {
            return Ok(t);
        }
        t += 1;
    }
}

/// Truncated logarithmic mean `sum_{d <= depth} ln g(d') / d'` (writing `d'`
/// for `d`), the finite stand-in for the series whose exponential bounds the
/// mean from below. Requires a declared lower bound on `g`, which is what
/// makes the full series converge.
pub fn truncated_log_mean(spec: &DensityLikeSpec, depth: u64) -> Result<f64> {
    if spec.lower_bound().is_none() {
        return Err(Error::MissingLowerBound(spec.label().into()));
    }
    if depth == 0 {
        return Err(Error::Domain("depth must be >= 1".into()));
    }
    let mut acc = CompensatedSum::default();
    for d in 1..=depth {
        let g = spec.g_value(&BigUint::from(d))?;
        if g < 1.0 {
            acc.add(g.ln() / d as f64);
        }
    }
    Ok(acc.value())
}

/// `exp` of [`truncated_log_mean`]: by the arithmetic-geometric mean
/// inequality every `A_t` at `alpha = 1` sits above the exponential of the
/// full series, and dropping tail terms (each `<= 0`) only raises this
/// truncation, so it must stay below `A_t` up to the tail it ignores.
pub fn geometric_lower_bound(spec: &DensityLikeSpec, depth: u64) -> Result<f64> {
    Ok(truncated_log_mean(spec, depth)?.exp())
}

/// `sum_{d <= y} (1 - g(d)) / d`, the partial deficiency sum whose
/// convergence as `y` grows witnesses that `g` hugs 1 on average.
pub fn deficiency_partial_sum(spec: &DensityLikeSpec, y: u64) -> Result<f64> {
    if y == 0 {
        return Err(Error::Domain("partial sum needs y >= 1".into()));
    }
    let mut acc = CompensatedSum::default();
    for d in 1..=y {
        let g = spec.g_value(&BigUint::from(d))?;
        if g < 1.0 {
            acc.add((1.0 - g) / d as f64);
        }
    }
    Ok(acc.value())
}

/// Evaluates both sides of the product inequality
/// `prod (1 - x_i)^{e_i} >= 1 - sum e_i * x_i` for `x_i` in `[0, 1]`,
/// `e_i >= 1`, returning `(lhs, rhs)`. Empty input yields `(1, 1)`.
pub fn product_lower_bound(xs: &[f64], es: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != es.len() {
        return Err(Error::Domain(format!(
            "mismatched lengths: {} bases vs {} exponents",
            xs.len(),
            es.len()
        )));
    }
    for &x in xs {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("base {x} outside [0, 1]")));
        }
    }
    for &e in es {
        if !(e >= 1.0) {
            return Err(Error::Domain(format!("exponent {e} below 1")));
        }
    }
    let mut lhs = 1.0f64;
    for (&x, &e) in xs.iter().zip(es) {
        lhs *= if e == 1.0 { 1.0 - x } else { (1.0 - x).powf(e) };
    }
    let mut dot = CompensatedSum::default();
    for (&x, &e) in xs.iter().zip(es) {
        dot.add(e * x);
    }
    Ok((lhs, 1.0 - dot.value()))
}

/// `A_t(2) - A_t(1)^2`, the ladder estimate of the variance of `f` at
/// index `t`. Nonnegative up to round-off for any weighted average.
pub fn variance_estimate(spec: &DensityLikeSpec, ladder: &Ladder, t: usize) -> Result<f64> {
    let mean = convolution_mean(spec, ladder, t, 1.0)?;
    let second = convolution_mean(spec, ladder, t, 2.0)?;
    Ok(second - mean * mean)
}

/// One empirical-vs-ladder comparison row inside a [`MeanValueReport`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WindowDiagnostic {
    /// Sample size of the empirical average.
    pub x: u64,
    /// `(1/x) sum_{n <= x} f(n)^alpha`.
    pub empirical: f64,
    /// The ladder index `t` with `L_t^2 <= x < L_{t+1}^2`.
    pub window_t: usize,
    /// `A_{window_t}` at the report's moment order.
    pub ladder_mean: f64,
    /// `|empirical - ladder_mean|`.
    pub gap: f64,
}

/// Everything a mean-value run produces, in one serializable bundle.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MeanValueReport {
    pub spec_label: String,
    pub ladder_label: String,
    /// Moment order of the trajectory.
    pub alpha: f64,
    /// Ladder indices, 1-based, ascending.
    pub t_values: Vec<usize>,
    /// `A_t` at the report's moment order, aligned with `t_values`.
    pub mean_trajectory: Vec<f64>,
    /// Depth used for the truncated logarithmic mean.
    pub log_mean_depth: u64,
    /// `sum_{d <= depth} ln g(d) / d`; `None` when the spec declares no
    /// lower bound.
    pub truncated_log_mean: Option<f64>,
    /// `exp` of the above.
    pub geometric_lower: Option<f64>,
    /// `A_t(2) - A_t(1)^2` at the last trajectory index.
    pub variance_estimate: f64,
    /// Empirical cross-checks, one per requested sample size.
    pub diagnostics: Vec<WindowDiagnostic>,
}

/// Inputs for [`mean_value_report`].
#[derive(Clone, Debug)]
pub struct ReportRequest {
    pub alpha: f64,
    pub t_max: usize,
    pub log_mean_depth: u64,
    pub empirical_xs: Vec<u64>,
}

/// Runs the full pipeline: trajectory, truncated log mean and its
/// exponential, variance at the last index, and one empirical diagnostic per
/// requested sample size.
pub fn mean_value_report(
    spec: &DensityLikeSpec,
    ladder: &mut Ladder,
    req: &ReportRequest,
) -> Result<MeanValueReport> {
    if req.t_max == 0 {
        return Err(Error::Domain("t_max must be >= 1".into()));
    }
    ladder.extend_to(req.t_max)?;
    let t_values: Vec<usize> = (1..=req.t_max).collect();
    let mut mean_trajectory = Vec::with_capacity(req.t_max);
    for &t in &t_values {
        mean_trajectory.push(convolution_mean(spec, ladder, t, req.alpha)?);
    }
    let (truncated, geometric) = if spec.lower_bound().is_some() {
        let tlm = truncated_log_mean(spec, req.log_mean_depth)?;
        (Some(tlm), Some(tlm.exp()))
    } else {
        (None, None)
    };
    let variance = variance_estimate(spec, ladder, req.t_max)?;
    let mut diagnostics = Vec::with_capacity(req.empirical_xs.len());
    for &x in &req.empirical_xs {
        let empirical = empirical_average(spec, x, req.alpha)?;
        let window_t = window_index(ladder, x)?;
        let ladder_mean = convolution_mean(spec, ladder, window_t, req.alpha)?;
        diagnostics.push(WindowDiagnostic {
            x,
            empirical,
            window_t,
            ladder_mean,
            gap: (empirical - ladder_mean).abs(),
        });
    }
    Ok(MeanValueReport {
        spec_label: spec.label().into(),
        ladder_label: ladder.label().into(),
        alpha: req.alpha,
        t_values,
        mean_trajectory,
        log_mean_depth: req.log_mean_depth,
        truncated_log_mean: truncated,
        geometric_lower: geometric,
        variance_estimate: variance,
        diagnostics,
    })
}

impl MeanValueReport {
    /// Structural soundness: trajectory in `[0, 1]` and nonincreasing
    /// (within float slack), the geometric bound below the last mean when
    /// the trajectory is a first moment, variance nonnegative.
    pub fn validate(&self) -> Result<()> {
        if self.t_values.len() != self.mean_trajectory.len() || self.t_values.is_empty() {
            return Err(Error::IdentityMismatch(
                "trajectory and index lists disagree".into(),
            ));
        }
        for &a in &self.mean_trajectory {
            if !(-1e-12..=1.0 + 1e-12).contains(&a) {
                return Err(Error::IdentityMismatch(format!(
                    "trajectory value {a} outside [0, 1]"
                )));
            }
        }
        for w in self.mean_trajectory.windows(2) {
            if w[1] > w[0] + 1e-12 {
                return Err(Error::IdentityMismatch(format!(
                    "trajectory rises from {} to {}",
                    w[0], w[1]
                )));
            }
        }
        if self.alpha == 1.0 {
            if let (Some(geo), Some(&last)) =
                (self.geometric_lower, self.mean_trajectory.last())
            {
                if geo > last + 1e-6 {
                    return Err(Error::IdentityMismatch(format!(
                        "geometric lower bound {geo} exceeds final mean {last}"
                    )));
                }
            }
        }
        if self.variance_estimate < -1e-9 {
            return Err(Error::IdentityMismatch(format!(
                "variance estimate {} is negative",
                self.variance_estimate
            )));
        }
        Ok(())
    }
}
