//! Mean values of arithmetic functions of the shape `f(n) = prod_{d | n} g(d)`,
//! where `g` maps into `(0, 1]` and equals 1 on any `d` sharing a factor with a
//! fixed modulus `N`.
//!
//! Such an `f` has a mean value that can be pinned down with *finite* data: along
//! a ladder of moduli `L_1 | L_2 | ...` the convolution averages
//! `(f * phi)(L_t) / L_t` decrease monotonically to the mean, and a truncated
//! logarithmic sum gives a matching lower bound. The [`engine`] module houses
//! that machinery; [`fields`] instantiates it for the densities of primitive
//! and normal elements of finite field extensions; [`oracle`] verifies the
//! closed-form counts by enumerating small fields element by element; and
//! [`numtheory`] supplies the exact integer arithmetic everything rests on.
//!
//! Conventions used throughout:
//! * ladder indices `t` are 1-based,
//! * `f(1) = g(1)` (the empty product convention applies to `n = 1` only via
//!   its single divisor), and
//! * every operation that can factor a large integer takes a [`Limits`]
//!   carrying explicit effort caps, so pathological inputs fail loudly
//!   instead of hanging.

pub mod engine;
pub mod fields;
pub mod numtheory;
pub mod oracle;

use num_bigint::BigUint;

/// Effort caps threaded through every operation that can get expensive.
///
/// The defaults are sized for desk-scale runs: factoring gives up (with an
/// explicit error naming the surviving cofactor) after `factor_budget` rho
/// iterations, divisor materialization refuses counts above `divisor_cap`,
/// field enumeration refuses orders above `enum_cap`, and the full-scan gcd
/// average refuses moduli above `scan_cap`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Total Pollard-rho iterations allowed per `factorize` call.
    pub factor_budget: u64,
    /// Largest divisor count `divisors` will materialize.
    pub divisor_cap: u64,
    /// Largest field order the brute-force oracle will enumerate.
    pub enum_cap: u64,
    /// Largest modulus the gcd-scan average will walk.
    pub scan_cap: u64,
    /// Seed for the deterministic rho parameter sequence.
    pub seed: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            factor_budget: 100_000_000,
            divisor_cap: 1_000_000,
            enum_cap: 1 << 16,
            scan_cap: 1_000_000,
            seed: 0x5EED_BA5E,
        }
    }
}

impl Limits {
    /// Default limits with a different factoring budget.
    pub fn with_factor_budget(budget: u64) -> Self {
        Limits {
            factor_budget: budget,
            ..Limits::default()
        }
    }
}

/// Errors shared by all modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside an operation's domain (zero where positives are required,
    /// a unit with no inverse, a non-prime-power order, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The factoring budget ran out; the unfactored cofactor survives in the
    /// error so the caller can see exactly what resisted.
    #[error("factoring budget of {budget} iterations exhausted; unfactored cofactor {cofactor}")]
    FactorBudget { cofactor: BigUint, budget: u64 },

    /// A materialization or scan would exceed its configured cap.
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// A density function returned a value its own contract forbids.
    #[error("density spec `{label}` violated at d = {d}: {reason}")]
    SpecViolation {
        label: String,
        d: BigUint,
        reason: String,
    },

    /// The operation needs a declared positive lower bound on `g` and the
    /// spec does not carry one.
    #[error("spec `{0}` declares no positive lower bound for g, required here")]
    MissingLowerBound(String),

    /// Two supposedly equal computation paths disagreed beyond tolerance.
    #[error("internal identity violated: {0}")]
    IdentityMismatch(String),
}

/// Shorthand used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
