//! Measurements on solution stores: decay fits, distances to the limit
//! profiles, tail bounds, nonlocal quadratic forms and randomized audits of
//! the functional inequalities behind the decay and compactness estimates.

mod decay;
mod distance;
mod inequalities;
mod random;
mod tail;

pub use decay::{decay_exponent, fourier_splitting_bound, DecayFit};
pub use distance::{renormalized_distance, rescaled_l1_distance};
pub use inequalities::{
    audit_balance, audit_gradient_bound, audit_localized, balance_threshold, check_balance, check_gradient_bound,
    check_localized, hminus1_norm_sq, quadratic_form, BalanceAudit, GradientAudit, IneqReport, Lemma, LocalizedAudit,
    TrialOutcome,
};
pub use random::{random_bump, random_field, trial_rng};
pub use tail::{tail_bound_check, TailFit};
