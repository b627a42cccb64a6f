//! Expectation-maximization style optimization of auxiliary channel models.
//!
//! Each iteration accumulates expected branch counts from forward–backward
//! posteriors on simulated data, then maximizes a surrogate of the bound in
//! closed form.

mod init;
mod optimize;
mod stats;
mod update;
#[cfg(test)]
mod tests;

pub use init::{averaging, backward_from, diff_optimized_pr, natural_fading, rayleigh_bins, truncation};
pub use optimize::{
    optimize_diff, optimize_lower, optimize_upper, DiffReference, OptConfig, OptOutcome, OptTrace, TraceRecord, Windows,
};
pub use stats::{accumulate_all, accumulate_t12, accumulate_t34, TStats};
pub use update::{
    closed_form_t4_pr, select_gamma, update_diff, update_lower, update_upper, GammaChoice, GammaPolicy, GammaSchedule,
    Update,
};
