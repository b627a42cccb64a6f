//! General-purpose optimizers used as a reference point for the iterative
//! bound optimization: Sobol sampling, the Nelder–Mead simplex, and Soblex
//! (simplex seeded by Sobol samples).

mod chart;
mod joe_kuo;
mod simplex;
mod sobol;

pub use chart::{stick_break, stick_unbreak, upper_bound_cost, ModelChart};
pub use joe_kuo::MAX_DIM;
pub use simplex::{nelder_mead, soblex, BoxedObjective, Minimum, SoblexConfig};
pub use sobol::{sobol_points, Sobol};
