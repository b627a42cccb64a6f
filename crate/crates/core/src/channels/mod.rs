//! Original channels: simulators and exact probability tables.

pub mod fading;
pub mod ge;
pub mod pr;
pub mod quantizer;
pub mod window;

pub use fading::{simulate_fading, simulate_fading_padded, FadingChannel};
pub use ge::{simulate_ge, GeChannel};
pub use pr::{pr_conditional_entropy, pr_output_pmf, simulate_pr, simulate_pr_padded, PrChannel};
pub use quantizer::{make_quantizer, Quantizer};
pub use window::SampleWindow;

use crate::error::{Error, Result};
use crate::inference::params::FsmcModel;
use crate::trellis::Source;

/// Any original channel the toolkit can simulate.
#[derive(Debug, Clone)]
pub enum OriginalChannel {
    Pr(PrChannel),
    Ge(GeChannel),
    Fading(FadingChannel),
}

impl OriginalChannel {
    /// Finite-state law; the fading channel has none.
    pub fn fsmc(&self) -> Result<FsmcModel> {
        match self {
            Self::Pr(c) => Ok(c.model()),
            Self::Ge(c) => Ok(c.model()),
            Self::Fading(_) => Err(Error::Unsupported("the fading channel is not finite-state".into())),
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Self::Pr(c) => c.quantizer().bins(),
            Self::Ge(_) => 2,
            Self::Fading(c) => c.n_outputs(),
        }
    }

    /// Simulates one window on random stream `stream` of `seed`.
    pub fn simulate(&self, src: &Source, n_half: usize, pads: (usize, usize), seed: u64, stream: u64) -> SampleWindow {
        match self {
            Self::Pr(c) => simulate_pr_padded(c, src, n_half, pads, seed, stream),
            Self::Ge(c) => {
                let (d1, d2) = pads;
                let (x, y, _) = ge::simulate_ge_states(c, src, d1 + 2 * n_half + d2, seed, stream);
                let x = x[d1..d1 + 2 * n_half].to_vec();
                SampleWindow::new(x, y, d1, d2, seed, 2, 2).expect("consistent by construction")
            }
            Self::Fading(c) => simulate_fading_padded(c, src, n_half, pads, seed, stream),
        }
    }
}
