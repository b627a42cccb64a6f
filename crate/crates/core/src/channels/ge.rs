//! Gilbert–Elliott burst-error channel.

use std::sync::Arc;

use rand::Rng;

use crate::channels::pr::draw;
use crate::channels::window::SampleWindow;
use crate::error::{arg, Result};
use crate::inference::params::FsmcModel;
use crate::rng::stream_rng;
use crate::trellis::{build_ge_trellis, Source};

/// Two-state binary symmetric channel; state 0 is good, state 1 bad.
///
/// The crossover probability at step `l` is set by the state `s_{l-1}`
/// before the transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeChannel {
    /// Good to bad.
    pub p_b: f64,
    /// Bad to good.
    pub p_g: f64,
    pub eps_g: f64,
    pub eps_b: f64,
}

impl GeChannel {
    pub fn new(p_b: f64, p_g: f64, eps_g: f64, eps_b: f64) -> Result<Self> {
        if [p_b, p_g, eps_g, eps_b].iter().any(|p| !(0.0..=1.0).contains(p)) {
            return arg("Gilbert–Elliott probabilities must lie in [0, 1]");
        }
        Ok(Self { p_b, p_g, eps_g, eps_b })
    }

    fn flip(&self, s: usize) -> f64 {
        if s == 0 {
            self.p_b
        } else {
            self.p_g
        }
    }

    fn eps(&self, s: usize) -> f64 {
        if s == 0 {
            self.eps_g
        } else {
            self.eps_b
        }
    }

    /// Stationary probability of the good state.
    pub fn good_occupancy(&self) -> f64 {
        self.p_g / (self.p_g + self.p_b)
    }

    pub fn model(&self) -> FsmcModel {
        let t = Arc::new(build_ge_trellis());
        let trans = t
            .branches()
            .iter()
            .map(|b| {
                let f = self.flip(b.s_prev);
                if b.s_next == b.s_prev {
                    1.0 - f
                } else {
                    f
                }
            })
            .collect();
        let out = t
            .branches()
            .iter()
            .flat_map(|b| {
                let e = self.eps(b.s_prev);
                if b.x == 0 {
                    [1.0 - e, e]
                } else {
                    [e, 1.0 - e]
                }
            })
            .collect();
        FsmcModel::new(t, 2, trans, out).expect("rows are normalized")
    }
}

pub fn simulate_ge(ch: &GeChannel, src: &Source, n_half: usize, seed: u64) -> SampleWindow {
    simulate_ge_stream(ch, src, n_half, seed, 0)
}

/// State chain starts in the good state at the first step.
pub fn simulate_ge_stream(ch: &GeChannel, src: &Source, n_half: usize, seed: u64, stream: u64) -> SampleWindow {
    let (x, y, _) = simulate_ge_states(ch, src, 2 * n_half, seed, stream);
    SampleWindow::new(x, y, 0, 0, seed, 2, 2).expect("consistent by construction")
}

/// Inputs, outputs and the state `s_{l-1}` in force at every step.
pub fn simulate_ge_states(
    ch: &GeChannel,
    src: &Source,
    n: usize,
    seed: u64,
    stream: u64,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = stream_rng(seed, stream);
    let mut s = 0usize;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut ss = Vec::with_capacity(n);
    for _ in 0..n {
        let x = draw(&mut rng, src.pmf());
        let err = rng.random::<f64>() < ch.eps(s);
        xs.push(x);
        ys.push(x ^ usize::from(err));
        ss.push(s);
        if rng.random::<f64>() < ch.flip(s) {
            s ^= 1;
        }
    }
    (xs, ys, ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::Alphabet;

    fn src() -> Source {
        Source::iud(Alphabet::binary())
    }

    #[test]
    fn noiseless_copies_input() {
        let ch = GeChannel::new(0.1, 0.3, 0.0, 0.0).unwrap();
        let w = simulate_ge(&ch, &src(), 1000, 1);
        assert_eq!(w.x, w.y);
    }

    #[test]
    fn absorbing_good_state() {
        let ch = GeChannel::new(0.0, 0.5, 0.07, 0.45).unwrap();
        let w = simulate_ge(&ch, &src(), 50_000, 2);
        let rate = w.x.iter().zip(&w.y).filter(|(a, b)| a != b).count() as f64 / 1e5;
        let sd = (0.07f64 * 0.93 / 1e5).sqrt();
        assert!((rate - 0.07).abs() < 4.0 * sd, "rate {rate}");
    }

    #[test]
    fn stationary_occupancy() {
        // two-state chain: pi_good = p_g / (p_g + p_b)
        let ch = GeChannel::new(0.02, 0.08, 0.01, 0.3).unwrap();
        let (_, _, ss) = simulate_ge_states(&ch, &src(), 1_000_000, 3, 0);
        let good = ss.iter().filter(|&&s| s == 0).count() as f64 / ss.len() as f64;
        assert!((good - 0.8).abs() < 0.01, "good {good}");
        assert!((ch.good_occupancy() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn model_tables() {
        let ch = GeChannel::new(0.1, 0.3, 0.05, 0.4).unwrap();
        let m = ch.model();
        let t = m.trellis();
        let b = t.find(1, 1, 0).unwrap();
        assert!((m.trans()[b] - 0.3).abs() < 1e-15);
        assert!((m.out_row(b)[0] - 0.4).abs() < 1e-12);
        assert!(GeChannel::new(1.2, 0.0, 0.0, 0.0).is_err());
    }
}
