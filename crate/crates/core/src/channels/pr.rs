//! Quantized partial-response (intersymbol interference) channels.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channels::quantizer::Quantizer;
use crate::channels::window::SampleWindow;
use crate::error::{arg, Result};
use crate::inference::params::{floor_renormalize, FsmcModel};
use crate::rng::stream_rng;
use crate::special::entropy;
use crate::trellis::{build_pr_trellis, Alphabet, Source, TrellisSection};

/// `y_l = quantize(sum_m h_m x_{l-m} + n_l)` with `n_l ~ Normal(0, sigma^2)`.
#[derive(Debug, Clone)]
pub struct PrChannel {
    h: Vec<f64>,
    sigma: f64,
    quantizer: Quantizer,
    trellis: Arc<TrellisSection>,
    levels: Vec<f64>,
}

impl PrChannel {
    pub fn new(h: Vec<f64>, sigma: f64, quantizer: Quantizer, input: Alphabet) -> Result<Self> {
        if h.is_empty() {
            return arg("need at least one coefficient");
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return arg("noise deviation must be positive");
        }
        let m = h.len() - 1;
        let trellis = Arc::new(build_pr_trellis(m, input)?);
        let levels = branch_levels(&h, &trellis);
        Ok(Self { h, sigma, quantizer, trellis, levels })
    }

    /// Noise set from `SNR = 10 log10(|h|^2 E[X^2] / sigma^2)` under i.u.d. input.
    pub fn from_snr_db(h: Vec<f64>, snr_db: f64, quantizer: Quantizer, input: Alphabet) -> Result<Self> {
        let ex2 = input.labels().iter().map(|a| a * a).sum::<f64>() / input.len() as f64;
        let energy: f64 = h.iter().map(|v| v * v).sum();
        let sigma = (energy * ex2 / 10f64.powf(snr_db / 10.0)).sqrt();
        Self::new(h, sigma, quantizer, input)
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn memory(&self) -> usize {
        self.h.len() - 1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn trellis(&self) -> &Arc<TrellisSection> {
        &self.trellis
    }

    /// Noiseless level `mu_b` of every branch.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Finite-state model with the exact quantized-Gaussian output law.
    pub fn model(&self) -> FsmcModel {
        let out = pr_output_pmf(self);
        FsmcModel::new(self.trellis.clone(), self.quantizer.bins(), vec![1.0; self.levels.len()], out)
            .expect("output rows are normalized")
    }
}

/// Noiseless output of each branch of a PR trellis.
pub fn branch_levels(h: &[f64], trellis: &TrellisSection) -> Vec<f64> {
    let nx = trellis.n_inputs();
    let input = trellis.input();
    trellis
        .branches()
        .iter()
        .map(|b| {
            let mut mu = h[0] * input.label(b.x);
            let mut s = b.s_prev;
            for &hm in &h[1..] {
                mu += hm * input.label(s % nx);
                s /= nx;
            }
            mu
        })
        .collect()
}

/// `W(y=k | b) = Phi((t_k - mu_b)/sigma) - Phi((t_{k-1} - mu_b)/sigma)`, floored and renormalized.
pub fn pr_output_pmf(ch: &PrChannel) -> Vec<f64> {
    gaussian_output_table(&ch.levels, ch.sigma, &ch.quantizer)
}

/// Quantized Gaussian output table for the given per-branch means.
pub fn gaussian_output_table(levels: &[f64], sigma: f64, q: &Quantizer) -> Vec<f64> {
    let k = q.bins();
    let mut out = vec![0.0; levels.len() * k];
    for (row, &mu) in out.chunks_mut(k).zip(levels) {
        q.gaussian_pmf(mu, sigma, row);
        floor_renormalize(row);
    }
    out
}

pub fn simulate_pr(ch: &PrChannel, src: &Source, n_half: usize, seed: u64) -> SampleWindow {
    simulate_pr_padded(ch, src, n_half, (0, 0), seed, 0)
}

/// Simulates `d1 + 2N + d2` uses and keeps the middle `2N` inputs.
///
/// Inputs before the first simulated use are symbol 0, matching trellis
/// state 0. `stream` selects the random stream under `seed`.
pub fn simulate_pr_padded(
    ch: &PrChannel,
    src: &Source,
    n_half: usize,
    pads: (usize, usize),
    seed: u64,
    stream: u64,
) -> SampleWindow {
    let (d1, d2) = pads;
    let total = 2 * n_half + d1 + d2;
    let mut rng = stream_rng(seed, stream);
    let input = ch.trellis.input();
    let m = ch.memory();
    let mut hist = vec![0usize; m + 1];
    let mut xs = Vec::with_capacity(total);
    let mut ys = Vec::with_capacity(total);
    for _ in 0..total {
        let x = draw(&mut rng, src.pmf());
        hist.rotate_right(1);
        hist[0] = x;
        let mu: f64 = ch.h.iter().zip(&hist).map(|(h, &xi)| h * input.label(xi)).sum();
        let n: f64 = StandardNormal.sample(&mut rng);
        xs.push(x);
        ys.push(ch.quantizer.quantize(mu + ch.sigma * n));
    }
    let x = xs[d1..d1 + 2 * n_half].to_vec();
    SampleWindow::new(x, ys, d1, d2, seed, input.len(), ch.quantizer.bins()).expect("consistent by construction")
}

/// Draws an index from a pmf by inversion.
pub(crate) fn draw<R: Rng>(rng: &mut R, pmf: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pmf.len() - 1
}

/// Exact conditional entropy rate `H(Y|X)` in nats under i.u.d. input.
pub fn pr_conditional_entropy(ch: &PrChannel) -> f64 {
    let out = pr_output_pmf(ch);
    let k = ch.quantizer.bins();
    let nb = ch.levels.len();
    out.chunks(k).map(entropy).sum::<f64>() / nb as f64
}

/// CH3 coefficients `(0.5774, -0.5774, -0.5774)`.
pub const CH3: [f64; 3] = [0.5774, -0.5774, -0.5774];
/// EPR4 coefficients `(0.5, 0.5, -0.5, -0.5)`.
pub const EPR4: [f64; 4] = [0.5, 0.5, -0.5, -0.5];

/// Eleven-tap channel `h_i = 1 / (1 + (i - 5)^2)`, `i = 0..=10`.
pub fn eleven_tap() -> Vec<f64> {
    (0..=10).map(|i| 1.0 / (1.0 + ((i as f64) - 5.0).powi(2))).collect()
}
