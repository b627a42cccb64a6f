//! Starting points for the iterative optimizers.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::channels::fading::{simulate_gains, FadingChannel};
use crate::channels::pr::PrChannel;
use crate::em::{update_diff, closed_form_t4_pr, TStats};
use crate::error::{arg, Result};
use crate::inference::{AuxBackwardParams, FsmcModel};
use crate::special::phi;
use crate::trellis::{build_full_trellis, build_pr_trellis, Source, TrellisSection};

/// Partial-response auxiliary model with the first `m_hat + 1` coefficients
/// of the original channel, zero-padded when `m_hat` exceeds its memory.
pub fn truncation(ch: &PrChannel, m_hat: usize) -> Result<FsmcModel> {
    let mut h: Vec<f64> = ch.h().iter().copied().take(m_hat + 1).collect();
    h.resize(m_hat + 1, 0.0);
    let aux = PrChannel::new(h, ch.sigma(), ch.quantizer().clone(), ch.trellis().input().clone())?;
    Ok(aux.model())
}

/// Every auxiliary branch gets the mean of the original output rows;
/// transitions are uniform within each `(s_p, x)` group.
pub fn averaging(original: &FsmcModel, aux: Arc<TrellisSection>) -> Result<FsmcModel> {
    let k = original.n_out();
    let nb = original.trellis().n_branches();
    let mut mean = vec![0.0; k];
    for b in 0..nb {
        mean.iter_mut().zip(original.out_row(b)).for_each(|(m, v)| *m += v / nb as f64);
    }
    let out = (0..aux.n_branches()).flat_map(|_| mean.iter().copied()).collect();
    FsmcModel::from_weights(aux.clone(), k, vec![1.0; aux.n_branches()], out)
}

/// Minimizer of the difference function over partial-response auxiliary
/// models of memory `m_hat`, from the exact `T4`.
pub fn diff_optimized_pr(ch: &PrChannel, m_hat: usize, src: &Source) -> Result<FsmcModel> {
    let t4 = closed_form_t4_pr(ch, m_hat, src)?;
    let prev = truncation(ch, m_hat)?;
    let aux = build_pr_trellis(m_hat, ch.trellis().input().clone())?;
    let stats = TStats::empty(aux.n_branches(), ch.quantizer().bins()).with_t4(t4)?;
    Ok(update_diff(&prev, &stats)?.params)
}

/// `v(b, y^D) = W(s|s_p,x) W(y_l|b)`.
pub fn backward_from(model: &FsmcModel, d1: usize, d2: usize) -> Result<AuxBackwardParams> {
    AuxBackwardParams::from_forward(model, d1, d2)
}

/// Amplitude thresholds splitting a Rayleigh law of scale `sigma` into `k`
/// equally likely bins, and the conditional mean of each bin.
pub fn rayleigh_bins(sigma: f64, k: usize) -> (Vec<f64>, Vec<f64>) {
    let edges: Vec<f64> = (0..=k)
        .map(|i| if i == k { f64::INFINITY } else { sigma * (-2.0 * (1.0 - i as f64 / k as f64).ln()).sqrt() })
        .collect();
    let s2 = 2.0 * sigma * sigma;
    let part = |r: f64| if r.is_finite() { r * (-r * r / s2).exp() } else { 0.0 };
    let cdf = |r: f64| if r.is_finite() { phi(r / sigma) } else { 1.0 };
    let cents = edges
        .windows(2)
        .map(|e| {
            let (a, b) = (e[0], e[1]);
            let m = part(a) - part(b) + sigma * (2.0 * PI).sqrt() * (cdf(b) - cdf(a));
            m * k as f64
        })
        .collect();
    (edges, cents)
}

/// Finite-state model of the fading gain: `k_a` amplitude bins times
/// `k_theta` phase bins on a fully connected trellis.
///
/// State `ia * k_theta + it` stands for the gain at the amplitude-bin
/// centroid and phase `2 pi it / k_theta`. Transitions are counted on
/// `n_steps` simulated gains and do not depend on the input. The output
/// law of a branch uses the gain of its end state.
pub fn natural_fading(ch: &FadingChannel, k_theta: usize, k_a: usize, n_steps: usize, seed: u64) -> Result<FsmcModel> {
    if k_theta == 0 || k_a == 0 {
        return arg("need at least one amplitude and one phase bin");
    }
    if n_steps < 2 {
        return arg("need at least two gain samples");
    }
    let ns = k_theta * k_a;
    let trellis = Arc::new(build_full_trellis(ns, ch.input_alphabet())?);
    let (edges, cents) = rayleigh_bins(ch.sigma_g2.sqrt(), k_a);
    let width = 2.0 * PI / k_theta as f64;
    let state_of = |(re, im): (f64, f64)| {
        let r = re.hypot(im);
        let ia = edges[1..].partition_point(|&e| e <= r).min(k_a - 1);
        let th = im.atan2(re).rem_euclid(2.0 * PI);
        let it = ((th + 0.5 * width) / width).floor() as usize % k_theta;
        ia * k_theta + it
    };
    let mut counts = vec![0.0; ns * ns];
    let gains = simulate_gains(ch, n_steps, seed, 0);
    let mut prev = state_of(gains[0]);
    for &g in &gains[1..] {
        let s = state_of(g);
        counts[prev * ns + s] += 1.0;
        prev = s;
    }
    for row in counts.chunks_mut(ns) {
        if row.iter().sum::<f64>() == 0.0 {
            row.iter_mut().for_each(|v| *v = 1.0);
        }
    }
    let k = ch.k_dim();
    let labels = ch.input_alphabet();
    let mut pr = vec![0.0; k];
    let mut pi = vec![0.0; k];
    let mut trans = Vec::with_capacity(trellis.n_branches());
    let mut out = Vec::with_capacity(trellis.n_branches() * k * k);
    for b in trellis.branches() {
        trans.push(counts[b.s_prev * ns + b.s_next]);
        let (ia, it) = (b.s_next / k_theta, b.s_next % k_theta);
        let th = it as f64 * width;
        let x = labels.label(b.x);
        ch.dim_pmf(cents[ia] * th.cos(), x, &mut pr);
        ch.dim_pmf(cents[ia] * th.sin(), x, &mut pi);
        for a in &pr {
            out.extend(pi.iter().map(|c| a * c));
        }
    }
    FsmcModel::from_weights(trellis, k * k, trans, out)
}
