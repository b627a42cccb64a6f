//! Conditional-entropy lower bound and perfect-CSI upper bound for the
//! Gauss–Markov fading channel.

use rand_distr::{Distribution, StandardNormal};

use crate::bounds::{BoundEstimate, BoundKind};
use crate::channels::fading::FadingChannel;
use crate::error::{arg, Error, Result};
use crate::rng::stream_rng;
use crate::special::{entropy, normal_interval, normal_quadrature};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyLbConfig {
    /// Conditioning delay `D`.
    pub delay: usize,
    /// Starting Gauss–Hermite node count per gain.
    pub quad_nodes: usize,
    /// Largest node count tried before giving up with a warning.
    pub max_nodes: usize,
    /// Refinement stops once doubling the nodes moves the result less than this (nats).
    pub tol_nats: f64,
}

impl Default for EntropyLbConfig {
    fn default() -> Self {
        Self { delay: 3, quad_nodes: 32, max_nodes: 256, tol_nats: 1e-4 }
    }
}

/// Per-dimension pieces shared by the recursions.
struct Dim<'a> {
    ch: &'a FadingChannel,
    t: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
    amp: f64,
    sn: f64,
    sw: f64,
}

impl Dim<'_> {
    fn bins(&self) -> usize {
        self.t.len() + 1
    }

    fn edge(&self, k: usize) -> (f64, f64) {
        let lo = if k == 0 { f64::NEG_INFINITY } else { self.t[k - 1] };
        let hi = if k == self.t.len() { f64::INFINITY } else { self.t[k] };
        (lo, hi)
    }

    fn pmf(&self, mean: f64, sd: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let (lo, hi) = self.edge(k);
            *o = normal_interval(lo, hi, mean, sd);
        }
    }

    /// `P(y_k..y_D | g_{k-1})` over output words, `y_k` most significant.
    fn tail(&self, xs: &[f64], g_prev: f64) -> Vec<f64> {
        let kb = self.bins();
        let alpha = self.ch.alpha;
        let x = xs[0];
        if xs.len() == 1 {
            // last gain integrated in closed form
            let mut out = vec![0.0; kb];
            let sd = (self.sn * self.sn + self.amp * self.amp * self.sw * self.sw).sqrt();
            self.pmf(x * self.amp * alpha * g_prev, sd, &mut out);
            return out;
        }
        let inner = kb.pow(xs.len() as u32 - 1);
        let mut out = vec![0.0; kb * inner];
        let mut p = vec![0.0; kb];
        for (&zi, &wi) in self.z.iter().zip(&self.w) {
            let g = alpha * g_prev + self.sw * zi;
            self.pmf(x * self.amp * g, self.sn, &mut p);
            let rest = self.tail(&xs[1..], g);
            for (k, &pk) in p.iter().enumerate() {
                let c = wi * pk;
                for (o, r) in out[k * inner..(k + 1) * inner].iter_mut().zip(&rest) {
                    *o += c * r;
                }
            }
        }
        out
    }
}

/// `H(Y_D | Y_1^{D-1}, X_1^D, G_0)` per real dimension with fixed node count.
fn h_lb_dim(ch: &FadingChannel, delay: usize, nodes: usize) -> f64 {
    let (z, w) = normal_quadrature(nodes);
    let dim = Dim {
        ch,
        t: ch.quantizer_dim.thresholds().to_vec(),
        z: z.clone(),
        w: w.clone(),
        amp: ch.es.sqrt(),
        sn: ch.noise_sd(),
        sw: ch.innovation_sd(),
    };
    let kb = dim.bins();
    let sd0 = ch.sigma_g2.sqrt();
    // a mirrored quantizer makes every input word equivalent to all +1
    let words: Vec<Vec<f64>> = if ch.quantizer_dim.is_symmetric() {
        vec![vec![1.0; delay]]
    } else {
        (0..1usize << delay)
            .map(|c| (0..delay).map(|i| if (c >> i) & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect()
    };
    let mut total = 0.0;
    for xs in &words {
        for (&zi, &wi) in z.iter().zip(&w) {
            let joint = dim.tail(xs, sd0 * zi);
            let prefix: Vec<f64> = joint.chunks(kb).map(|c| c.iter().sum()).collect();
            let h_prev = if delay > 1 { entropy(&prefix) } else { 0.0 };
            total += wi * (entropy(&joint) - h_prev);
        }
    }
    total / words.len() as f64
}

/// Lower bound on the conditional entropy rate `H(Y|X)` in nats per use,
/// conditioning on the gain `D` steps back.
///
/// Quadrature nodes double from `quad_nodes` until two successive results
/// agree within `tol_nats`; otherwise the last value carries a warning.
pub fn fading_entropy_lb(ch: &FadingChannel, cfg: &EntropyLbConfig) -> Result<BoundEstimate> {
    if !(1..=3).contains(&cfg.delay) {
        return arg("conditioning delay must be 1, 2 or 3");
    }
    if cfg.quad_nodes < 8 {
        return arg("at least 8 quadrature nodes are required");
    }
    let mut n = cfg.quad_nodes;
    let mut prev = 2.0 * h_lb_dim(ch, cfg.delay, n);
    loop {
        let next_n = 2 * n;
        if next_n > cfg.max_nodes {
            let mut e = BoundEstimate::scalar(BoundKind::HCond, prev, f64::NAN, 0, 0);
            e.warning = Some(format!("quadrature not converged at {n} nodes"));
            return Ok(e);
        }
        let cur = 2.0 * h_lb_dim(ch, cfg.delay, next_n);
        if !cur.is_finite() {
            return Err(Error::Numeric("non-finite entropy bound".into()));
        }
        if (cur - prev).abs() < cfg.tol_nats {
            return Ok(BoundEstimate::scalar(BoundKind::HCond, cur, (cur - prev).abs(), 0, 0));
        }
        prev = cur;
        n = next_n;
    }
}

/// Exact `H(Y|X)` per use for independent gains (`alpha = 0`), in nats.
pub fn memoryless_fading_entropy(ch: &FadingChannel) -> f64 {
    let mut p = vec![0.0; ch.k_dim()];
    ch.quantizer_dim.gaussian_pmf(0.0, ch.sigma_y(), &mut p);
    2.0 * entropy(&p)
}

/// Average over stationary gains of the exact mutual information with the
/// gain known at the receiver, i.u.d. BPSK input, product output alphabet.
pub fn fading_csi_upper(ch: &FadingChannel, n_mc: usize, seed: u64) -> Result<BoundEstimate> {
    if n_mc < 2 {
        return arg("need at least two Monte-Carlo samples");
    }
    let mut rng = stream_rng(seed, 0);
    let k = ch.k_dim();
    let sd = ch.sigma_g2.sqrt();
    let mut pr = [vec![0.0; k], vec![0.0; k]];
    let mut pi = [vec![0.0; k], vec![0.0; k]];
    let mut mix = vec![0.0; k * k];
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..n_mc {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let (gr, gi) = (sd * a, sd * b);
        for (s, x) in [(0usize, 1.0), (1, -1.0)] {
            ch.dim_pmf(gr, x, &mut pr[s]);
            ch.dim_pmf(gi, x, &mut pi[s]);
        }
        for a in 0..k {
            for b in 0..k {
                mix[a * k + b] = 0.5 * (pr[0][a] * pi[0][b] + pr[1][a] * pi[1][b]);
            }
        }
        let h_cond = 0.5 * (entropy(&pr[0]) + entropy(&pi[0]) + entropy(&pr[1]) + entropy(&pi[1]));
        let i = entropy(&mix) - h_cond;
        acc += i;
        acc2 += i * i;
    }
    let n = n_mc as f64;
    let mean = acc / n;
    let var = (acc2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(BoundEstimate::scalar(BoundKind::Csi, mean, (var / n).sqrt(), 0, seed))
}
