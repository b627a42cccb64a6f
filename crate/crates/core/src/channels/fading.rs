//! Quantized Gauss–Markov flat-fading channel with BPSK input.
//!
//! `g_l = alpha g_{l-1} + w_l`, `y_l = g_l x_l sqrt(Es) + n_l`, with real and
//! imaginary parts of `y_l` quantized separately and combined into one
//! product-alphabet index `k_re * K + k_im`.

use rand_distr::{Distribution, StandardNormal};

use crate::channels::pr::draw;
use crate::channels::quantizer::{fading_quantizer, Quantizer};
use crate::channels::window::SampleWindow;
use crate::error::{arg, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::special::bessel_j0;
use crate::trellis::{Alphabet, Source};

#[derive(Debug, Clone)]
pub struct FadingChannel {
    pub alpha: f64,
    pub es: f64,
    pub n0: f64,
    /// Fading power per real dimension.
    pub sigma_g2: f64,
    pub quantizer_dim: Quantizer,
}

impl FadingChannel {
    pub fn new(alpha: f64, es: f64, n0: f64, sigma_g2: f64, quantizer_dim: Quantizer) -> Result<Self> {
        if !(alpha.abs() < 1.0) {
            return arg("fading correlation must satisfy |alpha| < 1");
        }
        if !(es > 0.0 && n0 > 0.0 && sigma_g2 > 0.0) {
            return arg("energies and powers must be positive");
        }
        Ok(Self { alpha, es, n0, sigma_g2, quantizer_dim })
    }

    /// Unit symbol energy, `N0 = 10^(-snr/10)`, `alpha = J0(2 pi fd_t)`,
    /// and the 10-level quantizer scaled by the output deviation.
    pub fn standard(fd_t: f64, snr_db: f64) -> Result<Self> {
        Self::with_alpha(bessel_j0(2.0 * std::f64::consts::PI * fd_t), snr_db)
    }

    pub fn with_alpha(alpha: f64, snr_db: f64) -> Result<Self> {
        let es = 1.0;
        let n0 = 10f64.powf(-snr_db / 10.0);
        let sigma_g2 = 0.5;
        let sigma_y = (sigma_g2 * es + n0 / 2.0).sqrt();
        Self::new(alpha, es, n0, sigma_g2, fading_quantizer(sigma_y))
    }

    pub fn input_alphabet(&self) -> Alphabet {
        Alphabet::bpsk()
    }

    /// Bins per real dimension.
    pub fn k_dim(&self) -> usize {
        self.quantizer_dim.bins()
    }

    pub fn n_outputs(&self) -> usize {
        self.k_dim() * self.k_dim()
    }

    /// Noise deviation per real dimension.
    pub fn noise_sd(&self) -> f64 {
        (self.n0 / 2.0).sqrt()
    }

    /// Innovation deviation per real dimension.
    pub fn innovation_sd(&self) -> f64 {
        (self.sigma_g2 * (1.0 - self.alpha * self.alpha)).sqrt()
    }

    pub fn sigma_y(&self) -> f64 {
        (self.sigma_g2 * self.es + self.n0 / 2.0).sqrt()
    }

    /// Per-dimension output pmf for a known real gain component and input label.
    pub fn dim_pmf(&self, g: f64, x: f64, out: &mut [f64]) {
        self.quantizer_dim.gaussian_pmf(g * x * self.es.sqrt(), self.noise_sd(), out);
    }
}

/// Complex gain process started from the stationary law.
pub struct GainProcess {
    alpha: f64,
    sd0: f64,
    sdw: f64,
    g: Option<(f64, f64)>,
}

impl GainProcess {
    pub fn new(ch: &FadingChannel) -> Self {
        Self { alpha: ch.alpha, sd0: ch.sigma_g2.sqrt(), sdw: ch.innovation_sd(), g: None }
    }

    pub fn step(&mut self, rng: &mut StreamRng) -> (f64, f64) {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        let next = match self.g {
            None => (self.sd0 * a, self.sd0 * b),
            Some((re, im)) => (self.alpha * re + self.sdw * a, self.alpha * im + self.sdw * b),
        };
        self.g = Some(next);
        next
    }
}

/// Gain samples `g_0..g_{n-1}` of one stream.
pub fn simulate_gains(ch: &FadingChannel, n: usize, seed: u64, stream: u64) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, stream);
    let mut p = GainProcess::new(ch);
    (0..n).map(|_| p.step(&mut rng)).collect()
}

pub fn simulate_fading(ch: &FadingChannel, src: &Source, n_half: usize, seed: u64) -> SampleWindow {
    simulate_fading_padded(ch, src, n_half, (0, 0), seed, 0)
}

pub fn simulate_fading_padded(
    ch: &FadingChannel,
    src: &Source,
    n_half: usize,
    pads: (usize, usize),
    seed: u64,
    stream: u64,
) -> SampleWindow {
    let (d1, d2) = pads;
    let total = 2 * n_half + d1 + d2;
    let mut rng = stream_rng(seed, stream);
    let mut gains = GainProcess::new(ch);
    let labels = ch.input_alphabet();
    let k = ch.k_dim();
    let amp = ch.es.sqrt();
    let sd = ch.noise_sd();
    let mut xs = Vec::with_capacity(total);
    let mut ys = Vec::with_capacity(total);
    for _ in 0..total {
        let x = draw(&mut rng, src.pmf());
        let (gr, gi) = gains.step(&mut rng);
        let nr: f64 = StandardNormal.sample(&mut rng);
        let ni: f64 = StandardNormal.sample(&mut rng);
        let xl = labels.label(x);
        let kr = ch.quantizer_dim.quantize(gr * xl * amp + sd * nr);
        let ki = ch.quantizer_dim.quantize(gi * xl * amp + sd * ni);
        xs.push(x);
        ys.push(kr * k + ki);
    }
    let x = xs[d1..d1 + 2 * n_half].to_vec();
    SampleWindow::new(x, ys, d1, d2, seed, 2, k * k).expect("consistent by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::phi;

    fn autocorr(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
        let cov = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n - 1.0);
        cov / var
    }

    #[test]
    fn independent_gains_at_zero_alpha() {
        let ch = FadingChannel::with_alpha(0.0, 10.0).unwrap();
        let g: Vec<f64> = simulate_gains(&ch, 100_000, 4, 0).iter().map(|g| g.0).collect();
        assert!(autocorr(&g).abs() < 4.0 / 100_000f64.sqrt());
    }

    #[test]
    fn unit_fading_power_and_ar1_correlation() {
        let ch = FadingChannel::standard(0.1, 10.0).unwrap();
        assert!((ch.alpha - 0.903_712_642_092_466_3).abs() < 1e-12);
        let g = simulate_gains(&ch, 400_000, 5, 0);
        let power = g.iter().map(|(a, b)| a * a + b * b).sum::<f64>() / g.len() as f64;
        assert!((power - 1.0).abs() < 0.03, "power {power}");
        let re: Vec<f64> = g.iter().map(|g| g.0).collect();
        // AR(1) lag-one autocorrelation equals alpha
        assert!((autocorr(&re) - ch.alpha).abs() < 0.01);
    }

    #[test]
    fn gain_marginal_is_normal() {
        // thinned to make samples nearly independent, then Kolmogorov–Smirnov at 1%
        let ch = FadingChannel::standard(0.1, 0.0).unwrap();
        let g = simulate_gains(&ch, 100 * 20_000, 6, 0);
        let mut re: Vec<f64> = g.iter().step_by(100).map(|g| g.0).collect();
        re.sort_by(f64::total_cmp);
        let n = re.len() as f64;
        let sd = 0.5f64.sqrt();
        let d = re
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = phi(v / sd);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn product_alphabet_and_determinism() {
        let ch = FadingChannel::standard(0.1, 16.0).unwrap();
        assert_eq!(ch.n_outputs(), 100);
        let src = Source::iud(Alphabet::bpsk());
        let a = simulate_fading(&ch, &src, 500, 11);
        assert_eq!(a, simulate_fading(&ch, &src, 500, 11));
        assert!(a.y.iter().all(|&y| y < 100));
        assert!(FadingChannel::with_alpha(1.0, 0.0).is_err());
    }
}
