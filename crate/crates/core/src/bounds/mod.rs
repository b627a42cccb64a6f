//! Information-rate estimate, auxiliary upper/lower bounds and the
//! difference function, all evaluated on simulated windows.
//!
//! Every estimate is a time average over the window with a burn-in trimmed
//! from both ends. Standard errors come from the spread of block means.

mod fading;

pub use fading::{fading_csi_upper, fading_entropy_lb, memoryless_fading_entropy, EntropyLbConfig};

use std::f64::consts::LN_2;
use std::fmt;

use crate::channels::window::SampleWindow;
use crate::error::{arg, Result};
use crate::inference::{forward_marks, AuxBackwardParams, FsmcModel, StepMetrics};
use crate::trellis::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Rate,
    Upper,
    Lower,
    Diff,
    HCond,
    Csi,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Rate => "rate",
            BoundKind::Upper => "upper",
            BoundKind::Lower => "lower",
            BoundKind::Diff => "diff",
            BoundKind::HCond => "h_cond",
            BoundKind::Csi => "csi",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which steps of a window enter the averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPolicy {
    /// Steps dropped at each end, capped at a tenth of the window.
    pub burn_in: usize,
    /// Nominal block length for standard errors, capped so there are at
    /// least 20 blocks.
    pub block_len: usize,
}

impl Default for EvalPolicy {
    fn default() -> Self {
        Self { burn_in: 1000, block_len: 10_000 }
    }
}

impl EvalPolicy {
    /// No trimming; used on tiny exact instances.
    pub fn untrimmed() -> Self {
        Self { burn_in: 0, block_len: 10_000 }
    }

    /// Half-open step range `[lo, hi)` that is averaged.
    pub fn range(&self, len: usize) -> (usize, usize) {
        let b = self.burn_in.min(len / 10);
        (b, len - b)
    }

    /// Block boundaries inside [`EvalPolicy::range`], nearly equal lengths.
    pub fn marks(&self, len: usize) -> Vec<usize> {
        let (lo, hi) = self.range(len);
        let n = hi - lo;
        let b = self.block_len.min(n / 20).max(1);
        let k = (n / b).max(1);
        (0..=k).map(|i| lo + i * n / k).collect()
    }
}

/// Per-block sums of a per-step quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub sums: Vec<f64>,
    pub lens: Vec<usize>,
}

impl Series {
    /// Block sums of the per-step log weights of a forward pass.
    pub fn forward(m: &StepMetrics, w: &SampleWindow, policy: &EvalPolicy) -> Result<Self> {
        let marks = policy.marks(w.len());
        let cum = forward_marks(m, w, &marks)?;
        Ok(Self {
            sums: cum.windows(2).map(|p| p[1] - p[0]).collect(),
            lens: marks.windows(2).map(|p| p[1] - p[0]).collect(),
        })
    }

    pub fn steps(&self) -> usize {
        self.lens.iter().sum()
    }

    /// `sum_i c_i s_i + per_step`, blockwise; all series share block lengths.
    pub fn combine(terms: &[(f64, &Series)], per_step: f64) -> Self {
        let lens = terms[0].1.lens.clone();
        debug_assert!(terms.iter().all(|(_, s)| s.lens == lens));
        let sums = (0..lens.len())
            .map(|i| terms.iter().map(|(c, s)| c * s.sums[i]).sum::<f64>() + per_step * lens[i] as f64)
            .collect();
        Self { sums, lens }
    }

    pub fn mean(&self) -> f64 {
        self.sums.iter().sum::<f64>() / self.steps() as f64
    }

    /// Standard error of [`Series::mean`] from the spread of block means.
    pub fn stderr(&self) -> f64 {
        let k = self.lens.len();
        if k < 2 {
            return f64::NAN;
        }
        let means: Vec<f64> = self.sums.iter().zip(&self.lens).map(|(s, &l)| s / l as f64).collect();
        let m = means.iter().sum::<f64>() / k as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1) as f64;
        (var / k as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct BoundEstimate {
    pub kind: BoundKind,
    pub value_nats: f64,
    pub value_bits: f64,
    pub stderr_nats: f64,
    pub n_half: usize,
    pub seed: u64,
    /// Block series behind the estimate, when it came from a window.
    pub series: Option<Series>,
    pub warning: Option<String>,
}

impl BoundEstimate {
    pub fn from_series(kind: BoundKind, series: Series, w: &SampleWindow) -> Self {
        let value = series.mean();
        Self {
            kind,
            value_nats: value,
            value_bits: value / LN_2,
            stderr_nats: series.stderr(),
            n_half: w.n_half,
            seed: w.seed,
            series: Some(series),
            warning: None,
        }
    }

    pub fn scalar(kind: BoundKind, value_nats: f64, stderr_nats: f64, n_half: usize, seed: u64) -> Self {
        Self {
            kind,
            value_nats,
            value_bits: value_nats / LN_2,
            stderr_nats,
            n_half,
            seed,
            series: None,
            warning: None,
        }
    }

    pub fn stderr_bits(&self) -> f64 {
        self.stderr_nats / LN_2
    }

    /// `self - other` in bits with a paired standard error when both come
    /// from the same blocks, otherwise the independent combination.
    pub fn minus_bits(&self, other: &BoundEstimate) -> (f64, f64) {
        let d = self.value_bits - other.value_bits;
        match (&self.series, &other.series) {
            (Some(a), Some(b)) if a.lens == b.lens => (d, Series::combine(&[(1.0, a), (-1.0, b)], 0.0).stderr() / LN_2),
            _ => (d, self.stderr_bits().hypot(other.stderr_bits())),
        }
    }
}

fn check_inputs(src: &Source, n_inputs: usize) -> Result<()> {
    if src.alphabet().len() != n_inputs {
        return arg("source alphabet differs from trellis input alphabet");
    }
    Ok(())
}

/// `(1/n) [log W(y|x) - log (QW)(y)]` on the original finite-state model.
pub fn estimate_rate(original: &FsmcModel, src: &Source, w: &SampleWindow, policy: &EvalPolicy) -> Result<BoundEstimate> {
    check_inputs(src, original.trellis().n_inputs())?;
    let c = Series::forward(&StepMetrics::af(original, src, true), w, policy)?;
    let j = Series::forward(&StepMetrics::af(original, src, false), w, policy)?;
    Ok(BoundEstimate::from_series(BoundKind::Rate, Series::combine(&[(1.0, &c), (-1.0, &j)], 0.0), w))
}

/// `-(1/n) log (Q W_hat)(y) - h_cond`, with `h_cond` in nats per use.
pub fn eval_upper(
    aux: &FsmcModel,
    src: &Source,
    w: &SampleWindow,
    h_cond: f64,
    policy: &EvalPolicy,
) -> Result<BoundEstimate> {
    check_inputs(src, aux.trellis().n_inputs())?;
    let j = Series::forward(&StepMetrics::af(aux, src, false), w, policy)?;
    Ok(BoundEstimate::from_series(BoundKind::Upper, Series::combine(&[(-1.0, &j)], -h_cond), w))
}

/// `(1/n) log [V_hat(x|y) / Q(x)]`.
///
/// The clamped pass carries no `Q` factor, so the ratio of clamped to joint
/// sums already equals `V_hat(x|y) / Q(x)`.
pub fn eval_lower(ab: &AuxBackwardParams, src: &Source, w: &SampleWindow, policy: &EvalPolicy) -> Result<BoundEstimate> {
    check_inputs(src, ab.trellis().n_inputs())?;
    let c = Series::forward(&StepMetrics::ab(ab, src, true), w, policy)?;
    let j = Series::forward(&StepMetrics::ab(ab, src, false), w, policy)?;
    Ok(BoundEstimate::from_series(BoundKind::Lower, Series::combine(&[(1.0, &c), (-1.0, &j)], 0.0), w))
}

/// `(1/n) [log W(y|x) - log W_hat(y|x)]`.
pub fn eval_diff(
    aux: &FsmcModel,
    original: &FsmcModel,
    src: &Source,
    w: &SampleWindow,
    policy: &EvalPolicy,
) -> Result<BoundEstimate> {
    check_inputs(src, aux.trellis().n_inputs())?;
    let o = Series::forward(&StepMetrics::af(original, src, true), w, policy)?;
    let a = Series::forward(&StepMetrics::af(aux, src, true), w, policy)?;
    Ok(BoundEstimate::from_series(BoundKind::Diff, Series::combine(&[(1.0, &o), (-1.0, &a)], 0.0), w))
}

/// `-(1/n) log W(y|x)`: sample conditional entropy of the original channel.
pub fn sample_conditional_entropy(
    original: &FsmcModel,
    src: &Source,
    w: &SampleWindow,
    policy: &EvalPolicy,
) -> Result<BoundEstimate> {
    let o = Series::forward(&StepMetrics::af(original, src, true), w, policy)?;
    Ok(BoundEstimate::from_series(BoundKind::HCond, Series::combine(&[(-1.0, &o)], 0.0), w))
}

/// Upper bound, special-case lower bound (`v = W_hat(s|s_p,x) W_hat(y|b)`)
/// and difference function from three shared forward passes.
#[derive(Debug, Clone)]
pub struct SharedBounds {
    /// Upper bound with the sample conditional entropy of the same window.
    pub upper: BoundEstimate,
    pub lower_special: BoundEstimate,
    pub diff: BoundEstimate,
}

pub fn eval_shared(
    aux: &FsmcModel,
    original: &FsmcModel,
    src: &Source,
    w: &SampleWindow,
    policy: &EvalPolicy,
) -> Result<SharedBounds> {
    check_inputs(src, aux.trellis().n_inputs())?;
    let o = Series::forward(&StepMetrics::af(original, src, true), w, policy)?;
    let j = Series::forward(&StepMetrics::af(aux, src, false), w, policy)?;
    let c = Series::forward(&StepMetrics::af(aux, src, true), w, policy)?;
    Ok(SharedBounds {
        upper: BoundEstimate::from_series(BoundKind::Upper, Series::combine(&[(-1.0, &j), (1.0, &o)], 0.0), w),
        lower_special: BoundEstimate::from_series(BoundKind::Lower, Series::combine(&[(1.0, &c), (-1.0, &j)], 0.0), w),
        diff: BoundEstimate::from_series(BoundKind::Diff, Series::combine(&[(1.0, &o), (-1.0, &c)], 0.0), w),
    })
}
