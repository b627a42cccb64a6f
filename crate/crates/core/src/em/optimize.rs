//! Iterative optimization loops and their traces.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::time::Instant;

use crate::bounds::{eval_diff, eval_lower, eval_upper, BoundEstimate, BoundKind, EvalPolicy, Series};
use crate::channels::window::SampleWindow;
use crate::channels::OriginalChannel;
use crate::em::{accumulate_t12, accumulate_t34, select_gamma, update_diff, update_upper, GammaSchedule, TStats};
use crate::error::{arg, Result};
use crate::inference::{forward_marks, AuxBackwardParams, FsmcModel, StepMetrics};
use crate::trellis::Source;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub bound_bits: f64,
    pub stderr_bits: f64,
    /// `NaN` outside lower-bound runs.
    pub gamma: f64,
    pub wall_ms: f64,
    /// Statistic rows or cells left unchanged in this update.
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptTrace {
    pub kind: BoundKind,
    pub records: Vec<TraceRecord>,
}

impl OptTrace {
    pub fn new(kind: BoundKind) -> Self {
        Self { kind, records: Vec::new() }
    }

    pub fn push(&mut self, est: &BoundEstimate, gamma: f64, wall_ms: f64, kept: usize) {
        let iter = self.records.len();
        self.records.push(TraceRecord {
            iter,
            bound_bits: est.value_bits,
            stderr_bits: est.stderr_bits(),
            gamma,
            wall_ms,
            kept,
        });
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub const CSV_HEADER: &'static str = "iter,bound_bits,stderr_bits,gamma,wall_ms,kept";

    /// Rows under [`OptTrace::CSV_HEADER`], without the header line.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let g = if r.gamma.is_nan() { String::new() } else { r.gamma.to_string() };
            let _ = writeln!(s, "{},{:.9},{:.3e},{},{:.1},{}", r.iter, r.bound_bits, r.stderr_bits, g, r.wall_ms, r.kept);
        }
        s
    }
}

/// Where each iteration's data comes from.
#[derive(Debug, Clone)]
pub enum Windows<'a> {
    /// One window reused by every iteration.
    Fixed(&'a SampleWindow),
    /// A new window per iteration on stream `iter + 1` of `seed`.
    Fresh { channel: &'a OriginalChannel, n_half: usize, pads: (usize, usize), seed: u64 },
}

impl Windows<'_> {
    pub fn get(&self, src: &Source, iter: usize) -> Cow<'_, SampleWindow> {
        match self {
            Windows::Fixed(w) => Cow::Borrowed(*w),
            Windows::Fresh { channel, n_half, pads, seed } => {
                Cow::Owned(channel.simulate(src, *n_half, *pads, *seed, iter as u64 + 1))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptConfig {
    pub max_iters: usize,
    /// Stop once the bound moves less than this many bits ...
    pub tol_bits: f64,
    /// ... for this many consecutive iterations.
    pub patience: usize,
    pub policy: EvalPolicy,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { max_iters: 100, tol_bits: 1e-6, patience: 20, policy: EvalPolicy::default() }
    }
}

impl OptConfig {
    pub fn iters(max_iters: usize) -> Self {
        Self { max_iters, ..Self::default() }
    }
}

/// Final parameters, the trace (record 0 is the starting point) and the
/// final bound.
#[derive(Debug, Clone)]
pub struct OptOutcome<P> {
    pub params: P,
    pub trace: OptTrace,
    pub bound: BoundEstimate,
}

struct Stopper {
    tol: f64,
    patience: usize,
    calm: usize,
    prev: Option<f64>,
}

impl Stopper {
    fn new(cfg: &OptConfig) -> Self {
        Self { tol: cfg.tol_bits, patience: cfg.patience, calm: 0, prev: None }
    }

    fn done(&mut self, v: f64) -> bool {
        if let Some(p) = self.prev {
            if (v - p).abs() < self.tol {
                self.calm += 1;
            } else {
                self.calm = 0;
            }
        }
        self.prev = Some(v);
        self.patience > 0 && self.calm >= self.patience
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Minimizes the upper bound `-(1/n) log (Q W_hat)(y) - h_cond`.
pub fn optimize_upper(
    init: FsmcModel,
    src: &Source,
    windows: &Windows<'_>,
    h_cond: f64,
    cfg: &OptConfig,
) -> Result<OptOutcome<FsmcModel>> {
    let mut trace = OptTrace::new(BoundKind::Upper);
    let mut stop = Stopper::new(cfg);
    let mut params = init;
    let t0 = Instant::now();
    let mut bound = eval_upper(&params, src, &windows.get(src, 0), h_cond, &cfg.policy)?;
    trace.push(&bound, f64::NAN, ms(t0), 0);
    stop.done(bound.value_bits);
    for it in 0..cfg.max_iters {
        let t = Instant::now();
        let w = windows.get(src, it);
        let stats = accumulate_t12(&params, src, std::slice::from_ref(w.as_ref()), &cfg.policy)?;
        let up = update_upper(&params, &stats)?;
        params = up.params;
        let w_eval = windows.get(src, it + 1);
        bound = eval_upper(&params, src, &w_eval, h_cond, &cfg.policy)?;
        trace.push(&bound, f64::NAN, ms(t), up.kept);
        if stop.done(bound.value_bits) {
            break;
        }
    }
    Ok(OptOutcome { params, trace, bound })
}

/// What the difference function is measured against.
#[derive(Debug, Clone, Copy)]
pub enum DiffReference<'a> {
    /// `(1/n) log W(y|x)` from the original finite-state law.
    Model(&'a FsmcModel),
    /// A known conditional entropy rate in nats, for channels without a
    /// finite-state law.
    Entropy(f64),
}

fn diff_bound(aux: &FsmcModel, r: DiffReference<'_>, src: &Source, w: &SampleWindow, p: &EvalPolicy) -> Result<BoundEstimate> {
    match r {
        DiffReference::Model(m) => eval_diff(aux, m, src, w, p),
        DiffReference::Entropy(h) => {
            let marks = p.marks(w.len());
            let cum = forward_marks(&StepMetrics::af(aux, src, true), w, &marks)?;
            let s = Series {
                sums: cum.windows(2).map(|c| c[0] - c[1]).collect(),
                lens: marks.windows(2).map(|m| m[1] - m[0]).collect(),
            };
            Ok(BoundEstimate::from_series(BoundKind::Diff, Series::combine(&[(1.0, &s)], -h), w))
        }
    }
}

/// Minimizes the difference function `(1/n) [log W(y|x) - log W_hat(y|x)]`.
pub fn optimize_diff(
    init: FsmcModel,
    reference: DiffReference<'_>,
    src: &Source,
    windows: &Windows<'_>,
    cfg: &OptConfig,
) -> Result<OptOutcome<FsmcModel>> {
    let mut trace = OptTrace::new(BoundKind::Diff);
    let mut stop = Stopper::new(cfg);
    let mut params = init;
    let t0 = Instant::now();
    let mut bound = diff_bound(&params, reference, src, &windows.get(src, 0), &cfg.policy)?;
    trace.push(&bound, f64::NAN, ms(t0), 0);
    stop.done(bound.value_bits);
    for it in 0..cfg.max_iters {
        let t = Instant::now();
        let w = windows.get(src, it);
        let stats = accumulate_t34(&params, src, std::slice::from_ref(w.as_ref()), &cfg.policy)?;
        let up = update_diff(&params, &stats)?;
        params = up.params;
        bound = diff_bound(&params, reference, src, &windows.get(src, it + 1), &cfg.policy)?;
        trace.push(&bound, f64::NAN, ms(t), up.kept);
        if stop.done(bound.value_bits) {
            break;
        }
    }
    Ok(OptOutcome { params, trace, bound })
}

/// Maximizes the lower bound over the backward metric.
///
/// `fixed_t4` replaces the sampled `t4` when it is known in closed form
/// (data-controllable auxiliary trellis). Candidate updates for every
/// `gamma` are scored on the same window that produced the statistics.
pub fn optimize_lower(
    init: AuxBackwardParams,
    src: &Source,
    windows: &Windows<'_>,
    schedule: &GammaSchedule,
    fixed_t4: Option<&[f64]>,
    cfg: &OptConfig,
) -> Result<OptOutcome<AuxBackwardParams>> {
    if let Some(t4) = fixed_t4 {
        if t4.len() != init.v().len() {
            return arg("fixed t4 does not match the backward model");
        }
    }
    let mut trace = OptTrace::new(BoundKind::Lower);
    let mut stop = Stopper::new(cfg);
    let mut params = init;
    let t0 = Instant::now();
    let mut bound = eval_lower(&params, src, &windows.get(src, 0), &cfg.policy)?;
    trace.push(&bound, f64::NAN, ms(t0), 0);
    stop.done(bound.value_bits);
    for it in 0..cfg.max_iters {
        let t = Instant::now();
        let w = windows.get(src, it);
        let one = std::slice::from_ref(w.as_ref());
        let joint = accumulate_t12(&params, src, one, &cfg.policy)?;
        let stats: TStats = match fixed_t4 {
            Some(t4) => joint.with_t4(t4.to_vec())?,
            None => {
                let c = accumulate_t34(&params, src, one, &cfg.policy)?;
                TStats { t3: c.t3, t4: c.t4, n_used: (joint.n_used.0, c.n_used.1), ..joint }
            }
        };
        let choice = select_gamma(&params, &stats, schedule, src, &w, &cfg.policy)?;
        params = choice.params;
        bound = match windows {
            Windows::Fixed(_) => choice.bound,
            Windows::Fresh { .. } => eval_lower(&params, src, &windows.get(src, it + 1), &cfg.policy)?,
        };
        trace.push(&bound, choice.gamma, ms(t), choice.kept);
        if stop.done(bound.value_bits) {
            break;
        }
    }
    Ok(OptOutcome { params, trace, bound })
}
