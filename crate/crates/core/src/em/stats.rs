//! Time-averaged expected branch counts under auxiliary posteriors.

use crate::bounds::EvalPolicy;
use crate::channels::window::SampleWindow;
use crate::error::{arg, Result};
use crate::inference::{visit_posteriors, ModelRef, Mode, StepMetrics};
use crate::trellis::Source;

/// Expected counts per branch (`t1`, `t3`) and per branch and context word
/// (`t2`, `t4`, stored `[b * n_ctx + c]`), divided by the number of steps.
///
/// `t1`/`t2` come from posteriors given the outputs only, `t3`/`t4` from
/// posteriors given inputs and outputs. A pair is empty until accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct TStats {
    pub n_branches: usize,
    pub n_ctx: usize,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub t3: Vec<f64>,
    pub t4: Vec<f64>,
    /// Steps behind `t1`/`t2` and behind `t3`/`t4`.
    pub n_used: (usize, usize),
}

impl TStats {
    pub fn empty(n_branches: usize, n_ctx: usize) -> Self {
        Self { n_branches, n_ctx, t1: vec![], t2: vec![], t3: vec![], t4: vec![], n_used: (0, 0) }
    }

    pub fn has_joint(&self) -> bool {
        !self.t2.is_empty()
    }

    pub fn has_clamped(&self) -> bool {
        !self.t4.is_empty()
    }

    /// Installs a precomputed `t4` (and the implied `t3`).
    pub fn with_t4(mut self, t4: Vec<f64>) -> Result<Self> {
        if t4.len() != self.n_branches * self.n_ctx {
            return arg("t4 table size does not match branches and contexts");
        }
        self.t3 = t4.chunks(self.n_ctx).map(|r| r.iter().sum()).collect();
        self.t4 = t4;
        Ok(self)
    }

    /// Step-weighted merge of two accumulations over disjoint windows.
    pub fn merge(&self, other: &TStats) -> Result<Self> {
        if (self.n_branches, self.n_ctx) != (other.n_branches, other.n_ctx) {
            return arg("cannot merge statistics of different shapes");
        }
        let mix = |a: &[f64], na: usize, b: &[f64], nb: usize| -> Vec<f64> {
            match (a.is_empty(), b.is_empty()) {
                (true, _) => b.to_vec(),
                (_, true) => a.to_vec(),
                _ => {
                    let (wa, wb) = (na as f64, nb as f64);
                    a.iter().zip(b).map(|(x, y)| (x * wa + y * wb) / (wa + wb)).collect()
                }
            }
        };
        let (a, b) = (self.n_used, other.n_used);
        Ok(Self {
            n_branches: self.n_branches,
            n_ctx: self.n_ctx,
            t1: mix(&self.t1, a.0, &other.t1, b.0),
            t2: mix(&self.t2, a.0, &other.t2, b.0),
            t3: mix(&self.t3, a.1, &other.t3, b.1),
            t4: mix(&self.t4, a.1, &other.t4, b.1),
            n_used: (a.0 + b.0, a.1 + b.1),
        })
    }
}

/// Raw per-branch and per-(branch, context) posterior sums over the
/// policy range of every window.
fn accumulate(m: &StepMetrics, windows: &[SampleWindow], policy: &EvalPolicy) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    if windows.is_empty() {
        return arg("need at least one window");
    }
    let nb = m.trellis().n_branches();
    let nc = m.n_ctx();
    let mut tb = vec![0.0; nb];
    let mut tbc = vec![0.0; nb * nc];
    let mut used = 0;
    for w in windows {
        let (lo, hi) = policy.range(w.len());
        used += hi - lo;
        visit_posteriors(m, w, |l, ctx, ids, p| {
            if l < lo || l >= hi {
                return;
            }
            for (&b, &v) in ids.iter().zip(p) {
                tb[b] += v;
                tbc[b * nc + ctx] += v;
            }
        })?;
    }
    if used == 0 {
        return arg("windows leave no steps after burn-in");
    }
    let inv = 1.0 / used as f64;
    tb.iter_mut().chain(tbc.iter_mut()).for_each(|v| *v *= inv);
    Ok((tb, tbc, used))
}

fn metrics(model: ModelRef<'_>, src: &Source, clamped: bool) -> Result<StepMetrics> {
    let mode = match (model, clamped) {
        (ModelRef::Af(_), false) => Mode::AfJoint,
        (ModelRef::Af(_), true) => Mode::AfClamped,
        (ModelRef::Ab(_), false) => Mode::AbJoint,
        (ModelRef::Ab(_), true) => Mode::AbClamped,
    };
    StepMetrics::new(model, src, mode)
}

/// `t1`, `t2` from posteriors given the outputs; the context is `y_l` for a
/// forward model and the context word for a backward one.
pub fn accumulate_t12<'a>(
    model: impl Into<ModelRef<'a>>,
    src: &Source,
    windows: &[SampleWindow],
    policy: &EvalPolicy,
) -> Result<TStats> {
    let m = metrics(model.into(), src, false)?;
    let (t1, t2, used) = accumulate(&m, windows, policy)?;
    let mut s = TStats::empty(m.trellis().n_branches(), m.n_ctx());
    s.t1 = t1;
    s.t2 = t2;
    s.n_used.0 = used;
    Ok(s)
}

/// `t3`, `t4` from posteriors given inputs and outputs.
pub fn accumulate_t34<'a>(
    model: impl Into<ModelRef<'a>>,
    src: &Source,
    windows: &[SampleWindow],
    policy: &EvalPolicy,
) -> Result<TStats> {
    let m = metrics(model.into(), src, true)?;
    let (t3, t4, used) = accumulate(&m, windows, policy)?;
    let mut s = TStats::empty(m.trellis().n_branches(), m.n_ctx());
    s.t3 = t3;
    s.t4 = t4;
    s.n_used.1 = used;
    Ok(s)
}

/// Both pairs from the same windows.
pub fn accumulate_all<'a>(
    model: impl Into<ModelRef<'a>>,
    src: &Source,
    windows: &[SampleWindow],
    policy: &EvalPolicy,
) -> Result<TStats> {
    let model = model.into();
    let a = accumulate_t12(model, src, windows, policy)?;
    let b = accumulate_t34(model, src, windows, policy)?;
    Ok(TStats { t3: b.t3, t4: b.t4, n_used: (a.n_used.0, b.n_used.1), ..a })
}
