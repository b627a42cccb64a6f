//! Scaled forward–backward recursions on a trellis section.
//!
//! Forward vectors are renormalized at every step and the log scale
//! factors accumulated separately. Branches are visited in ascending id so
//! results are bit-reproducible.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::channels::window::SampleWindow;
use crate::error::{arg, Error, Result};
use crate::inference::params::{AuxBackwardParams, FsmcModel};
use crate::trellis::{Source, TrellisSection};

/// Largest `steps * states` for which forward vectors are stored.
pub const MAX_STORED: usize = 1 << 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `Q(x) W(s|s_p,x) W(y|b)`
    AfJoint,
    /// `W(s|s_p,x) W(y|b)` on branches with `x(b) = x_l`
    AfClamped,
    /// `Q(x) v(b, y^D)`
    AbJoint,
    /// `v(b, y^D)` on branches with `x(b) = x_l`
    AbClamped,
}

impl Mode {
    pub fn clamped(self) -> bool {
        matches!(self, Mode::AfClamped | Mode::AbClamped)
    }

    pub fn backward(self) -> bool {
        matches!(self, Mode::AbJoint | Mode::AbClamped)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ModelRef<'a> {
    Af(&'a FsmcModel),
    Ab(&'a AuxBackwardParams),
}

impl<'a> From<&'a FsmcModel> for ModelRef<'a> {
    fn from(m: &'a FsmcModel) -> Self {
        ModelRef::Af(m)
    }
}

impl<'a> From<&'a AuxBackwardParams> for ModelRef<'a> {
    fn from(m: &'a AuxBackwardParams) -> Self {
        ModelRef::Ab(m)
    }
}

/// Branch weights per context word, ready for the recursions.
#[derive(Debug, Clone)]
pub struct StepMetrics {
    mode: Mode,
    trellis: Arc<TrellisSection>,
    n_out: usize,
    n_ctx: usize,
    d1: usize,
    d2: usize,
    /// `table[ctx * nb + b]`
    table: Vec<f64>,
    prev: Vec<usize>,
    next: Vec<usize>,
    all: Vec<usize>,
}

impl StepMetrics {
    pub fn new(model: ModelRef<'_>, src: &Source, mode: Mode) -> Result<Self> {
        match model {
            ModelRef::Af(m) if !mode.backward() => Ok(Self::af(m, src, mode.clamped())),
            ModelRef::Ab(p) if mode.backward() => Ok(Self::ab(p, src, mode.clamped())),
            _ => arg(format!("mode {mode:?} does not match the parameter kind")),
        }
    }

    pub fn af(model: &FsmcModel, src: &Source, clamped: bool) -> Self {
        let t = model.trellis_arc().clone();
        let nb = t.n_branches();
        let k = model.n_out();
        let mut table = vec![0.0; k * nb];
        for y in 0..k {
            for b in 0..nb {
                let q = if clamped { 1.0 } else { src.prob(t.branch(b).x) };
                table[y * nb + b] = q * model.weight(b, y);
            }
        }
        let mode = if clamped { Mode::AfClamped } else { Mode::AfJoint };
        Self::assemble(mode, t, k, k, 0, 0, table)
    }

    pub fn ab(params: &AuxBackwardParams, src: &Source, clamped: bool) -> Self {
        let t = params.trellis_arc().clone();
        let nb = t.n_branches();
        let n_ctx = params.n_ctx();
        let mut table = vec![0.0; n_ctx * nb];
        for c in 0..n_ctx {
            for b in 0..nb {
                let q = if clamped { 1.0 } else { src.prob(t.branch(b).x) };
                table[c * nb + b] = q * params.get(b, c);
            }
        }
        let mode = if clamped { Mode::AbClamped } else { Mode::AbJoint };
        Self::assemble(mode, t, params.n_out(), n_ctx, params.d1(), params.d2(), table)
    }

    fn assemble(
        mode: Mode,
        trellis: Arc<TrellisSection>,
        n_out: usize,
        n_ctx: usize,
        d1: usize,
        d2: usize,
        table: Vec<f64>,
    ) -> Self {
        let prev = trellis.branches().iter().map(|b| b.s_prev).collect();
        let next = trellis.branches().iter().map(|b| b.s_next).collect();
        let all = (0..trellis.n_branches()).collect();
        Self { mode, trellis, n_out, n_ctx, d1, d2, table, prev, next, all }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn trellis(&self) -> &TrellisSection {
        &self.trellis
    }

    pub fn n_ctx(&self) -> usize {
        self.n_ctx
    }

    pub fn widths(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    /// Weight of branch `b` under context word `ctx`.
    pub fn weight(&self, ctx: usize, b: usize) -> f64 {
        self.table[ctx * self.trellis.n_branches() + b]
    }

    /// Context word of step `l`.
    pub fn context(&self, w: &SampleWindow, l: usize) -> usize {
        w.context(l, self.d1, self.d2)
    }

    /// Branch ids carrying nonzero weight at step `l`.
    pub fn active(&self, w: &SampleWindow, l: usize) -> &[usize] {
        if self.mode.clamped() {
            self.trellis.with_input(w.x[l])
        } else {
            &self.all
        }
    }

    pub fn check(&self, w: &SampleWindow) -> Result<()> {
        if w.n_inputs != self.trellis.n_inputs() {
            return arg("window input alphabet differs from trellis");
        }
        if w.n_outputs != self.n_out {
            return arg(format!("window has {} outputs, model expects {}", w.n_outputs, self.n_out));
        }
        w.require_pads(self.d1, self.d2)
    }

    fn contexts(&self, w: &SampleWindow) -> Vec<usize> {
        (0..w.len()).map(|l| self.context(w, l)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct PosteriorMarginals {
    pub n_branches: usize,
    /// `probs[l * n_branches + b]`
    pub probs: Vec<f64>,
    pub log_z: f64,
}

impl PosteriorMarginals {
    pub fn step(&self, l: usize) -> &[f64] {
        &self.probs[l * self.n_branches..(l + 1) * self.n_branches]
    }

    pub fn steps(&self) -> usize {
        self.probs.len() / self.n_branches.max(1)
    }
}

const FLUSH_LO: f64 = 1e-200;
const FLUSH_HI: f64 = 1e200;

struct Forward {
    marks: Vec<f64>,
    total: f64,
    alphas: Option<Vec<f64>>,
}

fn forward(m: &StepMetrics, w: &SampleWindow, marks: &[usize], store: bool) -> Result<Forward> {
    m.check(w)?;
    let n = w.len();
    let ns = m.trellis.n_states();
    let nb = m.trellis.n_branches();
    if marks.windows(2).any(|p| p[0] > p[1]) || marks.last().is_some_and(|&v| v > n) {
        return arg("marks must be sorted and within the window");
    }
    if store && n.saturating_mul(ns) > MAX_STORED {
        return Err(Error::Capacity(format!("{n} steps x {ns} states exceeds stored-vector limit")));
    }
    let mut alphas = if store { Some(Vec::with_capacity(n * ns)) } else { None };
    let mut a = vec![0.0; ns];
    a[0] = 1.0;
    let mut a_new = vec![0.0; ns];
    let mut log = 0.0;
    let mut prod: f64 = 1.0;
    let mut out_marks = Vec::with_capacity(marks.len());
    let mut mi = 0;
    for l in 0..n {
        while mi < marks.len() && marks[mi] == l {
            log += prod.ln();
            prod = 1.0;
            out_marks.push(log);
            mi += 1;
        }
        if let Some(st) = alphas.as_mut() {
            st.extend_from_slice(&a);
        }
        let ctx = m.context(w, l);
        let row = &m.table[ctx * nb..(ctx + 1) * nb];
        a_new.iter_mut().for_each(|v| *v = 0.0);
        for &b in m.active(w, l) {
            a_new[m.next[b]] += a[m.prev[b]] * row[b];
        }
        let c: f64 = a_new.iter().sum();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Numeric(format!("step {l}: forward mass {c}")));
        }
        let inv = 1.0 / c;
        for (dst, src) in a.iter_mut().zip(&a_new) {
            *dst = src * inv;
        }
        prod *= c;
        if !(FLUSH_LO..=FLUSH_HI).contains(&prod) {
            log += prod.ln();
            prod = 1.0;
        }
    }
    log += prod.ln();
    while mi < marks.len() {
        out_marks.push(log);
        mi += 1;
    }
    Ok(Forward { marks: out_marks, total: log, alphas })
}

/// Log of the total weight of all branch sequences starting in state 0 (nats).
pub fn forward_logz(m: &StepMetrics, w: &SampleWindow) -> Result<f64> {
    Ok(forward(m, w, &[], false)?.total)
}

/// Cumulative log weight of the first `marks[i]` steps, for each mark.
pub fn forward_marks(m: &StepMetrics, w: &SampleWindow, marks: &[usize]) -> Result<Vec<f64>> {
    Ok(forward(m, w, marks, false)?.marks)
}

/// Runs forward–backward and hands each step's branch posteriors to `visit`
/// in descending step order as `(l, ctx, ids, probs)`, where `probs[i]`
/// belongs to branch `ids[i]`. Returns the log weight.
pub fn visit_posteriors<F>(m: &StepMetrics, w: &SampleWindow, mut visit: F) -> Result<f64>
where
    F: FnMut(usize, usize, &[usize], &[f64]),
{
    let fw = forward(m, w, &[], true)?;
    let alphas = fw.alphas.expect("stored");
    let ns = m.trellis.n_states();
    let nb = m.trellis.n_branches();
    let mut beta = vec![1.0; ns];
    let mut beta_new = vec![0.0; ns];
    let mut probs = vec![0.0; nb];
    let ctxs = m.contexts(w);
    for l in (0..w.len()).rev() {
        let a = &alphas[l * ns..(l + 1) * ns];
        let ids = m.active(w, l);
        let row = &m.table[ctxs[l] * nb..(ctxs[l] + 1) * nb];
        beta_new.iter_mut().for_each(|v| *v = 0.0);
        let mut total = 0.0;
        for (i, &b) in ids.iter().enumerate() {
            let g = row[b] * beta[m.next[b]];
            let p = a[m.prev[b]] * g;
            probs[i] = p;
            total += p;
            beta_new[m.prev[b]] += g;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numeric(format!("step {l}: posterior mass {total}")));
        }
        let inv = 1.0 / total;
        probs[..ids.len()].iter_mut().for_each(|p| *p *= inv);
        visit(l, ctxs[l], ids, &probs[..ids.len()]);
        let bs: f64 = beta_new.iter().sum();
        let inv = 1.0 / bs;
        for (dst, src) in beta.iter_mut().zip(&beta_new) {
            *dst = src * inv;
        }
    }
    Ok(fw.total)
}

/// Per-step branch posteriors over the whole window.
pub fn posteriors(m: &StepMetrics, w: &SampleWindow) -> Result<PosteriorMarginals> {
    let nb = m.trellis.n_branches();
    let mut probs = vec![0.0; w.len() * nb];
    let log_z = visit_posteriors(m, w, |l, _, ids, p| {
        for (&b, &v) in ids.iter().zip(p) {
            probs[l * nb + b] = v;
        }
    })?;
    Ok(PosteriorMarginals { n_branches: nb, probs, log_z })
}

/// Posteriors under the backward metric without and with the input clamped.
pub fn ab_conditional_posteriors(
    params: &AuxBackwardParams,
    src: &Source,
    w: &SampleWindow,
) -> Result<(PosteriorMarginals, PosteriorMarginals)> {
    w.require_pads(params.d1(), params.d2())?;
    let joint = posteriors(&StepMetrics::ab(params, src, false), w)?;
    let clamped = posteriors(&StepMetrics::ab(params, src, true), w)?;
    Ok((joint, clamped))
}

/// Per-step text dump of normalized forward vectors, backward vectors and
/// branch posteriors, one `l a:... b:... p:...` line per step.
pub fn debug_dump(m: &StepMetrics, w: &SampleWindow) -> Result<String> {
    let fw = forward(m, w, &[], true)?;
    let alphas = fw.alphas.expect("stored");
    let ns = m.trellis.n_states();
    let nb = m.trellis.n_branches();
    let n = w.len();
    let mut betas = vec![0.0; n * ns];
    let mut beta = vec![1.0; ns];
    for l in (0..n).rev() {
        betas[l * ns..(l + 1) * ns].copy_from_slice(&beta);
        let ctx = m.context(w, l);
        let row = &m.table[ctx * nb..(ctx + 1) * nb];
        let mut nb_vec = vec![0.0; ns];
        for &b in m.active(w, l) {
            nb_vec[m.prev[b]] += row[b] * beta[m.next[b]];
        }
        let s: f64 = nb_vec.iter().sum();
        beta = nb_vec.iter().map(|v| v / s).collect();
    }
    let post = posteriors(m, w)?;
    let mut out = format!("# log_z={:.17e}\n", fw.total);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(",");
    for l in 0..n {
        let _ = writeln!(
            out,
            "{l} a:{} b:{} p:{}",
            fmt(&alphas[l * ns..(l + 1) * ns]),
            fmt(&betas[l * ns..(l + 1) * ns]),
            fmt(post.step(l))
        );
    }
    Ok(out)
}
