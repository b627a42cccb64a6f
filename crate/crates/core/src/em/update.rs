//! Closed-form maximizers of the surrogate functions.

use crate::bounds::{eval_lower, BoundEstimate, EvalPolicy};
use crate::channels::pr::PrChannel;
use crate::channels::window::SampleWindow;
use crate::error::{arg, Result};
use crate::inference::{AuxBackwardParams, FsmcModel, EPS_FLOOR};
use crate::special::normal_interval;
use crate::em::TStats;
use crate::trellis::{build_pr_trellis, Source};

/// New parameters plus the number of rows or cells left unchanged because
/// their statistics carried no mass.
#[derive(Debug, Clone)]
pub struct Update<P> {
    pub params: P,
    pub kept: usize,
}

/// Transition rows proportional to `tb` per `(s_p, x)` group, output rows
/// proportional to `tbc` per branch.
fn forward_update(prev: &FsmcModel, tb: &[f64], tbc: &[f64], n_ctx: usize) -> Result<Update<FsmcModel>> {
    let t = prev.trellis();
    let k = prev.n_out();
    if tb.len() != t.n_branches() || tbc.len() != t.n_branches() * k || n_ctx != k {
        return arg("statistics do not match the auxiliary model (forward updates need context = y)");
    }
    let mut kept = 0;
    let mut trans = prev.trans().to_vec();
    for s in 0..t.n_states() {
        for x in 0..t.n_inputs() {
            let g = t.group(s, x);
            let sum: f64 = g.iter().map(|&b| tb[b]).sum();
            if sum > 0.0 && sum.is_finite() {
                g.iter().for_each(|&b| trans[b] = tb[b] / sum);
            } else if !g.is_empty() {
                kept += 1;
            }
        }
    }
    let mut out = prev.out().to_vec();
    for b in 0..t.n_branches() {
        let row = &tbc[b * k..(b + 1) * k];
        let sum: f64 = row.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            out[b * k..(b + 1) * k].iter_mut().zip(row).for_each(|(o, r)| *o = r / sum);
        } else {
            kept += 1;
        }
    }
    let params = FsmcModel::new(prev.trellis_arc().clone(), k, trans, out)?;
    Ok(Update { params, kept })
}

/// Upper-bound step: `W(s|s_p,x) ∝ t1`, `W(y|b) ∝ t2`.
pub fn update_upper(prev: &FsmcModel, stats: &TStats) -> Result<Update<FsmcModel>> {
    if !stats.has_joint() {
        return arg("upper-bound update needs t1 and t2");
    }
    forward_update(prev, &stats.t1, &stats.t2, stats.n_ctx)
}

/// Difference-function step: `W(s|s_p,x) ∝ t3`, `W(y|b) ∝ t4`.
pub fn update_diff(prev: &FsmcModel, stats: &TStats) -> Result<Update<FsmcModel>> {
    if !stats.has_clamped() {
        return arg("difference update needs t3 and t4");
    }
    forward_update(prev, &stats.t3, &stats.t4, stats.n_ctx)
}

/// Lower-bound step `v = (t4 / t2)^(1/gamma) v_tilde`.
///
/// Cells with `t2 = 0` keep their old value. The table is then rescaled so
/// its largest entry is one and floored at [`EPS_FLOOR`]; the bound does not
/// change under a global scale.
pub fn update_lower(v_tilde: &AuxBackwardParams, stats: &TStats, gamma: f64) -> Result<Update<AuxBackwardParams>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return arg(format!("gamma must be positive, got {gamma}"));
    }
    if !(stats.has_joint() && stats.has_clamped()) {
        return arg("lower-bound update needs t2 and t4");
    }
    let nc = v_tilde.n_ctx();
    if stats.n_ctx != nc || stats.n_branches != v_tilde.trellis().n_branches() {
        return arg("statistics do not match the backward model's context words");
    }
    let mut kept = 0;
    let e = 1.0 / gamma;
    let mut v: Vec<f64> = v_tilde
        .v()
        .iter()
        .zip(stats.t2.iter().zip(&stats.t4))
        .map(|(&vt, (&t2, &t4))| {
            if t2 > 0.0 {
                (t4 / t2).powf(e) * vt
            } else {
                kept += 1;
                vt
            }
        })
        .collect();
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 && max.is_finite() {
        v.iter_mut().for_each(|x| *x /= max);
    }
    v.iter_mut().for_each(|x| *x = x.max(EPS_FLOOR));
    let params = AuxBackwardParams::new(v_tilde.trellis_arc().clone(), v_tilde.n_out(), v_tilde.d1(), v_tilde.d2(), v)?;
    Ok(Update { params, kept })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaPolicy {
    /// Always the first entry.
    Fixed,
    /// The candidate with the highest evaluated lower bound.
    BestOfSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSchedule {
    pub gammas: Vec<f64>,
    pub policy: GammaPolicy,
}

impl GammaSchedule {
    pub fn new(gammas: Vec<f64>, policy: GammaPolicy) -> Result<Self> {
        if gammas.is_empty() {
            return arg("gamma set is empty");
        }
        if gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return arg("every gamma must be positive and finite");
        }
        Ok(Self { gammas, policy })
    }

    /// `{1, 2, ..., 10}`.
    pub fn integers() -> Self {
        Self { gammas: (1..=10).map(f64::from).collect(), policy: GammaPolicy::BestOfSet }
    }

    /// `{1, 1.5, ..., 10, 100}`.
    pub fn halves_and_hundred() -> Self {
        let mut g: Vec<f64> = (2..=20).map(|k| k as f64 / 2.0).collect();
        g.push(100.0);
        Self { gammas: g, policy: GammaPolicy::BestOfSet }
    }
}

/// Outcome of [`select_gamma`].
#[derive(Debug, Clone)]
pub struct GammaChoice {
    pub gamma: f64,
    pub params: AuxBackwardParams,
    pub bound: BoundEstimate,
    pub kept: usize,
}

/// Evaluates the update for every candidate `gamma` on `eval` and keeps the
/// one with the highest lower bound; ties go to the larger `gamma`.
pub fn select_gamma(
    v_tilde: &AuxBackwardParams,
    stats: &TStats,
    schedule: &GammaSchedule,
    src: &Source,
    eval: &SampleWindow,
    policy: &EvalPolicy,
) -> Result<GammaChoice> {
    if schedule.gammas.is_empty() {
        return arg("gamma set is empty");
    }
    let cands: Vec<f64> = match schedule.policy {
        GammaPolicy::Fixed => vec![schedule.gammas[0]],
        GammaPolicy::BestOfSet => {
            let mut g = schedule.gammas.clone();
            g.sort_by(f64::total_cmp);
            g
        }
    };
    let mut best: Option<GammaChoice> = None;
    for gamma in cands {
        let up = update_lower(v_tilde, stats, gamma)?;
        let bound = eval_lower(&up.params, src, eval, policy)?;
        if best.as_ref().is_none_or(|b| bound.value_nats >= b.bound.value_nats) {
            best = Some(GammaChoice { gamma, params: up.params, bound, kept: up.kept });
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Exact `T4(b, y)` for a memory-`m_hat` partial-response auxiliary trellis
/// driven by a partial-response original channel with i.i.d. input `src`.
///
/// Inputs older than the auxiliary state are summed out. Entries are per
/// step, so they add up to one.
pub fn closed_form_t4_pr(ch: &PrChannel, m_hat: usize, src: &Source) -> Result<Vec<f64>> {
    let input = ch.trellis().input().clone();
    if src.alphabet().len() != input.len() {
        return arg("source alphabet differs from channel input alphabet");
    }
    let nx = input.len();
    let m = ch.memory();
    let aux = build_pr_trellis(m_hat, input)?;
    let k = ch.quantizer().bins();
    let (extra, span) = if m > m_hat { (nx.pow((m - m_hat) as u32), nx.pow(m_hat as u32)) } else { (1, 0) };
    let n_orig_states = ch.trellis().n_states();
    let levels = ch.levels();
    let mut t4 = vec![0.0; aux.n_branches() * k];
    let mut pmf = vec![0.0; k];
    for b in aux.branches() {
        // probability of the inputs fixed by the auxiliary branch
        let mut q = src.prob(b.x);
        let mut s = b.s_prev;
        for _ in 0..m_hat {
            q *= src.prob(s % nx);
            s /= nx;
        }
        for u in 0..extra {
            let mut qu = q;
            let mut r = u;
            for _ in 0..(m.saturating_sub(m_hat)) {
                qu *= src.prob(r % nx);
                r /= nx;
            }
            let s_orig = if m > m_hat { b.s_prev + span * u } else { b.s_prev % n_orig_states };
            let next = (s_orig * nx + b.x) % n_orig_states;
            let ob = ch.trellis().find(s_orig, b.x, next).expect("partial-response branch exists");
            for (kk, p) in pmf.iter_mut().enumerate() {
                let (lo, hi) = ch.quantizer().edges(kk);
                *p = normal_interval(lo, hi, levels[ob], ch.sigma());
            }
            for (dst, p) in t4[b.id * k..(b.id + 1) * k].iter_mut().zip(&pmf) {
                *dst += qu * p;
            }
        }
    }
    Ok(t4)
}
