//! Unit-cube coordinates for the probability rows of a finite-state model.

use crate::bounds::{eval_upper, EvalPolicy};
use crate::channels::window::SampleWindow;
use crate::error::{arg, Result};
use crate::inference::FsmcModel;
use crate::trellis::Source;

/// Stick-breaking map from `[0, 1]^(k-1)` onto the probability simplex of
/// size `k`: `p_i = u_i * prod_{j<i} (1 - u_j)`, the last entry takes the rest.
pub fn stick_break(u: &[f64], out: &mut [f64]) {
    debug_assert_eq!(u.len() + 1, out.len());
    let mut rest = 1.0;
    for (o, &ui) in out.iter_mut().zip(u) {
        *o = rest * ui;
        rest -= *o;
    }
    *out.last_mut().expect("nonempty row") = rest.max(0.0);
}

/// Inverse of [`stick_break`] (coordinates after an exhausted stick are 0).
pub fn stick_unbreak(p: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len() + 1, p.len());
    let mut rest = 1.0;
    for (o, &pi) in out.iter_mut().zip(p) {
        *o = if rest > 0.0 { (pi / rest).clamp(0.0, 1.0) } else { 0.0 };
        rest -= pi;
    }
}

/// Coordinates of every free row of a model.
///
/// Output rows always count; transition groups only when they have more
/// than one branch. A partial-response model with 4 branches and 8 output
/// bins has 28 coordinates.
#[derive(Debug, Clone)]
pub struct ModelChart {
    template: FsmcModel,
    groups: Vec<Vec<usize>>,
}

impl ModelChart {
    pub fn new(template: FsmcModel) -> Self {
        let t = template.trellis();
        let groups = (0..t.n_states())
            .flat_map(|s| (0..t.n_inputs()).map(move |x| (s, x)))
            .map(|(s, x)| t.group(s, x).to_vec())
            .filter(|g| g.len() > 1)
            .collect();
        Self { template, groups }
    }

    pub fn dim(&self) -> usize {
        let k = self.template.n_out();
        self.groups.iter().map(|g| g.len() - 1).sum::<usize>() + self.template.trellis().n_branches() * (k - 1)
    }

    pub fn template(&self) -> &FsmcModel {
        &self.template
    }

    pub fn decode(&self, u: &[f64]) -> Result<FsmcModel> {
        if u.len() != self.dim() {
            return arg(format!("expected {} coordinates, got {}", self.dim(), u.len()));
        }
        let k = self.template.n_out();
        let mut trans = self.template.trans().to_vec();
        let mut out = vec![0.0; self.template.out().len()];
        let mut at = 0;
        let mut row = Vec::new();
        for g in &self.groups {
            row.resize(g.len(), 0.0);
            stick_break(&u[at..at + g.len() - 1], &mut row);
            g.iter().zip(&row).for_each(|(&b, &p)| trans[b] = p);
            at += g.len() - 1;
        }
        for r in out.chunks_mut(k) {
            stick_break(&u[at..at + k - 1], r);
            at += k - 1;
        }
        FsmcModel::new(self.template.trellis_arc().clone(), k, trans, out)
    }

    pub fn encode(&self, m: &FsmcModel) -> Result<Vec<f64>> {
        if m.trellis().n_branches() != self.template.trellis().n_branches() || m.n_out() != self.template.n_out() {
            return arg("model does not match the chart");
        }
        let k = m.n_out();
        let mut u = vec![0.0; self.dim()];
        let mut at = 0;
        for g in &self.groups {
            let p: Vec<f64> = g.iter().map(|&b| m.trans()[b]).collect();
            stick_unbreak(&p, &mut u[at..at + g.len() - 1]);
            at += g.len() - 1;
        }
        for r in m.out().chunks(k) {
            stick_unbreak(r, &mut u[at..at + k - 1]);
            at += k - 1;
        }
        Ok(u)
    }
}

/// Upper bound in bits as a function of chart coordinates; infeasible
/// points cost `+inf`.
pub fn upper_bound_cost<'a>(
    chart: &'a ModelChart,
    src: &'a Source,
    window: &'a SampleWindow,
    h_cond: f64,
    policy: &'a EvalPolicy,
) -> impl FnMut(&[f64]) -> f64 + 'a {
    move |u| match chart.decode(u).and_then(|m| eval_upper(&m, src, window, h_cond, policy)) {
        Ok(b) => b.value_bits,
        Err(_) => f64::INFINITY,
    }
}
