//! Exhaustive oracle for tiny windows: every `(x, y)` pair and every
//! auxiliary branch sequence is enumerated, nothing goes through the
//! library's recursions.

use std::sync::Arc;

use memrate::channels::window::SampleWindow;
use memrate::em::TStats;
use memrate::inference::{AuxBackwardParams, FsmcModel};
use memrate::trellis::{Source, TrellisSection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All `(x, y, P(x, y))` of length `n` for an original model whose initial
/// state has law `init`.
pub struct Ensemble {
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub pairs: Vec<(Vec<usize>, Vec<usize>, f64)>,
    /// `(QW)(y)` indexed like [`Ensemble::ys`].
    pub py: Vec<f64>,
    pub ys: Vec<Vec<usize>>,
}

/// Every length-`n` word over `k` letters, first letter most significant.
pub fn words(k: usize, n: usize) -> Vec<Vec<usize>> {
    (0..k.pow(n as u32))
        .map(|mut i| {
            let mut w = vec![0; n];
            for l in (0..n).rev() {
                w[l] = i % k;
                i /= k;
            }
            w
        })
        .collect()
}

/// Branch sequences of length `n` starting in `s0`.
pub fn paths(t: &TrellisSection, s0: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &out {
            let s = p.last().map_or(s0, |&b| t.branch(b).s_next);
            for b in t.branches().iter().filter(|b| b.s_prev == s) {
                let mut q = p.clone();
                q.push(b.id);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn y_index(y: &[usize], ny: usize) -> usize {
    y.iter().fold(0, |a, &v| a * ny + v)
}

impl Ensemble {
    pub fn new(original: &FsmcModel, src: &Source, init: &[f64], n: usize) -> Self {
        let t = original.trellis();
        let (nx, ny) = (t.n_inputs(), original.n_out());
        let ys = words(ny, n);
        let mut pairs = Vec::new();
        let mut py = vec![0.0; ys.len()];
        let all: Vec<(usize, Vec<Vec<usize>>)> = (0..t.n_states()).map(|s| (s, paths(t, s, n))).collect();
        for x in words(nx, n) {
            let qx: f64 = x.iter().map(|&v| src.prob(v)).product();
            for y in &ys {
                let mut w = 0.0;
                for (s0, ps) in &all {
                    for p in ps.iter().filter(|p| p.iter().zip(&x).all(|(&b, &xv)| t.branch(b).x == xv)) {
                        w += init[*s0] * p.iter().zip(y).map(|(&b, &yv)| original.weight(b, yv)).product::<f64>();
                    }
                }
                let pxy = qx * w;
                if pxy > 0.0 {
                    py[y_index(y, ny)] += pxy;
                    pairs.push((x.clone(), y.clone(), pxy));
                }
            }
        }
        Self { n, nx, ny, pairs, py, ys }
    }

    pub fn window(&self, i: usize) -> SampleWindow {
        let (x, y, _) = &self.pairs[i];
        SampleWindow::new(x.clone(), y.clone(), 0, 0, 0, self.nx, self.ny).unwrap()
    }

    pub fn prob_y(&self, y: &[usize]) -> f64 {
        self.py[y_index(y, self.ny)]
    }

    /// `E log Q(x)`.
    pub fn e_log_q(&self, src: &Source) -> f64 {
        self.pairs.iter().map(|(x, _, p)| p * x.iter().map(|&v| src.prob(v).ln()).sum::<f64>()).sum()
    }

    /// `E log W(y|x)` of the original.
    pub fn e_log_w(&self, src: &Source) -> f64 {
        self.pairs
            .iter()
            .map(|(x, _, p)| {
                let qx: f64 = x.iter().map(|&v| src.prob(v)).product();
                p * (p / qx).ln()
            })
            .sum()
    }
}

/// Per-path weight of a forward model: `prod [Q(x)] W(s|s_p,x) W(y|b)`.
pub fn af_weight(m: &FsmcModel, src: &Source, path: &[usize], y: &[usize], with_q: bool) -> f64 {
    path.iter()
        .zip(y)
        .map(|(&b, &yv)| {
            let q = if with_q { src.prob(m.trellis().branch(b).x) } else { 1.0 };
            q * m.weight(b, yv)
        })
        .product()
}

/// Per-path weight of a backward metric with context `y_l`.
pub fn ab_weight(v: &AuxBackwardParams, src: &Source, path: &[usize], y: &[usize], with_q: bool) -> f64 {
    path.iter()
        .zip(y)
        .map(|(&b, &yv)| {
            let q = if with_q { src.prob(v.trellis().branch(b).x) } else { 1.0 };
            q * v.get(b, yv)
        })
        .product()
}

fn compatible(t: &TrellisSection, path: &[usize], x: &[usize]) -> bool {
    path.iter().zip(x).all(|(&b, &xv)| t.branch(b).x == xv)
}

/// Either kind of auxiliary parameters.
pub enum Aux<'a> {
    F(&'a FsmcModel),
    B(&'a AuxBackwardParams),
}

impl Aux<'_> {
    fn trellis(&self) -> &TrellisSection {
        match self {
            Aux::F(m) => m.trellis(),
            Aux::B(v) => v.trellis(),
        }
    }

    fn weight(&self, src: &Source, path: &[usize], y: &[usize], with_q: bool) -> f64 {
        match self {
            Aux::F(m) => af_weight(m, src, path, y, with_q),
            Aux::B(v) => ab_weight(v, src, path, y, with_q),
        }
    }
}

/// Exact quantities of one auxiliary model on an ensemble.
pub struct Oracle<'a> {
    pub ens: &'a Ensemble,
    pub src: &'a Source,
    pub paths: Vec<Vec<usize>>,
}

impl<'a> Oracle<'a> {
    pub fn new(ens: &'a Ensemble, src: &'a Source, aux_trellis: &TrellisSection) -> Self {
        Self { ens, src, paths: paths(aux_trellis, 0, ens.n) }
    }

    fn nf(&self) -> f64 {
        self.ens.n as f64
    }

    /// `E log sum_paths [Q] weight`, joint (given y) or clamped (given x, y).
    pub fn e_log_z(&self, aux: &Aux<'_>, clamped: bool) -> f64 {
        let t = aux.trellis();
        if clamped {
            self.ens
                .pairs
                .iter()
                .map(|(x, y, p)| {
                    let z: f64 = self.paths.iter().filter(|q| compatible(t, q, x)).map(|q| aux.weight(self.src, q, y, false)).sum();
                    p * z.ln()
                })
                .sum()
        } else {
            self.ens
                .ys
                .iter()
                .map(|y| {
                    let py = self.ens.prob_y(y);
                    if py == 0.0 {
                        return 0.0;
                    }
                    let z: f64 = self.paths.iter().map(|q| aux.weight(self.src, q, y, true)).sum();
                    py * z.ln()
                })
                .sum()
        }
    }

    /// Upper bound `(1/n) E [log W(y|x) - log (Q W_hat)(y)]`.
    pub fn upper(&self, m: &FsmcModel) -> f64 {
        (self.ens.e_log_w(self.src) - self.e_log_z(&Aux::F(m), false)) / self.nf()
    }

    /// Difference function `(1/n) E [log W(y|x) - log W_hat(y|x)]`.
    pub fn diff(&self, m: &FsmcModel) -> f64 {
        (self.ens.e_log_w(self.src) - self.e_log_z(&Aux::F(m), true)) / self.nf()
    }

    /// `(I_1, I_2)` of the lower bound with the `Q(x)` factor inside `I_1`
    /// and `I_0 = -(1/n) E log Q(x)`, so `I_0 + I_1 + I_2` is the bound.
    pub fn lower_parts(&self, v: &AuxBackwardParams) -> (f64, f64, f64) {
        let eq = self.ens.e_log_q(self.src);
        let i0 = -eq / self.nf();
        let i1 = (eq + self.e_log_z(&Aux::B(v), true)) / self.nf();
        let i2 = -self.e_log_z(&Aux::B(v), false) / self.nf();
        (i0, i1, i2)
    }

    pub fn lower(&self, v: &AuxBackwardParams) -> f64 {
        let (a, b, c) = self.lower_parts(v);
        a + b + c
    }

    /// Exact T statistics (per step) with context `y_l`.
    pub fn stats(&self, aux: &Aux<'_>, clamped: bool) -> (Vec<f64>, Vec<f64>) {
        let t = aux.trellis();
        let (nb, ny) = (t.n_branches(), self.ens.ny);
        let mut tb = vec![0.0; nb];
        let mut tbc = vec![0.0; nb * ny];
        let mut add = |p: f64, y: &[usize], sel: &mut dyn Iterator<Item = &Vec<usize>>| {
            let ws: Vec<(&Vec<usize>, f64)> = sel.map(|q| (q, aux.weight(self.src, q, y, !clamped))).collect();
            let z: f64 = ws.iter().map(|(_, w)| w).sum();
            for (q, w) in ws {
                for (&b, &yv) in q.iter().zip(y) {
                    let r = p * w / z / self.nf();
                    tb[b] += r;
                    tbc[b * ny + yv] += r;
                }
            }
        };
        if clamped {
            for (x, y, p) in &self.ens.pairs {
                add(*p, y, &mut self.paths.iter().filter(|q| compatible(t, q, x)));
            }
        } else {
            for y in &self.ens.ys {
                let py = self.ens.prob_y(y);
                if py > 0.0 {
                    add(py, y, &mut self.paths.iter());
                }
            }
        }
        (tb, tbc)
    }

    pub fn tstats(&self, aux: &Aux<'_>) -> TStats {
        let (t1, t2) = self.stats(aux, false);
        let (t3, t4) = self.stats(aux, true);
        let nb = t1.len();
        TStats { n_branches: nb, n_ctx: self.ens.ny, t1, t2, t3, t4, n_used: (self.ens.n, self.ens.n) }
    }

    /// `(1/n) sum_y P(y) D(P_tilde(b|y) || P_hat(b|y))` over whole branch
    /// sequences; clamped uses `(x, y)` pairs.
    pub fn path_kl(&self, tilde: &Aux<'_>, hat: &Aux<'_>, clamped: bool) -> f64 {
        let t = tilde.trellis();
        let kl = |y: &[usize], sel: &dyn Fn(&Vec<usize>) -> bool| {
            let a: Vec<f64> = self.paths.iter().filter(|q| sel(q)).map(|q| tilde.weight(self.src, q, y, !clamped)).collect();
            let b: Vec<f64> = self.paths.iter().filter(|q| sel(q)).map(|q| hat.weight(self.src, q, y, !clamped)).collect();
            let (za, zb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
            a.iter().zip(&b).filter(|(a, _)| **a > 0.0).map(|(a, b)| a / za * ((a / za) / (b / zb)).ln()).sum::<f64>()
        };
        let s: f64 = if clamped {
            self.ens.pairs.iter().map(|(x, y, p)| p * kl(y, &|q| compatible(t, q, x))).sum()
        } else {
            self.ens.ys.iter().map(|y| self.ens.prob_y(y) * kl(y, &|_| true)).sum()
        };
        s / self.nf()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Forward model on `t` with random transition groups and output rows.
pub fn random_model(t: &Arc<TrellisSection>, ny: usize, r: &mut ChaCha8Rng) -> FsmcModel {
    let trans = (0..t.n_branches()).map(|_| r.random_range(0.05..1.0)).collect();
    let out = (0..t.n_branches() * ny).map(|_| r.random_range(0.05..1.0)).collect();
    FsmcModel::from_weights(t.clone(), ny, trans, out).unwrap()
}

/// Backward metric on `t` with context `y_l` and random positive entries.
pub fn random_backward(t: &Arc<TrellisSection>, ny: usize, r: &mut ChaCha8Rng) -> AuxBackwardParams {
    let v = (0..t.n_branches() * ny).map(|_| r.random_range(0.05..1.0)).collect();
    AuxBackwardParams::new(t.clone(), ny, 0, 0, v).unwrap()
}

/// Simplified forward surrogate
/// `I(tilde) - sum T_a log(hat_t / tilde_t) - sum T_b log(hat_o / tilde_o)`.
pub fn psi_forward(value_tilde: f64, tilde: &FsmcModel, hat: &FsmcModel, tb: &[f64], tbc: &[f64]) -> f64 {
    let k = tilde.n_out();
    let mut v = value_tilde;
    for b in 0..tb.len() {
        v -= tb[b] * (hat.trans()[b] / tilde.trans()[b]).ln();
        for y in 0..k {
            v -= tbc[b * k + y] * (hat.out_row(b)[y] / tilde.out_row(b)[y]).ln();
        }
    }
    v
}

/// Every point of the probability simplex of size `k` on a grid of `step`.
pub fn simplex_grid(k: usize, step: f64) -> Vec<Vec<f64>> {
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, m: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / m as f64).collect());
            return;
        }
        for c in 0..=left {
            cur[i] = c;
            rec(i + 1, left - c, cur, m, out);
        }
    }
    let m = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    rec(0, m, &mut vec![0usize; k], m, &mut out);
    out
}

/// `-sum t log p`, with `0 log 0 = 0`.
pub fn row_cost(t: &[f64], p: &[f64]) -> f64 {
    t.iter().zip(p).map(|(t, p)| if *t == 0.0 { 0.0 } else { -t * p.ln() }).sum()
}
