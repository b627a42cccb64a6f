//! Parameter tables of finite-state machine channels.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{arg, Error, Result};
use crate::trellis::TrellisSection;

/// Smallest probability kept in any output or transition table.
pub const EPS_FLOOR: f64 = 1e-12;

/// Forward finite-state channel law: per-branch transition probability
/// `W(s | s_p, x)` and output table `W(y | b)` stored row-major by branch.
#[derive(Debug, Clone)]
pub struct FsmcModel {
    trellis: Arc<TrellisSection>,
    n_out: usize,
    trans: Vec<f64>,
    out: Vec<f64>,
}

/// Auxiliary forward channel; same tables as an original channel.
pub type AuxForwardParams = FsmcModel;

impl FsmcModel {
    /// Validates normalization (within 1e-6), then floors and renormalizes.
    pub fn new(trellis: Arc<TrellisSection>, n_out: usize, trans: Vec<f64>, out: Vec<f64>) -> Result<Self> {
        let nb = trellis.n_branches();
        if n_out == 0 || trans.len() != nb || out.len() != nb * n_out {
            return arg("table sizes do not match trellis and output alphabet");
        }
        if trans.iter().chain(&out).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return arg("probabilities must be finite and nonnegative");
        }
        let mut m = Self { trellis, n_out, trans, out };
        for (s, x, sum) in m.group_sums() {
            if (sum - 1.0).abs() > 1e-6 {
                return arg(format!("transition row ({s},{x}) sums to {sum}"));
            }
        }
        for b in 0..nb {
            let sum: f64 = m.out_row(b).iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return arg(format!("output row {b} sums to {sum}"));
            }
        }
        m.floor_all();
        Ok(m)
    }

    /// Builds a model from unnormalized weights.
    ///
    /// Fails with a numeric error if any transition group or output row has
    /// zero total mass.
    pub fn from_weights(
        trellis: Arc<TrellisSection>,
        n_out: usize,
        trans: Vec<f64>,
        out: Vec<f64>,
    ) -> Result<Self> {
        let nb = trellis.n_branches();
        if trans.len() != nb || out.len() != nb * n_out {
            return arg("table sizes do not match trellis and output alphabet");
        }
        let mut m = Self { trellis, n_out, trans, out };
        for s in 0..m.trellis.n_states() {
            for x in 0..m.trellis.n_inputs() {
                let g = m.trellis.group(s, x).to_vec();
                let sum: f64 = g.iter().map(|&b| m.trans[b]).sum();
                if g.is_empty() {
                    continue;
                }
                if !(sum > 0.0 && sum.is_finite()) {
                    return Err(Error::Numeric(format!("transition group ({s},{x}) has no mass")));
                }
                for b in g {
                    m.trans[b] /= sum;
                }
            }
        }
        for b in 0..nb {
            let row = &mut m.out[b * n_out..(b + 1) * n_out];
            let sum: f64 = row.iter().sum();
            if !(sum > 0.0 && sum.is_finite()) {
                return Err(Error::Numeric(format!("output row {b} has no mass")));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        m.floor_all();
        Ok(m)
    }

    fn group_sums(&self) -> Vec<(usize, usize, f64)> {
        let mut v = Vec::new();
        for s in 0..self.trellis.n_states() {
            for x in 0..self.trellis.n_inputs() {
                let g = self.trellis.group(s, x);
                if !g.is_empty() {
                    v.push((s, x, g.iter().map(|&b| self.trans[b]).sum()));
                }
            }
        }
        v
    }

    fn floor_all(&mut self) {
        for s in 0..self.trellis.n_states() {
            for x in 0..self.trellis.n_inputs() {
                let g = self.trellis.group(s, x);
                if g.len() > 1 {
                    let mut row: Vec<f64> = g.iter().map(|&b| self.trans[b]).collect();
                    floor_renormalize(&mut row);
                    for (&b, v) in g.iter().zip(row) {
                        self.trans[b] = v;
                    }
                } else if let Some(&b) = g.first() {
                    self.trans[b] = 1.0;
                }
            }
        }
        for row in self.out.chunks_mut(self.n_out) {
            floor_renormalize(row);
        }
    }

    pub fn trellis(&self) -> &TrellisSection {
        &self.trellis
    }

    pub fn trellis_arc(&self) -> &Arc<TrellisSection> {
        &self.trellis
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn trans(&self) -> &[f64] {
        &self.trans
    }

    pub fn out(&self) -> &[f64] {
        &self.out
    }

    pub fn out_row(&self, b: usize) -> &[f64] {
        &self.out[b * self.n_out..(b + 1) * self.n_out]
    }

    /// Branch weight `W(s | s_p, x) W(y | b)`.
    pub fn weight(&self, b: usize, y: usize) -> f64 {
        self.trans[b] * self.out[b * self.n_out + y]
    }

    /// Text checkpoint: a header line, then `b trans out_0 ... out_{K-1}` per branch.
    pub fn to_table(&self) -> String {
        let mut s = format!("# fsmc branches={} outputs={}\n", self.trellis.n_branches(), self.n_out);
        for b in 0..self.trellis.n_branches() {
            let _ = write!(s, "{} {:e}", b, self.trans[b]);
            for v in self.out_row(b) {
                let _ = write!(s, " {v:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Restores a checkpoint written by [`FsmcModel::to_table`].
    pub fn from_table(trellis: Arc<TrellisSection>, text: &str) -> Result<Self> {
        let rows = parse_rows(text, trellis.n_branches())?;
        let n_out = rows.first().map_or(0, |(_, r)| r.len().saturating_sub(1));
        let mut trans = Vec::new();
        let mut out = Vec::new();
        for (line, r) in rows {
            if r.len() != n_out + 1 {
                return Err(Error::Parse { line, msg: "ragged row".into() });
            }
            trans.push(r[0]);
            out.extend_from_slice(&r[1..]);
        }
        Self::new(trellis, n_out, trans, out)
    }
}

/// Backward auxiliary channel: nonnegative metric `v(b, y_{l-D1}..y_{l+D2})`.
///
/// Context words are base-|Y| numbers with `y_{l-D1}` most significant.
#[derive(Debug, Clone)]
pub struct AuxBackwardParams {
    trellis: Arc<TrellisSection>,
    n_out: usize,
    d1: usize,
    d2: usize,
    v: Vec<f64>,
}

impl AuxBackwardParams {
    pub fn new(trellis: Arc<TrellisSection>, n_out: usize, d1: usize, d2: usize, v: Vec<f64>) -> Result<Self> {
        let n_ctx = context_count(n_out, d1, d2)?;
        if v.len() != trellis.n_branches() * n_ctx {
            return arg("metric table size does not match trellis and context words");
        }
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return arg("backward metric entries must be finite and strictly positive");
        }
        Ok(Self { trellis, n_out, d1, d2, v })
    }

    /// `v(b, y) = W(s | s_p, x) W(y_l | b)`, extended to context words through their centre symbol.
    pub fn from_forward(model: &FsmcModel, d1: usize, d2: usize) -> Result<Self> {
        let n_out = model.n_out();
        let n_ctx = context_count(n_out, d1, d2)?;
        let nb = model.trellis().n_branches();
        let shift = n_out.pow(d2 as u32);
        let mut v = vec![0.0; nb * n_ctx];
        for b in 0..nb {
            for c in 0..n_ctx {
                v[b * n_ctx + c] = model.weight(b, (c / shift) % n_out);
            }
        }
        Self::new(model.trellis_arc().clone(), n_out, d1, d2, v)
    }

    pub fn trellis(&self) -> &TrellisSection {
        &self.trellis
    }

    pub fn trellis_arc(&self) -> &Arc<TrellisSection> {
        &self.trellis
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn n_ctx(&self) -> usize {
        self.v.len() / self.trellis.n_branches()
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn get(&self, b: usize, ctx: usize) -> f64 {
        self.v[b * self.n_ctx() + ctx]
    }

    /// Multiplies every entry by `c > 0`; bounds and posteriors are unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        Self { v: self.v.iter().map(|x| x * c).collect(), ..self.clone() }
    }

    /// Text checkpoint: a header line, then `b v_0 ... v_{C-1}` per branch.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "# ab branches={} outputs={} d1={} d2={}\n",
            self.trellis.n_branches(),
            self.n_out,
            self.d1,
            self.d2
        );
        let n_ctx = self.n_ctx();
        for b in 0..self.trellis.n_branches() {
            let _ = write!(s, "{b}");
            for v in &self.v[b * n_ctx..(b + 1) * n_ctx] {
                let _ = write!(s, " {v:e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_table(trellis: Arc<TrellisSection>, n_out: usize, d1: usize, d2: usize, text: &str) -> Result<Self> {
        let rows = parse_rows(text, trellis.n_branches())?;
        let v = rows.into_iter().flat_map(|(_, r)| r).collect();
        Self::new(trellis, n_out, d1, d2, v)
    }
}

/// Number of context words `|Y|^(d1 + d2 + 1)`.
pub fn context_count(n_out: usize, d1: usize, d2: usize) -> Result<usize> {
    let span = (d1 + d2 + 1) as u32;
    n_out
        .checked_pow(span)
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| Error::Capacity(format!("{n_out}^{span} context words")))
}

/// Floors every entry at [`EPS_FLOOR`] and rescales to unit sum.
pub fn floor_renormalize(row: &mut [f64]) {
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = v.max(EPS_FLOOR);
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

fn parse_rows(text: &str, expect: usize) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let id: usize = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse { line: line_no, msg: "missing branch id".into() })?;
        if id != rows.len() {
            return Err(Error::Parse { line: line_no, msg: format!("expected branch {}", rows.len()) });
        }
        let vals = it
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })?;
        rows.push((line_no, vals));
    }
    if rows.len() != expect {
        return Err(Error::Parse { line: 0, msg: format!("{} rows, expected {expect}", rows.len()) });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trellis::{build_ge_trellis, build_pr_trellis, Alphabet};

    fn ge_like() -> FsmcModel {
        let t = Arc::new(build_ge_trellis());
        let trans = t.branches().iter().map(|b| if b.s_next == b.s_prev { 0.9 } else { 0.1 }).collect();
        let out = (0..8).flat_map(|_| [0.25, 0.75]).collect();
        FsmcModel::new(t, 2, trans, out).unwrap()
    }

    #[test]
    fn rejects_unnormalized() {
        let t = Arc::new(build_pr_trellis(1, Alphabet::bpsk()).unwrap());
        assert!(FsmcModel::new(t.clone(), 2, vec![1.0; 4], vec![0.6; 8]).is_err());
        assert!(FsmcModel::new(t, 2, vec![1.0; 4], vec![0.5; 8]).is_ok());
    }

    #[test]
    fn floor_applied() {
        let t = Arc::new(build_pr_trellis(0, Alphabet::bpsk()).unwrap());
        let m = FsmcModel::new(t, 3, vec![1.0; 2], vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(m.out().iter().all(|&v| v >= 0.999 * EPS_FLOOR));
        assert!((m.out_row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_weights_normalizes_groups() {
        let t = Arc::new(build_ge_trellis());
        let g = t.group(0, 1).to_vec();
        let mut trans = vec![1.0; 8];
        trans[g[0]] = 0.1;
        trans[g[1]] = 0.3;
        let m = FsmcModel::from_weights(t, 2, trans, vec![2.0; 16]).unwrap();
        assert!((m.trans()[g[0]] - 0.25).abs() < 1e-12);
        assert!((m.trans()[g[1]] - 0.75).abs() < 1e-12);
        assert!((m.out()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = ge_like();
        let back = FsmcModel::from_table(m.trellis_arc().clone(), &m.to_table()).unwrap();
        assert_eq!(back.trans(), m.trans());
        assert_eq!(back.out(), m.out());
        let ab = AuxBackwardParams::from_forward(&m, 1, 0).unwrap();
        assert_eq!(ab.n_ctx(), 4);
        let ab2 = AuxBackwardParams::from_table(m.trellis_arc().clone(), 2, 1, 0, &ab.to_table()).unwrap();
        assert_eq!(ab2.v(), ab.v());
    }

    #[test]
    fn from_forward_uses_centre_symbol() {
        let m = ge_like();
        let ab = AuxBackwardParams::from_forward(&m, 1, 1).unwrap();
        // context word (y_{l-1}, y_l, y_{l+1}) = (0, 1, 0) has index 2
        assert!((ab.get(0, 2) - m.weight(0, 1)).abs() < 1e-15);
        assert!((ab.get(0, 5) - m.weight(0, 0)).abs() < 1e-15);
    }

    #[test]
    fn backward_rejects_zero() {
        let t = Arc::new(build_pr_trellis(0, Alphabet::bpsk()).unwrap());
        assert!(AuxBackwardParams::new(t, 2, 0, 0, vec![1.0, 0.0, 1.0, 1.0]).is_err());
    }
}
