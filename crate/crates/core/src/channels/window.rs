//! Simulated input/output windows and their text export.

use std::fmt::Write as _;

use crate::error::{arg, Error, Result};

/// A realization of `2N` channel uses with `d1` extra outputs before and
/// `d2` after the window for context words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleWindow {
    pub x: Vec<usize>,
    /// Outputs including pads; `y[d1 + l]` belongs to step `l`.
    pub y: Vec<usize>,
    pub n_half: usize,
    pub d1: usize,
    pub d2: usize,
    pub seed: u64,
    pub n_inputs: usize,
    pub n_outputs: usize,
}

impl SampleWindow {
    pub fn new(
        x: Vec<usize>,
        y: Vec<usize>,
        d1: usize,
        d2: usize,
        seed: u64,
        n_inputs: usize,
        n_outputs: usize,
    ) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return arg("window length must be even (2N)");
        }
        if y.len() != x.len() + d1 + d2 {
            return arg("output length must equal input length plus pads");
        }
        if x.iter().any(|&v| v >= n_inputs) || y.iter().any(|&v| v >= n_outputs) {
            return arg("symbol index outside alphabet");
        }
        Ok(Self { n_half: x.len() / 2, x, y, d1, d2, seed, n_inputs, n_outputs })
    }

    /// Number of channel uses `2N`.
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Output of step `l` (pads excluded).
    pub fn y_at(&self, l: usize) -> usize {
        self.y[self.d1 + l]
    }

    /// Outputs of the window proper.
    pub fn y_core(&self) -> &[usize] {
        &self.y[self.d1..self.d1 + self.x.len()]
    }

    /// Context word of step `l` for widths `(d1, d2)`, `y_{l-d1}` most significant.
    pub fn context(&self, l: usize, d1: usize, d2: usize) -> usize {
        let start = self.d1 + l - d1;
        self.y[start..=start + d1 + d2].iter().fold(0, |acc, &y| acc * self.n_outputs + y)
    }

    /// Checks that the pads cover context widths `(d1, d2)`.
    pub fn require_pads(&self, d1: usize, d2: usize) -> Result<()> {
        if self.d1 < d1 || self.d2 < d2 {
            return arg(format!(
                "window pads ({}, {}) do not cover context widths ({d1}, {d2})",
                self.d1, self.d2
            ));
        }
        Ok(())
    }

    /// Copy restricted to steps `[lo, hi)`; neighbouring outputs become the pads.
    pub fn slice(&self, lo: usize, hi: usize) -> Result<Self> {
        if lo > hi || hi > self.len() || !(hi - lo).is_multiple_of(2) {
            return arg("slice bounds must be ordered, inside the window, and of even length");
        }
        let y = self.y[lo..self.d1 + hi + self.d2].to_vec();
        Self::new(self.x[lo..hi].to_vec(), y, self.d1, self.d2, self.seed, self.n_inputs, self.n_outputs)
    }

    /// Text export: two header lines, then one `x y` pair per step. Pad
    /// outputs appear as `- y` lines.
    pub fn to_text(&self, config_hash: &str) -> String {
        let mut s = String::with_capacity(8 * self.y.len() + 128);
        let _ = writeln!(s, "# seed={} config={}", self.seed, config_hash);
        let _ = writeln!(
            s,
            "# n_half={} d1={} d2={} inputs={} outputs={}",
            self.n_half, self.d1, self.d2, self.n_inputs, self.n_outputs
        );
        for (i, &y) in self.y.iter().enumerate() {
            if i < self.d1 || i >= self.d1 + self.len() {
                let _ = writeln!(s, "- {y}");
            } else {
                let _ = writeln!(s, "{} {}", self.x[i - self.d1], y);
            }
        }
        s
    }

    /// Parses [`SampleWindow::to_text`] output; returns the window and config hash.
    pub fn from_text(text: &str) -> Result<(Self, String)> {
        let mut lines = text.lines().enumerate();
        let perr = |line: usize, msg: &str| Error::Parse { line: line + 1, msg: msg.to_string() };
        let (i0, h0) = lines.next().ok_or_else(|| perr(0, "empty input"))?;
        let (i1, h1) = lines.next().ok_or_else(|| perr(1, "missing second header"))?;
        let kv = |line: &str, i: usize| -> Result<Vec<(String, String)>> {
            let body = line.strip_prefix("# ").ok_or_else(|| perr(i, "header must start with '# '"))?;
            body.split_whitespace()
                .map(|t| {
                    t.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| perr(i, "malformed header field"))
                })
                .collect()
        };
        let get = |fields: &[(String, String)], key: &str, i: usize| -> Result<String> {
            fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| perr(i, &format!("missing header field {key}")))
        };
        let f0 = kv(h0, i0)?;
        let f1 = kv(h1, i1)?;
        let num = |fields: &[(String, String)], key: &str, i: usize| -> Result<u64> {
            get(fields, key, i)?.parse().map_err(|_| perr(i, &format!("bad number for {key}")))
        };
        let seed = num(&f0, "seed", i0)?;
        let hash = get(&f0, "config", i0)?;
        let d1 = num(&f1, "d1", i1)? as usize;
        let d2 = num(&f1, "d2", i1)? as usize;
        let n_inputs = num(&f1, "inputs", i1)? as usize;
        let n_outputs = num(&f1, "outputs", i1)? as usize;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, line) in lines {
            let mut it = line.split_whitespace();
            let (a, b) = match (it.next(), it.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(perr(i, "expected two fields")),
            };
            if a != "-" {
                x.push(a.parse().map_err(|_| perr(i, "bad input symbol"))?);
            }
            y.push(b.parse().map_err(|_| perr(i, "bad output symbol"))?);
        }
        let w = Self::new(x, y, d1, d2, seed, n_inputs, n_outputs)?;
        Ok((w, hash))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SampleWindow {
        SampleWindow::new(vec![0, 1, 1, 0], vec![2, 0, 1, 2, 1, 0], 1, 1, 9, 2, 3).unwrap()
    }

    #[test]
    fn context_words() {
        let w = sample();
        assert_eq!(w.y_at(0), 0);
        assert_eq!(w.context(0, 0, 0), 0);
        // (y_{-1}, y_0, y_1) = (2, 0, 1)
        assert_eq!(w.context(0, 1, 1), 2 * 9 + 1);
        assert_eq!(w.context(3, 1, 1), 2 * 9 + 3 + 0);
        assert!(w.require_pads(2, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let w = sample();
        let text = w.to_text("abc123");
        assert!(text.starts_with("# seed=9 config=abc123\n"));
        let (back, hash) = SampleWindow::from_text(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(hash, "abc123");
    }

    #[test]
    fn slicing_keeps_pads() {
        let w = sample();
        let s = w.slice(2, 4).unwrap();
        assert_eq!(s.x, vec![1, 0]);
        assert_eq!((s.d1, s.d2), (1, 1));
        assert_eq!(s.y, vec![1, 2, 1, 0]);
    }

    #[test]
    fn rejects_inconsistent_lengths() {
        assert!(SampleWindow::new(vec![0, 1], vec![0], 0, 0, 0, 2, 2).is_err());
        assert!(SampleWindow::new(vec![0], vec![0], 0, 0, 0, 2, 2).is_err());
    }
}
