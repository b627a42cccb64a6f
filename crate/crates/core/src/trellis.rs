//! Alphabets, trellis sections and stationary sources.
//!
//! States, inputs and branches are dense indices. Labels live on the
//! [`Alphabet`] and are only consulted when mapping to channel levels.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{arg, Error, Result};

/// Upper limit on trellis states accepted by the builders.
pub const MAX_STATES: usize = 1 << 20;
/// Upper limit on trellis branches accepted by the builders.
pub const MAX_BRANCHES: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    labels: Vec<f64>,
}

impl Alphabet {
    pub fn new(labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return arg("alphabet must be nonempty");
        }
        for (i, a) in labels.iter().enumerate() {
            if !a.is_finite() {
                return arg("alphabet labels must be finite");
            }
            if labels[..i].contains(a) {
                return arg(format!("duplicate alphabet label {a}"));
            }
        }
        Ok(Self { labels })
    }

    /// Antipodal binary alphabet {-1, +1}.
    pub fn bpsk() -> Self {
        Self { labels: vec![-1.0, 1.0] }
    }

    /// Binary alphabet {0, 1}.
    pub fn binary() -> Self {
        Self { labels: vec![0.0, 1.0] }
    }

    /// Index alphabet {0, 1, ..., k-1}, used for quantizer outputs.
    pub fn indices(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| i as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> f64 {
        self.labels[index]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn index_of(&self, label: f64) -> Option<usize> {
        self.labels.iter().position(|&a| a == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Branch {
    pub id: usize,
    pub s_prev: usize,
    pub x: usize,
    pub s_next: usize,
}

/// Time-invariant trellis section.
#[derive(Debug, Clone)]
pub struct TrellisSection {
    n_states: usize,
    input: Alphabet,
    branches: Vec<Branch>,
    controllable: bool,
    groups: Vec<Vec<usize>>,
    by_input: Vec<Vec<usize>>,
}

impl TrellisSection {
    /// Builds a section from `(s_prev, x, s_next)` triples; ids follow list order.
    ///
    /// Duplicates are accepted here so that [`validate_trellis`] can report them.
    pub fn new(
        n_states: usize,
        input: Alphabet,
        triples: &[(usize, usize, usize)],
        controllable: bool,
    ) -> Result<Self> {
        if n_states == 0 {
            return arg("trellis needs at least one state");
        }
        if n_states > MAX_STATES {
            return Err(Error::Capacity(format!("{n_states} states exceeds limit {MAX_STATES}")));
        }
        if triples.len() > MAX_BRANCHES {
            return Err(Error::Capacity(format!(
                "{} branches exceeds limit {MAX_BRANCHES}",
                triples.len()
            )));
        }
        let nx = input.len();
        let mut branches = Vec::with_capacity(triples.len());
        let mut groups = vec![Vec::new(); n_states * nx];
        let mut by_input = vec![Vec::new(); nx];
        for (id, &(s_prev, x, s_next)) in triples.iter().enumerate() {
            if s_prev >= n_states || s_next >= n_states || x >= nx {
                return arg(format!("branch {id} ({s_prev},{x},{s_next}) out of range"));
            }
            branches.push(Branch { id, s_prev, x, s_next });
            groups[s_prev * nx + x].push(id);
            by_input[x].push(id);
        }
        Ok(Self { n_states, input, branches, controllable, groups, by_input })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn input(&self) -> &Alphabet {
        &self.input
    }

    pub fn n_inputs(&self) -> usize {
        self.input.len()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, id: usize) -> Branch {
        self.branches[id]
    }

    pub fn controllable(&self) -> bool {
        self.controllable
    }

    /// Branch ids leaving `s_prev` under input `x`, ascending.
    pub fn group(&self, s_prev: usize, x: usize) -> &[usize] {
        &self.groups[s_prev * self.input.len() + x]
    }

    /// Branch ids carrying input `x`, ascending.
    pub fn with_input(&self, x: usize) -> &[usize] {
        &self.by_input[x]
    }

    /// Looks up the branch id of a triple.
    pub fn find(&self, s_prev: usize, x: usize, s_next: usize) -> Option<usize> {
        self.group(s_prev, x).iter().copied().find(|&b| self.branches[b].s_next == s_next)
    }

    /// Text dump, one `id s_prev x s_next` line per branch.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for b in &self.branches {
            let _ = writeln!(out, "{} {} {} {}", b.id, b.s_prev, b.x, b.s_next);
        }
        out
    }
}

/// Partial-response trellis of memory `m`.
///
/// State `s` encodes the last `m` inputs with `x_{l-1}` in the lowest
/// base-|X| digit, so input `x` moves `s` to `(s * |X| + x) mod |X|^m`.
pub fn build_pr_trellis(m: usize, input: Alphabet) -> Result<TrellisSection> {
    let nx = input.len();
    let n_states = checked_pow(nx, m)?;
    let mut triples = Vec::with_capacity(n_states * nx);
    for s in 0..n_states {
        for x in 0..nx {
            triples.push((s, x, (s * nx + x) % n_states));
        }
    }
    TrellisSection::new(n_states, input, &triples, true)
}

/// Two-state Gilbert–Elliott section, state 0 good and state 1 bad.
pub fn build_ge_trellis() -> TrellisSection {
    build_full_trellis(2, Alphabet::binary()).expect("fixed small trellis")
}

/// Fully connected section with data-independent transitions.
pub fn build_full_trellis(n_states: usize, input: Alphabet) -> Result<TrellisSection> {
    if n_states == 0 {
        return arg("trellis needs at least one state");
    }
    let total = n_states
        .checked_mul(n_states)
        .and_then(|v| v.checked_mul(input.len()))
        .filter(|&v| v <= MAX_BRANCHES)
        .ok_or_else(|| Error::Capacity(format!("{n_states}-state full trellis too large")))?;
    let mut triples = Vec::with_capacity(total);
    for s in 0..n_states {
        for x in 0..input.len() {
            for t in 0..n_states {
                triples.push((s, x, t));
            }
        }
    }
    TrellisSection::new(n_states, input, &triples, n_states == 1)
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    let mut v: usize = 1;
    for _ in 0..exp {
        v = v
            .checked_mul(base)
            .filter(|&v| v <= MAX_STATES)
            .ok_or_else(|| Error::Capacity(format!("{base}^{exp} states exceeds limit {MAX_STATES}")))?;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    DuplicateBranch { s_prev: usize, x: usize, s_next: usize, ids: Vec<usize> },
    UnreachableState(usize),
    DanglingState(usize),
    MissingInput { s_prev: usize, x: usize },
    /// Successor sets of one state differ across inputs although the
    /// section is not controllable.
    MixedConnectivity { s_prev: usize },
    ControllabilityMismatch { declared: bool, actual: bool },
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }
}

pub fn validate_trellis(ts: &TrellisSection) -> ValidationReport {
    let mut findings = Vec::new();
    let nx = ts.n_inputs();

    let mut seen: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    for b in ts.branches() {
        seen.entry((b.s_prev, b.x, b.s_next)).or_default().push(b.id);
    }
    for ((s_prev, x, s_next), ids) in seen {
        if ids.len() > 1 {
            findings.push(Finding::DuplicateBranch { s_prev, x, s_next, ids });
        }
    }

    let mut reach = vec![false; ts.n_states()];
    let mut queue = VecDeque::from([0usize]);
    reach[0] = true;
    while let Some(s) = queue.pop_front() {
        for x in 0..nx {
            for &b in ts.group(s, x) {
                let t = ts.branch(b).s_next;
                if !reach[t] {
                    reach[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    for (s, &r) in reach.iter().enumerate() {
        if !r {
            findings.push(Finding::UnreachableState(s));
        }
    }

    let mut actual_controllable = true;
    for s in 0..ts.n_states() {
        let counts: Vec<usize> = (0..nx).map(|x| ts.group(s, x).len()).collect();
        if counts.iter().all(|&c| c == 0) {
            findings.push(Finding::DanglingState(s));
            continue;
        }
        for (x, &c) in counts.iter().enumerate() {
            if c == 0 {
                findings.push(Finding::MissingInput { s_prev: s, x });
            }
            if c > 1 {
                actual_controllable = false;
            }
        }
    }
    if !actual_controllable {
        for s in 0..ts.n_states() {
            let succ = |x: usize| {
                let mut v: Vec<usize> = ts.group(s, x).iter().map(|&b| ts.branch(b).s_next).collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            let first = succ(0);
            if (1..nx).any(|x| succ(x) != first) {
                findings.push(Finding::MixedConnectivity { s_prev: s });
            }
        }
    }
    if actual_controllable != ts.controllable() {
        findings.push(Finding::ControllabilityMismatch {
            declared: ts.controllable(),
            actual: actual_controllable,
        });
    }
    ValidationReport { findings }
}

/// Stationary memoryless input source.
#[derive(Debug, Clone)]
pub struct Source {
    alphabet: Alphabet,
    pmf: Vec<f64>,
}

impl Source {
    /// Independent, uniformly distributed inputs.
    pub fn iud(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        Self { alphabet, pmf: vec![1.0 / n as f64; n] }
    }

    pub fn new(alphabet: Alphabet, pmf: Vec<f64>) -> Result<Self> {
        if pmf.len() != alphabet.len() {
            return arg("source pmf length differs from alphabet size");
        }
        if pmf.iter().any(|&p| !(p >= 0.0)) || (pmf.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return arg("source pmf must be nonnegative and sum to 1");
        }
        Ok(Self { alphabet, pmf })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.pmf[x]
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.pmf.len() as f64;
        self.pmf.iter().all(|&p| (p - u).abs() < 1e-15)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pr_sizes() {
        for (m, ns, nb) in [(2, 4, 8), (0, 1, 2), (3, 8, 16)] {
            let t = build_pr_trellis(m, Alphabet::bpsk()).unwrap();
            assert_eq!((t.n_states(), t.n_branches()), (ns, nb));
            assert!(t.controllable());
            assert!(validate_trellis(&t).is_valid());
        }
    }

    #[test]
    fn pr_capacity_error() {
        assert!(matches!(build_pr_trellis(21, Alphabet::bpsk()), Err(Error::Capacity(_))));
    }

    #[test]
    fn pr_word_walk_lands_on_label() {
        let nx = 3;
        let m = 3;
        let t = build_pr_trellis(m, Alphabet::indices(nx).unwrap()).unwrap();
        for start in 0..t.n_states() {
            for word in 0..27usize {
                let digits = [word / 9, (word / 3) % 3, word % 3];
                let mut s = start;
                for &x in &digits {
                    s = t.branch(t.group(s, x)[0]).s_next;
                }
                // last input is the lowest digit
                assert_eq!(s, digits[0] * 9 + digits[1] * 3 + digits[2]);
            }
        }
    }

    #[test]
    fn ge_structure() {
        let t = build_ge_trellis();
        assert_eq!((t.n_states(), t.n_branches()), (2, 8));
        assert!(!t.controllable());
        for s in 0..2 {
            for x in 0..2 {
                assert_eq!(t.group(s, x).len(), 2);
            }
        }
        assert!(validate_trellis(&t).is_valid());
    }

    #[test]
    fn full_sizes() {
        let t = build_full_trellis(16, Alphabet::bpsk()).unwrap();
        assert_eq!(t.n_branches(), 512);
        assert!(!t.controllable());
        let one = build_full_trellis(1, Alphabet::bpsk()).unwrap();
        assert_eq!(one.n_branches(), 2);
        assert!(one.controllable());
        assert!(validate_trellis(&one).is_valid());
    }

    #[test]
    fn duplicate_triple_reported() {
        let t = TrellisSection::new(1, Alphabet::bpsk(), &[(0, 0, 0), (0, 1, 0), (0, 1, 0)], false)
            .unwrap();
        let r = validate_trellis(&t);
        assert!(r.findings.iter().any(|f| matches!(f, Finding::DuplicateBranch { ids, .. } if ids == &vec![1, 2])));
    }

    #[test]
    fn every_single_deletion_of_ge_is_reported() {
        let full = build_ge_trellis();
        for del in 0..full.n_branches() {
            let triples: Vec<_> = full
                .branches()
                .iter()
                .filter(|b| b.id != del)
                .map(|b| (b.s_prev, b.x, b.s_next))
                .collect();
            let t = TrellisSection::new(2, Alphabet::binary(), &triples, false).unwrap();
            let r = validate_trellis(&t);
            assert!(
                r.findings.iter().any(|f| matches!(f, Finding::MixedConnectivity { .. })),
                "deleting {del}: {:?}",
                r.findings
            );
        }
    }

    #[test]
    fn unreachable_and_dangling() {
        let t = TrellisSection::new(3, Alphabet::binary(), &[(0, 0, 0), (0, 1, 0), (2, 0, 1), (2, 1, 1)], true)
            .unwrap();
        let r = validate_trellis(&t);
        assert!(r.findings.contains(&Finding::UnreachableState(1)));
        assert!(r.findings.contains(&Finding::UnreachableState(2)));
        assert!(r.findings.contains(&Finding::DanglingState(1)));
    }

    #[test]
    fn branch_bijection_and_dump() {
        let t = build_pr_trellis(2, Alphabet::bpsk()).unwrap();
        for b in t.branches() {
            assert_eq!(t.find(b.s_prev, b.x, b.s_next), Some(b.id));
        }
        let dump = t.dump();
        assert_eq!(dump.lines().count(), 8);
        assert_eq!(dump.lines().nth(3).unwrap(), "3 1 1 3");
    }

    #[test]
    fn alphabet_rules() {
        assert!(Alphabet::new(vec![]).is_err());
        assert!(Alphabet::new(vec![1.0, 1.0]).is_err());
        let a = Alphabet::bpsk();
        assert_eq!(a.index_of(1.0), Some(1));
        let s = Source::iud(a);
        assert!((s.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(s.is_uniform());
    }
}
