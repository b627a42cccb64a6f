//! Nelder–Mead simplex search inside a box, alone or seeded by Sobol samples.

use crate::baseline::sobol::Sobol;
use crate::error::{arg, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const TINY: f64 = 1e-300;

/// A cost function on a box with a hard cap on the number of calls.
///
/// Points outside the box cost `+inf` without calling the function or
/// using budget; `NaN` costs count as `+inf`. The best point seen so far
/// and every improvement are recorded.
type Cost<'a> = Box<dyn FnMut(&[f64]) -> f64 + 'a>;

pub struct BoxedObjective<'a> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    f: Cost<'a>,
    budget: usize,
    calls: usize,
    best: Option<(Vec<f64>, f64)>,
    history: Vec<(usize, f64)>,
}

impl std::fmt::Debug for BoxedObjective<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoxedObjective")
            .field("dim", &self.dim())
            .field("budget", &self.budget)
            .field("calls", &self.calls)
            .finish()
    }
}

impl<'a> BoxedObjective<'a> {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, budget: usize, f: impl FnMut(&[f64]) -> f64 + 'a) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return arg("box bounds must be nonempty and of equal length");
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return arg("every box side needs finite lower < upper");
        }
        Ok(Self { lower, upper, f: Box::new(f), budget, calls: 0, best: None, history: Vec::new() })
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(d: usize, budget: usize, f: impl FnMut(&[f64]) -> f64 + 'a) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d], budget, f)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn call_budget(&self) -> usize {
        self.budget
    }

    pub fn call_count(&self) -> usize {
        self.calls
    }

    pub fn exhausted(&self) -> bool {
        self.calls >= self.budget
    }

    /// Best `(x, f)` evaluated so far.
    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(x, f)| (x.as_slice(), *f))
    }

    /// `(call number, cost)` each time the best cost improved.
    pub fn history(&self) -> &[(usize, f64)] {
        &self.history
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.lower).zip(&self.upper).map(|((u, l), h)| l + u * (h - l)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| (*l..=*u).contains(v))
    }

    /// Cost of `x`; `None` once the budget is spent.
    pub fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        if !self.contains(x) {
            return Some(f64::INFINITY);
        }
        self.calls += 1;
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        if self.best.as_ref().is_none_or(|(_, b)| v < *b) {
            self.best = Some((x.to_vec(), v));
            self.history.push((self.calls, v));
        }
        Some(v)
    }
}

/// Result of a simplex or Soblex run.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// Calls made by this run.
    pub evals: usize,
    /// The run stopped because the call budget ran out.
    pub budget_exhausted: bool,
}

fn rank(points: &[Vec<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let d = points[0].len();
    let mut m: Vec<Vec<f64>> = points[1..].iter().map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect()).collect();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(TINY);
    let mut r = 0;
    for c in 0..d {
        let piv = (r..m.len()).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()));
        let Some(p) = piv else { break };
        if m[p][c].abs() <= 1e-10 * scale {
            continue;
        }
        m.swap(r, p);
        for i in r + 1..m.len() {
            let k = m[i][c] / m[r][c];
            for j in c..d {
                m[i][j] -= k * m[r][j];
            }
        }
        r += 1;
    }
    r
}

fn centroid(simplex: &[Vec<f64>], skip: usize) -> Vec<f64> {
    let d = simplex[0].len();
    let mut c = vec![0.0; d];
    for (i, p) in simplex.iter().enumerate() {
        if i != skip {
            c.iter_mut().zip(p).for_each(|(c, v)| *c += v);
        }
    }
    c.iter_mut().for_each(|v| *v /= (simplex.len() - 1) as f64);
    c
}

fn towards(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect()
}

/// Downhill simplex from `init` (`d + 1` affinely independent points).
///
/// Stops when `2 |f_hi - f_lo| <= frac_tol (|f_hi| + |f_lo|)`, when the
/// simplex collapses to a point, or when the budget runs out; in the last
/// case the best point seen is returned with the flag set.
pub fn nelder_mead(obj: &mut BoxedObjective<'_>, init: &[Vec<f64>], frac_tol: f64) -> Result<Minimum> {
    let d = obj.dim();
    if init.len() != d + 1 || init.iter().any(|p| p.len() != d) {
        return arg(format!("simplex needs {} points of dimension {d}", d + 1));
    }
    if !(frac_tol >= 0.0) {
        return arg("fractional tolerance must be nonnegative");
    }
    let start = obj.call_count();
    let mut simplex: Vec<Vec<f64>> = init.to_vec();
    if simplex.iter().any(|p| !obj.contains(p)) {
        return arg("initial simplex leaves the box");
    }
    if rank(&simplex) < d {
        return arg("initial simplex is degenerate");
    }
    let mut fv = Vec::with_capacity(d + 1);
    for p in &simplex {
        match obj.eval(p) {
            Some(v) => fv.push(v),
            None => return Ok(best_so_far(obj, start, true)),
        }
    }
    let mut order: Vec<usize> = (0..=d).collect();
    loop {
        order.sort_by(|&i, &j| fv[i].total_cmp(&fv[j]));
        let (lo, hi, nhi) = (order[0], order[d], order[d - 1]);
        let (flo, fhi) = (fv[lo], fv[hi]);
        let spread_ok = if flo.is_finite() && fhi.is_finite() {
            2.0 * (fhi - flo).abs() <= frac_tol * (fhi.abs() + flo.abs()) + TINY
        } else {
            flo == fhi
        };
        let collapsed = simplex.iter().all(|p| p == &simplex[lo]);
        if spread_ok || collapsed {
            return Ok(Minimum { x: simplex[lo].clone(), f: flo, evals: obj.call_count() - start, budget_exhausted: false });
        }
        let c = centroid(&simplex, hi);
        let xr = towards(&c, &simplex[hi], -REFLECT);
        let Some(fr) = obj.eval(&xr) else { return Ok(best_so_far(obj, start, true)) };
        if fr < flo {
            let xe = towards(&c, &xr, EXPAND);
            let Some(fe) = obj.eval(&xe) else { return Ok(best_so_far(obj, start, true)) };
            if fe < fr {
                (simplex[hi], fv[hi]) = (xe, fe);
            } else {
                (simplex[hi], fv[hi]) = (xr, fr);
            }
            continue;
        }
        if fr < fv[nhi] {
            (simplex[hi], fv[hi]) = (xr, fr);
            continue;
        }
        let (xc, outside) = if fr < fhi { (towards(&c, &xr, CONTRACT), true) } else { (towards(&c, &simplex[hi], CONTRACT), false) };
        let Some(fc) = obj.eval(&xc) else { return Ok(best_so_far(obj, start, true)) };
        if (outside && fc <= fr) || (!outside && fc < fhi) {
            (simplex[hi], fv[hi]) = (xc, fc);
            continue;
        }
        let best = simplex[lo].clone();
        for i in 0..=d {
            if i == lo {
                continue;
            }
            simplex[i] = towards(&best, &simplex[i], SHRINK);
            match obj.eval(&simplex[i]) {
                Some(v) => fv[i] = v,
                None => return Ok(best_so_far(obj, start, true)),
            }
        }
    }
}

fn best_so_far(obj: &BoxedObjective<'_>, start: usize, flag: bool) -> Minimum {
    let (x, f) = obj.best().map(|(x, f)| (x.to_vec(), f)).unwrap_or_else(|| (obj.lower.clone(), f64::INFINITY));
    Minimum { x, f, evals: obj.call_count() - start, budget_exhausted: flag }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoblexConfig {
    /// Sobol samples evaluated before the simplex starts.
    pub initial_budget: usize,
    pub frac_tol: f64,
    /// Index of the first Sobol point; disjoint offsets give independent runs.
    pub seed_offset: u32,
}

/// Sobol sampling followed by a simplex seeded with the lowest-cost samples.
///
/// The simplex takes the cheapest samples that keep it affinely
/// independent. If the samples span fewer than `d` directions the rest of
/// the simplex is filled with steps of 5% of the box width from the best
/// sample along unused coordinate axes.
pub fn soblex(obj: &mut BoxedObjective<'_>, cfg: &SoblexConfig) -> Result<Minimum> {
    let d = obj.dim();
    if cfg.initial_budget < d + 1 {
        return arg(format!("initial budget {} is below d + 1 = {}", cfg.initial_budget, d + 1));
    }
    if cfg.seed_offset as u64 + cfg.initial_budget as u64 > u32::MAX as u64 + 1 {
        return arg("Sobol index range exceeds 2^32");
    }
    let sob = Sobol::new(d)?;
    let start = obj.call_count();
    let mut u = vec![0.0; d];
    let mut samples: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.initial_budget);
    for i in 0..cfg.initial_budget {
        sob.point(cfg.seed_offset + i as u32, &mut u);
        let x = obj.from_unit(&u);
        match obj.eval(&x) {
            Some(v) => samples.push((x, v)),
            None => return Ok(best_so_far(obj, start, true)),
        }
    }
    samples.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut simplex: Vec<Vec<f64>> = vec![samples[0].0.clone()];
    for (x, _) in &samples[1..] {
        if simplex.len() == d + 1 {
            break;
        }
        simplex.push(x.clone());
        if rank(&simplex) < simplex.len() - 1 {
            simplex.pop();
        }
    }
    let mut axis = 0;
    while simplex.len() < d + 1 && axis < d {
        let mut p = simplex[0].clone();
        let w = 0.05 * (obj.upper[axis] - obj.lower[axis]);
        p[axis] = if p[axis] + w <= obj.upper[axis] { p[axis] + w } else { p[axis] - w };
        simplex.push(p);
        if rank(&simplex) < simplex.len() - 1 {
            simplex.pop();
        }
        axis += 1;
    }
    let mut m = nelder_mead(obj, &simplex, cfg.frac_tol)?;
    if let Some((x, f)) = obj.best() {
        if f < m.f {
            m.x = x.to_vec();
            m.f = f;
        }
    }
    m.evals = obj.call_count() - start;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn axis_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
        let mut s = vec![x0.to_vec()];
        for i in 0..x0.len() {
            let mut p = x0.to_vec();
            p[i] += step;
            s.push(p);
        }
        s
    }

    fn rosen(x: &[f64]) -> f64 {
        100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)
    }

    #[test]
    fn quadratic_bowl() {
        let mut obj = BoxedObjective::new(vec![-5.0; 3], vec![5.0; 3], 100_000, |x: &[f64]| x.iter().map(|v| v * v).sum()).unwrap();
        let m = nelder_mead(&mut obj, &axis_simplex(&[1.0, -2.0, 0.5], 0.7), 1e-12).unwrap();
        assert!(m.f <= 1e-8, "{m:?}");
        assert!(!m.budget_exhausted);
    }

    #[test]
    fn rosenbrock_valley() {
        let mut obj = BoxedObjective::new(vec![-5.0; 2], vec![5.0; 2], 100_000, rosen).unwrap();
        let m = nelder_mead(&mut obj, &axis_simplex(&[-1.2, 1.0], 0.1), 1e-12).unwrap();
        assert!(m.f <= 1e-6, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-2 && (m.x[1] - 1.0).abs() < 1e-2);
    }

    #[test]
    fn tighter_tolerance_is_not_worse() {
        let run = |tol| {
            let mut obj = BoxedObjective::new(vec![-5.0; 2], vec![5.0; 2], 100_000, rosen).unwrap();
            nelder_mead(&mut obj, &axis_simplex(&[-1.2, 1.0], 0.1), tol).unwrap()
        };
        let mut prev = f64::INFINITY;
        for tol in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let m = run(tol);
            assert!(m.f <= prev, "tol {tol}: {} > {prev}", m.f);
            prev = m.f;
        }
    }

    #[test]
    fn budget_is_enforced() {
        let mut obj = BoxedObjective::new(vec![-5.0; 2], vec![5.0; 2], 37, rosen).unwrap();
        let m = nelder_mead(&mut obj, &axis_simplex(&[-1.2, 1.0], 0.1), 0.0).unwrap();
        assert!(m.budget_exhausted);
        assert_eq!(obj.call_count(), 37);
        assert_eq!(m.f, obj.best().unwrap().1);
        assert!(obj.eval(&[0.0, 0.0]).is_none());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut obj = BoxedObjective::unit(2, 100, |x: &[f64]| x[0]).unwrap();
        assert!(nelder_mead(&mut obj, &[vec![0.1, 0.1], vec![0.2, 0.2], vec![0.3, 0.3]], 1e-6).is_err());
        assert!(nelder_mead(&mut obj, &[vec![0.1, 0.1], vec![0.2, 0.2]], 1e-6).is_err());
        assert!(BoxedObjective::new(vec![0.0], vec![0.0], 1, |_: &[f64]| 0.0).is_err());
        assert!(soblex(&mut obj, &SoblexConfig { initial_budget: 2, frac_tol: 1e-4, seed_offset: 0 }).is_err());
    }

    #[test]
    fn points_stay_in_the_box() {
        let mut obj = BoxedObjective::unit(2, 10_000, |x: &[f64]| {
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            (x[0] + 3.0).powi(2) + (x[1] - 0.4).powi(2)
        })
        .unwrap();
        let m = nelder_mead(&mut obj, &axis_simplex(&[0.5, 0.5], 0.2), 1e-12).unwrap();
        assert!(m.x[0] < 1e-6 && (m.x[1] - 0.4).abs() < 1e-4, "{m:?}");
    }

    #[test]
    fn soblex_with_minimal_budget_still_converges() {
        // the first four 3-d points are affinely dependent, so the axis fill-in kicks in
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (v - 0.1 * (i + 1) as f64).powi(2)).sum::<f64>();
        let mut obj = BoxedObjective::unit(3, 10_000, f).unwrap();
        let m = soblex(&mut obj, &SoblexConfig { initial_budget: 4, frac_tol: 1e-12, seed_offset: 0 }).unwrap();
        assert!(m.f < 1e-8, "{m:?}");
        assert!(m.evals > 4);
        let best_sample = crate::baseline::sobol_points(3, 4, 0).unwrap().iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
        assert!(obj.history().iter().any(|&(call, v)| call <= 4 && v == best_sample));
    }

    #[test]
    fn soblex_is_deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] - 0.7).abs() + (3.0 * x[2]).sin();
        let cfg = SoblexConfig { initial_budget: 64, frac_tol: 1e-6, seed_offset: 128 };
        let mut a = BoxedObjective::unit(3, 5000, f).unwrap();
        let mut b = BoxedObjective::unit(3, 5000, f).unwrap();
        assert_eq!(soblex(&mut a, &cfg).unwrap(), soblex(&mut b, &cfg).unwrap());
        assert_eq!(a.history(), b.history());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn soblex_never_worse_than_its_best_sample(
            c in prop::collection::vec(0.0f64..1.0, 4),
            w in prop::collection::vec(0.5f64..20.0, 4),
            budget in 5usize..80,
            off in 0u32..1000,
        ) {
            // multimodal cost: a bowl plus ripples
            let f = |x: &[f64]| x.iter().zip(&c).zip(&w).map(|((x, c), w)| (x - c).powi(2) + 0.05 * (w * x).cos()).sum::<f64>();
            let mut samp = f64::INFINITY;
            let mut u = vec![0.0; 4];
            let s = Sobol::new(4).unwrap();
            for i in 0..budget {
                s.point(off + i as u32, &mut u);
                samp = samp.min(f(&u));
            }
            let mut obj = BoxedObjective::unit(4, 20_000, f).unwrap();
            let m = soblex(&mut obj, &SoblexConfig { initial_budget: budget, frac_tol: 1e-6, seed_offset: off }).unwrap();
            prop_assert!(m.f <= samp);
            prop_assert_eq!(m.evals, obj.call_count());
        }
    }
}
