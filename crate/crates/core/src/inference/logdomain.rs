//! Reference log-domain forward–backward, used to cross-check the scaled
//! recursions.

use crate::channels::window::SampleWindow;
use crate::error::{Error, Result};
use crate::inference::bcjr::{PosteriorMarginals, StepMetrics};

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn log_alphas(m: &StepMetrics, w: &SampleWindow) -> Result<Vec<Vec<f64>>> {
    m.check(w)?;
    let t = m.trellis();
    let mut a = vec![f64::NEG_INFINITY; t.n_states()];
    a[0] = 0.0;
    let mut all = vec![a.clone()];
    for l in 0..w.len() {
        let ctx = m.context(w, l);
        let mut next = vec![f64::NEG_INFINITY; t.n_states()];
        for &b in m.active(w, l) {
            let br = t.branch(b);
            next[br.s_next] = log_add(next[br.s_next], a[br.s_prev] + m.weight(ctx, b).ln());
        }
        a = next;
        all.push(a.clone());
    }
    Ok(all)
}

pub fn forward_logz_log(m: &StepMetrics, w: &SampleWindow) -> Result<f64> {
    let a = log_alphas(m, w)?;
    let z = a.last().expect("nonempty").iter().fold(f64::NEG_INFINITY, |acc, &v| log_add(acc, v));
    if z.is_finite() {
        Ok(z)
    } else {
        Err(Error::Numeric("no admissible branch sequence".into()))
    }
}

pub fn posteriors_log(m: &StepMetrics, w: &SampleWindow) -> Result<PosteriorMarginals> {
    let t = m.trellis();
    let alphas = log_alphas(m, w)?;
    let log_z = forward_logz_log(m, w)?;
    let nb = t.n_branches();
    let n = w.len();
    let mut probs = vec![0.0; n * nb];
    let mut beta = vec![0.0; t.n_states()];
    for l in (0..n).rev() {
        let ctx = m.context(w, l);
        let mut next = vec![f64::NEG_INFINITY; t.n_states()];
        for &b in m.active(w, l) {
            let br = t.branch(b);
            let g = m.weight(ctx, b).ln() + beta[br.s_next];
            probs[l * nb + b] = (alphas[l][br.s_prev] + g - log_z).exp();
            next[br.s_prev] = log_add(next[br.s_prev], g);
        }
        beta = next;
    }
    Ok(PosteriorMarginals { n_branches: nb, probs, log_z })
}
