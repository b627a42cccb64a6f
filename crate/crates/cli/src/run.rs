//! Wiring configs to channels, auxiliary models and optimizers.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use memrate::baseline::{soblex, upper_bound_cost, BoxedObjective, ModelChart, SoblexConfig};
use memrate::bounds::{
    estimate_rate, eval_upper, fading_csi_upper, fading_entropy_lb, sample_conditional_entropy, BoundEstimate,
    EntropyLbConfig, EvalPolicy,
};
use memrate::channels::pr::pr_conditional_entropy;
use memrate::channels::quantizer::{ch3_quantizer, eleven_tap_quantizer, epr4_quantizer};
use memrate::channels::{make_quantizer, FadingChannel, GeChannel, OriginalChannel, PrChannel, SampleWindow};
use memrate::em::{
    averaging, backward_from, closed_form_t4_pr, diff_optimized_pr, natural_fading, optimize_diff, optimize_lower,
    optimize_upper, truncation, DiffReference, GammaPolicy, GammaSchedule, OptConfig, OptTrace, Windows,
};
use memrate::inference::FsmcModel;
use memrate::trellis::{build_full_trellis, Alphabet, Source};

use crate::config::{ChannelSpec, ExperimentConfig, GammaSpec, InitMode, Kind, QuantizerSpec, WindowMode};

/// One unit of work: a bound kind at one SNR point for one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub kind: Kind,
    pub snr_db: f64,
    pub repeat: usize,
    /// Master seed of this repeat: `run.seed + repeat`.
    pub seed: u64,
}

/// A row of `trace.csv` without the run identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub bound_bits: f64,
    /// `NaN` when there is none.
    pub stderr_bits: f64,
    pub gamma: f64,
    pub wall_ms: f64,
    pub kept: usize,
}

#[derive(Debug, Clone)]
pub struct JobResult {
    pub job: Job,
    pub value_bits: f64,
    pub stderr_bits: f64,
    pub n_half: usize,
    pub iters: usize,
    pub wall_ms: f64,
    pub trace: Vec<TraceRow>,
    pub warnings: Vec<String>,
}

/// Jobs in output order: SNR points outermost, then repeats, then kinds.
pub fn plan(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = Vec::new();
    for &snr_db in &cfg.snr_db {
        for repeat in 0..cfg.repeats {
            for &kind in &cfg.kinds {
                jobs.push(Job { kind, snr_db, repeat, seed: cfg.seed.wrapping_add(repeat as u64) });
            }
        }
    }
    jobs
}

/// Human-readable plan for `--dry-run`.
pub fn describe(cfg: &ExperimentConfig, threads: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config hash {}", cfg.hash());
    let _ = writeln!(s, "output dir {}", cfg.out_dir);
    let _ = writeln!(s, "threads {threads}");
    s.push_str("resolved config:\n");
    for line in cfg.canonical().lines() {
        let _ = writeln!(s, "  {line}");
    }
    let jobs = plan(cfg);
    let _ = writeln!(s, "{} job(s):", jobs.len());
    for j in jobs {
        let _ = writeln!(s, "  {} snr_db={} repeat={} seed={}", j.kind.as_str(), j.snr_db, j.repeat, j.seed);
    }
    s
}

fn policy(cfg: &ExperimentConfig) -> EvalPolicy {
    EvalPolicy { burn_in: cfg.burn_in, block_len: cfg.block_len }
}

fn opt_config(cfg: &ExperimentConfig, iters: usize) -> OptConfig {
    OptConfig { max_iters: iters, tol_bits: cfg.tol_bits, patience: cfg.patience, policy: policy(cfg) }
}

/// Original channel at one SNR point.
pub fn build_channel(cfg: &ExperimentConfig, snr_db: f64) -> memrate::Result<OriginalChannel> {
    Ok(match &cfg.channel {
        ChannelSpec::Pr { h, quantizer } => {
            let input = Alphabet::bpsk();
            let sigma = PrChannel::from_snr_db(h.clone(), snr_db, ch3_quantizer(), input.clone())?.sigma();
            let q = match quantizer {
                QuantizerSpec::Ch3 => ch3_quantizer(),
                QuantizerSpec::Epr4 => epr4_quantizer(),
                QuantizerSpec::Fine => {
                    let energy: f64 = h.iter().map(|v| v * v).sum();
                    eleven_tap_quantizer((energy + sigma * sigma).sqrt())
                }
                QuantizerSpec::Thresholds(t) => make_quantizer(t)?,
            };
            OriginalChannel::Pr(PrChannel::new(h.clone(), sigma, q, input)?)
        }
        ChannelSpec::Ge { p_b, p_g, eps_g, eps_b } => OriginalChannel::Ge(GeChannel::new(*p_b, *p_g, *eps_g, *eps_b)?),
        ChannelSpec::Fading { fd_t } => OriginalChannel::Fading(FadingChannel::standard(*fd_t, snr_db)?),
    })
}

fn source(ch: &OriginalChannel) -> Source {
    match ch {
        OriginalChannel::Pr(_) => Source::iud(Alphabet::bpsk()),
        OriginalChannel::Ge(_) => Source::iud(Alphabet::binary()),
        OriginalChannel::Fading(c) => Source::iud(c.input_alphabet()),
    }
}

fn gamma_schedule(g: &GammaSpec) -> memrate::Result<GammaSchedule> {
    match g {
        GammaSpec::Integers => Ok(GammaSchedule::integers()),
        GammaSpec::HalvesAndHundred => Ok(GammaSchedule::halves_and_hundred()),
        GammaSpec::Fixed(v) => GammaSchedule::new(vec![*v], GammaPolicy::Fixed),
        GammaSpec::Set(v) => GammaSchedule::new(v.clone(), GammaPolicy::BestOfSet),
    }
}

fn trace_rows(t: &OptTrace, deterministic: bool) -> Vec<TraceRow> {
    t.records
        .iter()
        .map(|r| TraceRow {
            iter: r.iter,
            bound_bits: r.bound_bits,
            stderr_bits: r.stderr_bits,
            gamma: r.gamma,
            wall_ms: if deterministic { 0.0 } else { r.wall_ms },
            kept: r.kept,
        })
        .collect()
}

/// Everything one job needs, built once per job.
struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    job: &'a Job,
    ch: OriginalChannel,
    src: Source,
    pol: EvalPolicy,
    h_cache: Option<f64>,
    warnings: Vec<String>,
}

impl Setup<'_> {
    fn window(&self, pads: (usize, usize)) -> SampleWindow {
        self.ch.simulate(&self.src, self.cfg.n_half, pads, self.job.seed, 0)
    }

    fn windows<'w>(&'w self, fixed: &'w SampleWindow, pads: (usize, usize)) -> Windows<'w> {
        match self.cfg.window {
            WindowMode::Fixed => Windows::Fixed(fixed),
            WindowMode::Fresh => Windows::Fresh { channel: &self.ch, n_half: self.cfg.n_half, pads, seed: self.job.seed },
        }
    }

    fn entropy_lb(&mut self, fc: &FadingChannel) -> memrate::Result<BoundEstimate> {
        let e = fading_entropy_lb(fc, &EntropyLbConfig { delay: self.cfg.entropy_delay, quad_nodes: self.cfg.quad_nodes, ..EntropyLbConfig::default() })?;
        if let Some(w) = &e.warning {
            self.warnings.push(format!("output entropy bound: {w}"));
        }
        Ok(e)
    }

    /// `H(Y|X)` in nats: exact for partial response, sampled for
    /// Gilbert-Elliott, the entropy lower bound for fading.
    fn h_cond(&mut self, w: &SampleWindow) -> memrate::Result<f64> {
        if let Some(h) = self.h_cache {
            return Ok(h);
        }
        let h = match self.ch.clone() {
            OriginalChannel::Pr(c) => pr_conditional_entropy(&c),
            OriginalChannel::Ge(c) => sample_conditional_entropy(&c.model(), &self.src, w, &self.pol)?.value_nats,
            OriginalChannel::Fading(c) => self.entropy_lb(&c)?.value_nats,
        };
        self.h_cache = Some(h);
        Ok(h)
    }

    /// Finite-state law of the original channel, if it has one.
    fn original_law(&self) -> memrate::Result<Option<FsmcModel>> {
        match &self.ch {
            OriginalChannel::Fading(_) => Ok(None),
            c => Ok(Some(c.fsmc()?)),
        }
    }

    /// The starting auxiliary model, after any difference-function warm-up.
    fn initial_model(&mut self, w: &SampleWindow) -> memrate::Result<FsmcModel> {
        let cfg = self.cfg;
        let m = match (&self.ch, cfg.init) {
            (OriginalChannel::Pr(c), InitMode::Truncation) => truncation(c, cfg.aux.m_hat)?,
            (OriginalChannel::Pr(c), InitMode::DiffOptimized) => diff_optimized_pr(c, cfg.aux.m_hat, &self.src)?,
            (OriginalChannel::Fading(c), InitMode::Natural) => natural_fading(c, cfg.aux.k_theta, cfg.aux.k_a, cfg.aux.gain_steps, self.job.seed)?,
            (c, InitMode::Original) => c.fsmc()?,
            (c, InitMode::Averaging) => {
                let orig = c.fsmc()?;
                averaging(&orig, Arc::new(build_full_trellis(cfg.aux.states, orig.trellis().input().clone())?))?
            }
            _ => return Err(memrate::Error::Argument("init.mode does not apply to this channel".into())),
        };
        if cfg.init_diff_iters == 0 {
            return Ok(m);
        }
        let h = match &self.ch {
            OriginalChannel::Fading(_) => Some(self.h_cond(w)?),
            _ => None,
        };
        let orig = self.original_law()?;
        let reference = match (&orig, h) {
            (Some(o), _) => DiffReference::Model(o),
            (None, Some(h)) => DiffReference::Entropy(h),
            (None, None) => unreachable!("fading channels always have an entropy reference"),
        };
        let ws = self.windows(w, (0, 0));
        Ok(optimize_diff(m, reference, &self.src, &ws, &opt_config(cfg, cfg.init_diff_iters))?.params)
    }
}

fn from_estimate(job: &Job, e: &BoundEstimate, iters: usize, trace: Vec<TraceRow>) -> JobResult {
    JobResult {
        job: job.clone(),
        value_bits: e.value_bits,
        stderr_bits: e.stderr_bits(),
        n_half: e.n_half,
        iters,
        wall_ms: 0.0,
        trace,
        warnings: e.warning.iter().cloned().collect(),
    }
}

/// Runs one job. Single-threaded and deterministic given the job.
pub fn run_job(cfg: &ExperimentConfig, job: &Job) -> memrate::Result<JobResult> {
    let t0 = Instant::now();
    let ch = build_channel(cfg, job.snr_db)?;
    let src = source(&ch);
    let mut s = Setup { cfg, job, ch, src, pol: policy(cfg), h_cache: None, warnings: Vec::new() };
    let det = cfg.deterministic;
    let mut res = match job.kind {
        Kind::Rate => {
            let w = s.window((0, 0));
            let e = estimate_rate(&s.ch.fsmc()?, &s.src, &w, &s.pol)?;
            from_estimate(job, &e, 0, Vec::new())
        }
        Kind::Upper => {
            let w = s.window((0, 0));
            let init = s.initial_model(&w)?;
            let h = s.h_cond(&w)?;
            let ws = s.windows(&w, (0, 0));
            let o = optimize_upper(init, &s.src, &ws, h, &opt_config(cfg, cfg.iters))?;
            from_estimate(job, &o.bound, o.trace.records.len() - 1, trace_rows(&o.trace, det))
        }
        Kind::Diff => {
            let w = s.window((0, 0));
            let init = s.initial_model(&w)?;
            let orig = s.original_law()?;
            let reference = match &orig {
                Some(o) => DiffReference::Model(o),
                None => DiffReference::Entropy(s.h_cond(&w)?),
            };
            let ws = s.windows(&w, (0, 0));
            let o = optimize_diff(init, reference, &s.src, &ws, &opt_config(cfg, cfg.iters))?;
            from_estimate(job, &o.bound, o.trace.records.len() - 1, trace_rows(&o.trace, det))
        }
        Kind::Lower => {
            let pads = (cfg.aux.d1, cfg.aux.d2);
            let w = s.window(pads);
            let init = s.initial_model(&w)?;
            let ab = backward_from(&init, cfg.aux.d1, cfg.aux.d2)?;
            let t4 = match (&s.ch, cfg.closed_form_t4) {
                (OriginalChannel::Pr(c), true) => Some(closed_form_t4_pr(c, cfg.aux.m_hat, &s.src)?),
                _ => None,
            };
            let ws = s.windows(&w, pads);
            let o = optimize_lower(ab, &s.src, &ws, &gamma_schedule(&cfg.gamma)?, t4.as_deref(), &opt_config(cfg, cfg.iters))?;
            from_estimate(job, &o.bound, o.trace.records.len() - 1, trace_rows(&o.trace, det))
        }
        Kind::EntropyLb => {
            let OriginalChannel::Fading(c) = s.ch.clone() else { unreachable!("validated") };
            let e = s.entropy_lb(&c)?;
            from_estimate(job, &e, 0, Vec::new())
        }
        Kind::Csi => {
            let OriginalChannel::Fading(c) = &s.ch else { unreachable!("validated") };
            let e = fading_csi_upper(c, cfg.csi_samples, job.seed)?;
            from_estimate(job, &e, 0, Vec::new())
        }
        Kind::SoblexBaseline => {
            let w = s.window((0, 0));
            let template = s.initial_model(&w)?;
            let h = s.h_cond(&w)?;
            let chart = ModelChart::new(template);
            let budget = cfg.soblex_budget;
            let (m, history) = {
                let cost = upper_bound_cost(&chart, &s.src, &w, h, &s.pol);
                let mut obj = BoxedObjective::unit(chart.dim(), budget.saturating_mul(1000), cost)?;
                let sc = SoblexConfig {
                    initial_budget: budget,
                    frac_tol: cfg.soblex_frac_tol,
                    seed_offset: (job.repeat * budget) as u32,
                };
                let m = soblex(&mut obj, &sc)?;
                (m, obj.history().to_vec())
            };
            if m.budget_exhausted {
                s.warnings.push("soblex call budget exhausted".into());
            }
            let e = eval_upper(&chart.decode(&m.x)?, &s.src, &w, h, &s.pol)?;
            let trace = history
                .iter()
                .map(|&(call, f)| TraceRow { iter: call, bound_bits: f, stderr_bits: f64::NAN, gamma: f64::NAN, wall_ms: 0.0, kept: 0 })
                .collect();
            from_estimate(job, &e, m.evals, trace)
        }
    };
    res.warnings.append(&mut s.warnings);
    if !res.value_bits.is_finite() {
        res.warnings.push("non-finite bound".into());
    }
    if res.trace.iter().any(|r| !r.bound_bits.is_finite()) {
        res.warnings.push("non-finite value in the trace".into());
    }
    res.wall_ms = if det { 0.0 } else { t0.elapsed().as_secs_f64() * 1e3 };
    Ok(res)
}

/// Runs every job on a pool of `threads` workers; results come back in
/// plan order whatever the thread count.
pub fn run_all(cfg: &ExperimentConfig, threads: usize) -> memrate::Result<Vec<JobResult>> {
    let jobs = plan(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| memrate::Error::Argument(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|j| run_job(cfg, j)).collect())
}

/// One line per SNR point with the mean of each kind over repeats.
pub fn summarize(cfg: &ExperimentConfig, results: &[JobResult]) -> Vec<String> {
    let mut lines = Vec::new();
    for &snr in &cfg.snr_db {
        let mut parts = Vec::new();
        for &k in &cfg.kinds {
            let sel: Vec<&JobResult> = results.iter().filter(|r| r.job.kind == k && r.job.snr_db == snr).collect();
            if sel.is_empty() {
                continue;
            }
            let mean = sel.iter().map(|r| r.value_bits).sum::<f64>() / sel.len() as f64;
            let se = sel.iter().map(|r| r.stderr_bits).sum::<f64>() / sel.len() as f64;
            let runs = if sel.len() > 1 { format!(" over {} runs", sel.len()) } else { String::new() };
            parts.push(format!("{} {mean:.5} bits (se {se:.1e}){runs}", k.as_str()));
        }
        lines.push(format!("snr {snr} dB: {}", parts.join("; ")));
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn plan_orders_snr_then_repeat_then_kind() {
        let c = cfg("experiment.kind = upper,lower\nchannel.kind = pr\nchannel.preset = ch3\nrun.snr_db = 0,3\nrun.repeats = 2\nrun.seed = 5\n");
        let p = plan(&c);
        assert_eq!(p.len(), 8);
        assert_eq!((p[0].kind, p[0].snr_db, p[0].seed), (Kind::Upper, 0.0, 5));
        assert_eq!((p[1].kind, p[2].seed), (Kind::Lower, 6));
        assert_eq!(p[4].snr_db, 3.0);
    }

    #[test]
    fn fine_quantizer_scales_with_output_deviation() {
        let c = cfg("experiment.kind = upper\nchannel.kind = pr\nchannel.preset = eleven_tap\nchannel.quantizer = fine\n");
        let OriginalChannel::Pr(p) = build_channel(&c, 0.0).unwrap() else { panic!() };
        let energy: f64 = p.h().iter().map(|v| v * v).sum();
        let sy = (energy + p.sigma() * p.sigma()).sqrt();
        let t = p.quantizer().thresholds();
        assert_eq!(t.len(), 101);
        assert!((t[0] + 2.5 * sy).abs() < 1e-12 && (t[100] - 2.5 * sy).abs() < 1e-12);
    }

    #[test]
    fn small_jobs_of_every_kind_run() {
        let pr = "channel.kind = pr\nchannel.preset = ch3\naux.m_hat = 1\nrun.n_half = 2000\nrun.iters = 2\nrun.burn_in = 10\nrun.block_len = 100\n";
        let c = cfg(&format!("experiment.kind = rate,upper,diff,lower\n{pr}run.closed_form_t4 = true\n"));
        for j in plan(&c) {
            let r = run_job(&c, &j).unwrap();
            assert!(r.value_bits.is_finite() && r.warnings.is_empty(), "{:?}", j.kind);
            assert_eq!(r.iters, if j.kind == Kind::Rate { 0 } else { 2 });
        }
        let c = cfg(&format!("experiment.kind = soblex_baseline\n{pr}init.mode = truncation\nsoblex.budget = 40\nsoblex.frac_tol = 1e-2\n"));
        let r = run_job(&c, &plan(&c)[0]).unwrap();
        assert!(r.iters >= 40 && !r.trace.is_empty());
        let c = cfg("experiment.kind = upper,diff\nchannel.kind = ge\nchannel.p_b = 0.1\nchannel.p_g = 0.3\nchannel.eps_g = 0.05\nchannel.eps_b = 0.4\ninit.mode = original\nrun.n_half = 2000\nrun.iters = 1\nrun.burn_in = 10\nrun.block_len = 100\n");
        for j in plan(&c) {
            assert!(run_job(&c, &j).unwrap().value_bits.is_finite());
        }
    }
}
