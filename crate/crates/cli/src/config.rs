//! Flat `section.key = value` experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma
//! separated. Every key is optional except `experiment.kind` and
//! `channel.kind`; unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use sha2::{Digest, Sha256};

/// A config problem tied to one key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {l}): {}", self.field, self.msg),
            None => write!(f, "{}: {}", self.field, self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(field: &str, line: Option<usize>, msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { field: field.to_string(), line, msg: msg.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Rate,
    Upper,
    Diff,
    Lower,
    EntropyLb,
    Csi,
    SoblexBaseline,
}

impl Kind {
    pub const ALL: [Kind; 7] =
        [Kind::Rate, Kind::Upper, Kind::Diff, Kind::Lower, Kind::EntropyLb, Kind::Csi, Kind::SoblexBaseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Rate => "rate",
            Kind::Upper => "upper",
            Kind::Diff => "diff",
            Kind::Lower => "lower",
            Kind::EntropyLb => "entropy_lb",
            Kind::Csi => "csi",
            Kind::SoblexBaseline => "soblex_baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Pr { h: Vec<f64>, quantizer: QuantizerSpec },
    Ge { p_b: f64, p_g: f64, eps_g: f64, eps_b: f64 },
    Fading { fd_t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantizerSpec {
    Ch3,
    Epr4,
    /// Thresholds every `0.05 sigma_y` out to `2.5 sigma_y`.
    Fine,
    Thresholds(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Truncation,
    DiffOptimized,
    Averaging,
    Original,
    Natural,
}

impl InitMode {
    fn as_str(self) -> &'static str {
        match self {
            InitMode::Truncation => "truncation",
            InitMode::DiffOptimized => "diff_optimized",
            InitMode::Averaging => "averaging",
            InitMode::Original => "original",
            InitMode::Natural => "natural",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    Fixed,
    Fresh,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaSpec {
    Integers,
    HalvesAndHundred,
    Fixed(f64),
    Set(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxSpec {
    /// Memory of a partial-response auxiliary model.
    pub m_hat: usize,
    /// State count of a fully connected auxiliary trellis (averaging init).
    pub states: usize,
    pub k_theta: usize,
    pub k_a: usize,
    pub gain_steps: usize,
    pub d1: usize,
    pub d2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kinds: Vec<Kind>,
    pub channel: ChannelSpec,
    pub aux: AuxSpec,
    pub init: InitMode,
    /// Difference-function iterations run on the initial model first.
    pub init_diff_iters: usize,
    pub snr_db: Vec<f64>,
    pub n_half: usize,
    pub iters: usize,
    pub tol_bits: f64,
    pub patience: usize,
    pub gamma: GammaSpec,
    pub closed_form_t4: bool,
    pub window: WindowMode,
    pub seed: u64,
    pub repeats: usize,
    pub burn_in: usize,
    pub block_len: usize,
    pub deterministic: bool,
    pub entropy_delay: usize,
    pub quad_nodes: usize,
    pub csi_samples: usize,
    pub soblex_budget: usize,
    pub soblex_frac_tol: f64,
    pub out_dir: String,
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(line, Some(i + 1), "expected `key = value`");
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return err("<empty>", Some(i + 1), "missing key");
            }
            if let Some((_, first)) = map.get(&k) {
                return err(&k, Some(i + 1), format!("duplicate key, first set on line {first}"));
            }
            map.insert(k, (v, i + 1));
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, what: &str, default: T) -> Result<T, ConfigError> {
        match self.take(key) {
            None => Ok(default),
            Some((v, l)) => v.parse().or_else(|_| err(key, Some(l), format!("expected {what}, got '{v}'"))),
        }
    }

    fn real(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let line = self.map.get(key).map(|e| e.1);
        let v = self.parsed(key, "a number", default)?;
        if !v.is_finite() {
            return err(key, line, "must be finite");
        }
        Ok(v)
    }

    fn count(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.parsed(key, "a non-negative integer", default)
    }

    fn positive(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let line = self.map.get(key).map(|e| e.1);
        let v = self.count(key, default)?;
        if v == 0 {
            return err(key, line, "must be at least 1");
        }
        Ok(v)
    }

    fn prob(&mut self, key: &str) -> Result<f64, ConfigError> {
        let Some((v, l)) = self.take(key) else {
            return err(key, None, "required for this channel");
        };
        match v.parse::<f64>() {
            Ok(p) if (0.0..=1.0).contains(&p) => Ok(p),
            _ => err(key, Some(l), format!("expected a probability in [0, 1], got '{v}'")),
        }
    }

    fn reals(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some((v, l)) = self.take(key) else { return Ok(None) };
        let mut out = Vec::new();
        for part in v.split(',') {
            match part.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => return err(key, Some(l), format!("expected a comma-separated list of numbers, got '{}'", part.trim())),
            }
        }
        Ok(Some(out))
    }

    fn word(&mut self, key: &str, allowed: &[&str], default: Option<&str>) -> Result<String, ConfigError> {
        match self.take(key) {
            None => match default {
                Some(d) => Ok(d.to_string()),
                None => err(key, None, format!("required; one of {}", allowed.join(", "))),
            },
            Some((v, _)) if allowed.contains(&v.as_str()) => Ok(v),
            Some((v, l)) => err(key, Some(l), format!("unknown value '{v}'; expected one of {}", allowed.join(", "))),
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        self.parsed(key, "true or false", default)
    }
}

/// Coefficient presets accepted by `channel.preset`.
pub fn preset_coefficients(name: &str) -> Option<Vec<f64>> {
    use memrate::channels::pr::{eleven_tap, CH3, EPR4};
    match name {
        "ch3" => Some(CH3.to_vec()),
        "epr4" => Some(EPR4.to_vec()),
        "eleven_tap" => Some(eleven_tap()),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut e = Entries::parse(text)?;
        let kinds_line = e.map.get("experiment.kind").map(|x| x.1);
        let kinds = match e.take("experiment.kind") {
            None => return err("experiment.kind", None, "required"),
            Some((v, l)) => {
                let mut ks = Vec::new();
                for w in v.split(',').map(str::trim) {
                    match Kind::ALL.iter().find(|k| k.as_str() == w) {
                        Some(k) if !ks.contains(k) => ks.push(*k),
                        Some(_) => return err("experiment.kind", Some(l), format!("'{w}' listed twice")),
                        None => {
                            let names: Vec<_> = Kind::ALL.iter().map(|k| k.as_str()).collect();
                            return err("experiment.kind", Some(l), format!("unknown kind '{w}'; expected one of {}", names.join(", ")));
                        }
                    }
                }
                ks
            }
        };

        let ch_kind = e.word("channel.kind", &["pr", "ge", "fading"], None)?;
        let channel = match ch_kind.as_str() {
            "pr" => {
                let preset_line = e.map.get("channel.preset").map(|x| x.1);
                let preset = e.take("channel.preset");
                let explicit = e.reals("channel.h")?;
                let h = match (preset, explicit) {
                    (Some(_), Some(_)) => return err("channel.h", None, "give either channel.h or channel.preset, not both"),
                    (None, None) => return err("channel.h", None, "required for a partial-response channel (or set channel.preset)"),
                    (None, Some(h)) => h,
                    (Some((p, _)), None) => match preset_coefficients(&p) {
                        Some(h) => h,
                        None => return err("channel.preset", preset_line, format!("unknown preset '{p}'; expected ch3, epr4 or eleven_tap")),
                    },
                };
                if h.iter().all(|v| *v == 0.0) {
                    return err("channel.h", None, "at least one coefficient must be nonzero");
                }
                let q = e.word("channel.quantizer", &["ch3", "epr4", "fine", "thresholds"], Some("ch3"))?;
                let quantizer = match q.as_str() {
                    "ch3" => QuantizerSpec::Ch3,
                    "epr4" => QuantizerSpec::Epr4,
                    "fine" => QuantizerSpec::Fine,
                    _ => match e.reals("channel.thresholds")? {
                        Some(t) if t.windows(2).all(|w| w[0] < w[1]) => QuantizerSpec::Thresholds(t),
                        Some(_) => return err("channel.thresholds", None, "thresholds must be strictly increasing"),
                        None => return err("channel.thresholds", None, "required when channel.quantizer = thresholds"),
                    },
                };
                ChannelSpec::Pr { h, quantizer }
            }
            "ge" => ChannelSpec::Ge { p_b: e.prob("channel.p_b")?, p_g: e.prob("channel.p_g")?, eps_g: e.prob("channel.eps_g")?, eps_b: e.prob("channel.eps_b")? },
            _ => {
                let line = e.map.get("channel.fd_t").map(|x| x.1);
                let fd_t = e.real("channel.fd_t", 0.1)?;
                if !(fd_t > 0.0 && fd_t < 0.5) {
                    return err("channel.fd_t", line, "must lie in (0, 0.5)");
                }
                ChannelSpec::Fading { fd_t }
            }
        };

        let aux = AuxSpec {
            m_hat: e.count("aux.m_hat", 1)?,
            states: e.positive("aux.states", 2)?,
            k_theta: e.positive("aux.k_theta", 8)?,
            k_a: e.positive("aux.k_a", 2)?,
            gain_steps: e.count("aux.gain_steps", 1_000_000)?,
            d1: e.count("aux.d1", 0)?,
            d2: e.count("aux.d2", 0)?,
        };
        let default_init = match channel {
            ChannelSpec::Pr { .. } => "diff_optimized",
            ChannelSpec::Ge { .. } => "averaging",
            ChannelSpec::Fading { .. } => "natural",
        };
        let init_line = e.map.get("init.mode").map(|x| x.1);
        let init = match e.word("init.mode", &["truncation", "diff_optimized", "averaging", "original", "natural"], Some(default_init))?.as_str() {
            "truncation" => InitMode::Truncation,
            "diff_optimized" => InitMode::DiffOptimized,
            "averaging" => InitMode::Averaging,
            "original" => InitMode::Original,
            _ => InitMode::Natural,
        };
        let init_diff_iters = e.count("init.diff_iters", 0)?;

        let snr_line = e.map.get("run.snr_db").map(|x| x.1);
        let snr_db = e.reals("run.snr_db")?.unwrap_or_else(|| vec![0.0]);
        let n_line = e.map.get("run.n_half").map(|x| x.1);
        let n_half = e.positive("run.n_half", 250_000)?;
        let iters = e.count("run.iters", 100)?;
        let tol_bits = e.real("run.tol_bits", 0.0)?;
        let patience = e.count("run.patience", 0)?;
        let gamma = match e.take("run.gamma") {
            None => GammaSpec::Integers,
            Some((v, l)) => match v.as_str() {
                "integers" => GammaSpec::Integers,
                "halves_and_hundred" => GammaSpec::HalvesAndHundred,
                _ => {
                    let parsed: Result<Vec<f64>, _> = v.split(',').map(|s| s.trim().parse::<f64>()).collect();
                    match parsed {
                        Ok(g) if !g.is_empty() && g.iter().all(|x| *x > 0.0 && x.is_finite()) => {
                            if g.len() == 1 {
                                GammaSpec::Fixed(g[0])
                            } else {
                                GammaSpec::Set(g)
                            }
                        }
                        _ => return err("run.gamma", Some(l), format!("expected integers, halves_and_hundred or positive numbers, got '{v}'")),
                    }
                }
            },
        };
        let closed_form_t4 = e.flag("run.closed_form_t4", false)?;
        let window = match e.word("run.window", &["fixed", "fresh"], Some("fixed"))?.as_str() {
            "fixed" => WindowMode::Fixed,
            _ => WindowMode::Fresh,
        };
        let seed = e.parsed("run.seed", "a non-negative integer", 1u64)?;
        let repeats = e.positive("run.repeats", 1)?;
        let burn_in = e.count("run.burn_in", 1000)?;
        let block_len = e.positive("run.block_len", 10_000)?;
        let deterministic = e.flag("run.deterministic", true)?;
        let entropy_delay = e.positive("entropy.delay", 3)?;
        let quad_nodes = e.positive("entropy.quad_nodes", 32)?;
        let csi_samples = e.positive("csi.samples", 200_000)?;
        let soblex_budget = e.positive("soblex.budget", 1000)?;
        let soblex_frac_tol = e.real("soblex.frac_tol", 1e-4)?;
        let out_dir = e.take("output.dir").map(|v| v.0).unwrap_or_else(|| "out".into());

        if let Some((k, (_, l))) = e.map.iter().next() {
            return err(k, Some(*l), "unknown key");
        }

        let cfg = Self {
            kinds,
            channel,
            aux,
            init,
            init_diff_iters,
            snr_db,
            n_half,
            iters,
            tol_bits,
            patience,
            gamma,
            closed_form_t4,
            window,
            seed,
            repeats,
            burn_in,
            block_len,
            deterministic,
            entropy_delay,
            quad_nodes,
            csi_samples,
            soblex_budget,
            soblex_frac_tol,
            out_dir,
        };
        cfg.check(kinds_line, init_line, snr_line, n_line)?;
        Ok(cfg)
    }

    fn check(
        &self,
        kinds_line: Option<usize>,
        init_line: Option<usize>,
        snr_line: Option<usize>,
        n_line: Option<usize>,
    ) -> Result<(), ConfigError> {
        let fading = matches!(self.channel, ChannelSpec::Fading { .. });
        let pr = matches!(self.channel, ChannelSpec::Pr { .. });
        for k in &self.kinds {
            match k {
                Kind::Rate if fading => return err("experiment.kind", kinds_line, "rate needs a finite-state channel (pr or ge)"),
                Kind::EntropyLb | Kind::Csi if !fading => {
                    return err("experiment.kind", kinds_line, format!("{} needs channel.kind = fading", k.as_str()))
                }
                Kind::SoblexBaseline if fading => {
                    return err("experiment.kind", kinds_line, "soblex_baseline needs a finite-state channel (pr or ge)")
                }
                _ => {}
            }
        }
        let init_ok = match self.init {
            InitMode::Truncation | InitMode::DiffOptimized => pr,
            InitMode::Natural => fading,
            InitMode::Original => !fading,
            InitMode::Averaging => !fading,
        };
        if !init_ok {
            return err("init.mode", init_line, format!("'{}' does not apply to this channel", self.init.as_str()));
        }
        if fading && (self.snr_db.iter().any(|s| !(-30.0..=60.0).contains(s))) {
            return err("run.snr_db", snr_line, "fading SNR must lie in [-30, 60] dB");
        }
        if matches!(self.channel, ChannelSpec::Ge { .. }) && self.snr_db != [0.0] {
            return err("run.snr_db", snr_line, "the Gilbert-Elliott channel has no SNR; leave run.snr_db unset");
        }
        if self.n_half < 100 {
            return err("run.n_half", n_line, "must be at least 100");
        }
        if self.closed_form_t4 && !(pr && self.aux.d1 == 0 && self.aux.d2 == 0) {
            return err("run.closed_form_t4", None, "only available for partial-response channels with aux.d1 = aux.d2 = 0");
        }
        if self.closed_form_t4 && !matches!(self.init, InitMode::Truncation | InitMode::DiffOptimized) {
            return err("run.closed_form_t4", None, "needs a partial-response auxiliary model (init.mode = truncation or diff_optimized)");
        }
        if let ChannelSpec::Pr { h, .. } = &self.channel {
            if h.len() > 16 {
                return err("channel.h", None, "at most 16 coefficients are supported");
            }
            if self.aux.m_hat > 12 {
                return err("aux.m_hat", None, "at most 12");
            }
        }
        Ok(())
    }

    /// Every resolved setting, one `key = value` per line in a fixed order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let kinds: Vec<_> = self.kinds.iter().map(|k| k.as_str()).collect();
        let _ = writeln!(s, "experiment.kind = {}", kinds.join(","));
        match &self.channel {
            ChannelSpec::Pr { h, quantizer } => {
                let _ = writeln!(s, "channel.kind = pr");
                let _ = writeln!(s, "channel.h = {}", list(h));
                match quantizer {
                    QuantizerSpec::Ch3 => s.push_str("channel.quantizer = ch3\n"),
                    QuantizerSpec::Epr4 => s.push_str("channel.quantizer = epr4\n"),
                    QuantizerSpec::Fine => s.push_str("channel.quantizer = fine\n"),
                    QuantizerSpec::Thresholds(t) => {
                        let _ = writeln!(s, "channel.quantizer = thresholds\nchannel.thresholds = {}", list(t));
                    }
                }
            }
            ChannelSpec::Ge { p_b, p_g, eps_g, eps_b } => {
                let _ = writeln!(s, "channel.kind = ge\nchannel.p_b = {p_b}\nchannel.p_g = {p_g}\nchannel.eps_g = {eps_g}\nchannel.eps_b = {eps_b}");
            }
            ChannelSpec::Fading { fd_t } => {
                let _ = writeln!(s, "channel.kind = fading\nchannel.fd_t = {fd_t}");
            }
        }
        let a = &self.aux;
        let _ = writeln!(s, "aux.m_hat = {}\naux.states = {}\naux.k_theta = {}\naux.k_a = {}", a.m_hat, a.states, a.k_theta, a.k_a);
        let _ = writeln!(s, "aux.gain_steps = {}\naux.d1 = {}\naux.d2 = {}", a.gain_steps, a.d1, a.d2);
        let _ = writeln!(s, "init.mode = {}\ninit.diff_iters = {}", self.init.as_str(), self.init_diff_iters);
        let _ = writeln!(s, "run.snr_db = {}\nrun.n_half = {}\nrun.iters = {}", list(&self.snr_db), self.n_half, self.iters);
        let _ = writeln!(s, "run.tol_bits = {}\nrun.patience = {}", self.tol_bits, self.patience);
        let g = match &self.gamma {
            GammaSpec::Integers => "integers".to_string(),
            GammaSpec::HalvesAndHundred => "halves_and_hundred".to_string(),
            GammaSpec::Fixed(g) => format!("{g}"),
            GammaSpec::Set(v) => list(v),
        };
        let _ = writeln!(s, "run.gamma = {g}\nrun.closed_form_t4 = {}", self.closed_form_t4);
        let w = if self.window == WindowMode::Fixed { "fixed" } else { "fresh" };
        let _ = writeln!(s, "run.window = {w}\nrun.seed = {}\nrun.repeats = {}", self.seed, self.repeats);
        let _ = writeln!(s, "run.burn_in = {}\nrun.block_len = {}\nrun.deterministic = {}", self.burn_in, self.block_len, self.deterministic);
        let _ = writeln!(s, "entropy.delay = {}\nentropy.quad_nodes = {}\ncsi.samples = {}", self.entropy_delay, self.quad_nodes, self.csi_samples);
        let _ = writeln!(s, "soblex.budget = {}\nsoblex.frac_tol = {}", self.soblex_budget, self.soblex_frac_tol);
        s
    }

    /// First 16 hex digits of the SHA-256 of [`ExperimentConfig::canonical`].
    /// The output directory does not enter the hash.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
