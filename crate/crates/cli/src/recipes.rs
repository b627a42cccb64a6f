//! Bundled experiment configs.

const RECIPES: &[(&str, &str)] = &[
    (
        "ch3_upper",
        "# CH3 at 0 dB, 1-memory auxiliary model, upper bound by EM
experiment.kind = upper
channel.kind = pr
channel.preset = ch3
channel.quantizer = ch3
aux.m_hat = 1
init.mode = diff_optimized
run.snr_db = 0
run.n_half = 250000
run.iters = 300
run.seed = 1
",
    ),
    (
        "ch3_lower",
        "# CH3 at 0 dB, backward auxiliary model without context, 10 seeds
experiment.kind = lower
channel.kind = pr
channel.preset = ch3
channel.quantizer = ch3
aux.m_hat = 1
init.mode = diff_optimized
run.snr_db = 0
run.n_half = 250000
run.iters = 50
run.gamma = integers
run.closed_form_t4 = true
run.seed = 1
run.repeats = 10
",
    ),
    (
        "ch3_soblex",
        "# Sobol sampling plus simplex on the CH3 upper-bound objective
experiment.kind = soblex_baseline
channel.kind = pr
channel.preset = ch3
channel.quantizer = ch3
aux.m_hat = 1
init.mode = truncation
run.snr_db = 0
run.n_half = 10000
run.seed = 1
run.repeats = 20
soblex.budget = 1000
soblex.frac_tol = 1e-4
",
    ),
    (
        "epr4_upper",
        "# EPR4 at 0 dB, 2-memory auxiliary model
experiment.kind = upper
channel.kind = pr
channel.preset = epr4
channel.quantizer = epr4
aux.m_hat = 2
init.mode = diff_optimized
run.snr_db = 0
run.n_half = 250000
run.iters = 10
run.seed = 1
",
    ),
    (
        "epr4_lower",
        "# EPR4 at 0 dB, lower bound
experiment.kind = lower
channel.kind = pr
channel.preset = epr4
channel.quantizer = epr4
aux.m_hat = 2
init.mode = diff_optimized
run.snr_db = 0
run.n_half = 250000
run.iters = 50
run.gamma = integers
run.closed_form_t4 = true
run.seed = 1
",
    ),
    (
        "eleven_tap_bounds",
        "# h_i = 1/(1+(i-5)^2), i = 0..10; 64-state auxiliary models, two iterations
experiment.kind = upper,lower
channel.kind = pr
channel.preset = eleven_tap
channel.quantizer = fine
aux.m_hat = 6
init.mode = diff_optimized
run.snr_db = -5,0,5,10
run.n_half = 100000
run.iters = 2
run.gamma = 1
run.closed_form_t4 = true
run.seed = 1
",
    ),
    (
        "fading_0db",
        "# Gauss-Markov fading, fdT = 0.1, 0 dB; lower bound from a difference-optimized 8x2 model
experiment.kind = lower
channel.kind = fading
channel.fd_t = 0.1
aux.k_theta = 8
aux.k_a = 2
aux.gain_steps = 1000000
init.mode = natural
init.diff_iters = 20
run.snr_db = 0
run.n_half = 50000
run.iters = 10
run.gamma = halves_and_hundred
run.seed = 1
entropy.delay = 3
",
    ),
    (
        "fading_sweep",
        "# Gauss-Markov fading, fdT = 0.1, bounds against SNR
experiment.kind = upper,lower,csi
channel.kind = fading
channel.fd_t = 0.1
aux.k_theta = 8
aux.k_a = 2
aux.gain_steps = 1000000
init.mode = natural
init.diff_iters = 10
run.snr_db = 0,4,8,12,16
run.n_half = 50000
run.iters = 20
run.gamma = halves_and_hundred
run.seed = 1
entropy.delay = 3
",
    ),
    (
        "fading_hlb",
        "# Lower bounds on the output entropy rate, delays via entropy.delay
experiment.kind = entropy_lb
channel.kind = fading
channel.fd_t = 0.1
run.snr_db = 0,4,8,12,16
entropy.delay = 3
entropy.quad_nodes = 32
",
    ),
];

/// Names of the bundled configs.
pub fn list_recipes() -> Vec<&'static str> {
    RECIPES.iter().map(|r| r.0).collect()
}

/// Text of a bundled config.
pub fn recipe(name: &str) -> Option<&'static str> {
    RECIPES.iter().find(|r| r.0 == name).map(|r| r.1)
}
