//! Shared fixtures for the benchmarks.

use memrate::channels::pr::CH3;
use memrate::channels::quantizer::ch3_quantizer;
use memrate::channels::{simulate_pr, PrChannel, SampleWindow};
use memrate::em::diff_optimized_pr;
use memrate::inference::FsmcModel;
use memrate::trellis::{Alphabet, Source};

pub struct Ch3 {
    pub channel: PrChannel,
    pub source: Source,
    pub aux: FsmcModel,
    pub window: SampleWindow,
}

/// CH3 at 0 dB with a memory-1 auxiliary model and a window of `2 n_half`
/// symbols.
pub fn ch3(n_half: usize) -> Ch3 {
    let channel = PrChannel::from_snr_db(CH3.to_vec(), 0.0, ch3_quantizer(), Alphabet::bpsk()).expect("valid channel");
    let source = Source::iud(Alphabet::bpsk());
    let aux = diff_optimized_pr(&channel, 1, &source).expect("valid auxiliary model");
    let window = simulate_pr(&channel, &source, n_half, 1);
    Ch3 { channel, source, aux, window }
}
