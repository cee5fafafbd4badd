//! Seeded multinomial simulation of Fock-count histograms.
//!
//! Every simulated experiment draws from its own ChaCha8 stream, addressed
//! by a [`SeedSpec`]. Streams depend only on `(master_seed, stream_index)`,
//! never on execution order, so parallel drivers reproduce serial runs bit
//! for bit.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::estimation::FockHistogram;
use crate::model::FockDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Generator for this stream: the key is expanded from `master_seed`,
    /// the ChaCha stream id is `stream_index`.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master_seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Stream `index` of a family keyed by this spec, for nested work such as
    /// the bootstrap replicates of one simulated experiment.
    pub fn child(&self, index: u64) -> SeedSpec {
        let mut state = self.master_seed ^ 0x6a09_e667_f3bc_c908;
        let a = splitmix64(&mut state);
        let mut state = a ^ self.stream_index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        SeedSpec::new(splitmix64(&mut state), index)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws `n_shots` Fock measurements from `d` on the stream named by `seed`.
pub fn sample_histogram(d: &FockDistribution, n_shots: u64, seed: SeedSpec) -> Result<FockHistogram> {
    sample_histogram_with(d, n_shots, &mut seed.rng())
}

/// Multinomial draw by sequential conditional binomials over the bins
/// (overflow last).
pub fn sample_histogram_with<R: RngCore + ?Sized>(
    d: &FockDistribution,
    n_shots: u64,
    rng: &mut R,
) -> Result<FockHistogram> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("n_shots must be at least 1"));
    }
    let probs: Vec<f64> = d.bins().collect();
    // mass of bins i.. computed from the tail to avoid 1 - partial_sum cancellation
    let mut tail = alloc::vec![0.0; probs.len() + 1];
    for i in (0..probs.len()).rev() {
        tail[i] = tail[i + 1] + probs[i];
    }

    let mut counts = alloc::vec![0u64; probs.len()];
    let mut remaining = n_shots;
    for i in 0..probs.len() - 1 {
        if remaining == 0 {
            break;
        }
        let p = if tail[i] > 0.0 { (probs[i] / tail[i]).clamp(0.0, 1.0) } else { 0.0 };
        let k = if p >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, p)
                .map_err(|_| Error::InvalidDistribution("bin probability not in [0, 1]"))?
                .sample(rng)
        };
        counts[i] = k;
        remaining -= k;
    }
    let overflow = remaining;
    counts.pop();
    FockHistogram::with_total(counts, overflow, n_shots)
}
