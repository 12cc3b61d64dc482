//! Finite-alphabet probability toolkit: joint pmfs over named axes,
//! conditional channels, information measures and channel capacity.

mod capacity;
mod channel;
mod info;
mod pmf;

pub use capacity::{blahut_arimoto, channel_capacity, CapacityReport};
pub use channel::Channel;
pub use info::{conditional_entropy, empirical_type, entropy, kl_divergence, mutual_information};
pub use pmf::{Alphabet, JointPmf, MAX_ALPHABET, MAX_ENTRIES, NORMALIZATION_TOL};

pub(crate) use info::{entropy_of, kl_of};
pub(crate) use pmf::{index_map, positions_of};

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

/// Bernoulli pmf on a single named binary axis.
pub fn bernoulli(name: &str, p1: f64) -> crate::Result<JointPmf> {
    JointPmf::new(vec![Alphabet::new(name, 2)], vec![1.0 - p1, p1])
}

/// Binary symmetric channel with crossover `r`.
pub fn bsc(input: &str, output: &str, r: f64) -> crate::Result<Channel> {
    Channel::new(
        vec![Alphabet::new(input, 2)],
        vec![Alphabet::new(output, 2)],
        vec![1.0 - r, r, r, 1.0 - r],
    )
}

/// Noiseless channel copying `input` (size `size`) to `output`.
pub fn identity_channel(input: &str, output: &str, size: usize) -> crate::Result<Channel> {
    Channel::deterministic(vec![Alphabet::new(input, size)], Alphabet::new(output, size), |i| i[0])
}
