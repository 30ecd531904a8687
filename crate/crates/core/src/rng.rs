//! Deterministic random streams.
//!
//! Every run is driven by a single `u64` seed. Independent consumers draw from
//! disjoint ChaCha8 streams of that seed, so a run replays bit-exactly no
//! matter how the consumers interleave:
//!
//! | stream              | consumer                                                 |
//! |---------------------|----------------------------------------------------------|
//! | `0`                 | channel: transmit coin flips, drawn once per intent per  |
//! |                     | slot in ascending sender order                           |
//! | `1 + v`             | protocol randomness of node `v` (color draws, choices)   |
//! | `u64::MAX`          | topology placement                                       |
//! | `u64::MAX - 1`      | wake schedule                                            |
//! | `u64::MAX - 2`      | input colorings handed to reduction protocols            |
//! | `u64::MAX - 3`      | λ calibration (split further per trial)                  |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::NodeId;

pub type SimRng = ChaCha8Rng;

const TOPOLOGY_STREAM: u64 = u64::MAX;
const WAKE_STREAM: u64 = u64::MAX - 1;
const INPUT_COLORING_STREAM: u64 = u64::MAX - 2;
const CALIBRATION_STREAM: u64 = u64::MAX - 3;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn channel_rng(seed: u64) -> SimRng {
    stream(seed, 0)
}

pub fn node_rng(seed: u64, node: NodeId) -> SimRng {
    stream(seed, 1 + node as u64)
}

pub fn topology_rng(seed: u64) -> SimRng {
    stream(seed, TOPOLOGY_STREAM)
}

pub fn wake_rng(seed: u64) -> SimRng {
    stream(seed, WAKE_STREAM)
}

pub fn input_coloring_rng(seed: u64) -> SimRng {
    stream(seed, INPUT_COLORING_STREAM)
}

pub fn calibration_rng(seed: u64) -> SimRng {
    stream(seed, CALIBRATION_STREAM)
}
