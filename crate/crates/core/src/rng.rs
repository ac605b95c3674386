//! Seed splitting for reproducible parallel sampling.
//!
//! Every random stream in the crate is addressed by a root seed, a chain of
//! child tags and a final stream index. Workers never share a generator, so
//! results depend only on how the work is divided into streams, never on how
//! many threads process them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the seed tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedSequence(u64);

impl SeedSequence {
    pub fn new(root: u64) -> Self {
        SeedSequence(root)
    }

    pub fn key(self) -> u64 {
        self.0
    }

    /// Derives an independent child node.
    pub fn child(self, tag: u64) -> Self {
        SeedSequence(mix(self.0 ^ mix(tag.wrapping_add(0xA076_1D64_78BD_642F))))
    }

    /// Generator for stream `index` under this node.
    pub fn stream(self, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(index);
        rng
    }
}
