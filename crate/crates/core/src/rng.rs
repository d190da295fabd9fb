//! Counter-based random streams.
//!
//! Every random draw is addressed by a tuple (seed, trial, purpose, a, b),
//! typically with `a` an agent index and `b` an iteration. The tuple is
//! hashed into a fresh ChaCha8 key, so the numbers an agent sees do not
//! depend on the order in which agents or trials are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(key: u64, word: u64) -> u64 {
    splitmix64(key ^ splitmix64(word))
}

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Noise = 2,
    SharedNoise = 3,
    PsoCognitive = 4,
    PsoSocial = 5,
    Perturbation = 6,
    MonteCarlo = 7,
    Instance = 8,
}

/// Root of all randomness for one experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngPolicy {
    pub seed: u64,
}

impl RngPolicy {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Streams for one trial. Trials never share draws.
    pub fn trial(&self, trial_id: u64) -> Streams {
        Streams {
            key: mix(mix(self.seed, 0x7472_6961_6c00_0000), trial_id),
        }
    }
}

/// A keyed family of random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Streams {
    key: u64,
}

impl Streams {
    pub fn from_key(key: u64) -> Self {
        Self { key }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// An independent sub-family, e.g. one restart round or one sweep cell.
    pub fn child(&self, tag: u64) -> Streams {
        Streams {
            key: mix(mix(self.key, 0x6368_696c_6400_0000), tag),
        }
    }

    /// Generator for the draws addressed by `(purpose, a, b)`.
    pub fn rng(&self, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
        let k = mix(mix(mix(self.key, purpose as u64), a), b);
        ChaCha8Rng::seed_from_u64(k)
    }

    /// Fill `out` with standard normals addressed by `(purpose, a, b)`;
    /// coordinate `k` is the `k`-th draw of that stream.
    pub fn fill_normals(&self, purpose: Purpose, a: u64, b: u64, out: &mut [f64]) {
        let mut rng = self.rng(purpose, a, b);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
}
