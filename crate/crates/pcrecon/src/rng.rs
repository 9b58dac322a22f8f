//! Deterministic random-number plumbing.
//!
//! Every randomized operation in this crate is a pure function of an
//! explicit 64-bit seed. The generator is [`ChaCha8Rng`], which produces the
//! same stream on every platform and rand release line. Independent
//! substreams (parameter init, per-step UV sampling, per-sample noise, ...)
//! are derived by mixing a purpose tag and an index into the root seed with
//! the splitmix64 finalizer, so no generator state is ever shared or carried
//! between operations.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for substream derivation. The numeric values are part of
/// the reproducibility contract and must not be reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Downsample = 1,
    Noise = 2,
    UvSample = 3,
    ParamInit = 4,
    SurfaceSample = 5,
    Fixture = 6,
    Generic = 7,
}

/// splitmix64 finalizer; good avalanche on sequential inputs.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives the sub-seed for `(purpose, index)` under the given root seed.
pub fn sub_seed(seed: u64, purpose: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ (purpose as u64).rotate_left(32)) ^ index)
}

/// A generator for the given seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A generator for the `(purpose, index)` substream of `seed`.
pub fn stream_rng(seed: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    rng_from(sub_seed(seed, purpose, index))
}

/// Hashes an identifier to a stable substream index (FNV-1a).
pub fn id_index(id: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
