//! Seeded, worker-count independent parallel chains.
//!
//! Every chain owns a ChaCha8 stream derived from `(seed, purpose, class, index)`,
//! so results depend only on the seed and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// What a random stream is used for; keeps streams of different stages disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Means = 1,
    Data = 2,
    Train = 3,
    Vmf = 4,
    Gaussian = 5,
    Check = 6,
    Forward = 7,
}

/// The random stream of chain `index` of `class` for `purpose`.
pub fn chain_rng(seed: u64, purpose: Purpose, class: usize, index: usize) -> ChaCha8Rng {
    assert!(class < 1 << 24 && index < 1 << 32, "chain id out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | ((class as u64) << 32) | index as u64);
    rng
}

/// Runs `f(class, index)` for every class and `per_class` chains, returning results class-major.
pub fn run_chains<T, F>(classes: usize, per_class: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize) -> Result<T> + Sync,
{
    (0..classes * per_class)
        .into_par_iter()
        .map(|i| f(i / per_class, i % per_class))
        .collect()
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::config(None, "--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::config(None, format!("cannot start {n} threads: {e}"))),
    }
}
