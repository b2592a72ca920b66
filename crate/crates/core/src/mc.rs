//! Replica-parallel Monte Carlo with deterministic ordering.

use crate::rng::RngStream;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Runs `f` for replicas `0..n`, replica `i` on `stream.substream(block, i)`.
/// Results come back in replica order whatever the thread count.
pub fn replicate<T, F>(n: usize, stream: RngStream, block: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| f(&mut stream.substream(block, i).rng()))
        .collect()
}

/// Like [`replicate`], mapping over `items`: item `i` gets substream `i`.
pub fn replicate_over<I, T, F>(items: &[I], stream: RngStream, block: u64, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I, &mut ChaCha8Rng) -> T + Sync + Send,
{
    items
        .par_iter()
        .enumerate()
        .map(|(i, item)| f(item, &mut stream.substream(block, i as u64).rng()))
        .collect()
}
