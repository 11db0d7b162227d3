//! Seeded, chunked parallel evaluation.
//!
//! Work is cut into fixed-size chunks and every chunk owns a ChaCha stream
//! selected by its chunk index. The chunking never depends on the number of
//! worker threads, and results come back in chunk order, so any reduction
//! performed by the caller is bit-identical for every worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::ops::Range;

pub type StreamRng = ChaCha8Rng;

/// RNG positioned on stream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent seed from a master seed and a tag (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splits `0..n` into chunks of `chunk` items and maps each chunk in parallel.
pub fn map_chunks<T, F>(n: usize, chunk: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>, &mut StreamRng) -> T + Sync,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let start = c * chunk;
            f(start..(start + chunk).min(n), &mut rng)
        })
        .collect()
}

/// Runs `f` inside a dedicated pool with `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn chunk_results_do_not_depend_on_workers() {
        let run = || {
            map_chunks(1000, 64, 7, |range, rng| {
                range.map(|_| rng.random::<f64>()).sum::<f64>()
            })
        };
        let one = with_workers(1, run);
        let four = with_workers(4, run);
        assert_eq!(one, four);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
