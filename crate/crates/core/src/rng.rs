//! Seeded, splittable random streams.
//!
//! Every stochastic component draws from a ChaCha stream identified by
//! `(root seed, stream id)`. Distinct ids never overlap, so e.g. the number
//! of scenarios can change without perturbing the customer sample.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Facility layout of a generator.
pub const FACILITIES: u64 = 1;
/// Customer attribute sample used to build an instance.
pub const CUSTOMERS: u64 = 2;
/// Noise scenarios of the simulation route.
pub const SCENARIOS: u64 = 3;
/// Large out-of-sample evaluation sample.
pub const EVALUATION: u64 = 4;

/// Number of consecutive items drawn from one sub-stream when work is
/// chunked for parallel execution.
pub const CHUNK: usize = 4096;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Sub-stream `chunk` of stream `id`; used by chunked parallel loops so the
/// output does not depend on the thread count.
pub fn substream(seed: u64, id: u64, chunk: u64) -> ChaCha8Rng {
    stream(seed, (id << 40) | (chunk + 1))
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let bits = rng.next_u64() >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on [lo, hi).
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_unit_stays_inside() {
        let mut rng = stream(7, 0);
        for _ in 0..100_000 {
            let u = open_unit(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: Vec<u64> = (0..4).map(|_| stream(1, FACILITIES).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(stream(1, FACILITIES).next_u64(), stream(1, CUSTOMERS).next_u64());
        assert_ne!(substream(1, CUSTOMERS, 0).next_u64(), substream(1, CUSTOMERS, 1).next_u64());
    }
}
