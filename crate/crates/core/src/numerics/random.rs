use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

/// Standard-normal variates drawn from a ChaCha8 keystream selected by
/// `(seed, stream_id)`. Variate `k` of a stream depends on nothing but
/// `(seed, stream_id, k)`, so work can be split across workers by stream.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

pub fn gaussian_stream(seed: u64, stream_id: u64) -> GaussianStream {
    GaussianStream::new(seed, stream_id)
}

impl GaussianStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng }
    }

    /// Position the stream so the next call returns variate `index`.
    pub fn seek(&mut self, index: u64) {
        // One variate consumes one u64, i.e. two 32-bit keystream words.
        self.rng.set_word_pos(2 * index as u128);
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Inverse-CDF transform of the next uniform.
    pub fn next_normal(&mut self) -> f64 {
        standard_normal_quantile(self.next_uniform())
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.next_normal();
        }
    }
}

impl Iterator for GaussianStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn standard_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}
