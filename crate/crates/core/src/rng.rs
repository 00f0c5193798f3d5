//! Counter-based random numbers.
//!
//! Every stream is a pure function of (seed, stream, counter), so parallel
//! chains and re-runs are bit-reproducible no matter how work is scheduled.

/// splitmix64 finalizer; good enough statistical mixing for Monte Carlo.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A keyed counter generator: `next_*` walks the counter, `at` derives a
/// sub-stream (e.g. one per sweep) without touching this one.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: mix(seed ^ mix(stream.wrapping_mul(0xd1342543de82ef95))),
            ctr: 0,
        }
    }

    /// Sub-stream keyed by an extra label (chain, sweep, ...).
    pub fn substream(&self, label: u64) -> Self {
        CounterRng {
            key: mix(self.key ^ mix(label.wrapping_mul(0x2545f4914f6cdd1d))),
            ctr: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = mix(self.key ^ self.ctr.wrapping_mul(0x9e3779b97f4a7c15));
        self.ctr = self.ctr.wrapping_add(1);
        v
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        // 128-bit multiply rejection-free shortcut; bias < 2^-64, irrelevant here
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}
