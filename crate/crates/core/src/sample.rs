//! Deterministic sampling: a SplitMix64 generator for pseudo-random draws
//! and Halton low-discrepancy sequences for space-filling starts.
//!
//! Both are seed-stable across platforms, so every report that samples is
//! byte-reproducible for a fixed seed.

/// SplitMix64 pseudo-random generator (Steele, Lea, Flood 2014).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform point in an axis-aligned box.
    pub fn in_box(&mut self, lower: &[f64], upper: &[f64]) -> Vec<f64> {
        lower
            .iter()
            .zip(upper)
            .map(|(&lo, &hi)| self.in_range(lo, hi))
            .collect()
    }

    /// Uniform direction on the unit sphere (rejection-free via normalized
    /// Gaussian components from Box-Muller).
    pub fn unit_direction(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.next_gaussian()).collect();
            let n = crate::linalg::norm(&v);
            if n > 1e-6 {
                return v.iter().map(|c| c / n).collect();
            }
        }
    }

    fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64().max(1e-300);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical-inverse of `index` in the given base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut frac = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * frac;
        index /= base;
        frac /= base as f64;
    }
    result
}

/// The `index`-th Halton point in the unit cube (1-based index; index 0
/// would be the all-zeros corner, which is rarely useful).
pub fn halton_point(index: usize, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton sequence limited to 16 dims");
    (0..dim)
        .map(|d| radical_inverse(index as u64, PRIMES[d]))
        .collect()
}

/// Halton point mapped into a box.
pub fn halton_in_box(index: usize, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let unit = halton_point(index, lower.len());
    unit.iter()
        .zip(lower.iter().zip(upper))
        .map(|(u, (&lo, &hi))| lo + (hi - lo) * u)
        .collect()
}
