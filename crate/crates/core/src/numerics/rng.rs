use crate::error::{Error, Result};

/// Deterministic xoshiro256++ generator with explicit seeding.
///
/// Every stochastic routine in this crate takes one of these (or a seed used
/// to build one); there is no global generator. Identical seeds produce
/// bit-identical streams on every platform and every run.
#[derive(Clone, Debug)]
pub struct Rng {
    state: [u64; 4],
    cached_normal: Option<f64>,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    /// Expand a 64-bit seed into the full generator state.
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = seed;
        let mut state = [0u64; 4];
        for slot in &mut state {
            *slot = splitmix64(&mut sm);
        }
        // xoshiro forbids the all-zero state.
        if state == [0, 0, 0, 0] {
            state[0] = 1;
        }
        Rng {
            state,
            cached_normal: None,
        }
    }

    /// Mix a base seed with a stream index, giving decorrelated substream
    /// seeds for workers/chains without sharing generator state.
    pub fn derive_seed(base: u64, stream: u64) -> u64 {
        let mut sm = base ^ stream.wrapping_mul(0xA076_1D64_78BD_642F);
        splitmix64(&mut sm)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in 0..n (rejection sampled, unbiased).
    pub fn uniform_usize(&mut self, n: usize) -> usize {
        assert!(n > 0, "uniform_usize requires n > 0");
        let n = n as u64;
        let limit = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < limit {
                return (x % n) as usize;
            }
        }
    }

    /// Inclusive uniform integer in lo..=hi.
    pub fn uniform_range_usize(&mut self, lo: usize, hi: usize) -> usize {
        assert!(hi >= lo);
        lo + self.uniform_usize(hi - lo + 1)
    }

    /// Standard normal via Box-Muller; the second draw of each pair is
    /// cached so consecutive calls consume uniforms in a fixed pattern.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the logarithm stays finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// `dim` independent zero-mean Gaussian draws with the given variance.
    pub fn gaussian_vector(&mut self, dim: usize, variance: f64) -> Result<Vec<f64>> {
        if variance < 0.0 || !variance.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gaussian_vector: variance must be finite and >= 0, got {variance}"
            )));
        }
        let sd = variance.sqrt();
        Ok((0..dim).map(|_| sd * self.standard_normal()).collect())
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.uniform_usize(i + 1);
            xs.swap(i, j);
        }
    }

    /// Random permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        self.shuffle(&mut perm);
        perm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_seed_gives_identical_stream() {
        let mut a = Rng::seed_from_u64(7);
        let mut b = Rng::seed_from_u64(7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let va = Rng::seed_from_u64(3).gaussian_vector(64, 2.5).unwrap();
        let vb = Rng::seed_from_u64(3).gaussian_vector(64, 2.5).unwrap();
        assert_eq!(va, vb);
    }

    #[test]
    fn zero_variance_is_exactly_zero() {
        let v = Rng::seed_from_u64(0).gaussian_vector(3, 0.0).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(Rng::seed_from_u64(0).gaussian_vector(3, -1.0).is_err());
    }

    #[test]
    fn gaussian_sample_variance_concentrates() {
        // Chi-square bound: sd of the sample variance of 10^6 draws at
        // variance 4 is 4*sqrt(2/(N-1)) ~ 0.0057, so [3.98, 4.02] is a
        // ~3.5 sigma window.
        let n = 1_000_000;
        let v = Rng::seed_from_u64(7).gaussian_vector(n, 4.0).unwrap();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        assert!(var > 3.98 && var < 4.02, "sample variance {var}");
        assert!(mean.abs() < 0.008, "sample mean {mean}");
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn permutation_covers_all_indices() {
        let mut perm = Rng::seed_from_u64(5).permutation(100);
        perm.sort_unstable();
        assert_eq!(perm, (0..100).collect::<Vec<_>>());
    }
}
