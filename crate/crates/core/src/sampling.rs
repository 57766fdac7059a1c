//! Inverse-CDF sampling over static nonnegative weights.

use crate::rng::RandomStream;

/// Prefix sums of a weight vector; draws cost one uniform plus a binary search.
///
/// Zero-weight indices are never returned.
#[derive(Clone, Debug)]
pub struct PrefixSampler {
    cdf: Vec<f64>,
}

impl PrefixSampler {
    /// Returns `None` when the weights are empty, contain a negative or
    /// non-finite value, or sum to zero.
    pub fn new<I: IntoIterator<Item = f64>>(weights: I) -> Option<Self> {
        let mut acc = 0.0;
        let mut cdf = Vec::new();
        for w in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return None;
            }
            acc += w;
            cdf.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return None;
        }
        Some(Self { cdf })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().expect("nonempty by construction")
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cdf
    }

    /// Index `i` with probability `w_i / total`.
    pub fn sample(&self, rng: &mut RandomStream) -> usize {
        self.locate(rng.uniform())
    }

    /// Maps `u ∈ [0, 1)` to an index.
    pub fn locate(&self, u: f64) -> usize {
        let total = self.total();
        let target = u * total;
        let idx = self.cdf.partition_point(|&c| c <= target);
        if idx < self.cdf.len() {
            idx
        } else {
            // `u * total` rounded up to `total`: take the last positive weight.
            self.cdf.partition_point(|&c| c < total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_weights() {
        assert!(PrefixSampler::new(Vec::<f64>::new()).is_none());
        assert!(PrefixSampler::new([0.0, 0.0]).is_none());
        assert!(PrefixSampler::new([1.0, -0.5]).is_none());
        assert!(PrefixSampler::new([1.0, f64::NAN]).is_none());
        assert!(PrefixSampler::new([1.0, f64::INFINITY]).is_none());
    }

    #[test]
    fn zero_weights_are_never_located() {
        let s = PrefixSampler::new([0.0, 1.0, 0.0, 2.0, 0.0]).unwrap();
        for k in 0..1000 {
            let u = k as f64 / 1000.0;
            let i = s.locate(u);
            assert!(i == 1 || i == 3, "u={u} -> {i}");
        }
        assert_eq!(s.locate(0.0), 1);
        assert_eq!(s.locate(1.0), 3);
        assert_eq!(s.locate(1.0 / 3.0), 3);
    }

    #[test]
    fn cumulative_is_nondecreasing() {
        let s = PrefixSampler::new([0.5, 0.0, 0.25, 3.0]).unwrap();
        assert!(s.cumulative().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(s.total(), 3.75);
    }
}
