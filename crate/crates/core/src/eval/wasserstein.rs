use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// 1-Wasserstein distance between two empirical distributions on the line,
/// `∫₀¹ |F_a⁻¹(u) − F_b⁻¹(u)| du`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    SortedSample::new(a.to_vec())?.distance(b)
}

/// A sample sorted once so it can be compared against many others.
#[derive(Clone, Debug, PartialEq)]
pub struct SortedSample(Vec<f64>);

impl SortedSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("Wasserstein distance needs two nonempty samples"));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(invalid("samples must be finite"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &[f64]) -> Result<f64> {
        Ok(sorted_distance(&self.0, &SortedSample::new(other.to_vec())?.0))
    }

    pub fn distance_sorted(&self, other: &SortedSample) -> f64 {
        sorted_distance(&self.0, &other.0)
    }
}

fn sorted_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    // walk the merged quantile grid {i/n} ∪ {j/m}
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i + 1) as f64 / n;
        let next_b = (j + 1) as f64 / m;
        let next = next_a.min(next_b);
        acc += (next - u) * (a[i] - b[j]).abs();
        u = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    acc
}

/// How magnitudes of several buses are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    /// One distance between all buses and days pooled together.
    #[default]
    Pooled,
    /// Mean over buses of the per-bus distances.
    PerBus,
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(wasserstein1(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(wasserstein1(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        // unequal sizes: F_a⁻¹ = 0 on [0, 1/2), 1 after; F_b⁻¹ = 0 on [0, 1/3), 1 after
        let w = wasserstein1(&[0.0, 1.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!((w - 1.0 / 6.0).abs() < 1e-15);
        assert!((wasserstein1(&[0.0], &[1.0, 3.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(wasserstein1(&[], &[1.0]).is_err());
    }

    #[test]
    fn replicated_sample_is_the_same_distribution() {
        let a = [0.3, -1.0, 2.5];
        let b: Vec<f64> = a.iter().flat_map(|x| [*x, *x]).collect();
        assert!(wasserstein1(&a, &b).unwrap() < 1e-15);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, 1..20)
    }

    proptest! {
        #[test]
        fn metric_properties(a in sample(), b in sample(), c in sample()) {
            let ab = wasserstein1(&a, &b).unwrap();
            let ba = wasserstein1(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab >= 0.0);
            let ac = wasserstein1(&a, &c).unwrap();
            let cb = wasserstein1(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!(wasserstein1(&a, &a).unwrap() == 0.0);
        }
    }
}
