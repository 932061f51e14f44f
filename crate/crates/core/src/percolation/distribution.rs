use serde::{Deserialize, Serialize};

use crate::stats::{Estimate, Moments};

/// Law of `|C_x|`, either exact probabilities or empirical counts, indexed
/// densely by cluster size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClusterSizeDistribution {
    Exact { prob: Vec<f64> },
    Empirical { counts: Vec<u64>, replicas: u64 },
}

impl ClusterSizeDistribution {
    pub fn from_probabilities(prob: Vec<f64>) -> Self {
        ClusterSizeDistribution::Exact { prob }
    }

    pub fn from_sizes<I: IntoIterator<Item = usize>>(sizes: I) -> Self {
        let mut counts: Vec<u64> = Vec::new();
        let mut replicas = 0;
        for n in sizes {
            if n >= counts.len() {
                counts.resize(n + 1, 0);
            }
            counts[n] += 1;
            replicas += 1;
        }
        ClusterSizeDistribution::Empirical { counts, replicas }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, ClusterSizeDistribution::Exact { .. })
    }

    /// Number of samples behind an empirical law; `None` for exact laws.
    pub fn replicas(&self) -> Option<u64> {
        match self {
            ClusterSizeDistribution::Exact { .. } => None,
            ClusterSizeDistribution::Empirical { replicas, .. } => Some(*replicas),
        }
    }

    /// One past the largest size index stored.
    pub fn len(&self) -> usize {
        match self {
            ClusterSizeDistribution::Exact { prob } => prob.len(),
            ClusterSizeDistribution::Empirical { counts, .. } => counts.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, n: usize) -> Option<u64> {
        match self {
            ClusterSizeDistribution::Exact { .. } => None,
            ClusterSizeDistribution::Empirical { counts, .. } => {
                Some(counts.get(n).copied().unwrap_or(0))
            }
        }
    }

    pub fn prob(&self, n: usize) -> f64 {
        match self {
            ClusterSizeDistribution::Exact { prob } => prob.get(n).copied().unwrap_or(0.0),
            ClusterSizeDistribution::Empirical { counts, replicas } => {
                counts.get(n).copied().unwrap_or(0) as f64 / *replicas as f64
            }
        }
    }

    /// `P(|C| >= n)`.
    pub fn tail(&self, n: usize) -> f64 {
        match self {
            ClusterSizeDistribution::Exact { prob } => {
                if n == 0 {
                    return prob.iter().sum();
                }
                // summing the upper part keeps small tails accurate
                prob.iter().skip(n).sum()
            }
            ClusterSizeDistribution::Empirical { counts, replicas } => {
                counts.iter().skip(n).sum::<u64>() as f64 / *replicas as f64
            }
        }
    }

    /// Number of samples with `|C| >= n` (empirical only).
    pub fn tail_count(&self, n: usize) -> Option<u64> {
        match self {
            ClusterSizeDistribution::Exact { .. } => None,
            ClusterSizeDistribution::Empirical { counts, .. } => {
                Some(counts.iter().skip(n).sum())
            }
        }
    }

    pub fn max_observed(&self) -> usize {
        (0..self.len()).rev().find(|&n| self.prob(n) > 0.0).unwrap_or(0)
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.len()).map(|n| self.prob(n)).sum()
    }

    /// `E f(|C|)` with its standard error (i.i.d. sample variance for
    /// empirical laws, zero for exact ones).
    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> Estimate {
        match self {
            ClusterSizeDistribution::Exact { prob } => Estimate::exact(
                prob.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(n, &p)| p * f(n))
                    .sum(),
            ),
            ClusterSizeDistribution::Empirical { counts, replicas } => {
                let r = *replicas as f64;
                let mut mean = 0.0;
                for (n, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        mean += c as f64 * f(n);
                    }
                }
                mean /= r;
                let mut ss = 0.0;
                for (n, &c) in counts.iter().enumerate() {
                    if c > 0 {
                        let d = f(n) - mean;
                        ss += c as f64 * d * d;
                    }
                }
                let se = if *replicas > 1 {
                    (ss / (r - 1.0) / r).sqrt()
                } else {
                    0.0
                };
                Estimate::new(mean, se)
            }
        }
    }

    pub fn mean(&self) -> Estimate {
        self.expectation(|n| n as f64)
    }

    /// Adds the samples of `other`. Counting is commutative and associative,
    /// so merged results do not depend on how replicas were partitioned.
    pub fn merge(&mut self, other: &ClusterSizeDistribution) {
        match (self, other) {
            (
                ClusterSizeDistribution::Empirical { counts, replicas },
                ClusterSizeDistribution::Empirical {
                    counts: oc,
                    replicas: or,
                },
            ) => {
                if oc.len() > counts.len() {
                    counts.resize(oc.len(), 0);
                }
                for (a, b) in counts.iter_mut().zip(oc) {
                    *a += b;
                }
                *replicas += or;
            }
            _ => panic!("only empirical distributions can be merged"),
        }
    }

    /// Moments of `f(|C|)` as a mergeable accumulator (empirical only).
    pub fn moments(&self, f: impl Fn(usize) -> f64) -> Option<Moments> {
        match self {
            ClusterSizeDistribution::Exact { .. } => None,
            ClusterSizeDistribution::Empirical { counts, .. } => {
                let mut m = Moments::default();
                for (n, &c) in counts.iter().enumerate() {
                    for _ in 0..c {
                        m.push(f(n));
                    }
                }
                Some(m)
            }
        }
    }

    /// CSV rows `n,count` (empirical) or `n,prob` (exact), positive mass only.
    pub fn csv_rows(&self) -> (String, Vec<(usize, String)>) {
        match self {
            ClusterSizeDistribution::Exact { prob } => (
                "prob".into(),
                prob.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(n, p)| (n, format!("{p:e}")))
                    .collect(),
            ),
            ClusterSizeDistribution::Empirical { counts, .. } => (
                "count".into(),
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(n, c)| (n, c.to_string()))
                    .collect(),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_basics() {
        let d = ClusterSizeDistribution::from_sizes([1, 1, 2, 3]);
        assert_eq!(d.replicas(), Some(4));
        assert_eq!(d.prob(1), 0.5);
        assert_eq!(d.tail(2), 0.5);
        assert_eq!(d.max_observed(), 3);
        assert_eq!(d.mean().value, 1.75);
        assert_eq!(d.tail_count(3), Some(1));
    }

    #[test]
    fn single_replica_is_point_mass() {
        let d = ClusterSizeDistribution::from_sizes([5]);
        assert_eq!(d.prob(5), 1.0);
        assert_eq!(d.total_mass(), 1.0);
        assert_eq!(d.mean().stderr, 0.0);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = ClusterSizeDistribution::from_sizes([1, 2]);
        let b = ClusterSizeDistribution::from_sizes([2, 7]);
        a.merge(&b);
        assert_eq!(a, ClusterSizeDistribution::from_sizes([1, 2, 2, 7]));
    }

    #[test]
    fn expectation_stderr_matches_moments() {
        let d = ClusterSizeDistribution::from_sizes([1, 1, 2, 4, 4, 4, 9]);
        let e = d.expectation(|n| (n as f64).sqrt());
        let m = d.moments(|n| (n as f64).sqrt()).unwrap().estimate();
        assert!((e.value - m.value).abs() < 1e-12);
        assert!((e.stderr - m.stderr).abs() < 1e-12);
    }
}
