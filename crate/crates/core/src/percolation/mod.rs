//! Bond and site percolation on finite volumes: sampling, clusters and
//! Monte Carlo cluster statistics.

mod distribution;
mod explore;

pub use distribution::ClusterSizeDistribution;
pub use explore::{ClusterTable, Explored, Explorer, CHUNK};

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rng::{p_of_beta, SeedSpec, Stream};
use crate::stats::{proportion, Estimate};
use crate::union_find::UnionFind;
use crate::volume::{FiniteVolume, Kind};

/// Open/closed states of all edges (bond) or vertices (site) of a volume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Configuration {
    pub kind: Kind,
    bits: Vec<bool>,
}

impl Configuration {
    pub fn new(kind: Kind, bits: Vec<bool>) -> Self {
        Self { kind, bits }
    }

    /// Configuration from the low bits of a mask (element `i` is bit `i`).
    pub fn from_mask(kind: Kind, len: usize, mask: u64) -> Self {
        Self {
            kind,
            bits: (0..len).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn is_open(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&i| self.bits[i]).collect()
    }

    pub fn open_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn check(&self, volume: &FiniteVolume) -> Result<()> {
        if self.bits.len() != volume.element_count(self.kind) {
            return Err(invalid(
                "config",
                format!(
                    "{} configuration has {} entries, volume has {}",
                    self.kind,
                    self.bits.len(),
                    volume.element_count(self.kind)
                ),
            ));
        }
        Ok(())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid("beta", format!("must be positive and finite, got {beta}")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// Samples with open probability `p`. Element `i` is open iff its uniform on
/// the percolation stream, keyed by its parent-patch index, is below `p`.
pub fn sample(volume: &FiniteVolume, kind: Kind, p: f64, seed: SeedSpec) -> Result<Configuration> {
    check_p(p)?;
    let rng = seed.with_stream(Stream::Percolation).counter_rng();
    let bits = (0..volume.element_count(kind))
        .map(|i| rng.uniform(volume.element_key(kind, i)) < p)
        .collect();
    Ok(Configuration { kind, bits })
}

/// Bond percolation with `p = 1 - e^{-beta}`.
pub fn sample_bond(volume: &FiniteVolume, beta: f64, seed: SeedSpec) -> Result<Configuration> {
    check_beta(beta)?;
    sample(volume, Kind::Bond, p_of_beta(beta), seed)
}

/// Site percolation with `p = 1 - e^{-beta}`.
pub fn sample_site(volume: &FiniteVolume, beta: f64, seed: SeedSpec) -> Result<Configuration> {
    check_beta(beta)?;
    sample(volume, Kind::Site, p_of_beta(beta), seed)
}

/// Cluster of `x`, sorted. In site mode this is the modified cluster: `x`
/// belongs regardless of its own state and the rest is reached through open
/// sites.
pub fn cluster_of(volume: &FiniteVolume, config: &Configuration, x: usize) -> Result<Vec<usize>> {
    volume.check_vertex(x)?;
    config.check(volume)?;
    let g = volume.graph();
    let mut seen = vec![false; g.vertex_count()];
    let mut queue = VecDeque::from([x]);
    seen[x] = true;
    let mut out = vec![x];
    while let Some(u) = queue.pop_front() {
        for (w, e) in g.incidence(u) {
            let open = match config.kind {
                Kind::Bond => config.bits[e],
                Kind::Site => config.bits[w],
            };
            if open && !seen[w] {
                seen[w] = true;
                out.push(w);
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Unmodified site cluster: empty when `x` is closed. Equal to
/// [`cluster_of`] in bond mode.
pub fn unmodified_cluster_of(
    volume: &FiniteVolume,
    config: &Configuration,
    x: usize,
) -> Result<Vec<usize>> {
    if config.kind == Kind::Site {
        volume.check_vertex(x)?;
        config.check(volume)?;
        if !config.bits[x] {
            return Ok(Vec::new());
        }
    }
    cluster_of(volume, config, x)
}

/// Cluster size of every vertex via union-find. Site mode reports modified
/// sizes: a closed vertex counts itself plus the distinct open clusters
/// adjacent to it.
pub fn all_cluster_sizes(volume: &FiniteVolume, config: &Configuration) -> Result<Vec<usize>> {
    config.check(volume)?;
    let g = volume.graph();
    let n = g.vertex_count();
    let mut uf = UnionFind::new(n);
    for (e, (u, v)) in g.edges().enumerate() {
        let open = match config.kind {
            Kind::Bond => config.bits[e],
            Kind::Site => config.bits[u] && config.bits[v],
        };
        if open {
            uf.union(u, v);
        }
    }
    match config.kind {
        Kind::Bond => Ok((0..n).map(|v| uf.set_size(v)).collect()),
        Kind::Site => {
            let mut out = Vec::with_capacity(n);
            let mut reps: Vec<usize> = Vec::new();
            for v in 0..n {
                if config.bits[v] {
                    out.push(uf.set_size(v));
                    continue;
                }
                reps.clear();
                for &w in g.neighbors(v) {
                    if config.bits[w as usize] {
                        reps.push(uf.find(w as usize));
                    }
                }
                reps.sort_unstable();
                reps.dedup();
                out.push(1 + reps.iter().map(|&r| uf.set_size(r)).sum::<usize>());
            }
            Ok(out)
        }
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    Ok(())
}

/// Empirical law of the (modified) cluster size of `x`; replica `r` uses
/// `SeedSpec(master_seed, r, percolation)`.
pub fn cluster_size_distribution_mc(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    x: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<ClusterSizeDistribution> {
    check_beta(beta)?;
    check_replicas(replicas)?;
    let t = ClusterTable::build(volume, kind, x, &[p_of_beta(beta)], replicas, master_seed)?;
    Ok(t.distribution(0))
}

/// Same as [`cluster_size_distribution_mc`] but sampling full configurations
/// and running union-find. Slower; used as an independent cross-check.
pub fn cluster_size_distribution_uf(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    x: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<ClusterSizeDistribution> {
    check_beta(beta)?;
    check_replicas(replicas)?;
    volume.check_vertex(x)?;
    let p = p_of_beta(beta);
    let parts: Vec<ClusterSizeDistribution> = (0..replicas.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(replicas);
            let sizes = (lo..hi).map(|r| {
                let seed = SeedSpec::new(master_seed, r as u64, Stream::Percolation);
                let cfg = sample(volume, kind, p, seed).expect("valid p");
                all_cluster_sizes(volume, &cfg).expect("matching config")[x]
            });
            ClusterSizeDistribution::from_sizes(sizes.collect::<Vec<_>>())
        })
        .collect();
    let mut it = parts.into_iter();
    let mut acc = it.next().expect("at least one chunk");
    for d in it {
        acc.merge(&d);
    }
    Ok(acc)
}

/// Monte Carlo estimate of `P(C_x meets S(x, n))`, distances measured in the
/// ambient graph.
pub fn radius_reach_probability_mc(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    x: usize,
    n: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<Estimate> {
    check_beta(beta)?;
    check_replicas(replicas)?;
    if n > volume.l() {
        return Err(invalid(
            "n",
            format!("sphere radius {n} exceeds volume radius {}", volume.l()),
        ));
    }
    let t = ClusterTable::build(volume, kind, x, &[p_of_beta(beta)], replicas, master_seed)?;
    Ok(proportion(t.reach_count(0, n as u32), replicas as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_square_lattice;
    use crate::volume::{builtin, finite_volume};
    use std::sync::Arc;

    fn seed(r: u64) -> SeedSpec {
        SeedSpec::new(11, r, Stream::Percolation)
    }

    #[test]
    fn beta_must_be_positive() {
        let v = builtin::k2();
        assert!(sample_bond(&v, 0.0, seed(0)).is_err());
        assert!(sample_site(&v, -1.0, seed(0)).is_err());
    }

    #[test]
    fn open_fraction_at_ln2() {
        let p = Arc::new(build_square_lattice(230).unwrap());
        let v = finite_volume(&p, 229).unwrap();
        let c = sample_bond(&v, std::f64::consts::LN_2, seed(0)).unwrap();
        let m = c.len() as f64;
        assert!(m > 1e5);
        let f = c.open_count() as f64 / m;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / m).sqrt(), "{f}");
        let s = sample_site(&v, std::f64::consts::LN_2, seed(1)).unwrap();
        let m = s.len() as f64;
        let f = s.open_count() as f64 / m;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / m).sqrt(), "{f}");
    }

    #[test]
    fn same_seed_same_bits() {
        let v = builtin::grid(2, 3);
        assert_eq!(
            sample_bond(&v, 0.7, seed(3)).unwrap(),
            sample_bond(&v, 0.7, seed(3)).unwrap()
        );
        assert_ne!(
            (0..20).map(|r| sample_bond(&v, 0.7, seed(r)).unwrap()).collect::<Vec<_>>(),
            (0..20).map(|r| sample_bond(&v, 0.7, seed(r + 1)).unwrap()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn extreme_betas() {
        let v = builtin::grid(2, 3);
        assert_eq!(sample_bond(&v, 1e-12, seed(0)).unwrap().open_count(), 0);
        assert_eq!(sample_site(&v, 60.0, seed(0)).unwrap().open_count(), 6);
    }

    #[test]
    fn closed_configurations_give_singletons() {
        let v = builtin::cycle4();
        let c = Configuration::new(Kind::Bond, vec![false; 4]);
        assert_eq!(cluster_of(&v, &c, 2).unwrap(), vec![2]);
        let s = Configuration::new(Kind::Site, vec![false; 4]);
        assert_eq!(cluster_of(&v, &s, 2).unwrap(), vec![2]);
        assert!(unmodified_cluster_of(&v, &s, 2).unwrap().is_empty());
    }

    #[test]
    fn open_path() {
        let v = builtin::path3();
        let c = Configuration::new(Kind::Bond, vec![true, true]);
        assert_eq!(cluster_of(&v, &c, 0).unwrap(), vec![0, 1, 2]);
        let s = Configuration::new(Kind::Site, vec![false, true, true]);
        assert_eq!(cluster_of(&v, &s, 0).unwrap().len(), 3);
    }

    #[test]
    fn wrong_length_config_rejected() {
        let v = builtin::path3();
        let c = Configuration::new(Kind::Bond, vec![true; 3]);
        assert!(cluster_of(&v, &c, 0).is_err());
        assert!(cluster_of(&v, &Configuration::new(Kind::Bond, vec![true; 2]), 3).is_err());
    }

    #[test]
    fn k2_half() {
        let v = builtin::k2();
        let n = 100_000;
        let d = cluster_size_distribution_mc(&v, Kind::Bond, std::f64::consts::LN_2, 0, n, 1).unwrap();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((d.prob(2) - 0.5).abs() < 3.0 * sigma);
        assert_eq!(d.prob(0), 0.0);
    }

    #[test]
    fn triangle_half() {
        let v = builtin::triangle();
        let n = 100_000;
        let d = cluster_size_distribution_mc(&v, Kind::Bond, std::f64::consts::LN_2, 0, n, 2).unwrap();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((d.prob(3) - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn one_replica_point_mass() {
        let v = builtin::grid(2, 3);
        let d = cluster_size_distribution_mc(&v, Kind::Site, 1.0, 0, 1, 5).unwrap();
        assert_eq!(d.replicas(), Some(1));
        assert_eq!(d.prob(d.max_observed()), 1.0);
    }

    #[test]
    fn union_find_and_explorer_agree() {
        let p = Arc::new(build_square_lattice(6).unwrap());
        let v = finite_volume(&p, 5).unwrap();
        for kind in [Kind::Bond, Kind::Site] {
            let a = cluster_size_distribution_mc(&v, kind, 0.7, v.roots()[0], 600, 4).unwrap();
            let b = cluster_size_distribution_uf(&v, kind, 0.7, v.roots()[0], 600, 4).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reach_probabilities() {
        let v = builtin::k2();
        let e = radius_reach_probability_mc(&v, Kind::Bond, 0.5, 0, 0, 100, 1).unwrap();
        assert_eq!(e.value, 1.0);
        let e = radius_reach_probability_mc(&v, Kind::Bond, std::f64::consts::LN_2, 0, 1, 100_000, 1)
            .unwrap();
        assert!((e.value - 0.5).abs() < 3.0 * e.stderr);
        assert!(radius_reach_probability_mc(&v, Kind::Bond, 0.5, 0, 2, 10, 1).is_err());
    }

    #[test]
    fn subcritical_reach_below_path_bound() {
        let p = Arc::new(build_square_lattice(5).unwrap());
        let v = finite_volume(&p, 4).unwrap();
        let beta = crate::rng::beta_of_p(0.05);
        let e = radius_reach_probability_mc(&v, Kind::Bond, beta, v.roots()[0], 3, 20_000, 2).unwrap();
        let bound = (4.0f64 * 0.05).powi(3);
        assert!(e.value <= bound + 3.0 * e.stderr, "{e:?} vs {bound}");
    }
}
