//! One exploration per replica that answers cluster questions for a whole
//! sorted grid of thresholds at once.
//!
//! Every element carries a uniform `u` and is open at threshold `p` iff
//! `u < p`. The cluster of `x` at threshold index `i` is the set of vertices
//! joined to `x` by a path whose elements all have `need <= i`, where
//! `need(u) = #{j : p_j <= u}`. A bucket queue computes the minimax `need`
//! over paths for every vertex reached below the largest threshold.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::{SeedSpec, Stream};
use crate::volume::{FiniteVolume, Kind};

const FAR: u16 = u16::MAX;

/// Per-replica result of a multi-threshold exploration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explored {
    /// `sizes[i]` = modified cluster size at threshold `i`.
    pub sizes: Vec<u32>,
    /// `radii[i]` = largest ambient distance from `x` inside that cluster.
    pub radii: Vec<u32>,
    /// Threshold index from which `x` itself is open (site mode); 0 for bond.
    pub root_need: u16,
}

/// Reusable exploration workspace for one volume and one root.
#[derive(Debug, Clone)]
pub struct Explorer<'a> {
    volume: &'a FiniteVolume,
    kind: Kind,
    root: usize,
    thresholds: Vec<f64>,
    ambient: Vec<u32>,
    level: Vec<u16>,
    touched: Vec<u32>,
    buckets: Vec<Vec<u32>>,
}

pub(crate) fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(invalid("thresholds", "need at least one value"));
    }
    if thresholds.len() >= FAR as usize {
        return Err(invalid("thresholds", "too many values"));
    }
    for w in thresholds.windows(2) {
        if w[0] >= w[1] {
            return Err(invalid("thresholds", "must be strictly increasing"));
        }
    }
    if thresholds.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("thresholds", "probabilities must lie in [0, 1]"));
    }
    Ok(())
}

impl<'a> Explorer<'a> {
    pub fn new(volume: &'a FiniteVolume, kind: Kind, root: usize, thresholds: &[f64]) -> Result<Self> {
        volume.check_vertex(root)?;
        check_thresholds(thresholds)?;
        Ok(Self::with_ambient(
            volume,
            kind,
            root,
            thresholds,
            volume.ambient_distances(root),
        ))
    }

    pub(crate) fn with_ambient(
        volume: &'a FiniteVolume,
        kind: Kind,
        root: usize,
        thresholds: &[f64],
        ambient: Vec<u32>,
    ) -> Self {
        Self {
            volume,
            kind,
            root,
            thresholds: thresholds.to_vec(),
            ambient,
            level: vec![FAR; volume.vertex_count()],
            touched: Vec::new(),
            buckets: vec![Vec::new(); thresholds.len()],
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    #[inline]
    fn need(&self, u: f64) -> u16 {
        self.thresholds.partition_point(|&p| p <= u) as u16
    }

    /// Explores replica `seed.replica_index` on the percolation stream.
    pub fn explore(&mut self, seed: SeedSpec) -> Explored {
        let rng = seed.with_stream(Stream::Percolation).counter_rng();
        let k = self.thresholds.len();
        let g = self.volume.graph();
        for &v in &self.touched {
            self.level[v as usize] = FAR;
        }
        self.touched.clear();

        let root_need = match self.kind {
            Kind::Bond => 0,
            Kind::Site => self.need(rng.uniform(self.volume.element_key(Kind::Site, self.root))),
        };
        let mut count = vec![0u32; k];
        let mut far = vec![0u32; k];
        self.level[self.root] = 0;
        self.touched.push(self.root as u32);
        self.buckets[0].push(self.root as u32);
        for i in 0..k {
            while let Some(u) = self.buckets[i].pop() {
                let u = u as usize;
                if self.level[u] as usize != i {
                    continue;
                }
                count[i] += 1;
                far[i] = far[i].max(self.ambient[u]);
                let nbrs = g.neighbors(u);
                let eids = g.incident_edges(u);
                for (&w, &e) in nbrs.iter().zip(eids) {
                    let w = w as usize;
                    if (self.level[w] as usize) <= i {
                        continue;
                    }
                    let key = match self.kind {
                        Kind::Bond => self.volume.element_key(Kind::Bond, e as usize),
                        Kind::Site => self.volume.element_key(Kind::Site, w),
                    };
                    let c = (i as u16).max(self.need(rng.uniform(key)));
                    if (c as usize) < k && c < self.level[w] {
                        if self.level[w] == FAR {
                            self.touched.push(w as u32);
                        }
                        self.level[w] = c;
                        self.buckets[c as usize].push(w as u32);
                    }
                }
            }
        }
        for i in 1..k {
            count[i] += count[i - 1];
            far[i] = far[i].max(far[i - 1]);
        }
        Explored {
            sizes: count,
            radii: far,
            root_need,
        }
    }

    /// Level of vertex `v` after the last exploration (`None` if unreached).
    pub fn level_of(&self, v: usize) -> Option<usize> {
        match self.level[v] {
            FAR => None,
            l => Some(l as usize),
        }
    }
}

/// Cluster sizes and radii of `x` for every replica and every threshold,
/// all sharing one set of uniforms per replica.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTable {
    pub kind: Kind,
    pub root: usize,
    pub thresholds: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    sizes: Vec<u32>,
    radii: Vec<u32>,
    root_need: Vec<u16>,
}

/// Replicas handled by one task; fixed so that the work split never depends
/// on the number of threads.
pub const CHUNK: usize = 256;

impl ClusterTable {
    pub fn build(
        volume: &FiniteVolume,
        kind: Kind,
        root: usize,
        thresholds: &[f64],
        replicas: usize,
        master_seed: u64,
    ) -> Result<Self> {
        volume.check_vertex(root)?;
        check_thresholds(thresholds)?;
        if replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        let k = thresholds.len();
        let ambient = volume.ambient_distances(root);
        let mut sizes = vec![0u32; replicas * k];
        let mut radii = vec![0u32; replicas * k];
        let mut root_need = vec![0u16; replicas];
        sizes
            .par_chunks_mut(CHUNK * k)
            .zip(radii.par_chunks_mut(CHUNK * k))
            .zip(root_need.par_chunks_mut(CHUNK))
            .enumerate()
            .for_each(|(c, ((s, r), rn))| {
                let mut ex = Explorer::with_ambient(volume, kind, root, thresholds, ambient.clone());
                for j in 0..rn.len() {
                    let rep = (c * CHUNK + j) as u64;
                    let out = ex.explore(SeedSpec::new(master_seed, rep, Stream::Percolation));
                    s[j * k..(j + 1) * k].copy_from_slice(&out.sizes);
                    r[j * k..(j + 1) * k].copy_from_slice(&out.radii);
                    rn[j] = out.root_need;
                }
            });
        Ok(Self {
            kind,
            root,
            thresholds: thresholds.to_vec(),
            replicas,
            master_seed,
            sizes,
            radii,
            root_need,
        })
    }

    pub fn threshold_count(&self) -> usize {
        self.thresholds.len()
    }

    /// Modified cluster size (the cluster itself for bond percolation).
    #[inline]
    pub fn size(&self, replica: usize, i: usize) -> u32 {
        self.sizes[replica * self.thresholds.len() + i]
    }

    /// Unmodified cluster size: 0 when the root site is closed.
    #[inline]
    pub fn unmodified_size(&self, replica: usize, i: usize) -> u32 {
        if (self.root_need[replica] as usize) <= i {
            self.size(replica, i)
        } else {
            0
        }
    }

    #[inline]
    pub fn radius(&self, replica: usize, i: usize) -> u32 {
        self.radii[replica * self.thresholds.len() + i]
    }

    pub fn sizes_at(&self, i: usize) -> impl Iterator<Item = u32> + '_ {
        (0..self.replicas).map(move |r| self.size(r, i))
    }

    pub fn distribution(&self, i: usize) -> super::ClusterSizeDistribution {
        super::ClusterSizeDistribution::from_sizes(self.sizes_at(i).map(|s| s as usize))
    }

    pub fn unmodified_distribution(&self, i: usize) -> super::ClusterSizeDistribution {
        super::ClusterSizeDistribution::from_sizes(
            (0..self.replicas).map(|r| self.unmodified_size(r, i) as usize),
        )
    }

    /// Number of replicas whose cluster meets the sphere of radius `n`.
    pub fn reach_count(&self, i: usize, n: u32) -> u64 {
        (0..self.replicas).filter(|&r| self.radius(r, i) >= n).count() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_square_lattice;
    use crate::percolation::{cluster_of, sample};
    use std::sync::Arc;

    #[test]
    fn matches_direct_sampling_at_every_threshold() {
        let p = Arc::new(build_square_lattice(6).unwrap());
        let v = crate::volume::finite_volume(&p, 5).unwrap();
        let ps = [0.3, 0.45, 0.5, 0.6, 0.8];
        for kind in [Kind::Bond, Kind::Site] {
            let root = v.roots()[0];
            let mut ex = Explorer::new(&v, kind, root, &ps).unwrap();
            for rep in 0..50 {
                let seed = SeedSpec::new(9, rep, Stream::Percolation);
                let out = ex.explore(seed);
                for (i, &pi) in ps.iter().enumerate() {
                    let cfg = sample(&v, kind, pi, seed).unwrap();
                    let c = cluster_of(&v, &cfg, root).unwrap();
                    assert_eq!(out.sizes[i] as usize, c.len(), "{kind} rep {rep} p {pi}");
                    let amb = v.ambient_distances(root);
                    let r = c.iter().map(|&y| amb[y]).max().unwrap();
                    assert_eq!(out.radii[i], r);
                    assert_eq!(out.root_need as usize <= i, cfg.is_open(root) || kind == Kind::Bond);
                }
            }
        }
    }

    #[test]
    fn table_is_independent_of_thread_count() {
        let p = Arc::new(build_square_lattice(5).unwrap());
        let v = crate::volume::finite_volume(&p, 4).unwrap();
        let ps = [0.4, 0.5, 0.6];
        let a = ClusterTable::build(&v, Kind::Bond, v.roots()[0], &ps, 700, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool
            .install(|| ClusterTable::build(&v, Kind::Bond, v.roots()[0], &ps, 700, 3))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unsorted_thresholds() {
        assert!(check_thresholds(&[0.5, 0.4]).is_err());
        assert!(check_thresholds(&[]).is_err());
        assert!(check_thresholds(&[0.2, 1.5]).is_err());
    }
}
