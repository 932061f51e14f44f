//! The order parameter `M_y(beta, h) = 1 - sum_n P(|C_y| = n) e^{-nh}`, its
//! `h`-derivative, finite-volume sums over the fundamental domain and the
//! blue-site representation.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exact::{self, Tiny, ENUMERATION_CAP};
use crate::graph::GraphPatch;
use crate::percolation::{
    all_cluster_sizes, sample, ClusterSizeDistribution, ClusterTable, CHUNK,
};
use crate::rng::{p_of_beta, SeedSpec, Stream};
use crate::stats::{proportion, Estimate, Moments};
use crate::volume::{finite_volume, FiniteVolume, Kind};

pub(crate) fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0) || h.is_nan() {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    Ok(())
}

/// `1 - e^{-nh}` without cancellation.
#[inline]
pub fn escape(n: f64, h: f64) -> f64 {
    -(-n * h).exp_m1()
}

/// `M` from a cluster-size law, with the i.i.d. standard error of the
/// per-replica transform `1 - e^{-h|C|}` for empirical laws.
pub fn m_from_distribution(dist: &ClusterSizeDistribution, h: f64) -> Result<Estimate> {
    check_h(h)?;
    Ok(dist.expectation(|n| escape(n as f64, h)))
}

/// `M` through the tail form `sum_{n>=1} P(|C| >= n)(e^{-(n-1)h} - e^{-nh})`.
pub fn m_tail_form(dist: &ClusterSizeDistribution, h: f64) -> Result<f64> {
    check_h(h)?;
    let step = escape(1.0, h);
    let mut tail = dist.tail(dist.len());
    let mut acc = 0.0;
    // accumulate from the top so each tail is a sum of small terms
    for n in (1..dist.len()).rev() {
        tail += dist.prob(n);
        acc += tail * (-((n - 1) as f64) * h).exp() * step;
    }
    Ok(acc)
}

/// `dM/dh = sum_n n P(n) e^{-nh}`.
pub fn dmdh_from_distribution(dist: &ClusterSizeDistribution, h: f64) -> Result<Estimate> {
    check_h(h)?;
    Ok(dist.expectation(|n| n as f64 * (-(n as f64) * h).exp()))
}

/// Blue marks on the vertices of a volume, density `1 - e^{-h}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlueSiteSample {
    pub blue: Vec<bool>,
}

/// Blue marks drawn on their own stream, keyed by parent vertex index.
pub fn sample_blue(volume: &FiniteVolume, h: f64, seed: SeedSpec) -> Result<BlueSiteSample> {
    check_h(h)?;
    let q = escape(1.0, h);
    let rng = seed.with_stream(Stream::Blue).counter_rng();
    Ok(BlueSiteSample {
        blue: (0..volume.vertex_count())
            .map(|v| rng.uniform(volume.parent_vertex(v) as u64) < q)
            .collect(),
    })
}

fn reaches_blue(volume: &FiniteVolume, kind: Kind, p: f64, q: f64, x: usize, seed: SeedSpec, seen: &mut Vec<u32>, stamp: u32, stack: &mut Vec<u32>) -> bool {
    let perc = seed.with_stream(Stream::Percolation).counter_rng();
    let blue = seed.with_stream(Stream::Blue).counter_rng();
    let g = volume.graph();
    let is_blue = |v: usize| blue.uniform(volume.parent_vertex(v) as u64) < q;
    stack.clear();
    stack.push(x as u32);
    seen[x] = stamp;
    while let Some(u) = stack.pop() {
        let u = u as usize;
        if is_blue(u) {
            return true;
        }
        for (&w, &e) in g.neighbors(u).iter().zip(g.incident_edges(u)) {
            let w = w as usize;
            if seen[w] == stamp {
                continue;
            }
            let key = match kind {
                Kind::Bond => volume.element_key(Kind::Bond, e as usize),
                Kind::Site => volume.element_key(Kind::Site, w),
            };
            if perc.uniform(key) < p {
                seen[w] = stamp;
                stack.push(w as u32);
            }
        }
    }
    false
}

/// Fraction of replicas in which `x` reaches a blue vertex through open
/// elements. In site mode `x`'s own state is ignored; its blueness counts.
pub fn m_blue_mc(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    h: f64,
    x: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<Estimate> {
    check_h(h)?;
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    volume.check_vertex(x)?;
    let p = p_of_beta(beta);
    let q = escape(1.0, h);
    let hits: u64 = (0..replicas.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut seen = vec![0u32; volume.vertex_count()];
            let mut stack = Vec::new();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(replicas);
            (lo..hi)
                .filter(|&r| {
                    let seed = SeedSpec::new(master_seed, r as u64, Stream::Percolation);
                    reaches_blue(volume, kind, p, q, x, seed, &mut seen, (r - lo + 1) as u32, &mut stack)
                })
                .count() as u64
        })
        .sum();
    Ok(proportion(hits, replicas as u64))
}

/// `P(x <-> B)` by joint enumeration of percolation and blue states.
pub fn m_blue_exact(volume: &FiniteVolume, kind: Kind, beta: f64, h: f64, x: usize) -> Result<f64> {
    check_h(h)?;
    volume.check_vertex(x)?;
    let t = Tiny::new(volume, kind)?;
    let deps = t.cluster_deps(x);
    let d = deps.len();
    let n = t.vertex_count();
    if d + n > ENUMERATION_CAP {
        return Err(crate::Error::EnumerationCap {
            size: d + n,
            cap: ENUMERATION_CAP,
        });
    }
    let mut counts = vec![vec![0u64; n + 1]; d + 1];
    for i in 0u64..1 << d {
        let mask = deps
            .iter()
            .enumerate()
            .filter(|(j, _)| i >> j & 1 == 1)
            .fold(0u64, |m, (_, &e)| m | 1 << e);
        let c = t.cluster(mask, x);
        let k = i.count_ones() as usize;
        for b in 0u64..1 << n {
            if b & c != 0 {
                counts[k][b.count_ones() as usize] += 1;
            }
        }
    }
    let p = p_of_beta(beta);
    let r = escape(1.0, h);
    let mut total = 0.0;
    for (k, row) in counts.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            if a > 0 {
                total += a as f64
                    * p.powi(k as i32)
                    * (1.0 - p).powi((d - k) as i32)
                    * r.powi(j as i32)
                    * (-h * (n - j) as f64).exp();
            }
        }
    }
    Ok(total)
}

/// Finite-volume order parameter at one `(beta, h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterPoint {
    pub beta: f64,
    pub h: f64,
    /// Volume radius; `None` marks an extrapolated infinite-volume value.
    pub volume_l: Option<usize>,
    pub m: Estimate,
    pub dmdh: Estimate,
    /// `(root, M_x)` for every fundamental-domain vertex.
    pub per_vertex: Vec<(usize, Estimate)>,
}

impl OrderParameterPoint {
    pub const CSV_HEADER: [&'static str; 7] = ["beta", "h", "l", "M", "M_stderr", "dMdh", "dMdh_stderr"];

    pub fn csv_record(&self) -> [String; 7] {
        [
            format!("{}", self.beta),
            format!("{}", self.h),
            self.volume_l
                .map(|l| l.to_string())
                .unwrap_or_else(|| "infinite-extrapolated".into()),
            format!("{:.12e}", self.m.value),
            format!("{:.6e}", self.m.stderr),
            format!("{:.12e}", self.dmdh.value),
            format!("{:.6e}", self.dmdh.stderr),
        ]
    }
}

pub fn write_points_csv<W: Write>(points: &[OrderParameterPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OrderParameterPoint::CSV_HEADER)?;
    for p in points {
        w.write_record(p.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

/// Cluster tables for every root of a volume, all driven by the same
/// per-replica uniforms, so per-replica sums over roots are meaningful.
#[derive(Debug, Clone)]
pub struct RootTables {
    pub tables: Vec<ClusterTable>,
    pub roots: Vec<usize>,
}

impl RootTables {
    pub fn build(volume: &FiniteVolume, kind: Kind, thresholds: &[f64], replicas: usize, master_seed: u64) -> Result<Self> {
        let roots = volume.roots().to_vec();
        let tables = roots
            .iter()
            .map(|&x| ClusterTable::build(volume, kind, x, thresholds, replicas, master_seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tables, roots })
    }

    pub fn replicas(&self) -> usize {
        self.tables[0].replicas
    }

    /// Moments over replicas of `sum_x f(|C_x|)` at threshold `i`.
    pub fn summed(&self, i: usize, f: impl Fn(u32) -> f64 + Sync) -> Moments {
        let n = self.replicas();
        let parts: Vec<Moments> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                (c * CHUNK..((c + 1) * CHUNK).min(n))
                    .map(|r| self.tables.iter().map(|t| f(t.size(r, i))).sum::<f64>())
                    .collect()
            })
            .collect();
        let mut acc = Moments::default();
        for p in &parts {
            acc.merge(p);
        }
        acc
    }

    /// Order parameter point at threshold `i`.
    pub fn point(&self, i: usize, beta: f64, h: f64, l: usize) -> OrderParameterPoint {
        let m = self.summed(i, |s| escape(s as f64, h)).estimate();
        let dmdh = self.summed(i, |s| s as f64 * (-(s as f64) * h).exp()).estimate();
        let per_vertex = self
            .roots
            .iter()
            .zip(&self.tables)
            .map(|(&x, t)| (x, t.distribution(i).expectation(|n| escape(n as f64, h))))
            .collect();
        OrderParameterPoint {
            beta,
            h,
            volume_l: Some(l),
            m,
            dmdh,
            per_vertex,
        }
    }
}

/// Monte Carlo `M^{Lambda_l}` and `dM/dh` summed over the fundamental domain.
pub fn finite_volume_m(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    h: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<OrderParameterPoint> {
    Ok(order_parameter_curve(volume, kind, beta, &[h], replicas, master_seed)?.remove(0))
}

/// [`finite_volume_m`] on a grid of `h` values from one set of samples.
pub fn order_parameter_curve(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    hs: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<OrderParameterPoint>> {
    if !(beta > 0.0) {
        return Err(invalid("beta", "must be positive"));
    }
    for &h in hs {
        check_h(h)?;
    }
    let t = RootTables::build(volume, kind, &[p_of_beta(beta)], replicas, master_seed)?;
    Ok(hs.iter().map(|&h| t.point(0, beta, h, volume.l())).collect())
}

/// Exact `M^{Lambda_l}` on an enumerable volume.
pub fn finite_volume_m_exact(volume: &FiniteVolume, kind: Kind, beta: f64, h: f64) -> Result<OrderParameterPoint> {
    check_h(h)?;
    let p = p_of_beta(beta);
    let mut m = 0.0;
    let mut dmdh = 0.0;
    let mut per_vertex = Vec::new();
    for &x in volume.roots() {
        let d = exact::distribution_at(&exact::exact_cluster_distribution(volume, kind, x)?, p);
        let mx = m_from_distribution(&d, h)?.value;
        m += mx;
        dmdh += dmdh_from_distribution(&d, h)?.value;
        per_vertex.push((x, Estimate::exact(mx)));
    }
    Ok(OrderParameterPoint {
        beta,
        h,
        volume_l: Some(volume.l()),
        m: Estimate::exact(m),
        dmdh: Estimate::exact(dmdh),
        per_vertex,
    })
}

/// Slack of `M_y <= M_x + e^{-lh}` for one vertex `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationReport {
    pub y: usize,
    pub x: usize,
    pub beta: f64,
    pub h: f64,
    pub l: usize,
    pub m_y: f64,
    pub m_x: f64,
    pub correction: f64,
    /// `M_x + e^{-lh} - M_y`.
    pub slack: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// Exact check for one `y` on an enumerable volume.
pub fn check_basic_modification_exact(volume: &FiniteVolume, kind: Kind, beta: f64, h: f64, y: usize) -> Result<ModificationReport> {
    check_h(h)?;
    volume.check_vertex(y)?;
    let x = volume.representative(y);
    let p = p_of_beta(beta);
    let m = |v: usize| -> Result<f64> {
        let d = exact::distribution_at(&exact::exact_cluster_distribution(volume, kind, v)?, p);
        Ok(m_from_distribution(&d, h)?.value)
    };
    let (m_y, m_x) = (m(y)?, m(x)?);
    let correction = (-(volume.l() as f64) * h).exp();
    let slack = m_x + correction - m_y;
    Ok(ModificationReport {
        y,
        x,
        beta,
        h,
        l: volume.l(),
        m_y,
        m_x,
        correction,
        slack,
        stderr: 0.0,
        pass: slack >= -exact::EXACT_TOL,
    })
}

/// Monte Carlo check for one `y`, pairing the clusters of `y` and its
/// representative in the same configurations.
pub fn check_basic_modification(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    h: f64,
    y: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<ModificationReport> {
    check_h(h)?;
    volume.check_vertex(y)?;
    let x = volume.representative(y);
    let p = p_of_beta(beta);
    let ty = ClusterTable::build(volume, kind, y, &[p], replicas, master_seed)?;
    let tx = ClusterTable::build(volume, kind, x, &[p], replicas, master_seed)?;
    let e = |s: u32| (-(s as f64) * h).exp();
    let diff: Moments = (0..replicas).map(|r| e(ty.size(r, 0)) - e(tx.size(r, 0))).collect();
    let m_y: Moments = (0..replicas).map(|r| escape(ty.size(r, 0) as f64, h)).collect();
    let m_x: Moments = (0..replicas).map(|r| escape(tx.size(r, 0) as f64, h)).collect();
    Ok(modification_report(y, x, beta, h, volume.l(), &m_y, &m_x, &diff))
}

#[allow(clippy::too_many_arguments)]
fn modification_report(y: usize, x: usize, beta: f64, h: f64, l: usize, m_y: &Moments, m_x: &Moments, diff: &Moments) -> ModificationReport {
    let correction = (-(l as f64) * h).exp();
    let d = diff.estimate();
    let slack = d.value + correction;
    ModificationReport {
        y,
        x,
        beta,
        h,
        l,
        m_y: m_y.mean(),
        m_x: m_x.mean(),
        correction,
        slack,
        stderr: d.stderr,
        pass: slack >= -3.0 * d.stderr,
    }
}

/// Monte Carlo check for every vertex of the volume at once: each replica
/// is sampled in full and all cluster sizes come from one union-find pass.
pub fn check_basic_modification_all(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    h: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<ModificationReport>> {
    check_h(h)?;
    if replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    let n = volume.vertex_count();
    let p = p_of_beta(beta);
    let reps: Vec<usize> = (0..n).map(|y| volume.representative(y)).collect();
    type Acc = (Vec<Moments>, Vec<Moments>);
    let parts: Vec<Acc> = (0..replicas.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut m = vec![Moments::default(); n];
            let mut diff = vec![Moments::default(); n];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                let cfg = sample(volume, kind, p, SeedSpec::new(master_seed, r as u64, Stream::Percolation))
                    .expect("valid p");
                let sizes = all_cluster_sizes(volume, &cfg).expect("matching config");
                for y in 0..n {
                    let sy = sizes[y] as f64;
                    let sx = sizes[reps[y]] as f64;
                    m[y].push(escape(sy, h));
                    diff[y].push((-sy * h).exp() - (-sx * h).exp());
                }
            }
            (m, diff)
        })
        .collect();
    let mut m = vec![Moments::default(); n];
    let mut diff = vec![Moments::default(); n];
    for (pm, pd) in &parts {
        for y in 0..n {
            m[y].merge(&pm[y]);
            diff[y].merge(&pd[y]);
        }
    }
    Ok((0..n)
        .map(|y| modification_report(y, reps[y], beta, h, volume.l(), &m[y], &m[reps[y]], &diff[y]))
        .collect())
}

/// `M^{Lambda_l}` along a list of volume radii with successive differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceScan {
    pub points: Vec<OrderParameterPoint>,
    /// `M^{Lambda_{l_{i+1}}} - M^{Lambda_{l_i}}`.
    pub differences: Vec<f64>,
    /// Whether the last difference is below the tolerance.
    pub converged: bool,
    /// Whether the sequence is non-decreasing within three standard errors.
    pub monotone: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn convergence_scan(
    patch: &Arc<GraphPatch>,
    kind: Kind,
    beta: f64,
    h: f64,
    ls: &[usize],
    replicas: usize,
    master_seed: u64,
    tolerance: f64,
) -> Result<ConvergenceScan> {
    if ls.is_empty() {
        return Err(invalid("l_list", "need at least one radius"));
    }
    let points = ls
        .iter()
        .map(|&l| finite_volume_m(&finite_volume(patch, l)?, kind, beta, h, replicas, master_seed))
        .collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = points.windows(2).map(|w| w[1].m.value - w[0].m.value).collect();
    let monotone = points
        .windows(2)
        .all(|w| w[1].m.value - w[0].m.value >= -3.0 * w[0].m.stderr.hypot(w[1].m.stderr));
    let converged = differences.last().map_or(false, |d| d.abs() <= tolerance);
    Ok(ConvergenceScan {
        points,
        differences,
        converged,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_square_lattice;
    use crate::volume::builtin;
    use std::f64::consts::LN_2;

    fn k2_exact() -> ClusterSizeDistribution {
        exact::distribution_at(&exact::exact_cluster_distribution(&builtin::k2(), Kind::Bond, 0).unwrap(), 0.5)
    }

    #[test]
    fn k2_values() {
        let d = k2_exact();
        assert!((m_from_distribution(&d, LN_2).unwrap().value - 0.625).abs() < 1e-15);
        assert!((dmdh_from_distribution(&d, LN_2).unwrap().value - 0.5).abs() < 1e-15);
        assert!((m_tail_form(&d, LN_2).unwrap() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn limits_and_point_mass() {
        let d = ClusterSizeDistribution::from_probabilities(vec![0.0, 1.0]);
        let h = 0.37;
        assert!((m_from_distribution(&d, h).unwrap().value - (1.0 - (-h).exp())).abs() < 1e-15);
        assert!((dmdh_from_distribution(&d, h).unwrap().value - (-h).exp()).abs() < 1e-15);
        let d = k2_exact();
        assert!((m_from_distribution(&d, 60.0).unwrap().value - 1.0).abs() < 1e-15);
        assert!(dmdh_from_distribution(&d, 60.0).unwrap().value < 1e-20);
        assert!(m_from_distribution(&d, 0.0).is_err());
    }

    #[test]
    fn dmdh_matches_finite_difference() {
        let v = builtin::grid(2, 3);
        let d = exact::distribution_at(&exact::exact_cluster_distribution(&v, Kind::Bond, 0).unwrap(), 0.4);
        for h in [0.05, 0.5, 2.0] {
            let eps = 1e-4;
            let fd = (m_from_distribution(&d, h + eps).unwrap().value
                - m_from_distribution(&d, h - eps).unwrap().value)
                / (2.0 * eps);
            let an = dmdh_from_distribution(&d, h).unwrap().value;
            assert!((fd - an).abs() <= 1e-5 * an, "{fd} {an}");
        }
    }

    #[test]
    fn blue_exact_equals_series() {
        for v in builtin::all().iter().take(6) {
            for kind in [Kind::Bond, Kind::Site] {
                for (beta, h) in [(0.3, 0.1), (LN_2, 0.5), (2.0, 2.0)] {
                    let x = v.roots()[0];
                    let series = finite_volume_m_exact(v, kind, beta, h).unwrap().per_vertex[0].1.value;
                    let blue = m_blue_exact(v, kind, beta, h, x).unwrap();
                    assert!((series - blue).abs() < 1e-12, "{} {kind}: {series} {blue}", v.name());
                }
            }
        }
    }

    #[test]
    fn blue_mc_k2() {
        let v = builtin::k2();
        let e = m_blue_mc(&v, Kind::Bond, LN_2, LN_2, 0, 100_000, 5).unwrap();
        assert!((e.value - 0.625).abs() < 3.0 * e.stderr, "{e:?}");
        let e = m_blue_mc(&v, Kind::Bond, 1e-9, 0.7, 0, 20_000, 5).unwrap();
        assert!((e.value - escape(1.0, 0.7)).abs() < 3.0 * e.stderr + 1e-6);
        let e = m_blue_mc(&v, Kind::Site, 1.0, 50.0, 0, 1000, 5).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn transitive_and_subdivided_roots() {
        let p = Arc::new(build_square_lattice(4).unwrap());
        let v = finite_volume(&p, 3).unwrap();
        let pt = finite_volume_m(&v, Kind::Bond, 0.5, 0.3, 2000, 1).unwrap();
        assert_eq!(pt.per_vertex.len(), 1);
        assert!((pt.m.value - pt.per_vertex[0].1.value).abs() < 1e-12);
        let s = Arc::new(crate::graph::build_subdivided_square_lattice(3).unwrap());
        let v = finite_volume(&s, 2).unwrap();
        let pt = finite_volume_m(&v, Kind::Site, 0.5, 0.3, 2000, 1).unwrap();
        assert_eq!(pt.per_vertex.len(), 2);
        let sum: f64 = pt.per_vertex.iter().map(|(_, e)| e.value).sum();
        assert!((pt.m.value - sum).abs() < 1e-12);
    }

    #[test]
    fn mc_matches_exact_on_grid() {
        let v = builtin::grid(2, 3);
        for kind in [Kind::Bond, Kind::Site] {
            let ex = finite_volume_m_exact(&v, kind, 0.8, 0.4).unwrap();
            let mc = finite_volume_m(&v, kind, 0.8, 0.4, 50_000, 3).unwrap();
            assert!(mc.m.agrees_with(&ex.m, 3.5, 0.0), "{mc:?} {ex:?}");
            assert!(mc.dmdh.agrees_with(&ex.dmdh, 3.5, 0.0));
        }
    }

    #[test]
    fn basic_modification_exact_and_mc() {
        let v = builtin::grid(2, 3);
        for y in 0..6 {
            let r = check_basic_modification_exact(&v, Kind::Bond, 0.7, 0.5, y).unwrap();
            assert!(r.pass);
        }
        let r = check_basic_modification_exact(&v, Kind::Bond, 0.7, 0.5, 0).unwrap();
        assert!((r.slack - r.correction).abs() < 1e-15);
        let p = Arc::new(build_square_lattice(4).unwrap());
        let v = finite_volume(&p, 3).unwrap();
        let all = check_basic_modification_all(&v, Kind::Bond, crate::rng::beta_of_p(0.3), 0.5, 4000, 2).unwrap();
        assert!(all.iter().all(|r| r.pass));
        let one = check_basic_modification(&v, Kind::Bond, crate::rng::beta_of_p(0.3), 0.5, 5, 4000, 2).unwrap();
        assert!(one.pass);
        assert!((one.slack - all[5].slack).abs() < 1e-12);
    }

    #[test]
    fn convergence_small_beta() {
        let p = Arc::new(build_square_lattice(5).unwrap());
        let scan = convergence_scan(&p, Kind::Bond, 0.01, 0.5, &[1, 2, 3, 4], 20_000, 1, 1e-3).unwrap();
        assert!(scan.converged);
        assert!(scan.monotone);
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        let pt = finite_volume_m_exact(&builtin::k2(), Kind::Bond, LN_2, LN_2).unwrap();
        write_points_csv(&[pt], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("beta,h,l,M,M_stderr,dMdh,dMdh_stderr\n"));
    }
}
