//! Exhaustive enumeration over all configurations of tiny volumes.
//!
//! Configurations are bit masks over the elements (edges or vertices) of a
//! volume with at most 64 elements. An event is enumerated only over its
//! declared dependency set, which is capped at [`ENUMERATION_CAP`].

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::percolation::{ClusterSizeDistribution, Configuration};
use crate::rng::{SeedSpec, Stream};
use crate::volume::{FiniteVolume, Kind};

/// Largest dependency set that is enumerated.
pub const ENUMERATION_CAP: usize = 24;
/// Largest support searched by the subset-based disjoint-occurrence test.
pub const BK_SUPPORT_CAP: usize = 20;

/// `a_k` = number of configurations of `total_sites` elements in the event
/// with exactly `k` open elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPolynomial {
    pub total_sites: usize,
    pub counts: Vec<u64>,
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as u64
}

impl EventPolynomial {
    pub fn zero(total_sites: usize) -> Self {
        Self {
            total_sites,
            counts: vec![0; total_sites + 1],
        }
    }

    /// The constant polynomial 1 (every configuration).
    pub fn one(total_sites: usize) -> Self {
        Self {
            total_sites,
            counts: (0..=total_sites).map(|k| binomial(total_sites, k)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&a| a == 0)
    }

    /// `sum_k a_k p^k (1-p)^(m-k)`.
    pub fn prob(&self, p: f64) -> f64 {
        let m = self.total_sites as i32;
        let q = 1.0 - p;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(k, &a)| a as f64 * p.powi(k as i32) * q.powi(m - k as i32))
            .sum()
    }

    /// Analytic derivative in `p`.
    pub fn derivative(&self, p: f64) -> f64 {
        let m = self.total_sites as i32;
        let q = 1.0 - p;
        let mut d = 0.0;
        for (k, &a) in self.counts.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let k = k as i32;
            let a = a as f64;
            if k > 0 {
                d += a * k as f64 * p.powi(k - 1) * q.powi(m - k);
            }
            if k < m {
                d -= a * (m - k) as f64 * p.powi(k) * q.powi(m - k - 1);
            }
        }
        d
    }

    /// The same event viewed over `extra` additional irrelevant elements.
    pub fn embed(&self, extra: usize) -> Self {
        let m = self.total_sites + extra;
        let mut counts = vec![0u64; m + 1];
        for (k, &a) in self.counts.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for j in 0..=extra {
                counts[k + j] += a * binomial(extra, j);
            }
        }
        Self {
            total_sites: m,
            counts,
        }
    }

    pub fn add(&mut self, other: &EventPolynomial) {
        assert_eq!(self.total_sites, other.total_sites, "polynomials over different element sets");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// CSV `k,count`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "count"])?;
        for (k, a) in self.counts.iter().enumerate() {
            w.write_record([k.to_string(), a.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("ascii csv"))
    }
}

type Decide = dyn Fn(u64) -> bool + Send + Sync;

/// A decision function on configuration masks together with the elements it
/// is allowed to read.
#[derive(Clone)]
pub struct EventPredicate {
    name: String,
    deps: Vec<usize>,
    decide: Arc<Decide>,
}

impl fmt::Debug for EventPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventPredicate")
            .field("name", &self.name)
            .field("deps", &self.deps)
            .finish()
    }
}

impl EventPredicate {
    pub fn new(
        name: impl Into<String>,
        mut deps: Vec<usize>,
        decide: impl Fn(u64) -> bool + Send + Sync + 'static,
    ) -> Self {
        deps.sort_unstable();
        deps.dedup();
        Self {
            name: name.into(),
            deps,
            decide: Arc::new(decide),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn deps(&self) -> &[usize] {
        &self.deps
    }

    pub fn deps_mask(&self) -> u64 {
        self.deps.iter().fold(0, |m, &i| m | 1 << i)
    }

    #[inline]
    pub fn holds(&self, mask: u64) -> bool {
        (self.decide)(mask)
    }

    pub fn holds_for(&self, config: &Configuration) -> bool {
        let mask = config
            .bits()
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &b)| if b { m | 1 << i } else { m });
        self.holds(mask)
    }

    /// Probes random configurations and flips of undeclared elements; reports
    /// the first element that changes the outcome.
    pub fn verify_dependencies(&self, element_count: usize, trials: usize, seed: u64) -> Result<()> {
        let undeclared: Vec<usize> = (0..element_count).filter(|i| !self.deps.contains(i)).collect();
        if undeclared.is_empty() {
            return Ok(());
        }
        let full = if element_count == 64 { u64::MAX } else { (1u64 << element_count) - 1 };
        let mut rng = SeedSpec::new(seed, 0, Stream::Probe).sequential();
        for _ in 0..trials {
            let w = rng.gen::<u64>() & full;
            let e = undeclared[rng.gen_range(0..undeclared.len())];
            if self.holds(w) != self.holds(w ^ 1 << e) {
                return Err(Error::UndeclaredDependency {
                    event: self.name.clone(),
                    element: e,
                });
            }
        }
        Ok(())
    }
}

/// Adjacency of a volume with at most 64 vertices and 64 elements, for fast
/// cluster extraction from masks.
#[derive(Debug, Clone)]
pub struct Tiny {
    kind: Kind,
    n: usize,
    elements: usize,
    incid: Vec<Vec<(u8, u8)>>,
    nbr_mask: Vec<u64>,
}

impl Tiny {
    pub fn new(volume: &FiniteVolume, kind: Kind) -> Result<Self> {
        let n = volume.vertex_count();
        let elements = volume.element_count(kind);
        if n > 64 || elements > 64 {
            return Err(Error::EnumerationCap {
                size: n.max(elements),
                cap: 64,
            });
        }
        let g = volume.graph();
        let incid = (0..n)
            .map(|v| g.incidence(v).map(|(w, e)| (w as u8, e as u8)).collect())
            .collect();
        let nbr_mask = (0..n)
            .map(|v| g.neighbors(v).iter().fold(0u64, |m, &w| m | 1 << w))
            .collect();
        Ok(Self {
            kind,
            n,
            elements,
            incid,
            nbr_mask,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn element_count(&self) -> usize {
        self.elements
    }

    /// Vertex set of the (modified) cluster of `x` under `mask`.
    #[inline]
    pub fn cluster(&self, mask: u64, x: usize) -> u64 {
        let mut seen = 1u64 << x;
        match self.kind {
            Kind::Site => {
                let mut frontier = seen;
                while frontier != 0 {
                    let mut next = 0;
                    let mut f = frontier;
                    while f != 0 {
                        let v = f.trailing_zeros() as usize;
                        f &= f - 1;
                        next |= self.nbr_mask[v];
                    }
                    frontier = next & mask & !seen;
                    seen |= frontier;
                }
            }
            Kind::Bond => {
                let mut stack = [0u8; 64];
                let mut top = 1;
                stack[0] = x as u8;
                while top > 0 {
                    top -= 1;
                    let u = stack[top] as usize;
                    for &(w, e) in &self.incid[u] {
                        if mask >> e & 1 == 1 && seen >> w & 1 == 0 {
                            seen |= 1 << w;
                            stack[top] = w;
                            top += 1;
                        }
                    }
                }
            }
        }
        seen
    }

    /// Elements the cluster of `x` may depend on: all edges (bond) or all
    /// vertices but `x` (site, modified cluster).
    pub fn cluster_deps(&self, x: usize) -> Vec<usize> {
        match self.kind {
            Kind::Bond => (0..self.elements).collect(),
            Kind::Site => (0..self.n).filter(|&v| v != x).collect(),
        }
    }
}

/// Ready-made events on tiny volumes.
pub mod events {
    use super::*;

    pub fn certain() -> EventPredicate {
        EventPredicate::new("certain", vec![], |_| true)
    }

    pub fn impossible() -> EventPredicate {
        EventPredicate::new("impossible", vec![], |_| false)
    }

    /// Element `i` is open.
    pub fn open(i: usize) -> EventPredicate {
        EventPredicate::new(format!("open({i})"), vec![i], move |m| m >> i & 1 == 1)
    }

    /// `x <-> y`. In site mode both endpoints must be open.
    pub fn connected(volume: &FiniteVolume, kind: Kind, x: usize, y: usize) -> Result<EventPredicate> {
        volume.check_vertex(x)?;
        volume.check_vertex(y)?;
        let t = Tiny::new(volume, kind)?;
        let deps = (0..t.element_count()).collect();
        let ends = match kind {
            Kind::Bond => 0,
            Kind::Site => 1u64 << x | 1u64 << y,
        };
        Ok(EventPredicate::new(
            format!("{x}<->{y}"),
            deps,
            move |m| m & ends == ends && t.cluster(m, x) >> y & 1 == 1,
        ))
    }

    /// `|C_x| >= n` for the (modified) cluster.
    pub fn cluster_at_least(volume: &FiniteVolume, kind: Kind, x: usize, n: usize) -> Result<EventPredicate> {
        volume.check_vertex(x)?;
        let t = Tiny::new(volume, kind)?;
        let deps = t.cluster_deps(x);
        Ok(EventPredicate::new(format!("|C_{x}|>={n}"), deps, move |m| {
            t.cluster(m, x).count_ones() as usize >= n
        }))
    }

    /// `|C_x| = n` for the (modified) cluster.
    pub fn cluster_equals(volume: &FiniteVolume, kind: Kind, x: usize, n: usize) -> Result<EventPredicate> {
        volume.check_vertex(x)?;
        let t = Tiny::new(volume, kind)?;
        let deps = t.cluster_deps(x);
        Ok(EventPredicate::new(format!("|C_{x}|={n}"), deps, move |m| {
            t.cluster(m, x).count_ones() as usize == n
        }))
    }
}

/// Maps enumeration indices (bits over the dependency list) to masks.
struct Scatter {
    lo_bits: usize,
    lo: Vec<u64>,
    hi: Vec<u64>,
}

impl Scatter {
    fn new(deps: &[usize]) -> Self {
        let lo_bits = deps.len() / 2;
        let table = |ds: &[usize]| -> Vec<u64> {
            (0..1usize << ds.len())
                .map(|i| {
                    ds.iter()
                        .enumerate()
                        .filter(|(j, _)| i >> j & 1 == 1)
                        .fold(0u64, |m, (_, &e)| m | 1 << e)
                })
                .collect()
        };
        Self {
            lo_bits,
            lo: table(&deps[..lo_bits]),
            hi: table(&deps[lo_bits..]),
        }
    }

    #[inline]
    fn mask(&self, i: usize) -> u64 {
        self.lo[i & ((1 << self.lo_bits) - 1)] | self.hi[i >> self.lo_bits]
    }
}

const PAR_BLOCK: usize = 1 << 14;

/// Bit positions `t < 64` whose bit `j` is zero.
const LOW_HALF: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0F0F_0F0F_0F0F_0F0F,
    0x00FF_00FF_00FF_00FF,
    0x0000_FFFF_0000_FFFF,
    0x0000_0000_FFFF_FFFF,
];

fn check_cap(d: usize) -> Result<()> {
    if d > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            size: d,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// Truth table of a decision function over every configuration of `deps`.
#[derive(Debug, Clone)]
pub struct EventTable {
    deps: Vec<usize>,
    bits: Vec<u64>,
}

impl EventTable {
    pub fn build(deps: &[usize], decide: impl Fn(u64) -> bool + Sync) -> Result<Self> {
        check_cap(deps.len())?;
        let sc = Scatter::new(deps);
        let total = 1usize << deps.len();
        let mut bits = vec![0u64; total.div_ceil(64)];
        bits.par_chunks_mut(PAR_BLOCK / 64).enumerate().for_each(|(b, words)| {
            for (wi, word) in words.iter_mut().enumerate() {
                let base = (b * PAR_BLOCK / 64 + wi) * 64;
                for j in 0..64.min(total.saturating_sub(base)) {
                    if decide(sc.mask(base + j)) {
                        *word |= 1 << j;
                    }
                }
            }
        });
        Ok(Self {
            deps: deps.to_vec(),
            bits,
        })
    }

    pub fn of(event: &EventPredicate, deps: &[usize]) -> Result<Self> {
        Self::build(deps, |m| event.holds(m))
    }

    pub fn dims(&self) -> usize {
        self.deps.len()
    }

    pub fn deps(&self) -> &[usize] {
        &self.deps
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.bits[i >> 6] |= 1 << (i & 63);
    }

    pub fn polynomial(&self) -> EventPolynomial {
        let d = self.dims();
        let mut poly = EventPolynomial::zero(d);
        for i in 0..1usize << d {
            if self.get(i) {
                poly.counts[i.count_ones() as usize] += 1;
            }
        }
        poly
    }

    /// Whether the table is closed under opening any element.
    pub fn is_increasing(&self) -> bool {
        let mut ok = true;
        self.for_each_pair(|lo, hi| ok &= lo & !hi == 0);
        ok
    }

    /// Calls `f(lo, hi)` for every element and every aligned pair of words
    /// whose bit `t` in `lo` is configuration `i` and in `hi` is `i` with that
    /// element opened. `lo` is masked to the configurations where the element
    /// is closed, `hi` is shifted onto them.
    fn for_each_pair(&self, mut f: impl FnMut(u64, u64)) {
        for j in 0..self.dims() {
            self.pairs_along(j, |_, lo, hi| f(lo, hi));
        }
    }

    fn pairs_along(&self, j: usize, mut f: impl FnMut(usize, u64, u64)) {
        if j < 6 {
            let s = 1 << j;
            for (k, &w) in self.bits.iter().enumerate() {
                f(k, w & LOW_HALF[j], (w >> s) & LOW_HALF[j]);
            }
        } else {
            let b = 1 << (j - 6);
            for k in (0..self.bits.len()).filter(|k| k & b == 0) {
                f(k, self.bits[k], self.bits[k | b]);
            }
        }
    }

    /// Pivotal configurations summed over all elements: each flip of an
    /// element that changes membership counts once at both endpoints.
    pub fn pivotal_sum_polynomial(&self) -> EventPolynomial {
        let d = self.dims();
        let mut poly = EventPolynomial::zero(d);
        for j in 0..d {
            let mask = if j < 6 { LOW_HALF[j] } else { u64::MAX };
            let total = 1usize << d;
            self.pairs_along(j, |k, lo, hi| {
                let valid = if total < 64 { (1u64 << total) - 1 } else { u64::MAX };
                let mut diff = (lo ^ hi) & mask & valid;
                let base = (k as u64).count_ones() as usize;
                while diff != 0 {
                    let t = diff.trailing_zeros();
                    diff &= diff - 1;
                    let c = base + t.count_ones() as usize;
                    poly.counts[c] += 1;
                    poly.counts[c + 1] += 1;
                }
            });
        }
        poly
    }

    /// Configurations where element `j` (position in `deps`) is pivotal,
    /// counted over all `d` elements. Slow reference for
    /// [`pivotal_sum_polynomial`](Self::pivotal_sum_polynomial).
    pub fn pivotal_polynomial(&self, j: usize) -> EventPolynomial {
        let d = self.dims();
        let mut poly = EventPolynomial::zero(d);
        for i in 0..1usize << d {
            if self.get(i | 1 << j) != self.get(i & !(1 << j)) {
                poly.counts[i.count_ones() as usize] += 1;
            }
        }
        poly
    }

    /// Intersection with a table over the same elements.
    pub fn and(&self, other: &EventTable) -> EventTable {
        assert_eq!(self.deps, other.deps, "tables over different elements");
        EventTable {
            deps: self.deps.clone(),
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a & b).collect(),
        }
    }

    /// Smallest increasing event containing this one.
    fn close_upwards(&mut self) {
        for j in 0..self.dims() {
            if j < 6 {
                let s = 1 << j;
                for w in &mut self.bits {
                    *w |= (*w & LOW_HALF[j]) << s;
                }
            } else {
                let b = 1 << (j - 6);
                for k in (0..self.bits.len()).filter(|k| k & b == 0) {
                    self.bits[k | b] |= self.bits[k];
                }
            }
        }
    }

    /// Elements of the event that stay in it when any open element closes
    /// no further, i.e. the minimal configurations.
    pub fn minimal_elements(&self) -> Vec<usize> {
        let d = self.dims();
        (0..1usize << d)
            .filter(|&i| {
                self.get(i) && {
                    let mut s = i;
                    let mut minimal = true;
                    while s != 0 {
                        let j = s.trailing_zeros();
                        s &= s - 1;
                        if self.get(i & !(1 << j)) {
                            minimal = false;
                            break;
                        }
                    }
                    minimal
                }
            })
            .collect()
    }
}

fn check_deps(volume: &FiniteVolume, kind: Kind, event: &EventPredicate) -> Result<()> {
    let m = volume.element_count(kind);
    if let Some(&e) = event.deps().iter().find(|&&e| e >= m) {
        return Err(invalid(
            "event",
            format!("`{}` depends on element {e} but the volume has {m}", event.name()),
        ));
    }
    Ok(())
}

/// Exact counts of `event` over all configurations of its dependency set.
pub fn enumerate_event(volume: &FiniteVolume, kind: Kind, event: &EventPredicate) -> Result<EventPolynomial> {
    check_deps(volume, kind, event)?;
    Ok(EventTable::of(event, event.deps())?.polynomial())
}

/// `P(|C_x| = n)` as polynomials indexed by `n`, all over the same element
/// set (the dependency set of the cluster). Site mode uses the modified
/// cluster, so index 0 is always the zero polynomial.
pub fn exact_cluster_distribution(volume: &FiniteVolume, kind: Kind, x: usize) -> Result<Vec<EventPolynomial>> {
    volume.check_vertex(x)?;
    let t = Tiny::new(volume, kind)?;
    let deps = t.cluster_deps(x);
    cluster_polys(&t, &deps, x, false)
}

/// Unmodified site law: the root's own state is an extra element and
/// `|C_x| = 0` whenever it is closed. Bond mode is unchanged.
pub fn exact_unmodified_cluster_distribution(
    volume: &FiniteVolume,
    kind: Kind,
    x: usize,
) -> Result<Vec<EventPolynomial>> {
    if kind == Kind::Bond {
        return exact_cluster_distribution(volume, kind, x);
    }
    volume.check_vertex(x)?;
    let t = Tiny::new(volume, kind)?;
    let deps: Vec<usize> = (0..t.vertex_count()).collect();
    cluster_polys(&t, &deps, x, true)
}

fn cluster_polys(t: &Tiny, deps: &[usize], x: usize, unmodified: bool) -> Result<Vec<EventPolynomial>> {
    check_cap(deps.len())?;
    let d = deps.len();
    let sc = Scatter::new(deps);
    let total = 1usize << d;
    let n = t.vertex_count();
    let blocks: Vec<Vec<u64>> = (0..total.div_ceil(PAR_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0u64; (n + 1) * (d + 1)];
            for i in b * PAR_BLOCK..((b + 1) * PAR_BLOCK).min(total) {
                let m = sc.mask(i);
                let size = if unmodified && m >> x & 1 == 0 {
                    0
                } else {
                    t.cluster(m, x).count_ones() as usize
                };
                acc[size * (d + 1) + i.count_ones() as usize] += 1;
            }
            acc
        })
        .collect();
    let mut polys = vec![EventPolynomial::zero(d); n + 1];
    for acc in blocks {
        for (s, poly) in polys.iter_mut().enumerate() {
            for k in 0..=d {
                poly.counts[k] += acc[s * (d + 1) + k];
            }
        }
    }
    Ok(polys)
}

/// Evaluates a family of size polynomials at `p`.
pub fn distribution_at(polys: &[EventPolynomial], p: f64) -> ClusterSizeDistribution {
    ClusterSizeDistribution::from_probabilities(polys.iter().map(|q| q.prob(p)).collect())
}

/// Derivatives in `p` of a family of size polynomials.
pub fn distribution_derivative_at(polys: &[EventPolynomial], p: f64) -> Vec<f64> {
    polys.iter().map(|q| q.derivative(p)).collect()
}

fn union_deps(events: &[&EventPredicate]) -> Vec<usize> {
    let mut d: Vec<usize> = events.iter().flat_map(|e| e.deps().iter().copied()).collect();
    d.sort_unstable();
    d.dedup();
    d
}

fn increasing_table(volume: &FiniteVolume, kind: Kind, event: &EventPredicate, deps: &[usize]) -> Result<EventTable> {
    check_deps(volume, kind, event)?;
    EventTable::increasing(event, deps)
}

impl EventTable {
    /// Truth table of an increasing event over `deps`, which must contain its
    /// dependencies.
    pub fn increasing(event: &EventPredicate, deps: &[usize]) -> Result<Self> {
        if let Some(&e) = event.deps().iter().find(|e| deps.binary_search(e).is_err()) {
            return Err(invalid("event", format!("`{}` depends on element {e} outside the table", event.name())));
        }
        let t = EventTable::of(event, deps)?;
        if !t.is_increasing() {
            return Err(Error::NotIncreasing(event.name().to_string()));
        }
        Ok(t)
    }
}

/// Outcome of an exact check over a grid of `p` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub graph: String,
    pub p_grid: Vec<f64>,
    /// Largest discrepancy (Russo) or smallest slack (FKG, BK).
    pub worst_case: f64,
    pub pass: bool,
}

pub const EXACT_TOL: f64 = 1e-12;

/// Largest `|d/dp P(A) - E[number of pivotal elements]|` over the grid.
pub fn russo_worst(table: &EventTable, p_grid: &[f64]) -> f64 {
    let poly = table.polynomial();
    let pivots = table.pivotal_sum_polynomial();
    p_grid
        .iter()
        .map(|&p| (poly.derivative(p) - pivots.prob(p)).abs())
        .fold(0.0, f64::max)
}

/// Smallest `P(A1 and A2) - P(A1) P(A2)` over the grid.
pub fn fkg_worst(t1: &EventTable, t2: &EventTable, p_grid: &[f64]) -> f64 {
    let both = t1.and(t2).polynomial();
    let (p1, p2) = (t1.polynomial(), t2.polynomial());
    p_grid
        .iter()
        .map(|&p| both.prob(p) - p1.prob(p) * p2.prob(p))
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `P(A1) P(A2) - P(A1 o A2)` over the grid.
pub fn bk_worst(t1: &EventTable, t2: &EventTable, p_grid: &[f64]) -> f64 {
    assert_eq!(t1.deps, t2.deps, "tables over different elements");
    let disjoint = disjoint_table(t1, t2).polynomial();
    let (p1, p2) = (t1.polynomial(), t2.polynomial());
    p_grid
        .iter()
        .map(|&p| p1.prob(p) * p2.prob(p) - disjoint.prob(p))
        .fold(f64::INFINITY, f64::min)
}

pub fn russo_check(
    volume: &FiniteVolume,
    kind: Kind,
    event: &EventPredicate,
    p_grid: &[f64],
) -> Result<CheckReport> {
    let table = increasing_table(volume, kind, event, event.deps())?;
    let worst = russo_worst(&table, p_grid);
    Ok(CheckReport {
        check: format!("russo[{}]", event.name()),
        graph: volume.name().to_string(),
        p_grid: p_grid.to_vec(),
        worst_case: worst,
        pass: worst <= EXACT_TOL,
    })
}

pub fn fkg_check(
    volume: &FiniteVolume,
    kind: Kind,
    a1: &EventPredicate,
    a2: &EventPredicate,
    p_grid: &[f64],
) -> Result<CheckReport> {
    let deps = union_deps(&[a1, a2]);
    let t1 = increasing_table(volume, kind, a1, &deps)?;
    let t2 = increasing_table(volume, kind, a2, &deps)?;
    let worst = fkg_worst(&t1, &t2, p_grid);
    Ok(CheckReport {
        check: format!("fkg[{},{}]", a1.name(), a2.name()),
        graph: volume.name().to_string(),
        p_grid: p_grid.to_vec(),
        worst_case: worst,
        pass: worst >= -EXACT_TOL,
    })
}

/// Exact polynomial of the disjoint occurrence `A1 o A2` of two increasing
/// events: pairs of disjoint minimal witnesses are marked and the result is
/// closed upwards.
pub fn disjoint_occurrence(
    volume: &FiniteVolume,
    kind: Kind,
    a1: &EventPredicate,
    a2: &EventPredicate,
) -> Result<EventPolynomial> {
    let deps = union_deps(&[a1, a2]);
    let t1 = increasing_table(volume, kind, a1, &deps)?;
    let t2 = increasing_table(volume, kind, a2, &deps)?;
    Ok(disjoint_table(&t1, &t2).polynomial())
}

fn disjoint_table(t1: &EventTable, t2: &EventTable) -> EventTable {
    let d = t1.dims();
    let w1 = t1.minimal_elements();
    let w2 = t2.minimal_elements();
    let mut out = EventTable {
        deps: t1.deps.clone(),
        bits: vec![0; (1usize << d).div_ceil(64)],
    };
    for &a in &w1 {
        for &b in &w2 {
            if a & b == 0 {
                out.set(a | b);
            }
        }
    }
    out.close_upwards();
    out
}

/// Disjoint occurrence decided configuration by configuration, searching all
/// splits of the open set. Exponential in the support; kept as an
/// independent reference for the witness construction.
pub fn disjoint_occurrence_by_search(
    volume: &FiniteVolume,
    kind: Kind,
    a1: &EventPredicate,
    a2: &EventPredicate,
) -> Result<EventPolynomial> {
    check_deps(volume, kind, a1)?;
    check_deps(volume, kind, a2)?;
    let deps = union_deps(&[a1, a2]);
    check_cap(deps.len())?;
    let sc = Scatter::new(&deps);
    let d = deps.len();
    let mut poly = EventPolynomial::zero(d);
    for i in 0..1usize << d {
        let w = sc.mask(i);
        if !(a1.holds(w) && a2.holds(w)) {
            continue;
        }
        let support = w.count_ones() as usize;
        if support > BK_SUPPORT_CAP {
            return Err(Error::SupportTooLarge {
                support,
                cap: BK_SUPPORT_CAP,
            });
        }
        // iterate S1 over subsets of w
        let mut s1 = w;
        loop {
            if a1.holds(s1) && a2.holds(w & !s1) {
                poly.counts[support] += 1;
                break;
            }
            if s1 == 0 {
                break;
            }
            s1 = (s1 - 1) & w;
        }
    }
    Ok(poly)
}

pub fn bk_check(
    volume: &FiniteVolume,
    kind: Kind,
    a1: &EventPredicate,
    a2: &EventPredicate,
    p_grid: &[f64],
) -> Result<CheckReport> {
    let deps = union_deps(&[a1, a2]);
    let t1 = increasing_table(volume, kind, a1, &deps)?;
    let t2 = increasing_table(volume, kind, a2, &deps)?;
    let worst = bk_worst(&t1, &t2, p_grid);
    Ok(CheckReport {
        check: format!("bk[{},{}]", a1.name(), a2.name()),
        graph: volume.name().to_string(),
        p_grid: p_grid.to_vec(),
        worst_case: worst,
        pass: worst >= -EXACT_TOL,
    })
}

/// Largest `|P(|C_x| = n) - p P(|C~_x| = n)|` over `n >= 1` and the grid
/// (site mode).
pub fn proportionality_check(volume: &FiniteVolume, x: usize, p_grid: &[f64]) -> Result<CheckReport> {
    let modified = exact_cluster_distribution(volume, Kind::Site, x)?;
    let plain = exact_unmodified_cluster_distribution(volume, Kind::Site, x)?;
    let mut worst: f64 = 0.0;
    for &p in p_grid {
        for n in 1..plain.len() {
            worst = worst.max((plain[n].prob(p) - p * modified[n].prob(p)).abs());
        }
        worst = worst.max((plain[0].prob(p) - (1.0 - p)).abs());
    }
    Ok(CheckReport {
        check: "site_proportionality".into(),
        graph: volume.name().to_string(),
        p_grid: p_grid.to_vec(),
        worst_case: worst,
        pass: worst <= EXACT_TOL,
    })
}

/// The standard grid `0.1, 0.2, ..., 0.9`.
pub fn default_p_grid() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::builtin;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(24, 12), 2_704_156);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
    }

    #[test]
    fn k2_connection() {
        let v = builtin::k2();
        let a = events::connected(&v, Kind::Bond, 0, 1).unwrap();
        let poly = enumerate_event(&v, Kind::Bond, &a).unwrap();
        assert_eq!(poly.counts, vec![0, 1]);
        assert!(close(poly.prob(0.3), 0.3));
    }

    #[test]
    fn triangle_full_cluster() {
        let v = builtin::triangle();
        let a = events::cluster_equals(&v, Kind::Bond, 0, 3).unwrap();
        let poly = enumerate_event(&v, Kind::Bond, &a).unwrap();
        for p in default_p_grid() {
            assert!(close(poly.prob(p), p.powi(3) + 3.0 * p * p * (1.0 - p)));
        }
    }

    #[test]
    fn empty_event() {
        let v = builtin::triangle();
        let poly = enumerate_event(&v, Kind::Bond, &events::impossible()).unwrap();
        assert!(poly.is_zero());
        assert_eq!(poly.prob(0.4), 0.0);
    }

    #[test]
    fn path_distributions() {
        let v = builtin::path3();
        let d = distribution_at(&exact_cluster_distribution(&v, Kind::Bond, 0).unwrap(), 0.5);
        assert_eq!((d.prob(1), d.prob(2), d.prob(3)), (0.5, 0.25, 0.25));
        let d = distribution_at(&exact_cluster_distribution(&v, Kind::Bond, 1).unwrap(), 0.5);
        assert_eq!((d.prob(1), d.prob(2), d.prob(3)), (0.25, 0.5, 0.25));
    }

    #[test]
    fn distributions_sum_to_one_coefficientwise() {
        for v in builtin::all() {
            for kind in [Kind::Bond, Kind::Site] {
                let polys = exact_cluster_distribution(&v, kind, v.roots()[0]).unwrap();
                let mut sum = EventPolynomial::zero(polys[0].total_sites);
                polys.iter().for_each(|q| sum.add(q));
                assert_eq!(sum, EventPolynomial::one(sum.total_sites), "{} {kind}", v.name());
                assert!(polys[0].is_zero());
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let v = builtin::grid(5, 5);
        match exact_cluster_distribution(&v, Kind::Bond, 0) {
            Err(Error::EnumerationCap { size, cap }) => assert_eq!((size, cap), (40, 24)),
            other => panic!("{other:?}"),
        }
    }

    fn naive_increasing(t: &EventTable) -> bool {
        let d = t.dims();
        (0..1usize << d).all(|i| !t.get(i) || (0..d).all(|j| t.get(i | 1 << j)))
    }

    #[test]
    fn word_operations_match_bitwise_references() {
        let g = builtin::grid(2, 3);
        for kind in [Kind::Bond, Kind::Site] {
            let all: Vec<usize> = (0..g.element_count(kind)).collect();
            for n in 1..=6 {
                let e = events::cluster_at_least(&g, kind, 0, n).unwrap();
                let t = EventTable::of(&e, &all).unwrap();
                assert!(t.is_increasing() && naive_increasing(&t));
                let mut sum = EventPolynomial::zero(all.len());
                for j in 0..all.len() {
                    sum.add(&t.pivotal_polynomial(j));
                }
                assert_eq!(t.pivotal_sum_polynomial(), sum);
            }
            // a decreasing event on fewer than 64 configurations
            let few = &all[..4];
            let dec = EventPredicate::new("none_open", few.to_vec(), {
                let m: u64 = few.iter().map(|&e| 1u64 << e).sum();
                move |mask| mask & m == 0
            });
            let t = EventTable::of(&dec, few).unwrap();
            assert!(!t.is_increasing() && !naive_increasing(&t));
        }
    }

    #[test]
    fn russo_examples() {
        let v = builtin::k2();
        let a = events::connected(&v, Kind::Bond, 0, 1).unwrap();
        let r = russo_check(&v, Kind::Bond, &a, &default_p_grid()).unwrap();
        assert_eq!(r.worst_case, 0.0);
        let v = builtin::triangle();
        let a = events::connected(&v, Kind::Bond, 0, 1).unwrap();
        assert!(russo_check(&v, Kind::Bond, &a, &default_p_grid()).unwrap().pass);
        let r = russo_check(&v, Kind::Bond, &events::certain(), &default_p_grid()).unwrap();
        assert_eq!(r.worst_case, 0.0);
    }

    #[test]
    fn russo_rejects_decreasing() {
        let v = builtin::k2();
        let closed = EventPredicate::new("closed(0)", vec![0], |m| m & 1 == 0);
        assert!(matches!(
            russo_check(&v, Kind::Bond, &closed, &[0.5]),
            Err(Error::NotIncreasing(_))
        ));
    }

    #[test]
    fn fkg_examples() {
        let v = builtin::cycle4();
        let a = events::connected(&v, Kind::Bond, 0, 2).unwrap();
        let r = fkg_check(&v, Kind::Bond, &a, &a, &[0.5]).unwrap();
        let pa = enumerate_event(&v, Kind::Bond, &a).unwrap().prob(0.5);
        assert!(close(r.worst_case, pa * (1.0 - pa)));
        let r = fkg_check(&v, Kind::Bond, &events::open(0), &events::open(2), &default_p_grid()).unwrap();
        assert!(r.worst_case.abs() < 1e-15);
        let b = events::connected(&v, Kind::Bond, 1, 3).unwrap();
        let r = fkg_check(&v, Kind::Bond, &a, &b, &[0.5]).unwrap();
        assert!(r.worst_case > 0.0);
    }

    #[test]
    fn bk_cycle_example() {
        let v = builtin::cycle4();
        let a = events::connected(&v, Kind::Bond, 0, 2).unwrap();
        let d = disjoint_occurrence(&v, Kind::Bond, &a, &a).unwrap();
        assert!(close(d.prob(0.5), 0.0625));
        let r = bk_check(&v, Kind::Bond, &a, &a, &[0.5]).unwrap();
        assert!(close(r.worst_case, (2.0 * 0.25 - 0.0625f64).powi(2) - 0.0625));
        // A o certain = A, so the slack vanishes
        let r = bk_check(&v, Kind::Bond, &a, &events::certain(), &[0.3, 0.5]).unwrap();
        assert!(r.worst_case.abs() < 1e-15);
        let r = bk_check(&v, Kind::Bond, &events::open(0), &events::open(1), &default_p_grid()).unwrap();
        assert!(r.worst_case.abs() < 1e-15);
    }

    #[test]
    fn witness_and_search_agree() {
        for v in [builtin::cycle4(), builtin::grid(2, 3), builtin::triangle()] {
            for kind in [Kind::Bond, Kind::Site] {
                let n = v.vertex_count();
                let a = events::connected(&v, kind, 0, n - 1).unwrap();
                let b = events::cluster_at_least(&v, kind, 1, 3).unwrap();
                let w = disjoint_occurrence(&v, kind, &a, &b).unwrap();
                let s = disjoint_occurrence_by_search(&v, kind, &a, &b).unwrap();
                assert_eq!(w, s, "{} {kind}", v.name());
            }
        }
    }

    #[test]
    fn proportionality_on_builtins() {
        for v in builtin::all() {
            let r = proportionality_check(&v, v.roots()[0], &default_p_grid()).unwrap();
            assert!(r.pass, "{} {}", v.name(), r.worst_case);
        }
    }

    #[test]
    fn undeclared_dependency_is_caught() {
        let bad = EventPredicate::new("sneaky", vec![0], |m| m & 0b11 == 0b11);
        assert!(matches!(
            bad.verify_dependencies(4, 200, 1),
            Err(Error::UndeclaredDependency { element: 1, .. })
        ));
        assert!(events::open(2).verify_dependencies(4, 200, 1).is_ok());
    }

    #[test]
    fn embedding_preserves_probability() {
        let v = builtin::triangle();
        let a = events::connected(&v, Kind::Bond, 0, 1).unwrap();
        let poly = enumerate_event(&v, Kind::Bond, &a).unwrap();
        let big = poly.embed(3);
        for p in default_p_grid() {
            assert!(close(poly.prob(p), big.prob(p)));
        }
    }

    #[test]
    fn csv_layout() {
        let poly = EventPolynomial { total_sites: 1, counts: vec![0, 1] };
        assert_eq!(poly.to_csv().unwrap(), "k,count\n0,0\n1,1\n");
    }
}
