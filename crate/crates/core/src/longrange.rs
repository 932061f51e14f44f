//! Partially oriented long-range percolation.
//!
//! Every pair `{x, y}` carries an unoriented link `[x, y]` and two oriented
//! links `[x, y>` and `[y, x>`. A link with coupling `J` is open with
//! probability `1 - e^{-beta J}`. Couplings depend only on the orbit labels of
//! the endpoints and on their graph distance, which makes them invariant
//! under automorphisms by construction.
//!
//! Each link gets an exponential clock `-ln(1 - U) / J` from its uniform and
//! is open at `beta` iff the clock is below `beta`. One clock per link serves
//! every `beta` at once.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffineq::{DiffIneqReport, Ingredients, Variant};
use crate::error::{invalid, Error, Result};
use crate::graph::GraphPatch;
use crate::order_parameter::{check_h, escape, ModificationReport};
use crate::percolation::{ClusterSizeDistribution, ClusterTable, CHUNK};
use crate::rng::{CounterRng, SeedSpec, Stream};
use crate::stats::{Estimate, Moments};
use crate::volume::{finite_volume, FiniteVolume};

const FAR: u16 = u16::MAX;

/// Pairs whose tail mass `J_r` drops below this fraction of `J_0` are not
/// enumerated; their influence is reported as an additive bound.
pub const TRUNCATION_FRACTION: f64 = 1e-12;

/// Largest certified error tolerated for the large-volume stand-in of the
/// infinite graph.
pub const MAX_SURROGATE_BOUND: f64 = 0.05;

/// Coupling as a function of distance `d >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Zero,
    /// `amplitude * e^{-rate d}`.
    Exponential {
        #[serde(default = "one")]
        amplitude: f64,
        rate: f64,
    },
    /// `amplitude * d^{-exponent}`.
    Power {
        #[serde(default = "one")]
        amplitude: f64,
        exponent: f64,
    },
    /// `weights[d - 1]` for `d <= weights.len()`, zero beyond.
    FiniteRange { weights: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Kernel {
    pub fn at(&self, d: u64) -> f64 {
        if d == 0 {
            return 0.0;
        }
        match self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { amplitude, rate } => amplitude * (-rate * d as f64).exp(),
            Kernel::Power { amplitude, exponent } => amplitude * (d as f64).powf(-exponent),
            Kernel::FiniteRange { weights } => weights.get(d as usize - 1).copied().unwrap_or(0.0),
        }
    }

    /// Natural log of the coupling at `d` (`-inf` where it vanishes).
    fn ln_at(&self, d: f64) -> f64 {
        match self {
            Kernel::Zero => f64::NEG_INFINITY,
            Kernel::Exponential { amplitude, rate } => amplitude.ln() - rate * d,
            Kernel::Power { amplitude, exponent } => amplitude.ln() - exponent * d.ln(),
            Kernel::FiniteRange { .. } => self.at(d as u64).ln(),
        }
    }

    /// Largest distance with a nonzero coupling, if finite.
    pub fn range(&self) -> Option<u64> {
        match self {
            Kernel::Zero => Some(0),
            Kernel::FiniteRange { weights } => Some(weights.iter().rposition(|&w| w > 0.0).map_or(0, |i| i as u64 + 1)),
            Kernel::Exponential { amplitude, .. } | Kernel::Power { amplitude, .. } => {
                if *amplitude == 0.0 {
                    Some(0)
                } else {
                    None
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match self {
            Kernel::Zero => true,
            Kernel::Exponential { amplitude, rate } => *amplitude >= 0.0 && amplitude.is_finite() && *rate > 0.0 && rate.is_finite(),
            Kernel::Power { amplitude, exponent } => *amplitude >= 0.0 && amplitude.is_finite() && *exponent > 0.0 && exponent.is_finite(),
            Kernel::FiniteRange { weights } => weights.iter().all(|w| *w >= 0.0 && w.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("kernel", format!("parameters must be finite and nonnegative (rates positive): {self:?}")))
        }
    }
}

/// The two coupling families plus an optional orbit-pair scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct KernelPair {
    pub unoriented: Kernel,
    #[serde(default)]
    pub oriented: Kernel,
    /// `orbit_scale[a][b]` multiplies both couplings between orbits `a` and
    /// `b`; must be symmetric. All ones when absent.
    #[serde(default)]
    pub orbit_scale: Option<Vec<Vec<f64>>>,
}

impl KernelPair {
    /// Unoriented `e^{-rate d}` plus oriented `oriented_weight * e^{-rate d}`.
    pub fn exponential(rate: f64, oriented_weight: f64) -> Self {
        Self {
            unoriented: Kernel::Exponential { amplitude: 1.0, rate },
            oriented: Kernel::Exponential {
                amplitude: oriented_weight,
                rate,
            },
            orbit_scale: None,
        }
    }

    /// Unoriented couplings `weights[d - 1]`, no oriented links.
    pub fn finite_range(weights: Vec<f64>) -> Self {
        Self {
            unoriented: Kernel::FiniteRange { weights },
            oriented: Kernel::Zero,
            orbit_scale: None,
        }
    }

    pub fn power(exponent: f64) -> Self {
        Self {
            unoriented: Kernel::Power { amplitude: 1.0, exponent },
            oriented: Kernel::Zero,
            orbit_scale: None,
        }
    }

    fn scale(&self, a: u32, b: u32) -> f64 {
        self.orbit_scale
            .as_ref()
            .map_or(1.0, |s| s[a as usize][b as usize])
    }

    /// `(J_[x,y], J_[x,y>)` for orbits `a`, `b` at distance `d`.
    pub fn coupling(&self, a: u32, b: u32, d: u64) -> (f64, f64) {
        let s = self.scale(a, b);
        (s * self.unoriented.at(d), s * self.oriented.at(d))
    }

    fn max_scale(&self) -> f64 {
        self.orbit_scale
            .as_ref()
            .map_or(1.0, |s| s.iter().flatten().copied().fold(0.0, f64::max))
    }

    fn range(&self) -> Option<u64> {
        Some(self.unoriented.range()?.max(self.oriented.range()?))
    }

    fn check(&self, orbit_count: usize) -> Result<()> {
        self.unoriented.check()?;
        self.oriented.check()?;
        if let Some(s) = &self.orbit_scale {
            if s.len() != orbit_count || s.iter().any(|r| r.len() != orbit_count) {
                return Err(invalid("orbit_scale", format!("must be {orbit_count} x {orbit_count}")));
            }
            for a in 0..orbit_count {
                for b in 0..orbit_count {
                    if !(s[a][b] >= 0.0 && s[a][b].is_finite()) || s[a][b] != s[b][a] {
                        return Err(invalid("orbit_scale", "entries must be finite, nonnegative and symmetric"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sphere sizes around the fundamental domain: measured inside the patch,
/// extrapolated beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereGrowth {
    /// `measured[d]` = largest `|S(x, d)|` over the fundamental domain.
    pub measured: Vec<f64>,
    pub model: GrowthModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GrowthModel {
    /// `|S(d)| <= |S(R)| * ratio^{d - R}`.
    Geometric { ratio: f64 },
    /// `|S(d)| <= |S(R)| * (d / R)^{exponent}`.
    Polynomial { exponent: f64 },
}

impl SphereGrowth {
    pub fn measure(patch: &GraphPatch) -> Result<Self> {
        let r = patch.exact_radius;
        if r < 2 {
            return Err(invalid("patch", "need exact_radius >= 2 to measure sphere growth"));
        }
        let mut measured = vec![0.0f64; r + 1];
        for &x in &patch.fundamental_domain {
            let dist = patch.graph.bfs_distances(x);
            let mut counts = vec![0.0f64; r + 1];
            for &d in &dist {
                if (d as usize) <= r {
                    counts[d as usize] += 1.0;
                }
            }
            for d in 0..=r {
                measured[d] = measured[d].max(counts[d]);
            }
        }
        let ratio = (1.max(r.saturating_sub(2))..=r)
            .map(|d| measured[d] / measured[d - 1].max(1.0))
            .fold(0.0, f64::max);
        let model = if ratio >= 1.5 {
            GrowthModel::Geometric { ratio }
        } else {
            let half = r.div_ceil(2);
            let g = (measured[r] / measured[half]).ln() / (r as f64 / half as f64).ln();
            GrowthModel::Polynomial {
                exponent: g.max(0.0) + 0.25,
            }
        };
        Ok(Self { measured, model })
    }

    fn radius(&self) -> usize {
        self.measured.len() - 1
    }

    /// `ln |S(d)|` (measured or extrapolated).
    pub fn ln_size(&self, d: u64) -> f64 {
        let r = self.radius();
        if (d as usize) <= r {
            return self.measured[d as usize].ln();
        }
        let base = self.measured[r].ln();
        match self.model {
            GrowthModel::Geometric { ratio } => base + (d - r as u64) as f64 * ratio.ln(),
            GrowthModel::Polynomial { exponent } => base + exponent * (d as f64 / r as f64).ln(),
        }
    }
}

/// Doubling cap for tail sums; past it only the remainder estimate is used.
const SERIES_HORIZON: u64 = 1 << 16;

/// `sum_{d >= start} e^{ln_term(d)}`, summed in doubling blocks. Once the
/// terms decay like `d^{-a}` with `a > 1` the rest is bounded by
/// `t(hi) (1 + hi / (a - 1))`. Errors when they decay no faster than `1/d`.
fn tail_series(ln_term: impl Fn(u64) -> f64, start: u64) -> Result<f64> {
    let start = start.max(1);
    let mut total = 0.0;
    let mut lo = start;
    let mut hi = start + 64;
    loop {
        total += (lo..hi).map(|d| ln_term(d).exp()).sum::<f64>();
        let (t1, t2) = (ln_term(hi), ln_term(2 * hi));
        if t1 == f64::NEG_INFINITY {
            return Ok(total);
        }
        // local power-law exponent between hi and 2 hi
        let a = (t1 - t2) / 2f64.ln();
        if a > 1.0 {
            let rem = if a > 700.0 {
                0.0
            } else {
                t1.exp() * (1.0 + hi as f64 / (a - 1.0))
            };
            if rem <= 1e-13 * total || hi >= SERIES_HORIZON {
                return Ok(total + rem);
            }
        }
        if hi >= SERIES_HORIZON || !total.is_finite() {
            return Err(invalid("kernel", "coupling sum diverges on this graph: J_0 would be infinite"));
        }
        lo = hi;
        hi *= 2;
    }
}

/// Couplings together with their tail masses on one patch.
#[derive(Debug, Clone)]
pub struct LongRangeSpec {
    pub kernels: KernelPair,
    pub patch: Arc<GraphPatch>,
    pub growth: SphereGrowth,
    /// `J_0 = max_x sum_y (J_[x,y] + J_[x,y>)`.
    pub j0: f64,
    /// `j_tail[r] = J_r`; past the end `J_r` is bounded by the last entry.
    pub j_tail: Vec<f64>,
    /// Pairs at distance `>= truncation_radius` are not enumerated.
    pub truncation_radius: u64,
}

/// Builds a spec, computing `J_0` and the tail table `J_r`.
pub fn build_longrange_spec(patch: &Arc<GraphPatch>, kernels: KernelPair) -> Result<LongRangeSpec> {
    kernels.check(patch.orbit_count)?;
    let growth = SphereGrowth::measure(patch)?;
    let scale = kernels.max_scale();
    let ln_total = |d: u64| {
        let k = kernels.unoriented.at(d) + kernels.oriented.at(d);
        if k > 0.0 {
            return k.ln();
        }
        // exp underflow far out: combine the logs directly
        let a = kernels.unoriented.ln_at(d as f64);
        let b = kernels.oriented.ln_at(d as f64);
        let m = a.max(b);
        if m == f64::NEG_INFINITY {
            m
        } else {
            m + ((a - m).exp() + (b - m).exp()).ln()
        }
    };
    let ln_term = |d: u64| scale.ln() + growth.ln_size(d) + ln_total(d);
    let range = kernels.range();
    let tail = |r: u64| -> Result<f64> {
        match range {
            Some(rmax) => Ok((r.max(1)..=rmax).map(|d| ln_term(d).exp()).sum()),
            None => tail_series(ln_term, r),
        }
    };
    let j0 = tail(1)?;
    let mut end = match range {
        Some(rmax) => rmax + 1,
        None => 256,
    };
    let mut j_end = tail(end)?;
    while j_end > TRUNCATION_FRACTION * j0 && end < SERIES_HORIZON {
        end *= 2;
        j_end = tail(end)?;
    }
    // fill backwards so every entry is a sum of nonnegative terms
    let mut j_tail = vec![0.0; end as usize + 1];
    j_tail[end as usize] = j_end;
    for r in (1..end).rev() {
        j_tail[r as usize] = j_tail[r as usize + 1] + ln_term(r).exp();
    }
    j_tail[0] = j_tail[1];
    let j0 = j_tail[1].max(j0);
    let cut = j_tail
        .iter()
        .position(|&j| j <= TRUNCATION_FRACTION * j0)
        .unwrap_or(end as usize) as u64;
    Ok(LongRangeSpec {
        kernels,
        patch: Arc::clone(patch),
        growth,
        j0,
        truncation_radius: cut.max(1),
        j_tail,
    })
}

impl LongRangeSpec {
    /// `J_r` for real `r`: tail mass over distances `>= r`.
    pub fn j_r(&self, r: f64) -> f64 {
        let i = r.ceil().max(0.0) as usize;
        *self.j_tail.get(i).unwrap_or_else(|| self.j_tail.last().expect("nonempty"))
    }

    /// Bound on the probability that any omitted pair touching a cluster of
    /// at most `vertices` vertices is open.
    pub fn omitted_bound(&self, beta: f64, vertices: usize) -> f64 {
        if self.kernels.range().is_some_and(|r| r < self.truncation_radius)
            || self.truncation_radius as usize > 2 * self.patch.exact_radius
        {
            return 0.0;
        }
        beta * self.j_r(self.truncation_radius as f64) * vertices as f64
    }

    pub fn truncation(&self, l: usize) -> TruncationBound {
        TruncationBound::new(self, l)
    }

    /// Upper bound on `P(|C_x| >= k) - P(|C_x^{Lambda_L}| >= k)`: a union bound
    /// over open walks of at most `k - 1` links whose lengths add up past
    /// `L`, with a Chernoff bound on the summed lengths.
    pub fn escape_bound(&self, beta: f64, big_l: usize, k: usize) -> f64 {
        if k <= 1 {
            return 0.0;
        }
        let scale = self.kernels.max_scale();
        let ln_w = |d: u64, t: f64| {
            let k = self.kernels.unoriented.at(d) + self.kernels.oriented.at(d);
            if k > 0.0 {
                scale.ln() + self.growth.ln_size(d) + k.ln() + t * d as f64
            } else {
                f64::NEG_INFINITY
            }
        };
        let mut best = vec![f64::INFINITY; k];
        for ti in 1..=40 {
            let t = 0.05 * ti as f64;
            let w = match self.kernels.range() {
                Some(r) => Ok((1..=r).map(|d| ln_w(d, t).exp()).sum()),
                None => tail_series(|d| ln_w(d, t), 1),
            };
            let Ok(w) = w else { continue };
            for (j, b) in best.iter_mut().enumerate().skip(1) {
                let v = (-t * (big_l as f64 + 1.0) + j as f64 * (beta * w).ln()).exp();
                *b = b.min(v);
            }
        }
        best.iter().skip(1).map(|b| b.min(1.0)).sum::<f64>().min(1.0)
    }
}

/// `ln sum_{k=1}^{n} a^{k-1}` without overflow.
fn ln_geometric(ln_a: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    if ln_a == 0.0 {
        return (n as f64).ln();
    }
    let n = n as f64;
    if ln_a > 0.0 {
        // a^{n-1} (1 - a^{-n}) / (1 - a^{-1})
        (n - 1.0) * ln_a + (-(-n * ln_a).exp_m1()).ln() - (-(-ln_a).exp_m1()).ln()
    } else {
        (-(n * ln_a).exp_m1()).ln() - (-ln_a.exp_m1()).ln()
    }
}

/// Truncation schedule `n_l`, `g_l` and `f_l` for one volume radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationBound {
    pub l: usize,
    pub n_l: usize,
    pub j0: f64,
    /// `J_{l / n_l}`.
    pub j_at_scale: f64,
    /// `(r, J_r)` for `r = 0..=l`.
    pub j_r: Vec<(usize, f64)>,
    /// `(n, J_{L_n / n})` for the later steps of the schedule.
    pub later: Vec<(usize, f64)>,
}

const MAX_SCHEDULE_STEPS: usize = 256;

/// `L_n` for `n = 1, 2, ...` up to the first value above `l_max`: `L_1 = 1`
/// and `L_n` is the smallest radius above `L_{n-1}` with
/// `J_{L_n / n} K_n <= 1 / n^2`, `K_n = n sum_{k=1}^n (n J_0)^{k-1}`.
pub fn schedule(spec: &LongRangeSpec, l_max: usize) -> Vec<usize> {
    let mut ls = vec![1usize];
    for n in 2usize.. {
        let nf = n as f64;
        let ln_k = nf.ln() + ln_geometric((nf * spec.j0).ln(), n);
        let target = -2.0 * nf.ln() - ln_k;
        // smallest integer r* with ln J_{r*} <= target
        let r_star = (1..spec.j_tail.len())
            .find(|&r| spec.j_tail[r] <= 0.0 || spec.j_tail[r].ln() <= target)
            .or_else(|| (spec.j_r(spec.truncation_radius as f64).ln() <= target).then_some(spec.truncation_radius as usize));
        let Some(r_star) = r_star else { break };
        let l_n = (n * (r_star - 1) + 1).max(ls[n - 2] + 1);
        ls.push(l_n);
        if l_n > l_max || n >= MAX_SCHEDULE_STEPS {
            break;
        }
    }
    ls
}

impl TruncationBound {
    pub fn new(spec: &LongRangeSpec, l: usize) -> Self {
        let ls = schedule(spec, usize::MAX);
        let n_l = ls.iter().filter(|&&x| x <= l).count().max(1);
        let later = ls
            .iter()
            .enumerate()
            .skip(n_l)
            .map(|(i, &big_l)| (i + 1, spec.j_r(big_l as f64 / (i + 1) as f64)))
            .collect();
        Self {
            l,
            n_l,
            j0: spec.j0,
            j_at_scale: spec.j_r(l as f64 / n_l as f64),
            j_r: (0..=l).map(|r| (r, spec.j_r(r as f64))).collect(),
            later,
        }
    }

    fn j_of(&self, r: f64) -> f64 {
        let i = (r.ceil().max(0.0) as usize).min(self.j_r.len() - 1);
        self.j_r[i].1
    }

    /// `beta J_{l / k} sum_{j=1}^{k} (beta J_0)^{j-1}`, the bound for one `k`.
    pub fn per_k(&self, beta: f64, k: usize) -> f64 {
        let j = self.j_of(self.l as f64 / k as f64);
        if j == 0.0 {
            return 0.0;
        }
        (beta.ln() + j.ln() + ln_geometric((beta * self.j0).ln(), k)).exp()
    }

    /// `g_l(beta) = beta J_{l / n_l} sum_{k=1}^{n_l} (beta J_0)^{k-1}`.
    pub fn g(&self, beta: f64) -> f64 {
        if self.j_at_scale == 0.0 {
            return 0.0;
        }
        (beta.ln() + self.j_at_scale.ln() + ln_geometric((beta * self.j0).ln(), self.n_l)).exp()
    }

    /// `sup_{l' >= l} g_{l'}(beta)`, nonincreasing in `l`. `g` itself jumps
    /// up wherever `n_l` increments; between jumps it decreases, so the
    /// supremum is attained at `l` or at a later `L_n`.
    pub fn g_envelope(&self, beta: f64) -> f64 {
        self.later.iter().fold(self.g(beta), |m, &(n, j)| {
            if j == 0.0 {
                return m;
            }
            m.max((beta.ln() + j.ln() + ln_geometric((beta * self.j0).ln(), n)).exp())
        })
    }

    /// `f_l(beta, h) = g_l(beta) + e^{-n_l h}`.
    pub fn f(&self, beta: f64, h: f64) -> f64 {
        self.g(beta) + (-(self.n_l as f64) * h).exp()
    }
}

/// A finite volume with its enumerated pairs.
#[derive(Debug, Clone)]
pub struct LongRangeVolume {
    pub spec: Arc<LongRangeSpec>,
    pub volume: FiniteVolume,
    start: Vec<usize>,
    partner: Vec<u32>,
    class: Vec<u32>,
    /// `(J_[u,y], J_[u,y>)` per coupling class.
    couplings: Vec<(f64, f64)>,
    patch_vertices: u64,
}

impl LongRangeVolume {
    /// `Λ_l` of the spec's patch with every pair closer than the truncation
    /// radius.
    pub fn new(spec: &Arc<LongRangeSpec>, l: usize) -> Result<Self> {
        let volume = finite_volume(&spec.patch, l)?;
        Self::from_volume(spec, volume)
    }

    pub fn from_volume(spec: &Arc<LongRangeSpec>, volume: FiniteVolume) -> Result<Self> {
        let patch = &spec.patch;
        let n = volume.vertex_count();
        let cutoff = spec.truncation_radius.min(spec.kernels.range().map_or(u64::MAX, |r| r + 1));
        let orbits = patch.orbit_count as u64;
        let dmax = cutoff.min(2 * volume.l() as u64 + 2);
        let class_of = |a: u32, b: u32, d: u64| ((a as u64 * orbits + b as u64) * (dmax + 1) + d) as u32;
        let mut couplings = vec![(0.0, 0.0); (orbits * orbits * (dmax + 1)) as usize];
        for a in 0..orbits as u32 {
            for b in 0..orbits as u32 {
                for d in 1..=dmax {
                    couplings[class_of(a, b, d) as usize] = spec.kernels.coupling(a, b, d);
                }
            }
        }
        let rows: Vec<(Vec<u32>, Vec<u32>)> = (0..n)
            .into_par_iter()
            .map(|u| {
                let dist = patch.graph.bfs_distances(volume.parent_vertex(u));
                let ou = patch.orbit_label[volume.parent_vertex(u)];
                let mut ys = Vec::new();
                let mut cs = Vec::new();
                for y in 0..n {
                    let d = dist[volume.parent_vertex(y)] as u64;
                    if y == u || d == 0 || d >= cutoff {
                        continue;
                    }
                    let c = class_of(ou, patch.orbit_label[volume.parent_vertex(y)], d.min(dmax));
                    let (a, b) = couplings[c as usize];
                    if a > 0.0 || b > 0.0 {
                        ys.push(y as u32);
                        cs.push(c);
                    }
                }
                (ys, cs)
            })
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut partner = Vec::new();
        let mut class = Vec::new();
        start.push(0);
        for (ys, cs) in rows {
            partner.extend(ys);
            class.extend(cs);
            start.push(partner.len());
        }
        Ok(Self {
            spec: Arc::clone(spec),
            volume,
            start,
            partner,
            class,
            couplings,
            patch_vertices: patch.graph.vertex_count() as u64,
        })
    }

    pub fn l(&self) -> usize {
        self.volume.l()
    }

    pub fn vertex_count(&self) -> usize {
        self.volume.vertex_count()
    }

    pub fn pair_count(&self) -> usize {
        self.partner.len()
    }

    /// `(partner, J_[u,y], J_[u,y>)` for every enumerated partner of `u`.
    pub fn partners(&self, u: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (self.start[u]..self.start[u + 1]).map(move |i| {
            let (a, b) = self.couplings[self.class[i] as usize];
            (self.partner[i] as usize, a, b)
        })
    }

    #[inline]
    fn unoriented_key(&self, u: usize, y: usize) -> u64 {
        let (a, b) = (self.volume.parent_vertex(u) as u64, self.volume.parent_vertex(y) as u64);
        a.min(b) * self.patch_vertices + a.max(b)
    }

    #[inline]
    fn oriented_key(&self, u: usize, y: usize) -> u64 {
        self.volume.parent_vertex(u) as u64 * self.patch_vertices + self.volume.parent_vertex(y) as u64
    }
}

#[inline]
fn clock(rng: &CounterRng, key: u64, j: f64) -> f64 {
    if j <= 0.0 {
        return f64::INFINITY;
    }
    -(-rng.uniform(key)).ln_1p() / j
}

fn rngs(master_seed: u64, replica: u64) -> (CounterRng, CounterRng) {
    (
        SeedSpec::new(master_seed, replica, Stream::LongRangeUnoriented).counter_rng(),
        SeedSpec::new(master_seed, replica, Stream::LongRangeOriented).counter_rng(),
    )
}

/// Open links of one replica, stored sparsely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedConfiguration {
    vertex_count: usize,
    /// Open unoriented links `(u, y)` with `u < y`.
    pub unoriented: Vec<(usize, usize)>,
    /// Open oriented links `(u, y)`, usable from `u` to `y` only.
    pub oriented: Vec<(usize, usize)>,
    out_start: Vec<usize>,
    out: Vec<usize>,
}

impl DirectedConfiguration {
    /// Builds a configuration from explicit link lists.
    pub fn from_links(vertex_count: usize, unoriented: Vec<(usize, usize)>, oriented: Vec<(usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); vertex_count];
        for &(u, y) in &unoriented {
            if u >= vertex_count || y >= vertex_count {
                return Err(Error::VertexOutOfRange {
                    vertex: u.max(y),
                    vertex_count,
                });
            }
            adj[u].push(y);
            adj[y].push(u);
        }
        for &(u, y) in &oriented {
            if u >= vertex_count || y >= vertex_count {
                return Err(Error::VertexOutOfRange {
                    vertex: u.max(y),
                    vertex_count,
                });
            }
            adj[u].push(y);
        }
        let mut out_start = vec![0];
        let mut out = Vec::new();
        for mut a in adj {
            a.sort_unstable();
            a.dedup();
            out.extend(a);
            out_start.push(out.len());
        }
        Ok(Self {
            vertex_count,
            unoriented,
            oriented,
            out_start,
            out,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn open_link_count(&self) -> usize {
        self.unoriented.len() + self.oriented.len()
    }

    /// Vertices reachable from `u` in one open step.
    pub fn successors(&self, u: usize) -> &[usize] {
        &self.out[self.out_start[u]..self.out_start[u + 1]]
    }
}

/// Samples every enumerated link of `volume` at `beta`.
pub fn sample_longrange(volume: &LongRangeVolume, beta: f64, seed: SeedSpec) -> Result<DirectedConfiguration> {
    check_beta(beta)?;
    let (ru, ro) = rngs(seed.master_seed, seed.replica_index);
    let mut unoriented = Vec::new();
    let mut oriented = Vec::new();
    for u in 0..volume.vertex_count() {
        for (y, ju, jo) in volume.partners(u) {
            if u < y && clock(&ru, volume.unoriented_key(u, y), ju) < beta {
                unoriented.push((u, y));
            }
            if clock(&ro, volume.oriented_key(u, y), jo) < beta {
                oriented.push((u, y));
            }
        }
    }
    DirectedConfiguration::from_links(volume.vertex_count(), unoriented, oriented)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", format!("must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// Everything reachable from `x` along open links (oriented ones forward
/// only), sorted.
pub fn oriented_cluster_of(config: &DirectedConfiguration, x: usize) -> Result<Vec<usize>> {
    if x >= config.vertex_count {
        return Err(Error::VertexOutOfRange {
            vertex: x,
            vertex_count: config.vertex_count,
        });
    }
    let mut seen = vec![false; config.vertex_count];
    let mut stack = vec![x];
    seen[x] = true;
    let mut out = Vec::new();
    while let Some(u) = stack.pop() {
        out.push(u);
        for &y in config.successors(u) {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Lazy multi-`beta` exploration of the forward cluster of one root.
#[derive(Debug, Clone)]
pub struct LongRangeExplorer<'a> {
    volume: &'a LongRangeVolume,
    root: usize,
    betas: Vec<f64>,
    level: Vec<u16>,
    touched: Vec<u32>,
    buckets: Vec<Vec<u32>>,
}

impl<'a> LongRangeExplorer<'a> {
    pub fn new(volume: &'a LongRangeVolume, root: usize, betas: &[f64]) -> Result<Self> {
        volume.volume.check_vertex(root)?;
        if betas.is_empty() || betas.iter().any(|&b| !(b > 0.0 && b.is_finite())) || betas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("betas", "need a strictly increasing list of positive values"));
        }
        Ok(Self {
            volume,
            root,
            betas: betas.to_vec(),
            level: vec![FAR; volume.vertex_count()],
            touched: Vec::new(),
            buckets: vec![Vec::new(); betas.len()],
        })
    }

    /// Forward cluster sizes at every `beta` for one replica.
    pub fn explore(&mut self, master_seed: u64, replica: u64) -> Vec<u32> {
        let (ru, ro) = rngs(master_seed, replica);
        let k = self.betas.len();
        for &v in &self.touched {
            self.level[v as usize] = FAR;
        }
        self.touched.clear();
        let mut count = vec![0u32; k];
        self.level[self.root] = 0;
        self.touched.push(self.root as u32);
        self.buckets[0].push(self.root as u32);
        let v = self.volume;
        for i in 0..k {
            while let Some(u) = self.buckets[i].pop() {
                let u = u as usize;
                if self.level[u] as usize != i {
                    continue;
                }
                count[i] += 1;
                for (y, ju, jo) in v.partners(u) {
                    if (self.level[y] as usize) <= i {
                        continue;
                    }
                    let t = clock(&ru, v.unoriented_key(u, y), ju).min(clock(&ro, v.oriented_key(u, y), jo));
                    let need = self.betas.partition_point(|&b| b <= t) as u16;
                    let c = (i as u16).max(need);
                    if (c as usize) < k && c < self.level[y] {
                        if self.level[y] == FAR {
                            self.touched.push(y as u32);
                        }
                        self.level[y] = c;
                        self.buckets[c as usize].push(y as u32);
                    }
                }
            }
        }
        for i in 1..k {
            count[i] += count[i - 1];
        }
        count
    }
}

/// Forward cluster sizes of one root for every replica and every `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRangeTable {
    pub root: usize,
    pub betas: Vec<f64>,
    pub replicas: usize,
    sizes: Vec<u32>,
}

impl LongRangeTable {
    pub fn build(volume: &LongRangeVolume, root: usize, betas: &[f64], replicas: usize, master_seed: u64) -> Result<Self> {
        LongRangeExplorer::new(volume, root, betas)?;
        if replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        let k = betas.len();
        let mut sizes = vec![0u32; replicas * k];
        sizes.par_chunks_mut(CHUNK * k).enumerate().for_each(|(c, s)| {
            let mut ex = LongRangeExplorer::new(volume, root, betas).expect("checked");
            for j in 0..s.len() / k {
                let out = ex.explore(master_seed, (c * CHUNK + j) as u64);
                s[j * k..(j + 1) * k].copy_from_slice(&out);
            }
        });
        Ok(Self {
            root,
            betas: betas.to_vec(),
            replicas,
            sizes,
        })
    }

    #[inline]
    pub fn size(&self, replica: usize, i: usize) -> u32 {
        self.sizes[replica * self.betas.len() + i]
    }

    pub fn distribution(&self, i: usize) -> ClusterSizeDistribution {
        ClusterSizeDistribution::from_sizes((0..self.replicas).map(|r| self.size(r, i) as usize))
    }
}

/// Which bound the tail comparison uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// `g_l(beta)`, valid for `k <= n_l`.
    Schedule,
    /// `beta J_{l/k} sum_{j<=k} (beta J_0)^{j-1}`, valid for every `k`.
    PerK,
}

/// Slack of `P(|C_x| >= k) <= P(|C_x^{Λ_l}| >= k) + bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailBoundReport {
    pub l: usize,
    /// Radius of the large volume standing in for the infinite graph.
    pub surrogate_l: usize,
    pub k: usize,
    pub n_l: usize,
    pub beta: f64,
    pub form: BoundForm,
    /// `P(|C_x^{Λ_L}| >= k)` plus the certified surrogate and truncation errors.
    pub lhs: f64,
    pub rhs: f64,
    pub bound: f64,
    pub surrogate_error: f64,
    pub slack: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl TailBoundReport {
    pub const CSV_HEADER: [&'static str; 10] = ["check", "l", "k", "beta", "lhs", "rhs", "bound", "slack", "stderr", "pass"];

    pub fn csv_record(&self) -> [String; 10] {
        [
            match self.form {
                BoundForm::Schedule => "tail_schedule".into(),
                BoundForm::PerK => "tail_per_k".into(),
            },
            self.l.to_string(),
            self.k.to_string(),
            format!("{}", self.beta),
            format!("{:.10e}", self.lhs),
            format!("{:.10e}", self.rhs),
            format!("{:.6e}", self.bound),
            format!("{:.10e}", self.slack),
            format!("{:.4e}", self.stderr),
            self.pass.to_string(),
        ]
    }
}

/// Monte Carlo check of the tail comparison between `Λ_l` and the largest
/// volume of the patch, both driven by the same links.
#[allow(clippy::too_many_arguments)]
pub fn check_long_model_bound(
    small: &LongRangeVolume,
    large: &LongRangeVolume,
    beta: f64,
    ks: &[usize],
    form: BoundForm,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<TailBoundReport>> {
    check_beta(beta)?;
    if !Arc::ptr_eq(&small.spec, &large.spec) {
        return Err(invalid("volumes", "both volumes must come from the same spec"));
    }
    if large.l() <= small.l() {
        return Err(invalid("surrogate", "the large volume must be strictly larger than Λ_l"));
    }
    let spec = &small.spec;
    let bound = spec.truncation(small.l());
    for &k in ks {
        if k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if form == BoundForm::Schedule && k > bound.n_l {
            return Err(invalid("k", format!("k = {k} exceeds n_l = {}", bound.n_l)));
        }
    }
    let ts = LongRangeTable::build(small, small.volume.roots()[0], &[beta], replicas, master_seed)?;
    let tl = LongRangeTable::build(large, large.volume.roots()[0], &[beta], replicas, master_seed)?;
    ks.iter()
        .map(|&k| {
            let surrogate_error = spec.escape_bound(beta, large.l(), k) + spec.omitted_bound(beta, k);
            if surrogate_error > MAX_SURROGATE_BOUND {
                return Err(invalid(
                    "surrogate",
                    format!(
                        "patch too small: Λ_{} certifies the infinite graph only to {surrogate_error:.3} for k = {k}",
                        large.l()
                    ),
                ));
            }
            let g = match form {
                BoundForm::Schedule => bound.g(beta),
                BoundForm::PerK => bound.per_k(beta, k),
            };
            let ind = |t: &LongRangeTable, r: usize| (t.size(r, 0) as usize >= k) as u8 as f64;
            let diff: Moments = (0..replicas).map(|r| ind(&ts, r) - ind(&tl, r)).collect();
            let ps: Moments = (0..replicas).map(|r| ind(&ts, r)).collect();
            let pl: Moments = (0..replicas).map(|r| ind(&tl, r)).collect();
            let lhs = pl.mean() + surrogate_error;
            let rhs = ps.mean() + g;
            let slack = rhs - lhs;
            let stderr = diff.estimate().stderr;
            Ok(TailBoundReport {
                l: small.l(),
                surrogate_l: large.l(),
                k,
                n_l: bound.n_l,
                beta,
                form,
                lhs,
                rhs,
                bound: g,
                surrogate_error,
                slack,
                stderr,
                pass: slack >= -3.0 * stderr,
            })
        })
        .collect()
}

/// Slack of `M_y^{Λ_l} <= M_x^{Λ_l} + f_l(beta, h)` with paired samples.
pub fn check_long_range_modification(
    volume: &LongRangeVolume,
    beta: f64,
    h: f64,
    y: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<ModificationReport> {
    check_beta(beta)?;
    check_h(h)?;
    volume.volume.check_vertex(y)?;
    let x = volume.volume.representative(y);
    let ty = LongRangeTable::build(volume, y, &[beta], replicas, master_seed)?;
    let tx = LongRangeTable::build(volume, x, &[beta], replicas, master_seed)?;
    let correction = volume.spec.truncation(volume.l()).f(beta, h) + volume.spec.omitted_bound(beta, volume.vertex_count());
    let e = |s: u32| (-(s as f64) * h).exp();
    let diff: Moments = (0..replicas).map(|r| e(ty.size(r, 0)) - e(tx.size(r, 0))).collect();
    let m = |t: &LongRangeTable| (0..replicas).map(|r| escape(t.size(r, 0) as f64, h)).sum::<f64>() / replicas as f64;
    let d = diff.estimate();
    let slack = d.value + correction;
    Ok(ModificationReport {
        y,
        x,
        beta,
        h,
        l: volume.l(),
        m_y: m(&ty),
        m_x: m(&tx),
        correction,
        slack,
        stderr: d.stderr,
        pass: slack >= -3.0 * d.stderr,
    })
}

/// Both bond-type inequalities on a long-range volume with `f_l` in place
/// of `e^{-lh}` and `K = J_0`.
pub fn check_longrange_inequalities(
    volume: &LongRangeVolume,
    beta: f64,
    hs: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<DiffIneqReport>> {
    let delta = crate::diffineq::default_delta(beta);
    let roots = volume.volume.roots();
    let tables = roots
        .iter()
        .map(|&x| LongRangeTable::build(volume, x, &[beta - delta, beta, beta + delta], replicas, master_seed))
        .collect::<Result<Vec<_>>>()?;
    let bound = volume.spec.truncation(volume.l());
    let omitted = volume.spec.omitted_bound(beta + delta, volume.vertex_count());
    let ings = Ingredients::from_sizes(beta, hs, delta, volume.l(), volume.spec.j0, roots.len(), replicas, |x, r, i| {
        tables[x].size(r, i)
    })?;
    Ok(ings
        .into_iter()
        .flat_map(|ing| {
            let f = bound.f(beta, ing.h) + omitted;
            let ing = ing.with_correction(f);
            [Variant::Bond1, Variant::Bond2].map(|v| ing.evaluate(v, None))
        })
        .collect())
}

/// Per-bin comparison of two cluster-size laws over `n <= n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawComparison {
    pub n: usize,
    pub left: Estimate,
    pub right: Estimate,
    /// Difference in units of the combined standard error.
    pub z: f64,
    pub pass: bool,
}

/// Compares the finite-range long-range law against nearest-neighbour bond
/// percolation at `p = 1 - e^{-beta w}` on the same `Λ_l`, with independent
/// samples.
pub fn compare_with_nearest_neighbor(
    volume: &LongRangeVolume,
    beta: f64,
    n_max: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<LawComparison>> {
    let spec = &volume.spec;
    let w = match (&spec.kernels.unoriented, &spec.kernels.oriented, &spec.kernels.orbit_scale) {
        (Kernel::FiniteRange { weights }, Kernel::Zero, None) if weights.len() == 1 => weights[0],
        _ => return Err(invalid("kernel", "expects an unoriented finite_range kernel of range 1")),
    };
    let root = volume.volume.roots()[0];
    let lr = LongRangeTable::build(volume, root, &[beta], replicas, master_seed)?.distribution(0);
    let p = crate::rng::p_of_beta(beta * w);
    let nn = ClusterTable::build(&volume.volume, crate::volume::Kind::Bond, root, &[p], replicas, master_seed)?
        .distribution(0);
    Ok((1..=n_max)
        .map(|n| {
            let a = crate::stats::proportion(lr.count(n).unwrap_or(0), replicas as u64);
            let b = crate::stats::proportion(nn.count(n).unwrap_or(0), replicas as u64);
            let se = a.stderr.hypot(b.stderr);
            let z = if se > 0.0 { (a.value - b.value) / se } else { 0.0 };
            LawComparison {
                n,
                left: a,
                right: b,
                z,
                pass: (a.value - b.value).abs() <= 3.0 * se,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_regular_tree, build_square_lattice};
    use crate::percolation::{cluster_of, sample_bond};

    fn z2_spec(half: usize, kernels: KernelPair) -> Arc<LongRangeSpec> {
        let p = Arc::new(build_square_lattice(half).unwrap());
        Arc::new(build_longrange_spec(&p, kernels).unwrap())
    }

    #[test]
    fn exponential_j0_matches_closed_form() {
        // on Z², |S(d)| = 4d, so J_0 = 4 (1 + w) e^{-1} / (1 - e^{-1})^2
        let s = z2_spec(12, KernelPair::exponential(1.0, 0.5));
        let q = (-1.0f64).exp();
        let j0 = 4.0 * 1.5 * q / (1.0 - q).powi(2);
        // extrapolated spheres past the patch overcount slightly, never undercount
        assert!(s.j0 >= j0 * (1.0 - 1e-12) && s.j0 < j0 * (1.0 + 1e-5), "{} vs {j0}", s.j0);
        // J_r for r beyond the patch uses the extrapolated sphere sizes
        let r = 20.0;
        let tail: f64 = (20..4000).map(|d| 6.0 * d as f64 * (-(d as f64)).exp()).sum();
        assert!(s.j_r(r) >= tail * (1.0 - 1e-9), "{} {tail}", s.j_r(r));
        assert!(s.j_r(r) < 3.0 * tail);
    }

    #[test]
    fn power_one_rejected_on_z2() {
        let p = Arc::new(build_square_lattice(10).unwrap());
        assert!(build_longrange_spec(&p, KernelPair::power(1.0)).is_err());
        assert!(build_longrange_spec(&p, KernelPair::power(4.0)).is_ok());
    }

    #[test]
    fn exponential_rejected_on_fast_growing_tree() {
        let p = Arc::new(build_regular_tree(5, 6).unwrap());
        // spheres grow like 4^d, faster than e^{d}
        assert!(build_longrange_spec(&p, KernelPair::exponential(1.0, 0.0)).is_err());
        assert!(build_longrange_spec(&p, KernelPair::exponential(2.0, 0.0)).is_ok());
    }

    #[test]
    fn finite_range_one_is_nearest_neighbour() {
        let s = z2_spec(6, KernelPair::finite_range(vec![0.7]));
        assert!((s.j0 - 4.0 * 0.7).abs() < 1e-12);
        assert_eq!(s.j_r(2.0), 0.0);
        let v = LongRangeVolume::new(&s, 3).unwrap();
        assert_eq!(v.pair_count(), 2 * v.volume.edge_count());
        let b = s.truncation(5);
        assert_eq!(b.g(0.4), 0.0);
    }

    #[test]
    fn ln_geometric_matches_direct_sum() {
        for a in [0.3f64, 1.0, 2.5] {
            for n in [1usize, 2, 7] {
                let direct: f64 = (0..n).map(|k| a.powi(k as i32)).sum();
                assert!((ln_geometric(a.ln(), n) - direct.ln()).abs() < 1e-12);
            }
        }
        assert!(ln_geometric(3.0f64.ln(), 2000).is_finite());
    }

    #[test]
    fn schedule_is_increasing_and_g_decays() {
        let s = z2_spec(40, KernelPair::exponential(1.0, 0.5));
        let ls = schedule(&s, 400);
        assert!(ls.windows(2).all(|w| w[0] < w[1]), "{ls:?}");
        let ns: Vec<usize> = (1..=400).map(|l| s.truncation(l).n_l).collect();
        assert!(ns.windows(2).all(|w| w[0] <= w[1]));
        assert!(*ns.last().unwrap() > ns[0]);
        for beta in [0.05, 0.1, 0.2, 1.0] {
            let g: Vec<f64> = (1..=400).map(|l| s.truncation(l).g_envelope(beta)).collect();
            assert!(g.windows(2).all(|w| w[1] <= w[0]), "{beta}");
            assert!(g[399] < 1e-6 * g[0]);
            for l in [3, 17, 40, 300] {
                assert!(s.truncation(l).g(beta) <= g[l - 1]);
            }
        }
    }

    #[test]
    fn oriented_reachability() {
        let c = DirectedConfiguration::from_links(3, vec![], vec![(0, 1)]).unwrap();
        assert_eq!(oriented_cluster_of(&c, 0).unwrap(), vec![0, 1]);
        assert_eq!(oriented_cluster_of(&c, 1).unwrap(), vec![1]);
        let c = DirectedConfiguration::from_links(3, vec![(0, 1)], vec![]).unwrap();
        assert_eq!(oriented_cluster_of(&c, 1).unwrap(), vec![0, 1]);
        let c = DirectedConfiguration::from_links(3, vec![], vec![(0, 1), (1, 2)]).unwrap();
        assert_eq!(oriented_cluster_of(&c, 0).unwrap(), vec![0, 1, 2]);
        assert_eq!(oriented_cluster_of(&c, 2).unwrap(), vec![2]);
    }

    #[test]
    fn zero_kernel_gives_empty_configuration() {
        let p = Arc::new(build_square_lattice(4).unwrap());
        let s = Arc::new(build_longrange_spec(&p, KernelPair::default()).unwrap());
        assert_eq!(s.j0, 0.0);
        let v = LongRangeVolume::new(&s, 2).unwrap();
        let c = sample_longrange(&v, 1.0, SeedSpec::new(1, 0, Stream::LongRangeUnoriented)).unwrap();
        assert_eq!(c.open_link_count(), 0);
    }

    #[test]
    fn explorer_matches_sampled_configuration() {
        let s = z2_spec(8, KernelPair::exponential(1.0, 0.5));
        let v = LongRangeVolume::new(&s, 4).unwrap();
        let betas = [0.05, 0.1, 0.2];
        for root in [v.volume.roots()[0], 0, 7] {
            let mut ex = LongRangeExplorer::new(&v, root, &betas).unwrap();
            for rep in 0..40 {
                let sizes = ex.explore(5, rep);
                for (i, &b) in betas.iter().enumerate() {
                    let c = sample_longrange(&v, b, SeedSpec::new(5, rep, Stream::LongRangeUnoriented)).unwrap();
                    assert_eq!(sizes[i] as usize, oriented_cluster_of(&c, root).unwrap().len());
                }
            }
        }
    }

    #[test]
    fn expected_open_link_count() {
        let s = z2_spec(6, KernelPair::exponential(1.0, 0.5));
        let v = LongRangeVolume::new(&s, 3).unwrap();
        let beta = 0.3;
        let mut mean = 0.0;
        let mut var = 0.0;
        for u in 0..v.vertex_count() {
            for (y, ju, jo) in v.partners(u) {
                for (j, count) in [(ju, u < y), (jo, true)] {
                    if count {
                        let p = crate::rng::p_of_beta(beta * j);
                        mean += p;
                        var += p * (1.0 - p);
                    }
                }
            }
        }
        let n = 400;
        let m: Moments = (0..n)
            .map(|r| sample_longrange(&v, beta, SeedSpec::new(2, r, Stream::LongRangeUnoriented)).unwrap().open_link_count() as f64)
            .collect();
        let se = (var / n as f64).sqrt();
        assert!((m.mean() - mean).abs() < 3.0 * se, "{} vs {mean} ± {se}", m.mean());
    }

    #[test]
    fn finite_range_sampling_is_bond_percolation_in_law() {
        let s = z2_spec(6, KernelPair::finite_range(vec![1.0]));
        let v = LongRangeVolume::new(&s, 5).unwrap();
        let rows = compare_with_nearest_neighbor(&v, 0.5, 10, 20_000, 3).unwrap();
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
        // direct bond sampling agrees in the same way
        let root = v.volume.roots()[0];
        let c = sample_bond(&v.volume, 0.5, SeedSpec::new(1, 0, Stream::Percolation)).unwrap();
        assert!(!cluster_of(&v.volume, &c, root).unwrap().is_empty());
    }

    #[test]
    fn tail_bound_k1_is_trivial() {
        let s = z2_spec(14, KernelPair::exponential(1.0, 0.5));
        let small = LongRangeVolume::new(&s, 4).unwrap();
        let large = LongRangeVolume::new(&s, 13).unwrap();
        let beta = 0.3 / s.j0;
        let r = check_long_model_bound(&small, &large, beta, &[1], BoundForm::Schedule, 500, 1).unwrap();
        assert_eq!(r[0].lhs, 1.0);
        assert!((r[0].slack - r[0].bound).abs() < 1e-15);
        assert!(r[0].pass);
    }

    #[test]
    fn tail_bound_per_k_holds() {
        let s = z2_spec(18, KernelPair::exponential(1.0, 0.5));
        let small = LongRangeVolume::new(&s, 4).unwrap();
        let large = LongRangeVolume::new(&s, 17).unwrap();
        let beta = 0.8 / s.j0;
        let rs = check_long_model_bound(&small, &large, beta, &[2, 3, 4], BoundForm::PerK, 5000, 2).unwrap();
        for r in &rs {
            assert!(r.pass, "{r:?}");
        }
        assert!(check_long_model_bound(&small, &large, beta, &[50], BoundForm::Schedule, 10, 2).is_err());
    }

    #[test]
    fn modification_self_slack_is_f() {
        let s = z2_spec(6, KernelPair::exponential(1.0, 0.5));
        let v = LongRangeVolume::new(&s, 4).unwrap();
        let x = v.volume.roots()[0];
        let beta = 0.5 / s.j0;
        let r = check_long_range_modification(&v, beta, 0.5, x, 1000, 1).unwrap();
        assert_eq!(r.slack, r.correction);
        assert!((r.correction - s.truncation(4).f(beta, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn inequalities_hold_on_long_range_volume() {
        let s = z2_spec(6, KernelPair::exponential(1.0, 0.5));
        let v = LongRangeVolume::new(&s, 4).unwrap();
        let rs = check_longrange_inequalities(&v, 0.5 / s.j0, &[1.0, 0.25], 4000, 3).unwrap();
        assert_eq!(rs.len(), 4);
        assert!(rs.iter().all(|r| r.pass), "{rs:?}");
    }

    #[test]
    fn kernel_toml_round_trip() {
        let k = KernelPair::exponential(0.7, 0.25);
        let s = toml::to_string(&k).unwrap();
        let back: KernelPair = toml::from_str(&s).unwrap();
        assert_eq!(k, back);
        let parsed: KernelPair = toml::from_str("[unoriented]\nfamily = \"finite_range\"\nweights = [1.0]\n").unwrap();
        assert_eq!(parsed.oriented, Kernel::Zero);
    }
}
