//! Exponential-tail fits and critical-point scans.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::PatchFamily;
use crate::percolation::{ClusterSizeDistribution, ClusterTable};
use crate::rng::{SeedSpec, Stream};
use crate::stats::{quantile_sorted, weighted_line_fit};
use crate::volume::{finite_volume, Kind};

/// Bins with fewer empirical counts than this are left out of tail fits.
pub const MIN_BIN_COUNT: u64 = 50;
/// Fewest usable bins a fit accepts.
pub const MIN_FIT_BINS: usize = 4;

/// What a tail curve measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// `P(|C_x| >= n)`.
    Size,
    /// `P(C_x meets S(x, n))`.
    Radius,
}

/// A tail `n -> P(X >= n)`, empirical or exact.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub kind: TailKind,
    /// `tail[n] = P(X >= n)`.
    pub tail: Vec<f64>,
    /// Empirical counts behind each entry; `None` for exact tails.
    pub counts: Option<Vec<u64>>,
    pub trials: Option<u64>,
}

impl TailCurve {
    pub fn exact(kind: TailKind, tail: Vec<f64>) -> Self {
        Self {
            kind,
            tail,
            counts: None,
            trials: None,
        }
    }

    /// Size tail of a distribution (empirical or exact).
    pub fn from_distribution(dist: &ClusterSizeDistribution) -> Self {
        let len = dist.max_observed() + 2;
        match dist.replicas() {
            Some(trials) => {
                let counts: Vec<u64> = (0..len).map(|n| dist.tail_count(n).unwrap_or(0)).collect();
                Self::from_counts(TailKind::Size, counts, trials)
            }
            None => Self::exact(TailKind::Size, (0..len).map(|n| dist.tail(n)).collect()),
        }
    }

    /// Tail from per-replica values (sizes or radii).
    pub fn from_samples(kind: TailKind, values: impl IntoIterator<Item = u32>) -> Self {
        let mut hist = Vec::<u64>::new();
        let mut trials = 0;
        for v in values {
            let v = v as usize;
            if hist.len() <= v {
                hist.resize(v + 1, 0);
            }
            hist[v] += 1;
            trials += 1;
        }
        let mut counts = vec![0u64; hist.len() + 1];
        for n in (0..hist.len()).rev() {
            counts[n] = counts[n + 1] + hist[n];
        }
        Self::from_counts(kind, counts, trials)
    }

    fn from_counts(kind: TailKind, counts: Vec<u64>, trials: u64) -> Self {
        Self {
            kind,
            tail: counts.iter().map(|&c| c as f64 / trials as f64).collect(),
            counts: Some(counts),
            trials: Some(trials),
        }
    }

    fn usable(&self, n: usize) -> bool {
        match &self.counts {
            Some(c) => c.get(n).is_some_and(|&c| c >= MIN_BIN_COUNT && Some(c) != self.trials),
            None => self.tail.get(n).is_some_and(|&t| t > 0.0 && t < 1.0),
        }
    }
}

/// Fitted decay rate of a log tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub kind: TailKind,
    /// `-slope` of `ln P(X >= n)` against `n`.
    pub alpha: f64,
    pub alpha_stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First and last bin actually used.
    pub fit_window: (usize, usize),
    pub bins: usize,
}

impl DecayFit {
    pub fn subcritical_consistent(&self) -> bool {
        self.alpha > 0.0
    }
}

/// Weighted least squares of `ln P(X >= n)` on `n` over `window`, keeping
/// bins with at least [`MIN_BIN_COUNT`] counts (every positive bin of an exact
/// tail). Weights are inverse binomial variances of the log tail.
pub fn fit_exponential_tail(curve: &TailCurve, window: (usize, usize)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(invalid("window", format!("empty window [{lo}, {hi}]")));
    }
    let used: Vec<usize> = (lo..=hi).filter(|&n| curve.usable(n)).collect();
    if used.len() < MIN_FIT_BINS {
        return Err(Error::ThinWindow {
            reason: format!("need {MIN_FIT_BINS} bins with >= {MIN_BIN_COUNT} counts in [{lo}, {hi}]"),
            usable: used.iter().map(|&n| n as f64).collect(),
        });
    }
    let x: Vec<f64> = used.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = used.iter().map(|&n| curve.tail[n].ln()).collect();
    let w: Vec<f64> = match curve.trials {
        Some(trials) => used
            .iter()
            .map(|&n| {
                let t = curve.tail[n];
                trials as f64 * t / (1.0 - t)
            })
            .collect(),
        None => vec![1.0; used.len()],
    };
    let fit = weighted_line_fit(&x, &y, &w).ok_or_else(|| invalid("window", "degenerate fit"))?;
    Ok(DecayFit {
        kind: curve.kind,
        alpha: -fit.slope,
        alpha_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        fit_window: (used[0], *used.last().expect("nonempty")),
        bins: used.len(),
    })
}

/// Exact law of `|C_root|` on the infinite `degree`-regular tree for bond
/// percolation, up to `n_max`: `prob[n] = P(|C| = n)`.
///
/// A child subtree has generating function `T(z) = z B(z)^{d-1}` with
/// `B = (1 - p) + p T`, the root `z B(z)^d`; the recursion fixes one more
/// coefficient per sweep.
pub fn branching_cluster_law(degree: usize, p: f64, n_max: usize) -> Result<Vec<f64>> {
    if degree < 2 {
        return Err(invalid("degree", "must be at least 2"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    let len = n_max + 1;
    let mul = |a: &[f64], b: &[f64]| {
        let mut out = vec![0.0; len];
        for (i, &x) in a.iter().enumerate().filter(|(_, x)| **x != 0.0) {
            for (j, &y) in b.iter().enumerate().take(len - i) {
                out[i + j] += x * y;
            }
        }
        out
    };
    let branch = |t: &[f64]| {
        let mut b: Vec<f64> = t.iter().map(|x| p * x).collect();
        b[0] += 1.0 - p;
        b
    };
    let power = |b: &[f64], k: usize| (0..k).fold(unit(len), |acc, _| mul(&acc, b));
    let shift = |v: Vec<f64>| {
        let mut out = vec![0.0; len];
        out[1..].copy_from_slice(&v[..len - 1]);
        out
    };
    let mut t = vec![0.0; len];
    for _ in 0..len {
        t = shift(power(&branch(&t), degree - 1));
    }
    Ok(shift(power(&branch(&t), degree)))
}

fn unit(len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[0] = 1.0;
    v
}

/// `P(X >= n)` for `n = 0..prob.len()` from a truncated law.
pub fn tail_of(prob: &[f64]) -> Vec<f64> {
    let mut acc = 0.0f64;
    let mut out = Vec::with_capacity(prob.len());
    for &q in prob {
        out.push((1.0 - acc).max(0.0));
        acc += q;
    }
    out
}

/// Settings of the critical scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// A size pair counts as reaching the infinite-cluster regime once
    /// `P(x <-> S(x, l))` decays slower than `l^{-epsilon}` across it. Must
    /// sit below the critical one-arm exponent for the proxy to approach
    /// `p_H` from above; the default is just under the planar value 5/48.
    pub epsilon: f64,
    pub bootstrap: usize,
    /// Two-sided confidence of the bootstrap interval.
    pub confidence: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            bootstrap: 200,
            confidence: 0.99,
        }
    }
}

/// Brackets for the two thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalScanResult {
    pub family: String,
    pub kind: Kind,
    pub p_grid: Vec<f64>,
    pub l_list: Vec<usize>,
    pub replicas: usize,
    /// Point estimate from the largest sizes.
    pub p_t: f64,
    pub p_t_bracket: (f64, f64),
    pub p_h: f64,
    pub p_h_bracket: (f64, f64),
    /// Distance between the brackets, zero when they overlap.
    pub verdict_gap: f64,
    /// `mean_size[j][i]` = `E|C^{Λ_{l_j}}|` at `p_grid[i]`.
    pub mean_size: Vec<Vec<f64>>,
    /// `reach[j][i]` = `P(x <-> S(x, l_j))` at `p_grid[i]`.
    pub reach: Vec<Vec<f64>>,
}

impl CriticalScanResult {
    pub fn p_t_half_width(&self) -> f64 {
        0.5 * (self.p_t_bracket.1 - self.p_t_bracket.0)
    }

    pub fn p_h_half_width(&self) -> f64 {
        0.5 * (self.p_h_bracket.1 - self.p_h_bracket.0)
    }

    pub const CSV_HEADER: [&'static str; 5] = ["l", "p", "mean_size", "reach", "replicas"];

    pub fn csv_records(&self) -> Vec<[String; 5]> {
        let mut out = Vec::new();
        for (j, l) in self.l_list.iter().enumerate() {
            for (i, p) in self.p_grid.iter().enumerate() {
                out.push([
                    l.to_string(),
                    format!("{p}"),
                    format!("{:.10e}", self.mean_size[j][i]),
                    format!("{:.10e}", self.reach[j][i]),
                    self.replicas.to_string(),
                ]);
            }
        }
        out
    }
}

/// Where a proxy crosses, or which end of the grid it fell off.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Crossing {
    At(f64),
    Below,
    Above,
}

impl Crossing {
    fn at(self) -> Option<f64> {
        match self {
            Crossing::At(p) => Some(p),
            _ => None,
        }
    }

    /// The crossing, with misses pinned to the grid end they fell past.
    fn clamped(self, grid: &[f64]) -> f64 {
        match self {
            Crossing::At(p) => p,
            Crossing::Below => grid[0],
            Crossing::Above => grid[grid.len() - 1],
        }
    }
}

fn interpolate(grid: &[f64], f: &[f64], j: usize) -> f64 {
    let t = -f[j] / (f[j + 1] - f[j]);
    grid[j] + t * (grid[j + 1] - grid[j])
}

/// First upward crossing of zero by `f` over the grid, linearly
/// interpolated.
fn first_crossing(grid: &[f64], f: &[f64]) -> Crossing {
    if f.first().is_some_and(|&v| v >= 0.0) {
        return Crossing::Below;
    }
    (1..grid.len())
        .find(|&i| f[i] >= 0.0 && f[i - 1] < 0.0)
        .map_or(Crossing::Above, |i| Crossing::At(interpolate(grid, f, i - 1)))
}

/// Upward zero crossing of `f` closest below its maximum. Deep in the
/// subcritical phase `f` hovers around zero and noise makes spurious
/// crossings; the one feeding the peak is the real one.
fn crossing_below_peak(grid: &[f64], f: &[f64]) -> Crossing {
    let Some(peak) = (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b])) else {
        return Crossing::Above;
    };
    if f[peak] < 0.0 {
        return Crossing::Above;
    }
    (0..peak)
        .rev()
        .find(|&j| f[j] < 0.0)
        .map_or(Crossing::Below, |j| Crossing::At(interpolate(grid, f, j)))
}

/// `p_T` proxy from three sizes: where the growth exponent of `E|C^{Λ_l}|`
/// across the larger doubling catches up with the smaller one.
/// Subcritically the growth decelerates across scales.
fn p_t_proxy(grid: &[f64], l: [usize; 3], e: [&[f64]; 3]) -> Crossing {
    let g = |a: usize, i: usize| (e[a + 1][i] / e[a][i]).ln() / (l[a + 1] as f64 / l[a] as f64).ln();
    let diff: Vec<f64> = (0..grid.len()).map(|i| g(1, i) - g(0, i)).collect();
    crossing_below_peak(grid, &diff)
}

/// `p_H` proxy from two sizes: where the effective decay exponent of the
/// sphere-reaching probability first drops to `epsilon`.
fn p_h_proxy(grid: &[f64], l: [usize; 2], r: [&[f64]; 2], epsilon: f64) -> Crossing {
    let rho: Vec<f64> = (0..grid.len())
        .map(|i| {
            if r[0][i] == 0.0 {
                return f64::INFINITY;
            }
            -(r[1][i] / r[0][i]).ln() / (l[1] as f64 / l[0] as f64).ln()
        })
        .collect();
    let f: Vec<f64> = rho.iter().map(|x| epsilon - x).collect();
    first_crossing(grid, &f)
}

/// Per-size summaries of one table under a replica weighting.
struct SizeData {
    l: usize,
    sizes: Vec<u32>,
    reached: Vec<bool>,
    replicas: usize,
    points: usize,
}

impl SizeData {
    fn means(&self, weights: Option<&[u32]>) -> (Vec<f64>, Vec<f64>) {
        let k = self.points;
        let mut e = vec![0.0; k];
        let mut r = vec![0.0; k];
        let mut total = 0.0;
        for rep in 0..self.replicas {
            let w = weights.map_or(1.0, |w| w[rep] as f64);
            if w == 0.0 {
                continue;
            }
            total += w;
            for i in 0..k {
                e[i] += w * self.sizes[rep * k + i] as f64;
                if self.reached[rep * k + i] {
                    r[i] += w;
                }
            }
        }
        (e.iter().map(|x| x / total).collect(), r.iter().map(|x| x / total).collect())
    }
}

fn proxies(grid: &[f64], ls: &[usize], e: &[Vec<f64>], r: &[Vec<f64>], epsilon: f64) -> (Vec<Crossing>, Vec<Crossing>) {
    let m = ls.len();
    let pt = (0..m - 2)
        .map(|j| p_t_proxy(grid, [ls[j], ls[j + 1], ls[j + 2]], [&e[j], &e[j + 1], &e[j + 2]]))
        .collect();
    let ph = (0..m - 1)
        .map(|j| p_h_proxy(grid, [ls[j], ls[j + 1]], [&r[j], &r[j + 1]], epsilon))
        .collect();
    (pt, ph)
}

/// Scans `p_grid` on `Λ_l` for every `l` in `l_list` and brackets the two
/// thresholds.
///
/// Each proxy is computed for every consecutive group of sizes; the bracket
/// is the hull of the bootstrap intervals of all groups, so finite-size drift
/// between groups widens it. The point estimates use the largest sizes.
pub fn scan_critical(
    family: PatchFamily,
    kind: Kind,
    p_grid: &[f64],
    l_list: &[usize],
    replicas: usize,
    master_seed: u64,
    config: &ScanConfig,
) -> Result<CriticalScanResult> {
    if l_list.len() < 3 || l_list.windows(2).any(|w| w[0] >= w[1]) || l_list[0] == 0 {
        return Err(invalid("l_list", "need at least 3 strictly increasing positive sizes"));
    }
    if p_grid.len() < 2 {
        return Err(invalid("p_grid", "need at least 2 points"));
    }
    if !(config.epsilon > 0.0) || !(0.0 < config.confidence && config.confidence < 1.0) {
        return Err(invalid("config", "epsilon must be positive and confidence in (0, 1)"));
    }
    let k = p_grid.len();
    let mut data = Vec::with_capacity(l_list.len());
    for &l in l_list {
        let patch = Arc::new(family.patch_for_volume(l)?);
        let volume = finite_volume(&patch, l)?;
        let root = volume.roots()[0];
        let table = ClusterTable::build(&volume, kind, root, p_grid, replicas, master_seed)?;
        let mut sizes = Vec::with_capacity(replicas * k);
        let mut reached = Vec::with_capacity(replicas * k);
        for rep in 0..replicas {
            for i in 0..k {
                sizes.push(table.size(rep, i));
                reached.push(table.radius(rep, i) >= l as u32);
            }
        }
        data.push(SizeData {
            l,
            sizes,
            reached,
            replicas,
            points: k,
        });
    }
    let ls: Vec<usize> = data.iter().map(|d| d.l).collect();
    let (e, r): (Vec<_>, Vec<_>) = data.iter().map(|d| d.means(None)).unzip();
    let (pt0, ph0) = proxies(p_grid, &ls, &e, &r, config.epsilon);
    let p_t = pt0.last().and_then(|c| c.at()).ok_or_else(|| {
        Error::NoBracket("the growth of E|C| never stops decelerating on this grid; extend p_grid upward or refine it".into())
    })?;
    let p_h = ph0.last().and_then(|c| c.at()).ok_or_else(|| {
        Error::NoBracket("the reaching probability never stops decaying on this grid; extend p_grid upward or refine it".into())
    })?;

    // bootstrap: each size resampled independently
    let mut rng = SeedSpec::new(master_seed, 0, Stream::Bootstrap).sequential();
    let mut pt_boot = vec![Vec::new(); pt0.len()];
    let mut ph_boot = vec![Vec::new(); ph0.len()];
    let mut w = vec![0u32; replicas];
    for _ in 0..config.bootstrap {
        let mut eb = Vec::with_capacity(data.len());
        let mut rb = Vec::with_capacity(data.len());
        for d in &data {
            w.iter_mut().for_each(|x| *x = 0);
            for _ in 0..replicas {
                w[rng.gen_range(0..replicas)] += 1;
            }
            let (a, b) = d.means(Some(&w));
            eb.push(a);
            rb.push(b);
        }
        let (pt, ph) = proxies(p_grid, &ls, &eb, &rb, config.epsilon);
        for (j, c) in pt.into_iter().enumerate() {
            pt_boot[j].push(c);
        }
        for (j, c) in ph.into_iter().enumerate() {
            ph_boot[j].push(c);
        }
    }
    let alpha = 1.0 - config.confidence;
    let hull = |point: &[Crossing], boot: &[Vec<Crossing>], what: &str| -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (j, b) in boot.iter().enumerate() {
            let Some(p0) = point[j].at() else { continue };
            lo = lo.min(p0);
            hi = hi.max(p0);
            if config.bootstrap == 0 {
                continue;
            }
            // resamples that lose the crossing sit at the grid end they
            // fell past, which widens the interval instead of hiding them
            let found = b.iter().filter(|c| c.at().is_some()).count();
            if 2 * found < config.bootstrap {
                return Err(Error::NoBracket(format!(
                    "{what}: only {found} of {} bootstrap resamples cross inside the grid; widen or refine p_grid",
                    config.bootstrap
                )));
            }
            let mut v: Vec<f64> = b.iter().map(|c| c.clamped(p_grid)).collect();
            v.sort_by(f64::total_cmp);
            lo = lo.min(quantile_sorted(&v, alpha / 2.0));
            hi = hi.max(quantile_sorted(&v, 1.0 - alpha / 2.0));
        }
        Ok((lo, hi))
    };
    let p_t_bracket = hull(&pt0, &pt_boot, "p_T")?;
    let p_h_bracket = hull(&ph0, &ph_boot, "p_H")?;
    let verdict_gap = (p_h_bracket.0 - p_t_bracket.1).max(p_t_bracket.0 - p_h_bracket.1).max(0.0);
    Ok(CriticalScanResult {
        family: family.name(),
        kind,
        p_grid: p_grid.to_vec(),
        l_list: ls,
        replicas,
        p_t,
        p_t_bracket,
        p_h,
        p_h_bracket,
        verdict_gap,
        mean_size: e,
        reach: r,
    })
}

/// `lo, lo + step, ...` up to `hi` inclusive, rounded to kill drift.
pub fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || hi < lo {
        return Err(invalid("grid", "need step > 0 and hi >= lo"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_regular_tree, build_square_lattice};

    #[test]
    fn geometric_fixture_gives_ln2() {
        let tail: Vec<f64> = (0..30).map(|n| 0.5f64.powi(n)).collect();
        let fit = fit_exponential_tail(&TailCurve::exact(TailKind::Size, tail), (1, 20)).unwrap();
        assert!((fit.alpha - 2f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thin_window_lists_usable_bins() {
        let c = TailCurve::from_samples(TailKind::Size, (0..1000).map(|i| 1 + (i % 3) as u32));
        match fit_exponential_tail(&c, (1, 10)) {
            Err(Error::ThinWindow { usable, .. }) => assert_eq!(usable, vec![2.0, 3.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn branching_law_matches_closed_form() {
        // binary Galton-Watson total progeny: P(T = n) = C(2n, n-1) p^{n-1} q^{n+1} / n
        let p = 0.3;
        let q = 1.0 - p;
        let law = branching_cluster_law(3, p, 12).unwrap();
        let ln_c = |a: u64, b: u64| (1..=b).map(|i| ((a - b + i) as f64 / i as f64).ln()).sum::<f64>();
        let t = |n: u64| (ln_c(2 * n, n - 1) + (n - 1) as f64 * p.ln() + (n + 1) as f64 * q.ln() - (n as f64).ln()).exp();
        // root with three branches: check the first coefficients by hand
        assert!((law[1] - q.powi(3)).abs() < 1e-15);
        assert!((law[2] - 3.0 * q.powi(2) * p * t(1)).abs() < 1e-15);
        let b3 = 3.0 * q * q * p * t(2) + 3.0 * q * p * p * t(1) * t(1);
        assert!((law[3] - b3).abs() < 1e-15);
        let total: f64 = branching_cluster_law(3, 0.25, 400).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn branching_law_agrees_with_tree_simulation() {
        let patch = Arc::new(build_regular_tree(3, 14).unwrap());
        let v = finite_volume(&patch, 13).unwrap();
        let reps = 20_000;
        let t = ClusterTable::build(&v, Kind::Bond, v.roots()[0], &[0.25], reps, 7).unwrap();
        let d = t.distribution(0);
        let law = branching_cluster_law(3, 0.25, 20).unwrap();
        for n in 1..=8 {
            let emp = d.prob(n);
            let se = (law[n] * (1.0 - law[n]) / reps as f64).sqrt();
            assert!((emp - law[n]).abs() < 4.0 * se, "n={n} {emp} {}", law[n]);
        }
    }

    #[test]
    fn tree_fit_matches_oracle_fit() {
        let patch = Arc::new(build_regular_tree(3, 16).unwrap());
        let v = finite_volume(&patch, 15).unwrap();
        let t = ClusterTable::build(&v, Kind::Bond, v.roots()[0], &[0.25], 100_000, 3).unwrap();
        let fit = fit_exponential_tail(&TailCurve::from_distribution(&t.distribution(0)), (5, 40)).unwrap();
        let exact = tail_of(&branching_cluster_law(3, 0.25, 60).unwrap());
        let oracle = fit_exponential_tail(&TailCurve::exact(TailKind::Size, exact), fit.fit_window).unwrap();
        assert!(fit.alpha > 0.0 && fit.r_squared > 0.98, "{fit:?}");
        assert!((fit.alpha / oracle.alpha - 1.0).abs() < 0.15, "{} vs {}", fit.alpha, oracle.alpha);
    }

    #[test]
    fn z2_subcritical_size_and_radius_decay() {
        let patch = Arc::new(build_square_lattice(17).unwrap());
        let v = finite_volume(&patch, 16).unwrap();
        let t = ClusterTable::build(&v, Kind::Bond, 0, &[0.3], 20_000, 1).unwrap();
        let size = fit_exponential_tail(&TailCurve::from_distribution(&t.distribution(0)), (5, 40)).unwrap();
        let radius = fit_exponential_tail(&TailCurve::from_samples(TailKind::Radius, (0..20_000).map(|r| t.radius(r, 0))), (1, 16)).unwrap();
        assert!(size.subcritical_consistent() && radius.subcritical_consistent());
    }

    #[test]
    fn crossing_interpolates() {
        assert_eq!(first_crossing(&[0.0, 1.0], &[-1.0, 1.0]), Crossing::At(0.5));
        assert_eq!(first_crossing(&[0.0, 1.0], &[1.0, 2.0]), Crossing::Below);
        assert_eq!(first_crossing(&[0.0, 1.0], &[-1.0, -2.0]), Crossing::Above);
        assert_eq!(first_crossing(&[0.0, 1.0, 2.0], &[-1.0, -1.0, 3.0]), Crossing::At(1.25));
        let g = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(crossing_below_peak(&g, &[-0.1, 0.1, -1.0, 1.0, 0.5]), Crossing::At(2.5));
        assert_eq!(crossing_below_peak(&g, &[0.1, 0.2, 0.3, 0.2, 0.1]), Crossing::Below);
        assert_eq!(crossing_below_peak(&g, &[-0.1, -0.2, -0.3, -0.2, -0.1]), Crossing::Above);
    }

    #[test]
    fn grid_is_clean() {
        let g = grid(0.4, 0.6, 0.01).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[10], 0.5);
    }

    #[test]
    fn scan_needs_three_sizes() {
        let r = scan_critical(PatchFamily::Square, Kind::Bond, &[0.4, 0.6], &[4, 8], 10, 1, &ScanConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn small_z2_scan_brackets_half() {
        let g = grid(0.40, 0.62, 0.02).unwrap();
        let r = scan_critical(PatchFamily::Square, Kind::Bond, &g, &[8, 16, 32], 2000, 1, &ScanConfig::default()).unwrap();
        assert!(r.p_t_bracket.0 <= r.p_t_bracket.1 && r.p_h_bracket.0 <= r.p_h_bracket.1);
        assert!((r.p_t - 0.5).abs() < 0.06 && (r.p_h - 0.5).abs() < 0.06, "{} {}", r.p_t, r.p_h);
        // too coarse a grid
        let bad = scan_critical(PatchFamily::Square, Kind::Bond, &[0.1, 0.2, 0.3], &[8, 16, 32], 200, 1, &ScanConfig::default());
        assert!(matches!(bad, Err(Error::NoBracket(_))));
    }

    #[test]
    fn bracket_widens_with_confidence() {
        let g = grid(0.40, 0.62, 0.02).unwrap();
        let lo = ScanConfig { confidence: 0.5, ..ScanConfig::default() };
        let hi = ScanConfig { confidence: 0.99, ..ScanConfig::default() };
        let a = scan_critical(PatchFamily::Square, Kind::Bond, &g, &[4, 8, 16], 1000, 2, &lo).unwrap();
        let b = scan_critical(PatchFamily::Square, Kind::Bond, &g, &[4, 8, 16], 1000, 2, &hi).unwrap();
        assert!(b.p_t_bracket.0 <= a.p_t_bracket.0 && b.p_t_bracket.1 >= a.p_t_bracket.1);
        assert!(b.p_h_bracket.0 <= a.p_h_bracket.0 && b.p_h_bracket.1 >= a.p_h_bracket.1);
    }
}
