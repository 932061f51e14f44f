//! Finite-volume differential inequalities for the order parameter.
//!
//! * bond1 / site1: `dM/dbeta <= K (M + e^{-lh}) dM/dh`
//! * bond2: `M <= h dM/dh + M^2 + beta (M + e^{-lh}) dM/dbeta`
//! * site2: `M <= h dM/dh + M^2 + (e^beta - 1)(M + e^{-lh}) dM/dbeta`
//!
//! `K` is the maximal degree of the underlying graph. Monte Carlo values
//! come from one set of uniforms per replica thresholded at `beta - delta`,
//! `beta` and `beta + delta`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::{self, Tiny, EXACT_TOL};
use crate::graph::GraphPatch;
use crate::order_parameter::{check_h, escape, order_parameter_curve, RootTables};
use crate::rng::p_of_beta;
use crate::stats::{weighted_line_fit, Estimate, Moments};
use crate::volume::{finite_volume, FiniteVolume, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Bond1,
    Bond2,
    Site1,
    Site2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Bond1, Variant::Bond2, Variant::Site1, Variant::Site2];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Bond1 => "bond1",
            Variant::Bond2 => "bond2",
            Variant::Site1 => "site1",
            Variant::Site2 => "site2",
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            Variant::Bond1 | Variant::Bond2 => Kind::Bond,
            Variant::Site1 | Variant::Site2 => Kind::Site,
        }
    }

    pub fn for_kind(kind: Kind) -> [Variant; 2] {
        match kind {
            Kind::Bond => [Variant::Bond1, Variant::Bond2],
            Kind::Site => [Variant::Site1, Variant::Site2],
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| invalid("variant", format!("expected bond1, bond2, site1 or site2, got `{s}`")))
    }

    fn is_first(self) -> bool {
        matches!(self, Variant::Bond1 | Variant::Site1)
    }

    /// Coefficient of `(M + e^{-lh}) dM/dbeta` in the second inequality.
    pub fn coefficient(self, beta: f64) -> f64 {
        match self {
            Variant::Site2 | Variant::Site1 => beta.exp_m1(),
            Variant::Bond2 | Variant::Bond1 => beta,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_step(beta: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0) || beta - delta <= 0.0 {
        return Err(invalid("delta_beta", format!("need 0 < delta < beta, got delta {delta} at beta {beta}")));
    }
    Ok(())
}

fn check_variant(variant: Variant, kind: Kind) -> Result<()> {
    if variant.kind() != kind {
        return Err(Error::VariantMismatch {
            variant: variant.name().into(),
            kind: kind.name().into(),
        });
    }
    Ok(())
}

/// Default finite-difference step in `beta`.
pub fn default_delta(beta: f64) -> f64 {
    (0.01 * beta).max(0.005)
}

/// One inequality evaluated at one `(beta, h, l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffIneqReport {
    pub variant: Variant,
    pub beta: f64,
    pub h: f64,
    pub l: usize,
    /// Constant in the first inequality: the maximal degree, or `J_0` for
    /// long-range volumes.
    pub k: f64,
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `rhs - lhs`.
    pub slack: f64,
    /// Standard error of the slack (delta method over replicas).
    pub slack_stderr: f64,
    pub pass: bool,
    /// Set when the `beta` step shows curvature above the noise.
    pub curvature_flag: bool,
}

impl DiffIneqReport {
    pub const CSV_HEADER: [&'static str; 10] =
        ["variant", "beta", "h", "l", "lhs", "lhs_se", "rhs", "rhs_se", "slack", "pass"];

    pub fn csv_record(&self) -> [String; 10] {
        [
            self.variant.name().into(),
            format!("{}", self.beta),
            format!("{}", self.h),
            self.l.to_string(),
            format!("{:.10e}", self.lhs.value),
            format!("{:.4e}", self.lhs.stderr),
            format!("{:.10e}", self.rhs.value),
            format!("{:.4e}", self.rhs.stderr),
            format!("{:.10e}", self.slack),
            self.pass.to_string(),
        ]
    }
}

pub fn write_reports_csv<W: Write>(reports: &[DiffIneqReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DiffIneqReport::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

/// Worst slack per variant, for the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub cells: usize,
    pub failures: usize,
    pub worst_slack: f64,
    pub worst_slack_in_sigma: f64,
}

pub fn summarize(reports: &[DiffIneqReport]) -> Vec<VariantSummary> {
    Variant::ALL
        .into_iter()
        .filter_map(|v| {
            let rs: Vec<&DiffIneqReport> = reports.iter().filter(|r| r.variant == v).collect();
            if rs.is_empty() {
                return None;
            }
            let z = |r: &DiffIneqReport| {
                if r.slack_stderr > 0.0 {
                    r.slack / r.slack_stderr
                } else if r.slack >= 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            };
            Some(VariantSummary {
                variant: v,
                cells: rs.len(),
                failures: rs.iter().filter(|r| !r.pass).count(),
                worst_slack: rs.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min),
                worst_slack_in_sigma: rs.iter().map(|r| z(r)).fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

/// The three ingredients `M`, `dM/dh`, `dM/dbeta` of the inequalities,
/// stored per replica so that any smooth combination gets a delta-method
/// error bar.
#[derive(Debug, Clone)]
pub struct Ingredients {
    pub beta: f64,
    pub h: f64,
    pub l: usize,
    pub k: f64,
    /// Finite-volume correction, `e^{-lh}` unless replaced.
    pub correction: f64,
    roots: usize,
    /// Per replica: `sum_x e^{-h s_x}`, `sum_x s_x e^{-h s_x}`, the paired
    /// central difference of `M` in `beta`, and the paired second difference.
    a: Vec<f64>,
    b: Vec<f64>,
    d: Vec<f64>,
    c: Vec<f64>,
    delta: f64,
    exact: Option<[f64; 3]>,
}

fn mean(v: &[f64]) -> f64 {
    // fixed-order pairwise-free summation keeps results reproducible
    v.iter().sum::<f64>() / v.len() as f64
}

impl Ingredients {
    /// Builds per-replica ingredients for every `h` from one set of tables.
    pub fn sample(
        volume: &FiniteVolume,
        kind: Kind,
        beta: f64,
        hs: &[f64],
        delta: f64,
        replicas: usize,
        master_seed: u64,
    ) -> Result<Vec<Self>> {
        check_step(beta, delta)?;
        let ps = [p_of_beta(beta - delta), p_of_beta(beta), p_of_beta(beta + delta)];
        let t = RootTables::build(volume, kind, &ps, replicas, master_seed)?;
        Self::from_sizes(
            beta,
            hs,
            delta,
            volume.l(),
            volume.max_degree() as f64,
            t.roots.len(),
            replicas,
            |x, r, i| t.tables[x].size(r, i),
        )
    }

    /// Ingredients from cluster sizes `size(root_index, replica, i)` at
    /// `beta - delta`, `beta`, `beta + delta` (`i = 0, 1, 2`).
    #[allow(clippy::too_many_arguments)]
    pub fn from_sizes(
        beta: f64,
        hs: &[f64],
        delta: f64,
        l: usize,
        k: f64,
        roots: usize,
        replicas: usize,
        size: impl Fn(usize, usize, usize) -> u32,
    ) -> Result<Vec<Self>> {
        check_step(beta, delta)?;
        for &h in hs {
            check_h(h)?;
        }
        if replicas == 0 || roots == 0 {
            return Err(invalid("replicas", "need at least one replica and one root"));
        }
        Ok(hs
            .iter()
            .map(|&h| {
                let e = |s: u32| (-(s as f64) * h).exp();
                let mut a = Vec::with_capacity(replicas);
                let mut b = Vec::with_capacity(replicas);
                let mut d = Vec::with_capacity(replicas);
                let mut c = Vec::with_capacity(replicas);
                for r in 0..replicas {
                    let (mut ar, mut br, mut dr, mut cr) = (0.0, 0.0, 0.0, 0.0);
                    for x in 0..roots {
                        let (s0, s1, s2) = (size(x, r, 0), size(x, r, 1), size(x, r, 2));
                        ar += e(s1);
                        br += s1 as f64 * e(s1);
                        dr += (e(s0) - e(s2)) / (2.0 * delta);
                        cr += e(s2) - 2.0 * e(s1) + e(s0);
                    }
                    a.push(ar);
                    b.push(br);
                    d.push(dr);
                    c.push(cr);
                }
                Self {
                    beta,
                    h,
                    l,
                    k,
                    correction: (-(l as f64) * h).exp(),
                    roots,
                    a,
                    b,
                    d,
                    c,
                    delta,
                    exact: None,
                }
            })
            .collect())
    }

    /// Replaces the `e^{-lh}` correction, e.g. by `f_l(beta, h)`.
    pub fn with_correction(mut self, correction: f64) -> Self {
        self.correction = correction;
        self
    }

    /// Exact ingredients on an enumerable volume; `dM/dbeta` is the analytic
    /// derivative of the cluster-size polynomials.
    pub fn exact(volume: &FiniteVolume, kind: Kind, beta: f64, h: f64) -> Result<Self> {
        ExactLaw::new(volume, kind)?.ingredients(beta, h)
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// `(M, dM/dh, dM/dbeta)` point values.
    pub fn values(&self) -> [f64; 3] {
        match self.exact {
            Some(v) => v,
            None => [self.roots as f64 - mean(&self.a), mean(&self.b), mean(&self.d)],
        }
    }

    /// Standard error of `f(M, Mh, Mb)` given its gradient.
    fn stderr(&self, grad: [f64; 3]) -> f64 {
        if self.exact.is_some() {
            return 0.0;
        }
        let (am, bm, dm) = (mean(&self.a), mean(&self.b), mean(&self.d));
        // dM/da = -1
        let m: Moments = (0..self.a.len())
            .map(|r| -grad[0] * (self.a[r] - am) + grad[1] * (self.b[r] - bm) + grad[2] * (self.d[r] - dm))
            .collect();
        m.estimate().stderr
    }

    pub fn m(&self) -> Estimate {
        Estimate::new(self.values()[0], self.stderr([1.0, 0.0, 0.0]))
    }

    pub fn dmdh(&self) -> Estimate {
        Estimate::new(self.values()[1], self.stderr([0.0, 1.0, 0.0]))
    }

    pub fn dmdbeta(&self) -> Estimate {
        Estimate::new(self.values()[2], self.stderr([0.0, 0.0, 1.0]))
    }

    /// Whether the second difference in `beta` is both significant and large
    /// compared to the first difference.
    pub fn curvature_flag(&self) -> bool {
        if self.c.is_empty() {
            return false;
        }
        let cm: Moments = self.c.iter().copied().collect();
        let ce = cm.estimate();
        let slope = self.dmdbeta().value.abs();
        ce.value.abs() > 3.0 * ce.stderr && ce.value.abs() / (2.0 * self.delta) > 0.25 * slope
    }

    /// Evaluates one inequality. `coefficient` overrides the factor in front
    /// of `(M + e^{-lh}) dM/dbeta` in the second inequality.
    pub fn evaluate(&self, variant: Variant, coefficient: Option<f64>) -> DiffIneqReport {
        let [m, mh, mb] = self.values();
        let e = self.correction;
        let k = self.k;
        let (lhs_v, lhs_g, rhs_v, rhs_g) = if variant.is_first() {
            (mb, [0.0, 0.0, 1.0], k * (m + e) * mh, [k * mh, k * (m + e), 0.0])
        } else {
            let c = coefficient.unwrap_or_else(|| variant.coefficient(self.beta));
            (
                m,
                [1.0, 0.0, 0.0],
                self.h * mh + m * m + c * (m + e) * mb,
                [2.0 * m + c * mb, self.h, c * (m + e)],
            )
        };
        let slack = rhs_v - lhs_v;
        let slack_g = [rhs_g[0] - lhs_g[0], rhs_g[1] - lhs_g[1], rhs_g[2] - lhs_g[2]];
        let slack_se = self.stderr(slack_g);
        let pass = if self.is_exact() {
            slack >= -EXACT_TOL
        } else {
            slack >= -3.0 * slack_se
        };
        DiffIneqReport {
            variant,
            beta: self.beta,
            h: self.h,
            l: self.l,
            k: self.k,
            lhs: Estimate::new(lhs_v, self.stderr(lhs_g)),
            rhs: Estimate::new(rhs_v, self.stderr(rhs_g)),
            slack,
            slack_stderr: slack_se,
            pass,
            curvature_flag: self.curvature_flag(),
        }
    }

    /// Slack of the combined inequality obtained by inserting the first into
    /// the second: `M <= h Mh + M^2 + c K (M + e^{-lh})^2 Mh`.
    pub fn combined(&self, kind: Kind) -> Estimate {
        let [m, mh, _] = self.values();
        let e = self.correction;
        let k = self.k;
        let c = Variant::for_kind(kind)[1].coefficient(self.beta);
        let v = self.h * mh + m * m + c * k * (m + e).powi(2) * mh - m;
        let g = [
            2.0 * m + 2.0 * c * k * (m + e) * mh - 1.0,
            self.h + c * k * (m + e).powi(2),
            0.0,
        ];
        Estimate::new(v, self.stderr(g))
    }
}

/// Cluster-size polynomials of every root, enumerated once and evaluated
/// at any `(beta, h)`.
#[derive(Debug, Clone)]
pub struct ExactLaw {
    l: usize,
    k: f64,
    roots: usize,
    polys: Vec<Vec<exact::EventPolynomial>>,
}

impl ExactLaw {
    pub fn new(volume: &FiniteVolume, kind: Kind) -> Result<Self> {
        let polys = volume
            .roots()
            .iter()
            .map(|&x| exact::exact_cluster_distribution(volume, kind, x))
            .collect::<Result<_>>()?;
        Ok(Self {
            l: volume.l(),
            k: volume.max_degree() as f64,
            roots: volume.roots().len(),
            polys,
        })
    }

    pub fn ingredients(&self, beta: f64, h: f64) -> Result<Ingredients> {
        check_h(h)?;
        let p = p_of_beta(beta);
        let (mut m, mut mh, mut mb) = (0.0, 0.0, 0.0);
        for polys in &self.polys {
            for (n, q) in polys.iter().enumerate().skip(1) {
                let nf = n as f64;
                m += q.prob(p) * escape(nf, h);
                mh += nf * q.prob(p) * (-nf * h).exp();
                mb += q.derivative(p) * (1.0 - p) * escape(nf, h);
            }
        }
        Ok(Ingredients {
            beta,
            h,
            l: self.l,
            k: self.k,
            correction: (-(self.l as f64) * h).exp(),
            roots: self.roots,
            a: Vec::new(),
            b: Vec::new(),
            d: Vec::new(),
            c: Vec::new(),
            delta: 0.0,
            exact: Some([m, mh, mb]),
        })
    }
}

/// Central-difference estimate of `dM^{Lambda_l}/dbeta` with common random
/// numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaDerivative {
    pub value: f64,
    pub stderr: f64,
    pub curvature_flag: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn dmdbeta_estimate(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    h: f64,
    delta_beta: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<BetaDerivative> {
    let ing = Ingredients::sample(volume, kind, beta, &[h], delta_beta, replicas, master_seed)?.remove(0);
    let d = ing.dmdbeta();
    Ok(BetaDerivative {
        value: d.value,
        stderr: d.stderr,
        curvature_flag: ing.curvature_flag(),
    })
}

/// Exact `dM_x/dbeta` through Russo's formula: the sum over elements of
/// `P(s closed and pivotal for x <-> B)`, with the blue marks integrated out.
pub fn dmdbeta_pivotal_exact(volume: &FiniteVolume, kind: Kind, beta: f64, h: f64, x: usize) -> Result<f64> {
    check_h(h)?;
    Ok(PivotalCounts::new(volume, kind, x)?.dmdbeta(beta, h))
}

/// Number of (configuration, closed element) pairs where opening the element
/// grows the cluster of `x`, tallied by open count and the two sizes.
/// Integer tallies keep the sum free of rounding until evaluation.
#[derive(Debug, Clone)]
pub struct PivotalCounts {
    deps: usize,
    nv: usize,
    counts: Vec<u64>,
}

impl PivotalCounts {
    pub fn new(volume: &FiniteVolume, kind: Kind, x: usize) -> Result<Self> {
        let t = Tiny::new(volume, kind)?;
        let deps = t.cluster_deps(x);
        let d = deps.len();
        if d > exact::ENUMERATION_CAP {
            return Err(Error::EnumerationCap {
                size: d,
                cap: exact::ENUMERATION_CAP,
            });
        }
        let nv = volume.vertex_count() + 1;
        let mut counts = vec![0u64; (d + 1) * nv * nv];
        for i in 0u64..1 << d {
            let mask = deps
                .iter()
                .enumerate()
                .filter(|(j, _)| i >> j & 1 == 1)
                .fold(0u64, |m, (_, &e)| m | 1 << e);
            let k = i.count_ones() as usize;
            let base = t.cluster(mask, x).count_ones() as usize;
            for &s in &deps {
                if mask >> s & 1 == 0 {
                    let grown = t.cluster(mask | 1 << s, x).count_ones() as usize;
                    if grown > base {
                        counts[(k * nv + base) * nv + grown] += 1;
                    }
                }
            }
        }
        Ok(Self { deps: d, nv, counts })
    }

    pub fn dmdbeta(&self, beta: f64, h: f64) -> f64 {
        let (nv, d) = (self.nv, self.deps);
        let p = p_of_beta(beta);
        let mut total = 0.0;
        for (idx, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let (k, base, grown) = (idx / (nv * nv), idx / nv % nv, idx % nv);
            let w = p.powi(k as i32) * (1.0 - p).powi((d - k) as i32);
            total += c as f64 * w * ((-h * base as f64).exp() - (-h * grown as f64).exp());
        }
        total
    }
}

/// Monte Carlo check of one variant.
pub fn check_inequality(
    variant: Variant,
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    h: f64,
    replicas: usize,
    master_seed: u64,
) -> Result<DiffIneqReport> {
    check_variant(variant, kind)?;
    let ing = Ingredients::sample(volume, kind, beta, &[h], default_delta(beta), replicas, master_seed)?;
    Ok(ing[0].evaluate(variant, None))
}

/// Exact check of one variant on an enumerable volume.
pub fn check_inequality_exact(variant: Variant, volume: &FiniteVolume, kind: Kind, beta: f64, h: f64) -> Result<DiffIneqReport> {
    check_variant(variant, kind)?;
    Ok(Ingredients::exact(volume, kind, beta, h)?.evaluate(variant, None))
}

/// Both variants of `kind` on a grid of `h` values from one set of samples.
pub fn check_inequalities(
    volume: &FiniteVolume,
    kind: Kind,
    beta: f64,
    hs: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<DiffIneqReport>> {
    let ings = Ingredients::sample(volume, kind, beta, hs, default_delta(beta), replicas, master_seed)?;
    Ok(ings
        .iter()
        .flat_map(|ing| Variant::for_kind(kind).map(|v| ing.evaluate(v, None)))
        .collect())
}

/// Designed volume on which the site factor matters: a root `x` whose only
/// neighbour `y` feeds a tube of `length + 1` cliques of size `width`, with
/// consecutive cliques completely joined. `l` is the eccentricity of `x`.
///
/// The cluster of `x` is either tiny or spans the tube, and it hinges on the
/// single site `y`, so the `dM/dbeta` term carries most of the right-hand
/// side. Around `beta = 0.71`, `h = 0.05` the site inequality holds with
/// `e^beta - 1` but fails once the factor is replaced by `beta`.
pub fn site_factor_stress_volume(width: usize, length: usize) -> Result<FiniteVolume> {
    if width < 2 || length < 1 {
        return Err(invalid("stress_volume", "need width >= 2 and length >= 1"));
    }
    let id = |layer: usize, j: usize| 2 + layer * width + j;
    let mut edges = vec![(0, 1)];
    edges.extend((0..width).map(|j| (1, id(0, j))));
    for layer in 0..=length {
        for a in 0..width {
            edges.extend((a + 1..width).map(|b| (id(layer, a), id(layer, b))));
            if layer < length {
                edges.extend((0..width).map(|b| (id(layer, a), id(layer + 1, b))));
            }
        }
    }
    let g = crate::graph::Graph::from_edges(2 + width * (length + 1), &edges)?;
    let l = length + 2;
    FiniteVolume::standalone(&format!("tube_{width}x{length}"), g, vec![0], l)
}

/// Log-log slope of `M(beta_T, h)` against `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub beta_t_estimate: f64,
    pub l: usize,
    pub slope: f64,
    pub slope_stderr: f64,
    /// `h` values that met the precision requirement.
    pub used_h: Vec<f64>,
    /// Half the spread of the slopes refitted at the ends of the `beta_T`
    /// bracket; zero when no bracket was given.
    pub beta_t_spread: f64,
    /// `slope <= 1/2 + 3 sqrt(slope_stderr^2 + beta_t_spread^2)`.
    pub constraint_holds: bool,
}

impl ExponentFit {
    pub fn tolerance(&self) -> f64 {
        3.0 * self.slope_stderr.hypot(self.beta_t_spread)
    }
}

/// Relative standard error above which an `h` point is dropped.
pub const MAX_RELATIVE_STDERR: f64 = 0.05;

/// Fits `log M` against `log h` at `beta_t_estimate` on `Lambda_l` of the
/// given patch (the largest volume it supports when `l` is `None`).
pub fn critical_exponent_fit(
    patch: &Arc<GraphPatch>,
    kind: Kind,
    beta_t_estimate: f64,
    h_grid: &[f64],
    l: Option<usize>,
    replicas: usize,
    master_seed: u64,
) -> Result<ExponentFit> {
    if h_grid.len() < 5 {
        return Err(invalid("h_grid", "need at least 5 points"));
    }
    let l = l.unwrap_or(patch.exact_radius.saturating_sub(1));
    let volume = finite_volume(patch, l)?;
    let points = order_parameter_curve(&volume, kind, beta_t_estimate, h_grid, replicas, master_seed)?;
    let usable: Vec<_> = points
        .iter()
        .filter(|p| p.m.value > 0.0 && p.m.stderr / p.m.value < MAX_RELATIVE_STDERR)
        .collect();
    if usable.len() < 3 {
        return Err(Error::ThinWindow {
            reason: format!("only {} h values have relative stderr below {MAX_RELATIVE_STDERR}", usable.len()),
            usable: usable.iter().map(|p| p.h).collect(),
        });
    }
    let x: Vec<f64> = usable.iter().map(|p| p.h.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.m.value.ln()).collect();
    let w: Vec<f64> = usable.iter().map(|p| (p.m.value / p.m.stderr).powi(2)).collect();
    let fit = weighted_line_fit(&x, &y, &w).ok_or_else(|| Error::ThinWindow {
        reason: "degenerate h grid".into(),
        usable: usable.iter().map(|p| p.h).collect(),
    })?;
    Ok(ExponentFit {
        beta_t_estimate,
        l,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        used_h: usable.iter().map(|p| p.h).collect(),
        beta_t_spread: 0.0,
        constraint_holds: fit.slope <= 0.5 + 3.0 * fit.slope_stderr,
    })
}

/// Fit at the midpoint of a `beta_T` bracket, with the slope uncertainty
/// widened by the slopes found at the two ends of the bracket.
#[allow(clippy::too_many_arguments)]
pub fn critical_exponent_fit_bracketed(
    patch: &Arc<GraphPatch>,
    kind: Kind,
    beta_t_bracket: (f64, f64),
    h_grid: &[f64],
    l: Option<usize>,
    replicas: usize,
    master_seed: u64,
) -> Result<ExponentFit> {
    let (lo, hi) = beta_t_bracket;
    if !(lo > 0.0 && hi >= lo) {
        return Err(invalid("beta_t_bracket", format!("need 0 < lo <= hi, got ({lo}, {hi})")));
    }
    let mut mid = critical_exponent_fit(patch, kind, 0.5 * (lo + hi), h_grid, l, replicas, master_seed)?;
    if hi > lo {
        let a = critical_exponent_fit(patch, kind, lo, h_grid, l, replicas, master_seed)?;
        let b = critical_exponent_fit(patch, kind, hi, h_grid, l, replicas, master_seed)?;
        mid.beta_t_spread = 0.5 * (a.slope - b.slope).abs();
    }
    mid.constraint_holds = mid.slope <= 0.5 + mid.tolerance();
    Ok(mid)
}

/// One row of the supercritical lower-bound table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalPropositionRow {
    pub beta: f64,
    pub h_min: f64,
    pub m: Estimate,
    /// `M(beta, h_min) / (beta - beta_T)`.
    pub ratio: f64,
    pub positive: bool,
    /// Set when `M` is within three standard errors of zero.
    pub noisy: bool,
}

/// `M(beta, h)` at the smallest `h` of the grid whose relative error is
/// acceptable, for each `beta` of the grid.
#[allow(clippy::too_many_arguments)]
pub fn check_final_proposition(
    patch: &Arc<GraphPatch>,
    kind: Kind,
    beta_t_estimate: f64,
    beta_grid: &[f64],
    h_grid: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<FinalPropositionRow>> {
    let l = patch.exact_radius.saturating_sub(1);
    let volume = finite_volume(patch, l)?;
    beta_grid
        .iter()
        .map(|&beta| {
            let pts = order_parameter_curve(&volume, kind, beta, h_grid, replicas, master_seed)?;
            let best = pts
                .iter()
                .filter(|p| p.m.value > 0.0 && p.m.stderr / p.m.value < MAX_RELATIVE_STDERR)
                .min_by(|a, b| a.h.total_cmp(&b.h))
                .or_else(|| pts.iter().max_by(|a, b| a.h.total_cmp(&b.h)))
                .expect("nonempty h grid")
                .clone();
            let ratio = best.m.value / (beta - beta_t_estimate);
            Ok(FinalPropositionRow {
                beta,
                h_min: best.h,
                m: best.m,
                ratio,
                positive: ratio > 0.0,
                noisy: best.m.value <= 3.0 * best.m.stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_square_lattice;
    use crate::rng::beta_of_p;
    use crate::volume::builtin;
    use std::f64::consts::LN_2;

    #[test]
    fn k2_exact_values() {
        let v = builtin::k2();
        let ing = Ingredients::exact(&v, Kind::Bond, LN_2, LN_2).unwrap();
        let [m, mh, mb] = ing.values();
        assert!((m - 0.625).abs() < 1e-15);
        assert!((mh - 0.5).abs() < 1e-15);
        assert!((mb - 0.125).abs() < 1e-15);
        let r = ing.evaluate(Variant::Bond1, None);
        assert!((r.lhs.value - 0.125).abs() < 1e-15);
        assert!((r.rhs.value - 9.0 / 16.0).abs() < 1e-15);
        assert!(r.pass);
    }

    #[test]
    fn pivotal_route_matches_polynomial_route() {
        for v in builtin::all() {
            for kind in [Kind::Bond, Kind::Site] {
                let x = v.roots()[0];
                let law = ExactLaw::new(&v.with_roots(vec![x]).unwrap(), kind).unwrap();
                let counts = PivotalCounts::new(&v, kind, x).unwrap();
                for (beta, h) in [(0.2, 0.1), (1.0, 0.7), (2.5, 3.0)] {
                    let poly = law.ingredients(beta, h).unwrap().values()[2];
                    let piv = counts.dmdbeta(beta, h);
                    assert!((poly - piv).abs() < 1e-12, "{} {kind} {beta}: {poly} {piv}", v.name());
                }
            }
        }
    }

    #[test]
    fn mc_derivative_k2() {
        let v = builtin::k2();
        let d = dmdbeta_estimate(&v, Kind::Bond, LN_2, LN_2, 0.05, 200_000, 3).unwrap();
        assert!((d.value - 0.125).abs() < 3.0 * d.stderr + 1e-4, "{d:?}");
    }

    #[test]
    fn saturated_derivative_vanishes() {
        let v = builtin::grid(2, 3);
        let d = dmdbeta_estimate(&v, Kind::Bond, 30.0, 20.0, 0.3, 2000, 3).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn crn_beats_independent_samples() {
        let v = builtin::grid(2, 3);
        let (beta, h, delta, n) = (0.8, 0.3, 0.05, 20_000);
        let crn = dmdbeta_estimate(&v, Kind::Bond, beta, h, delta, n, 7).unwrap();
        let hi = crate::order_parameter::finite_volume_m(&v, Kind::Bond, beta + delta, h, n, 8).unwrap();
        let lo = crate::order_parameter::finite_volume_m(&v, Kind::Bond, beta - delta, h, n, 9).unwrap();
        let indep_se = hi.m.stderr.hypot(lo.m.stderr) / (2.0 * delta);
        assert!(crn.stderr < indep_se / 2.0, "{} vs {}", crn.stderr, indep_se);
    }

    #[test]
    fn variant_must_match_kind() {
        let v = builtin::k2();
        assert!(matches!(
            check_inequality_exact(Variant::Site1, &v, Kind::Bond, 1.0, 1.0),
            Err(Error::VariantMismatch { .. })
        ));
    }

    #[test]
    fn exact_inequalities_on_builtins() {
        for v in builtin::all() {
            for kind in [Kind::Bond, Kind::Site] {
                let law = ExactLaw::new(&v, kind).unwrap();
                for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
                    for h in [0.05, 0.25, 1.0, 4.0] {
                        let ing = law.ingredients(beta_of_p(p), h).unwrap();
                        for var in Variant::for_kind(kind) {
                            let r = ing.evaluate(var, None);
                            assert!(r.pass, "{} {var} p={p} h={h}: {}", v.name(), r.slack);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn large_h_bond2() {
        let v = builtin::grid(2, 3);
        let r = check_inequality_exact(Variant::Bond2, &v, Kind::Bond, 0.5, 40.0).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn z2_lambda8_subcritical() {
        let p = Arc::new(build_square_lattice(9).unwrap());
        let v = finite_volume(&p, 8).unwrap();
        let rs = check_inequalities(&v, Kind::Bond, beta_of_p(0.3), &[0.5, 0.1, 0.02], 20_000, 4).unwrap();
        assert_eq!(rs.len(), 6);
        for r in &rs {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn thin_window_error() {
        let p = Arc::new(build_square_lattice(3).unwrap());
        let hs: Vec<f64> = (0..6).map(|i| 1e-6 * 0.5f64.powi(i)).collect();
        match critical_exponent_fit(&p, Kind::Bond, beta_of_p(0.1), &hs, None, 50, 1) {
            Err(Error::ThinWindow { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn subcritical_slope_near_one() {
        let p = Arc::new(build_square_lattice(6).unwrap());
        let hs: Vec<f64> = (5..11).map(|i| 0.5f64.powi(i)).collect();
        let f = critical_exponent_fit(&p, Kind::Bond, beta_of_p(0.2), &hs, None, 20_000, 1).unwrap();
        assert!((f.slope - 1.0).abs() < 0.1, "{f:?}");
        assert!(!f.constraint_holds);
    }

    #[test]
    fn summary_counts() {
        let v = builtin::grid(2, 2);
        let rs: Vec<DiffIneqReport> = [0.2, 0.6]
            .iter()
            .flat_map(|&b| {
                Variant::for_kind(Kind::Site)
                    .map(|var| check_inequality_exact(var, &v, Kind::Site, b, 0.5).unwrap())
            })
            .collect();
        let s = summarize(&rs);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].cells, 2);
        assert_eq!(s[0].failures, 0);
    }

    #[test]
    fn site_factor_is_load_bearing() {
        let v = site_factor_stress_volume(10, 80).unwrap();
        assert_eq!(v.graph().bfs_distances(0).iter().max().copied(), Some(v.l() as u32));
        let (beta, h) = (0.71, 0.05);
        // M is nearly linear in p here, so a wide step costs no bias
        let ing = Ingredients::sample(&v, Kind::Site, beta, &[h], 0.05, 25_000, 1).unwrap().remove(0);
        let right = ing.evaluate(Variant::Site2, None);
        let wrong = ing.evaluate(Variant::Site2, Some(beta));
        assert!(right.pass, "{right:?}");
        assert!(wrong.slack < -3.0 * wrong.slack_stderr, "{wrong:?}");
    }
}
