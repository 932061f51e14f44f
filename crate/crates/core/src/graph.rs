//! Finite patches of quasi-transitive graphs.
//!
//! Infinite graphs only ever appear through a [`GraphPatch`]: a finite piece
//! carrying orbit labels, a fundamental domain (one vertex per orbit) and an
//! `exact_radius` r such that the ball `B(F, r)` around the fundamental
//! domain, together with every edge between its vertices, is present exactly
//! as in the infinite graph. Vertices are dense indices and edges are
//! canonical `(min, max)` pairs sorted lexicographically.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Sentinel distance for unreachable vertices in BFS tables.
pub const UNREACHABLE: u32 = u32::MAX;

/// Undirected simple graph in compressed adjacency form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<u32>,
    targets: Vec<u32>,
    edge_ids: Vec<u32>,
    edges: Vec<(u32, u32)>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicates and self loops are rejected.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut canon: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::VertexOutOfRange {
                    vertex: u.max(v),
                    vertex_count,
                });
            }
            if u == v {
                return Err(invalid("edges", format!("self loop at {u}")));
            }
            canon.push((u.min(v) as u32, u.max(v) as u32));
        }
        canon.sort_unstable();
        if canon.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("edges", "duplicate edge"));
        }

        let mut degree = vec![0u32; vertex_count];
        for &(u, v) in &canon {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = vec![0u32; vertex_count + 1];
        for v in 0..vertex_count {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill: Vec<u32> = offsets[..vertex_count].to_vec();
        let mut targets = vec![0u32; offsets[vertex_count] as usize];
        let mut edge_ids = vec![0u32; targets.len()];
        for (e, &(u, v)) in canon.iter().enumerate() {
            let (u, v) = (u as usize, v as usize);
            targets[fill[u] as usize] = v as u32;
            edge_ids[fill[u] as usize] = e as u32;
            fill[u] += 1;
            targets[fill[v] as usize] = u as u32;
            edge_ids[fill[v] as usize] = e as u32;
            fill[v] += 1;
        }
        // neighbor lists sorted by neighbor index
        for v in 0..vertex_count {
            let (a, b) = (offsets[v] as usize, offsets[v + 1] as usize);
            let mut pairs: Vec<(u32, u32)> = targets[a..b]
                .iter()
                .copied()
                .zip(edge_ids[a..b].iter().copied())
                .collect();
            pairs.sort_unstable();
            for (i, (t, e)) in pairs.into_iter().enumerate() {
                targets[a + i] = t;
                edge_ids[a + i] = e;
            }
        }
        Ok(Self {
            offsets,
            targets,
            edge_ids,
            edges: canon,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(min, max)` endpoints of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        let (u, v) = self.edges[e];
        (u as usize, v as usize)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(u, v)| (u as usize, v as usize))
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }

    pub fn max_degree(&self) -> usize {
        (0..self.vertex_count())
            .map(|v| self.degree(v))
            .max()
            .unwrap_or(0)
    }

    /// Neighbor indices of `v`, sorted.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    /// Edge indices parallel to [`Graph::neighbors`].
    pub fn incident_edges(&self, v: usize) -> &[u32] {
        &self.edge_ids[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    /// `(neighbor, edge)` pairs of `v`.
    pub fn incidence(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors(v)
            .iter()
            .zip(self.incident_edges(v))
            .map(|(&w, &e)| (w as usize, e as usize))
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let nb = self.neighbors(u);
        nb.binary_search(&(v as u32))
            .ok()
            .map(|i| self.incident_edges(u)[i] as usize)
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: v,
                vertex_count: self.vertex_count(),
            })
        }
    }

    /// BFS distances from several sources, truncated at `max_radius`.
    pub fn bfs_distances_multi(&self, sources: &[usize], max_radius: Option<usize>) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.vertex_count()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        let cap = max_radius.map_or(u32::MAX - 1, |r| r as u32);
        while let Some(v) = queue.pop_front() {
            let d = dist[v];
            if d >= cap {
                continue;
            }
            for &w in self.neighbors(v) {
                let w = w as usize;
                if dist[w] == UNREACHABLE {
                    dist[w] = d + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn bfs_distances(&self, source: usize) -> Vec<u32> {
        self.bfs_distances_multi(&[source], None)
    }

    /// Shortest-path distance, `None` when no path exists.
    pub fn distance(&self, x: usize, y: usize) -> Option<usize> {
        let d = self.bfs_distances(x)[y];
        (d != UNREACHABLE).then_some(d as usize)
    }

    pub fn ball(&self, x: usize, r: usize) -> Vec<usize> {
        let dist = self.bfs_distances_multi(&[x], Some(r));
        (0..self.vertex_count())
            .filter(|&v| dist[v] != UNREACHABLE)
            .collect()
    }

    pub fn sphere(&self, x: usize, r: usize) -> Vec<usize> {
        let dist = self.bfs_distances_multi(&[x], Some(r));
        (0..self.vertex_count())
            .filter(|&v| dist[v] == r as u32)
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count() == 0
            || self.bfs_distances(0).iter().all(|&d| d != UNREACHABLE)
    }

    /// Subgraph induced on `vertices` (sorted, deduplicated). Returns the
    /// graph together with the parent index of each new edge.
    pub fn induced(&self, vertices: &[usize]) -> (Graph, Vec<usize>) {
        let mut local = vec![u32::MAX; self.vertex_count()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i as u32;
        }
        let mut edges = Vec::new();
        let mut parent_edges = Vec::new();
        for (e, (u, v)) in self.edges().enumerate() {
            if local[u] != u32::MAX && local[v] != u32::MAX {
                edges.push((local[u] as usize, local[v] as usize));
                parent_edges.push(e);
            }
        }
        let g = Graph::from_edges(vertices.len(), &edges).expect("induced subgraph is simple");
        // Graph::from_edges sorts canonically; the monotone relabelling keeps
        // the parent edge order, so parent_edges stays aligned.
        debug_assert!(g
            .edges()
            .zip(&parent_edges)
            .all(|((a, b), &pe)| self.edge(pe) == (vertices[a], vertices[b])));
        (g, parent_edges)
    }
}

/// Which generator produced a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PatchFamily {
    Square,
    SubdividedSquare,
    RegularTree { degree: usize },
}

impl PatchFamily {
    /// Smallest patch of this family whose `exact_radius` admits `Λ_l`.
    pub fn patch_for_volume(self, l: usize) -> Result<GraphPatch> {
        match self {
            PatchFamily::Square => build_square_lattice(l + 1),
            PatchFamily::SubdividedSquare => build_subdivided_square_lattice((l + 3) / 2),
            PatchFamily::RegularTree { degree } => build_regular_tree(degree, l + 1),
        }
    }

    pub fn name(self) -> String {
        match self {
            PatchFamily::Square => "square".into(),
            PatchFamily::SubdividedSquare => "subdivided_square".into(),
            PatchFamily::RegularTree { degree } => format!("tree{degree}"),
        }
    }

    /// Parses `square`, `subdivided_square` or `tree<d>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "square" | "z2" => Ok(PatchFamily::Square),
            "subdivided_square" | "subdivided" => Ok(PatchFamily::SubdividedSquare),
            _ => s
                .strip_prefix("tree")
                .and_then(|d| d.parse().ok())
                .map(|degree| PatchFamily::RegularTree { degree })
                .ok_or_else(|| invalid("family", format!("unknown patch family `{s}`"))),
        }
    }
}

/// Finite piece of a quasi-transitive graph.
#[derive(Debug, Clone)]
pub struct GraphPatch {
    pub family: PatchFamily,
    pub size_parameter: usize,
    pub graph: Graph,
    pub orbit_label: Vec<u32>,
    pub orbit_count: usize,
    pub fundamental_domain: Vec<usize>,
    pub exact_radius: usize,
}

impl GraphPatch {
    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn name(&self) -> String {
        format!("{}_{}", self.family.name(), self.size_parameter)
    }

    /// Fundamental-domain vertex sharing the orbit of `y`.
    pub fn representative(&self, y: usize) -> usize {
        self.fundamental_domain[self.orbit_label[y] as usize]
    }

    pub fn distance(&self, x: usize, y: usize) -> Result<Option<usize>> {
        self.graph.check_vertex(x)?;
        self.graph.check_vertex(y)?;
        Ok(self.graph.distance(x, y))
    }

    /// Checks the structural invariants that do not need the infinite graph.
    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        for v in 0..g.vertex_count() {
            for &w in g.neighbors(v) {
                if g.neighbors(w as usize).binary_search(&(v as u32)).is_err() {
                    return Err(invalid("adjacency", format!("{v}-{w} not symmetric")));
                }
            }
        }
        if self.orbit_label.len() != g.vertex_count() {
            return Err(invalid("orbit_label", "length mismatch"));
        }
        if self.fundamental_domain.len() != self.orbit_count {
            return Err(invalid("fundamental_domain", "needs one vertex per orbit"));
        }
        for (k, &x) in self.fundamental_domain.iter().enumerate() {
            if self.orbit_label[x] as usize != k {
                return Err(invalid(
                    "fundamental_domain",
                    format!("entry {k} has orbit {}", self.orbit_label[x]),
                ));
            }
        }
        if !g.is_connected() {
            return Err(invalid("graph", "patch is not connected"));
        }
        if self.exact_radius < 1 {
            return Err(invalid("exact_radius", "must be at least 1"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        graph_to_text(&self.graph, &self.orbit_label, self.orbit_count)
    }
}

fn grid_index(i: i64, j: i64, h: i64) -> usize {
    ((i + h) * (2 * h + 1) + (j + h)) as usize
}

fn grid_edges(h: i64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in -h..=h {
        for j in -h..=h {
            if i < h {
                edges.push((grid_index(i, j, h), grid_index(i + 1, j, h)));
            }
            if j < h {
                edges.push((grid_index(i, j, h), grid_index(i, j + 1, h)));
            }
        }
    }
    edges
}

/// `Z²` restricted to `[-h, h]²`; one orbit, origin as fundamental domain.
pub fn build_square_lattice(half_width: usize) -> Result<GraphPatch> {
    if half_width == 0 {
        return Err(invalid("half_width", "must be at least 1"));
    }
    let h = half_width as i64;
    let n = (2 * h + 1) as usize;
    let graph = Graph::from_edges(n * n, &grid_edges(h))?;
    Ok(GraphPatch {
        family: PatchFamily::Square,
        size_parameter: half_width,
        orbit_label: vec![0; n * n],
        orbit_count: 1,
        fundamental_domain: vec![grid_index(0, 0, h)],
        exact_radius: half_width,
        graph,
    })
}

/// `Z²` with every edge split by a midpoint vertex. Orbit 0 holds the
/// degree-4 lattice points, orbit 1 the degree-2 midpoints. The fundamental
/// domain is the origin and the midpoint of the edge from the origin to
/// `(1, 0)`.
pub fn build_subdivided_square_lattice(half_width: usize) -> Result<GraphPatch> {
    if half_width == 0 {
        return Err(invalid("half_width", "must be at least 1"));
    }
    let h = half_width as i64;
    let n = ((2 * h + 1) * (2 * h + 1)) as usize;
    let base = grid_edges(h);
    let mut edges = Vec::with_capacity(2 * base.len());
    let mut anchor_mid = usize::MAX;
    let origin = grid_index(0, 0, h);
    let right = grid_index(1, 0, h);
    for (k, &(u, v)) in base.iter().enumerate() {
        let mid = n + k;
        edges.push((u, mid));
        edges.push((v, mid));
        if (u.min(v), u.max(v)) == (origin.min(right), origin.max(right)) {
            anchor_mid = mid;
        }
    }
    let total = n + base.len();
    let graph = Graph::from_edges(total, &edges)?;
    let mut orbit_label = vec![0u32; total];
    orbit_label[n..].iter_mut().for_each(|o| *o = 1);
    Ok(GraphPatch {
        family: PatchFamily::SubdividedSquare,
        size_parameter: half_width,
        orbit_label,
        orbit_count: 2,
        fundamental_domain: vec![origin, anchor_mid],
        // boundary lattice points sit at distance >= 2h - 1 from the domain
        exact_radius: 2 * half_width - 1,
        graph,
    })
}

/// Ball of radius `depth` in the `degree`-regular tree, root first, BFS order.
pub fn build_regular_tree(degree: usize, depth: usize) -> Result<GraphPatch> {
    if degree < 3 {
        return Err(invalid("degree", "regular trees need degree >= 3"));
    }
    if depth == 0 {
        return Err(invalid("depth", "must be at least 1"));
    }
    let mut edges = Vec::new();
    let mut level: Vec<usize> = vec![0];
    let mut next_id = 1usize;
    for d in 0..depth {
        let children = if d == 0 { degree } else { degree - 1 };
        let mut next = Vec::with_capacity(level.len() * children);
        for &v in &level {
            for _ in 0..children {
                edges.push((v, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        level = next;
    }
    let graph = Graph::from_edges(next_id, &edges)?;
    Ok(GraphPatch {
        family: PatchFamily::RegularTree { degree },
        size_parameter: depth,
        orbit_label: vec![0; next_id],
        orbit_count: 1,
        fundamental_domain: vec![0],
        exact_radius: depth,
        graph,
    })
}

/// Line-based description: `vertices N orbits K`, then `v <orbit>` per
/// vertex in index order, then `e u v` per canonical edge in sorted order.
pub fn graph_to_text(graph: &Graph, orbit_label: &[u32], orbit_count: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "vertices {} orbits {}", graph.vertex_count(), orbit_count);
    for o in orbit_label {
        let _ = writeln!(s, "v {o}");
    }
    for (u, v) in graph.edges() {
        let _ = writeln!(s, "e {u} {v}");
    }
    s
}

/// Parsed form of [`graph_to_text`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDescription {
    pub graph: Graph,
    pub orbit_label: Vec<u32>,
    pub orbit_count: usize,
}

pub fn graph_from_text(text: &str) -> Result<GraphDescription> {
    let bad = |line: usize, reason: &str| Error::GraphFormat {
        line,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (ln, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "vertices" || h[2] != "orbits" {
        return Err(bad(ln + 1, "expected `vertices N orbits K`"));
    }
    let n: usize = h[1].parse().map_err(|_| bad(ln + 1, "bad vertex count"))?;
    let k: usize = h[3].parse().map_err(|_| bad(ln + 1, "bad orbit count"))?;
    let mut orbit_label = Vec::with_capacity(n);
    let mut edges = Vec::new();
    for (ln, line) in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["v", o] => {
                if !edges.is_empty() {
                    return Err(bad(ln + 1, "vertex line after edge lines"));
                }
                let o: u32 = o.parse().map_err(|_| bad(ln + 1, "bad orbit label"))?;
                if o as usize >= k {
                    return Err(bad(ln + 1, "orbit label out of range"));
                }
                orbit_label.push(o);
            }
            ["e", u, v] => {
                let u: usize = u.parse().map_err(|_| bad(ln + 1, "bad endpoint"))?;
                let v: usize = v.parse().map_err(|_| bad(ln + 1, "bad endpoint"))?;
                edges.push((u, v));
            }
            _ => return Err(bad(ln + 1, "expected `v <orbit>` or `e u v`")),
        }
    }
    if orbit_label.len() != n {
        return Err(bad(0, "vertex line count does not match header"));
    }
    let graph = Graph::from_edges(n, &edges).map_err(|e| bad(0, &e.to_string()))?;
    Ok(GraphDescription {
        graph,
        orbit_label,
        orbit_count: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts() {
        let p = build_square_lattice(1).unwrap();
        assert_eq!(p.vertex_count(), 9);
        assert_eq!(p.graph.edge_count(), 12);
        assert_eq!(p.orbit_count, 1);
        assert!(p.orbit_label.iter().all(|&o| o == 0));
        let p = build_square_lattice(2).unwrap();
        let n = 5;
        assert_eq!(p.vertex_count(), 25);
        assert_eq!(p.graph.edge_count(), 2 * n * (n - 1));
        assert_eq!(p.graph.degree(p.fundamental_domain[0]), 4);
        p.validate().unwrap();
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(build_square_lattice(0).is_err());
        assert!(build_subdivided_square_lattice(0).is_err());
        assert!(build_regular_tree(2, 3).is_err());
        assert!(build_regular_tree(3, 0).is_err());
    }

    #[test]
    fn subdivided_counts() {
        let p = build_subdivided_square_lattice(1).unwrap();
        // 9 grid points plus one midpoint per grid edge
        assert_eq!(p.vertex_count(), 9 + 12);
        assert_eq!(p.orbit_count, 2);
        let mid = p.fundamental_domain[1];
        assert_eq!(p.orbit_label[mid], 1);
        assert_eq!(p.graph.degree(mid), 2);
        assert_eq!(p.graph.degree(p.fundamental_domain[0]), 4);
        assert!(p.graph.neighbors(mid).contains(&(p.fundamental_domain[0] as u32)));
        p.validate().unwrap();
    }

    #[test]
    fn tree_counts() {
        assert_eq!(build_regular_tree(3, 2).unwrap().vertex_count(), 10);
        let star = build_regular_tree(3, 1).unwrap();
        assert_eq!(star.vertex_count(), 4);
        assert_eq!(star.graph.degree(0), 3);
        assert_eq!(build_regular_tree(4, 2).unwrap().vertex_count(), 1 + 4 + 12);
    }

    #[test]
    fn distances() {
        let p = build_square_lattice(1).unwrap();
        let o = p.fundamental_domain[0];
        assert_eq!(p.distance(o, o).unwrap(), Some(0));
        let nb = p.graph.neighbors(o)[0] as usize;
        assert_eq!(p.distance(o, nb).unwrap(), Some(1));
        assert_eq!(p.distance(0, 8).unwrap(), Some(4));
        assert!(p.distance(0, 99).is_err());
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        assert_eq!(g.distance(0, 2), None);
    }

    #[test]
    fn edge_lookup() {
        let p = build_square_lattice(2).unwrap();
        for (e, (u, v)) in p.graph.edges().enumerate() {
            assert_eq!(p.graph.edge_index(u, v), Some(e));
            assert_eq!(p.graph.edge_index(v, u), Some(e));
        }
        assert_eq!(p.graph.edge_index(0, 24), None);
    }

    #[test]
    fn text_roundtrip() {
        let p = build_subdivided_square_lattice(1).unwrap();
        let text = p.to_text();
        assert!(text.starts_with("vertices 21 orbits 2\n"));
        let d = graph_from_text(&text).unwrap();
        assert_eq!(d.graph, p.graph);
        assert_eq!(d.orbit_label, p.orbit_label);
        assert_eq!(graph_to_text(&d.graph, &d.orbit_label, d.orbit_count), text);
        assert!(graph_from_text("vertices 2 orbits 1\nv 0\n").is_err());
        assert!(graph_from_text("vertices 1 orbits 1\nv 3\n").is_err());
        assert!(graph_from_text("nodes 1\n").is_err());
    }
}
