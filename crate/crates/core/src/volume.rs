//! Finite volumes `Λ_l`: the union of radius-`l` balls around the
//! fundamental domain, with the induced edges.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, GraphPatch, UNREACHABLE};

/// Bond or site percolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Bond,
    Site,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Bond => "bond",
            Kind::Site => "site",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bond" => Ok(Kind::Bond),
            "site" => Ok(Kind::Site),
            _ => Err(invalid("kind", format!("expected bond or site, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A finite graph on which percolation is actually sampled.
///
/// Volumes cut from a patch remember the parent index of every vertex and
/// edge; random streams are keyed by those parent indices, so nested volumes
/// of the same patch see the same configuration on their common elements.
#[derive(Debug, Clone)]
pub struct FiniteVolume {
    name: String,
    graph: Graph,
    radius: Option<usize>,
    parent: Option<Arc<GraphPatch>>,
    parent_vertex: Vec<usize>,
    parent_edge: Vec<usize>,
    orbit_label: Vec<u32>,
    roots: Vec<usize>,
    max_degree: usize,
}

/// `Λ_l` of `patch`, requiring `1 <= l <= exact_radius - 1`.
pub fn finite_volume(patch: &Arc<GraphPatch>, l: usize) -> Result<FiniteVolume> {
    if l == 0 {
        return Err(invalid("l", "volume radius must be at least 1"));
    }
    if l + 1 > patch.exact_radius {
        return Err(Error::VolumeTooLarge {
            l,
            required: l + 1,
            available: patch.exact_radius,
        });
    }
    let dist = patch
        .graph
        .bfs_distances_multi(&patch.fundamental_domain, Some(l));
    let vertices: Vec<usize> = (0..patch.vertex_count())
        .filter(|&v| dist[v] != UNREACHABLE)
        .collect();
    let (graph, parent_edge) = patch.graph.induced(&vertices);
    let mut local = vec![usize::MAX; patch.vertex_count()];
    for (i, &v) in vertices.iter().enumerate() {
        local[v] = i;
    }
    let roots = patch.fundamental_domain.iter().map(|&x| local[x]).collect();
    let orbit_label = vertices.iter().map(|&v| patch.orbit_label[v]).collect();
    Ok(FiniteVolume {
        name: format!("{}_L{}", patch.name(), l),
        graph,
        radius: Some(l),
        parent: Some(Arc::clone(patch)),
        parent_vertex: vertices,
        parent_edge,
        orbit_label,
        roots,
        max_degree: patch.graph.max_degree(),
    })
}

impl FiniteVolume {
    /// A free-standing graph used as its own volume. `roots` play the role of
    /// the fundamental domain and `l` is the nominal radius entering the
    /// `e^{-lh}` correction terms.
    pub fn standalone(name: &str, graph: Graph, roots: Vec<usize>, l: usize) -> Result<Self> {
        for &r in &roots {
            graph.check_vertex(r)?;
        }
        if roots.is_empty() {
            return Err(invalid("roots", "need at least one root"));
        }
        let n = graph.vertex_count();
        let m = graph.edge_count();
        let mut orbit_label = vec![0u32; n];
        for (k, &r) in roots.iter().enumerate() {
            orbit_label[r] = k as u32;
        }
        Ok(Self {
            name: name.to_string(),
            max_degree: graph.max_degree(),
            graph,
            radius: Some(l),
            parent: None,
            parent_vertex: (0..n).collect(),
            parent_edge: (0..m).collect(),
            orbit_label,
            roots,
        })
    }

    /// Same graph, different root set.
    pub fn with_roots(&self, roots: Vec<usize>) -> Result<Self> {
        for &r in &roots {
            self.graph.check_vertex(r)?;
        }
        Ok(Self {
            roots,
            ..self.clone()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn parent(&self) -> Option<&Arc<GraphPatch>> {
        self.parent.as_ref()
    }

    /// The radius `l`.
    pub fn l(&self) -> usize {
        self.radius.unwrap_or(0)
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn element_count(&self, kind: Kind) -> usize {
        match kind {
            Kind::Bond => self.edge_count(),
            Kind::Site => self.vertex_count(),
        }
    }

    /// Local indices of the fundamental-domain vertices.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Maximal vertex degree of the underlying infinite graph (or of the
    /// standalone graph itself).
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn orbit_label(&self, v: usize) -> u32 {
        self.orbit_label[v]
    }

    /// Root sharing the orbit of local vertex `y`.
    pub fn representative(&self, y: usize) -> usize {
        let o = self.orbit_label[y];
        self.roots
            .iter()
            .copied()
            .find(|&r| self.orbit_label[r] == o)
            .unwrap_or(self.roots[0])
    }

    pub fn parent_vertex(&self, v: usize) -> usize {
        self.parent_vertex[v]
    }

    pub fn parent_vertices(&self) -> &[usize] {
        &self.parent_vertex
    }

    pub fn parent_edge(&self, e: usize) -> usize {
        self.parent_edge[e]
    }

    /// Random-stream counter of element `i` (edge for bond, vertex for site).
    #[inline]
    pub fn element_key(&self, kind: Kind, i: usize) -> u64 {
        match kind {
            Kind::Bond => self.parent_edge[i] as u64,
            Kind::Site => self.parent_vertex[i] as u64,
        }
    }

    pub fn local_of_parent(&self, v: usize) -> Option<usize> {
        self.parent_vertex.binary_search(&v).ok()
    }

    /// Distances from local vertex `x` measured in the parent patch (the
    /// ambient graph), restricted to this volume.
    pub fn ambient_distances(&self, x: usize) -> Vec<u32> {
        match &self.parent {
            Some(p) => {
                let d = p.graph.bfs_distances(self.parent_vertex[x]);
                self.parent_vertex.iter().map(|&v| d[v]).collect()
            }
            None => self.graph.bfs_distances(x),
        }
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        self.graph.check_vertex(v)
    }
}

/// Tiny graphs used by the exact oracle.
pub mod builtin {
    use super::*;
    use crate::graph::build_subdivided_square_lattice;

    fn standalone(name: &str, n: usize, edges: &[(usize, usize)], root: usize) -> FiniteVolume {
        let g = Graph::from_edges(n, edges).expect("builtin graph");
        FiniteVolume::standalone(name, g, vec![root], 1).expect("builtin root")
    }

    pub fn k2() -> FiniteVolume {
        standalone("K2", 2, &[(0, 1)], 0)
    }

    /// Path `0 - 1 - 2` rooted at the endpoint 0.
    pub fn path3() -> FiniteVolume {
        standalone("path3", 3, &[(0, 1), (1, 2)], 0)
    }

    pub fn triangle() -> FiniteVolume {
        standalone("triangle", 3, &[(0, 1), (1, 2), (0, 2)], 0)
    }

    /// The 4-cycle `0-1-2-3-0`.
    pub fn cycle4() -> FiniteVolume {
        standalone("cycle4", 4, &[(0, 1), (1, 2), (2, 3), (0, 3)], 0)
    }

    /// `rows x cols` grid block rooted at a corner.
    pub fn grid(rows: usize, cols: usize) -> FiniteVolume {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        standalone(&format!("grid{rows}x{cols}"), rows * cols, &edges, 0)
    }

    /// The 3x3 block of the subdivided square lattice (21 vertices, 24
    /// edges), rooted at its centre, with both fundamental-domain vertices
    /// as roots.
    pub fn subdivided_square() -> FiniteVolume {
        let p = build_subdivided_square_lattice(1).expect("patch");
        FiniteVolume::standalone(
            "subdivided_square",
            p.graph.clone(),
            p.fundamental_domain.clone(),
            1,
        )
        .expect("roots")
    }

    /// Every built-in oracle graph, in a fixed order.
    pub fn all() -> Vec<FiniteVolume> {
        vec![
            k2(),
            path3(),
            triangle(),
            cycle4(),
            grid(2, 2),
            grid(2, 3),
            subdivided_square(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_regular_tree, build_square_lattice, build_subdivided_square_lattice};

    #[test]
    fn plus_shape() {
        let p = Arc::new(build_square_lattice(3).unwrap());
        let v = finite_volume(&p, 1).unwrap();
        assert_eq!(v.vertex_count(), 5);
        assert_eq!(v.edge_count(), 4);
        assert_eq!(v.graph().degree(v.roots()[0]), 4);
    }

    #[test]
    fn too_large_is_rejected() {
        let p = Arc::new(build_square_lattice(3).unwrap());
        match finite_volume(&p, 3) {
            Err(Error::VolumeTooLarge { required, .. }) => assert_eq!(required, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(finite_volume(&p, 2).is_ok());
    }

    #[test]
    fn subdivided_union_of_balls() {
        let p = Arc::new(build_subdivided_square_lattice(2).unwrap());
        let v = finite_volume(&p, 1).unwrap();
        // origin ball: origin + 4 midpoints; anchor-midpoint ball adds (1,0)
        assert_eq!(v.vertex_count(), 6);
        assert_eq!(v.edge_count(), 5);
        assert_eq!(v.roots().len(), 2);
        assert_eq!(v.orbit_label(v.roots()[1]), 1);
    }

    #[test]
    fn tree_volume() {
        let p = Arc::new(build_regular_tree(3, 4).unwrap());
        let v = finite_volume(&p, 3).unwrap();
        assert_eq!(v.vertex_count(), 1 + 3 + 6 + 12);
        assert_eq!(v.max_degree(), 3);
    }

    #[test]
    fn builtin_sizes() {
        let sizes: Vec<(usize, usize)> = builtin::all()
            .iter()
            .map(|v| (v.vertex_count(), v.edge_count()))
            .collect();
        assert_eq!(
            sizes,
            vec![(2, 1), (3, 2), (3, 3), (4, 4), (4, 4), (6, 7), (21, 24)]
        );
    }
}
