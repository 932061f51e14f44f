use std::collections::HashSet;
use std::sync::Arc;

use percolab::exact::{self, events, EventTable};
use percolab::graph::{build_regular_tree, build_square_lattice, build_subdivided_square_lattice, GraphPatch, PatchFamily};
use percolab::longrange::{oriented_cluster_of, DirectedConfiguration};
use percolab::order_parameter::m_blue_exact;
use percolab::percolation::{all_cluster_sizes, cluster_of, sample, ClusterTable};
use percolab::rng::{SeedSpec, Stream};
use percolab::volume::{builtin, finite_volume, Kind};
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::Bond), Just(Kind::Site)]
}

fn family_strategy() -> impl Strategy<Value = PatchFamily> {
    prop_oneof![
        Just(PatchFamily::Square),
        Just(PatchFamily::SubdividedSquare),
        (3usize..=5).prop_map(|degree| PatchFamily::RegularTree { degree }),
    ]
}

fn ball_size(patch: &GraphPatch, x: usize, r: usize) -> usize {
    patch.graph.ball(x, r).len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn square_balls_match_closed_form(half in 2usize..12, r in 0usize..12) {
        let patch = build_square_lattice(half).unwrap();
        prop_assume!(r <= patch.exact_radius);
        for &x in &patch.fundamental_domain {
            prop_assert_eq!(ball_size(&patch, x, r), 2 * r * r + 2 * r + 1);
        }
    }

    #[test]
    fn tree_balls_match_closed_form(degree in 3usize..6, depth in 1usize..6, r in 0usize..6) {
        let patch = build_regular_tree(degree, depth).unwrap();
        prop_assume!(r <= patch.exact_radius);
        let expected = 1 + degree * ((degree - 1).pow(r as u32) - 1) / (degree - 2);
        for &x in &patch.fundamental_domain {
            prop_assert_eq!(ball_size(&patch, x, r), expected);
        }
    }

    #[test]
    fn subdivided_balls_match_closed_form(half in 2usize..8, r in 0usize..14) {
        let patch = build_subdivided_square_lattice(half).unwrap();
        prop_assume!(r <= patch.exact_radius);
        let corner = patch.fundamental_domain.iter().copied().find(|&v| patch.graph.degree(v) == 4).unwrap();
        let l1_ball = |k: usize| 2 * k * k + 2 * k + 1;
        // a lattice point sits at twice its L1 norm, an edge midpoint one
        // step beyond its nearer end; 2 N_k + 4k + 2 edges touch B(k)
        let mids = if r == 0 { 0 } else {
            let k = (r - 1) / 2;
            2 * l1_ball(k) + 4 * k + 2
        };
        prop_assert_eq!(ball_size(&patch, corner, r), l1_ball(r / 2) + mids);
    }

    #[test]
    fn volumes_are_nested_and_interior_degrees_kept(family in family_strategy(), l in 1usize..6) {
        let patch = Arc::new(family.patch_for_volume(l + 1).unwrap());
        let small = finite_volume(&patch, l).unwrap();
        let large = finite_volume(&patch, l + 1).unwrap();
        let outer: HashSet<usize> = large.parent_vertices().iter().copied().collect();
        prop_assert!(small.parent_vertices().iter().all(|v| outer.contains(v)));
        let d = patch.graph.bfs_distances_multi(&patch.fundamental_domain, None);
        for (local, &v) in small.parent_vertices().iter().enumerate() {
            if (d[v] as usize) < l {
                prop_assert_eq!(small.graph().degree(local), patch.graph.degree(v));
            }
        }
    }

    #[test]
    fn union_find_agrees_with_bfs(kind in kind_strategy(), p in 0.05f64..0.95, seed in any::<u64>(), replica in 0u64..1000) {
        let patch = Arc::new(build_square_lattice(6).unwrap());
        let v = finite_volume(&patch, 5).unwrap();
        let c = sample(&v, kind, p, SeedSpec::new(seed, replica, Stream::Percolation)).unwrap();
        let sizes = all_cluster_sizes(&v, &c).unwrap();
        for x in (0..v.vertex_count()).step_by(7) {
            let cl = cluster_of(&v, &c, x).unwrap();
            prop_assert!(cl.contains(&x));
            prop_assert_eq!(sizes[x], cl.len());
        }
    }

    #[test]
    fn coupled_sizes_grow_with_p_and_volume(kind in kind_strategy(), seed in any::<u64>()) {
        let patch = Arc::new(build_square_lattice(7).unwrap());
        let small = finite_volume(&patch, 3).unwrap();
        let large = finite_volume(&patch, 6).unwrap();
        let ps = [0.2, 0.45, 0.6, 0.8];
        let ts = ClusterTable::build(&small, kind, small.roots()[0], &ps, 64, seed).unwrap();
        let tl = ClusterTable::build(&large, kind, large.roots()[0], &ps, 64, seed).unwrap();
        for r in 0..64 {
            for i in 0..ps.len() {
                prop_assert!(ts.size(r, i) <= tl.size(r, i));
                if i > 0 {
                    prop_assert!(ts.size(r, i - 1) <= ts.size(r, i));
                }
            }
        }
        let d = tl.distribution(2);
        for n in 1..d.max_observed() {
            prop_assert!(d.tail(n + 1) <= d.tail(n));
        }
    }

    #[test]
    fn streams_and_replicas_give_distinct_generators(seed in any::<u64>(), a in 0u64..1_000_000, b in 0u64..1_000_000) {
        let ra = SeedSpec::new(seed, a, Stream::Percolation).counter_rng();
        let rb = SeedSpec::new(seed, b, Stream::Percolation).counter_rng();
        let rs = SeedSpec::new(seed, a, Stream::Blue).counter_rng();
        let first = |r: &percolab::rng::CounterRng| (0..4).map(|k| r.bits(k)).collect::<Vec<_>>();
        if a != b {
            prop_assert_ne!(first(&ra), first(&rb));
        }
        prop_assert_ne!(first(&ra), first(&rs));
        prop_assert_eq!(first(&ra), first(&SeedSpec::new(seed, a, Stream::Percolation).counter_rng()));
    }

    #[test]
    fn directed_reachability(n in 2usize..12, links in proptest::collection::vec((0usize..12, 0usize..12, any::<bool>()), 0..30)) {
        let links: Vec<_> = links.into_iter().filter(|&(u, y, _)| u < n && y < n && u != y).collect();
        let unoriented: Vec<_> = links.iter().filter(|l| !l.2).map(|&(u, y, _)| (u.min(y), u.max(y))).collect();
        let oriented: Vec<_> = links.iter().filter(|l| l.2).map(|&(u, y, _)| (u, y)).collect();
        let c = DirectedConfiguration::from_links(n, unoriented.clone(), oriented).unwrap();
        let reach: Vec<HashSet<usize>> = (0..n).map(|x| oriented_cluster_of(&c, x).unwrap().into_iter().collect()).collect();
        for x in 0..n {
            prop_assert!(reach[x].contains(&x));
            for &y in &reach[x] {
                prop_assert!(reach[y].is_subset(&reach[x]));
            }
        }
        // with no oriented links reachability is symmetric connectivity
        let plain = DirectedConfiguration::from_links(n, unoriented, Vec::new()).unwrap();
        for x in 0..n {
            for y in oriented_cluster_of(&plain, x).unwrap() {
                prop_assert!(oriented_cluster_of(&plain, y).unwrap().contains(&x));
            }
        }
    }

    #[test]
    fn increasing_events_have_nonnegative_derivative(idx in 0usize..6, kind in kind_strategy(), n in 1usize..8) {
        let v = &builtin::all()[idx];
        prop_assume!(n <= v.vertex_count());
        let x = v.roots()[0];
        let e = events::cluster_at_least(v, kind, x, n).unwrap();
        let poly = EventTable::increasing(&e, e.deps()).unwrap().polynomial();
        for i in 1..100 {
            prop_assert!(poly.derivative(i as f64 / 100.0) >= -1e-12);
        }
    }

    #[test]
    fn order_parameter_monotone_on_exact_volumes(idx in 0usize..6, kind in kind_strategy(), beta in 0.05f64..3.0, h in 0.01f64..3.0) {
        let v = &builtin::all()[idx];
        let x = v.roots()[0];
        let m = m_blue_exact(v, kind, beta, h, x).unwrap();
        prop_assert!(m_blue_exact(v, kind, beta, h * 1.1, x).unwrap() > m);
        prop_assert!(m_blue_exact(v, kind, beta * 1.1, h, x).unwrap() >= m - 1e-12);
    }
}

/// For `n <= l` the law of `|C_x| >= n` does not see beyond `Λ_l`.
#[test]
fn nested_exact_tails_agree_up_to_l() {
    let cases: [(Arc<GraphPatch>, usize); 3] = [
        (Arc::new(build_square_lattice(4).unwrap()), 1),
        (Arc::new(build_regular_tree(3, 5).unwrap()), 2),
        (Arc::new(build_regular_tree(3, 5).unwrap()), 1),
    ];
    for (patch, l) in cases {
        for kind in [Kind::Bond, Kind::Site] {
            let a = finite_volume(&patch, l).unwrap();
            let b = finite_volume(&patch, l + 1).unwrap();
            let pa = exact::exact_cluster_distribution(&a, kind, a.roots()[0]).unwrap();
            let pb = exact::exact_cluster_distribution(&b, kind, b.roots()[0]).unwrap();
            for p in exact::default_p_grid() {
                let (da, db) = (exact::distribution_at(&pa, p), exact::distribution_at(&pb, p));
                for n in 1..=l {
                    assert!((da.tail(n) - db.tail(n)).abs() < 1e-12, "{} l={l} n={n} p={p}", patch.name());
                }
            }
        }
    }
}
