//! Builds one patch of each family, checks it, and prints ball growth
//! around the fundamental domain.
use std::sync::Arc;

use percolab::graph::PatchFamily;
use percolab::volume::finite_volume;

fn main() -> percolab::Result<()> {
    for family in [PatchFamily::Square, PatchFamily::SubdividedSquare, PatchFamily::RegularTree { degree: 3 }] {
        let patch = Arc::new(family.patch_for_volume(6)?);
        patch.validate()?;
        let x = patch.fundamental_domain[0];
        let balls: Vec<usize> = (0..=patch.exact_radius.min(6)).map(|r| patch.graph.ball(x, r).len()).collect();
        println!(
            "{:<22} {:>6} vertices, {} orbit(s), exact radius {}, |B(x, r)| = {balls:?}",
            patch.name(),
            patch.vertex_count(),
            patch.orbit_count,
            patch.exact_radius
        );
        for l in [2, 4, 6] {
            let v = finite_volume(&patch, l)?;
            println!("    Λ_{l}: {} vertices, {} edges, roots {:?}", v.vertex_count(), v.edge_count(), v.roots());
        }
    }
    // the text format round-trips through graph_from_text
    let small = PatchFamily::Square.patch_for_volume(1)?;
    print!("{}", small.to_text());
    Ok(())
}
