//! Long-range percolation on Z² with exponentially decaying couplings:
//! the truncation bound, its schedule, and a modification check.
use std::sync::Arc;

use percolab::graph::build_square_lattice;
use percolab::longrange::{build_longrange_spec, check_long_model_bound, check_long_range_modification, schedule, BoundForm, KernelPair, LongRangeVolume};

fn main() -> percolab::Result<()> {
    let patch = Arc::new(build_square_lattice(18)?);
    let spec = Arc::new(build_longrange_spec(&patch, KernelPair::exponential(1.0, 0.5))?);
    println!("J0 = {:.4}, couplings negligible beyond r = {}", spec.j0, spec.truncation_radius);
    println!("schedule L_n: {:?}", schedule(&spec, 200).iter().take(5).collect::<Vec<_>>());
    let beta = 0.3 / spec.j0;
    for l in [4, 8, 16] {
        let b = spec.truncation(l);
        println!("l = {l:>2}: n_l = {}, g_l = {:.3e}, f_l(h=0.1) = {:.3e}", b.n_l, b.g(beta), b.f(beta, 0.1));
    }
    let small = LongRangeVolume::new(&spec, 4)?;
    let large = LongRangeVolume::new(&spec, 17)?;
    for r in check_long_model_bound(&small, &large, beta, &[2, 3, 4], BoundForm::PerK, 10_000, 8)? {
        println!("k = {}: P(|C| >= k) = {:.4}, P(|C^Λ4| >= k) + g = {:.4}, slack {:+.4} ± {:.4}", r.k, r.lhs, r.rhs, r.slack, r.stderr);
    }
    let y = small.volume.vertex_count() - 1;
    let m = check_long_range_modification(&small, beta, 0.5, y, 10_000, 8)?;
    println!("modification at y = {y}: M_y {:.4}, M_x {:.4}, correction {:.2e}, pass {}", m.m_y, m.m_x, m.correction, m.pass);
    Ok(())
}
