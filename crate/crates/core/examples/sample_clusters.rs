//! Root cluster-size law of bond percolation on Z² at a few values of p,
//! all from one set of coupled samples.
use std::sync::Arc;

use percolab::graph::build_square_lattice;
use percolab::percolation::ClusterTable;
use percolab::volume::{finite_volume, Kind};

fn main() -> percolab::Result<()> {
    let patch = Arc::new(build_square_lattice(17)?);
    let v = finite_volume(&patch, 16)?;
    let ps = [0.3, 0.45, 0.5, 0.55, 0.7];
    let t = ClusterTable::build(&v, Kind::Bond, v.roots()[0], &ps, 20_000, 1)?;
    println!("{:>5} {:>12} {:>10} {:>10} {:>12}", "p", "E|C|", "P(>=10)", "P(>=100)", "P(reach S_16)");
    for (i, p) in ps.iter().enumerate() {
        let d = t.distribution(i);
        let mean = d.mean();
        let reach = t.reach_count(i, 16) as f64 / 20_000.0;
        println!("{p:>5} {:>7.2}±{:<4.2} {:>10.4} {:>10.4} {:>12.4}", mean.value, mean.stderr, d.tail(10), d.tail(100), reach);
    }
    Ok(())
}
