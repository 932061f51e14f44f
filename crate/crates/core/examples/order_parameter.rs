//! The order parameter M(β, h) two ways: through the cluster law and
//! through blue sites. Exact on a small graph, Monte Carlo on Z².
use std::sync::Arc;

use percolab::graph::build_square_lattice;
use percolab::order_parameter::{m_blue_exact, m_blue_mc, order_parameter_curve};
use percolab::rng::beta_of_p;
use percolab::volume::{builtin, finite_volume, Kind};

fn main() -> percolab::Result<()> {
    let g = builtin::grid(2, 3);
    let beta = 2f64.ln();
    for h in [0.1, 0.5, 2.0] {
        let exact = m_blue_exact(&g, Kind::Bond, beta, h, 0)?;
        let mc = m_blue_mc(&g, Kind::Bond, beta, h, 0, 50_000, 3)?;
        println!("grid2x3 h={h:<4} exact {exact:.6}  blue-site MC {:.6} ± {:.6}", mc.value, mc.stderr);
    }
    let patch = Arc::new(build_square_lattice(17)?);
    let v = finite_volume(&patch, 16)?;
    let hs = [1.0, 0.3, 0.1, 0.03, 0.01];
    for p in [0.4, 0.5, 0.6] {
        let pts = order_parameter_curve(&v, Kind::Bond, beta_of_p(p), &hs, 20_000, 3)?;
        let row: Vec<String> = pts.iter().map(|q| format!("{:.4}", q.m.value)).collect();
        println!("Z² Λ_16 p={p}: M at h={hs:?} = [{}]", row.join(", "));
    }
    Ok(())
}
