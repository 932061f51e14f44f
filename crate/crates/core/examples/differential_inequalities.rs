//! Both differential inequalities on a Z² volume across p, with their
//! slack in units of its standard error.
use std::sync::Arc;

use percolab::diffineq::check_inequalities;
use percolab::graph::build_square_lattice;
use percolab::rng::beta_of_p;
use percolab::volume::{finite_volume, Kind};

fn main() -> percolab::Result<()> {
    let patch = Arc::new(build_square_lattice(9)?);
    let v = finite_volume(&patch, 8)?;
    for kind in [Kind::Bond, Kind::Site] {
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for r in check_inequalities(&v, kind, beta_of_p(p), &[1.0, 0.25, 0.05], 20_000, 9)? {
                println!(
                    "{:<6} p={p} h={:<5} lhs {:.5} rhs {:.5} slack/se {:>8.1} {}",
                    r.variant.name(),
                    r.h,
                    r.lhs.value,
                    r.rhs.value,
                    r.slack / r.slack_stderr.max(1e-300),
                    if r.pass { "ok" } else { "VIOLATED" }
                );
            }
        }
    }
    Ok(())
}
