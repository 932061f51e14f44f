//! Exact cluster laws on the built-in graphs and the correlation
//! inequalities they satisfy.
use percolab::exact::{self, events, exact_cluster_distribution, EventTable};
use percolab::volume::{builtin, Kind};

fn main() -> percolab::Result<()> {
    let grid = exact::default_p_grid();
    for v in builtin::all().into_iter().take(6) {
        for kind in [Kind::Bond, Kind::Site] {
            let x = v.roots()[0];
            let polys = exact_cluster_distribution(&v, kind, x)?;
            let half = exact::distribution_at(&polys, 0.5);
            let law: Vec<String> = (1..polys.len()).map(|n| format!("{:.4}", half.prob(n))).collect();
            let all: Vec<usize> = (0..v.element_count(kind)).collect();
            let y = v.vertex_count() - 1;
            let a = EventTable::increasing(&events::connected(&v, kind, x, y)?, &all)?;
            let b = EventTable::increasing(&events::cluster_at_least(&v, kind, x, 2)?, &all)?;
            println!(
                "{:<9} {:<4} P(|C|=n) at p=1/2: [{}]  russo {:.1e}  fkg {:+.2e}  bk {:+.2e}",
                v.name(),
                kind.name(),
                law.join(", "),
                exact::russo_worst(&a, &grid),
                exact::fkg_worst(&a, &b, &grid),
                exact::bk_worst(&a, &b, &grid),
            );
        }
    }
    // polynomial coefficients: number of configurations by open count
    let k2 = builtin::path3();
    let e = events::connected(&k2, Kind::Bond, 0, 2)?;
    println!("path3, 0 <-> 2: {:?}", exact::enumerate_event(&k2, Kind::Bond, &e)?);
    Ok(())
}
