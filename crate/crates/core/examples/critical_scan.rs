//! Brackets p_T and p_H for bond percolation on Z². Pass a family name
//! (`square`, `subdivided_square`, `tree3`) to scan another one.
use percolab::analysis::{grid, scan_critical, ScanConfig};
use percolab::graph::PatchFamily;
use percolab::volume::Kind;

fn main() -> percolab::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "square".into());
    let family = PatchFamily::parse(&name)?;
    let (ls, lo, hi) = match family {
        PatchFamily::Square => (vec![8, 16, 32], 0.40, 0.60),
        PatchFamily::SubdividedSquare => (vec![16, 32, 64], 0.60, 0.80),
        PatchFamily::RegularTree { .. } => (vec![4, 8, 12], 0.40, 0.70),
    };
    let r = scan_critical(family, Kind::Bond, &grid(lo, hi, 0.01)?, &ls, 4_000, 2, &ScanConfig::default())?;
    println!("{} l = {ls:?}", r.family);
    println!("p_T ~ {:.4} in [{:.4}, {:.4}]", r.p_t, r.p_t_bracket.0, r.p_t_bracket.1);
    println!("p_H ~ {:.4} in [{:.4}, {:.4}]", r.p_h, r.p_h_bracket.0, r.p_h_bracket.1);
    println!("gap {:.4}", r.verdict_gap);
    Ok(())
}
