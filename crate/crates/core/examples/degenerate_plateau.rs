//! A stopped graph with data below the threshold, and with data above it.

use neumann_pme::graph::MonotoneGraph;
use neumann_pme::mirror::{DensityField, Grid1D};
use neumann_pme::pde::{solve, SolveOptions};

fn main() -> neumann_pme::Result<()> {
    let beta = MonotoneGraph::stopped_linear(2.0)?;
    let grid = Grid1D::half_line(0.01, 3.0)?;
    for (name, height, width) in [
        ("below threshold", 1.0, 1.0),
        ("above threshold", 4.0, 0.25),
    ] {
        let u0 = DensityField::from_fn(grid, |x| if x < width { height } else { 0.0 })?;
        let traj = solve(
            &u0,
            &beta,
            &SolveOptions::new(0.5, 1e-3).snapshots(&[0.1, 0.5]),
        )?;
        println!(
            "{name}: sup change {:.3e}, final sup {:.4}",
            traj.sup_change(),
            traj.last().u.sup()
        );
    }
    Ok(())
}
