//! Linear case against the method-of-images solution, at two resolutions.

use neumann_pme::graph::MonotoneGraph;
use neumann_pme::harness::compare_densities;
use neumann_pme::mirror::{DensityField, Grid1D};
use neumann_pme::pde::{images_indicator, solve, SolveOptions};

fn main() -> neumann_pme::Result<()> {
    for (dx, dt) in [(1e-2, 1e-3), (5e-3, 5e-4)] {
        let grid = Grid1D::half_line(dx, 6.0)?;
        let u0 = DensityField::from_fn(grid, |x| if x < 1.0 { 1.0 } else { 0.0 })?;
        let traj = solve(&u0, &MonotoneGraph::identity(), &SolveOptions::new(0.5, dt))?;
        let exact = images_indicator(grid, 1.0, 0.5)?;
        let d = compare_densities(&traj.last().u, &exact, false)?;
        println!(
            "dx = {dx:.0e}, dt = {dt:.0e}: L1 = {:.3e}, W1 = {:.3e}, mass drift {:.1e}, Newton iterations {}",
            d.l1, d.w1, traj.conservation.max_mass_deviation, traj.solver.total_iterations
        );
    }
    Ok(())
}
