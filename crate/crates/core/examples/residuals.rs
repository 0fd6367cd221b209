//! Test-function residuals of a solver trajectory, and the cutoff ladder
//! for a function whose derivative does not vanish at the wall.

use neumann_pme::graph::MonotoneGraph;
use neumann_pme::mirror::{DensityField, Grid1D};
use neumann_pme::pde::{solve, SolveOptions};
use neumann_pme::testfn::{
    cutoff_ladder, equivalence_constant, make_bump, residual_suite, standard_family, ResidualForm,
};

fn main() -> neumann_pme::Result<()> {
    let grid = Grid1D::half_line(5e-3, 5.0)?;
    let u0 = DensityField::from_fn(grid, |x| if x < 1.0 { 1.0 } else { 0.0 })?;
    let traj = solve(
        &u0,
        &MonotoneGraph::saturating(),
        &SolveOptions::new(0.5, 5e-4).snapshots(&[0.25, 0.5]),
    )?;
    let family = standard_family();
    let rep = residual_suite(&traj, &family, &[0.25, 0.5])?;
    for form in [
        ResidualForm::Generalized,
        ResidualForm::Weak,
        ResidualForm::BoundaryCorrected,
    ] {
        println!("max |{form:?} residual| = {:.3e}", rep.max_abs(form));
    }
    println!(
        "|generalized - weak| <= C dx with C = {:.3e}",
        equivalence_constant(&traj, &family, &[0.5])?
    );
    for r in cutoff_ladder(
        &traj,
        &make_bump(0.5, 1.0, false)?,
        &[0.2, 0.1, 0.05, 0.025],
        0.5,
    )? {
        println!(
            "eps = {:<6} mass gap {:.3e}  flux gap {:.3e}",
            r.eps, r.mass_gap, r.flux_gap
        );
    }
    Ok(())
}
