//! Even extension of the half-line problem and restriction back.

use neumann_pme::graph::MonotoneGraph;
use neumann_pme::mirror::{
    check_even, extend_beta, extend_initial, restrict_solution, DensityField, Grid1D,
};

fn main() -> neumann_pme::Result<()> {
    let grid = Grid1D::half_line(0.25, 2.0)?;
    let u0 = DensityField::from_fn(grid, |x| if x < 1.0 { 1.0 } else { 0.0 })?;
    let ubar = extend_initial(&u0)?;
    println!("half-line values {:?}", u0.values());
    println!("extended values  {:?}", ubar.values());
    println!(
        "mass {} -> {}, asymmetry {}",
        u0.mass(),
        ubar.mass(),
        check_even(&ubar)?
    );
    let back = restrict_solution(&ubar)?;
    println!("restricted back  {:?}", back.values());
    let b = MonotoneGraph::saturating();
    let bb = extend_beta(&b);
    for u in [0.25, 0.5, 1.0] {
        println!(
            "beta({}) = {:.6}, bar beta({u}) = {:.6}",
            2.0 * u,
            b.eval(2.0 * u)?.mid(),
            bb.eval(u)?.mid()
        );
    }
    Ok(())
}
