//! Reflected particle system against the PDE for a nonlinear graph.

use neumann_pme::graph::MonotoneGraph;
use neumann_pme::harness::{compare_densities, resample};
use neumann_pme::mirror::{DensityField, Grid1D};
use neumann_pme::particle::{simulate, ParticleConfig, Scheme};
use neumann_pme::pde::{solve, SolveOptions};

fn main() -> neumann_pme::Result<()> {
    let beta = MonotoneGraph::saturating();
    let grid = Grid1D::half_line(0.01, 6.0)?;
    let u0 = DensityField::from_fn(grid, |x| if x < 1.0 { 1.0 } else { 0.0 })?;
    let traj = solve(
        &u0,
        &beta,
        &SolveOptions::new(0.5, 1e-3).snapshots(&[0.1, 0.5]),
    )?;
    for scheme in [Scheme::DirectReflect, Scheme::WholelineFold] {
        let cfg = ParticleConfig {
            n: 50_000,
            scheme,
            snapshot_times: vec![0.1, 0.5],
            ..Default::default()
        };
        let run = simulate(&u0, &beta, &cfg)?;
        for snap in &run.snapshots {
            let pde = resample(&traj.at(snap.time)?.u, *snap.density.grid())?;
            let d = compare_densities(&snap.density, &pde, false)?;
            println!(
                "{scheme:?} t = {}: L1 {:.4}, W1 {:.4}",
                snap.time, d.l1, d.w1
            );
        }
    }
    Ok(())
}
