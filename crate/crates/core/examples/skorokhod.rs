//! Reflection bookkeeping of the direct scheme: K only increases, X stays
//! non-negative and K grows only while X sits near the wall.

use neumann_pme::graph::MonotoneGraph;
use neumann_pme::mirror::{DensityField, Grid1D};
use neumann_pme::particle::{simulate, ParticleConfig, Scheme};

fn main() -> neumann_pme::Result<()> {
    let u0 = DensityField::from_fn(Grid1D::half_line(0.01, 3.0)?, |x| {
        if x < 1.0 {
            1.0
        } else {
            0.0
        }
    })?;
    for dt in [1e-2, 1e-3, 1e-4] {
        let cfg = ParticleConfig {
            n: 20_000,
            dt,
            scheme: Scheme::DirectReflect,
            snapshot_times: vec![],
            ..Default::default()
        };
        let run = simulate(&u0, &MonotoneGraph::saturating(), &cfg)?;
        let s = run.skorokhod.unwrap();
        println!(
            "dt = {dt:.0e}: monotone {} nonneg {} complementarity {:.2e} (5 sqrt(dt) = {:.2e}), E K_T {:.4}",
            s.monotone_ok,
            s.nonneg_ok,
            s.complementarity,
            5.0 * dt.sqrt(),
            s.mean_k
        );
    }
    Ok(())
}
