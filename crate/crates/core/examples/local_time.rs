//! Local time at the wall for Brownian motion: the whole-line estimate is
//! half the reflected one, and its mean matches E|W_t|.

use neumann_pme::graph::MonotoneGraph;
use neumann_pme::mirror::{DensityField, Grid1D};
use neumann_pme::particle::{simulate, ParticleConfig, Scheme};

fn main() -> neumann_pme::Result<()> {
    let u0 = DensityField::from_fn(Grid1D::half_line(0.1, 1.0)?, |_| 1.0)?;
    let base = ParticleConfig {
        n: 20_000,
        dt: 1e-4,
        t_final: 1.0,
        extent: 8.0,
        local_time_eps: Some(0.02),
        start_at_origin: true,
        snapshot_times: vec![],
        ..Default::default()
    };
    let y = simulate(
        &u0,
        &MonotoneGraph::identity(),
        &ParticleConfig {
            scheme: Scheme::WholelineFold,
            ..base.clone()
        },
    )?;
    let x = simulate(
        &u0,
        &MonotoneGraph::identity(),
        &ParticleConfig {
            scheme: Scheme::DirectReflect,
            seed: 2,
            ..base
        },
    )?;
    let ly = y.local_time.as_ref().unwrap();
    let lx = x.local_time.as_ref().unwrap();
    for (i, t) in ly.times.iter().enumerate().step_by(20) {
        println!(
            "t = {t:.2}: L^Y {:.4}  L^X {:.4}  sqrt(2t/pi) {:.4}",
            ly.symmetric[i],
            lx.one_sided[i],
            (2.0 * t / std::f64::consts::PI).sqrt()
        );
    }
    println!(
        "ratio L^Y / L^X at t = 1: {:.4}",
        ly.final_symmetric() / lx.final_one_sided()
    );
    Ok(())
}
