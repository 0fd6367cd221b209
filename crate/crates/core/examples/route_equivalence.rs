//! Direct Neumann solve against the mirror route for three graphs.

use neumann_pme::harness::{route_equivalence, ExperimentConfig, GraphSpec};

fn main() -> neumann_pme::Result<()> {
    let base = ExperimentConfig::from_toml_str(
        r#"
        [graph]
        kind = "identity"
        [initial]
        kind = "triangle"
        center = 0.5
        half_width = 0.5
        [domain]
        x_max = 5.0
        dx = 0.01
        [time]
        t_final = 0.5
        dt = 1e-3
        snapshots = [0.1, 0.25]
        "#,
    )?;
    for g in [
        GraphSpec::Identity,
        GraphSpec::StoppedLinear { u_c: 1.0 },
        GraphSpec::Saturating,
    ] {
        let cfg = ExperimentConfig {
            graph: g.clone(),
            ..base.clone()
        };
        let r = route_equivalence(&cfg)?;
        let gaps: Vec<String> = r
            .gaps
            .iter()
            .map(|x| format!("t={} {:.1e}", x.time, x.l1))
            .collect();
        println!("{g:?}: {}", gaps.join(", "));
    }
    Ok(())
}
