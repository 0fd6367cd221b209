//! Catalog graphs, their resolvents and the speed coefficient Φ = √(β/u).

use neumann_pme::graph::{classify, make_selection, phi_from_beta, MonotoneGraph, SelectionPolicy};

fn main() -> neumann_pme::Result<()> {
    let graphs = [
        MonotoneGraph::identity(),
        MonotoneGraph::stopped_linear(1.0)?,
        MonotoneGraph::saturating(),
        MonotoneGraph::jump(1.0, 0.5, 2.0)?,
    ];
    for b in &graphs {
        let phi = phi_from_beta(b);
        println!("{:<24} class {:?}", b.label(), classify(b));
        println!(
            "    Phi(0) in [{:.3}, {:.3}]",
            phi.value_at_zero().lo,
            phi.value_at_zero().hi
        );
        for y in [0.5, 1.0, 1.5, 3.0] {
            let (u, eta) = b.resolvent(0.5, y)?;
            println!("    (I + 0.5 beta)^-1({y}) = {u:.6}, eta = {eta:.6}");
        }
    }
    let jump = &graphs[3];
    for p in [
        SelectionPolicy::LeftLimit,
        SelectionPolicy::Midpoint,
        SelectionPolicy::RightLimit,
    ] {
        println!(
            "selection at the jump with {p:?}: {}",
            make_selection(jump, p).select(1.0)
        );
    }
    Ok(())
}
