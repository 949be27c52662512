//! Surveys the built-in gossip topologies: their mixing constant lambda, the
//! constants derived from it, and how fast repeated gossip actually washes
//! out disagreement (the operator norm of W^k - averaging, which lambda^k
//! bounds exactly for these symmetric matrices).
//!
//!     cargo run --example topologies

use sgda_lab::topology::{
    build_topology, c_constant, deviation_norm, TopologyKind, Weighting,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Sizes chosen so every family accepts them (meshgrid wants a perfect
    // square, exponential a power of two).
    let families = [
        (TopologyKind::Complete, 16),
        (TopologyKind::Exponential, 16),
        (TopologyKind::Meshgrid, 16),
        (TopologyKind::Star, 16),
        (TopologyKind::Ring, 16),
    ];

    println!(
        "{:<12} {:>3} {:>10} {:>10} {:>12} {:>12}",
        "kind", "m", "lambda", "1/(1-l)", "C_l(0.75)", "C_l2(0.75)"
    );
    for (kind, m) in families {
        let w = build_topology(kind, m, Weighting::Metropolis)?;
        let l = w.lambda();
        println!(
            "{:<12} {:>3} {:>10.6} {:>10.4} {:>12.4} {:>12.4}",
            kind.name(),
            m,
            l,
            1.0 / (1.0 - l),
            c_constant(l, 0.75),
            c_constant(l * l, 0.75),
        );
    }

    // Spectral prediction vs. measured contraction, step by step.
    println!("\ngossip contraction on the ring of 16 (measured = lambda^k exactly):");
    let w = build_topology(TopologyKind::Ring, 16, Weighting::Metropolis)?;
    let l = w.lambda();
    println!("{:>3} {:>14} {:>14}", "k", "measured", "lambda^k");
    for k in 0..=8 {
        println!("{:>3} {:>14.6e} {:>14.6e}", k, deviation_norm(&w, k), l.powi(k as i32));
    }

    // The lazy-walk weighting exists only for regular graphs: stars and grids
    // have unequal degrees, so the builder refuses rather than producing an
    // asymmetric matrix.
    let err = build_topology(TopologyKind::Star, 16, Weighting::UniformNeighbor).unwrap_err();
    println!("\nuniform-neighbor weighting on a star: {err}");
    let ok = build_topology(TopologyKind::Ring, 16, Weighting::UniformNeighbor)?;
    println!("uniform-neighbor weighting on a ring:  lambda = {:.6}", ok.lambda());
    Ok(())
}
