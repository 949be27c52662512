//! Risk accounting for a trained point: the empirical weak primal-dual risk
//! (how far from a saddle of the sample objective), its population
//! counterpart, both generalization gaps, and the guarantee that links the
//! gap to measured stability.
//!
//!     cargo run --example risk_reports

use sgda_lab::data::{generate, make_neighbor, DataParams};
use sgda_lab::engine::{RecordLevel, RunConfig, SampleStream, Schedule};
use sgda_lab::problems::{make_problem, ProblemParams, QuadScscParams};
use sgda_lab::stability::{
    flattened_samples, generalization_gaps, run_coupled, weak_pd_risk,
};
use sgda_lab::topology::{build_topology, TopologyKind, Weighting};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams::default()))?;
    let m = 4;
    let n = 200;
    let w = build_topology(TopologyKind::Complete, m, Weighting::Metropolis)?;
    let dataset = generate(&problem, m, n, &DataParams::default(), 0x9B)?;
    let flat = flattened_samples(&dataset);

    // The quadratic admits an exact saddle of the empirical objective; the
    // weak primal-dual risk is zero exactly there and positive elsewhere.
    let saddle = problem.saddle(&flat)?;
    println!(
        "analytic saddle: x = {:?}, y = {:?} (gradient residual {:.1e})",
        saddle.x, saddle.y, saddle.residual
    );
    let at_saddle = weak_pd_risk(&problem, &flat, &saddle.x, &saddle.y)?;
    println!("weak risk at the saddle    = {:.3e}", at_saddle.value);
    let off = weak_pd_risk(&problem, &flat, &[0.4], &[-0.2])?;
    println!("weak risk at (0.4, -0.2)   = {:.3e}", off.value);

    // Train on the dataset and audit the trained point.
    let schedule = Schedule::Fixed { c: 0.05 };
    let config = RunConfig {
        rounds: 40,
        local_steps: 5,
        seed: 0x9B,
        projection: problem.spec.radius_x.zip(problem.spec.radius_y),
        record_level: RecordLevel::Final,
    };
    let pair = make_neighbor(&dataset, 0x9C);
    let outcome = run_coupled(&problem, &pair, &w, &schedule, &config, &SampleStream::new(0x9B))?;
    let (x, y) = (&outcome.output_first.0, &outcome.output_first.1);
    println!("\ntrained point: x = {x:?}, y = {y:?}");
    println!("measured argument stability of this pair = {:.3e}", outcome.argument);

    // Population risks are exact moments for this problem class; the Monte
    // Carlo budget only matters for classes without closed-form moments.
    let gaps = generalization_gaps(&problem, &pair.s, x, y, 20_000, 0x9D)?;
    println!("\nweak primal-dual risk:");
    println!("  empirical  = {:.4e}", gaps.weak_empirical.value);
    println!("  population = {:.4e}", gaps.weak_population.value);
    println!("  gap        = {:+.4e}", gaps.weak_gap);
    println!("excess primal risk:");
    println!("  empirical  = {:.4e}", gaps.excess_primal_empirical.value);
    println!("  population = {:.4e}", gaps.excess_primal_population.value);
    println!("  gap        = {:+.4e}", gaps.excess_primal_gap);

    // The generalization guarantee: the weak gap is bounded by
    // sqrt(2) * G * (argument stability).
    let allowance = std::f64::consts::SQRT_2 * problem.spec.grad_bound * outcome.argument;
    println!("\nstability-based allowance for the weak gap = {allowance:.4e}");
    println!("measured weak gap {} the allowance", if gaps.weak_gap <= allowance { "respects" } else { "exceeds" });
    Ok(())
}
