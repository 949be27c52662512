//! Tracks disagreement between agents along a run and checks it against the
//! closed-form consensus guarantee: before the k-th local step of any round,
//! the mean deviation from the agent average stays below a bound built from
//! the rate, the gradient bound, and the topology's mixing constant.
//!
//!     cargo run --example consensus_tracking

use sgda_lab::bounds::{consensus_bound, consensus_case_for, BoundInputs};
use sgda_lab::data::{generate, DataParams};
use sgda_lab::engine::{run, RecordLevel, RunConfig, SampleStream, Schedule};
use sgda_lab::problems::{make_problem, ProblemParams, QuadScscParams};
use sgda_lab::topology::{build_topology, TopologyKind, Weighting};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams::default()))?;
    let m = 9;
    let rounds = 30;
    let local_steps = 8;
    let n = 40;
    let w = build_topology(TopologyKind::Star, m, Weighting::Metropolis)?;
    let schedule = Schedule::Fixed { c: 0.02 };

    let dataset = generate(&problem, m, n, &DataParams::default(), 0xCE)?;
    let config = RunConfig {
        rounds,
        local_steps,
        seed: 0xCE,
        projection: problem.spec.radius_x.zip(problem.spec.radius_y),
        record_level: RecordLevel::Full,
    };
    let traj = run(&problem, &dataset, &w, &schedule, &config, &SampleStream::new(0xCE))?;

    let inputs = BoundInputs::from_run(&problem, &w, &schedule, rounds, local_steps, n)?;
    let case = consensus_case_for(&schedule);
    println!(
        "star of {m}: lambda = {:.4}, fixed rate {}, {} local steps per round",
        inputs.lambda, 0.02, local_steps
    );

    // Worst measured-to-bound ratio per local-step index, across all rounds.
    println!("\n{:>3} {:>14} {:>14} {:>10}", "k", "worst measured", "bound", "ratio");
    let mut overall: f64 = 0.0;
    for k in 0..local_steps {
        let bound = consensus_bound(&inputs, 1, k, case)?;
        let worst = traj
            .records
            .iter()
            .filter(|r| r.k == k)
            .map(|r| r.consensus)
            .fold(0.0f64, f64::max);
        let ratio = if bound > 0.0 { worst / bound } else { 0.0 };
        overall = overall.max(ratio);
        println!("{k:>3} {worst:>14.4e} {bound:>14.4e} {ratio:>10.4}");
    }
    println!("\nworst measured/bound ratio = {overall:.4} (<= 1 means the guarantee holds)");
    assert!(overall <= 1.0, "consensus guarantee violated");

    // k = 0 is right after communication; the bound there comes entirely
    // from disagreement the gossip step has not yet erased.
    let post: f64 = traj.post_comm_consensus.iter().map(|&(_, c)| c).fold(0.0, f64::max);
    println!("largest post-communication consensus = {post:.4e}");
    Ok(())
}
