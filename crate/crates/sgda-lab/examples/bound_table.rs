//! Evaluates every closed-form guarantee for one configuration and prints
//! the standard report: consensus at the last local step, argument stability
//! in all applicable forms, weak primal-dual risk bounds, and the
//! connection multipliers that translate stability into generalization.
//!
//!     cargo run --example bound_table

use sgda_lab::bounds::{
    argument_stability_bound, connection_multipliers, standard_report, BoundInputs,
    ReportExtras, StabilityForm,
};
use sgda_lab::engine::Schedule;
use sgda_lab::report::format_bound_table;
use sgda_lab::problems::{make_problem, ProblemParams, QuadScscParams};
use sgda_lab::topology::{build_topology, TopologyKind, Weighting};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams::default()))?;
    let w = build_topology(TopologyKind::Exponential, 16, Weighting::Metropolis)?;
    let schedule = Schedule::Fixed { c: 0.01 };
    let inputs = BoundInputs::from_run(&problem, &w, &schedule, 100, 5, 200)?;

    // Rows that consume measurements take them through the extras; here we
    // feed the theoretical stability in as the epsilon, so the connection
    // rows show what the guarantee chain yields end to end.
    let eps = argument_stability_bound(&inputs, StabilityForm::General)?;
    let extras = ReportExtras { epsilon: Some(eps), ep_empirical_sup: None };
    let report = standard_report(&inputs, &extras);
    println!("{}", format_bound_table(&report));

    // The same epsilon pushed through the stability-to-generalization
    // connections, one bound per risk functional.
    let (weak, excess, strong) = connection_multipliers(&inputs, eps)?;
    println!("generalization gaps implied by argument stability {eps:.4e}:");
    println!("  weak primal-dual gap <= {weak:.4e}");
    println!("  excess primal gap    <= {excess:.4e}");
    println!("  strong primal-dual   <= {strong:.4e}");

    // Forms have premises; asking for one that does not apply is an error,
    // not a silent wrong number. The convex corollary needs mu = 0.
    let err = argument_stability_bound(&inputs, StabilityForm::ConvexCorollary).unwrap_err();
    println!("\nconvex corollary on a strongly convex problem: {err}");
    Ok(())
}
