//! Structural invariants: properties that must hold for every valid input,
//! checked by randomized sampling (proptest) plus deterministic identities.

use proptest::prelude::*;

use ndarray::Array2;
use sgda_lab::bounds::{
    argument_stability_bound, consensus_bound, BoundInputs, ConsensusCase, StabilityForm,
};
use sgda_lab::config::ExperimentConfig;
use sgda_lab::data::{generate, make_neighbor, DataParams};
use sgda_lab::engine::{
    run, schedule_rate, RecordLevel, RunConfig, SampleStream, Schedule,
};
use sgda_lab::linalg::{l2_norm, project_ball};
use sgda_lab::problems::{make_problem, ProblemParams, QuadScscParams};
use sgda_lab::stability::{flattened_samples, measure_stability, run_coupled, weak_pd_risk};
use sgda_lab::topology::{build_topology, deviation_norm, mix, TopologyKind, Weighting};

fn quad() -> sgda_lab::problems::Problem {
    make_problem(&ProblemParams::QuadScsc(QuadScscParams::default())).unwrap()
}

// ---------------------------------------------------------------------------
// deterministic identities
// ---------------------------------------------------------------------------

#[test]
fn deviation_norm_at_zero_steps_is_one() {
    for kind in [TopologyKind::Complete, TopologyKind::Ring, TopologyKind::Star] {
        let w = build_topology(kind, 6, Weighting::Metropolis).unwrap();
        // W^0 - P_m = I - P_m is an orthogonal projector, so its norm is 1.
        assert!((deviation_norm(&w, 0) - 1.0).abs() <= 1e-10, "{kind:?}");
    }
}

#[test]
fn consensus_bound_without_mixing_residual_is_linear_in_k() {
    // At lambda = 0 the carried-over mixing term vanishes and the fixed-rate
    // consensus bound collapses to (rate) * G * k.
    let inputs = BoundInputs {
        grad_bound: 1.5,
        smoothness: 2.0,
        strong_convexity: 1.0,
        pl_constant: None,
        value_bound: None,
        lambda: 0.0,
        c_lambda: 0.0,
        c_lambda_sq: 0.0,
        rounds: 10,
        local_steps: 5,
        agents: 4,
        samples_per_agent: 50,
        radius_x: Some(1.0),
        radius_y: Some(1.0),
        schedule: Schedule::Fixed { c: 0.02 },
    };
    for k in 0..=5usize {
        let bound = consensus_bound(&inputs, 3, k, ConsensusCase::Fixed).unwrap();
        let expected = 0.02 * 1.5 * k as f64;
        assert!(
            (bound - expected).abs() <= 1e-12 * expected.max(1.0),
            "k = {k}: {bound} vs {expected}"
        );
    }
}

#[test]
fn identical_neighbor_pair_has_exactly_zero_stability() {
    let problem = quad();
    let w = build_topology(TopologyKind::Ring, 4, Weighting::Metropolis).unwrap();
    let schedule = Schedule::Fixed { c: 0.05 };
    let config = RunConfig {
        rounds: 5,
        local_steps: 3,
        seed: 0,
        projection: Some((1.0, 1.0)),
        record_level: RecordLevel::Final,
    };
    let study = measure_stability(
        &problem,
        &w,
        &schedule,
        &config,
        &DataParams::default(),
        12,
        &[7, 8, 9],
        true,
    )
    .unwrap();
    assert_eq!(study.report.argument_mean, 0.0);
    assert_eq!(study.report.primal_mean, 0.0);
    assert_eq!(study.report.weak_estimate.value, 0.0);
}

#[test]
fn communication_preserves_coupled_sensitivity() {
    // The recorded sensitivity is a distance between agent averages, and a
    // doubly stochastic gossip step leaves agent averages unchanged, so the
    // post-communication record of each round must equal the last local one.
    let problem = quad();
    let w = build_topology(TopologyKind::Ring, 8, Weighting::Metropolis).unwrap();
    let schedule = Schedule::Fixed { c: 0.03 };
    let config = RunConfig {
        rounds: 6,
        local_steps: 4,
        seed: 0x77,
        projection: Some((1.0, 1.0)),
        record_level: RecordLevel::Final,
    };
    let dataset = generate(&problem, 8, 20, &DataParams::default(), 0x77).unwrap();
    let pair = make_neighbor(&dataset, 0x78);
    let outcome =
        run_coupled(&problem, &pair, &w, &schedule, &config, &SampleStream::new(0x77)).unwrap();
    let mut last_local = None;
    for rec in &outcome.deltas {
        match rec.k {
            Some(_) => last_local = Some(rec.delta),
            None => {
                let before = last_local.expect("a local step precedes each communication");
                assert!(
                    (rec.delta - before).abs() <= 1e-12 * before.max(1.0),
                    "round {}: {} vs {before}",
                    rec.t,
                    rec.delta
                );
            }
        }
    }
}

#[test]
fn engine_runs_are_deterministic() {
    let problem = quad();
    let w = build_topology(TopologyKind::Meshgrid, 4, Weighting::Metropolis).unwrap();
    let schedule = Schedule::Decaying { c: 0.1, alpha: 0.75, beta: 1.0 };
    let dataset = generate(&problem, 4, 9, &DataParams::default(), 5).unwrap();
    let config = RunConfig {
        rounds: 4,
        local_steps: 3,
        seed: 11,
        projection: Some((1.0, 1.0)),
        record_level: RecordLevel::Full,
    };
    let a = run(&problem, &dataset, &w, &schedule, &config, &SampleStream::new(11)).unwrap();
    let b = run(&problem, &dataset, &w, &schedule, &config, &SampleStream::new(11)).unwrap();
    assert_eq!(a, b, "identical inputs must reproduce the trajectory bitwise");
}

#[test]
fn payload_means_obey_the_law_of_large_numbers() {
    let problem = quad();
    let dataset = generate(&problem, 4, 10_000, &DataParams::default(), 0x11a).unwrap();
    let samples = flattened_samples(&dataset);
    let dim = samples[0].payload.len();
    for j in 0..dim {
        let mean = samples.iter().map(|s| s.payload[j]).sum::<f64>() / samples.len() as f64;
        // Centers are zero; 40k draws of a clipped unit Gaussian concentrate
        // well inside +-5e-2.
        assert!(mean.abs() <= 5e-2, "coordinate {j} mean {mean}");
    }
}

#[test]
fn experiment_config_parses_deterministically_with_defaults() {
    let text = r#"
        [problem]
        kind = "quad_scsc"

        [topology]
        kind = "ring"
        m = 4

        [data]
        n = 8

        [run]
        rounds = 3
        local_steps = 2
        seed_base = 42
        seed_count = 2
        schedule = { kind = "fixed", c = 0.05 }
    "#;
    let a: ExperimentConfig = toml::from_str(text).unwrap();
    let b: ExperimentConfig = toml::from_str(text).unwrap();
    assert_eq!(a, b);
    assert!(a.run.projection, "projection defaults to on");
    assert_eq!(a.run.resolve_seeds(None), vec![42, 43]);
    assert_eq!(a.run.resolve_seeds(Some(100)), vec![100, 101]);
    let problem = make_problem(&a.problem).unwrap();
    let cfg = a.run.run_config(&problem, 42);
    assert_eq!(cfg.projection, Some((1.0, 1.0)), "radii come from the problem");
}

// ---------------------------------------------------------------------------
// sampled properties
// ---------------------------------------------------------------------------

/// Topology kinds paired with sizes they accept (meshgrid wants a perfect
/// square, exponential a power of two).
fn any_sized_kind() -> impl Strategy<Value = (TopologyKind, usize)> {
    prop_oneof![
        (Just(TopologyKind::Complete), 2usize..24),
        (Just(TopologyKind::Ring), 2usize..24),
        (Just(TopologyKind::Star), 2usize..24),
        (Just(TopologyKind::Meshgrid), (2usize..5).prop_map(|s| s * s)),
        (Just(TopologyKind::Exponential), (1u32..5).prop_map(|p| 1usize << p)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn builders_produce_symmetric_doubly_stochastic_mixers(
        (kind, m) in any_sized_kind(),
    ) {
        let w = build_topology(kind, m, Weighting::Metropolis).unwrap();
        let weights = w.weights();
        for i in 0..m {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..m {
                prop_assert!(weights[[i, j]] >= 0.0);
                prop_assert!((weights[[i, j]] - weights[[j, i]]).abs() <= 1e-12);
                row += weights[[i, j]];
                col += weights[[j, i]];
            }
            prop_assert!((row - 1.0).abs() <= 1e-12);
            prop_assert!((col - 1.0).abs() <= 1e-12);
        }
        let lambda = w.lambda();
        prop_assert!((0.0..1.0).contains(&lambda), "connected graphs mix: {lambda}");
    }

    #[test]
    fn gossip_preserves_agent_averages(
        (kind, m) in any_sized_kind(),
        d in 1usize..4,
        seed in any::<u64>(),
    ) {
        let w = build_topology(kind, m, Weighting::Metropolis).unwrap();
        let mut state = Array2::<f64>::zeros((m, d));
        let mut acc = seed | 1;
        for v in state.iter_mut() {
            // Cheap deterministic fill in [-1, 1).
            acc = acc.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (acc >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0;
        }
        let mixed = mix(&w, &state).unwrap();
        for j in 0..d {
            let before: f64 = (0..m).map(|i| state[[i, j]]).sum::<f64>() / m as f64;
            let after: f64 = (0..m).map(|i| mixed[[i, j]]).sum::<f64>() / m as f64;
            prop_assert!((before - after).abs() <= 1e-12);
        }
    }

    #[test]
    fn ball_projection_is_feasible_and_idempotent(
        v in prop::collection::vec(-10.0f64..10.0, 1..6),
        radius in 0.1f64..5.0,
    ) {
        let mut once = v.clone();
        project_ball(&mut once, radius);
        prop_assert!(l2_norm(&once) <= radius * (1.0 + 1e-12));
        if l2_norm(&v) <= radius {
            prop_assert_eq!(&once, &v, "interior points are untouched");
        }
        // Reprojecting can rescale by a factor one ulp away from 1, so the
        // fixed point holds coordinatewise to rounding, not bitwise.
        let mut twice = once.clone();
        project_ball(&mut twice, radius);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 4e-15 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn schedule_rates_are_positive_and_nonincreasing(
        c in 1e-4f64..1.0,
        alpha in 0.5f64..=1.0,
        beta in 0.5f64..=1.0,
        t in 1usize..60,
        k in 0usize..12,
    ) {
        let schedule = Schedule::Decaying { c, alpha, beta };
        let rate = schedule_rate(&schedule, t, k).unwrap();
        prop_assert!(rate > 0.0);
        prop_assert!(rate <= c);
        prop_assert!(schedule_rate(&schedule, t + 1, k).unwrap() <= rate);
        prop_assert!(schedule_rate(&schedule, t, k + 1).unwrap() <= rate);
        let fixed = schedule_rate(&Schedule::Fixed { c }, t, k).unwrap();
        prop_assert_eq!(fixed, c);
    }

    #[test]
    fn sample_stream_is_deterministic_and_in_range(
        seed in any::<u64>(),
        t in 1usize..1000,
        k in 0usize..50,
        i in 0usize..64,
        n in 1usize..1000,
    ) {
        let stream = SampleStream::new(seed);
        let j = stream.index(t, k, i, n);
        prop_assert!(j < n);
        prop_assert_eq!(j, SampleStream::new(seed).index(t, k, i, n));
    }

    #[test]
    fn general_stability_bound_is_finite_and_grows_with_rounds(
        g in 0.5f64..3.0,
        l in 0.5f64..3.0,
        ratio in 0.1f64..1.0,
        lambda in 0.0f64..0.9,
        rounds in 1usize..40,
        local_steps in 1usize..6,
    ) {
        let mu = l * ratio;
        let eta = 0.5 / (l + mu);
        let inputs = BoundInputs {
            grad_bound: g,
            smoothness: l,
            strong_convexity: mu,
            pl_constant: None,
            value_bound: None,
            lambda,
            c_lambda: sgda_lab::topology::c_constant(lambda, 0.75),
            c_lambda_sq: sgda_lab::topology::c_constant(lambda * lambda, 0.75),
            rounds,
            local_steps,
            agents: 4,
            samples_per_agent: 50,
            radius_x: Some(1.0),
            radius_y: Some(1.0),
            schedule: Schedule::Fixed { c: eta },
        };
        let bound = argument_stability_bound(&inputs, StabilityForm::General).unwrap();
        prop_assert!(bound.is_finite() && bound >= 0.0);
        let longer = BoundInputs { rounds: rounds + 5, ..inputs };
        let bigger = argument_stability_bound(&longer, StabilityForm::General).unwrap();
        prop_assert!(bigger >= bound, "cumulative recursions cannot shrink with T");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn weak_risk_is_nonnegative_at_random_quad_points(
        seed in any::<u64>(),
        px in -0.7f64..0.7,
        py in -0.7f64..0.7,
    ) {
        let problem = quad();
        let dataset = generate(&problem, 2, 30, &DataParams::default(), seed).unwrap();
        let samples = flattened_samples(&dataset);
        let risk = weak_pd_risk(&problem, &samples, &[px], &[py]).unwrap().value;
        prop_assert!(risk >= -1e-12, "duality-gap surrogate cannot be negative: {risk}");
    }
}
