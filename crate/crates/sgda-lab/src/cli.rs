//! Command-line front end: `run`, `sweep`, `bounds`, `validate-topology`.
//!
//! Each command is a plain function returning its stdout text, so integration
//! tests can drive the exact CLI behavior without spawning processes. All
//! output is deterministic: the same config and seeds produce byte-identical
//! files and text.

use crate::bounds::{standard_report, BoundInputs, ReportExtras};
use crate::config::{BoundConstants, ExperimentConfig};
use crate::data::generate;
use crate::engine::{run, RunConfig, SampleStream, Schedule};
use crate::error::{Error, Result};
use crate::plot::render_measure_plot;
use crate::problems::make_problem;
use crate::report::{
    atomic_write, format_bound_table, read_rows_csv, write_bound_csv, write_json, write_rows_csv,
    write_trace_csv,
};
use crate::seeds;
use crate::stability::{generalization_gaps, measure_stability};
use crate::sweep::{all_cells_failed, run_sweep, SWEEP_MEASURES};
use crate::topology::{
    build_topology, c_constant, deviation_norm, load_matrix_file, MixingMatrix, TopologyKind,
    Weighting,
};
use clap::{Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const MC_RISK_SAMPLES: usize = 4000;

#[derive(Parser)]
#[command(name = "sgda-lab", version, about = "Distributed saddle-point training laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one experiment: trace, stability report, risk report, bounds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `outputs.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's seed base (keeps the seed count).
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Vary one factor across cells and tabulate measures with bounds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for cells; 0 means one per core.
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Evaluate every closed-form bound from a constants file.
    Bounds {
        #[arg(long)]
        constants: PathBuf,
        /// Directory for the CSV copy of the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a gossip matrix: residuals, mixing constant, decay table.
    ValidateTopology {
        /// Topology kind (complete|ring|star|meshgrid|exponential) or a
        /// whitespace-separated matrix file.
        target: String,
        /// Agent count when `target` is a kind name.
        #[arg(long, default_value_t = 8)]
        m: usize,
        /// Weight rule: metropolis or uniform-neighbor.
        #[arg(long, default_value = "metropolis")]
        weighting: String,
    },
}

/// Parses arguments and dispatches; the binary's whole body.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed_base } => cmd_run(&config, out.as_deref(), seed_base),
        Command::Sweep { config, out, workers, seed_base } => {
            cmd_sweep(&config, out.as_deref(), workers, seed_base)
        }
        Command::Bounds { constants, out } => cmd_bounds(&constants, out.as_deref()),
        Command::ValidateTopology { target, m, weighting } => {
            cmd_validate_topology(&target, m, &weighting)
        }
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.outputs.directory.clone())
}

/// Runs one experiment and writes `trace.csv`, `stability.json`,
/// `risks.json`, and `bounds.json` into the output directory.
pub fn cmd_run(config: &Path, out: Option<&Path>, seed_base: Option<u64>) -> Result<String> {
    let cfg = ExperimentConfig::load(config)?;
    let seeds_list = cfg.run.resolve_seeds(seed_base);
    let problem = make_problem(&cfg.problem)?;
    let w = cfg.topology.build()?;
    let dir = out_dir(&cfg, out);

    // Trace leg: identical derivations to the first stability repeat, so the
    // per-step rows and the sensitivity column describe the same run.
    let first = seeds_list[0];
    let dataset =
        generate(&problem, w.m(), cfg.data.n, &cfg.data.params(), seeds::mix(&[first, 0xda7a]))?;
    let stream_seed = seeds::mix(&[first, 0x57e9]);
    let run_cfg = RunConfig { seed: stream_seed, ..cfg.run.run_config(&problem, stream_seed) };
    let traj = run(&problem, &dataset, &w, &cfg.run.schedule, &run_cfg, &SampleStream::new(stream_seed))?;

    let study = measure_stability(
        &problem,
        &w,
        &cfg.run.schedule,
        &run_cfg,
        &cfg.data.params(),
        cfg.data.n,
        &seeds_list,
        cfg.data.identical_neighbor,
    )?;

    let (out_x, out_y) = match traj.averaged_output() {
        Ok((x, y)) => (x.to_vec(), y.to_vec()),
        Err(_) => (traj.final_x.clone(), traj.final_y.clone()),
    };
    let gaps = generalization_gaps(&problem, &dataset, &out_x, &out_y, MC_RISK_SAMPLES, first)?;

    let inputs = BoundInputs::from_run(
        &problem,
        &w,
        &cfg.run.schedule,
        cfg.run.rounds,
        cfg.run.local_steps,
        cfg.data.n,
    )?;
    let extras = ReportExtras {
        epsilon: Some(study.report.argument_mean),
        ep_empirical_sup: Some(gaps.excess_primal_empirical.value.max(0.0)),
    };
    let bound_report = standard_report(&inputs, &extras);

    let trace_path = dir.join("trace.csv");
    write_trace_csv(&trace_path, &traj, &study.outcomes[0].deltas)?;
    let stability_path = dir.join("stability.json");
    write_json(&stability_path, &study.report)?;
    let risks_path = dir.join("risks.json");
    write_json(&risks_path, &gaps)?;
    let bounds_path = dir.join("bounds.json");
    write_json(&bounds_path, &bound_report)?;

    let mut text = String::new();
    for p in [&trace_path, &stability_path, &risks_path, &bounds_path] {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    let r = &study.report;
    let _ = writeln!(
        text,
        "argument stability mean {:.6e} (std {:.6e}) over {} repeats, {} diverged",
        r.argument_mean, r.argument_std, r.repeats, r.failures
    );
    let _ = writeln!(
        text,
        "weak risk: empirical {:.6e}, population {:.6e}, gap {:.6e}",
        gaps.weak_empirical.value, gaps.weak_population.value, gaps.weak_gap
    );
    Ok(text)
}

/// Runs the configured sweep and writes `results.csv`, optional
/// `results.json`, and one SVG per measure rendered from the CSV.
pub fn cmd_sweep(
    config: &Path,
    out: Option<&Path>,
    workers: usize,
    seed_base: Option<u64>,
) -> Result<String> {
    let cfg = ExperimentConfig::load(config)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep requires a [sweep] block in the config".into()))?;
    let axis_name = sweep.axis.name();
    let seeds_list = cfg.run.resolve_seeds(seed_base);
    let rows = run_sweep(&cfg, &seeds_list, workers)?;
    let dir = out_dir(&cfg, out);

    let csv_path = dir.join("results.csv");
    write_rows_csv(&csv_path, &rows)?;
    let mut text = String::new();
    let _ = writeln!(text, "wrote {}", csv_path.display());
    if cfg.outputs.wants("json") {
        let json_path = dir.join("results.json");
        write_json(&json_path, &rows)?;
        let _ = writeln!(text, "wrote {}", json_path.display());
    }
    if cfg.outputs.wants("svg") {
        // Plots are functions of the CSV alone: read it back, then render.
        let from_csv = read_rows_csv(&csv_path)?;
        for measure in SWEEP_MEASURES {
            match render_measure_plot(&from_csv, axis_name, measure) {
                Ok(svg) => {
                    let path = dir.join(format!("{measure}_vs_{axis_name}.svg"));
                    atomic_write(&path, svg.as_bytes())?;
                    let _ = writeln!(text, "wrote {}", path.display());
                }
                Err(_) => {
                    let _ = writeln!(text, "no successful cells for {measure}; plot skipped");
                }
            }
        }
    }
    let failed_cells = rows.iter().filter(|r| r.seeds == 0).count() / SWEEP_MEASURES.len();
    let total_cells = rows.len() / SWEEP_MEASURES.len();
    let _ = writeln!(text, "{} of {} cells succeeded", total_cells - failed_cells, total_cells);
    if all_cells_failed(&rows) {
        return Err(Error::Config(format!(
            "every sweep cell failed; first note: {}",
            rows.first().map(|r| r.note.as_str()).unwrap_or("none")
        )));
    }
    Ok(text)
}

/// Evaluates the closed-form bound table from a constants file.
pub fn cmd_bounds(constants: &Path, out: Option<&Path>) -> Result<String> {
    let c = BoundConstants::load(constants)?;
    let alpha = match c.schedule {
        Schedule::Decaying { alpha, .. } => alpha,
        Schedule::Fixed { .. } => 0.75,
    };
    let inputs = BoundInputs {
        grad_bound: c.grad_bound,
        smoothness: c.smoothness,
        strong_convexity: c.strong_convexity,
        pl_constant: c.pl_constant,
        value_bound: c.value_bound,
        lambda: c.lambda,
        c_lambda: c_constant(c.lambda, alpha),
        c_lambda_sq: c_constant(c.lambda * c.lambda, alpha),
        rounds: c.rounds,
        local_steps: c.local_steps,
        agents: c.agents,
        samples_per_agent: c.samples_per_agent,
        radius_x: c.radius_x,
        radius_y: c.radius_y,
        schedule: c.schedule,
    };
    inputs.validate()?;
    let extras = ReportExtras { epsilon: c.epsilon, ep_empirical_sup: c.ep_empirical_sup };
    let report = standard_report(&inputs, &extras);
    let mut text = format_bound_table(&report);
    if let Some(dir) = out {
        let csv_path = dir.join("bounds.csv");
        write_bound_csv(&csv_path, &report)?;
        let _ = writeln!(text, "wrote {}", csv_path.display());
    }
    Ok(text)
}

fn parse_weighting(name: &str) -> Result<Weighting> {
    match name {
        "metropolis" => Ok(Weighting::Metropolis),
        "uniform-neighbor" | "uniform_neighbor" => Ok(Weighting::UniformNeighbor),
        other => Err(Error::invalid("weighting", format!("unknown rule {other}"))),
    }
}

fn parse_kind(name: &str) -> Option<TopologyKind> {
    [
        TopologyKind::Complete,
        TopologyKind::Ring,
        TopologyKind::Star,
        TopologyKind::Meshgrid,
        TopologyKind::Exponential,
    ]
    .into_iter()
    .find(|k| k.name() == name)
}

fn matrix_residuals(w: &MixingMatrix) -> (f64, f64, f64) {
    let a = w.weights();
    let m = w.m();
    let mut sym = 0.0f64;
    let mut row = 0.0f64;
    let mut col = 0.0f64;
    for i in 0..m {
        let mut rs = 0.0;
        let mut cs = 0.0;
        for j in 0..m {
            sym = sym.max((a[[i, j]] - a[[j, i]]).abs());
            rs += a[[i, j]];
            cs += a[[j, i]];
        }
        row = row.max((rs - 1.0).abs());
        col = col.max((cs - 1.0).abs());
    }
    (sym, row, col)
}

/// Validates a mixing matrix (built kind or file) and prints its spectral
/// profile: residuals, lambda, C-constants, and the k-step deviation table.
pub fn cmd_validate_topology(target: &str, m: usize, weighting: &str) -> Result<String> {
    let w = match parse_kind(target) {
        Some(kind) => build_topology(kind, m, parse_weighting(weighting)?)?,
        None => load_matrix_file(Path::new(target))?,
    };
    let (sym, row, col) = matrix_residuals(&w);
    let lambda = w.lambda();
    let mut text = String::new();
    let _ = writeln!(text, "agents: {}", w.m());
    let _ = writeln!(text, "symmetry residual: {sym:.3e}");
    let _ = writeln!(text, "row-sum residual: {row:.3e}");
    let _ = writeln!(text, "column-sum residual: {col:.3e}");
    let _ = writeln!(text, "lambda: {lambda:.12}");
    for alpha in [0.6, 0.75, 1.0] {
        let _ = writeln!(text, "C_lambda({alpha}): {:.6}", c_constant(lambda, alpha));
    }
    let _ = writeln!(text, "{:>3} {:>14} {:>14} {:>10}", "k", "deviation", "lambda^k", "diff");
    let mut max_diff = 0.0f64;
    for k in 0..=10 {
        let dev = deviation_norm(&w, k);
        let reference = lambda.powi(k as i32);
        let diff = (dev - reference).abs();
        max_diff = max_diff.max(diff);
        let _ = writeln!(text, "{k:>3} {dev:>14.6e} {reference:>14.6e} {diff:>10.2e}");
    }
    let _ = writeln!(text, "max |deviation - lambda^k|: {max_diff:.3e}");
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::tempdir;

    const RUN_CONFIG: &str = r#"
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
        seed_count = 2
        schedule = { kind = "fixed", c = 0.05 }
    "#;

    #[test]
    fn run_writes_four_files_and_reruns_identically() {
        let dir = tempdir().unwrap();
        let config = dir.path().join("exp.toml");
        fs::write(&config, RUN_CONFIG).unwrap();
        let out = dir.path().join("out");
        cmd_run(&config, Some(&out), None).unwrap();
        let names = ["trace.csv", "stability.json", "risks.json", "bounds.json"];
        let first: Vec<Vec<u8>> =
            names.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();
        cmd_run(&config, Some(&out), None).unwrap();
        for (name, before) in names.iter().zip(first.iter()) {
            assert_eq!(&fs::read(out.join(name)).unwrap(), before, "{name} changed on rerun");
        }
    }

    #[test]
    fn sweep_writes_rows_and_plots() {
        let dir = tempdir().unwrap();
        let config = dir.path().join("exp.toml");
        fs::write(&config, format!("{RUN_CONFIG}\n[sweep]\naxis = \"learning_rate\"\nvalues = [0.01, 0.05]\n")).unwrap();
        let out = dir.path().join("out");
        let text = cmd_sweep(&config, Some(&out), 2, None).unwrap();
        assert!(text.contains("2 of 2 cells succeeded"));
        assert!(out.join("results.csv").exists());
        assert!(out.join("results.json").exists());
        assert!(out.join("argument_stability_vs_learning_rate.svg").exists());
        let rows = read_rows_csv(&out.join("results.csv")).unwrap();
        assert_eq!(rows.len(), 6);
    }

    #[test]
    fn bounds_command_reproduces_worked_value() {
        let dir = tempdir().unwrap();
        let constants = dir.path().join("constants.toml");
        fs::write(
            &constants,
            r#"
            grad_bound = 1.0
            smoothness = 2.0
            strong_convexity = 1.0
            lambda = 0.0
            rounds = 100
            local_steps = 5
            agents = 4
            samples_per_agent = 100
            radius_x = 1.0
            radius_y = 1.0
            schedule = { kind = "fixed", c = 0.01 }
            "#,
        )
        .unwrap();
        let text = cmd_bounds(&constants, Some(dir.path())).unwrap();
        assert!(text.contains("argument_stability_fixed_closed"));
        assert!(text.contains("9.000000e-1"), "table was:\n{text}");
        assert!(dir.path().join("bounds.csv").exists());
    }

    #[test]
    fn validate_topology_ring_matches_lambda_powers() {
        let text = cmd_validate_topology("ring", 8, "metropolis").unwrap();
        assert!(text.contains("agents: 8"));
        let max_line = text.lines().find(|l| l.starts_with("max |deviation")).unwrap();
        let value: f64 = max_line.rsplit(' ').next().unwrap().parse().unwrap();
        assert!(value <= 1e-10, "max deviation {value}");
    }

    #[test]
    fn validate_topology_rejects_asymmetric_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.txt");
        fs::write(&path, "0.5 0.5\n0.2 0.8\n").unwrap();
        let err = cmd_validate_topology(path.to_str().unwrap(), 2, "metropolis").unwrap_err();
        assert!(err.to_string().contains("(0,1)") || err.to_string().contains("(1,0)"), "{err}");
    }
}
