//! Sweep execution: vary one factor, measure every cell, attach bounds.
//!
//! Cells are enumerated in config order and measured over a shared seed list,
//! so reruns produce identical rows. A failing cell (bad derived topology,
//! every repeat diverged) contributes rows with `seeds = 0` and a note rather
//! than aborting the sweep.

use crate::bounds::{argument_stability_bound, weak_stability_bound, BoundInputs, RateForm, StabilityForm};
use crate::config::{ExperimentConfig, SweepAxis};
use crate::engine::Schedule;
use crate::error::{Error, Result};
use crate::problems::make_problem;
use crate::report::OutputRow;
use crate::stability::{measure_stability, StabilityReport};
use crate::topology::TopologyKind;
use rayon::prelude::*;

/// Measure names emitted for every cell, in row order.
pub const SWEEP_MEASURES: [&str; 3] =
    ["argument_stability", "primal_stability", "weak_stability"];

#[derive(Debug, Clone)]
enum Level {
    Numeric(f64),
    Topology(TopologyKind),
}

impl Level {
    fn label(&self) -> String {
        match self {
            Level::Numeric(v) => v.to_string(),
            Level::Topology(kind) => kind.name().to_string(),
        }
    }
}

fn enumerate_levels(cfg: &ExperimentConfig) -> Result<(SweepAxis, Vec<Level>)> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep requires a [sweep] block".into()))?;
    let levels = match sweep.axis {
        SweepAxis::Topology => sweep.topologies.iter().copied().map(Level::Topology).collect(),
        _ => sweep.values.iter().copied().map(Level::Numeric).collect(),
    };
    Ok((sweep.axis, levels))
}

fn apply_level(base: &ExperimentConfig, axis: SweepAxis, level: &Level) -> ExperimentConfig {
    let mut cfg = base.clone();
    match (axis, level) {
        (SweepAxis::LearningRate, Level::Numeric(c)) => {
            cfg.run.schedule = match cfg.run.schedule {
                Schedule::Fixed { .. } => Schedule::Fixed { c: *c },
                Schedule::Decaying { alpha, beta, .. } => {
                    Schedule::Decaying { c: *c, alpha, beta }
                }
            };
        }
        (SweepAxis::Nodes, Level::Numeric(v)) => cfg.topology.m = *v as usize,
        (SweepAxis::LocalSteps, Level::Numeric(v)) => cfg.run.local_steps = *v as usize,
        (SweepAxis::SampleSize, Level::Numeric(v)) => cfg.data.n = *v as usize,
        (SweepAxis::Topology, Level::Topology(kind)) => cfg.topology.kind = *kind,
        // enumerate_levels pairs numeric axes with numeric levels.
        _ => unreachable!("level kind matches axis by construction"),
    }
    cfg
}

struct CellMeasurement {
    lambda: f64,
    report: StabilityReport,
    argument_bound: Option<f64>,
    weak_bound: Option<f64>,
}

fn measure_cell(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<CellMeasurement> {
    let problem = make_problem(&cfg.problem)?;
    let w = cfg.topology.build()?;
    let run_cfg = cfg.run.run_config(&problem, seeds[0]);
    let study = measure_stability(
        &problem,
        &w,
        &cfg.run.schedule,
        &run_cfg,
        &cfg.data.params(),
        cfg.data.n,
        seeds,
        cfg.data.identical_neighbor,
    )?;
    let inputs = BoundInputs::from_run(
        &problem,
        &w,
        &cfg.run.schedule,
        cfg.run.rounds,
        cfg.run.local_steps,
        cfg.data.n,
    )?;
    let rate_form = match cfg.run.schedule {
        Schedule::Fixed { .. } => RateForm::Fixed,
        Schedule::Decaying { .. } => RateForm::Decaying,
    };
    Ok(CellMeasurement {
        lambda: w.lambda(),
        report: study.report,
        argument_bound: argument_stability_bound(&inputs, StabilityForm::General).ok(),
        weak_bound: weak_stability_bound(&inputs, rate_form).ok(),
    })
}

fn cell_rows(axis: SweepAxis, level: &Level, cell: &CellMeasurement) -> Vec<OutputRow> {
    let base = OutputRow {
        axis: axis.name().to_string(),
        value: level.label(),
        lambda: cell.lambda,
        measure: String::new(),
        seeds: cell.report.repeats,
        mean: 0.0,
        std: 0.0,
        bound: None,
        bound_valid: None,
        failures: cell.report.failures,
        note: String::new(),
    };
    let r = &cell.report;
    let mut rows = Vec::with_capacity(SWEEP_MEASURES.len());
    for measure in SWEEP_MEASURES {
        let mut row = base.clone();
        row.measure = measure.to_string();
        match measure {
            "argument_stability" => {
                row.mean = r.argument_mean;
                row.std = r.argument_std;
                row.bound = cell.argument_bound;
            }
            "primal_stability" => {
                row.mean = r.primal_mean;
                row.std = r.primal_std;
            }
            "weak_stability" => {
                // Single pooled estimator across repeats, so no spread.
                row.mean = r.weak_estimate.value;
                row.std = 0.0;
                row.bound = cell.weak_bound;
            }
            _ => unreachable!(),
        }
        row.bound_valid = row.bound.map(|_| true);
        rows.push(row);
    }
    rows
}

fn failed_rows(axis: SweepAxis, level: &Level, attempted: usize, err: &Error) -> Vec<OutputRow> {
    SWEEP_MEASURES
        .iter()
        .map(|measure| OutputRow {
            axis: axis.name().to_string(),
            value: level.label(),
            lambda: 0.0,
            measure: measure.to_string(),
            seeds: 0,
            mean: 0.0,
            std: 0.0,
            bound: None,
            bound_valid: None,
            failures: attempted,
            note: err.to_string(),
        })
        .collect()
}

/// Runs every sweep cell on a bounded pool and returns rows in cell order.
///
/// `workers = 0` uses one thread per core.
pub fn run_sweep(cfg: &ExperimentConfig, seeds: &[u64], workers: usize) -> Result<Vec<OutputRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "at least one seed is required"));
    }
    let (axis, levels) = enumerate_levels(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let per_cell: Vec<Vec<OutputRow>> = pool.install(|| {
        levels
            .par_iter()
            .map(|level| {
                let cell_cfg = apply_level(cfg, axis, level);
                match measure_cell(&cell_cfg, seeds) {
                    Ok(cell) => cell_rows(axis, level, &cell),
                    Err(err) => failed_rows(axis, level, seeds.len(), &err),
                }
            })
            .collect()
    });
    let rows: Vec<OutputRow> = per_cell.into_iter().flatten().collect();
    for row in &rows {
        row.validate()?;
    }
    Ok(rows)
}

/// True when no cell produced a single successful repeat.
pub fn all_cells_failed(rows: &[OutputRow]) -> bool {
    !rows.is_empty() && rows.iter().all(|r| r.seeds == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DataBlock, OutputsBlock, RunBlock, SweepBlock, TopologyBlock};
    use crate::engine::RecordLevel;
    use crate::problems::{ProblemParams, QuadScscParams};
    use crate::topology::Weighting;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemParams::QuadScsc(QuadScscParams::default()),
            topology: TopologyBlock {
                kind: TopologyKind::Ring,
                m: 4,
                weighting: Weighting::Metropolis,
                matrix_path: None,
            },
            data: DataBlock {
                n: 8,
                noise: 1.0,
                clip: 3.0,
                shift_scale: 0.0,
                identical_neighbor: false,
            },
            run: RunBlock {
                rounds: 3,
                local_steps: 2,
                schedule: Schedule::Fixed { c: 0.05 },
                projection: true,
                seeds: None,
                seed_base: 42,
                seed_count: 2,
                record_level: RecordLevel::Averages,
            },
            sweep: Some(SweepBlock {
                axis: SweepAxis::LearningRate,
                values: vec![0.01, 0.05],
                topologies: Vec::new(),
            }),
            outputs: OutputsBlock::default(),
        }
    }

    #[test]
    fn learning_rate_sweep_emits_three_rows_per_cell() {
        let cfg = base_config();
        let rows = run_sweep(&cfg, &[42, 43], 2).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].value, "0.01");
        assert_eq!(rows[3].value, "0.05");
        for row in &rows {
            assert_eq!(row.seeds, 2);
            assert_eq!(row.failures, 0);
            assert!(row.mean.is_finite());
        }
        let arg = rows.iter().find(|r| r.measure == "argument_stability").unwrap();
        assert!(arg.bound.is_some());
        assert_eq!(arg.bound_valid, Some(true));
        assert!(!all_cells_failed(&rows));
    }

    #[test]
    fn sweep_is_deterministic_across_runs() {
        let cfg = base_config();
        let a = run_sweep(&cfg, &[42, 43], 1).unwrap();
        let b = run_sweep(&cfg, &[42, 43], 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn topology_sweep_reports_lambda_per_kind() {
        let mut cfg = base_config();
        cfg.sweep = Some(SweepBlock {
            axis: SweepAxis::Topology,
            values: Vec::new(),
            topologies: vec![TopologyKind::Complete, TopologyKind::Ring],
        });
        let rows = run_sweep(&cfg, &[42, 43], 2).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].value, "complete");
        assert!(rows[0].lambda.abs() < 1e-12);
        assert_eq!(rows[3].value, "ring");
        assert!(rows[3].lambda > 0.0);
    }

    #[test]
    fn missing_sweep_block_is_an_error() {
        let mut cfg = base_config();
        cfg.sweep = None;
        assert!(run_sweep(&cfg, &[42], 1).is_err());
    }
}
