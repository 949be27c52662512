//! Experiment configuration: one TOML file describes a problem, a topology,
//! a data distribution, a run, an optional sweep axis, and output targets.
//!
//! Everything that affects numbers lives in this file (seeds included), so a
//! config plus the binary version is an exact replay recipe. The only
//! accepted overrides are CLI flags for the output directory, worker count,
//! and seed base. Parse errors surface toml's line-anchored messages;
//! cross-field problems name the offending table and key.

use crate::data::DataParams;
use crate::engine::{RecordLevel, RunConfig, Schedule};
use crate::error::{Error, Result};
use crate::problems::{make_problem, Problem, ProblemParams};
use crate::topology::{
    build_topology, load_matrix_file, MixingMatrix, TopologyKind, Weighting,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemParams,
    pub topology: TopologyBlock,
    pub data: DataBlock,
    pub run: RunBlock,
    /// At most one sweep axis; absent means a single run.
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub outputs: OutputsBlock,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyBlock {
    pub kind: TopologyKind,
    pub m: usize,
    #[serde(default = "default_weighting")]
    pub weighting: Weighting,
    /// Dense matrix file for `kind = "custom"`, resolved against the config
    /// file's directory.
    pub matrix_path: Option<PathBuf>,
}

fn default_weighting() -> Weighting {
    Weighting::Metropolis
}

impl TopologyBlock {
    /// Builds the mixing matrix this block describes.
    pub fn build(&self) -> Result<MixingMatrix> {
        match self.kind {
            TopologyKind::Custom => {
                let path = self.matrix_path.as_ref().ok_or_else(|| {
                    Error::Config("[topology]: custom kind needs matrix_path".into())
                })?;
                let w = load_matrix_file(path)?;
                if self.m != 0 && w.m() != self.m {
                    return Err(Error::Config(format!(
                        "[topology]: matrix has {} agents but m = {}",
                        w.m(),
                        self.m
                    )));
                }
                Ok(w)
            }
            kind => build_topology(kind, self.m, self.weighting),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    /// Samples per agent.
    pub n: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default)]
    pub shift_scale: f64,
    /// Debug mode: the "neighbor" dataset is an exact copy, so every measured
    /// stability must come out exactly zero.
    #[serde(default)]
    pub identical_neighbor: bool,
}

fn default_noise() -> f64 {
    1.0
}

fn default_clip() -> f64 {
    3.0
}

impl DataBlock {
    pub fn params(&self) -> DataParams {
        DataParams { noise: self.noise, clip: self.clip, shift_scale: self.shift_scale }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub rounds: usize,
    pub local_steps: usize,
    pub schedule: Schedule,
    /// Project onto the problem's declared balls after every local step.
    #[serde(default = "default_projection")]
    pub projection: bool,
    /// Explicit seed list; wins over seed_base/seed_count.
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_seed_base")]
    pub seed_base: u64,
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    #[serde(default = "default_record_level")]
    pub record_level: RecordLevel,
}

fn default_projection() -> bool {
    true
}

fn default_seed_base() -> u64 {
    42
}

fn default_seed_count() -> usize {
    20
}

fn default_record_level() -> RecordLevel {
    RecordLevel::Averages
}

impl RunBlock {
    /// The seed list to execute: explicit, or consecutive from the base
    /// (optionally overridden on the command line).
    pub fn resolve_seeds(&self, seed_base_override: Option<u64>) -> Vec<u64> {
        match (&self.seeds, seed_base_override) {
            (Some(list), None) if !list.is_empty() => list.clone(),
            _ => {
                let base = seed_base_override.unwrap_or(self.seed_base);
                (0..self.seed_count as u64).map(|r| base.wrapping_add(r)).collect()
            }
        }
    }

    /// Per-run engine config for one seed. Projection uses the problem's own
    /// radii; a problem without declared radii runs unconstrained.
    pub fn run_config(&self, problem: &Problem, seed: u64) -> RunConfig {
        let projection = if self.projection {
            problem.spec.radius_x.zip(problem.spec.radius_y)
        } else {
            None
        };
        RunConfig {
            rounds: self.rounds,
            local_steps: self.local_steps,
            seed,
            projection,
            record_level: self.record_level,
        }
    }
}

/// Sweepable experiment factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    LearningRate,
    Nodes,
    LocalSteps,
    SampleSize,
    Topology,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::LearningRate => "learning_rate",
            SweepAxis::Nodes => "nodes",
            SweepAxis::LocalSteps => "local_steps",
            SweepAxis::SampleSize => "sample_size",
            SweepAxis::Topology => "topology",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: SweepAxis,
    /// Numeric levels for the numeric axes.
    #[serde(default)]
    pub values: Vec<f64>,
    /// Topology levels for the topology axis.
    #[serde(default)]
    pub topologies: Vec<TopologyKind>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsBlock {
    pub directory: PathBuf,
    /// Subset of {"csv", "json", "svg"}; controls what sweep emits.
    pub formats: Vec<String>,
}

impl Default for OutputsBlock {
    fn default() -> Self {
        OutputsBlock {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into(), "svg".into()],
        }
    }
}

impl OutputsBlock {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

impl ExperimentConfig {
    /// Parses and fully validates a config file. Relative matrix paths are
    /// resolved against the config file's directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(matrix) = &config.topology.matrix_path {
            if matrix.is_relative() {
                if let Some(dir) = path.parent() {
                    config.topology.matrix_path = Some(dir.join(matrix));
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Cross-field validation; every check names its table.
    pub fn validate(&self) -> Result<()> {
        make_problem(&self.problem)
            .map_err(|e| Error::Config(format!("[problem]: {e}")))?;
        self.topology
            .build()
            .map_err(|e| Error::Config(format!("[topology]: {e}")))?;
        if self.data.n == 0 {
            return Err(Error::Config("[data]: n must be >= 1".into()));
        }
        if self.run.rounds == 0 || self.run.local_steps == 0 {
            return Err(Error::Config("[run]: rounds and local_steps must be >= 1".into()));
        }
        self.run
            .schedule
            .validate()
            .map_err(|e| Error::Config(format!("[run.schedule]: {e}")))?;
        if self.run.resolve_seeds(None).is_empty() {
            return Err(Error::Config("[run]: empty seed list".into()));
        }
        if let Some(sweep) = &self.sweep {
            self.validate_sweep(sweep)?;
        }
        for format in &self.outputs.formats {
            if !matches!(format.as_str(), "csv" | "json" | "svg") {
                return Err(Error::Config(format!(
                    "[outputs]: unknown format '{format}' (known: csv, json, svg)"
                )));
            }
        }
        Ok(())
    }

    fn validate_sweep(&self, sweep: &SweepBlock) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("[sweep]: {msg}")));
        match sweep.axis {
            SweepAxis::Topology => {
                if !sweep.values.is_empty() {
                    return fail("topology axis takes `topologies`, not `values`".into());
                }
                if sweep.topologies.is_empty() {
                    return fail("topology axis needs a nonempty `topologies` list".into());
                }
                if sweep.topologies.contains(&TopologyKind::Custom) {
                    return fail("custom matrices cannot be sweep levels".into());
                }
            }
            axis => {
                if !sweep.topologies.is_empty() {
                    return fail(format!(
                        "axis {} takes `values`, not `topologies`",
                        axis.name()
                    ));
                }
                if sweep.values.is_empty() {
                    return fail(format!("axis {} needs a nonempty `values` list", axis.name()));
                }
                let integral = !matches!(axis, SweepAxis::LearningRate);
                for &v in &sweep.values {
                    if !v.is_finite() || v <= 0.0 {
                        return fail(format!("level {v} must be finite and positive"));
                    }
                    if integral && v.fract() != 0.0 {
                        return fail(format!("axis {} needs integer levels, got {v}", axis.name()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Constants file for the bound table front-end: the raw inputs plus the two
/// optional measured quantities some rows consume.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    pub grad_bound: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub pl_constant: Option<f64>,
    pub value_bound: Option<f64>,
    pub lambda: f64,
    pub rounds: usize,
    pub local_steps: usize,
    pub agents: usize,
    pub samples_per_agent: usize,
    pub radius_x: Option<f64>,
    pub radius_y: Option<f64>,
    pub schedule: Schedule,
    /// Measured argument stability, feeding the generalization-gap rows.
    pub epsilon: Option<f64>,
    /// Measured sup of the excess empirical primal risk.
    pub ep_empirical_sup: Option<f64>,
}

impl BoundConstants {
    pub fn load(path: &Path) -> Result<BoundConstants> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        kind = "quad_scsc"

        [topology]
        kind = "complete"
        m = 2

        [data]
        n = 10

        [run]
        rounds = 5
        local_steps = 2
        schedule = { kind = "fixed", c = 0.01 }
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        assert_eq!(config.topology.weighting, Weighting::Metropolis);
        assert_eq!(config.data.clip, 3.0);
        assert!(config.run.projection);
        assert_eq!(config.run.resolve_seeds(None).len(), 20);
        assert_eq!(config.run.resolve_seeds(None)[0], 42);
        assert_eq!(config.run.resolve_seeds(Some(7))[0], 7);
        assert!(config.sweep.is_none());
        assert_eq!(config.outputs.directory, PathBuf::from("out"));
    }

    #[test]
    fn explicit_seed_list_wins_unless_overridden() {
        let text = format!("{MINIMAL}\n[run.extra]\n");
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
        let mut config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.run.seeds = Some(vec![5, 9]);
        assert_eq!(config.run.resolve_seeds(None), vec![5, 9]);
        assert_eq!(config.run.resolve_seeds(Some(100))[0], 100);
    }

    #[test]
    fn sweep_axis_value_kinds_are_enforced() {
        let mut config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        config.sweep = Some(SweepBlock {
            axis: SweepAxis::Nodes,
            values: vec![4.0, 8.5],
            topologies: vec![],
        });
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("[sweep]") && err.contains("integer"), "{err}");

        config.sweep = Some(SweepBlock {
            axis: SweepAxis::Topology,
            values: vec![],
            topologies: vec![TopologyKind::Complete, TopologyKind::Ring],
        });
        config.validate().unwrap();

        config.sweep = Some(SweepBlock {
            axis: SweepAxis::Topology,
            values: vec![1.0],
            topologies: vec![TopologyKind::Ring],
        });
        assert!(config.validate().is_err());
    }

    #[test]
    fn parse_errors_carry_line_anchors() {
        let bad = MINIMAL.replace("rounds = 5", "rounds = \"five\"");
        let err = toml::from_str::<ExperimentConfig>(&bad).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn projection_follows_problem_radii() {
        let config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        let problem = make_problem(&config.problem).unwrap();
        let cfg = config.run.run_config(&problem, 3);
        assert_eq!(cfg.projection, Some((1.0, 1.0)));
        assert_eq!(cfg.seed, 3);
    }
}
