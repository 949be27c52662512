//! Distributed SGDA execution: K local stochastic descent/ascent steps per
//! agent, one gossip communication, repeated for T rounds.
//!
//! The loop implements exactly
//!
//! ```text
//! init x_i = y_i = 0
//! for t = 1..T:
//!   for k = 0..K-1:                         # per agent i
//!     j   = stream(t, k, i)                 # counter-based index draw
//!     x_i <- x_i - rate(t,k) grad_x f(x_i, y_i; xi_{i,j})
//!     y_i <- y_i + rate(t,k) grad_y f(x_i, y_i; xi_{i,j})   (same pre-step point)
//!     optional projection onto (B_x, B_y) balls
//!   states <- W states                      # gossip
//! output: agent averages of the final communicated states
//! ```
//!
//! Everything is deterministic in (inputs, seed): index draws are a stateless
//! hash of (seed, t, k, i), so two coupled runs on neighboring datasets share
//! their sample indices without shared mutable state. Round index t starts at
//! 1 (decaying schedules divide by t); local index k starts at 0. Consensus
//! is measured on the pre-step state at each (t, k).

use crate::data::DistributedDataset;
use crate::error::{Error, Result};
use crate::linalg::project_ball;
use crate::problems::Problem;
use crate::seeds;
use crate::topology::{mix, MixingMatrix};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Learning-rate schedule. Fixed: c. Decaying: c / ((k+1)^alpha t^beta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Fixed { c: f64 },
    Decaying { c: f64, alpha: f64, beta: f64 },
}

impl Schedule {
    /// Base rate c.
    pub fn base(&self) -> f64 {
        match *self {
            Schedule::Fixed { c } => c,
            Schedule::Decaying { c, .. } => c,
        }
    }

    /// Structural validation: c >= 0 (zero only useful in tests), finite
    /// exponents. Guarantee-specific ranges on alpha/beta are checked where
    /// bounds are evaluated, not here.
    pub fn validate(&self) -> Result<()> {
        let c = self.base();
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::invalid("schedule", "base rate must be finite and >= 0"));
        }
        if let Schedule::Decaying { alpha, beta, .. } = *self {
            if !alpha.is_finite() || !beta.is_finite() {
                return Err(Error::invalid("schedule", "exponents must be finite"));
            }
        }
        Ok(())
    }
}

/// Learning rate at round t (from 1) and local step k (from 0).
pub fn schedule_rate(schedule: &Schedule, t: usize, k: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("t", "round index starts at 1"));
    }
    Ok(match *schedule {
        Schedule::Fixed { c } => c,
        Schedule::Decaying { c, alpha, beta } => {
            c / ((k as f64 + 1.0).powf(alpha) * (t as f64).powf(beta))
        }
    })
}

/// How much of a trajectory to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordLevel {
    /// Final output only.
    Final,
    /// Plus per-(t,k) agent averages and consensus.
    Averages,
    /// Plus full agent states per (t,k) and post-communication consensus.
    Full,
}

/// Run dimensions and options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rounds: usize,
    pub local_steps: usize,
    pub seed: u64,
    /// Ball radii (B_x, B_y); projection after every local step when set.
    pub projection: Option<(f64, f64)>,
    pub record_level: RecordLevel,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.local_steps == 0 {
            return Err(Error::invalid("config", "rounds and local_steps must be >= 1"));
        }
        if let Some((bx, by)) = self.projection {
            if bx <= 0.0 || by <= 0.0 {
                return Err(Error::invalid("config", "projection radii must be positive"));
            }
        }
        Ok(())
    }
}

/// Stateless sample-index stream: (t, k, i) -> j in [0, n).
///
/// Identical seeds give bit-identical streams regardless of the dataset the
/// indices are applied to, which is what couples two neighboring runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleStream {
    seed: u64,
}

impl SampleStream {
    pub fn new(seed: u64) -> Self {
        SampleStream { seed }
    }

    pub fn index(&self, t: usize, k: usize, i: usize, n: usize) -> usize {
        let h = seeds::mix(&[self.seed, t as u64, k as u64, i as u64]);
        (h % n as u64) as usize
    }
}

/// Per-(t,k) record: pre-step averages and consensus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub k: usize,
    pub rate: f64,
    /// Mean over agents of the joint deviation norm from the agent average.
    pub consensus: f64,
    pub avg_x: Vec<f64>,
    pub avg_y: Vec<f64>,
}

/// Full per-agent snapshot at one (t, k).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSnapshot {
    pub t: usize,
    pub k: usize,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

/// Everything a run records.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub m: usize,
    pub rounds: usize,
    pub local_steps: usize,
    /// Agent average of the last communicated states (the algorithm output).
    pub final_x: Vec<f64>,
    pub final_y: Vec<f64>,
    /// Mean of the pre-step averages over all (t, k); `None` below Averages.
    pub averaged_x: Option<Vec<f64>>,
    pub averaged_y: Option<Vec<f64>>,
    /// Per-(t,k) records in execution order; empty below Averages.
    pub records: Vec<StepRecord>,
    /// Post-communication consensus per round; recorded at Full.
    pub post_comm_consensus: Vec<(usize, f64)>,
    /// Full agent states per (t,k); recorded at Full.
    pub snapshots: Vec<AgentSnapshot>,
}

impl Trajectory {
    /// Uniform average over all recorded (t, k) of the pre-step averages.
    pub fn averaged_output(&self) -> Result<(&[f64], &[f64])> {
        match (&self.averaged_x, &self.averaged_y) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(Error::invalid(
                "record_level",
                "averaged output needs record_level >= averages",
            )),
        }
    }
}

/// Mean over agents of the joint deviation norm from the agent average.
pub fn consensus(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let m = x.nrows();
    let dx = x.ncols();
    let dy = y.ncols();
    let mut avg_x = vec![0.0; dx];
    let mut avg_y = vec![0.0; dy];
    for i in 0..m {
        for j in 0..dx {
            avg_x[j] += x[[i, j]];
        }
        for j in 0..dy {
            avg_y[j] += y[[i, j]];
        }
    }
    let mf = m as f64;
    for v in &mut avg_x {
        *v /= mf;
    }
    for v in &mut avg_y {
        *v /= mf;
    }
    let mut total = 0.0;
    for i in 0..m {
        let mut sq = 0.0;
        for j in 0..dx {
            let d = x[[i, j]] - avg_x[j];
            sq += d * d;
        }
        for j in 0..dy {
            let d = y[[i, j]] - avg_y[j];
            sq += d * d;
        }
        total += sq.sqrt();
    }
    total / mf
}

fn row_mean(states: &Array2<f64>) -> Vec<f64> {
    let m = states.nrows() as f64;
    (0..states.ncols())
        .map(|j| (0..states.nrows()).map(|i| states[[i, j]]).sum::<f64>() / m)
        .collect()
}

/// Executes the algorithm. Deterministic in (inputs, stream).
pub fn run(
    problem: &Problem,
    dataset: &DistributedDataset,
    w: &MixingMatrix,
    schedule: &Schedule,
    config: &RunConfig,
    stream: &SampleStream,
) -> Result<Trajectory> {
    config.validate()?;
    schedule.validate()?;
    if dataset.m != w.m() {
        return Err(Error::invalid(
            "dataset",
            format!("dataset has {} agents but topology has {}", dataset.m, w.m()),
        ));
    }
    let m = dataset.m;
    let n = dataset.n;
    let dx = problem.spec.d_x;
    let dy = problem.spec.d_y;
    let record = config.record_level;

    let mut x = Array2::<f64>::zeros((m, dx));
    let mut y = Array2::<f64>::zeros((m, dy));
    let mut cur_x = vec![0.0; dx];
    let mut cur_y = vec![0.0; dy];
    let mut gx = vec![0.0; dx];
    let mut gy = vec![0.0; dy];

    let total_steps = (config.rounds * config.local_steps) as f64;
    let mut sum_avg_x = vec![0.0; dx];
    let mut sum_avg_y = vec![0.0; dy];
    let mut records = Vec::new();
    let mut post_comm = Vec::new();
    let mut snapshots = Vec::new();

    for t in 1..=config.rounds {
        for k in 0..config.local_steps {
            let rate = schedule_rate(schedule, t, k)?;
            if record >= RecordLevel::Averages {
                let avg_x = row_mean(&x);
                let avg_y = row_mean(&y);
                for (acc, v) in sum_avg_x.iter_mut().zip(&avg_x) {
                    *acc += v / total_steps;
                }
                for (acc, v) in sum_avg_y.iter_mut().zip(&avg_y) {
                    *acc += v / total_steps;
                }
                records.push(StepRecord {
                    t,
                    k,
                    rate,
                    consensus: consensus(&x, &y),
                    avg_x,
                    avg_y,
                });
            }
            if record >= RecordLevel::Full {
                snapshots.push(AgentSnapshot { t, k, x: x.clone(), y: y.clone() });
            }
            for i in 0..m {
                let j = stream.index(t, k, i, n);
                let sample = &dataset.locals[i][j];
                for idx in 0..dx {
                    cur_x[idx] = x[[i, idx]];
                }
                for idx in 0..dy {
                    cur_y[idx] = y[[i, idx]];
                }
                problem.grad_into(&cur_x, &cur_y, sample, &mut gx, &mut gy);
                for idx in 0..dx {
                    x[[i, idx]] = cur_x[idx] - rate * gx[idx];
                }
                for idx in 0..dy {
                    y[[i, idx]] = cur_y[idx] + rate * gy[idx];
                }
                if let Some((bx, by)) = config.projection {
                    project_ball(x.row_mut(i).as_slice_mut().expect("row-major"), bx);
                    project_ball(y.row_mut(i).as_slice_mut().expect("row-major"), by);
                }
                let finite = (0..dx).all(|idx| x[[i, idx]].is_finite())
                    && (0..dy).all(|idx| y[[i, idx]].is_finite());
                if !finite {
                    return Err(Error::Divergence {
                        round: t,
                        step: k,
                        what: format!("agent {i} produced a non-finite coordinate"),
                    });
                }
            }
        }
        x = mix(w, &x)?;
        y = mix(w, &y)?;
        if record >= RecordLevel::Full {
            post_comm.push((t, consensus(&x, &y)));
        }
    }

    Ok(Trajectory {
        m,
        rounds: config.rounds,
        local_steps: config.local_steps,
        final_x: row_mean(&x),
        final_y: row_mean(&y),
        averaged_x: (record >= RecordLevel::Averages).then_some(sum_avg_x),
        averaged_y: (record >= RecordLevel::Averages).then_some(sum_avg_y),
        records,
        post_comm_consensus: post_comm,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, DataParams};
    use crate::problems::{make_problem, ProblemParams, QuadScscParams, Sample};
    use crate::topology::{build_topology, TopologyKind, Weighting};

    #[test]
    fn one_hand_computed_step() {
        // m=1, K=1, T=1, mu=1, A=0, sample (a=2, b=0), eta=0.1:
        // x1 = 0 - 0.1 * (0 - 2) = 0.2, y1 = 0.
        let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams {
            coupling: 0.0,
            payload_radius: Some(4.0),
            ..QuadScscParams::default()
        }))
        .unwrap();
        let mut dataset = generate(&problem, 1, 1, &DataParams::default(), 3).unwrap();
        dataset.locals[0][0] = Sample::unlabeled(vec![2.0, 0.0]);
        let w = build_topology(TopologyKind::Complete, 1, Weighting::Metropolis).unwrap();
        let config = RunConfig {
            rounds: 1,
            local_steps: 1,
            seed: 0,
            projection: None,
            record_level: RecordLevel::Averages,
        };
        let traj = run(
            &problem,
            &dataset,
            &w,
            &Schedule::Fixed { c: 0.1 },
            &config,
            &SampleStream::new(0),
        )
        .unwrap();
        assert!((traj.final_x[0] - 0.2).abs() < 1e-15);
        assert_eq!(traj.final_y[0], 0.0);
        // Averaged output over the single (t,k) is the zero initialization.
        let (ax, ay) = traj.averaged_output().unwrap();
        assert_eq!((ax[0], ay[0]), (0.0, 0.0));
    }

    #[test]
    fn consensus_hand_examples() {
        // m=2, x = {+1, -1}, no y: mean |deviation| = 1.
        let x = Array2::from_shape_vec((2, 1), vec![1.0, -1.0]).unwrap();
        let y = Array2::zeros((2, 0));
        assert_eq!(consensus(&x, &y), 1.0);
        // m=4, x = {2, 0, 0, 0}: mean deviation from 0.5 = (1.5 + 3*0.5)/4.
        let x = Array2::from_shape_vec((4, 1), vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        let y = Array2::zeros((4, 0));
        assert_eq!(consensus(&x, &y), 0.75);
    }

    #[test]
    fn schedule_rates_match_contract() {
        assert_eq!(
            schedule_rate(&Schedule::Fixed { c: 0.01 }, 17, 3).unwrap(),
            0.01
        );
        let dec = Schedule::Decaying { c: 1.0, alpha: 1.0, beta: 1.0 };
        assert_eq!(schedule_rate(&dec, 2, 1).unwrap(), 0.25);
        let dec2 = Schedule::Decaying { c: 1.0, alpha: 0.75, beta: 1.0 };
        assert_eq!(schedule_rate(&dec2, 1, 0).unwrap(), 1.0);
        assert!(schedule_rate(&dec, 0, 0).is_err());
    }

    #[test]
    fn zero_rate_keeps_trajectory_at_initialization() {
        let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams::default())).unwrap();
        let dataset = generate(&problem, 4, 3, &DataParams::default(), 5).unwrap();
        let w = build_topology(TopologyKind::Ring, 4, Weighting::Metropolis).unwrap();
        let config = RunConfig {
            rounds: 3,
            local_steps: 2,
            seed: 1,
            projection: None,
            record_level: RecordLevel::Averages,
        };
        let traj = run(
            &problem,
            &dataset,
            &w,
            &Schedule::Fixed { c: 0.0 },
            &config,
            &SampleStream::new(1),
        )
        .unwrap();
        assert!(traj.final_x.iter().all(|v| *v == 0.0));
        assert!(traj.records.iter().all(|r| r.consensus == 0.0));
    }

    #[test]
    fn sample_stream_is_dataset_independent_and_in_range() {
        let s = SampleStream::new(42);
        for t in 1..5 {
            for k in 0..4 {
                for i in 0..3 {
                    let j = s.index(t, k, i, 7);
                    assert!(j < 7);
                    assert_eq!(j, SampleStream::new(42).index(t, k, i, 7));
                }
            }
        }
    }
}
