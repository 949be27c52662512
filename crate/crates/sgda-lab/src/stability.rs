//! Stability measurement via coupled runs, and saddle-point risk evaluation.
//!
//! A coupled run executes the algorithm twice with a bit-identical sample
//! index stream: once on a dataset S and once on a neighbor S' differing in
//! one sample per agent. The distance between the two trajectories' agent
//! averages after each step is the measured sensitivity; its value at the
//! output is the argument stability of that run. Averaging over independent
//! (dataset, replacement, stream) seeds estimates the expected stability.
//!
//! Risk functionals on the saddle objective come in two flavors per problem
//! kind: closed form where the inner optimization is analytic (spherical
//! concave quadratics project onto the ball, linear objectives hit the
//! boundary, bounded sines peak at +-pi/2), and a projected-gradient inner
//! solver elsewhere. Every reported number carries a tag saying how it was
//! produced and, for Monte Carlo estimates, a standard error.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::data::{population_moments, BlockMoments, DataParams, DistributedDataset, NeighborPair};
use crate::data::{generate, make_neighbor};
use crate::engine::{schedule_rate, RunConfig, SampleStream, Schedule};
use crate::error::{Error, Result};
use crate::linalg::{l2_norm, project_ball};
use crate::problems::{mean_shift_blocks, Problem, ProblemKind, Sample};
use crate::seeds;
use crate::topology::{mix, MixingMatrix};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Fresh mixture draws appended to the probe set beyond the two datasets.
pub const FRESH_PROBES: usize = 64;

/// Inner-solver stopping tolerance on the projected step displacement.
const INNER_TOL: f64 = 1e-8;

/// Multi-start count for non-analytic inner optimizations.
const INNER_STARTS: usize = 8;

/// How a risk number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RiskMethod {
    Analytic,
    InnerSolver { iterations: usize },
    MonteCarlo { samples: usize, std_error: f64 },
}

impl RiskMethod {
    /// The weaker of two provenance tags; solver iterations accumulate.
    fn join(self, other: RiskMethod) -> RiskMethod {
        use RiskMethod::*;
        match (self, other) {
            (MonteCarlo { samples, std_error }, _) | (_, MonteCarlo { samples, std_error }) => {
                MonteCarlo { samples, std_error }
            }
            (InnerSolver { iterations: a }, InnerSolver { iterations: b }) => {
                InnerSolver { iterations: a + b }
            }
            (InnerSolver { iterations }, Analytic) | (Analytic, InnerSolver { iterations }) => {
                InnerSolver { iterations }
            }
            (Analytic, Analytic) => Analytic,
        }
    }
}

/// A risk value plus the provenance of its computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskValue {
    pub value: f64,
    #[serde(flatten)]
    pub method: RiskMethod,
}

/// One sensitivity sample along a coupled run. `k = None` marks the
/// post-communication measurement of round `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaRecord {
    pub t: usize,
    pub k: Option<usize>,
    pub delta: f64,
}

/// The result of one coupled run.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOutcome {
    /// Joint distance between the two outputs (the last recorded delta).
    pub argument: f64,
    /// Squared x- and y-parts of the final distance.
    pub split_squared: (f64, f64),
    /// x-part of the final distance (primal stability).
    pub primal: f64,
    /// Output (x, y) of the run on S.
    pub output_first: (Vec<f64>, Vec<f64>),
    /// Output (x, y) of the run on S'.
    pub output_second: (Vec<f64>, Vec<f64>),
    /// Sensitivity after every local step and every communication.
    pub deltas: Vec<DeltaRecord>,
}

fn mean_rows(states: &Array2<f64>) -> Vec<f64> {
    let m = states.nrows() as f64;
    (0..states.ncols())
        .map(|j| (0..states.nrows()).map(|i| states[[i, j]]).sum::<f64>() / m)
        .collect()
}

/// Squared distances between the agent averages of two coupled state pairs.
fn split_distance(
    x1: &Array2<f64>,
    y1: &Array2<f64>,
    x2: &Array2<f64>,
    y2: &Array2<f64>,
) -> (f64, f64) {
    let (mx1, my1) = (mean_rows(x1), mean_rows(y1));
    let (mx2, my2) = (mean_rows(x2), mean_rows(y2));
    let dx: f64 = mx1.iter().zip(&mx2).map(|(a, b)| (a - b) * (a - b)).sum();
    let dy: f64 = my1.iter().zip(&my2).map(|(a, b)| (a - b) * (a - b)).sum();
    (dx, dy)
}

/// Runs the algorithm on both halves of a neighboring pair under one shared
/// index stream and records the sensitivity after every step.
pub fn run_coupled(
    problem: &Problem,
    pair: &NeighborPair,
    w: &MixingMatrix,
    schedule: &Schedule,
    config: &RunConfig,
    stream: &SampleStream,
) -> Result<CoupledOutcome> {
    config.validate()?;
    schedule.validate()?;
    if pair.s.m != w.m() {
        return Err(Error::invalid(
            "pair",
            format!("datasets have {} agents but topology has {}", pair.s.m, w.m()),
        ));
    }
    let m = pair.s.m;
    let n = pair.s.n;
    let dx = problem.spec.d_x;
    let dy = problem.spec.d_y;

    let mut x1 = Array2::<f64>::zeros((m, dx));
    let mut y1 = Array2::<f64>::zeros((m, dy));
    let mut x2 = x1.clone();
    let mut y2 = y1.clone();
    let mut cur_x = vec![0.0; dx];
    let mut cur_y = vec![0.0; dy];
    let mut gx = vec![0.0; dx];
    let mut gy = vec![0.0; dy];
    let mut deltas = Vec::with_capacity(config.rounds * (config.local_steps + 1));

    let step_one = |x: &mut Array2<f64>,
                    y: &mut Array2<f64>,
                    sample: &Sample,
                    i: usize,
                    rate: f64,
                    cur_x: &mut [f64],
                    cur_y: &mut [f64],
                    gx: &mut [f64],
                    gy: &mut [f64]|
     -> bool {
        for idx in 0..dx {
            cur_x[idx] = x[[i, idx]];
        }
        for idx in 0..dy {
            cur_y[idx] = y[[i, idx]];
        }
        problem.grad_into(cur_x, cur_y, sample, gx, gy);
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
        (0..dx).all(|idx| x[[i, idx]].is_finite()) && (0..dy).all(|idx| y[[i, idx]].is_finite())
    };

    for t in 1..=config.rounds {
        for k in 0..config.local_steps {
            let rate = schedule_rate(schedule, t, k)?;
            for i in 0..m {
                let j = stream.index(t, k, i, n);
                let ok = step_one(
                    &mut x1,
                    &mut y1,
                    &pair.s.locals[i][j],
                    i,
                    rate,
                    &mut cur_x,
                    &mut cur_y,
                    &mut gx,
                    &mut gy,
                ) && step_one(
                    &mut x2,
                    &mut y2,
                    &pair.s_prime.locals[i][j],
                    i,
                    rate,
                    &mut cur_x,
                    &mut cur_y,
                    &mut gx,
                    &mut gy,
                );
                if !ok {
                    return Err(Error::Divergence {
                        round: t,
                        step: k,
                        what: format!("agent {i} produced a non-finite coordinate"),
                    });
                }
            }
            let (sx, sy) = split_distance(&x1, &y1, &x2, &y2);
            deltas.push(DeltaRecord { t, k: Some(k), delta: (sx + sy).sqrt() });
        }
        x1 = mix(w, &x1)?;
        y1 = mix(w, &y1)?;
        x2 = mix(w, &x2)?;
        y2 = mix(w, &y2)?;
        let (sx, sy) = split_distance(&x1, &y1, &x2, &y2);
        deltas.push(DeltaRecord { t, k: None, delta: (sx + sy).sqrt() });
    }

    let (sx, sy) = split_distance(&x1, &y1, &x2, &y2);
    Ok(CoupledOutcome {
        argument: (sx + sy).sqrt(),
        split_squared: (sx, sy),
        primal: sx.sqrt(),
        output_first: (mean_rows(&x1), mean_rows(&y1)),
        output_second: (mean_rows(&x2), mean_rows(&y2)),
        deltas,
    })
}

/// Aggregated stability statistics over repeated coupled runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Successful repeats contributing to the statistics.
    pub repeats: usize,
    /// Diverged repeats (recorded, never silently dropped).
    pub failures: usize,
    pub argument_mean: f64,
    pub argument_std: f64,
    pub primal_mean: f64,
    pub primal_std: f64,
    /// Mean squared x-part of the final distance.
    pub split_x_mean: f64,
    /// Mean squared y-part of the final distance.
    pub split_y_mean: f64,
    /// Probe-set estimate of the weak stability (analytic inner sups).
    pub weak_estimate: RiskValue,
}

/// A stability report plus the raw per-repeat outcomes behind it.
#[derive(Debug, Clone)]
pub struct StabilityStudy {
    pub report: StabilityReport,
    pub outcomes: Vec<CoupledOutcome>,
    /// Union of the first pair's datasets plus fresh mixture draws.
    pub probes: Vec<Sample>,
    pub failures: Vec<String>,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// All samples of a dataset in agent order.
pub fn flattened_samples(dataset: &DistributedDataset) -> Vec<Sample> {
    dataset.locals.iter().flatten().cloned().collect()
}

/// Repeats coupled runs over the listed seeds and aggregates the measured
/// stabilities. Each seed derives its own dataset, replacement, and stream;
/// diverged repeats are counted, not hidden. `identical_neighbor` replaces
/// the perturbed dataset with an exact copy (a debugging mode in which every
/// measured stability must be exactly zero).
pub fn measure_stability(
    problem: &Problem,
    w: &MixingMatrix,
    schedule: &Schedule,
    run_cfg: &RunConfig,
    data: &DataParams,
    n: usize,
    run_seeds: &[u64],
    identical_neighbor: bool,
) -> Result<StabilityStudy> {
    if run_seeds.is_empty() {
        return Err(Error::invalid("seeds", "at least one seed is required"));
    }
    let m = w.m();
    let mut outcomes = Vec::with_capacity(run_seeds.len());
    let mut failures = Vec::new();
    let mut probes: Vec<Sample> = Vec::new();
    for (r, &seed) in run_seeds.iter().enumerate() {
        let dataset = generate(problem, m, n, data, seeds::mix(&[seed, 0xda7a]))?;
        let pair = if identical_neighbor {
            NeighborPair { s: dataset.clone(), s_prime: dataset, replaced: vec![0; m] }
        } else {
            make_neighbor(&dataset, seeds::mix(&[seed, 0x9a12]))
        };
        let stream_seed = seeds::mix(&[seed, 0x57e9]);
        let cfg = RunConfig { seed: stream_seed, ..*run_cfg };
        match run_coupled(problem, &pair, w, schedule, &cfg, &SampleStream::new(stream_seed)) {
            Ok(outcome) => {
                if probes.is_empty() {
                    probes = flattened_samples(&pair.s);
                    probes.extend(flattened_samples(&pair.s_prime));
                    probes.extend(
                        pair.s.draw_probes(seeds::mix(&[run_seeds[0], 0x9806e]), FRESH_PROBES),
                    );
                }
                outcomes.push(outcome);
            }
            Err(e @ Error::Divergence { .. }) => failures.push(format!("repeat {r}: {e}")),
            Err(e) => return Err(e),
        }
    }
    if outcomes.is_empty() {
        return Err(Error::invalid(
            "seeds",
            format!("all {} repeats diverged; first: {}", run_seeds.len(), failures[0]),
        ));
    }
    let weak = weak_stability_estimate(problem, &outcomes, &probes)?;
    let args: Vec<f64> = outcomes.iter().map(|o| o.argument).collect();
    let prims: Vec<f64> = outcomes.iter().map(|o| o.primal).collect();
    let (argument_mean, argument_std) = mean_std(&args);
    let (primal_mean, primal_std) = mean_std(&prims);
    let split_x_mean =
        outcomes.iter().map(|o| o.split_squared.0).sum::<f64>() / outcomes.len() as f64;
    let split_y_mean =
        outcomes.iter().map(|o| o.split_squared.1).sum::<f64>() / outcomes.len() as f64;
    Ok(StabilityStudy {
        report: StabilityReport {
            repeats: outcomes.len(),
            failures: failures.len(),
            argument_mean,
            argument_std,
            primal_mean,
            primal_std,
            split_x_mean,
            split_y_mean,
            weak_estimate: weak,
        },
        outcomes,
        probes,
        failures,
    })
}

fn need_radius(radius: Option<f64>, which: &'static str) -> Result<f64> {
    radius.ok_or_else(|| {
        Error::invalid(which, "this operation needs a finite domain radius")
    })
}

/// (min, max) of sin over the interval [lo, hi].
fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) || hi - lo >= 2.0 * PI {
        return (-1.0, 1.0);
    }
    let mut mn = lo.sin().min(hi.sin());
    let mut mx = lo.sin().max(hi.sin());
    let k_up = ((lo - FRAC_PI_2) / (2.0 * PI)).ceil();
    if FRAC_PI_2 + 2.0 * PI * k_up <= hi {
        mx = 1.0;
    }
    let k_dn = ((lo + FRAC_PI_2) / (2.0 * PI)).ceil();
    if -FRAC_PI_2 + 2.0 * PI * k_dn <= hi {
        mn = -1.0;
    }
    (mn, mx)
}

/// max over |y| <= radius (or all reals for None) of coef * sin(y).
fn sup_scaled_sin(coef: f64, radius: Option<f64>) -> f64 {
    let cap = radius.unwrap_or(FRAC_PI_2).min(FRAC_PI_2);
    coef.abs() * cap.sin()
}

/// Amplitude R and phase phi with mean_j sin(x - xi_j) = R sin(x - phi).
fn sin_mixture(samples: &[Sample]) -> (f64, f64) {
    let n = samples.len() as f64;
    let c: f64 = samples.iter().map(|s| s.payload[0].cos()).sum::<f64>() / n;
    let s: f64 = samples.iter().map(|s| s.payload[0].sin()).sum::<f64>() / n;
    ((c * c + s * s).sqrt(), s.atan2(c))
}

/// Probe-set estimate of the weak stability across repeated coupled runs.
///
/// For each probe sample the free-variable sup of the mean trajectory-pair
/// objective difference is exact: curvature terms cancel inside the
/// difference, leaving an affine (or pure-sine) function of the probe-side
/// variable. The estimate is the max over probes of the larger one-sided sup,
/// symmetrized over the two run orderings.
pub fn weak_stability_estimate(
    problem: &Problem,
    outcomes: &[CoupledOutcome],
    probes: &[Sample],
) -> Result<RiskValue> {
    if outcomes.is_empty() || probes.is_empty() {
        return Err(Error::invalid("probes", "need at least one outcome and one probe"));
    }
    let nr = outcomes.len() as f64;
    let dx = problem.spec.d_x;
    let dy = problem.spec.d_y;
    // Mean output differences across repeats.
    let mut mdx = vec![0.0; dx];
    let mut mdy = vec![0.0; dy];
    for o in outcomes {
        for i in 0..dx {
            mdx[i] += (o.output_first.0[i] - o.output_second.0[i]) / nr;
        }
        for i in 0..dy {
            mdy[i] += (o.output_first.1[i] - o.output_second.1[i]) / nr;
        }
    }

    let mut best = 0.0f64;
    for probe in probes {
        problem.value(&outcomes[0].output_first.0, &outcomes[0].output_first.1, probe)?;
        let (primal_sup, dual_sup) = match &problem.kind {
            ProblemKind::Quad { d, mu, coupling } => {
                let a = &probe.payload[..*d];
                let b = &probe.payload[*d..];
                let mut c0p = 0.0;
                let mut c0d = 0.0;
                for o in outcomes {
                    let (x1, y1) = (&o.output_first.0, &o.output_first.1);
                    let (x2, y2) = (&o.output_second.0, &o.output_second.1);
                    let sq = |v: &[f64], c: &[f64]| -> f64 {
                        v.iter().zip(c).map(|(vi, ci)| (vi - ci) * (vi - ci)).sum()
                    };
                    c0p += 0.5 * mu * (sq(x1, a) - sq(x2, a)) / nr;
                    c0d += -0.5 * mu * (sq(y1, b) - sq(y2, b)) / nr;
                }
                let by = need_radius(problem.spec.radius_y, "radius_y")?;
                let bx = need_radius(problem.spec.radius_x, "radius_x")?;
                (
                    c0p.abs() + by * coupling.abs() * l2_norm(&mdx),
                    c0d.abs() + bx * coupling.abs() * l2_norm(&mdy),
                )
            }
            ProblemKind::Bilinear { d, coupling } => {
                let a = &probe.payload[..*d];
                let b = &probe.payload[*d..];
                let c0p: f64 = a.iter().zip(&mdx).map(|(ai, di)| ai * di).sum();
                let c0d: f64 = b.iter().zip(&mdy).map(|(bi, di)| bi * di).sum();
                let by = need_radius(problem.spec.radius_y, "radius_y")?;
                let bx = need_radius(problem.spec.radius_x, "radius_x")?;
                (
                    c0p.abs() + by * coupling.abs() * l2_norm(&mdx),
                    c0d.abs() + bx * coupling.abs() * l2_norm(&mdy),
                )
            }
            ProblemKind::Auc { features, prior, .. } => {
                let p = *prior;
                let z = &probe.payload[..*features];
                let pos = probe.label == Some(1);
                let lin = if pos { -2.0 * (1.0 - p) } else { 2.0 * p };
                let zero_alpha = [0.0];
                let mut c0p = 0.0;
                let mut c1p = 0.0;
                let mut c0d = 0.0;
                let mut c1d = 0.0;
                for o in outcomes {
                    let (v1, al1) = (&o.output_first.0, o.output_first.1[0]);
                    let (v2, al2) = (&o.output_second.0, o.output_second.1[0]);
                    let wz = |v: &[f64]| -> f64 {
                        v[..*features].iter().zip(z).map(|(wi, zi)| wi * zi).sum()
                    };
                    c0p += (problem.value_unchecked(v1, &zero_alpha, probe)
                        - problem.value_unchecked(v2, &zero_alpha, probe))
                        / nr;
                    c1p += lin * (wz(v1) - wz(v2)) / nr;
                    c0d += -p * (1.0 - p) * (al1 * al1 - al2 * al2) / nr;
                    c1d += lin * (al1 - al2) / nr;
                }
                let b_dual = need_radius(problem.spec.radius_y, "radius_y")?;
                let b_primal = need_radius(problem.spec.radius_x, "radius_x")?;
                (c0p.abs() + b_dual * c1p.abs(), c0d.abs() + b_primal * c1d.abs() * l2_norm(z))
            }
            ProblemKind::PlSc { coupling, mu } => {
                let xi = probe.payload[0];
                let mut c0p = 0.0;
                let mut c0d = 0.0;
                for o in outcomes {
                    let (x1, y1) = (o.output_first.0[0], o.output_first.1[0]);
                    let (x2, y2) = (o.output_second.0[0], o.output_second.1[0]);
                    let h = |x: f64| -> f64 {
                        let u = x - xi;
                        u * u + 3.0 * u.sin().powi(2)
                    };
                    c0p += (h(x1) - h(x2)) / nr;
                    c0d += -0.5 * mu * (y1 * y1 - y2 * y2) / nr;
                }
                let by = need_radius(problem.spec.radius_y, "radius_y")?;
                let bx = need_radius(problem.spec.radius_x, "radius_x")?;
                (
                    c0p.abs() + by * coupling.abs() * mdx[0].abs(),
                    c0d.abs() + bx * coupling.abs() * mdy[0].abs(),
                )
            }
            ProblemKind::Ncnc { amplitude } => {
                let xi = probe.payload[0];
                let mut coef_p = 0.0;
                let mut coef_d = 0.0;
                for o in outcomes {
                    let (x1, y1) = (o.output_first.0[0], o.output_first.1[0]);
                    let (x2, y2) = (o.output_second.0[0], o.output_second.1[0]);
                    coef_p += amplitude * ((x1 - xi).sin() - (x2 - xi).sin()) / nr;
                    coef_d += amplitude * (y1.sin() - y2.sin()) / nr;
                }
                let primal = sup_scaled_sin(coef_p, problem.spec.radius_y);
                let dual = match problem.spec.radius_x {
                    None => coef_d.abs(),
                    Some(bx) => {
                        let (mn, mx) = sin_range(-bx - xi, bx - xi);
                        (coef_d * mn).max(coef_d * mx)
                    }
                };
                (primal, dual)
            }
        };
        best = best.max(primal_sup).max(dual_sup);
    }
    Ok(RiskValue { value: best, method: RiskMethod::Analytic })
}

/// Mean objective value over a sample set.
pub fn empirical_value(problem: &Problem, samples: &[Sample], x: &[f64], y: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "empty sample set"));
    }
    problem.value(x, y, &samples[0])?;
    let n = samples.len() as f64;
    Ok(samples.iter().map(|s| problem.value_unchecked(x, y, s)).sum::<f64>() / n)
}

struct Solved {
    point: Vec<f64>,
    iterations: usize,
}

/// Monotone projected gradient descent with Armijo backtracking, best of
/// several starts. `eval` returns the value and fills the gradient.
fn pgd_min<F>(radius: f64, eval: &F, starts: &[Vec<f64>], max_iter: usize) -> Solved
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let dim = starts[0].len();
    let mut grad = vec![0.0; dim];
    let mut grad_next = vec![0.0; dim];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut total_iters = 0;
    for s0 in starts {
        let mut p = s0.clone();
        project_ball(&mut p, radius);
        let mut v = eval(&p, &mut grad);
        let mut step = 1.0;
        for _ in 0..max_iter {
            total_iters += 1;
            let mut accepted = false;
            while step >= 1e-16 {
                let mut q: Vec<f64> =
                    p.iter().zip(&grad).map(|(pi, gi)| pi - step * gi).collect();
                project_ball(&mut q, radius);
                let disp_sq: f64 = q.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
                if disp_sq == 0.0 {
                    break;
                }
                let vq = eval(&q, &mut grad_next);
                if vq <= v - 1e-4 * disp_sq / step {
                    p = q;
                    v = vq;
                    std::mem::swap(&mut grad, &mut grad_next);
                    step = (step * 2.0).min(1e6);
                    accepted = true;
                    if disp_sq.sqrt() <= INNER_TOL {
                        // One more pass confirms stationarity at this scale.
                        accepted = false;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
            best = Some((v, p));
        }
    }
    let (_, point) = best.expect("at least one start");
    Solved { point, iterations: total_iters }
}

/// Deterministic multi-start set: the center plus seeded points in the ball.
fn solver_starts(dim: usize, radius: f64, count: usize, tag: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[0x50da, tag]));
    let mut starts = vec![vec![0.0; dim]];
    while starts.len() < count {
        let mut p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0) * radius).collect();
        project_ball(&mut p, radius * 0.95);
        starts.push(p);
    }
    starts
}

/// Grid scan plus golden-section refinement for one-dimensional minima.
fn scalar_min<F: Fn(f64) -> f64>(lo: f64, hi: f64, eval: &F) -> (f64, usize) {
    const GRID: usize = 1024;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..=GRID {
        let x = lo + (hi - lo) * i as f64 / GRID as f64;
        let v = eval(x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = lo + (hi - lo) * best_i.saturating_sub(1) as f64 / GRID as f64;
    let mut b = lo + (hi - lo) * (best_i + 1).min(GRID) as f64 / GRID as f64;
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut evals = GRID + 1;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    while b - a > 1e-12 {
        evals += 1;
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    ((a + b) / 2.0, evals)
}

/// Best response of the dual player: argmax over the y-ball of the mean
/// objective at fixed x. Analytic for every kind.
fn sup_dual_point(problem: &Problem, samples: &[Sample], x: &[f64]) -> Result<(Vec<f64>, RiskMethod)> {
    match &problem.kind {
        ProblemKind::Quad { d, mu, coupling } => {
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let (_, bbar) = mean_shift_blocks(samples, *d);
            let mut y: Vec<f64> =
                (0..*d).map(|i| bbar[i] + coupling / mu * x[i]).collect();
            project_ball(&mut y, by);
            Ok((y, RiskMethod::Analytic))
        }
        ProblemKind::Bilinear { d, coupling } => {
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let (_, bbar) = mean_shift_blocks(samples, *d);
            let coef: Vec<f64> = (0..*d).map(|i| coupling * x[i] + bbar[i]).collect();
            let norm = l2_norm(&coef);
            let y = if norm < 1e-300 {
                vec![0.0; *d]
            } else {
                coef.iter().map(|c| by * c / norm).collect()
            };
            Ok((y, RiskMethod::Analytic))
        }
        ProblemKind::Auc { features, prior, .. } => {
            let b = need_radius(problem.spec.radius_y, "radius_y")?;
            let p = *prior;
            let n = samples.len() as f64;
            let mut c1 = 0.0;
            for s in samples {
                let wz: f64 =
                    s.payload[..*features].iter().zip(x).map(|(zi, wi)| zi * wi).sum();
                c1 += if s.label == Some(1) { -2.0 * (1.0 - p) * wz } else { 2.0 * p * wz } / n;
            }
            let curv = 2.0 * p * (1.0 - p);
            let alpha = if curv > 0.0 {
                (c1 / curv).clamp(-b, b)
            } else if c1 == 0.0 {
                0.0
            } else {
                b * c1.signum()
            };
            Ok((vec![alpha], RiskMethod::Analytic))
        }
        ProblemKind::PlSc { coupling, mu } => {
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            Ok((vec![(coupling * x[0] / mu).clamp(-by, by)], RiskMethod::Analytic))
        }
        ProblemKind::Ncnc { amplitude } => {
            let (r, phi) = sin_mixture(samples);
            let coef = amplitude * r * (x[0] - phi).sin();
            let cap = problem.spec.radius_y.unwrap_or(FRAC_PI_2).min(FRAC_PI_2);
            Ok((vec![coef.signum() * cap], RiskMethod::Analytic))
        }
    }
}

/// Best response of the primal player: argmin over the x-ball of the mean
/// objective at fixed y. Analytic where possible, inner solver otherwise.
fn inf_primal_point(
    problem: &Problem,
    samples: &[Sample],
    y: &[f64],
) -> Result<(Vec<f64>, RiskMethod)> {
    match &problem.kind {
        ProblemKind::Quad { d, mu, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let (abar, _) = mean_shift_blocks(samples, *d);
            let mut x: Vec<f64> =
                (0..*d).map(|i| abar[i] - coupling / mu * y[i]).collect();
            project_ball(&mut x, bx);
            Ok((x, RiskMethod::Analytic))
        }
        ProblemKind::Bilinear { d, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let (abar, _) = mean_shift_blocks(samples, *d);
            let coef: Vec<f64> = (0..*d).map(|i| coupling * y[i] + abar[i]).collect();
            let norm = l2_norm(&coef);
            let x = if norm < 1e-300 {
                vec![0.0; *d]
            } else {
                coef.iter().map(|c| -bx * c / norm).collect()
            };
            Ok((x, RiskMethod::Analytic))
        }
        ProblemKind::Auc { .. } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let dim = problem.spec.d_x;
            let n = samples.len() as f64;
            let mut gy = vec![0.0; problem.spec.d_y];
            let eval = |v: &[f64], g: &mut [f64]| -> f64 {
                g.iter_mut().for_each(|gi| *gi = 0.0);
                let mut gx = vec![0.0; v.len()];
                let mut total = 0.0;
                let mut gy_local = vec![0.0; 1];
                for s in samples {
                    problem.grad_into(v, y, s, &mut gx, &mut gy_local);
                    for (acc, gi) in g.iter_mut().zip(&gx) {
                        *acc += gi / n;
                    }
                    total += problem.value_unchecked(v, y, s) / n;
                }
                total
            };
            let _ = &mut gy;
            let starts = solver_starts(dim, bx, INNER_STARTS, 0xa0c);
            let solved = pgd_min(bx, &eval, &starts, 20_000);
            Ok((solved.point, RiskMethod::InnerSolver { iterations: solved.iterations }))
        }
        ProblemKind::PlSc { coupling, .. } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let n = samples.len() as f64;
            let eval = |x: f64| -> f64 {
                samples
                    .iter()
                    .map(|s| {
                        let u = x - s.payload[0];
                        u * u + 3.0 * u.sin().powi(2)
                    })
                    .sum::<f64>()
                    / n
                    + coupling * x * y[0]
            };
            let (x, evals) = scalar_min(-bx, bx, &eval);
            Ok((vec![x], RiskMethod::InnerSolver { iterations: evals }))
        }
        ProblemKind::Ncnc { amplitude } => {
            let (r, phi) = sin_mixture(samples);
            let q = amplitude * r * y[0].sin();
            let x = match problem.spec.radius_x {
                None => {
                    // Unbounded: the minimizer of q sin(x - phi) nearest zero.
                    let u = if q >= 0.0 { -FRAC_PI_2 } else { FRAC_PI_2 };
                    let mut x = phi + u;
                    while x > PI {
                        x -= 2.0 * PI;
                    }
                    while x < -PI {
                        x += 2.0 * PI;
                    }
                    x
                }
                Some(bx) => {
                    let mut candidates = vec![-bx, bx];
                    // Interior sine extrema.
                    for sign in [-1.0, 1.0] {
                        let mut u = phi + sign * FRAC_PI_2;
                        u -= 2.0 * PI * ((u + bx) / (2.0 * PI)).floor();
                        // u now in (-bx - 2pi, ...]; walk the lattice.
                        let mut c = u;
                        while c <= bx {
                            if c >= -bx {
                                candidates.push(c);
                            }
                            c += 2.0 * PI;
                        }
                    }
                    candidates
                        .into_iter()
                        .min_by(|a, b| {
                            (q * (a - phi).sin()).partial_cmp(&(q * (b - phi).sin())).unwrap()
                        })
                        .unwrap()
                }
            };
            Ok((vec![x], RiskMethod::Analytic))
        }
    }
}

/// Argmin over the x-ball of the primal risk sup_y F(x, y). Uses the analytic
/// dual best response inside (Danskin gradients where a solver is needed).
fn min_primal_point(problem: &Problem, samples: &[Sample]) -> Result<(Vec<f64>, RiskMethod)> {
    match &problem.kind {
        ProblemKind::Quad { d, mu, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let (abar, bbar) = mean_shift_blocks(samples, *d);
            if *coupling == 0.0 {
                let mut x = abar;
                project_ball(&mut x, bx);
                return Ok((x, RiskMethod::Analytic));
            }
            let eval = |x: &[f64], g: &mut [f64]| -> f64 {
                let mut ystar: Vec<f64> =
                    (0..*d).map(|i| bbar[i] + coupling / mu * x[i]).collect();
                project_ball(&mut ystar, by);
                for i in 0..*d {
                    g[i] = mu * (x[i] - abar[i]) + coupling * ystar[i];
                }
                // Value is only used for line-search comparisons.
                let sq_x: f64 = x.iter().zip(&abar).map(|(a, b)| (a - b) * (a - b)).sum();
                let sq_y: f64 =
                    ystar.iter().zip(&bbar).map(|(a, b)| (a - b) * (a - b)).sum();
                let cross: f64 = x.iter().zip(&ystar).map(|(a, b)| a * b).sum();
                0.5 * mu * sq_x - 0.5 * mu * sq_y + coupling * cross
            };
            let mut starts = solver_starts(*d, bx, 3, 0x9d);
            let mut near = abar.clone();
            project_ball(&mut near, bx);
            starts.push(near);
            let solved = pgd_min(bx, &eval, &starts, 20_000);
            Ok((solved.point, RiskMethod::InnerSolver { iterations: solved.iterations }))
        }
        ProblemKind::Bilinear { d, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let (abar, bbar) = mean_shift_blocks(samples, *d);
            // P(x) = abar . x + By |sigma x + bbar|; minimize over the ball.
            let eval = |x: &[f64], g: &mut [f64]| -> f64 {
                let coef: Vec<f64> = (0..*d).map(|i| coupling * x[i] + bbar[i]).collect();
                let norm = l2_norm(&coef);
                for i in 0..*d {
                    let sub = if norm < 1e-14 { 0.0 } else { coupling * coef[i] / norm };
                    g[i] = abar[i] + by * sub;
                }
                let lin: f64 = abar.iter().zip(x).map(|(a, b)| a * b).sum();
                lin + by * norm
            };
            let mut starts = solver_starts(*d, bx, INNER_STARTS - 1, 0xb1);
            if *coupling != 0.0 {
                // The norm kink is the natural candidate minimizer.
                let mut kink: Vec<f64> = bbar.iter().map(|b| -b / coupling).collect();
                project_ball(&mut kink, bx);
                starts.push(kink);
            }
            let solved = pgd_min(bx, &eval, &starts, 20_000);
            let mut g = vec![0.0; *d];
            let mut best = (eval(&solved.point, &mut g), solved.point.clone());
            for s in &starts {
                let v = eval(s, &mut g);
                if v < best.0 {
                    best = (v, s.clone());
                }
            }
            Ok((best.1, RiskMethod::InnerSolver { iterations: solved.iterations }))
        }
        ProblemKind::Auc { .. } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let dim = problem.spec.d_x;
            let n = samples.len() as f64;
            let eval = |v: &[f64], g: &mut [f64]| -> f64 {
                let (alpha, _) = sup_dual_point(problem, samples, v)
                    .expect("analytic dual best response");
                g.iter_mut().for_each(|gi| *gi = 0.0);
                let mut gx = vec![0.0; v.len()];
                let mut gy = vec![0.0; 1];
                let mut total = 0.0;
                for s in samples {
                    problem.grad_into(v, &alpha, s, &mut gx, &mut gy);
                    for (acc, gi) in g.iter_mut().zip(&gx) {
                        *acc += gi / n;
                    }
                    total += problem.value_unchecked(v, &alpha, s) / n;
                }
                total
            };
            let starts = solver_starts(dim, bx, INNER_STARTS, 0xa1c);
            let solved = pgd_min(bx, &eval, &starts, 20_000);
            Ok((solved.point, RiskMethod::InnerSolver { iterations: solved.iterations }))
        }
        ProblemKind::PlSc { .. } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let eval = |x: f64| -> f64 {
                let xv = [x];
                let (ystar, _) = sup_dual_point(problem, samples, &xv)
                    .expect("analytic dual best response");
                empirical_value(problem, samples, &xv, &ystar).expect("checked dims")
            };
            let (x, evals) = scalar_min(-bx, bx, &eval);
            Ok((vec![x], RiskMethod::InnerSolver { iterations: evals }))
        }
        ProblemKind::Ncnc { .. } => {
            let (_, phi) = sin_mixture(samples);
            // P(x) is proportional to |sin(x - phi)|: zero at x = phi + k pi.
            let x = match problem.spec.radius_x {
                None => {
                    let mut x = phi;
                    while x > PI {
                        x -= 2.0 * PI;
                    }
                    while x < -PI {
                        x += 2.0 * PI;
                    }
                    x
                }
                Some(bx) => {
                    let k = ((-bx - phi) / PI).ceil();
                    let zero = phi + k * PI;
                    if zero <= bx {
                        zero
                    } else {
                        // No zero of the sine inside the ball: endpoint min.
                        if (bx - phi).sin().abs() <= (-bx - phi).sin().abs() {
                            bx
                        } else {
                            -bx
                        }
                    }
                }
            };
            Ok((vec![x], RiskMethod::Analytic))
        }
    }
}

/// Weak primal-dual risk of a point on a sample set:
/// sup_{y'} F_S(x, y') - inf_{x'} F_S(x', y) over the domain balls.
pub fn weak_pd_risk(
    problem: &Problem,
    samples: &[Sample],
    x: &[f64],
    y: &[f64],
) -> Result<RiskValue> {
    let (ystar, m1) = sup_dual_point(problem, samples, x)?;
    let (xstar, m2) = inf_primal_point(problem, samples, y)?;
    let hi = empirical_value(problem, samples, x, &ystar)?;
    let lo = empirical_value(problem, samples, &xstar, y)?;
    Ok(RiskValue { value: hi - lo, method: m1.join(m2) })
}

/// Excess primal risk of a point on a sample set:
/// sup_y F_S(x, y) - min_{x'} sup_y F_S(x', y).
pub fn excess_primal_risk(problem: &Problem, samples: &[Sample], x: &[f64]) -> Result<RiskValue> {
    let (ystar, m1) = sup_dual_point(problem, samples, x)?;
    let (xmin, m2) = min_primal_point(problem, samples)?;
    let (ymin, m3) = sup_dual_point(problem, samples, &xmin)?;
    let hi = empirical_value(problem, samples, x, &ystar)?;
    let lo = empirical_value(problem, samples, &xmin, &ymin)?;
    Ok(RiskValue { value: hi - lo, method: m1.join(m2).join(m3) })
}

/// Generating-distribution mean objective for kinds with closed-form mixture
/// moments (payload enters linearly or through squared distances only).
fn population_value(
    problem: &Problem,
    moments: &[BlockMoments],
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    match &problem.kind {
        ProblemKind::Quad { mu, coupling, .. } => {
            let (ba, bb) = (&moments[0], &moments[1]);
            let sum_x: f64 = x.iter().sum();
            let sum_y: f64 = y.iter().sum();
            let sq_x: f64 = x.iter().map(|v| v * v).sum();
            let sq_y: f64 = y.iter().map(|v| v * v).sum();
            let cross: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            Ok(0.5 * mu * (sq_x - 2.0 * ba.center * sum_x + ba.second_moment)
                - 0.5 * mu * (sq_y - 2.0 * bb.center * sum_y + bb.second_moment)
                + coupling * cross)
        }
        ProblemKind::Bilinear { coupling, .. } => {
            let (ba, bb) = (&moments[0], &moments[1]);
            let sum_x: f64 = x.iter().sum();
            let sum_y: f64 = y.iter().sum();
            let cross: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            Ok(coupling * cross + ba.center * sum_x + bb.center * sum_y)
        }
        _ => Err(Error::Unsupported(
            "closed-form population values exist only for the quadratic kinds".into(),
        )),
    }
}

/// Weak primal-dual risk under the generating distribution. Closed form for
/// the quadratic kinds; Monte Carlo over fresh mixture draws otherwise.
pub fn population_weak_pd_risk(
    problem: &Problem,
    dataset: &DistributedDataset,
    x: &[f64],
    y: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<RiskValue> {
    match &problem.kind {
        ProblemKind::Quad { d, mu, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let moments = population_moments(dataset);
            let (ca, cb) = (moments[0].center, moments[1].center);
            let mut ystar: Vec<f64> = (0..*d).map(|i| cb + coupling / mu * x[i]).collect();
            project_ball(&mut ystar, by);
            let mut xstar: Vec<f64> = (0..*d).map(|i| ca - coupling / mu * y[i]).collect();
            project_ball(&mut xstar, bx);
            let hi = population_value(problem, &moments, x, &ystar)?;
            let lo = population_value(problem, &moments, &xstar, y)?;
            Ok(RiskValue { value: hi - lo, method: RiskMethod::Analytic })
        }
        ProblemKind::Bilinear { d, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let moments = population_moments(dataset);
            let (ca, cb) = (moments[0].center, moments[1].center);
            let coef_y: Vec<f64> = (0..*d).map(|i| coupling * x[i] + cb).collect();
            let ny = l2_norm(&coef_y);
            let ystar: Vec<f64> = if ny < 1e-300 {
                vec![0.0; *d]
            } else {
                coef_y.iter().map(|c| by * c / ny).collect()
            };
            let coef_x: Vec<f64> = (0..*d).map(|i| coupling * y[i] + ca).collect();
            let nx = l2_norm(&coef_x);
            let xstar: Vec<f64> = if nx < 1e-300 {
                vec![0.0; *d]
            } else {
                coef_x.iter().map(|c| -bx * c / nx).collect()
            };
            let hi = population_value(problem, &moments, x, &ystar)?;
            let lo = population_value(problem, &moments, &xstar, y)?;
            Ok(RiskValue { value: hi - lo, method: RiskMethod::Analytic })
        }
        _ => {
            let probes = dataset.draw_probes(seeds::mix(&[seed, 0x6c9e]), mc_samples.max(2));
            let (ystar, _) = sup_dual_point(problem, &probes, x)?;
            let (xstar, _) = inf_primal_point(problem, &probes, y)?;
            let per: Vec<f64> = probes
                .iter()
                .map(|s| {
                    problem.value_unchecked(x, &ystar, s) - problem.value_unchecked(&xstar, y, s)
                })
                .collect();
            let (mean, std) = mean_std(&per);
            Ok(RiskValue {
                value: mean,
                method: RiskMethod::MonteCarlo {
                    samples: per.len(),
                    std_error: std / (per.len() as f64).sqrt(),
                },
            })
        }
    }
}

/// Excess primal risk under the generating distribution. Closed form or
/// Danskin descent for the quadratic kinds; Monte Carlo otherwise.
pub fn population_excess_primal_risk(
    problem: &Problem,
    dataset: &DistributedDataset,
    x: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<RiskValue> {
    match &problem.kind {
        ProblemKind::Quad { d, mu, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let moments = population_moments(dataset);
            let (ca, cb) = (moments[0].center, moments[1].center);
            let sup_at = |x: &[f64]| -> Result<f64> {
                let mut ystar: Vec<f64> = (0..*d).map(|i| cb + coupling / mu * x[i]).collect();
                project_ball(&mut ystar, by);
                population_value(problem, &moments, x, &ystar)
            };
            let (xmin, method) = if *coupling == 0.0 {
                let mut xm = vec![ca; *d];
                project_ball(&mut xm, bx);
                (xm, RiskMethod::Analytic)
            } else {
                let eval = |xv: &[f64], g: &mut [f64]| -> f64 {
                    let mut ystar: Vec<f64> =
                        (0..*d).map(|i| cb + coupling / mu * xv[i]).collect();
                    project_ball(&mut ystar, by);
                    for i in 0..*d {
                        g[i] = mu * (xv[i] - ca) + coupling * ystar[i];
                    }
                    population_value(problem, &moments, xv, &ystar).expect("quad kind")
                };
                let mut starts = solver_starts(*d, bx, 3, 0x9e);
                let mut near = vec![ca; *d];
                project_ball(&mut near, bx);
                starts.push(near);
                let solved = pgd_min(bx, &eval, &starts, 20_000);
                (solved.point, RiskMethod::InnerSolver { iterations: solved.iterations })
            };
            Ok(RiskValue { value: sup_at(x)? - sup_at(&xmin)?, method })
        }
        ProblemKind::Bilinear { d, coupling } => {
            let bx = need_radius(problem.spec.radius_x, "radius_x")?;
            let by = need_radius(problem.spec.radius_y, "radius_y")?;
            let moments = population_moments(dataset);
            let (ca, cb) = (moments[0].center, moments[1].center);
            let primal = |xv: &[f64]| -> f64 {
                let lin: f64 = xv.iter().sum::<f64>() * ca;
                let coef: Vec<f64> = (0..*d).map(|i| coupling * xv[i] + cb).collect();
                lin + by * l2_norm(&coef)
            };
            let eval = |xv: &[f64], g: &mut [f64]| -> f64 {
                let coef: Vec<f64> = (0..*d).map(|i| coupling * xv[i] + cb).collect();
                let norm = l2_norm(&coef);
                for i in 0..*d {
                    let sub = if norm < 1e-14 { 0.0 } else { coupling * coef[i] / norm };
                    g[i] = ca + by * sub;
                }
                primal(xv)
            };
            let mut starts = solver_starts(*d, bx, INNER_STARTS - 1, 0xb2);
            if *coupling != 0.0 {
                let mut kink = vec![-cb / coupling; *d];
                project_ball(&mut kink, bx);
                starts.push(kink);
            }
            let solved = pgd_min(bx, &eval, &starts, 20_000);
            let mut best = primal(&solved.point);
            for s in &starts {
                best = best.min(primal(s));
            }
            Ok(RiskValue {
                value: primal(x) - best,
                method: RiskMethod::InnerSolver { iterations: solved.iterations },
            })
        }
        _ => {
            let probes = dataset.draw_probes(seeds::mix(&[seed, 0x6c9f]), mc_samples.max(2));
            let (ystar, _) = sup_dual_point(problem, &probes, x)?;
            let (xmin, _) = min_primal_point(problem, &probes)?;
            let (ymin, _) = sup_dual_point(problem, &probes, &xmin)?;
            let per: Vec<f64> = probes
                .iter()
                .map(|s| {
                    problem.value_unchecked(x, &ystar, s)
                        - problem.value_unchecked(&xmin, &ymin, s)
                })
                .collect();
            let (mean, std) = mean_std(&per);
            Ok(RiskValue {
                value: mean,
                method: RiskMethod::MonteCarlo {
                    samples: per.len(),
                    std_error: std / (per.len() as f64).sqrt(),
                },
            })
        }
    }
}

/// Empirical and population risks of one point, with their differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub weak_empirical: RiskValue,
    pub weak_population: RiskValue,
    /// population - empirical weak primal-dual risk.
    pub weak_gap: f64,
    pub excess_primal_empirical: RiskValue,
    pub excess_primal_population: RiskValue,
    /// population - empirical excess primal risk.
    pub excess_primal_gap: f64,
}

/// Measures both generalization gaps of a point on a dataset: the difference
/// between population and empirical risk, for the weak primal-dual and the
/// excess primal functionals.
pub fn generalization_gaps(
    problem: &Problem,
    dataset: &DistributedDataset,
    x: &[f64],
    y: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<GapReport> {
    let flat = flattened_samples(dataset);
    let weak_empirical = weak_pd_risk(problem, &flat, x, y)?;
    let weak_population = population_weak_pd_risk(problem, dataset, x, y, mc_samples, seed)?;
    let excess_primal_empirical = excess_primal_risk(problem, &flat, x)?;
    let excess_primal_population =
        population_excess_primal_risk(problem, dataset, x, mc_samples, seed)?;
    Ok(GapReport {
        weak_empirical,
        weak_population,
        weak_gap: weak_population.value - weak_empirical.value,
        excess_primal_empirical,
        excess_primal_population,
        excess_primal_gap: excess_primal_population.value - excess_primal_empirical.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RecordLevel;
    use crate::problems::{
        make_problem, NcncToyParams, PlScToyParams, ProblemParams, QuadScscParams,
    };
    use crate::topology::{build_topology, TopologyKind, Weighting};

    fn quad_problem(coupling: f64) -> Problem {
        make_problem(&ProblemParams::QuadScsc(QuadScscParams {
            coupling,
            ..QuadScscParams::default()
        }))
        .unwrap()
    }

    fn zero_mean_samples() -> Vec<Sample> {
        vec![
            Sample::unlabeled(vec![1.0, 0.5]),
            Sample::unlabeled(vec![-1.0, -0.5]),
        ]
    }

    #[test]
    fn weak_pd_risk_hand_value() {
        // mu = 1, no coupling, zero-mean samples, point (1, 0): the variance
        // terms cancel and the gap is mu/2 * |x|^2 = 0.5.
        let problem = quad_problem(0.0);
        let risk = weak_pd_risk(&problem, &zero_mean_samples(), &[1.0], &[0.0]).unwrap();
        assert!((risk.value - 0.5).abs() < 1e-15);
        assert_eq!(risk.method, RiskMethod::Analytic);
    }

    #[test]
    fn excess_primal_risk_hand_value() {
        let problem = quad_problem(0.0);
        let risk = excess_primal_risk(&problem, &zero_mean_samples(), &[1.0]).unwrap();
        assert!((risk.value - 0.5).abs() < 1e-15);
        assert_eq!(risk.method, RiskMethod::Analytic);
    }

    #[test]
    fn weak_pd_risk_is_nonnegative_at_feasible_points() {
        // Taking y' = y and x' = x inside the sups shows the gap >= 0.
        let problem = quad_problem(0.5);
        let samples = zero_mean_samples();
        for (x, y) in [([0.3], [0.2]), ([0.0], [0.0]), ([-0.9], [0.4])] {
            let risk = weak_pd_risk(&problem, &samples, &x, &y).unwrap();
            assert!(risk.value >= -1e-12, "gap {} at {x:?},{y:?}", risk.value);
        }
    }

    #[test]
    fn coupled_run_is_deterministic_and_neighbor_sized() {
        let problem = quad_problem(0.5);
        let dataset = generate(&problem, 4, 6, &DataParams::default(), 11).unwrap();
        let pair = make_neighbor(&dataset, 13);
        assert_eq!(crate::data::hamming(&pair.s, &pair.s_prime), 4);
        let w = build_topology(TopologyKind::Ring, 4, Weighting::Metropolis).unwrap();
        let cfg = RunConfig {
            rounds: 5,
            local_steps: 3,
            seed: 7,
            projection: Some((1.0, 1.0)),
            record_level: RecordLevel::Final,
        };
        let run = |_: ()| {
            run_coupled(&problem, &pair, &w, &Schedule::Fixed { c: 0.05 }, &cfg, &SampleStream::new(7))
                .unwrap()
        };
        let a = run(());
        let b = run(());
        assert_eq!(a, b);
        assert!(a.argument > 0.0);
        assert_eq!(a.deltas.len(), 5 * (3 + 1));
        // Gossip preserves agent averages, so the post-communication delta
        // matches the preceding pre-communication delta.
        let pre = a.deltas[2].delta;
        let post = a.deltas[3].delta;
        assert!((pre - post).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_coupled_run_has_zero_sensitivity() {
        let problem = quad_problem(0.5);
        let dataset = generate(&problem, 3, 4, &DataParams::default(), 2).unwrap();
        let pair = make_neighbor(&dataset, 3);
        let w = build_topology(TopologyKind::Complete, 3, Weighting::Metropolis).unwrap();
        let cfg = RunConfig {
            rounds: 2,
            local_steps: 2,
            seed: 1,
            projection: None,
            record_level: RecordLevel::Final,
        };
        let out =
            run_coupled(&problem, &pair, &w, &Schedule::Fixed { c: 0.0 }, &cfg, &SampleStream::new(1))
                .unwrap();
        assert_eq!(out.argument, 0.0);
        assert!(out.deltas.iter().all(|d| d.delta == 0.0));
    }

    #[test]
    fn weak_estimate_matches_brute_force_grid() {
        let problem = quad_problem(0.5);
        let outcome = CoupledOutcome {
            argument: 0.0,
            split_squared: (0.0, 0.0),
            primal: 0.0,
            output_first: (vec![0.3], vec![-0.2]),
            output_second: (vec![0.1], vec![0.4]),
            deltas: vec![],
        };
        let probe = Sample::unlabeled(vec![0.7, -0.3]);
        let est =
            weak_stability_estimate(&problem, &[outcome.clone()], &[probe.clone()]).unwrap();
        // Brute force: max over the free variable of |mean difference|.
        let mut brute = 0.0f64;
        for i in 0..=400 {
            let v = -1.0 + 2.0 * i as f64 / 400.0;
            let dp = problem.value(&outcome.output_first.0, &[v], &probe).unwrap()
                - problem.value(&outcome.output_second.0, &[v], &probe).unwrap();
            let dd = problem.value(&[v], &outcome.output_first.1, &probe).unwrap()
                - problem.value(&[v], &outcome.output_second.1, &probe).unwrap();
            brute = brute.max(dp.abs()).max(dd.abs());
        }
        // The difference is affine in the free variable, so the endpoint grid
        // values are exact.
        assert!((est.value - brute).abs() < 1e-12, "est {} brute {}", est.value, brute);
        assert!((est.value - 0.54).abs() < 1e-12);
    }

    #[test]
    fn ncnc_weak_estimate_matches_brute_force() {
        let problem =
            make_problem(&ProblemParams::NcncToy(NcncToyParams { amplitude: 2.0, ..Default::default() }))
                .unwrap();
        let outcome = CoupledOutcome {
            argument: 0.0,
            split_squared: (0.0, 0.0),
            primal: 0.0,
            output_first: (vec![0.4], vec![0.9]),
            output_second: (vec![-0.1], vec![0.2]),
            deltas: vec![],
        };
        let probe = Sample::unlabeled(vec![0.3]);
        let est =
            weak_stability_estimate(&problem, &[outcome.clone()], &[probe.clone()]).unwrap();
        let mut brute = 0.0f64;
        for i in 0..=40_000 {
            let v = -2.0 * PI + 4.0 * PI * i as f64 / 40_000.0;
            let dp = problem.value(&outcome.output_first.0, &[v], &probe).unwrap()
                - problem.value(&outcome.output_second.0, &[v], &probe).unwrap();
            let dd = problem.value(&[v], &outcome.output_first.1, &probe).unwrap()
                - problem.value(&[v], &outcome.output_second.1, &probe).unwrap();
            brute = brute.max(dp.abs()).max(dd.abs());
        }
        assert!((est.value - brute).abs() < 1e-6, "est {} brute {}", est.value, brute);
    }

    #[test]
    fn population_quad_risk_matches_empirical_shape() {
        let problem = quad_problem(0.0);
        let dataset = generate(&problem, 2, 50, &DataParams::default(), 9).unwrap();
        let risk = population_weak_pd_risk(&problem, &dataset, &[1.0], &[0.0], 0, 0).unwrap();
        // Same cancellation as the empirical case: exactly mu/2.
        assert!((risk.value - 0.5).abs() < 1e-12);
        assert_eq!(risk.method, RiskMethod::Analytic);
    }

    #[test]
    fn monte_carlo_population_risk_reports_std_error() {
        let problem = make_problem(&ProblemParams::PlScToy(PlScToyParams::default())).unwrap();
        let dataset = generate(&problem, 2, 10, &DataParams::default(), 4).unwrap();
        let risk =
            population_weak_pd_risk(&problem, &dataset, &[0.5], &[0.1], 400, 77).unwrap();
        match risk.method {
            RiskMethod::MonteCarlo { samples, std_error } => {
                assert_eq!(samples, 400);
                assert!(std_error.is_finite() && std_error >= 0.0);
            }
            other => panic!("expected Monte Carlo tag, got {other:?}"),
        }
        assert!(risk.value >= -1e-9);
    }

    #[test]
    fn pl_excess_primal_risk_is_nonnegative() {
        let problem = make_problem(&ProblemParams::PlScToy(PlScToyParams::default())).unwrap();
        let dataset = generate(&problem, 2, 8, &DataParams::default(), 21).unwrap();
        let flat = flattened_samples(&dataset);
        let risk = excess_primal_risk(&problem, &flat, &[0.5]).unwrap();
        assert!(risk.value >= -1e-8);
        assert!(matches!(risk.method, RiskMethod::InnerSolver { .. }));
    }

    #[test]
    fn measure_stability_aggregates_repeats() {
        let problem = quad_problem(0.5);
        let w = build_topology(TopologyKind::Ring, 4, Weighting::Metropolis).unwrap();
        let cfg = RunConfig {
            rounds: 4,
            local_steps: 2,
            seed: 0,
            projection: Some((1.0, 1.0)),
            record_level: RecordLevel::Final,
        };
        let study = measure_stability(
            &problem,
            &w,
            &Schedule::Fixed { c: 0.05 },
            &cfg,
            &DataParams::default(),
            8,
            &[1234, 1235, 1236, 1237, 1238],
            false,
        )
        .unwrap();
        assert_eq!(study.report.repeats, 5);
        assert_eq!(study.report.failures, 0);
        assert!(study.report.argument_mean > 0.0);
        assert!(study.report.argument_std >= 0.0);
        assert_eq!(study.probes.len(), 2 * 4 * 8 + FRESH_PROBES);
        assert!(study.report.weak_estimate.value > 0.0);
    }

    #[test]
    fn identical_neighbor_mode_reports_exactly_zero_stability() {
        let problem = quad_problem(0.5);
        let w = build_topology(TopologyKind::Ring, 4, Weighting::Metropolis).unwrap();
        let cfg = RunConfig {
            rounds: 3,
            local_steps: 2,
            seed: 0,
            projection: Some((1.0, 1.0)),
            record_level: RecordLevel::Final,
        };
        let study = measure_stability(
            &problem,
            &w,
            &Schedule::Fixed { c: 0.05 },
            &cfg,
            &DataParams::default(),
            6,
            &[7, 8],
            true,
        )
        .unwrap();
        assert_eq!(study.report.argument_mean, 0.0);
        assert_eq!(study.report.weak_estimate.value, 0.0);
    }
}
