//! Distributed datasets and neighboring pairs.
//!
//! A distributed dataset is m local datasets of n samples each, drawn i.i.d.
//! from the problem's declared sample space: every payload block is Gaussian
//! noise, norm-clipped at `clip * noise * sqrt(dim)`, around a per-agent
//! center `shift_i * 1`. Clipping keeps the support inside the block radius
//! the problem's gradient bound was computed for, and its symmetric form
//! leaves the mean exact and the second moment in closed form (chi-square
//! CDF), so population risks for quadratics stay analytic.
//!
//! A neighboring pair replaces exactly one uniformly chosen sample per agent
//! with a fresh draw from the same agent's distribution: the flattened
//! Hamming distance between the two datasets is exactly m.

use crate::error::{Error, Result};
use crate::linalg::l2_norm;
use crate::problems::{Problem, Sample, SampleSpace};
use crate::seeds;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Distribution controls shared by all payload blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataParams {
    /// Standard deviation of each payload coordinate before clipping.
    pub noise: f64,
    /// Clip multiple: the centered payload block is clipped to norm
    /// `clip * noise * sqrt(dim)`.
    pub clip: f64,
    /// Heterogeneity: agent i's blocks are centered at `shift_i * 1` with
    /// shift_i evenly spaced in [-shift_scale, shift_scale].
    pub shift_scale: f64,
}

impl Default for DataParams {
    fn default() -> Self {
        DataParams { noise: 1.0, clip: 3.0, shift_scale: 0.0 }
    }
}

/// m local datasets of n samples each, plus everything needed to redraw from
/// the same distribution (fresh replacement samples, population moments).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedDataset {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub params: DataParams,
    /// Per-agent center coefficient (payload centers are shift * 1).
    pub shifts: Vec<f64>,
    pub locals: Vec<Vec<Sample>>,
    sample_space: SampleSpace,
}

/// A dataset and a copy differing in exactly one sample per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPair {
    pub s: DistributedDataset,
    pub s_prime: DistributedDataset,
    /// Zero-based replaced index r_i per agent.
    pub replaced: Vec<usize>,
}

/// Evenly spaced agent centers in [-shift_scale, shift_scale].
pub fn agent_shifts(m: usize, shift_scale: f64) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    (0..m)
        .map(|i| shift_scale * (2.0 * i as f64 / (m as f64 - 1.0) - 1.0))
        .collect()
}

/// Draws one sample for the given agent from its distribution.
fn draw_sample(space: &SampleSpace, params: &DataParams, shift: f64, rng: &mut ChaCha8Rng) -> Sample {
    let mut payload = Vec::with_capacity(space.payload_len());
    for block in &space.blocks {
        let mut centered: Vec<f64> = (0..block.dim)
            .map(|_| params.noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let clip_radius = params.clip * params.noise * (block.dim as f64).sqrt();
        let norm = l2_norm(&centered);
        if norm > clip_radius && norm > 0.0 {
            let s = clip_radius / norm;
            for v in &mut centered {
                *v *= s;
            }
        }
        payload.extend(centered.into_iter().map(|v| v + shift));
    }
    let label = space.label_prior.map(|p| if rng.gen_bool(p) { 1i8 } else { -1 });
    Sample { payload, label }
}

/// Generates a distributed dataset; a pure function of (problem, sizes,
/// params, seed).
pub fn generate(
    problem: &Problem,
    m: usize,
    n: usize,
    params: &DataParams,
    seed: u64,
) -> Result<DistributedDataset> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("m/n", "agent and sample counts must be positive"));
    }
    if params.noise < 0.0 || params.clip <= 0.0 || params.shift_scale < 0.0 {
        return Err(Error::invalid("distribution", "noise >= 0, clip > 0, shift_scale >= 0"));
    }
    let space = &problem.spec.sample_space;
    // The declared block radius must contain the support, otherwise the
    // problem's gradient bound would not cover generated data.
    for block in &space.blocks {
        let reach = (block.dim as f64).sqrt() * (params.shift_scale + params.clip * params.noise);
        if reach > block.radius + 1e-12 {
            return Err(Error::invalid(
                "distribution",
                format!(
                    "support radius {reach:.6} exceeds declared block radius {:.6}; \
                     lower shift_scale/noise or enlarge payload_radius",
                    block.radius
                ),
            ));
        }
    }
    let shifts = agent_shifts(m, params.shift_scale);
    let locals: Vec<Vec<Sample>> = (0..m)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0x6e4, i as u64]));
            (0..n).map(|_| draw_sample(space, params, shifts[i], &mut rng)).collect()
        })
        .collect();
    Ok(DistributedDataset {
        m,
        n,
        seed,
        params: *params,
        shifts,
        locals,
        sample_space: space.clone(),
    })
}

/// Builds a neighboring pair: for each agent one uniformly chosen index is
/// replaced by a fresh draw from that agent's own distribution.
pub fn make_neighbor(s: &DistributedDataset, seed: u64) -> NeighborPair {
    let mut s_prime = s.clone();
    let mut replaced = Vec::with_capacity(s.m);
    for i in 0..s.m {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0x4e19, i as u64]));
        let r = rng.gen_range(0..s.n);
        // Redraw until the sample actually differs (immediate for continuous
        // payloads; guards the degenerate noise = 0 case).
        let mut fresh = draw_sample(&s.sample_space, &s.params, s.shifts[i], &mut rng);
        let mut tries = 0;
        while fresh == s.locals[i][r] && tries < 100 {
            fresh = draw_sample(&s.sample_space, &s.params, s.shifts[i], &mut rng);
            tries += 1;
        }
        s_prime.locals[i][r] = fresh;
        replaced.push(r);
    }
    NeighborPair { s: s.clone(), s_prime, replaced }
}

impl DistributedDataset {
    /// Draws fresh samples from the across-agents mixture distribution,
    /// cycling agent centers; used for weak-stability probe sets.
    pub fn draw_probes(&self, seed: u64, count: usize) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(&[seed, 0x9806e]));
        (0..count)
            .map(|j| {
                let agent = j % self.m;
                draw_sample(&self.sample_space, &self.params, self.shifts[agent], &mut rng)
            })
            .collect()
    }
}

/// Flattened Hamming distance between two datasets of identical shape.
pub fn hamming(a: &DistributedDataset, b: &DistributedDataset) -> usize {
    let mut count = 0;
    for (la, lb) in a.locals.iter().zip(&b.locals) {
        for (sa, sb) in la.iter().zip(lb) {
            if sa != sb {
                count += 1;
            }
        }
    }
    count
}

/// Second moment E|g|^2 of a dim-dimensional Gaussian with per-coordinate
/// standard deviation `noise`, norm-clipped at `clip * noise * sqrt(dim)`.
///
/// With Q ~ chi-square(dim) and threshold q0 = clip^2 dim:
/// E[min(Q, q0)] = dim F_{dim+2}(q0) + q0 (1 - F_dim(q0)), using the identity
/// integral_0^x q f_dim(q) dq = dim F_{dim+2}(x).
pub fn clipped_gaussian_second_moment(dim: usize, noise: f64, clip: f64) -> f64 {
    if noise == 0.0 {
        return 0.0;
    }
    let d = dim as f64;
    let q0 = clip * clip * d;
    let chi_d = ChiSquared::new(d).expect("dim >= 1");
    let chi_d2 = ChiSquared::new(d + 2.0).expect("dim + 2 >= 3");
    noise * noise * (d * chi_d2.cdf(q0) + q0 * (1.0 - chi_d.cdf(q0)))
}

/// Mixture moments of one payload block across agents: the mean center
/// coefficient and the expected squared norm E|block|^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMoments {
    /// Coefficient c such that the mixture mean is c * 1.
    pub center: f64,
    /// E|block|^2 under the across-agents mixture.
    pub second_moment: f64,
}

/// Closed-form mixture moments per payload block for a dataset's generating
/// distribution. Exact thanks to the symmetric clip.
pub fn population_moments(dataset: &DistributedDataset) -> Vec<BlockMoments> {
    let m = dataset.m as f64;
    let mean_shift: f64 = dataset.shifts.iter().sum::<f64>() / m;
    let mean_sq_shift: f64 = dataset.shifts.iter().map(|s| s * s).sum::<f64>() / m;
    dataset
        .sample_space
        .blocks
        .iter()
        .map(|b| {
            let noise_part = clipped_gaussian_second_moment(b.dim, dataset.params.noise, dataset.params.clip);
            BlockMoments {
                center: mean_shift,
                second_moment: mean_sq_shift * b.dim as f64 + noise_part,
            }
        })
        .collect()
}

/// Writes a lossless text snapshot: `m n seed` header, then one line per
/// sample (`agent index payload... [label]`), payloads in shortest
/// round-trip decimal.
pub fn save_snapshot(dataset: &DistributedDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{} {} {}\n", dataset.m, dataset.n, dataset.seed));
    for (i, local) in dataset.locals.iter().enumerate() {
        for (l, sample) in local.iter().enumerate() {
            out.push_str(&format!("{i} {l}"));
            for v in &sample.payload {
                out.push_str(&format!(" {v}"));
            }
            if let Some(lab) = sample.label {
                out.push_str(&format!(" L{lab}"));
            }
            out.push('\n');
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a snapshot written by [`save_snapshot`]. The problem supplies the
/// sample-space structure; distribution params are not round-tripped, so the
/// result supports replay but not fresh redraws.
pub fn load_snapshot(problem: &Problem, path: &Path) -> Result<DistributedDataset> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("snapshot", "empty file"))??;
    let head: Vec<u64> = header
        .split_whitespace()
        .map(|t| t.parse::<u64>().map_err(|_| Error::invalid("snapshot", "bad header")))
        .collect::<Result<_>>()?;
    let &[m, n, seed] = head.as_slice() else {
        return Err(Error::invalid("snapshot", "header must be `m n seed`"));
    };
    let (m, n) = (m as usize, n as usize);
    let space = problem.spec.sample_space.clone();
    let plen = space.payload_len();
    let mut locals = vec![vec![Sample::unlabeled(vec![]); n]; m];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let i: usize = toks[0].parse().map_err(|_| Error::invalid("snapshot", "bad agent index"))?;
        let l: usize = toks[1].parse().map_err(|_| Error::invalid("snapshot", "bad sample index"))?;
        if i >= m || l >= n {
            return Err(Error::invalid("snapshot", "index outside header shape"));
        }
        let mut payload = Vec::with_capacity(plen);
        let mut label = None;
        for tok in &toks[2..] {
            if let Some(rest) = tok.strip_prefix('L') {
                label = Some(rest.parse::<i8>().map_err(|_| Error::invalid("snapshot", "bad label"))?);
            } else {
                payload.push(tok.parse::<f64>().map_err(|_| Error::invalid("snapshot", "bad payload"))?);
            }
        }
        if payload.len() != plen {
            return Err(Error::invalid("snapshot", "payload length mismatch"));
        }
        locals[i][l] = Sample { payload, label };
    }
    Ok(DistributedDataset {
        m,
        n,
        seed,
        params: DataParams::default(),
        shifts: agent_shifts(m, 0.0),
        locals,
        sample_space: space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, ProblemParams, QuadScscParams};

    fn quad() -> Problem {
        make_problem(&ProblemParams::QuadScsc(QuadScscParams::default())).unwrap()
    }

    #[test]
    fn generate_is_deterministic_and_shaped() {
        let p = quad();
        let a = generate(&p, 2, 3, &DataParams::default(), 7).unwrap();
        let b = generate(&p, 2, 3, &DataParams::default(), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.locals.len(), 2);
        assert!(a.locals.iter().all(|l| l.len() == 3));
        let c = generate(&p, 2, 3, &DataParams::default(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn neighbor_pair_differs_in_exactly_one_slot_per_agent() {
        let p = quad();
        let s = generate(&p, 5, 4, &DataParams::default(), 7).unwrap();
        let pair = make_neighbor(&s, 99);
        assert_eq!(hamming(&pair.s, &pair.s_prime), 5);
        for (i, &r) in pair.replaced.iter().enumerate() {
            assert_ne!(pair.s.locals[i][r], pair.s_prime.locals[i][r]);
        }
    }

    #[test]
    fn single_sample_dataset_forces_replacement_index_zero() {
        let p = quad();
        let s = generate(&p, 3, 1, &DataParams::default(), 7).unwrap();
        let pair = make_neighbor(&s, 1);
        assert_eq!(pair.replaced, vec![0, 0, 0]);
    }

    #[test]
    fn clipped_second_moment_approaches_dim_for_wide_clips() {
        // With clip -> infinity the moment is the unclipped E|g|^2 = dim.
        let wide = clipped_gaussian_second_moment(3, 1.0, 20.0);
        assert!((wide - 3.0).abs() < 1e-9, "got {wide}");
        // Tight clip shrinks it strictly.
        let tight = clipped_gaussian_second_moment(3, 1.0, 1.0);
        assert!(tight < 3.0);
        assert!(tight > 0.0);
    }
}
