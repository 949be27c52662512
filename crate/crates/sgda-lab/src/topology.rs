//! Gossip topologies: mixing-matrix construction, validation, and the
//! spectral constants consumed by every bound.
//!
//! A mixing matrix W is symmetric and doubly stochastic; its mixing quality
//! is summarized by `lambda`, the spectral norm of W - P_m where P_m is the
//! all-1/m averaging matrix. `lambda = 0` is full averaging; `lambda -> 1`
//! is a vanishing spectral gap. Powers of W approach P_m geometrically:
//! the spectral norm of W^k - P_m equals lambda^k, which doubles as a test
//! oracle here.
//!
//! The signed second-largest eigenvalue is reported alongside the magnitude
//! because the two differ on bipartite-ish graphs where the most negative
//! eigenvalue dominates.

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm_symmetric, symmetric_eigenvalues};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Largest agent count for exact dense eigendecomposition.
pub const MAX_AGENTS: usize = 512;

/// Named topology families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Complete,
    Ring,
    Star,
    Meshgrid,
    Exponential,
    Custom,
}

impl TopologyKind {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Complete => "complete",
            TopologyKind::Ring => "ring",
            TopologyKind::Star => "star",
            TopologyKind::Meshgrid => "meshgrid",
            TopologyKind::Exponential => "exponential",
            TopologyKind::Custom => "custom",
        }
    }
}

/// Edge-weight assignment rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// w_ij = 1/(1 + max(deg_i, deg_j)) on edges; self-weight tops up the row.
    /// Valid for arbitrary connected graphs.
    Metropolis,
    /// Lazy-walk weights: self 1/2, each neighbor 1/(2 deg). Symmetric only
    /// for regular graphs, so irregular families reject it.
    UniformNeighbor,
}

/// Symmetric doubly stochastic gossip matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    m: usize,
    weights: Array2<f64>,
}

/// lambda and the two derived constants used by decaying-rate bounds,
/// evaluated at a decay exponent alpha.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralConstants {
    /// Spectral norm of W - P_m: max magnitude over non-principal eigenvalues.
    pub lambda: f64,
    /// Second-largest eigenvalue with its sign, reported for transparency.
    pub lambda_signed: f64,
    pub c_lambda: f64,
    pub c_lambda_sq: f64,
    /// Decay exponent the C-constants were evaluated at.
    pub alpha: f64,
}

impl MixingMatrix {
    /// Validates and wraps an explicit weight matrix.
    pub fn from_weights(weights: Array2<f64>) -> Result<Self> {
        let m = weights.nrows();
        if m == 0 || weights.ncols() != m {
            return Err(Error::InvalidTopology {
                entry: format!("shape {}x{}", weights.nrows(), weights.ncols()),
                reason: "matrix must be square and nonempty".into(),
            });
        }
        if m > MAX_AGENTS {
            return Err(Error::InvalidTopology {
                entry: format!("m={m}"),
                reason: format!("exceeds dense eigendecomposition cap {MAX_AGENTS}"),
            });
        }
        for i in 0..m {
            for j in 0..m {
                let w = weights[[i, j]];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidTopology {
                        entry: format!("({i},{j})"),
                        reason: format!("weight {w} outside [0,1]"),
                    });
                }
                if weights[[i, j]] != weights[[j, i]] {
                    return Err(Error::InvalidTopology {
                        entry: format!("({i},{j})"),
                        reason: format!(
                            "asymmetric: {} vs {}",
                            weights[[i, j]],
                            weights[[j, i]]
                        ),
                    });
                }
            }
            let row: f64 = (0..m).map(|j| weights[[i, j]]).sum();
            if (row - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidTopology {
                    entry: format!("row {i}"),
                    reason: format!("sum {row} deviates from 1 beyond 1e-12"),
                });
            }
        }
        let matrix = MixingMatrix { m, weights };
        // Connectivity requirement: spectral gap must not vanish.
        let lam = matrix.lambda();
        if lam >= 1.0 - 1e-9 {
            return Err(Error::InvalidTopology {
                entry: "spectrum".into(),
                reason: format!("spectral gap vanishes: lambda = {lam}"),
            });
        }
        Ok(matrix)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Spectral norm of W - P_m.
    pub fn lambda(&self) -> f64 {
        let eig = self.non_principal_eigenvalues();
        eig.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// All eigenvalues except one copy of the principal eigenvalue 1.
    fn non_principal_eigenvalues(&self) -> Vec<f64> {
        let mut eig = symmetric_eigenvalues(&self.weights);
        // The principal eigenvalue of a connected doubly stochastic matrix is
        // the largest one; drop exactly one copy.
        eig.remove(0);
        eig
    }
}

/// Builds a named topology. `complete` always returns P_m regardless of the
/// weighting; `meshgrid` needs a perfect square m; `exponential` a power of
/// two. Irregular families (star, meshgrid) reject `UniformNeighbor`.
pub fn build_topology(kind: TopologyKind, m: usize, weighting: Weighting) -> Result<MixingMatrix> {
    if m == 0 {
        return Err(Error::invalid("m", "agent count must be positive"));
    }
    if m > MAX_AGENTS {
        return Err(Error::invalid("m", format!("exceeds cap {MAX_AGENTS}")));
    }
    if m == 1 {
        return MixingMatrix::from_weights(Array2::from_elem((1, 1), 1.0));
    }
    let adjacency: Vec<Vec<usize>> = match kind {
        TopologyKind::Complete => {
            return MixingMatrix::from_weights(Array2::from_elem((m, m), 1.0 / m as f64));
        }
        TopologyKind::Ring => (0..m)
            .map(|i| {
                let mut nb = vec![(i + 1) % m, (i + m - 1) % m];
                nb.sort_unstable();
                nb.dedup();
                nb.retain(|&j| j != i);
                nb
            })
            .collect(),
        TopologyKind::Star => (0..m)
            .map(|i| if i == 0 { (1..m).collect() } else { vec![0] })
            .collect(),
        TopologyKind::Meshgrid => {
            let side = (m as f64).sqrt().round() as usize;
            if side * side != m {
                return Err(Error::invalid("m", "meshgrid requires a perfect square"));
            }
            (0..m)
                .map(|i| {
                    let (r, c) = (i / side, i % side);
                    let mut nb = Vec::new();
                    if r > 0 {
                        nb.push(i - side);
                    }
                    if r + 1 < side {
                        nb.push(i + side);
                    }
                    if c > 0 {
                        nb.push(i - 1);
                    }
                    if c + 1 < side {
                        nb.push(i + 1);
                    }
                    nb
                })
                .collect()
        }
        TopologyKind::Exponential => {
            if !m.is_power_of_two() {
                return Err(Error::invalid("m", "exponential requires a power of two"));
            }
            (0..m)
                .map(|i| {
                    let mut nb: Vec<usize> = Vec::new();
                    let mut hop = 1;
                    while hop < m {
                        nb.push((i + hop) % m);
                        nb.push((i + m - hop % m) % m);
                        hop *= 2;
                    }
                    nb.sort_unstable();
                    nb.dedup();
                    nb.retain(|&j| j != i);
                    nb
                })
                .collect()
        }
        TopologyKind::Custom => {
            return Err(Error::invalid(
                "kind",
                "custom topologies load through MixingMatrix::from_weights or load_matrix_file",
            ));
        }
    };

    let deg: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    if let Weighting::UniformNeighbor = weighting {
        let d0 = deg[0];
        if deg.iter().any(|&d| d != d0) {
            return Err(Error::Unsupported(format!(
                "uniform_neighbor weights need a regular graph; {} is irregular at m={m}",
                kind.name()
            )));
        }
    }

    let mut w = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for &j in &adjacency[i] {
            let weight = match weighting {
                Weighting::Metropolis => 1.0 / (1.0 + deg[i].max(deg[j]) as f64),
                Weighting::UniformNeighbor => 1.0 / (2.0 * deg[i] as f64),
            };
            w[[i, j]] = weight;
        }
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| w[[i, j]]).sum();
        w[[i, i]] = 1.0 - off;
    }
    MixingMatrix::from_weights(w)
}

/// Evaluates lambda and the closed-form C-constants at decay exponent alpha.
///
/// C_lambda = (alpha/e)^alpha / (lambda (-ln lambda)^alpha)
///          + 2 / (e lambda (-ln lambda)) + 2^alpha / (lambda (-ln lambda));
/// C_lambda_sq is the same form at lambda^2. Full averaging short-circuits
/// both to 0.
pub fn spectral_constants(w: &MixingMatrix, alpha: f64) -> Result<SpectralConstants> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", "C-constants need 1/2 < alpha <= 1"));
    }
    let eig = w.non_principal_eigenvalues();
    let lambda = eig.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let lambda_signed = eig.first().copied().unwrap_or(0.0);
    if lambda >= 1.0 - 1e-9 {
        return Err(Error::InvalidTopology {
            entry: "spectrum".into(),
            reason: format!("spectral gap vanishes: lambda = {lambda}"),
        });
    }
    Ok(SpectralConstants {
        lambda,
        lambda_signed,
        c_lambda: c_constant(lambda, alpha),
        c_lambda_sq: c_constant(lambda * lambda, alpha),
        alpha,
    })
}

/// The three-term closed form; 0 below the numerical-zero threshold.
pub fn c_constant(lambda: f64, alpha: f64) -> f64 {
    if lambda < 1e-12 {
        return 0.0;
    }
    let neg_ln = -lambda.ln();
    let e = std::f64::consts::E;
    (alpha / e).powf(alpha) / (lambda * neg_ln.powf(alpha))
        + 2.0 / (e * lambda * neg_ln)
        + 2f64.powf(alpha) / (lambda * neg_ln)
}

/// One gossip round: returns W * states (row i mixes states by row i of W).
///
/// Accumulation runs over sources in ascending order so that results are
/// bit-reproducible; with W = P_m and a power-of-two m this makes mixing
/// bitwise identical to averaging the rows directly.
pub fn mix(w: &MixingMatrix, states: &Array2<f64>) -> Result<Array2<f64>> {
    if states.nrows() != w.m {
        return Err(Error::invalid(
            "states",
            format!("{} rows but topology has m = {}", states.nrows(), w.m),
        ));
    }
    let d = states.ncols();
    let mut out = Array2::<f64>::zeros((w.m, d));
    for i in 0..w.m {
        for h in 0..w.m {
            let weight = w.weights[[i, h]];
            if weight == 0.0 {
                continue;
            }
            for j in 0..d {
                out[[i, j]] += weight * states[[h, j]];
            }
        }
    }
    Ok(out)
}

/// Spectral norm of W^k - P_m; equals lambda^k up to rounding.
pub fn deviation_norm(w: &MixingMatrix, k: usize) -> f64 {
    let m = w.m;
    let mut power = Array2::<f64>::eye(m);
    for _ in 0..k {
        power = power.dot(&w.weights);
    }
    let pm = 1.0 / m as f64;
    let mut dev = power;
    for v in dev.iter_mut() {
        *v -= pm;
    }
    spectral_norm_symmetric(&dev)
}

/// Loads a custom dense matrix from whitespace-separated text, one row per
/// line, and validates it.
pub fn load_matrix_file(path: &Path) -> Result<MixingMatrix> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::InvalidTopology {
                        entry: format!("token '{tok}'"),
                        reason: "not a real number".into(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let m = rows.len();
    if m == 0 {
        return Err(Error::InvalidTopology {
            entry: "file".into(),
            reason: "no rows".into(),
        });
    }
    let mut weights = Array2::<f64>::zeros((m, m));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::InvalidTopology {
                entry: format!("row {i}"),
                reason: format!("{} entries, expected {m}", row.len()),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            weights[[i, j]] = v;
        }
    }
    MixingMatrix::from_weights(weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_is_the_averaging_matrix_with_zero_lambda() {
        let w = build_topology(TopologyKind::Complete, 4, Weighting::Metropolis).unwrap();
        for v in w.weights().iter() {
            assert_eq!(*v, 0.25);
        }
        assert!(w.lambda() < 1e-12);
    }

    #[test]
    fn ring4_uniform_neighbor_has_lambda_half() {
        // Circulant eigenvalues 1/2 + (1/2) cos(2 pi k / 4) = {1, 1/2, 0, 1/2}.
        let w = build_topology(TopologyKind::Ring, 4, Weighting::UniformNeighbor).unwrap();
        assert_eq!(w.weights()[[0, 0]], 0.5);
        assert_eq!(w.weights()[[0, 1]], 0.25);
        assert!((w.lambda() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn star3_metropolis_matches_hand_matrix_and_lambda_two_thirds() {
        let w = build_topology(TopologyKind::Star, 3, Weighting::Metropolis).unwrap();
        let third = 1.0 / 3.0;
        let expect = [
            [third, third, third],
            [third, 2.0 * third, 0.0],
            [third, 0.0, 2.0 * third],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((w.weights()[[i, j]] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert!((w.lambda() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn c_constant_at_half_and_three_quarters_matches_hand_evaluation() {
        // Terms: 1.0021 + 2.1230 + 4.8527 = 7.978 (hand-evaluated).
        let c = c_constant(0.5, 0.75);
        assert!((c - 7.978).abs() < 2e-3, "got {c}");
        assert_eq!(c_constant(0.0, 0.75), 0.0);
    }

    #[test]
    fn mix_on_ring4_spreads_a_unit_impulse() {
        let w = build_topology(TopologyKind::Ring, 4, Weighting::UniformNeighbor).unwrap();
        let states = Array2::from_shape_vec((4, 1), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let out = mix(&w, &states).unwrap();
        let got: Vec<f64> = out.column(0).to_vec();
        assert_eq!(got, vec![0.5, 0.25, 0.0, 0.25]);
    }

    #[test]
    fn deviation_norm_follows_lambda_powers_on_ring4() {
        let w = build_topology(TopologyKind::Ring, 4, Weighting::UniformNeighbor).unwrap();
        assert!((deviation_norm(&w, 0) - 1.0).abs() < 1e-12);
        assert!((deviation_norm(&w, 3) - 0.125).abs() < 1e-10);
        let p = build_topology(TopologyKind::Complete, 4, Weighting::Metropolis).unwrap();
        assert!(deviation_norm(&p, 5) < 1e-12);
    }

    #[test]
    fn uniform_neighbor_rejects_irregular_star() {
        let err = build_topology(TopologyKind::Star, 4, Weighting::UniformNeighbor);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }
}
