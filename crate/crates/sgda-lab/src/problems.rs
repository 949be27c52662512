//! Minimax problem suite: stochastic value/gradient oracles with exactly
//! declared constants.
//!
//! Each problem is a distribution-indexed saddle objective `f(x, y; xi)`
//! together with a [`ProblemSpec`] that declares the constants the theory
//! consumes: smoothness `L`, gradient bound `G`, strong convexity `mu`,
//! optional domain radii, and the shape of the sample space. The declared
//! constants are exact for the quadratic families (computed at construction
//! from the closed form and cross-checked by directed sampling) and
//! numerically maximized for the non-quadratic ones.
//!
//! | kind         | f(x, y; xi)                                              | class  |
//! |--------------|----------------------------------------------------------|--------|
//! | quad_scsc    | (mu/2)|x-a|^2 - (mu/2)|y-b|^2 + sigma x.y                | SC-SC  |
//! | bilinear_cc  | sigma x.y + a.x + b.y                                    | C-C    |
//! | auc_cc       | pairwise AUC surrogate, primal (w,a,b), scalar dual      | C-C    |
//! | pl_sc_toy    | (x-xi)^2 + 3 sin^2(x-xi) + c x y - (mu/2) y^2            | PL-SC  |
//! | ncnc_toy     | M sin(x-xi) sin(y)                                       | NC-NC  |
//!
//! Oracles are pure functions; they can be called from any number of threads.

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, project_ball, symmetric_eigenvalues};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One data point: a real payload plus an optional binary label.
///
/// Payload layout is problem-specific: the shifted quadratics store the
/// x-shift block then the y-shift block; the AUC surrogate stores a feature
/// vector and uses the label; the scalar toys store a single shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub payload: Vec<f64>,
    pub label: Option<i8>,
}

impl Sample {
    pub fn unlabeled(payload: Vec<f64>) -> Self {
        Sample { payload, label: None }
    }
}

/// Curvature class of a problem, as declared by its construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvexityClass {
    /// mu-strongly convex in x, mu-strongly concave in y.
    StronglyConvexStronglyConcave,
    /// Convex in x, concave in y (mu = 0).
    ConvexConcave,
    /// Polyak-Lojasiewicz in x, strongly concave in y.
    PlStronglyConcave,
    /// No curvature guarantee on either side; value bounded instead.
    NonconvexNonconcave,
}

/// An independent payload block: a norm-clipped Gaussian of the given
/// dimension whose support is contained in the centered ball of `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadBlock {
    pub dim: usize,
    pub radius: f64,
}

/// Shape of a problem's sample space; the data generator consumes this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpace {
    pub blocks: Vec<PayloadBlock>,
    /// P(label = +1) when the problem consumes labels.
    pub label_prior: Option<f64>,
}

impl SampleSpace {
    pub fn payload_len(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }
}

/// Grid-estimated Polyak-Lojasiewicz constant; `empirical` records that no
/// closed-form certificate backs the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlEstimate {
    pub rho: f64,
    pub empirical: bool,
}

/// Declared constants of a problem instance.
///
/// Invariants: `smoothness > 0`; `strong_convexity >= 0` and zero only for
/// the convex-concave and nonconvex-nonconcave classes; when `radius_x` is
/// present `grad_bound` is the supremum of the joint gradient norm over the
/// product ball times the sample space, verified numerically at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub d_x: usize,
    pub d_y: usize,
    /// Gradient-Lipschitz constant L of (x, y) -> grad f(x, y; xi), uniform in xi.
    pub smoothness: f64,
    /// Supremum G of the joint gradient norm over domain and sample space.
    pub grad_bound: f64,
    /// Two-sided strong convexity/concavity modulus mu (0 when absent).
    pub strong_convexity: f64,
    pub class: ConvexityClass,
    /// Primal/dual ball radii; `None` means the domain is unconstrained.
    pub radius_x: Option<f64>,
    pub radius_y: Option<f64>,
    /// Uniform bound M on |f| for the nonconvex-nonconcave class.
    pub value_bound: Option<f64>,
    /// Estimated PL constant for the PL-SC class.
    pub pl_constant: Option<PlEstimate>,
    pub sample_space: SampleSpace,
}

/// Unconstrained empirical saddle of the mean objective over a dataset view.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaddleSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Norm of the mean gradient at (x, y); at most 1e-8 for analytic solves.
    pub residual: f64,
}

/// Construction parameters, one variant per problem kind. The tag doubles as
/// the `kind` key in experiment config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemParams {
    QuadScsc(QuadScscParams),
    BilinearCc(BilinearCcParams),
    AucCc(AucCcParams),
    PlScToy(PlScToyParams),
    NcncToy(NcncToyParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadScscParams {
    pub d: usize,
    pub mu: f64,
    /// Scalar coupling sigma; the bilinear block is sigma * I.
    pub coupling: f64,
    pub radius_x: f64,
    pub radius_y: f64,
    /// Support radius of each payload block; defaults to 4 sqrt(d).
    pub payload_radius: Option<f64>,
}

impl Default for QuadScscParams {
    fn default() -> Self {
        QuadScscParams {
            d: 1,
            mu: 1.0,
            coupling: 0.5,
            radius_x: 1.0,
            radius_y: 1.0,
            payload_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BilinearCcParams {
    pub d: usize,
    /// Scalar coupling sigma > 0; the bilinear block is sigma * I.
    pub coupling: f64,
    pub radius_x: f64,
    pub radius_y: f64,
    pub payload_radius: Option<f64>,
}

impl Default for BilinearCcParams {
    fn default() -> Self {
        BilinearCcParams { d: 1, coupling: 1.0, radius_x: 1.0, radius_y: 1.0, payload_radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AucCcParams {
    /// Feature dimension p; the primal is (w in R^p, a, b).
    pub features: usize,
    /// Class prior P(label = +1), strictly inside (0, 1).
    pub prior: f64,
    /// Optional l2 regularization on the primal; > 0 upgrades C-C to SC-SC.
    pub reg: f64,
    pub radius_primal: f64,
    pub radius_dual: f64,
    pub feature_radius: Option<f64>,
}

impl Default for AucCcParams {
    fn default() -> Self {
        AucCcParams {
            features: 3,
            prior: 0.5,
            reg: 0.0,
            radius_primal: 1.0,
            radius_dual: 1.0,
            feature_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlScToyParams {
    /// Small bilinear coupling c.
    pub coupling: f64,
    /// Strong concavity modulus in y.
    pub mu: f64,
    pub radius_x: f64,
    pub radius_y: f64,
    pub payload_radius: Option<f64>,
}

impl Default for PlScToyParams {
    fn default() -> Self {
        PlScToyParams { coupling: 0.1, mu: 1.0, radius_x: 2.0, radius_y: 2.0, payload_radius: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NcncToyParams {
    /// Amplitude M; |f| <= M everywhere.
    pub amplitude: f64,
    pub payload_radius: Option<f64>,
}

impl Default for NcncToyParams {
    fn default() -> Self {
        NcncToyParams { amplitude: 1.0, payload_radius: None }
    }
}

/// Instantiated problem kind with resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Quad { d: usize, mu: f64, coupling: f64 },
    Bilinear { d: usize, coupling: f64 },
    Auc { features: usize, prior: f64, reg: f64 },
    PlSc { coupling: f64, mu: f64 },
    Ncnc { amplitude: f64 },
}

/// A problem instance: declared constants plus the resolved oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub kind: ProblemKind,
}

/// Builds a problem from parameters, computing all declared constants.
pub fn make_problem(params: &ProblemParams) -> Result<Problem> {
    match params {
        ProblemParams::QuadScsc(p) => build_quad(p),
        ProblemParams::BilinearCc(p) => build_bilinear(p),
        ProblemParams::AucCc(p) => build_auc(p),
        ProblemParams::PlScToy(p) => build_pl_sc(p),
        ProblemParams::NcncToy(p) => build_ncnc(p),
    }
}

impl Problem {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Quad { .. } => "quad_scsc",
            ProblemKind::Bilinear { .. } => "bilinear_cc",
            ProblemKind::Auc { .. } => "auc_cc",
            ProblemKind::PlSc { .. } => "pl_sc_toy",
            ProblemKind::Ncnc { .. } => "ncnc_toy",
        }
    }

    fn check_dims(&self, x: &[f64], y: &[f64], xi: &Sample) -> Result<()> {
        if x.len() != self.spec.d_x {
            return Err(Error::invalid(
                "x",
                format!("dimension {} does not match d_x = {}", x.len(), self.spec.d_x),
            ));
        }
        if y.len() != self.spec.d_y {
            return Err(Error::invalid(
                "y",
                format!("dimension {} does not match d_y = {}", y.len(), self.spec.d_y),
            ));
        }
        let want = self.spec.sample_space.payload_len();
        if xi.payload.len() != want {
            return Err(Error::invalid(
                "sample",
                format!("payload length {} does not match {}", xi.payload.len(), want),
            ));
        }
        if self.spec.sample_space.label_prior.is_some() && xi.label.is_none() {
            return Err(Error::invalid("sample", "label required but missing"));
        }
        Ok(())
    }

    /// Objective value f(x, y; xi).
    pub fn value(&self, x: &[f64], y: &[f64], xi: &Sample) -> Result<f64> {
        self.check_dims(x, y, xi)?;
        Ok(self.value_unchecked(x, y, xi))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64], y: &[f64], xi: &Sample) -> f64 {
        match &self.kind {
            ProblemKind::Quad { d, mu, coupling } => {
                let (a, b) = xi.payload.split_at(*d);
                let sq_x: f64 = x.iter().zip(a).map(|(xi, ai)| (xi - ai).powi(2)).sum();
                let sq_y: f64 = y.iter().zip(b).map(|(yi, bi)| (yi - bi).powi(2)).sum();
                let cross: f64 = x.iter().zip(y).map(|(xi, yi)| xi * yi).sum();
                0.5 * mu * sq_x - 0.5 * mu * sq_y + coupling * cross
            }
            ProblemKind::Bilinear { d, coupling } => {
                let (a, b) = xi.payload.split_at(*d);
                let cross: f64 = x.iter().zip(y).map(|(xi, yi)| xi * yi).sum();
                let ax: f64 = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
                let by: f64 = b.iter().zip(y).map(|(bi, yi)| bi * yi).sum();
                coupling * cross + ax + by
            }
            ProblemKind::Auc { features, prior, reg } => {
                let p = *prior;
                let z = &xi.payload[..*features];
                let (w, a, b) = split_auc(x, *features);
                let alpha = y[0];
                let wz: f64 = w.iter().zip(z).map(|(wi, zi)| wi * zi).sum();
                let pos = xi.label == Some(1);
                let mut v = 0.0;
                if pos {
                    v += (1.0 - p) * (wz - a).powi(2);
                    v -= 2.0 * (1.0 + alpha) * (1.0 - p) * wz;
                } else {
                    v += p * (wz - b).powi(2);
                    v += 2.0 * (1.0 + alpha) * p * wz;
                }
                v -= p * (1.0 - p) * alpha * alpha;
                v += 0.5 * reg * x.iter().map(|t| t * t).sum::<f64>();
                v
            }
            ProblemKind::PlSc { coupling, mu } => {
                let u = x[0] - xi.payload[0];
                u * u + 3.0 * u.sin().powi(2) + coupling * x[0] * y[0] - 0.5 * mu * y[0] * y[0]
            }
            ProblemKind::Ncnc { amplitude } => {
                amplitude * (x[0] - xi.payload[0]).sin() * y[0].sin()
            }
        }
    }

    /// Gradient pair (grad_x f, grad_y f).
    pub fn grad(&self, x: &[f64], y: &[f64], xi: &Sample) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_dims(x, y, xi)?;
        let mut gx = vec![0.0; self.spec.d_x];
        let mut gy = vec![0.0; self.spec.d_y];
        self.grad_into(x, y, xi, &mut gx, &mut gy);
        Ok((gx, gy))
    }

    /// Allocation-free gradient for hot loops. Callers guarantee dimensions.
    pub fn grad_into(&self, x: &[f64], y: &[f64], xi: &Sample, gx: &mut [f64], gy: &mut [f64]) {
        match &self.kind {
            ProblemKind::Quad { d, mu, coupling } => {
                let (a, b) = xi.payload.split_at(*d);
                for i in 0..*d {
                    gx[i] = mu * (x[i] - a[i]) + coupling * y[i];
                    gy[i] = -mu * (y[i] - b[i]) + coupling * x[i];
                }
            }
            ProblemKind::Bilinear { d, coupling } => {
                let (a, b) = xi.payload.split_at(*d);
                for i in 0..*d {
                    gx[i] = coupling * y[i] + a[i];
                    gy[i] = coupling * x[i] + b[i];
                }
            }
            ProblemKind::Auc { features, prior, reg } => {
                let p = *prior;
                let z = &xi.payload[..*features];
                let (w, a, b) = split_auc(x, *features);
                let alpha = y[0];
                let wz: f64 = w.iter().zip(z).map(|(wi, zi)| wi * zi).sum();
                let pos = xi.label == Some(1);
                let (scale, lin) = if pos {
                    (2.0 * (1.0 - p) * (wz - a), -2.0 * (1.0 + alpha) * (1.0 - p))
                } else {
                    (2.0 * p * (wz - b), 2.0 * (1.0 + alpha) * p)
                };
                for i in 0..*features {
                    gx[i] = scale * z[i] + lin * z[i] + reg * w[i];
                }
                let ga = if pos { -2.0 * (1.0 - p) * (wz - a) } else { 0.0 };
                let gb = if pos { 0.0 } else { -2.0 * p * (wz - b) };
                gx[*features] = ga + reg * a;
                gx[*features + 1] = gb + reg * b;
                let lab_lin = if pos { -2.0 * (1.0 - p) * wz } else { 2.0 * p * wz };
                gy[0] = lab_lin - 2.0 * p * (1.0 - p) * alpha;
            }
            ProblemKind::PlSc { coupling, mu } => {
                let u = x[0] - xi.payload[0];
                gx[0] = 2.0 * u + 3.0 * (2.0 * u).sin() + coupling * y[0];
                gy[0] = coupling * x[0] - mu * y[0];
            }
            ProblemKind::Ncnc { amplitude } => {
                let u = x[0] - xi.payload[0];
                gx[0] = amplitude * u.cos() * y[0].sin();
                gy[0] = amplitude * u.sin() * y[0].cos();
            }
        }
    }

    /// Unconstrained empirical saddle of the dataset-mean objective.
    ///
    /// Analytic (one linear solve) for the quadratic and bilinear kinds;
    /// other kinds have no closed-form saddle and are rejected.
    pub fn saddle(&self, samples: &[Sample]) -> Result<SaddleSolution> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "empty dataset view"));
        }
        match &self.kind {
            ProblemKind::Quad { d, mu, coupling } => {
                let (abar, bbar) = mean_shift_blocks(samples, *d);
                // Stationarity: mu(x - abar) + sigma y = 0, -mu(y - bbar) + sigma x = 0.
                let det = mu * mu + coupling * coupling;
                let x: Vec<f64> = (0..*d)
                    .map(|i| (mu * mu * abar[i] - mu * coupling * bbar[i]) / det)
                    .collect();
                let y: Vec<f64> = (0..*d)
                    .map(|i| (mu * coupling * abar[i] + mu * mu * bbar[i]) / det)
                    .collect();
                let residual = self.mean_grad_norm(&x, &y, samples);
                Ok(SaddleSolution { x, y, residual })
            }
            ProblemKind::Bilinear { d, coupling } => {
                let (abar, bbar) = mean_shift_blocks(samples, *d);
                let x: Vec<f64> = bbar.iter().map(|v| -v / coupling).collect();
                let y: Vec<f64> = abar.iter().map(|v| -v / coupling).collect();
                let residual = self.mean_grad_norm(&x, &y, samples);
                Ok(SaddleSolution { x, y, residual })
            }
            _ => Err(Error::Unsupported(format!(
                "analytic saddle not available for {}",
                self.kind_name()
            ))),
        }
    }

    /// Norm of the dataset-mean gradient at (x, y).
    pub fn mean_grad_norm(&self, x: &[f64], y: &[f64], samples: &[Sample]) -> f64 {
        let mut gx = vec![0.0; self.spec.d_x];
        let mut gy = vec![0.0; self.spec.d_y];
        let mut sx = vec![0.0; self.spec.d_x];
        let mut sy = vec![0.0; self.spec.d_y];
        for s in samples {
            self.grad_into(x, y, s, &mut gx, &mut gy);
            for (acc, v) in sx.iter_mut().zip(&gx) {
                *acc += v;
            }
            for (acc, v) in sy.iter_mut().zip(&gy) {
                *acc += v;
            }
        }
        let n = samples.len() as f64;
        let mut total = 0.0;
        for v in sx.iter().chain(sy.iter()) {
            total += (v / n) * (v / n);
        }
        total.sqrt()
    }
}

fn split_auc(x: &[f64], features: usize) -> (&[f64], f64, f64) {
    (&x[..features], x[features], x[features + 1])
}

pub(crate) fn mean_shift_blocks(samples: &[Sample], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mut abar = vec![0.0; d];
    let mut bbar = vec![0.0; d];
    for s in samples {
        for i in 0..d {
            abar[i] += s.payload[i] / n;
            bbar[i] += s.payload[d + i] / n;
        }
    }
    (abar, bbar)
}

fn default_radius(dim: usize) -> f64 {
    4.0 * (dim as f64).sqrt()
}

fn build_quad(p: &QuadScscParams) -> Result<Problem> {
    if p.d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    if p.mu <= 0.0 {
        return Err(Error::invalid("mu", "strong convexity must be positive"));
    }
    if p.radius_x <= 0.0 || p.radius_y <= 0.0 {
        return Err(Error::invalid("radius", "ball radii must be positive"));
    }
    let r = p.payload_radius.unwrap_or_else(|| default_radius(p.d));
    if r <= 0.0 {
        return Err(Error::invalid("payload_radius", "must be positive"));
    }
    let sigma = p.coupling;
    // The gradient field Jacobian is [[mu I, sigma I], [sigma I, -mu I]];
    // per coordinate pair its singular values are sqrt(mu^2 + sigma^2).
    let smoothness = (p.mu * p.mu + sigma * sigma).sqrt();
    let grad_bound = quad_grad_sup(p.mu, sigma, p.radius_x, p.radius_y, r, r, p.d);
    let spec = ProblemSpec {
        d_x: p.d,
        d_y: p.d,
        smoothness,
        grad_bound,
        strong_convexity: p.mu,
        class: ConvexityClass::StronglyConvexStronglyConcave,
        radius_x: Some(p.radius_x),
        radius_y: Some(p.radius_y),
        value_bound: None,
        pl_constant: None,
        sample_space: SampleSpace {
            blocks: vec![
                PayloadBlock { dim: p.d, radius: r },
                PayloadBlock { dim: p.d, radius: r },
            ],
            label_prior: None,
        },
    };
    let problem = Problem {
        spec,
        kind: ProblemKind::Quad { d: p.d, mu: p.mu, coupling: sigma },
    };
    verify_grad_bound(&problem)?;
    Ok(problem)
}

/// Exact supremum of the joint gradient norm for the shifted quadratic over
/// `|x| <= bx, |y| <= by, |a| <= ra, |b| <= rb`.
///
/// With u = mu x + sigma y and v = sigma x - mu y, the squared norm is
/// (|u| + mu ra)^2 + (|v| + mu rb)^2 at adversarial shifts, and
/// |u|^2 = p + 2 mu sigma t, |v|^2 = q - 2 mu sigma t with t = x.y at the
/// ball boundary. The remaining scalar maximization over t is solved in
/// closed form (interior stationary point clamped to the attainable range;
/// for d = 1 only the endpoints t = +-bx*by are attainable).
fn quad_grad_sup(mu: f64, sigma: f64, bx: f64, by: f64, ra: f64, rb: f64, d: usize) -> f64 {
    let p = mu * mu * bx * bx + sigma * sigma * by * by;
    let q = sigma * sigma * bx * bx + mu * mu * by * by;
    let c2 = 2.0 * mu * sigma;
    let tmax = bx * by;
    let phi = |t: f64| -> f64 {
        let upart = (p + c2 * t).max(0.0).sqrt() + mu * ra;
        let vpart = (q - c2 * t).max(0.0).sqrt() + mu * rb;
        (upart * upart + vpart * vpart).sqrt()
    };
    let mut best = phi(-tmax).max(phi(tmax));
    if d >= 2 && c2.abs() > 0.0 {
        let t_star = (ra * ra * q - rb * rb * p) / (c2 * (ra * ra + rb * rb));
        if t_star > -tmax && t_star < tmax {
            best = best.max(phi(t_star));
        }
    }
    best
}

fn build_bilinear(p: &BilinearCcParams) -> Result<Problem> {
    if p.d == 0 {
        return Err(Error::invalid("d", "dimension must be positive"));
    }
    if p.coupling <= 0.0 {
        return Err(Error::invalid("coupling", "bilinear coupling must be positive"));
    }
    if p.radius_x <= 0.0 || p.radius_y <= 0.0 {
        return Err(Error::invalid("radius", "ball radii must be positive"));
    }
    let r = p.payload_radius.unwrap_or_else(|| default_radius(p.d));
    let sigma = p.coupling;
    // grad = (sigma y + a, sigma x + b); both blocks maximal simultaneously.
    let gx = sigma * p.radius_y + r;
    let gy = sigma * p.radius_x + r;
    let grad_bound = (gx * gx + gy * gy).sqrt();
    let spec = ProblemSpec {
        d_x: p.d,
        d_y: p.d,
        smoothness: sigma,
        grad_bound,
        strong_convexity: 0.0,
        class: ConvexityClass::ConvexConcave,
        radius_x: Some(p.radius_x),
        radius_y: Some(p.radius_y),
        value_bound: None,
        pl_constant: None,
        sample_space: SampleSpace {
            blocks: vec![
                PayloadBlock { dim: p.d, radius: r },
                PayloadBlock { dim: p.d, radius: r },
            ],
            label_prior: None,
        },
    };
    let problem = Problem { spec, kind: ProblemKind::Bilinear { d: p.d, coupling: sigma } };
    verify_grad_bound(&problem)?;
    Ok(problem)
}

fn build_auc(p: &AucCcParams) -> Result<Problem> {
    if p.features == 0 {
        return Err(Error::invalid("features", "feature dimension must be positive"));
    }
    if !(p.prior > 0.0 && p.prior < 1.0) {
        return Err(Error::invalid("prior", "class prior must lie strictly inside (0, 1)"));
    }
    if p.reg < 0.0 {
        return Err(Error::invalid("reg", "regularization must be nonnegative"));
    }
    if p.radius_primal <= 0.0 || p.radius_dual <= 0.0 {
        return Err(Error::invalid("radius", "ball radii must be positive"));
    }
    let rz = p.feature_radius.unwrap_or_else(|| default_radius(p.features));
    let class = if p.reg > 0.0 {
        ConvexityClass::StronglyConvexStronglyConcave
    } else {
        ConvexityClass::ConvexConcave
    };
    let mu = if p.reg > 0.0 { p.reg.min(2.0 * p.prior * (1.0 - p.prior)) } else { 0.0 };
    let kind = ProblemKind::Auc { features: p.features, prior: p.prior, reg: p.reg };
    let spec = ProblemSpec {
        d_x: p.features + 2,
        d_y: 1,
        smoothness: 1.0, // placeholder, replaced below
        grad_bound: 1.0, // placeholder, replaced below
        strong_convexity: mu,
        class,
        radius_x: Some(p.radius_primal),
        radius_y: Some(p.radius_dual),
        value_bound: None,
        pl_constant: None,
        sample_space: SampleSpace {
            blocks: vec![PayloadBlock { dim: p.features, radius: rz }],
            label_prior: Some(p.prior),
        },
    };
    let mut problem = Problem { spec, kind };
    problem.spec.smoothness = auc_smoothness(&problem, rz);
    problem.spec.grad_bound = numeric_grad_sup(&problem);
    verify_grad_bound(&problem)?;
    Ok(problem)
}

/// Exact smoothness for the AUC surrogate: the Hessian in (v, alpha) is
/// constant given the sample, affine in (z z^T, z), and block-rotation
/// equivariant in z, so its norm is maximized at z = R e1 for each label.
fn auc_smoothness(problem: &Problem, rz: f64) -> f64 {
    let (features, prior, reg) = match problem.kind {
        ProblemKind::Auc { features, prior, reg } => (features, prior, reg),
        _ => unreachable!(),
    };
    let dim = features + 3; // (w, a, b, alpha)
    let mut best: f64 = 0.0;
    for label in [1i8, -1] {
        let mut h = Array2::<f64>::zeros((dim, dim));
        let p = prior;
        // z = rz * e1; only the first feature coordinate is active.
        let c_quad = if label == 1 { 1.0 - p } else { p };
        h[[0, 0]] = 2.0 * c_quad * rz * rz + reg;
        for i in 1..features {
            h[[i, i]] = reg;
        }
        let ai = features;
        let bi = features + 1;
        let li = features + 2;
        if label == 1 {
            h[[0, ai]] = -2.0 * (1.0 - p) * rz;
            h[[ai, 0]] = h[[0, ai]];
            h[[ai, ai]] = 2.0 * (1.0 - p) + reg;
            h[[bi, bi]] = reg;
            h[[0, li]] = -2.0 * (1.0 - p) * rz;
            h[[li, 0]] = h[[0, li]];
        } else {
            h[[0, bi]] = -2.0 * p * rz;
            h[[bi, 0]] = h[[0, bi]];
            h[[bi, bi]] = 2.0 * p + reg;
            h[[ai, ai]] = reg;
            h[[0, li]] = 2.0 * p * rz;
            h[[li, 0]] = h[[0, li]];
        }
        h[[li, li]] = -2.0 * p * (1.0 - p);
        let eig = symmetric_eigenvalues(&h);
        let norm = eig.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        best = best.max(norm);
    }
    best
}

fn build_pl_sc(p: &PlScToyParams) -> Result<Problem> {
    if p.mu <= 0.0 {
        return Err(Error::invalid("mu", "strong concavity must be positive"));
    }
    if p.radius_x <= 0.0 || p.radius_y <= 0.0 {
        return Err(Error::invalid("radius", "ball radii must be positive"));
    }
    let r = p.payload_radius.unwrap_or(4.0);
    // Hessian [[h'(u), c], [c, -mu]] with h'(u) = 2 + 6 cos(2u) in [-4, 8];
    // the norm is monotone toward both curvature extremes.
    let lam_plus = |s: f64| (s - p.mu) / 2.0 + (((s + p.mu) / 2.0).powi(2) + p.coupling * p.coupling).sqrt();
    let lam_minus = |s: f64| (((s + p.mu) / 2.0).powi(2) + p.coupling * p.coupling).sqrt() - (s - p.mu) / 2.0;
    let smoothness = lam_plus(8.0).max(lam_minus(-4.0));
    let kind = ProblemKind::PlSc { coupling: p.coupling, mu: p.mu };
    let spec = ProblemSpec {
        d_x: 1,
        d_y: 1,
        smoothness,
        grad_bound: 1.0, // placeholder, replaced below
        strong_convexity: 0.0,
        class: ConvexityClass::PlStronglyConcave,
        radius_x: Some(p.radius_x),
        radius_y: Some(p.radius_y),
        value_bound: None,
        pl_constant: None,
        sample_space: SampleSpace {
            blocks: vec![PayloadBlock { dim: 1, radius: r }],
            label_prior: None,
        },
    };
    let mut problem = Problem { spec, kind };
    problem.spec.grad_bound = numeric_grad_sup(&problem);
    problem.spec.pl_constant = Some(PlEstimate { rho: pl_grid_estimate(&problem), empirical: true });
    verify_grad_bound(&problem)?;
    Ok(problem)
}

/// Grid estimate of the PL constant: min over a y grid of
/// min_x |grad_x f|^2 / (2 (f - min_x f)), sample shift fixed at 0.
fn pl_grid_estimate(problem: &Problem) -> f64 {
    let bx = problem.spec.radius_x.expect("pl_sc_toy declares radius_x");
    let by = problem.spec.radius_y.expect("pl_sc_toy declares radius_y");
    let xi = Sample::unlabeled(vec![0.0]);
    let nx = 1201;
    let ny = 25;
    let mut rho = f64::INFINITY;
    let mut gx = [0.0];
    let mut gy = [0.0];
    for jy in 0..ny {
        let y = -by + 2.0 * by * (jy as f64) / ((ny - 1) as f64);
        let values: Vec<f64> = (0..nx)
            .map(|jx| {
                let x = -bx + 2.0 * bx * (jx as f64) / ((nx - 1) as f64);
                problem.value_unchecked(&[x], &[y], &xi)
            })
            .collect();
        let fmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
        for jx in 0..nx {
            let x = -bx + 2.0 * bx * (jx as f64) / ((nx - 1) as f64);
            let gap = values[jx] - fmin;
            if gap < 1e-9 {
                continue;
            }
            problem.grad_into(&[x], &[y], &xi, &mut gx, &mut gy);
            rho = rho.min(gx[0] * gx[0] / (2.0 * gap));
        }
    }
    rho
}

fn build_ncnc(p: &NcncToyParams) -> Result<Problem> {
    if p.amplitude <= 0.0 {
        return Err(Error::invalid("amplitude", "must be positive"));
    }
    let r = p.payload_radius.unwrap_or(4.0);
    let m = p.amplitude;
    let spec = ProblemSpec {
        d_x: 1,
        d_y: 1,
        // Hessian eigenvalues are +-M cos(u -+ y); both G and L are global.
        smoothness: m,
        grad_bound: m,
        strong_convexity: 0.0,
        class: ConvexityClass::NonconvexNonconcave,
        radius_x: None,
        radius_y: None,
        value_bound: Some(m),
        pl_constant: None,
        sample_space: SampleSpace {
            blocks: vec![PayloadBlock { dim: 1, radius: r }],
            label_prior: None,
        },
    };
    Ok(Problem { spec, kind: ProblemKind::Ncnc { amplitude: m } })
}

/// Numeric gradient-norm supremum: directed multi-start projected ascent on
/// |grad|^2 over the product of domain balls and the sample space, plus a
/// large random sweep. Used for kinds whose supremum has no closed form.
fn numeric_grad_sup(problem: &Problem) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_6ead);
    let bx = problem.spec.radius_x.unwrap_or(1.0);
    let by = problem.spec.radius_y.unwrap_or(1.0);
    let labels: Vec<Option<i8>> = match problem.spec.sample_space.label_prior {
        Some(_) => vec![Some(1), Some(-1)],
        None => vec![None],
    };
    let dx = problem.spec.d_x;
    let dy = problem.spec.d_y;
    let mut best = 0.0f64;

    let grad_norm = |x: &[f64], y: &[f64], xi: &Sample, gx: &mut [f64], gy: &mut [f64]| -> f64 {
        problem.grad_into(x, y, xi, gx, gy);
        let mut total = 0.0;
        for v in gx.iter().chain(gy.iter()) {
            total += v * v;
        }
        total.sqrt()
    };

    let mut gx = vec![0.0; dx];
    let mut gy = vec![0.0; dy];
    for &label in &labels {
        for start in 0..48 {
            let mut x: Vec<f64> = (0..dx).map(|_| rng.gen_range(-1.0..1.0) * bx).collect();
            let mut y: Vec<f64> = (0..dy).map(|_| rng.gen_range(-1.0..1.0) * by).collect();
            let mut payload: Vec<f64> = Vec::new();
            for b in &problem.spec.sample_space.blocks {
                for _ in 0..b.dim {
                    payload.push(rng.gen_range(-1.0..1.0) * b.radius / (b.dim as f64).sqrt());
                }
            }
            // Boundary starts help: the supremum lives on the boundary.
            if start % 2 == 0 {
                project_to_sphere(&mut x, bx);
                project_to_sphere(&mut y, by);
            }
            let mut xi = Sample { payload, label };
            let mut current = grad_norm(&x, &y, &xi, &mut gx, &mut gy);
            let mut step = 0.2;
            for _ in 0..400 {
                let (cx, cy, cp) = (x.clone(), y.clone(), xi.payload.clone());
                nudge_ascent(problem, &mut x, &mut y, &mut xi, step, &mut gx, &mut gy);
                project_ball(&mut x, bx);
                project_ball(&mut y, by);
                let mut offset = 0;
                for b in &problem.spec.sample_space.blocks {
                    project_ball(&mut xi.payload[offset..offset + b.dim], b.radius);
                    offset += b.dim;
                }
                let cand = grad_norm(&x, &y, &xi, &mut gx, &mut gy);
                if cand > current {
                    current = cand;
                    step *= 1.2;
                } else {
                    x = cx;
                    y = cy;
                    xi.payload = cp;
                    step *= 0.5;
                    if step < 1e-12 {
                        break;
                    }
                }
            }
            best = best.max(current);
        }
    }
    best
}

fn project_to_sphere(v: &mut [f64], radius: f64) {
    let n = l2_norm(v);
    if n > 0.0 {
        let s = radius / n;
        for t in v {
            *t *= s;
        }
    }
}

/// One finite-difference ascent step on |grad f|^2 in (x, y, payload) jointly.
fn nudge_ascent(
    problem: &Problem,
    x: &mut [f64],
    y: &mut [f64],
    xi: &mut Sample,
    step: f64,
    gx: &mut [f64],
    gy: &mut [f64],
) {
    let h = 1e-6;
    let eval = |x: &[f64], y: &[f64], xi: &Sample, gx: &mut [f64], gy: &mut [f64]| -> f64 {
        problem.grad_into(x, y, xi, gx, gy);
        gx.iter().chain(gy.iter()).map(|v| v * v).sum::<f64>()
    };
    let mut dir_x = vec![0.0; x.len()];
    let mut dir_y = vec![0.0; y.len()];
    let mut dir_p = vec![0.0; xi.payload.len()];
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = eval(x, y, xi, gx, gy);
        x[i] = orig - h;
        let dn = eval(x, y, xi, gx, gy);
        x[i] = orig;
        dir_x[i] = (up - dn) / (2.0 * h);
    }
    for i in 0..y.len() {
        let orig = y[i];
        y[i] = orig + h;
        let up = eval(x, y, xi, gx, gy);
        y[i] = orig - h;
        let dn = eval(x, y, xi, gx, gy);
        y[i] = orig;
        dir_y[i] = (up - dn) / (2.0 * h);
    }
    for i in 0..xi.payload.len() {
        let orig = xi.payload[i];
        xi.payload[i] = orig + h;
        let up = eval(x, y, xi, gx, gy);
        xi.payload[i] = orig - h;
        let dn = eval(x, y, xi, gx, gy);
        xi.payload[i] = orig;
        dir_p[i] = (up - dn) / (2.0 * h);
    }
    let scale = step
        / dir_x
            .iter()
            .chain(dir_y.iter())
            .chain(dir_p.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(1e-12);
    for i in 0..x.len() {
        x[i] += scale * dir_x[i];
    }
    for i in 0..y.len() {
        y[i] += scale * dir_y[i];
    }
    for i in 0..xi.payload.len() {
        xi.payload[i] += scale * dir_p[i];
    }
}

/// Construction-time check that no sampled gradient exceeds the declared G.
/// Directed sampling includes ball boundaries, where the supremum lives.
fn verify_grad_bound(problem: &Problem) -> Result<()> {
    let (Some(bx), Some(by)) = (problem.spec.radius_x, problem.spec.radius_y) else {
        return Ok(());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e_77ed);
    let g = problem.spec.grad_bound;
    let mut gx = vec![0.0; problem.spec.d_x];
    let mut gy = vec![0.0; problem.spec.d_y];
    for trial in 0..2000 {
        let mut x: Vec<f64> = (0..problem.spec.d_x).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y: Vec<f64> = (0..problem.spec.d_y).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if trial % 2 == 0 {
            project_to_sphere(&mut x, bx);
            project_to_sphere(&mut y, by);
        } else {
            project_ball(&mut x, bx);
            project_ball(&mut y, by);
        }
        let mut payload = Vec::new();
        for b in &problem.spec.sample_space.blocks {
            let mut block: Vec<f64> = (0..b.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if trial % 2 == 0 {
                project_to_sphere(&mut block, b.radius);
            } else {
                project_ball(&mut block, b.radius);
            }
            payload.extend(block);
        }
        let label = problem.spec.sample_space.label_prior.map(|p| {
            if rng.gen_bool(p) {
                1i8
            } else {
                -1
            }
        });
        let xi = Sample { payload, label };
        problem.grad_into(&x, &y, &xi, &mut gx, &mut gy);
        let norm = gx.iter().chain(gy.iter()).map(|v| v * v).sum::<f64>().sqrt();
        if norm > g * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::invalid(
                "grad_bound",
                format!("sampled gradient norm {norm} exceeds declared G = {g}"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_value_vanishes_at_per_sample_shifts_without_coupling() {
        let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams {
            coupling: 0.0,
            ..QuadScscParams::default()
        }))
        .unwrap();
        let xi = Sample::unlabeled(vec![0.3, -0.7]);
        let v = problem.value(&[0.3], &[-0.7], &xi).unwrap();
        assert_eq!(v, 0.0);
        let (gx, gy) = problem.grad(&[0.3], &[-0.7], &xi).unwrap();
        assert_eq!((gx[0], gy[0]), (0.0, 0.0));
    }

    #[test]
    fn bilinear_scalar_value_and_grad_match_hand_arithmetic() {
        // f = 2xy + x - y at (1, 1): value 2 + 1 - 1 = 2, grad (2y+1, 2x-1) = (3, 1).
        let problem = make_problem(&ProblemParams::BilinearCc(BilinearCcParams {
            coupling: 2.0,
            ..BilinearCcParams::default()
        }))
        .unwrap();
        let xi = Sample::unlabeled(vec![1.0, -1.0]);
        assert_eq!(problem.value(&[1.0], &[1.0], &xi).unwrap(), 2.0);
        let (gx, gy) = problem.grad(&[1.0], &[1.0], &xi).unwrap();
        assert_eq!((gx[0], gy[0]), (3.0, 1.0));
    }

    #[test]
    fn quad_smoothness_is_sqrt_of_mu_sq_plus_coupling_sq() {
        let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams::default())).unwrap();
        assert!((problem.spec.smoothness - 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ncnc_value_stays_inside_amplitude_on_grid() {
        let problem =
            make_problem(&ProblemParams::NcncToy(NcncToyParams { amplitude: 2.0, payload_radius: None }))
                .unwrap();
        let xi = Sample::unlabeled(vec![0.4]);
        for i in 0..100 {
            for j in 0..100 {
                let x = -5.0 + 10.0 * (i as f64) / 99.0;
                let y = -5.0 + 10.0 * (j as f64) / 99.0;
                let v = problem.value(&[x], &[y], &xi).unwrap();
                assert!(v.abs() <= 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let problem = make_problem(&ProblemParams::QuadScsc(QuadScscParams::default())).unwrap();
        let xi = Sample::unlabeled(vec![0.0, 0.0]);
        assert!(problem.value(&[0.0, 0.0], &[0.0], &xi).is_err());
        assert!(problem.value(&[0.0], &[0.0], &Sample::unlabeled(vec![0.0])).is_err());
    }
}
