//! Closed-form bound evaluation for consensus, stability, and risk, plus a
//! general recursive evaluator for the master stability recursion.
//!
//! Everything here is a literal transcription of a display formula into f64
//! arithmetic: no constant tuning, no smoothing of indicator branches, no
//! silent fixes. Where a display carries a precondition the evaluator either
//! errors (structural mismatch: wrong schedule shape, missing constants) or
//! attaches a named validity flag (numeric premises like mu^4 > 32 L^2 that
//! a caller may legitimately want to see fail). Bounds are often loose by
//! orders of magnitude; dominance over measurements, not tightness, is the
//! contract.

use crate::engine::{schedule_rate, Schedule};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::topology::{c_constant, MixingMatrix};
use serde::Serialize;

/// Every constant a bound display can reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    /// Gradient norm bound G.
    pub grad_bound: f64,
    /// Smoothness L.
    pub smoothness: f64,
    /// Strong convexity / concavity modulus mu (0 for merely convex kinds).
    pub strong_convexity: f64,
    /// Gradient-dominance modulus rho, when the primal side has one.
    pub pl_constant: Option<f64>,
    /// Objective value bound M, when the objective is bounded.
    pub value_bound: Option<f64>,
    /// Mixing deviation norm lambda in [0, 1).
    pub lambda: f64,
    /// C_lambda evaluated at this schedule's k-decay exponent.
    pub c_lambda: f64,
    /// C_{lambda^2} evaluated at the same exponent.
    pub c_lambda_sq: f64,
    /// Rounds T.
    pub rounds: usize,
    /// Local steps K.
    pub local_steps: usize,
    /// Agents m.
    pub agents: usize,
    /// Per-agent samples n.
    pub samples_per_agent: usize,
    pub radius_x: Option<f64>,
    pub radius_y: Option<f64>,
    pub schedule: Schedule,
}

impl BoundInputs {
    /// Gathers constants from a problem, a topology, and run sizes. The
    /// C_lambda constants are evaluated at the schedule's k-decay exponent
    /// (they only enter bounds for decaying schedules).
    pub fn from_run(
        problem: &Problem,
        w: &MixingMatrix,
        schedule: &Schedule,
        rounds: usize,
        local_steps: usize,
        samples_per_agent: usize,
    ) -> Result<BoundInputs> {
        schedule.validate()?;
        let lambda = w.lambda();
        let alpha = match *schedule {
            Schedule::Decaying { alpha, .. } => alpha,
            Schedule::Fixed { .. } => 0.75,
        };
        let inputs = BoundInputs {
            grad_bound: problem.spec.grad_bound,
            smoothness: problem.spec.smoothness,
            strong_convexity: problem.spec.strong_convexity,
            pl_constant: problem.spec.pl_constant.as_ref().map(|p| p.rho),
            value_bound: problem.spec.value_bound,
            lambda,
            c_lambda: c_constant(lambda, alpha),
            c_lambda_sq: c_constant(lambda * lambda, alpha),
            rounds,
            local_steps,
            agents: w.m(),
            samples_per_agent,
            radius_x: problem.spec.radius_x,
            radius_y: problem.spec.radius_y,
            schedule: *schedule,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda < 1.0) {
            return Err(Error::BoundPremise("lambda must lie in [0, 1)".into()));
        }
        if self.grad_bound <= 0.0 || self.smoothness <= 0.0 {
            return Err(Error::BoundPremise("G and L must be positive".into()));
        }
        if self.strong_convexity < 0.0 {
            return Err(Error::BoundPremise("mu must be nonnegative".into()));
        }
        if self.rounds == 0 || self.local_steps == 0 || self.agents == 0 || self.samples_per_agent == 0
        {
            return Err(Error::BoundPremise("T, K, m, n must be positive".into()));
        }
        Ok(())
    }

    /// Condition number L/mu.
    pub fn kappa(&self) -> Result<f64> {
        if self.strong_convexity <= 0.0 {
            return Err(Error::BoundPremise("kappa needs mu > 0".into()));
        }
        Ok(self.smoothness / self.strong_convexity)
    }

    /// Contraction modulus gamma = L mu / (L + mu); zero when mu = 0.
    pub fn gamma(&self) -> f64 {
        let (l, mu) = (self.smoothness, self.strong_convexity);
        if mu == 0.0 {
            0.0
        } else {
            l * mu / (l + mu)
        }
    }

    /// The verbatim constant b = 2 mu^3 L^2 / (mu^4 - 32 L^2). Negative in
    /// most regimes; callers must consult the matching validity flag.
    pub fn b_const(&self) -> f64 {
        let (l, mu) = (self.smoothness, self.strong_convexity);
        2.0 * mu.powi(3) * l * l / (mu.powi(4) - 32.0 * l * l)
    }

    fn need_rho(&self) -> Result<f64> {
        self.pl_constant
            .filter(|r| *r > 0.0)
            .ok_or_else(|| Error::BoundPremise("missing constant: rho (gradient dominance)".into()))
    }

    fn need_radii(&self) -> Result<(f64, f64)> {
        match (self.radius_x, self.radius_y) {
            (Some(bx), Some(by)) => Ok((bx, by)),
            _ => Err(Error::BoundPremise("missing constant: domain radii B_x, B_y".into())),
        }
    }

    fn need_mu(&self) -> Result<f64> {
        if self.strong_convexity > 0.0 {
            Ok(self.strong_convexity)
        } else {
            Err(Error::BoundPremise("this bound needs mu > 0".into()))
        }
    }

    fn need_value_bound(&self) -> Result<f64> {
        self.value_bound
            .filter(|m| *m > 0.0)
            .ok_or_else(|| Error::BoundPremise("missing constant: value bound M".into()))
    }
}

/// Which consensus display to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusCase {
    /// Fixed rate eta.
    Fixed,
    /// eta^t_k = c / (k+1)^alpha.
    DecayK,
    /// eta^t_k = c / t^beta.
    DecayT,
    /// eta^t_k = c / ((k+1)^alpha t^beta).
    DecayTk,
    /// Single-machine reference recursion (no mixing residual).
    LocalSgda,
}

/// 1/(1 - lambda).
fn inv_gap(lambda: f64) -> f64 {
    1.0 / (1.0 - lambda)
}

/// 2 lambda / ((1 - lambda)(1 - lambda^2)); exactly zero at lambda = 0.
fn fixed_radical_sq(lambda: f64) -> f64 {
    2.0 * lambda / ((1.0 - lambda) * (1.0 - lambda * lambda))
}

/// C_{lambda^2} + C_lambda / (1 - lambda), the decaying-rate mixing constant.
fn decay_radical_sq(inputs: &BoundInputs) -> f64 {
    inputs.c_lambda_sq + inputs.c_lambda * inv_gap(inputs.lambda)
}

/// Step-sum indicator: 1 + ln(x) at alpha = 1/2, 1/(2 alpha - 1) above.
fn ind(x: f64, alpha: f64) -> Result<f64> {
    if alpha == 0.5 {
        Ok(1.0 + x.ln())
    } else if alpha > 0.5 {
        Ok(1.0 / (2.0 * alpha - 1.0))
    } else {
        Err(Error::BoundPremise(format!(
            "indicator needs alpha >= 1/2, got {alpha}"
        )))
    }
}

fn k_ind(k: usize, alpha: f64) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    Ok(k as f64 * ind(k as f64, alpha)?)
}

fn decaying_parts(schedule: &Schedule) -> Result<(f64, f64, f64)> {
    match *schedule {
        Schedule::Decaying { c, alpha, beta } => Ok((c, alpha, beta)),
        Schedule::Fixed { .. } => {
            Err(Error::BoundPremise("this case needs a decaying schedule".into()))
        }
    }
}

/// Closed-form upper bound on the expected consensus gap E[Delta^t_k].
pub fn consensus_bound(
    inputs: &BoundInputs,
    t: usize,
    k: usize,
    case: ConsensusCase,
) -> Result<f64> {
    inputs.validate()?;
    if t == 0 {
        return Err(Error::invalid("t", "round index starts at 1"));
    }
    if k > inputs.local_steps {
        return Err(Error::invalid("k", "local index exceeds K"));
    }
    let g = inputs.grad_bound;
    let lam = inputs.lambda;
    let kk = inputs.local_steps as f64;
    let kf = k as f64;
    match case {
        ConsensusCase::Fixed => {
            let eta = match inputs.schedule {
                Schedule::Fixed { c } => c,
                Schedule::Decaying { c, alpha, beta } if alpha == 0.0 && beta == 0.0 => c,
                _ => {
                    return Err(Error::BoundPremise(
                        "fixed consensus case needs a fixed rate".into(),
                    ))
                }
            };
            Ok(eta * g * (inv_gap(lam) * kf * kf + fixed_radical_sq(lam) * kk * kk).sqrt())
        }
        ConsensusCase::DecayK => {
            let (c, alpha, beta) = decaying_parts(&inputs.schedule)?;
            if beta != 0.0 {
                return Err(Error::BoundPremise("decay_k case needs beta = 0".into()));
            }
            let inner =
                inv_gap(lam) * k_ind(k, alpha)? + fixed_radical_sq(lam) * kk * ind(kk, alpha)?;
            Ok(c * g * inner.sqrt())
        }
        ConsensusCase::DecayT => {
            let (c, alpha, beta) = decaying_parts(&inputs.schedule)?;
            if alpha != 0.0 {
                return Err(Error::BoundPremise("decay_t case needs alpha = 0".into()));
            }
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::BoundPremise("decay_t case needs 0 < beta <= 1".into()));
            }
            let t2b = (t as f64).powf(2.0 * beta);
            let inner = inv_gap(lam) * kf * kf / t2b
                + inputs.c_lambda_sq * kk * kk / t2b
                + inputs.c_lambda * inv_gap(lam) * kk * kk / t2b;
            Ok(c * g * inner.sqrt())
        }
        ConsensusCase::DecayTk => {
            let (c, alpha, beta) = decaying_parts(&inputs.schedule)?;
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::BoundPremise("decay_tk case needs 0 < beta <= 1".into()));
            }
            let t2b = (t as f64).powf(2.0 * beta);
            let inner = inv_gap(lam) * k_ind(k, alpha)? / t2b
                + decay_radical_sq(inputs) * kk * ind(kk, alpha)? / t2b;
            Ok(c * g * inner.sqrt())
        }
        ConsensusCase::LocalSgda => {
            // 2G sum_{k'<k} eta^t_{k'} prod_{k''=k'+1}^{k-1} (1 - eta^t_{k''} gamma).
            let gamma = inputs.gamma();
            let mut total = 0.0;
            for kp in 0..k {
                let mut term = schedule_rate(&inputs.schedule, t, kp)?;
                for kpp in (kp + 1)..k {
                    term *= 1.0 - schedule_rate(&inputs.schedule, t, kpp)? * gamma;
                }
                total += term;
            }
            Ok(2.0 * g * total)
        }
    }
}

/// Which consensus display matches a schedule's shape.
pub fn consensus_case_for(schedule: &Schedule) -> ConsensusCase {
    match *schedule {
        Schedule::Fixed { .. } => ConsensusCase::Fixed,
        Schedule::Decaying { alpha, beta, .. } => match (alpha == 0.0, beta == 0.0) {
            (true, true) => ConsensusCase::Fixed,
            (false, true) => ConsensusCase::DecayK,
            (true, false) => ConsensusCase::DecayT,
            (false, false) => ConsensusCase::DecayTk,
        },
    }
}

/// Which argument-stability display to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityForm {
    /// Master recursion, evaluated numerically with the matching consensus
    /// bound plugged in per (t, k).
    General,
    /// Fixed-rate closed form (strongly-convex-strongly-concave).
    FixedClosed,
    /// Decaying-rate closed form for eta^t_k = 1/((k+1)^alpha t).
    DecayingClosed,
    /// Convex-concave corollary: the recursion without contraction factors.
    ConvexCorollary,
}

/// Upper bound on the expected argument stability of the algorithm output.
pub fn argument_stability_bound(inputs: &BoundInputs, form: StabilityForm) -> Result<f64> {
    inputs.validate()?;
    let g = inputs.grad_bound;
    let l = inputs.smoothness;
    let n = inputs.samples_per_agent as f64;
    let kk = inputs.local_steps as f64;
    match form {
        StabilityForm::General => {
            let gamma = inputs.gamma();
            general_recursion(inputs, gamma)
        }
        StabilityForm::ConvexCorollary => {
            if inputs.strong_convexity != 0.0 {
                return Err(Error::BoundPremise(
                    "convex corollary applies at mu = 0".into(),
                ));
            }
            general_recursion(inputs, 0.0)
        }
        StabilityForm::FixedClosed => {
            let mu = inputs.need_mu()?;
            let eta = match inputs.schedule {
                Schedule::Fixed { c } => c,
                _ => {
                    return Err(Error::BoundPremise(
                        "fixed closed form needs a fixed rate".into(),
                    ))
                }
            };
            let lam = inputs.lambda;
            let lead = 2.0 * g * (l + mu) / (l * mu);
            Ok(lead
                * (eta * l * inv_gap(lam).sqrt() * kk * kk / 2.0
                    + eta * l * fixed_radical_sq(lam).sqrt() * kk * kk
                    + kk / n))
        }
        StabilityForm::DecayingClosed => {
            let mu = inputs.need_mu()?;
            let (c, alpha, beta) = decaying_parts(&inputs.schedule)?;
            if (c - 1.0).abs() > 1e-12 || beta != 1.0 {
                return Err(Error::BoundPremise(
                    "decaying closed form needs eta^t_k = 1/((k+1)^alpha t)".into(),
                ));
            }
            if !(alpha > 0.5 && alpha < 1.0) {
                return Err(Error::BoundPremise(
                    "decaying closed form needs 1/2 < alpha < 1".into(),
                ));
            }
            let gamma = inputs.gamma();
            let d = gamma * (kk.powf(1.0 - alpha) + 1.0 - alpha) + alpha - 1.0;
            if d <= 0.0 {
                return Err(Error::BoundPremise(
                    "needs L mu/(L+mu) (1 + K^{1-a}/(1-a)) > 1".into(),
                ));
            }
            let r2a = 2.0 * alpha / (2.0 * alpha - 1.0);
            let term1 = (kk.powf(1.5 - alpha) + 1.5 - alpha)
                * (r2a * inv_gap(inputs.lambda)).sqrt()
                * (2.0 * g * l * (1.0 - alpha) / (1.5 - alpha))
                / d;
            let term2 = (kk.powf(1.0 - alpha) + 1.0 - alpha)
                * 2.0
                * g
                * l
                * (decay_radical_sq(inputs) * r2a * kk).sqrt()
                / d;
            let tail = g / n * (l + mu) / (l * mu);
            Ok((term1 + term2) / (inputs.rounds as f64 + 1.0) + tail)
        }
    }
}

/// 2 sum_t [prod_{t'>t} prod_k (1 - eta gamma)] sum_k eta (L Delta + G/n)
/// prod_{k'>k} (1 - eta gamma), with Delta the matching consensus bound.
fn general_recursion(inputs: &BoundInputs, gamma: f64) -> Result<f64> {
    let case = consensus_case_for(&inputs.schedule);
    let g = inputs.grad_bound;
    let l = inputs.smoothness;
    let n = inputs.samples_per_agent as f64;
    let t_max = inputs.rounds;
    let k_max = inputs.local_steps;

    // Per-round full-product of the contraction factors.
    let mut round_prod = vec![1.0; t_max + 1];
    for (t, slot) in round_prod.iter_mut().enumerate().skip(1) {
        let mut p = 1.0;
        for k in 0..k_max {
            let factor = 1.0 - schedule_rate(&inputs.schedule, t, k)? * gamma;
            if factor < 0.0 {
                return Err(Error::BoundPremise(
                    "rate too large: 1 - eta gamma < 0 in the recursion".into(),
                ));
            }
            p *= factor;
        }
        *slot = p;
    }

    let mut total = 0.0;
    let mut suffix = 1.0; // prod over rounds t' > t
    for t in (1..=t_max).rev() {
        let mut inner = 0.0;
        let mut tail = 1.0; // prod over k' > k within round t
        for k in (0..k_max).rev() {
            let eta = schedule_rate(&inputs.schedule, t, k)?;
            let delta = consensus_bound(inputs, t, k, case)?;
            inner += eta * (l * delta + g / n) * tail;
            tail *= 1.0 - eta * gamma;
        }
        total += suffix * inner;
        suffix *= round_prod[t];
    }
    Ok(2.0 * total)
}

/// Which rate family a closed-form guarantee was stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateForm {
    Fixed,
    Decaying,
}

/// Sum indicator S(x, e) = x^{1-e}/(1-e) below e = 1, else 1 + ln x.
fn power_sum(x: f64, exponent: f64) -> f64 {
    if exponent < 1.0 {
        x.powf(1.0 - exponent) / (1.0 - exponent)
    } else {
        1.0 + x.ln()
    }
}

/// Upper bound on the weak primal-dual empirical risk of the averaged output.
pub fn weak_pd_empirical_bound(inputs: &BoundInputs, form: RateForm) -> Result<f64> {
    inputs.validate()?;
    let (bx, by) = inputs.need_radii()?;
    let g = inputs.grad_bound;
    let l = inputs.smoothness;
    let tt = inputs.rounds as f64;
    let kk = inputs.local_steps as f64;
    let lam = inputs.lambda;
    match form {
        RateForm::Fixed => {
            let eta = match inputs.schedule {
                Schedule::Fixed { c } => c,
                _ => return Err(Error::BoundPremise("fixed form needs a fixed rate".into())),
            };
            if eta <= 0.0 {
                return Err(Error::BoundPremise("fixed form needs eta > 0".into()));
            }
            Ok((1.0 - eta) * (bx * bx + by * by) / (2.0 * eta * tt * kk)
                + eta * g * g
                + 2.0 * g * (bx + by) / (tt * kk).sqrt()
                + eta
                    * g
                    * kk
                    * (bx + by)
                    * (1.0 + l / 2.0)
                    * (0.5 * inv_gap(lam).sqrt() + fixed_radical_sq(lam).sqrt()))
        }
        RateForm::Decaying => {
            let (c, alpha, beta) = decaying_parts(&inputs.schedule)?;
            if (c - 1.0).abs() > 1e-12 {
                return Err(Error::BoundPremise(
                    "decaying form is stated for unit base rate".into(),
                ));
            }
            if !(alpha > 0.5 && alpha <= 1.0 && beta <= 1.0 && beta > 0.0) {
                return Err(Error::BoundPremise(
                    "decaying form needs 1/2 < alpha <= 1 and 0 < beta <= 1".into(),
                ));
            }
            let s_t = power_sum(tt, beta);
            let s_k = power_sum(kk, alpha);
            let r2a = 2.0 * alpha / (2.0 * alpha - 1.0);
            let radicals =
                (inv_gap(lam) * r2a).sqrt() + (decay_radical_sq(inputs) * r2a).sqrt();
            Ok(g * g / (tt * kk) * s_t * s_k
                + (bx + by) * g * (l + 2.0) / (2.0 * tt) * radicals * kk.sqrt() * s_t
                + 2.0 * g * (bx + by) / (tt * kk).sqrt())
        }
    }
}

/// Upper bound on the weak primal-dual population risk: the empirical bound
/// plus the stability-based generalization group sqrt(2) G epsilon with the
/// matching closed-form stability.
pub fn weak_pd_population_bound(inputs: &BoundInputs, form: RateForm) -> Result<f64> {
    inputs.need_mu()?;
    let optimization = weak_pd_empirical_bound(inputs, form)?;
    let stability_form = match form {
        RateForm::Fixed => StabilityForm::FixedClosed,
        RateForm::Decaying => StabilityForm::DecayingClosed,
    };
    let eps = argument_stability_bound(inputs, stability_form)?;
    Ok(optimization + 2f64.sqrt() * inputs.grad_bound * eps)
}

/// Upper bound on primal stability from excess empirical primal risk:
/// (2G/n) sqrt(1/(4 rho) + 1/mu) + 2 sqrt((2/rho) sup Delta^ep_S).
pub fn primal_stability_bound(inputs: &BoundInputs, ep_empirical_sup: f64) -> Result<f64> {
    inputs.validate()?;
    let rho = inputs.need_rho()?;
    let mu = inputs.need_mu()?;
    if ep_empirical_sup < 0.0 {
        return Err(Error::BoundPremise("excess-risk supremum must be >= 0".into()));
    }
    let g = inputs.grad_bound;
    let n = inputs.samples_per_agent as f64;
    Ok(2.0 * g / n * (1.0 / (4.0 * rho) + 1.0 / mu).sqrt()
        + 2.0 * (2.0 / rho * ep_empirical_sup).sqrt())
}

/// One precondition check attached to a bound value.
pub type Flag = (String, bool);

/// A bound value together with the named premises behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedBound {
    pub value: f64,
    pub flags: Vec<Flag>,
}

impl FlaggedBound {
    pub fn all_hold(&self) -> bool {
        self.flags.iter().all(|(_, ok)| *ok)
    }
}

/// Which excess-primal display to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcessPrimalForm {
    Empirical,
    Population,
    /// Generalization-gap multiplier; uses the supplied stability epsilon.
    Gap,
}

/// Excess primal risk bounds under the rate eta^t_k = 4/(mu (k+1)^alpha t).
///
/// `epsilon` is consumed by the gap form only. Values are computed verbatim
/// even when numeric premises fail; consult the flags.
pub fn excess_primal_bounds(
    inputs: &BoundInputs,
    form: ExcessPrimalForm,
    epsilon: f64,
) -> Result<FlaggedBound> {
    inputs.validate()?;
    let mu = inputs.need_mu()?;
    let g = inputs.grad_bound;
    let l = inputs.smoothness;
    let n = inputs.samples_per_agent as f64;
    let m = inputs.agents as f64;

    if let ExcessPrimalForm::Gap = form {
        if epsilon < 0.0 {
            return Err(Error::BoundPremise("epsilon must be >= 0".into()));
        }
        let kappa = inputs.kappa()?;
        return Ok(FlaggedBound {
            value: g * (1.0 + kappa * kappa).sqrt() * epsilon + 4.0 * g * g / (mu * m * n),
            flags: vec![],
        });
    }

    let (c, alpha, beta) = decaying_parts(&inputs.schedule)?;
    if (c - 4.0 / mu).abs() > 1e-12 * (4.0 / mu) || beta != 1.0 {
        return Err(Error::BoundPremise(
            "excess primal displays need eta^t_k = 4/(mu (k+1)^alpha t)".into(),
        ));
    }
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::BoundPremise("excess primal displays need 1/2 < alpha < 1".into()));
    }
    let rho = inputs.need_rho()?;
    let (_, by) = inputs.need_radii()?;
    let kk = inputs.local_steps as f64;
    let tt = inputs.rounds as f64;
    let lam = inputs.lambda;
    let r2a = 2.0 * alpha / (2.0 * alpha - 1.0);
    let o1 = inv_gap(lam).sqrt();
    let o2 = decay_radical_sq(inputs).sqrt();
    let eta_first = 4.0 / mu;
    let mut flags: Vec<Flag> = vec![
        ("mu^4 > 32 L^2 (b positive)".into(), mu.powi(4) > 32.0 * l * l),
        ("eta^1_0 (L + L^2/mu) <= 1".into(), eta_first * (l + l * l / mu) <= 1.0),
        ("mu L < 1".into(), mu * l < 1.0),
    ];

    match form {
        ExcessPrimalForm::Population => {
            let kappa = inputs.kappa()?;
            let lead = 2.0 * g * g / n
                * (1.0 + kappa * kappa).sqrt()
                * (1.0 / (4.0 * rho) + 1.0 / mu).sqrt();
            let sample = 4.0 * g * g / (mu * m * n);
            let drift = 2.0 * 2f64.sqrt() * g * g / tt.sqrt()
                * (1.0 / rho + kappa * kappa).sqrt()
                * ((64.0 * by * kappa.powi(3) / (mu * mu)).sqrt()
                    * (o1 + o2).sqrt()
                    * kk.powf(0.25)
                    + (o1 + o2) * (128.0 * kappa * kappa / mu.powi(3)).sqrt()
                        * kk.powf((1.0 + alpha) / 2.0)
                    + (32.0 * rho * kappa * kappa / (mu * mu)).sqrt()
                        * kk.powf(-(1.0 - alpha) / 2.0));
            Ok(FlaggedBound { value: lead + sample + drift, flags })
        }
        ExcessPrimalForm::Empirical => {
            let b = inputs.b_const();
            flags.push((
                "b <= (rho - mu/4) mu^3 / (16 L^2 (L + L^2/mu))".into(),
                b <= (rho - mu / 4.0) * mu.powi(3) / (16.0 * l * l * (l + l * l / mu)),
            ));
            let k_pow = kk.powf(1.0 - alpha);
            let t1 = 16.0 * g / (mu * mu)
                * (4.0 * by * b * l / (1.0 - mu * l) + 2.0 * g)
                * ((kk.powf(1.5) + 1.5 - alpha) / k_pow
                    * ((1.0 - alpha) / (1.5 - alpha))
                    * (r2a * inv_gap(lam)).sqrt()
                    + (k_pow + 1.0 - alpha) / k_pow
                        * kk.sqrt()
                        * (decay_radical_sq(inputs) * r2a).sqrt());
            let t2 = 64.0 * g * g * b / mu.powi(4)
                * ((1.0 - alpha) * kk * kk / k_pow)
                * (r2a * inv_gap(lam) + decay_radical_sq(inputs) * r2a);
            let t3 = 1.0 / k_pow
                * (2.0 * alpha * (1.0 - alpha) / (2.0 * alpha - 1.0))
                * (16.0 * g * g / (mu * mu))
                * (rho / (1.0 - mu * l) + 2.0 * (l + l * l / mu));
            Ok(FlaggedBound { value: (t1 + t2 + t3) / tt, flags })
        }
        ExcessPrimalForm::Gap => unreachable!("handled above"),
    }
}

/// Upper bound on the weak stability of the averaged output for bounded
/// nonconvex-nonconcave objectives.
pub fn weak_stability_bound(inputs: &BoundInputs, form: RateForm) -> Result<f64> {
    inputs.validate()?;
    let g = inputs.grad_bound;
    let l = inputs.smoothness;
    let n = inputs.samples_per_agent as f64;
    let kk = inputs.local_steps as f64;
    let tt = inputs.rounds as f64;
    let lam = inputs.lambda;
    match form {
        RateForm::Fixed => {
            let eta = match inputs.schedule {
                Schedule::Fixed { c } => c,
                _ => return Err(Error::BoundPremise("fixed form needs a fixed rate".into())),
            };
            let radicals = inv_gap(lam).sqrt() + fixed_radical_sq(lam).sqrt();
            Ok(2.0 * 2f64.sqrt() * eta * g * g * (eta * kk * l * radicals + 1.0 / n)
                * kk
                * (tt + 1.0))
        }
        RateForm::Decaying => {
            let m_bound = inputs.need_value_bound()?;
            let (c, alpha, beta) = decaying_parts(&inputs.schedule)?;
            if (c - 1.0 / l).abs() > 1e-12 / l || alpha != 1.0 || beta != 1.0 {
                return Err(Error::BoundPremise(
                    "decaying form needs eta^t_k = 1/(L (k+1) t)".into(),
                ));
            }
            let m = inputs.agents as f64;
            let t_pow = tt.powf(1.0 + kk.ln());
            let base = 2.0 * g / n * t_pow * kk / (l * (1.0 + kk.ln()))
                + 4.0 * g / l * (2.0 * inv_gap(lam)).sqrt() * t_pow * kk / (2.0 + kk.ln())
                + 2.0 * g / l
                    * (decay_radical_sq(inputs) * 2.0).sqrt()
                    * t_pow
                    * kk.powf(1.5)
                    / (2.0 + kk.ln());
            Ok(2.0 * base.powf(0.2) * (2.0 * m_bound * m).powf(0.8) * kk.powf(0.4)
                / n.powf(0.8))
        }
    }
}

/// Generalization-gap multipliers from an argument stability epsilon:
/// (weak, excess primal, strong primal-dual).
pub fn connection_multipliers(inputs: &BoundInputs, epsilon: f64) -> Result<(f64, f64, f64)> {
    inputs.validate()?;
    if epsilon < 0.0 {
        return Err(Error::BoundPremise("epsilon must be >= 0".into()));
    }
    let g = inputs.grad_bound;
    let mu = inputs.need_mu()?;
    let kappa = inputs.kappa()?;
    let m = inputs.agents as f64;
    let n = inputs.samples_per_agent as f64;
    let weak = 2f64.sqrt() * g * epsilon;
    let excess = g * (1.0 + kappa * kappa).sqrt() * epsilon + 4.0 * g * g / (mu * m * n);
    let strong = g * (2.0 + 2.0 * kappa * kappa).sqrt() * epsilon;
    Ok((weak, excess, strong))
}

/// One row of a bound table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub name: &'static str,
    /// None when the bound's structural preconditions failed; see `note`.
    pub value: Option<f64>,
    pub flags: Vec<Flag>,
    pub note: Option<String>,
}

/// Named bound values with validity flags, ready for table output.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
}

/// Optional measured quantities some report rows consume.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportExtras {
    /// Argument stability for the gap and connection rows.
    pub epsilon: Option<f64>,
    /// Supremum of the excess empirical primal risk for the primal-stability row.
    pub ep_empirical_sup: Option<f64>,
}

impl BoundReport {
    fn push_plain(&mut self, name: &'static str, result: Result<f64>) {
        match result {
            Ok(value) => {
                self.entries.push(BoundEntry { name, value: Some(value), flags: vec![], note: None })
            }
            Err(e) => self.entries.push(BoundEntry {
                name,
                value: None,
                flags: vec![],
                note: Some(e.to_string()),
            }),
        }
    }

    fn push_flagged(&mut self, name: &'static str, result: Result<FlaggedBound>) {
        match result {
            Ok(fb) => self.entries.push(BoundEntry {
                name,
                value: Some(fb.value),
                flags: fb.flags,
                note: None,
            }),
            Err(e) => self.entries.push(BoundEntry {
                name,
                value: None,
                flags: vec![],
                note: Some(e.to_string()),
            }),
        }
    }
}

/// Evaluates every bound the inputs can express and collects them, recording
/// named failures for the rest.
pub fn standard_report(inputs: &BoundInputs, extras: &ReportExtras) -> BoundReport {
    let mut report = BoundReport::default();
    let rate_form = match inputs.schedule {
        Schedule::Fixed { .. } => RateForm::Fixed,
        Schedule::Decaying { .. } => RateForm::Decaying,
    };
    report.push_plain(
        "argument_stability_general",
        argument_stability_bound(inputs, StabilityForm::General),
    );
    match rate_form {
        RateForm::Fixed => report.push_plain(
            "argument_stability_fixed_closed",
            argument_stability_bound(inputs, StabilityForm::FixedClosed),
        ),
        RateForm::Decaying => report.push_plain(
            "argument_stability_decaying_closed",
            argument_stability_bound(inputs, StabilityForm::DecayingClosed),
        ),
    }
    report.push_plain(
        "argument_stability_convex_corollary",
        argument_stability_bound(inputs, StabilityForm::ConvexCorollary),
    );
    report.push_plain(
        "weak_pd_empirical",
        weak_pd_empirical_bound(inputs, rate_form),
    );
    report.push_plain(
        "weak_pd_population",
        weak_pd_population_bound(inputs, rate_form),
    );
    if let Some(ep_sup) = extras.ep_empirical_sup {
        report.push_plain("primal_stability", primal_stability_bound(inputs, ep_sup));
    }
    report.push_flagged(
        "excess_primal_empirical",
        excess_primal_bounds(inputs, ExcessPrimalForm::Empirical, 0.0),
    );
    report.push_flagged(
        "excess_primal_population",
        excess_primal_bounds(inputs, ExcessPrimalForm::Population, 0.0),
    );
    if let Some(eps) = extras.epsilon {
        report.push_flagged(
            "excess_primal_gap",
            excess_primal_bounds(inputs, ExcessPrimalForm::Gap, eps),
        );
        report.push_plain(
            "connection_weak",
            connection_multipliers(inputs, eps).map(|v| v.0),
        );
        report.push_plain(
            "connection_excess_primal",
            connection_multipliers(inputs, eps).map(|v| v.1),
        );
        report.push_plain(
            "connection_strong",
            connection_multipliers(inputs, eps).map(|v| v.2),
        );
    }
    report.push_plain("weak_stability", weak_stability_bound(inputs, rate_form));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_inputs(schedule: Schedule) -> BoundInputs {
        BoundInputs {
            grad_bound: 1.0,
            smoothness: 2.0,
            strong_convexity: 1.0,
            pl_constant: Some(0.25),
            value_bound: Some(1.0),
            lambda: 0.0,
            c_lambda: 0.0,
            c_lambda_sq: 0.0,
            rounds: 100,
            local_steps: 5,
            agents: 4,
            samples_per_agent: 100,
            radius_x: Some(1.0),
            radius_y: Some(1.0),
            schedule,
        }
    }

    #[test]
    fn consensus_fixed_hand_value() {
        let mut inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        inputs.lambda = 0.5;
        let v = consensus_bound(&inputs, 1, 3, ConsensusCase::Fixed).unwrap();
        let expected = 0.01 * (2.0f64 * (9.0 + (2.0 * 0.5 / 0.75) * 25.0)).sqrt();
        assert!((v - expected).abs() < 1e-12 * expected);
        assert!((v - 0.0920).abs() < 2e-4);
    }

    #[test]
    fn consensus_fixed_is_zero_at_the_start_without_mixing_residual() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        assert_eq!(consensus_bound(&inputs, 1, 0, ConsensusCase::Fixed).unwrap(), 0.0);
    }

    #[test]
    fn local_sgda_case_reduces_to_plain_rate_sum_without_contraction() {
        let mut inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        inputs.strong_convexity = 0.0;
        let v = consensus_bound(&inputs, 1, 3, ConsensusCase::LocalSgda).unwrap();
        assert!((v - 2.0 * 1.0 * 3.0 * 0.01).abs() < 1e-15);
    }

    #[test]
    fn argument_stability_fixed_hand_value() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        let v = argument_stability_bound(&inputs, StabilityForm::FixedClosed).unwrap();
        assert!((v - 0.9).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn general_recursion_is_dominated_by_fixed_closed_form() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        let general = argument_stability_bound(&inputs, StabilityForm::General).unwrap();
        let closed = argument_stability_bound(&inputs, StabilityForm::FixedClosed).unwrap();
        assert!(general <= closed + 1e-12, "general {general} closed {closed}");
        assert!(general > 0.0);
    }

    #[test]
    fn weak_pd_empirical_fixed_hand_value() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        let v = weak_pd_empirical_bound(&inputs, RateForm::Fixed).unwrap();
        let expected = 0.198 + 0.01 + 4.0 / 500f64.sqrt() + 0.1;
        assert!((v - expected).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn weak_pd_population_is_empirical_plus_stability_group() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        let pop = weak_pd_population_bound(&inputs, RateForm::Fixed).unwrap();
        let emp = weak_pd_empirical_bound(&inputs, RateForm::Fixed).unwrap();
        let eps = argument_stability_bound(&inputs, StabilityForm::FixedClosed).unwrap();
        assert!((pop - (emp + 2f64.sqrt() * eps)).abs() < 1e-12);
    }

    #[test]
    fn primal_stability_hand_value() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        let v = primal_stability_bound(&inputs, 0.02).unwrap();
        let expected = 0.02 * 2f64.sqrt() + 0.8;
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn excess_primal_gap_at_zero_epsilon() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        let fb = excess_primal_bounds(&inputs, ExcessPrimalForm::Gap, 0.0).unwrap();
        assert!((fb.value - 4.0 / (1.0 * 4.0 * 100.0)).abs() < 1e-15);
    }

    #[test]
    fn excess_primal_empirical_scales_as_one_over_rounds() {
        let schedule = Schedule::Decaying { c: 4.0, alpha: 0.75, beta: 1.0 };
        let mut a = base_inputs(schedule);
        a.rounds = 100;
        let mut b = base_inputs(schedule);
        b.rounds = 200;
        let va = excess_primal_bounds(&a, ExcessPrimalForm::Empirical, 0.0).unwrap();
        let vb = excess_primal_bounds(&b, ExcessPrimalForm::Empirical, 0.0).unwrap();
        assert!((vb.value / va.value - 0.5).abs() < 1e-12);
        // mu = 1, L = 2: b's positivity premise fails and is reported.
        assert!(!va.all_hold());
        assert!(va.flags.iter().any(|(name, ok)| name.contains("b positive") && !ok));
    }

    #[test]
    fn excess_primal_population_limit_matches_leading_terms() {
        let schedule = Schedule::Decaying { c: 4.0, alpha: 0.75, beta: 1.0 };
        let mut inputs = base_inputs(schedule);
        inputs.rounds = usize::MAX / 2;
        let fb = excess_primal_bounds(&inputs, ExcessPrimalForm::Population, 0.0).unwrap();
        let lead = 2.0 / 100.0 * 5f64.sqrt() * 2f64.sqrt();
        let sample = 4.0 / 400.0;
        assert!((fb.value - (lead + sample)).abs() < 1e-4, "got {}", fb.value);
        assert!((lead - 0.06325).abs() < 1e-5);
    }

    #[test]
    fn weak_stability_fixed_hand_value() {
        let mut inputs = base_inputs(Schedule::Fixed { c: 0.001 });
        inputs.rounds = 10;
        inputs.local_steps = 2;
        let v = weak_stability_bound(&inputs, RateForm::Fixed).unwrap();
        let expected = 2.0 * 2f64.sqrt() * 0.001 * (0.001 * 2.0 * 2.0 + 0.01) * 2.0 * 11.0;
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 8.71e-4).abs() < 1e-6);
    }

    #[test]
    fn weak_stability_fixed_is_linear_in_rounds_plus_one() {
        let mut a = base_inputs(Schedule::Fixed { c: 0.001 });
        a.rounds = 10;
        let mut b = a.clone();
        b.rounds = 21;
        let va = weak_stability_bound(&a, RateForm::Fixed).unwrap();
        let vb = weak_stability_bound(&b, RateForm::Fixed).unwrap();
        assert!((vb / va - 2.0).abs() < 1e-12);
    }

    #[test]
    fn connection_multipliers_hand_values() {
        let inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        let (w, e, s) = connection_multipliers(&inputs, 0.1).unwrap();
        assert!((w - 2f64.sqrt() * 0.1).abs() < 1e-12);
        assert!((e - (5f64.sqrt() * 0.1 + 0.01)).abs() < 1e-12);
        assert!((s - 10f64.sqrt() * 0.1).abs() < 1e-12);
        // strong = sqrt(2) * excess first factor * epsilon.
        assert!((s - 2f64.sqrt() * 5f64.sqrt() * 0.1).abs() < 1e-12);
    }

    #[test]
    fn fixed_argument_stability_is_affine_in_rate() {
        let v = |eta: f64| {
            argument_stability_bound(
                &base_inputs(Schedule::Fixed { c: eta }),
                StabilityForm::FixedClosed,
            )
            .unwrap()
        };
        let (a, b, c) = (v(0.01), v(0.02), v(0.03));
        assert!((c - b - (b - a)).abs() < 1e-12);
    }

    #[test]
    fn standard_report_names_missing_constants() {
        let mut inputs = base_inputs(Schedule::Fixed { c: 0.01 });
        inputs.pl_constant = None;
        let report = standard_report(&inputs, &ReportExtras { epsilon: Some(0.1), ep_empirical_sup: Some(0.0) });
        let ep = report
            .entries
            .iter()
            .find(|e| e.name == "excess_primal_empirical")
            .unwrap();
        assert!(ep.value.is_none());
        // The fixed schedule mismatches the decaying-rate premise first.
        assert!(ep.note.is_some());
        let stab = report
            .entries
            .iter()
            .find(|e| e.name == "argument_stability_fixed_closed")
            .unwrap();
        assert!((stab.value.unwrap() - 0.9).abs() < 1e-12);
    }
}
