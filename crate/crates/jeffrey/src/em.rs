//! The update step, its Q/H likelihood decomposition, the convergence loop,
//! and the certification that recorded trajectories obey the monotone-KL
//! guarantee.

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::dist::{kl_divergence, log_likelihood, Dist, ExtendedReal};
use crate::error::Error;
use crate::Result;

/// Certifier tolerance for per-step KL increases / log-likelihood decreases.
/// Floating rounding produces step deltas of either sign at the 1e-16 scale;
/// anything beyond this is a genuine violation.
pub const MONOTONE_TOL: f64 = 1e-10;

/// Certifier tolerance for the cross-check that each KL drop equals the
/// corresponding log-likelihood gain.
pub const IDENTITY_TOL: f64 = 1e-9;

const ORACLE_MAX_INPUTS: usize = 4;

/// One iterate of the estimation loop, with everything needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    /// Estimate over the full (unpruned) input domain.
    pub theta: Dist,
    /// Predictive output distribution of `theta`.
    pub predictive: Dist,
    /// Divergence of the observations from `predictive`.
    pub kl: ExtendedReal,
    pub log_lik: ExtendedReal,
    /// Q-gain of the step that produced this iterate; absent at iteration 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_q: Option<f64>,
    /// H-gain of the step that produced this iterate; absent at iteration 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The final iterate fits the observations exactly (KL is zero).
    KlTolerance,
    /// Successive iterates moved less than the L1 tolerance.
    ThetaFixedPoint,
    /// The iteration budget ran out.
    MaxIterations,
    /// A step improved the log-likelihood by less than the plateau tolerance.
    LikelihoodPlateau,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::KlTolerance => "kl_tolerance",
            StopReason::ThetaFixedPoint => "theta_fixed_point",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LikelihoodPlateau => "likelihood_plateau",
        };
        f.write_str(s)
    }
}

/// A recorded trajectory of the estimation loop.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<StepRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl Trace {
    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("a trace has at least one record")
    }

    pub fn final_theta(&self) -> &Dist {
        &self.final_record().theta
    }

    /// Number of update steps taken (records minus the initial iterate).
    pub fn steps(&self) -> usize {
        self.records.len() - 1
    }

    pub fn certify(&self) -> MonotonicityReport {
        certify_monotone(&self.records)
    }
}

/// When to stop iterating. Tolerances set to exactly 0.0 disable that
/// criterion; `max_iterations` is always active, so at least one criterion
/// remains live. An exact fixed point (successive iterates identical) always
/// stops regardless, since further steps are provably identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub max_iterations: usize,
    /// Stop when `|θ_{t+1} − θ_t|_{L1}` falls to this level or below.
    pub theta_l1_tol: f64,
    /// Stop when a step's log-likelihood gain falls to this level or below.
    pub delta_l_tol: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            theta_l1_tol: 1e-10,
            delta_l_tol: 1e-12,
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidStopCriteria {
                reason: "max_iterations must be at least 1".into(),
            });
        }
        if !(self.theta_l1_tol >= 0.0 && self.theta_l1_tol.is_finite()) {
            return Err(Error::InvalidStopCriteria {
                reason: format!("theta_l1_tol must be finite and non-negative, got {}", self.theta_l1_tol),
            });
        }
        if !(self.delta_l_tol >= 0.0 && self.delta_l_tol.is_finite()) {
            return Err(Error::InvalidStopCriteria {
                reason: format!("delta_l_tol must be finite and non-negative, got {}", self.delta_l_tol),
            });
        }
        Ok(())
    }
}

/// Error unless every observed output is predicted with positive mass,
/// reporting the offending outputs.
fn require_plausible(c: &Channel, theta: &Dist, tau: &Dist) -> Result<()> {
    if tau.len() != c.output_count() {
        return Err(Error::DomainMismatch {
            expected: c.output_count(),
            actual: tau.len(),
        });
    }
    let predictive = c.push_forward(theta)?;
    let offending: Vec<usize> = (0..tau.len())
        .filter(|&y| tau[y] > 0.0 && predictive[y] == 0.0)
        .collect();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::Implausible { outputs: offending })
    }
}

/// One update: replace the prior with the inverse channel applied to the
/// observations, `θ' = C←_θ(τ)`.
pub fn jeffrey_step(c: &Channel, theta_t: &Dist, tau: &Dist) -> Result<Dist> {
    c.invert(theta_t)?.apply(tau)
}

/// The expected complete-data log-likelihood
/// `Q(θ|θ_t) = Σ_{x,y} τ(y) p_{θt}(x|y) log p_θ(x,y)`,
/// with `0·log 0 = 0` on zero-weight terms and `−∞` when a positive-weight
/// term hits a zero of the joint.
pub fn q_function(c: &Channel, theta: &Dist, theta_t: &Dist, tau: &Dist) -> Result<ExtendedReal> {
    require_plausible(c, theta_t, tau)?;
    let inv = c.invert(theta_t)?;
    let joint = c.joint(theta)?;
    let mut total = 0.0;
    for y in 0..c.output_count() {
        if tau[y] == 0.0 {
            continue;
        }
        let row = inv
            .row(y)
            .expect("plausibility grants a posterior at every observed output");
        for x in 0..c.input_count() {
            let w = tau[y] * row[x];
            if w > 0.0 {
                let p = joint.prob(x, y);
                if p == 0.0 {
                    return Ok(ExtendedReal::NegInf);
                }
                total += w * p.ln();
            }
        }
    }
    Ok(ExtendedReal::Finite(total))
}

/// The posterior cross-entropy term
/// `H(θ|θ_t) = −Σ_{x,y} τ(y) p_{θt}(x|y) log p_θ(x|y)`.
///
/// Non-negative; `+∞` when the θ-posterior vanishes on a weighted term.
pub fn h_function(c: &Channel, theta: &Dist, theta_t: &Dist, tau: &Dist) -> Result<ExtendedReal> {
    require_plausible(c, theta_t, tau)?;
    require_plausible(c, theta, tau)?;
    let inv_t = c.invert(theta_t)?;
    let inv = c.invert(theta)?;
    let mut total = 0.0;
    for y in 0..c.output_count() {
        if tau[y] == 0.0 {
            continue;
        }
        let row_t = inv_t.row(y).expect("theta_t plausible");
        let row = inv.row(y).expect("theta plausible");
        for x in 0..c.input_count() {
            let w = tau[y] * row_t[x];
            if w > 0.0 {
                let p = row[x];
                if p == 0.0 {
                    return Ok(ExtendedReal::PosInf);
                }
                total -= w * p.ln();
            }
        }
    }
    Ok(ExtendedReal::Finite(total))
}

/// Log-likelihood gain of moving the estimate: `L(θ_new) − L(θ_t)`.
/// Equal to the drop in `KL(τ || prediction)`.
pub fn delta_l(c: &Channel, theta_new: &Dist, theta_t: &Dist, tau: &Dist) -> Result<f64> {
    require_plausible(c, theta_t, tau)?;
    require_plausible(c, theta_new, tau)?;
    let ll_new = log_likelihood(tau, &c.push_forward(theta_new)?)?;
    let ll_old = log_likelihood(tau, &c.push_forward(theta_t)?)?;
    match (ll_new, ll_old) {
        (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => Ok(a - b),
        // plausibility of both estimates makes both likelihoods finite
        _ => unreachable!("plausible estimates have finite log-likelihood"),
    }
}

/// Q-gain of moving the estimate: `Q(θ_new|θ_t) − Q(θ_t|θ_t)`.
/// `−∞` when θ_new zeroes an input the current posterior still charges.
pub fn delta_q(c: &Channel, theta_new: &Dist, theta_t: &Dist, tau: &Dist) -> Result<f64> {
    let q_new = q_function(c, theta_new, theta_t, tau)?;
    let q_old = q_function(c, theta_t, theta_t, tau)?;
    let q_old = q_old
        .finite()
        .expect("Q(theta_t | theta_t) is finite when theta_t is plausible");
    Ok(q_new.to_f64() - q_old)
}

/// H-gain of moving the estimate, in its divergence form:
/// `ΔH = Σ_y τ(y) · KL(posterior_{θt}(·|y) || posterior_{θnew}(·|y))`.
/// An average of divergences, hence non-negative; `+∞` on posterior support
/// loss.
pub fn delta_h(c: &Channel, theta_new: &Dist, theta_t: &Dist, tau: &Dist) -> Result<f64> {
    require_plausible(c, theta_t, tau)?;
    require_plausible(c, theta_new, tau)?;
    let inv_t = c.invert(theta_t)?;
    let inv_new = c.invert(theta_new)?;
    let mut total = 0.0;
    for y in 0..c.output_count() {
        if tau[y] == 0.0 {
            continue;
        }
        let row_t = inv_t.row(y).expect("theta_t plausible");
        let row_new = inv_new.row(y).expect("theta_new plausible");
        match kl_divergence(row_t, row_new)? {
            ExtendedReal::Finite(v) => total += tau[y] * v,
            ExtendedReal::PosInf => return Ok(f64::INFINITY),
            ExtendedReal::NegInf => unreachable!("KL divergence is never negative infinity"),
        }
    }
    Ok(total)
}

/// Difference of extended reals collapsed to `f64`; equal infinities cancel
/// to zero (the trace "did not change").
fn ext_sub(a: ExtendedReal, b: ExtendedReal) -> f64 {
    use ExtendedReal::*;
    match (a, b) {
        (Finite(x), Finite(y)) => x - y,
        (PosInf, PosInf) | (NegInf, NegInf) => 0.0,
        (PosInf, _) | (_, NegInf) => f64::INFINITY,
        (NegInf, _) | (_, PosInf) => f64::NEG_INFINITY,
    }
}

/// Run the update loop from `theta0` until a stopping criterion fires.
///
/// Inputs that cannot have produced any observed output are dropped up front
/// and re-embedded into every record's `theta` with exact zero mass, so the
/// records chain under the original channel as well.
///
/// Stopping: the candidate iterate θ_{t+1} is computed; if it moved less than
/// `theta_l1_tol` in L1 (or not at all) the loop stops *without* recording
/// the near-duplicate, reporting the fixed point θ_t. Otherwise the iterate
/// is recorded, and a log-likelihood gain at or below `delta_l_tol` stops at
/// the recorded iterate. `max_iterations` bounds the number of recorded
/// steps and is the only stop that reports `converged = false`. When the
/// final iterate fits the observations exactly (KL equal to zero) the reason
/// is reported as [`StopReason::KlTolerance`], the strongest true statement.
pub fn run(c: &Channel, theta0: &Dist, tau: &Dist, stop: &StopCriteria) -> Result<Trace> {
    stop.validate()?;
    if theta0.len() != c.input_count() {
        return Err(Error::DomainMismatch {
            expected: c.input_count(),
            actual: theta0.len(),
        });
    }
    require_plausible(c, theta0, tau)?;
    let (reduced, kept) = c.prune_inputs(tau)?;
    let full_len = theta0.len();
    let embed = |theta: &Dist| -> Dist {
        let mut weights = vec![0.0; full_len];
        for (i, &x) in kept.iter().enumerate() {
            weights[x] = theta[i];
        }
        Dist::from_normalized_unchecked(weights)
    };
    // Plausibility puts positive prior mass on the kept inputs, so this
    // restriction cannot lose all mass.
    let mut theta = Dist::normalized(kept.iter().map(|&x| theta0[x]).collect())?;

    let mut records = Vec::new();
    let predictive = reduced.push_forward(&theta)?;
    records.push(StepRecord {
        iteration: 0,
        theta: embed(&theta),
        predictive: predictive.clone(),
        kl: kl_divergence(tau, &predictive)?,
        log_lik: log_likelihood(tau, &predictive)?,
        delta_q: None,
        delta_h: None,
    });

    let (converged, stop_reason) = loop {
        let steps_taken = records.len() - 1;
        if steps_taken >= stop.max_iterations {
            break (false, StopReason::MaxIterations);
        }
        let next = jeffrey_step(&reduced, &theta, tau)?;
        let moved = next.l1_distance(&theta)?;
        if moved == 0.0 || (stop.theta_l1_tol > 0.0 && moved <= stop.theta_l1_tol) {
            break (true, StopReason::ThetaFixedPoint);
        }
        let dq = delta_q(&reduced, &next, &theta, tau)?;
        let dh = delta_h(&reduced, &next, &theta, tau)?;
        let predictive = reduced.push_forward(&next)?;
        let kl = kl_divergence(tau, &predictive)?;
        let log_lik = log_likelihood(tau, &predictive)?;
        let gain = ext_sub(log_lik, records.last().expect("nonempty").log_lik);
        records.push(StepRecord {
            iteration: steps_taken + 1,
            theta: embed(&next),
            predictive,
            kl,
            log_lik,
            delta_q: Some(dq),
            delta_h: Some(dh),
        });
        theta = next;
        if stop.delta_l_tol > 0.0 && gain <= stop.delta_l_tol {
            break (true, StopReason::LikelihoodPlateau);
        }
    };

    let exact_fit = records.last().expect("nonempty").kl == ExtendedReal::Finite(0.0);
    Ok(Trace {
        records,
        converged: converged || exact_fit,
        stop_reason: if exact_fit {
            StopReason::KlTolerance
        } else {
            stop_reason
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    KlIncrease,
    LogLikDecrease,
    IdentityGap,
}

/// A certification failure at one consecutive pair of records.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Violation {
    /// Index of the later record of the offending pair.
    pub index: usize,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

/// Outcome of checking a trace against the monotonicity guarantee.
///
/// The worst observed deltas are reported even on a pass (they are normally
/// negative, i.e. margins); `pass` means none exceeded its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub pass: bool,
    /// Consecutive pairs examined (records − 1; 0 is a vacuous pass).
    pub steps: usize,
    pub first_violation: Option<Violation>,
    /// max over steps of `kl[t] − kl[t−1]`; violation above [`MONOTONE_TOL`].
    pub worst_kl_increase: f64,
    /// max over steps of `log_lik[t−1] − log_lik[t]`.
    pub worst_log_lik_decrease: f64,
    /// max over steps of `|kl drop − log-likelihood gain|`; violation above
    /// [`IDENTITY_TOL`].
    pub worst_identity_gap: f64,
}

/// Check that KL never increases and log-likelihood never decreases along
/// the records (within [`MONOTONE_TOL`]), and that each KL drop matches the
/// log-likelihood gain (within [`IDENTITY_TOL`]).
pub fn certify_monotone(records: &[StepRecord]) -> MonotonicityReport {
    let mut report = MonotonicityReport {
        pass: true,
        steps: records.len().saturating_sub(1),
        first_violation: None,
        worst_kl_increase: f64::NEG_INFINITY,
        worst_log_lik_decrease: f64::NEG_INFINITY,
        worst_identity_gap: f64::NEG_INFINITY,
    };
    if records.len() < 2 {
        report.worst_kl_increase = 0.0;
        report.worst_log_lik_decrease = 0.0;
        report.worst_identity_gap = 0.0;
        return report;
    }
    let flag = |violation: Violation, report: &mut MonotonicityReport| {
        report.pass = false;
        if report.first_violation.is_none() {
            report.first_violation = Some(violation);
        }
    };
    for t in 1..records.len() {
        let (prev, cur) = (&records[t - 1], &records[t]);
        let kl_increase = ext_sub(cur.kl, prev.kl);
        let ll_decrease = ext_sub(prev.log_lik, cur.log_lik);
        // kl drop and log-likelihood gain are the same quantity in exact
        // arithmetic; equal infinities count as agreeing.
        let drop = ext_sub(prev.kl, cur.kl);
        let gain = ext_sub(cur.log_lik, prev.log_lik);
        let identity_gap = if drop.is_infinite() && gain.is_infinite() && drop == gain {
            0.0
        } else {
            (drop - gain).abs()
        };
        report.worst_kl_increase = report.worst_kl_increase.max(kl_increase);
        report.worst_log_lik_decrease = report.worst_log_lik_decrease.max(ll_decrease);
        report.worst_identity_gap = report.worst_identity_gap.max(identity_gap);
        if kl_increase > MONOTONE_TOL {
            flag(
                Violation {
                    index: t,
                    kind: ViolationKind::KlIncrease,
                    magnitude: kl_increase,
                },
                &mut report,
            );
        }
        if ll_decrease > MONOTONE_TOL {
            flag(
                Violation {
                    index: t,
                    kind: ViolationKind::LogLikDecrease,
                    magnitude: ll_decrease,
                },
                &mut report,
            );
        }
        // a NaN gap (conceivable only in hand-built records) is a violation
        if identity_gap > IDENTITY_TOL || identity_gap.is_nan() {
            flag(
                Violation {
                    index: t,
                    kind: ViolationKind::IdentityGap,
                    magnitude: identity_gap,
                },
                &mut report,
            );
        }
    }
    report
}

/// Exhaustive grid maximization of [`q_function`] over the simplex.
///
/// Enumerates all compositions of `grid_resolution` into `N` parts in
/// lexicographic order and returns the first point attaining the maximal Q.
/// Deliberately brute-force — it exists to check that [`jeffrey_step`] is
/// the Q-maximizer — so the input domain is capped at 4.
pub fn argmax_q_oracle(
    c: &Channel,
    theta_t: &Dist,
    tau: &Dist,
    grid_resolution: usize,
) -> Result<Dist> {
    let n = c.input_count();
    if n > ORACLE_MAX_INPUTS {
        return Err(Error::DomainTooLargeForOracle {
            max: ORACLE_MAX_INPUTS,
            actual: n,
        });
    }
    if grid_resolution == 0 {
        return Err(Error::DegenerateGrid);
    }
    require_plausible(c, theta_t, tau)?;

    let g = grid_resolution;
    let mut best: Option<(ExtendedReal, Dist)> = None;
    let mut counts = vec![0usize; n];
    visit_compositions(g, 0, &mut counts, &mut |counts| -> Result<()> {
        let point = Dist::new(counts.iter().map(|&k| k as f64 / g as f64).collect())?;
        let q = q_function(c, &point, theta_t, tau)?;
        let better = match &best {
            None => true,
            Some((best_q, _)) => q > *best_q,
        };
        if better {
            best = Some((q, point));
        }
        Ok(())
    })?;
    Ok(best.expect("the grid has at least one point").1)
}

/// Call `f` on every vector of non-negative counts summing to `remaining`,
/// filling `counts[at..]`, in lexicographic order.
fn visit_compositions(
    remaining: usize,
    at: usize,
    counts: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if at == counts.len() - 1 {
        counts[at] = remaining;
        return f(counts);
    }
    for k in 0..=remaining {
        counts[at] = k;
        visit_compositions(remaining - k, at + 1, counts, f)?;
    }
    Ok(())
}
