//! Langevin dynamics for discrete state spaces.
//!
//! A proposal ν from state φ is accepted when
//! `-1 - (ε/(2λ)) ΔS + √ε η ≥ 0`, i.e. `η ≥ 1/√ε + c ΔS` with
//! `c = √ε/(2λ_ε)` (or `√ε/2` with the λ flag off). The noise η may be
//! truncated from below at `1/√ε + α`, which rescales every transition
//! probability by the same factor.

use crate::error::{check_epsilon, Error, Result};
use crate::math::{lambda_eps, log_std_normal_cdf};
use crate::noise::{RngStream, TruncationSpec};

/// Finite system with an action S and a declared bound on |ΔS|.
pub trait DiscreteSystem {
    type State: Clone + PartialEq;

    fn contains(&self, state: &Self::State) -> bool;
    fn action(&self, state: &Self::State) -> f64;

    /// S(to) - S(from).
    fn delta_action(&self, from: &Self::State, to: &Self::State) -> f64 {
        self.action(to) - self.action(from)
    }

    fn delta_max(&self) -> f64;
}

/// A single variable over `k` labelled states with given actions.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSystem {
    actions: Vec<f64>,
}

impl FiniteSystem {
    pub fn new(actions: Vec<f64>) -> Result<Self> {
        if actions.len() < 2 {
            return Err(Error::InvalidParameter("need at least two states".into()));
        }
        if actions.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite action".into()));
        }
        Ok(Self { actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Uniform over the states other than `current`.
    pub fn propose(&self, current: usize, rng: &mut RngStream) -> usize {
        let k = rng.index(self.actions.len() - 1);
        if k >= current {
            k + 1
        } else {
            k
        }
    }
}

impl DiscreteSystem for FiniteSystem {
    type State = usize;

    fn contains(&self, state: &usize) -> bool {
        *state < self.actions.len()
    }

    fn action(&self, state: &usize) -> f64 {
        self.actions[*state]
    }

    fn delta_max(&self) -> f64 {
        let hi = self.actions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.actions.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlmConfig {
    truncation: TruncationSpec,
    use_lambda: bool,
    lambda: f64,
    coupling: f64,
    threshold: f64,
}

impl DlmConfig {
    pub fn new(epsilon: f64, alpha: f64, use_lambda: bool) -> Result<Self> {
        check_epsilon(epsilon)?;
        if alpha.is_nan() || alpha == f64::INFINITY {
            return Err(Error::InvalidParameter(format!("alpha = {alpha}")));
        }
        let lambda = if use_lambda { lambda_eps(epsilon)? } else { 1.0 };
        Ok(Self {
            truncation: TruncationSpec { alpha, epsilon },
            use_lambda,
            lambda,
            coupling: epsilon.sqrt() / (2.0 * lambda),
            threshold: 1.0 / epsilon.sqrt(),
        })
    }

    pub fn untruncated(epsilon: f64, use_lambda: bool) -> Result<Self> {
        Self::new(epsilon, f64::NEG_INFINITY, use_lambda)
    }

    /// α = -c Δ_max: the largest truncation that keeps probabilities ≤ 1.
    pub fn max_truncation(epsilon: f64, use_lambda: bool, delta_max: f64) -> Result<Self> {
        let base = Self::untruncated(epsilon, use_lambda)?;
        Self::new(epsilon, base.alpha_bound(delta_max), use_lambda)
    }

    pub fn epsilon(&self) -> f64 {
        self.truncation.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.truncation.alpha
    }

    pub fn truncation(&self) -> TruncationSpec {
        self.truncation
    }

    pub fn use_lambda(&self) -> bool {
        self.use_lambda
    }

    /// λ_ε, or 1 with the flag off.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// c = √ε/(2λ).
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn alpha_bound(&self, delta_max: f64) -> f64 {
        -self.coupling * delta_max
    }

    /// Rejects a truncation that could push some transition probability above 1.
    pub fn validate(&self, delta_max: f64) -> Result<()> {
        let bound = self.alpha_bound(delta_max);
        if self.truncation.alpha > bound + 1e-12 * bound.abs().max(1.0) {
            let p = transition_prob_unchecked(-delta_max, self);
            return Err(Error::TruncationViolated(p));
        }
        Ok(())
    }

    /// One noise draw; true if a move with action change `delta_s` is taken.
    #[inline]
    pub fn accept(&self, delta_s: f64, rng: &mut RngStream) -> bool {
        let eta = rng.truncated_normal(self.truncation.lower());
        eta >= self.threshold + self.coupling * delta_s
    }

    /// Log of the truncation normalisation Φ(-1/√ε - α).
    pub fn log_norm(&self) -> f64 {
        if self.truncation.is_truncated() {
            log_std_normal_cdf(-self.threshold - self.truncation.alpha)
        } else {
            0.0
        }
    }

    pub fn log_transition_prob(&self, delta_s: f64) -> f64 {
        log_std_normal_cdf(-self.threshold - self.coupling * delta_s) - self.log_norm()
    }
}

fn transition_prob_unchecked(delta_s: f64, cfg: &DlmConfig) -> f64 {
    cfg.log_transition_prob(delta_s).exp()
}

pub fn dlm_step<S: DiscreteSystem>(
    system: &S,
    phi: &S::State,
    nu: &S::State,
    cfg: &DlmConfig,
    rng: &mut RngStream,
) -> Result<S::State> {
    if !system.contains(nu) {
        return Err(Error::InvalidProposal);
    }
    if nu == phi {
        return Ok(phi.clone());
    }
    let ds = system.delta_action(phi, nu);
    Ok(if cfg.accept(ds, rng) { nu.clone() } else { phi.clone() })
}

/// Φ(a - cΔS)/Φ(a - α); the raw numerator when untruncated.
pub fn transition_prob(delta_s: f64, cfg: &DlmConfig) -> Result<f64> {
    let p = transition_prob_unchecked(delta_s, cfg);
    if p > 1.0 + 1e-12 {
        return Err(Error::TruncationViolated(p));
    }
    Ok(p.min(1.0))
}

/// Accepts with probability exp(-(ΔS + Δ_max)/2), the ε → 0 limit of the
/// maximally truncated rule.
pub fn metropolis_equivalent_step<S: DiscreteSystem>(
    system: &S,
    phi: &S::State,
    nu: &S::State,
    rng: &mut RngStream,
) -> Result<S::State> {
    if !system.contains(nu) {
        return Err(Error::InvalidProposal);
    }
    if nu == phi {
        return Ok(phi.clone());
    }
    let ds = system.delta_action(phi, nu);
    let r = rng.uniform();
    let accept = (-(ds + system.delta_max()) / 2.0).exp() - r >= 0.0;
    Ok(if accept { nu.clone() } else { phi.clone() })
}

/// ln W(ΔS) - ln W(-ΔS) + ΔS: zero under exact detailed balance.
pub fn detailed_balance_residual(delta_s: f64, cfg: &DlmConfig) -> f64 {
    let a = -1.0 / cfg.epsilon().sqrt();
    let c = cfg.coupling();
    log_std_normal_cdf(a - c * delta_s) - log_std_normal_cdf(a + c * delta_s) + delta_s
}

/// Which clock a record's time stamps are measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScale {
    /// Update steps or sweeps of the simulation.
    Computer,
    /// Rescaled onto a reference process.
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub times: Vec<f64>,
    /// One row of observables per time stamp.
    pub values: Vec<Vec<f64>>,
    pub time_scale: TimeScale,
}

impl RunRecord {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: values.len() });
        }
        Ok(Self { times, values, time_scale: TimeScale::Computer })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Column `k` of the observables.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }
}

/// Scales all rates by `a`, i.e. divides every time stamp by `a`.
pub fn rescale_time(record: &RunRecord, a: f64) -> Result<RunRecord> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("time scale factor {a}")));
    }
    Ok(RunRecord {
        times: record.times.iter().map(|t| t / a).collect(),
        values: record.values.clone(),
        time_scale: if a == 1.0 { record.time_scale } else { TimeScale::Real },
    })
}
