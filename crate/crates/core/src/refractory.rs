//! Refractory mechanism: a neuron that switches on stays on for τ_ref
//! updates (discrete) or τ_ref time units (OU), and all biases are shifted by
//! -ln τ' to compensate for the longer active phase.
//!
//! Discrete bookkeeping: a switch-on sets the neuron's counter to τ_ref. Each
//! visit decrements a positive counter; while it stays positive the neuron is
//! held on and the update rule is skipped. When it reaches zero the rule runs
//! on the still-active neuron, and a fresh "on" output starts a new period.

use crate::error::{Error, Result};
use crate::network::{
    two_state_activation, BinaryState, MeasureConfig, NetworkParams, NetworkSampler, SiteRule,
};
use crate::ou::{measure_ou_activation, OuConfig, OuKind, OuNetwork};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefractoryConfig {
    pub tau_ref: f64,
    pub tau_prime: f64,
}

impl RefractoryConfig {
    pub fn new(tau_ref: f64, tau_prime: f64) -> Result<Self> {
        if !(tau_ref > 0.0) || !tau_ref.is_finite() {
            return Err(Error::InvalidParameter(format!("tau_ref = {tau_ref}")));
        }
        if !(tau_prime > 0.0) || !tau_prime.is_finite() {
            return Err(Error::InvalidParameter(format!("tau_prime = {tau_prime}")));
        }
        Ok(Self { tau_ref, tau_prime })
    }

    /// Shift equal to the refractory time.
    pub fn matched(tau_ref: f64) -> Result<Self> {
        Self::new(tau_ref, tau_ref)
    }

    /// τ_ref as a whole number of visits (≥ 1).
    pub fn discrete_tau(&self) -> Result<u32> {
        if self.tau_ref < 1.0 || self.tau_ref.fract() != 0.0 || self.tau_ref > u32::MAX as f64 {
            return Err(Error::InvalidParameter(format!(
                "discrete tau_ref must be a whole number >= 1, got {}",
                self.tau_ref
            )));
        }
        Ok(self.tau_ref as u32)
    }

    /// Integrator steps covered by τ_ref, at least one.
    pub fn clamp_steps(&self, dt: f64) -> Result<u64> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt = {dt}")));
        }
        Ok(((self.tau_ref / dt).round() as u64).max(1))
    }
}

/// Samplers that accept the refractory decoration.
pub trait Refractory: Sized {
    fn wrap_refractory(self, cfg: &RefractoryConfig) -> Result<Self>;
}

impl Refractory for NetworkSampler {
    fn wrap_refractory(mut self, cfg: &RefractoryConfig) -> Result<Self> {
        self.set_refractory(cfg)?;
        Ok(self)
    }
}

impl Refractory for OuNetwork {
    fn wrap_refractory(mut self, cfg: &RefractoryConfig) -> Result<Self> {
        self.set_refractory(cfg)?;
        Ok(self)
    }
}

pub fn wrap_refractory<S: Refractory>(sampler: S, cfg: &RefractoryConfig) -> Result<S> {
    sampler.wrap_refractory(cfg)
}

/// Closed-form stationary activation of a free neuron with bias `b` under a
/// discrete rule with refractory counters.
pub fn closed_form_activation(rule: &SiteRule, b: f64, cfg: &RefractoryConfig) -> Result<f64> {
    let tau = cfg.discrete_tau()? as f64;
    let params = NetworkParams::free(&[b - cfg.tau_prime.ln()]);
    let dlm = rule.dlm_config(&params)?;
    let w01 = rule.flip_prob(&params, dlm.as_ref(), &[0], 0);
    let w10 = rule.flip_prob(&params, dlm.as_ref(), &[1], 0);
    Ok(two_state_activation(w01.ln(), w10.ln(), tau))
}

/// Stationary distribution of a small row-stochastic matrix, by solving
/// π(P - I) = 0 with Σπ = 1.
fn stationary_dense(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = p.len();
    // Transposed system with the last equation replaced by normalisation.
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|r| {
            let mut row: Vec<f64> = (0..k).map(|c| p[c][r] - if r == c { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[k - 1] = vec![1.0; k + 1];
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).expect("rows");
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::ZeroDenominator("singular stationarity system".into()));
        }
        a.swap(col, piv);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Ok(a.iter().map(|row| row[k]).collect())
}

/// P(z = 1) of the single-neuron (z, counter) chain with per-visit switch
/// probabilities `w01` (from off) and `w10` (from on, at expiry), by a direct
/// linear solve over its τ + 1 states.
pub fn counter_chain_activation(w01: f64, w10: f64, tau: u32) -> Result<f64> {
    if tau == 0 {
        return Err(Error::InvalidParameter("tau must be >= 1".into()));
    }
    let t = tau as usize;
    // State 0: off. State k in 1..=τ: on with counter k.
    let mut p = vec![vec![0.0; t + 1]; t + 1];
    p[0][0] = 1.0 - w01;
    p[0][t] += w01;
    for k in 2..=t {
        p[k][k - 1] = 1.0;
    }
    p[1][0] += w10;
    p[1][t] += 1.0 - w10;
    let pi = stationary_dense(&p)?;
    Ok(1.0 - pi[0])
}

/// Calibrates τ' so that the free-neuron activation at zero bias is 1/2.
///
/// `probe(τ')` returns P(z = 1) at b = 0, which must decrease with τ'.
/// Bisection on ln τ' stops once |P - 1/2| < `tol`.
pub fn calibrate_tau_prime<F>(mut probe: F, tau_ref: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(tau_ref > 0.0) {
        return Err(Error::InvalidParameter(format!("tau_ref = {tau_ref}")));
    }
    let centre = tau_ref.ln();
    let mut width = 1.0;
    let (mut lo, mut hi);
    let mut expansions = 0;
    loop {
        lo = centre - width;
        hi = centre + width;
        let p_lo = probe(lo.exp())?;
        let p_hi = probe(hi.exp())?;
        if (p_lo - 0.5).abs() < tol {
            return Ok(lo.exp());
        }
        if (p_hi - 0.5).abs() < tol {
            return Ok(hi.exp());
        }
        if p_lo > 0.5 && p_hi < 0.5 {
            break;
        }
        expansions += 1;
        if expansions > 8 {
            return Err(Error::BracketFailure(format!(
                "P(1) = {p_lo} at tau' = {}, {p_hi} at tau' = {}",
                lo.exp(),
                hi.exp()
            )));
        }
        width *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = probe(mid.exp())?;
        if (p - 0.5).abs() < tol || hi - lo < 1e-13 {
            return Ok(mid.exp());
        }
        if p > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Noise-free probe for a discrete rule.
pub fn discrete_probe(rule: SiteRule, tau_ref: f64) -> impl FnMut(f64) -> Result<f64> {
    move |tp| closed_form_activation(&rule, 0.0, &RefractoryConfig::new(tau_ref, tp)?)
}

/// Simulated probe for an OU process; every call reuses `seed`.
pub fn ou_probe(
    kind: OuKind,
    cfg: OuConfig,
    tau_ref: f64,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> impl FnMut(f64) -> Result<f64> {
    move |tp| {
        let r = RefractoryConfig::new(tau_ref, tp)?;
        let m = MeasureConfig { samples: steps, burn_in, seed, batches: 20, stream_base: 0 };
        Ok(measure_ou_activation(kind, &cfg, Some(&r), &[0.0], &m)?.p[0])
    }
}

/// Σ_j W_ij z_j for every i, where a neuron counts as active for its whole
/// (refractory-extended) on period: the rectangular postsynaptic kernel.
pub fn rectangular_psp_interaction(p: &NetworkParams, z: &BinaryState) -> Result<Vec<f64>> {
    if z.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: z.len() });
    }
    Ok((0..p.n()).map(|i| p.drive(z.as_slice(), i) - p.bias(i)).collect())
}

/// Exact stationary distribution over z of a small network with refractory
/// counters, from the product chain over per-neuron (z, counter) states.
pub fn refractory_exact_stationary(
    params: &NetworkParams,
    rule: &SiteRule,
    cfg: &RefractoryConfig,
) -> Result<Vec<f64>> {
    let n = params.n();
    let tau = cfg.discrete_tau()? as usize;
    let base = tau + 1;
    let size = base.checked_pow(n as u32).filter(|&s| s <= 200_000).ok_or(Error::TooLarge { n, limit: 200_000 })?;
    let shifted = params.with_bias_shift(-cfg.tau_prime.ln());
    let dlm = rule.dlm_config(&shifted)?;
    let decode = |mut s: usize| -> Vec<usize> {
        (0..n)
            .map(|_| {
                let d = s % base;
                s /= base;
                d
            })
            .collect()
    };
    let encode = |c: &[usize]| c.iter().rev().fold(0, |acc, &d| acc * base + d);
    // Sparse transitions: (from, to, prob).
    let mut trans: Vec<(usize, usize, f64)> = Vec::new();
    for s in 0..size {
        let c = decode(s);
        let z: Vec<u8> = c.iter().map(|&k| (k > 0) as u8).collect();
        for i in 0..n {
            let w = 1.0 / n as f64;
            let mut next = c.clone();
            if c[i] >= 2 {
                next[i] -= 1;
                trans.push((s, encode(&next), w));
                continue;
            }
            let f = rule.flip_prob(&shifted, dlm.as_ref(), &z, i);
            let p_on = if z[i] == 1 { 1.0 - f } else { f };
            next[i] = tau;
            trans.push((s, encode(&next), w * p_on));
            next[i] = 0;
            trans.push((s, encode(&next), w * (1.0 - p_on)));
        }
    }
    let mut pi = vec![1.0 / size as f64; size];
    let mut next = vec![0.0; size];
    for _ in 0..1_000_000 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for &(a, b, p) in &trans {
            next[b] += pi[a] * p;
        }
        let mut change = 0.0;
        for s in 0..size {
            let v = 0.5 * (pi[s] + next[s]);
            change += (v - pi[s]).abs();
            pi[s] = v;
        }
        if change < 1e-15 {
            break;
        }
    }
    let mut marginal = vec![0.0; 1 << n];
    for (s, &p) in pi.iter().enumerate() {
        let idx = decode(s).iter().enumerate().fold(0, |acc, (i, &k)| acc | (((k > 0) as usize) << i));
        marginal[idx] += p;
    }
    Ok(marginal)
}
