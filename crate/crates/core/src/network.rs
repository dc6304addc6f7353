//! Boltzmann-machine parameters and the discrete samplers built on them.
//!
//! Sign convention: the *drive* of neuron i is `Σ_j W_ij z_j + b_i`; the
//! total input is its negative, `m_i = -drive`, so that switching z_i on
//! changes the energy by exactly `m_i`.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::analysis::batch_means;
use crate::error::{check_epsilon, Error, Result};
use crate::langevin::DlmConfig;
use crate::math::{
    lambda_eps, log_std_normal_cdf, logistic, ratio_from_logs, std_normal_cdf,
    std_normal_pdf,
};
use crate::noise::{RngStream, TruncationSpec};
use crate::refractory::RefractoryConfig;

/// Symmetric weights with zero diagonal and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    n: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl NetworkParams {
    /// `w` is row-major n×n.
    pub fn new(n: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: w.len() });
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        if w.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite weight or bias".into()));
        }
        for i in 0..n {
            if w[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(format!("W[{i}][{i}] must be zero")));
            }
            for j in 0..i {
                if w[i * n + j] != w[j * n + i] {
                    return Err(Error::InvalidParameter(format!("W not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, w, b })
    }

    pub fn from_rows(rows: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        let n = b.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
        }
        Self::new(n, rows.concat(), b)
    }

    /// Uncoupled neurons with the given biases.
    pub fn free(b: &[f64]) -> Self {
        let n = b.len();
        Self { n, w: vec![0.0; n * n], b: b.to_vec() }
    }

    /// Weights and biases uniform in [-w_max, w_max] and [-b_max, b_max].
    pub fn random(n: usize, w_max: f64, b_max: f64, rng: &mut RngStream) -> Self {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let x = w_max * (2.0 * rng.uniform() - 1.0);
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
        }
        let b = (0..n).map(|_| b_max * (2.0 * rng.uniform() - 1.0)).collect();
        Self { n, w, b }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn bias(&self, i: usize) -> f64 {
        self.b[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    /// Same weights, every bias shifted by `shift`.
    pub fn with_bias_shift(&self, shift: f64) -> Self {
        Self { n: self.n, w: self.w.clone(), b: self.b.iter().map(|x| x + shift).collect() }
    }

    /// Largest |m_i| over all neurons and all configurations.
    pub fn delta_max(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let row = &self.w[i * self.n..(i + 1) * self.n];
                let pos: f64 = row.iter().filter(|&&x| x > 0.0).sum();
                let neg: f64 = row.iter().filter(|&&x| x < 0.0).sum();
                (self.b[i] + pos).abs().max((self.b[i] + neg).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Σ_j W_ij z_j + b_i.
    #[inline]
    pub fn drive(&self, z: &[u8], i: usize) -> f64 {
        let row = &self.w[i * self.n..(i + 1) * self.n];
        let mut s = self.b[i];
        for (w, &zj) in row.iter().zip(z) {
            if zj != 0 {
                s += w;
            }
        }
        s
    }

    /// Plain-text form: n, then n rows of W, then the biases.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.weight(i, j).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let b: Vec<String> = self.b.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", b.join(" "));
        out
    }
}

impl FromStr for NetworkParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let parse_row = |line: Option<&str>, what: &str| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| Error::Parse(format!("missing {what}")))?;
            line.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{what}: {t}: {e}"))))
                .collect()
        };
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty input".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("neuron count: {e}")))?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let row = parse_row(lines.next(), &format!("weight row {i}"))?;
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            rows.push(row);
        }
        let b = parse_row(lines.next(), "bias line")?;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing content".into()));
        }
        NetworkParams::from_rows(&rows, b)
    }
}

/// Binary network state. Configuration index packs z_0 into the least
/// significant bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryState {
    z: Vec<u8>,
}

impl BinaryState {
    pub fn zeros(n: usize) -> Self {
        Self { z: vec![0; n] }
    }

    pub fn from_bits(z: Vec<u8>) -> Result<Self> {
        if z.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("state entries must be 0 or 1".into()));
        }
        Ok(Self { z })
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        Self { z: (0..n).map(|i| ((index >> i) & 1) as u8).collect() }
    }

    pub fn index(&self) -> usize {
        self.z.iter().enumerate().fold(0, |acc, (i, &v)| acc | ((v as usize) << i))
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.z[i]
    }

    pub fn set(&mut self, i: usize, v: u8) {
        self.z[i] = v & 1;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.z
    }
}

fn check_dims(p: &NetworkParams, z: &BinaryState) -> Result<()> {
    if p.n != z.len() {
        return Err(Error::DimensionMismatch { expected: p.n, got: z.len() });
    }
    Ok(())
}

fn check_index(p: &NetworkParams, i: usize) -> Result<()> {
    if i >= p.n {
        return Err(Error::IndexOutOfRange { index: i, len: p.n });
    }
    Ok(())
}

/// E = -Σ_{i<j} W_ij z_i z_j - Σ_i b_i z_i.
pub fn energy(p: &NetworkParams, z: &BinaryState) -> Result<f64> {
    check_dims(p, z)?;
    let mut e = 0.0;
    for i in 0..p.n {
        if z.z[i] == 0 {
            continue;
        }
        e -= p.b[i];
        for j in 0..i {
            if z.z[j] != 0 {
                e -= p.weight(i, j);
            }
        }
    }
    Ok(e)
}

/// m_i = -Σ_j W_ij z_j - b_i.
pub fn total_input(p: &NetworkParams, z: &BinaryState, i: usize) -> Result<f64> {
    check_dims(p, z)?;
    check_index(p, i)?;
    Ok(-p.drive(&z.z, i))
}

/// Parameters of the sign-dependent machine:
/// W'_ii = 2/√ε, W'_ij = c W_ij, b'_i = c b_i - 1/√ε with c = √ε/(2λ_ε).
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedParams {
    pub epsilon: f64,
    pub wp_diag: f64,
    pub wp: Vec<f64>,
    pub bp: Vec<f64>,
    pub lambda_used: bool,
    n: usize,
}

impl TransformedParams {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self) -> f64 {
        let lambda = if self.lambda_used { lambda_eps(self.epsilon).unwrap_or(1.0) } else { 1.0 };
        self.epsilon.sqrt() / (2.0 * lambda)
    }

    /// W'_ii z_i + Σ_j W'_ij z_j + b'_i.
    #[inline]
    pub fn input(&self, z: &[u8], i: usize) -> f64 {
        let row = &self.wp[i * self.n..(i + 1) * self.n];
        let mut s = self.bp[i];
        if z[i] != 0 {
            s += self.wp_diag;
        }
        for (w, &zj) in row.iter().zip(z) {
            if zj != 0 {
                s += w;
            }
        }
        s
    }

    /// Recovers the untransformed parameters.
    pub fn to_params(&self) -> Result<NetworkParams> {
        let c = self.coupling();
        let t = 1.0 / self.epsilon.sqrt();
        let w = self.wp.iter().map(|x| x / c).collect();
        let b = self.bp.iter().map(|x| (x + t) / c).collect();
        NetworkParams::new(self.n, w, b)
    }
}

pub fn transform_params(p: &NetworkParams, epsilon: f64, use_lambda: bool) -> Result<TransformedParams> {
    check_epsilon(epsilon)?;
    let lambda = if use_lambda { lambda_eps(epsilon)? } else { 1.0 };
    let c = epsilon.sqrt() / (2.0 * lambda);
    let t = 1.0 / epsilon.sqrt();
    Ok(TransformedParams {
        epsilon,
        wp_diag: 2.0 * t,
        wp: p.w.iter().map(|x| c * x).collect(),
        bp: p.b.iter().map(|x| c * x - t).collect(),
        lambda_used: use_lambda,
        n: p.n,
    })
}

/// Scale r and shift μ⁰ of a cumulative Gaussian Φ((x - μ⁰)/r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub r: f64,
    pub mu0: f64,
}

impl Fit {
    pub const IDENTITY: Fit = Fit { r: 1.0, mu0: 0.0 };

    fn check(&self) -> Result<()> {
        if !(self.r > 0.0) || !self.r.is_finite() || !self.mu0.is_finite() {
            return Err(Error::InvalidParameter(format!("fit r = {}, mu0 = {}", self.r, self.mu0)));
        }
        Ok(())
    }
}

pub fn gibbs_step(p: &NetworkParams, z: &mut BinaryState, i: usize, rng: &mut RngStream) -> Result<()> {
    check_dims(p, z)?;
    check_index(p, i)?;
    let q = logistic(p.drive(&z.z, i));
    z.z[i] = (rng.uniform() < q) as u8;
    Ok(())
}

/// z_i ← Θ[drive - μ⁰ + r η], so P(z_i = 1) = Φ((drive - μ⁰)/r).
pub fn lm1_step(
    p: &NetworkParams,
    z: &mut BinaryState,
    i: usize,
    fit: Option<Fit>,
    rng: &mut RngStream,
) -> Result<()> {
    check_dims(p, z)?;
    check_index(p, i)?;
    let fit = fit.unwrap_or(Fit::IDENTITY);
    fit.check()?;
    let eta = rng.std_normal();
    z.z[i] = (p.drive(&z.z, i) - fit.mu0 + fit.r * eta >= 0.0) as u8;
    Ok(())
}

/// z_i ← Θ[u + η] from the inactive state and Θ[u - η] from the active one,
/// with u = W'_ii z_i + Σ W'_ij z_j + b'_i. The noise sign follows the flip
/// direction so that the truncation always bounds the switching noise.
pub fn lm2_step(
    tp: &TransformedParams,
    z: &mut BinaryState,
    i: usize,
    truncation: &TruncationSpec,
    rng: &mut RngStream,
) -> Result<()> {
    if tp.n != z.len() {
        return Err(Error::DimensionMismatch { expected: tp.n, got: z.len() });
    }
    if i >= tp.n {
        return Err(Error::IndexOutOfRange { index: i, len: tp.n });
    }
    lm2_update(tp, &mut z.z, i, truncation, rng)
}

#[inline]
fn lm2_update(
    tp: &TransformedParams,
    z: &mut [u8],
    i: usize,
    truncation: &TruncationSpec,
    rng: &mut RngStream,
) -> Result<()> {
    let u = tp.input(z, i);
    // Flip iff η ≥ h, with h = -u from z_i = 0 and h = u from z_i = 1.
    let h = if z[i] == 0 { -u } else { u };
    let lower = truncation.lower();
    if truncation.is_truncated() && h < lower - 1e-9 {
        let log_p = log_std_normal_cdf(-h) - log_std_normal_cdf(-lower);
        return Err(Error::TruncationViolated(log_p.exp()));
    }
    if rng.truncated_normal(lower) >= h {
        z[i] ^= 1;
    }
    Ok(())
}

/// Process labels used by the drivers and the transition-probability table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Process {
    Gibbs,
    Lm1,
    Lm1f,
    Lm2,
    Ou1,
    Ou1f,
    Ou2,
}

impl Process {
    pub fn name(&self) -> &'static str {
        match self {
            Process::Gibbs => "gibbs",
            Process::Lm1 => "lm1",
            Process::Lm1f => "lm1f",
            Process::Lm2 => "lm2",
            Process::Ou1 => "ou1",
            Process::Ou1f => "ou1f",
            Process::Ou2 => "ou2",
        }
    }

    pub fn uses_epsilon(&self) -> bool {
        matches!(self, Process::Lm2 | Process::Ou2)
    }
}

impl std::fmt::Display for Process {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Process {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "gibbs" | "bm" => Process::Gibbs,
            "lm1" => Process::Lm1,
            "lm1f" => Process::Lm1f,
            "lm2" => Process::Lm2,
            "ou1" => Process::Ou1,
            "ou1f" => Process::Ou1f,
            "ou2" => Process::Ou2,
            other => return Err(Error::Unsupported(format!("process '{other}'"))),
        })
    }
}

/// Probability of switching 0 → 1 in one update for total input `m`.
/// A refractory time τ_ref > 1 replaces m by m + ln τ_ref.
pub fn activation_table(process: Process, m: f64, epsilon: f64, tau_ref: f64) -> Result<f64> {
    if !(tau_ref >= 1.0) {
        return Err(Error::InvalidParameter(format!("tau_ref = {tau_ref} < 1")));
    }
    let m = if tau_ref > 1.0 { m + tau_ref.ln() } else { m };
    match process {
        Process::Gibbs => Ok(logistic(-m)),
        Process::Lm1 | Process::Ou1 => Ok(std_normal_cdf(-m)),
        Process::Lm2 => {
            check_epsilon(epsilon)?;
            let c = epsilon.sqrt() / (2.0 * lambda_eps(epsilon)?);
            Ok(std_normal_cdf(-1.0 / epsilon.sqrt() - c * m))
        }
        Process::Ou2 => {
            check_epsilon(epsilon)?;
            Ok(std_normal_pdf(-1.0 / epsilon.sqrt() - 0.5 * epsilon.sqrt() * m))
        }
        Process::Lm1f | Process::Ou1f => {
            Err(Error::Unsupported(format!("no transition-probability entry for {process}")))
        }
    }
}

/// Stationary P(z = 1) of a single neuron whose switch-on and switch-off
/// probabilities per visit are `exp(log_w01)` and `exp(log_w10)`, with each
/// switch-on holding it active for `tau` visits.
pub fn two_state_activation(log_w01: f64, log_w10: f64, tau: f64) -> f64 {
    ratio_from_logs(log_w01 + tau.ln(), log_w10)
}

/// Closed-form stationary activation of a free sign-dependent neuron with
/// bias `b`, refractory time `tau` and bias shift -ln `tau_prime`.
pub fn lm2_free_activation(b: f64, epsilon: f64, use_lambda: bool, tau: f64, tau_prime: f64) -> Result<f64> {
    let cfg = DlmConfig::untruncated(epsilon, use_lambda)?;
    let m = -(b - tau_prime.ln());
    Ok(two_state_activation(cfg.log_transition_prob(m), cfg.log_transition_prob(-m), tau))
}

/// How the LM² noise is truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    None,
    /// α = -c Δ_max of the (possibly bias-shifted) network.
    Max,
    Alpha(f64),
}

/// Update rule for a discrete network sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SiteRule {
    Gibbs,
    Lm1 { fit: Option<Fit> },
    Lm2 { epsilon: f64, use_lambda: bool, truncation: Truncation },
}

impl SiteRule {
    pub fn lm2(epsilon: f64) -> Self {
        SiteRule::Lm2 { epsilon, use_lambda: true, truncation: Truncation::Max }
    }

    pub fn process(&self) -> Process {
        match self {
            SiteRule::Gibbs => Process::Gibbs,
            SiteRule::Lm1 { fit: None } => Process::Lm1,
            SiteRule::Lm1 { fit: Some(_) } => Process::Lm1f,
            SiteRule::Lm2 { .. } => Process::Lm2,
        }
    }

    /// DLM configuration of an LM² rule on `params`.
    pub fn dlm_config(&self, params: &NetworkParams) -> Result<Option<DlmConfig>> {
        match *self {
            SiteRule::Lm2 { epsilon, use_lambda, truncation } => {
                let cfg = match truncation {
                    Truncation::None => DlmConfig::untruncated(epsilon, use_lambda)?,
                    Truncation::Max => DlmConfig::max_truncation(epsilon, use_lambda, params.delta_max())?,
                    Truncation::Alpha(a) => DlmConfig::new(epsilon, a, use_lambda)?,
                };
                cfg.validate(params.delta_max())?;
                Ok(Some(cfg))
            }
            _ => Ok(None),
        }
    }

    /// Probability that one update of neuron i in state z flips it.
    pub fn flip_prob(&self, params: &NetworkParams, cfg: Option<&DlmConfig>, z: &[u8], i: usize) -> f64 {
        let drive = params.drive(z, i);
        let on = z[i] != 0;
        match *self {
            SiteRule::Gibbs => {
                if on {
                    logistic(-drive)
                } else {
                    logistic(drive)
                }
            }
            SiteRule::Lm1 { fit } => {
                let f = fit.unwrap_or(Fit::IDENTITY);
                let x = (drive - f.mu0) / f.r;
                if on {
                    std_normal_cdf(-x)
                } else {
                    std_normal_cdf(x)
                }
            }
            SiteRule::Lm2 { .. } => {
                let cfg = cfg.expect("LM2 rule needs its DLM configuration");
                // ΔE is -drive for switching on, +drive for switching off.
                let de = if on { drive } else { -drive };
                cfg.log_transition_prob(de).exp().min(1.0)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Gibbs,
    Lm1(Fit),
    Lm2 { tp: TransformedParams, truncation: TruncationSpec },
}

/// Per-neuron refractory counters.
#[derive(Debug, Clone, PartialEq)]
pub struct RefractoryState {
    pub tau_ref: u32,
    pub counters: Vec<u32>,
}

/// A network sampler with random sequential site selection and an optional
/// refractory mechanism.
#[derive(Debug, Clone)]
pub struct NetworkSampler {
    base: NetworkParams,
    params: NetworkParams,
    rule: SiteRule,
    kernel: Kernel,
    state: BinaryState,
    refractory: Option<RefractoryState>,
    tau_prime: f64,
    rng: RngStream,
}

impl NetworkSampler {
    pub fn new(params: NetworkParams, rule: SiteRule, state: BinaryState, rng: RngStream) -> Result<Self> {
        check_dims(&params, &state)?;
        let kernel = build_kernel(&params, &rule)?;
        Ok(Self {
            base: params.clone(),
            params,
            rule,
            kernel,
            state,
            refractory: None,
            tau_prime: 1.0,
            rng,
        })
    }

    /// Installs refractory counters and shifts every bias by -ln τ'.
    pub(crate) fn set_refractory(&mut self, cfg: &RefractoryConfig) -> Result<()> {
        let tau = cfg.discrete_tau()?;
        self.params = self.base.with_bias_shift(-cfg.tau_prime.ln());
        self.kernel = build_kernel(&self.params, &self.rule)?;
        self.tau_prime = cfg.tau_prime;
        self.refractory = Some(RefractoryState { tau_ref: tau, counters: vec![0; self.params.n] });
        Ok(())
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn rule(&self) -> SiteRule {
        self.rule
    }

    pub fn state(&self) -> &BinaryState {
        &self.state
    }

    pub fn refractory(&self) -> Option<&RefractoryState> {
        self.refractory.as_ref()
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Updates neuron `i` once.
    pub fn update_site(&mut self, i: usize) -> Result<()> {
        if let Some(r) = &mut self.refractory {
            let c = &mut r.counters[i];
            if *c > 0 {
                *c -= 1;
                if *c > 0 {
                    return Ok(());
                }
            }
        }
        let z = &mut self.state.z;
        match &self.kernel {
            Kernel::Gibbs => {
                let q = logistic(self.params.drive(z, i));
                z[i] = (self.rng.uniform() < q) as u8;
            }
            Kernel::Lm1(fit) => {
                let eta = self.rng.std_normal();
                z[i] = (self.params.drive(z, i) - fit.mu0 + fit.r * eta >= 0.0) as u8;
            }
            Kernel::Lm2 { tp, truncation } => lm2_update(tp, z, i, truncation, &mut self.rng)?,
        }
        if let Some(r) = &mut self.refractory {
            if z[i] == 1 {
                r.counters[i] = r.tau_ref;
            }
        }
        Ok(())
    }

    /// One update of a uniformly chosen neuron.
    pub fn step(&mut self) -> Result<()> {
        let i = self.rng.index(self.params.n);
        self.update_site(i)
    }

    /// n single-site steps.
    pub fn sweep(&mut self) -> Result<()> {
        for _ in 0..self.params.n {
            self.step()?;
        }
        Ok(())
    }
}

fn build_kernel(params: &NetworkParams, rule: &SiteRule) -> Result<Kernel> {
    Ok(match *rule {
        SiteRule::Gibbs => Kernel::Gibbs,
        SiteRule::Lm1 { fit } => {
            let f = fit.unwrap_or(Fit::IDENTITY);
            f.check()?;
            Kernel::Lm1(f)
        }
        SiteRule::Lm2 { epsilon, use_lambda, .. } => {
            let cfg = rule.dlm_config(params)?.expect("lm2 config");
            Kernel::Lm2 { tp: transform_params(params, epsilon, use_lambda)?, truncation: cfg.truncation() }
        }
    })
}

/// Empirical free-neuron activation curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCurve {
    pub b: Vec<f64>,
    pub p: Vec<f64>,
    pub err: Vec<f64>,
}

impl ActivationCurve {
    /// p - σ(b) per grid point.
    pub fn deviation(&self) -> Vec<f64> {
        self.b.iter().zip(&self.p).map(|(b, p)| p - logistic(*b)).collect()
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.deviation().iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Settings shared by the activation measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureConfig {
    /// Recorded updates per grid point.
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Batches used for the error estimate.
    pub batches: usize,
    /// Grid point k runs on RNG stream `stream_base + k`.
    pub stream_base: u64,
}

impl MeasureConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, burn_in: 10_000, seed, batches: 100, stream_base: 0 }
    }
}

/// Measures P(z = 1) of a single free neuron for each bias in `b_grid`.
/// Errors come from batch means.
pub fn measure_activation(
    rule: SiteRule,
    refractory: Option<&RefractoryConfig>,
    b_grid: &[f64],
    cfg: &MeasureConfig,
) -> Result<ActivationCurve> {
    if cfg.samples == 0 {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let mut curve = ActivationCurve { b: vec![], p: vec![], err: vec![] };
    for (k, &b) in b_grid.iter().enumerate() {
        let mut s = NetworkSampler::new(
            NetworkParams::free(&[b]),
            rule,
            BinaryState::zeros(1),
            RngStream::stream(cfg.seed, cfg.stream_base + k as u64),
        )?;
        if let Some(r) = refractory {
            s.set_refractory(r)?;
        }
        for _ in 0..cfg.burn_in {
            s.update_site(0)?;
        }
        let mut xs = Vec::with_capacity(cfg.samples);
        for _ in 0..cfg.samples {
            s.update_site(0)?;
            xs.push(s.state.z[0] as f64);
        }
        let est = batch_means(&xs, cfg.batches.min(cfg.samples))?;
        curve.b.push(b);
        curve.p.push(est.mean);
        curve.err.push(est.err);
    }
    Ok(curve)
}

/// Least-squares fit of Φ((x - μ⁰)/r) to `ys` over `xs` (Levenberg-Marquardt).
pub fn fit_cdf(xs: &[f64], ys: &[f64]) -> Result<Fit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: xs.len() });
    }
    // Parametrise by s = ln r so r stays positive.
    let sse = |s: f64, mu: f64| -> f64 {
        let r = s.exp();
        xs.iter().zip(ys).map(|(x, y)| (std_normal_cdf((x - mu) / r) - y).powi(2)).sum()
    };
    let (mut s, mut mu) = (0.0f64, 0.0f64);
    let mut damping = 1e-3;
    let mut cost = sse(s, mu);
    const MAX_ITER: usize = 500;
    for _ in 0..MAX_ITER {
        let r = s.exp();
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (x, y) in xs.iter().zip(ys) {
            let t = (x - mu) / r;
            let res = std_normal_cdf(t) - y;
            let ph = std_normal_pdf(t);
            let g = [-ph * t, -ph / r];
            for a in 0..2 {
                jtr[a] += g[a] * res;
                for c in 0..2 {
                    jtj[a][c] += g[a] * g[c];
                }
            }
        }
        let grad_norm = jtr[0].abs().max(jtr[1].abs());
        if grad_norm < 1e-14 {
            return Ok(Fit { r, mu0: mu });
        }
        loop {
            let a00 = jtj[0][0] * (1.0 + damping);
            let a11 = jtj[1][1] * (1.0 + damping);
            let det = a00 * a11 - jtj[0][1] * jtj[1][0];
            if det == 0.0 || !det.is_finite() {
                return Err(Error::FitNonConvergence(MAX_ITER));
            }
            let ds = -(a11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let dm = -(a00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let trial = sse(s + ds, mu + dm);
            if trial <= cost {
                s += ds;
                mu += dm;
                let improvement = cost - trial;
                cost = trial;
                damping = (damping / 3.0).max(1e-12);
                if ds.abs() < 1e-13 && dm.abs() < 1e-13 || improvement <= 1e-30 {
                    return Ok(Fit { r: s.exp(), mu0: mu });
                }
                break;
            }
            damping *= 4.0;
            if damping > 1e12 {
                return Ok(Fit { r: s.exp(), mu0: mu });
            }
        }
    }
    Err(Error::FitNonConvergence(MAX_ITER))
}

/// The x ∈ [-6, 6] grid with spacing 0.05 used by [`fit_logistic`].
pub fn fit_grid() -> Vec<f64> {
    (0..=240).map(|k| -6.0 + 0.05 * k as f64).collect()
}

/// Best cumulative-Gaussian approximation Φ((x - μ⁰)/r) of the logistic σ(x).
pub fn fit_logistic() -> Result<Fit> {
    let xs = fit_grid();
    let ys: Vec<f64> = xs.iter().map(|&x| logistic(x)).collect();
    fit_cdf(&xs, &ys)
}

/// Stationary distribution of the random-sequential chain of `rule` on
/// `params`, by power iteration of the lazy kernel (I + T)/2 from `start`.
///
/// Returns the distribution and the L1 change of the final iteration.
pub fn exact_stationary(
    params: &NetworkParams,
    rule: &SiteRule,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    const LIMIT: usize = 18;
    let n = params.n;
    if n > LIMIT {
        return Err(Error::TooLarge { n, limit: LIMIT });
    }
    let size = 1usize << n;
    if start.len() != size {
        return Err(Error::DimensionMismatch { expected: size, got: start.len() });
    }
    let cfg = rule.dlm_config(params)?;
    let mut flip = vec![0.0; size * n];
    let mut stay = vec![0.0; size];
    for s in 0..size {
        let z = BinaryState::from_index(s, n);
        let mut out = 0.0;
        for i in 0..n {
            let f = rule.flip_prob(params, cfg.as_ref(), &z.z, i) / n as f64;
            flip[s * n + i] = f;
            out += f;
        }
        stay[s] = 1.0 - out;
    }
    let mut pi = start.to_vec();
    let mut next = vec![0.0; size];
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        for s in 0..size {
            let mut v = pi[s] * stay[s];
            for i in 0..n {
                let t = s ^ (1 << i);
                v += pi[t] * flip[t * n + i];
            }
            next[s] = 0.5 * (pi[s] + v);
        }
        let total: f64 = next.iter().sum();
        change = 0.0;
        for s in 0..size {
            let v = next[s] / total;
            change += (v - pi[s]).abs();
            pi[s] = v;
        }
        if change < tol {
            break;
        }
    }
    Ok((pi, change))
}
