//! Continuous membrane-potential dynamics with a spiking projection
//! z = Θ[u - ϑ].

use crate::error::{Error, Result};
use crate::math::{log_std_normal_pdf, logistic, ratio_from_logs, std_normal_cdf};
use crate::network::{
    activation_table, transform_params, ActivationCurve, Fit, MeasureConfig, NetworkParams, Process,
};
use crate::noise::RngStream;
use crate::analysis::batch_means;
use crate::refractory::RefractoryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    EulerMaruyama,
    /// Exact Gaussian transition of the linear SDE.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuConfig {
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
    pub threshold: f64,
    pub integrator: Integrator,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            sigma: std::f64::consts::SQRT_2,
            dt: 0.02,
            threshold: 0.0,
            integrator: Integrator::EulerMaruyama,
        }
    }
}

impl OuConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.sigma > 0.0 && self.dt > 0.0) || !self.threshold.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "OU config theta={}, sigma={}, dt={}, threshold={}",
                self.theta, self.sigma, self.dt, self.threshold
            )));
        }
        Ok(())
    }

    /// σ²/(2θ).
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (2.0 * self.theta)
    }
}

/// Precomputed one-step map u' = μ + (u - μ) d + s η for a relaxation rate.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Stepper {
    decay: f64,
    noise: f64,
}

impl Stepper {
    fn new(rate: f64, sigma: f64, dt: f64, integrator: Integrator) -> Self {
        match integrator {
            Integrator::EulerMaruyama => Self { decay: 1.0 - rate * dt, noise: sigma * dt.sqrt() },
            Integrator::Exact => {
                let d = (-rate * dt).exp();
                Self { decay: d, noise: sigma * ((1.0 - d * d) / (2.0 * rate)).sqrt() }
            }
        }
    }

    #[inline]
    fn step(&self, u: f64, mu: f64, rng: &mut RngStream) -> f64 {
        mu + (u - mu) * self.decay + self.noise * rng.std_normal()
    }
}

/// Advances du = θ(μ - u)dt + σ dW by one step of `cfg.dt`.
pub fn ou_step(u: f64, mu: f64, cfg: &OuConfig, rng: &mut RngStream) -> f64 {
    Stepper::new(cfg.theta, cfg.sigma, cfg.dt, cfg.integrator).step(u, mu, rng)
}

/// Φ(√(2θ)/σ (μ - ϑ)).
pub fn ou_free_activation(mu: f64, cfg: &OuConfig) -> f64 {
    std_normal_cdf((2.0 * cfg.theta).sqrt() / cfg.sigma * (mu - cfg.threshold))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    pub u: Vec<f64>,
    pub z: Vec<u8>,
}

impl MembraneState {
    pub fn new(u: Vec<f64>, threshold: f64) -> Self {
        let z = u.iter().map(|&x| (x >= threshold) as u8).collect();
        Self { u, z }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Which OU abstraction drives the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuKind {
    /// Drift (θ/r²)[Σ W z + b - μ⁰ - u].
    Ou1 { fit: Option<Fit> },
    /// Drift θ[W'_ii z_i + Σ W'_ij z_j + b'_i - u] with λ omitted.
    Ou2 { epsilon: f64 },
}

impl OuKind {
    pub fn process(&self) -> Process {
        match self {
            OuKind::Ou1 { fit: None } => Process::Ou1,
            OuKind::Ou1 { fit: Some(_) } => Process::Ou1f,
            OuKind::Ou2 { .. } => Process::Ou2,
        }
    }
}

/// Linear drift target μ_i = self_w z_i + Σ_j w_ij z_j + bias_i.
#[derive(Debug, Clone, PartialEq)]
struct Drift {
    n: usize,
    self_w: f64,
    w: Vec<f64>,
    bias: Vec<f64>,
}

impl Drift {
    #[inline]
    fn target(&self, z: &[u8], i: usize) -> f64 {
        let row = &self.w[i * self.n..(i + 1) * self.n];
        let mut s = self.bias[i];
        if z[i] != 0 {
            s += self.self_w;
        }
        for (w, &zj) in row.iter().zip(z) {
            if zj != 0 {
                s += w;
            }
        }
        s
    }
}

fn build_drift(params: &NetworkParams, kind: &OuKind) -> Result<(Drift, f64)> {
    let n = params.n();
    Ok(match *kind {
        OuKind::Ou1 { fit } => {
            let f = fit.unwrap_or(Fit::IDENTITY);
            if !(f.r > 0.0) {
                return Err(Error::InvalidParameter(format!("fit r = {}", f.r)));
            }
            let drift = Drift {
                n,
                self_w: 0.0,
                w: params.weights().to_vec(),
                bias: params.biases().iter().map(|b| b - f.mu0).collect(),
            };
            (drift, 1.0 / (f.r * f.r))
        }
        OuKind::Ou2 { epsilon } => {
            let tp = transform_params(params, epsilon, false)?;
            (Drift { n, self_w: tp.wp_diag, w: tp.wp, bias: tp.bp }, 1.0)
        }
    })
}

fn synchronous_step(
    drift: &Drift,
    stepper: &Stepper,
    threshold: f64,
    state: &mut MembraneState,
    latched: &mut Vec<u8>,
    rng: &mut RngStream,
) {
    latched.clone_from(&state.z);
    for i in 0..state.u.len() {
        let mu = drift.target(latched, i);
        state.u[i] = stepper.step(state.u[i], mu, rng);
        state.z[i] = (state.u[i] >= threshold) as u8;
    }
}

/// One synchronous step of OU¹ (identity fit when `fit` is None).
pub fn ou1_network_step(
    p: &NetworkParams,
    state: &mut MembraneState,
    fit: Option<Fit>,
    cfg: &OuConfig,
    rng: &mut RngStream,
) -> Result<()> {
    if state.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: state.len() });
    }
    cfg.validate()?;
    let (drift, scale) = build_drift(p, &OuKind::Ou1 { fit })?;
    let stepper = Stepper::new(cfg.theta * scale, cfg.sigma, cfg.dt, cfg.integrator);
    synchronous_step(&drift, &stepper, cfg.threshold, state, &mut Vec::new(), rng);
    Ok(())
}

/// One synchronous step of OU² on already transformed parameters, which
/// must have been built without the λ factor.
pub fn ou2_network_step(
    tp: &crate::network::TransformedParams,
    state: &mut MembraneState,
    cfg: &OuConfig,
    rng: &mut RngStream,
) -> Result<()> {
    if tp.lambda_used {
        return Err(Error::InvalidParameter("OU2 uses parameters transformed without lambda".into()));
    }
    if state.len() != tp.n() {
        return Err(Error::DimensionMismatch { expected: tp.n(), got: state.len() });
    }
    cfg.validate()?;
    let drift = Drift { n: tp.n(), self_w: tp.wp_diag, w: tp.wp.clone(), bias: tp.bp.clone() };
    let stepper = Stepper::new(cfg.theta, cfg.sigma, cfg.dt, cfg.integrator);
    synchronous_step(&drift, &stepper, cfg.threshold, state, &mut Vec::new(), rng);
    Ok(())
}

/// An OU network with optional refractory clamping.
#[derive(Debug, Clone)]
pub struct OuNetwork {
    base: NetworkParams,
    kind: OuKind,
    cfg: OuConfig,
    drift: Drift,
    stepper: Stepper,
    state: MembraneState,
    latched: Vec<u8>,
    clamp_steps: Option<u64>,
    counters: Vec<u64>,
    rng: RngStream,
    steps: u64,
}

impl OuNetwork {
    /// Starts every neuron at the inactive-state drift target.
    pub fn new(params: NetworkParams, kind: OuKind, cfg: OuConfig, rng: RngStream) -> Result<Self> {
        cfg.validate()?;
        let (drift, scale) = build_drift(&params, &kind)?;
        let zeros = vec![0u8; params.n()];
        let u0: Vec<f64> = (0..params.n()).map(|i| drift.target(&zeros, i)).collect();
        let state = MembraneState::new(u0, cfg.threshold);
        Ok(Self {
            stepper: Stepper::new(cfg.theta * scale, cfg.sigma, cfg.dt, cfg.integrator),
            latched: Vec::with_capacity(params.n()),
            counters: vec![0; params.n()],
            base: params,
            kind,
            cfg,
            drift,
            state,
            clamp_steps: None,
            rng,
            steps: 0,
        })
    }

    /// Clamps each spike active for τ_ref (real time) and shifts biases by -ln τ'.
    pub(crate) fn set_refractory(&mut self, r: &RefractoryConfig) -> Result<()> {
        let steps = r.clamp_steps(self.cfg.dt)?;
        let shifted = self.base.with_bias_shift(-r.tau_prime.ln());
        let (drift, _) = build_drift(&shifted, &self.kind)?;
        self.drift = drift;
        self.clamp_steps = Some(steps);
        Ok(())
    }

    pub fn state(&self) -> &MembraneState {
        &self.state
    }

    pub fn config(&self) -> &OuConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }

    pub fn step(&mut self) {
        let Self { drift, stepper, state, latched, clamp_steps, counters, rng, cfg, .. } = self;
        latched.clone_from(&state.z);
        for i in 0..state.u.len() {
            let mu = drift.target(latched, i);
            state.u[i] = stepper.step(state.u[i], mu, rng);
            if let Some(steps) = *clamp_steps {
                if counters[i] > 0 {
                    counters[i] -= 1;
                    if counters[i] > 0 {
                        state.z[i] = 1;
                        continue;
                    }
                }
                let z = (state.u[i] >= cfg.threshold) as u8;
                state.z[i] = z;
                if z == 1 {
                    counters[i] = steps;
                }
            } else {
                state.z[i] = (state.u[i] >= cfg.threshold) as u8;
            }
        }
        self.steps += 1;
    }

    /// Runs `steps` steps and returns rows (t, neuron, u, z) every
    /// `decimation` steps, starting with the initial state.
    pub fn trajectory(&mut self, steps: usize, decimation: usize) -> Vec<(f64, usize, f64, u8)> {
        let dec = decimation.max(1);
        let mut rows = Vec::new();
        for k in 0..=steps {
            if k > 0 {
                self.step();
            }
            if k % dec == 0 {
                let t = self.time();
                for i in 0..self.state.len() {
                    rows.push((t, i, self.state.u[i], self.state.z[i]));
                }
            }
        }
        rows
    }
}

/// Free-neuron activation of an OU process over a bias grid; `m.samples`
/// counts integrator steps.
pub fn measure_ou_activation(
    kind: OuKind,
    cfg: &OuConfig,
    refractory: Option<&RefractoryConfig>,
    b_grid: &[f64],
    m: &MeasureConfig,
) -> Result<ActivationCurve> {
    if m.samples == 0 {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let mut curve = ActivationCurve { b: vec![], p: vec![], err: vec![] };
    for (k, &b) in b_grid.iter().enumerate() {
        let rng = RngStream::stream(m.seed, m.stream_base + k as u64);
        let mut net = OuNetwork::new(NetworkParams::free(&[b]), kind, *cfg, rng)?;
        if let Some(r) = refractory {
            net.set_refractory(r)?;
        }
        for _ in 0..m.burn_in {
            net.step();
        }
        let mut xs = Vec::with_capacity(m.samples);
        for _ in 0..m.samples {
            net.step();
            xs.push(net.state.z[0] as f64);
        }
        let est = batch_means(&xs, m.batches.min(m.samples))?;
        curve.b.push(b);
        curve.p.push(est.mean);
        curve.err.push(est.err);
    }
    Ok(curve)
}

/// Densities at the threshold of the opposite-regime Gaussians:
/// w01 = φ(a - (√ε/2) m), w10 = φ(a + (√ε/2) m) with a = -1/√ε.
pub fn ou2_theoretical_transitions(m: f64, epsilon: f64) -> Result<(f64, f64)> {
    let w01 = activation_table(Process::Ou2, m, epsilon, 1.0)?;
    let w10 = activation_table(Process::Ou2, -m, epsilon, 1.0)?;
    Ok((w01, w10))
}

/// w01/(w01 + w10) of [`ou2_theoretical_transitions`], evaluated in log space.
pub fn ou2_theoretical_activation(m: f64, epsilon: f64) -> Result<f64> {
    crate::error::check_epsilon(epsilon)?;
    let a = -1.0 / epsilon.sqrt();
    let h = 0.5 * epsilon.sqrt() * m;
    Ok(ratio_from_logs(log_std_normal_pdf(a - h), log_std_normal_pdf(a + h)))
}

/// Bias rescaling r minimising Σ_b [P(b) - σ(b/r)]², so that running at
/// bias r·b gives approximately σ(b). Golden-section search on ln r.
pub fn calibrate_r(curve: &ActivationCurve) -> Result<f64> {
    if curve.b.len() != curve.p.len() || curve.b.len() < 2 {
        return Err(Error::DegenerateCurve("need at least two matching points".into()));
    }
    let hi = curve.p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = curve.p.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi - lo < 1e-12 {
        return Err(Error::DegenerateCurve("constant activation".into()));
    }
    let cost = |s: f64| -> f64 {
        let r = s.exp();
        curve.b.iter().zip(&curve.p).map(|(b, p)| (p - logistic(b / r)).powi(2)).sum()
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.05f64.ln(), 20f64.ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// a = W_A(0→1)/W_B(0→1) from the transition-probability table.
pub fn time_scale_factor(a: Process, b: Process, m: f64, epsilon: f64, tau_ref: f64) -> Result<f64> {
    let wa = activation_table(a, m, epsilon, tau_ref)?;
    let wb = activation_table(b, m, epsilon, tau_ref)?;
    if wb == 0.0 {
        return Err(Error::ZeroDenominator(format!("{b} transition probability")));
    }
    Ok(wa / wb)
}
