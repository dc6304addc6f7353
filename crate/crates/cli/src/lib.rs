//! Experiment drivers that write CSV tables.
//!
//! Each driver reads its parameters from a [`Config`], fans independent work
//! items out to a rayon pool and merges the results in item order. Work item
//! k always draws from RNG stream k of the configured seed, so the output
//! does not depend on the number of threads.

pub mod config;

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use dlm_core::analysis::{exact_boltzmann, kl_divergence, ConfigHistogram};
use dlm_core::lattice::{
    critical_beta, ising_exact, peak_location, simulate_clock, simulate_ising, IsingSampler, LatticeModel,
    LatticeObservables, LatticeSampler,
};
use dlm_core::math::{logistic, std_normal_cdf};
use dlm_core::network::{
    fit_logistic, measure_activation, ActivationCurve, BinaryState, Fit, MeasureConfig,
    NetworkParams, NetworkSampler, Process, SiteRule, Truncation,
};
use dlm_core::noise::RngStream;
use dlm_core::ou::{
    calibrate_r, measure_ou_activation, ou2_theoretical_activation, Integrator, OuConfig,
    OuKind, OuNetwork,
};
use dlm_core::refractory::{
    calibrate_tau_prime, closed_form_activation, discrete_probe, ou_probe, wrap_refractory, RefractoryConfig,
};

pub use config::Config;

/// Stream index reserved for drawing random network parameters.
const PARAMS_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Activation,
    Clock,
    Ising,
    BmKl,
    Calibrate,
    Trajectory,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Activation => "activation",
            Command::Clock => "clock",
            Command::Ising => "ising",
            Command::BmKl => "bm-kl",
            Command::Calibrate => "calibrate",
            Command::Trajectory => "trajectory",
        }
    }
}

/// Runs `command` on `threads` workers (0 picks rayon's default) and returns
/// the CSV text, header line included.
pub fn run(command: Command, cfg: &Config, threads: usize) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("building thread pool")?;
    let body = pool.install(|| match command {
        Command::Activation => run_activation(cfg),
        Command::Clock => run_clock(cfg),
        Command::Ising => run_ising(cfg),
        Command::BmKl => run_bm_kl(cfg),
        Command::Calibrate => run_calibrate(cfg),
        Command::Trajectory => run_trajectory(cfg),
    })?;
    cfg.check_unused()?;
    Ok(cfg.header(command.name()) + &body)
}

/// Order-preserving parallel map over work items.
fn par_map<T, R, F>(items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        bail!("invalid grid {start}..{stop} step {step}");
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

fn fmt_eps(eps: Option<f64>) -> String {
    eps.map(|e| e.to_string()).unwrap_or_default()
}

fn truncation(cfg: &Config) -> Result<Truncation> {
    let t = cfg.string("truncation", "max")?;
    Ok(match t.as_str() {
        "max" => Truncation::Max,
        "none" => Truncation::None,
        other => Truncation::Alpha(
            other.parse().map_err(|_| anyhow!("truncation must be 'max', 'none' or a number, got '{other}'"))?,
        ),
    })
}

fn ou_config(cfg: &Config) -> Result<OuConfig> {
    let integrator = match cfg.string("integrator", "euler")?.as_str() {
        "euler" => Integrator::EulerMaruyama,
        "exact" => Integrator::Exact,
        other => bail!("integrator must be 'euler' or 'exact', got '{other}'"),
    };
    let d = OuConfig::default();
    let c = OuConfig {
        theta: cfg.f64("theta", d.theta)?,
        sigma: cfg.f64("sigma", d.sigma)?,
        dt: cfg.f64("dt", d.dt)?,
        threshold: cfg.f64("threshold", d.threshold)?,
        integrator,
    };
    c.validate()?;
    Ok(c)
}

/// `tau_ref` and `tau_prime` keys; None when τ_ref = 1 and no shift is set.
fn refractory(cfg: &Config) -> Result<Option<RefractoryConfig>> {
    let tau = cfg.f64("tau_ref", 1.0)?;
    let tp = cfg.f64("tau_prime", tau)?;
    if tau == 1.0 && tp == 1.0 {
        return Ok(None);
    }
    Ok(Some(RefractoryConfig::new(tau, tp)?))
}

/// A process resolved to either a discrete site rule or an OU kind.
#[derive(Debug, Clone, Copy)]
enum Sampler {
    Discrete(SiteRule),
    Ou(OuKind),
}

fn parse_process(name: &str) -> Result<Process> {
    name.parse::<Process>().map_err(|e| anyhow!("{e}"))
}

fn sampler(process: Process, eps: Option<f64>, fit: Option<Fit>, cfg: &Config) -> Result<Sampler> {
    let eps_or = || eps.ok_or_else(|| anyhow!("{process} needs an epsilon"));
    let fitted = || fit.ok_or_else(|| anyhow!("missing logistic fit"));
    Ok(match process {
        Process::Gibbs => Sampler::Discrete(SiteRule::Gibbs),
        Process::Lm1 => Sampler::Discrete(SiteRule::Lm1 { fit: None }),
        Process::Lm1f => Sampler::Discrete(SiteRule::Lm1 { fit: Some(fitted()?) }),
        Process::Lm2 => Sampler::Discrete(SiteRule::Lm2 {
            epsilon: eps_or()?,
            use_lambda: cfg.bool("use_lambda", true)?,
            truncation: truncation(cfg)?,
        }),
        Process::Ou1 => Sampler::Ou(OuKind::Ou1 { fit: None }),
        Process::Ou1f => Sampler::Ou(OuKind::Ou1 { fit: Some(fitted()?) }),
        Process::Ou2 => Sampler::Ou(OuKind::Ou2 { epsilon: eps_or()? }),
    })
}

fn needs_fit(p: Process) -> bool {
    matches!(p, Process::Lm1f | Process::Ou1f)
}

/// ε values for a process: the `epsilons` list, or a single None for
/// processes without ε.
fn epsilons_for(process: Process, cfg: &Config) -> Result<Vec<Option<f64>>> {
    if process.uses_epsilon() {
        Ok(cfg.f64_list("epsilons", &[0.2, 0.1, 0.05])?.into_iter().map(Some).collect())
    } else {
        Ok(vec![None])
    }
}

struct CurveSpec {
    method: String,
    measure: MeasureConfig,
    ou: OuConfig,
    refractory: Option<RefractoryConfig>,
    fit: Option<Fit>,
}

fn curve_spec(process: Process, cfg: &Config, default_method: &str) -> Result<CurveSpec> {
    let method = cfg.string("method", default_method)?;
    if method != "simulate" && method != "closed_form" {
        bail!("method must be 'simulate' or 'closed_form', got '{method}'");
    }
    let is_ou = matches!(process, Process::Ou1 | Process::Ou1f | Process::Ou2);
    let measure = MeasureConfig {
        samples: cfg.usize("samples", if is_ou { 1_000_000 } else { 100_000 })?,
        burn_in: cfg.usize("burn_in", 10_000)?,
        seed: cfg.u64("seed", 0)?,
        batches: cfg.usize("batches", 100)?,
        stream_base: 0,
    };
    let ou = if is_ou { ou_config(cfg)? } else { OuConfig::default() };
    let fit = if needs_fit(process) { Some(fit_logistic()?) } else { None };
    Ok(CurveSpec { method, measure, ou, refractory: refractory(cfg)?, fit })
}

/// P(z = 1) and its error for one bias; `stream` selects the RNG stream.
fn activation_point(s: Sampler, b: f64, spec: &CurveSpec, stream: u64) -> Result<(f64, f64)> {
    let m = MeasureConfig { stream_base: stream, ..spec.measure };
    if spec.method == "closed_form" {
        let p = match s {
            Sampler::Discrete(rule) => {
                let r = match spec.refractory {
                    Some(r) => r,
                    None => RefractoryConfig::matched(1.0)?,
                };
                closed_form_activation(&rule, b, &r)?
            }
            Sampler::Ou(kind) => {
                if spec.refractory.is_some() {
                    bail!("no closed form for OU processes with refractory clamping");
                }
                match kind {
                    OuKind::Ou1 { fit } => {
                        let f = fit.unwrap_or(Fit::IDENTITY);
                        let c = &spec.ou;
                        std_normal_cdf((2.0 * c.theta).sqrt() / (c.sigma * f.r) * (b - f.mu0 - c.threshold))
                    }
                    OuKind::Ou2 { epsilon } => ou2_theoretical_activation(-b, epsilon)?,
                }
            }
        };
        return Ok((p, 0.0));
    }
    let curve: ActivationCurve = match s {
        Sampler::Discrete(rule) => measure_activation(rule, spec.refractory.as_ref(), &[b], &m)?,
        Sampler::Ou(kind) => measure_ou_activation(kind, &spec.ou, spec.refractory.as_ref(), &[b], &m)?,
    };
    Ok((curve.p[0], curve.err[0]))
}

/// Activation curves: `epsilon,b,p,err,deviation` with deviation p - σ(b).
pub fn run_activation(cfg: &Config) -> Result<String> {
    let process = parse_process(&cfg.string("process", "gibbs")?)?;
    let bs = grid(cfg.f64("b_min", -4.0)?, cfg.f64("b_max", 4.0)?, cfg.f64("b_step", 0.5)?)?;
    let spec = curve_spec(process, cfg, "simulate")?;
    let mut items = Vec::new();
    for eps in epsilons_for(process, cfg)? {
        let s = sampler(process, eps, spec.fit, cfg)?;
        for &b in &bs {
            items.push((items.len() as u64, eps, s, b));
        }
    }
    let rows = par_map(items, |(k, eps, s, b)| Ok((eps, b, activation_point(s, b, &spec, k)?)))?;
    let mut out = String::from("epsilon,b,p,err,deviation\n");
    for (eps, b, (p, err)) in rows {
        writeln!(out, "{},{b},{p},{err},{}", fmt_eps(eps), p - logistic(b))?;
    }
    Ok(out)
}

/// Sampler variants of a lattice run: label and ε.
fn lattice_variants(cfg: &Config, default: &[&str]) -> Result<Vec<(String, Option<f64>)>> {
    let names = cfg.string_list("samplers", default)?;
    let mut eps = None;
    let mut out = Vec::new();
    for n in names {
        match n.as_str() {
            "metropolis" | "metropolis_equivalent" => out.push((n, None)),
            "dlm" | "lm2" => {
                if eps.is_none() {
                    eps = Some(cfg.f64_list("epsilons", &[0.2, 0.1, 0.05])?);
                }
                for &e in eps.as_ref().unwrap() {
                    out.push((n.clone(), Some(e)));
                }
            }
            other => bail!("unknown sampler '{other}'"),
        }
    }
    Ok(out)
}

fn lattice_sampler(name: &str, eps: Option<f64>) -> Result<LatticeSampler> {
    Ok(match (name, eps) {
        ("metropolis", _) => LatticeSampler::Metropolis,
        ("metropolis_equivalent", _) => LatticeSampler::MetropolisEquivalent,
        ("dlm", Some(epsilon)) => LatticeSampler::Dlm { epsilon },
        _ => bail!("sampler '{name}' is not a lattice sampler"),
    })
}

const LATTICE_HEADER: &str = "sampler,epsilon,beta,m,m_err,c,c_err\n";

fn lattice_row(out: &mut String, name: &str, eps: Option<f64>, o: &LatticeObservables) -> Result<()> {
    writeln!(out, "{name},{},{},{},{},{},{}", fmt_eps(eps), o.beta, o.m.mean, o.m.err, o.c.mean, o.c.err)?;
    Ok(())
}

/// `# beta_c ...` lines: specific-heat peak per variant and its relative
/// deviation from the Metropolis peak and from the infinite-lattice value.
fn peak_lines(
    out: &mut String,
    model: LatticeModel,
    betas: &[f64],
    variants: &[(String, Option<f64>)],
    results: &[LatticeObservables],
) -> Result<()> {
    if betas.len() < 3 {
        return Ok(());
    }
    let per = betas.len();
    let peaks: Vec<f64> = variants
        .iter()
        .enumerate()
        .map(|(v, _)| {
            let cs: Vec<f64> = results[v * per..(v + 1) * per].iter().map(|o| o.c.mean).collect();
            peak_location(betas, &cs)
        })
        .collect::<dlm_core::Result<_>>()?;
    let reference = variants.iter().position(|(n, _)| n == "metropolis").map(|k| peaks[k]);
    let exact = critical_beta(model);
    for ((name, eps), peak) in variants.iter().zip(&peaks) {
        write!(out, "# beta_c sampler={name} epsilon={} beta_c={peak}", fmt_eps(*eps))?;
        if let Some(r) = reference {
            write!(out, " rel_dev_metropolis={}", (peak - r).abs() / r)?;
        }
        writeln!(out, " rel_dev_exact={}", (peak - exact).abs() / exact)?;
    }
    Ok(())
}

fn beta_grid(cfg: &Config, default: (f64, f64, f64)) -> Result<Vec<f64>> {
    let betas = cfg.f64_list("betas", &[])?;
    if !betas.is_empty() {
        return Ok(betas);
    }
    grid(cfg.f64("beta_min", default.0)?, cfg.f64("beta_max", default.1)?, cfg.f64("beta_step", default.2)?)
}

/// q-state clock model: per-β magnetization and specific heat.
pub fn run_clock(cfg: &Config) -> Result<String> {
    let l = cfg.usize("l", 8)?;
    let q = cfg.usize("q", 4)?;
    if l * l > 64 * 64 {
        bail!("lattice size {l} exceeds 64");
    }
    let betas = beta_grid(cfg, (0.6, 1.1, 0.05))?;
    let variants = lattice_variants(cfg, &["metropolis", "dlm"])?;
    let sweeps = cfg.usize("sweeps", 100_000)?;
    let burn_in = cfg.usize("burn_in", 10_000)?;
    let seed = cfg.u64("seed", 0)?;
    let mut items = Vec::new();
    for (name, eps) in &variants {
        let s = lattice_sampler(name, *eps)?;
        for &beta in &betas {
            items.push((items.len() as u64, s, beta));
        }
    }
    let results = par_map(items, |(k, s, beta)| {
        let mut rng = RngStream::stream(seed, k);
        Ok(simulate_clock(l, q, beta, s, sweeps, burn_in, &mut rng)?)
    })?;
    let mut out = String::from(LATTICE_HEADER);
    for (v, (name, eps)) in variants.iter().enumerate() {
        for o in &results[v * betas.len()..(v + 1) * betas.len()] {
            lattice_row(&mut out, name, *eps, o)?;
        }
    }
    if q == 4 {
        peak_lines(&mut out, LatticeModel::ClockQ4, &betas, &variants, &results)?;
    }
    Ok(out)
}

/// Ising model: per-β ⟨|m|⟩ and specific heat, with exact enumeration rows
/// for lattices up to 4×4.
pub fn run_ising(cfg: &Config) -> Result<String> {
    let l = cfg.usize("l", 4)?;
    if l > 64 {
        bail!("lattice size {l} exceeds 64");
    }
    let betas = beta_grid(cfg, (0.2, 0.7, 0.05))?;
    let variants = lattice_variants(cfg, &["metropolis", "lm2"])?;
    let sweeps = cfg.usize("sweeps", 100_000)?;
    let burn_in = cfg.usize("burn_in", 10_000)?;
    let seed = cfg.u64("seed", 0)?;
    let refr = refractory(cfg)?;
    let (use_lambda, trunc) = if variants.iter().any(|(n, _)| n == "lm2") {
        (cfg.bool("use_lambda", true)?, truncation(cfg)?)
    } else {
        (true, Truncation::Max)
    };
    let mut items = Vec::new();
    for (name, eps) in &variants {
        let s = match (name.as_str(), eps) {
            ("lm2", Some(epsilon)) => {
                IsingSampler::Network(SiteRule::Lm2 { epsilon: *epsilon, use_lambda, truncation: trunc })
            }
            _ => IsingSampler::Lattice(lattice_sampler(name, *eps)?),
        };
        let r = if matches!(s, IsingSampler::Network(_)) { refr } else { None };
        for &beta in &betas {
            items.push((items.len() as u64, s, r, beta));
        }
    }
    let results = par_map(items, |(k, s, r, beta)| {
        Ok(simulate_ising(l, beta, s, r.as_ref(), sweeps, burn_in, RngStream::stream(seed, k))?)
    })?;
    let mut out = String::from(LATTICE_HEADER);
    if l <= 4 {
        for &beta in &betas {
            let e = ising_exact(l, beta, 1.0, 0.0)?;
            writeln!(out, "exact,,{beta},{},0,{},0", e.abs_m, e.specific_heat(beta, l * l))?;
        }
    }
    for (v, (name, eps)) in variants.iter().enumerate() {
        for o in &results[v * betas.len()..(v + 1) * betas.len()] {
            lattice_row(&mut out, name, *eps, o)?;
        }
    }
    peak_lines(&mut out, LatticeModel::Ising, &betas, &variants, &results)?;
    Ok(out)
}

/// Network parameters from the `params` file, or drawn at random with
/// `n`, `w_max` and `b_max`.
fn network_params(cfg: &Config, default_n: usize) -> Result<NetworkParams> {
    if let Some(path) = cfg.opt_string("params")? {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
        return text.parse::<NetworkParams>().map_err(|e| anyhow!("{path}: {e}"));
    }
    let n = cfg.usize("n", default_n)?;
    let w_max = cfg.f64("w_max", 1.0)?;
    let b_max = cfg.f64("b_max", 1.0)?;
    let mut rng = RngStream::stream(cfg.u64("seed", 0)?, PARAMS_STREAM);
    Ok(NetworkParams::random(n, w_max, b_max, &mut rng))
}

/// Sweep counts 1, 2, 5, 10, 20, ... up to and including `sweeps`.
pub fn checkpoints(sweeps: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut base = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let c = base.saturating_mul(m);
            if c >= sweeps {
                break 'outer;
            }
            out.push(c);
        }
        base = base.saturating_mul(10);
    }
    if sweeps > 0 {
        out.push(sweeps);
    }
    out
}

/// Switch-on probability at zero input relative to Gibbs, used to rescale
/// the sweep axis. LM² uses the configured truncation.
fn time_scale(params: &NetworkParams, rule: &SiteRule, fit: Option<Fit>) -> Result<f64> {
    let w = match rule {
        SiteRule::Gibbs => logistic(0.0),
        SiteRule::Lm1 { fit: None } => std_normal_cdf(0.0),
        SiteRule::Lm1 { fit: Some(_) } => {
            let f = fit.ok_or_else(|| anyhow!("missing logistic fit"))?;
            std_normal_cdf(-f.mu0 / f.r)
        }
        SiteRule::Lm2 { .. } => {
            let dlm = rule.dlm_config(params)?.ok_or_else(|| anyhow!("LM2 rule without a noise config"))?;
            dlm.log_transition_prob(0.0).exp()
        }
    };
    Ok(w / logistic(0.0))
}

/// KL divergence of the empirical state histogram from the exact Boltzmann
/// distribution along one chain per process and ε, started from z = 0.
pub fn run_bm_kl(cfg: &Config) -> Result<String> {
    let params = network_params(cfg, 3)?;
    if params.n() > 20 {
        bail!("bm-kl needs n <= 20 for exact enumeration, got {}", params.n());
    }
    let exact = exact_boltzmann(&params)?;
    let names = cfg.string_list("processes", &["gibbs", "lm1f", "lm2"])?;
    let sweeps = cfg.usize("sweeps", 1_000_000)?;
    let seed = cfg.u64("seed", 0)?;
    let refr = refractory(cfg)?;
    let processes: Vec<Process> = names.iter().map(|n| parse_process(n)).collect::<Result<_>>()?;
    let fit = if processes.iter().any(|p| needs_fit(*p)) { Some(fit_logistic()?) } else { None };
    let mut items = Vec::new();
    for &p in &processes {
        if matches!(p, Process::Ou1 | Process::Ou1f | Process::Ou2) {
            bail!("bm-kl supports discrete processes only, got {p}");
        }
        for eps in epsilons_for(p, cfg)? {
            let Sampler::Discrete(rule) = sampler(p, eps, fit, cfg)? else { unreachable!() };
            items.push((items.len() as u64, p, eps, rule));
        }
    }
    let marks = checkpoints(sweeps);
    let results = par_map(items, |(k, p, eps, rule)| {
        let mut s = NetworkSampler::new(params.clone(), rule, BinaryState::zeros(params.n()), RngStream::stream(seed, k))?;
        if let Some(r) = &refr {
            s = wrap_refractory(s, r)?;
        }
        let mut hist = ConfigHistogram::for_neurons(params.n());
        let mut kls = Vec::with_capacity(marks.len());
        let mut next = 0;
        for t in 1..=sweeps {
            s.sweep()?;
            hist.record(s.state().index());
            if marks.get(next) == Some(&t) {
                kls.push((t, kl_divergence(&exact, &hist)?));
                next += 1;
            }
        }
        Ok((p, eps, time_scale(&params, &rule, fit)?, kls))
    })?;
    let mut out = String::from("sweeps,process,epsilon,kl,rescaled_sweeps\n");
    for (p, eps, a, kls) in results {
        for (t, kl) in kls {
            writeln!(out, "{t},{p},{},{kl},{}", fmt_eps(eps), t as f64 * a)?;
        }
    }
    Ok(out)
}

/// `quantity = "r"`: logistic scale r(ε) fitted to an activation curve.
/// `quantity = "tau"`: calibrated τ'(τ_ref, ε).
pub fn run_calibrate(cfg: &Config) -> Result<String> {
    let quantity = cfg.string("quantity", "tau")?;
    let process = parse_process(&cfg.string("process", "ou2")?)?;
    match quantity.as_str() {
        "r" => calibrate_r_table(process, cfg),
        "tau" => calibrate_tau_table(process, cfg),
        other => bail!("quantity must be 'r' or 'tau', got '{other}'"),
    }
}

fn calibrate_r_table(process: Process, cfg: &Config) -> Result<String> {
    if !matches!(process, Process::Ou2 | Process::Lm2 | Process::Lm1f | Process::Ou1f) {
        bail!("calibration supports ou2, lm2, lm1f and ou1f, got {process}");
    }
    let bs = grid(cfg.f64("b_min", -4.0)?, cfg.f64("b_max", 4.0)?, cfg.f64("b_step", 0.5)?)?;
    let default_method = if process == Process::Lm2 { "closed_form" } else { "simulate" };
    let spec = curve_spec(process, cfg, default_method)?;
    let epss = epsilons_for(process, cfg)?;
    let mut items = Vec::new();
    for &eps in &epss {
        let s = sampler(process, eps, spec.fit, cfg)?;
        for &b in &bs {
            items.push((items.len() as u64, s, b));
        }
    }
    let points = par_map(items, |(k, s, b)| activation_point(s, b, &spec, k))?;
    let mut out = String::from("epsilon,r\n");
    for (e, eps) in epss.iter().enumerate() {
        let pts = &points[e * bs.len()..(e + 1) * bs.len()];
        let curve = ActivationCurve {
            b: bs.clone(),
            p: pts.iter().map(|x| x.0).collect(),
            err: pts.iter().map(|x| x.1).collect(),
        };
        writeln!(out, "{},{}", fmt_eps(*eps), calibrate_r(&curve)?)?;
    }
    Ok(out)
}

fn calibrate_tau_table(process: Process, cfg: &Config) -> Result<String> {
    if matches!(process, Process::Lm1 | Process::Ou1) {
        bail!("tau calibration supports gibbs, lm1f, lm2, ou1f and ou2, got {process}");
    }
    let taus = cfg.f64_list("tau_refs", &[2.0, 4.0, 8.0])?;
    let tol = cfg.f64("tol", 2e-3)?;
    let seed = cfg.u64("seed", 0)?;
    let is_ou = matches!(process, Process::Ou1f | Process::Ou2);
    let (ou, steps, burn_in) = if is_ou {
        (ou_config(cfg)?, cfg.usize("samples", 2_000_000)?, cfg.usize("burn_in", 10_000)?)
    } else {
        (OuConfig::default(), 0, 0)
    };
    let fit = if needs_fit(process) { Some(fit_logistic()?) } else { None };
    let mut items = Vec::new();
    for eps in epsilons_for(process, cfg)? {
        let s = sampler(process, eps, fit, cfg)?;
        for &tau in &taus {
            items.push((items.len() as u64, eps, s, tau));
        }
    }
    let rows = par_map(items, |(k, eps, s, tau)| {
        let tp = match s {
            Sampler::Discrete(rule) => calibrate_tau_prime(discrete_probe(rule, tau), tau, tol)?,
            Sampler::Ou(kind) => {
                calibrate_tau_prime(ou_probe(kind, ou, tau, steps, burn_in, seed.wrapping_add(k)), tau, tol)?
            }
        };
        Ok((eps, tau, tp))
    })?;
    let mut out = String::from("epsilon,tau_ref,tau_prime\n");
    for (eps, tau, tp) in rows {
        writeln!(out, "{},{tau},{tp}", fmt_eps(eps))?;
    }
    Ok(out)
}

/// Membrane-potential trajectory of an OU network: `t,neuron,u,z`.
pub fn run_trajectory(cfg: &Config) -> Result<String> {
    let process = parse_process(&cfg.string("process", "ou2")?)?;
    let params = network_params(cfg, 3)?;
    let eps = if process.uses_epsilon() { Some(cfg.f64("epsilon", 0.2)?) } else { None };
    let fit = if needs_fit(process) { Some(fit_logistic()?) } else { None };
    let Sampler::Ou(kind) = sampler(process, eps, fit, cfg)? else {
        bail!("trajectory needs an OU process, got {process}");
    };
    let ou = ou_config(cfg)?;
    let steps = cfg.usize("steps", 10_000)?;
    let decimation = cfg.usize("decimation", 1)?;
    let mut net = OuNetwork::new(params, kind, ou, RngStream::stream(cfg.u64("seed", 0)?, 0))?;
    if let Some(r) = refractory(cfg)? {
        net = wrap_refractory(net, &r)?;
    }
    let mut out = String::from("t,neuron,u,z\n");
    for (t, i, u, z) in net.trajectory(steps, decimation) {
        writeln!(out, "{t},{i},{u},{z}")?;
    }
    Ok(out)
}

/// Builds the configuration from an optional file, the seed environment
/// variable, `--set` overrides and an explicit seed, in that order.
pub fn resolve_config(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    if let Ok(s) = std::env::var(config::SEED_ENV) {
        let v: u64 = s.trim().parse().with_context(|| format!("{} = '{s}' is not a u64", config::SEED_ENV))?;
        cfg.insert("seed", toml::Value::Integer(v as i64));
    }
    for o in overrides {
        cfg.set(o)?;
    }
    if let Some(s) = seed {
        if s > i64::MAX as u64 {
            bail!("seed {s} exceeds {}", i64::MAX);
        }
        cfg.insert("seed", toml::Value::Integer(s as i64));
    }
    Ok(cfg)
}

/// One-line machine-readable error: `error kind=<kind> message="<text>"`.
pub fn error_line(err: &anyhow::Error) -> String {
    let kind = if err.chain().any(|e| e.downcast_ref::<dlm_core::Error>().is_some()) {
        "compute"
    } else if err.chain().any(|e| e.downcast_ref::<std::io::Error>().is_some()) {
        "io"
    } else {
        "config"
    };
    let msg = format!("{err:#}");
    let mut escaped = String::with_capacity(msg.len());
    for c in msg.chars() {
        match c {
            '"' => escaped.push_str("\\\""),
            '\\' => escaped.push_str("\\\\"),
            '\n' => escaped.push_str("\\n"),
            c if c.is_control() => {
                let _ = write!(escaped, "\\u{{{:x}}}", c as u32);
            }
            c => escaped.push(c),
        }
    }
    format!("error kind={kind} message=\"{escaped}\"")
}
