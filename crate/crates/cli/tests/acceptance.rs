//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! A criterion that evaluates to FAIL does not fail the target; an error or
//! panic while evaluating one does. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 4 9`.

use std::time::Instant;

use dlm_cli::{run, Command, Config};
use dlm_core::analysis::{exact_boltzmann, extrapolate_to_zero_eps, kl_between, kl_divergence, ConfigHistogram};
use dlm_core::langevin::{detailed_balance_residual, DlmConfig};
use dlm_core::lattice::{
    ising_abs_m, ising_boltzmann, ising_exact, ising_to_bm, peak_location, simulate_clock, simulate_ising,
    IsingSampler, LatticeSampler,
};
use dlm_core::math::{lambda_eps, n_ratio, sigma_m_eps, LimitOrder};
use dlm_core::network::{
    exact_stationary, fit_logistic, lm2_free_activation, measure_activation, BinaryState, MeasureConfig,
    NetworkParams, NetworkSampler, Process, SiteRule, Truncation,
};
use dlm_core::noise::RngStream;
use dlm_core::ou::{measure_ou_activation, ou_step, time_scale_factor, Integrator, OuConfig, OuKind};
use dlm_core::refractory::{
    calibrate_tau_prime, counter_chain_activation, discrete_probe, ou_probe, RefractoryConfig,
};

type Outcome = Result<bool, String>;

const SEED: u64 = 20_240_611;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Φ(x) = 1/2 + ∫_0^x φ by composite Simpson on 4000 panels.
fn phi_quadrature(x: f64) -> f64 {
    let n = 4000;
    let h = x / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(x);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    0.5 + s * h / 3.0
}

/// Least-squares slope of ln y against ln x.
fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
    sxy * sxy / (sxx * syy)
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn b_grid() -> Vec<f64> {
    (0..17).map(|k| -4.0 + 0.5 * k as f64).collect()
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn criterion_1() -> Outcome {
    let eps = [0.1, 0.05, 0.025];
    let mut errs = Vec::new();
    for &ep in &eps {
        let mut worst: f64 = 0.0;
        for k in 0..=400 {
            let x = -2.0 + 0.01 * k as f64;
            worst = worst.max((n_ratio(LimitOrder(0), ep, x).map_err(e)? - x.exp()).abs());
        }
        errs.push(worst);
    }
    let slope = log_log_slope(&eps, &errs);
    println!("  max |n_ratio - e^x| on [-2, 2]: {} at eps {eps:?}; slope {slope:.3}", sci(&errs));
    Ok((slope - 1.0).abs() <= 0.15)
}

/// ∫_0^∞ exp(-u - u²/(2a²)) du by composite Simpson on [0, 60].
fn lambda_oracle(eps: f64) -> f64 {
    let a = 1.0 / eps.sqrt();
    let n = 60_000;
    let h = 60.0 / n as f64;
    let f = |u: f64| (-u - u * u / (2.0 * a * a)).exp();
    let mut s = f(0.0) + f(60.0);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    // Φ(-a) = φ(-a)/a ∫_0^∞ exp(-u - u²/(2a²)) du, so λ = √ε φ/Φ = √ε a / I.
    eps.sqrt() * a / (s * h / 3.0)
}

/// He_m(x) from the explicit sum m! Σ_k (-1)^k x^(m-2k) / (k! (m-2k)! 2^k).
fn hermite_oracle(m: usize, x: f64) -> f64 {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    (0..=m / 2)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * fact(m) * x.powi((m - 2 * k) as i32) / (fact(k) * fact(m - 2 * k) * 2f64.powi(k as i32))
        })
        .sum()
}

fn criterion_2() -> Outcome {
    let mut worst_l: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    let mut skipped = 0;
    let mut ok = true;
    for k in 0..=40 {
        let eps = 0.01 * 100f64.powf(k as f64 / 40.0);
        let l = lambda_eps(eps).map_err(e)?;
        worst_l = worst_l.max((l - lambda_oracle(eps)).abs() / l.abs());
        let a = -1.0 / eps.sqrt();
        for m in 1..=8 {
            let den = hermite_oracle(m - 1, a);
            if den.abs() < 1e-6 {
                // Zero of He_{m-1}: the library must refuse rather than blow up.
                skipped += 1;
                ok &= sigma_m_eps(m, eps).is_err() || den != 0.0;
                continue;
            }
            let want = -eps.sqrt() * hermite_oracle(m, a) / den;
            let got = sigma_m_eps(m, eps).map_err(e)?;
            worst_s = worst_s.max((got - want).abs() / want.abs().max(1.0));
        }
        ok &= sigma_m_eps(1, eps).map_err(e)? == 1.0;
    }
    println!("  max rel. error: lambda {worst_l:.2e}, sigma_m {worst_s:.2e} ({skipped} Hermite zeros skipped)");
    Ok(ok && worst_l < 1e-10 && worst_s < 1e-10)
}

fn criterion_3() -> Outcome {
    let eps = [0.2, 0.1, 0.05, 0.025];
    let ds0 = 0.1;
    let r_eps: Vec<f64> = eps
        .iter()
        .map(|&ep| Ok(detailed_balance_residual(ds0, &DlmConfig::untruncated(ep, true).map_err(e)?).abs()))
        .collect::<Result<_, String>>()?;
    let slope_eps = log_log_slope(&eps, &r_eps);
    let dss = [0.2, 0.1, 0.05];
    let cfg = DlmConfig::untruncated(0.05, true).map_err(e)?;
    let r_ds: Vec<f64> = dss.iter().map(|&d| detailed_balance_residual(d, &cfg).abs()).collect();
    let slope_ds = log_log_slope(&dss, &r_ds);
    println!("  residual at dS = {ds0}: {} over eps {eps:?}; slope {slope_eps:.3}", sci(&r_eps));
    println!("  residual at eps = 0.05: {} over dS {dss:?}; slope {slope_ds:.3}", sci(&r_ds));
    let plain: Vec<f64> = eps
        .iter()
        .map(|&ep| Ok(detailed_balance_residual(ds0, &DlmConfig::untruncated(ep, false).map_err(e)?).abs()))
        .collect::<Result<_, String>>()?;
    let cfg0 = DlmConfig::untruncated(0.05, false).map_err(e)?;
    let plain_ds: Vec<f64> = dss.iter().map(|&d| detailed_balance_residual(d, &cfg0).abs()).collect();
    println!(
        "  without lambda (informational): eps slope {:.3}, dS slope {:.3}",
        log_log_slope(&eps, &plain),
        log_log_slope(&dss, &plain_ds)
    );
    Ok((slope_eps - 1.0).abs() <= 0.15 && (slope_ds - 3.0).abs() <= 0.3)
}

fn criterion_4() -> Outcome {
    let grid = b_grid();
    let n = 100_000;
    let mut ok = true;
    for (k, (rule, name)) in [(SiteRule::Gibbs, "Gibbs"), (SiteRule::Lm1 { fit: None }, "LM1")].into_iter().enumerate() {
        let m = MeasureConfig { stream_base: 100 * k as u64, ..MeasureConfig::new(n, SEED) };
        let curve = measure_activation(rule, None, &grid, &m).map_err(e)?;
        let mut worst: f64 = 0.0;
        for (j, &b) in grid.iter().enumerate() {
            let want = if k == 0 { logistic(b) } else { phi_quadrature(b) };
            let sd = (want * (1.0 - want) / n as f64).sqrt();
            worst = worst.max((curve.p[j] - want).abs() / sd);
        }
        println!("  {name}: max |p - target| = {worst:.2} binomial sigma over {} biases", grid.len());
        ok &= worst <= 3.0;
    }
    let epss = [0.2, 0.1, 0.05, 0.01];
    let mut devs = Vec::new();
    let mut worst_sim: f64 = 0.0;
    for (k, &eps) in epss.iter().enumerate() {
        let closed: Vec<f64> =
            grid.iter().map(|&b| lm2_free_activation(b, eps, true, 1.0, 1.0)).collect::<Result<_, _>>().map_err(e)?;
        devs.push(grid.iter().zip(&closed).map(|(&b, p)| (p - logistic(b)).abs()).fold(0.0, f64::max));
        let m = MeasureConfig { stream_base: 1000 + 100 * k as u64, ..MeasureConfig::new(n, SEED) };
        let curve = measure_activation(SiteRule::lm2(eps), None, &grid, &m).map_err(e)?;
        for j in 0..grid.len() {
            let diff = (curve.p[j] - closed[j]).abs();
            let z = if curve.err[j] > 0.0 { diff / curve.err[j] } else if diff < 1e-12 { 0.0 } else { f64::INFINITY };
            worst_sim = worst_sim.max(z);
        }
    }
    println!("  LM2 closed-form max |p - sigma(b)|: {} over eps {epss:?}", sci(&devs));
    println!("  LM2 simulation vs closed form: max {worst_sim:.2} sigma");
    Ok(ok && decreasing(&devs) && worst_sim <= 3.0)
}

fn simulate_kl(params: &NetworkParams, rule: SiteRule, sweeps: usize, stream: u64) -> Result<f64, String> {
    let exact = exact_boltzmann(params).map_err(e)?;
    let mut s = NetworkSampler::new(params.clone(), rule, BinaryState::zeros(params.n()), RngStream::stream(SEED, stream))
        .map_err(e)?;
    let mut hist = ConfigHistogram::for_neurons(params.n());
    for _ in 0..sweeps {
        s.sweep().map_err(e)?;
        hist.record(s.state().index());
    }
    kl_divergence(&exact, &hist).map_err(e)
}

fn criterion_5() -> Outcome {
    let params = NetworkParams::random(3, 1.0, 1.0, &mut RngStream::stream(SEED, u64::MAX));
    let sweeps = 1_000_000;
    let kl_gibbs = simulate_kl(&params, SiteRule::Gibbs, sweeps, 1)?;
    let kl_lm2 = simulate_kl(&params, SiteRule::lm2(0.01), sweeps, 2)?;
    println!("  simulated KL at 1e6 sweeps: Gibbs {kl_gibbs:.3e}, LM2(0.01) {kl_lm2:.3e}");
    let boltz = exact_boltzmann(&params).map_err(e)?;
    let epss = [0.2, 0.1, 0.05, 0.01];
    let mut exact_kls = Vec::new();
    for &eps in &epss {
        let (pi, _) = exact_stationary(&params, &SiteRule::lm2(eps), &boltz, 1e-15, 1_000_000).map_err(e)?;
        exact_kls.push(kl_between(&boltz, &pi).map_err(e)?);
    }
    println!("  exact-chain KL(LM2): {} over eps {epss:?}", sci(&exact_kls));
    let fit = fit_logistic().map_err(e)?;
    let lm1f = SiteRule::Lm1 { fit: Some(fit) };
    let plateau_lm1f = simulate_kl(&params, lm1f, sweeps, 3)?;
    let plateau_lm2 = simulate_kl(&params, SiteRule::lm2(0.05), sweeps, 4)?;
    let (pi_f, _) = exact_stationary(&params, &lm1f, &boltz, 1e-15, 1_000_000).map_err(e)?;
    println!(
        "  plateaus at 1e6 sweeps: LM1F {plateau_lm1f:.3e} (exact chain {:.3e}), LM2(0.05) {plateau_lm2:.3e}",
        kl_between(&boltz, &pi_f).map_err(e)?
    );
    Ok(kl_gibbs < 1e-3 && kl_lm2 < 2e-3 && decreasing(&exact_kls) && plateau_lm1f > plateau_lm2)
}

fn criterion_6() -> Outcome {
    let betas = [0.2, 0.44, 0.7];
    let sweeps = 1_000_000;
    let mut ok = true;
    for (k, &beta) in betas.iter().enumerate() {
        let exact = ising_exact(4, beta, 1.0, 0.0).map_err(e)?.abs_m;
        let met = simulate_ising(
            4,
            beta,
            IsingSampler::Lattice(LatticeSampler::Metropolis),
            None,
            sweeps,
            10_000,
            RngStream::stream(SEED, 10 + 2 * k as u64),
        )
        .map_err(e)?;
        let lm2 = simulate_ising(4, beta, IsingSampler::lm2(0.01), None, sweeps, 10_000, RngStream::stream(SEED, 11 + 2 * k as u64))
            .map_err(e)?;
        let zm = (met.m.mean - exact).abs() / met.m.err;
        let zl = (lm2.m.mean - exact).abs() / lm2.m.err;
        let zc = (met.m.mean - lm2.m.mean).abs() / met.m.err.hypot(lm2.m.err);
        println!(
            "  beta {beta}: exact {exact:.5}, Metropolis {:.5} ± {:.5} ({zm:.2} sigma), LM2(0.01) {:.5} ± {:.5} ({zl:.2} sigma), cross {zc:.2} sigma",
            met.m.mean, met.m.err, lm2.m.mean, lm2.m.err
        );
        ok &= zm <= 2.0 && zl <= 2.0;
    }
    let beta = 0.44;
    let start = ising_boltzmann(4, beta).map_err(e)?;
    let target = ising_abs_m(4, &start);
    let params = ising_to_bm(4, beta, 0.0, 2).map_err(e)?;
    let mut gaps = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let (pi, _) = exact_stationary(&params, &SiteRule::lm2(eps), &start, 1e-12, 100_000).map_err(e)?;
        gaps.push((ising_abs_m(4, &pi) - target).abs());
    }
    println!("  exact-chain |<|m|>_LM2 - <|m|>| at beta 0.44: {} over eps [0.2, 0.1, 0.05]", sci(&gaps));
    Ok(ok && decreasing(&gaps))
}

fn criterion_7() -> Outcome {
    let betas: Vec<f64> = (0..11).map(|k| 0.6 + 0.05 * k as f64).collect();
    let sweeps = 1_000_000;
    let samplers = [
        LatticeSampler::Metropolis,
        LatticeSampler::Dlm { epsilon: 0.2 },
        LatticeSampler::Dlm { epsilon: 0.1 },
        LatticeSampler::Dlm { epsilon: 0.05 },
    ];
    let mut peaks = Vec::new();
    for (v, &s) in samplers.iter().enumerate() {
        let mut cs = Vec::new();
        for (k, &beta) in betas.iter().enumerate() {
            let mut rng = RngStream::stream(SEED, 100 + (v * betas.len() + k) as u64);
            cs.push(simulate_clock(8, 4, beta, s, sweeps, sweeps / 10, &mut rng).map_err(e)?.c.mean);
        }
        peaks.push(peak_location(&betas, &cs).map_err(e)?);
    }
    let bc = 0.8814;
    let rel_exact = (peaks[0] - bc).abs() / bc;
    let rel: Vec<f64> = peaks[1..].iter().map(|p| (p - peaks[0]).abs() / peaks[0]).collect();
    println!("  specific-heat peaks: Metropolis {:.4} ({:.2}% from {bc}), LM2 {:.4?} over eps [0.2, 0.1, 0.05]", peaks[0], 100.0 * rel_exact, &peaks[1..]);
    println!("  LM2 relative deviation from Metropolis: {}", sci(&rel));
    Ok(rel_exact <= 0.10 && decreasing(&rel))
}

fn criterion_8() -> Outcome {
    let grid = b_grid();
    let mut ok = true;
    for tau in [2u32, 8] {
        let t = tau as f64;
        let mut tv: f64 = 0.0;
        for &b in &grid {
            let q = logistic(b - t.ln());
            tv = tv.max((counter_chain_activation(q, 1.0 - q, tau).map_err(e)? - logistic(b)).abs());
        }
        let r = RefractoryConfig::matched(t).map_err(e)?;
        let m = MeasureConfig { stream_base: 200 * tau as u64, ..MeasureConfig::new(100_000, SEED) };
        let curve = measure_activation(SiteRule::Gibbs, Some(&r), &grid, &m).map_err(e)?;
        let worst = grid
            .iter()
            .enumerate()
            .map(|(j, &b)| (curve.p[j] - logistic(b)).abs() / curve.err[j])
            .fold(0.0, f64::max);
        println!("  Gibbs tau_ref {tau}: counter-chain TV {tv:.2e}, simulation max {worst:.2} sigma");
        ok &= tv < 1e-10 && worst <= 3.0;
    }
    let taus = [2.0, 4.0, 8.0];
    for (rule, name) in [(SiteRule::Gibbs, "Gibbs"), (SiteRule::lm2(0.2), "LM2(0.2)")] {
        let tps: Vec<f64> = taus
            .iter()
            .map(|&t| calibrate_tau_prime(discrete_probe(rule, t), t, 1e-9))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        let worst = taus.iter().zip(&tps).map(|(t, tp)| (tp / t - 1.0).abs()).fold(0.0, f64::max);
        println!("  {name}: tau' = {tps:.4?} for tau_ref {taus:?} (max rel. dev {worst:.2e})");
        ok &= worst <= 0.02;
    }
    let cfg = OuConfig::default();
    let tps: Vec<f64> = taus
        .iter()
        .enumerate()
        .map(|(k, &t)| calibrate_tau_prime(ou_probe(OuKind::Ou2 { epsilon: 0.2 }, cfg, t, 10_000_000, 10_000, SEED + k as u64), t, 1e-3))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let lx: Vec<f64> = taus.iter().map(|t: &f64| t.ln()).collect();
    let ly: Vec<f64> = tps.iter().map(|t| t.ln()).collect();
    let r2 = r_squared(&lx, &ly);
    let above = taus.iter().zip(&tps).all(|(t, tp)| tp > t);
    let monotone = tps.windows(2).all(|w| w[1] > w[0]);
    println!(
        "  OU2(0.2): tau' = {tps:.3?} for tau_ref {taus:?}; log-log slope {:.3}, R^2 {r2:.4}",
        log_log_slope(&taus, &tps)
    );
    Ok(ok && above && monotone && r2 > 0.95)
}

fn criterion_9() -> Outcome {
    let exact_cfg = OuConfig { integrator: Integrator::Exact, ..OuConfig::default() };
    let mut ok = true;
    for cfg in [exact_cfg, OuConfig::default()] {
        let mut rng = RngStream::stream(SEED, 900);
        let mut u = 0.0;
        let (mut s1, mut s2) = (0.0, 0.0);
        let n = 10_000_000;
        for _ in 0..n {
            u = ou_step(u, 0.0, &cfg, &mut rng);
            s1 += u;
            s2 += u * u;
        }
        let var = s2 / n as f64 - (s1 / n as f64).powi(2);
        let rel = var / cfg.stationary_variance() - 1.0;
        let discrete = cfg.sigma * cfg.sigma / (cfg.theta * (2.0 - cfg.theta * cfg.dt));
        match cfg.integrator {
            Integrator::Exact => {
                println!("  exact integrator: variance {var:.5} vs {:.5} ({:+.3}%)", cfg.stationary_variance(), 100.0 * rel);
                ok &= rel.abs() <= 0.01;
            }
            Integrator::EulerMaruyama => println!(
                "  Euler-Maruyama (informational): variance {var:.5}, {:+.3}% from sigma^2/(2 theta), {:+.3}% from its discrete value {discrete:.5}",
                100.0 * rel,
                100.0 * (var / discrete - 1.0)
            ),
        }
    }

    let grid = b_grid();
    let m_ou = MeasureConfig { samples: 4_000_000, burn_in: 1000, seed: SEED, batches: 100, stream_base: 1000 };
    let ou = measure_ou_activation(OuKind::Ou1 { fit: None }, &exact_cfg, None, &grid, &m_ou).map_err(e)?;
    let m_lm = MeasureConfig { stream_base: 2000, ..MeasureConfig::new(100_000, SEED) };
    let lm = measure_activation(SiteRule::Lm1 { fit: None }, None, &grid, &m_lm).map_err(e)?;
    let worst = (0..grid.len())
        .map(|j| (ou.p[j] - lm.p[j]).abs() / ou.err[j].hypot(lm.err[j]))
        .fold(0.0, f64::max);
    println!("  OU1 vs LM1 activation: max {worst:.2} sigma over {} biases", grid.len());
    ok &= worst <= 3.0;

    // Ensemble relaxation of one free neuron (b = 1) in a 100-neuron network
    // from z = 0, random-site updates; LM2 untruncated at eps = 0.2.
    let n = 100;
    let chains = 10_000;
    let eps = 0.2;
    let a = time_scale_factor(Process::Lm2, Process::Gibbs, -1.0, eps, 1.0).map_err(e)?;
    let ts = [n / 4, n / 2, n, 2 * n, 3 * n];
    let lm_ts: Vec<usize> = ts.iter().map(|&t| (t as f64 / a).round() as usize).collect();
    let params = NetworkParams::free(&vec![1.0; n]);
    let lm2 = SiteRule::Lm2 { epsilon: eps, use_lambda: true, truncation: Truncation::None };
    let mut on_gibbs = vec![0usize; ts.len()];
    let mut on_lm2 = vec![0usize; ts.len()];
    for c in 0..chains {
        for (rule, marks, counts, stream) in
            [(SiteRule::Gibbs, &ts[..], &mut on_gibbs, 2 * c), (lm2, &lm_ts[..], &mut on_lm2, 2 * c + 1)]
        {
            let mut s = NetworkSampler::new(params.clone(), rule, BinaryState::zeros(n), RngStream::stream(SEED, 10_000 + stream as u64))
                .map_err(e)?;
            let mut t = 0;
            for (k, &mark) in marks.iter().enumerate() {
                while t < mark {
                    s.step().map_err(e)?;
                    t += 1;
                }
                counts[k] += s.state().get(0) as usize;
            }
        }
    }
    let mut worst_ts: f64 = 0.0;
    for k in 0..ts.len() {
        let (pg, pl) = (on_gibbs[k] as f64 / chains as f64, on_lm2[k] as f64 / chains as f64);
        let sd = (pg * (1.0 - pg) / chains as f64 + pl * (1.0 - pl) / chains as f64).sqrt();
        let z = (pg - pl).abs() / sd;
        worst_ts = worst_ts.max(z);
        println!("  t = {:>3} Gibbs steps / {:>5} LM2 steps: P(z=1) {pg:.4} vs {pl:.4} ({z:.2} sigma)", ts[k], lm_ts[k]);
    }
    println!("  time-scale factor a = {a:.5}");
    Ok(ok && worst_ts <= 3.0)
}

fn criterion_10() -> Outcome {
    let pts: Vec<(f64, f64, f64)> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| Ok((eps, lm2_free_activation(1.0, eps, true, 1.0, 1.0).map_err(e)?, 0.0)))
        .collect::<Result<_, String>>()?;
    let est = extrapolate_to_zero_eps(&pts, 1).map_err(e)?;
    let target = logistic(1.0);
    let z = (est.mean - target) / est.err;
    println!(
        "  closed-form points {:?}; intercept {:.7} ± {:.2e}, target {target:.7} ({z:+.2} sigma)",
        pts.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(),
        est.mean,
        est.err
    );
    Ok(z.abs() <= 2.0)
}

fn criterion_11() -> Outcome {
    let cases: [(Command, &[&str]); 7] = [
        (Command::Activation, &["process=lm2", "samples=4000", "burn_in=100", "b_step=2", "epsilons=[0.2, 0.05]"]),
        (Command::Activation, &["process=ou2", "samples=4000", "burn_in=100", "b_step=4", "epsilons=[0.2]"]),
        (Command::Clock, &["sweeps=300", "burn_in=30", "beta_step=0.25", "epsilons=[0.2]"]),
        (Command::Ising, &["sweeps=300", "burn_in=30", "betas=[0.3, 0.44, 0.6]", "epsilons=[0.1]"]),
        (Command::BmKl, &["sweeps=2000", "epsilons=[0.2, 0.05]"]),
        (Command::Calibrate, &["process=ou2", "samples=20000", "burn_in=100", "epsilons=[0.2]", "tau_refs=[2.0, 4.0]"]),
        (Command::Trajectory, &["steps=50", "n=4"]),
    ];
    let mut ok = true;
    for (cmd, sets) in cases {
        let build = || {
            let mut c = Config::new();
            c.set("seed=7").unwrap();
            for s in sets {
                c.set(s).unwrap();
            }
            c
        };
        let a = run(cmd, &build(), 1).map_err(e)?;
        let b = run(cmd, &build(), 1).map_err(e)?;
        let c = run(cmd, &build(), 3).map_err(e)?;
        let same = a == b && a == c;
        println!("  {}: {} bytes, rerun identical {}, 1 vs 3 threads identical {}", cmd.name(), a.len(), a == b, a == c);
        ok &= same;
    }
    Ok(ok)
}

type Criterion = (u32, &'static str, f64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "math-kernel convergence order", 1.0, criterion_1),
        (2, "lambda and sigma_m against oracles", 1.0, criterion_2),
        (3, "detailed-balance residual order", 1.0, criterion_3),
        (4, "free-neuron activations", 120.0, criterion_4),
        (5, "3-neuron Boltzmann machine KL", 300.0, criterion_5),
        (6, "Ising 4x4 magnetization", 600.0, criterion_6),
        (7, "clock model specific-heat peak", 900.0, criterion_7),
        (8, "refractory control", 900.0, criterion_8),
        (9, "OU fidelity and time scale", 600.0, criterion_9),
        (10, "zero-eps extrapolation", 1.0, criterion_10),
        (11, "driver determinism", 600.0, criterion_11),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut errors = 0;
    let mut summary = Vec::new();
    for (id, name, budget, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        println!("criterion {id}: {name}");
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(f);
        let secs = t0.elapsed().as_secs_f64();
        let over = if secs > budget { format!(", over the {budget} s budget") } else { String::new() };
        let line = match outcome {
            Ok(Ok(true)) => format!("PASS criterion {id}: {name} ({secs:.1} s{over})"),
            Ok(Ok(false)) => format!("FAIL criterion {id}: {name} ({secs:.1} s{over})"),
            Ok(Err(msg)) => {
                errors += 1;
                format!("FAIL criterion {id}: {name} (error: {msg})")
            }
            Err(_) => {
                errors += 1;
                format!("FAIL criterion {id}: {name} (panicked)")
            }
        };
        println!("{line}");
        summary.push(line);
    }
    println!("\nacceptance summary");
    for line in &summary {
        println!("{line}");
    }
    if errors > 0 {
        eprintln!("{errors} criterion evaluation(s) raised errors");
        std::process::exit(1);
    }
}
