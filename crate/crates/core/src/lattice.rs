//! Clock and Ising models on periodic square lattices.
//!
//! Samplers see the action S = βH. One sweep is L² single-site updates at
//! uniformly chosen sites.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::analysis::{jackknife, Estimate};
use crate::error::{Error, Result};
use crate::langevin::DlmConfig;
use crate::network::{BinaryState, NetworkParams, NetworkSampler, SiteRule, Truncation};
use crate::noise::RngStream;
use crate::refractory::{wrap_refractory, RefractoryConfig};

fn neighbours(l: usize, site: usize) -> [usize; 4] {
    let (r, c) = (site / l, site % l);
    [
        r * l + (c + 1) % l,
        r * l + (c + l - 1) % l,
        ((r + 1) % l) * l + c,
        ((r + l - 1) % l) * l + c,
    ]
}

/// How a lattice is updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeSampler {
    /// Accept with min(1, e^{-ΔS}).
    Metropolis,
    /// Discrete Langevin rule with λ and maximal truncation.
    Dlm { epsilon: f64 },
    /// Accept when exp(-(ΔS + Δ_max)/2) ≥ r.
    MetropolisEquivalent,
}

/// q-state clock model, H = -J Σ_⟨ij⟩ cos(θ_i - θ_j), θ = 2π n/q.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockLattice {
    l: usize,
    q: usize,
    /// Labels 0..q internally; the public accessors use 1..=q.
    spins: Vec<usize>,
    beta: f64,
    coupling: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl ClockLattice {
    /// Ordered start (all spins in state 1).
    pub fn new(l: usize, q: usize, beta: f64, coupling: f64) -> Result<Self> {
        if l < 2 || q < 2 {
            return Err(Error::InvalidParameter(format!("L = {l}, q = {q}")));
        }
        if !(beta >= 0.0) || !coupling.is_finite() {
            return Err(Error::InvalidParameter(format!("beta = {beta}, J = {coupling}")));
        }
        let cos = (0..q).map(|k| (2.0 * PI * k as f64 / q as f64).cos()).collect();
        let sin = (0..q).map(|k| (2.0 * PI * k as f64 / q as f64).sin()).collect();
        Ok(Self { l, q, spins: vec![0; l * l], beta, coupling, cos, sin })
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Label of `site` in 1..=q.
    pub fn spin(&self, site: usize) -> usize {
        self.spins[site] + 1
    }

    pub fn set_spin(&mut self, site: usize, label: usize) -> Result<()> {
        if label == 0 || label > self.q {
            return Err(Error::InvalidParameter(format!("label {label} not in 1..={}", self.q)));
        }
        self.spins[site] = label - 1;
        Ok(())
    }

    #[inline]
    fn bond(&self, a: usize, b: usize) -> f64 {
        self.cos[(a + self.q - b) % self.q]
    }

    #[inline]
    fn delta_internal(&self, site: usize, new: usize) -> f64 {
        let old = self.spins[site];
        let mut d = 0.0;
        for nb in neighbours(self.l, site) {
            let s = self.spins[nb];
            d += self.bond(new, s) - self.bond(old, s);
        }
        -self.beta * self.coupling * d
    }

    /// βΔH for setting `site` to `label` (1..=q).
    pub fn delta_energy(&self, site: usize, label: usize) -> Result<f64> {
        if label == 0 || label > self.q {
            return Err(Error::InvalidParameter(format!("proposal {label} not in 1..={}", self.q)));
        }
        if site >= self.len() {
            return Err(Error::IndexOutOfRange { index: site, len: self.len() });
        }
        Ok(self.delta_internal(site, label - 1))
    }

    /// H (without the β factor).
    pub fn energy(&self) -> f64 {
        let mut e = 0.0;
        for site in 0..self.len() {
            let [right, _, down, _] = neighbours(self.l, site);
            e -= self.bond(self.spins[site], self.spins[right]) + self.bond(self.spins[site], self.spins[down]);
        }
        self.coupling * e
    }

    /// |Σ_k exp(i θ_k)|/N.
    pub fn magnetization(&self) -> f64 {
        let (mut x, mut y) = (0.0, 0.0);
        for &s in &self.spins {
            x += self.cos[s];
            y += self.sin[s];
        }
        x.hypot(y) / self.len() as f64
    }

    /// Bound on |βΔH| for one site change.
    pub fn delta_max(&self) -> f64 {
        let hi = self.cos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.cos.iter().cloned().fold(f64::INFINITY, f64::min);
        4.0 * (hi - lo) * self.beta * self.coupling.abs()
    }

    pub fn sweep(&mut self, sampler: &LatticeSweeper, rng: &mut RngStream) {
        for _ in 0..self.len() {
            let site = rng.index(self.len());
            let k = rng.index(self.q - 1);
            let new = if k >= self.spins[site] { k + 1 } else { k };
            let ds = self.delta_internal(site, new);
            if sampler.accept(ds, rng) {
                self.spins[site] = new;
            }
        }
    }
}

/// A lattice sampler bound to a specific Δ_max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeSweeper {
    Metropolis,
    Dlm(DlmConfig),
    MetropolisEquivalent { delta_max: f64 },
}

impl LatticeSweeper {
    pub fn new(sampler: LatticeSampler, delta_max: f64) -> Result<Self> {
        Ok(match sampler {
            LatticeSampler::Metropolis => LatticeSweeper::Metropolis,
            LatticeSampler::Dlm { epsilon } => LatticeSweeper::Dlm(DlmConfig::max_truncation(epsilon, true, delta_max)?),
            LatticeSampler::MetropolisEquivalent => LatticeSweeper::MetropolisEquivalent { delta_max },
        })
    }

    #[inline]
    pub fn accept(&self, ds: f64, rng: &mut RngStream) -> bool {
        match self {
            LatticeSweeper::Metropolis => ds <= 0.0 || rng.uniform() < (-ds).exp(),
            LatticeSweeper::Dlm(cfg) => cfg.accept(ds, rng),
            LatticeSweeper::MetropolisEquivalent { delta_max } => (-(ds + delta_max) / 2.0).exp() - rng.uniform() >= 0.0,
        }
    }
}

/// Ising model H = -J Σ_⟨ij⟩ s_i s_j - h Σ_i s_i.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingLattice {
    l: usize,
    spins: Vec<i8>,
    pub beta: f64,
    pub j: f64,
    pub h: f64,
}

impl IsingLattice {
    /// All spins up.
    pub fn new(l: usize, beta: f64, j: f64, h: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidParameter(format!("L = {l}")));
        }
        Ok(Self { l, spins: vec![1; l * l], beta, j, h })
    }

    /// Spins s_i = 2 z_i - 1 from a binary state.
    pub fn from_state(l: usize, z: &BinaryState, beta: f64, j: f64, h: f64) -> Result<Self> {
        if z.len() != l * l {
            return Err(Error::DimensionMismatch { expected: l * l, got: z.len() });
        }
        let spins = z.as_slice().iter().map(|&v| 2 * v as i8 - 1).collect();
        Ok(Self { l, spins, beta, j, h })
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn to_state(&self) -> BinaryState {
        BinaryState::from_bits(self.spins.iter().map(|&s| ((s + 1) / 2) as u8).collect()).expect("binary")
    }

    /// H (without β).
    pub fn energy(&self) -> f64 {
        let mut bonds = 0.0;
        let mut field = 0.0;
        for site in 0..self.len() {
            let [right, _, down, _] = neighbours(self.l, site);
            let s = self.spins[site] as f64;
            bonds += s * (self.spins[right] + self.spins[down]) as f64;
            field += s;
        }
        -self.j * bonds - self.h * field
    }

    /// βΔH for flipping `site`.
    pub fn delta_energy(&self, site: usize) -> f64 {
        let nb: i32 = neighbours(self.l, site).iter().map(|&k| self.spins[k] as i32).sum();
        2.0 * self.beta * self.spins[site] as f64 * (self.j * nb as f64 + self.h)
    }

    pub fn magnetization(&self) -> f64 {
        (self.spins.iter().map(|&s| s as i64).sum::<i64>()).abs() as f64 / self.len() as f64
    }

    pub fn delta_max(&self) -> f64 {
        2.0 * self.beta * (4.0 * self.j.abs() + self.h.abs())
    }

    pub fn sweep(&mut self, sampler: &LatticeSweeper, rng: &mut RngStream) {
        for _ in 0..self.len() {
            let site = rng.index(self.len());
            if sampler.accept(self.delta_energy(site), rng) {
                self.spins[site] = -self.spins[site];
            }
        }
    }
}

/// Boltzmann machine equivalent to the Ising model on an L×L periodic
/// lattice: W_ij = 4J per bond (bonds counted with multiplicity, which
/// matters for L = 2) and b_i = 2h - 2J·deg_i = 2h - 4Jd.
///
/// Pass βJ and βh to obtain the machine for inverse temperature β.
pub fn ising_to_bm(l: usize, j: f64, h: f64, d: usize) -> Result<NetworkParams> {
    if d != 2 {
        return Err(Error::Unsupported(format!("lattice dimension {d}")));
    }
    if l < 2 {
        return Err(Error::InvalidParameter(format!("L = {l}")));
    }
    let n = l * l;
    let mut w = vec![0.0; n * n];
    let mut b = vec![2.0 * h; n];
    for site in 0..n {
        for nb in neighbours(l, site) {
            w[site * n + nb] += 4.0 * j;
            b[site] -= 2.0 * j;
        }
    }
    NetworkParams::new(n, w, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeModel {
    Ising,
    ClockQ4,
}

impl FromStr for LatticeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ising" => Ok(LatticeModel::Ising),
            "clock_q4" | "clock4" | "clock" => Ok(LatticeModel::ClockQ4),
            other => Err(Error::Unsupported(format!("model '{other}'"))),
        }
    }
}

/// Exact infinite-lattice βc for J = 1: ln(1+√2)/2 for Ising, twice that for
/// the four-state clock model.
pub fn critical_beta(model: LatticeModel) -> f64 {
    let ising = (1.0 + 2f64.sqrt()).ln() / 2.0;
    match model {
        LatticeModel::Ising => ising,
        LatticeModel::ClockQ4 => 2.0 * ising,
    }
}

/// c = (β²/N)(⟨E²⟩ - ⟨E⟩²) with a blocked-jackknife error.
pub fn specific_heat(energies: &[f64], beta: f64, n: usize) -> Result<Estimate> {
    if energies.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: energies.len() });
    }
    let sq: Vec<f64> = energies.iter().map(|e| e * e).collect();
    let blocks = energies.len().min(100);
    let scale = beta * beta / n as f64;
    jackknife(&[energies, &sq], blocks, |m| scale * (m[1] - m[0] * m[0]))
}

/// β of the maximum of a least-squares parabola through the largest value
/// and up to two grid neighbours on each side, clamped to the grid range.
/// `betas` must be sorted.
pub fn peak_location(betas: &[f64], values: &[f64]) -> Result<f64> {
    if betas.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: betas.len(), got: values.len() });
    }
    if betas.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: betas.len() });
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("beta grid must be strictly increasing".into()));
    }
    let top = (0..values.len()).fold(0, |k, j| if values[j] > values[k] { j } else { k });
    let lo = top.saturating_sub(2).min(betas.len() - 3);
    let hi = (lo + 5).min(betas.len()).max(top + 1);
    let lo = hi.saturating_sub(5).min(lo);
    // Centred abscissa keeps the normal equations well conditioned.
    let x0 = betas[top];
    let mut s = [0.0; 5];
    let mut t = [0.0; 3];
    for k in lo..hi {
        let x = betas[k] - x0;
        let mut p = 1.0;
        for (e, sv) in s.iter_mut().enumerate() {
            *sv += p;
            if e < 3 {
                t[e] += p * values[k];
            }
            p *= x;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let det3 = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(&m);
    if d.abs() < 1e-300 {
        return Err(Error::ZeroDenominator("singular peak fit".into()));
    }
    let solve = |col: usize| {
        let mut mc = m;
        for r in 0..3 {
            mc[r][col] = t[r];
        }
        det3(&mc) / d
    };
    let (b1, c2) = (solve(1), solve(2));
    if c2 >= 0.0 {
        return Ok(x0);
    }
    Ok((x0 - b1 / (2.0 * c2)).clamp(betas[0], betas[betas.len() - 1]))
}

/// Per-β observables of a lattice run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeObservables {
    pub beta: f64,
    pub m: Estimate,
    pub c: Estimate,
}

fn summarise(beta: f64, n: usize, mags: &[f64], energies: &[f64]) -> Result<LatticeObservables> {
    let blocks = mags.len().min(100);
    let m = jackknife(&[mags], blocks, |v| v[0])?;
    let c = specific_heat(energies, beta, n)?;
    Ok(LatticeObservables { beta, m, c })
}

/// Clock-model run from an ordered start.
pub fn simulate_clock(
    l: usize,
    q: usize,
    beta: f64,
    sampler: LatticeSampler,
    sweeps: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<LatticeObservables> {
    let mut lat = ClockLattice::new(l, q, beta, 1.0)?;
    let sw = LatticeSweeper::new(sampler, lat.delta_max())?;
    for _ in 0..burn_in {
        lat.sweep(&sw, rng);
    }
    let mut mags = Vec::with_capacity(sweeps);
    let mut energies = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        lat.sweep(&sw, rng);
        mags.push(lat.magnetization());
        energies.push(lat.energy());
    }
    summarise(beta, lat.len(), &mags, &energies)
}

/// How an Ising run is updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IsingSampler {
    Lattice(LatticeSampler),
    /// Sign-dependent machine on the equivalent Boltzmann machine.
    Network(SiteRule),
}

impl IsingSampler {
    pub fn lm2(epsilon: f64) -> Self {
        IsingSampler::Network(SiteRule::Lm2 { epsilon, use_lambda: true, truncation: Truncation::Max })
    }
}

/// Ising run (J = 1, h = 0) from an ordered start. Refractory counters are
/// only available for network samplers.
pub fn simulate_ising(
    l: usize,
    beta: f64,
    sampler: IsingSampler,
    refractory: Option<&RefractoryConfig>,
    sweeps: usize,
    burn_in: usize,
    rng: RngStream,
) -> Result<LatticeObservables> {
    let mut lat = IsingLattice::new(l, beta, 1.0, 0.0)?;
    let n = lat.len();
    let mut mags = Vec::with_capacity(sweeps);
    let mut energies = Vec::with_capacity(sweeps);
    match sampler {
        IsingSampler::Lattice(s) => {
            if refractory.is_some() {
                return Err(Error::Unsupported("refractory counters on a lattice sampler".into()));
            }
            let mut rng = rng;
            let sw = LatticeSweeper::new(s, lat.delta_max())?;
            for k in 0..burn_in + sweeps {
                lat.sweep(&sw, &mut rng);
                if k >= burn_in {
                    mags.push(lat.magnetization());
                    energies.push(lat.energy());
                }
            }
        }
        IsingSampler::Network(rule) => {
            let bm = ising_to_bm(l, beta, 0.0, 2)?;
            let mut s = NetworkSampler::new(bm, rule, lat.to_state(), rng)?;
            if let Some(r) = refractory {
                s = wrap_refractory(s, r)?;
            }
            for k in 0..burn_in + sweeps {
                s.sweep()?;
                if k >= burn_in {
                    lat = IsingLattice::from_state(l, s.state(), beta, 1.0, 0.0)?;
                    mags.push(lat.magnetization());
                    energies.push(lat.energy());
                }
            }
        }
    }
    summarise(beta, n, &mags, &energies)
}

/// Exact Ising moments by enumeration of all 2^(L²) configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingExact {
    pub abs_m: f64,
    pub energy: f64,
    pub energy_sq: f64,
}

impl IsingExact {
    pub fn specific_heat(&self, beta: f64, n: usize) -> f64 {
        beta * beta / n as f64 * (self.energy_sq - self.energy * self.energy)
    }
}

pub fn ising_exact(l: usize, beta: f64, j: f64, h: f64) -> Result<IsingExact> {
    let n = l * l;
    if n > 20 {
        return Err(Error::TooLarge { n, limit: 20 });
    }
    let configs: Vec<(f64, f64)> = (0..1usize << n)
        .map(|s| {
            let lat = IsingLattice::from_state(l, &BinaryState::from_index(s, n), beta, j, h).expect("dims");
            (lat.energy(), lat.magnetization())
        })
        .collect();
    let e_min = configs.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let (mut z, mut m, mut e, mut e2) = (0.0, 0.0, 0.0, 0.0);
    for &(en, mag) in &configs {
        let w = (-beta * (en - e_min)).exp();
        z += w;
        m += w * mag;
        e += w * en;
        e2 += w * en * en;
    }
    Ok(IsingExact { abs_m: m / z, energy: e / z, energy_sq: e2 / z })
}

/// Boltzmann weights of all Ising configurations, indexed like [`BinaryState`].
pub fn ising_boltzmann(l: usize, beta: f64) -> Result<Vec<f64>> {
    let n = l * l;
    if n > 20 {
        return Err(Error::TooLarge { n, limit: 20 });
    }
    let logw: Vec<f64> = (0..1usize << n)
        .map(|s| -beta * IsingLattice::from_state(l, &BinaryState::from_index(s, n), beta, 1.0, 0.0).expect("dims").energy())
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logw.iter().map(|x| (x - max).exp()).sum();
    Ok(logw.iter().map(|x| (x - max).exp() / z).collect())
}

/// ⟨|m|⟩ under a distribution over Ising configurations.
pub fn ising_abs_m(l: usize, probs: &[f64]) -> f64 {
    let n = l * l;
    probs
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let up = (s as u64).count_ones() as f64;
            p * (2.0 * up - n as f64).abs() / n as f64
        })
        .sum()
}
