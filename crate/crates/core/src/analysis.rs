//! Observables and statistics over sampled histories.

use crate::error::{Error, Result};
use crate::network::{energy, BinaryState, NetworkParams};

/// A mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub err: f64,
}

/// Visit counts per configuration index (z_0 = least significant bit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl ConfigHistogram {
    pub fn new(states: usize) -> Self {
        Self { counts: vec![0; states], total: 0 }
    }

    pub fn for_neurons(n: usize) -> Self {
        Self::new(1 << n)
    }

    #[inline]
    pub fn record(&mut self, index: usize) {
        self.counts[index] += 1;
        self.total += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn merge(&mut self, other: &ConfigHistogram) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(Error::DimensionMismatch { expected: self.counts.len(), got: other.counts.len() });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Normalised frequencies, each empty cell given one pseudo-count.
    pub fn probabilities(&self) -> Vec<f64> {
        let empty = self.counts.iter().filter(|&&c| c == 0).count() as f64;
        let total = self.total as f64 + empty;
        self.counts.iter().map(|&c| if c == 0 { 1.0 } else { c as f64 } / total).collect()
    }
}

/// exp(-E)/Z over all 2ⁿ configurations.
pub fn exact_boltzmann(p: &NetworkParams) -> Result<Vec<f64>> {
    const LIMIT: usize = 20;
    let n = p.n();
    if n > LIMIT {
        return Err(Error::TooLarge { n, limit: LIMIT });
    }
    let log_w: Vec<f64> =
        (0..1usize << n).map(|s| energy(p, &BinaryState::from_index(s, n)).map(|e| -e)).collect::<Result<_>>()?;
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_w.iter().map(|x| (x - max).exp()).sum();
    let log_z = max + z.ln();
    Ok(log_w.iter().map(|x| (x - log_z).exp()).collect())
}

/// D(P‖Q) = Σ P ln(P/Q), summed as Σ P (d - ln(1+d)) with d = Q/P - 1 so
/// every term is non-negative.
pub fn kl_between(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    let mut kl = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            let d = (b - a) / a;
            kl += a * (d - d.ln_1p());
        }
    }
    Ok(kl)
}

/// KL divergence of the exact distribution from the sampled histogram.
pub fn kl_divergence(p_exact: &[f64], hist: &ConfigHistogram) -> Result<f64> {
    if hist.total == 0 {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    kl_between(p_exact, &hist.probabilities())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Integrated autocorrelation time τ = 1/2 + Σ_t ρ(t), with Sokal's
/// self-consistent window (stop at the first M ≥ 6 τ(M)).
pub fn autocorrelation_time(series: &[f64]) -> Result<f64> {
    const MIN_LEN: usize = 1000;
    let n = series.len();
    if n < MIN_LEN {
        return Err(Error::TooFewSamples { need: MIN_LEN, got: n });
    }
    let m = mean(series);
    let x: Vec<f64> = series.iter().map(|v| v - m).collect();
    let c0 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Ok(0.5);
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = x[..n - t].iter().zip(&x[t..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        tau += ct / c0;
        if t as f64 >= 6.0 * tau {
            break;
        }
    }
    Ok(tau.max(0.5))
}

/// Mean with the standard error from `batches` equal non-overlapping batches.
pub fn batch_means(xs: &[f64], batches: usize) -> Result<Estimate> {
    if batches < 2 || xs.len() < batches {
        return Err(Error::TooFewSamples { need: batches.max(2), got: xs.len() });
    }
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    let mu = mean(&means);
    let var = means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(Estimate { mean: mean(&xs[..size * batches]), err: (var / batches as f64).sqrt() })
}

/// Blocked jackknife of `f` applied to the column means of `columns`.
pub fn jackknife<F: Fn(&[f64]) -> f64>(columns: &[&[f64]], blocks: usize, f: F) -> Result<Estimate> {
    let len = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::DimensionMismatch { expected: len, got: 0 });
    }
    if blocks < 2 || len < blocks {
        return Err(Error::TooFewSamples { need: blocks.max(2), got: len });
    }
    let size = len / blocks;
    let used = size * blocks;
    let k = columns.len();
    let mut block_sums = vec![vec![0.0; k]; blocks];
    let mut totals = vec![0.0; k];
    for (c, col) in columns.iter().enumerate() {
        for (b, chunk) in col[..used].chunks_exact(size).enumerate() {
            let s: f64 = chunk.iter().sum();
            block_sums[b][c] = s;
            totals[c] += s;
        }
    }
    let full: Vec<f64> = totals.iter().map(|t| t / used as f64).collect();
    let est = f(&full);
    let reduced = (used - size) as f64;
    let leave_out: Vec<f64> = block_sums
        .iter()
        .map(|bs| {
            let means: Vec<f64> = totals.iter().zip(bs).map(|(t, s)| (t - s) / reduced).collect();
            f(&means)
        })
        .collect();
    let lm = mean(&leave_out);
    let var = leave_out.iter().map(|v| (v - lm).powi(2)).sum::<f64>() * (blocks - 1) as f64 / blocks as f64;
    Ok(Estimate { mean: est, err: var.sqrt() })
}

/// Solves the small symmetric system `a x = b` by Gaussian elimination and
/// returns x together with a⁻¹.
fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a[i].clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .expect("non-empty");
        if m[piv][col].abs() < 1e-300 {
            return Err(Error::ZeroDenominator("singular normal equations".into()));
        }
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n + 1 {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    let x = m.iter().map(|row| row[2 * n]).collect();
    let inv = m.iter().map(|row| row[n..2 * n].to_vec()).collect();
    Ok((x, inv))
}

/// Fits value(ε) with a polynomial of the given degree and returns the
/// intercept.
///
/// With all errors positive the fit is weighted by 1/err² and the intercept
/// error is taken from the inverse normal matrix. If any error is zero the
/// fit is unweighted and the covariance is scaled by the residual variance.
pub fn extrapolate_to_zero_eps(points: &[(f64, f64, f64)], degree: usize) -> Result<Estimate> {
    if points.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: points.len() });
    }
    if degree == 0 || degree > 2 {
        return Err(Error::InvalidParameter(format!("degree {degree} not in 1..=2")));
    }
    let k = degree + 1;
    if points.len() < k {
        return Err(Error::TooFewSamples { need: k, got: points.len() });
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let weighted = pts.iter().all(|p| p.2 > 0.0);
    let mut a = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for &(e, v, s) in &pts {
        let w = if weighted { 1.0 / (s * s) } else { 1.0 };
        let basis: Vec<f64> = (0..k).map(|p| e.powi(p as i32)).collect();
        for r in 0..k {
            rhs[r] += w * basis[r] * v;
            for c in 0..k {
                a[r][c] += w * basis[r] * basis[c];
            }
        }
    }
    let (coef, inv) = solve_small(&a, &rhs)?;
    let var0 = if weighted {
        inv[0][0]
    } else {
        let dof = pts.len() - k;
        if dof == 0 {
            0.0
        } else {
            let rss: f64 = pts
                .iter()
                .map(|&(e, v, _)| {
                    let fit: f64 = coef.iter().enumerate().map(|(p, c)| c * e.powi(p as i32)).sum();
                    (v - fit).powi(2)
                })
                .sum();
            rss / dof as f64 * inv[0][0]
        }
    };
    Ok(Estimate { mean: coef[0], err: var0.max(0.0).sqrt() })
}
