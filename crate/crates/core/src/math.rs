//! Gaussian special functions and the cumulative-Gaussian to exponential
//! limit machinery.
//!
//! Every function here takes the "step" ε (not √ε). The anchor point of all
//! ratios is `a = -1/sqrt(eps)`, so for ε = 0.01 the cumulative normal is
//! evaluated around -10, where the tail is handled in log space.

use crate::error::{check_epsilon, Error, Result};
use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const MAX_HERMITE_ORDER: usize = 64;

/// Derivative order m of Φ in the generalised ratio `n_ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LimitOrder(pub usize);

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn log_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x), through erfc so that the lower tail keeps full relative accuracy.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        1.0 - 0.5 * libm::erfc(x / SQRT_2)
    } else {
        0.5 * libm::erfc(-x / SQRT_2)
    }
}

/// ln Φ(x). Below -20 an asymptotic Mills-ratio series replaces erfc.
pub fn log_std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 0.0 {
        (-0.5 * libm::erfc(x / SQRT_2)).ln_1p()
    } else if x >= -20.0 {
        (0.5 * libm::erfc(-x / SQRT_2)).ln()
    } else {
        // Φ(x) = φ(x)/|x| · Σ_k (-1)^k (2k-1)!! / x^{2k}
        let inv2 = 1.0 / (x * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=12 {
            term *= -((2 * k - 1) as f64) * inv2;
            sum += term;
        }
        log_std_normal_pdf(x) - (-x).ln() + sum.ln()
    }
}

/// Probabilists' Hermite polynomial He_m(x) by the three-term recurrence.
pub fn hermite_prob(m: usize, x: f64) -> Result<f64> {
    if m > MAX_HERMITE_ORDER {
        return Err(Error::OrderTooLarge(m));
    }
    let (mut prev, mut cur) = (1.0, x);
    if m == 0 {
        return Ok(prev);
    }
    for k in 1..m {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// λ_ε = √ε φ(a)/Φ(a) with a = -1/√ε. Tends to 1 as ε → 0.
pub fn lambda_eps(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let a = -1.0 / epsilon.sqrt();
    Ok(epsilon.sqrt() * (log_std_normal_pdf(a) - log_std_normal_cdf(a)).exp())
}

/// σ_{m,ε} = -√ε He_m(a)/He_{m-1}(a). Equals 1 for m = 1 and 1 - ε for m = 2.
pub fn sigma_m_eps(m: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if m == 0 {
        return Err(Error::InvalidParameter("sigma_m_eps needs m >= 1".into()));
    }
    if m == 1 {
        return Ok(1.0);
    }
    let a = -1.0 / epsilon.sqrt();
    let num = hermite_prob(m, a)?;
    let den = hermite_prob(m - 1, a)?;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::HermiteZero { order: m - 1, epsilon });
    }
    Ok(-epsilon.sqrt() * num / den)
}

/// Ratio of the m-th derivative of Φ at a + √ε x/σ_m to that at a, which
/// approaches exp(x) with an O(ε x²) error. For m = 0 the scale is λ_ε.
pub fn n_ratio(m: LimitOrder, epsilon: f64, x: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let a = -1.0 / epsilon.sqrt();
    let s = epsilon.sqrt();
    if m.0 == 0 {
        let y = a + s * x / lambda_eps(epsilon)?;
        return Ok((log_std_normal_cdf(y) - log_std_normal_cdf(a)).exp());
    }
    let y = a + s * x / sigma_m_eps(m.0, epsilon)?;
    let h_ratio = hermite_prob(m.0 - 1, y)? / hermite_prob(m.0 - 1, a)?;
    Ok(h_ratio * (log_std_normal_pdf(y) - log_std_normal_pdf(a)).exp())
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln σ(x), stable for large |x|.
pub fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// ln(e^x + e^y).
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

/// p1/(p1 + p0) from log-probabilities.
pub fn ratio_from_logs(log_p1: f64, log_p0: f64) -> f64 {
    logistic(log_p1 - log_p0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    /// Adaptive Simpson quadrature; the independent oracle for Φ.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 20)
    }

    fn cdf_oracle(x: f64) -> f64 {
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        if x < 0.0 {
            simpson(&pdf, x - 40.0, x, 1e-17)
        } else {
            0.5 + simpson(&pdf, 0.0, x, 1e-15)
        }
    }

    #[test]
    fn pdf_values() {
        assert!((std_normal_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((std_normal_pdf(1.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert_eq!(std_normal_pdf(-1.3), std_normal_pdf(1.3));
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        let oracle = cdf_oracle(1.96);
        assert!((std_normal_cdf(1.96) - oracle).abs() < 1e-12);
        assert!((oracle - 0.975_002_1).abs() < 1e-7);
    }

    #[test]
    fn log_cdf_against_quadrature_in_tail() {
        // Shift the integrand so the quadrature works on O(1) numbers.
        for &x in &[-10.0, -5.0, -3.0] {
            let scaled = |t: f64| (-0.5 * (t * t - x * x)).exp() / (2.0 * PI).sqrt();
            let z = simpson(&scaled, x - 30.0, x, 1e-16);
            let oracle = z.ln() - 0.5 * x * x;
            let got = log_std_normal_cdf(x);
            assert!(((got - oracle) / oracle).abs() < 1e-10, "x={x}: {got} vs {oracle}");
        }
    }

    #[test]
    fn log_cdf_branches_are_continuous() {
        let below = log_std_normal_cdf(-20.0 - 1e-9);
        let above = log_std_normal_cdf(-20.0);
        assert!((below - above).abs() < 1e-7);
        assert_eq!(log_std_normal_cdf(0.0), -LN_2);
        assert!(log_std_normal_cdf(30.0) <= 0.0);
        assert!(log_std_normal_cdf(30.0) > -1e-100);
        // Deep tail against the erfc branch where both are valid.
        for &x in &[-25.0, -30.0, -36.0] {
            let direct = (0.5 * libm::erfc(-x / SQRT_2)).ln();
            assert!((log_std_normal_cdf(x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_prob(0, 3.7).unwrap(), 1.0);
        assert!((hermite_prob(2, 1.5).unwrap() - (1.5 * 1.5 - 1.0)).abs() < 1e-15);
        assert_eq!(hermite_prob(3, 2.0).unwrap(), 2.0);
        assert!(matches!(hermite_prob(65, 1.0), Err(Error::OrderTooLarge(65))));
    }

    #[test]
    fn lambda_examples() {
        assert!((lambda_eps(1.0).unwrap() - 1.525_135_276_160_981).abs() < 1e-10);
        assert!(lambda_eps(1e-4).unwrap() - 1.0 < 1e-3);
        assert!(lambda_eps(0.0).is_err());
        assert!(lambda_eps(1.5).is_err());
    }

    #[test]
    fn sigma_examples() {
        for &e in &[0.01, 0.3, 1.0] {
            assert_eq!(sigma_m_eps(1, e).unwrap(), 1.0);
            assert!((sigma_m_eps(2, e).unwrap() - (1.0 - e)).abs() < 1e-14);
        }
        // He_1(-1) = -1, He_2(-1) = 0: σ_3 at ε=1 divides by zero.
        assert!(matches!(sigma_m_eps(3, 1.0), Err(Error::HermiteZero { .. })));
    }

    #[test]
    fn n_ratio_examples() {
        for m in 0..4 {
            assert!((n_ratio(LimitOrder(m), 0.1, 0.0).unwrap() - 1.0).abs() < 1e-14);
        }
        let v = n_ratio(LimitOrder(0), 0.01, 0.5).unwrap();
        assert!((v / 0.5f64.exp() - 1.0).abs() < 0.01);
        let v = n_ratio(LimitOrder(0), 1e-4, 1.0).unwrap();
        assert!((v - 1.0f64.exp()).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn m1_ratio_closed_form(eps in 0.01f64..1.0, x in -3.0f64..3.0) {
            let got = n_ratio(LimitOrder(1), eps, x).unwrap();
            let want = (x - eps * x * x / 2.0).exp();
            prop_assert!((got / want - 1.0).abs() < 1e-10);
        }

        #[test]
        fn hermite_parity(m in 0usize..=20, x in -5.0f64..5.0) {
            let p = hermite_prob(m, x).unwrap();
            let q = hermite_prob(m, -x).unwrap();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((p - sign * q).abs() <= 1e-12 * p.abs().max(1.0));
        }

        #[test]
        fn cdf_symmetry(x in -8.0f64..8.0) {
            prop_assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn lambda_monotone(e1 in 0.01f64..1.0, e2 in 0.01f64..1.0) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(lambda_eps(lo).unwrap() < lambda_eps(hi).unwrap());
            prop_assert!(lambda_eps(lo).unwrap() > 1.0);
        }
    }
}
