//! Airy function Ai on the real line and its negative zeros.
//!
//! |x| <= 6 uses the Maclaurin series, larger |x| the asymptotic expansions
//! truncated at their smallest term.

use std::f64::consts::PI;

use crate::error::{ensure, Result};

/// Ai(0)
const C1: f64 = 0.355_028_053_887_817_2;
/// -Ai'(0)
const C2: f64 = 0.258_819_403_792_806_8;

pub const SERIES_LIMIT: f64 = 6.0;

/// (Ai(x), Ai'(x))
pub fn airy_pair(x: f64) -> (f64, f64) {
    if x.abs() <= SERIES_LIMIT {
        airy_series(x)
    } else {
        airy_asymptotic(x)
    }
}

pub fn airy(x: f64) -> f64 {
    airy_pair(x).0
}

pub fn airy_prime(x: f64) -> f64 {
    airy_pair(x).1
}

/// Maclaurin evaluation, usable for moderate |x|.
pub fn airy_series(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    // f = sum x^{3k} prod..., g = sum x^{3k+1} prod...
    let (mut f, mut g) = (1.0, x);
    let (mut df, mut dg) = (0.0, 1.0);
    let (mut tf, mut tg) = (1.0, x);
    for k in 1..200 {
        let k3 = 3.0 * k as f64;
        tf *= x3 / ((k3 - 1.0) * k3);
        tg *= x3 / (k3 * (k3 + 1.0));
        f += tf;
        g += tg;
        if x != 0.0 {
            df += k3 * tf / x;
            dg += (k3 + 1.0) * tg / x;
        }
        if tf.abs() < 1e-18 * f.abs().max(1e-300) && tg.abs() < 1e-18 * g.abs().max(1e-300) {
            break;
        }
    }
    (C1 * f - C2 * g, C1 * df - C2 * dg)
}

fn u_coefficients(n: usize) -> Vec<f64> {
    let mut u = vec![1.0; n];
    for k in 1..n {
        let kf = k as f64;
        u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
    }
    u
}

/// Asymptotic evaluation, usable for |x| large.
pub fn airy_asymptotic(x: f64) -> (f64, f64) {
    const NTERMS: usize = 40;
    let u = u_coefficients(NTERMS);
    let v: Vec<f64> = (0..NTERMS)
        .map(|k| {
            let kf = k as f64;
            -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u[k]
        })
        .collect();
    let z = x.abs();
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    if x > 0.0 {
        let (mut sa, mut sd) = (0.0, 0.0);
        let mut p = 1.0;
        let mut last = f64::INFINITY;
        for k in 0..NTERMS {
            let t = u[k] * p;
            if t.abs() > last {
                break;
            }
            last = t.abs();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sa += sign * t;
            sd += sign * v[k] * p;
            p /= zeta;
        }
        let e = (-zeta).exp() / (2.0 * PI.sqrt());
        (e * sa / z.powf(0.25), -e * z.powf(0.25) * sd)
    } else {
        // Ai(-z) ~ z^{-1/4}/sqrt(pi) [sin(t) P - cos(t) Q], t = zeta + pi/4
        let (mut pa, mut qa, mut pd, mut qd) = (0.0, 0.0, 0.0, 0.0);
        let mut p = 1.0;
        let mut last = f64::INFINITY;
        for k in 0..NTERMS {
            let t = u[k] * p;
            if t.abs() > last {
                break;
            }
            last = t.abs();
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                pa += sign * t;
                pd += sign * v[k] * p;
            } else {
                qa += sign * t;
                qd += sign * v[k] * p;
            }
            p /= zeta;
        }
        let th = zeta + PI / 4.0;
        let (s, c) = th.sin_cos();
        let ai = (s * pa - c * qa) / (PI.sqrt() * z.powf(0.25));
        let dai = -z.powf(0.25) * (c * pd + s * qd) / PI.sqrt();
        (ai, dai)
    }
}

/// Negative zeros of Ai, stored as positive numbers `u_k` (Ai(-u_k) = 0).
#[derive(Clone, Debug)]
pub struct AiryTable {
    pub zeros: Vec<f64>,
    /// Ai'(-u_k)
    pub derivs: Vec<f64>,
}

/// Asymptotic location of the k-th zero (k >= 1).
pub fn zero_estimate(k: usize) -> f64 {
    let t = 3.0 * PI * (4.0 * k as f64 - 1.0) / 8.0;
    let t2 = t.powi(-2);
    t.powf(2.0 / 3.0) * (1.0 + t2 * (5.0 / 48.0 - t2 * (5.0 / 36.0 - t2 * 77125.0 / 82944.0)))
}

fn polish_zero(k: usize) -> f64 {
    // bracket around the estimate, bisect, then Newton
    let guess = zero_estimate(k);
    let half = if k == 1 { 0.5 } else { 0.3 * (zero_estimate(k) - zero_estimate(k - 1)) };
    let (mut a, mut b) = (guess - half, guess + half);
    let (mut fa, _) = airy_pair(-a);
    for _ in 0..30 {
        let m = 0.5 * (a + b);
        let fm = airy(-m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let mut u = 0.5 * (a + b);
    for _ in 0..20 {
        let (f, df) = airy_pair(-u);
        // d/du Ai(-u) = -Ai'(-u)
        let step = f / -df;
        u -= step;
        if step.abs() < 1e-15 * u {
            break;
        }
    }
    u
}

/// The first `n` zeros by bracketed root-finding.
pub fn airy_zeros(n: usize) -> Result<AiryTable> {
    ensure((1..=50).contains(&n), || format!("airy_zeros: n = {n} outside 1..=50"))?;
    let zeros: Vec<f64> = (1..=n).map(polish_zero).collect();
    let derivs = zeros.iter().map(|&u| airy_prime(-u)).collect();
    Ok(AiryTable { zeros, derivs })
}

impl AiryTable {
    /// Zero `k` (0-based) for any k: tabulated values first, asymptotic formula beyond.
    pub fn zero(&self, k: usize) -> f64 {
        self.zeros.get(k).copied().unwrap_or_else(|| zero_estimate(k + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Ai(1), Ai(-2), Ai'(0), Ai(10), Ai(-10)
        assert!((airy(1.0) - 0.135_292_416_312_881_4).abs() < 1e-14);
        assert!((airy(-2.0) - 0.227_407_428_201_685_5).abs() < 1e-13);
        assert!((airy_prime(0.0) + C2).abs() < 1e-16);
        assert!((airy(10.0) / 1.104_753_255_289_865_4e-10 - 1.0).abs() < 1e-12);
        assert!((airy(-10.0) - 0.040_241_238_486_441_955).abs() < 1e-12);
    }

    #[test]
    fn crossover_is_continuous() {
        for x in [-SERIES_LIMIT, SERIES_LIMIT] {
            let (a, da) = airy_series(x);
            let (b, db) = airy_asymptotic(x);
            assert!((a - b).abs() < 1e-10, "x={x}: {a} vs {b}");
            assert!((da - db).abs() < 1e-9, "x={x}: {da} vs {db}");
        }
    }

    #[test]
    fn zeros_are_roots() {
        let t = airy_zeros(50).unwrap();
        assert!((t.zeros[0] - 2.338_107_410_459_767).abs() < 1e-12);
        for (k, &u) in t.zeros.iter().enumerate() {
            assert!(airy(-u).abs() < 1e-10, "zero {k}");
            if k > 0 {
                assert!(u > t.zeros[k - 1]);
            }
        }
        assert!((t.derivs[0] - 0.701_210_822_720_691_5).abs() < 1e-10);
        assert!(airy_zeros(51).is_err());
    }
}
