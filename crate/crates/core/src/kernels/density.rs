//! Density of ∫_0^M of a BESQ(2) started at 0.

use std::f64::consts::PI;

use crate::quad::adaptive_simpson;

const SWITCH: f64 = 4.0 / (PI * PI);

fn d1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    for n in 0..10_000 {
        let k = n as f64 + 0.5;
        let term = k * (-k * k * PI * PI * x / 2.0).exp();
        let signed = if n % 2 == 0 { term } else { -term };
        sum += signed;
        if term <= 1e-13 * sum.abs() || term < 1e-300 {
            break;
        }
    }
    PI * sum
}

/// D_1(x) = π Σ (-1)^n (n+½) exp(-(n+½)² π² x / 2); below 4/π² the series
/// is evaluated through D_1(x) = (2/(πx))^{3/2} D_1(4/(π² x)).
pub fn density_d1(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < SWITCH {
        (2.0 / (PI * x)).powf(1.5) * d1_series(4.0 / (PI * PI * x))
    } else {
        d1_series(x)
    }
}

/// D_M(x) = M^{-2} D_1(x / M²).
pub fn density_dm(m: f64, x: f64) -> f64 {
    density_d1(x / (m * m)) / (m * m)
}

/// Distribution function of D_1.
pub fn cdf_d1(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 0.05 {
        return adaptive_simpson(&density_d1, 0.0, x, 1e-14);
    }
    let mut tail = 0.0;
    for n in 0..10_000 {
        let k = n as f64 + 0.5;
        let term = 2.0 / (k * PI) * (-k * k * PI * PI * x / 2.0).exp();
        tail += if n % 2 == 0 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    1.0 - tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized() {
        let total = adaptive_simpson(&density_d1, 0.0, 1.0, 1e-13) + adaptive_simpson(&density_d1, 1.0, 40.0, 1e-13);
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn functional_equation() {
        for x in [0.5, 1.0, 2.0] {
            let rhs = (2.0 / (PI * x)).powf(1.5) * density_d1(4.0 / (PI * PI * x));
            assert!((density_d1(x) - rhs).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn branches_agree_at_switch() {
        let x = SWITCH * (1.0 + 1e-9);
        let y = SWITCH * (1.0 - 1e-9);
        assert!((density_d1(x) - density_d1(y)).abs() < 1e-8);
        assert!((d1_series(0.5) - density_d1(0.5)).abs() < 1e-12);
    }

    #[test]
    fn cdf_consistent_with_density() {
        for x in [0.03, 0.2, 0.7, 1.5, 3.0] {
            let q = adaptive_simpson(&density_d1, 0.0, x, 1e-14);
            assert!((cdf_d1(x) - q).abs() < 1e-9, "x = {x}");
        }
        // mean of ∫_0^1 BESQ2 is 1
        let mean = adaptive_simpson(&|x| x * density_d1(x), 0.0, 40.0, 1e-12);
        assert!((mean - 1.0).abs() < 1e-8, "{mean}");
        assert!((density_dm(2.0, 4.0) - density_d1(1.0) / 4.0).abs() < 1e-15);
    }
}
