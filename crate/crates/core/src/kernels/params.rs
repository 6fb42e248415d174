use serde::Serialize;

use crate::error::{ensure, Result};

/// Penalty strength and the derived scales used by the A-functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    pub beta: f64,
    /// beta^(1/3)
    pub alpha: f64,
    /// principal eigenvalue of the killed generator
    pub rho: f64,
    /// support bound / cut level
    pub m: f64,
    pub s: f64,
    pub t: f64,
    pub mu: f64,
}

impl ModelParams {
    pub fn new(beta: f64, rho: f64, m: f64) -> Result<Self> {
        ensure(beta > 0.0 && beta.is_finite(), || format!("beta = {beta} must be > 0"))?;
        ensure(m > 0.0 && m.is_finite(), || format!("M = {m} must be > 0"))?;
        ensure(rho > 0.0, || format!("rho = {rho} must be > 0"))?;
        Ok(Self {
            beta,
            alpha: beta.cbrt(),
            rho,
            m,
            s: 0.0,
            t: 0.0,
            mu: 0.0,
        })
    }

    pub fn with_m(self, m: f64) -> Result<Self> {
        ModelParams::new(self.beta, self.rho, m).map(|p| Self { s: self.s, t: self.t, mu: self.mu, ..p })
    }

    /// rho beta^(2/3), the exponential rate of the partition function.
    pub fn rate(&self) -> f64 {
        self.rho * self.alpha * self.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_cubes_to_beta() {
        for beta in [0.1, 1.0, 2.0, 7.5] {
            let p = ModelParams::new(beta, 2.188, 1.0).unwrap();
            assert!((p.alpha.powi(3) - beta).abs() <= 1e-12 * beta);
        }
        assert!(ModelParams::new(0.0, 2.188, 1.0).is_err());
        assert!(ModelParams::new(1.0, 2.188, -1.0).is_err());
    }
}
