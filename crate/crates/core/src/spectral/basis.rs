use serde::Serialize;

use super::tridiag::SymTridiagonal;
use crate::error::{ensure, Error, Result};

/// Lowest eigenpairs of the killed generator 2g'' + 2g'/x - x g on L²(x dx).
///
/// Eigenvalues are stored as positive numbers: K e_n = -rho_n e_n.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralBasis {
    pub h: f64,
    pub x_max: f64,
    /// x_j = j h, j = 1..=N
    pub grid: Vec<f64>,
    /// x_j h
    pub nu_weights: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// eigenfunctions[n][j] = e_n(x_j), normalized in L²(nu)
    pub eigenfunctions: Vec<Vec<f64>>,
    /// ||K e_n + rho_n e_n||_nu
    pub residuals: Vec<f64>,
}

/// Tolerances asserted on every basis that is built.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-6;

/// Symmetric form of -x^{-1/2} A x^{-1/2} where A is the flux discretization
/// of -2(x g')' + x^2 g (zero flux at the origin, Dirichlet at x_max).
fn operator(h: f64, n: usize) -> (SymTridiagonal, Vec<f64>) {
    let x: Vec<f64> = (1..=n).map(|j| j as f64 * h).collect();
    let h2 = h * h;
    let mut diag = Vec::with_capacity(n);
    for (j, &xj) in x.iter().enumerate() {
        let right = xj + 0.5 * h;
        let left = if j == 0 { 0.0 } else { xj - 0.5 * h };
        diag.push((2.0 * (right + left) / h2 + xj * xj) / xj);
    }
    let off = (0..n - 1)
        .map(|j| -2.0 * (x[j] + 0.5 * h) / h2 / (x[j] * x[j + 1]).sqrt())
        .collect();
    (SymTridiagonal { diag, off }, x)
}

pub fn build_basis(x_max: f64, h: f64, n_eig: usize) -> Result<SpectralBasis> {
    ensure(x_max >= 15.0, || format!("x_max = {x_max} must be >= 15"))?;
    ensure(h > 0.0 && h <= 1e-2, || format!("h = {h} must lie in (0, 0.01]"))?;
    ensure(n_eig >= 1, || "n_eig must be >= 1".into())?;
    let n = (x_max / h).round() as usize;
    ensure(n_eig < n, || format!("n_eig = {n_eig} exceeds grid size {n}"))?;
    let (op, grid) = operator(h, n);
    let (values, vectors) = op.lowest_eigenpairs(n_eig);

    let mut eigenfunctions = Vec::with_capacity(n_eig);
    let mut residuals = Vec::with_capacity(n_eig);
    for (lambda, w) in values.iter().zip(&vectors) {
        let cw = op.matvec(w);
        let res = cw
            .iter()
            .zip(w)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        // the nu-norm of the residual equals the Euclidean norm in the symmetric frame
        residuals.push(res);
        let sign = if w.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        eigenfunctions.push(
            w.iter()
                .zip(&grid)
                .map(|(wj, xj)| sign * wj / (xj * h).sqrt())
                .collect::<Vec<f64>>(),
        );
    }
    let nu_weights = grid.iter().map(|x| x * h).collect();
    let basis = SpectralBasis {
        h,
        x_max,
        grid,
        nu_weights,
        eigenvalues: values,
        eigenfunctions,
        residuals,
    };
    basis.check()?;
    Ok(basis)
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn rho(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn e0(&self) -> &[f64] {
        &self.eigenfunctions[0]
    }

    /// Largest |<e_m|e_n> - delta_mn|.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..self.len() {
            for n in 0..=m {
                let ip = self.inner(&self.eigenfunctions[m], &self.eigenfunctions[n]);
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    fn check(&self) -> Result<()> {
        let fail = |message: String| Error::Eigensolver {
            message,
            residuals: self.residuals.clone(),
        };
        let defect = self.orthonormality_defect();
        if defect > ORTHONORMALITY_TOL {
            return Err(fail(format!("orthonormality defect {defect:e}")));
        }
        for (n, (&r, &rho)) in self.residuals.iter().zip(&self.eigenvalues).enumerate() {
            if !(r <= RESIDUAL_TOL * rho) {
                return Err(fail(format!("residual of pair {n} is {r:e}")));
            }
        }
        let ev = &self.eigenvalues;
        if ev.windows(2).any(|w| w[1] < w[0]) || (ev.len() > 1 && ev[0] >= ev[1]) {
            return Err(fail("eigenvalues not ordered".into()));
        }
        if self.e0().iter().any(|&v| v <= 0.0) {
            return Err(fail("principal eigenfunction changes sign".into()));
        }
        Ok(())
    }

    /// Sum g_j h_j x_j h without length validation.
    pub fn inner(&self, g: &[f64], k: &[f64]) -> f64 {
        g.iter()
            .zip(k)
            .zip(&self.nu_weights)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    /// <g|k> in L²(nu) for grid functions on this basis.
    pub fn inner_nu(&self, g: &[f64], k: &[f64]) -> Result<f64> {
        let n = self.grid.len();
        ensure(g.len() == n && k.len() == n, || {
            format!("grid mismatch: {} and {} values for a {n}-point grid", g.len(), k.len())
        })?;
        Ok(self.inner(g, k))
    }

    /// Linear interpolation of a grid function; flat below x_1, zero beyond x_max.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        if x <= self.h {
            return values[0];
        }
        let t = x / self.h;
        let j = t.floor() as usize;
        if j >= self.grid.len() {
            return 0.0;
        }
        let frac = t - j as f64;
        let lo = values[j - 1];
        let hi = values.get(j).copied().unwrap_or(0.0);
        lo + frac * (hi - lo)
    }

    pub fn e0_at(&self, x: f64) -> f64 {
        self.interpolate(&self.eigenfunctions[0], x)
    }

    /// Samples a function on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.grid.iter().map(|&x| f(x)).collect()
    }

    /// Coefficients <psi|e_n>.
    pub fn coefficients(&self, psi: &[f64]) -> Vec<f64> {
        self.eigenfunctions.iter().map(|e| self.inner(psi, e)).collect()
    }

    /// Truncated expansion sum_n c_n exp(-rho_n s) e_n, with the bound
    /// exp(-rho_{N} s) ||psi|| on the discarded part.
    pub fn semigroup_apply(&self, psi: &[f64], s: f64) -> Result<(Vec<f64>, f64)> {
        ensure(s >= 0.0, || format!("semigroup time {s} must be >= 0"))?;
        ensure(psi.len() == self.grid.len(), || "psi must live on the basis grid".into())?;
        let coef = self.coefficients(psi);
        let mut out = vec![0.0; self.grid.len()];
        for ((c, e), rho) in coef.iter().zip(&self.eigenfunctions).zip(&self.eigenvalues) {
            let a = c * (-rho * s).exp();
            out.iter_mut().zip(e).for_each(|(o, v)| *o += a * v);
        }
        let norm = self.inner(psi, psi).sqrt();
        let remainder = (-self.eigenvalues[self.len() - 1] * s).exp() * norm;
        Ok((out, remainder))
    }

    /// Sum_n c_n exp(-rho_n s) e_n(l) from precomputed coefficients.
    pub fn propagate_at(&self, coef: &[f64], s: f64, l: f64) -> f64 {
        coef.iter()
            .zip(&self.eigenvalues)
            .enumerate()
            .map(|(n, (c, rho))| c * (-rho * s).exp() * self.interpolate(&self.eigenfunctions[n], l))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn coarse() -> &'static SpectralBasis {
        static B: OnceLock<SpectralBasis> = OnceLock::new();
        B.get_or_init(|| build_basis(20.0, 5e-3, 8).unwrap())
    }

    #[test]
    fn principal_pair() {
        let b = coarse();
        assert!(b.rho() > 2.18 && b.rho() < 2.19, "rho = {}", b.rho());
        assert!(b.orthonormality_defect() < 1e-8);
        assert!(b.e0().iter().all(|&v| v > 0.0));
        // a reference value of the normalized principal eigenfunction
        assert!((b.e0_at(1.0) - 0.71614).abs() < 2e-3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_basis(10.0, 1e-3, 4).is_err());
        assert!(build_basis(20.0, 0.05, 4).is_err());
        let b = coarse();
        assert!(b.inner_nu(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn semigroup_on_eigenfunction() {
        let b = coarse();
        let (out, _) = b.semigroup_apply(b.e0(), 0.7).unwrap();
        let f = (-b.rho() * 0.7).exp();
        for (o, e) in out.iter().zip(b.e0()) {
            assert!((o - f * e).abs() < 1e-8);
        }
    }

    #[test]
    fn semigroup_composes() {
        let b = coarse();
        let psi = b.sample(|x| (-x).exp());
        let (a, _) = b.semigroup_apply(&psi, 0.3).unwrap();
        let (ab, _) = b.semigroup_apply(&a, 0.5).unwrap();
        let (direct, _) = b.semigroup_apply(&psi, 0.8).unwrap();
        let worst = ab.iter().zip(&direct).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn contraction() {
        let b = coarse();
        let psi = b.sample(|x| 1.0 / (1.0 + x * x));
        let (proj, _) = b.semigroup_apply(&psi, 0.0).unwrap();
        for s in [0.1, 0.5, 2.0] {
            let (out, _) = b.semigroup_apply(&psi, s).unwrap();
            let lhs = b.inner(&out, &out).sqrt();
            let rhs = (-b.rho() * s).exp() * b.inner(&proj, &proj).sqrt();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
