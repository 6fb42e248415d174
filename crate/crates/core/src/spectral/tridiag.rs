//! Lowest eigenpairs of a real symmetric tridiagonal matrix.
//!
//! Eigenvalues by Sturm-sequence bisection, eigenvectors by inverse iteration
//! on a pivoted LU factorization, re-orthogonalized against earlier vectors.

/// Symmetric tridiagonal matrix with `diag.len() == off.len() + 1`.
#[derive(Clone, Debug)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let denom = if q == 0.0 { f64::EPSILON * (self.off[i - 1].abs() + 1.0) } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The k-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Solves (T - shift I) x = b with partial pivoting; `b` is overwritten by x.
    fn shifted_solve(&self, shift: f64, b: &mut [f64]) {
        let n = self.diag.len();
        // Rows of U carry up to two superdiagonals after pivoting.
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut dl: Vec<f64> = self.off.clone();
        let tiny = 1e-300;
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                let piv = if d[i] == 0.0 { tiny } else { d[i] };
                let m = dl[i] / piv;
                dl[i] = m;
                d[i + 1] -= m * du[i];
                b[i + 1] -= m * b[i];
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                let m = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = m;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - m * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -m;
                }
                b.swap(i, i + 1);
                b[i + 1] -= m * b[i];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
    }

    /// Lowest `count` eigenpairs with unit-norm, mutually orthogonal vectors.
    pub fn lowest_eigenpairs(&self, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.diag.len();
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(1.0);
        let mut values = Vec::with_capacity(count);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
        for k in 0..count.min(n) {
            let lambda = self.eigenvalue(k);
            let shift = lambda + 4.0 * f64::EPSILON * scale;
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7 + k * 13) % 11) as f64 / 11.0).collect();
            for _ in 0..4 {
                self.shifted_solve(shift, &mut x);
                for prev in &vectors {
                    let dot: f64 = prev.iter().zip(&x).map(|(p, v)| p * v).sum();
                    x.iter_mut().zip(prev).for_each(|(v, p)| *v -= dot * p);
                }
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= norm);
            }
            values.push(lambda);
            vectors.push(x);
        }
        (values, vectors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal {
            diag: vec![2.0; n],
            off: vec![-1.0; n - 1],
        }
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 200;
        let t = laplacian(n);
        let (vals, vecs) = t.lowest_eigenpairs(5);
        for k in 0..5 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((vals[k] - exact).abs() < 1e-13, "k={k}");
            let r = t.matvec(&vecs[k]);
            let res: f64 = r.iter().zip(&vecs[k]).map(|(a, b)| (a - vals[k] * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-10);
            for j in 0..k {
                let dot: f64 = vecs[j].iter().zip(&vecs[k]).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sturm_count_matches() {
        let t = laplacian(50);
        assert_eq!(t.count_below(-0.1), 0);
        assert_eq!(t.count_below(4.1), 50);
        assert_eq!(t.count_below(2.0 + 1e-9), 25);
    }
}
