//! Suites for the kernel-level identities: the BESQ(0) hitting identity, the
//! A-functionals, the martingales, the killed semigroup and the constant K.

use super::report::{Recorder, SuiteReport};
use crate::error::Result;
use crate::kernels::kernel::{kernel_integral, DEFAULT_DY};
use crate::kernels::projection::{projection_curve, JUV_DT};
use crate::kernels::{
    a_total, airy_ratio_bound, besq0_weighted, j_t_split, j_uv_mc_levels, k_constant, k_constant_with,
    martingale_levels, mean_density_ds, ModelParams,
};
use crate::localtime::CompactProfile;
use crate::rng::RngStream;
use crate::spectral::{semigroup_mc, SpectralBasis};
use crate::stats::McEstimate;

/// Bump profile used by the suites: a tent of height 1 on [-½, ½], M = 1.
pub fn default_bump() -> CompactProfile {
    CompactProfile::bump(0.0, 0.5, 1.0, 1.0).expect("valid bump")
}

/// Product of independent estimates with the first-order standard error.
pub fn product(a: McEstimate, b: McEstimate, c: f64) -> McEstimate {
    let mean = a.mean * b.mean * c;
    McEstimate {
        mean,
        stderr: mean.abs() * (a.stderr / a.mean).hypot(b.stderr / b.mean),
        n: a.n.min(b.n),
        seed: a.seed,
    }
}

/// E[exp(∫(-Y² + μY)) g(∫Y)] over BESQ(0) from l = 1 against ∫g(v) K_1^(μ)(v) dv
/// for g = 1_[0,1], and K̄_l^(ρ) against its Airy-ratio bound.
pub fn verify_lemma_jj(basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("lemma_jj", rng.seed);
    let rho = basis.rho();
    for (i, (label, mu)) in [("mu_0", 0.0), ("mu_rho", rho)].into_iter().enumerate() {
        let lhs = besq0_weighted(1.0, mu, DEFAULT_DY, 1.0, n, rng.fork(10 + i as u64))?;
        let rhs = kernel_integral(1.0, mu, 0.0, 1.0, n, rng.fork(20 + i as u64))?;
        rec.agree(format!("identity.{label}"), lhs, rhs, 3.0);
    }
    for (j, l) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let kbar = besq0_weighted(l, rho, DEFAULT_DY, f64::INFINITY, n, rng.fork(30 + j as u64))?;
        rec.at_most(format!("kbar_bound.l_{l}"), kbar.mean, airy_ratio_bound(l, rho), 3.0 * kbar.stderr);
    }
    Ok(rec.finish())
}

/// M-independence and β-scaling of A^(β,M)(f), and its positivity.
pub fn verify_afunc(basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("afunc", rng.seed);
    let rho = basis.rho();
    let f = default_bump();
    let p1 = ModelParams::new(1.0, rho, 1.0)?;
    let a1 = a_total(&p1, &f, basis, n, rng.fork(1))?;
    let a2 = a_total(&p1.with_m(2.0)?, &f, basis, n, rng.fork(1))?;
    rec.agree("m_independence", a1, a2, 3.0);
    let p = ModelParams::new(2.0, rho, 1.0)?;
    let alpha = p.alpha;
    let q = ModelParams::new(1.0, rho, alpha)?;
    let lhs = a_total(&q, &f.scaled(alpha), basis, n, rng.fork(2))?;
    let rhs = a_total(&p, &f, basis, n, rng.fork(2))?.scale(alpha);
    rec.agree("scaling", lhs, rhs, 3.0);
    rec.at_least("positive.beta_1", a1.mean, 3.0 * a1.stderr, 0.0);
    rec.at_least("positive.beta_2", rhs.mean, 3.0 * rhs.stderr, 0.0);
    rec.note(format!("A(1,1) = {:.6} ± {:.6}, A(1,2) = {:.6} ± {:.6}", a1.mean, a1.stderr, a2.mean, a2.stderr));
    Ok(rec.finish())
}

/// Flatness of the e_0-compensated exponential martingale and E[D_s] = 1.
#[allow(clippy::too_many_arguments)]
pub fn verify_martingale(
    basis: &SpectralBasis,
    n: usize,
    s: f64,
    dt: f64,
    outer: usize,
    den_n: usize,
    rng: RngStream,
) -> Result<SuiteReport> {
    let mut rec = Recorder::new("martingale", rng.seed);
    let p = ModelParams::new(1.0, basis.rho(), 1.0)?;
    let e0 = basis.e0_at(1.0);
    let levels = martingale_levels(1.0, &p, &[0.5, 1.5], basis, n, rng.fork(1))?;
    for (x, est) in [0.5, 1.5].iter().zip(&levels) {
        rec.near(format!("flat.x_{x}"), *est, e0, 3.0);
    }
    let d = mean_density_ds(&p, s, dt, outer, 4, den_n, basis, rng.fork(2))?;
    rec.near("mean_density", d.ratio, 1.0, 3.0);
    rec.note(format!(
        "E[D_s] = {:.5} ± {:.5} at s = {s}, dt = {dt}, {outer} outer paths",
        d.ratio.mean, d.ratio.stderr
    ));
    Ok(rec.finish())
}

/// Killed semigroup by spectral expansion and by Bessel Monte Carlo, and the
/// stabilization of e^{ρu} J_l(u, v).
pub fn verify_semigroup(basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("semigroup", rng.seed);
    let rho = basis.rho();
    let psi = |x: f64| (-x).exp();
    let coef = basis.coefficients(&basis.sample(psi));
    for (i, &(l, s)) in [(0.5, 1.0), (1.0, 1.0), (2.0, 1.5)].iter().enumerate() {
        let spectral = basis.propagate_at(&coef, s, l);
        let mc = semigroup_mc(l, &psi, s, n, JUV_DT, rng.fork(i as u64))?;
        rec.near(format!("spectral_vs_mc.l_{l}_s_{s}"), mc, spectral, 3.0);
    }
    let (l, v) = (1.0, 1.0);
    let target = projection_curve(&[v], basis, n, rng.fork(10))?[0].scale((-rho * v).exp() * basis.e0_at(l));
    let us = [4.0, 6.0];
    let js = j_uv_mc_levels(l, &us, v, n, JUV_DT, rng.fork(11))?;
    let comp: Vec<McEstimate> = js.iter().zip(&us).map(|(j, u)| j.scale((rho * u).exp())).collect();
    for (c, u) in comp.iter().zip(&us) {
        rec.agree(format!("juv_limit.u_{u}"), *c, target, 3.0);
    }
    rec.agree("juv_drift", comp[0], comp[1], 1.0);
    Ok(rec.finish())
}

/// e^{ρt} J_l(t) / e_0(l) at t = 8 across l and against K.
pub fn verify_k_constant(basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("kconst", rng.seed);
    let ls = [0.5, 2.0];
    let t = 8.0;
    let split = j_t_split(&ls, t, basis, n, rng.fork(1))?;
    let norm: Vec<McEstimate> = split.iter().map(|s| s.total.scale(1.0 / basis.e0_at(s.l))).collect();
    rec.agree("across_l", norm[0], norm[1], 3.0);
    let k = k_constant_with(basis, crate::kernels::projection::K_V_MAX, n, rng.fork(2))?;
    for (l, est) in ls.iter().zip(&norm) {
        rec.agree(format!("vs_k.l_{l}"), *est, k.k, 4.0);
    }
    let tail = (-0.6 * k.v_max).exp() / 0.6;
    rec.at_most(
        "truncation",
        k.doubling_change.mean.abs(),
        0.0,
        3.0 * k.doubling_change.stderr + 1e-6,
    );
    rec.note(format!(
        "K = {:.5} ± {:.5}; v-truncation at {} with e^(-0.6 v) tail budget {tail:.2e}",
        k.k.mean, k.k.stderr, k.v_max
    ));
    Ok(rec.finish())
}

/// Shape of e^{ρt} J_l(t) and its split at (t - 2)₊.
pub fn verify_prop84_shape(l: f64, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("prop84", rng.seed);
    let e0 = basis.e0_at(l);
    let k = k_constant(basis, n, rng.fork(1))?;
    let t = 6.0;
    let s = j_t_split(&[l], t, basis, n, rng.fork(2))?[0];
    let rel = (s.a.mean + s.b.mean - s.total.mean).abs() / s.total.mean;
    rec.at_most("split_additivity", rel, 0.0, 1e-10);
    rec.at_most("b_small", s.b.mean, 0.01 * s.total.mean, 0.0);
    rec.agree("a_limit", s.a, k.scale(e0), 3.0);
    let mut worst: f64 = 0.0;
    for (i, tt) in [0.25, 0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let v = j_t_split(&[l], tt, basis, n / 4, rng.fork(10 + i as u64))?[0].total.mean;
        worst = worst.max(v / (1.0 + 1.0 / tt.sqrt()));
    }
    worst = worst.max(s.total.mean / (1.0 + 1.0 / t.sqrt()));
    rec.at_most("shape_bound", worst, 2.0 * k.mean * e0, 0.0);
    rec.note(format!(
        "t = {t}: e^(ρt)J = {:.5}, A = {:.5} ± {:.5}, B = {:.5}, K e0(l) = {:.5}",
        s.total.mean,
        s.a.mean,
        s.a.stderr,
        s.b.mean,
        k.mean * e0
    ));
    Ok(rec.finish())
}
