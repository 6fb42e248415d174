//! Suites built on closed forms: spectrum, Airy zeros, the excursion-area
//! series, the D_1 law and structural invariants of the samplers.

use std::f64::consts::PI;

use super::report::{Recorder, SuiteReport};
use super::walk::{lattice_steps, LatticeWalk};
use crate::error::Result;
use crate::kernels::kernel::{alpha_density, bridge_weight, BRIDGE_STEPS};
use crate::kernels::{cdf_d1, density_d1};
use crate::localtime::local_time_field;
use crate::quad::adaptive_simpson;
use crate::rng::RngStream;
use crate::samplers::{bridge_norm_integral, sample_besq, sample_brownian, sample_y, standard_bridge3};
use crate::spectral::{airy, airy_zeros, build_basis, AiryTable};
use crate::stats::{collect_samples, ks_one_sample, replicate};

/// Steps of the bridges behind the excursion-area estimates.
pub const EXCURSION_STEPS: usize = 1024;

/// √(2π) λ Σ_{k<terms} exp(-u_k (λ²/2)^{1/3}).
pub fn excursion_series(table: &AiryTable, lambda: f64, terms: usize) -> f64 {
    let c = (0.5 * lambda * lambda).cbrt();
    (0..terms).map(|k| (-table.zero(k) * c).exp()).sum::<f64>() * (2.0 * PI).sqrt() * lambda
}

/// The series summed until its terms drop below 1e-18.
pub fn excursion_series_converged(table: &AiryTable, lambda: f64) -> f64 {
    let c = (0.5 * lambda * lambda).cbrt();
    let mut sum = 0.0;
    for k in 0..50_000_000 {
        let term = (-table.zero(k) * c).exp();
        sum += term;
        if term < 1e-18 {
            break;
        }
    }
    sum * (2.0 * PI).sqrt() * lambda
}

/// Principal eigenvalue at step h and h/2, orthonormality and residuals.
pub fn verify_spectral(x_max: f64, h: f64, n_eig: usize) -> Result<SuiteReport> {
    let mut rec = Recorder::new("spectral", 0);
    let coarse = build_basis(x_max, h, n_eig)?;
    let fine = build_basis(x_max, 0.5 * h, n_eig)?;
    rec.within("rho0.interval", coarse.rho(), 2.185, 0.005);
    rec.at_most("rho0.refinement", (coarse.rho() - fine.rho()).abs(), 0.0, 1e-3);
    rec.at_most("orthonormality", coarse.orthonormality_defect(), 0.0, 1e-8);
    let worst = coarse.residuals.iter().copied().fold(0.0, f64::max);
    rec.at_most("residual", worst, 0.0, crate::spectral::basis::RESIDUAL_TOL);
    rec.note(format!("rho0(h) = {:.12}, rho0(h/2) = {:.12}", coarse.rho(), fine.rho()));
    Ok(rec.finish())
}

/// First Airy zero and its relation to ρ.
pub fn verify_airy(rho: f64) -> Result<SuiteReport> {
    let mut rec = Recorder::new("airy", 0);
    let table = airy_zeros(1)?;
    let u1 = table.zeros[0];
    let rate = 2f64.cbrt() * u1;
    rec.at_most("airy.zero", airy(-u1).abs(), 0.0, 1e-10);
    rec.at_least("airy.rate_bound", rate, 2.91, 0.0);
    rec.at_most("airy.rho_below_rate", rho, rate, 0.0);
    rec.note(format!("u1 = {u1:.15}, 2^(1/3) u1 = {rate:.15}"));
    Ok(rec.finish())
}

/// Bridge Monte Carlo of E[exp(-λ ∫_0^1 V)] for the normalized excursion
/// against the Airy-zero series, and the large-v decay rate of K_1.
pub fn verify_airy_excursion(n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("excursion", rng.seed);
    let table = airy_zeros(20)?;
    let lambdas: [f64; 4] = [1.0, 2.0, 5.0, 1e-3];
    let m = replicate(n, lambdas.len(), |i, out| {
        let b = standard_bridge3(EXCURSION_STEPS, &mut rng.replica(i as u64).rng());
        let area = bridge_norm_integral(&b, 0.0);
        for (o, l) in out.iter_mut().zip(&lambdas) {
            *o = (-l * area).exp();
        }
    });
    for (k, &l) in lambdas[..3].iter().enumerate() {
        let series = excursion_series(&table, l, 20);
        rec.near(format!("excursion.lambda_{l}"), m[k].estimate(rng.seed), series, 3.0);
    }
    let small = excursion_series_converged(&table, 1e-3);
    rec.within("excursion.small_lambda_series", small, 1.0, 1e-3);
    rec.near("excursion.small_lambda_mc", m[3].estimate(rng.seed), small, 3.0);

    // K_1(v) = α_1(v) E[exp(-2∫V)] on shared bridges
    let vs = [4.0, 5.0, 6.0, 7.0, 8.0];
    let n_rate = 10 * n;
    let k1 = replicate(n_rate, vs.len(), |i, out| {
        let b = standard_bridge3(BRIDGE_STEPS, &mut rng.fork(1).replica(i as u64).rng());
        for (o, &v) in out.iter_mut().zip(&vs) {
            *o = alpha_density(1.0, v) * bridge_weight(&b, 1.0, v);
        }
    });
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (mom, &v) in k1.iter().zip(&vs) {
        let rel = mom.stderr() / mom.mean;
        let w = 1.0 / (rel * rel);
        let y = mom.mean.ln();
        sw += w;
        swx += w * v;
        swy += w * y;
        swxx += w * v * v;
        swxy += w * v * y;
    }
    let slope = (sw * swxy - swx * swy) / (sw * swxx - swx * swx);
    let rate = -2f64.cbrt() * table.zeros[0];
    rec.within("excursion.k1_decay_rate", slope, rate, 0.05 * rate.abs());
    rec.note(format!("K_1 decay fitted on v in {vs:?} with {n_rate} bridges"));
    Ok(rec.finish())
}

/// The law D_1 of ∫_0^1 BESQ(2) from 0: normalization, functional equation,
/// and a KS test against simulated areas.
pub fn verify_d1(n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("d1", rng.seed);
    let total = adaptive_simpson(&density_d1, 0.0, 1.0, 1e-13) + adaptive_simpson(&density_d1, 1.0, 40.0, 1e-13);
    rec.within("d1.normalization", total, 1.0, 1e-8);
    let residual = [0.5, 1.0, 2.0]
        .iter()
        .map(|&x| (density_d1(x) - (2.0 / (PI * x)).powf(1.5) * density_d1(4.0 / (PI * PI * x))).abs())
        .fold(0.0, f64::max);
    rec.at_most("d1.functional_equation", residual, 0.0, 1e-10);
    let dy = 1.0 / 256.0;
    let areas = collect_samples(n, |i| match sample_besq(2, 0.0, 1.0, dy, rng.replica(i as u64)) {
        Ok(p) => p.integral(|y| y),
        Err(_) => f64::NAN,
    });
    let ks = ks_one_sample(&areas, cdf_d1);
    rec.at_least("d1.ks_p_value", ks.p_value, 0.01, 0.0);
    rec.note(format!("KS statistic {:.3e} over {n} areas", ks.statistic));
    Ok(rec.finish())
}

/// Occupation identity of local-time fields and BESQ(0) absorption.
pub fn verify_structural(n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("structural", rng.seed);
    let mut worst: f64 = 0.0;
    for (k, &(t, dt, dy)) in [(0.5, 1.0 / 1024.0, 1.0 / 64.0), (1.0, 1.0 / 300.0, 0.01), (4.0, 1.0 / 1024.0, 1.0 / 128.0)]
        .iter()
        .enumerate()
    {
        for i in 0..n {
            let path = sample_brownian(t, dt, rng.fork(k as u64).replica(i as u64))?;
            let field = local_time_field(&path, dy)?;
            worst = worst.max((field.mass() - t).abs() / t);
        }
    }
    let dy = 1.0 / 64.0;
    let steps = lattice_steps(1.0, dy)?;
    let mut walk = LatticeWalk::new(dy, steps)?;
    for i in 0..n {
        walk.reset();
        walk.advance(steps, &mut rng.fork(7).replica(i as u64).rng());
        let lo = -(steps as i64);
        let mass: f64 = (lo..=steps as i64).map(|k| walk.local_time(k)).sum::<f64>() * dy;
        worst = worst.max((mass - 1.0).abs());
    }
    rec.at_most("occupation_identity", worst, 0.0, 1e-10);

    let absorbed_forever = |v: &[f64]| v.iter().skip_while(|&&x| x > 0.0).all(|&x| x == 0.0);
    let mut violations = 0usize;
    let mut negative = 0usize;
    for i in 0..n {
        let start = 0.25 + 2.0 * i as f64 / n as f64;
        let p = sample_besq(0, start, 3.0, 1.0 / 64.0, rng.fork(8).replica(i as u64))?;
        let y = sample_y(start, 1.0, 1.0 / 64.0, rng.fork(9).replica(i as u64))?;
        violations += usize::from(!absorbed_forever(&p.values)) + usize::from(!absorbed_forever(&y.left.values));
        violations += usize::from(*y.left.values.last().unwrap() != 0.0);
        negative += p.values.iter().chain(&y.left.values).chain(&y.right.values).filter(|&&x| x < 0.0).count();
    }
    rec.at_most("besq0_absorption", violations as f64, 0.0, 0.0);
    rec.at_most("besq_nonnegative", negative as f64, 0.0, 0.0);
    Ok(rec.finish())
}
