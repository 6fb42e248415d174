//! Hitting-time density, the bridge kernel K_l^(μ)(v), χ_v and K̄_l^(ρ).

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{ensure, Error, Result};
use crate::quad::composite_gl;
use crate::rng::RngStream;
use crate::samplers::{besq0_step, bridge_norm_integral, standard_bridge3, ABSORPTION_CAP};
use crate::spectral::{airy, SpectralBasis};
use crate::stats::{combined_se, replicate, McEstimate};

/// Steps of the standard bridge behind every kernel evaluation.
pub const BRIDGE_STEPS: usize = 256;

/// Default level step of Ray–Knight paths, in units of beta^(-1/3).
pub const DEFAULT_DY: f64 = 1.0 / 64.0;

/// Path weights below exp(LOG_WEIGHT_FLOOR) are zero in double precision;
/// left halves stop there instead of running to absorption.
pub const LOG_WEIGHT_FLOOR: f64 = -800.0;

/// Upper end of v-integrals over the kernel.
pub const V_MAX: f64 = 30.0;

/// Density of the first zero of a Brownian motion from l/2.
pub fn alpha_density(l: f64, v: f64) -> f64 {
    l / (8.0 * PI * v * v * v).sqrt() * (-l * l / (8.0 * v)).exp()
}

/// exp(-2∫_0^v V_u du) for the Bessel(3) bridge from l/2 to 0 over [0, v]
/// built from the standard bridge `b`.
#[inline]
pub fn bridge_weight(b: &[[f64; 3]], l: f64, v: f64) -> f64 {
    let sv = v.sqrt();
    (-2.0 * v * sv * bridge_norm_integral(b, 0.5 * l / sv)).exp()
}

fn check_lv(l: f64, v: f64) -> Result<()> {
    ensure(l > 0.0 && l.is_finite(), || format!("l = {l} must be > 0"))?;
    ensure(v > 0.0 && v.is_finite(), || format!("v = {v} must be > 0"))
}

/// K_l^(μ)(v) = α_l(v) e^{μv} E[exp(-2∫V)] by bridge Monte Carlo.
pub fn kernel_k(l: f64, mu: f64, v: f64, n: usize, rng: RngStream) -> Result<McEstimate> {
    kernel_k_with_steps(l, mu, v, n, BRIDGE_STEPS, rng)
}

pub fn kernel_k_with_steps(l: f64, mu: f64, v: f64, n: usize, steps: usize, rng: RngStream) -> Result<McEstimate> {
    check_lv(l, v)?;
    ensure(n >= 1000, || format!("n = {n} must be >= 1000"))?;
    ensure(steps >= 2, || "bridge needs at least two steps".into())?;
    let m = replicate(n, 1, |i, out| {
        let mut r = rng.replica(i as u64).rng();
        let b = standard_bridge3(steps, &mut r);
        out[0] = bridge_weight(&b, l, v);
    });
    Ok(m[0].estimate(rng.seed).scale(alpha_density(l, v) * (mu * v).exp()))
}

/// χ_v(l) = K_l(v) / l.
pub fn chi(v: f64, l: f64, n: usize, rng: RngStream) -> Result<McEstimate> {
    Ok(kernel_k(l, 0.0, v, n, rng)?.scale(1.0 / l))
}

/// Quadrature nodes in v for kernels at fixed l: Gauss–Legendre panels in log v.
pub fn kernel_v_nodes(l: f64, v_lo: f64, v_hi: f64) -> Vec<(f64, f64)> {
    let lo = v_lo.max(l * l / 400.0).max(1e-12);
    if lo >= v_hi {
        return Vec::new();
    }
    let (a, b) = (lo.ln(), v_hi.ln());
    let panels = ((b - a) / 0.5).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
    composite_gl(&breaks, 4)
        .into_iter()
        .map(|(u, w)| {
            let v = u.exp();
            (v, w * v)
        })
        .collect()
}

/// ∫_{v_lo}^{v_hi} K_l^(μ)(v) dv with one shared bridge per replica across the v-nodes.
pub fn kernel_integral(l: f64, mu: f64, v_lo: f64, v_hi: f64, n: usize, rng: RngStream) -> Result<McEstimate> {
    ensure(l > 0.0, || format!("l = {l} must be > 0"))?;
    ensure(v_hi > v_lo && v_lo >= 0.0, || format!("bad v-range [{v_lo}, {v_hi}]"))?;
    let nodes: Vec<(f64, f64, f64)> = kernel_v_nodes(l, v_lo, v_hi)
        .into_iter()
        .map(|(v, w)| (v, w * alpha_density(l, v) * (mu * v).exp(), 0.5 * l / v.sqrt()))
        .collect();
    let m = replicate(n, 1, |i, out| {
        let mut r = rng.replica(i as u64).rng();
        let b = standard_bridge3(BRIDGE_STEPS, &mut r);
        out[0] = nodes
            .iter()
            .map(|&(v, w, a)| w * (-2.0 * v * v.sqrt() * bridge_norm_integral(&b, a)).exp())
            .sum();
    });
    Ok(m[0].estimate(rng.seed))
}

/// Running trapezoid of a BESQ(0) path from `l` on a `dy` grid until absorption:
/// returns (∫(-Y² + μY) dy, ∫Y dy), stopping early once the first integral
/// drops below [`LOG_WEIGHT_FLOOR`] or the area exceeds `area_cap`.
pub fn besq0_exponent<R: Rng + ?Sized>(
    l: f64,
    mu: f64,
    dy: f64,
    area_cap: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let g = |y: f64| mu * y - y * y;
    let mut y = l;
    let mut expo = 0.5 * dy * g(y);
    let mut area = 0.5 * dy * y;
    let mut steps = 0;
    while y > 0.0 {
        steps += 1;
        if steps > ABSORPTION_CAP {
            return Err(Error::NotAbsorbed { start: l, steps });
        }
        let next = besq0_step(y, dy, rng);
        // trapezoid: interior nodes get full weight, the final zero contributes 0
        expo += 0.5 * dy * g(next) + if next > 0.0 { 0.5 * dy * g(next) } else { 0.0 };
        area += dy * next;
        y = next;
        if expo < LOG_WEIGHT_FLOOR || area > area_cap {
            break;
        }
    }
    Ok((expo, area))
}

/// E[exp(∫_0^∞(-Y² + μY) dy) 1{∫Y ≤ area_cap}] over BESQ(0) paths from l.
pub fn besq0_weighted(l: f64, mu: f64, dy: f64, area_cap: f64, n: usize, rng: RngStream) -> Result<McEstimate> {
    ensure(l >= 0.0, || format!("l = {l} must be >= 0"))?;
    ensure(dy > 0.0, || format!("dy = {dy} must be > 0"))?;
    let failure = std::sync::Mutex::new(None);
    let m = replicate(n, 1, |i, out| {
        let mut r = rng.replica(i as u64).rng();
        match besq0_exponent(l, mu, dy, area_cap, &mut r) {
            Ok((e, area)) => out[0] = if area <= area_cap { e.exp() } else { 0.0 },
            Err(err) => *failure.lock().unwrap() = Some(err),
        }
    });
    if let Some(err) = failure.into_inner().unwrap() {
        return Err(err);
    }
    Ok(m[0].estimate(rng.seed))
}

/// Ai(2^{-1/3}(l - ρ)) / Ai(-2^{-1/3} ρ), i.e. f(l/2)/f(0) with f(x) = Ai(2^{-1/3}(2x - ρ)).
pub fn airy_ratio_bound(l: f64, rho: f64) -> f64 {
    let c = 2f64.powf(-1.0 / 3.0);
    airy(c * (l - rho)) / airy(-c * rho)
}

/// Smallest l on a 0.05 grid where [`airy_ratio_bound`] drops below `tol`.
pub fn airy_truncation(rho: f64, tol: f64) -> f64 {
    let mut l = 0.0;
    while airy_ratio_bound(l, rho) >= tol && l < 100.0 {
        l += 0.05;
    }
    l
}

/// Two independent estimates of the same quantity.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TwoRoute {
    pub direct: McEstimate,
    pub quadrature: McEstimate,
}

impl TwoRoute {
    pub fn combined_se(&self) -> f64 {
        combined_se(self.direct.stderr, self.quadrature.stderr)
    }

    /// |a - b| / combined SE.
    pub fn z(&self) -> f64 {
        let se = self.combined_se();
        if se == 0.0 {
            return if self.direct.mean == self.quadrature.mean { 0.0 } else { f64::INFINITY };
        }
        (self.direct.mean - self.quadrature.mean).abs() / se
    }

    /// Errors when the routes differ by more than `k` combined standard errors.
    pub fn checked(self, k: f64) -> Result<Self> {
        if self.z() > k {
            Err(Error::Consistency {
                route_a: self.direct.mean,
                route_b: self.quadrature.mean,
                stderr: self.combined_se(),
            })
        } else {
            Ok(self)
        }
    }
}

/// K̄_l^(ρ) by (a) BESQ(0) Monte Carlo and (b) v-quadrature of K_l^(ρ).
pub fn kbar_rho(l: f64, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<TwoRoute> {
    ensure(l > 0.0, || format!("l = {l} must be > 0"))?;
    let rho = basis.rho();
    let direct = besq0_weighted(l, rho, DEFAULT_DY, f64::INFINITY, n, rng.fork(1))?;
    let quadrature = kernel_integral(l, rho, 0.0, V_MAX, n, rng.fork(2))?;
    TwoRoute { direct, quadrature }.checked(4.0)
}
