//! Projections c_n(v) = <χ_v|e_n> and the functionals built from them:
//! the constant K, J_l(t) and the spectral route of J_l(u, v).
//!
//! With l = √v s the hitting density becomes v-free,
//!   c_n(v) = v^{-1/2} ∫ g(s) E[exp(-2 v^{3/2} I(s/2))] e_n(√v s) ds,
//! g(s) = s e^{-s²/8} / √(8π), I(a) = ∫_0^1 |(1-u) a e1 + b_u| du,
//! so one standard bridge per replica serves every v at once.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::kernel::{bridge_weight, BRIDGE_STEPS};
use crate::error::{ensure, Result};
use crate::quad::{composite_gl, gauss_legendre_on};
use crate::rng::RngStream;
use crate::samplers::{bridge_norm_integral, standard_bridge3};
use crate::spectral::SpectralBasis;
use crate::stats::{replicate, McEstimate, Moments};

/// Largest number of eigenmodes used in expansions.
pub const MAX_MODES: usize = 16;

/// Truncation of the v-integral defining K; the integrand is below 1e-8 there.
pub const K_V_MAX: f64 = 26.0;

const S_ORDER: usize = 6;
const W_PANEL: f64 = 0.25;

fn s_rule() -> Vec<(f64, f64)> {
    let mut breaks: Vec<f64> = (0..=16).map(|i| 0.5 * i as f64).collect();
    breaks.extend([9.0, 10.0, 11.0, 12.0, 13.0]);
    composite_gl(&breaks, S_ORDER)
        .into_iter()
        .map(|(s, w)| (s, w * s * (-s * s / 8.0).exp() / (8.0 * PI).sqrt()))
        .collect()
}

/// Gauss–Legendre nodes in v on [v_lo, v_hi] under v = w², weights include dv/dw.
pub fn sqrt_v_rule(v_lo: f64, v_hi: f64) -> Vec<(f64, f64)> {
    let (a, b) = (v_lo.max(0.0).sqrt(), v_hi.sqrt());
    if b <= a {
        return Vec::new();
    }
    let panels = ((b - a) / W_PANEL).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
    composite_gl(&breaks, S_ORDER)
        .into_iter()
        .map(|(w, wt)| (w * w, 2.0 * w * wt))
        .collect()
}

/// Nodes in v on [v_lo, v_hi] refined geometrically toward v_hi, where the
/// higher modes of e^{-ρ_n (t - v)} concentrate.
pub fn end_refined_rule(v_lo: f64, v_hi: f64) -> Vec<(f64, f64)> {
    let len = v_hi - v_lo;
    if len <= 0.0 {
        return Vec::new();
    }
    let mut gaps = vec![0.0];
    let mut g = 1e-3_f64.min(len / 4.0);
    while g < len {
        gaps.push(g);
        g *= 2.0;
    }
    gaps.push(len);
    gaps.windows(2)
        .flat_map(|p| gauss_legendre_on(S_ORDER, v_hi - p[1], v_hi - p[0]))
        .collect()
}

/// Per-replica projections c_n(v_j) of χ_{v_j} onto the lowest eigenmodes.
pub struct ProjectionBank {
    pub v_nodes: Vec<f64>,
    pub modes: usize,
    half_s: Vec<f64>,
    /// table[(j * modes + m) * S + k] = weight_k e_m(√v_j s_k) / √v_j
    table: Vec<f64>,
    /// 2 v_j^{3/2}
    rates: Vec<f64>,
}

impl ProjectionBank {
    pub fn new(basis: &SpectralBasis, v_nodes: Vec<f64>, modes: usize) -> Result<Self> {
        ensure(modes >= 1 && modes <= basis.len(), || {
            format!("modes = {modes} must lie in 1..={}", basis.len())
        })?;
        ensure(v_nodes.iter().all(|&v| v > 0.0 && v.is_finite()), || "v-nodes must be > 0".into())?;
        let rule = s_rule();
        let ns = rule.len();
        let mut table = vec![0.0; v_nodes.len() * modes * ns];
        for (j, &v) in v_nodes.iter().enumerate() {
            let sv = v.sqrt();
            for m in 0..modes {
                let e = &basis.eigenfunctions[m];
                let row = &mut table[(j * modes + m) * ns..(j * modes + m + 1) * ns];
                for (t, &(s, w)) in row.iter_mut().zip(&rule) {
                    *t = w * basis.interpolate(e, sv * s) / sv;
                }
            }
        }
        Ok(Self {
            rates: v_nodes.iter().map(|v| 2.0 * v * v.sqrt()).collect(),
            v_nodes,
            modes,
            half_s: rule.iter().map(|&(s, _)| 0.5 * s).collect(),
            table,
        })
    }

    /// Fills `c[j * modes + m]` with one replica of c_m(v_j).
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, c: &mut [f64]) {
        let bridge = standard_bridge3(BRIDGE_STEPS, rng);
        let areas: Vec<f64> = self.half_s.iter().map(|&a| bridge_norm_integral(&bridge, a)).collect();
        let ns = areas.len();
        let mut weights = vec![0.0; ns];
        for (j, &rate) in self.rates.iter().enumerate() {
            weights.iter_mut().zip(&areas).for_each(|(w, a)| *w = (-rate * a).exp());
            for m in 0..self.modes {
                let row = &self.table[(j * self.modes + m) * ns..(j * self.modes + m + 1) * ns];
                c[j * self.modes + m] = row.iter().zip(&weights).map(|(t, w)| t * w).sum();
            }
        }
    }

    /// Runs `n` replicas; `f(c, out)` maps the projections to `width` outputs.
    pub fn run<F>(&self, n: usize, rng: RngStream, width: usize, f: F) -> Vec<Moments>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        replicate(n, width, |i, out| {
            let mut r = rng.replica(i as u64).rng();
            let mut c = vec![0.0; self.v_nodes.len() * self.modes];
            self.fill(&mut r, &mut c);
            f(&c, out);
        })
    }
}

fn check_n(n: usize) -> Result<()> {
    ensure(n >= 2, || format!("n = {n} must be >= 2"))
}

/// e^{ρv} <χ_v|e_0> at each v.
pub fn projection_curve(vs: &[f64], basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<Vec<McEstimate>> {
    check_n(n)?;
    let bank = ProjectionBank::new(basis, vs.to_vec(), 1)?;
    let rho = basis.rho();
    let scale: Vec<f64> = vs.iter().map(|v| (rho * v).exp()).collect();
    let m = bank.run(n, rng, vs.len(), |c, out| {
        out.iter_mut().zip(c).zip(&scale).for_each(|((o, c), s)| *o = c * s);
    });
    Ok(m.iter().map(|m| m.estimate(rng.seed)).collect())
}

/// <χ_v|e_n> for n < modes.
pub fn chi_coefficients(v: f64, basis: &SpectralBasis, modes: usize, n: usize, rng: RngStream) -> Result<Vec<McEstimate>> {
    check_n(n)?;
    let bank = ProjectionBank::new(basis, vec![v], modes)?;
    let m = bank.run(n, rng, modes, |c, out| out.copy_from_slice(c));
    Ok(m.iter().map(|m| m.estimate(rng.seed)).collect())
}

/// K truncated at `v_max` and the change from doubling the truncation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KConstant {
    pub k: McEstimate,
    pub v_max: f64,
    /// ∫_{v_max}^{2 v_max}, estimated on the same replicas
    pub doubling_change: McEstimate,
}

/// K = ∫_0^∞ e^{ρv} <χ_v|e_0> dv.
pub fn k_constant(basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<McEstimate> {
    Ok(k_constant_with(basis, K_V_MAX, n, rng)?.k)
}

pub fn k_constant_with(basis: &SpectralBasis, v_max: f64, n: usize, rng: RngStream) -> Result<KConstant> {
    check_n(n)?;
    ensure(v_max > 0.0, || format!("v_max = {v_max} must be > 0"))?;
    let rho = basis.rho();
    let inner = sqrt_v_rule(0.0, v_max);
    let outer = sqrt_v_rule(v_max, 2.0 * v_max);
    let split = inner.len();
    let (vs, ws): (Vec<f64>, Vec<f64>) = inner
        .iter()
        .chain(&outer)
        .map(|&(v, w)| (v, w * (rho * v).exp()))
        .unzip();
    let bank = ProjectionBank::new(basis, vs, 1)?;
    let m = bank.run(n, rng, 2, |c, out| {
        out[0] = c[..split].iter().zip(&ws).map(|(c, w)| c * w).sum();
        out[1] = c[split..].iter().zip(&ws[split..]).map(|(c, w)| c * w).sum();
    });
    Ok(KConstant {
        k: m[0].estimate(rng.seed),
        v_max,
        doubling_change: m[1].estimate(rng.seed),
    })
}

/// e^{ρt} J_l(t) split at v = (t - 2)₊ into the long-propagation part A
/// (killing window u ≥ 2) and the remainder B.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JtSplit {
    pub l: f64,
    pub t: f64,
    pub a: McEstimate,
    pub b: McEstimate,
    pub total: McEstimate,
}

fn modes_for(basis: &SpectralBasis) -> usize {
    basis.len().min(MAX_MODES)
}

/// v-nodes for J(t): √v-rule on [0, (t-2)₊] (or [0, t/2] when t ≤ 2) and an
/// end-refined rule on the rest. Returns (nodes, index where B starts).
fn jt_rule(t: f64) -> (Vec<(f64, f64)>, usize) {
    let cut = (t - 2.0).max(0.0);
    if cut > 0.0 {
        let a = sqrt_v_rule(0.0, cut);
        let split = a.len();
        (a.into_iter().chain(end_refined_rule(cut, t)).collect(), split)
    } else {
        let mid = 0.5 * t;
        let nodes = sqrt_v_rule(0.0, mid).into_iter().chain(end_refined_rule(mid, t)).collect();
        (nodes, 0)
    }
}

/// Compensated e^{ρt} J_l(t) and its A/B split for every l, on shared replicas.
pub fn j_t_split(ls: &[f64], t: f64, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<Vec<JtSplit>> {
    check_n(n)?;
    ensure(t > 0.0 && t.is_finite(), || format!("t = {t} must be > 0"))?;
    ensure(ls.iter().all(|&l| l > 0.0), || "l must be > 0".into())?;
    let modes = modes_for(basis);
    let rho = basis.rho();
    let (rule, split) = jt_rule(t);
    let vs: Vec<f64> = rule.iter().map(|r| r.0).collect();
    // coef[(i * J + j) * modes + m] = w_j e^{ρt} e^{-ρ_m (t - v_j)} e_m(l_i)
    let nj = rule.len();
    let mut coef = vec![0.0; ls.len() * nj * modes];
    for (i, &l) in ls.iter().enumerate() {
        for (j, &(v, w)) in rule.iter().enumerate() {
            for m in 0..modes {
                let decay = (rho * t - basis.eigenvalues[m] * (t - v)).exp();
                coef[(i * nj + j) * modes + m] = w * decay * basis.interpolate(&basis.eigenfunctions[m], l);
            }
        }
    }
    let bank = ProjectionBank::new(basis, vs, modes)?;
    let width = 3 * ls.len();
    let m = bank.run(n, rng, width, |c, out| {
        for i in 0..ls.len() {
            let row = &coef[i * nj * modes..(i + 1) * nj * modes];
            let a: f64 = row[..split * modes].iter().zip(&c[..split * modes]).map(|(x, y)| x * y).sum();
            let b: f64 = row[split * modes..].iter().zip(&c[split * modes..]).map(|(x, y)| x * y).sum();
            out[3 * i] = a;
            out[3 * i + 1] = b;
            out[3 * i + 2] = a + b;
        }
    });
    Ok(ls
        .iter()
        .enumerate()
        .map(|(i, &l)| JtSplit {
            l,
            t,
            a: m[3 * i].estimate(rng.seed),
            b: m[3 * i + 1].estimate(rng.seed),
            total: m[3 * i + 2].estimate(rng.seed),
        })
        .collect())
}

/// J_l(t) = ∫_0^t J_l(t - v, v) dv (uncompensated).
pub fn j_t(l: f64, t: f64, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<McEstimate> {
    let s = j_t_split(&[l], t, basis, n, rng)?;
    Ok(s[0].total.scale((-basis.rho() * t).exp()))
}

/// Both routes to J_l(u, v).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JuvRoutes {
    pub l: f64,
    pub u: f64,
    pub v: f64,
    /// Bessel(2) Monte Carlo with one inner bridge per outer path
    pub monte_carlo: McEstimate,
    /// Σ_n e^{-ρ_n u} <χ_v|e_n> e_n(l)
    pub spectral: McEstimate,
}

impl JuvRoutes {
    pub fn z(&self) -> f64 {
        let se = self.monte_carlo.stderr.hypot(self.spectral.stderr);
        (self.monte_carlo.mean - self.spectral.mean).abs() / se
    }
}

/// Default Bessel(2) time step for J_l(u, v).
pub const JUV_DT: f64 = 1.0 / 512.0;

/// Spectral route to J_l(u, v).
pub fn j_uv_spectral(l: f64, u: f64, v: f64, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<McEstimate> {
    check_n(n)?;
    ensure(u >= 0.0 && v > 0.0 && l > 0.0, || format!("bad (l, u, v) = ({l}, {u}, {v})"))?;
    let modes = modes_for(basis);
    let coef: Vec<f64> = (0..modes)
        .map(|m| (-basis.eigenvalues[m] * u).exp() * basis.interpolate(&basis.eigenfunctions[m], l))
        .collect();
    let bank = ProjectionBank::new(basis, vec![v], modes)?;
    let m = bank.run(n, rng, 1, |c, out| {
        out[0] = c.iter().zip(&coef).map(|(c, k)| c * k).sum();
    });
    Ok(m[0].estimate(rng.seed))
}

/// Monte-Carlo route: E[e^{-2∫_0^u R} χ_v(2 R_u)] with R a Bessel(2) from l/2
/// and χ_v(2R_u) replaced by one unbiased bridge draw per path.
pub fn j_uv_mc(l: f64, u: f64, v: f64, n: usize, dt: f64, rng: RngStream) -> Result<McEstimate> {
    Ok(j_uv_mc_levels(l, &[u], v, n, dt, rng)?[0])
}

/// [`j_uv_mc`] at several increasing u on shared Bessel(2) paths; the bridge
/// draw at the k-th level uses its own stream.
pub fn j_uv_mc_levels(l: f64, us: &[f64], v: f64, n: usize, dt: f64, rng: RngStream) -> Result<Vec<McEstimate>> {
    check_n(n)?;
    ensure(!us.is_empty() && us[0] > 0.0 && us.windows(2).all(|w| w[0] < w[1]), || {
        "u levels must be positive and increasing".into()
    })?;
    let u_max = us[us.len() - 1];
    ensure(v > 0.0 && l > 0.0, || format!("bad (l, v) = ({l}, {v})"))?;
    ensure(dt > 0.0 && dt <= us[0], || format!("dt = {dt} must lie in (0, {}]", us[0]))?;
    let steps = (u_max / dt - 1e-9).ceil() as usize;
    let h = u_max / steps as f64;
    let marks: Vec<usize> = us.iter().map(|u| (u / h).round() as usize).collect();
    ensure(marks.iter().zip(us).all(|(&k, u)| (k as f64 * h - u).abs() < 1e-9 * u_max), || {
        format!("u levels must be multiples of the step {h}")
    })?;
    let sh = h.sqrt();
    let m = replicate(n, us.len(), |i, out| {
        let base = rng.replica(i as u64);
        let mut r = base.fork(0).rng();
        let (mut x, mut y) = (0.5 * l, 0.0f64);
        let mut integral = 0.0;
        let mut radius = x;
        let mut next = 0;
        for k in 1..=steps {
            let z1: f64 = r.sample(StandardNormal);
            let z2: f64 = r.sample(StandardNormal);
            x += sh * z1;
            y += sh * z2;
            let prev = radius;
            radius = x.hypot(y);
            integral += 0.5 * (prev + radius);
            if k == marks[next] {
                let level = 2.0 * radius;
                let killing = (-2.0 * h * integral).exp();
                let bridge = standard_bridge3(BRIDGE_STEPS, &mut base.fork(next as u64 + 1).rng());
                out[next] = if level > 0.0 {
                    killing * super::kernel::alpha_density(level, v) * bridge_weight(&bridge, level, v) / level
                } else {
                    0.0
                };
                next += 1;
            }
        }
    });
    Ok(m.iter().map(|m| m.estimate(rng.seed)).collect())
}

/// J_l(u, v) by both routes on independent streams.
pub fn j_uv(l: f64, u: f64, v: f64, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<JuvRoutes> {
    Ok(JuvRoutes {
        l,
        u,
        v,
        monte_carlo: j_uv_mc(l, u, v, n, JUV_DT, rng.fork(1))?,
        spectral: j_uv_spectral(l, u, v, basis, n, rng.fork(2))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_basis;
    use std::sync::OnceLock;

    fn basis() -> &'static SpectralBasis {
        static B: OnceLock<SpectralBasis> = OnceLock::new();
        B.get_or_init(|| build_basis(20.0, 2e-3, 16).unwrap())
    }

    #[test]
    fn rules_integrate_exactly() {
        let total: f64 = sqrt_v_rule(0.0, 9.0).iter().map(|(v, w)| w / v.sqrt()).sum();
        assert!((total - 6.0).abs() < 1e-12, "{total}");
        let e: f64 = end_refined_rule(1.0, 3.0).iter().map(|(v, w)| w * v * v).sum();
        assert!((e - 26.0 / 3.0).abs() < 1e-12, "{e}");
        let g: f64 = s_rule().iter().map(|(_, w)| w).sum();
        // ∫_0^∞ s e^{-s²/8} ds / √(8π) = 4/√(8π)
        assert!((g - 4.0 / (8.0 * PI).sqrt()).abs() < 1e-9, "{g}");
    }

    // Exact values of e^{ρv}<χ_v|e_0> from the Airy eigen-series of K_l(v).
    #[test]
    fn principal_projection_matches_series() {
        let vs = [0.5, 1.0, 2.0, 4.0];
        let exact = [0.93930, 0.56669, 0.25439, 0.055693];
        let est = projection_curve(&vs, basis(), 20_000, RngStream::from_seed(11)).unwrap();
        for ((e, x), v) in est.iter().zip(exact).zip(vs) {
            assert!((e.mean - x).abs() < 4.0 * e.stderr + 2e-3 * x, "v={v}: {e:?} vs {x}");
        }
    }

    #[test]
    fn split_is_additive() {
        let s = j_t_split(&[0.5, 2.0], 3.0, basis(), 512, RngStream::from_seed(2)).unwrap();
        for x in s {
            assert!((x.a.mean + x.b.mean - x.total.mean).abs() <= 1e-12 * x.total.mean);
            assert!(x.total.mean > 0.0);
        }
    }
}
