//! The functionals A_±^(β,M)(f), the compensated martingale of the two-sided
//! Ray–Knight process and the density D_s^β.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use super::kernel::{airy_truncation, DEFAULT_DY, LOG_WEIGHT_FLOOR};
use super::params::ModelParams;
use crate::error::{ensure, Error, Result};
use crate::localtime::{recentered_profile, CompactProfile};
use crate::quad::composite_gl;
use crate::rng::RngStream;
use crate::samplers::{besq0_step, besq2_step, sample_brownian, Path, ProcessKind, ABSORPTION_CAP};
use crate::spectral::SpectralBasis;
use crate::stats::{paired_ratio, ratio, replicate, McEstimate, Moments};

/// Cut of the outer l-integral: the Airy-ratio bound on K̄ is below this.
pub const L_TAIL_TOL: f64 = 1e-8;

const L_PANEL: f64 = 0.5;
const L_ORDER: usize = 4;

/// Quadrature rule for the outer l-integral at β = 1; nodes and weights
/// scale by β^{-1/3}.
pub fn l_rule(rho: f64) -> Vec<(f64, f64)> {
    let l_max = airy_truncation(rho, L_TAIL_TOL);
    let panels = (l_max / L_PANEL).ceil() as usize;
    let breaks: Vec<f64> = (0..=panels).map(|i| l_max * i as f64 / panels as f64).collect();
    composite_gl(&breaks, L_ORDER)
}

/// Discretization shared by all A-evaluations at one β.
#[derive(Clone, Debug)]
struct Setup {
    params: ModelParams,
    dy: f64,
    /// (l, weight) in the β-units
    nodes: Vec<(f64, f64)>,
}

impl Setup {
    fn new(params: ModelParams) -> Self {
        let a = params.alpha;
        Self {
            params,
            dy: DEFAULT_DY / a,
            nodes: l_rule(params.rho).into_iter().map(|(l, w)| (l / a, w / a)).collect(),
        }
    }
}

/// f sampled on the y-lattice of one side.
struct SideProfile {
    values: Vec<f64>,
    /// tail[k] = dy-lattice sum of f² over indices ≥ k (weight ½ at index 0)
    tail_sq: Vec<f64>,
}

impl SideProfile {
    fn new(f: &CompactProfile, dy: f64, sign: f64, reach: f64) -> Self {
        let count = (reach / dy).ceil() as usize + 2;
        let values: Vec<f64> = (0..count).map(|k| f.eval(sign * k as f64 * dy)).collect();
        let mut tail_sq = vec![0.0; count + 1];
        for k in (0..count).rev() {
            let w = if k == 0 { 0.5 } else { 1.0 };
            tail_sq[k] = tail_sq[k + 1] + w * values[k] * values[k];
        }
        Self { values, tail_sq }
    }

    fn at(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    fn tail(&self, k: usize) -> f64 {
        self.tail_sq.get(k).copied().unwrap_or(0.0)
    }
}

/// Left half: ∫_{-∞}^0 [-β(Y + f)² + ρβ^{2/3} Y] dy for a BESQ(0) from l.
fn left_exponent<R: Rng + ?Sized>(
    l: f64,
    setup: &Setup,
    left: &SideProfile,
    rng: &mut R,
) -> Result<f64> {
    let (beta, rate, dy) = (setup.params.beta, setup.params.rate(), setup.dy);
    let g = |y: f64, f: f64| -beta * (y + f) * (y + f) + rate * y;
    let mut y = l;
    let mut expo = 0.5 * dy * g(y, left.at(0));
    let mut k = 0usize;
    while y > 0.0 {
        k += 1;
        if k > ABSORPTION_CAP {
            return Err(Error::NotAbsorbed { start: l, steps: k });
        }
        y = besq0_step(y, dy, rng);
        if y > 0.0 {
            expo += dy * g(y, left.at(k));
        }
        if expo < LOG_WEIGHT_FLOOR {
            return Ok(expo);
        }
    }
    if l == 0.0 {
        return Ok(-beta * dy * left.tail(0));
    }
    Ok(expo - beta * dy * left.tail(k))
}

/// Right half up to each level in `ms` (ascending): the exponent
/// ∫_0^M [-β(Y + f)² + ρβ^{2/3} Y] dy and Y^M for a BESQ(2) from l.
/// Levels off the lattice are reached by an exact partial step.
fn right_exponents<R: Rng + ?Sized>(
    l: f64,
    setup: &Setup,
    right: &SideProfile,
    f: &CompactProfile,
    ms: &[f64],
    rng: &mut R,
    out: &mut Vec<(f64, f64)>,
) {
    let (beta, rate, dy) = (setup.params.beta, setup.params.rate(), setup.dy);
    let g = |y: f64, f: f64| -beta * (y + f) * (y + f) + rate * y;
    out.clear();
    let mut y = l;
    let mut k = 0usize;
    // dy (½ g_0 + g_1 + ... + g_k)
    let mut s = 0.5 * dy * g(y, right.at(0));
    for &m in ms {
        let target = (m / dy + 1e-9).floor() as usize;
        while k < target {
            y = besq2_step(y, dy, rng);
            k += 1;
            s += dy * g(y, right.at(k));
        }
        let gk = g(y, right.at(k));
        let base = s - 0.5 * dy * gk;
        let rem = m - k as f64 * dy;
        if rem > 1e-12 * dy {
            let ym = besq2_step(y, rem, rng);
            out.push((base + 0.5 * rem * (gk + g(ym, f.eval(m))), ym));
        } else {
            out.push((base, y));
        }
    }
}

/// Validated inputs for one profile.
struct Side<'a> {
    f: &'a CompactProfile,
    left: SideProfile,
    right: SideProfile,
}

impl<'a> Side<'a> {
    fn new(f: &'a CompactProfile, setup: &Setup, ms: &[f64]) -> Result<Self> {
        let (lo, hi) = f.support();
        for &m in ms {
            ensure(m > 0.0 && m.is_finite(), || format!("M = {m} must be > 0"))?;
            ensure(lo >= -m - 1e-12 && hi <= m + 1e-12, || {
                format!("profile support [{lo}, {hi}] exceeds [-{m}, {m}]")
            })?;
        }
        let reach = ms.iter().fold(f.m, |a, &b| a.max(b));
        Ok(Self {
            f,
            left: SideProfile::new(f, setup.dy, -1.0, reach),
            right: SideProfile::new(f, setup.dy, 1.0, reach),
        })
    }

    /// exp(∫_{-∞}^M ...) e_0(β^{1/3} Y^M) for one l and every M.
    #[allow(clippy::too_many_arguments)]
    fn sample<R: Rng + ?Sized>(
        &self,
        l: f64,
        setup: &Setup,
        ms: &[f64],
        basis: &SpectralBasis,
        rng: &mut R,
        buf: &mut Vec<(f64, f64)>,
        out: &mut [f64],
    ) -> Result<()> {
        let left = left_exponent(l, setup, &self.left, rng)?;
        if left < LOG_WEIGHT_FLOOR {
            out.iter_mut().for_each(|o| *o = 0.0);
            return Ok(());
        }
        right_exponents(l, setup, &self.right, self.f, ms, rng, buf);
        for (o, &(e, ym)) in out.iter_mut().zip(buf.iter()) {
            *o = (left + e).exp() * basis.e0_at(setup.params.alpha * ym);
        }
        Ok(())
    }
}

fn first_error(slot: &std::sync::Mutex<Option<Error>>, r: Result<()>) {
    if let Err(e) = r {
        slot.lock().unwrap().get_or_insert(e);
    }
}

/// Streams per l-node: one for A_+(f), one for A_+(f̃).
const SLOTS: usize = 2;

/// Runs `n` replicas; each sweeps the whole l-rule for every (side, slot),
/// node i of replica j drawing from `rng.replica(j).fork(i * SLOTS + slot)`,
/// so runs at different β or with different profiles share randomness.
/// `combine(a, out)` receives a[side * ms.len() + q] = A_+ replica at ms[q].
#[allow(clippy::too_many_arguments)]
fn a_replicas<F>(
    setup: &Setup,
    sides: &[(&Side, usize)],
    ms: &[f64],
    basis: &SpectralBasis,
    n: usize,
    rng: RngStream,
    width: usize,
    combine: F,
) -> Result<Vec<Moments>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    ensure(n >= 2, || format!("n = {n} must be >= 2"))?;
    let failure = std::sync::Mutex::new(None);
    let k = ms.len();
    let m = replicate(n, width, |j, out| {
        let base = rng.replica(j as u64);
        let mut buf = Vec::with_capacity(k);
        let mut vals = vec![0.0; k];
        let mut acc = vec![0.0; k * sides.len()];
        for (i, &(l, w)) in setup.nodes.iter().enumerate() {
            for (si, &(side, slot)) in sides.iter().enumerate() {
                let mut r = base.fork((i * SLOTS + slot) as u64).rng();
                first_error(&failure, side.sample(l, setup, ms, basis, &mut r, &mut buf, &mut vals));
                for (o, v) in acc[si * k..(si + 1) * k].iter_mut().zip(&vals) {
                    *o += w * v;
                }
            }
        }
        combine(&acc, out);
    });
    match failure.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(m),
    }
}

/// A_+^(β,M)(f) at M = params.m.
pub fn a_plus(params: &ModelParams, f: &CompactProfile, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<McEstimate> {
    Ok(a_plus_levels(params, f, &[params.m], basis, n, rng)?[0])
}

/// A_+^(β,M)(f) at several increasing M on common random numbers: the right
/// half is one BESQ(2) path extended level by level.
pub fn a_plus_levels(
    params: &ModelParams,
    f: &CompactProfile,
    ms: &[f64],
    basis: &SpectralBasis,
    n: usize,
    rng: RngStream,
) -> Result<Vec<McEstimate>> {
    ensure(!ms.is_empty() && ms.windows(2).all(|w| w[0] < w[1]), || "levels must be increasing".into())?;
    let setup = Setup::new(*params);
    let side = Side::new(f, &setup, ms)?;
    let m = a_replicas(&setup, &[(&side, 0)], ms, basis, n, rng, ms.len(), |a, out| out.copy_from_slice(a))?;
    Ok(m.iter().map(|m| m.estimate(rng.seed)).collect())
}

/// A^(β,M)(f) = A_+(f) + A_+(f̃).
pub fn a_total(params: &ModelParams, f: &CompactProfile, basis: &SpectralBasis, n: usize, rng: RngStream) -> Result<McEstimate> {
    let setup = Setup::new(*params);
    let g = f.reflected();
    let ms = [params.m];
    let (a, b) = (Side::new(f, &setup, &ms)?, Side::new(&g, &setup, &ms)?);
    let m = a_replicas(&setup, &[(&a, 0), (&b, 1)], &ms, basis, n, rng, 1, |a, out| out[0] = a[0] + a[1])?;
    Ok(m[0].estimate(rng.seed))
}

/// exp(∫_0^x [-βY² + ρβ^{2/3} Y] dy) e_0(β^{1/3} Y_x) for a BESQ(2) from l,
/// at every x in `xs` (increasing), on shared paths.
pub fn martingale_levels(
    l: f64,
    params: &ModelParams,
    xs: &[f64],
    basis: &SpectralBasis,
    n: usize,
    rng: RngStream,
) -> Result<Vec<McEstimate>> {
    ensure(l >= 0.0, || format!("l = {l} must be >= 0"))?;
    ensure(n >= 2, || format!("n = {n} must be >= 2"))?;
    ensure(!xs.is_empty() && xs.windows(2).all(|w| w[0] < w[1]) && xs[0] > 0.0, || {
        "levels must be positive and increasing".into()
    })?;
    let setup = Setup::new(*params);
    let zero = CompactProfile::zero();
    let right = SideProfile::new(&zero, setup.dy, 1.0, 0.0);
    let m = replicate(n, xs.len(), |j, out| {
        let mut r = rng.replica(j as u64).rng();
        let mut buf = Vec::with_capacity(xs.len());
        right_exponents(l, &setup, &right, &zero, xs, &mut r, &mut buf);
        for (o, &(e, y)) in out.iter_mut().zip(&buf) {
            *o = e.exp() * basis.e0_at(params.alpha * y);
        }
    });
    Ok(m.iter().map(|m| m.estimate(rng.seed)).collect())
}

/// Level step of the local-time field behind D_s.
pub const DS_DY: f64 = DEFAULT_DY;

/// D_s^β = e^{ρβ^{2/3} s} A^β(F) / A^β(0) with F(y) = L_s^{y + X_s},
/// numerator and denominator on common random numbers and M = support of F.
pub fn density_ds(
    path: &Path,
    s: f64,
    params: &ModelParams,
    basis: &SpectralBasis,
    n: usize,
    rng: RngStream,
) -> Result<McEstimate> {
    ensure(path.kind == ProcessKind::Brownian, || "D_s needs a Brownian path".into())?;
    ensure(s >= 0.0 && s <= path.duration() + 1e-12, || {
        format!("s = {s} must lie in [0, {}]", path.duration())
    })?;
    let profile = if s == 0.0 { CompactProfile::zero() } else { recentered_profile(path, s, DS_DY)? };
    let p = params.with_m(profile.m)?;
    let setup = Setup::new(p);
    let zero = CompactProfile::zero();
    let g = profile.reflected();
    let ms = [p.m];
    let (fs, gs, zs) = (
        Side::new(&profile, &setup, &ms)?,
        Side::new(&g, &setup, &ms)?,
        Side::new(&zero, &setup, &ms)?,
    );
    let comp = (p.rate() * s).exp();
    let sides = [(&fs, 0), (&gs, 1), (&zs, 0), (&zs, 1)];
    let m = a_replicas(&setup, &sides, &ms, basis, n, rng, 3, |a, out| {
        out[0] = comp * (a[0] + a[1]);
        out[1] = a[2] + a[3];
        out[2] = out[0] + out[1];
    })?;
    Ok(paired_ratio(&m, rng.seed))
}

/// Events of the path up to time s that are decidable on the sampling grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PathEvent {
    All,
    /// X_s > 0
    EndPositive,
    /// max_{u ≤ s} X_u < level (grid times)
    MaxBelow(f64),
    /// |X_s| < level
    AbsEndBelow(f64),
}

impl PathEvent {
    /// Whether the event holds for the path restricted to its first `steps` steps.
    pub fn holds(&self, values: &[f64]) -> bool {
        let end = *values.last().expect("non-empty path");
        match *self {
            PathEvent::All => true,
            PathEvent::EndPositive => end > 0.0,
            PathEvent::MaxBelow(c) => values.iter().all(|&x| x < c),
            PathEvent::AbsEndBelow(c) => end.abs() < c,
        }
    }
}

/// Monte-Carlo estimate of E[1_Λ D_s^β] over Brownian paths.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeanDensity {
    pub event: PathEvent,
    /// E[1_Λ e^{ρβ^{2/3}s} A^β(F)] with one randomized-quadrature draw set per path
    pub numerator: McEstimate,
    /// A^β(0)
    pub denominator: McEstimate,
    pub ratio: McEstimate,
}

/// E[D_s^β], which equals 1.
#[allow(clippy::too_many_arguments)]
pub fn mean_density_ds(
    params: &ModelParams,
    s: f64,
    dt: f64,
    outer: usize,
    inner: usize,
    den_n: usize,
    basis: &SpectralBasis,
    rng: RngStream,
) -> Result<MeanDensity> {
    Ok(mean_density_events(params, s, dt, outer, inner, den_n, &[PathEvent::All], basis, rng)?[0])
}

/// Unbiased estimates of E[1_Λ D_s^β] for each event on shared paths: each
/// outer path gets `inner` l-draws from the normalized quadrature weights for
/// F and for F̃; A^β(0) comes from an independent run with `den_n` replicas.
#[allow(clippy::too_many_arguments)]
pub fn mean_density_events(
    params: &ModelParams,
    s: f64,
    dt: f64,
    outer: usize,
    inner: usize,
    den_n: usize,
    events: &[PathEvent],
    basis: &SpectralBasis,
    rng: RngStream,
) -> Result<Vec<MeanDensity>> {
    ensure(s > 0.0 && dt > 0.0 && dt <= s, || format!("need 0 < dt <= s, got dt = {dt}, s = {s}"))?;
    ensure(outer >= 2 && inner >= 1, || "need outer >= 2 and inner >= 1".into())?;
    let setup0 = Setup::new(*params);
    let total_w: f64 = setup0.nodes.iter().map(|n| n.1).sum();
    let pick = WeightedIndex::new(setup0.nodes.iter().map(|n| n.1)).map_err(|e| Error::Parameter(e.to_string()))?;
    let failure = std::sync::Mutex::new(None);
    let paths = rng.fork(1);
    let m = replicate(outer, events.len(), |i, out| {
        let mut run = || -> Result<f64> {
            let path = sample_brownian(s, dt, paths.replica(i as u64).fork(0))?;
            let f = recentered_profile(&path, s, DS_DY)?;
            let p = params.with_m(f.m)?;
            let setup = Setup { params: p, ..setup0.clone() };
            let g = f.reflected();
            let ms = [p.m];
            let sides = [Side::new(&f, &setup, &ms)?, Side::new(&g, &setup, &ms)?];
            let mut r = paths.replica(i as u64).fork(1).rng();
            let (mut buf, mut val) = (Vec::with_capacity(1), [0.0]);
            let mut acc = 0.0;
            for side in &sides {
                for _ in 0..inner {
                    let l = setup.nodes[pick.sample(&mut r)].0;
                    side.sample(l, &setup, &ms, basis, &mut r, &mut buf, &mut val)?;
                    acc += val[0];
                }
            }
            let value = (p.rate() * s).exp() * total_w * acc / inner as f64;
            for (o, e) in out.iter_mut().zip(events) {
                *o = if e.holds(&path.values) { value } else { 0.0 };
            }
            Ok(value)
        };
        if let Err(e) = run() {
            first_error(&failure, Err(e));
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let p0 = params.with_m(1.0)?;
    let denominator = a_total(&p0, &CompactProfile::zero(), basis, den_n, rng.fork(2))?;
    Ok(events
        .iter()
        .zip(&m)
        .map(|(&event, m)| {
            let numerator = m.estimate(rng.seed);
            MeanDensity {
                event,
                numerator,
                denominator,
                ratio: ratio(numerator, denominator),
            }
        })
        .collect())
}
