//! Suites on Brownian expectations penalized by e^{-β∫(L+f)²}, simulated
//! with [`LatticeWalk`].

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;

use super::identities::product;
use super::report::{Recorder, SuiteReport};
use super::walk::{lattice_event, lattice_steps, soft_indicator, LatticeWalk};
use crate::error::{ensure, Error, Result};
use crate::kernels::afunc::l_rule;
use crate::kernels::kernel::{besq0_exponent, DEFAULT_DY, LOG_WEIGHT_FLOOR};
use crate::kernels::{a_total, k_constant, mean_density_events, ModelParams, PathEvent};
use crate::localtime::CompactProfile;
use crate::quad::composite_gl;
use crate::rng::RngStream;
use crate::samplers::besq2_step;
use crate::spectral::SpectralBasis;
use crate::stats::{paired_ratio, replicate, McEstimate, Moments};

/// Level step of the walk; its time step is the square.
pub const WALK_DY: f64 = 1.0 / 64.0;

/// Time grid on which path events are read.
pub const EVENT_DT: f64 = 1.0 / 1024.0;

fn walks<F>(dy: f64, t_max: f64, n: usize, width: usize, rng: RngStream, body: F) -> Result<Vec<Moments>>
where
    F: Fn(&mut LatticeWalk, &mut ChaCha8Rng, &mut [f64]) + Sync,
{
    ensure(n >= 2, || format!("n = {n} must be >= 2"))?;
    let steps = lattice_steps(t_max, dy)?;
    Ok(replicate(n, width, |i, out| {
        let mut walk = LatticeWalk::new(dy, steps).expect("validated dy");
        let mut r = rng.replica(i as u64).rng();
        body(&mut walk, &mut r, out);
    }))
}

fn event_label(e: PathEvent) -> String {
    match e {
        PathEvent::All => "all".into(),
        PathEvent::EndPositive => "x_s_positive".into(),
        PathEvent::MaxBelow(c) => format!("max_below_{c}"),
        PathEvent::AbsEndBelow(c) => format!("abs_x_s_below_{c}"),
    }
}

/// e^{ρβ^{2/3}T} E[e^{-β∫(L_T+f)²}] at T ∈ {2, 3, 4} against K β^{1/3} A^(β,M)(f).
pub fn verify_prop18(
    beta: f64,
    f: &CompactProfile,
    basis: &SpectralBasis,
    n: usize,
    rng: RngStream,
) -> Result<SuiteReport> {
    let mut rec = Recorder::new("prop18", rng.seed);
    let params = ModelParams::new(beta, basis.rho(), f.m)?;
    let rate = params.rate();
    let ts = [2.0, 3.0, 4.0];
    let marks: Vec<usize> = ts.iter().map(|&t| lattice_steps(t, WALK_DY)).collect::<Result<_>>()?;
    let m = walks(WALK_DY, 4.0, n, ts.len(), rng.fork(1), |w, r, out| {
        let mut done = 0;
        for (o, &k) in out.iter_mut().zip(&marks) {
            w.advance(k - done, r);
            done = k;
            *o = (-beta * w.energy_with(f)).exp();
        }
    })?;
    let raw: Vec<McEstimate> = m.iter().map(|m| m.estimate(rng.seed)).collect();
    let comp: Vec<McEstimate> = raw.iter().zip(&ts).map(|(r, t)| r.scale((rate * t).exp())).collect();
    let slope = (raw[2].mean.ln() - raw[0].mean.ln()) / (ts[2] - ts[0]);
    rec.within("log_slope", slope, -rate, 0.05 * rate);
    rec.agree("stabilization", comp[1], comp[2], 3.0);
    let k = k_constant(basis, (n / 10).max(1000), rng.fork(2))?;
    let a = a_total(&params, f, basis, (n / 100).max(200), rng.fork(3))?;
    let limit = product(k, a, params.alpha);
    rec.agree("limit", comp[2], limit, 4.0);
    rec.note(format!(
        "compensated T = 2, 3, 4: {:.4} ± {:.4}, {:.4} ± {:.4}, {:.4} ± {:.4}; K β^(1/3) A = {:.4} ± {:.4}",
        comp[0].mean, comp[0].stderr, comp[1].mean, comp[1].stderr, comp[2].mean, comp[2].stderr, limit.mean, limit.stderr
    ));
    Ok(rec.finish())
}

/// e^{ρT} E[e^{-∫(L_T+f)²} 1{X_T ∈ [0,M]}] at T ∈ {1, 2, 3, 4}, for a bump and for f = 0.
pub fn verify_prop1(m_level: f64, rho: f64, n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("prop1", rng.seed);
    ensure(m_level > 0.0, || format!("M = {m_level} must be > 0"))?;
    let bump = CompactProfile::bump(0.0, 0.5 * m_level.min(1.0), 1.0, m_level)?;
    let profiles = [("bump", bump), ("zero", CompactProfile::zero())];
    let ts = [1.0, 2.0, 3.0, 4.0];
    let marks: Vec<usize> = ts.iter().map(|&t| lattice_steps(t, WALK_DY)).collect::<Result<_>>()?;
    let width = ts.len() * profiles.len();
    let m = walks(WALK_DY, 4.0, n, width, rng.fork(1), |w, r, out| {
        let mut done = 0;
        for (k, (&mark, &t)) in marks.iter().zip(&ts).enumerate() {
            w.advance(mark - done, r);
            done = mark;
            let inside = soft_indicator(w.position(), 0.0, m_level, w.dy());
            if inside == 0.0 {
                continue;
            }
            for (j, (_, f)) in profiles.iter().enumerate() {
                out[j * ts.len() + k] = (rho * t - w.energy_with(f)).exp() * inside;
            }
        }
    })?;
    for (j, (label, _)) in profiles.iter().enumerate() {
        let v: Vec<f64> = m[j * ts.len()..(j + 1) * ts.len()].iter().map(|m| m.mean).collect();
        let worst = v.windows(2).map(|p| p[1] / p[0]).fold(f64::NEG_INFINITY, f64::max);
        rec.at_most(format!("{label}.decreasing"), worst, 1.0, 0.0);
        rec.at_most(format!("{label}.halving"), v[3] / v[1], 0.5, 0.0);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        rec.at_least(format!("{label}.positive"), min, f64::MIN_POSITIVE, 0.0);
        rec.note(format!("{label}: monitored values at T = {ts:?}: {v:?}"));
    }
    Ok(rec.finish())
}

/// Q_T^β(Λ_s) by self-normalized weighting of walks against E[1_Λ D_s^β].
#[allow(clippy::too_many_arguments)]
pub fn verify_limit_measure(
    beta: f64,
    s: f64,
    t: f64,
    events: &[PathEvent],
    basis: &SpectralBasis,
    n: usize,
    outer: usize,
    rng: RngStream,
) -> Result<SuiteReport> {
    let mut rec = Recorder::new("limit", rng.seed);
    ensure(s > 0.0 && t > s, || format!("need 0 < s < T, got s = {s}, T = {t}"))?;
    let mut events: Vec<PathEvent> = events.iter().copied().filter(|e| *e != PathEvent::All).collect();
    events.insert(0, PathEvent::All);
    let stride = lattice_steps(EVENT_DT, WALK_DY)?;
    let s_steps = lattice_steps(s, WALK_DY)?;
    ensure(s_steps % stride == 0, || format!("s = {s} must be a multiple of {EVENT_DT}"))?;
    let earlier = t - 1.0;
    let horizons: Vec<f64> = if earlier > s { vec![earlier, t] } else { vec![t] };
    let marks: Vec<usize> = horizons.iter().map(|&h| lattice_steps(h, WALK_DY)).collect::<Result<_>>()?;
    let ne = events.len();
    let width = 3 * ne * horizons.len();
    let m = walks(WALK_DY, t, n, width, rng.fork(1), |w, r, out| {
        let mut grid = Vec::with_capacity(s_steps / stride + 1);
        grid.push(0.0);
        for _ in 0..s_steps / stride {
            w.advance(stride, r);
            grid.push(w.position());
        }
        let flags: Vec<f64> = events.iter().map(|&e| lattice_event(e, &grid, w.dy())).collect();
        let mut done = s_steps;
        for (h, &mark) in marks.iter().enumerate() {
            w.advance(mark - done, r);
            done = mark;
            let weight = (-beta * w.energy()).exp();
            for (e, &flag) in flags.iter().enumerate() {
                let o = &mut out[3 * (h * ne + e)..3 * (h * ne + e + 1)];
                o[0] = weight * flag;
                o[1] = weight;
                o[2] = o[0] + o[1];
            }
        }
    })?;
    let q = |h: usize, e: usize| paired_ratio(&m[3 * (h * ne + e)..3 * (h * ne + e + 1)], rng.seed);
    let last = horizons.len() - 1;
    let params = ModelParams::new(beta, basis.rho(), 1.0)?;
    let dens = mean_density_events(&params, s, EVENT_DT, outer, 4, (outer / 2).max(100), &events, basis, rng.fork(2))?;
    rec.within("all.self_normalized", q(last, 0).mean, 1.0, 1e-12);
    rec.near("all.mean_density", dens[0].ratio, 1.0, 3.0);
    for (e, event) in events.iter().enumerate().skip(1) {
        let label = event_label(*event);
        let qt = q(last, e);
        rec.agree(format!("{label}.agreement"), qt, dens[e].ratio, 4.0);
        if last > 0 {
            rec.agree(format!("{label}.stabilization"), q(0, e), qt, 1.0);
        }
        if *event == PathEvent::EndPositive {
            rec.near(format!("{label}.symmetry_q"), qt, 0.5, 4.0);
            rec.near(format!("{label}.symmetry_d"), dens[e].ratio, 0.5, 4.0);
        }
        rec.note(format!(
            "{label}: Q_T = {:.4} ± {:.4}, E[1 D_s] = {:.4} ± {:.4}",
            qt.mean, qt.stderr, dens[e].ratio.mean, dens[e].ratio.stderr
        ));
    }
    Ok(rec.finish())
}

/// Time integral of the windowed penalized expectation against the (a, l)
/// integral over the spliced processes Y_{l,a}.
pub fn verify_leuridan(m_level: f64, rho: f64, n: usize, rng: RngStream) -> Result<SuiteReport> {
    let mut rec = Recorder::new("leuridan", rng.seed);
    ensure(m_level > 0.0, || format!("M = {m_level} must be > 0"))?;
    let u_max = 4.0;
    let stride = lattice_steps(EVENT_DT, WALK_DY)?;
    let half = lattice_steps(u_max, WALK_DY)? / stride;
    let lhs = walks(WALK_DY, 2.0 * u_max, n, 4, rng.fork(1), |w, r, out| {
        let g = |w: &LatticeWalk| soft_indicator(w.position(), 0.0, m_level, w.dy()) * (-w.energy()).exp();
        let mut acc = 0.5 * g(w);
        let mut last = 0.0;
        for k in 1..=2 * half {
            w.advance(stride, r);
            last = g(w);
            if k == half {
                out[0] = EVENT_DT * (acc + 0.5 * last);
            }
            acc += last;
        }
        out[1] = EVENT_DT * (acc - 0.5 * last);
        out[2] = (-w.energy()).exp() / rho;
        // G ≡ 0
        out[3] = 0.0;
    })?;
    let (l4, l8) = (lhs[0].estimate(rng.seed), lhs[1].estimate(rng.seed));

    let a_nodes = composite_gl(&[0.0, 0.25 * m_level, 0.5 * m_level, 0.75 * m_level, m_level], 4);
    let l_nodes = l_rule(rho);
    let pairs: Vec<(f64, f64, f64)> = a_nodes
        .iter()
        .flat_map(|&(a, wa)| l_nodes.iter().map(move |&(l, wl)| (a, l, wa * wl)))
        .collect();
    let total: f64 = pairs.iter().map(|p| p.2).sum();
    let pick = WeightedIndex::new(pairs.iter().map(|p| p.2)).map_err(|e| Error::Parameter(e.to_string()))?;
    let dy = DEFAULT_DY;
    let failure = std::sync::Mutex::new(None);
    let rhs = replicate(n, 2, |i, out| {
        let base = rng.fork(2).replica(i as u64);
        let (a, l, _) = pairs[pick.sample(&mut base.fork(0).rng())];
        let run = || -> Result<f64> {
            let mut r = base.fork(1).rng();
            let (mut expo, _) = besq0_exponent(l, 0.0, dy, f64::INFINITY, &mut r)?;
            // BESQ(2) from l up to level a, BESQ(0) afterwards until absorption
            let mut x = l;
            let full = (a / dy + 1e-9).floor() as usize;
            for _ in 0..full {
                let next = besq2_step(x, dy, &mut r);
                expo -= 0.5 * dy * (x * x + next * next);
                x = next;
            }
            let rem = a - full as f64 * dy;
            if rem > 1e-12 {
                let next = besq2_step(x, rem, &mut r);
                expo -= 0.5 * rem * (x * x + next * next);
                x = next;
            }
            if expo < LOG_WEIGHT_FLOOR {
                return Ok(0.0);
            }
            if x > 0.0 {
                expo += besq0_exponent(x, 0.0, dy, f64::INFINITY, &mut r)?.0;
            }
            Ok(total * expo.exp())
        };
        match run() {
            Ok(v) => out[0] = v,
            Err(e) => *failure.lock().unwrap() = Some(e),
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let r = rhs[0].estimate(rng.seed);
    rec.agree("identity", l8, r, 3.0);
    rec.at_most("doubling", (l8.mean - l4.mean).abs(), 0.0, l4.stderr);
    let tail = lhs[2].mean;
    rec.at_most("tail_budget", tail, 0.0, l8.stderr.hypot(r.stderr));
    rec.within("degenerate", lhs[3].mean.abs() + rhs[1].mean.abs(), 0.0, 0.0);
    rec.note(format!(
        "LHS(u_max = {u_max}) = {:.5} ± {:.5}, LHS({}) = {:.5} ± {:.5}, RHS = {:.5} ± {:.5}, tail bound {tail:.2e}",
        l4.mean,
        l4.stderr,
        2.0 * u_max,
        l8.mean,
        l8.stderr,
        r.mean,
        r.stderr
    ));
    if tail > l8.stderr.hypot(r.stderr) {
        rec.note("inconclusive: truncation tail exceeds the statistical budget");
    }
    Ok(rec.finish())
}
