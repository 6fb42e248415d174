//! Exact grid samplers for Brownian motion, squared Bessel processes of
//! dimension 0 and 2, Bessel(2) and Bessel(3) bridges, and the two-sided
//! Ray–Knight processes.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rng::RngStream;

/// Left halves of Ray–Knight processes are simulated until absorption, at most this many steps.
pub const ABSORPTION_CAP: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProcessKind {
    Brownian,
    Besq0,
    Besq2,
    /// BESQ(2) up to a switch level, BESQ(0) afterwards.
    Besq2Then0,
    Bessel2,
    Bessel3Bridge,
}

/// A trajectory on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub kind: ProcessKind,
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.values.len().saturating_sub(1) as f64
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("empty path")
    }

    /// Trapezoid integral of `g(value)` over the whole grid.
    pub fn integral(&self, g: impl Fn(f64) -> f64) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let inner: f64 = self.values[1..n - 1].iter().map(|&v| g(v)).sum();
        self.dt * (inner + 0.5 * (g(self.values[0]) + g(self.values[n - 1])))
    }

    /// Path with every value negated.
    pub fn negated(&self) -> Path {
        Path {
            values: self.values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}

/// Y_l: BESQ(0) to the left of the origin, an independent process to the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedPath {
    /// Values at y = 0, -dy, -2dy, ... up to and including the first zero.
    pub left: Path,
    /// Values at y = 0, dy, ..., y_max.
    pub right: Path,
    pub l: f64,
}

impl TwoSidedPath {
    /// Trapezoid integral of `g(y, Y^y)` over (-inf, y_max].
    pub fn integral(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let side = |p: &Path, sign: f64| {
            let n = p.values.len();
            (0..n)
                .map(|i| {
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    w * g(sign * i as f64 * p.dt, p.values[i])
                })
                .sum::<f64>()
                * p.dt
        };
        side(&self.left, -1.0) + side(&self.right, 1.0)
    }
}

/// One exact BESQ(0) transition over a step of length `dt`.
#[inline]
pub fn besq0_step<R: Rng + ?Sized>(x: f64, dt: f64, rng: &mut R) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mean = x / (2.0 * dt);
    let k = if mean < 1e12 {
        Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0)
    } else {
        mean
    };
    if k == 0.0 {
        0.0
    } else {
        2.0 * dt * Gamma::new(k, 1.0).expect("positive shape").sample(rng)
    }
}

/// One exact BESQ(2) transition: squared norm of a planar Gaussian step.
#[inline]
pub fn besq2_step<R: Rng + ?Sized>(x: f64, dt: f64, rng: &mut R) -> f64 {
    let s = dt.sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let a = x.max(0.0).sqrt() + s * z1;
    let b = s * z2;
    a * a + b * b
}

/// Transition of the requested dimension.
#[inline]
pub fn besq_step<R: Rng + ?Sized>(dim: u32, x: f64, dt: f64, rng: &mut R) -> f64 {
    if dim == 0 {
        besq0_step(x, dt, rng)
    } else {
        besq2_step(x, dt, rng)
    }
}

fn check_step(name: &str, v: f64) -> Result<()> {
    ensure(v.is_finite() && v > 0.0, || format!("{name} = {v} must be finite and > 0"))
}

pub fn sample_brownian(t: f64, dt: f64, rng: RngStream) -> Result<Path> {
    check_step("T", t)?;
    check_step("dt", dt)?;
    ensure(dt <= t, || format!("dt = {dt} exceeds T = {t}"))?;
    let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let s = h.sqrt();
    let mut r = rng.rng();
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = 0.0;
    values.push(x);
    for _ in 0..steps {
        let z: f64 = r.sample(StandardNormal);
        x += s * z;
        values.push(x);
    }
    Ok(Path {
        kind: ProcessKind::Brownian,
        t0: 0.0,
        dt: h,
        values,
    })
}

fn grid_steps(y_max: f64, dy: f64) -> usize {
    (y_max / dy - 1e-9).ceil().max(1.0) as usize
}

pub fn sample_besq(dim: u32, start: f64, y_max: f64, dy: f64, rng: RngStream) -> Result<Path> {
    ensure(dim == 0 || dim == 2, || format!("BESQ dimension {dim} not in {{0, 2}}"))?;
    ensure(start >= 0.0 && start.is_finite(), || format!("start = {start} must be >= 0"))?;
    check_step("y_max", y_max)?;
    check_step("dy", dy)?;
    let steps = grid_steps(y_max, dy);
    let h = y_max / steps as f64;
    let mut r = rng.rng();
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = start;
    values.push(x);
    for _ in 0..steps {
        x = besq_step(dim, x, h, &mut r);
        values.push(x);
    }
    Ok(Path {
        kind: if dim == 0 { ProcessKind::Besq0 } else { ProcessKind::Besq2 },
        t0: 0.0,
        dt: h,
        values,
    })
}

/// BESQ(0) from `start` on a `dy` grid until the first zero.
pub fn besq0_until_absorbed<R: Rng + ?Sized>(start: f64, dy: f64, rng: &mut R) -> Result<Path> {
    let mut values = vec![start];
    let mut x = start;
    while x > 0.0 {
        if values.len() > ABSORPTION_CAP {
            return Err(Error::NotAbsorbed {
                start,
                steps: ABSORPTION_CAP,
            });
        }
        x = besq0_step(x, dy, rng);
        values.push(x);
    }
    Ok(Path {
        kind: ProcessKind::Besq0,
        t0: 0.0,
        dt: dy,
        values,
    })
}

pub fn sample_y(l: f64, y_max: f64, dy: f64, rng: RngStream) -> Result<TwoSidedPath> {
    ensure(l >= 0.0 && l.is_finite(), || format!("l = {l} must be >= 0"))?;
    check_step("y_max", y_max)?;
    check_step("dy", dy)?;
    let mut r = rng.rng();
    let left = besq0_until_absorbed(l, dy, &mut r)?;
    let steps = grid_steps(y_max, dy);
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = l;
    values.push(x);
    for _ in 0..steps {
        x = besq2_step(x, dy, &mut r);
        values.push(x);
    }
    Ok(TwoSidedPath {
        left,
        right: Path {
            kind: ProcessKind::Besq2,
            t0: 0.0,
            dt: dy,
            values,
        },
        l,
    })
}

/// Y_{l,a}: like [`sample_y`] but the right half switches from BESQ(2) to
/// BESQ(0) at level `a`. A switch strictly inside a grid cell is handled by
/// composing the two exact transitions.
pub fn sample_y_la(l: f64, a: f64, y_max: f64, dy: f64, rng: RngStream) -> Result<TwoSidedPath> {
    ensure(l >= 0.0 && l.is_finite(), || format!("l = {l} must be >= 0"))?;
    ensure(a >= 0.0, || format!("a = {a} must be >= 0"))?;
    ensure(y_max > a, || format!("y_max = {y_max} must exceed a = {a}"))?;
    check_step("dy", dy)?;
    let mut r = rng.rng();
    let left = besq0_until_absorbed(l, dy, &mut r)?;
    let steps = grid_steps(y_max, dy);
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = l;
    values.push(x);
    for i in 0..steps {
        let (y0, y1) = (i as f64 * dy, (i + 1) as f64 * dy);
        x = if y1 <= a + 1e-12 * dy {
            besq2_step(x, dy, &mut r)
        } else if y0 >= a - 1e-12 * dy {
            besq0_step(x, dy, &mut r)
        } else {
            let mid = besq2_step(x, a - y0, &mut r);
            besq0_step(mid, y1 - a, &mut r)
        };
        values.push(x);
    }
    Ok(TwoSidedPath {
        left,
        right: Path {
            kind: ProcessKind::Besq2Then0,
            t0: 0.0,
            dt: dy,
            values,
        },
        l,
    })
}

/// Standard three-dimensional Brownian bridge from 0 to 0 on [0, 1], sampled
/// sequentially on `n_steps` equal steps. Returns the interleaved coordinates.
pub fn standard_bridge3<R: Rng + ?Sized>(n_steps: usize, rng: &mut R) -> Vec<[f64; 3]> {
    let h = 1.0 / n_steps as f64;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut b = [0.0; 3];
    out.push(b);
    for k in 0..n_steps - 1 {
        let rem = 1.0 - k as f64 * h;
        let keep = (rem - h) / rem;
        let sd = (h * (rem - h) / rem).sqrt();
        for c in &mut b {
            let z: f64 = rng.sample(StandardNormal);
            *c = *c * keep + sd * z;
        }
        out.push(b);
    }
    out.push([0.0; 3]);
    out
}

/// Norm of the Bessel(3) bridge from `start` to 0 over unit time, expressed
/// through a standard bridge: |(1 - u) start e1 + b_u|.
#[inline]
pub fn bridge_norms(bridge: &[[f64; 3]], start: f64, out: &mut Vec<f64>) {
    let n = bridge.len() - 1;
    out.clear();
    for (k, b) in bridge.iter().enumerate() {
        let drift = start * (1.0 - k as f64 / n as f64);
        let x = drift + b[0];
        out.push((x * x + b[1] * b[1] + b[2] * b[2]).sqrt());
    }
}

/// Trapezoid value of ∫_0^1 |(1 - u) a e1 + b_u| du for a standard bridge `b`.
#[inline]
pub fn bridge_norm_integral(bridge: &[[f64; 3]], a: f64) -> f64 {
    let n = bridge.len() - 1;
    let h = 1.0 / n as f64;
    let mut sum = 0.5 * a;
    for (k, b) in bridge.iter().enumerate().take(n).skip(1) {
        let x = a * (1.0 - k as f64 * h) + b[0];
        sum += (x * x + b[1] * b[1] + b[2] * b[2]).sqrt();
    }
    sum * h
}

/// Bessel(3) bridge from `l_half` at u = 0 to 0 at u = v.
pub fn sample_bessel3_bridge(l_half: f64, v: f64, n_steps: usize, rng: RngStream) -> Result<Path> {
    ensure(l_half >= 0.0 && l_half.is_finite(), || format!("l_half = {l_half} must be >= 0"))?;
    check_step("v", v)?;
    ensure(n_steps >= 2, || format!("n_steps = {n_steps} must be >= 2"))?;
    let mut r = rng.rng();
    let bridge = standard_bridge3(n_steps, &mut r);
    let sv = v.sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    bridge_norms(&bridge, l_half / sv, &mut values);
    values.iter_mut().for_each(|x| *x *= sv);
    values[0] = l_half;
    values[n_steps] = 0.0;
    Ok(Path {
        kind: ProcessKind::Bessel3Bridge,
        t0: 0.0,
        dt: v / n_steps as f64,
        values,
    })
}

/// Bessel(2) process from `start`: norm of planar Brownian motion from (start, 0).
pub fn sample_bessel2(start: f64, t: f64, dt: f64, rng: RngStream) -> Result<Path> {
    ensure(start >= 0.0 && start.is_finite(), || format!("start = {start} must be >= 0"))?;
    check_step("t", t)?;
    check_step("dt", dt)?;
    let steps = grid_steps(t, dt);
    let h = t / steps as f64;
    let s = h.sqrt();
    let mut r = rng.rng();
    let (mut x, mut y) = (start, 0.0f64);
    let mut values = Vec::with_capacity(steps + 1);
    values.push(start);
    for _ in 0..steps {
        let z1: f64 = r.sample(StandardNormal);
        let z2: f64 = r.sample(StandardNormal);
        x += s * z1;
        y += s * z2;
        values.push(x.hypot(y));
    }
    Ok(Path {
        kind: ProcessKind::Bessel2,
        t0: 0.0,
        dt: h,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_shape_and_determinism() {
        let p = sample_brownian(1.0, 1.0, RngStream::from_seed(1)).unwrap();
        assert_eq!(p.values.len(), 2);
        assert_eq!(p.values[0], 0.0);
        let a = sample_brownian(2.0, 0.01, RngStream::new(5, 9)).unwrap();
        let b = sample_brownian(2.0, 0.01, RngStream::new(5, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values.len(), 201);
        assert!(sample_brownian(1.0, 2.0, RngStream::from_seed(1)).is_err());
        assert!(sample_brownian(-1.0, 0.1, RngStream::from_seed(1)).is_err());
    }

    #[test]
    fn besq_errors_and_absorption() {
        assert!(sample_besq(1, 1.0, 1.0, 0.1, RngStream::from_seed(0)).is_err());
        let z = sample_besq(0, 0.0, 2.0, 0.1, RngStream::from_seed(0)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        for s in 0..50 {
            let p = sample_besq(0, 1.0, 3.0, 0.05, RngStream::new(3, s)).unwrap();
            if let Some(i) = p.values.iter().position(|&v| v == 0.0) {
                assert!(p.values[i..].iter().all(|&v| v == 0.0));
            }
            assert!(p.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn bridge_endpoints_are_pinned() {
        for s in 0..20 {
            let p = sample_bessel3_bridge(0.7, 1.3, 64, RngStream::new(2, s)).unwrap();
            assert_eq!(p.values[0], 0.7);
            assert_eq!(p.values[64], 0.0);
            assert!(p.values[1..64].iter().all(|&v| v > 0.0));
        }
        assert!(sample_bessel3_bridge(0.5, 1.0, 1, RngStream::from_seed(0)).is_err());
    }

    #[test]
    fn two_sided_paths() {
        let y = sample_y(0.0, 1.0, 0.1, RngStream::from_seed(4)).unwrap();
        assert_eq!(y.left.values, vec![0.0]);
        let y = sample_y(1.5, 1.0, 0.1, RngStream::from_seed(4)).unwrap();
        assert_eq!(y.left.values[0], 1.5);
        assert_eq!(y.right.values[0], 1.5);
        assert_eq!(y.left.last(), 0.0);
        assert!(sample_y_la(1.0, 2.0, 1.0, 0.1, RngStream::from_seed(0)).is_err());
    }

    #[test]
    fn bridge_integral_matches_norms() {
        let mut r = RngStream::from_seed(8).rng();
        let b = standard_bridge3(32, &mut r);
        let mut v = Vec::new();
        bridge_norms(&b, 0.4, &mut v);
        let trap = crate::quad::trapezoid(&v, 1.0 / 32.0);
        assert!((trap - bridge_norm_integral(&b, 0.4)).abs() < 1e-14);
    }
}
