//! Simple random walk on dy·ℤ with time step dy², the Brownian engine of the
//! penalized-expectation suites.
//!
//! With n_k the number of steps spent at site k, L_k = dy n_k and the lattice
//! energy dy Σ L_k² = dy³ Σ n_k² underestimates ∫(L_t^y)² dy by dy·t on
//! average: the diagonal adds dy·t and the return sum
//! Σ_m P(S_m = 0) = 2√(m/2π) - 1 + o(1) removes 2dy·t. [`LatticeWalk::energy`]
//! adds dy·t back.

use rand::RngCore;

use crate::error::{ensure, Result};
use crate::kernels::PathEvent;
use crate::localtime::CompactProfile;

/// Number of lattice steps covering `t` at level step `dy`; `t` must be a
/// multiple of dy².
pub fn lattice_steps(t: f64, dy: f64) -> Result<usize> {
    ensure(dy > 0.0 && dy.is_finite(), || format!("dy = {dy} must be > 0"))?;
    ensure(t >= 0.0 && t.is_finite(), || format!("t = {t} must be >= 0"))?;
    let k = (t / (dy * dy)).round();
    ensure((k * dy * dy - t).abs() <= 1e-9 * t.max(1.0), || {
        format!("t = {t} is not a multiple of dy² = {}", dy * dy)
    })?;
    Ok(k as usize)
}

#[derive(Clone, Debug)]
pub struct LatticeWalk {
    dy: f64,
    counts: Vec<u32>,
    /// index of site 0 in `counts`
    origin: i64,
    site: i64,
    lo: i64,
    hi: i64,
    sum_sq: u64,
    steps: u64,
    bits: u64,
    left: u32,
}

impl LatticeWalk {
    /// A walk at 0 with room for `max_steps` steps.
    pub fn new(dy: f64, max_steps: usize) -> Result<Self> {
        ensure(dy > 0.0 && dy.is_finite(), || format!("dy = {dy} must be > 0"))?;
        Ok(Self {
            dy,
            counts: vec![0; 2 * max_steps + 1],
            origin: max_steps as i64,
            site: 0,
            lo: 0,
            hi: 0,
            sum_sq: 0,
            steps: 0,
            bits: 0,
            left: 0,
        })
    }

    pub fn reset(&mut self) {
        let (a, b) = ((self.lo + self.origin) as usize, (self.hi + self.origin) as usize);
        self.counts[a..=b].iter_mut().for_each(|c| *c = 0);
        self.site = 0;
        self.lo = 0;
        self.hi = 0;
        self.sum_sq = 0;
        self.steps = 0;
        self.left = 0;
    }

    /// Takes `k` steps; each step first books dy² of time at the current site.
    pub fn advance<R: RngCore + ?Sized>(&mut self, k: usize, rng: &mut R) {
        for _ in 0..k {
            let c = &mut self.counts[(self.site + self.origin) as usize];
            self.sum_sq += 2 * u64::from(*c) + 1;
            *c += 1;
            if self.left == 0 {
                self.bits = rng.next_u64();
                self.left = 64;
            }
            self.site += if self.bits & 1 == 1 { 1 } else { -1 };
            self.bits >>= 1;
            self.left -= 1;
            self.lo = self.lo.min(self.site);
            self.hi = self.hi.max(self.site);
        }
        self.steps += k as u64;
        debug_assert!(self.site.unsigned_abs() as i64 <= self.origin);
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dy * self.dy
    }

    pub fn position(&self) -> f64 {
        self.site as f64 * self.dy
    }

    /// Local time at site k, dy·n_k.
    pub fn local_time(&self, k: i64) -> f64 {
        if k < self.lo || k > self.hi {
            return 0.0;
        }
        self.dy * f64::from(self.counts[(k + self.origin) as usize])
    }

    /// ∫(L_t^y)² dy, lattice value plus dy·t.
    pub fn energy(&self) -> f64 {
        self.dy.powi(3) * self.sum_sq as f64 + self.dy * self.time()
    }

    /// ∫(L_t^y + f(y))² dy.
    pub fn energy_with(&self, f: &CompactProfile) -> f64 {
        if f.is_zero() {
            return self.energy();
        }
        let (a, b) = f.support();
        let from = ((a / self.dy).floor() as i64).max(self.lo);
        let to = ((b / self.dy).ceil() as i64).min(self.hi);
        let cross: f64 = (from..=to).map(|k| self.local_time(k) * f.eval(k as f64 * self.dy)).sum();
        self.energy() + 2.0 * self.dy * cross + f.integral_sq()
    }
}

/// Continuity-corrected indicator of lo < x < hi for a lattice value x: an
/// endpoint hit counts one half.
pub fn soft_indicator(x: f64, lo: f64, hi: f64, dy: f64) -> f64 {
    let tie = 0.25 * dy;
    if (x - lo).abs() < tie || (x - hi).abs() < tie {
        0.5
    } else if x > lo && x < hi {
        1.0
    } else {
        0.0
    }
}

/// Continuity-corrected value of an event on lattice values sampled at the
/// event's grid times.
pub fn lattice_event(event: PathEvent, values: &[f64], dy: f64) -> f64 {
    let end = *values.last().expect("non-empty values");
    match event {
        PathEvent::All => 1.0,
        PathEvent::EndPositive => soft_indicator(end, 0.0, f64::INFINITY, dy),
        PathEvent::AbsEndBelow(c) => soft_indicator(end, -c, c, dy),
        PathEvent::MaxBelow(c) => {
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            soft_indicator(max, f64::NEG_INFINITY, c, dy)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::replicate;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn brute(dy: f64, steps: usize, seed: u64) -> (LatticeWalk, f64) {
        let mut w = LatticeWalk::new(dy, steps).unwrap();
        let mut r = RngStream::from_seed(seed).rng();
        let mut sites = Vec::new();
        for _ in 0..steps {
            sites.push(w.site);
            w.advance(1, &mut r);
        }
        let mut counts: HashMap<i64, u64> = HashMap::new();
        for s in sites {
            *counts.entry(s).or_default() += 1;
        }
        let sq: u64 = counts.values().map(|c| c * c).sum();
        (w, dy.powi(3) * sq as f64 + dy * steps as f64 * dy * dy)
    }

    #[test]
    fn energy_matches_site_counts() {
        let (w, e) = brute(0.05, 3000, 4);
        assert!((w.energy() - e).abs() < 1e-12 * e);
        let total: f64 = (w.lo..=w.hi).map(|k| w.local_time(k) * w.dy).sum();
        assert!((total - w.time()).abs() < 1e-12);
    }

    #[test]
    fn profile_energy_expands_the_square() {
        let (w, _) = brute(0.05, 2000, 9);
        let f = CompactProfile::bump(0.1, 0.4, 0.7, 1.0).unwrap();
        let direct: f64 = (w.lo - 40..=w.hi + 40)
            .map(|k| {
                let y = k as f64 * w.dy;
                (w.local_time(k) + f.eval(y)).powi(2) - f.eval(y).powi(2)
            })
            .sum::<f64>()
            * w.dy;
        let expect = direct + w.dy * w.time() + f.integral_sq();
        assert!((w.energy_with(&f) - expect).abs() < 1e-10, "{} vs {}", w.energy_with(&f), expect);
    }

    #[test]
    fn reset_restores_the_origin() {
        let mut w = LatticeWalk::new(0.1, 500).unwrap();
        let mut r = RngStream::from_seed(2).rng();
        w.advance(500, &mut r);
        w.reset();
        assert_eq!(w.energy(), 0.0);
        assert_eq!(w.position(), 0.0);
        assert!(w.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn mean_energy_matches_closed_form() {
        // E ∫(L_1^y)² dy = (8/3) / √(2π)
        let exact = 8.0 / 3.0 / (2.0 * std::f64::consts::PI).sqrt();
        let dy = 1.0 / 32.0;
        let steps = lattice_steps(1.0, dy).unwrap();
        let rng = RngStream::from_seed(17);
        let m = replicate(40_000, 1, |i, out| {
            let mut w = LatticeWalk::new(dy, steps).unwrap();
            w.advance(steps, &mut rng.replica(i as u64).rng());
            out[0] = w.energy();
        });
        let z = (m[0].mean - exact) / m[0].stderr();
        assert!(z.abs() < 4.0, "mean {} vs {exact}, z = {z}", m[0].mean);
    }

    #[test]
    fn lattice_events_split_ties() {
        let dy = 0.25;
        assert_eq!(lattice_event(PathEvent::EndPositive, &[0.0, 0.25, 0.0], dy), 0.5);
        assert_eq!(lattice_event(PathEvent::EndPositive, &[0.0, 0.25], dy), 1.0);
        assert_eq!(lattice_event(PathEvent::AbsEndBelow(0.5), &[0.0, -0.5], dy), 0.5);
        assert_eq!(lattice_event(PathEvent::MaxBelow(1.0), &[0.0, 1.0, 0.5], dy), 0.5);
        assert_eq!(lattice_event(PathEvent::MaxBelow(1.0), &[0.0, 1.25, 0.5], dy), 0.0);
        assert!(lattice_steps(1.0, 0.3).is_err());
    }

    proptest! {
        #[test]
        fn energy_bounded_by_time_squared_over_spacing(seed in 0u64..500, steps in 1usize..400) {
            // Cauchy–Schwarz over the visited sites
            let dy = 0.1;
            let mut w = LatticeWalk::new(dy, steps).unwrap();
            w.advance(steps, &mut RngStream::from_seed(seed).rng());
            let t = w.time();
            prop_assert!(w.energy() - dy * t <= t * t / dy + 1e-12);
            prop_assert!(w.energy() - dy * t >= t * t / (dy * (w.hi - w.lo + 1) as f64) - 1e-12);
        }
    }
}
