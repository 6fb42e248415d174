//! Binned local times of piecewise-linear paths, compact profiles and the
//! self-intersection energy ∫(L + f)².
//!
//! Bins are centred on the lattice k·dy: bin k covers [(k - ½)dy, (k + ½)dy).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::samplers::{Path, ProcessKind};

/// Local time per bin; `y0` is the left edge of the first bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeField {
    pub y0: f64,
    pub dy: f64,
    pub values: Vec<f64>,
    pub t: f64,
}

impl LocalTimeField {
    /// Σ values·dy, which equals the elapsed time.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dy
    }

    /// Centre of bin `i`.
    pub fn center(&self, i: usize) -> f64 {
        self.y0 + (i as f64 + 0.5) * self.dy
    }

    /// Lattice index of the first bin.
    pub fn first_index(&self) -> i64 {
        (self.y0 / self.dy + 0.5).round() as i64
    }

    /// Value of the bin containing `y`.
    pub fn at(&self, y: f64) -> f64 {
        let k = (y / self.dy).round() as i64 - self.first_index();
        if k < 0 {
            return 0.0;
        }
        self.values.get(k as usize).copied().unwrap_or(0.0)
    }
}

/// Growable occupation histogram on the lattice, filled segment by segment.
#[derive(Clone, Debug)]
pub struct Occupation {
    dy: f64,
    /// lattice index of bins[0]
    offset: i64,
    bins: Vec<f64>,
    time: f64,
}

impl Occupation {
    pub fn new(dy: f64) -> Self {
        Self {
            dy,
            offset: 0,
            bins: Vec::new(),
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn ensure_range(&mut self, lo: i64, hi: i64) {
        if self.bins.is_empty() {
            self.offset = lo;
            self.bins = vec![0.0; (hi - lo + 1) as usize];
            return;
        }
        if lo < self.offset {
            let extra = (self.offset - lo) as usize + 16;
            let mut grown = vec![0.0; extra + self.bins.len()];
            grown[extra..].copy_from_slice(&self.bins);
            self.bins = grown;
            self.offset -= extra as i64;
        }
        let top = self.offset + self.bins.len() as i64 - 1;
        if hi > top {
            self.bins.resize(self.bins.len() + (hi - top) as usize + 16, 0.0);
        }
    }

    #[inline]
    fn index(&self, y: f64) -> i64 {
        (y / self.dy + 0.5).floor() as i64
    }

    /// Adds the occupation of the linear segment from `a` to `b` lasting `dt`.
    pub fn add_segment(&mut self, a: f64, b: f64, dt: f64) {
        self.add_segment_with(a, b, dt, |_, _| {});
    }

    /// As [`Occupation::add_segment`], reporting (old, new) occupation of every touched bin.
    fn add_segment_with(&mut self, a: f64, b: f64, dt: f64, mut hook: impl FnMut(f64, f64)) {
        self.time += dt;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (ka, kb) = (self.index(lo), self.index(hi));
        self.ensure_range(ka, kb);
        let off = self.offset;
        let mut bump = |bins: &mut [f64], k: i64, add: f64| {
            let cell = &mut bins[(k - off) as usize];
            let old = *cell;
            *cell += add;
            hook(old, *cell);
        };
        if ka == kb {
            bump(&mut self.bins, ka, dt);
            return;
        }
        let rate = dt / (hi - lo);
        let mut left = lo;
        for k in ka..kb {
            let edge = (k as f64 + 0.5) * self.dy;
            bump(&mut self.bins, k, (edge - left) * rate);
            left = edge;
        }
        bump(&mut self.bins, kb, (hi - left) * rate);
    }

    /// Adds every segment of a sampled path.
    pub fn add_path(&mut self, values: &[f64], dt: f64) {
        for w in values.windows(2) {
            self.add_segment(w[0], w[1], dt);
        }
        if values.len() == 1 {
            let k = self.index(values[0]);
            self.ensure_range(k, k);
        }
    }

    /// Trimmed field with leading and trailing empty bins removed.
    pub fn field(&self) -> LocalTimeField {
        let first = self.bins.iter().position(|&v| v > 0.0).unwrap_or(0);
        let last = self.bins.iter().rposition(|&v| v > 0.0).unwrap_or(first);
        let values: Vec<f64> = if self.bins.is_empty() {
            vec![0.0]
        } else {
            self.bins[first..=last].iter().map(|v| v / self.dy).collect()
        };
        LocalTimeField {
            y0: ((self.offset + first as i64) as f64 - 0.5) * self.dy,
            dy: self.dy,
            values,
            t: self.time,
        }
    }

    /// dy Σ_k (L_k + f(k dy))² over the union of both supports.
    pub fn energy(&self, f: &CompactProfile) -> f64 {
        let inv = 1.0 / self.dy;
        let mut total: f64 = 0.0;
        let mut covered = (i64::MAX, i64::MIN);
        if !self.bins.is_empty() {
            let top = self.offset + self.bins.len() as i64 - 1;
            covered = (self.offset, top);
            for (i, &occ) in self.bins.iter().enumerate() {
                let y = (self.offset + i as i64) as f64 * self.dy;
                let v = occ * inv + f.eval(y);
                total += v * v;
            }
        }
        total += f.lattice_sum_sq_outside(self.dy, covered);
        total * self.dy
    }
}

/// Occupation histogram that keeps dy Σ L_k² current as segments arrive.
#[derive(Clone, Debug)]
pub struct RunningEnergy {
    occ: Occupation,
    /// Σ occupation², i.e. dy² Σ L_k²
    sum_sq: f64,
}

impl RunningEnergy {
    pub fn new(dy: f64) -> Self {
        Self {
            occ: Occupation::new(dy),
            sum_sq: 0.0,
        }
    }

    pub fn add_segment(&mut self, a: f64, b: f64, dt: f64) {
        let mut delta = 0.0;
        self.occ.add_segment_with(a, b, dt, |old, new| delta += new * new - old * old);
        self.sum_sq += delta;
    }

    /// dy Σ_k L_k², equal to `occupation().energy(&CompactProfile::zero())`.
    pub fn energy(&self) -> f64 {
        self.sum_sq / self.occ.dy
    }

    pub fn occupation(&self) -> &Occupation {
        &self.occ
    }
}

/// Occupation-time field of the linear interpolant of a Brownian path.
pub fn local_time_field(path: &Path, dy: f64) -> Result<LocalTimeField> {
    ensure(!path.values.is_empty(), || "empty path".into())?;
    ensure(path.kind == ProcessKind::Brownian, || format!("{:?} path is not Brownian", path.kind))?;
    ensure(dy > 0.0 && dy.is_finite(), || format!("dy = {dy} must be > 0"))?;
    let mut occ = Occupation::new(dy);
    occ.add_path(&path.values, path.dt);
    Ok(occ.field())
}

/// ∫(L + f)² dy with f sampled at the bin centres.
pub fn energy(ltf: &LocalTimeField, f: &CompactProfile) -> f64 {
    let k0 = ltf.first_index();
    let mut total = 0.0;
    for (i, &l) in ltf.values.iter().enumerate() {
        let v = l + f.eval((k0 + i as i64) as f64 * ltf.dy);
        total += v * v;
    }
    let covered = (k0, k0 + ltf.values.len() as i64 - 1);
    total += f.lattice_sum_sq_outside(ltf.dy, covered);
    total * ltf.dy
}

/// Nonnegative piecewise-linear function with knots y0 + i·dy, zero outside
/// the knot range and vanishing outside [-m, m].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactProfile {
    pub y0: f64,
    pub dy: f64,
    pub values: Vec<f64>,
    pub m: f64,
}

impl CompactProfile {
    pub fn new(y0: f64, dy: f64, values: Vec<f64>, m: f64) -> Result<Self> {
        ensure(dy > 0.0, || format!("knot spacing {dy} must be > 0"))?;
        ensure(m > 0.0, || format!("support bound {m} must be > 0"))?;
        ensure(values.iter().all(|v| v.is_finite() && *v >= 0.0), || {
            "profile values must be finite and >= 0".into()
        })?;
        let p = Self { y0, dy, values, m };
        let (lo, hi) = p.support();
        ensure(lo >= -m - 1e-9 * m && hi <= m + 1e-9 * m, || {
            format!("support [{lo}, {hi}] exceeds [-{m}, {m}]")
        })?;
        Ok(p)
    }

    /// The identically zero profile.
    pub fn zero() -> Self {
        Self {
            y0: 0.0,
            dy: 1.0,
            values: vec![0.0],
            m: 1.0,
        }
    }

    /// Tent of the given height on [center - half_width, center + half_width].
    pub fn bump(center: f64, half_width: f64, height: f64, m: f64) -> Result<Self> {
        ensure(half_width > 0.0, || "bump width must be > 0".into())?;
        CompactProfile::new(center - half_width, half_width, vec![0.0, height, 0.0], m)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Closed interval outside which the profile vanishes.
    pub fn support(&self) -> (f64, f64) {
        let first = self.values.iter().position(|&v| v > 0.0);
        let last = self.values.iter().rposition(|&v| v > 0.0);
        match (first, last) {
            (Some(a), Some(b)) => (
                self.y0 + a.saturating_sub(1) as f64 * self.dy,
                self.y0 + (b + 1).min(self.values.len() - 1) as f64 * self.dy,
            ),
            _ => (0.0, 0.0),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let t = (y - self.y0) / self.dy;
        if t < 0.0 {
            return 0.0;
        }
        let i = t.floor() as usize;
        let n = self.values.len();
        if i + 1 >= n {
            return if i + 1 == n && t == i as f64 { self.values[i] } else { 0.0 };
        }
        let frac = t - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// f̃(y) = f(-y).
    pub fn reflected(&self) -> Self {
        let n = self.values.len();
        Self {
            y0: -(self.y0 + (n - 1) as f64 * self.dy),
            dy: self.dy,
            values: self.values.iter().rev().copied().collect(),
            m: self.m,
        }
    }

    /// f_α(z) = α f(z / α), with support bound α·m.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            y0: self.y0 * alpha,
            dy: self.dy * alpha,
            values: self.values.iter().map(|v| v * alpha).collect(),
            m: self.m * alpha,
        }
    }

    /// ∫ f² dy by trapezoid on the knots.
    pub fn integral_sq(&self) -> f64 {
        crate::quad::trapezoid(&self.values.iter().map(|v| v * v).collect::<Vec<_>>(), self.dy)
    }

    /// dy-lattice sum of f² over lattice indices outside `covered`.
    fn lattice_sum_sq_outside(&self, dy: f64, covered: (i64, i64)) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let (lo, hi) = self.support();
        let (klo, khi) = ((lo / dy).floor() as i64, (hi / dy).ceil() as i64);
        (klo..=khi)
            .filter(|k| *k < covered.0 || *k > covered.1)
            .map(|k| self.eval(k as f64 * dy).powi(2))
            .sum()
    }

    /// Two-column CSV `y,value` with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "y,value")?;
        let n = self.values.len();
        let pad_left = self.values.first().is_some_and(|&v| v != 0.0);
        let pad_right = self.values.last().is_some_and(|&v| v != 0.0);
        if pad_left {
            writeln!(w, "{:.17e},0", self.y0 - self.dy)?;
        }
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.17e},{:.17e}", self.y0 + i as f64 * self.dy, v)?;
        }
        if pad_right {
            writeln!(w, "{:.17e},0", self.y0 + n as f64 * self.dy)?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`CompactProfile::write_csv`]. Knots must be
    /// strictly increasing and equally spaced; the support bound is taken as
    /// the largest |y| of the knot range unless `m` is given.
    pub fn read_csv<R: BufRead>(r: R, m: Option<f64>) -> Result<Self> {
        let mut ys = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with('y')) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.map(str::trim)
                    .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            ys.push(parse(parts.next())?);
            vs.push(parse(parts.next())?);
        }
        if ys.len() < 2 {
            return Err(Error::Parse("profile needs at least two knots".into()));
        }
        let dy = ys[1] - ys[0];
        for w in ys.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Parse("knots must be strictly increasing".into()));
            }
            if ((w[1] - w[0]) - dy).abs() > 1e-9 * dy.abs().max(1.0) {
                return Err(Error::Parse("knots must be equally spaced".into()));
            }
        }
        let bound = m.unwrap_or_else(|| ys[0].abs().max(ys[ys.len() - 1].abs()));
        CompactProfile::new(ys[0], dy, vs, bound)
    }
}

/// Local-time profile of the path restricted to [0, s], recentred at X_s.
///
/// Knots sit on the lattice relative to X_s; the support bound is the
/// outermost knot edge, at most max|X_u - X_s| + 1.5 dy.
pub fn recentered_profile(path: &Path, s: f64, dy: f64) -> Result<CompactProfile> {
    ensure(path.kind == ProcessKind::Brownian, || "recentred profile needs a Brownian path".into())?;
    ensure(s > 0.0, || format!("s = {s} must be > 0"))?;
    ensure(s <= path.duration() * (1.0 + 1e-12), || {
        format!("s = {s} exceeds path duration {}", path.duration())
    })?;
    ensure(dy > 0.0, || format!("dy = {dy} must be > 0"))?;
    let steps = ((s / path.dt) - 1e-9).ceil() as usize;
    let end = path.values[steps.min(path.values.len() - 1)];
    let mut occ = Occupation::new(dy);
    let mut elapsed = 0.0;
    for i in 0..steps {
        let (a, b) = (path.values[i] - end, path.values[i + 1] - end);
        let dt = path.dt.min(s - elapsed);
        // partial last step: linear interpolation of the segment
        let b = if dt < path.dt { a + (b - a) * dt / path.dt } else { b };
        occ.add_segment(a, b, dt);
        elapsed += dt;
    }
    let field = occ.field();
    let k0 = field.first_index();
    let mut values = Vec::with_capacity(field.values.len() + 2);
    values.push(0.0);
    values.extend_from_slice(&field.values);
    values.push(0.0);
    let y0 = (k0 - 1) as f64 * dy;
    let top = y0 + (values.len() - 1) as f64 * dy;
    let m = y0.abs().max(top.abs());
    CompactProfile::new(y0, dy, values, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::samplers::sample_brownian;
    use proptest::prelude::*;

    fn constant_path(t: f64, n: usize) -> Path {
        Path {
            kind: ProcessKind::Brownian,
            t0: 0.0,
            dt: t / n as f64,
            values: vec![0.0; n + 1],
        }
    }

    #[test]
    fn running_energy_tracks_full_sum() {
        let p = sample_brownian(2.0, 1.0 / 256.0, RngStream::from_seed(9)).unwrap();
        let mut run = RunningEnergy::new(1.0 / 32.0);
        for w in p.values.windows(2) {
            run.add_segment(w[0], w[1], p.dt);
        }
        let full = run.occupation().energy(&CompactProfile::zero());
        assert!((run.energy() - full).abs() < 1e-10 * full);
    }

    #[test]
    fn constant_path_fills_one_bin() {
        let f = local_time_field(&constant_path(2.0, 10), 0.1).unwrap();
        assert_eq!(f.values.len(), 1);
        assert!((f.values[0] - 20.0).abs() < 1e-12);
        assert!((f.center(0)).abs() < 1e-12);
    }

    #[test]
    fn empty_or_wrong_kind_rejected() {
        let mut p = constant_path(1.0, 4);
        p.values.clear();
        assert!(local_time_field(&p, 0.1).is_err());
        let mut p = constant_path(1.0, 4);
        p.kind = ProcessKind::Besq2;
        assert!(local_time_field(&p, 0.1).is_err());
    }

    #[test]
    fn energy_identities() {
        let zero_field = LocalTimeField {
            y0: -0.05,
            dy: 0.1,
            values: vec![0.0],
            t: 0.0,
        };
        assert_eq!(energy(&zero_field, &CompactProfile::zero()), 0.0);
        let f = CompactProfile::bump(0.3, 0.5, 2.0, 1.0).unwrap();
        let want: f64 = (-20..=20).map(|k| f.eval(k as f64 * 0.1).powi(2)).sum::<f64>() * 0.1;
        assert!((energy(&zero_field, &f) - want).abs() < 1e-12);

        let p = sample_brownian(1.0, 1e-3, RngStream::from_seed(3)).unwrap();
        let l = local_time_field(&p, 0.05).unwrap();
        let cross: f64 = l
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * f.eval((l.first_index() + i as i64) as f64 * l.dy))
            .sum::<f64>()
            * l.dy;
        let lhs = energy(&l, &f);
        let rhs = energy(&l, &CompactProfile::zero()) + 2.0 * cross + energy(&zero_field_on(&l), &f);
        assert!((lhs - rhs).abs() < 1e-10 * lhs);
    }

    fn zero_field_on(l: &LocalTimeField) -> LocalTimeField {
        LocalTimeField {
            values: vec![0.0; l.values.len()],
            ..l.clone()
        }
    }

    #[test]
    fn occupation_energy_matches_field_energy() {
        let p = sample_brownian(2.0, 1e-3, RngStream::from_seed(9)).unwrap();
        let mut occ = Occupation::new(1.0 / 64.0);
        occ.add_path(&p.values, p.dt);
        let f = CompactProfile::bump(-0.2, 0.4, 0.7, 1.0).unwrap();
        let a = occ.energy(&f);
        let b = energy(&occ.field(), &f);
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn profile_transforms() {
        let f = CompactProfile::bump(0.5, 0.25, 1.0, 1.0).unwrap();
        let g = f.reflected();
        for y in [-0.8, -0.5, -0.3, 0.0, 0.4, 0.6] {
            assert!((g.eval(y) - f.eval(-y)).abs() < 1e-15);
        }
        let h = f.scaled(2.0);
        assert!((h.eval(1.0) - 2.0 * f.eval(0.5)).abs() < 1e-15);
        assert_eq!(h.m, 2.0);
        assert!(CompactProfile::bump(0.9, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = CompactProfile::new(-0.5, 0.25, vec![0.0, 0.3, 1.0 / 3.0, 0.2, 0.0], 1.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = CompactProfile::read_csv(buf.as_slice(), Some(1.0)).unwrap();
        assert_eq!(f, g);
        assert!(CompactProfile::read_csv("y,value\n0,1\n0,2\n".as_bytes(), None).is_err());
    }

    #[test]
    fn recentered_profile_basics() {
        let p = sample_brownian(1.0, 1e-3, RngStream::from_seed(12)).unwrap();
        let prof = recentered_profile(&p, 0.5, 0.02).unwrap();
        let mass = prof.values.iter().sum::<f64>() * prof.dy;
        assert!((mass - 0.5).abs() < 1e-10);
        // value at 0 equals the unshifted field at the bin of X_s
        let xs = p.values[500];
        let mut occ = Occupation::new(0.02);
        occ.add_path(&p.values[..=500], p.dt);
        let field = occ.field();
        let direct = field.at(xs);
        let spread = [-0.02, 0.02]
            .iter()
            .map(|d| (field.at(xs + d) - direct).abs())
            .fold(0.0, f64::max);
        assert!((prof.eval(0.0) - direct).abs() <= spread + 1e-12);
        let range = p.values[..=500].iter().map(|v| (v - xs).abs()).fold(0.0, f64::max);
        assert!(prof.m <= range + 1.5 * 0.02 + 1e-12);

        let one = recentered_profile(&p, p.dt, 0.02).unwrap();
        assert!((one.values.iter().sum::<f64>() * 0.02 - p.dt).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn occupation_identity(seed in 0u64..1000, dy in 0.005f64..0.2, t in 0.1f64..3.0) {
            let p = sample_brownian(t, 1e-3_f64.min(t), RngStream::from_seed(seed)).unwrap();
            let f = local_time_field(&p, dy).unwrap();
            prop_assert!((f.mass() - t).abs() <= 1e-10 * t);
            prop_assert!(f.values.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn reflection_equivariance(seed in 0u64..1000) {
            let p = sample_brownian(1.0, 1e-2, RngStream::from_seed(seed)).unwrap();
            let a = local_time_field(&p, 0.05).unwrap();
            let b = local_time_field(&p.negated(), 0.05).unwrap();
            prop_assert_eq!(a.values.len(), b.values.len());
            for (x, y) in a.values.iter().zip(b.values.iter().rev()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
            prop_assert!((a.y0 + b.y0 + a.dy * a.values.len() as f64).abs() < 1e-12);
        }
    }
}
