//! Suite reports.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::stats::McEstimate;

/// How `observed` is compared with `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |observed - target| <= tolerance
    Within,
    /// observed <= target + tolerance
    AtMost,
    /// observed >= target - tolerance
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, observed: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        let pass = observed.is_finite()
            && match comparison {
                Comparison::Within => (observed - target).abs() <= tolerance,
                Comparison::AtMost => observed <= target + tolerance,
                Comparison::AtLeast => observed >= target - tolerance,
            };
        Self {
            name: name.into(),
            observed,
            target,
            tolerance,
            comparison,
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub wall_time_s: f64,
    /// free-form context such as truncation budgets
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Pass flag over the checks whose names start with `prefix`.
    pub fn passes(&self, prefix: &str) -> bool {
        let mut any = false;
        for c in self.checks.iter().filter(|c| c.name.starts_with(prefix)) {
            if !c.pass {
                return false;
            }
            any = true;
        }
        any
    }
}

/// Collects checks while a suite runs.
pub struct Recorder {
    suite: String,
    seeds: Vec<u64>,
    checks: Vec<Check>,
    notes: Vec<String>,
    start: Instant,
}

impl Recorder {
    pub fn new(suite: &str, seed: u64) -> Self {
        Self {
            suite: suite.into(),
            seeds: vec![seed],
            checks: Vec::new(),
            notes: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn within(&mut self, name: impl Into<String>, observed: f64, target: f64, tolerance: f64) {
        self.checks.push(Check::new(name, observed, target, tolerance, Comparison::Within));
    }

    pub fn at_most(&mut self, name: impl Into<String>, observed: f64, bound: f64, tolerance: f64) {
        self.checks.push(Check::new(name, observed, bound, tolerance, Comparison::AtMost));
    }

    pub fn at_least(&mut self, name: impl Into<String>, observed: f64, bound: f64, tolerance: f64) {
        self.checks.push(Check::new(name, observed, bound, tolerance, Comparison::AtLeast));
    }

    /// |a - b| within `k` combined standard errors.
    pub fn agree(&mut self, name: impl Into<String>, a: McEstimate, b: McEstimate, k: f64) {
        self.within(name, a.mean, b.mean, k * a.stderr.hypot(b.stderr));
    }

    /// Estimate within `k` standard errors of an exact value.
    pub fn near(&mut self, name: impl Into<String>, a: McEstimate, exact: f64, k: f64) {
        self.within(name, a.mean, exact, k * a.stderr);
    }

    pub fn flag(&mut self, name: impl Into<String>, ok: bool) {
        self.within(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn seed(&mut self, seed: u64) {
        if !self.seeds.contains(&seed) {
            self.seeds.push(seed);
        }
    }

    pub fn finish(self) -> SuiteReport {
        SuiteReport {
            pass: !self.checks.is_empty() && self.checks.iter().all(|c| c.pass),
            suite: self.suite,
            checks: self.checks,
            seeds: self.seeds,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            notes: self.notes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert!(Check::new("a", 1.05, 1.0, 0.1, Comparison::Within).pass);
        assert!(!Check::new("a", 1.2, 1.0, 0.1, Comparison::Within).pass);
        assert!(Check::new("a", 1.05, 1.0, 0.1, Comparison::AtMost).pass);
        assert!(!Check::new("a", 1.2, 1.0, 0.1, Comparison::AtMost).pass);
        assert!(Check::new("a", 0.95, 1.0, 0.1, Comparison::AtLeast).pass);
        assert!(!Check::new("a", f64::NAN, 1.0, 1.0, Comparison::Within).pass);
    }

    #[test]
    fn overall_pass_is_conjunction() {
        let mut r = Recorder::new("demo", 1);
        r.flag("x.one", true);
        r.flag("x.two", true);
        assert!(r.finish().pass);
        let mut r = Recorder::new("demo", 1);
        r.flag("x.one", true);
        r.flag("y.two", false);
        let rep = r.finish();
        assert!(!rep.pass);
        assert!(rep.passes("x."));
        assert!(!rep.passes("y."));
        assert!(!rep.passes("z."));
        assert!(!Recorder::new("empty", 1).finish().pass);
    }
}
