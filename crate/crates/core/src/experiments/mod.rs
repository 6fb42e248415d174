//! Verification suites. Each suite returns a [`SuiteReport`] and is
//! deterministic given its seed.

pub mod exact;
pub mod identities;
pub mod penalized;
pub mod report;
pub mod walk;

pub use exact::{verify_airy, verify_airy_excursion, verify_d1, verify_spectral, verify_structural};
pub use identities::{
    default_bump, verify_afunc, verify_k_constant, verify_lemma_jj, verify_martingale, verify_prop84_shape,
    verify_semigroup,
};
pub use penalized::{verify_leuridan, verify_limit_measure, verify_prop1, verify_prop18};
pub use report::{Check, Comparison, Recorder, SuiteReport};
pub use walk::LatticeWalk;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::PathEvent;
use crate::localtime::CompactProfile;
use crate::rng::RngStream;
use crate::spectral::{build_basis, SpectralBasis};

pub const SUITES: &[&str] = &[
    "spectral",
    "airy",
    "excursion",
    "d1",
    "lemma_jj",
    "afunc",
    "martingale",
    "semigroup",
    "kconst",
    "prop18",
    "limit",
    "leuridan",
    "prop1",
    "prop84",
    "structural",
];

/// Events compared by the limit suite.
pub const LIMIT_EVENTS: [PathEvent; 3] = [PathEvent::EndPositive, PathEvent::MaxBelow(1.0), PathEvent::AbsEndBelow(0.5)];

/// Parameters shared by the suites. `n = None` selects each suite's default
/// replica count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n: Option<usize>,
    pub beta: f64,
    pub m: f64,
    pub s: f64,
    pub t: f64,
    pub dt: f64,
    pub h: f64,
    pub x_max: f64,
    pub n_eig: usize,
    /// outer paths of the E[D_s] estimators
    pub outer: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n: None,
            beta: 1.0,
            m: 1.0,
            s: 0.5,
            t: 4.0,
            dt: 1.0 / 1024.0,
            h: 1e-3,
            x_max: 20.0,
            n_eig: 8,
            outer: 10_000,
        }
    }
}

/// Default replica count of a suite.
pub fn default_n(suite: &str) -> usize {
    match suite {
        "afunc" => 2_000,
        "kconst" => 40_000,
        "prop18" => 200_000,
        "prop84" => 20_000,
        "structural" => 200,
        _ => 100_000,
    }
}

/// Runs suite `name`; `basis` is built from the config when absent.
pub fn run_suite(name: &str, cfg: &SuiteConfig, basis: Option<&SpectralBasis>) -> Result<SuiteReport> {
    if !SUITES.contains(&name) {
        return Err(Error::Parameter(format!("unknown suite {name:?}; expected one of {SUITES:?}")));
    }
    let n = cfg.n.unwrap_or_else(|| default_n(name));
    let rng = RngStream::from_seed(cfg.seed);
    match name {
        "spectral" => return verify_spectral(cfg.x_max, cfg.h, cfg.n_eig),
        "excursion" => return verify_airy_excursion(n, rng),
        "d1" => return verify_d1(n, rng),
        "structural" => return verify_structural(n, rng),
        _ => {}
    }
    let owned;
    let basis = match basis {
        Some(b) => b,
        None => {
            owned = build_basis(cfg.x_max, cfg.h, cfg.n_eig)?;
            &owned
        }
    };
    match name {
        "airy" => verify_airy(basis.rho()),
        "lemma_jj" => verify_lemma_jj(basis, n, rng),
        "afunc" => verify_afunc(basis, n, rng),
        "martingale" => verify_martingale(basis, n, cfg.s, cfg.dt, cfg.outer, (cfg.outer / 2).max(100), rng),
        "semigroup" => verify_semigroup(basis, n, rng),
        "kconst" => verify_k_constant(basis, n, rng),
        "prop18" => {
            let zero = verify_prop18(cfg.beta, &CompactProfile::zero(), basis, n, rng)?;
            let bump = verify_prop18(cfg.beta, &default_bump(), basis, n, rng.fork(100))?;
            Ok(merge("prop18", &[("zero", zero), ("bump", bump)]))
        }
        "limit" => verify_limit_measure(cfg.beta, cfg.s, cfg.t, &LIMIT_EVENTS, basis, n, cfg.outer, rng),
        "leuridan" => verify_leuridan(cfg.m, basis.rho(), n, rng),
        "prop1" => verify_prop1(cfg.m, basis.rho(), n, rng),
        "prop84" => verify_prop84_shape(1.0, basis, n, rng),
        _ => unreachable!(),
    }
}

/// Concatenates reports, prefixing check names with each part's label.
pub fn merge(suite: &str, parts: &[(&str, SuiteReport)]) -> SuiteReport {
    let mut out = SuiteReport {
        suite: suite.into(),
        pass: true,
        checks: Vec::new(),
        seeds: Vec::new(),
        wall_time_s: 0.0,
        notes: Vec::new(),
    };
    for (label, r) in parts {
        out.pass &= r.pass;
        out.checks.extend(r.checks.iter().map(|c| Check {
            name: format!("{label}.{}", c.name),
            ..c.clone()
        }));
        for s in &r.seeds {
            if !out.seeds.contains(s) {
                out.seeds.push(*s);
            }
        }
        out.wall_time_s += r.wall_time_s;
        out.notes.extend(r.notes.iter().map(|n| format!("{label}: {n}")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suite("nope", &SuiteConfig::default(), None).is_err());
    }

    #[test]
    fn merge_prefixes_and_conjoins() {
        let mut a = Recorder::new("x", 1);
        a.flag("one", true);
        let mut b = Recorder::new("y", 2);
        b.flag("two", false);
        let m = merge("xy", &[("a", a.finish()), ("b", b.finish())]);
        assert!(!m.pass);
        assert_eq!(m.checks[0].name, "a.one");
        assert_eq!(m.checks[1].name, "b.two");
        assert_eq!(m.seeds, vec![1, 2]);
    }
}
