//! Subcommands and their dispatch.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Subcommand, ValueEnum};
use edwards::experiments::{default_bump, run_suite, SuiteConfig, LIMIT_EVENTS, SUITES};
use edwards::kernels::{
    a_plus, a_total, alpha_density, chi, density_d1, density_dm, density_ds, j_t, j_uv, k_constant, kbar_rho, kernel_k,
    mean_density_events, ModelParams, PathEvent,
};
use edwards::localtime::CompactProfile;
use edwards::samplers::{sample_bessel3_bridge, sample_besq, sample_brownian, sample_y, Path};
use edwards::spectral::{build_basis, SpectralBasis};
use edwards::RngStream;
use serde_json::{json, Map, Value};

use crate::config::{Format, Params};
use crate::emit::{emit, Cell, Output, Record, Table};
use crate::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("EDWARDS_GIT_DESCRIBE"), ")");

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelOp {
    /// K_l^(mu)(v) by bridge Monte Carlo
    K,
    /// chi_v(l) = K_l^(0)(v) / l
    Chi,
    /// K-bar at rho by the direct and quadrature routes
    Kbar,
    /// hitting density alpha_l(v)
    Alpha,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AOp {
    Total,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DensityOp {
    /// density of the integral of BESQ(2) over [0, 1]
    D1,
    /// density of the integral of BESQ(2) over [0, M]
    Dm,
    /// martingale density D_s along one Brownian path
    Ds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum JOp {
    Juv,
    Jt,
    Kconst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Process {
    Brownian,
    Besq0,
    Besq2,
    Bridge3,
    Y,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues (n, rho_n) of the killed Bessel generator
    Spectrum {
        /// Also write the grid, weights and eigenfunctions to this CSV
        #[arg(long)]
        eigenfunctions: Option<PathBuf>,
    },
    /// Bridge kernels and hitting densities at (l, mu, v)
    Kernel {
        #[arg(long, value_enum, ignore_case = true)]
        op: KernelOp,
    },
    /// The A-functional for the zero profile, the default bump or a profile CSV
    Aconst {
        #[arg(long, value_enum, ignore_case = true, default_value = "total")]
        op: AOp,
        /// Two-column `y,value` profile
        #[arg(long, conflicts_with = "bump")]
        profile: Option<PathBuf>,
        /// Tent of height 1 on [-1/2, 1/2]
        #[arg(long)]
        bump: bool,
    },
    /// Closed-form area densities on a grid, or D_s on a sampled path
    Density {
        #[arg(long, value_enum, ignore_case = true)]
        op: DensityOp,
        /// Evaluation points (comma separated)
        #[arg(long, value_delimiter = ',')]
        x: Vec<f64>,
    },
    /// J_l(u, v), J_l(t) and the constant K
    Jfun {
        #[arg(long, value_enum, ignore_case = true)]
        op: JOp,
    },
    /// Probabilities of path events under the limit measure at time s
    Limit,
    /// Runs a verification suite and reports its checks
    Verify {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
    },
    /// One sampled path as a table
    Sample {
        #[arg(long, value_enum, ignore_case = true)]
        process: Process,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Kernel { .. } => "kernel",
            Command::Aconst { .. } => "aconst",
            Command::Density { .. } => "density",
            Command::Jfun { .. } => "jfun",
            Command::Limit => "limit",
            Command::Verify { .. } => "verify",
            Command::Sample { .. } => "sample",
        }
    }
}

/// Resolved parameters recorded in the output header.
struct Used(Map<String, Value>);

impl Used {
    fn new() -> Self {
        Self(Map::new())
    }

    fn set(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.0.insert(key.into(), v.into());
        self
    }
}

fn basis(p: &Params, used: &mut Used) -> Result<SpectralBasis, CliError> {
    used.set("x_max", p.x_max()).set("h", p.h()).set("n_eig", p.n_eig());
    Ok(build_basis(p.x_max(), p.h(), p.n_eig())?)
}

fn rng(p: &Params) -> RngStream {
    RngStream::from_seed(p.seed())
}

fn default_grid() -> Vec<f64> {
    (1..=200).map(|i| 0.02 * i as f64).collect()
}

fn event_label(e: &PathEvent) -> String {
    match e {
        PathEvent::All => "all".into(),
        PathEvent::EndPositive => "end_positive".into(),
        PathEvent::MaxBelow(x) => format!("max_below_{x}"),
        PathEvent::AbsEndBelow(x) => format!("abs_end_below_{x}"),
    }
}

fn path_rows(t: &mut Table, path: &Path) {
    for (i, &x) in path.values.iter().enumerate() {
        t.push(vec![Cell::Float(path.t0 + i as f64 * path.dt), Cell::Float(x)]);
    }
}

fn run(cmd: &Command, p: &Params, used: &mut Used) -> Result<Output, CliError> {
    let seed = p.seed();
    Ok(match cmd {
        Command::Spectrum { eigenfunctions } => {
            let b = basis(p, used)?;
            let mut t = Table::new(&["n", "rho"]);
            for (i, &r) in b.eigenvalues.iter().enumerate() {
                t.push(vec![Cell::Int(i as u64), Cell::Float(r)]);
            }
            if let Some(path) = eigenfunctions {
                let mut cols = vec!["x".to_string(), "nu_weight".to_string()];
                cols.extend((0..b.len()).map(|k| format!("e_{k}")));
                let mut ef = Table {
                    columns: cols,
                    rows: Vec::new(),
                };
                for (j, (&x, &w)) in b.grid.iter().zip(&b.nu_weights).enumerate() {
                    let mut row = vec![Cell::Float(x), Cell::Float(w)];
                    row.extend(b.eigenfunctions.iter().map(|e| Cell::Float(e[j])));
                    ef.push(row);
                }
                emit(&Output::Table(ef), Format::Csv, &header("spectrum", p.seed(), used), Some(path))?;
            }
            Output::Table(t)
        }
        Command::Kernel { op } => {
            let (l, mu, v) = (p.l(), p.mu(), p.v());
            let n = p.n_or(100_000);
            used.set("seed", seed).set("n", n);
            match op {
                KernelOp::K => {
                    used.set("l", l).set("mu", mu).set("v", v);
                    Output::Records(vec![Record::new("K", &[("l", l), ("mu", mu), ("v", v)], kernel_k(l, mu, v, n, rng(p))?)])
                }
                KernelOp::Chi => {
                    used.set("l", l).set("v", v);
                    Output::Records(vec![Record::new("chi", &[("l", l), ("v", v)], chi(v, l, n, rng(p))?)])
                }
                KernelOp::Kbar => {
                    used.set("l", l);
                    let b = basis(p, used)?;
                    let r = kbar_rho(l, &b, n, rng(p))?;
                    Output::Records(vec![
                        Record::new("kbar.direct", &[("l", l)], r.direct),
                        Record::new("kbar.quadrature", &[("l", l)], r.quadrature),
                    ])
                }
                KernelOp::Alpha => {
                    used.set("l", l).set("v", v);
                    Output::Records(vec![Record::exact("alpha", &[("l", l), ("v", v)], alpha_density(l, v), seed)])
                }
            }
        }
        Command::Aconst { op, profile, bump } => {
            let n = p.n_or(2_000);
            let b = basis(p, used)?;
            let f = match profile {
                Some(path) => {
                    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    used.set("profile", path.display().to_string());
                    CompactProfile::read_csv(std::io::BufReader::new(file), p.m)?
                }
                None if *bump => {
                    used.set("profile", "bump");
                    default_bump()
                }
                None => {
                    used.set("profile", "zero");
                    CompactProfile::zero()
                }
            };
            let params = ModelParams::new(p.beta(), b.rho(), p.m())?;
            used.set("seed", seed).set("n", n).set("beta", p.beta()).set("m", p.m());
            let keys = [("beta", p.beta()), ("m", p.m())];
            let rec = match op {
                AOp::Total => Record::new("A_total", &keys, a_total(&params, &f, &b, n, rng(p))?),
                AOp::Plus => Record::new("A_plus", &keys, a_plus(&params, &f, &b, n, rng(p))?),
            };
            Output::Records(vec![rec])
        }
        Command::Density { op, x } => {
            let xs = if x.is_empty() { default_grid() } else { x.clone() };
            if xs.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(CliError::Validation("density points must be finite and > 0".into()));
            }
            match op {
                DensityOp::D1 | DensityOp::Dm => {
                    let m = p.m();
                    let mut t = Table::new(&["x", "density"]);
                    for &v in &xs {
                        let d = if *op == DensityOp::D1 { density_d1(v) } else { density_dm(m, v) };
                        t.push(vec![Cell::Float(v), Cell::Float(d)]);
                    }
                    if *op == DensityOp::Dm {
                        used.set("m", m);
                    }
                    Output::Table(t)
                }
                DensityOp::Ds => {
                    let (s, horizon, dt, n) = (p.s(), p.t(), p.dt(), p.n_or(2_000));
                    if s > horizon {
                        return Err(CliError::Validation(format!("s = {s} must not exceed t = {horizon}")));
                    }
                    let b = basis(p, used)?;
                    used.set("seed", seed).set("n", n).set("beta", p.beta()).set("s", s).set("t", horizon).set("dt", dt);
                    let path = sample_brownian(horizon, dt, rng(p).fork(0))?;
                    let params = ModelParams::new(p.beta(), b.rho(), 1.0)?;
                    let d = density_ds(&path, s, &params, &b, n, rng(p).fork(1))?;
                    Output::Records(vec![Record::new("D_s", &[("beta", p.beta()), ("s", s)], d)])
                }
            }
        }
        Command::Jfun { op } => {
            let n = p.n_or(20_000);
            let b = basis(p, used)?;
            used.set("seed", seed).set("n", n);
            match op {
                JOp::Juv => {
                    let (l, u, v) = (p.l(), p.u(), p.v());
                    used.set("l", l).set("u", u).set("v", v);
                    let r = j_uv(l, u, v, &b, n, rng(p))?;
                    let keys = [("l", l), ("u", u), ("v", v)];
                    Output::Records(vec![
                        Record::new("J_uv.monte_carlo", &keys, r.monte_carlo),
                        Record::new("J_uv.spectral", &keys, r.spectral),
                    ])
                }
                JOp::Jt => {
                    let (l, t) = (p.l(), p.t());
                    used.set("l", l).set("t", t);
                    Output::Records(vec![Record::new("J_t", &[("l", l), ("t", t)], j_t(l, t, &b, n, rng(p))?)])
                }
                JOp::Kconst => Output::Records(vec![Record::new("K_constant", &[], k_constant(&b, n, rng(p))?)]),
            }
        }
        Command::Limit => {
            let b = basis(p, used)?;
            let (s, dt, outer) = (p.s(), p.dt(), p.outer.unwrap_or(2_000));
            let den_n = p.n_or((outer / 2).max(100));
            used.set("seed", seed).set("beta", p.beta()).set("s", s).set("dt", dt).set("outer", outer).set("n", den_n);
            let params = ModelParams::new(p.beta(), b.rho(), 1.0)?;
            let mut events = vec![PathEvent::All];
            events.extend(LIMIT_EVENTS);
            let res = mean_density_events(&params, s, dt, outer, 4, den_n, &events, &b, rng(p))?;
            Output::Records(
                res.iter()
                    .map(|m| Record::new(format!("Q[{}]", event_label(&m.event)), &[("beta", p.beta()), ("s", s)], m.ratio))
                    .collect(),
            )
        }
        Command::Verify { suite } => {
            let cfg = SuiteConfig {
                seed,
                n: p.n,
                beta: p.beta(),
                m: p.m(),
                s: p.s(),
                t: p.t(),
                dt: p.dt(),
                h: p.h(),
                x_max: p.x_max(),
                n_eig: p.n_eig(),
                outer: p.outer(),
            };
            let Value::Object(cfg_json) = serde_json::to_value(&cfg).expect("config serializes") else {
                unreachable!()
            };
            used.0.extend(cfg_json);
            used.set("suite", suite.as_str());
            let start = Instant::now();
            let report = run_suite(suite, &cfg, None)?;
            eprintln!("edwards: suite {suite} finished in {:.1} s", start.elapsed().as_secs_f64());
            Output::Report(report)
        }
        Command::Sample { process } => {
            let r = rng(p);
            used.set("seed", seed).set("process", format!("{process:?}").to_lowercase());
            match process {
                Process::Brownian => {
                    used.set("t", p.t()).set("dt", p.dt());
                    let mut t = Table::new(&["t", "x"]);
                    path_rows(&mut t, &sample_brownian(p.t(), p.dt(), r)?);
                    Output::Table(t)
                }
                Process::Besq0 | Process::Besq2 => {
                    let dim = if *process == Process::Besq0 { 0 } else { 2 };
                    used.set("l", p.l()).set("t", p.t()).set("dy", p.dy());
                    let mut t = Table::new(&["y", "value"]);
                    path_rows(&mut t, &sample_besq(dim, p.l(), p.t(), p.dy(), r)?);
                    Output::Table(t)
                }
                Process::Bridge3 => {
                    let steps = ((p.v() / p.dt()).ceil() as usize).max(2);
                    used.set("l", p.l()).set("v", p.v()).set("steps", steps);
                    let mut t = Table::new(&["t", "value"]);
                    path_rows(&mut t, &sample_bessel3_bridge(0.5 * p.l(), p.v(), steps, r)?);
                    Output::Table(t)
                }
                Process::Y => {
                    used.set("l", p.l()).set("t", p.t()).set("dy", p.dy());
                    let y = sample_y(p.l(), p.t(), p.dy(), r)?;
                    let mut t = Table::new(&["y", "value"]);
                    for (i, &v) in y.left.values.iter().enumerate().rev() {
                        t.push(vec![Cell::Float(0.0 - i as f64 * y.left.dt), Cell::Float(v)]);
                    }
                    for (i, &v) in y.right.values.iter().enumerate().skip(1) {
                        t.push(vec![Cell::Float(i as f64 * y.right.dt), Cell::Float(v)]);
                    }
                    Output::Table(t)
                }
            }
        }
    })
}

fn header(command: &str, seed: u64, used: &Used) -> Value {
    json!({
        "tool": "edwards",
        "version": VERSION,
        "command": command,
        "seed": seed,
        "params": Value::Object(used.0.clone()),
    })
}

pub fn dispatch(cmd: &Command, p: &Params) -> Result<(), CliError> {
    let mut used = Used::new();
    let out = run(cmd, p, &mut used)?;
    let format = p.format.unwrap_or_else(|| out.default_format());
    let path = p.output_path(cmd.name(), format);
    emit(&out, format, &header(cmd.name(), p.seed(), &used), path.as_deref())?;
    if let (Command::Verify { suite }, Output::Report(r)) = (cmd, &out) {
        if !r.pass {
            return Err(CliError::SuiteFailed(suite.clone()));
        }
    }
    Ok(())
}
