//! The killed Bessel generator: eigenpairs, Airy utilities and the semigroup.

pub mod airy;
pub mod basis;
pub mod tridiag;

pub use airy::{airy, airy_pair, airy_prime, airy_zeros, AiryTable};
pub use basis::{build_basis, SpectralBasis};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Result};
use crate::rng::RngStream;
use crate::stats::{replicate, McEstimate};

/// Monte-Carlo value of E[exp(-2∫_0^s R_u du) psi(2 R_s)] for a Bessel(2)
/// process R started at l/2, on a time grid of step `dt`.
pub fn semigroup_mc(
    l: f64,
    psi: &(dyn Fn(f64) -> f64 + Sync),
    s: f64,
    n: usize,
    dt: f64,
    rng: RngStream,
) -> Result<McEstimate> {
    ensure(l > 0.0, || format!("l = {l} must be > 0"))?;
    ensure(s > 0.0, || format!("s = {s} must be > 0"))?;
    ensure(n >= 2, || "need at least two replicas".into())?;
    ensure(dt > 0.0 && dt <= s, || format!("dt = {dt} must lie in (0, s]"))?;
    let steps = (s / dt - 1e-9).ceil() as usize;
    let h = s / steps as f64;
    let sh = h.sqrt();
    let m = replicate(n, 1, |i, out| {
        let mut r = rng.replica(i as u64).rng();
        let (mut x, mut y) = (0.5 * l, 0.0f64);
        let mut radius = x;
        let mut integral = 0.5 * radius;
        for k in 0..steps {
            let z1: f64 = r.sample(StandardNormal);
            let z2: f64 = r.sample(StandardNormal);
            x += sh * z1;
            y += sh * z2;
            radius = x.hypot(y);
            integral += if k + 1 == steps { 0.5 * radius } else { radius };
        }
        out[0] = (-2.0 * h * integral).exp() * psi(2.0 * radius);
    });
    Ok(m[0].estimate(rng.seed))
}
