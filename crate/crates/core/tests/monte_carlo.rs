use edwards::kernels::{a_total, j_uv, kbar_rho, kernel_k, ModelParams};
use edwards::localtime::CompactProfile;
use edwards::samplers::{sample_besq, sample_brownian};
use edwards::spectral::{build_basis, SpectralBasis};
use edwards::stats::collect_samples;
use edwards::RngStream;
use proptest::prelude::*;

fn basis() -> SpectralBasis {
    build_basis(20.0, 2e-3, 8).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let b = basis();
    let p = ModelParams::new(1.0, b.rho(), 1.0).unwrap();
    let f = CompactProfile::bump(0.0, 0.5, 1.0, 1.0).unwrap();
    let run = || {
        (
            kernel_k(1.0, 0.3, 0.7, 3000, RngStream::from_seed(5)).unwrap(),
            a_total(&p, &f, &b, 300, RngStream::from_seed(6)).unwrap(),
        )
    };
    let one = in_pool(1, run);
    let three = in_pool(3, run);
    assert_eq!(one.0.mean.to_bits(), three.0.mean.to_bits());
    assert_eq!(one.0.stderr.to_bits(), three.0.stderr.to_bits());
    assert_eq!(one.1.mean.to_bits(), three.1.mean.to_bits());
}

#[test]
fn stderr_halves_when_n_quadruples() {
    let small = kernel_k(1.0, 0.0, 1.0, 5000, RngStream::from_seed(1)).unwrap();
    let large = kernel_k(1.0, 0.0, 1.0, 20000, RngStream::from_seed(2)).unwrap();
    let r = small.stderr / large.stderr;
    assert!((r - 2.0).abs() < 0.2, "stderr ratio {r}");
    let z = (small.mean - large.mean).abs() / small.stderr.hypot(large.stderr);
    assert!(z < 4.0, "z = {z}");
}

#[test]
fn kbar_routes_agree() {
    let b = basis();
    for l in [0.5, 2.0] {
        let r = kbar_rho(l, &b, 20000, RngStream::from_seed(3)).unwrap();
        assert!(r.z() < 4.0, "l = {l}: {r:?}");
    }
}

#[test]
fn juv_routes_agree() {
    let b = basis();
    let r = j_uv(1.0, 1.0, 1.0, &b, 20000, RngStream::from_seed(4)).unwrap();
    assert!(r.z() < 4.0, "{r:?}");
}

#[test]
fn besq_first_moments() {
    // E[X_y] = x + δy for BESQ(δ) from x
    let n = 20000;
    for (dim, start) in [(0u32, 1.5), (2, 0.0), (2, 0.7)] {
        let ends = collect_samples(n, |i| {
            sample_besq(dim, start, 1.0, 0.25, RngStream::new(9, dim as u64).replica(i as u64))
                .unwrap()
                .last()
        });
        let mean = ends.iter().sum::<f64>() / n as f64;
        let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let z = (mean - (start + dim as f64)) / (var / n as f64).sqrt();
        assert!(z.abs() < 4.0, "dim {dim} start {start}: mean {mean}, z {z}");
    }
}

#[test]
fn brownian_endpoint_variance() {
    let n = 20000;
    let t = 2.0;
    let ends = collect_samples(n, |i| sample_brownian(t, 1.0 / 64.0, RngStream::new(11, 0).replica(i as u64)).unwrap().last());
    let m2 = ends.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let se = (2.0 * t * t / n as f64).sqrt();
    assert!((m2 - t).abs() < 4.0 * se, "E[X_T^2] = {m2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn besq_paths_nonnegative_and_deterministic(dim in prop::sample::select(vec![0u32, 2]), start in 0.0f64..5.0, seed in any::<u64>()) {
        let a = sample_besq(dim, start, 2.0, 1.0 / 32.0, RngStream::from_seed(seed)).unwrap();
        let b = sample_besq(dim, start, 2.0, 1.0 / 32.0, RngStream::from_seed(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.values.iter().all(|&x| x >= 0.0));
        prop_assert_eq!(a.values[0], start);
    }
}
