//! Data-parallel core vs the sequential fallback.
//!
//! `cargo bench -p prelu-core` measures the rayon build (and the same code on a
//! one-thread pool); `cargo bench -p prelu-core --no-default-features` fills
//! the `sequential` entries of the same groups so criterion compares them.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use prelu_core::attacks::{robust_accuracy, AttackSpec, Norm};
use prelu_core::data::{make_basis, sample_synthetic, BasisMode, ClusterSpec, SubclassBasis};
use prelu_core::net::PreluNet;
use prelu_core::reference::{dist_estimate, DistConfig, ReferenceClassifier};
use prelu_core::theory::{mc_bound_check, BoundEvent};
use prelu_core::{linalg, rng};

const MODE: &str = if cfg!(feature = "parallel") { "rayon" } else { "sequential" };

fn setup() -> (ClusterSpec, SubclassBasis) {
    let s = ClusterSpec::new(100, 10, 6, 0.1, 1).unwrap();
    let b = make_basis(&s, BasisMode::RandomOrthogonal).unwrap();
    (s, b)
}

/// Runs `f` under each available execution mode.
fn modes(c: &mut Criterion, group: &str, f: impl Fn() + Sync) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    g.bench_function(BenchmarkId::from_parameter(MODE), |b| b.iter(&f));
    #[cfg(feature = "parallel")]
    {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::from_parameter("rayon-1-thread"), |b| b.iter(|| one.install(&f)));
    }
    g.finish();
}

fn bench(c: &mut Criterion) {
    let (s, b) = setup();
    let f2 = ReferenceClassifier::fp(b.clone(), 2.0).unwrap();
    let ds = sample_synthetic(&s, &b, 200, &mut rng::from_seed(2)).unwrap();
    let spec = AttackSpec { steps: 20, restarts: 2, seed: 3, ..AttackSpec::new(Norm::L2, 0.5) };
    modes(c, "robust_accuracy", || {
        black_box(robust_accuracy(&f2, &ds, &spec).unwrap());
    });

    let f = ReferenceClassifier::f(b.clone());
    modes(c, "mc_bound_check", || {
        black_box(mc_bound_check(&f, &s, BoundEvent::Clean, 20_000).unwrap());
    });

    let mut g = rng::from_seed(4);
    let net =
        PreluNet::binary(linalg::gaussian_matrix(64, 100, &mut g), linalg::gaussian_vector(64, &mut g), 2.0).unwrap();
    let cfg = DistConfig { n1: 1024, n2: 32, max_iter: 20, ..DistConfig::default() };
    modes(c, "dist_estimate", || {
        black_box(dist_estimate(&net, &f, &cfg).unwrap());
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
