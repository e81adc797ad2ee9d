//! Criterion benchmarks for the data-parallel kernels, labeled by execution
//! mode so a default-features run (rayon) can be compared against a
//! `--no-default-features` run (sequential fallback):
//!
//! ```text
//! cargo bench -p mfou
//! cargo bench -p mfou --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mfou::likelihood::ScorePipeline;
use mfou::linalg::DenseMatrix;
use mfou::model::{ModelParams, SamplingScheme};
use mfou::simulate::replication_rng;
use mfou::toeplitz::{mfou_autocov, whiten, BuildConfig, CholeskyFactor, ToeplitzMatrix};

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn bench_kernels(c: &mut Criterion) {
    let theta = ModelParams::new(1.0, 0.8, 1.0).unwrap();
    let cfg = BuildConfig::default();
    let mut group = c.benchmark_group(format!("kernels/{}", mode()));
    group.sample_size(10);

    let n = 512usize;
    let scheme = SamplingScheme::from_kappa(n, 0.5).unwrap();

    group.bench_function(BenchmarkId::new("autocov", n), |b| {
        b.iter(|| mfou_autocov(&theta, scheme.delta(), &cfg, n).unwrap())
    });

    let gamma = mfou_autocov(&theta, scheme.delta(), &cfg, n).unwrap();
    group.bench_function(BenchmarkId::new("cholesky", n), |b| {
        b.iter(|| {
            let mut a = DenseMatrix::from_toeplitz(&gamma.gamma);
            a.cholesky_in_place().unwrap()
        })
    });

    let chol = CholeskyFactor::factor(DenseMatrix::from_toeplitz(&gamma.gamma)).unwrap();
    let toeplitz = ToeplitzMatrix {
        first_row: gamma.gamma.clone(),
    };
    group.bench_function(BenchmarkId::new("whiten", n), |b| {
        b.iter(|| whiten(&toeplitz, &chol).unwrap())
    });

    let pipeline = ScorePipeline::build(&theta, &scheme, &cfg).unwrap();
    group.bench_function(BenchmarkId::new("mc_scores_x64", n), |b| {
        b.iter(|| {
            let mut buf = vec![0.0; 64 * n];
            for (r, chunk) in buf.chunks_mut(n).enumerate() {
                let mut rng = replication_rng(1, r as u64);
                for v in chunk.iter_mut() {
                    *v = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                }
            }
            mfou::linalg::multiply_lower_block(&chol.lower, &mut buf);
            mfou::linalg::solve_lower_block(&chol.lower, &mut buf);
            pipeline.central_sequences_whitened_block(&buf)
        })
    });

    group.finish();
}

criterion_group!(benches, bench_kernels);
criterion_main!(benches);
