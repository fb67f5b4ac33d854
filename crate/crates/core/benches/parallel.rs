//! Parallel vs sequential throughput of the two data-parallel hot paths:
//! image rendering and batched gradient computation.
//!
//! With the default `parallel` feature the "sequential" groups run the same
//! code inside a single-thread rayon pool; building with
//! `--no-default-features` benches the true sequential fallback.

use criterion::{criterion_group, criterion_main, Criterion};
use isnerf_core::config::RunConfig;
use isnerf_core::field::FieldShape;
use isnerf_core::io::load_dataset;
use isnerf_core::islm::IslmShape;
use isnerf_core::optim::{batch_loss_and_grads, init_train_state, BatchSpec, OptimConfig};
use isnerf_core::renderer::{render_image, Intrinsics, RenderConfig};
use isnerf_core::scene::{builtin_mirror_scene, generate_dataset, SynthConfig, TrajectorySpec};
use isnerf_core::se3::Pose;
use std::hint::black_box;
use std::path::PathBuf;

fn bench_config() -> RunConfig {
    RunConfig {
        seed: 7,
        render: RenderConfig {
            n_coarse: 16,
            n_fine: 16,
            k_paths: 5,
            n_scatter: 4,
            ..Default::default()
        },
        field: FieldShape { l_x: 4, l_d: 2, trunk: vec![32, 32], color_hidden: 16 },
        islm: IslmShape { l_x: 4, l_d: 2, hidden: vec![32], heads: 1 },
        optim: OptimConfig { batch_rays: 64, chunk_rays: 8, ..Default::default() },
    }
}

fn dataset_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("bench_data");
    if !dir.join("poses.json").exists() {
        std::fs::create_dir_all(&dir).unwrap();
        generate_dataset(
            &builtin_mirror_scene(),
            &TrajectorySpec::default(),
            &SynthConfig { width: 32, height: 32, n: 2, views: 2, gt_steps: 128, ..Default::default() },
            &dir,
        )
        .unwrap();
    }
    dir
}

fn render_once(cfg: &RunConfig) {
    let model = cfg.build_model();
    let pose = Pose::identity();
    let intr = Intrinsics { fx: 36.0, fy: 36.0, cx: 16.0, cy: 16.0 };
    black_box(render_image(&model, &pose, &intr, 32, 32, &cfg.render, 11, 0));
}

fn backward_once(cfg: &RunConfig, dataset: &isnerf_core::io::Dataset) {
    let state = init_train_state(dataset, cfg.build_model(), &cfg.optim, cfg.seed).unwrap();
    let batches = [BatchSpec { image: 0, pixels: (0..cfg.optim.batch_rays).collect() }];
    black_box(
        batch_loss_and_grads(
            &state.model,
            dataset,
            &state.init_poses,
            &state.twists,
            &cfg.render,
            &cfg.optim,
            cfg.seed,
            0,
            &batches,
            true,
        )
        .unwrap(),
    );
}

fn benches(c: &mut Criterion) {
    let cfg = bench_config();
    let dataset = load_dataset(&dataset_dir()).unwrap();

    let mut group = c.benchmark_group("render_image_32x32");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| render_once(&cfg)));
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("sequential", |b| b.iter(|| pool.install(|| render_once(&cfg))));
    }
    group.finish();

    let mut group = c.benchmark_group("batch_backward_64_rays");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| backward_once(&cfg, &dataset)));
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("sequential", |b| {
            b.iter(|| pool.install(|| backward_once(&cfg, &dataset)))
        });
    }
    group.finish();
}

criterion_group!(benches_group, benches);
criterion_main!(benches_group);
