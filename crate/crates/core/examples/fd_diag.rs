// temporary: criterion-5 gap probe at reduced iterations
use isnerf_core::config::RunConfig;
use isnerf_core::io::load_dataset;
use isnerf_core::metrics::{psnr, psnr_masked};
use isnerf_core::renderer::render_image;
use isnerf_core::scene::{builtin_mirror_scene, generate_dataset, mirror_mask, primitive_mask, SynthConfig, SyntheticScene, TrajectorySpec};
use std::path::PathBuf;
use std::time::Instant;

fn main() {
    let iters: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let data = PathBuf::from("/tmp/gap_data");
    if !data.join("poses.json").exists() {
        std::fs::create_dir_all(&data).unwrap();
        generate_dataset(
            &builtin_mirror_scene(),
            &TrajectorySpec::default(),
            &SynthConfig { width: 64, height: 64, n: 4, views: 20, seed: 42, gt_steps: 384, ..Default::default() },
            &data,
        )
        .unwrap();
        println!("dataset written");
    }
    let dataset = load_dataset(&data).unwrap();
    let scene: SyntheticScene = serde_json::from_str(&std::fs::read_to_string(data.join("scene.json")).unwrap()).unwrap();

    let run = |name: &str, scatter: bool, single_point: bool| {
        let mut cfg = RunConfig::desk();
        cfg.optim.iters = iters;
        cfg.optim.islm_warmup_iters = (iters / 20).min(1000);
        cfg.optim.eval_interval = 1000;
        cfg.optim.log_interval = 500;
        cfg.optim.holdout_eval_count = 2;
        cfg.render.scattering_enabled = scatter;
        cfg.render.single_point = single_point;
        let t0 = Instant::now();
        let (state, rows) = isnerf_core::optim::train(&dataset, cfg.build_model(), &cfg.render, &cfg.optim, cfg.seed).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        // masked eval over all holdout views
        let (mut p, mut m, mut nm, mut r) = (0.0, 0.0, 0.0, 0.0);
        let n = dataset.holdout.len() as f64;
        for view in &dataset.holdout {
            let img = render_image(&state.model, &view.pose, &view.intrinsics, 64, 64, &cfg.render, 9, 0);
            let mirror = mirror_mask(&scene, &view.pose, &view.intrinsics, 64, 64);
            let rod = primitive_mask(&scene, 2, &view.pose, &view.intrinsics, 64, 64);
            let non: Vec<bool> = mirror.iter().map(|x| !x).collect();
            p += psnr(&img, &view.sharp).unwrap() / n;
            m += psnr_masked(&img, &view.sharp, &mirror).unwrap() / n;
            nm += psnr_masked(&img, &view.sharp, &non).unwrap() / n;
            r += psnr_masked(&img, &view.sharp, &rod).unwrap() / n;
        }
        println!("{name}: {dt:.0}s  psnr {p:.3}  mirror {m:.3}  nonmirror {nm:.3}  rod {r:.3}");
        for row in rows.iter().step_by(4) {
            println!("   it {:>6}  loss {:>10.3}  holdout {:.2}", row.iteration, row.loss, row.psnr_holdout);
        }
    };
    run("full   ", true, false);
    run("no-islm", false, false);
}
