//! High-level drivers tying dataset, training, checkpoints and evaluation
//! together; shared by the command-line interface and the ablation runner.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::io::{
    load_dataset, read_field_checkpoint, read_islm_checkpoint, write_field_checkpoint,
    write_islm_checkpoint, Dataset,
};
use crate::math::derive_seed;
use crate::metrics::{psnr, ssim};
use crate::optim::{train, write_metrics_csv, MetricsRow, TrainState};
use crate::renderer::{render_image, RenderConfig, SceneModel};
use crate::se3::Pose;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub config: RunConfig,
    pub data_dir: PathBuf,
    pub train_seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizedPoseEntry {
    t_start: [[f64; 4]; 4],
    t_end: [[f64; 4]; 4],
}

pub struct TrainOutcome {
    pub state: TrainState,
    pub rows: Vec<MetricsRow>,
    pub train_seconds: f64,
}

/// Trains on the dataset and writes the checkpoint directory: `coarse.ckpt`,
/// `fine.ckpt`, `islm.ckpt`, `poses_opt.json`, `metrics.csv`, `run.json`.
pub fn run_training(data_dir: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<TrainOutcome> {
    let dataset = load_dataset(data_dir)?;
    std::fs::create_dir_all(out_dir)?;
    let model = cfg.build_model();
    let started = Instant::now();
    let (state, rows) = train(&dataset, model, &cfg.render, &cfg.optim, cfg.seed)?;
    let train_seconds = started.elapsed().as_secs_f64();

    write_field_checkpoint(&out_dir.join("coarse.ckpt"), &state.model.coarse)?;
    write_field_checkpoint(&out_dir.join("fine.ckpt"), &state.model.fine)?;
    write_islm_checkpoint(&out_dir.join("islm.ckpt"), &state.model.islm)?;
    write_metrics_csv(&out_dir.join("metrics.csv"), &rows)?;

    let mut optimized = Vec::with_capacity(dataset.views.len());
    for i in 0..dataset.views.len() {
        let (start, end) = state.exposure_poses(i)?;
        optimized.push(OptimizedPoseEntry {
            t_start: start.to_matrix4(),
            t_end: end.to_matrix4(),
        });
    }
    std::fs::write(
        out_dir.join("poses_opt.json"),
        serde_json::to_string_pretty(&optimized)? + "\n",
    )?;
    let meta = RunMeta {
        config: cfg.clone(),
        data_dir: data_dir.to_path_buf(),
        train_seconds,
    };
    std::fs::write(out_dir.join("run.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(TrainOutcome { state, rows, train_seconds })
}

pub fn load_run_meta(ckpt_dir: &Path) -> Result<RunMeta> {
    let meta: RunMeta =
        serde_json::from_str(&std::fs::read_to_string(ckpt_dir.join("run.json"))?)?;
    Ok(meta)
}

pub fn load_model(ckpt_dir: &Path) -> Result<SceneModel> {
    Ok(SceneModel {
        coarse: read_field_checkpoint(&ckpt_dir.join("coarse.ckpt"))?,
        fine: read_field_checkpoint(&ckpt_dir.join("fine.ckpt"))?,
        islm: read_islm_checkpoint(&ckpt_dir.join("islm.ckpt"))?,
    })
}

/// Per-image and mean PSNR/SSIM of rendered holdout views against the sharp
/// ground truth.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub per_image: Vec<(String, f64, f64)>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Renders every holdout view and scores it. `use_islm = false` performs
/// the rendering-time ablation (classic volume rendering on the trained
/// fields).
pub fn eval_holdout(
    model: &SceneModel,
    dataset: &Dataset,
    rcfg: &RenderConfig,
    seed: u64,
    use_islm: bool,
) -> Result<EvalReport> {
    if dataset.holdout.is_empty() {
        return Err(Error::Dataset("dataset has no holdout views".into()));
    }
    let mut cfg = rcfg.clone();
    cfg.scattering_enabled = rcfg.scattering_enabled && use_islm;
    let mut per_image = Vec::with_capacity(dataset.holdout.len());
    let mut sum_psnr = 0.0;
    let mut sum_ssim = 0.0;
    for (i, view) in dataset.holdout.iter().enumerate() {
        let img = render_eval_view(model, &view.pose, view, &cfg, seed)?.clamped();
        let p = psnr(&img, &view.sharp)?;
        let s = ssim(&img, &view.sharp)?;
        sum_psnr += p;
        sum_ssim += s;
        per_image.push((format!("holdout_{i:03}"), p, s));
    }
    let n = dataset.holdout.len() as f64;
    Ok(EvalReport { per_image, mean_psnr: sum_psnr / n, mean_ssim: sum_ssim / n })
}

fn render_eval_view(
    model: &SceneModel,
    pose: &Pose,
    view: &crate::io::HoldoutView,
    cfg: &RenderConfig,
    seed: u64,
) -> Result<ImageBuffer> {
    Ok(render_image(
        model,
        pose,
        &view.intrinsics,
        view.sharp.width,
        view.sharp.height,
        cfg,
        derive_seed(seed, &[0x6576]),
        0,
    ))
}

pub fn write_eval_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut out = String::from("image,psnr,ssim,lpips\n");
    for (name, p, s) in &report.per_image {
        let p_str = if p.is_infinite() { "inf".into() } else { format!("{p:.4}") };
        out.push_str(&format!("{name},{p_str},{s:.5},n/a\n"));
    }
    let mean_p = if report.mean_psnr.is_infinite() {
        "inf".into()
    } else {
        format!("{:.4}", report.mean_psnr)
    };
    out.push_str(&format!("mean,{mean_p},{:.5},n/a\n", report.mean_ssim));
    std::fs::write(path, out)?;
    Ok(())
}
