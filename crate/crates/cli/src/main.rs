//! Command-line entry points: dataset synthesis, training, rendering,
//! evaluation and the ablation runner.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use isnerf_core::config::RunConfig;
use isnerf_core::io::load_dataset;
use isnerf_core::math::derive_seed;
use isnerf_core::pipeline::{
    eval_holdout, load_model, load_run_meta, run_training, write_eval_csv,
};
use isnerf_core::renderer::render_image;
use isnerf_core::scene::{
    builtin_mirror_scene, generate_dataset, SynthConfig, SyntheticScene, TrajectorySpec,
};
use isnerf_core::se3::Pose;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "isnerf", version, about = "Scattering-aware deblurring radiance fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (blurred training views, sharp holdout
    /// views, poses.json, scene.json).
    Synth(SynthArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Render one view from a trained checkpoint.
    Render(RenderArgs),
    /// Score holdout views of a dataset under a trained checkpoint.
    Eval(EvalArgs),
    /// Run the ablation suite (scattering on/off, path designs, K sweep).
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// `builtin` or a path to a scene JSON file.
    #[arg(long, default_value = "builtin")]
    scene: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Image size as WxH.
    #[arg(long, default_value = "64x64")]
    size: String,
    /// Training views.
    #[arg(long, default_value_t = 20)]
    views: usize,
    /// Virtual images averaged per exposure.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Exposure blur span in degrees of arc.
    #[arg(long, default_value_t = 2.4)]
    blur_deg: f64,
    /// Ground-truth quadrature steps.
    #[arg(long, default_value_t = 512)]
    gt_steps: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, required_unless_present = "dump_config")]
    data: Option<PathBuf>,
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "dump_config")]
    out: Option<PathBuf>,
    /// Print the full default configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Checkpoint directory produced by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    /// Holdout view index, or a path to a JSON file holding a 4x4 pose.
    #[arg(long, default_value = "0")]
    pose: String,
    #[arg(long)]
    out: PathBuf,
    /// Rendering-time ablation: classic volume rendering without the
    /// scattering term.
    #[arg(long)]
    no_islm: bool,
    /// Dataset directory (defaults to the one recorded at training time).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output CSV path (defaults to `<ckpt>/eval.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_islm: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of
    /// full,no-islm-train,no-islm-render,single-point,k-sweep.
    #[arg(long, default_value = "full,no-islm-train,no-islm-render,single-point,k-sweep")]
    modes: String,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override training iterations for every ablation run.
    #[arg(long)]
    iters: Option<usize>,
    /// Iterations for the K sweep (timing-focused, shorter by default).
    #[arg(long)]
    sweep_iters: Option<usize>,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(args) => synth(args),
        Command::Train(args) => train(args),
        Command::Render(args) => render(args),
        Command::Eval(args) => eval(args),
        Command::Ablate(args) => ablate(args),
    }
}

fn parse_size(size: &str) -> Result<(usize, usize)> {
    let (w, h) = size
        .split_once(['x', 'X'])
        .with_context(|| format!("size `{size}` is not WxH"))?;
    Ok((w.parse().context("bad width")?, h.parse().context("bad height")?))
}

fn synth(args: SynthArgs) -> Result<()> {
    let scene: SyntheticScene = if args.scene == "builtin" {
        builtin_mirror_scene()
    } else {
        let text = std::fs::read_to_string(&args.scene)
            .with_context(|| format!("reading scene file {}", args.scene))?;
        serde_json::from_str(&text).context("parsing scene json")?
    };
    let (width, height) = parse_size(&args.size)?;
    let cfg = SynthConfig {
        width,
        height,
        n: args.n,
        views: args.views,
        seed: args.seed,
        gt_steps: args.gt_steps,
        ..Default::default()
    };
    let traj = TrajectorySpec { blur_deg: args.blur_deg, ..Default::default() };
    generate_dataset(&scene, &traj, &cfg, &args.out)?;
    println!(
        "wrote {} blurred + {} sharp views ({}x{}) to {}",
        args.views,
        args.views,
        width,
        height,
        args.out.display()
    );
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Ok(RunConfig::from_json(&text)?)
        }
        None => Ok(RunConfig::default()),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    if args.dump_config {
        print!("{}", RunConfig::default().to_json_pretty());
        return Ok(());
    }
    let cfg = load_config(&args.config)?;
    let data = args.data.expect("clap enforces --data");
    let out = args.out.expect("clap enforces --out");
    let outcome = run_training(&data, &cfg, &out)?;
    let last = outcome.rows.last();
    println!(
        "trained {} iterations in {:.1}s (final loss {:.4}); checkpoints in {}",
        cfg.optim.iters,
        outcome.train_seconds,
        last.map(|r| r.loss).unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn resolve_data_dir(explicit: &Option<PathBuf>, ckpt: &Path) -> Result<PathBuf> {
    if let Some(d) = explicit {
        return Ok(d.clone());
    }
    Ok(load_run_meta(ckpt)?.data_dir)
}

fn render(args: RenderArgs) -> Result<()> {
    let meta = load_run_meta(&args.ckpt)?;
    let model = load_model(&args.ckpt)?;
    let mut rcfg = meta.config.render.clone();
    rcfg.scattering_enabled = rcfg.scattering_enabled && !args.no_islm;

    let (pose, intr, width, height) = if let Ok(index) = args.pose.parse::<usize>() {
        let data = resolve_data_dir(&args.data, &args.ckpt)?;
        let dataset = load_dataset(&data)?;
        let view = dataset
            .holdout
            .get(index)
            .with_context(|| format!("holdout index {index} out of range"))?;
        (view.pose, view.intrinsics, view.sharp.width, view.sharp.height)
    } else {
        #[derive(serde::Deserialize)]
        struct PoseFile {
            pose: [[f64; 4]; 4],
            intrinsics: isnerf_core::renderer::Intrinsics,
            width: usize,
            height: usize,
        }
        let text = std::fs::read_to_string(&args.pose)
            .with_context(|| format!("reading pose file {}", args.pose))?;
        let pf: PoseFile = serde_json::from_str(&text).context("parsing pose file")?;
        (Pose::from_matrix4(&pf.pose)?, pf.intrinsics, pf.width, pf.height)
    };

    let img = render_image(
        &model,
        &pose,
        &intr,
        width,
        height,
        &rcfg,
        derive_seed(meta.config.seed, &[0x72]),
        0,
    );
    img.write_png(&args.out)?;
    println!("rendered {}x{} view to {}", width, height, args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let meta = load_run_meta(&args.ckpt)?;
    let model = load_model(&args.ckpt)?;
    let data = resolve_data_dir(&args.data, &args.ckpt)?;
    let dataset = load_dataset(&data)?;
    let report =
        eval_holdout(&model, &dataset, &meta.config.render, meta.config.seed, !args.no_islm)?;

    println!("{:<14} {:>9} {:>9} {:>7}", "image", "psnr", "ssim", "lpips");
    for (name, p, s) in &report.per_image {
        let p_str = if p.is_infinite() { "inf".into() } else { format!("{p:.4}") };
        println!("{name:<14} {p_str:>9} {s:>9.5} {:>7}", "n/a");
    }
    println!(
        "{:<14} {:>9.4} {:>9.5} {:>7}",
        "mean", report.mean_psnr, report.mean_ssim, "n/a"
    );
    let out = args.out.unwrap_or_else(|| args.ckpt.join("eval.csv"));
    write_eval_csv(&out, &report)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Full,
    NoIslmTrain,
    NoIslmRender,
    SinglePoint,
    KSweep,
}

fn parse_modes(spec: &str) -> Result<Vec<Mode>> {
    spec.split(',')
        .map(|m| match m.trim() {
            "full" => Ok(Mode::Full),
            "no-islm-train" => Ok(Mode::NoIslmTrain),
            "no-islm-render" => Ok(Mode::NoIslmRender),
            "single-point" => Ok(Mode::SinglePoint),
            "k-sweep" => Ok(Mode::KSweep),
            other => bail!("unknown ablation mode `{other}`"),
        })
        .collect()
}

fn ablate(args: AblateArgs) -> Result<()> {
    let modes = parse_modes(&args.modes)?;
    let mut base = load_config(&args.config)?;
    if let Some(iters) = args.iters {
        base.optim.iters = iters;
    }
    std::fs::create_dir_all(&args.out)?;
    let dataset = load_dataset(&args.data)?;

    let mut rows = Vec::new();
    for mode in modes.iter().filter(|m| **m != Mode::KSweep) {
        let (name, mut cfg, render_islm) = match mode {
            Mode::Full => ("full", base.clone(), true),
            Mode::NoIslmTrain => {
                let mut c = base.clone();
                c.render.scattering_enabled = false;
                ("no-islm-train", c, false)
            }
            Mode::NoIslmRender => ("no-islm-render", base.clone(), false),
            Mode::SinglePoint => {
                let mut c = base.clone();
                c.render.single_point = true;
                ("single-point", c, true)
            }
            Mode::KSweep => unreachable!(),
        };
        // the rendering-time ablation reuses the full checkpoint
        let ckpt_dir = if *mode == Mode::NoIslmRender {
            args.out.join("full")
        } else {
            args.out.join(name)
        };
        let (model, train_seconds) = if ckpt_dir.join("run.json").exists() {
            (load_model(&ckpt_dir)?, load_run_meta(&ckpt_dir)?.train_seconds)
        } else {
            let outcome = run_training(&args.data, &cfg, &ckpt_dir)?;
            (outcome.state.model, outcome.train_seconds)
        };
        if *mode == Mode::NoIslmRender {
            cfg = load_run_meta(&ckpt_dir)?.config;
        }
        let report = eval_holdout(&model, &dataset, &cfg.render, cfg.seed, render_islm)?;
        println!(
            "{name:<16} psnr {:>8.4}  ssim {:>8.5}  train {:>7.1}s",
            report.mean_psnr, report.mean_ssim, train_seconds
        );
        rows.push(format!(
            "{name},{:.4},{:.5},{:.1}",
            report.mean_psnr, report.mean_ssim, train_seconds
        ));
    }
    if !rows.is_empty() {
        let mut csv = String::from("mode,psnr,ssim,train_seconds\n");
        for r in &rows {
            csv.push_str(r);
            csv.push('\n');
        }
        std::fs::write(args.out.join("ablation.csv"), csv)?;
    }

    if modes.contains(&Mode::KSweep) {
        let mut csv = String::from("k,psnr,ssim,train_seconds\n");
        for k in [1usize, 3, 5, 7, 9] {
            let mut cfg = base.clone();
            cfg.render.k_paths = k;
            cfg.optim.iters = args.sweep_iters.unwrap_or(300);
            cfg.optim.islm_warmup_iters = 0;
            cfg.optim.eval_interval = 0;
            let dir = args.out.join(format!("k{k}"));
            let outcome = run_training(&args.data, &cfg, &dir)?;
            let report =
                eval_holdout(&outcome.state.model, &dataset, &cfg.render, cfg.seed, true)?;
            println!(
                "k={k}  psnr {:>8.4}  ssim {:>8.5}  train {:>7.1}s",
                report.mean_psnr, report.mean_ssim, outcome.train_seconds
            );
            csv.push_str(&format!(
                "{k},{:.4},{:.5},{:.1}\n",
                report.mean_psnr, report.mean_ssim, outcome.train_seconds
            ));
        }
        std::fs::write(args.out.join("ksweep.csv"), csv)?;
    }
    Ok(())
}
