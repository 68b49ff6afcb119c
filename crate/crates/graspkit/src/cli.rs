//! `graspkit` subcommands. Exit codes: 0 success, 1 failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use graspkit_core::anchor::{decode, encode};
use graspkit_core::data::{make_splits, SplitMode};
use graspkit_core::loss::{
    gradient_check, synthetic_batch, train, LossConfig, ReferenceHead, TrainConfig,
};
use graspkit_core::matching::angle_anchor;
use graspkit_core::pipeline::{
    calibrate, plan_grasp_with, DepthImage, Intrinsics, PipelineError, PlanConfig, Stage,
    NORMAL_RADIUS,
};
use graspkit_core::{AnchorGrid, EvalConfig};

use crate::bench::{bench_match, center_crop, synthetic_scenes, write_csv};
use crate::config::RunConfig;
use crate::dataset::{
    data_root_from_env, discover, load_annotation, load_manifest, ManifestEntry, PNG_DEPTH_SCALE,
};
use crate::evaluate::{assemble, csv, fold_lines, group, parse_fold_file, per_image_csv, tables};
use crate::formats::{
    fmt6, load_depth, offset_line, parse_calibration, parse_offsets, parse_predictions,
    parse_rects, rect_line,
};
use crate::render::{render, RenderOptions};
use crate::tensor_file::TensorFile;
use crate::{failed, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "graspkit",
    version,
    about = "Oriented-anchor grasp detection toolkit"
)]
pub struct Cli {
    /// Flat `key = value` file of defaults; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Threads for parallel stages [default: all cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    /// Anchors per cell.
    #[arg(long)]
    pub k: Option<usize>,
    /// Feature stride in pixels.
    #[arg(long)]
    pub stride: Option<u32>,
    /// Square network input size in pixels.
    #[arg(long)]
    pub input_size: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ToyArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature channels.
    #[arg(long)]
    pub channels: Option<usize>,
    /// Images in the synthetic batch.
    #[arg(long)]
    pub images: Option<usize>,
    /// Ground truths per image.
    #[arg(long)]
    pub grasps: Option<usize>,
    /// Standard deviation scale of the initial weights.
    #[arg(long)]
    pub init_scale: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare Angle and Jaccard matching; writes a CSV.
    BenchMatch {
        #[command(flatten)]
        grid: GridArgs,
        /// Use random ground truths instead of a dataset.
        #[arg(long, conflicts_with = "data")]
        synthetic: bool,
        /// Dataset root [env: GRASPKIT_DATA].
        #[arg(long)]
        data: Option<PathBuf>,
        /// Synthetic scenes per batch.
        #[arg(long)]
        scenes: Option<usize>,
        /// Ground truths per synthetic scene.
        #[arg(long)]
        gts: Option<usize>,
        /// Timed repetitions (at least 100).
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top-1 accuracy of a prediction file per fold, with threshold sweeps.
    Evaluate {
        /// Prediction file: id then `x y w h theta score` per candidate.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Manifest file; otherwise the dataset root is scanned.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Dataset root [env: GRASPKIT_DATA].
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fold file of `fold id` lines; overrides --split.
        #[arg(long)]
        folds: Option<PathBuf>,
        /// image-wise or object-wise.
        #[arg(long)]
        split: Option<SplitMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jaccard: Option<f64>,
        /// Angle threshold in degrees.
        #[arg(long)]
        angle: Option<f64>,
        /// Report CSV [default: stdout].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-image outcome CSV.
        #[arg(long)]
        per_image: Option<PathBuf>,
    },
    /// Grasp point and approach vector in robot coordinates.
    Plan {
        /// Detection tensor file, `[n, n, 7k]`.
        #[arg(long)]
        tensor: Option<PathBuf>,
        /// Depth as 16-bit PNG (millimeters) or a text matrix (meters).
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Calibration file: 4 lines of `cx cy cz rx ry rz`.
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        stride: Option<u32>,
        #[arg(long)]
        fx: Option<f64>,
        #[arg(long)]
        fy: Option<f64>,
        /// Principal point [default: image center].
        #[arg(long)]
        cx: Option<f64>,
        #[arg(long)]
        cy: Option<f64>,
        /// Meters per PNG depth unit.
        #[arg(long)]
        depth_scale: Option<f64>,
        /// Normal-averaging radius in pixels.
        #[arg(long)]
        radius: Option<usize>,
        /// Omit stage timings from the output.
        #[arg(long)]
        no_timings: bool,
    },
    /// Draw rectangles, colored by score rank, onto an image.
    Render {
        #[arg(long)]
        image: Option<PathBuf>,
        /// Rectangle file: `x y w h theta [score]` per line.
        #[arg(long)]
        rects: Option<PathBuf>,
        /// Output PNG.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Draw only the best N rectangles.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        no_labels: bool,
    },
    /// Five-fold split plan as `fold id` lines.
    Split {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Dataset root [env: GRASPKIT_DATA].
        #[arg(long)]
        data: Option<PathBuf>,
        /// image-wise or object-wise.
        #[arg(long)]
        mode: Option<SplitMode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Anchor and offsets of each rectangle under Angle Matching.
    Encode {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        rects: Option<PathBuf>,
    },
    /// Rectangles from `anchor tx ty tw th ttheta` lines.
    Decode {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        offsets: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference loss gradients of the
    /// reference head on synthetic batches.
    Gradcheck {
        #[command(flatten)]
        toy: ToyArgs,
        /// Number of consecutive seeds to check.
        #[arg(long)]
        seeds: Option<usize>,
        /// Central-difference step.
        #[arg(long)]
        step: Option<f64>,
        /// Largest accepted relative error.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Fit the reference head to a synthetic batch with SGD.
    TrainToy {
        #[command(flatten)]
        toy: ToyArgs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        momentum: Option<f64>,
        /// Multiplicative learning-rate decay per step.
        #[arg(long)]
        lr_decay: Option<f64>,
        /// Per-step loss CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Detection tensor of the first image after training.
        #[arg(long)]
        out_tensor: Option<PathBuf>,
    },
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Usage(_) = e {
                let _ = writeln!(err, "run `graspkit --help` for usage");
            }
            e.exit_code()
        }
    }
}

pub fn execute(
    cli: Cli,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let workers = cfg.value("workers", cli.workers, 0usize)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| failed("thread pool", e))?;
    pool.install(|| dispatch(cli.command, &mut cfg, out, err))
}

fn dispatch(
    cmd: Command,
    cfg: &mut RunConfig,
    out: &mut (dyn Write + Send),
    err: &mut (dyn Write + Send),
) -> Result<(), CliError> {
    match cmd {
        Command::BenchMatch {
            grid,
            synthetic,
            data,
            scenes,
            gts,
            reps,
            seed,
            out: path,
        } => {
            let grid = resolve_grid(cfg, grid, None, None, 320)?;
            let synthetic = cfg.value("synthetic", synthetic.then_some(true), false)?;
            let data = if synthetic {
                None
            } else {
                data_root(cfg, data)?
            };
            let scenes = cfg.value("scenes", scenes, 100usize)?;
            let per_scene = cfg.value("gts", gts, 10usize)?;
            let reps = cfg.value("reps", reps, 100usize)?;
            let seed = cfg.value("seed", seed, 0u64)?;
            let path = cfg.optional("out", path.map(PathArg))?;
            start(cfg, err)?;
            if ![4, 6, 8].contains(&grid.k()) || ![16, 32].contains(&grid.stride()) {
                let _ = writeln!(
                    err,
                    "warning: k = {}, stride = {} differ from the usual 4/6/8 and 16/32",
                    grid.k(),
                    grid.stride()
                );
            }
            let batch = match (synthetic, data) {
                (true, _) => synthetic_scenes(&grid, scenes, per_scene, seed),
                (false, Some(root)) => dataset_scenes(&root, grid.input_size() as usize, err)?,
                (false, None) => {
                    return Err(CliError::Usage(
                        "pass --synthetic or a dataset via --data / GRASPKIT_DATA".into(),
                    ))
                }
            };
            if batch.iter().all(Vec::is_empty) {
                return Err(CliError::Failed("no ground truths to match".into()));
            }
            let rows = bench_match(&grid, &batch, reps);
            let mut buf = Vec::new();
            write_csv(&mut buf, &rows).map_err(|e| failed("csv", e))?;
            emit(path.as_ref().map(|p| p.0.as_path()), &buf, out)
        }
        Command::Evaluate {
            predictions,
            manifest,
            data,
            folds,
            split,
            seed,
            jaccard,
            angle,
            out: path,
            per_image,
        } => {
            let predictions = cfg.required("predictions", predictions.map(PathArg))?.0;
            let manifest = cfg.optional("manifest", manifest.map(PathArg))?;
            let data = if manifest.is_none() {
                data_root(cfg, data)?
            } else {
                None
            };
            let folds_path = cfg.optional("folds", folds.map(PathArg))?;
            let mode = cfg.value("split", split, SplitMode::ObjectWise)?;
            let seed = cfg.value("seed", seed, 0u64)?;
            let eval = EvalConfig {
                jaccard_threshold: cfg.value(
                    "jaccard",
                    jaccard,
                    EvalConfig::default().jaccard_threshold,
                )?,
                angle_threshold: cfg.value(
                    "angle",
                    angle,
                    EvalConfig::default().angle_threshold,
                )?,
            };
            let path = cfg.optional("out", path.map(PathArg))?;
            let per_image = cfg.optional("per-image", per_image.map(PathArg))?;
            start(cfg, err)?;
            if !(eval.jaccard_threshold > 0.0 && eval.angle_threshold > 0.0) {
                return Err(CliError::Usage("thresholds must be positive".into()));
            }
            let entries = entries(manifest.map(|m| m.0), data)?;
            let annotations = entries
                .iter()
                .map(load_annotation)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| failed("annotations", e))?;
            let text = read(&predictions)?;
            let preds = parse_predictions(&text).map_err(|e| failed(predictions.display(), e))?;
            let images =
                assemble(&annotations, preds).map_err(|e| failed(predictions.display(), e))?;
            let ids: Vec<String> = annotations.iter().map(|a| a.id.clone()).collect();
            let (fold_idx, split_name) = match folds_path {
                Some(p) => {
                    let folds = parse_fold_file(&read(&p.0)?, &ids)
                        .map_err(|e| failed(p.0.display(), e))?;
                    (folds, "file".to_string())
                }
                None => {
                    let instances: Vec<String> =
                        annotations.iter().map(|a| a.instance.clone()).collect();
                    let plan =
                        make_splits(&instances, mode, seed).map_err(|e| failed("split", e))?;
                    (plan.folds, mode.to_string())
                }
            };
            let folds = group(&images, &fold_idx);
            let t = tables(&folds, eval);
            for (fold, id) in &t.top1.missing {
                let _ = writeln!(err, "warning: fold {}: no prediction for {id}", fold + 1);
            }
            if let Some(p) = per_image {
                write_file(&p.0, per_image_csv(&folds, &t.outcomes).as_bytes())?;
            }
            emit(
                path.as_ref().map(|p| p.0.as_path()),
                csv(&t, &split_name).as_bytes(),
                out,
            )
        }
        Command::Plan {
            tensor,
            depth,
            calib,
            stride,
            fx,
            fy,
            cx,
            cy,
            depth_scale,
            radius,
            no_timings,
        } => {
            let tensor_path = cfg.required("tensor", tensor.map(PathArg))?.0;
            let depth_path = cfg.required("depth", depth.map(PathArg))?.0;
            let calib_path = cfg.required("calib", calib.map(PathArg))?.0;
            let stride = cfg.value("stride", stride, 32u32)?;
            let fx = cfg.value("fx", fx, 525.0)?;
            let fy = cfg.value("fy", fy, 525.0)?;
            let cx = cfg.optional("cx", cx)?;
            let cy = cfg.optional("cy", cy)?;
            let depth_scale = cfg.value("depth-scale", depth_scale, PNG_DEPTH_SCALE)?;
            let radius = cfg.value("radius", radius, NORMAL_RADIUS)?;
            let timings = !cfg.value("no-timings", no_timings.then_some(true), false)?;
            start(cfg, err)?;
            let tf =
                TensorFile::load(&tensor_path).map_err(|e| failed(tensor_path.display(), e))?;
            let tensor = tf
                .to_detection()
                .map_err(|e| failed(tensor_path.display(), e))?;
            let size = u32::try_from(tensor.n())
                .ok()
                .and_then(|n| n.checked_mul(stride))
                .ok_or_else(|| CliError::Usage("tensor too large for the stride".into()))?;
            let grid = AnchorGrid::new(size, stride, tensor.k())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let map = load_depth(&depth_path, depth_scale)
                .map_err(|e| failed(depth_path.display(), e))?;
            let intrinsics = Intrinsics {
                fx,
                fy,
                cx: cx.unwrap_or(map.width() as f64 / 2.0),
                cy: cy.unwrap_or(map.height() as f64 / 2.0),
            };
            let depth = DepthImage { map, intrinsics };
            let pairs = parse_calibration(&read(&calib_path)?)
                .map_err(|e| failed(calib_path.display(), e))?;
            let calib = calibrate(&pairs).map_err(|e| failed(calib_path.display(), e))?;
            let mut times = Vec::new();
            let mut last = Instant::now();
            let result = plan_grasp_with(
                &tensor,
                &grid,
                &depth,
                &calib,
                &PlanConfig {
                    normal_radius: radius,
                },
                |s| {
                    let now = Instant::now();
                    times.push((s, (now - last).as_secs_f64() * 1e3));
                    last = now;
                },
            );
            match result {
                Ok(plan) => {
                    let text = plan_text(&plan, timings.then_some(times.as_slice()));
                    out.write_all(text.as_bytes())
                        .map_err(|e| failed("stdout", e))
                }
                Err(e) if e.source == PipelineError::NoGrasp => {
                    let _ = writeln!(out, "no grasp found");
                    Err(CliError::Failed("no grasp found".into()))
                }
                Err(e) => Err(CliError::Failed(e.to_string())),
            }
        }
        Command::Render {
            image,
            rects,
            out: path,
            top,
            no_labels,
        } => {
            let image = cfg.required("image", image.map(PathArg))?.0;
            let rects_path = cfg.required("rects", rects.map(PathArg))?.0;
            let path = cfg.required("out", path.map(PathArg))?.0;
            let top = cfg.optional("top", top)?;
            let labels = !cfg.value("no-labels", no_labels.then_some(true), false)?;
            start(cfg, err)?;
            let img = image::open(&image)
                .map_err(|e| failed(image.display(), e))?
                .into_rgb8();
            let rects =
                parse_rects(&read(&rects_path)?).map_err(|e| failed(rects_path.display(), e))?;
            let drawn = render(&img, &rects, &RenderOptions { labels, top });
            drawn
                .save_with_format(&path, image::ImageFormat::Png)
                .map_err(|e| failed(path.display(), e))
        }
        Command::Split {
            manifest,
            data,
            mode,
            seed,
            out: path,
        } => {
            let manifest = cfg.optional("manifest", manifest.map(PathArg))?;
            let data = if manifest.is_none() {
                data_root(cfg, data)?
            } else {
                None
            };
            let mode = cfg.value("mode", mode, SplitMode::ObjectWise)?;
            let seed = cfg.value("seed", seed, 0u64)?;
            let path = cfg.optional("out", path.map(PathArg))?;
            start(cfg, err)?;
            let entries = entries(manifest.map(|m| m.0), data)?;
            let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
            let instances: Vec<String> = entries.iter().map(|e| e.instance.clone()).collect();
            let plan = make_splits(&instances, mode, seed).map_err(|e| failed("split", e))?;
            emit(
                path.as_ref().map(|p| p.0.as_path()),
                fold_lines(&plan.folds, &ids).as_bytes(),
                out,
            )
        }
        Command::Encode { grid, rects } => {
            let grid = resolve_grid(cfg, grid, None, None, 320)?;
            let path = cfg.required("rects", rects.map(PathArg))?.0;
            start(cfg, err)?;
            let rects = parse_rects(&read(&path)?).map_err(|e| failed(path.display(), e))?;
            let mut text = String::new();
            for (i, (r, _)) in rects.iter().enumerate() {
                match angle_anchor(&grid, r) {
                    Some(a) => {
                        let _ = writeln!(
                            text,
                            "{}",
                            offset_line(a, &encode(grid.get(a), r, grid.k()))
                        );
                    }
                    None => {
                        let _ = writeln!(
                            err,
                            "warning: rectangle {} has its center outside the image",
                            i + 1
                        );
                    }
                }
            }
            out.write_all(text.as_bytes())
                .map_err(|e| failed("stdout", e))
        }
        Command::Decode { grid, offsets } => {
            let grid = resolve_grid(cfg, grid, None, None, 320)?;
            let path = cfg.required("offsets", offsets.map(PathArg))?.0;
            start(cfg, err)?;
            let offsets = parse_offsets(&read(&path)?).map_err(|e| failed(path.display(), e))?;
            let mut text = String::new();
            for (i, (a, t)) in offsets.iter().enumerate() {
                if *a >= grid.len() {
                    return Err(CliError::Failed(format!(
                        "entry {}: anchor {a} outside a grid of {}",
                        i + 1,
                        grid.len()
                    )));
                }
                let r = decode(grid.get(*a), t, grid.k())
                    .map_err(|e| failed(format!("entry {}", i + 1), e))?;
                let _ = writeln!(text, "{}", rect_line(&r, None));
            }
            out.write_all(text.as_bytes())
                .map_err(|e| failed("stdout", e))
        }
        Command::Gradcheck {
            toy,
            seeds,
            step,
            tol,
        } => {
            let toy = resolve_toy(cfg, toy)?;
            let seeds = cfg.value("seeds", seeds, 5usize)?;
            let step = cfg.value("step", step, 1e-5)?;
            let tol = cfg.value("tol", tol, 1e-4)?;
            start(cfg, err)?;
            let mut text = String::from("seed,max_rel_error,max_abs_error,parameters\n");
            let mut worst: f64 = 0.0;
            for s in toy.seed..toy.seed + seeds as u64 {
                let (head, batch) = toy.setup(s);
                let gc = gradient_check(&head, &batch, &toy.grid, &LossConfig::default(), step)
                    .map_err(|e| failed(format!("seed {s}"), e))?;
                worst = worst.max(gc.max_rel_error);
                let _ = writeln!(
                    text,
                    "{s},{:.6e},{:.6e},{}",
                    gc.max_rel_error, gc.max_abs_error, gc.checked
                );
            }
            out.write_all(text.as_bytes())
                .map_err(|e| failed("stdout", e))?;
            if worst < tol {
                Ok(())
            } else {
                Err(CliError::Failed(format!(
                    "max relative error {worst:.3e} exceeds {tol:.1e}"
                )))
            }
        }
        Command::TrainToy {
            toy,
            steps,
            lr,
            momentum,
            lr_decay,
            log,
            out_tensor,
        } => {
            let toy = resolve_toy(cfg, toy)?;
            let steps = cfg.value("steps", steps, 200usize)?;
            let defaults = TrainConfig::default();
            let train_cfg = TrainConfig {
                lr: cfg.value("lr", lr, defaults.lr)?,
                momentum: cfg.value("momentum", momentum, defaults.momentum)?,
                lr_decay: cfg.value("lr-decay", lr_decay, defaults.lr_decay)?,
                loss: LossConfig::default(),
            };
            let log = cfg.optional("log", log.map(PathArg))?;
            let out_tensor = cfg.optional("out-tensor", out_tensor.map(PathArg))?;
            start(cfg, err)?;
            if steps == 0 {
                return Err(CliError::Usage("--steps must be at least 1".into()));
            }
            let (mut head, batch) = toy.setup(toy.seed);
            let losses = train(&mut head, &batch, &toy.grid, &train_cfg, steps)
                .map_err(|e| failed("training", e))?;
            let final_loss = head
                .loss_and_gradients(&batch, &toy.grid, &train_cfg.loss)
                .map_err(|e| failed("training", e))?
                .0
                .total;
            if let Some(p) = log {
                let mut s = String::from("step,loss\n");
                for (i, l) in losses.iter().chain([&final_loss]).enumerate() {
                    let _ = writeln!(s, "{i},{}", fmt6(*l));
                }
                write_file(&p.0, s.as_bytes())?;
            }
            if let Some(p) = out_tensor {
                let det = head
                    .forward(&batch[0].features, &toy.grid)
                    .map_err(|e| failed("forward", e))?;
                TensorFile::from_detection(&det)
                    .save(&p.0)
                    .map_err(|e| failed(p.0.display(), e))?;
            }
            let initial = losses[0];
            let text = format!(
                "initial_loss {}\nfinal_loss {}\nreduction {}\n",
                fmt6(initial),
                fmt6(final_loss),
                fmt6(1.0 - final_loss / initial)
            );
            out.write_all(text.as_bytes())
                .map_err(|e| failed("stdout", e))
        }
    }
}

/// Path wrapper so paths can pass through [`RunConfig`].
#[derive(Debug, Clone)]
struct PathArg(PathBuf);

impl std::fmt::Display for PathArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.display().fmt(f)
    }
}

impl std::str::FromStr for PathArg {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(PathArg(PathBuf::from(s)))
    }
}

fn start(cfg: &RunConfig, err: &mut dyn Write) -> Result<(), CliError> {
    cfg.finish()?;
    let _ = err.write_all(cfg.echo().as_bytes());
    Ok(())
}

fn resolve_grid(
    cfg: &mut RunConfig,
    g: GridArgs,
    k: Option<usize>,
    stride: Option<u32>,
    input: u32,
) -> Result<AnchorGrid, CliError> {
    let k = match k {
        Some(d) => cfg.value("k", g.k, d)?,
        None => cfg.required("k", g.k)?,
    };
    let stride = match stride {
        Some(d) => cfg.value("stride", g.stride, d)?,
        None => cfg.required("stride", g.stride)?,
    };
    let input = cfg.value("input-size", g.input_size, input)?;
    AnchorGrid::new(input, stride, k).map_err(|e| CliError::Usage(e.to_string()))
}

struct Toy {
    grid: AnchorGrid,
    seed: u64,
    channels: usize,
    images: usize,
    grasps: usize,
    init_scale: f64,
}

impl Toy {
    fn setup(&self, seed: u64) -> (ReferenceHead, Vec<graspkit_core::loss::TrainSample>) {
        let batch = synthetic_batch(&self.grid, self.images, self.grasps, self.channels, seed);
        let head = ReferenceHead::random(
            self.channels,
            self.grid.k(),
            self.init_scale,
            seed.wrapping_add(100),
        );
        (head, batch)
    }
}

fn resolve_toy(cfg: &mut RunConfig, t: ToyArgs) -> Result<Toy, CliError> {
    let grid = resolve_grid(cfg, t.grid, Some(4), Some(32), 256)?;
    let toy = Toy {
        grid,
        seed: cfg.value("seed", t.seed, 0u64)?,
        channels: cfg.value("channels", t.channels, 3usize)?,
        images: cfg.value("images", t.images, 2usize)?,
        grasps: cfg.value("grasps", t.grasps, 3usize)?,
        init_scale: cfg.value("init-scale", t.init_scale, 0.2)?,
    };
    if toy.channels == 0 || toy.images == 0 {
        return Err(CliError::Usage(
            "--channels and --images must be positive".into(),
        ));
    }
    Ok(toy)
}

fn data_root(cfg: &mut RunConfig, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
    let flag = flag.or_else(data_root_from_env);
    Ok(cfg.optional("data", flag.map(PathArg))?.map(|d| d.0))
}

fn entries(
    manifest: Option<PathBuf>,
    data: Option<PathBuf>,
) -> Result<Vec<ManifestEntry>, CliError> {
    match (manifest, data) {
        (Some(m), _) => load_manifest(&m).map_err(|e| failed(m.display(), e)),
        (None, Some(root)) => discover(&root).map_err(|e| failed(root.display(), e)),
        (None, None) => Err(CliError::Usage(
            "pass --manifest, --data or set GRASPKIT_DATA".into(),
        )),
    }
}

/// Ground truths of every dataset image, center-cropped to the input size.
fn dataset_scenes(
    root: &Path,
    size: usize,
    err: &mut dyn Write,
) -> Result<Vec<Vec<graspkit_core::RotatedRect>>, CliError> {
    let entries = discover(root).map_err(|e| failed(root.display(), e))?;
    let mut scenes = Vec::with_capacity(entries.len());
    let mut dropped = 0;
    for e in &entries {
        let ann = load_annotation(e).map_err(|err| failed(&e.id, err))?;
        dropped += ann.dropped;
        let (w, h) = image::image_dimensions(&e.rgb).map_err(|err| failed(e.rgb.display(), err))?;
        scenes.push(center_crop(&ann.grasps, w as usize, h as usize, size));
    }
    if dropped > 0 {
        let _ = writeln!(err, "warning: {dropped} malformed rectangles skipped");
    }
    Ok(scenes)
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| failed(path.display(), e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| failed(path.display(), e))
}

fn emit(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, bytes),
        None => out.write_all(bytes).map_err(|e| failed("stdout", e)),
    }
}

fn vec3(v: [f64; 3]) -> String {
    format!("[{}, {}, {}]", fmt6(v[0]), fmt6(v[1]), fmt6(v[2]))
}

/// JSON text of a plan; `timings` adds per-stage milliseconds.
pub fn plan_text(
    plan: &graspkit_core::pipeline::GraspPlan,
    timings: Option<&[(Stage, f64)]>,
) -> String {
    let r = &plan.candidate.rect;
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"point\": {},", vec3(plan.point));
    let _ = writeln!(s, "  \"vector\": {},", vec3(plan.approach));
    let _ = writeln!(s, "  \"theta_deg\": {},", fmt6(plan.theta));
    let _ = writeln!(s, "  \"score\": {},", fmt6(plan.score));
    let _ = writeln!(s, "  \"pixel\": [{}, {}],", plan.pixel.u, plan.pixel.v);
    let rect = [r.x(), r.y(), r.w(), r.h(), r.theta()].map(fmt6).join(", ");
    match timings {
        Some(t) => {
            let _ = writeln!(s, "  \"rect\": [{rect}],");
            let parts: Vec<String> = t
                .iter()
                .map(|(st, ms)| format!("\"{}\": {}", st.name(), fmt6(*ms)))
                .collect();
            let _ = writeln!(s, "  \"timings_ms\": {{{}}}", parts.join(", "));
        }
        None => {
            let _ = writeln!(s, "  \"rect\": [{rect}]");
        }
    }
    s.push_str("}\n");
    s
}
