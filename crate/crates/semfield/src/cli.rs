//! Command-line interface.
//!
//! ```text
//! semfield make-dataset --out data/desk [--scene scene.json] [--views 16] [--size 64] [--seed 0] [--alpha-target 0.05]
//! semfield train  --config run.toml [--mode full|fast|semantic-only] [--ray-order shuffled|row-major]
//!                 [--selfsup on|off] [--iterations N] [--resume] [--stop-after N]
//! semfield render --config run.toml [--checkpoint PATH] [--edit none|unique:OB|mask:OB] [--split test|train|all] [--frames 0,8]
//! semfield edit   --config run.toml --edit unique:OB|mask:OB [same options as render]
//! semfield eval   --config run.toml [--checkpoint PATH] [--split test|train|all] [--out report.json]
//! semfield sweep  --config run.toml --param negative_sampling_rate|label_sampling_rate --values 0.05,0.15,0.3
//! ```
//!
//! Rendered frames are written as `frame_NNN_rgb.png`, `frame_NNN_labels.png`,
//! `frame_NNN_depth.png` and `frame_NNN_opacity.png` (see
//! [`crate::render::write_rendered`]), by default into `<output>/render` or
//! `<output>/edit-<mode>`. `SEMFIELD_THREADS` sets the render thread count.
//!
//! Exit codes: 0 success, 1 usage, 2 invalid input or configuration,
//! 3 runtime failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use semfield_core::render::EditMode;
use semfield_core::sampling::RayOrder;
use semfield_core::scene::{
    default_desk_scene, fit_target_area, generate_scene, Orbit, SceneDataset, SceneSpec,
};
use semfield_core::selfsup::SelfSupSchedule;
use semfield_core::train::TrainMode;
use semfield_core::ClassId;

use crate::checkpoint::read_checkpoint_for;
use crate::config::{EditSpec, RunConfig};
use crate::dataset::{load_dataset, write_dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, SsimRegion};
use crate::render::{render_parallel, thread_count, write_rendered};
use crate::run::{ssim_region, train_run, RunOptions, CHECKPOINT_FILE};
use crate::sweep::{run_sweep, SweepParam};

#[derive(Debug, Parser)]
#[command(
    name = "semfield",
    version,
    about = "Train, render and edit semantic radiance fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ray-trace a synthetic scene into a dataset directory.
    MakeDataset(MakeDatasetArgs),
    /// Train a field as configured.
    Train(TrainArgs),
    /// Render dataset views from a checkpoint.
    Render(RenderArgs),
    /// Render with an edit applied (`--edit` required).
    Edit(EditArgs),
    /// Score a checkpoint on dataset views.
    Eval(EvalArgs),
    /// Train and score one run per parameter value.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct MakeDatasetArgs {
    /// Run config; supplies the seed and the default output directory.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scene description (JSON); the built-in desk scene if omitted.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub views: usize,
    /// Image width and height in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rescale objects until the target classes cover this fraction of all pixels.
    #[arg(long)]
    pub alpha_target: Option<f64>,
    /// Target classes for `--alpha-target` (default: every non-background class).
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<ClassId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    Fast,
    SemanticOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RayOrderArg {
    Shuffled,
    RowMajor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub ray_order: Option<RayOrderArg>,
    /// `on` uses the configured schedule, or the default one if none is configured.
    #[arg(long, value_enum)]
    pub selfsup: Option<Toggle>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Continue from the state saved in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Save and stop once this many iterations are done.
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Test,
    Train,
    All,
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Defaults to `<output>/checkpoint.bin`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Explicit frame indices; overrides `--split`.
    #[arg(long, value_delimiter = ',')]
    pub frames: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub view: ViewArgs,
    /// Overrides `render.edit` from the config.
    #[arg(long)]
    pub edit: Option<EditSpec>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[command(flatten)]
    pub view: ViewArgs,
    #[arg(long)]
    pub edit: EditSpec,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub view: ViewArgs,
    /// Report path; defaults to `<output>/eval.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub param: SweepParam,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Iterations per run; overrides the config.
    #[arg(long)]
    pub iterations: Option<usize>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeDataset(a) => make_dataset(a),
        Command::Train(a) => train(a),
        Command::Render(a) => render(a.view, a.edit, a.out),
        Command::Edit(a) => render(a.view, Some(a.edit), a.out),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn make_dataset(a: MakeDatasetArgs) -> Result<()> {
    let cfg = a.config.as_deref().map(RunConfig::load).transpose()?;
    let out = a
        .out
        .or_else(|| cfg.as_ref().map(|c| c.dataset.clone()))
        .ok_or_else(|| Error::Usage("make-dataset needs --out or --config".into()))?;
    let seed = a.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
    let mut spec: SceneSpec = match &a.scene {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
        }
        None => default_desk_scene(),
    };
    if a.views == 0 || a.size == 0 {
        return Err(Error::Config(vec![
            "--views and --size must be positive".into()
        ]));
    }
    let orbit = Orbit {
        width: a.size,
        height: a.size,
        ..Orbit::default()
    };
    if let Some(alpha) = a.alpha_target {
        let targets = if a.targets.is_empty() {
            spec.object_classes()
        } else {
            a.targets.clone()
        };
        let (fitted, achieved) =
            fit_target_area(&spec, &targets, alpha, 0.005, a.views, &orbit, seed)?;
        log::info!("target area {achieved:.4} (requested {alpha})");
        spec = fitted;
    }
    let ds = generate_scene(&spec, a.views, &orbit, seed)?;
    write_dataset(&ds, &out)?;
    println!(
        "wrote {} frames of {}x{} to {}",
        ds.frames.len(),
        a.size,
        a.size,
        out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(m) = a.mode {
        cfg.train.mode = match m {
            ModeArg::Full => TrainMode::Full,
            ModeArg::Fast => TrainMode::Fast,
            ModeArg::SemanticOnly => TrainMode::SemanticOnly,
        };
    }
    if let Some(o) = a.ray_order {
        cfg.train.ray_order = match o {
            RayOrderArg::Shuffled => RayOrder::Shuffled,
            RayOrderArg::RowMajor => RayOrder::RowMajor,
        };
    }
    match a.selfsup {
        Some(Toggle::On) if cfg.train.selfsup.is_none() => {
            cfg.train.selfsup = Some(SelfSupSchedule::default())
        }
        Some(Toggle::Off) => cfg.train.selfsup = None,
        _ => {}
    }
    if let Some(n) = a.iterations {
        cfg.train.iterations = n;
    }
    let summary = train_run(
        &cfg,
        &RunOptions {
            resume: a.resume,
            stop_after: a.stop_after,
            threads: 0,
        },
    )?;
    println!(
        "{} at iteration {} in {:.1} s; output in {}",
        if summary.completed {
            "finished"
        } else {
            "stopped"
        },
        summary.iteration,
        summary.wall_seconds,
        summary.dir.display()
    );
    Ok(())
}

fn frames_for(ds: &SceneDataset, v: &ViewArgs) -> Result<Vec<usize>> {
    let frames = if !v.frames.is_empty() {
        v.frames.clone()
    } else {
        match v.split {
            Split::Test => ds.test_indices(),
            Split::Train => ds.train_indices(),
            Split::All => (0..ds.frames.len()).collect(),
        }
    };
    if let Some(bad) = frames.iter().find(|f| **f >= ds.frames.len()) {
        return Err(Error::Usage(format!(
            "frame {bad} is out of range (dataset has {} frames)",
            ds.frames.len()
        )));
    }
    Ok(frames)
}

fn checkpoint_path(cfg: &RunConfig, v: &ViewArgs) -> PathBuf {
    v.checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output.join(CHECKPOINT_FILE))
}

fn render(v: ViewArgs, edit: Option<EditSpec>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = RunConfig::load(&v.config)?;
    if let Some(e) = edit {
        cfg.render.edit = e;
    }
    let ds = load_dataset(&cfg.dataset)?;
    cfg.validate(ds.class_count)?;
    let settings = cfg.render.settings(&ds);
    settings.validate(ds.class_count)?;
    let params = read_checkpoint_for(&checkpoint_path(&cfg, &v), &cfg.architecture)?;
    let frames = frames_for(&ds, &v)?;
    let dir = out.unwrap_or_else(|| {
        cfg.output.join(match cfg.render.edit.0 {
            EditMode::FullScene => "render".to_string(),
            EditMode::UniqueDisplay { ob } => format!("edit-unique-{ob}"),
            EditMode::MaskOut { ob } => format!("edit-mask-{ob}"),
        })
    });
    let threads = thread_count();
    for f in frames {
        let img = render_parallel(
            &params,
            &ds.view(f),
            &settings,
            &cfg.render.sampling,
            cfg.seed,
            threads,
        )?;
        let files = write_rendered(&img, &dir, &format!("frame_{f:03}"), ds.t_near, ds.t_far)?;
        println!("{}", files.rgb.display());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.view.config)?;
    let ds = load_dataset(&cfg.dataset)?;
    cfg.validate(ds.class_count)?;
    let params = read_checkpoint_for(&checkpoint_path(&cfg, &a.view), &cfg.architecture)?;
    let frames = frames_for(&ds, &a.view)?;
    let region: SsimRegion = ssim_region(&cfg, &ds);
    let report = evaluate(
        &params,
        &ds,
        &frames,
        &cfg.render.sampling,
        &region,
        cfg.seed,
        thread_count(),
    )?;
    let out = a.out.unwrap_or_else(|| cfg.output.join("eval.json"));
    write_text(&out, &report.to_json())?;
    print!("{}", report.to_json());
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(n) = a.iterations {
        cfg.train.iterations = n;
    }
    let result = run_sweep(&cfg, a.param, &a.values, 0)?;
    print!("{}", result.table());
    println!("data: {}", result.csv.display());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
