//! Run configuration file (TOML).
//!
//! ```toml
//! seed = 7                      # master seed for every random stream
//! dataset = "data/desk"         # relative paths are resolved against this file
//! output = "runs/desk"
//! checkpoint_every = 1000       # iterations between resume-state saves (0: only at the end)
//! dump_selfsup = false          # write corrected label maps of each self-supervision pass
//!
//! [architecture]                # trunk_depth 4, trunk_width 64, position_encoding_levels 6,
//! class_count = 4               # direction_encoding_levels 2, class_count 4
//!
//! [train]                       # mode "full" | "fast" | "semantic-only"
//! mode = "full"                 # iterations 20000, batch_size 1024, lambda 0.04, gamma 1,
//! iterations = 20000            # semantic_only_iterations 2000, learning_rate 5e-4 -> 5e-5,
//! ray_order = "shuffled"        # label_sampling_rate 1, log_every 100, precision "f32"
//! [train.sampling]              # coarse 32, fine 32, perturb true
//! [train.fast]                  # target_classes [] (= all but background),
//!                               # negative_sampling_rate 0.15, reset_color "adaptive" | [r, g, b]
//! [train.selfsup]               # present = enabled; warmup_iterations 2000, interval 1000,
//!                               # structuring_element_radius 1, k 1, min_cluster_fraction 0.02,
//!                               # targets [], trust_human_labels false
//!
//! [render]                      # edit "none" | "unique:OB" | "mask:OB", sentinel [1, 1, 1]
//! [render.sampling]             # coarse 32, fine 32, perturb false
//!
//! [eval]
//! ssim_every = 1000             # iterations between held-out SSIM log entries (0: never)
//! views = 0                     # held-out views used for that SSIM (0: all)
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use semfield_core::field::NetworkArchitecture;
use semfield_core::render::{EditMode, RenderSettings, SamplingConfig};
use semfield_core::scene::SceneDataset;
use semfield_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edit mode written as `none`, `unique:OB` or `mask:OB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditSpec(pub EditMode);

impl FromStr for EditSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("edit must be none, unique:OB or mask:OB, got \"{s}\"");
        if s == "none" {
            return Ok(EditSpec(EditMode::FullScene));
        }
        let (kind, ob) = s.split_once(':').ok_or_else(bad)?;
        let ob: u8 = ob.parse().map_err(|_| bad())?;
        match kind {
            "unique" => Ok(EditSpec(EditMode::UniqueDisplay { ob })),
            "mask" => Ok(EditSpec(EditMode::MaskOut { ob })),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for EditSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            EditMode::FullScene => write!(f, "none"),
            EditMode::UniqueDisplay { ob } => write!(f, "unique:{ob}"),
            EditMode::MaskOut { ob } => write!(f, "mask:{ob}"),
        }
    }
}

impl Serialize for EditSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EditSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderOptions {
    pub edit: EditSpec,
    /// Color of rays suppressed by unique display, `[0, 1]` per channel.
    pub sentinel: [f64; 3],
    pub sampling: SamplingConfig,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            edit: EditSpec::default(),
            sentinel: [1.0; 3],
            sampling: SamplingConfig::default(),
        }
    }
}

impl RenderOptions {
    /// Settings for rendering frames of `ds`.
    pub fn settings(&self, ds: &SceneDataset) -> RenderSettings {
        RenderSettings {
            edit: self.edit.0,
            bg: ds.background_class,
            white_background: ds.white_background,
            sentinel: self.sentinel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub ssim_every: usize,
    pub views: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            ssim_every: 1000,
            views: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: PathBuf,
    pub output: PathBuf,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub dump_selfsup: bool,
    #[serde(default)]
    pub architecture: NetworkArchitecture,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub render: RenderOptions,
    #[serde(default)]
    pub eval: EvalOptions,
}

fn default_checkpoint_every() -> usize {
    1000
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            seed: 0,
            dataset: dataset.into(),
            output: output.into(),
            checkpoint_every: default_checkpoint_every(),
            dump_selfsup: false,
            architecture: NetworkArchitecture::default(),
            train: TrainConfig::default(),
            render: RenderOptions::default(),
            eval: EvalOptions::default(),
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(vec![format!("{}: {}", path.display(), e.message())]))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.output = base.join(&cfg.output);
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::Usage(format!("config file {} not found", path.display()))
            } else {
                Error::io(path, e)
            }
        })?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Every problem with the configuration against a dataset with
    /// `class_count` classes.
    pub fn problems(&self, class_count: usize) -> Vec<String> {
        let mut p = Vec::new();
        if let Err(e) = self.architecture.validate() {
            p.push(e.to_string());
        }
        if self.architecture.class_count != class_count {
            p.push(format!(
                "architecture.class_count is {} but the dataset has {class_count} classes",
                self.architecture.class_count
            ));
        }
        let mut train = self.train.clone();
        train.seed = self.seed;
        p.extend(
            train
                .problems(class_count)
                .into_iter()
                .map(|m| format!("train: {m}")),
        );
        if let Some(ob) = self.render.edit.0.target() {
            if ob as usize >= class_count {
                p.push(format!(
                    "render.edit target {ob} is not below class_count {class_count}"
                ));
            }
        }
        if self
            .render
            .sentinel
            .iter()
            .any(|c| !(0.0..=1.0).contains(c))
        {
            p.push("render.sentinel components must lie in [0, 1]".into());
        }
        if let Err(e) = self.render.sampling.validate() {
            p.push(format!("render.sampling: {e}"));
        }
        p
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        let p = self.problems(class_count);
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// The training configuration with the master seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}
