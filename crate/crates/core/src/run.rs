//! Command implementations behind the `ctloss` binary: tree dumps, maxima
//! tables, synthetic images and configured optimisation runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Connectivity;
use crate::image::Image;
use crate::imageio::{format_value, read_image, write_csv_matrix, write_image};
use crate::losses::{LossBreakdown, LossConfig};
use crate::maxtree::MaxTree;
use crate::measures::{dyn_measure, measure, vol_measure};
use crate::optimizer::{optimize_with, OptimConfig, StopReason, Trajectory};
use crate::synth::SynthSpec;

/// Where the observation comes from: an image file or a generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Path(PathBuf),
    Synth(SynthInput),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthInput {
    pub synth: SynthSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub result_image: Option<PathBuf>,
    pub loss_csv: Option<PathBuf>,
    pub maxima_csv: Option<PathBuf>,
    /// Write the current image every this many iterations (0 disables).
    pub snapshot_every: usize,
    pub snapshot_dir: Option<PathBuf>,
}

/// JSON run configuration. Relative paths are resolved against the
/// directory holding the configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub connectivity: Option<Connectivity>,
    #[serde(default)]
    pub loss: LossConfig<f64>,
    #[serde(default)]
    pub optim: OptimConfig<f64>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Rewrites relative paths as `base/relative`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InputSpec::Path(p) = &mut self.input {
            fix(p);
        }
        let o = &mut self.outputs;
        for p in [
            &mut o.result_image,
            &mut o.loss_csv,
            &mut o.maxima_csv,
            &mut o.snapshot_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Every semantic problem with the configuration.
    pub fn problems(&self) -> Vec<String> {
        let mut out = self.loss.problems();
        out.extend(self.optim.problems());
        if self.outputs.snapshot_every > 0 && self.outputs.snapshot_dir.is_none() {
            out.push("outputs.snapshot_every requires outputs.snapshot_dir".into());
        }
        if let InputSpec::Path(p) = &self.input {
            if !p.exists() {
                out.push(format!("input {} does not exist", p.display()));
            }
        }
        if let InputSpec::Synth(SynthInput { synth }) = &self.input {
            let (w, h, noise) = match synth {
                SynthSpec::FourBumps {
                    width,
                    height,
                    noise,
                    ..
                } => (*width, *height, *noise),
                SynthSpec::TwoRidges {
                    width,
                    height,
                    noise,
                    ..
                } => (*width, *height, *noise),
            };
            if w == 0 || h == 0 {
                out.push(format!("synth dimensions must be positive, got {w}x{h}"));
            }
            if !(noise >= 0.0) || !noise.is_finite() {
                out.push(format!(
                    "synth noise must be finite and non-negative, got {noise}"
                ));
            }
        }
        out
    }

    pub fn load_input(&self) -> Result<Image<f64>> {
        let img = match &self.input {
            InputSpec::Path(p) => read_image(p)?,
            InputSpec::Synth(s) => s.synth.generate()?,
        };
        apply_connectivity(img, self.connectivity)
    }
}

pub fn apply_connectivity(img: Image<f64>, conn: Option<Connectivity>) -> Result<Image<f64>> {
    match conn {
        Some(c) => {
            let grid = img.grid().with_connectivity(c)?;
            img.with_grid(grid)
        }
        None => Ok(img),
    }
}

/// JSON dump of the max-tree of `image`.
pub fn tree_json(image: &Image<f64>) -> Result<String> {
    let tree = MaxTree::build(image);
    let mut s = serde_json::to_string_pretty(&tree.dump())
        .map_err(|e| Error::Oracle(format!("serialising tree: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub const MAXIMA_HEADER: &str = "leaf_node,alt,dyn,vol,saddle_alt_dyn,saddle_vol";

/// One row per maximum: leaf node, its three measures and the altitudes of
/// its dynamics and volume saddles.
pub fn maxima_csv(image: &Image<f64>) -> String {
    let tree = MaxTree::build(image);
    let attrs = tree.attributes();
    let a = tree.altitude();
    let d = dyn_measure(&tree);
    let v = vol_measure(&tree, &attrs);
    let mut out = String::from(MAXIMA_HEADER);
    out.push('\n');
    for (i, &leaf) in tree.leaves().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            leaf,
            format_value(a[leaf]),
            format_value(d.values[i]),
            format_value(v.values[i]),
            format_value(a[d.saddle[i]]),
            format_value(a[v.saddle[i]]),
        );
    }
    out
}

pub const LOSS_HEADER: &str = "iter,total,l2,jr,smooth";

pub fn loss_csv(log: &[LossBreakdown<f64>]) -> String {
    let mut out = String::from(LOSS_HEADER);
    out.push('\n');
    for (i, b) in log.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i,
            format_value(b.total),
            format_value(b.l2),
            format_value(b.jr),
            format_value(b.smooth)
        );
    }
    out
}

/// Number of maxima whose saliency exceeds half the margin.
pub fn surviving_maxima(image: &Image<f64>, loss: &LossConfig<f64>) -> usize {
    let tree = MaxTree::build(image);
    let attrs = tree.attributes();
    let half = loss.margin / 2.0;
    measure(&tree, &attrs, loss.saliency)
        .values
        .iter()
        .filter(|&&s| s > half)
        .count()
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub trajectory: Trajectory<f64>,
    pub surviving: usize,
    pub stop_reason: StopReason,
}

impl RunSummary {
    pub fn report(&self, loss: &LossConfig<f64>) -> String {
        let last = self.trajectory.loss_log.last().copied().unwrap_or_default();
        format!(
            "iterations: {}\nstop_reason: {}\nfinal_loss: {}\nsurviving_maxima ({} > {}): {}\n",
            self.trajectory.iterations_run,
            self.stop_reason,
            format_value(last.total),
            loss.saliency,
            loss.margin / 2.0,
            self.surviving
        )
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Validates `cfg`, runs the optimiser and writes every requested artifact.
pub fn run_optimize(cfg: &RunConfig) -> Result<RunSummary> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let y = cfg.load_input()?;

    let snap = match (&cfg.outputs.snapshot_dir, cfg.outputs.snapshot_every) {
        (Some(dir), every) if every > 0 => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            Some((dir.clone(), every))
        }
        _ => None,
    };
    let mut snap_err = None;
    let trajectory = optimize_with(&y, &cfg.loss, &cfg.optim, |iter, f, _| {
        if let Some((dir, every)) = &snap {
            if iter % every == 0 && snap_err.is_none() {
                let path = dir.join(format!("snapshot_{iter:06}.csv"));
                if let Err(e) = write_csv_matrix(f, &path) {
                    snap_err = Some(e);
                }
            }
        }
    })?;
    if let Some(e) = snap_err {
        return Err(e);
    }

    let out = &cfg.outputs;
    if let Some(p) = &out.result_image {
        write_image(&trajectory.final_image, p)?;
    }
    if let Some(p) = &out.loss_csv {
        write_text(p, &loss_csv(&trajectory.loss_log))?;
    }
    if let Some(p) = &out.maxima_csv {
        write_text(p, &maxima_csv(&trajectory.final_image))?;
    }
    let surviving = surviving_maxima(&trajectory.final_image, &cfg.loss);
    Ok(RunSummary {
        stop_reason: trajectory.stop_reason,
        trajectory,
        surviving,
    })
}
