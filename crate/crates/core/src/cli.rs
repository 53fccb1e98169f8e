//! Command-line front end.
//!
//! Every command writes a machine-readable JSON report to standard output and
//! a short human summary to standard error. Exit codes: 0 success, 1 internal
//! or I/O error, 2 usage or validation error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::denoise::{restore_slices, KernelField, NoiseMask};
use crate::labeling::{instance_table_with_bins, label_components_chunked, Connectivity};
use crate::loss::wbce;
use crate::metrics::{evaluate_instances, semantic_metrics, SizeBins, DEFAULT_IOU_THRESHOLD};
use crate::parallel::with_workers;
use crate::seedmap::{make_seed_map, SeedParams};
use crate::volume::{load_volume, AnyVolume, ChunkGrid, Volume, Voxel};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

/// Pipeline parameters. Loaded from `--config` and then overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub t1: f32,
    pub t2: f32,
    pub connectivity: Connectivity,
    pub min_size: u64,
    pub iou_threshold: f64,
    pub size_bins: SizeBins,
    /// `None` labels the volume as a single chunk.
    pub chunk: Option<[usize; 3]>,
    /// 0 uses every available core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seed = SeedParams::default();
        Self {
            t1: seed.t1,
            t2: seed.t2,
            connectivity: Connectivity::default(),
            min_size: 0,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            size_bins: SizeBins::default(),
            chunk: None,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&fs::read(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        SeedParams::new(self.t1, self.t2)?;
        SizeBins::new(self.size_bins.small_max, self.size_bins.med_max)?;
        if !(self.iou_threshold > 0.5 && self.iou_threshold <= 1.0) {
            return Err(Error::UnsupportedThreshold(self.iou_threshold));
        }
        if let Some(c) = self.chunk {
            ChunkGrid::new(c, [1; 3])?;
        }
        Ok(())
    }

    fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(v) = o.t1 {
            self.t1 = v;
        }
        if let Some(v) = o.t2 {
            self.t2 = v;
        }
        if let Some(v) = o.connectivity {
            self.connectivity = Connectivity::try_from(v)?;
        }
        if let Some(v) = o.min_size {
            self.min_size = v;
        }
        if let Some(v) = o.iou {
            self.iou_threshold = v;
        }
        if let Some(v) = &o.chunk {
            self.chunk = Some(parse_chunk(v)?);
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        Ok(())
    }

    fn grid(&self, dims: [usize; 3]) -> Result<ChunkGrid> {
        match self.chunk {
            Some(c) => ChunkGrid::new(c, [1; 3]),
            None => Ok(ChunkGrid::whole(dims)),
        }
    }
}

/// JSON report for standard output and a human summary for standard error.
type Report = (String, String);

#[derive(Serialize)]
struct SegmentReport {
    instances: usize,
    bins: BinCounts,
}

#[derive(Serialize)]
struct BinCounts {
    small: usize,
    med: usize,
    large: usize,
}

#[derive(Serialize)]
struct ApReport {
    ap: f64,
}

#[derive(Serialize)]
struct DenoiseReport {
    slices: Vec<usize>,
    pixels: usize,
}

#[derive(Serialize)]
struct LossReport {
    mask: f64,
    boundary: Option<f64>,
    total: f64,
}

fn parse_chunk(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("--chunk {s:?}: {e}")))?;
    <[usize; 3]>::try_from(parts)
        .map_err(|_| Error::InvalidArgument(format!("--chunk {s:?} needs three values d,h,w")))
}

#[derive(Debug, Parser)]
#[command(
    name = "mitoseg",
    version,
    about = "Mitochondria instance segmentation tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Threshold probability volumes into seeds and label their components.
    Segment(SegmentArgs),
    /// Score a predicted label volume against ground truth.
    Evaluate(EvaluateArgs),
    /// Restore damaged slices from per-pixel kernels.
    Denoise(DenoiseArgs),
    /// Weighted binary cross-entropy of predictions against targets.
    Loss(LossArgs),
    /// Jaccard and Dice scores of two binary masks.
    SemanticEval(SemanticArgs),
}

/// Flags shared by every command; they override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub t1: Option<f32>,
    #[arg(long)]
    pub t2: Option<f32>,
    /// 6 or 26.
    #[arg(long)]
    pub connectivity: Option<u32>,
    #[arg(long)]
    pub min_size: Option<u64>,
    #[arg(long)]
    pub iou: Option<f64>,
    /// Chunk dims as `d,h,w`.
    #[arg(long)]
    pub chunk: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Semantic-mask probabilities (f32).
    #[arg(long)]
    pub mask: PathBuf,
    /// Instance-boundary probabilities (f32).
    #[arg(long)]
    pub boundary: PathBuf,
    /// Output label volume (u32).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Where to write the full match report.
    #[arg(long)]
    pub report: PathBuf,
    /// Optional f32 volume whose per-instance mean ranks predictions.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Kernel-field volume with a `.json` sidecar naming its slice. Repeatable.
    #[arg(long = "kernels")]
    pub kernels: Vec<PathBuf>,
    /// `Z=path` to a u8 mask of dims (1, H, W). Repeatable.
    #[arg(long = "noise-mask")]
    pub noise_masks: Vec<String>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Predicted mask probabilities.
    #[arg(long)]
    pub pred: PathBuf,
    /// Mask targets in {0, 1}.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, requires = "boundary_gt")]
    pub boundary_pred: Option<PathBuf>,
    #[arg(long, requires = "boundary_pred")]
    pub boundary_gt: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct SemanticArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Command {
    fn overrides(&self) -> &Overrides {
        match self {
            Command::Segment(a) => &a.overrides,
            Command::Evaluate(a) => &a.overrides,
            Command::Denoise(a) => &a.overrides,
            Command::Loss(a) => &a.overrides,
            Command::SemanticEval(a) => &a.overrides,
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run(std::env::args_os(), &mut out, &mut err)
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(&cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

fn dispatch(cmd: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let o = cmd.overrides();
    let mut cfg = match &o.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(o)?;
    cfg.validate()?;
    let workers = cfg.workers;
    let (report, summary) = with_workers(workers, || match cmd {
        Command::Segment(a) => segment(a, &cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
        Command::Denoise(a) => denoise(a),
        Command::Loss(a) => loss(a),
        Command::SemanticEval(a) => semantic(a),
    })??;
    writeln!(stdout, "{report}")?;
    if !summary.is_empty() {
        writeln!(stderr, "{summary}")?;
    }
    Ok(())
}

fn segment(a: &SegmentArgs, cfg: &PipelineConfig) -> Result<Report> {
    let mask = Volume::<f32>::load_probability(&a.mask)?;
    let boundary = Volume::<f32>::load_probability(&a.boundary)?;
    let seeds = make_seed_map(&mask, &boundary, SeedParams::new(cfg.t1, cfg.t2)?)?;
    let grid = cfg.grid(seeds.dims())?;
    let labels = label_components_chunked(&seeds, &grid, cfg.connectivity, cfg.min_size)?;
    labels.save(&a.out)?;
    let table = instance_table_with_bins(&labels, Some(&mask), cfg.size_bins)?;
    let [small, med, large] = table.count_by_category();
    let summary = format!(
        "{} instances ({small} small, {med} med, {large} large) -> {}",
        table.len(),
        a.out.display()
    );
    let report = SegmentReport {
        instances: table.len(),
        bins: BinCounts { small, med, large },
    };
    Ok((serde_json::to_string(&report)?, summary))
}

/// Any integer volume as `u64` labels.
fn load_labels(path: &Path) -> Result<Volume<u64>> {
    match load_volume(path)? {
        AnyVolume::U8(v) => Ok(v.map(u64::from)),
        AnyVolume::U16(v) => Ok(v.map(u64::from)),
        AnyVolume::U32(v) => Ok(v.map(u64::from)),
        AnyVolume::U64(v) => Ok(v),
        AnyVolume::F32(_) => Err(Error::Format(format!(
            "{}: label volumes must hold integers, file holds f32",
            path.display()
        ))),
    }
}

fn evaluate(a: &EvaluateArgs, cfg: &PipelineConfig) -> Result<Report> {
    let pred = load_labels(&a.pred)?;
    let gt = load_labels(&a.gt)?;
    let scores = a.scores.as_ref().map(Volume::<f32>::load).transpose()?;
    let report = evaluate_instances(
        &pred,
        &gt,
        scores.as_ref(),
        cfg.iou_threshold,
        cfg.size_bins,
    )?;
    fs::write(&a.report, serde_json::to_vec_pretty(&report)?)?;
    let all = &report.bins.all;
    let summary = format!(
        "AP@{} = {:.4} (tp {}, fp {}, fn {}) -> {}",
        cfg.iou_threshold,
        all.ap,
        all.tp,
        all.fp,
        all.fn_,
        a.report.display()
    );
    Ok((serde_json::to_string(&ApReport { ap: all.ap })?, summary))
}

fn parse_mask_arg(s: &str) -> Result<(usize, PathBuf)> {
    let (z, path) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("--noise-mask {s:?} must be Z=path")))?;
    let z = z
        .trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("--noise-mask {s:?}: {e}")))?;
    Ok((z, PathBuf::from(path)))
}

fn denoise(a: &DenoiseArgs) -> Result<Report> {
    let mut masks = BTreeMap::new();
    for s in &a.noise_masks {
        let (z, path) = parse_mask_arg(s)?;
        let mask = NoiseMask::from_volume(&Volume::<u8>::load(path)?)?;
        if masks.insert(z, mask).is_some() {
            return Err(Error::InvalidArgument(format!(
                "slice {z} has two noise masks"
            )));
        }
    }
    let mut kernels = BTreeMap::new();
    for path in &a.kernels {
        let (z, field) = KernelField::load(path)?;
        if kernels.insert(z, field).is_some() {
            return Err(Error::InvalidArgument(format!(
                "slice {z} has two kernel fields"
            )));
        }
    }
    fn restore<T: Voxel>(
        v: &Volume<T>,
        m: &BTreeMap<usize, NoiseMask>,
        k: &BTreeMap<usize, KernelField>,
    ) -> Result<AnyVolume> {
        Ok(restore_slices(v, m, k)?.into_any())
    }
    let out = match load_volume(&a.input)? {
        AnyVolume::U8(v) => restore(&v, &masks, &kernels)?,
        AnyVolume::U16(v) => restore(&v, &masks, &kernels)?,
        AnyVolume::U32(v) => restore(&v, &masks, &kernels)?,
        AnyVolume::U64(v) => restore(&v, &masks, &kernels)?,
        AnyVolume::F32(v) => restore(&v, &masks, &kernels)?,
    };
    out.save(&a.out)?;
    let restored: usize = masks
        .values()
        .map(|m| m.data.iter().filter(|&&b| b == 1).count())
        .sum();
    let summary = format!(
        "restored {restored} pixels over {} slices -> {}",
        masks.len(),
        a.out.display()
    );
    let report = DenoiseReport {
        slices: masks.keys().copied().collect(),
        pixels: restored,
    };
    Ok((serde_json::to_string(&report)?, summary))
}

fn loss(a: &LossArgs) -> Result<Report> {
    let mask = wbce(&Volume::<f32>::load(&a.pred)?, &Volume::<f32>::load(&a.gt)?)?.loss;
    let boundary = match (&a.boundary_pred, &a.boundary_gt) {
        (Some(p), Some(g)) => Some(wbce(&Volume::<f32>::load(p)?, &Volume::<f32>::load(g)?)?.loss),
        _ => None,
    };
    let report = LossReport {
        mask,
        boundary,
        total: mask + boundary.unwrap_or(0.0),
    };
    Ok((serde_json::to_string(&report)?, String::new()))
}

fn semantic(a: &SemanticArgs) -> Result<Report> {
    let pred = load_volume(&a.pred)?.into_binary()?;
    let gt = load_volume(&a.gt)?.into_binary()?;
    let s = semantic_metrics(&pred, &gt)?;
    Ok((serde_json::to_string(&s)?, String::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_flag() {
        assert_eq!(parse_chunk("4, 8,16").unwrap(), [4, 8, 16]);
        assert!(parse_chunk("4,8").is_err());
        assert!(parse_chunk("a,b,c").is_err());
    }

    #[test]
    fn flags_override_config() {
        let mut cfg: PipelineConfig =
            serde_json::from_str(r#"{"t1": 0.7, "connectivity": 26, "chunk": [8, 8, 8]}"#).unwrap();
        assert_eq!(cfg.t2, 0.8);
        assert_eq!(cfg.connectivity, Connectivity::TwentySix);
        let o = Overrides {
            t1: Some(0.95),
            connectivity: Some(6),
            ..Default::default()
        };
        cfg.apply(&o).unwrap();
        assert_eq!(cfg.t1, 0.95);
        assert_eq!(cfg.connectivity, Connectivity::Six);
        assert_eq!(cfg.chunk, Some([8, 8, 8]));
    }

    #[test]
    fn config_rejects_unknown_fields() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"t3": 1}"#).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["mitoseg", "segment"], &mut o, &mut e), EXIT_VALIDATION);
        assert_eq!(run(["mitoseg", "--help"], &mut o, &mut e), EXIT_OK);
    }

    #[test]
    fn mask_arg() {
        assert_eq!(
            parse_mask_arg("3=a.emv").unwrap(),
            (3, PathBuf::from("a.emv"))
        );
        assert!(parse_mask_arg("a.emv").is_err());
    }
}
