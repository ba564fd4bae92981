//! Command-line pipelines: build designed predictor sets, train refined sets
//! on an image corpus, and score sets on test images.

pub mod luma;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rip_core::{
    best_case_predict, build_hevc_set, build_uniform_angular_set, load_model, sample_patches, train,
    worst_case_reconstruct, BlockGeometry, EvaluationReport, PatchDataset, Plane, PredictorSet, TrainingConfig,
};

pub use luma::decode_to_luminance;

/// Designed set selector: a uniform angular count or the HEVC-style set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSpec {
    Uniform(usize),
    Hevc,
}

impl FromStr for ModeSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("hevc") {
            return Ok(ModeSpec::Hevc);
        }
        match s.parse::<usize>() {
            Ok(k) if rip_core::designed::UNIFORM_MODE_COUNTS.contains(&k) => Ok(ModeSpec::Uniform(k)),
            _ => Err(format!("expected hevc or one of 5, 9, 13, 17, 21, 25, 29, 33, got {s}")),
        }
    }
}

fn parse_block_size(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n @ (4 | 8 | 16 | 32)) => Ok(n),
        _ => Err(format!("block size must be 4, 8, 16 or 32, got {s}")),
    }
}

fn parse_lambda(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("lambda must be a finite non-negative number, got {s}")),
    }
}

#[derive(Debug, Parser)]
#[command(name = "rip", version, about = "Regression-refined intra-prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a designed predictor set (uniform angular or HEVC-style).
    BuildModes(BuildModesArgs),
    /// Sample training patches from a corpus into a CSV file.
    ExtractPatches(ExtractPatchesArgs),
    /// Refine a predictor set on patches sampled from a corpus.
    Train(TrainArgs),
    /// Best-case evaluation: references from the original image.
    EvalBest(EvalArgs),
    /// Worst-case evaluation: only the top-left block is transmitted.
    EvalWorst(EvalArgs),
    /// Write the predicted (best) or reconstructed (worst) image as PGM.
    PredictImage(PredictImageArgs),
    /// Merge evaluation CSV files under a single header.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BuildModesArgs {
    #[arg(long, value_parser = parse_block_size)]
    pub block_size: usize,
    #[arg(long)]
    pub modes: ModeSpec,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Directory of PNG/PGM training images.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Patches drawn per image.
    #[arg(long, default_value_t = 4000)]
    pub patches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExtractPatchesArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_parser = parse_block_size)]
    pub block_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Initial (designed) model file.
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long, default_value_t = 1.0, value_parser = parse_lambda)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub iters: u32,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "image", required = true, num_args = 1..)]
    pub images: Vec<PathBuf>,
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Best,
    Worst,
}

#[derive(Debug, Args)]
pub struct PredictImageArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Best)]
    pub protocol: ProtocolArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long = "input", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn build_modes(geometry: BlockGeometry, spec: ModeSpec) -> rip_core::Result<PredictorSet> {
    match spec {
        ModeSpec::Uniform(k) => build_uniform_angular_set(geometry, k),
        ModeSpec::Hevc => build_hevc_set(geometry),
    }
}

/// PNG and PGM files of a directory, sorted by name.
pub fn corpus_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no PNG or PGM images in {}", dir.display());
    }
    Ok(paths)
}

pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_images(paths: &[PathBuf]) -> Result<Vec<(String, Plane)>> {
    paths
        .iter()
        .map(|p| Ok((image_id(p), decode_to_luminance(p)?)))
        .collect()
}

/// Patches from every image; image `i` is sampled with seed `seed + i`.
pub fn corpus_dataset(
    images: &[Plane],
    geometry: BlockGeometry,
    patches_per_image: usize,
    seed: u64,
) -> rip_core::Result<PatchDataset> {
    let parts = images
        .iter()
        .enumerate()
        .map(|(i, plane)| sample_patches(plane, geometry, patches_per_image, seed.wrapping_add(i as u64)))
        .collect::<rip_core::Result<Vec<_>>>()?;
    PatchDataset::concat(geometry, &parts)
}

/// Top-left crop to whole blocks.
pub fn crop_to_blocks(plane: &Plane, n: usize) -> Plane {
    let (w, h) = (plane.width() / n * n, plane.height() / n * n);
    if (w, h) == (plane.width(), plane.height()) {
        return plane.clone();
    }
    Plane::from_fn(w, h, |r, c| plane.get(r, c))
}

/// Runs one protocol and returns the predicted/reconstructed plane with its
/// report. Worst-case inputs are cropped to whole blocks.
pub fn evaluate(
    plane: &Plane,
    set: &PredictorSet,
    protocol: ProtocolArg,
    id: &str,
) -> rip_core::Result<(Plane, EvaluationReport)> {
    let (out, mut report) = match protocol {
        ProtocolArg::Best => best_case_predict(plane, set)?,
        ProtocolArg::Worst => {
            let cropped = crop_to_blocks(plane, set.geometry().block_size());
            worst_case_reconstruct(&cropped, set)?
        }
    };
    report.image_id = id.to_owned();
    Ok((out, report))
}

/// Writes through a sibling temporary file so a failed run leaves no partial
/// artifact at `path`.
fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move into {}", path.display()))?;
    Ok(())
}

fn save_set(set: &PredictorSet, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    rip_core::write_model(set, &mut buf)?;
    write_atomically(path, &buf)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::BuildModes(a) => {
            let g = BlockGeometry::new(a.block_size)?;
            let set = build_modes(g, a.modes).context("build-modes")?;
            save_set(&set, &a.out).context("write model")
        }
        Command::ExtractPatches(a) => {
            let g = BlockGeometry::new(a.block_size)?;
            let paths = corpus_images(&a.corpus.corpus).context("corpus")?;
            let images = load_images(&paths).context("decode")?;
            let planes: Vec<Plane> = images.into_iter().map(|(_, p)| p).collect();
            let ds = corpus_dataset(&planes, g, a.corpus.patches, a.corpus.seed).context("sample patches")?;
            write_atomically(&a.out, patches_csv(&ds, &paths).as_bytes()).context("write patches")
        }
        Command::Train(a) => {
            let init = load_model(&a.init).context("load model")?;
            let paths = corpus_images(&a.corpus.corpus).context("corpus")?;
            let planes: Vec<Plane> = load_images(&paths)
                .context("decode")?
                .into_iter()
                .map(|(_, p)| p)
                .collect();
            let ds = corpus_dataset(&planes, init.geometry(), a.corpus.patches, a.corpus.seed)
                .context("sample patches")?;
            let config = TrainingConfig {
                lambda: a.lambda,
                iterations: a.iters,
                record_trace: a.trace.is_some(),
            };
            let (set, trace) = train(&ds, &init, &config).context("train")?;
            if let Some(path) = &a.trace {
                write_atomically(path, trace_csv(&trace).as_bytes()).context("write trace")?;
            }
            save_set(&set, &a.out).context("write model")
        }
        Command::EvalBest(a) => eval_command(a, ProtocolArg::Best),
        Command::EvalWorst(a) => eval_command(a, ProtocolArg::Worst),
        Command::PredictImage(a) => {
            let set = load_model(&a.model).context("load model")?;
            let plane = decode_to_luminance(&a.image).context("decode")?;
            let (out, _) = evaluate(&plane, &set, a.protocol, &image_id(&a.image)).context("evaluate")?;
            write_atomically(&a.out, &luma::encode_pgm(&out)).context("write image")
        }
        Command::Report(a) => {
            let rows = report::merge(&a.inputs).context("read csv")?;
            let mut text = String::from(report::HEADER);
            text.push('\n');
            for row in rows {
                text.push_str(&row);
                text.push('\n');
            }
            write_atomically(&a.out, text.as_bytes()).context("write csv")
        }
    }
}

fn eval_command(a: &EvalArgs, protocol: ProtocolArg) -> Result<()> {
    let set = load_model(&a.model).context("load model")?;
    let images = load_images(&a.images).context("decode")?;
    let reports = images
        .par_iter()
        .map(|(id, plane)| evaluate(plane, &set, protocol, id).map(|(_, r)| r))
        .collect::<rip_core::Result<Vec<_>>>()
        .context("evaluate")?;
    let rows: Vec<String> = reports.iter().map(report::csv_row).collect();
    report::append_rows(&a.csv, &rows).context("write csv")
}

fn patches_csv(ds: &PatchDataset, paths: &[PathBuf]) -> String {
    let g = ds.geometry();
    let mut out = String::from("image,row,col");
    for i in 0..g.ref_len() {
        out.push_str(&format!(",x{i}"));
    }
    for i in 0..g.block_len() {
        out.push_str(&format!(",y{i}"));
    }
    out.push('\n');
    for (j, src) in ds.sources().iter().enumerate() {
        out.push_str(&format!("{},{},{}", image_id(&paths[src.image as usize]), src.row, src.col));
        for v in ds.x().column(j).iter().chain(ds.y().column(j).iter()) {
            out.push_str(&format!(",{}", report::sig6(*v)));
        }
        out.push('\n');
    }
    out
}

fn trace_csv(trace: &rip_core::TrainingTrace) -> String {
    let mut out = String::from("iteration,total_squared_error,reassignments,cluster_sizes\n");
    for (i, r) in trace.records.iter().enumerate() {
        let sizes = r
            .cluster_sizes
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            report::sig6(r.total_squared_error),
            r.reassignments,
            sizes
        ));
    }
    out
}
