use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use cs3_core::cascade::{run_pipeline, CascadeError, CascadeState, InstanceKind};
use cs3_core::manifest::{
    build_backend, gt_manifest_path, read_ground_truth, result_manifest_path, BackendKind, PipelineConfig,
    ResultManifest,
};
use cs3_core::raster::{hsv_to_rgb, HsvPixel, RasterImage};
use cs3_core::segmenter::SegmenterError;
use log::{info, warn};
use rayon::prelude::*;

use crate::Failure;

pub const BACKEND_URL_ENV: &str = "CS3_BACKEND_URL";

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of input PNG images.
    #[arg(long)]
    input: PathBuf,
    /// Directory for result manifests (created if missing).
    #[arg(long)]
    output: PathBuf,
    /// Pipeline configuration JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write a colour overlay and per-instance mask PNGs.
    #[arg(long)]
    overlay: bool,
    /// Parallel image runs; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
}

enum ImageError {
    Unreachable(anyhow::Error),
    Other(anyhow::Error),
}

pub fn list_pngs(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Distinct colour per instance id, fixed across runs.
pub fn instance_color(id: u32) -> [u8; 3] {
    let h = ((u64::from(id) * 47) % 180) as u8;
    hsv_to_rgb(HsvPixel { h, s: 220, v: 230 })
}

fn write_overlay(img: &RasterImage, state: &CascadeState, out: &Path, stem: &str) -> anyhow::Result<()> {
    let mut overlay = img.clone();
    for r in state.final_records() {
        let c = instance_color(r.id);
        for i in r.mask.iter_indices() {
            let p = overlay.get_index(i);
            let blend = |k: usize| ((u16::from(p[k]) + u16::from(c[k]) * 3) / 4) as u8;
            overlay.set_index(i, [blend(0), blend(1), blend(2)]);
        }
    }
    overlay.write_png(out.join(format!("{stem}.overlay.png")))?;
    let mask_dir = out.join(stem);
    std::fs::create_dir_all(&mask_dir)?;
    for r in &state.records {
        let kind = match r.kind {
            InstanceKind::Head => "head",
            InstanceKind::Tail => "tail",
            InstanceKind::Complete => "complete",
        };
        r.mask.write_png(mask_dir.join(format!("{}_{kind}.png", r.id)))?;
    }
    Ok(())
}

fn process(path: &Path, cfg: &PipelineConfig, args: &Args) -> Result<(), ImageError> {
    let stem = stem_of(path);
    let img = RasterImage::read_png(path).map_err(|e| ImageError::Other(anyhow!("{}: {e}", path.display())))?;
    let truth = match cfg.backend.kind {
        BackendKind::Oracle => {
            let dir = path.parent().unwrap_or(Path::new("."));
            let (_, gt) = read_ground_truth(&gt_manifest_path(dir, &stem)).map_err(|e| ImageError::Other(e.into()))?;
            Some(gt)
        }
        BackendKind::Remote => None,
    };
    let backend = build_backend(&cfg.backend, truth.as_ref()).map_err(|e| ImageError::Other(anyhow!(e)))?;
    let state = run_pipeline(&img, backend.as_ref(), &cfg.stages()).map_err(|e| match e {
        CascadeError::Backend { source: SegmenterError::RemoteUnavailable(_) | SegmenterError::Timeout, .. } => {
            ImageError::Unreachable(e.into())
        }
        e => ImageError::Other(e.into()),
    })?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = ResultManifest::from_state(&name, &state, backend.descriptor(), cfg);
    let out = result_manifest_path(&args.output, &stem);
    std::fs::write(&out, manifest.to_json()).map_err(|e| ImageError::Other(anyhow!("{}: {e}", out.display())))?;
    if args.overlay {
        write_overlay(&img, &state, &args.output, &stem).map_err(ImageError::Other)?;
    }
    info!("{stem}: {} instances, {} rounds", state.final_records().len(), state.telemetry.rounds);
    Ok(())
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::read(p).map_err(Failure::usage)?,
        None => PipelineConfig::default(),
    };
    if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
        if !url.is_empty() {
            cfg.backend.url = Some(url);
        }
    }
    Ok(cfg)
}

pub fn run(args: Args) -> Result<(), Failure> {
    if !args.input.is_dir() {
        return Err(Failure::usage(anyhow!("input directory {} does not exist", args.input.display())));
    }
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(|e| Failure::usage(anyhow!(e)))?;
    std::fs::create_dir_all(&args.output)
        .map_err(|e| Failure { code: 1, error: anyhow!("{}: {e}", args.output.display()) })?;
    let images = list_pngs(&args.input).map_err(Failure::usage)?;
    if images.is_empty() {
        warn!("no PNG images in {}", args.input.display());
        eprintln!("warning: no PNG images in {}", args.input.display());
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Failure { code: 1, error: e.into() })?;
    let results: Vec<_> = pool.install(|| images.par_iter().map(|p| (p, process(p, &cfg, &args))).collect());

    let mut failed = 0;
    let mut unreachable = 0;
    for (path, r) in &results {
        match r {
            Ok(()) => {}
            Err(ImageError::Unreachable(e)) => {
                unreachable += 1;
                eprintln!("{}: {e:#}", path.display());
            }
            Err(ImageError::Other(e)) => {
                failed += 1;
                eprintln!("{}: {e:#}", path.display());
            }
        }
    }
    eprintln!("{} of {} images processed", images.len() - failed - unreachable, images.len());
    if unreachable > 0 {
        return Err(Failure { code: 3, error: anyhow!("backend unreachable for {unreachable} image(s)") });
    }
    if failed > 0 {
        return Err(Failure { code: 1, error: anyhow!("{failed} image(s) failed") });
    }
    Ok(())
}
