use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::anyhow;
use clap::ValueEnum;
use cs3_core::evaluate::{evaluate, EvalError, EvalReport, MetricMode};
use cs3_core::manifest::{gt_manifest_path, read_instances, result_manifest_path, SCHEMA_VERSION};
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    MatchedOnly,
    PenalizeMisses,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of result manifests (`<stem>.json`).
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth manifests (`<stem>.gt.json`).
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum, default_value = "matched-only")]
    mode: Mode,
    /// Report path; defaults to `eval_report.json` in the prediction directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ImageReport {
    image: String,
    report: EvalReport,
}

#[derive(Serialize)]
struct Report {
    schema: u32,
    mode: MetricMode,
    aggregate: EvalReport,
    images: Vec<ImageReport>,
    skipped: Vec<String>,
}

fn table(r: &Report) -> String {
    let mut s = String::new();
    writeln!(s, "{:<24} {:>5} {:>5} {:>7} {:>8} {:>8}", "image", "gt", "pred", "matched", "mIoU", "mDice").unwrap();
    let row = |s: &mut String, name: &str, e: &EvalReport| {
        writeln!(s, "{:<24} {:>5} {:>5} {:>7} {:>8.4} {:>8.4}", name, e.n_gt, e.n_pred, e.pairs.len(), e.miou, e.mdice)
            .unwrap();
    };
    for i in &r.images {
        row(&mut s, &i.image, &i.report);
    }
    row(&mut s, "ALL", &r.aggregate);
    s
}

pub fn run(args: Args) -> Result<(), Failure> {
    for dir in [&args.pred, &args.gt] {
        if !dir.is_dir() {
            return Err(Failure::usage(anyhow!("directory {} does not exist", dir.display())));
        }
    }
    let mode = match args.mode {
        Mode::MatchedOnly => MetricMode::MatchedOnly,
        Mode::PenalizeMisses => MetricMode::PenalizeMisses,
    };
    let mut stems: Vec<String> = std::fs::read_dir(&args.gt)
        .map_err(|e| Failure::usage(anyhow!("{}: {e}", args.gt.display())))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".gt.json")).map(String::from))
        .collect();
    stems.sort();

    let mut images = Vec::new();
    let mut skipped = Vec::new();
    let mut missing = false;
    for stem in &stems {
        let mut pred_path = result_manifest_path(&args.pred, stem);
        if !pred_path.exists() {
            pred_path = gt_manifest_path(&args.pred, stem);
        }
        if !pred_path.exists() {
            eprintln!("{stem}: no prediction in {}, skipped", args.pred.display());
            skipped.push(stem.clone());
            missing = true;
            continue;
        }
        let loaded = read_instances(&gt_manifest_path(&args.gt, stem)).and_then(|gt| Ok((gt, read_instances(&pred_path)?)));
        let (gt, pred) = match loaded {
            Ok(v) => v,
            Err(e) => {
                eprintln!("{stem}: {e}, skipped");
                skipped.push(stem.clone());
                missing = true;
                continue;
            }
        };
        match evaluate(&gt, &pred, mode) {
            Ok(report) => images.push(ImageReport { image: stem.clone(), report }),
            Err(EvalError::NoGroundTruth) => {
                eprintln!("{stem}: no ground truth instances, skipped");
                skipped.push(stem.clone());
            }
            Err(e) => {
                eprintln!("{stem}: {e}, skipped");
                skipped.push(stem.clone());
                missing = true;
            }
        }
    }
    let reports: Vec<EvalReport> = images.iter().map(|i| i.report.clone()).collect();
    let report = Report { schema: SCHEMA_VERSION, mode, aggregate: EvalReport::pooled(&reports, mode), images, skipped };
    let out = args.out.unwrap_or_else(|| args.pred.join("eval_report.json"));
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    std::fs::write(&out, json).map_err(|e| Failure { code: 1, error: anyhow!("{}: {e}", out.display()) })?;
    print!("{}", table(&report));
    if missing {
        return Err(Failure { code: 1, error: anyhow!("some images were skipped") });
    }
    Ok(())
}
