use std::path::PathBuf;

use anyhow::anyhow;
use cs3_core::manifest::export_scene;
use cs3_core::synthgen::{generate, SceneParams};
use rayon::prelude::*;

use crate::Failure;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of scenes; scene `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long)]
    n_sperm: Option<usize>,
    #[arg(long)]
    overlap_bias: Option<f64>,
    #[arg(long)]
    tail_width: Option<u32>,
    #[arg(long)]
    noise_speck_count: Option<usize>,
}

impl Args {
    fn params(&self) -> SceneParams {
        let d = SceneParams::default();
        SceneParams {
            width: self.width.unwrap_or(d.width),
            height: self.height.unwrap_or(d.height),
            n_sperm: self.n_sperm.unwrap_or(d.n_sperm),
            overlap_bias: self.overlap_bias.unwrap_or(d.overlap_bias),
            tail_width: self.tail_width.unwrap_or(d.tail_width),
            noise_speck_count: self.noise_speck_count.unwrap_or(d.noise_speck_count),
            head_hsv: d.head_hsv,
        }
    }
}

pub fn run(args: Args) -> Result<(), Failure> {
    let params = args.params();
    params.validate().map_err(Failure::usage)?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure { code: 1, error: anyhow!("{}: {e}", args.out_dir.display()) })?;
    let failures: Vec<String> = (args.seed..args.seed + args.count)
        .into_par_iter()
        .filter_map(|seed| {
            let stem = format!("scene_{seed:04}");
            let res = generate(&params, seed)
                .map_err(anyhow::Error::from)
                .and_then(|s| export_scene(&s, &args.out_dir, &stem).map_err(anyhow::Error::from));
            res.err().map(|e| format!("{stem}: {e:#}"))
        })
        .collect();
    for f in &failures {
        eprintln!("{f}");
    }
    if !failures.is_empty() {
        return Err(Failure { code: 1, error: anyhow!("{} scene(s) failed", failures.len()) });
    }
    Ok(())
}
