//! Configuration and JSON artifacts: the pipeline config file, per-image
//! result manifests, ground-truth manifests of generated scenes, and the
//! reader the evaluator uses for both.
//!
//! Every document carries `"schema": 1`. Masks are stored as base64 of the
//! binary RLE encoding also used on the wire.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{CascadeConfig, CascadeState, InstanceKind, StageConfig, Telemetry};
use crate::matcher::MatcherConfig;
use crate::preprocess::PreprocessConfig;
use crate::raster::{rle_decode, rle_encode, BinaryMask, RasterError, RasterImage};
use crate::segmenter::{BackendDescriptor, OracleBehavior, OracleSegmenter, RemoteSegmenter, Segmenter};
use crate::synthgen::{EllipseTruth, SceneParams, SpermTruth, SyntheticScene};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Raster {
        path: PathBuf,
        #[source]
        source: RasterError,
    },
}

fn invalid(path: &Path, message: impl Into<String>) -> ManifestError {
    ManifestError::Invalid { path: path.to_path_buf(), message: message.into() }
}

pub fn mask_to_base64(mask: &BinaryMask) -> String {
    STANDARD.encode(rle_encode(mask))
}

pub fn mask_from_base64(s: &str) -> Result<BinaryMask, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    rle_decode(&bytes).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Oracle,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub url: Option<String>,
    pub timeout_ms: u64,
    pub oracle: OracleBehavior,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { kind: BackendKind::Oracle, url: None, timeout_ms: 60_000, oracle: OracleBehavior::default() }
    }
}

impl BackendConfig {
    pub fn remote(&self) -> Result<RemoteSegmenter, String> {
        let url = self.url.as_deref().ok_or("remote backend needs a url")?;
        Ok(RemoteSegmenter::new(url, Duration::from_millis(self.timeout_ms)))
    }

    /// Oracle over the ground truth stored next to an image.
    pub fn oracle(&self, truth: &GroundTruth) -> OracleSegmenter {
        OracleSegmenter::from_truth(truth.width, truth.height, &truth.instances, self.oracle.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema: u32,
    pub preprocess: PreprocessConfig,
    pub cascade: CascadeConfig,
    pub matcher: MatcherConfig,
    pub backend: BackendConfig,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            preprocess: PreprocessConfig::default(),
            cascade: CascadeConfig::default(),
            matcher: MatcherConfig::default(),
            backend: BackendConfig::default(),
            workers: 1,
        }
    }
}

impl PipelineConfig {
    pub fn stages(&self) -> StageConfig {
        StageConfig { preprocess: self.preprocess.clone(), cascade: self.cascade.clone(), matcher: self.matcher.clone() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema != SCHEMA_VERSION {
            return Err(format!("unsupported schema {}", self.schema));
        }
        if self.workers == 0 {
            return Err("workers must be >= 1".into());
        }
        self.stages().validate().map_err(|e| e.to_string())?;
        self.backend.oracle.validate()?;
        if self.backend.kind == BackendKind::Remote && self.backend.url.is_none() {
            return Err("remote backend needs a url".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn read(path: &Path) -> Result<Self, ManifestError> {
        let cfg: Self = read_json(path)?;
        cfg.validate().map_err(|m| invalid(path, m))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub id: u32,
    pub kind: InstanceKind,
    pub round: u32,
    pub via_rescue: bool,
    /// Whether the entry counts as a predicted instance: Complete records,
    /// and heads or tails no Complete record absorbed.
    #[serde(rename = "final")]
    pub is_final: bool,
    pub area: usize,
    pub rle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchLink {
    pub complete_id: u32,
    pub head_id: u32,
    pub tail_id: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Unmatched {
    pub heads: Vec<u32>,
    pub tails: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultManifest {
    pub schema: u32,
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub backend: BackendDescriptor,
    pub instances: Vec<InstanceEntry>,
    pub matches: Vec<MatchLink>,
    pub unmatched: Unmatched,
    pub telemetry: Telemetry,
    pub config: PipelineConfig,
}

impl ResultManifest {
    pub fn from_state(image: &str, state: &CascadeState, backend: BackendDescriptor, config: &PipelineConfig) -> Self {
        let finals: Vec<u32> = state.final_records().iter().map(|r| r.id).collect();
        let instances = state
            .records
            .iter()
            .map(|r| InstanceEntry {
                id: r.id,
                kind: r.kind,
                round: r.round,
                via_rescue: r.via_rescue,
                is_final: finals.contains(&r.id),
                area: r.mask.area(),
                rle: mask_to_base64(&r.mask),
            })
            .collect();
        let matches = state
            .records
            .iter()
            .filter_map(|r| r.parts.map(|(h, t)| MatchLink { complete_id: r.id, head_id: h, tail_id: t }))
            .collect();
        let unmatched_of = |kind| {
            state.records_of(kind).filter(|r| finals.contains(&r.id)).map(|r| r.id).collect::<Vec<_>>()
        };
        Self {
            schema: SCHEMA_VERSION,
            image: image.to_string(),
            width: state.residual.width(),
            height: state.residual.height(),
            backend,
            instances,
            matches,
            unmatched: Unmatched { heads: unmatched_of(InstanceKind::Head), tails: unmatched_of(InstanceKind::Tail) },
            telemetry: state.telemetry.clone(),
            config: config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtInstance {
    pub id: u32,
    pub kind: InstanceKind,
    #[serde(rename = "final")]
    pub is_final: bool,
    pub area: usize,
    /// The full sperm mask (head and tail).
    pub rle: String,
    pub head_rle: String,
    pub tail_rle: String,
    pub head_geometry: EllipseTruth,
    pub attachment_point: [f64; 2],
    pub tail_control_points: [[f64; 2]; 4],
    pub tail_width: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtManifest {
    pub schema: u32,
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub params: SceneParams,
    pub instances: Vec<GtInstance>,
}

impl GtManifest {
    pub fn from_scene(scene: &SyntheticScene, image: &str) -> Self {
        let instances = scene
            .instances
            .iter()
            .map(|t| GtInstance {
                id: t.id,
                kind: InstanceKind::Complete,
                is_final: true,
                area: t.full_mask.area(),
                rle: mask_to_base64(&t.full_mask),
                head_rle: mask_to_base64(&t.head_mask),
                tail_rle: mask_to_base64(&t.tail_mask),
                head_geometry: t.head_geometry,
                attachment_point: t.attachment_point,
                tail_control_points: t.tail_control_points,
                tail_width: t.tail_width,
            })
            .collect();
        Self {
            schema: SCHEMA_VERSION,
            image: image.to_string(),
            width: scene.image.width(),
            height: scene.image.height(),
            seed: scene.seed,
            params: scene.params.clone(),
            instances,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Ground truth loaded back from a GT manifest.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub width: u32,
    pub height: u32,
    pub instances: Vec<SpermTruth>,
}

pub fn gt_manifest_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.gt.json"))
}

pub fn result_manifest_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.json"))
}

fn raster_at(path: &Path) -> impl FnOnce(RasterError) -> ManifestError {
    let path = path.to_path_buf();
    move |source| ManifestError::Raster { path, source }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ManifestError> {
    fs::write(path, contents).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ManifestError> {
    let text = fs::read(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_slice(&text).map_err(|source| ManifestError::Json { path: path.to_path_buf(), source })
}

fn check_schema(path: &Path, schema: u32) -> Result<(), ManifestError> {
    if schema != SCHEMA_VERSION {
        return Err(invalid(path, format!("unsupported schema {schema}")));
    }
    Ok(())
}

/// Writes `<stem>.png`, `<stem>.gt.json` and per-instance masks
/// `<stem>/<id>_{head,tail,full}.png` into `dir`.
pub fn export_scene(scene: &SyntheticScene, dir: &Path, stem: &str) -> Result<(), ManifestError> {
    let image_path = dir.join(format!("{stem}.png"));
    scene.image.write_png(&image_path).map_err(raster_at(&image_path))?;
    let mask_dir = dir.join(stem);
    fs::create_dir_all(&mask_dir).map_err(|source| ManifestError::Io { path: mask_dir.clone(), source })?;
    for t in &scene.instances {
        for (part, mask) in [("head", &t.head_mask), ("tail", &t.tail_mask), ("full", &t.full_mask)] {
            let p = mask_dir.join(format!("{}_{part}.png", t.id));
            mask.write_png(&p).map_err(raster_at(&p))?;
        }
    }
    let manifest = GtManifest::from_scene(scene, &format!("{stem}.png"));
    write_file(&gt_manifest_path(dir, stem), manifest.to_json().as_bytes())
}

pub fn read_ground_truth(path: &Path) -> Result<(GtManifest, GroundTruth), ManifestError> {
    let m: GtManifest = read_json(path)?;
    check_schema(path, m.schema)?;
    let decode = |s: &str, what: &str, id: u32| {
        let mask = mask_from_base64(s).map_err(|e| invalid(path, format!("instance {id} {what}: {e}")))?;
        if (mask.width(), mask.height()) != (m.width, m.height) {
            return Err(invalid(path, format!("instance {id} {what} has wrong dimensions")));
        }
        Ok(mask)
    };
    let instances = m
        .instances
        .iter()
        .map(|g| {
            Ok(SpermTruth {
                id: g.id,
                head_mask: decode(&g.head_rle, "head", g.id)?,
                tail_mask: decode(&g.tail_rle, "tail", g.id)?,
                full_mask: decode(&g.rle, "mask", g.id)?,
                head_geometry: g.head_geometry,
                attachment_point: g.attachment_point,
                tail_control_points: g.tail_control_points,
                tail_width: g.tail_width,
            })
        })
        .collect::<Result<Vec<_>, ManifestError>>()?;
    let gt = GroundTruth { width: m.width, height: m.height, instances };
    Ok((m, gt))
}

/// Re-reads an exported scene: image, GT manifest and truth masks.
pub fn import_scene(dir: &Path, stem: &str) -> Result<(RasterImage, GtManifest, GroundTruth), ManifestError> {
    let image_path = dir.join(format!("{stem}.png"));
    let image = RasterImage::read_png(&image_path).map_err(raster_at(&image_path))?;
    let (m, gt) = read_ground_truth(&gt_manifest_path(dir, stem))?;
    if (image.width(), image.height()) != (gt.width, gt.height) {
        return Err(invalid(&image_path, "image size differs from its ground truth"));
    }
    Ok((image, m, gt))
}

#[derive(Debug, Clone, Deserialize)]
struct LooseEntry {
    id: u32,
    #[serde(rename = "final", default = "yes")]
    is_final: bool,
    rle: String,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
struct LooseManifest {
    schema: u32,
    width: u32,
    height: u32,
    instances: Vec<LooseEntry>,
}

/// Final instances of a result or GT manifest, as `(id, mask)` pairs.
pub fn read_instances(path: &Path) -> Result<Vec<(u32, BinaryMask)>, ManifestError> {
    let m: LooseManifest = read_json(path)?;
    check_schema(path, m.schema)?;
    m.instances
        .iter()
        .filter(|e| e.is_final)
        .map(|e| {
            let mask = mask_from_base64(&e.rle).map_err(|err| invalid(path, format!("instance {}: {err}", e.id)))?;
            if (mask.width(), mask.height()) != (m.width, m.height) {
                return Err(invalid(path, format!("instance {} has wrong dimensions", e.id)));
            }
            Ok((e.id, mask))
        })
        .collect()
}

/// Builds the configured backend for one image. The oracle needs the
/// image's ground truth.
pub fn build_backend(cfg: &BackendConfig, truth: Option<&GroundTruth>) -> Result<Box<dyn Segmenter>, String> {
    match cfg.kind {
        BackendKind::Remote => Ok(Box::new(cfg.remote()?)),
        BackendKind::Oracle => {
            let truth = truth.ok_or("oracle backend needs a ground-truth manifest next to the image")?;
            Ok(Box::new(cfg.oracle(truth)))
        }
    }
}
