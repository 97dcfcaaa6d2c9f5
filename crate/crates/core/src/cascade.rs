//! The cascade engine: head stage, iterated tail extraction over the
//! residual image, the enlarge-and-bold rescue for fused tail clusters,
//! and head/tail matching.

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::{match_and_splice, MatcherConfig};
use crate::preprocess::{denoise_image, enhance, PreprocessConfig};
use crate::raster::{
    closing, connected_components, dilate, inner_boundary, BinaryMask, Connectivity, HsvRange, RasterError,
    RasterImage, Rgb,
};
use crate::segmenter::{Segmenter, SegmenterError, ViewTransform};
use crate::skeleton::{classify, TailClass};

/// Colour of the thickened outline painted into rescue crops.
pub const OUTLINE_COLOR: Rgb = [64, 64, 64];

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Backend {
        stage: &'static str,
        #[source]
        source: SegmenterError,
    },
    #[error("{stage}: {source}")]
    Raster {
        stage: &'static str,
        #[source]
        source: RasterError,
    },
}

fn backend_err(stage: &'static str) -> impl FnOnce(SegmenterError) -> CascadeError {
    move |source| CascadeError::Backend { stage, source }
}

fn raster_err(stage: &'static str) -> impl FnOnce(RasterError) -> CascadeError {
    move |source| CascadeError::Raster { stage, source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub purple_h: [f64; 2],
    pub purple_s: [f64; 2],
    pub purple_v: [f64; 2],
    pub head_purple_fraction_min: f64,
    pub max_rounds: u32,
    pub rescue_scale: u32,
    pub rescue_margin: u32,
    pub rescue_thicken_radius: u32,
    pub min_mask_area: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            purple_h: [100.0, 180.0],
            purple_s: [20.0, 255.0],
            purple_v: [20.0, 255.0],
            head_purple_fraction_min: 0.5,
            max_rounds: 10,
            rescue_scale: 4,
            rescue_margin: 10,
            rescue_thicken_radius: 3,
            min_mask_area: 30,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<(), CascadeError> {
        let bad = |m: &str| Err(CascadeError::Config(m.into()));
        if self.max_rounds < 2 {
            return bad("max_rounds must be >= 2");
        }
        if self.rescue_scale < 1 {
            return bad("rescue_scale must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.head_purple_fraction_min) {
            return bad("head_purple_fraction_min must be in [0, 1]");
        }
        for (name, r) in [("purple_h", self.purple_h), ("purple_s", self.purple_s), ("purple_v", self.purple_v)] {
            if !(r[0] <= r[1]) {
                return Err(CascadeError::Config(format!("{name} must be an ascending range")));
            }
        }
        Ok(())
    }

    pub fn purple(&self) -> HsvRange {
        HsvRange { h: self.purple_h, s: self.purple_s, v: self.purple_v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Head,
    Tail,
    Complete,
}

#[derive(Debug, Clone)]
pub struct InstanceRecord {
    pub id: u32,
    pub kind: InstanceKind,
    pub mask: BinaryMask,
    /// 0 for the head stage, then the tail round that produced it.
    pub round: u32,
    pub via_rescue: bool,
    /// Head and tail ids of a Complete record.
    pub parts: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    #[default]
    NotRun,
    Converged,
    RoundCap,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RescueTelemetry {
    pub clusters: usize,
    pub skipped: usize,
    pub recovered_tails: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub heads: usize,
    /// Tail rounds run, head stage excluded.
    pub rounds: u32,
    pub extractions: Vec<usize>,
    /// Residual foreground area after the head stage and after each round.
    pub residual_area: Vec<usize>,
    pub stop_reason: StopReason,
    pub rescue: RescueTelemetry,
    pub matches: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CascadeState {
    pub residual: RasterImage,
    pub records: Vec<InstanceRecord>,
    pub round: u32,
    pub telemetry: Telemetry,
    next_id: u32,
}

impl CascadeState {
    pub fn new(residual: RasterImage) -> Self {
        Self { residual, records: Vec::new(), round: 0, telemetry: Telemetry::default(), next_id: 0 }
    }

    fn push(&mut self, kind: InstanceKind, mask: BinaryMask, via_rescue: bool, parts: Option<(u32, u32)>) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.records.push(InstanceRecord { id, kind, mask, round: self.round, via_rescue, parts });
        id
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.telemetry.warnings.push(msg);
    }

    pub fn records_of(&self, kind: InstanceKind) -> impl Iterator<Item = &InstanceRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// Records standing for one instance each: Complete records plus heads
    /// and tails that no Complete record consumed.
    pub fn final_records(&self) -> Vec<&InstanceRecord> {
        let used: Vec<u32> = self.records.iter().filter_map(|r| r.parts).flat_map(|(h, t)| [h, t]).collect();
        self.records.iter().filter(|r| !used.contains(&r.id)).collect()
    }
}

fn check_proposal(img: &RasterImage, m: &BinaryMask, stage: &'static str) -> Result<(), CascadeError> {
    img.check_same(m).map_err(|e| CascadeError::Backend {
        stage,
        source: SegmenterError::MalformedResponse(e.to_string()),
    })
}

/// Segments `img`, keeps proposals whose purple fraction reaches the
/// threshold as Head records and erases them from the residual.
pub fn head_stage(
    img: &RasterImage,
    backend: &dyn Segmenter,
    cfg: &CascadeConfig,
) -> Result<CascadeState, CascadeError> {
    let proposals = backend.segment(img).map_err(backend_err("head stage"))?;
    let purple = cfg.purple();
    let mut state = CascadeState::new(img.clone());
    for m in proposals {
        check_proposal(img, &m, "head stage")?;
        let area = m.area();
        if area == 0 {
            continue;
        }
        let hits = m.iter_indices().filter(|&i| purple.contains_rgb(img.get_index(i))).count();
        let fraction = hits as f64 / area as f64;
        if fraction >= cfg.head_purple_fraction_min {
            state.residual.erase(&m).map_err(raster_err("head stage"))?;
            state.push(InstanceKind::Head, m, false, None);
        }
    }
    state.telemetry.heads = state.records.len();
    state.telemetry.residual_area.push(state.residual.foreground().area());
    Ok(state)
}

/// One segment-filter-erase iteration. Proposals are clipped to the
/// residual foreground; those still at least `min_mask_area` pixels that
/// classify as a single tail are recorded and erased. The residual is
/// denoised afterwards. Returns the number of tails extracted.
pub fn tail_round(
    state: &mut CascadeState,
    backend: &dyn Segmenter,
    cfg: &CascadeConfig,
    denoise_min_area: usize,
) -> Result<usize, CascadeError> {
    state.round += 1;
    let proposals = backend.segment(&state.residual).map_err(backend_err("tail round"))?;
    let mut extracted = 0;
    for mut m in proposals {
        check_proposal(&state.residual, &m, "tail round")?;
        m.intersect_with(&state.residual.foreground()).map_err(raster_err("tail round"))?;
        if m.area() < cfg.min_mask_area {
            continue;
        }
        if classify(&m).ok() == Some(TailClass::SingleTail) {
            state.residual.erase(&m).map_err(raster_err("tail round"))?;
            state.push(InstanceKind::Tail, m, false, None);
            extracted += 1;
        }
    }
    state.residual = denoise_image(&state.residual, denoise_min_area);
    debug!("round {}: {extracted} tails", state.round);
    state.telemetry.rounds = state.round;
    state.telemetry.extractions.push(extracted);
    state.telemetry.residual_area.push(state.residual.foreground().area());
    Ok(extracted)
}

/// Repeats [`tail_round`] until a round extracts nothing and leaves the
/// residual unchanged, or the round cap is reached.
pub fn run_tail_loop(
    state: &mut CascadeState,
    backend: &dyn Segmenter,
    cfg: &CascadeConfig,
    denoise_min_area: usize,
) -> Result<(), CascadeError> {
    loop {
        if state.round >= cfg.max_rounds {
            state.telemetry.stop_reason = StopReason::RoundCap;
            return Ok(());
        }
        let before = state.residual.clone();
        let n = tail_round(state, backend, cfg, denoise_min_area)?;
        if n == 0 && state.residual == before {
            state.telemetry.stop_reason = StopReason::Converged;
            return Ok(());
        }
    }
}

/// Geometry of one rescue crop: the scene rectangle at `(x0, y0)` of size
/// `w x h`, presented at `scale` times its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RescueView {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
    pub scale: u32,
}

impl RescueView {
    /// Bounding box of `mask` grown by `margin` and clipped to the image.
    pub fn around(mask: &BinaryMask, margin: u32, scale: u32) -> Option<Self> {
        let b = mask.bbox()?.expand(margin, mask.width(), mask.height());
        Some(Self { x0: b.x0, y0: b.y0, w: b.width(), h: b.height(), scale: scale.max(1) })
    }

    pub fn transform(&self) -> ViewTransform {
        ViewTransform { x0: self.x0, y0: self.y0, scale: self.scale }
    }

    pub fn forward_image(&self, img: &RasterImage) -> Result<RasterImage, RasterError> {
        Ok(img.crop(self.x0, self.y0, self.w, self.h)?.upscale_bilinear(self.scale))
    }

    pub fn forward_mask(&self, mask: &BinaryMask) -> Result<BinaryMask, RasterError> {
        Ok(mask.crop(self.x0, self.y0, self.w, self.h)?.upscale_nearest(self.scale))
    }

    /// Majority downscale back to crop size, then placement into a
    /// `width x height` scene.
    pub fn inverse_mask(&self, view_mask: &BinaryMask, width: u32, height: u32) -> Result<BinaryMask, RasterError> {
        view_mask.downscale_majority(self.scale).place(width, height, i64::from(self.x0), i64::from(self.y0))
    }
}

/// Builds the emphasized crop of one cluster: enlarged, everything outside
/// the cluster whitened, its outline thickened and smoothed in dark grey.
pub fn emphasize(
    residual: &RasterImage,
    cluster: &BinaryMask,
    view: &RescueView,
    thicken_radius: u32,
) -> Result<RasterImage, RasterError> {
    let mut img = view.forward_image(residual)?;
    let inside = view.forward_mask(cluster)?;
    let mut outside = BinaryMask::full(inside.width(), inside.height())?;
    outside.subtract(&inside)?;
    img.erase(&outside)?;
    let outline = closing(&dilate(&inner_boundary(&inside), thicken_radius), 1);
    for i in outline.iter_indices() {
        img.set_index(i, OUTLINE_COLOR);
    }
    Ok(img)
}

/// Enlarge-and-bold rescue, run once per fused cluster left in the
/// residual. Returned masks are mapped back to the scene, restricted to the
/// cluster, and kept when they classify as a single tail.
pub fn rescue_overlaps(
    state: &mut CascadeState,
    backend: &dyn Segmenter,
    cfg: &CascadeConfig,
    denoise_min_area: usize,
) -> Result<(), CascadeError> {
    let (w, h) = (state.residual.width(), state.residual.height());
    let clusters: Vec<BinaryMask> = connected_components(&state.residual.foreground(), Connectivity::Eight)
        .into_iter()
        .filter(|c| c.area() >= cfg.min_mask_area && classify(c).ok() == Some(TailClass::OverlapCluster))
        .collect();
    if clusters.is_empty() {
        return Ok(());
    }
    let source = state.residual.clone();
    for cluster in clusters {
        state.telemetry.rescue.clusters += 1;
        let view = RescueView::around(&cluster, cfg.rescue_margin, cfg.rescue_scale).expect("non-empty cluster");
        if view.w < 3 || view.h < 3 {
            state.telemetry.rescue.skipped += 1;
            state.warn(format!("rescue: cluster crop at ({}, {}) is {}x{}, skipped", view.x0, view.y0, view.w, view.h));
            continue;
        }
        let crop = emphasize(&source, &cluster, &view, cfg.rescue_thicken_radius).map_err(raster_err("rescue"))?;
        let proposals = backend.segment_view(&crop, view.transform()).map_err(backend_err("rescue"))?;
        for m in proposals {
            if (m.width(), m.height()) != (crop.width(), crop.height()) {
                return Err(CascadeError::Backend {
                    stage: "rescue",
                    source: SegmenterError::MalformedResponse(format!(
                        "mask is {}x{}, crop is {}x{}",
                        m.width(),
                        m.height(),
                        crop.width(),
                        crop.height()
                    )),
                });
            }
            let mut restored = view.inverse_mask(&m, w, h).map_err(raster_err("rescue"))?;
            restored.intersect_with(&cluster).map_err(raster_err("rescue"))?;
            if restored.area() < cfg.min_mask_area || classify(&restored).ok() != Some(TailClass::SingleTail) {
                continue;
            }
            state.residual.erase(&restored).map_err(raster_err("rescue"))?;
            state.push(InstanceKind::Tail, restored, true, None);
            state.telemetry.rescue.recovered_tails += 1;
        }
    }
    state.residual = denoise_image(&state.residual, denoise_min_area);
    Ok(())
}

/// Pairs Head and Tail records and adds one Complete record per accepted
/// pair.
pub fn match_records(state: &mut CascadeState, cfg: &MatcherConfig) -> Result<(), CascadeError> {
    let heads: Vec<(u32, BinaryMask)> = state.records_of(InstanceKind::Head).map(|r| (r.id, r.mask.clone())).collect();
    let tails: Vec<(u32, BinaryMask)> = state.records_of(InstanceKind::Tail).map(|r| (r.id, r.mask.clone())).collect();
    let head_refs: Vec<(u32, &BinaryMask)> = heads.iter().map(|(i, m)| (*i, m)).collect();
    let tail_refs: Vec<(u32, &BinaryMask)> = tails.iter().map(|(i, m)| (*i, m)).collect();
    let outcome = match_and_splice(&head_refs, &tail_refs, cfg);
    for w in outcome.warnings {
        state.warn(format!("matcher: {w}"));
    }
    state.telemetry.matches = outcome.completes.len();
    for s in outcome.completes {
        state.residual.erase(&s.mask).map_err(raster_err("matcher"))?;
        state.push(InstanceKind::Complete, s.mask, false, Some((s.head_id, s.tail_id)));
    }
    Ok(())
}

/// Settings for one end-to-end run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub preprocess: PreprocessConfig,
    pub cascade: CascadeConfig,
    pub matcher: MatcherConfig,
}

impl StageConfig {
    pub fn validate(&self) -> Result<(), CascadeError> {
        self.preprocess.validate().map_err(|e| CascadeError::Config(e.to_string()))?;
        self.cascade.validate()?;
        self.matcher.validate().map_err(CascadeError::Config)
    }
}

/// Enhancement, head stage, tail loop, rescue and matching.
pub fn run_pipeline(
    img: &RasterImage,
    backend: &dyn Segmenter,
    cfg: &StageConfig,
) -> Result<CascadeState, CascadeError> {
    cfg.validate()?;
    let enhanced = enhance(img, &cfg.preprocess);
    let mut state = head_stage(&enhanced, backend, &cfg.cascade)?;
    let min_area = cfg.preprocess.denoise_min_area;
    run_tail_loop(&mut state, backend, &cfg.cascade, min_area)?;
    rescue_overlaps(&mut state, backend, &cfg.cascade, min_area)?;
    match_records(&mut state, &cfg.matcher)?;
    Ok(state)
}
