//! Everything-mode segmentation backends.
//!
//! A backend takes an image and returns mask proposals. Proposals may
//! overlap and carry no labels. [`OracleSegmenter`] replays generator
//! ground truth under fixed behavioural rules; [`RemoteSegmenter`] talks
//! to an HTTP service.

mod oracle;
mod remote;
pub mod wire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, RasterImage};

pub use oracle::{OracleBehavior, OracleSegmenter};
pub use remote::RemoteSegmenter;

#[derive(Debug, Error)]
pub enum SegmenterError {
    #[error("backend unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("request timed out")]
    Timeout,
    #[error("backend rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub deterministic: bool,
}

/// Placement of a presented image inside the original scene: view pixel
/// `(x, y)` shows scene pixel `(x0 + x / scale, y0 + y / scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewTransform {
    pub x0: u32,
    pub y0: u32,
    pub scale: u32,
}

impl ViewTransform {
    pub const IDENTITY: Self = Self { x0: 0, y0: 0, scale: 1 };
}

impl Default for ViewTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

pub trait Segmenter: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    fn segment(&self, img: &RasterImage) -> Result<Vec<BinaryMask>, SegmenterError>;

    /// Segments an image known to be a crop/upscale of the scene. Backends
    /// that only see pixels ignore the hint.
    fn segment_view(
        &self,
        img: &RasterImage,
        view: ViewTransform,
    ) -> Result<Vec<BinaryMask>, SegmenterError> {
        let _ = view;
        self.segment(img)
    }
}
