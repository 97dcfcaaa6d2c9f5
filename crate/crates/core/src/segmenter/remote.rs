use std::time::Duration;

use log::debug;

use super::wire::decode_response;
use super::{BackendDescriptor, Segmenter, SegmenterError};
use crate::raster::{BinaryMask, RasterImage};

const MAX_RESPONSE_BYTES: u64 = 512 * 1024 * 1024;

/// HTTP client for a service exposing `POST {base}/segment`.
#[derive(Debug, Clone)]
pub struct RemoteSegmenter {
    base_url: String,
    timeout: Duration,
}

impl RemoteSegmenter {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Self {
        Self { base_url: base_url.into().trim_end_matches('/').to_owned(), timeout }
    }

    pub fn endpoint(&self) -> String {
        format!("{}/segment", self.base_url)
    }
}

fn transport_error(url: &str) -> impl Fn(ureq::Error) -> SegmenterError + '_ {
    move |e| match e {
        ureq::Error::Timeout(_) => SegmenterError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => SegmenterError::Timeout,
        other => SegmenterError::RemoteUnavailable(format!("{url}: {other}")),
    }
}

impl Segmenter for RemoteSegmenter {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor { name: format!("remote:{}", self.base_url), deterministic: false }
    }

    fn segment(&self, img: &RasterImage) -> Result<Vec<BinaryMask>, SegmenterError> {
        let png = img
            .encode_png()
            .map_err(|e| SegmenterError::RemoteUnavailable(format!("cannot encode request: {e}")))?;
        // a fresh agent per call: no connection is shared between threads
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(self.timeout))
                .http_status_as_error(false)
                .build(),
        );
        let url = self.endpoint();
        debug!("POST {url} ({} bytes)", png.len());
        let mut resp = agent
            .post(&url)
            .header("Content-Type", "image/png")
            .send(&png[..])
            .map_err(transport_error(&url))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(transport_error(&url))?;
        match status {
            200 => decode_response(&body, img.width(), img.height()),
            503 => Err(SegmenterError::RemoteUnavailable(format!("{url}: model not ready (503)"))),
            _ => Err(SegmenterError::Rejected {
                status,
                body: String::from_utf8_lossy(&body).chars().take(200).collect(),
            }),
        }
    }
}
