//! JSON body exchanged with a segmentation service:
//! `{"width": w, "height": h, "masks": [{"rle": "<base64 RLE bytes>"}]}`.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::SegmenterError;
use crate::raster::{rle_decode, rle_encode, BinaryMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMask {
    pub rle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub width: u32,
    pub height: u32,
    pub masks: Vec<WireMask>,
}

pub fn encode_response(width: u32, height: u32, masks: &[BinaryMask]) -> WireResponse {
    let masks = masks.iter().map(|m| WireMask { rle: STANDARD.encode(rle_encode(m)) }).collect();
    WireResponse { width, height, masks }
}

/// Parses a response body and checks every mask against the request size.
pub fn decode_response(
    body: &[u8],
    width: u32,
    height: u32,
) -> Result<Vec<BinaryMask>, SegmenterError> {
    let malformed = |m: String| SegmenterError::MalformedResponse(m);
    let resp: WireResponse =
        serde_json::from_slice(body).map_err(|e| malformed(format!("bad JSON: {e}")))?;
    if (resp.width, resp.height) != (width, height) {
        return Err(malformed(format!(
            "response is {}x{}, request was {width}x{height}",
            resp.width, resp.height
        )));
    }
    resp.masks
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let bytes = STANDARD.decode(&m.rle).map_err(|e| malformed(format!("mask {i}: {e}")))?;
            let mask = rle_decode(&bytes).map_err(|e| malformed(format!("mask {i}: {e}")))?;
            if (mask.width(), mask.height()) != (width, height) {
                return Err(malformed(format!(
                    "mask {i} is {}x{}, request was {width}x{height}",
                    mask.width(),
                    mask.height()
                )));
            }
            Ok(mask)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = BinaryMask::new(7, 5).unwrap();
        m.set(3, 2, true);
        m.set(6, 4, true);
        let body = serde_json::to_vec(&encode_response(7, 5, &[m.clone(), m.empty_like()])).unwrap();
        let back = decode_response(&body, 7, 5).unwrap();
        assert_eq!(back, vec![m.clone(), m.empty_like()]);
    }

    #[test]
    fn rejects_bad_bodies() {
        let m = BinaryMask::new(4, 4).unwrap();
        let good = serde_json::to_vec(&encode_response(4, 4, &[m])).unwrap();
        assert!(matches!(decode_response(&good, 4, 5), Err(SegmenterError::MalformedResponse(_))));
        let cases: [&[u8]; 4] = [
            b"not json",
            br#"{"width":4,"height":4}"#,
            br#"{"width":4,"height":4,"masks":[{"rle":"!!"}]}"#,
            br#"{"width":4,"height":4,"masks":[{"rle":"AAAA"}]}"#,
        ];
        for body in cases {
            assert!(matches!(decode_response(body, 4, 4), Err(SegmenterError::MalformedResponse(_))));
        }
        // a mask whose own header disagrees with the envelope
        let other = serde_json::to_vec(&encode_response(4, 4, &[BinaryMask::new(2, 8).unwrap()])).unwrap();
        assert!(matches!(decode_response(&other, 4, 4), Err(SegmenterError::MalformedResponse(_))));
    }

    #[test]
    fn extra_fields_are_ignored() {
        let body = br#"{"width":2,"height":2,"masks":[],"model":"x"}"#;
        assert!(decode_response(body, 2, 2).unwrap().is_empty());
    }
}
