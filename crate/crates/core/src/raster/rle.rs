//! Column-major run-length encoding.
//!
//! Layout, all little-endian `u32`: `width`, `height`, `run_count`, then
//! `run_count` pairs of `(start, length)`. `start` indexes pixels in
//! column-major order (`x * height + y`). Runs are emitted in increasing
//! order and never touch each other.

use super::{BinaryMask, RasterError};

pub fn rle_encode(mask: &BinaryMask) -> Vec<u8> {
    let (w, h) = (mask.width(), mask.height());
    let mut runs: Vec<(u32, u32)> = Vec::new();
    let mut current: Option<(u32, u32)> = None;
    let mut pos = 0u32;
    for x in 0..w {
        for y in 0..h {
            if mask.get(x, y) {
                match current.as_mut() {
                    Some((_, len)) => *len += 1,
                    None => current = Some((pos, 1)),
                }
            } else if let Some(run) = current.take() {
                runs.push(run);
            }
            pos += 1;
        }
    }
    runs.extend(current);

    let mut out = Vec::with_capacity(12 + runs.len() * 8);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
    for (start, len) in runs {
        out.extend_from_slice(&start.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
    }
    out
}

pub fn rle_decode(bytes: &[u8]) -> Result<BinaryMask, RasterError> {
    let word = |i: usize| -> Result<u32, RasterError> {
        bytes
            .get(i * 4..i * 4 + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4-byte slice")))
            .ok_or_else(|| RasterError::MalformedRle(format!("truncated at word {i}")))
    };
    let (w, h, n) = (word(0)?, word(1)?, word(2)? as usize);
    let expected_len = 12 + n * 8;
    if bytes.len() != expected_len {
        return Err(RasterError::MalformedRle(format!(
            "{} bytes for {n} runs, expected {expected_len}",
            bytes.len()
        )));
    }
    let mut mask = BinaryMask::new(w, h)
        .map_err(|_| RasterError::MalformedRle(format!("bad header {w}x{h}")))?;
    let total = u64::from(w) * u64::from(h);
    let mut prev_end = 0u64;
    for i in 0..n {
        let start = u64::from(word(3 + 2 * i)?);
        let len = u64::from(word(4 + 2 * i)?);
        if len == 0 || start + len > total {
            return Err(RasterError::MalformedRle(format!(
                "run {i} ({start}, {len}) exceeds {total} pixels"
            )));
        }
        if start < prev_end {
            return Err(RasterError::MalformedRle(format!("run {i} overlaps previous run")));
        }
        prev_end = start + len;
        for p in start..start + len {
            let (x, y) = ((p / u64::from(h)) as u32, (p % u64::from(h)) as u32);
            mask.set(x, y, true);
        }
    }
    Ok(mask)
}
