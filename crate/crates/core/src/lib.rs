//! Cascade instance segmentation of overlapping curvilinear structures.
//!
//! The pipeline segments stained heads first, peels off simple tails round
//! by round, rescues fused tail clusters by enlarging and bolding them, then
//! pairs heads with tails by endpoint distance and terminal slope.

pub mod cascade;
pub mod evaluate;
pub mod manifest;
pub mod matcher;
pub mod preprocess;
pub mod raster;
pub mod segmenter;
pub mod skeleton;
pub mod synthgen;

#[cfg(test)]
mod test_oracles;
