//! Few-shot page layout segmentation for handwritten manuscripts.
//!
//! The pipeline tiles each page into fixed-size patches, trains a pixel
//! classifier on those patches plus fresh random crops every epoch, and at
//! inference multiplies the stitched prediction with a Sauvola ink mask.

pub mod binarize;
pub mod error;
pub mod imagecore;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod refine;
pub mod report;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
