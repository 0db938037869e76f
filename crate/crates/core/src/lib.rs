//! Measurement stack for generative models of solar EUV imagery.
//!
//! Everything in this crate is a pure function of its inputs (and an explicit
//! seed where randomness is involved). It builds without `std`; file formats
//! that need IO, and the command line front end, live in the `heliokit` crate.
//!
//! Modules:
//!
//! * [`fits`] parses and writes primary-HDU FITS images and applies the
//!   `QUALITY == 0` validity filter.
//! * [`imageprep`] holds the clip/log/normalize intensity transform, box
//!   downsampling, seeded patch extraction, 8-bit quantization and a
//!   synthetic-sun generator.
//! * [`features`] defines [`FeatureSet`], the embedding matrix exchanged with
//!   neural feature extractors.
//! * [`metrics`] is the metric engine: Gaussian statistics, PSD matrix square
//!   root, Fréchet distance, unbiased KID, k-NN precision/recall, patch-FID
//!   and pixel histograms.
//! * [`stats`] carries rank/product-moment correlation, run aggregation and the
//!   exact binomial test used for the human study.
//! * [`latent`] extracts PCA directions from a bank of latent vectors and
//!   produces edit sequences along them.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod features;
pub mod fits;
pub mod imageprep;
pub mod latent;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod stats;

pub use features::{FeatureError, FeatureSet};
pub use fits::{parse_fits, quality_filter, write_fits, FitsError, FitsImage, QualityVerdict};
pub use imageprep::{NormalizedImage, Patch, PrepError, SynthParams};
pub use latent::{LatentBank, LatentError, PcaDirections};
pub use linalg::Matrix;
pub use metrics::{GaussianStats, MetricReport, MetricsError, PixelHistogram};
pub use stats::{RunAggregate, StatsError, StudyResponse};
