//! IO, file formats and the `helio` command line for `heliokit-core`.
//!
//! * [`feat1`] reads and writes FEAT1 feature matrices, the hand-off format
//!   from neural feature extractors.
//! * [`imageio`] handles HTIL float tiles, 8-bit PNG and image folders.
//! * [`records`] writes line-delimited JSON with sorted keys and a metadata
//!   header.
//! * [`tables`] reads study responses and metric tables from CSV.
//! * [`config`] expands `key = value` job files into flags.
//! * [`plot`] draws bar charts.
//! * [`cli`] implements the `ingest`, `synth`, `eval`, `report` and `latent`
//!   subcommands.

pub mod cli;
pub mod config;
pub mod error;
pub mod feat1;
pub mod imageio;
pub mod plot;
pub mod records;
pub mod tables;

pub use error::{ErrorKind, HelioError};
