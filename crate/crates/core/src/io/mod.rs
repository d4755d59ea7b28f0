//! The `TPPG` binary container (checkpoints and datasets) and CSV reports.

mod checkpoint;
mod codec;
mod container;
pub mod csv;
mod dataset;

pub use checkpoint::{
    decode_checkpoint, encode_float_checkpoint, encode_quantized_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
};
pub use container::{read_container, write_container, Section, SectionKind, FORMAT_VERSION, MAGIC};
pub use dataset::{decode_dataset, encode_dataset, load_recording_set, save_dataset};

use std::fs;
use std::path::Path;

use crate::error::Result;

/// Writes through a temporary sibling and renames, so a failed write never
/// leaves a partial file behind.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
