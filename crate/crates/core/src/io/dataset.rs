use std::fs;
use std::path::Path;

use super::codec::{Reader, Writer};
use super::container::{read_container, write_container, Section, SectionKind};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::synth::{Recording, RecordingSet};

/// One dataset section: `u32` subject count, then per subject its id,
/// sample rate, truth rate and the PPG, three accelerometer and truth
/// streams as length-prefixed `f32` arrays.
pub fn encode_dataset(set: &RecordingSet) -> Result<Vec<u8>> {
    set.validate()?;
    let mut w = Writer::default();
    w.u32(set.recordings.len() as u32);
    for r in &set.recordings {
        w.u32(r.subject_id);
        w.f32(r.sample_rate_hz);
        w.f32(r.truth_rate_hz);
        w.f32s(&r.ppg);
        r.accel.iter().for_each(|a| w.f32s(a));
        w.f32s(&r.truth_bpm);
    }
    Ok(write_container(&[Section::new(SectionKind::Dataset, w.buf)]))
}

pub fn decode_dataset(bytes: &[u8]) -> Result<RecordingSet> {
    let sections = read_container(bytes)?;
    let s = sections
        .iter()
        .find(|s| s.kind == SectionKind::Dataset)
        .ok_or_else(|| Error::format(0, "container has no dataset section"))?;
    let mut r = Reader::new(&s.data, s.offset);
    let count = r.small("subject count", 1 << 16)?;
    let mut recordings = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let rec = Recording {
            subject_id: r.u32()?,
            sample_rate_hz: r.f32()?,
            truth_rate_hz: r.f32()?,
            ppg: r.f32s()?,
            accel: [r.f32s()?, r.f32s()?, r.f32s()?],
            truth_bpm: r.f32s()?,
        };
        rec.validate().map_err(|e| Error::format(at, e.to_string()))?;
        recordings.push(rec);
    }
    r.finish()?;
    RecordingSet::new(recordings).map_err(|e| Error::format(s.offset, e.to_string()))
}

pub fn save_dataset(path: &Path, set: &RecordingSet) -> Result<()> {
    write_atomic(path, &encode_dataset(set)?)
}

pub fn load_recording_set(path: &Path) -> Result<RecordingSet> {
    decode_dataset(&fs::read(path)?)
}
