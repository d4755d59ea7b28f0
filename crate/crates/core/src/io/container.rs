use super::codec::{Reader, Writer};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TPPG";
pub const FORMAT_VERSION: u16 = 1;

const HEADER_LEN: u64 = 12;
const ENTRY_LEN: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionKind {
    /// Text topology descriptor.
    Topology,
    /// Float tensors in declared layer order.
    FloatWeights,
    /// Integer network: int8 blobs, int32 biases, scale/zero-point records.
    Quantized,
    /// Input standardization and output scaling.
    Normalization,
    /// Per-subject raw streams.
    Dataset,
    Unknown(u32),
}

impl SectionKind {
    pub fn code(self) -> u32 {
        match self {
            SectionKind::Topology => 1,
            SectionKind::FloatWeights => 2,
            SectionKind::Quantized => 3,
            SectionKind::Normalization => 4,
            SectionKind::Dataset => 5,
            SectionKind::Unknown(c) => c,
        }
    }

    pub fn from_code(code: u32) -> Self {
        match code {
            1 => SectionKind::Topology,
            2 => SectionKind::FloatWeights,
            3 => SectionKind::Quantized,
            4 => SectionKind::Normalization,
            5 => SectionKind::Dataset,
            c => SectionKind::Unknown(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub kind: SectionKind,
    /// Absolute file offset of the payload (set when reading).
    pub offset: u64,
    pub data: Vec<u8>,
}

impl Section {
    pub fn new(kind: SectionKind, data: Vec<u8>) -> Self {
        Self { kind, offset: 0, data }
    }
}

/// Layout: magic, `u16` version, `u16` reserved, `u32` section count, then
/// one `(u32 kind, u64 offset, u64 length)` entry per section, then the
/// payloads back to back. All little-endian.
pub fn write_container(sections: &[Section]) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(&MAGIC);
    w.u16(FORMAT_VERSION);
    w.u16(0);
    w.u32(sections.len() as u32);
    let mut offset = HEADER_LEN + ENTRY_LEN * sections.len() as u64;
    for s in sections {
        w.u32(s.kind.code());
        w.u64(offset);
        w.u64(s.data.len() as u64);
        offset += s.data.len() as u64;
    }
    for s in sections {
        w.buf.extend_from_slice(&s.data);
    }
    w.buf
}

/// Parses and validates the section table. Sections of unknown kinds are
/// returned as [`SectionKind::Unknown`] for callers to skip.
pub fn read_container(bytes: &[u8]) -> Result<Vec<Section>> {
    let mut r = Reader::new(bytes, 0);
    if r.bytes(4).map_err(|_| Error::format(0, "file too short for a header"))? != MAGIC {
        return Err(Error::format(0, "bad magic: not a TPPG container"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    r.u16()?;
    let count = r.u32()? as u64;
    let table_end = HEADER_LEN + count * ENTRY_LEN;
    if table_end > bytes.len() as u64 {
        return Err(Error::format(8, format!("section table of {count} entries is truncated")));
    }
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let at = r.offset();
        let kind = r.u32()?;
        let offset = r.u64()?;
        let len = r.u64()?;
        let end = offset.checked_add(len).filter(|&e| e <= bytes.len() as u64);
        if offset < table_end || end.is_none() {
            return Err(Error::format(
                at,
                format!("section [{offset}, +{len}) lies outside the payload area"),
            ));
        }
        entries.push((at, kind, offset, len));
    }
    let mut sorted: Vec<_> = entries.clone();
    sorted.sort_by_key(|e| e.2);
    for pair in sorted.windows(2) {
        if pair[0].2 + pair[0].3 > pair[1].2 {
            return Err(Error::format(pair[1].0, "sections overlap"));
        }
    }
    Ok(entries
        .into_iter()
        .map(|(_, kind, offset, len)| Section {
            kind: SectionKind::from_code(kind),
            offset,
            data: bytes[offset as usize..(offset + len) as usize].to_vec(),
        })
        .collect())
}
