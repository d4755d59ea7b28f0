use crate::error::{Error, Result};

/// Little-endian byte sink.
#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    pub fn f32s(&mut self, v: &[f32]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.f32(x));
    }
    pub fn i32s(&mut self, v: &[i32]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.i32(x));
    }
    pub fn i8s(&mut self, v: &[i8]) {
        self.len(v.len());
        self.buf.extend(v.iter().map(|&x| x as u8));
    }
}

/// Little-endian cursor over a section; errors carry absolute file offsets.
pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    base: u64,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8], base: u64) -> Self {
        Self { data, pos: 0, base }
    }

    pub fn offset(&self) -> u64 {
        self.base + self.pos as u64
    }

    pub fn error(&self, msg: impl Into<String>) -> Error {
        Error::format(self.offset(), msg)
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.data.len()
    }

    pub fn finish(&self) -> Result<()> {
        if self.is_done() {
            Ok(())
        } else {
            Err(self.error(format!("{} unexpected trailing bytes", self.data.len() - self.pos)))
        }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(self.error(format!("truncated: needed {n} bytes, {} remain", self.data.len() - self.pos)));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.bytes(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    pub fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array()?))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    /// A length prefix for elements of `elem` bytes, checked against the
    /// bytes actually remaining.
    pub fn len(&mut self, elem: usize) -> Result<usize> {
        let at = self.offset();
        let n = self.u64()?;
        let remaining = (self.data.len() - self.pos) as u64;
        if n.checked_mul(elem as u64).is_none_or(|b| b > remaining) {
            return Err(Error::format(
                at,
                format!("length {n} exceeds the {remaining} bytes remaining"),
            ));
        }
        Ok(n as usize)
    }

    pub fn small(&mut self, what: &str, max: u32) -> Result<usize> {
        let at = self.offset();
        let v = self.u32()?;
        if v > max {
            return Err(Error::format(at, format!("{what} {v} exceeds the limit {max}")));
        }
        Ok(v as usize)
    }

    pub fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.f32()).collect()
    }
    pub fn i32s(&mut self) -> Result<Vec<i32>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.i32()).collect()
    }
    pub fn i8s(&mut self) -> Result<Vec<i8>> {
        let n = self.len(1)?;
        Ok(self.bytes(n)?.iter().map(|&b| b as i8).collect())
    }
}
