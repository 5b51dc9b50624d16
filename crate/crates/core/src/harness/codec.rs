//! Little-endian framing shared by the dataset and checkpoint files:
//! `magic | version u32 | body | sha256(everything before)`.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 4], version: u32) -> Self {
        let mut w = Writer { buf: Vec::new() };
        w.bytes(magic);
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) {
        for v in values {
            self.f64(*v);
        }
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    pub fn finish(mut self) -> Vec<u8> {
        let digest = Sha256::digest(&self.buf);
        self.buf.extend_from_slice(&digest);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    what: &'static str,
    body: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and the trailing digest.
    pub fn open(what: &'static str, data: &'a [u8], magic: &[u8; 4], version: u32) -> Result<Self> {
        if data.len() < 8 + 32 {
            return Err(Error::format(what, "file truncated"));
        }
        if &data[..4] != magic {
            return Err(Error::format(what, "bad magic"));
        }
        let found = u32::from_le_bytes(data[4..8].try_into().unwrap());
        if found != version {
            return Err(Error::format(
                what,
                format!("unsupported version {found} (expected {version})"),
            ));
        }
        let (body, trailer) = data.split_at(data.len() - 32);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(Error::format(what, "digest mismatch (corrupt or truncated)"));
        }
        Ok(Reader { what, body, pos: 8 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.body.len());
        let Some(end) = end else {
            return Err(Error::format(self.what, "file truncated"));
        };
        let out = &self.body[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn len(&mut self, max: usize) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= max)
            .ok_or_else(|| Error::format(self.what, format!("length {v} out of range")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::format(self.what, "length overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn remaining(&self) -> usize {
        self.body.len() - self.pos
    }

    pub fn finish(self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(self.what, "trailing bytes after payload"));
        }
        Ok(())
    }

    pub fn error(&self, reason: impl Into<String>) -> Error {
        Error::format(self.what, reason)
    }
}

/// Writes `bytes` to `path`, refusing to replace an existing file unless
/// `force` is set.
pub(crate) fn write_file(path: &std::path::Path, bytes: &[u8], force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::AlreadyExists(path.to_path_buf()));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn read_file(path: &std::path::Path, what: &str) -> Result<Vec<u8>> {
    match std::fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingArtifact(format!("{what} {}", path.display())))
        }
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<u8> {
        let mut w = Writer::new(b"TEST", 3);
        w.u8(7);
        w.u64(42);
        w.f64s(&[1.5, -2.0]);
        w.finish()
    }

    #[test]
    fn round_trip() {
        let bytes = sample();
        let mut r = Reader::open("test", &bytes, b"TEST", 3).unwrap();
        assert_eq!(r.u8().unwrap(), 7);
        assert_eq!(r.u64().unwrap(), 42);
        assert_eq!(r.f64s(2).unwrap(), vec![1.5, -2.0]);
        r.finish().unwrap();
    }

    #[test]
    fn rejects_tampering() {
        let bytes = sample();
        assert!(Reader::open("test", &bytes, b"NOPE", 3).is_err());
        assert!(Reader::open("test", &bytes, b"TEST", 4).is_err());
        let mut flipped = bytes.clone();
        flipped[10] ^= 1;
        assert!(Reader::open("test", &flipped, b"TEST", 3).is_err());
        assert!(Reader::open("test", &bytes[..bytes.len() - 5], b"TEST", 3).is_err());
        assert!(Reader::open("test", &bytes[..6], b"TEST", 3).is_err());
    }

    #[test]
    fn over_read_is_truncation() {
        let bytes = sample();
        let mut r = Reader::open("test", &bytes, b"TEST", 3).unwrap();
        assert!(r.f64s(10).is_err());
    }
}
