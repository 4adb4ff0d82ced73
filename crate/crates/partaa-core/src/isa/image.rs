//! Loadable program image and its binary file encoding.

use alloc::vec::Vec;
use core::fmt;

/// File magic, followed by a version byte.
pub const IMAGE_MAGIC: [u8; 4] = *b"PRTA";
pub const IMAGE_VERSION: u8 = 0x01;

/// A loadable program: instruction words plus data-memory initialization.
///
/// `data_init` addresses are partition-visible (n-1 bit) word addresses; the
/// loader translates them through the MCU with the owning partition's flag.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BinaryImage {
    pub words: Vec<u32>,
    /// Word index execution starts at. The file format does not carry it
    /// (reset starts program counters at zero), so file-loaded images always
    /// have entry 0 and the assembler requires `.entry` to name word 0.
    pub entry_point: u32,
    pub data_init: Vec<(u32, u32)>,
}

impl BinaryImage {
    pub fn new(words: Vec<u32>) -> BinaryImage {
        BinaryImage { words, entry_point: 0, data_init: Vec::new() }
    }

    /// Serialize to the image file layout: magic, version, word count (LE),
    /// words, data_init count, (address, value) pairs.
    pub fn to_bytes(&self) -> Result<Vec<u8>, ImageError> {
        if self.entry_point != 0 {
            return Err(ImageError::NonzeroEntry(self.entry_point));
        }
        let mut out = Vec::with_capacity(9 + 4 * self.words.len() + 8 * self.data_init.len());
        out.extend_from_slice(&IMAGE_MAGIC);
        out.push(IMAGE_VERSION);
        out.extend_from_slice(&(self.words.len() as u32).to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(self.data_init.len() as u32).to_le_bytes());
        for (addr, value) in &self.data_init {
            out.extend_from_slice(&addr.to_le_bytes());
            out.extend_from_slice(&value.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<BinaryImage, ImageError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != IMAGE_MAGIC {
            return Err(ImageError::BadMagic);
        }
        let version = cur.take(1)?[0];
        if version != IMAGE_VERSION {
            return Err(ImageError::BadVersion(version));
        }
        let word_count = cur.u32()? as usize;
        let mut words = Vec::with_capacity(word_count.min(1 << 20));
        for _ in 0..word_count {
            words.push(cur.u32()?);
        }
        let init_count = cur.u32()? as usize;
        let mut data_init = Vec::with_capacity(init_count.min(1 << 20));
        for _ in 0..init_count {
            let addr = cur.u32()?;
            let value = cur.u32()?;
            data_init.push((addr, value));
        }
        if cur.pos != bytes.len() {
            return Err(ImageError::TrailingBytes);
        }
        Ok(BinaryImage { words, entry_point: 0, data_init })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ImageError> {
        if self.pos + n > self.bytes.len() {
            return Err(ImageError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, ImageError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageError {
    BadMagic,
    BadVersion(u8),
    Truncated,
    TrailingBytes,
    NonzeroEntry(u32),
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::BadMagic => write!(f, "not a PRTA image (bad magic)"),
            ImageError::BadVersion(v) => write!(f, "unsupported image version {v:#04x}"),
            ImageError::Truncated => write!(f, "image file truncated"),
            ImageError::TrailingBytes => write!(f, "trailing bytes after image payload"),
            ImageError::NonzeroEntry(e) => {
                write!(f, "image files cannot carry a nonzero entry point (got {e})")
            }
        }
    }
}

impl core::error::Error for ImageError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn bytes_roundtrip() {
        let image = BinaryImage {
            words: vec![0x1234_5678, 0x0000_0000, 0x0100_0000],
            entry_point: 0,
            data_init: vec![(0x4000, 1), (0x4101, 0xdead_beef)],
        };
        let bytes = image.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"PRTA");
        assert_eq!(bytes[4], 0x01);
        assert_eq!(&bytes[5..9], &3u32.to_le_bytes());
        assert_eq!(BinaryImage::from_bytes(&bytes).unwrap(), image);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert_eq!(BinaryImage::from_bytes(b"NOPE").unwrap_err(), ImageError::BadMagic);
        let mut bytes = BinaryImage::new(vec![0]).to_bytes().unwrap();
        bytes.push(0xff);
        assert_eq!(BinaryImage::from_bytes(&bytes).unwrap_err(), ImageError::TrailingBytes);
        bytes.pop();
        bytes.pop();
        assert_eq!(BinaryImage::from_bytes(&bytes).unwrap_err(), ImageError::Truncated);
    }
}
