use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

/// Linear RGB image, `f32` per channel, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

#[derive(Debug, Error)]
pub enum PpmError {
    #[error("ppm I/O: {0}")]
    Io(#[from] io::Error),
    #[error("malformed PPM: {0}")]
    Format(&'static str),
}

impl Image {
    pub fn black(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize * 3],
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Binary P6 encoding, maxval 255, each channel clamped to `[0,1]` and
    /// rounded half-up.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| quantize(v)));
        out
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<(), PpmError> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_ppm())?;
        f.flush()?;
        Ok(())
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self, PpmError> {
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(PpmError::Format("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| PpmError::Format("header not ASCII"))?);
        }
        if fields[0] != "P6" {
            return Err(PpmError::Format("not a P6 file"));
        }
        let parse = |s: &str| s.parse::<u32>().map_err(|_| PpmError::Format("bad header number"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(PpmError::Format("only maxval 255 is supported"));
        }
        pos += 1; // single whitespace after maxval
        let len = width as usize * height as usize * 3;
        let raw = bytes.get(pos..pos + len).ok_or(PpmError::Format("truncated pixel data"))?;
        Ok(Self {
            width,
            height,
            data: raw.iter().map(|&b| b as f32 / 255.0).collect(),
        })
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self, PpmError> {
        Self::from_ppm(&std::fs::read(path)?)
    }
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}
