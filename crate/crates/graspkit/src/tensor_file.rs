//! `TNSR v1` files: one ASCII header line, then little-endian `f32` values
//! in row-major order.
//!
//! ```text
//! TNSR v1 f32 3 10 10 42\n<4200 × 4 bytes>
//! ```

use std::io::{Read, Write};
use std::path::Path;

use graspkit_core::loss::{DetectionTensor, FeatureMap};

const MAGIC: &str = "TNSR";
const VERSION: &str = "v1";
const MAX_HEADER: usize = 1024;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("bad tensor header: {0}")]
    Header(String),
    #[error("tensor payload holds {found} bytes, header promises {expected}")]
    Payload { expected: usize, found: usize },
    #[error("tensor shape {dims:?} is not {wanted}")]
    Shape {
        dims: Vec<usize>,
        wanted: &'static str,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        let expected = dims.iter().product::<usize>();
        if expected != data.len() {
            return Err(TensorError::Payload {
                expected: expected * 4,
                found: data.len() * 4,
            });
        }
        Ok(Self { dims, data })
    }

    pub fn header(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        format!(
            "{MAGIC} {VERSION} f32 {} {}\n",
            self.dims.len(),
            dims.join(" ")
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().into_bytes();
        out.reserve(self.data.len() * 4);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        let end = bytes
            .iter()
            .take(MAX_HEADER)
            .position(|&b| b == b'\n')
            .ok_or_else(|| TensorError::Header("no newline-terminated header line".into()))?;
        let header = std::str::from_utf8(&bytes[..end])
            .map_err(|_| TensorError::Header("header is not ASCII".into()))?;
        let dims = parse_header(header)?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| TensorError::Header(format!("dimensions overflow in {header:?}")))?;
        let payload = &bytes[end + 1..];
        if payload.len() != count {
            return Err(TensorError::Payload {
                expected: count,
                found: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TensorError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, TensorError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn load(path: &Path) -> Result<Self, TensorError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TensorError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Detection tensor as `[n, n, 7k]`: per cell, the `2k` logits followed
    /// by the `5k` offsets, both in anchor order.
    pub fn from_detection(t: &DetectionTensor) -> Self {
        let (n, k) = (t.n(), t.k());
        let mut data = Vec::with_capacity(n * n * 7 * k);
        for cell in 0..n * n {
            data.extend(
                t.cls()[cell * 2 * k..(cell + 1) * 2 * k]
                    .iter()
                    .map(|&v| v as f32),
            );
            data.extend(
                t.reg()[cell * 5 * k..(cell + 1) * 5 * k]
                    .iter()
                    .map(|&v| v as f32),
            );
        }
        Self {
            dims: vec![n, n, 7 * k],
            data,
        }
    }

    pub fn to_detection(&self) -> Result<DetectionTensor, TensorError> {
        let shape_err = || TensorError::Shape {
            dims: self.dims.clone(),
            wanted: "[n, n, 7k] with k ≥ 1",
        };
        let [n, n2, ch] = self.dims[..] else {
            return Err(shape_err());
        };
        if n != n2 || ch == 0 || ch % 7 != 0 {
            return Err(shape_err());
        }
        let k = ch / 7;
        let mut cls = Vec::with_capacity(n * n * 2 * k);
        let mut reg = Vec::with_capacity(n * n * 5 * k);
        for cell in self.data.chunks_exact(ch) {
            cls.extend(cell[..2 * k].iter().map(|&v| v as f64));
            reg.extend(cell[2 * k..].iter().map(|&v| v as f64));
        }
        DetectionTensor::from_parts(n, k, cls, reg).map_err(|_| shape_err())
    }

    /// Feature map as `[height, width, channels]`.
    pub fn from_features(f: &FeatureMap) -> Self {
        Self {
            dims: vec![f.height, f.width, f.channels],
            data: f.data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_features(&self) -> Result<FeatureMap, TensorError> {
        let [h, w, c] = self.dims[..] else {
            return Err(TensorError::Shape {
                dims: self.dims.clone(),
                wanted: "[height, width, channels]",
            });
        };
        FeatureMap::new(h, w, c, self.data.iter().map(|&v| v as f64).collect()).map_err(|_| {
            TensorError::Shape {
                dims: self.dims.clone(),
                wanted: "[height, width, channels]",
            }
        })
    }
}

fn parse_header(line: &str) -> Result<Vec<usize>, TensorError> {
    let bad = |why: &str| TensorError::Header(format!("{why} in {line:?}"));
    let mut parts = line.split_ascii_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(bad("missing TNSR magic"));
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(v) => return Err(bad(&format!("unsupported version {v:?}"))),
        None => return Err(bad("missing version")),
    }
    match parts.next() {
        Some("f32") => {}
        Some(t) => return Err(bad(&format!("unsupported dtype {t:?}"))),
        None => return Err(bad("missing dtype")),
    }
    let ndim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing or invalid ndim"))?;
    let dims: Vec<usize> = parts
        .map(|s| {
            s.parse()
                .map_err(|_| bad(&format!("invalid dimension {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if dims.len() != ndim {
        return Err(bad(&format!("ndim {ndim} but {} dimensions", dims.len())));
    }
    Ok(dims)
}
