//! IDX containers (the MNIST distribution format), optionally gzipped.
//!
//! Layout: a big-endian `u32` magic (`0x00000803` for 3-D unsigned-byte
//! image arrays, `0x00000801` for 1-D label arrays), one big-endian `u32` per
//! dimension, then the raw bytes.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use xaifuzz_core::nn::{Label, Sample};
use xaifuzz_core::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("file truncated: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {0} out of range")]
    BadLabel(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// One `rows * cols` byte block per image.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Image `i` scaled to `[0, 1]`.
    pub fn image(&self, i: usize) -> Vec<f32> {
        let n = self.rows * self.cols;
        self.pixels[i * n..(i + 1) * n]
            .iter()
            .map(|&p| p as f32 / 255.0)
            .collect()
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io_err = |source| IdxError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(BufReader::new(file))
            .read_to_end(&mut bytes)
            .map_err(io_err)?;
    } else {
        BufReader::new(file).read_to_end(&mut bytes).map_err(io_err)?;
    }
    Ok(bytes)
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            expected: offset + 4,
            found: bytes.len(),
        })
}

fn parse(bytes: &[u8], magic: u32, ndims: usize) -> Result<(Vec<usize>, &[u8]), IdxError> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(IdxError::BadMagic {
            expected: magic,
            found,
        });
    }
    let dims = (0..ndims)
        .map(|d| be_u32(bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let header = 4 + 4 * ndims;
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(IdxError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    Ok((dims, &payload[..expected]))
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    let (dims, payload) = parse(bytes, IMAGES_MAGIC, 3)?;
    Ok(IdxImages {
        rows: dims[1],
        cols: dims[2],
        pixels: payload.to_vec(),
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let (_, payload) = parse(bytes, LABELS_MAGIC, 1)?;
    Ok(payload.to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages, IdxError> {
    parse_images(&read_all(path)?)
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>, IdxError> {
    parse_labels(&read_all(path)?)
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [images.len(), images.rows, images.cols] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// A labelled digit set loaded from an image file and a label file.
#[derive(Debug, Clone)]
pub struct DigitSet {
    pub images: IdxImages,
    pub labels: Vec<u8>,
}

impl DigitSet {
    pub fn load(images: &Path, labels: &Path) -> Result<Self, IdxError> {
        let images = read_images(images)?;
        let labels = read_labels(labels)?;
        if images.len() != labels.len() {
            return Err(IdxError::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 9) {
            return Err(IdxError::BadLabel(bad));
        }
        Ok(Self { images, labels })
    }

    /// Loads `<prefix>-images-idx3-ubyte[.gz]` and `<prefix>-labels-idx1-ubyte[.gz]`
    /// from `dir`.
    pub fn load_split(dir: &Path, prefix: &str) -> Result<Self, IdxError> {
        let pick = |kind: &str| {
            let plain = dir.join(format!("{prefix}-{kind}"));
            let gz = dir.join(format!("{prefix}-{kind}.gz"));
            if plain.exists() {
                plain
            } else {
                gz
            }
        };
        Self::load(&pick("images-idx3-ubyte"), &pick("labels-idx1-ubyte"))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn tensor(&self, i: usize) -> Tensor {
        Tensor::image(self.images.rows, self.images.cols, self.images.image(i)).expect("idx dims")
    }

    pub fn samples(&self) -> Vec<Sample> {
        (0..self.len())
            .map(|i| Sample {
                input: self.tensor(i),
                label: Label::Class(self.labels[i] as usize),
            })
            .collect()
    }
}
