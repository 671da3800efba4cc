//! IDX file reader and seeded subsets.
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nonideality::{keyed_rng, RngDomain};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Grayscale images (0..=255) with class labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if pixels.len() != labels.len() * height * width {
            return Err(Error::Data(format!(
                "{} pixels do not match {} images of {height}x{width}",
                pixels.len(),
                labels.len()
            )));
        }
        Ok(Self { height, width, pixels, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    /// Pixels scaled to [0, 1].
    pub fn input(&self, i: usize) -> Vec<f32> {
        self.image(i).iter().map(|&p| p as f32 / 255.0).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.image_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Self { height: self.height, width: self.width, pixels, labels }
    }

    /// Seeded permutation of all indices.
    pub fn permutation(&self, seed: u64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut keyed_rng(seed, RngDomain::Dataset, 0, 0));
        idx
    }

    /// First `count` indices of the seeded permutation.
    pub fn subset_indices(&self, count: usize, seed: u64) -> Result<Vec<usize>> {
        if count > self.len() {
            return Err(Error::Data(format!("subset of {count} requested from {} images", self.len())));
        }
        let mut p = self.permutation(seed);
        p.truncate(count);
        Ok(p)
    }

    pub fn subset(&self, count: usize, seed: u64) -> Result<Self> {
        Ok(self.select(&self.subset_indices(count, seed)?))
    }

    /// Disjoint `(rest, held_out)` split; `held_out` equals `subset(held_out_count, seed)`.
    pub fn split(&self, held_out_count: usize, seed: u64) -> Result<(Self, Self)> {
        if held_out_count > self.len() {
            return Err(Error::Data(format!("cannot hold out {held_out_count} of {} images", self.len())));
        }
        let p = self.permutation(seed);
        let (test, rest) = p.split_at(held_out_count);
        Ok((self.select(rest), self.select(test)))
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Data(format!("{}: gzip: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(buf: &[u8], at: usize, what: &str) -> Result<u32> {
    buf.get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Data(format!("{what}: truncated header")))
}

/// Parses an IDX3 image file; returns `(count, height, width, pixels)`.
pub fn parse_idx_images(buf: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(buf, 0, "images")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Data(format!("images: bad magic number 0x{magic:08x}")));
    }
    let n = be_u32(buf, 4, "images")? as usize;
    let h = be_u32(buf, 8, "images")? as usize;
    let w = be_u32(buf, 12, "images")? as usize;
    let body = &buf[16..];
    let need = n * h * w;
    if body.len() < need {
        return Err(Error::Data(format!("images: truncated, expected {need} pixel bytes, found {}", body.len())));
    }
    Ok((n, h, w, body[..need].to_vec()))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(buf: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(buf, 0, "labels")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Data(format!("labels: bad magic number 0x{magic:08x}")));
    }
    let n = be_u32(buf, 4, "labels")? as usize;
    let body = &buf[8..];
    if body.len() < n {
        return Err(Error::Data(format!("labels: truncated, expected {n} bytes, found {}", body.len())));
    }
    Ok(body[..n].to_vec())
}

/// Loads an image/label file pair (plain or gzip-compressed).
pub fn load_mnist(images: &Path, labels: &Path) -> Result<Dataset> {
    let (n, h, w, pixels) = parse_idx_images(&read_all(images)?)?;
    let labels = parse_idx_labels(&read_all(labels)?)?;
    if labels.len() != n {
        return Err(Error::Data(format!("{n} images but {} labels", labels.len())));
    }
    Dataset::new(h, w, pixels, labels)
}

/// Loads `images-idx3-ubyte[.gz]` and `labels-idx1-ubyte[.gz]` from a directory.
pub fn load_mnist_dir(dir: &Path) -> Result<Dataset> {
    let find = |stem: &str| -> Result<std::path::PathBuf> {
        [format!("{stem}.gz"), stem.to_string()]
            .into_iter()
            .map(|f| dir.join(f))
            .find(|p| p.exists())
            .ok_or_else(|| Error::Io(format!("{}: no {stem}[.gz]", dir.display())))
    };
    load_mnist(&find("images-idx3-ubyte")?, &find("labels-idx1-ubyte")?)
}
