//! Readers for IDX (MNIST-style), CIFAR binary and a plain CSV layout.
//! Pixels are bytes scaled by 1/255; labels are integers.

use std::path::Path;

use hiresnn_core::data::Dataset;
use hiresnn_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{format_err, AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Synthetic,
    Idx,
    CifarBinary,
    Csv,
}

fn pixel(b: u8) -> f64 {
    b as f64 / 255.0
}

fn read(path: &Path) -> AppResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => AppError::Dependency(format!("{} not found", path.display())),
        _ => AppError::Io(e),
    })
}

fn be_u32(bytes: &[u8], at: usize) -> AppResult<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(at, "truncated header"))
}

/// Parses an IDX file of unsigned bytes, returning its dimensions and data.
pub fn parse_idx(bytes: &[u8]) -> AppResult<(Vec<usize>, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic >> 8 != 0x08 {
        return Err(format_err(0, format!("magic {:#010x} is not an unsigned-byte IDX file", magic)));
    }
    let ndim = (magic & 0xff) as usize;
    if ndim == 0 {
        return Err(format_err(3, "IDX file with zero dimensions"));
    }
    let dims: Vec<usize> = (0..ndim).map(|k| be_u32(bytes, 4 + 4 * k).map(|v| v as usize)).collect::<AppResult<_>>()?;
    let start = 4 + 4 * ndim;
    let len: usize = dims.iter().product();
    let body = &bytes[start..];
    if body.len() != len {
        return Err(format_err(start, format!("expected {} data bytes for dims {:?}, found {}", len, dims, body.len())));
    }
    Ok((dims, body))
}

/// Images from an IDX3 file (magic 0x803) and labels from an IDX1 file
/// (magic 0x801).
pub fn decode_idx(images: &[u8], labels: &[u8], classes: usize) -> AppResult<Dataset> {
    let (dims, px) = parse_idx(images)?;
    if dims.len() != 3 {
        return Err(format_err(3, format!("image file has {} axes, expected 3", dims.len())));
    }
    let (ldims, lb) = parse_idx(labels)?;
    if ldims.len() != 1 {
        return Err(format_err(3, format!("label file has {} axes, expected 1", ldims.len())));
    }
    if ldims[0] != dims[0] {
        return Err(format_err(4, format!("{} labels for {} images", ldims[0], dims[0])));
    }
    let (h, w) = (dims[1], dims[2]);
    let stride = h * w;
    let images = px.chunks(stride.max(1)).take(dims[0]).map(|c| to_tensor(&[h, w, 1], c)).collect::<AppResult<_>>()?;
    let labels = labels_checked(lb, 8, classes)?;
    Ok(Dataset::new(&[h, w, 1], classes, images, labels)?)
}

fn to_tensor(shape: &[usize], bytes: &[u8]) -> AppResult<Tensor> {
    Ok(Tensor::from_vec(shape, bytes.iter().map(|&b| pixel(b)).collect())?)
}

fn labels_checked(bytes: &[u8], base: usize, classes: usize) -> AppResult<Vec<usize>> {
    bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if (b as usize) < classes {
                Ok(b as usize)
            } else {
                Err(format_err(base + i, format!("label {} exceeds {} classes", b, classes)))
            }
        })
        .collect()
}

pub const CIFAR_RECORD: usize = 1 + 3072;

/// CIFAR-10 binary batches: each record is a label byte followed by the
/// red, green and blue 32x32 planes. Converted to `[32, 32, 3]` HWC.
pub fn decode_cifar(bytes: &[u8], classes: usize) -> AppResult<Dataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD) {
        let tail = bytes.len() - bytes.len() % CIFAR_RECORD;
        return Err(format_err(tail, format!("trailing partial record of {} bytes", bytes.len() - tail)));
    }
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD);
    let mut labels = Vec::with_capacity(images.capacity());
    for (r, rec) in bytes.chunks(CIFAR_RECORD).enumerate() {
        let at = r * CIFAR_RECORD;
        labels.extend(labels_checked(&rec[..1], at, classes)?);
        let planes = &rec[1..];
        let mut hwc = vec![0.0; 3072];
        for c in 0..3 {
            for p in 0..1024 {
                hwc[p * 3 + c] = pixel(planes[c * 1024 + p]);
            }
        }
        images.push(Tensor::from_vec(&[32, 32, 3], hwc)?);
    }
    Ok(Dataset::new(&[32, 32, 3], classes, images, labels)?)
}

/// CSV layout: a `# shape: HxWxC` line, then one `label,p0,p1,...` row per
/// image with pixels as integers 0..=255 in HWC order.
pub fn decode_csv(text: &str, classes: usize) -> AppResult<Dataset> {
    let header_end = text.find('\n').unwrap_or(text.len());
    let header = text[..header_end].trim();
    let spec = header
        .strip_prefix("# shape:")
        .ok_or_else(|| format_err(0, "first line must be '# shape: HxWxC'"))?;
    let shape: Vec<usize> = spec
        .trim()
        .split('x')
        .map(|d| d.trim().parse::<usize>().map_err(|_| format_err(0, format!("bad shape '{}'", spec.trim()))))
        .collect::<AppResult<_>>()?;
    if shape.len() != 3 || shape.contains(&0) {
        return Err(format_err(0, format!("shape {:?} must have three positive axes", shape)));
    }
    let n: usize = shape.iter().product();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut offset = (header_end + 1).min(text.len());
    for line in text[offset..].split_inclusive('\n') {
        let row = line.trim_end_matches(['\n', '\r']);
        if !row.trim().is_empty() {
            let mut field_at = offset;
            let mut values = Vec::with_capacity(n + 1);
            for field in row.split(',') {
                let v: u8 = field
                    .trim()
                    .parse()
                    .map_err(|_| format_err(field_at, format!("'{}' is not an integer in 0..=255", field.trim())))?;
                values.push(v);
                field_at += field.len() + 1;
            }
            if values.len() != n + 1 {
                return Err(format_err(offset, format!("row has {} pixels, shape needs {}", values.len() - 1, n)));
            }
            labels.extend(labels_checked(&values[..1], offset, classes)?);
            images.push(to_tensor(&shape, &values[1..])?);
        }
        offset += line.len();
    }
    Ok(Dataset::new(&shape, classes, images, labels)?)
}

/// Writes `data` in the CSV layout; pixels are rounded to bytes.
pub fn encode_csv(data: &Dataset) -> String {
    let s = &data.shape;
    let mut out = format!("# shape: {}x{}x{}\n", s[0], s[1], s[2]);
    for (x, y) in data.images.iter().zip(&data.labels) {
        out.push_str(&y.to_string());
        for v in x.data() {
            out.push(',');
            out.push_str(&((v * 255.0).round() as u8).to_string());
        }
        out.push('\n');
    }
    out
}

/// Loads a dataset from disk. `labels` is required for IDX only.
pub fn ingest(path: &Path, labels: Option<&Path>, format: DataFormat, classes: usize) -> AppResult<Dataset> {
    match format {
        DataFormat::Idx => {
            let labels = labels.ok_or_else(|| AppError::Config("IDX data needs a labels file".into()))?;
            decode_idx(&read(path)?, &read(labels)?, classes)
        }
        DataFormat::CifarBinary => decode_cifar(&read(path)?, classes),
        DataFormat::Csv => {
            let bytes = read(path)?;
            let text = std::str::from_utf8(&bytes).map_err(|e| format_err(e.valid_up_to(), "not UTF-8"))?;
            decode_csv(text, classes)
        }
        DataFormat::Synthetic => Err(AppError::Config("synthetic data is generated, not read".into())),
    }
}
