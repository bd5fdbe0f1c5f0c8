//! Big-endian IDX image (`0x00000803`) and label (`0x00000801`) files.

use std::fs;
use std::path::Path;

use super::dataset::LabeledDataset;
use crate::error::{Error, IdxError, Result};
use crate::numeric::Matrix;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

struct Cursor<'a> {
    file: &'static str,
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn u32(&mut self, field: &'static str) -> std::result::Result<u32, IdxError> {
        let head = self.take(4, field)?;
        Ok(u32::from_be_bytes([head[0], head[1], head[2], head[3]]))
    }

    fn take(&mut self, n: usize, field: &'static str) -> std::result::Result<&'a [u8], IdxError> {
        if self.bytes.len() < n {
            return Err(IdxError::Truncated {
                file: self.file,
                field,
            });
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }
}

fn expect_magic(cur: &mut Cursor<'_>, expected: u32) -> std::result::Result<(), IdxError> {
    let found = cur.u32("magic")?;
    if found != expected {
        return Err(IdxError::BadMagic {
            file: cur.file,
            expected,
            found,
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> std::result::Result<IdxImages, IdxError> {
    let file = "images";
    let mut cur = Cursor { file, bytes };
    expect_magic(&mut cur, IMAGE_MAGIC)?;
    let count = cur.u32("item count")? as usize;
    let rows = cur.u32("row count")? as usize;
    let cols = cur.u32("column count")? as usize;
    if rows == 0 {
        return Err(IdxError::BadDimension { file, field: "row count" });
    }
    if cols == 0 {
        return Err(IdxError::BadDimension { file, field: "column count" });
    }
    let len = count
        .checked_mul(rows)
        .and_then(|x| x.checked_mul(cols))
        .ok_or(IdxError::BadDimension { file, field: "item count" })?;
    let pixels = cur.take(len, "pixel data")?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> std::result::Result<Vec<u8>, IdxError> {
    let mut cur = Cursor {
        file: "labels",
        bytes,
    };
    expect_magic(&mut cur, LABEL_MAGIC)?;
    let count = cur.u32("item count")? as usize;
    Ok(cur.take(count, "label data")?.to_vec())
}

/// Pairs decoded image and label files into a dataset; pixels are scaled
/// to `[0, 1]` and the class count is `max label + 1`.
pub fn decode_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledDataset> {
    let images = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if images.count != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.count,
            labels: labels.len(),
        }
        .into());
    }
    let dim = images.rows * images.cols;
    let data = images.pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    LabeledDataset::new(Matrix::from_vec(images.count, dim, data)?, labels, classes)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    decode_idx(&fs::read(images_path)?, &fs::read(labels_path)?)
}

/// Encodes inputs as an `N × rows × cols` image file. Values are clamped to
/// `[0, 1]` and quantized to bytes.
pub fn encode_idx_images(inputs: &Matrix, rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != inputs.cols() || rows == 0 {
        return Err(Error::invalid(format!(
            "{rows}x{cols} images cannot hold {} values per row",
            inputs.cols()
        )));
    }
    let count = u32::try_from(inputs.rows()).map_err(|_| Error::invalid("too many images"))?;
    let mut out = Vec::with_capacity(16 + inputs.as_slice().len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    out.extend(
        inputs
            .as_slice()
            .iter()
            .map(|&x| (x.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let count = u32::try_from(labels.len()).map_err(|_| Error::invalid("too many labels"))?;
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    for &y in labels {
        out.push(u8::try_from(y).map_err(|_| Error::invalid(format!("label {y} exceeds 255")))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_images() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        b.extend_from_slice(&[0, 1, 2, 3, 255, 254, 253, 252]);
        b
    }

    fn two_labels() -> Vec<u8> {
        vec![0, 0, 8, 1, 0, 0, 0, 2, 0, 1]
    }

    #[test]
    fn decodes_handcrafted_files() {
        let ds = decode_idx(&two_images(), &two_labels()).unwrap();
        assert_eq!(ds.inputs().row(0), &[0.0, 1.0 / 255.0, 2.0 / 255.0, 3.0 / 255.0]);
        assert_eq!(ds.inputs().row(1)[0], 1.0);
        assert_eq!(ds.labels(), &[0, 1]);
        assert_eq!(ds.class_counts(), &[1, 1]);
    }

    #[test]
    fn bad_magic() {
        let mut b = two_images();
        b[..4].copy_from_slice(&0xDEAD_BEEFu32.to_be_bytes());
        assert_eq!(
            parse_idx_images(&b),
            Err(IdxError::BadMagic {
                file: "images",
                expected: IMAGE_MAGIC,
                found: 0xDEAD_BEEF
            })
        );
        assert!(matches!(
            parse_idx_labels(&two_images()),
            Err(IdxError::BadMagic { file: "labels", .. })
        ));
    }

    #[test]
    fn count_mismatch() {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0, 1];
        b.extend_from_slice(&[1, 2, 3]);
        let err = decode_idx(&b, &two_labels()).unwrap_err();
        assert!(matches!(
            err,
            Error::Idx(IdxError::CountMismatch { images: 3, labels: 2 })
        ));
    }

    #[test]
    fn truncation_names_the_field() {
        let b = two_images();
        assert_eq!(
            parse_idx_images(&b[..10]),
            Err(IdxError::Truncated { file: "images", field: "row count" })
        );
        assert_eq!(
            parse_idx_images(&b[..b.len() - 1]),
            Err(IdxError::Truncated { file: "images", field: "pixel data" })
        );
        assert_eq!(
            parse_idx_labels(&two_labels()[..9]),
            Err(IdxError::Truncated { file: "labels", field: "label data" })
        );
    }

    #[test]
    fn huge_header_does_not_allocate() {
        let b = vec![0, 0, 8, 3, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0, 0, 0, 9];
        assert!(parse_idx_images(&b).is_err());
    }

    #[test]
    fn encode_then_decode() {
        let ds = decode_idx(&two_images(), &two_labels()).unwrap();
        let img = encode_idx_images(ds.inputs(), 2, 2).unwrap();
        let lab = encode_idx_labels(ds.labels()).unwrap();
        assert_eq!(img, two_images());
        assert_eq!(lab, two_labels());
        assert!(encode_idx_labels(&[300]).is_err());
    }
}
