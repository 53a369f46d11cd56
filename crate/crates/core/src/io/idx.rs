use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES: u32 = 0x0000_0803;
pub const IDX_LABELS: u32 = 0x0000_0801;

/// Raw contents of an IDX file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxData {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub bytes: Vec<u8>,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset,
            message: "truncated header".into(),
        })
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = read_u32(bytes, 0)?;
    let rank = match magic {
        IDX_IMAGES => 3,
        IDX_LABELS => 1,
        other => {
            return Err(Error::Format {
                offset: 0,
                message: format!("unsupported magic {other:#010x}"),
            })
        }
    };
    let dims = (0..rank)
        .map(|i| read_u32(bytes, 4 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * rank;
    let len: usize = dims.iter().product();
    if bytes.len() < start + len {
        return Err(Error::Format {
            offset: bytes.len(),
            message: format!("payload truncated: expected {len} bytes after offset {start}"),
        });
    }
    Ok(IdxData {
        magic,
        dims,
        bytes: bytes[start..start + len].to_vec(),
    })
}

/// Images come back scaled to [0, 1]; labels keep their byte values.
pub fn load_idx(path: &Path) -> Result<Tensor> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let idx = parse_idx(&raw)?;
    let scale = if idx.magic == IDX_IMAGES { 1.0 / 255.0 } else { 1.0 };
    Tensor::new(idx.dims, idx.bytes.iter().map(|&b| b as f64 * scale).collect())
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let idx = parse_idx(&raw)?;
    if idx.magic != IDX_LABELS {
        return Err(Error::Format {
            offset: 0,
            message: "expected a label file".into(),
        });
    }
    Ok(idx.bytes.iter().map(|&b| b as usize).collect())
}

/// Serializes an IDX file; used to build fixtures.
pub fn encode_idx(magic: u32, dims: &[usize], payload: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn images_fixture() {
        let payload: Vec<u8> = (0..4 * 28 * 28).map(|i| (i % 256) as u8).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img");
        std::fs::write(&path, encode_idx(IDX_IMAGES, &[4, 28, 28], &payload)).unwrap();
        let t = load_idx(&path).unwrap();
        assert_eq!(t.shape(), &[4, 28, 28]);
        assert_eq!(t.data()[255], 1.0);
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn labels_fixture() {
        let bytes = encode_idx(IDX_LABELS, &[4], &[3, 1, 4, 1]);
        let idx = parse_idx(&bytes).unwrap();
        assert_eq!(idx.dims, vec![4]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lbl");
        std::fs::write(&path, bytes).unwrap();
        assert_eq!(load_idx(&path).unwrap().shape(), &[4]);
        assert_eq!(load_labels(&path).unwrap(), vec![3, 1, 4, 1]);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = encode_idx(IDX_LABELS, &[4], &[3, 1, 4, 1]);
        bytes[3] = 0x02;
        assert!(matches!(parse_idx(&bytes), Err(Error::Format { offset: 0, .. })));
        let short = encode_idx(IDX_LABELS, &[4], &[3, 1]);
        assert!(matches!(parse_idx(&short), Err(Error::Format { offset: 10, .. })));
        assert!(matches!(parse_idx(&[0, 0]), Err(Error::Format { .. })));
    }
}
