use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::AblationFlags;
use crate::ann::{LayerSpec, Network, TrainConfig};
use crate::convert::{verify_convertibility, ConvertReport};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"TTFSCNT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub layers: Vec<LayerSpec>,
    pub train_config: Option<TrainConfig>,
    pub seed: u64,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub flags: Option<AblationFlags>,
    /// Largest `|Σw − 1|` per parameterized layer at save time.
    pub max_weight_sum_deviation: Vec<f64>,
    pub param_counts: Vec<usize>,
    /// SHA-256 of the parameter blob, hex encoded.
    pub checksum: String,
}

/// Provenance stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelMeta {
    pub train_config: Option<TrainConfig>,
    pub seed: u64,
    pub preset: Option<String>,
    pub flags: Option<AblationFlags>,
}

#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub network: Network,
    pub header: ModelHeader,
    /// Convertibility audit re-run on the loaded weights.
    pub audit: ConvertReport,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Length-prefixed container: magic, JSON header, little-endian `f64` blob.
pub fn encode_model(net: &Network, meta: &ModelMeta) -> Result<Vec<u8>> {
    let mut blob = Vec::with_capacity(net.param_count() * 8);
    for w in net.weights() {
        for v in w.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let per_layer = net.weight_sum_deviations();
    let header = ModelHeader {
        format_version: FORMAT_VERSION,
        layers: net.layers().to_vec(),
        train_config: meta.train_config.clone(),
        seed: meta.seed,
        preset: meta.preset.clone(),
        flags: meta.flags,
        max_weight_sum_deviation: per_layer,
        param_counts: net.weights().iter().map(Tensor::len).collect(),
        checksum: sha256_hex(&blob),
    };
    let header = serde_json::to_vec_pretty(&header)?;
    let mut out = Vec::with_capacity(8 + 16 + header.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(&blob);
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], offset: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    let end = offset.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| Error::Format {
        offset: *offset,
        message: format!("truncated {what}"),
    })?;
    let out = &bytes[*offset..end];
    *offset = end;
    Ok(out)
}

fn take_len(bytes: &[u8], offset: &mut usize, what: &str) -> Result<usize> {
    let raw = take(bytes, offset, 8, what)?;
    Ok(u64::from_le_bytes(raw.try_into().expect("8 bytes")) as usize)
}

pub fn decode_model(bytes: &[u8]) -> Result<LoadedModel> {
    let mut off = 0;
    if take(bytes, &mut off, 8, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: "not a model container".into(),
        });
    }
    let header_len = take_len(bytes, &mut off, "header length")?;
    let header_start = off;
    let header: ModelHeader =
        serde_json::from_slice(take(bytes, &mut off, header_len, "header")?).map_err(|e| Error::Format {
            offset: header_start,
            message: format!("bad header: {e}"),
        })?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Version(header.format_version));
    }
    let blob_len = take_len(bytes, &mut off, "blob length")?;
    let blob_start = off;
    let blob = take(bytes, &mut off, blob_len, "parameter blob")?;
    let actual = sha256_hex(blob);
    if actual != header.checksum {
        return Err(Error::Checksum {
            expected: header.checksum.clone(),
            actual,
        });
    }
    let declared: usize = header.param_counts.iter().sum();
    if declared * 8 != blob_len {
        return Err(Error::Format {
            offset: blob_start,
            message: format!("blob holds {blob_len} bytes but header declares {declared} parameters"),
        });
    }
    let mut values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut weights = Vec::new();
    for (spec, &count) in header
        .layers
        .iter()
        .filter_map(|l| l.param_shape().map(|s| (s, l)))
        .map(|(s, _)| s)
        .zip(&header.param_counts)
    {
        if spec.iter().product::<usize>() != count {
            return Err(Error::Format {
                offset: blob_start,
                message: format!("parameter count {count} does not match shape {spec:?}"),
            });
        }
        weights.push(Tensor::new(spec, values.by_ref().take(count).collect())?);
    }
    let network = Network::with_weights(header.layers.clone(), weights)?;
    let audit = verify_convertibility(&network);
    Ok(LoadedModel { network, header, audit })
}

pub fn save_model(path: &Path, net: &Network, meta: &ModelMeta) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_model(net, meta)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
