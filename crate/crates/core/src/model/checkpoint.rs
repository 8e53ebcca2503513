//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"AGGNETv1"
//! u32  header length in bytes
//! header: canonical JSON (sorted keys, no whitespace)
//! f64 × param_count: every tensor in declaration order
//! u32  CRC-32 of everything after the magic and before the checksum
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{AggNetConfig, Variant};
use super::labels::ClassSet;
use super::params::{AggNetParams, LayerSpecs, Layers};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"AGGNETv1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    branch_depths: [usize; 4],
    class_count: usize,
    class_names: Vec<String>,
    epoch: usize,
    history_len: usize,
    input_channels: usize,
    module_depths: [usize; 4],
    param_count: usize,
    seed: u64,
    stem_depth: usize,
    variant: Variant,
}

/// Trained (or freshly initialised) network with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: AggNetConfig,
    pub classes: ClassSet,
    pub params: AggNetParams,
    pub seed: u64,
    /// 1-based epoch the weights were taken from (0 = untrained).
    pub epoch: usize,
    pub history_len: usize,
}

impl Checkpoint {
    pub fn new(config: AggNetConfig, classes: ClassSet, params: AggNetParams, seed: u64) -> Result<Self> {
        if classes.len() != config.class_count {
            return Err(Error::Checkpoint(format!(
                "{} class names for a {}-class network",
                classes.len(),
                config.class_count
            )));
        }
        params.check_shapes(&config)?;
        Ok(Self {
            config,
            classes,
            params,
            seed,
            epoch: 0,
            history_len: 0,
        })
    }

    fn header(&self) -> Header {
        Header {
            branch_depths: self.config.branch_depths,
            class_count: self.config.class_count,
            class_names: self.classes.names().to_vec(),
            epoch: self.epoch,
            history_len: self.history_len,
            input_channels: self.config.input_channels,
            module_depths: self.config.module_depths,
            param_count: self.params.param_count(),
            seed: self.seed,
            stem_depth: self.config.stem_depth,
            variant: self.config.variant,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        // Value maps are BTreeMap-backed, so keys come out sorted.
        let value = serde_json::to_value(self.header()).expect("header serialises");
        let header = serde_json::to_string(&value).expect("header serialises");
        let mut payload = Vec::with_capacity(4 + header.len() + 8 * self.params.param_count());
        payload.extend_from_slice(&(header.len() as u32).to_le_bytes());
        payload.extend_from_slice(header.as_bytes());
        for (t, _) in self.params.iter() {
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&payload);
        let mut out = Vec::with_capacity(8 + payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 8 + 4 + 4 || &bytes[..8] != MAGIC {
            return Err(bad("missing AGGNETv1 magic"));
        }
        let payload = &bytes[8..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        if crc32fast::hash(payload) != stored {
            return Err(bad("checksum mismatch"));
        }
        let hlen = u32::from_le_bytes(payload[..4].try_into().expect("4 bytes")) as usize;
        let header_bytes = payload.get(4..4 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        let config = AggNetConfig {
            variant: header.variant,
            class_count: header.class_count,
            stem_depth: header.stem_depth,
            module_depths: header.module_depths,
            branch_depths: header.branch_depths,
            input_channels: header.input_channels,
        };
        config.validate()?;
        let classes = ClassSet::new(header.class_names.clone())?;
        let mut body = &payload[4 + hlen..];
        if body.len() != 8 * header.param_count {
            return Err(bad("parameter payload length does not match header"));
        }
        let shapes = LayerSpecs::new(&config).shapes();
        let mut tensors = Vec::new();
        for (shape, _) in shapes.iter() {
            let n: usize = shape.iter().product();
            if body.len() < 8 * n {
                return Err(bad("parameter payload shorter than the configuration implies"));
            }
            let data = body[..8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            body = &body[8 * n..];
            tensors.push(Tensor::new(shape.clone(), data)?);
        }
        if !body.is_empty() {
            return Err(bad("parameter payload longer than the configuration implies"));
        }
        let params: AggNetParams = Layers::from_ordered(tensors)?;
        Ok(Self {
            config,
            classes,
            params,
            seed: header.seed,
            epoch: header.epoch,
            history_len: header.history_len,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
