//! Model checkpoints: a JSON metadata block followed by one named tensor
//! section per network parameter, in network order.
//!
//! Layout: `b"KIEB"`, version `u16`, marker `0xC0`, reserved `0`, metadata
//! length `u32` + UTF-8 JSON, section count `u32`, then per section a name
//! length `u16` + name, payload length `u64` + a tensor file.

use std::path::Path;

use kiebm_grad::{Architecture, EnergyNet, LayerParams, ParamTensor, Scalar};
use serde::{Deserialize, Serialize};

use crate::ebm::{Domain, EnergyModel, TrainConfig};
use crate::error::{Error, Result};
use crate::io::tensorfile::{write_atomic, Reader, TensorData, TensorFile, MAGIC, VERSION};
use crate::mri::WeightParams;

const MARKER: u8 = 0xC0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub domain: Domain,
    /// Architecture descriptor, e.g. `in=2;width=64;blocks=PDPD`.
    pub architecture: String,
    pub seed: u64,
    /// Weighting the k-space model was trained with.
    pub weight: Option<WeightParams>,
    /// Divisor applied to image-domain training data.
    pub image_scale: f64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    /// Stored at 32-bit precision.
    pub params: LayerParams<f32>,
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &EnergyModel<T>, meta: CheckpointMeta) -> Result<Self> {
        if meta.domain != model.domain() {
            return Err(Error::Config("checkpoint domain differs from the model's".into()));
        }
        if meta.architecture != model.net.architecture().descriptor() {
            return Err(Error::Config("checkpoint architecture differs from the model's".into()));
        }
        Ok(Self {
            meta,
            params: model.net.params().cast(),
        })
    }

    pub fn to_model<T: Scalar>(&self) -> Result<EnergyModel<T>> {
        let arch = Architecture::parse_descriptor(&self.meta.architecture)?;
        let net = EnergyNet::from_params(arch, self.params.cast())?;
        Ok(EnergyModel::new(net, self.meta.domain))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_vec(&self.meta).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(MARKER);
        out.push(0);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for t in self.params.tensors() {
            let name = t.name.as_bytes();
            if name.len() > u16::MAX as usize {
                return Err(Error::Format(format!("parameter name too long: {}", t.name)));
            }
            let body = TensorFile::new(t.shape.clone(), TensorData::Real32(t.data.clone()))?.to_bytes();
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic, not a KIEB checkpoint".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        if r.u8()? != MARKER {
            return Err(Error::Format("file is a plain tensor, not a checkpoint".into()));
        }
        r.u8()?;
        let meta_len = r.u32()? as usize;
        let meta: CheckpointMeta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))?;
        let count = r.u32()? as usize;
        let mut params = LayerParams::new();
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
                .to_string();
            let len = r.u64()? as usize;
            let t = TensorFile::from_bytes(r.take(len)?)?;
            let TensorData::Real32(data) = t.data().clone() else {
                return Err(Error::Format(format!("parameter {name} is not real32")));
            };
            params.push(ParamTensor {
                name,
                shape: t.dims().to_vec(),
                data,
            });
        }
        if !r.rest().is_empty() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        let ckpt = Self { meta, params };
        ckpt.to_model::<f32>()?;
        Ok(ckpt)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
