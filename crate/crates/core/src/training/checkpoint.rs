//! Versioned checkpoint container.
//!
//! Layout: magic `SFCK`, format version (u32 LE), header length (u64 LE),
//! JSON header, then raw f64 LE data: every tensor of the parameter store in
//! header order, followed by the Adam first and second moments of every
//! tensor when optimizer state is present. Readers accept any version up to
//! [`FORMAT_VERSION`] and ignore unknown header fields.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::models::{AnyModel, ModelKind};
use crate::nn::{Adam, AdamConfig, Mat};

use super::TrainConfig;

pub const MAGIC: &[u8; 4] = b"SFCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: [usize; 2],
    trainable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct OptimizerInfo {
    config: AdamConfig,
    step: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    #[serde(default)]
    profile: Option<String>,
    model_seed: u64,
    model_config: serde_json::Value,
    step: usize,
    tensors: Vec<TensorInfo>,
    #[serde(default)]
    optimizer: Option<OptimizerInfo>,
    #[serde(default)]
    train_config: Option<TrainConfig>,
}

/// A model with its training position.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: AnyModel,
    pub model_seed: u64,
    pub step: usize,
    pub profile: Option<String>,
    pub optimizer: Option<Adam>,
    pub train_config: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn new(model: AnyModel, model_seed: u64) -> Self {
        Checkpoint {
            model,
            model_seed,
            step: 0,
            profile: None,
            optimizer: None,
            train_config: None,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let store = self.model.store();
        let tensors = store
            .ids()
            .map(|id| {
                let (r, c) = store.value(id).dim();
                TensorInfo {
                    name: store.name(id).to_string(),
                    shape: [r, c],
                    trainable: store.is_trainable(id),
                }
            })
            .collect();
        let header = Header {
            kind: self.model.kind(),
            profile: self.profile.clone(),
            model_seed: self.model_seed,
            model_config: self.model.config_json(),
            step: self.step,
            tensors,
            optimizer: self.optimizer.as_ref().map(|a| OptimizerInfo {
                config: a.config,
                step: a.step,
            }),
            train_config: self.train_config.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |m: &Mat| {
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        for id in store.ids() {
            put(store.value(id));
        }
        if let Some(a) = &self.optimizer {
            a.m.iter().for_each(&mut put);
            a.v.iter().for_each(&mut put);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |d: String| Error::parse(origin, d);
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version == 0 || version > FORMAT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| bad(format!("header: {e}")))?;
        let mut model = AnyModel::from_config_json(header.kind, &header.model_config, header.model_seed)?;
        let mut data = &bytes[16 + hlen..];
        let mut take = |shape: (usize, usize)| -> Result<Mat> {
            let n = shape.0 * shape.1 * 8;
            if data.len() < n {
                return Err(bad("truncated tensor data".into()));
            }
            let vals = data[..n].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            data = &data[n..];
            Ok(Mat::from_shape_vec(shape, vals).expect("shape"))
        };
        let store = model.store_mut();
        if store.len() != header.tensors.len() {
            return Err(bad(format!(
                "checkpoint has {} tensors, model expects {}",
                header.tensors.len(),
                store.len()
            )));
        }
        let ids: Vec<_> = store.ids().collect();
        for (id, info) in ids.iter().zip(&header.tensors) {
            let shape = (info.shape[0], info.shape[1]);
            if store.name(*id) != info.name || store.value(*id).dim() != shape {
                return Err(bad(format!("tensor {} does not match model layout", info.name)));
            }
            *store.value_mut(*id) = take(shape)?;
        }
        let optimizer = match header.optimizer {
            Some(info) => {
                let mut adam = Adam::new(store, info.config);
                adam.step = info.step;
                for (i, t) in header.tensors.iter().enumerate() {
                    adam.m[i] = take((t.shape[0], t.shape[1]))?;
                }
                for (i, t) in header.tensors.iter().enumerate() {
                    adam.v[i] = take((t.shape[0], t.shape[1]))?;
                }
                Some(adam)
            }
            None => None,
        };
        Ok(Checkpoint {
            model,
            model_seed: header.model_seed,
            step: header.step,
            profile: header.profile,
            optimizer,
            train_config: header.train_config,
        })
    }

    /// Atomic write.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Config(format!("checkpoint {} not found", path.display())),
            _ => Error::io(path, e),
        })?;
        Self::from_bytes(&bytes, path)
    }
}
