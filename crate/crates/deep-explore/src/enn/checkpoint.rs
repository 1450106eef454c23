//! Checkpoint format: a 4-byte magic, a length-prefixed JSON shape header,
//! then all parameters as little-endian doubles in declaration order
//! (per layer: weights row-major, then bias).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::DenseNet;

use super::{EnsembleParams, EpinetParams};

const MAGIC: &[u8; 4] = b"ENNC";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct DenseShape {
    sizes: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelShape {
    Dense { net: DenseShape },
    Ensemble { particles: usize, prior_scale: f64, net: DenseShape },
    Epinet { d_z: usize, prior_scale: f64, trunk: DenseShape, head: DenseShape },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    model: ModelShape,
    meta: serde_json::Value,
}

/// A parameter set that can live in a checkpoint file.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Dense(DenseNet),
    Ensemble(EnsembleParams),
    Epinet(EpinetParams),
}

impl SavedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SavedModel::Dense(_) => "dense",
            SavedModel::Ensemble(_) => "ensemble",
            SavedModel::Epinet(_) => "epinet",
        }
    }
}

fn push_net(payload: &mut Vec<f64>, net: &DenseNet) {
    for layer in net.layers() {
        payload.extend_from_slice(&layer.weights);
        payload.extend_from_slice(&layer.bias);
    }
}

fn pop_net(payload: &[f64], cursor: &mut usize, sizes: &[usize]) -> Result<DenseNet> {
    let mut net = DenseNet::zeros(sizes)?;
    for layer in net.layers_mut() {
        let need = layer.weights.len() + layer.bias.len();
        if *cursor + need > payload.len() {
            return Err(Error::validation("checkpoint payload shorter than its header claims"));
        }
        let w_len = layer.weights.len();
        layer.weights.copy_from_slice(&payload[*cursor..*cursor + w_len]);
        *cursor += w_len;
        let b_len = layer.bias.len();
        layer.bias.copy_from_slice(&payload[*cursor..*cursor + b_len]);
        *cursor += b_len;
    }
    Ok(net)
}

/// Serializes a model plus arbitrary JSON metadata to a writer.
pub fn write_checkpoint<W: Write>(
    mut w: W,
    model: &SavedModel,
    meta: &serde_json::Value,
) -> Result<()> {
    let (shape, payload) = match model {
        SavedModel::Dense(net) => {
            let mut payload = Vec::with_capacity(net.param_count());
            push_net(&mut payload, net);
            (ModelShape::Dense { net: DenseShape { sizes: net.layer_sizes() } }, payload)
        }
        SavedModel::Ensemble(ens) => {
            let mut payload = Vec::new();
            for z in 0..ens.particles() {
                push_net(&mut payload, ens.base(z));
            }
            for z in 0..ens.particles() {
                push_net(&mut payload, ens.prior(z));
            }
            (
                ModelShape::Ensemble {
                    particles: ens.particles(),
                    prior_scale: ens.prior_scale(),
                    net: DenseShape { sizes: ens.base(0).layer_sizes() },
                },
                payload,
            )
        }
        SavedModel::Epinet(epi) => {
            let mut payload = Vec::new();
            push_net(&mut payload, epi.trunk());
            push_net(&mut payload, epi.head());
            push_net(&mut payload, epi.prior_head());
            (
                ModelShape::Epinet {
                    d_z: epi.d_z(),
                    prior_scale: epi.prior_scale(),
                    trunk: DenseShape { sizes: epi.trunk().layer_sizes() },
                    head: DenseShape { sizes: epi.head().layer_sizes() },
                },
                payload,
            )
        }
    };
    let header = Header { format_version: FORMAT_VERSION, model: shape, meta: meta.clone() };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::validation(format!("header encode: {e}")))?;
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for x in payload {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a checkpoint back; the inverse of [`write_checkpoint`].
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(SavedModel, serde_json::Value)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::validation("not a checkpoint file (bad magic)"));
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::validation(format!("header decode: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::validation(format!(
            "unsupported checkpoint format version {}",
            header.format_version
        )));
    }
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() % 8 != 0 {
        return Err(Error::validation("checkpoint payload is not a whole number of doubles"));
    }
    let payload: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    let mut cursor = 0usize;
    let model = match header.model {
        ModelShape::Dense { net } => SavedModel::Dense(pop_net(&payload, &mut cursor, &net.sizes)?),
        ModelShape::Ensemble { particles, prior_scale, net } => {
            let base: Vec<DenseNet> = (0..particles)
                .map(|_| pop_net(&payload, &mut cursor, &net.sizes))
                .collect::<Result<_>>()?;
            let priors: Vec<DenseNet> = (0..particles)
                .map(|_| pop_net(&payload, &mut cursor, &net.sizes))
                .collect::<Result<_>>()?;
            SavedModel::Ensemble(EnsembleParams::from_parts(base, priors, prior_scale)?)
        }
        ModelShape::Epinet { d_z, prior_scale, trunk, head } => {
            let trunk = pop_net(&payload, &mut cursor, &trunk.sizes)?;
            let learnable = pop_net(&payload, &mut cursor, &head.sizes)?;
            let prior = pop_net(&payload, &mut cursor, &head.sizes)?;
            SavedModel::Epinet(EpinetParams::from_parts(trunk, learnable, prior, prior_scale, d_z)?)
        }
    };
    if cursor != payload.len() {
        return Err(Error::validation("checkpoint payload longer than its header claims"));
    }
    Ok((model, header.meta))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &SavedModel,
    meta: &serde_json::Value,
) -> Result<()> {
    let file = File::create(path)?;
    write_checkpoint(BufWriter::new(file), model, meta)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(SavedModel, serde_json::Value)> {
    let file = File::open(path)?;
    read_checkpoint(BufReader::new(file))
}
