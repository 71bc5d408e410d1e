//! Binary checkpoint format (version 1). All integers and floats are little-endian.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "ACAV"
//! 4       4           u32 format version (1)
//! 8       4           u32 input rank R
//! 12      4*R         u32 input dimensions
//!         4           u32 penultimate layer index
//!         4           u32 penultimate layer width
//!         4           u32 layer count L
//!         24*L        layer table: u32 kind + five u32 fields
//!                       kind 0 conv2d  [in_channels, out_channels, kernel_h, kernel_w, padding]
//!                       kind 1 relu, 2 maxpool2x2, 3 flatten, 5 softmax  [0, 0, 0, 0, 0]
//!                       kind 4 dense   [inputs, outputs, 0, 0, 0]
//!         8           u64 training seed
//!         4           u32 epochs trained
//!         8           f64 final mean loss (NaN when untrained)
//!         32          config hash (SHA-256; all zero when absent)
//!         8           u64 parameter count P
//!         4*P         f32 parameters, layer by layer, weight tensor then bias
//! ```
//! Trailing bytes after the parameter block are a format error.

use std::path::Path;

use super::layer::{Layer, LayerSpec};
use super::model::Model;
use crate::error::{AcavError, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ACAV";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: u32,
    pub final_loss: Option<f64>,
    pub config_hash: Option<[u8; 32]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub metadata: TrainingMetadata,
    pub penultimate_width: usize,
}

impl Checkpoint {
    pub fn new(model: Model<f32>, metadata: TrainingMetadata) -> Result<Self> {
        let penultimate_width = model.layer_width(model.penultimate_index())?;
        Ok(Self {
            model,
            metadata,
            penultimate_width,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let model = &self.model;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, model.input_shape().len() as u32);
        for &d in model.input_shape() {
            put_u32(&mut out, d as u32);
        }
        put_u32(&mut out, model.penultimate_index() as u32);
        put_u32(&mut out, self.penultimate_width as u32);
        put_u32(&mut out, model.layers().len() as u32);
        for layer in model.layers() {
            let (kind, fields) = encode_spec(&layer.spec);
            put_u32(&mut out, kind);
            for f in fields {
                put_u32(&mut out, f);
            }
        }
        let meta = &self.metadata;
        out.extend_from_slice(&meta.seed.to_le_bytes());
        put_u32(&mut out, meta.epochs);
        out.extend_from_slice(&meta.final_loss.unwrap_or(f64::NAN).to_le_bytes());
        out.extend_from_slice(&meta.config_hash.unwrap_or([0; 32]));
        out.extend_from_slice(&(model.parameter_count() as u64).to_le_bytes());
        for p in model.layers().iter().flat_map(|l| &l.params) {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(AcavError::Format("missing ACAV magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(AcavError::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(AcavError::Format(format!("implausible input rank {rank}")));
        }
        let input_shape = (0..rank)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let penultimate_index = r.u32()? as usize;
        let penultimate_width = r.u32()? as usize;
        let layer_count = r.u32()? as usize;
        if layer_count == 0 || layer_count > 4096 {
            return Err(AcavError::Format(format!(
                "implausible layer count {layer_count}"
            )));
        }
        let mut specs = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            let kind = r.u32()?;
            let mut fields = [0u32; 5];
            for f in &mut fields {
                *f = r.u32()?;
            }
            specs.push(decode_spec(kind, fields)?);
        }
        let seed = r.u64()?;
        let epochs = r.u32()?;
        let loss = f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let param_count = r.u64()? as usize;

        let mut layers = Vec::with_capacity(layer_count);
        let mut read = 0usize;
        for spec in specs {
            let mut params = Vec::new();
            for shape in spec.param_shapes() {
                let len: usize = shape.iter().product();
                read += len;
                if read > param_count {
                    return Err(AcavError::Format(
                        "parameter block shorter than the layer table requires".into(),
                    ));
                }
                let raw = r.take(len * 4)?;
                let data = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect();
                params.push(Tensor::new(shape, data)?);
            }
            layers.push(Layer { spec, params });
        }
        if read != param_count {
            return Err(AcavError::Format(format!(
                "header declares {param_count} parameters, layer table implies {read}"
            )));
        }
        if r.pos != bytes.len() {
            return Err(AcavError::Format(format!(
                "{} trailing bytes after parameter block",
                bytes.len() - r.pos
            )));
        }

        let model = Model::from_layers(input_shape, layers)
            .map_err(|e| AcavError::Format(format!("layer table is inconsistent: {e}")))?;
        if model.penultimate_index() != penultimate_index {
            return Err(AcavError::Format(format!(
                "recorded penultimate index {penultimate_index} disagrees with layer table ({})",
                model.penultimate_index()
            )));
        }
        let checkpoint = Checkpoint::new(
            model,
            TrainingMetadata {
                seed,
                epochs,
                final_loss: (!loss.is_nan()).then_some(loss),
                config_hash: (hash != [0; 32]).then_some(hash),
            },
        )?;
        if checkpoint.penultimate_width != penultimate_width {
            return Err(AcavError::Format(format!(
                "recorded penultimate width {penultimate_width} disagrees with layer table ({})",
                checkpoint.penultimate_width
            )));
        }
        Ok(checkpoint)
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint.to_bytes()).map_err(|e| AcavError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| AcavError::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn encode_spec(spec: &LayerSpec) -> (u32, [u32; 5]) {
    match *spec {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel_height,
            kernel_width,
            padding,
        } => (
            0,
            [
                in_channels as u32,
                out_channels as u32,
                kernel_height as u32,
                kernel_width as u32,
                padding as u32,
            ],
        ),
        LayerSpec::Relu => (1, [0; 5]),
        LayerSpec::Maxpool2x2 => (2, [0; 5]),
        LayerSpec::Flatten => (3, [0; 5]),
        LayerSpec::Dense { inputs, outputs } => (4, [inputs as u32, outputs as u32, 0, 0, 0]),
        LayerSpec::Softmax => (5, [0; 5]),
    }
}

fn decode_spec(kind: u32, f: [u32; 5]) -> Result<LayerSpec> {
    let u = |i: usize| f[i] as usize;
    Ok(match kind {
        0 => LayerSpec::Conv2d {
            in_channels: u(0),
            out_channels: u(1),
            kernel_height: u(2),
            kernel_width: u(3),
            padding: u(4),
        },
        1 => LayerSpec::Relu,
        2 => LayerSpec::Maxpool2x2,
        3 => LayerSpec::Flatten,
        4 => LayerSpec::Dense {
            inputs: u(0),
            outputs: u(1),
        },
        5 => LayerSpec::Softmax,
        other => return Err(AcavError::Format(format!("unknown layer kind {other}"))),
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| AcavError::Format(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
