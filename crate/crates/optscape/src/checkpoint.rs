//! Bit-exact checkpoint persistence.
//!
//! File layout: one line of JSON metadata (format version, model spec and
//! hash, optimizer label, epoch, seed, layout table, batch-norm running
//! statistics, recorded eval loss), then the binary payload — the 8-byte
//! magic `LSCHKPT1`, a little-endian u64 parameter count, and the parameters
//! as little-endian f64 words. JSON floats use the shortest round-trip
//! encoding, so `load(save(c)) == c` bitwise, running statistics included.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BnLayerStats, BnStats, Model, ModelSpec, ParameterVector};

pub const PAYLOAD_MAGIC: &[u8; 8] = b"LSCHKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutRow {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BnRow {
    mean: Vec<f64>,
    var: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config_hash: String,
    model: ModelSpec,
    optimizer: String,
    epoch: usize,
    master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eval_loss: Option<f64>,
    param_count: usize,
    layout: Vec<LayoutRow>,
    bn_stats: Vec<BnRow>,
}

/// A checkpoint read back from disk, rebound to a freshly built model.
pub struct LoadedCheckpoint {
    pub model: Model,
    pub params: ParameterVector,
    pub bn: BnStats,
    pub optimizer: String,
    pub epoch: usize,
    pub master_seed: u64,
    pub eval_loss: Option<f64>,
    pub config_hash: String,
}

/// Write `params` + provenance. `eval_loss` records the full-dataset eval
/// loss at save time (with refreshed statistics); non-finite values are
/// dropped since JSON cannot carry them.
#[allow(clippy::too_many_arguments)]
pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    params: &ParameterVector,
    bn: &BnStats,
    optimizer: &str,
    epoch: usize,
    master_seed: u64,
    eval_loss: Option<f64>,
) -> Result<()> {
    if params.config_hash() != model.config_hash() {
        return Err(Error::Incompatible("parameters do not belong to this model".into()));
    }
    for (i, layer) in bn.layers.iter().enumerate() {
        for v in layer.mean.iter().chain(&layer.var) {
            if !v.is_finite() {
                return Err(Error::Checkpoint(format!(
                    "non-finite running statistic in batch-norm layer {i}"
                )));
            }
        }
    }
    let header = Header {
        format_version: FORMAT_VERSION,
        config_hash: model.config_hash().to_string(),
        model: model.spec().clone(),
        optimizer: optimizer.to_string(),
        epoch,
        master_seed,
        eval_loss: eval_loss.filter(|l| l.is_finite()),
        param_count: params.len(),
        layout: model
            .layout()
            .entries()
            .iter()
            .map(|e| LayoutRow { name: e.name.clone(), shape: e.shape.clone(), offset: e.offset })
            .collect(),
        bn_stats: bn
            .layers
            .iter()
            .map(|l| BnRow { mean: l.mean.clone(), var: l.var.clone() })
            .collect(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    w.write_all(b"\n")?;
    w.write_all(PAYLOAD_MAGIC)?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Checkpoint("missing header terminator".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Checkpoint(format!("header parse failure: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("truncated payload: missing magic".into()))?;
    if &magic != PAYLOAD_MAGIC {
        return Err(Error::Checkpoint(format!(
            "payload magic mismatch: {:02x?} (expected {PAYLOAD_MAGIC:02x?})",
            magic
        )));
    }
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)
        .map_err(|_| Error::Checkpoint("truncated payload: missing length".into()))?;
    let count = u64::from_le_bytes(len_bytes) as usize;
    if count != header.param_count {
        return Err(Error::Checkpoint(format!(
            "length mismatch: payload claims {count} parameters, header says {}",
            header.param_count
        )));
    }
    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload)
        .map_err(|_| Error::Checkpoint(format!("length mismatch: payload shorter than {count} values")))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("length mismatch: trailing bytes after payload".into()));
    }

    let model = Model::build(header.model.clone())?;
    if model.config_hash() != header.config_hash {
        return Err(Error::Checkpoint(format!(
            "config hash mismatch: header says {}, model spec hashes to {}",
            &header.config_hash[..12],
            &model.config_hash()[..12]
        )));
    }
    if model.param_count() != count {
        return Err(Error::Checkpoint(format!(
            "length mismatch: model expects {} parameters, payload has {count}",
            model.param_count()
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect();
    let params = model.params_from_data(data)?;
    let bn = BnStats {
        layers: header
            .bn_stats
            .iter()
            .map(|row| BnLayerStats { mean: row.mean.clone(), var: row.var.clone() })
            .collect(),
    };
    let expected_bn_layers = model.fresh_bn_stats().layers.len();
    if bn.layers.len() != expected_bn_layers {
        return Err(Error::Checkpoint(format!(
            "{} batch-norm stat blocks for a model with {expected_bn_layers}",
            bn.layers.len()
        )));
    }
    Ok(LoadedCheckpoint {
        model,
        params,
        bn,
        optimizer: header.optimizer,
        epoch: header.epoch,
        master_seed: header.master_seed,
        eval_loss: header.eval_loss,
        config_hash: header.config_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitScheme, ModelSpec};

    fn setup() -> (Model, ParameterVector, BnStats) {
        let model = Model::build(ModelSpec {
            layer_sizes: vec![5, 4, 3],
            batch_norm: vec![true],
            dropout_rate: 0.0,
        })
        .unwrap();
        let params = model.initialize(InitScheme::XavierUniform, 17).unwrap();
        let mut bn = model.fresh_bn_stats();
        for (i, m) in bn.layers[0].mean.iter_mut().enumerate() {
            *m = 0.123456789012345678 + i as f64; // exercises shortest-roundtrip printing
        }
        bn.layers[0].var[2] = 1e-17;
        (model, params, bn)
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let (model, params, bn) = setup();
        save_checkpoint(&path, &model, &params, &bn, "adam", 7, 99, Some(0.125)).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.params.data(), params.data());
        for (a, b) in loaded.bn.layers.iter().zip(&bn.layers) {
            for (x, y) in a.mean.iter().zip(&b.mean) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.var.iter().zip(&b.var) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(loaded.optimizer, "adam");
        assert_eq!(loaded.epoch, 7);
        assert_eq!(loaded.master_seed, 99);
        assert_eq!(loaded.eval_loss, Some(0.125));
        assert_eq!(loaded.config_hash, model.config_hash());
    }

    #[test]
    fn tampered_length_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let (model, params, bn) = setup();
        save_checkpoint(&path, &model, &params, &bn, "sgd", 0, 1, None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // The u64 length sits right after the header newline + 8-byte magic.
        let newline = bytes.iter().position(|&b| b == b'\n').unwrap();
        bytes[newline + 9] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        let err = match load_checkpoint(&path) {
            Err(e) => e,
            Ok(_) => panic!("tampered length accepted"),
        };
        assert!(format!("{err}").contains("length mismatch"), "{err}");
    }

    #[test]
    fn tampered_magic_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let (model, params, bn) = setup();
        save_checkpoint(&path, &model, &params, &bn, "sgd", 0, 1, None).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let newline = bytes.iter().position(|&b| b == b'\n').unwrap();
        bytes[newline + 1] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = match load_checkpoint(&path) {
            Err(e) => e,
            Ok(_) => panic!("tampered magic accepted"),
        };
        assert!(format!("{err}").contains("magic"), "{err}");
    }

    #[test]
    fn truncated_payload_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let (model, params, bn) = setup();
        save_checkpoint(&path, &model, &params, &bn, "sgd", 0, 1, None).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn cross_model_use_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ckpt");
        let (model, params, bn) = setup();
        save_checkpoint(&path, &model, &params, &bn, "sgd", 0, 1, None).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let other = Model::build(ModelSpec {
            layer_sizes: vec![6, 4, 3],
            batch_norm: vec![true],
            dropout_rate: 0.0,
        })
        .unwrap();
        // Binding the loaded parameters to a different spec must fail.
        assert!(other.zero_params().compatible(&loaded.params).is_err());
    }

    #[test]
    fn non_finite_bn_stats_refused_at_save() {
        let dir = tempfile::tempdir().unwrap();
        let (model, params, mut bn) = setup();
        bn.layers[0].var[0] = f64::INFINITY;
        let err =
            save_checkpoint(&dir.path().join("a.ckpt"), &model, &params, &bn, "sgd", 0, 1, None)
                .unwrap_err();
        assert!(format!("{err}").contains("non-finite"));
    }
}
