//! Binary parameter checkpoints with a JSON sidecar.
//!
//! The binary file is little-endian: a `u32` tensor count, then per tensor a
//! `u32` rank and that many `u32` dimensions, then every tensor's `f64`
//! values in row-major order, tensors in header order. The sidecar records
//! what the tensors belong to so they can be loaded without guessing.
//! Both files are written to a temporary name and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Dense;
use crate::policy::{PolicyParams, PolicyShape};
use crate::satisfaction::{RewardModelParams, SatConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn encode_tensors(tensors: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.at + N;
        let chunk = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        self.at = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut r = Reader { bytes, at: 0 };
    let count = r.u32()?;
    let mut dims = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let rank = r.u32()?;
        dims.push((0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?);
    }
    let mut tensors = Vec::with_capacity(dims.len());
    for d in dims {
        let n: usize = d.iter().product();
        let data = (0..n)
            .map(|_| Ok(f64::from_le_bytes(r.take()?)))
            .collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor { dims: d, data });
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    Ok(tensors)
}

fn dense_tensors(layer: &Dense, out: &mut Vec<Tensor>) {
    out.push(Tensor {
        dims: vec![layer.outputs, layer.inputs],
        data: layer.weight.clone(),
    });
    if layer.has_bias() {
        out.push(Tensor {
            dims: vec![layer.outputs],
            data: layer.bias.clone(),
        });
    }
}

fn fill_dense<'a>(layers: impl IntoIterator<Item = &'a mut Dense>, tensors: Vec<Tensor>) -> Result<()> {
    let mut it = tensors.into_iter();
    let mut next = |dims: Vec<usize>| -> Result<Vec<f64>> {
        let t = it.next().ok_or_else(|| Error::Checkpoint("too few tensors".into()))?;
        if t.dims != dims {
            return Err(Error::Checkpoint(format!("tensor shape {:?}, expected {:?}", t.dims, dims)));
        }
        Ok(t.data)
    };
    for layer in layers {
        layer.weight = next(vec![layer.outputs, layer.inputs])?;
        if layer.has_bias() {
            layer.bias = next(vec![layer.outputs])?;
        }
    }
    if it.next().is_some() {
        return Err(Error::Checkpoint("too many tensors".into()));
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_atomic(path, bytes)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Reads the sidecar of `path`, checking that it describes a `kind`.
fn read_meta<T: serde::de::DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_slice(&read_file(&sidecar(path))?)?;
    let found = value.get("kind").and_then(|k| k.as_str()).unwrap_or("unknown artifact");
    if found != kind {
        return Err(Error::Checkpoint(format!("{} holds a {found}, not a {kind}", path.display())));
    }
    Ok(serde_json::from_value(value)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PolicyMeta {
    kind: String,
    shape: PolicyShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RewardModelMeta {
    kind: String,
    context_dim: usize,
    list_dim: usize,
    hidden: usize,
    satisfaction: SatConfig,
}

/// Writes `<path>` (tensors) and `<path>.json` (shape).
pub fn save_policy(path: &Path, params: &PolicyParams) -> Result<()> {
    let mut tensors = Vec::new();
    for (_, layer) in params.layers() {
        dense_tensors(layer, &mut tensors);
    }
    let meta = PolicyMeta {
        kind: "policy".into(),
        shape: params.shape,
    };
    write_file(&sidecar(path), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    write_file(path, &encode_tensors(&tensors))
}

pub fn load_policy(path: &Path) -> Result<PolicyParams> {
    let meta: PolicyMeta = read_meta(path, "policy")?;
    meta.shape.validate()?;
    let mut params = PolicyParams::zeros(meta.shape);
    fill_dense(params.layers_mut(), decode_tensors(&read_file(path)?)?)?;
    Ok(params)
}

/// Writes the input standardization (shift, then scale) followed by the
/// layer tensors.
pub fn save_reward_model(path: &Path, params: &RewardModelParams, satisfaction: &SatConfig) -> Result<()> {
    let input = params.context_dim + params.list_dim;
    let mut tensors = vec![
        Tensor { dims: vec![input], data: params.input_shift.clone() },
        Tensor { dims: vec![input], data: params.input_scale.clone() },
    ];
    for layer in params.layers() {
        dense_tensors(layer, &mut tensors);
    }
    let meta = RewardModelMeta {
        kind: "reward_model".into(),
        context_dim: params.context_dim,
        list_dim: params.list_dim,
        hidden: params.hidden_width(),
        satisfaction: *satisfaction,
    };
    write_file(&sidecar(path), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    write_file(path, &encode_tensors(&tensors))
}

/// Loads a reward model and the satisfaction settings it was trained with.
pub fn load_reward_model(path: &Path) -> Result<(RewardModelParams, SatConfig)> {
    let meta: RewardModelMeta = read_meta(path, "reward_model")?;
    let mut params = RewardModelParams::zeros(meta.context_dim, meta.list_dim, meta.hidden);
    let input = meta.context_dim + meta.list_dim;
    let mut tensors = decode_tensors(&read_file(path)?)?.into_iter();
    for slot in [&mut params.input_shift, &mut params.input_scale] {
        let t = tensors.next().ok_or_else(|| Error::Checkpoint("too few tensors".into()))?;
        if t.dims != [input] {
            return Err(Error::Checkpoint(format!("tensor shape {:?}, expected [{input}]", t.dims)));
        }
        *slot = t.data;
    }
    fill_dense(params.layers_mut(), tensors.collect())?;
    Ok((params, meta.satisfaction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn shape() -> PolicyShape {
        PolicyShape {
            input_dim: 6,
            hidden: 5,
            layers: 2,
            tasks: 3,
            bins: 4,
            relation_dim: 2,
            relation: true,
        }
    }

    #[test]
    fn tensor_codec_round_trip_and_truncation() {
        let ts = vec![
            Tensor { dims: vec![2, 3], data: vec![1.0, -2.5, 3.25, f64::MIN_POSITIVE, 0.0, -0.0] },
            Tensor { dims: vec![1], data: vec![std::f64::consts::PI] },
        ];
        let bytes = encode_tensors(&ts);
        assert_eq!(bytes.len(), 4 + (4 + 8) + (4 + 4) + 7 * 8);
        let back = decode_tensors(&bytes).unwrap();
        assert_eq!(back, ts);
        assert_eq!(back[0].data[5].to_bits(), (-0.0f64).to_bits());
        assert!(decode_tensors(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_tensors(&extra).is_err());
    }

    #[test]
    fn policy_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        for relation in [true, false] {
            let params = PolicyParams::init(PolicyShape { relation, ..shape() }, &mut SeededRng::new(4)).unwrap();
            save_policy(&path, &params).unwrap();
            assert_eq!(load_policy(&path).unwrap(), params);
        }
        assert!(!dir.path().join("p.bin.tmp").exists());
    }

    #[test]
    fn reward_model_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rm.bin");
        let mut params = RewardModelParams::init(4, 7, 3, &mut SeededRng::new(2));
        params.input_shift[2] = 0.5;
        params.input_scale[6] = 3.0;
        let sat = SatConfig { alpha: 0.3, ..SatConfig::default() };
        save_reward_model(&path, &params, &sat).unwrap();
        assert_eq!(load_reward_model(&path).unwrap(), (params, sat));
        assert!(matches!(load_policy(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn missing_and_mismatched_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("none.bin");
        assert!(matches!(load_policy(&path), Err(Error::MissingArtifact(_))));
        let params = PolicyParams::init(shape(), &mut SeededRng::new(4)).unwrap();
        save_policy(&path, &params).unwrap();
        let other = PolicyParams::init(PolicyShape { hidden: 7, ..shape() }, &mut SeededRng::new(4)).unwrap();
        let mut tensors = Vec::new();
        for (_, l) in other.layers() {
            dense_tensors(l, &mut tensors);
        }
        write_file(&path, &encode_tensors(&tensors)).unwrap();
        assert!(matches!(load_policy(&path), Err(Error::Checkpoint(_))));
    }
}
