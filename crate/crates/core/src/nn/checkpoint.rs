// SPDX-License-Identifier: Apache-2.0

//! Binary checkpoints: `L2VC` magic, version, then named little-endian f32
//! tensors. A JSON manifest next to the blob maps vocabulary rows to names.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ElectricalModel, FunctionalModel, ModelDims, NnError, ParamSet, Tensor, Vocab};
use crate::liberty::Property;

pub const CHECKPOINT_SCHEMA: u32 = 1;
const MAGIC: &[u8; 4] = b"L2VC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Functional,
    Electrical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema: u32,
    pub kind: ModelKind,
    pub dims: ModelDims,
    pub vocab: Vocab,
    /// Row order of the property embedding matrix.
    pub properties: Vec<String>,
    pub tensors: Vec<TensorEntry>,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub blob_sha256: String,
}

fn ck_err(path: &Path, message: impl Into<String>) -> NnError {
    NnError::Checkpoint { path: path.display().to_string(), message: message.into() }
}

fn blob_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("ckpt")
}

fn encode(params: &impl ParamSet) -> Vec<u8> {
    let tensors = params.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_SCHEMA.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for d in t.shape() {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn decode(bytes: &[u8], path: &Path) -> Result<BTreeMap<String, Tensor>, NnError> {
    let mut r = Reader { bytes, pos: 0 };
    let truncated = || ck_err(path, "truncated blob");
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err(ck_err(path, "bad magic"));
    }
    let version = r.u32().ok_or_else(truncated)?;
    if version != CHECKPOINT_SCHEMA {
        return Err(ck_err(path, format!("unsupported version {version}")));
    }
    let n = r.u32().ok_or_else(truncated)?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let len = r.u32().ok_or_else(truncated)? as usize;
        let name = String::from_utf8(r.take(len).ok_or_else(truncated)?.to_vec())
            .map_err(|_| ck_err(path, "tensor name is not UTF-8"))?;
        let ndim = r.u32().ok_or_else(truncated)? as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Option<Vec<_>>>().ok_or_else(truncated)?;
        let count: usize = shape.iter().product();
        let raw = r.take(count * 4).ok_or_else(truncated)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
        out.insert(name, Tensor::from_vec(&shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(ck_err(path, "trailing bytes"));
    }
    Ok(out)
}

/// Writes `<path>` (JSON manifest) and the blob beside it with extension `.ckpt`.
pub fn save_checkpoint(
    path: &Path,
    kind: ModelKind,
    dims: ModelDims,
    vocab: &Vocab,
    params: &impl ParamSet,
) -> Result<CheckpointManifest, NnError> {
    let io = |p: &Path| {
        let context = p.display().to_string();
        move |source| NnError::Io { context, source }
    };
    let blob = encode(params);
    let bpath = blob_path(path);
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io(dir))?;
    }
    crate::write_atomic(&bpath, &blob).map_err(io(&bpath))?;
    let manifest = CheckpointManifest {
        schema: CHECKPOINT_SCHEMA,
        kind,
        dims,
        vocab: vocab.clone(),
        properties: Property::ALL.iter().map(|p| p.name().to_string()).collect(),
        tensors: params
            .tensors()
            .iter()
            .map(|(n, t)| TensorEntry { name: n.to_string(), shape: t.shape().to_vec() })
            .collect(),
        blob: bpath.file_name().unwrap().to_string_lossy().into_owned(),
        blob_sha256: crate::sha256_hex(&blob),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    crate::write_atomic(path, &json).map_err(io(path))?;
    Ok(manifest)
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointManifest, BTreeMap<String, Tensor>), NnError> {
    let io = |p: &Path| {
        let context = p.display().to_string();
        move |source| NnError::Io { context, source }
    };
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&text).map_err(|e| ck_err(path, format!("manifest: {e}")))?;
    if manifest.schema != CHECKPOINT_SCHEMA {
        return Err(ck_err(path, format!("unsupported schema {}", manifest.schema)));
    }
    let bpath = path.with_file_name(&manifest.blob);
    let bytes = std::fs::read(&bpath).map_err(io(&bpath))?;
    if crate::sha256_hex(&bytes) != manifest.blob_sha256 {
        return Err(ck_err(&bpath, "blob hash does not match manifest"));
    }
    Ok((manifest.clone(), decode(&bytes, &bpath)?))
}

fn fill(params: &mut impl ParamSet, mut tensors: BTreeMap<String, Tensor>, path: &Path) -> Result<(), NnError> {
    for (name, t) in params.tensors_mut() {
        let src = tensors.remove(name).ok_or_else(|| ck_err(path, format!("missing tensor '{name}'")))?;
        if src.shape() != t.shape() {
            return Err(ck_err(path, format!("tensor '{name}' has shape {:?}, expected {:?}", src.shape(), t.shape())));
        }
        *t = src;
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(ck_err(path, format!("unexpected tensor '{extra}'")));
    }
    Ok(())
}

impl FunctionalModel {
    pub fn save(&self, path: &Path) -> Result<CheckpointManifest, NnError> {
        save_checkpoint(path, ModelKind::Functional, self.dims, &self.vocab, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let (m, tensors) = load_checkpoint(path)?;
        if m.kind != ModelKind::Functional {
            return Err(ck_err(path, "not a functional checkpoint"));
        }
        let mut model = FunctionalModel::new(m.vocab, m.dims, 0);
        fill(&mut model.params, tensors, path)?;
        Ok(model)
    }
}

impl ElectricalModel {
    pub fn save(&self, path: &Path) -> Result<CheckpointManifest, NnError> {
        save_checkpoint(path, ModelKind::Electrical, self.dims, &self.vocab, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let (m, tensors) = load_checkpoint(path)?;
        if m.kind != ModelKind::Electrical {
            return Err(ck_err(path, "not an electrical checkpoint"));
        }
        let mut model = ElectricalModel::new(m.vocab, m.dims, 0);
        fill(&mut model.params, tensors, path)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::new(["X", "Y0"].map(String::from), ["A", "Y"].map(String::from))
    }

    #[test]
    fn quantized_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = FunctionalModel::new(vocab(), ModelDims::functional(4), 1);
        m.params.quantize_f32();
        let p = dir.path().join("functional.json");
        m.save(&p).unwrap();
        assert_eq!(FunctionalModel::load(&p).unwrap(), m);
        assert!(matches!(ElectricalModel::load(&p), Err(NnError::Checkpoint { .. })));

        let mut e = ElectricalModel::new(vocab(), ModelDims::electrical(4, 9), 2);
        e.params.quantize_f32();
        let p = dir.path().join("electrical.json");
        e.save(&p).unwrap();
        assert_eq!(ElectricalModel::load(&p).unwrap(), e);
    }

    #[test]
    fn corrupted_blob_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = FunctionalModel::new(vocab(), ModelDims::functional(4), 1);
        let p = dir.path().join("f.json");
        m.save(&p).unwrap();
        let b = dir.path().join("f.ckpt");
        let mut bytes = std::fs::read(&b).unwrap();
        bytes[20] ^= 1;
        std::fs::write(&b, &bytes).unwrap();
        assert!(matches!(FunctionalModel::load(&p), Err(NnError::Checkpoint { .. })));
        assert!(decode(b"NOPE", &b).is_err());
    }
}
