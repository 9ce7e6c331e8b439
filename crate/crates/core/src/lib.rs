// SPDX-License-Identifier: Apache-2.0

//! Learned vector representations of standard-cell library cells.
//!
//! The pipeline reads Liberty files ([`liberty`]), derives cell functions
//! ([`boolfn`]), builds regularity tests ([`testgen`]) and self-supervised
//! datasets ([`datagen`]), trains the attention models ([`nn`]), and scores
//! the resulting embeddings ([`evalkit`]). [`netgen`] produces artificial
//! netlists with logic labels for downstream experiments.

pub mod boolfn;
pub mod datagen;
pub mod evalkit;
pub mod liberty;
pub mod netgen;
pub mod nn;
pub mod pipeline;
pub mod synth;
pub mod testgen;

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a parsed library's canonical JSON form.
pub fn library_hash(lib: &liberty::Library) -> String {
    sha256_hex(lib.to_json().to_string().as_bytes())
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}
