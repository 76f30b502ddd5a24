//! Checkpoint format: a text manifest (architecture, seed, width, step,
//! tensor list) next to one binary blob of little-endian f32 values per
//! parameter tensor, concatenated in manifest order in a `.bin` file.

use crate::error::{Error, Result};
use crate::model::{Backbone, ReferenceModel, REFERENCE_ARCH};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &str = "hdrssl-checkpoint v1";

fn bin_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Write `<path>.manifest` and `<path>.bin` for a model.
pub fn save(model: &ReferenceModel, step: u64, manifest_path: &Path) -> Result<()> {
    if let Some(dir) = manifest_path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut manifest = String::new();
    manifest.push_str(MAGIC);
    manifest.push('\n');
    manifest.push_str(&format!("architecture: {}\n", model.architecture()));
    manifest.push_str(&format!("seed: {}\n", model.seed()));
    manifest.push_str(&format!("width: {}\n", model.width()));
    manifest.push_str(&format!("step: {step}\n"));
    for (name, shape) in model.tensor_manifest() {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        manifest.push_str(&format!("tensor: {name} {}\n", dims.join(" ")));
    }
    fs::write(manifest_path, manifest)?;

    let mut w = BufWriter::new(fs::File::create(bin_path(manifest_path))?);
    for &v in model.parameters() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Load a checkpoint, reconstructing the architecture from the manifest
/// and validating every tensor name and shape against it.
pub fn load(manifest_path: &Path) -> Result<(ReferenceModel, u64)> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", manifest_path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Checkpoint(format!(
            "{} is not a {MAGIC} manifest",
            manifest_path.display()
        )));
    }
    let mut architecture = None;
    let mut seed = None;
    let mut width = None;
    let mut step = None;
    let mut tensors: Vec<(String, Vec<usize>)> = Vec::new();
    for line in lines {
        let Some((key, value)) = line.split_once(':') else {
            return Err(Error::Checkpoint(format!("malformed manifest line {line:?}")));
        };
        let value = value.trim();
        match key {
            "architecture" => architecture = Some(value.to_string()),
            "seed" => {
                seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::Checkpoint(format!("bad seed {value:?}"))
                })?)
            }
            "width" => {
                width = Some(value.parse::<usize>().map_err(|_| {
                    Error::Checkpoint(format!("bad width {value:?}"))
                })?)
            }
            "step" => {
                step = Some(value.parse::<u64>().map_err(|_| {
                    Error::Checkpoint(format!("bad step {value:?}"))
                })?)
            }
            "tensor" => {
                let mut parts = value.split_whitespace();
                let name = parts
                    .next()
                    .ok_or_else(|| Error::Checkpoint("tensor line missing name".into()))?
                    .to_string();
                let shape: Vec<usize> = parts
                    .map(|p| {
                        p.parse::<usize>()
                            .map_err(|_| Error::Checkpoint(format!("bad dim {p:?} in {name}")))
                    })
                    .collect::<Result<_>>()?;
                tensors.push((name, shape));
            }
            other => {
                return Err(Error::Checkpoint(format!("unknown manifest key {other:?}")));
            }
        }
    }
    let architecture =
        architecture.ok_or_else(|| Error::Checkpoint("manifest missing architecture".into()))?;
    if architecture != REFERENCE_ARCH {
        return Err(Error::Checkpoint(format!(
            "unknown architecture {architecture:?} (this build supports {REFERENCE_ARCH})"
        )));
    }
    let seed = seed.ok_or_else(|| Error::Checkpoint("manifest missing seed".into()))?;
    let width = width.ok_or_else(|| Error::Checkpoint("manifest missing width".into()))?;
    let step = step.ok_or_else(|| Error::Checkpoint("manifest missing step".into()))?;

    let mut model = ReferenceModel::new(seed, width);
    let expected = model.tensor_manifest();
    if tensors.len() != expected.len() {
        return Err(Error::Checkpoint(format!(
            "tensor count mismatch: manifest has {}, architecture expects {}",
            tensors.len(),
            expected.len()
        )));
    }
    for ((got_name, got_shape), (want_name, want_shape)) in tensors.iter().zip(&expected) {
        if got_name != want_name || got_shape != want_shape {
            return Err(Error::Checkpoint(format!(
                "tensor mismatch: manifest {got_name} {got_shape:?}, architecture expects {want_name} {want_shape:?}"
            )));
        }
    }

    let bin = bin_path(manifest_path);
    let mut bytes = Vec::new();
    fs::File::open(&bin)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", bin.display())))?
        .read_to_end(&mut bytes)?;
    let n = model.parameters().len();
    if bytes.len() != n * 4 {
        return Err(Error::Checkpoint(format!(
            "parameter blob has {} bytes, expected {}",
            bytes.len(),
            n * 4
        )));
    }
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        model.parameters_mut()[i] = f64::from(v);
    }
    Ok((model, step))
}
