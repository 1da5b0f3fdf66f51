//! Binary checkpoints for the backbone tables and the approximator network.
//!
//! Both formats are little-endian and fully deterministic: a model saved twice
//! produces byte-identical files. Values are stored as 64-bit floats whatever
//! the in-memory scalar is, so narrower scalars round-trip through a widening
//! save and a truncating load.
//!
//! Backbone layout: header `M N O D` (four u64), then the four tables
//! row-major (`p_u`, `q_b`, `p_u_item`, `v_i`). Approximator layout: header
//! `L hidden d D` (four u64) and the blend weight (one f64), then each layer's
//! weights row-major followed by its biases — layer shapes are implied by the
//! header. Each file gets a JSON sidecar at `<file>.json` carrying whatever
//! run metadata the caller supplies (the anchor policy rides along in it).

use std::fs;
use std::path::{Path, PathBuf};

use crate::backbone::{BackboneState, EmbeddingTable};
use crate::diffusion::{AnchorPolicy, Layer, ResidualApproximator};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Where a checkpoint's JSON sidecar lives: the checkpoint path plus `.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedCheckpoint {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn scalars<T: Scalar>(&mut self, values: &[T]) {
        for v in values {
            self.f64(v.as_f64());
        }
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
    path: &'a Path,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        ByteReader {
            bytes,
            offset: 0,
            path,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.offset.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.offset..end];
                self.offset = end;
                Ok(slice)
            }
            None => Err(malformed(
                self.path,
                format!(
                    "truncated: needed {n} bytes at offset {}, file has {}",
                    self.offset,
                    self.bytes.len()
                ),
            )),
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| malformed(self.path, format!("{what} of {v} is not a positive size")))
    }

    fn scalars<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(T::cast(self.f64()?));
        }
        Ok(out)
    }

    fn finish(self) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(malformed(
                self.path,
                format!(
                    "{} trailing bytes after the declared content",
                    self.bytes.len() - self.offset
                ),
            ));
        }
        Ok(())
    }
}

/// Write the backbone tables and a metadata sidecar.
pub fn save_backbone<T: Scalar>(
    state: &BackboneState<T>,
    path: &Path,
    sidecar: &serde_json::Value,
) -> Result<()> {
    let mut w = ByteWriter::new();
    w.u64(state.n_users() as u64);
    w.u64(state.n_bundles() as u64);
    w.u64(state.n_items() as u64);
    w.u64(state.dim() as u64);
    for table in [&state.p_u, &state.q_b, &state.p_u_item, &state.v_i] {
        w.scalars(table.data());
    }
    fs::write(path, &w.buf).map_err(|e| Error::io(path, e))?;
    write_sidecar(path, sidecar.clone())
}

/// Read a backbone checkpoint and its sidecar.
pub fn load_backbone<T: Scalar>(path: &Path) -> Result<(BackboneState<T>, serde_json::Value)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader::new(&bytes, path);
    let m = r.dim("user count")?;
    let n = r.dim("bundle count")?;
    let o = r.dim("item count")?;
    let d = r.dim("embedding width")?;
    let p_u = EmbeddingTable::from_vec(m, d, r.scalars(m * d)?).expect("sized read");
    let q_b = EmbeddingTable::from_vec(n, d, r.scalars(n * d)?).expect("sized read");
    let p_u_item = EmbeddingTable::from_vec(m, d, r.scalars(m * d)?).expect("sized read");
    let v_i = EmbeddingTable::from_vec(o, d, r.scalars(o * d)?).expect("sized read");
    r.finish()?;
    let sidecar = read_sidecar(path)?;
    Ok((
        BackboneState {
            p_u,
            q_b,
            p_u_item,
            v_i,
        },
        sidecar,
    ))
}

/// Write the approximator network and a metadata sidecar. The anchor policy is
/// recorded in the sidecar under `"anchor_policy"`.
pub fn save_approximator<T: Scalar>(
    approx: &ResidualApproximator<T>,
    path: &Path,
    sidecar: &serde_json::Value,
) -> Result<()> {
    let mut w = ByteWriter::new();
    w.u64(approx.depth() as u64);
    w.u64(approx.hidden() as u64);
    w.u64(approx.step_dim() as u64);
    w.u64(approx.dim() as u64);
    w.f64(approx.delta().as_f64());
    for layer in approx.layers() {
        w.scalars(&layer.weight);
        w.scalars(&layer.bias);
    }
    fs::write(path, &w.buf).map_err(|e| Error::io(path, e))?;

    let mut doc = sidecar.clone();
    if !doc.is_object() {
        return Err(Error::invalid(
            "sidecar",
            "checkpoint metadata must be a JSON object",
        ));
    }
    doc["anchor_policy"] =
        serde_json::to_value(approx.anchor_policy()).expect("policy serializes");
    write_sidecar(path, doc)
}

/// Read an approximator checkpoint; layer shapes are reconstructed from the
/// header, and the anchor policy from the sidecar (defaulting to anchoring on
/// the source embedding when the sidecar does not name one).
pub fn load_approximator<T: Scalar>(
    path: &Path,
) -> Result<(ResidualApproximator<T>, serde_json::Value)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader::new(&bytes, path);
    let depth = r.dim("layer count")?;
    let hidden = r.dim("hidden width")?;
    let step_dim = r.dim("step embedding width")?;
    let d = r.dim("embedding width")?;
    let delta = r.f64()?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(malformed(path, format!("blend weight {delta} outside [0, 1]")));
    }

    let shapes: Vec<(usize, usize)> = if depth == 1 {
        vec![(d + step_dim, d)]
    } else {
        let mut s = vec![(d + step_dim, hidden)];
        s.extend(std::iter::repeat((hidden, hidden)).take(depth.saturating_sub(2)));
        s.push((hidden, d));
        s
    };
    let mut layers = Vec::with_capacity(depth);
    for (in_dim, out_dim) in shapes {
        let weight = r.scalars(in_dim * out_dim)?;
        let bias = r.scalars(out_dim)?;
        layers.push(Layer {
            weight,
            bias,
            in_dim,
            out_dim,
        });
    }
    r.finish()?;

    let sidecar = read_sidecar(path)?;
    let anchor_policy = match sidecar.get("anchor_policy") {
        Some(v) => serde_json::from_value(v.clone())
            .map_err(|e| malformed(path, format!("bad anchor_policy in sidecar: {e}")))?,
        None => AnchorPolicy::InferSourceEmbedding,
    };
    let approx = ResidualApproximator::from_parts(
        layers,
        d,
        step_dim,
        hidden,
        T::cast(delta),
        anchor_policy,
    )?;
    Ok((approx, sidecar))
}

fn write_sidecar(path: &Path, doc: serde_json::Value) -> Result<()> {
    let sidecar = sidecar_path(path);
    let text = serde_json::to_string_pretty(&doc).expect("metadata serializes");
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

fn read_sidecar(path: &Path) -> Result<serde_json::Value> {
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    serde_json::from_str(&text)
        .map_err(|e| malformed(&sidecar, format!("sidecar is not valid JSON: {e}")))
}
