//! Reading interaction files from disk.
//!
//! A dataset directory holds four files: `sizes.txt` with one line `M N O`
//! (users, bundles, items), and `user_bundle.txt`, `user_item.txt`,
//! `bundle_item.txt`, each listing one `row<TAB>col` pair per line with
//! zero-based indices.

use std::fs;
use std::path::Path;

use crate::data::InteractionMatrix;
use crate::error::{Error, Result};

/// Parse one tab-separated pair file into a bounds-checked matrix.
pub fn load_interactions(path: &Path, n_rows: usize, n_cols: usize) -> Result<InteractionMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut matrix = InteractionMatrix::new(n_rows, n_cols);
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message,
        };
        let (row, col) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(format!("expected `row<TAB>col`, got {line:?}")))?;
        let row: u32 = row
            .parse()
            .map_err(|_| parse_err(format!("bad row index {row:?}")))?;
        let col: u32 = col
            .parse()
            .map_err(|_| parse_err(format!("bad column index {col:?}")))?;
        matrix.insert(row, col)?;
    }
    Ok(matrix)
}

/// All three relations of a dataset directory, unsplit.
#[derive(Debug, Clone)]
pub struct RawDataset {
    /// User-bundle interactions, M x N.
    pub x: InteractionMatrix,
    /// User-item interactions, M x O.
    pub y: InteractionMatrix,
    /// Bundle-item affiliations, N x O.
    pub z: InteractionMatrix,
}

impl RawDataset {
    pub fn n_users(&self) -> usize {
        self.x.n_rows()
    }

    pub fn n_bundles(&self) -> usize {
        self.x.n_cols()
    }

    pub fn n_items(&self) -> usize {
        self.y.n_cols()
    }
}

/// Load `sizes.txt` plus the three pair files from `dir`.
pub fn load_dataset_dir(dir: &Path) -> Result<RawDataset> {
    let sizes_path = dir.join("sizes.txt");
    let text = fs::read_to_string(&sizes_path).map_err(|e| Error::io(&sizes_path, e))?;
    let first = text.lines().next().unwrap_or("");
    let fields: Vec<&str> = first.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            path: sizes_path.display().to_string(),
            line: 1,
            message: format!("expected `M N O`, got {first:?}"),
        });
    }
    let mut sizes = [0usize; 3];
    for (slot, field) in sizes.iter_mut().zip(&fields) {
        *slot = field.parse().map_err(|_| Error::Parse {
            path: sizes_path.display().to_string(),
            line: 1,
            message: format!("bad size {field:?}"),
        })?;
    }
    let [m, n, o] = sizes;
    Ok(RawDataset {
        x: load_interactions(&dir.join("user_bundle.txt"), m, n)?,
        y: load_interactions(&dir.join("user_item.txt"), m, o)?,
        z: load_interactions(&dir.join("bundle_item.txt"), n, o)?,
    })
}

/// Write a matrix back out in the same one-pair-per-line format.
pub fn write_interactions(path: &Path, matrix: &InteractionMatrix) -> Result<()> {
    let mut out = String::new();
    for (r, c) in matrix.iter() {
        out.push_str(&format!("{r}\t{c}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Write a full dataset directory (`sizes.txt` plus the three pair files).
pub fn write_dataset_dir(dir: &Path, raw: &RawDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sizes = format!("{} {} {}\n", raw.n_users(), raw.n_bundles(), raw.n_items());
    fs::write(dir.join("sizes.txt"), sizes).map_err(|e| Error::io(&dir.join("sizes.txt"), e))?;
    write_interactions(&dir.join("user_bundle.txt"), &raw.x)?;
    write_interactions(&dir.join("user_item.txt"), &raw.y)?;
    write_interactions(&dir.join("bundle_item.txt"), &raw.z)?;
    Ok(())
}
