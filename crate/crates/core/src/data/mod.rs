//! Interaction data: sparse binary matrices, the train/val/test split, the
//! affiliation partition behind the bundle-variability protocol, and a planted
//! synthetic dataset generator.
//!
//! Three binary relations describe a catalogue: user-bundle interactions `X`
//! (M x N), user-item interactions `Y` (M x O), and bundle-item affiliations
//! `Z` (N x O). Evaluation varies how much of `Z` is visible: `Z` is cut into
//! `k` equally sized subsets, training sees the first half, and a signed level
//! `rho` adds unseen subsets (bundles gain items) or removes seen ones (bundles
//! shrink).

mod loader;
mod partition;
mod split;
mod synthetic;

pub use loader::{load_dataset_dir, load_interactions, write_dataset_dir, write_interactions, RawDataset};
pub use partition::partition_affiliations;
pub use split::split_user_bundle;
pub use synthetic::{synth_planted_dataset, SyntheticConfig};

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Sparse binary interaction matrix with set semantics: an edge is present or
/// absent, duplicates collapse, and iteration order is always (row, col)
/// ascending so downstream code is deterministic for free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    n_rows: usize,
    n_cols: usize,
    edges: BTreeSet<(u32, u32)>,
}

impl InteractionMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        InteractionMatrix {
            n_rows,
            n_cols,
            edges: BTreeSet::new(),
        }
    }

    /// Build from an edge list, bounds-checking every pair.
    pub fn from_edges<I>(n_rows: usize, n_cols: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut m = InteractionMatrix::new(n_rows, n_cols);
        for (r, c) in edges {
            m.insert(r, c)?;
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, row: u32, col: u32) -> bool {
        self.edges.contains(&(row, col))
    }

    pub fn insert(&mut self, row: u32, col: u32) -> Result<()> {
        if row as usize >= self.n_rows {
            return Err(Error::IndexOutOfRange {
                entity: "row",
                index: row as usize,
                size: self.n_rows,
            });
        }
        if col as usize >= self.n_cols {
            return Err(Error::IndexOutOfRange {
                entity: "column",
                index: col as usize,
                size: self.n_cols,
            });
        }
        self.edges.insert((row, col));
        Ok(())
    }

    /// Edges in (row, col) ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().copied()
    }

    /// Edges collected into a vector, ascending.
    pub fn edge_vec(&self) -> Vec<(u32, u32)> {
        self.edges.iter().copied().collect()
    }

    /// Column indices of one row, ascending.
    pub fn row(&self, row: u32) -> Vec<u32> {
        self.edges
            .range((row, 0)..=(row, u32::MAX))
            .map(|&(_, c)| c)
            .collect()
    }

    /// Per-row adjacency lists (columns ascending), for repeated row access.
    pub fn row_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n_rows];
        for &(r, c) in &self.edges {
            adj[r as usize].push(c);
        }
        adj
    }

    /// Union of two same-shape matrices.
    pub fn union(&self, other: &InteractionMatrix) -> Result<InteractionMatrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.edges.extend(other.edges.iter().copied());
        Ok(out)
    }

    /// True when no edge appears in both matrices.
    pub fn is_disjoint(&self, other: &InteractionMatrix) -> bool {
        self.edges.is_disjoint(&other.edges)
    }

    fn check_same_shape(&self, other: &InteractionMatrix) -> Result<()> {
        if self.n_rows != other.n_rows {
            return Err(Error::DimensionMismatch {
                context: "matrix row counts",
                expected: self.n_rows,
                got: other.n_rows,
            });
        }
        if self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                context: "matrix column counts",
                expected: self.n_cols,
                got: other.n_cols,
            });
        }
        Ok(())
    }
}

/// One catalogue: the user-bundle split, user-item interactions, and the full
/// bundle-item affiliations.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x_train: InteractionMatrix,
    pub x_val: InteractionMatrix,
    pub x_test: InteractionMatrix,
    pub y: InteractionMatrix,
    pub z_full: InteractionMatrix,
}

impl Dataset {
    /// Assemble and validate: consistent shapes, pairwise disjoint splits.
    pub fn new(
        x_train: InteractionMatrix,
        x_val: InteractionMatrix,
        x_test: InteractionMatrix,
        y: InteractionMatrix,
        z_full: InteractionMatrix,
    ) -> Result<Self> {
        x_train.check_same_shape(&x_val)?;
        x_train.check_same_shape(&x_test)?;
        if y.n_rows() != x_train.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "user counts of X and Y",
                expected: x_train.n_rows(),
                got: y.n_rows(),
            });
        }
        if z_full.n_rows() != x_train.n_cols() {
            return Err(Error::DimensionMismatch {
                context: "bundle counts of X and Z",
                expected: x_train.n_cols(),
                got: z_full.n_rows(),
            });
        }
        if z_full.n_cols() != y.n_cols() {
            return Err(Error::DimensionMismatch {
                context: "item counts of Y and Z",
                expected: y.n_cols(),
                got: z_full.n_cols(),
            });
        }
        for (a, b, what) in [
            (&x_train, &x_val, "x_train/x_val"),
            (&x_train, &x_test, "x_train/x_test"),
            (&x_val, &x_test, "x_val/x_test"),
        ] {
            if !a.is_disjoint(b) {
                return Err(Error::invalid(what, "interaction splits share an edge"));
            }
        }
        Ok(Dataset {
            x_train,
            x_val,
            x_test,
            y,
            z_full,
        })
    }

    /// Number of users.
    pub fn n_users(&self) -> usize {
        self.x_train.n_rows()
    }

    /// Number of bundles.
    pub fn n_bundles(&self) -> usize {
        self.x_train.n_cols()
    }

    /// Number of items.
    pub fn n_items(&self) -> usize {
        self.y.n_cols()
    }
}

/// The affiliation matrix cut into equally sized, pairwise disjoint subsets.
///
/// Subset order matters: evaluation composes prefixes of this list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffiliationPartition {
    subsets: Vec<InteractionMatrix>,
}

impl AffiliationPartition {
    /// Validate and wrap a subset list: same shapes, pairwise disjoint. Size
    /// balance is up to the producer — the uniform edge partition deals edges
    /// evenly, while the synthetic generator groups each item's edges together.
    pub fn from_subsets(subsets: Vec<InteractionMatrix>) -> Result<Self> {
        if subsets.is_empty() {
            return Err(Error::invalid("partition", "needs at least one subset"));
        }
        for s in &subsets[1..] {
            subsets[0].check_same_shape(s)?;
        }
        for i in 0..subsets.len() {
            for j in i + 1..subsets.len() {
                if !subsets[i].is_disjoint(&subsets[j]) {
                    return Err(Error::invalid(
                        "partition",
                        format!("subsets {i} and {j} share an edge"),
                    ));
                }
            }
        }
        Ok(AffiliationPartition { subsets })
    }

    pub fn k(&self) -> usize {
        self.subsets.len()
    }

    pub fn subsets(&self) -> &[InteractionMatrix] {
        &self.subsets
    }

    /// Number of subsets visible during training: the first half.
    pub fn base(&self) -> usize {
        self.subsets.len() / 2
    }

    /// Union of every subset: the full affiliation matrix.
    pub fn union_all(&self) -> InteractionMatrix {
        let mut out = self.subsets[0].clone();
        for s in &self.subsets[1..] {
            out = out.union(s).expect("subsets share a shape by construction");
        }
        out
    }
}

/// Affiliations visible during training and validation: the first half of the
/// partition.
pub fn z_train_val(partition: &AffiliationPartition) -> InteractionMatrix {
    compose_z_test(partition, 0).expect("level 0 is always in range")
}

/// Affiliations visible at evaluation level `rho`.
///
/// Level 0 reproduces the training-time view; positive levels append that many
/// held-out subsets (bundles gain items); negative levels drop that many seen
/// subsets from the end of the training half (bundles lose items). With the
/// shipped ten-subset protocol the valid range is -4..=5.
pub fn compose_z_test(partition: &AffiliationPartition, rho: i32) -> Result<InteractionMatrix> {
    let base = partition.base() as i32;
    let k = partition.k() as i32;
    let (lo, hi) = (-(base - 1), k - base);
    if rho < lo || rho > hi {
        return Err(Error::invalid(
            "rho",
            format!("{rho} outside valid range [{lo}, {hi}]"),
        ));
    }
    let keep = (base + rho) as usize;
    let mut out = partition.subsets[0].clone();
    for s in &partition.subsets[1..keep] {
        out = out.union(s)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partition_of(sizes: &[usize]) -> AffiliationPartition {
        // Lay edges out consecutively so subsets are disjoint by construction.
        let total: usize = sizes.iter().sum();
        let mut next = 0u32;
        let subsets = sizes
            .iter()
            .map(|&s| {
                let edges = (0..s).map(|_| {
                    let e = (next / 100, next % 100);
                    next += 1;
                    e
                });
                InteractionMatrix::from_edges(total / 100 + 1, 100, edges).unwrap()
            })
            .collect();
        AffiliationPartition::from_subsets(subsets).unwrap()
    }

    #[test]
    fn duplicate_edges_collapse() {
        let m = InteractionMatrix::from_edges(3, 3, [(0, 1), (0, 1), (2, 2)]).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.contains(0, 1));
    }

    #[test]
    fn insert_rejects_out_of_range_indices() {
        let mut m = InteractionMatrix::new(2, 2);
        assert!(m.insert(2, 0).is_err());
        assert!(m.insert(0, 2).is_err());
    }

    #[test]
    fn row_returns_ascending_columns() {
        let m = InteractionMatrix::from_edges(2, 10, [(1, 7), (1, 2), (0, 5), (1, 4)]).unwrap();
        assert_eq!(m.row(1), vec![2, 4, 7]);
        assert_eq!(m.row(0), vec![5]);
        assert_eq!(m.row_adjacency(), vec![vec![5], vec![2, 4, 7]]);
    }

    #[test]
    fn level_zero_matches_training_view() {
        let p = partition_of(&[3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        let base = z_train_val(&p);
        assert_eq!(base, compose_z_test(&p, 0).unwrap());
        assert_eq!(base.len(), 13);
    }

    #[test]
    fn extreme_levels_hit_first_subset_and_full_matrix() {
        let p = partition_of(&[3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        assert_eq!(compose_z_test(&p, -4).unwrap(), p.subsets()[0]);
        assert_eq!(compose_z_test(&p, 5).unwrap(), p.union_all());
    }

    #[test]
    fn out_of_range_levels_error() {
        let p = partition_of(&[1; 10]);
        assert!(compose_z_test(&p, -5).is_err());
        assert!(compose_z_test(&p, 6).is_err());
    }

    #[test]
    fn uneven_subset_sizes_are_accepted() {
        let subsets = vec![
            InteractionMatrix::from_edges(1, 10, [(0, 0), (0, 1), (0, 2)]).unwrap(),
            InteractionMatrix::from_edges(1, 10, [(0, 3)]).unwrap(),
        ];
        assert_eq!(AffiliationPartition::from_subsets(subsets).unwrap().k(), 2);
    }

    #[test]
    fn overlapping_partitions_are_rejected() {
        let subsets = vec![
            InteractionMatrix::from_edges(1, 10, [(0, 0)]).unwrap(),
            InteractionMatrix::from_edges(1, 10, [(0, 0)]).unwrap(),
        ];
        assert!(AffiliationPartition::from_subsets(subsets).is_err());
    }

    #[test]
    fn dataset_rejects_overlapping_splits() {
        let x = InteractionMatrix::from_edges(2, 2, [(0, 0)]).unwrap();
        let y = InteractionMatrix::new(2, 3);
        let z = InteractionMatrix::new(2, 3);
        let err = Dataset::new(x.clone(), x.clone(), InteractionMatrix::new(2, 2), y, z);
        assert!(err.is_err());
    }
}
