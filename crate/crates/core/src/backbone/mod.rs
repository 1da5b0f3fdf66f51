//! Two-view embedding backbone.
//!
//! Users and bundles are scored twice: a bundle-level view pairs a user table
//! with a bundle table, and an item-level view pairs a second user table with
//! the mean of the bundle's item embeddings. The final affinity is the sum of
//! the two inner products; the item-level view is the part that reacts when a
//! bundle's contents change.

mod bpr;

pub use bpr::{
    bpr_loss_and_grads, bpr_step, resolve_negatives, BprStepReport, GradTables, Triple,
    TripleBatch,
};

use rand::Rng;

use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};

/// Dense row-major matrix of embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingTable {
            rows,
            dim,
            data: vec![T::zero(); rows * dim],
        }
    }

    /// Wrap a row-major buffer of length `rows * dim`.
    pub fn from_vec(rows: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                context: "embedding buffer length",
                expected: rows * dim,
                got: data.len(),
            });
        }
        Ok(EmbeddingTable { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    fn fill_uniform<R: Rng>(&mut self, scale: T, rng: &mut R) {
        for v in &mut self.data {
            *v = rng.gen_range(-scale..=scale);
        }
    }
}

/// The four embedding tables of the backbone.
///
/// `p_u`/`q_b` are the bundle-level user and bundle tables; `p_u_item`/`v_i`
/// are the item-level user and item tables. All share one embedding width.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneState<T> {
    pub p_u: EmbeddingTable<T>,
    pub q_b: EmbeddingTable<T>,
    pub p_u_item: EmbeddingTable<T>,
    pub v_i: EmbeddingTable<T>,
}

impl<T: Scalar> BackboneState<T> {
    pub fn n_users(&self) -> usize {
        self.p_u.rows()
    }

    pub fn n_bundles(&self) -> usize {
        self.q_b.rows()
    }

    pub fn n_items(&self) -> usize {
        self.v_i.rows()
    }

    pub fn dim(&self) -> usize {
        self.p_u.dim()
    }
}

/// Initialise all four tables uniformly in `[-scale, scale]` from one seeded
/// stream. A zero scale produces all-zero tables.
pub fn init_backbone<T: Scalar>(
    n_users: usize,
    n_bundles: usize,
    n_items: usize,
    dim: usize,
    scale: T,
    seed: u64,
) -> Result<BackboneState<T>> {
    if dim == 0 {
        return Err(Error::invalid("dim", "embedding width must be positive"));
    }
    if !(scale >= T::zero()) {
        return Err(Error::invalid("init_scale", "must be non-negative"));
    }
    let mut state = BackboneState {
        p_u: EmbeddingTable::zeros(n_users, dim),
        q_b: EmbeddingTable::zeros(n_bundles, dim),
        p_u_item: EmbeddingTable::zeros(n_users, dim),
        v_i: EmbeddingTable::zeros(n_items, dim),
    };
    if scale > T::zero() {
        let mut rng = crate::seeds::SeedBank::new(seed).rng(crate::seeds::labels::INIT);
        state.p_u.fill_uniform(scale, &mut rng);
        state.q_b.fill_uniform(scale, &mut rng);
        state.p_u_item.fill_uniform(scale, &mut rng);
        state.v_i.fill_uniform(scale, &mut rng);
    }
    Ok(state)
}

/// Item-level bundle embeddings: each bundle's row is the mean of its items'
/// rows under the given affiliation view; a bundle with no visible items gets
/// the zero vector.
pub fn aggregate_item_level<T: Scalar>(
    z: &InteractionMatrix,
    v_i: &EmbeddingTable<T>,
) -> Result<EmbeddingTable<T>> {
    if z.n_cols() != v_i.rows() {
        return Err(Error::DimensionMismatch {
            context: "affiliation columns vs item table rows",
            expected: v_i.rows(),
            got: z.n_cols(),
        });
    }
    let dim = v_i.dim();
    let mut out = EmbeddingTable::zeros(z.n_rows(), dim);
    let mut counts = vec![0usize; z.n_rows()];
    for (b, i) in z.iter() {
        axpy(out.row_mut(b as usize), T::one(), v_i.row(i as usize));
        counts[b as usize] += 1;
    }
    for (b, &count) in counts.iter().enumerate() {
        if count > 0 {
            let inv = T::one() / T::from_usize(count).expect("count fits in scalar");
            for v in out.row_mut(b) {
                *v *= inv;
            }
        }
    }
    Ok(out)
}

/// Mean of one bundle's item rows, given its visible item list.
pub(crate) fn pooled_row<T: Scalar>(items: &[u32], v_i: &EmbeddingTable<T>) -> Vec<T> {
    let mut row = vec![T::zero(); v_i.dim()];
    if items.is_empty() {
        return row;
    }
    for &i in items {
        axpy(&mut row, T::one(), v_i.row(i as usize));
    }
    let inv = T::one() / T::from_usize(items.len()).expect("count fits in scalar");
    for v in &mut row {
        *v *= inv;
    }
    row
}

/// Affinity of user `u` for bundle `b`: the bundle-level inner product plus the
/// item-level inner product against the aggregated bundle row.
pub fn score<T: Scalar>(
    state: &BackboneState<T>,
    item_level: &EmbeddingTable<T>,
    user: u32,
    bundle: u32,
) -> Result<T> {
    if user as usize >= state.n_users() {
        return Err(Error::IndexOutOfRange {
            entity: "user",
            index: user as usize,
            size: state.n_users(),
        });
    }
    if bundle as usize >= state.n_bundles() || bundle as usize >= item_level.rows() {
        return Err(Error::IndexOutOfRange {
            entity: "bundle",
            index: bundle as usize,
            size: state.n_bundles().min(item_level.rows()),
        });
    }
    Ok(dot(state.p_u.row(user as usize), state.q_b.row(bundle as usize))
        + dot(
            state.p_u_item.row(user as usize),
            item_level.row(bundle as usize),
        ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_scale_gives_zero_tables() {
        let state = init_backbone::<f64>(3, 4, 5, 8, 0.0, 9).unwrap();
        assert!(state.p_u.data().iter().all(|&v| v == 0.0));
        assert!(state.v_i.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_bounded_and_reproducible() {
        let a = init_backbone::<f64>(4, 4, 6, 8, 0.1, 13).unwrap();
        let b = init_backbone::<f64>(4, 4, 6, 8, 0.1, 13).unwrap();
        assert_eq!(a, b);
        assert!(a.q_b.data().iter().all(|&v| v.abs() <= 0.1));
        let c = init_backbone::<f64>(4, 4, 6, 8, 0.1, 14).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn aggregation_averages_member_items() {
        let mut v_i = EmbeddingTable::<f64>::zeros(3, 2);
        v_i.row_mut(0).copy_from_slice(&[1.0, 2.0]);
        v_i.row_mut(1).copy_from_slice(&[3.0, 4.0]);
        v_i.row_mut(2).copy_from_slice(&[10.0, 10.0]);
        let z = InteractionMatrix::from_edges(2, 3, [(0, 0), (0, 1)]).unwrap();
        let agg = aggregate_item_level(&z, &v_i).unwrap();
        assert_eq!(agg.row(0), &[2.0, 3.0]);
        // Bundle 1 has no items: zero vector.
        assert_eq!(agg.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn single_item_bundle_copies_the_item_row() {
        let mut v_i = EmbeddingTable::<f64>::zeros(2, 3);
        v_i.row_mut(1).copy_from_slice(&[0.5, -1.0, 2.0]);
        let z = InteractionMatrix::from_edges(1, 2, [(0, 1)]).unwrap();
        let agg = aggregate_item_level(&z, &v_i).unwrap();
        assert_eq!(agg.row(0), v_i.row(1));
    }

    #[test]
    fn score_sums_both_views() {
        let mut state = init_backbone::<f64>(1, 1, 2, 2, 0.0, 0).unwrap();
        state.p_u.row_mut(0).copy_from_slice(&[1.0, 0.0]);
        state.q_b.row_mut(0).copy_from_slice(&[3.0, 5.0]);
        state.p_u_item.row_mut(0).copy_from_slice(&[2.0, 2.0]);
        state.v_i.row_mut(0).copy_from_slice(&[1.0, 1.0]);
        state.v_i.row_mut(1).copy_from_slice(&[3.0, 1.0]);
        let z = InteractionMatrix::from_edges(1, 2, [(0, 0), (0, 1)]).unwrap();
        let agg = aggregate_item_level(&z, &state.v_i).unwrap();
        // Bundle-level 1*3 + item-level 2*2 + 2*1 = 9.
        assert_eq!(score(&state, &agg, 0, 0).unwrap(), 9.0);
    }

    #[test]
    fn score_checks_bounds() {
        let state = init_backbone::<f64>(2, 2, 2, 2, 0.1, 0).unwrap();
        let agg = EmbeddingTable::zeros(2, 2);
        assert!(score(&state, &agg, 5, 0).is_err());
        assert!(score(&state, &agg, 0, 5).is_err());
    }

    proptest! {
        /// Scaling every item row scales aggregated rows by the same factor.
        #[test]
        fn aggregation_is_linear(scale in -3.0f64..3.0, seed in 0u64..100) {
            let state = init_backbone::<f64>(1, 1, 6, 4, 0.5, seed).unwrap();
            let z = InteractionMatrix::from_edges(2, 6, [(0, 0), (0, 3), (1, 5)]).unwrap();
            let base = aggregate_item_level(&z, &state.v_i).unwrap();
            let mut scaled_items = state.v_i.clone();
            for v in scaled_items.data_mut() { *v *= scale; }
            let scaled = aggregate_item_level(&z, &scaled_items).unwrap();
            for b in 0..2 {
                for (x, y) in base.row(b).iter().zip(scaled.row(b)) {
                    prop_assert!((x * scale - y).abs() < 1e-9);
                }
            }
        }
    }
}
