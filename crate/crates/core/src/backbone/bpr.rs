//! Pairwise ranking loss over both views, with analytic gradients.
//!
//! Each positive pair is matched with a sampled negative and pushed apart with
//! the classic `-ln sigmoid(pos - neg)` objective. User-bundle pairs score
//! through both views (so gradients reach the item table through the bundle
//! mean); user-item pairs train the item-level view directly. A light L2 pull
//! on the rows touched by the batch keeps magnitudes in check.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backbone::{pooled_row, BackboneState, EmbeddingTable};
use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, Scalar};

/// Attempts at finding a negative for one positive before the pair is skipped.
pub const NEGATIVE_SAMPLING_ATTEMPTS: usize = 100;

/// One resolved ranking comparison: positive and sampled negative for a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
}

/// Resolved negatives for one step over both relations.
#[derive(Debug, Clone, Default)]
pub struct TripleBatch {
    pub ub: Vec<Triple>,
    pub ui: Vec<Triple>,
    /// Positives dropped because no negative was found within the attempt cap.
    pub skipped: usize,
}

impl TripleBatch {
    /// Number of resolved comparisons across both relations.
    pub fn len(&self) -> usize {
        self.ub.len() + self.ui.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ub.is_empty() && self.ui.is_empty()
    }
}

/// Uniformly sample one negative per positive, rejecting observed pairs.
///
/// A positive whose user has interacted with nearly everything can exhaust the
/// attempt cap; it is dropped and counted rather than looping forever.
pub fn resolve_negatives<R: Rng>(
    x_train: &InteractionMatrix,
    y: &InteractionMatrix,
    batch_ub: &[(u32, u32)],
    batch_ui: &[(u32, u32)],
    rng: &mut R,
) -> TripleBatch {
    let mut batch = TripleBatch::default();
    batch.skipped += sample_one_side(x_train, batch_ub, rng, &mut batch.ub);
    batch.skipped += sample_one_side(y, batch_ui, rng, &mut batch.ui);
    batch
}

fn sample_one_side<R: Rng>(
    observed: &InteractionMatrix,
    pairs: &[(u32, u32)],
    rng: &mut R,
    out: &mut Vec<Triple>,
) -> usize {
    let n_cols = observed.n_cols() as u32;
    let mut skipped = 0usize;
    for &(user, pos) in pairs {
        let mut found = None;
        for _ in 0..NEGATIVE_SAMPLING_ATTEMPTS {
            let neg = rng.gen_range(0..n_cols);
            if !observed.contains(user, neg) {
                found = Some(neg);
                break;
            }
        }
        match found {
            Some(neg) => out.push(Triple { user, pos, neg }),
            None => skipped += 1,
        }
    }
    skipped
}

/// Dense gradient buffers matching the backbone tables, plus the set of rows
/// that actually received contributions (the only rows worth updating).
#[derive(Debug, Clone)]
pub struct GradTables<T> {
    pub p_u: EmbeddingTable<T>,
    pub q_b: EmbeddingTable<T>,
    pub p_u_item: EmbeddingTable<T>,
    pub v_i: EmbeddingTable<T>,
    pub touched_p_u: BTreeSet<u32>,
    pub touched_q_b: BTreeSet<u32>,
    pub touched_p_u_item: BTreeSet<u32>,
    pub touched_v_i: BTreeSet<u32>,
}

impl<T: Scalar> GradTables<T> {
    pub fn zeros_like(state: &BackboneState<T>) -> Self {
        GradTables {
            p_u: EmbeddingTable::zeros(state.p_u.rows(), state.dim()),
            q_b: EmbeddingTable::zeros(state.q_b.rows(), state.dim()),
            p_u_item: EmbeddingTable::zeros(state.p_u_item.rows(), state.dim()),
            v_i: EmbeddingTable::zeros(state.v_i.rows(), state.dim()),
            touched_p_u: BTreeSet::new(),
            touched_q_b: BTreeSet::new(),
            touched_p_u_item: BTreeSet::new(),
            touched_v_i: BTreeSet::new(),
        }
    }

    pub fn reset(&mut self) {
        for table in [
            &mut self.p_u,
            &mut self.q_b,
            &mut self.p_u_item,
            &mut self.v_i,
        ] {
            for v in table.data_mut() {
                *v = T::zero();
            }
        }
        self.touched_p_u.clear();
        self.touched_q_b.clear();
        self.touched_p_u_item.clear();
        self.touched_v_i.clear();
    }
}

/// Rows a resolved batch reads, per table: `(p_u, q_b, p_u_item, v_i)`. The L2
/// term covers exactly these.
pub fn touched_rows(bundle_items: &[Vec<u32>], batch: &TripleBatch) -> [BTreeSet<u32>; 4] {
    let mut p_u = BTreeSet::new();
    let mut q_b = BTreeSet::new();
    let mut p_u_item = BTreeSet::new();
    let mut v_i = BTreeSet::new();
    for t in &batch.ub {
        p_u.insert(t.user);
        p_u_item.insert(t.user);
        q_b.insert(t.pos);
        q_b.insert(t.neg);
        for b in [t.pos, t.neg] {
            for &i in &bundle_items[b as usize] {
                v_i.insert(i);
            }
        }
    }
    for t in &batch.ui {
        p_u_item.insert(t.user);
        v_i.insert(t.pos);
        v_i.insert(t.neg);
    }
    [p_u, q_b, p_u_item, v_i]
}

/// `-ln sigmoid(x)`, computed without overflow on either tail.
#[inline]
fn ranking_loss<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// d/dx of `-ln sigmoid(x)`, i.e. `sigmoid(x) - 1`.
#[inline]
fn ranking_slope<T: Scalar>(x: T) -> T {
    -(T::one() / (T::one() + x.exp()))
}

/// Ranking loss of a resolved batch; accumulates analytic gradients when a
/// buffer is supplied.
///
/// The loss is the mean comparison loss over both relations pooled, plus
/// `l2 * ||row||^2` for every touched row. `bundle_items` lists each bundle's
/// visible items under the training affiliation view.
pub fn bpr_loss_and_grads<T: Scalar>(
    state: &BackboneState<T>,
    bundle_items: &[Vec<u32>],
    batch: &TripleBatch,
    l2: T,
    mut grads: Option<&mut GradTables<T>>,
) -> T {
    if batch.is_empty() {
        return T::zero();
    }
    let weight = T::one() / T::from_usize(batch.len()).expect("batch size fits in scalar");
    let mut loss = T::zero();

    // Bundle means are shared between the two sides of a comparison and across
    // comparisons hitting the same bundle.
    let mut pooled: HashMap<u32, Vec<T>> = HashMap::new();
    for t in &batch.ub {
        for b in [t.pos, t.neg] {
            pooled
                .entry(b)
                .or_insert_with(|| pooled_row(&bundle_items[b as usize], &state.v_i));
        }
    }

    for t in &batch.ub {
        let u = t.user as usize;
        let mean_pos = &pooled[&t.pos];
        let mean_neg = &pooled[&t.neg];
        let score_pos = dot(state.p_u.row(u), state.q_b.row(t.pos as usize))
            + dot(state.p_u_item.row(u), mean_pos);
        let score_neg = dot(state.p_u.row(u), state.q_b.row(t.neg as usize))
            + dot(state.p_u_item.row(u), mean_neg);
        let margin = score_pos - score_neg;
        loss += weight * ranking_loss(margin);

        if let Some(grads) = grads.as_deref_mut() {
            let g = weight * ranking_slope(margin);
            // d margin / d p_u[u] = q_b[pos] - q_b[neg], and so on by symmetry.
            axpy(grads.p_u.row_mut(u), g, state.q_b.row(t.pos as usize));
            axpy(grads.p_u.row_mut(u), -g, state.q_b.row(t.neg as usize));
            axpy(grads.q_b.row_mut(t.pos as usize), g, state.p_u.row(u));
            axpy(grads.q_b.row_mut(t.neg as usize), -g, state.p_u.row(u));
            axpy(grads.p_u_item.row_mut(u), g, mean_pos);
            axpy(grads.p_u_item.row_mut(u), -g, mean_neg);
            // Through the means into the item table, 1/|items| per member.
            for (bundle, sign) in [(t.pos, T::one()), (t.neg, -T::one())] {
                let items = &bundle_items[bundle as usize];
                if items.is_empty() {
                    continue;
                }
                let share = sign * g / T::from_usize(items.len()).expect("count fits in scalar");
                for &i in items {
                    axpy(grads.v_i.row_mut(i as usize), share, state.p_u_item.row(u));
                }
            }
        }
    }

    for t in &batch.ui {
        let u = t.user as usize;
        let margin = dot(state.p_u_item.row(u), state.v_i.row(t.pos as usize))
            - dot(state.p_u_item.row(u), state.v_i.row(t.neg as usize));
        loss += weight * ranking_loss(margin);

        if let Some(grads) = grads.as_deref_mut() {
            let g = weight * ranking_slope(margin);
            axpy(grads.p_u_item.row_mut(u), g, state.v_i.row(t.pos as usize));
            axpy(grads.p_u_item.row_mut(u), -g, state.v_i.row(t.neg as usize));
            axpy(grads.v_i.row_mut(t.pos as usize), g, state.p_u_item.row(u));
            axpy(grads.v_i.row_mut(t.neg as usize), -g, state.p_u_item.row(u));
        }
    }

    let [p_u, q_b, p_u_item, v_i] = touched_rows(bundle_items, batch);
    if l2 > T::zero() {
        loss += l2_penalty(&state.p_u, grads.as_deref_mut().map(|g| &mut g.p_u), &p_u, l2);
        loss += l2_penalty(&state.q_b, grads.as_deref_mut().map(|g| &mut g.q_b), &q_b, l2);
        loss += l2_penalty(
            &state.p_u_item,
            grads.as_deref_mut().map(|g| &mut g.p_u_item),
            &p_u_item,
            l2,
        );
        loss += l2_penalty(&state.v_i, grads.as_deref_mut().map(|g| &mut g.v_i), &v_i, l2);
    }
    if let Some(grads) = grads {
        grads.touched_p_u.extend(p_u);
        grads.touched_q_b.extend(q_b);
        grads.touched_p_u_item.extend(p_u_item);
        grads.touched_v_i.extend(v_i);
    }
    loss
}

/// Squared-norm pull on the given rows of one table, with its gradient.
fn l2_penalty<T: Scalar>(
    table: &EmbeddingTable<T>,
    mut grad: Option<&mut EmbeddingTable<T>>,
    rows: &BTreeSet<u32>,
    l2: T,
) -> T {
    let two = T::cast(2.0);
    let mut term = T::zero();
    for &r in rows {
        let row = table.row(r as usize);
        term += l2 * dot(row, row);
        if let Some(grad) = grad.as_deref_mut() {
            axpy(grad.row_mut(r as usize), two * l2, row);
        }
    }
    term
}

/// Outcome of one standalone ranking step.
#[derive(Debug, Clone, Copy)]
pub struct BprStepReport<T> {
    pub loss: T,
    pub skipped: usize,
}

/// One plain gradient-descent step on the backbone from a pair of minibatches.
///
/// Negatives are sampled from a stream seeded by `neg_seed`; positives whose
/// negatives cannot be found are skipped and counted in the report.
#[allow(clippy::too_many_arguments)]
pub fn bpr_step<T: Scalar>(
    state: &mut BackboneState<T>,
    z_train: &InteractionMatrix,
    x_train: &InteractionMatrix,
    y: &InteractionMatrix,
    batch_ub: &[(u32, u32)],
    batch_ui: &[(u32, u32)],
    lr: T,
    l2: T,
    neg_seed: u64,
) -> Result<BprStepReport<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(neg_seed);
    let batch = resolve_negatives(x_train, y, batch_ub, batch_ui, &mut rng);
    let bundle_items = z_train.row_adjacency();
    let mut grads = GradTables::zeros_like(state);
    let loss = bpr_loss_and_grads(state, &bundle_items, &batch, l2, Some(&mut grads));
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: "ranking step".into(),
        });
    }
    apply_sgd(state, &grads, lr);
    Ok(BprStepReport {
        loss,
        skipped: batch.skipped,
    })
}

/// `param -= lr * grad` over the touched rows.
fn apply_sgd<T: Scalar>(state: &mut BackboneState<T>, grads: &GradTables<T>, lr: T) {
    for (table, grad_table, rows) in [
        (&mut state.p_u, &grads.p_u, &grads.touched_p_u),
        (&mut state.q_b, &grads.q_b, &grads.touched_q_b),
        (&mut state.p_u_item, &grads.p_u_item, &grads.touched_p_u_item),
        (&mut state.v_i, &grads.v_i, &grads.touched_v_i),
    ] {
        for &r in rows {
            axpy(table.row_mut(r as usize), -lr, grad_table.row(r as usize));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::init_backbone;

    fn toy() -> (
        BackboneState<f64>,
        InteractionMatrix,
        InteractionMatrix,
        InteractionMatrix,
    ) {
        let state = init_backbone(2, 2, 3, 4, 0.2, 5).unwrap();
        let x = InteractionMatrix::from_edges(2, 2, [(0, 0), (1, 1)]).unwrap();
        let y = InteractionMatrix::from_edges(2, 3, [(0, 0), (0, 1), (1, 2)]).unwrap();
        let z = InteractionMatrix::from_edges(2, 3, [(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        (state, x, y, z)
    }

    #[test]
    fn saturated_margin_loses_nothing() {
        assert!(ranking_loss(500.0f64) < 1e-12);
        assert!((ranking_loss(-500.0f64) - 500.0).abs() < 1e-9);
        assert!((ranking_loss(0.0f64) - (2.0f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn negatives_avoid_observed_pairs() {
        let (_, x, y, _) = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = resolve_negatives(&x, &y, &x.edge_vec(), &y.edge_vec(), &mut rng);
        assert_eq!(batch.skipped, 0);
        for t in &batch.ub {
            assert!(!x.contains(t.user, t.neg));
        }
        for t in &batch.ui {
            assert!(!y.contains(t.user, t.neg));
        }
    }

    #[test]
    fn saturated_user_is_skipped_and_counted() {
        // User 0 has interacted with both bundles: no negative exists.
        let x = InteractionMatrix::from_edges(1, 2, [(0, 0), (0, 1)]).unwrap();
        let y = InteractionMatrix::new(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = resolve_negatives(&x, &y, &x.edge_vec(), &[], &mut rng);
        assert_eq!(batch.ub.len(), 0);
        assert_eq!(batch.skipped, 2);
    }

    #[test]
    fn step_reduces_the_loss_on_a_fixed_batch() {
        let (mut state, x, y, z) = toy();
        let ub = x.edge_vec();
        let ui = y.edge_vec();
        let fixed_batch = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            resolve_negatives(&x, &y, &ub, &ui, &mut rng)
        };
        let items = z.row_adjacency();
        let before = bpr_loss_and_grads(&state, &items, &fixed_batch(), 0.0, None);
        for _ in 0..20 {
            bpr_step(&mut state, &z, &x, &y, &ub, &ui, 0.1, 0.0, 3).unwrap();
        }
        let after = bpr_loss_and_grads(&state, &items, &fixed_batch(), 0.0, None);
        assert!(after < before, "loss went {before} -> {after}");
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let (state, x, y, z) = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = resolve_negatives(&x, &y, &x.edge_vec(), &y.edge_vec(), &mut rng);
        let bundle_items = z.row_adjacency();
        let l2 = 1e-3;

        let mut grads = GradTables::zeros_like(&state);
        bpr_loss_and_grads(&state, &bundle_items, &batch, l2, Some(&mut grads));

        let h = 1e-6;
        for table in 0..4usize {
            let len = match table {
                0 => state.p_u.data().len(),
                1 => state.q_b.data().len(),
                2 => state.p_u_item.data().len(),
                _ => state.v_i.data().len(),
            };
            for idx in 0..len {
                let perturbed = |delta: f64| {
                    let mut s = state.clone();
                    let slot = match table {
                        0 => &mut s.p_u.data_mut()[idx],
                        1 => &mut s.q_b.data_mut()[idx],
                        2 => &mut s.p_u_item.data_mut()[idx],
                        _ => &mut s.v_i.data_mut()[idx],
                    };
                    *slot += delta;
                    bpr_loss_and_grads(&s, &bundle_items, &batch, l2, None)
                };
                let numeric = (perturbed(h) - perturbed(-h)) / (2.0 * h);
                let analytic = match table {
                    0 => grads.p_u.data()[idx],
                    1 => grads.q_b.data()[idx],
                    2 => grads.p_u_item.data()[idx],
                    _ => grads.v_i.data()[idx],
                };
                let denom = (analytic.abs() + numeric.abs()).max(1e-8);
                assert!(
                    ((analytic - numeric) / denom).abs() < 1e-4,
                    "table {table} entry {idx}: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }
}
