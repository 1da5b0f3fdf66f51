//! Seeded user-bundle interaction split.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::InteractionMatrix;
use crate::error::{Error, Result};

/// Split the user-bundle interactions into train/validation/test.
///
/// Edges are shuffled with a generator seeded by `seed` and dealt out
/// contiguously. Split sizes are the floors of `ratio * |X|`; leftover edges
/// (at most two) go to the earliest splits, one each, so e.g. ten edges at
/// (0.7, 0.1, 0.2) give exactly 7/1/2.
pub fn split_user_bundle(
    x: &InteractionMatrix,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<[InteractionMatrix; 3]> {
    let (a, b, c) = ratios;
    for (name, r) in [("train", a), ("val", b), ("test", c)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid(
                format!("{name} ratio"),
                format!("{r} outside [0, 1]"),
            ));
        }
    }
    if (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "split ratios",
            format!("sum to {}, expected 1", a + b + c),
        ));
    }

    let mut edges = x.edge_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);

    let total = edges.len();
    let mut counts = [
        (a * total as f64).floor() as usize,
        (b * total as f64).floor() as usize,
        (c * total as f64).floor() as usize,
    ];
    let mut leftover = total - counts.iter().sum::<usize>();
    for count in counts.iter_mut() {
        if leftover == 0 {
            break;
        }
        *count += 1;
        leftover -= 1;
    }

    let mut cursor = edges.into_iter();
    let mut take = |count: usize| {
        InteractionMatrix::from_edges(x.n_rows(), x.n_cols(), cursor.by_ref().take(count))
            .expect("edges come from a bounds-checked matrix")
    };
    Ok([take(counts[0]), take(counts[1]), take(counts[2])])
}
