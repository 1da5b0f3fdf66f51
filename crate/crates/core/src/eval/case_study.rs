//! Nearest-item lookup: which items a bundle's vector points at.

use crate::backbone::EmbeddingTable;
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Top-`k` items by cosine similarity to `query`, descending, ties broken by
/// ascending item index. A zero-norm query has no direction to compare
/// against, so it yields an empty list; zero-norm items score 0.
pub fn nearest_items<T: Scalar>(
    query: &[T],
    v_i: &EmbeddingTable<T>,
    k: usize,
) -> Result<Vec<(u32, f64)>> {
    if query.len() != v_i.dim() {
        return Err(Error::DimensionMismatch {
            context: "query vs item embedding width",
            expected: v_i.dim(),
            got: query.len(),
        });
    }
    let query_norm = dot(query, query).as_f64().sqrt();
    if query_norm == 0.0 {
        return Ok(Vec::new());
    }
    let mut scored: Vec<(u32, f64)> = (0..v_i.rows())
        .map(|i| {
            let row = v_i.row(i);
            let row_norm = dot(row, row).as_f64().sqrt();
            let cosine = if row_norm == 0.0 {
                0.0
            } else {
                dot(query, row).as_f64() / (query_norm * row_norm)
            };
            (i as u32, cosine)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table(rows: Vec<Vec<f64>>) -> EmbeddingTable<f64> {
        let (n, dim) = (rows.len(), rows[0].len());
        EmbeddingTable::from_vec(n, dim, rows.into_iter().flatten().collect()).unwrap()
    }

    #[test]
    fn an_item_is_its_own_nearest_neighbour() {
        let v = table(vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 0.0]]);
        let hits = nearest_items(&[0.0, 5.0], &v, 2).unwrap();
        assert_eq!(hits[0].0, 1);
        assert_relative_eq!(hits[0].1, 1.0);
    }

    #[test]
    fn orthogonal_query_falls_back_to_index_order() {
        let v = table(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![-3.0, 0.0]]);
        let hits = nearest_items(&[0.0, 1.0], &v, 3).unwrap();
        assert_eq!(
            hits.iter().map(|&(i, _)| i).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!(hits.iter().all(|&(_, c)| c == 0.0));
    }

    #[test]
    fn zero_norm_query_yields_nothing() {
        let v = table(vec![vec![1.0, 0.0]]);
        assert!(nearest_items(&[0.0, 0.0], &v, 3).unwrap().is_empty());
    }

    #[test]
    fn matches_an_exhaustive_cosine_sort() {
        // Ten deterministic pseudo-random items, checked against a from-scratch
        // cosine computation and stable sort.
        let mut vals = Vec::new();
        let mut state = 11u64;
        for _ in 0..30 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            vals.push(((state >> 33) as f64) / (u32::MAX as f64) - 0.5);
        }
        let v = table(vals.chunks(3).map(|c| c.to_vec()).collect());
        let query = [0.4, -0.2, 0.7];

        let mut expected: Vec<(u32, f64)> = (0..10u32)
            .map(|i| {
                let row = v.row(i as usize);
                let qn: f64 = query.iter().map(|x| x * x).sum::<f64>().sqrt();
                let rn: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                let d: f64 = query.iter().zip(row).map(|(a, b)| a * b).sum();
                (i, d / (qn * rn))
            })
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        expected.truncate(5);

        let got = nearest_items(&query, &v, 5).unwrap();
        assert_eq!(
            got.iter().map(|&(i, _)| i).collect::<Vec<_>>(),
            expected.iter().map(|&(i, _)| i).collect::<Vec<_>>()
        );
        for (g, e) in got.iter().zip(&expected) {
            assert_relative_eq!(g.1, e.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let v = table(vec![vec![1.0, 0.0]]);
        assert!(nearest_items(&[1.0], &v, 1).is_err());
    }
}
