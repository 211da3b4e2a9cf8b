//! Shared helpers for the integration tests.
#![allow(dead_code)]

use vistoken::io::rng::FixtureRng;
use vistoken::math::{l2_normalize_rows, FeatureMatrix};
use vistoken::Error;

pub const ORACLE_MAX: usize = 256;

/// Literal transcription of the residual pruning loop.
///
/// Recomputes the full even×odd similarity table on every pass and picks the
/// removals one at a time by linear scan. Ties in the pair score go to the
/// later position. Returns surviving original indices in candidate order.
pub fn oracle_residual_prune(
    candidates: &[usize],
    features: &FeatureMatrix,
    t_div: usize,
    step_k: usize,
) -> Result<Vec<usize>, Error> {
    if candidates.len() > ORACLE_MAX {
        return Err(Error::OracleCap { len: candidates.len(), max: ORACLE_MAX });
    }
    let mut resid: Vec<usize> = (0..candidates.len()).collect();
    while resid.len() > t_div {
        let v_a: Vec<usize> = (0..resid.len()).filter(|p| p % 2 == 0).map(|p| resid[p]).collect();
        let v_b: Vec<usize> = (0..resid.len()).filter(|p| p % 2 == 1).map(|p| resid[p]).collect();
        let r = step_k.min(resid.len() - t_div).min(v_a.len());
        let mut removed = Vec::new();
        if v_b.is_empty() {
            removed.extend(v_a.iter().rev().take(r));
        } else {
            let mut table = vec![vec![0.0; v_b.len()]; v_a.len()];
            for (i, &a) in v_a.iter().enumerate() {
                for (j, &b) in v_b.iter().enumerate() {
                    let mut s = 0.0;
                    for c in 0..features.cols() {
                        s += features.get(a, c) * features.get(b, c);
                    }
                    table[i][j] = s;
                }
            }
            let mut s_pair: Vec<f64> =
                table.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
            for _ in 0..r {
                let mut best = 0;
                while s_pair[best].is_nan() {
                    best += 1;
                }
                for i in best + 1..s_pair.len() {
                    if !s_pair[i].is_nan() && s_pair[i] >= s_pair[best] {
                        best = i;
                    }
                }
                removed.push(v_a[best]);
                s_pair[best] = f64::NAN;
            }
        }
        resid.retain(|p| !removed.contains(p));
    }
    Ok(resid.into_iter().map(|p| candidates[p]).collect())
}

/// Random unit rows. With `dup_prob`, a row copies an earlier one so exact
/// ties in the pair score are common.
pub fn random_unit_rows(seed: u64, n: usize, dim: usize, dup_prob: f64) -> FeatureMatrix {
    let mut rng = FixtureRng::new(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.uniform() < dup_prob {
            let j = rng.below(i);
            rows.push(rows[j].clone());
        } else {
            rows.push(rng.unit_vector(dim));
        }
    }
    if n == 0 {
        return FeatureMatrix::empty(dim).unwrap();
    }
    l2_normalize_rows(&FeatureMatrix::from_rows(&rows).unwrap())
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
}
