//! Empirical checks of the coverage, stability and cost properties of
//! residual pruning.
//!
//! Distances are cosine dissimilarities `d(u, v) = 1 − u·v` over unit rows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::synth::planted_clusters;
use crate::math::{dot, FeatureMatrix};
use crate::partition::{residual_prune, residual_prune_geometric, Removal};

const SLACK: f64 = 1e-9;

/// Coverage of the pruned tokens by the retained set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub delta_nominal: f64,
    /// Largest distance from a pruned token to its nearest retained token.
    pub cover_radius: f64,
    /// Longest removal → anchor chain, in hops; 0 without a removal log.
    pub max_chain_depth: usize,
    /// Pruned tokens farther from the retained set than their chain allows.
    pub violations: usize,
    pub retained: usize,
    pub pruned: usize,
}

impl CoverReport {
    /// In the depth-one regime every pruned token's anchor is itself
    /// retained, so the radius is provably at most `delta_nominal`.
    pub fn depth_one_bound_holds(&self) -> bool {
        self.cover_radius <= self.delta_nominal + SLACK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Largest measured `|d − d'|` over the compared pairs.
    pub epsilon_metric: f64,
    pub cover_radius: f64,
    pub cover_radius_perturbed: f64,
    pub delta: f64,
    /// `delta + epsilon_metric`.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CostMode {
    Budget { step_k: usize },
    Geometric { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: usize,
    pub mode: CostMode,
    pub sim_evals: u64,
    pub iterations: usize,
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostProbe {
    pub reports: Vec<CostReport>,
    /// Least-squares slope of `ln sim_evals` against `ln n`.
    pub growth_exponent: Option<f64>,
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - dot(a, b)
}

fn nearest_distance(token: usize, retained: &[usize], features: &FeatureMatrix) -> f64 {
    retained
        .iter()
        .map(|&r| cosine_distance(features.row(token), features.row(r)))
        .fold(f64::INFINITY, f64::min)
}

fn check_indices(indices: &[usize], features: &FeatureMatrix) -> Result<()> {
    match indices.iter().find(|&&i| i >= features.rows()) {
        Some(i) => Err(Error::Shape(format!("token {i} out of range for {} rows", features.rows()))),
        None => Ok(()),
    }
}

/// Depth of every token that appears as `removed` in the log.
fn chain_depths(log: &[Removal]) -> HashMap<usize, usize> {
    let anchor_of: HashMap<usize, usize> = log.iter().map(|r| (r.removed, r.anchor)).collect();
    anchor_of
        .keys()
        .map(|&start| {
            let mut depth = 0;
            let mut cur = start;
            while let Some(&next) = anchor_of.get(&cur) {
                depth += 1;
                cur = next;
                if depth > anchor_of.len() {
                    break;
                }
            }
            (start, depth)
        })
        .collect()
}

/// Cosine-distance bound after `depth` hops of at most `delta` each, using
/// the angular triangle inequality.
pub fn chain_bound(delta: f64, depth: usize) -> f64 {
    if depth <= 1 {
        return delta;
    }
    let hop = (1.0 - delta).clamp(-1.0, 1.0).acos();
    1.0 - (depth as f64 * hop).min(std::f64::consts::PI).cos()
}

/// Measures how well `retained` covers `pruned` under cosine distance.
///
/// `features` must have unit rows indexed by token. With a removal log, each
/// pruned token is held to the bound of its removal chain; otherwise to
/// `delta`.
pub fn check_cover(
    retained: &[usize],
    pruned: &[usize],
    features: &FeatureMatrix,
    delta: f64,
    removal_log: Option<&[Removal]>,
) -> Result<CoverReport> {
    check_indices(retained, features)?;
    check_indices(pruned, features)?;
    if retained.is_empty() && !pruned.is_empty() {
        return Err(Error::EmptyRetained { pruned: pruned.len() });
    }
    let depths = removal_log.map(chain_depths).unwrap_or_default();
    let mut cover_radius = 0.0f64;
    let mut max_chain_depth = 0;
    let mut violations = 0;
    for &p in pruned {
        let d = nearest_distance(p, retained, features);
        cover_radius = cover_radius.max(d);
        let depth = depths.get(&p).copied().unwrap_or(0);
        max_chain_depth = max_chain_depth.max(depth);
        if d > chain_bound(delta, depth) + SLACK {
            violations += 1;
        }
    }
    Ok(CoverReport {
        delta_nominal: delta,
        cover_radius,
        max_chain_depth,
        violations,
        retained: retained.len(),
        pruned: pruned.len(),
    })
}

/// Log entries whose anchor similarity, recomputed from `features`, is below `tau`.
pub fn lemma_violations(log: &[Removal], features: &FeatureMatrix, tau: f64) -> Result<usize> {
    let mut count = 0;
    for r in log {
        check_indices(&[r.removed, r.anchor], features)?;
        if dot(features.row(r.removed), features.row(r.anchor)) < tau {
            count += 1;
        }
    }
    Ok(count)
}

/// Checks that a `delta`-cover stays a `(delta + ε)`-cover when distances are
/// measured on `perturbed` rows, with ε the largest observed metric change.
///
/// ε is taken over all token pairs for up to 256 tokens, and over every pair
/// with a retained member beyond that.
pub fn check_stability(
    retained: &[usize],
    features: &FeatureMatrix,
    perturbed: &FeatureMatrix,
    delta: f64,
) -> Result<StabilityReport> {
    if features.rows() != perturbed.rows() || features.cols() != perturbed.cols() {
        return Err(Error::Shape(format!(
            "perturbed features are {}x{}, originals {}x{}",
            perturbed.rows(),
            perturbed.cols(),
            features.rows(),
            features.cols()
        )));
    }
    check_indices(retained, features)?;
    let n = features.rows();
    let mut is_retained = vec![false; n];
    retained.iter().for_each(|&r| is_retained[r] = true);
    let pruned: Vec<usize> = (0..n).filter(|&i| !is_retained[i]).collect();
    if retained.is_empty() && !pruned.is_empty() {
        return Err(Error::EmptyRetained { pruned: pruned.len() });
    }

    let change = |i: usize, j: usize| {
        (cosine_distance(features.row(i), features.row(j)) - cosine_distance(perturbed.row(i), perturbed.row(j))).abs()
    };
    let mut epsilon_metric = 0.0f64;
    if n <= 256 {
        for i in 0..n {
            for j in i + 1..n {
                epsilon_metric = epsilon_metric.max(change(i, j));
            }
        }
    } else {
        for i in 0..n {
            for &r in retained {
                epsilon_metric = epsilon_metric.max(change(i, r));
            }
        }
    }

    let radius = |f: &FeatureMatrix| pruned.iter().map(|&p| nearest_distance(p, retained, f)).fold(0.0, f64::max);
    let cover_radius = radius(features);
    let cover_radius_perturbed = radius(perturbed);
    let bound = delta + epsilon_metric;
    Ok(StabilityReport {
        epsilon_metric,
        cover_radius,
        cover_radius_perturbed,
        delta,
        bound,
        passed: cover_radius_perturbed <= bound + SLACK,
    })
}

/// Series prediction of the pairwise-evaluation count for `n` tokens.
///
/// Geometric: `n²/4 · 1/(1 − (1 − α)²)`. Budget: `Σ n_t²/4` with `n_t`
/// shrinking by `step_k` per pass until it reaches `t_div`.
pub fn predicted_cost(n: usize, t_div: usize, mode: CostMode) -> f64 {
    if n <= t_div {
        return 0.0;
    }
    match mode {
        CostMode::Geometric { alpha } => (n * n) as f64 / 4.0 / (1.0 - (1.0 - alpha).powi(2)),
        CostMode::Budget { step_k } => {
            let mut total = 0.0;
            let mut size = n;
            while size > t_div {
                total += (size * size) as f64 / 4.0;
                size = size.saturating_sub(step_k.max(1)).max(t_div);
            }
            total
        }
    }
}

/// Runs residual pruning on planted-cluster data at each size and compares the
/// evaluation counter with [`predicted_cost`].
pub fn probe_cost(n_values: &[usize], mode: CostMode, t_div: usize, seed: u64) -> Result<CostProbe> {
    let mut reports = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let clusters = (n / 16).clamp(1, 64).min(n.max(1));
        let (features, _) = planted_clusters(seed ^ n as u64, n, 16, clusters, 0.9)?;
        let candidates: Vec<usize> = (0..n).collect();
        let outcome = match mode {
            CostMode::Budget { step_k } => residual_prune(&candidates, &features, t_div, step_k)?,
            CostMode::Geometric { alpha } => residual_prune_geometric(&candidates, &features, t_div, alpha)?,
        };
        let predicted = predicted_cost(n, t_div, mode);
        let ratio = if predicted > 0.0 { outcome.sim_evals as f64 / predicted } else { 0.0 };
        reports.push(CostReport { n, mode, sim_evals: outcome.sim_evals, iterations: outcome.iterations, predicted, ratio });
    }
    let points: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.sim_evals > 0)
        .map(|r| ((r.n as f64).ln(), (r.sim_evals as f64).ln()))
        .collect();
    Ok(CostProbe { reports, growth_exponent: slope(&points) })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
