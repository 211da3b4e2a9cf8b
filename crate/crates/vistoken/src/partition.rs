//! Token budget partitioning and diversity-preserving residual pruning.
//!
//! The residual set is pruned by repeatedly splitting it by position into an
//! even half `A` and an odd half `B`, scoring every member of `A` by its best
//! match in `B`, and dropping the most redundant members of `A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, l2_normalize_rows, Epsilon, FeatureMatrix, ScoreVector};
use crate::relevance::{self, FusionParams, Projector, SharpenParams};

/// How the residual candidates are pruned down to the diverse set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneMode {
    /// Fixed step: at most `step_k` removals per pass until the budget is met.
    Budget,
    /// Remove every even-half member whose best match reaches `tau_threshold`.
    Threshold,
    /// Remove `⌈alpha · |resid|⌉` members per pass until the budget is met.
    Geometric,
}

impl std::str::FromStr for PruneMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "budget" => Ok(PruneMode::Budget),
            "threshold" => Ok(PruneMode::Threshold),
            "geometric" => Ok(PruneMode::Geometric),
            other => Err(Error::Parameter(format!("unknown prune mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for PruneMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PruneMode::Budget => "budget",
            PruneMode::Threshold => "threshold",
            PruneMode::Geometric => "geometric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub t_keep: usize,
    pub split_ratio: f64,
    pub step_k: usize,
    pub mode: PruneMode,
    pub tau_threshold: f64,
    pub alpha: f64,
    pub sharpen: SharpenParams,
    pub fusion: FusionParams,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            t_keep: 128,
            split_ratio: 0.5,
            step_k: 8,
            mode: PruneMode::Budget,
            tau_threshold: 0.9,
            alpha: 0.5,
            sharpen: SharpenParams::default(),
            fusion: FusionParams::default(),
        }
    }
}

impl SelectionConfig {
    pub fn with_keep(t_keep: usize) -> Self {
        SelectionConfig { t_keep, ..Default::default() }
    }

    /// `(T_imp, T_div)` with `T_imp = round(split_ratio · t_keep)`.
    pub fn budgets(&self) -> (usize, usize) {
        let t_imp = ((self.split_ratio * self.t_keep as f64).round() as usize).min(self.t_keep);
        (t_imp, self.t_keep - t_imp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return Err(Error::Parameter(format!("split ratio must lie in [0, 1], got {}", self.split_ratio)));
        }
        if self.step_k == 0 {
            return Err(Error::Parameter("step_k must be at least 1".into()));
        }
        match self.mode {
            PruneMode::Threshold if !(self.tau_threshold > 0.0 && self.tau_threshold < 1.0) => {
                return Err(Error::Parameter(format!(
                    "tau_threshold must lie in (0, 1), got {}",
                    self.tau_threshold
                )))
            }
            PruneMode::Geometric if !(self.alpha > 0.0 && self.alpha < 1.0) => {
                return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", self.alpha)))
            }
            _ => {}
        }
        self.sharpen.validate()?;
        self.fusion.validate()
    }
}

/// One threshold-mode removal: `removed` was dropped because `anchor`, which
/// survived that pass, had similarity `similarity` with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub removed: usize,
    pub anchor: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub important: Vec<usize>,
    pub diverse: Vec<usize>,
    pub fused_scores: ScoreVector,
    pub sim_eval_count: u64,
    pub iterations: usize,
    pub no_query: bool,
    /// Populated in threshold mode only.
    pub removal_log: Vec<Removal>,
}

impl SelectionResult {
    /// Important indices followed by diverse indices.
    pub fn kept(&self) -> Vec<usize> {
        self.important.iter().chain(&self.diverse).copied().collect()
    }

    pub fn prune_ratio(&self) -> f64 {
        prune_ratio(self.fused_scores.len(), self.important.len() + self.diverse.len())
    }
}

/// Fraction of tokens discarded when keeping `kept` out of `n`.
pub fn prune_ratio(n: usize, kept: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 - kept.min(n) as f64 / n as f64
    }
}

/// Indices sorted by descending score, ties by ascending index.
pub fn argsort_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Splits the descending order into the top `t_imp` and the remaining candidates.
pub fn partition_important(fused: &ScoreVector, t_imp: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if t_imp > fused.len() {
        return Err(Error::Parameter(format!(
            "cannot mark {t_imp} tokens important out of {}",
            fused.len()
        )));
    }
    let mut order = argsort_desc(fused.as_slice());
    let candidates = order.split_off(t_imp);
    Ok((order, candidates))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneOutcome {
    pub diverse: Vec<usize>,
    pub sim_evals: u64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdOutcome {
    pub diverse: Vec<usize>,
    pub removal_log: Vec<Removal>,
    pub sim_evals: u64,
    pub iterations: usize,
}

fn check_candidate_features(candidates: &[usize], features: &FeatureMatrix) -> Result<()> {
    if candidates.len() != features.rows() {
        return Err(Error::Shape(format!(
            "{} candidates but {} candidate feature rows",
            candidates.len(),
            features.rows()
        )));
    }
    Ok(())
}

/// Best match in the odd half for each even-half member.
///
/// `resid` holds candidate positions. Returns `(score, anchor_position)` per
/// even member; the anchor is the first odd member attaining the maximum.
fn bipartite_scores(resid: &[usize], features: &FeatureMatrix) -> Vec<(f64, usize)> {
    let odd: Vec<usize> = resid.iter().skip(1).step_by(2).copied().collect();
    resid
        .iter()
        .step_by(2)
        .map(|&a| {
            let row = features.row(a);
            odd.iter().fold((f64::NEG_INFINITY, usize::MAX), |best, &b| {
                let s = dot(row, features.row(b));
                if s > best.0 {
                    (s, b)
                } else {
                    best
                }
            })
        })
        .collect()
}

fn pair_count(len: usize) -> u64 {
    let even = len.div_ceil(2) as u64;
    let odd = (len / 2) as u64;
    even * odd
}

/// Removes `r` members of the residual list, choosing by decreasing pair
/// score and, on ties, the later position first.
fn remove_most_redundant(resid: &mut Vec<usize>, features: &FeatureMatrix, r: usize) {
    if resid.len() < 2 {
        // No odd half to compare against: drop from the low-score end.
        let keep = resid.len().saturating_sub(r);
        resid.truncate(keep);
        return;
    }
    let scores = bipartite_scores(resid, features);
    let mut even: Vec<(usize, f64)> =
        resid.iter().step_by(2).zip(&scores).map(|(&pos, &(s, _))| (pos, s)).collect();
    even.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.cmp(&a.0)));
    let mut doomed: Vec<usize> = even.iter().take(r).map(|&(pos, _)| pos).collect();
    doomed.sort_unstable();
    resid.retain(|p| doomed.binary_search(p).is_err());
}

fn prune_with_step(
    candidates: &[usize],
    features: &FeatureMatrix,
    t_div: usize,
    step: impl Fn(usize) -> usize,
) -> Result<PruneOutcome> {
    check_candidate_features(candidates, features)?;
    let mut resid: Vec<usize> = (0..candidates.len()).collect();
    let mut sim_evals = 0u64;
    let mut iterations = 0usize;
    while resid.len() > t_div {
        let excess = resid.len() - t_div;
        // only even-half members are removable in one pass
        let r = step(resid.len()).max(1).min(excess).min(resid.len().div_ceil(2));
        sim_evals += pair_count(resid.len());
        remove_most_redundant(&mut resid, features, r);
        iterations += 1;
    }
    Ok(PruneOutcome { diverse: resid.iter().map(|&p| candidates[p]).collect(), sim_evals, iterations })
}

/// Fixed-step residual pruning down to `t_div` candidates.
///
/// `features` holds the L2-normalized candidate rows in candidate order.
/// Returns the surviving original indices in candidate order. A `t_div` at or
/// above the candidate count leaves everything in place.
pub fn residual_prune(
    candidates: &[usize],
    features: &FeatureMatrix,
    t_div: usize,
    step_k: usize,
) -> Result<PruneOutcome> {
    if step_k == 0 {
        return Err(Error::Parameter("step_k must be at least 1".into()));
    }
    prune_with_step(candidates, features, t_div, |_| step_k)
}

/// Residual pruning removing a fixed fraction `alpha` of the residual set per pass.
pub fn residual_prune_geometric(
    candidates: &[usize],
    features: &FeatureMatrix,
    t_div: usize,
    alpha: f64,
) -> Result<PruneOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    prune_with_step(candidates, features, t_div, |len| (alpha * len as f64).ceil() as usize)
}

/// Residual pruning driven by a similarity threshold instead of a budget.
///
/// Each pass removes every even-half member whose best odd-half match is at
/// least `tau`; passes repeat until one removes nothing.
pub fn residual_prune_threshold(
    candidates: &[usize],
    features: &FeatureMatrix,
    tau: f64,
) -> Result<ThresholdOutcome> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Parameter(format!("tau must lie in (0, 1), got {tau}")));
    }
    check_candidate_features(candidates, features)?;
    let mut resid: Vec<usize> = (0..candidates.len()).collect();
    let mut removal_log = Vec::new();
    let mut sim_evals = 0u64;
    let mut iterations = 0usize;
    while resid.len() >= 2 {
        let scores = bipartite_scores(&resid, features);
        sim_evals += pair_count(resid.len());
        iterations += 1;
        let mut doomed = Vec::new();
        for (&pos, &(s, anchor)) in resid.iter().step_by(2).zip(&scores) {
            if s >= tau {
                doomed.push(pos);
                removal_log.push(Removal { removed: candidates[pos], anchor: candidates[anchor], similarity: s });
            }
        }
        if doomed.is_empty() {
            break;
        }
        resid.retain(|p| doomed.binary_search(p).is_err());
    }
    Ok(ThresholdOutcome {
        diverse: resid.iter().map(|&p| candidates[p]).collect(),
        removal_log,
        sim_evals,
        iterations,
    })
}

/// End-to-end selection: saliency, relevance, fusion, important split and
/// residual pruning.
///
/// Without a usable query the fused score is the intrinsic saliency itself.
pub fn select_tokens(
    v: &FeatureMatrix,
    attention: &ScoreVector,
    t_raw: Option<&FeatureMatrix>,
    proj: &Projector,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    cfg.validate()?;
    if attention.len() != v.rows() {
        return Err(Error::Shape(format!(
            "attention has {} entries for {} visual tokens",
            attention.len(),
            v.rows()
        )));
    }
    let n = v.rows();
    let eps: Epsilon = cfg.fusion.eps;
    let extrinsic = relevance::extrinsic_relevance(v, t_raw, proj, &cfg.sharpen, eps)?;
    let no_query = extrinsic.no_query;
    let fused_scores = if n == 0 {
        ScoreVector::zeros(0)
    } else {
        let intrinsic = relevance::intrinsic_saliency(attention, eps)?;
        if no_query {
            intrinsic
        } else {
            relevance::fuse(&intrinsic, &extrinsic.scores, &cfg.fusion)?
        }
    };

    if n <= cfg.t_keep {
        return Ok(SelectionResult {
            important: argsort_desc(fused_scores.as_slice()),
            diverse: Vec::new(),
            fused_scores,
            sim_eval_count: 0,
            iterations: 0,
            no_query,
            removal_log: Vec::new(),
        });
    }

    let (t_imp, t_div) = cfg.budgets();
    let (important, candidates) = partition_important(&fused_scores, t_imp)?;
    let cand_features = l2_normalize_rows(&v.select_rows(&candidates)?);
    let (diverse, sim_eval_count, iterations, removal_log) = match cfg.mode {
        PruneMode::Budget => {
            let o = residual_prune(&candidates, &cand_features, t_div, cfg.step_k)?;
            (o.diverse, o.sim_evals, o.iterations, Vec::new())
        }
        PruneMode::Geometric => {
            let o = residual_prune_geometric(&candidates, &cand_features, t_div, cfg.alpha)?;
            (o.diverse, o.sim_evals, o.iterations, Vec::new())
        }
        PruneMode::Threshold => {
            let o = residual_prune_threshold(&candidates, &cand_features, cfg.tau_threshold)?;
            (o.diverse, o.sim_evals, o.iterations, o.removal_log)
        }
    };
    Ok(SelectionResult { important, diverse, fused_scores, sim_eval_count, iterations, no_query, removal_log })
}

/// True when both score vectors induce the same stable descending order.
pub fn same_ranking(a: &[f64], b: &[f64]) -> bool {
    argsort_desc(a) == argsort_desc(b)
}
