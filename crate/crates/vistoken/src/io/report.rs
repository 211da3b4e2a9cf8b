//! JSON result documents.
//!
//! Keys appear in a fixed order and every float is rounded to nine
//! significant digits, so identical inputs give byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ScoreVector;
use crate::partition::{PruneMode, SelectionConfig, SelectionResult};

/// Rounds to nine significant digits.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Effective selection settings, echoed into every result document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub t_keep: usize,
    pub t_imp: usize,
    pub t_div: usize,
    pub split_ratio: f64,
    pub step_k: usize,
    pub mode: PruneMode,
    pub tau_threshold: f64,
    pub alpha: f64,
    pub eta: f64,
    pub eps: f64,
    pub tau_agg: f64,
    pub tau_sharp: f64,
    pub gamma: f64,
    pub top_p: f64,
    pub attenuation: f64,
    pub seed: u64,
}

impl ConfigEcho {
    pub fn new(cfg: &SelectionConfig, seed: u64) -> Self {
        let (t_imp, t_div) = cfg.budgets();
        ConfigEcho {
            t_keep: cfg.t_keep,
            t_imp,
            t_div,
            split_ratio: sig9(cfg.split_ratio),
            step_k: cfg.step_k,
            mode: cfg.mode,
            tau_threshold: sig9(cfg.tau_threshold),
            alpha: sig9(cfg.alpha),
            eta: sig9(cfg.fusion.eta),
            eps: sig9(cfg.fusion.eps.get()),
            tau_agg: sig9(cfg.sharpen.tau_agg),
            tau_sharp: sig9(cfg.sharpen.tau_sharp),
            gamma: sig9(cfg.sharpen.gamma),
            top_p: sig9(cfg.sharpen.top_p),
            attenuation: sig9(cfg.sharpen.attenuation),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultStats {
    pub n_tokens: usize,
    pub sim_evals: u64,
    pub iterations: usize,
    pub prune_ratio: f64,
    pub no_query: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub kept_indices: Vec<usize>,
    pub important_indices: Vec<usize>,
    pub diverse_indices: Vec<usize>,
    pub fused_scores: Vec<f64>,
    pub config_echo: ConfigEcho,
    pub stats: ResultStats,
}

impl ResultDocument {
    pub fn new(result: &SelectionResult, cfg: &SelectionConfig, seed: u64) -> Self {
        ResultDocument {
            kept_indices: result.kept(),
            important_indices: result.important.clone(),
            diverse_indices: result.diverse.clone(),
            fused_scores: result.fused_scores.as_slice().iter().map(|&s| sig9(s)).collect(),
            config_echo: ConfigEcho::new(cfg, seed),
            stats: ResultStats {
                n_tokens: result.fused_scores.len(),
                sim_evals: result.sim_eval_count,
                iterations: result.iterations,
                prune_ratio: sig9(result.prune_ratio()),
                no_query: result.no_query,
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The fused scores as a unit-interval vector.
    pub fn scores(&self) -> Result<ScoreVector> {
        ScoreVector::unit_interval(self.fused_scores.clone())
    }
}

/// Writes the result document for `result` to `path`.
pub fn write_result(result: &SelectionResult, cfg: &SelectionConfig, seed: u64, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &ResultDocument::new(result, cfg, seed).to_json()?)
}

pub fn read_result(path: impl AsRef<Path>) -> Result<ResultDocument> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::File { path: path.to_owned(), source })?;
    ResultDocument::from_json(&text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::File { path: path.to_owned(), source })
}
