//! Per-token relevance: query-agnostic saliency from encoder attention,
//! query-conditioned relevance from projected-embedding similarity, and their
//! log-domain fusion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{
    self, l2_norm, l2_normalize_rows, minmax_slice, quantile_slice, softmax_slice, Epsilon,
    FeatureMatrix, RangeTag, ScoreVector,
};

/// Affine map from visual feature space into the language-model space.
///
/// `weight` is `D_llm × D_v`; a visual row `x` maps to `weight · x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    weight: FeatureMatrix,
    bias: Option<Vec<f64>>,
}

impl Projector {
    pub fn new(weight: FeatureMatrix, bias: Option<Vec<f64>>) -> Result<Self> {
        if weight.rows() == 0 {
            return Err(Error::Shape("projector weight has no output rows".into()));
        }
        if let Some(b) = &bias {
            if b.len() != weight.rows() {
                return Err(Error::Shape(format!(
                    "projector bias has length {}, expected {}",
                    b.len(),
                    weight.rows()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter("projector bias must be finite".into()));
            }
        }
        Ok(Projector { weight, bias })
    }

    pub fn identity(dim: usize) -> Self {
        Projector { weight: FeatureMatrix::identity(dim), bias: None }
    }

    pub fn weight(&self) -> &FeatureMatrix {
        &self.weight
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Temperatures and gating constants of the contrastive sharpening stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpenParams {
    pub tau_agg: f64,
    pub tau_sharp: f64,
    pub gamma: f64,
    pub top_p: f64,
    pub attenuation: f64,
}

impl Default for SharpenParams {
    fn default() -> Self {
        SharpenParams { tau_agg: 0.05, tau_sharp: 0.01, gamma: 2.5, top_p: 0.005, attenuation: 0.1 }
    }
}

impl SharpenParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("tau_agg", self.tau_agg), ("tau_sharp", self.tau_sharp), ("gamma", self.gamma)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.top_p > 0.0 && self.top_p < 1.0) {
            return Err(Error::Parameter(format!("top_p must lie in (0, 1), got {}", self.top_p)));
        }
        if !(0.0..=1.0).contains(&self.attenuation) {
            return Err(Error::Parameter(format!(
                "attenuation must lie in [0, 1], got {}",
                self.attenuation
            )));
        }
        Ok(())
    }
}

/// Weight of the extrinsic term in the geometric mean, plus the shared epsilon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub eta: f64,
    pub eps: Epsilon,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams { eta: 0.5, eps: Epsilon::DEFAULT }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Parameter(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        Ok(())
    }
}

/// Min-max normalized, head-averaged encoder attention.
pub fn intrinsic_saliency(attention: &ScoreVector, eps: Epsilon) -> Result<ScoreVector> {
    if let Some((index, &value)) = attention.as_slice().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeAttention { index, value });
    }
    math::minmax_normalize(attention, eps)
}

/// Projects visual rows into the language-model space and L2-normalizes them.
pub fn project_visual(v: &FeatureMatrix, proj: &Projector) -> Result<FeatureMatrix> {
    if v.cols() != proj.input_dim() {
        return Err(Error::Shape(format!(
            "visual features have width {}, projector expects {}",
            v.cols(),
            proj.input_dim()
        )));
    }
    let mut out = math::similarity_matrix(v, &proj.weight)?;
    if let Some(bias) = &proj.bias {
        let cols = out.cols();
        let mut data = out.as_slice().to_vec();
        for row in data.chunks_exact_mut(cols) {
            row.iter_mut().zip(bias).for_each(|(x, b)| *x += b);
        }
        out = FeatureMatrix::from_parts(v.rows(), cols, data);
    }
    Ok(l2_normalize_rows(&out))
}

/// Text embeddings after norm-based gating and L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedText {
    pub tokens: FeatureMatrix,
    /// Gate per text token, `‖t_j‖ / (max_k ‖t_k‖ + eps)`.
    pub gates: Vec<f64>,
}

/// Scales each text token by its relative norm, then L2-normalizes.
///
/// For nonzero rows the normalization cancels the gate; the gates are kept on
/// the result so callers can inspect or reuse them.
pub fn gate_text(t_raw: &FeatureMatrix, eps: Epsilon) -> Result<GatedText> {
    if t_raw.rows() == 0 {
        return Err(Error::NoTextTokens);
    }
    let norms: Vec<f64> = t_raw.row_iter().map(l2_norm).collect();
    let max_norm = norms.iter().fold(0.0f64, |m, &n| m.max(n));
    let gates: Vec<f64> = norms.iter().map(|n| n / (max_norm + eps.get())).collect();

    let cols = t_raw.cols();
    let mut data = t_raw.as_slice().to_vec();
    for (row, g) in data.chunks_exact_mut(cols).zip(&gates) {
        row.iter_mut().for_each(|x| *x *= g);
    }
    let gated = FeatureMatrix::from_parts(t_raw.rows(), cols, data);
    Ok(GatedText { tokens: l2_normalize_rows(&gated), gates })
}

/// Collapses each row of the `N × L_t` cross-similarity matrix into one score
/// with a temperature-softmax weighted sum.
pub fn aggregate_similarity(s_cross: &FeatureMatrix, tau_agg: f64) -> Result<ScoreVector> {
    if s_cross.cols() == 0 {
        return Err(Error::NoTextTokens);
    }
    let mut out = Vec::with_capacity(s_cross.rows());
    for row in s_cross.row_iter() {
        let weights = softmax_slice(row, tau_agg)?;
        out.push(weights.iter().zip(row).fold(0.0, |acc, (w, s)| acc + w * s));
    }
    Ok(ScoreVector::from_parts(out, RangeTag::Raw))
}

/// Intermediate vectors of [`sharpen`], exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpenTrace {
    pub softmaxed: Vec<f64>,
    pub powered: Vec<f64>,
    pub normalized: Vec<f64>,
    pub threshold: f64,
    pub gated: Vec<f64>,
    pub extrinsic: ScoreVector,
}

/// Low-temperature softmax over patches, power-law enhancement, min-max
/// rescale, top-p attenuation and a final min-max rescale.
pub fn sharpen(s_text: &ScoreVector, p: &SharpenParams) -> Result<ScoreVector> {
    Ok(sharpen_traced(s_text, p, Epsilon::DEFAULT)?.extrinsic)
}

pub fn sharpen_traced(s_text: &ScoreVector, p: &SharpenParams, eps: Epsilon) -> Result<SharpenTrace> {
    p.validate()?;
    let softmaxed = softmax_slice(s_text.as_slice(), p.tau_sharp)?;
    let powered: Vec<f64> = softmaxed.iter().map(|x| x.powf(p.gamma)).collect();
    let normalized = minmax_slice(&powered, eps)?;
    let threshold = quantile_slice(&normalized, 1.0 - p.top_p)?;
    let gated: Vec<f64> = normalized
        .iter()
        .map(|&x| if x >= threshold { x } else { p.attenuation * x })
        .collect();
    let extrinsic = ScoreVector::from_parts(minmax_slice(&gated, eps)?, RangeTag::UnitInterval);
    Ok(SharpenTrace { softmaxed, powered, normalized, threshold, gated, extrinsic })
}

/// Unnormalized weighted geometric mean, computed through logs.
pub fn fuse_raw(intrinsic: &ScoreVector, extrinsic: &ScoreVector, f: &FusionParams) -> Result<Vec<f64>> {
    f.validate()?;
    if intrinsic.len() != extrinsic.len() {
        return Err(Error::Shape(format!(
            "fusion inputs differ in length: {} vs {}",
            intrinsic.len(),
            extrinsic.len()
        )));
    }
    let eps = f.eps.get();
    Ok(intrinsic
        .as_slice()
        .iter()
        .zip(extrinsic.as_slice())
        .map(|(&i, &e)| ((1.0 - f.eta) * (i + eps).ln() + f.eta * (e + eps).ln()).exp())
        .collect())
}

/// Log-domain fusion followed by min-max normalization.
pub fn fuse(intrinsic: &ScoreVector, extrinsic: &ScoreVector, f: &FusionParams) -> Result<ScoreVector> {
    for (name, v) in [("intrinsic", intrinsic), ("extrinsic", extrinsic)] {
        if v.tag() != RangeTag::UnitInterval {
            return Err(Error::Parameter(format!("{name} scores must be unit-interval tagged")));
        }
    }
    let raw = fuse_raw(intrinsic, extrinsic, f)?;
    Ok(ScoreVector::from_parts(minmax_slice(&raw, f.eps)?, RangeTag::UnitInterval))
}

/// Query-conditioned relevance for every visual token.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsic {
    pub scores: ScoreVector,
    /// Set when the query was absent or all-zero; `scores` is then all zeros.
    pub no_query: bool,
    /// Text gates, empty on the no-query path.
    pub gates: Vec<f64>,
}

pub fn extrinsic_relevance(
    v: &FeatureMatrix,
    t_raw: Option<&FeatureMatrix>,
    proj: &Projector,
    sp: &SharpenParams,
    eps: Epsilon,
) -> Result<Extrinsic> {
    let text = match t_raw {
        Some(t) if t.rows() > 0 && !t.is_all_zero() => t,
        _ => {
            return Ok(Extrinsic { scores: ScoreVector::zeros(v.rows()), no_query: true, gates: Vec::new() })
        }
    };
    if text.cols() != proj.output_dim() {
        return Err(Error::Shape(format!(
            "text embeddings have width {}, projector outputs {}",
            text.cols(),
            proj.output_dim()
        )));
    }
    let projected = project_visual(v, proj)?;
    if v.rows() == 0 {
        return Ok(Extrinsic { scores: ScoreVector::zeros(0), no_query: false, gates: Vec::new() });
    }
    let gated = gate_text(text, eps)?;
    let s_cross = math::similarity_matrix(&projected, &gated.tokens)?;
    let s_text = aggregate_similarity(&s_cross, sp.tau_agg)?;
    let scores = sharpen_traced(&s_text, sp, eps)?.extrinsic;
    Ok(Extrinsic { scores, no_query: false, gates: gated.gates })
}
