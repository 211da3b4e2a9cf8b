//! Numerical primitives shared by the relevance and partition stages.
//!
//! Every reduction in this module accumulates left to right over a row, so
//! results are bit-identical across runs for the same input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Small positive constant guarding the denominators of min-max
/// normalization, text gating and log-domain fusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Epsilon(f64);

impl Epsilon {
    pub const DEFAULT: Epsilon = Epsilon(1e-6);

    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Epsilon(value))
        } else {
            Err(Error::Parameter(format!("epsilon must be positive, got {value}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Epsilon {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Epsilon::new(value)
    }
}

impl From<Epsilon> for f64 {
    fn from(eps: Epsilon) -> f64 {
        eps.0
    }
}

/// Declared value range of a [`ScoreVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeTag {
    Raw,
    UnitInterval,
    Simplex,
}

impl RangeTag {
    fn name(self) -> &'static str {
        match self {
            RangeTag::Raw => "raw",
            RangeTag::UnitInterval => "unit-interval",
            RangeTag::Simplex => "simplex",
        }
    }
}

/// One score per visual token, tagged with the range it is known to lie in.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    data: Vec<f64>,
    tag: RangeTag,
}

impl ScoreVector {
    pub fn raw(data: Vec<f64>) -> Result<Self> {
        Self::tagged(data, RangeTag::Raw)
    }

    pub fn unit_interval(data: Vec<f64>) -> Result<Self> {
        Self::tagged(data, RangeTag::UnitInterval)
    }

    pub fn simplex(data: Vec<f64>) -> Result<Self> {
        Self::tagged(data, RangeTag::Simplex)
    }

    /// Builds a vector and checks the invariant implied by `tag`.
    pub fn tagged(data: Vec<f64>, tag: RangeTag) -> Result<Self> {
        check_finite(&data)?;
        match tag {
            RangeTag::Raw => {}
            RangeTag::UnitInterval => {
                if let Some((index, &value)) =
                    data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v))
                {
                    return Err(Error::OutOfRange { index, value, tag: tag.name() });
                }
            }
            RangeTag::Simplex => {
                if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| **v < 0.0) {
                    return Err(Error::OutOfRange { index, value, tag: tag.name() });
                }
                let total: f64 = data.iter().sum();
                if (total - 1.0).abs() > 1e-6 {
                    return Err(Error::OutOfRange { index: 0, value: total, tag: tag.name() });
                }
            }
        }
        Ok(ScoreVector { data, tag })
    }

    pub(crate) fn from_parts(data: Vec<f64>, tag: RangeTag) -> Self {
        ScoreVector { data, tag }
    }

    pub fn zeros(len: usize) -> Self {
        ScoreVector { data: vec![0.0; len], tag: RangeTag::UnitInterval }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tag(&self) -> RangeTag {
        self.tag
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: usize) -> f64 {
        self.data[index]
    }

    /// Same values, re-tagged as raw scores.
    pub fn into_raw(self) -> Self {
        ScoreVector { data: self.data, tag: RangeTag::Raw }
    }
}

/// Dense `rows × cols` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Shape("feature matrix needs at least one column".into()));
        }
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != cols) {
            return Err(Error::Shape(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].as_ref().len()
            )));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        FeatureMatrix::new(rows.len(), cols, data)
    }

    /// An empty matrix with `cols` columns.
    pub fn empty(cols: usize) -> Result<Self> {
        FeatureMatrix::new(0, cols, Vec::new())
    }

    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        FeatureMatrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        FeatureMatrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> FeatureMatrix {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        FeatureMatrix { rows: self.cols, cols: self.rows, data }
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<FeatureMatrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::Shape(format!("row index {i} out of range for {} rows", self.rows)));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(FeatureMatrix { rows: indices.len(), cols: self.cols, data })
    }

    /// True when every entry is exactly zero.
    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index, value: data[index] }),
        None => Ok(()),
    }
}

/// Left-to-right dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

#[inline]
pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `(v - min) / (max - min + eps)`, tagged unit-interval.
pub fn minmax_normalize(v: &ScoreVector, eps: Epsilon) -> Result<ScoreVector> {
    let data = minmax_slice(v.as_slice(), eps)?;
    Ok(ScoreVector::from_parts(data, RangeTag::UnitInterval))
}

pub(crate) fn minmax_slice(v: &[f64], eps: Epsilon) -> Result<Vec<f64>> {
    let (min, max) = min_max(v).ok_or(Error::EmptyScores)?;
    let denom = max - min + eps.get();
    Ok(v.iter().map(|&x| (x - min) / denom).collect())
}

fn min_max(v: &[f64]) -> Option<(f64, f64)> {
    let first = *v.first()?;
    Some(v.iter().fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x))))
}

/// Scales every nonzero row to unit Euclidean norm. All-zero rows stay zero.
pub fn l2_normalize_rows(m: &FeatureMatrix) -> FeatureMatrix {
    let mut data = m.data.clone();
    for row in data.chunks_exact_mut(m.cols) {
        let norm = l2_norm(row);
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    FeatureMatrix { rows: m.rows, cols: m.cols, data }
}

/// Max-subtracted softmax of `v / temperature`.
pub fn softmax(v: &ScoreVector, temperature: f64) -> Result<ScoreVector> {
    let data = softmax_slice(v.as_slice(), temperature)?;
    Ok(ScoreVector::from_parts(data, RangeTag::Simplex))
}

pub(crate) fn softmax_slice(v: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Parameter(format!("temperature must be positive, got {temperature}")));
    }
    let (_, max) = min_max(v).ok_or(Error::EmptyScores)?;
    let shift = max / temperature;
    let mut out: Vec<f64> = v.iter().map(|&x| (x / temperature - shift).exp()).collect();
    let total = out.iter().fold(0.0, |acc, x| acc + x);
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Linear-interpolation quantile over the sorted values.
pub fn quantile(v: &ScoreVector, q: f64) -> Result<f64> {
    quantile_slice(v.as_slice(), q)
}

pub(crate) fn quantile_slice(v: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Parameter(format!("quantile level must lie in [0, 1], got {q}")));
    }
    if v.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Pairwise dot products: `out[i][j] = a.row(i) · b.row(j)`.
pub fn similarity_matrix(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<FeatureMatrix> {
    if a.cols != b.cols {
        return Err(Error::Shape(format!(
            "similarity needs equal feature widths, got {} and {}",
            a.cols, b.cols
        )));
    }
    if b.rows == 0 {
        return Err(Error::Shape("similarity against an empty matrix".into()));
    }
    let mut data = Vec::with_capacity(a.rows * b.rows);
    for ra in a.row_iter() {
        data.extend(b.row_iter().map(|rb| dot(ra, rb)));
    }
    Ok(FeatureMatrix { rows: a.rows, cols: b.rows, data })
}
