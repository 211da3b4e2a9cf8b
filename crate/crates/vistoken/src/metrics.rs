//! Selection-quality metrics over a token grid with a ground-truth box:
//! centroid distance, score-map entropy and token–box IoU.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ScoreVector;

/// Row-major layout of visual tokens, e.g. 24×24 for 576 patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenGrid {
    pub height: usize,
    pub width: usize,
}

impl TokenGrid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Parameter(format!("grid {height}x{width} is empty")));
        }
        Ok(TokenGrid { height, width })
    }

    /// Most square grid holding `n` tokens: the height is the largest divisor
    /// of `n` not above `√n`.
    pub fn for_tokens(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("no tokens to lay out".into()));
        }
        let height = (1..=n).take_while(|h| h * h <= n).filter(|h| n.is_multiple_of(*h)).last().unwrap_or(1);
        TokenGrid::new(height, n / height)
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(row, col)` of a token index.
    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::Shape(format!(
                "{n} scores for a {}x{} grid",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for TokenGrid {
    type Err = Error;
    /// Parses `HxW`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("grid must look like 24x24, got {s:?}"));
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        TokenGrid::new(h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?)
    }
}

/// Inclusive rectangle of grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub row_min: usize,
    pub col_min: usize,
    pub row_max: usize,
    pub col_max: usize,
}

impl GroundTruthBox {
    pub fn new(row_min: usize, col_min: usize, row_max: usize, col_max: usize) -> Result<Self> {
        if row_min > row_max || col_min > col_max {
            return Err(Error::Parameter(format!(
                "box ({row_min},{col_min})-({row_max},{col_max}) is inverted"
            )));
        }
        Ok(GroundTruthBox { row_min, col_min, row_max, col_max })
    }

    pub fn check_in(&self, grid: &TokenGrid) -> Result<()> {
        if self.row_max >= grid.height || self.col_max >= grid.width || self.row_min > self.row_max || self.col_min > self.col_max {
            return Err(Error::Parameter(format!(
                "box ({},{})-({},{}) does not fit a {}x{} grid",
                self.row_min, self.col_min, self.row_max, self.col_max, grid.height, grid.width
            )));
        }
        Ok(())
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }

    pub fn area(&self) -> usize {
        (self.row_max - self.row_min + 1) * (self.col_max - self.col_min + 1)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.row_min + self.row_max) as f64 / 2.0,
            (self.col_min + self.col_max) as f64 / 2.0,
        )
    }

    /// Token indices covered by the box, ascending.
    pub fn cells(&self, grid: &TokenGrid) -> Vec<usize> {
        (self.row_min..=self.row_max)
            .flat_map(|r| (self.col_min..=self.col_max).map(move |c| grid.index(r, c)))
            .collect()
    }
}

impl std::str::FromStr for GroundTruthBox {
    type Err = Error;
    /// Parses `row_min,col_min,row_max,col_max`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parameter(format!("box must be four integers r0,c0,r1,c1, got {s:?}")))?;
        match parts[..] {
            [r0, c0, r1, c1] => GroundTruthBox::new(r0, c0, r1, c1),
            _ => Err(Error::Parameter(format!("box must be four integers r0,c0,r1,c1, got {s:?}"))),
        }
    }
}

/// Distance in cell units between the score-weighted centroid and the box center.
pub fn attention_distance(scores: &ScoreVector, grid: &TokenGrid, bx: &GroundTruthBox) -> Result<f64> {
    grid.check_len(scores.len())?;
    bx.check_in(grid)?;
    let (mut mass, mut row, mut col) = (0.0, 0.0, 0.0);
    for (i, &s) in scores.as_slice().iter().enumerate() {
        if s < 0.0 {
            return Err(Error::Parameter(format!("negative score {s} at index {i}")));
        }
        let (r, c) = grid.cell(i);
        mass += s;
        row += s * r as f64;
        col += s * c as f64;
    }
    if mass <= 0.0 {
        return Err(Error::NoFocusMass);
    }
    let (cr, cc) = bx.center();
    Ok((row / mass - cr).hypot(col / mass - cc))
}

/// Shannon entropy in nats of the scores normalized to sum to one.
pub fn score_entropy(scores: &ScoreVector) -> Result<f64> {
    let data = scores.as_slice();
    if let Some((i, &s)) = data.iter().enumerate().find(|(_, s)| **s < 0.0) {
        return Err(Error::Parameter(format!("negative score {s} at index {i}")));
    }
    let total = data.iter().fold(0.0, |acc, s| acc + s);
    if total <= 0.0 {
        return Err(Error::NoFocusMass);
    }
    Ok(data
        .iter()
        .filter(|&&s| s > 0.0)
        .map(|&s| {
            let p = s / total;
            -p * p.ln()
        })
        .fold(0.0, |acc, h| acc + h))
}

/// Intersection over union of the selected cells and the box cells.
pub fn token_box_iou(selected: &[usize], grid: &TokenGrid, bx: &GroundTruthBox) -> Result<f64> {
    bx.check_in(grid)?;
    let mut seen = vec![false; grid.len()];
    for &i in selected {
        if i >= grid.len() {
            return Err(Error::Parameter(format!("selected index {i} outside a {}-cell grid", grid.len())));
        }
        seen[i] = true;
    }
    if selected.is_empty() {
        return Ok(0.0);
    }
    let picked = seen.iter().filter(|&&s| s).count();
    let inter = bx.cells(grid).into_iter().filter(|&i| seen[i]).count();
    let union = picked + bx.area() - inter;
    Ok(inter as f64 / union as f64)
}
