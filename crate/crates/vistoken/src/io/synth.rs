//! Seeded synthetic fixtures with planted redundancy.
//!
//! Tokens sit on a grid that is tiled into rectangular clusters. Every member
//! of a cluster lies within a fixed cosine of its cluster center, encoder
//! attention favors a distractor cluster, and the text query points at a
//! different (query) cluster. All values are rounded through `f32` so a
//! fixture survives a tensor-file round trip unchanged.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{report, tensor};
use crate::io::rng::FixtureRng;
use crate::math::{dot, l2_norm, FeatureMatrix, ScoreVector};
use crate::metrics::{GroundTruthBox, TokenGrid};
use crate::relevance::Projector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_tokens: usize,
    pub dim: usize,
    pub n_clusters: usize,
    pub intra_cosine_floor: f64,
    pub query_cluster: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec { seed: 0, n_tokens: 576, dim: 64, n_clusters: 9, intra_cosine_floor: 0.95, query_cluster: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub visual: FeatureMatrix,
    pub attention: ScoreVector,
    pub text: FeatureMatrix,
    pub projector: Projector,
    pub grid: TokenGrid,
    /// One box per cluster, indexed by cluster id.
    pub boxes: Vec<GroundTruthBox>,
    /// Cluster id of every token.
    pub labels: Vec<usize>,
    pub centers: FeatureMatrix,
    pub query_cluster: usize,
    pub distractor_cluster: usize,
}

impl Fixture {
    pub fn query_box(&self) -> GroundTruthBox {
        self.boxes[self.query_cluster]
    }
}

fn f32_round(x: f64) -> f64 {
    x as f32 as f64
}

fn check_floor(floor: f64) -> Result<()> {
    if !(floor > -1.0 && floor < 1.0) {
        return Err(Error::Fixture(format!("intra-cluster cosine floor must lie in (-1, 1), got {floor}")));
    }
    Ok(())
}

/// A point at angle up to `max_angle` from the unit vector `center`.
fn near(rng: &mut FixtureRng, center: &[f64], max_angle: f64) -> Vec<f64> {
    let theta = max_angle * rng.uniform();
    loop {
        let raw = rng.unit_vector(center.len());
        let along = dot(&raw, center);
        let ortho: Vec<f64> = raw.iter().zip(center).map(|(r, c)| r - along * c).collect();
        let norm = l2_norm(&ortho);
        if norm > 1e-9 {
            return center
                .iter()
                .zip(&ortho)
                .map(|(c, o)| theta.cos() * c + theta.sin() * o / norm)
                .collect();
        }
    }
}

// Leaves headroom so f32 rounding cannot push a member below the floor.
fn max_angle(floor: f64) -> f64 {
    0.98 * floor.acos()
}

/// Layout of `k` cluster tiles over the grid: `(tile_rows, tile_cols)`.
fn tile_layout(k: usize, grid: &TokenGrid) -> Result<(usize, usize)> {
    let rows = (1..=k).take_while(|r| r * r <= k).filter(|r| k.is_multiple_of(*r)).last().unwrap_or(1);
    let cols = k / rows;
    let (rows, cols) = if grid.height >= grid.width { (cols, rows) } else { (rows, cols) };
    if rows > grid.height || cols > grid.width {
        return Err(Error::Fixture(format!(
            "{k} cluster tiles do not fit a {}x{} grid",
            grid.height, grid.width
        )));
    }
    Ok((rows, cols))
}

/// Builds a deterministic fixture from `spec`.
pub fn synth_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    check_floor(spec.intra_cosine_floor)?;
    if spec.n_clusters == 0 || spec.n_clusters > spec.n_tokens {
        return Err(Error::Fixture(format!(
            "need 1..={} clusters, got {}",
            spec.n_tokens, spec.n_clusters
        )));
    }
    if spec.query_cluster >= spec.n_clusters {
        return Err(Error::Fixture(format!(
            "query cluster {} out of range for {} clusters",
            spec.query_cluster, spec.n_clusters
        )));
    }
    if spec.dim == 0 {
        return Err(Error::Fixture("feature dimension must be positive".into()));
    }
    let grid = TokenGrid::for_tokens(spec.n_tokens)?;
    let (tile_rows, tile_cols) = tile_layout(spec.n_clusters, &grid)?;
    let labels: Vec<usize> = (0..spec.n_tokens)
        .map(|i| {
            let (r, c) = grid.cell(i);
            (r * tile_rows / grid.height) * tile_cols + c * tile_cols / grid.width
        })
        .collect();
    let boxes = (0..spec.n_clusters)
        .map(|k| {
            let cells = labels.iter().enumerate().filter(|(_, &l)| l == k).map(|(i, _)| grid.cell(i));
            let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
            for (r, c) in cells {
                r0 = r0.min(r);
                c0 = c0.min(c);
                r1 = r1.max(r);
                c1 = c1.max(c);
            }
            GroundTruthBox::new(r0, c0, r1, c1)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = FixtureRng::new(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.n_clusters).map(|_| rng.unit_vector(spec.dim)).collect();
    let angle = max_angle(spec.intra_cosine_floor);

    let mut visual = Vec::with_capacity(spec.n_tokens * spec.dim);
    for &label in &labels {
        let scale = rng.range(0.5, 1.5);
        visual.extend(near(&mut rng, &centers[label], angle).into_iter().map(|x| f32_round(scale * x)));
    }

    let distractor = (spec.query_cluster + 1) % spec.n_clusters;
    let attention: Vec<f64> = labels
        .iter()
        .map(|&label| {
            let base = rng.range(0.02, 0.12);
            let boost = if label == distractor { rng.range(0.6, 0.9) } else { 0.0 };
            f32_round(base + boost)
        })
        .collect();

    // A strong noun-like token on the query center, a weaker related token and
    // a low-norm stopword-like token.
    let q = &centers[spec.query_cluster];
    let related = near(&mut rng, q, max_angle(0.9));
    let stop = rng.unit_vector(spec.dim);
    let text_rows: Vec<Vec<f64>> = [(q.clone(), 3.0), (related, 1.5), (stop, 0.3)]
        .into_iter()
        .map(|(v, s)| v.into_iter().map(|x| f32_round(s * x)).collect())
        .collect();

    let rounded_centers: Vec<f64> = centers.iter().flatten().map(|&x| f32_round(x)).collect();
    Ok(Fixture {
        visual: FeatureMatrix::new(spec.n_tokens, spec.dim, visual)?,
        attention: ScoreVector::raw(attention)?,
        text: FeatureMatrix::from_rows(&text_rows)?,
        projector: Projector::identity(spec.dim),
        grid,
        boxes,
        labels,
        centers: FeatureMatrix::new(spec.n_clusters, spec.dim, rounded_centers)?,
        query_cluster: spec.query_cluster,
        distractor_cluster: distractor,
    })
}

/// Unit-norm points in `n_clusters` planted clusters, shuffled.
///
/// Returns the rows and the cluster label of each row.
pub fn planted_clusters(
    seed: u64,
    n_tokens: usize,
    dim: usize,
    n_clusters: usize,
    intra_cosine_floor: f64,
) -> Result<(FeatureMatrix, Vec<usize>)> {
    check_floor(intra_cosine_floor)?;
    if n_clusters == 0 || n_clusters > n_tokens.max(1) || dim == 0 {
        return Err(Error::Fixture(format!(
            "cannot plant {n_clusters} clusters among {n_tokens} tokens in {dim} dimensions"
        )));
    }
    let mut rng = FixtureRng::new(seed);
    let centers: Vec<Vec<f64>> = (0..n_clusters).map(|_| rng.unit_vector(dim)).collect();
    let mut labels: Vec<usize> = (0..n_tokens).map(|i| i % n_clusters).collect();
    rng.shuffle(&mut labels);
    let angle = max_angle(intra_cosine_floor);
    let mut data = Vec::with_capacity(n_tokens * dim);
    for &l in &labels {
        data.extend(near(&mut rng, &centers[l], angle));
    }
    Ok((FeatureMatrix::new(n_tokens, dim, data)?, labels))
}

/// Adds a random offset of norm `noise` to every row and re-normalizes.
pub fn perturb_rows(features: &FeatureMatrix, noise: f64, seed: u64) -> Result<FeatureMatrix> {
    let mut rng = FixtureRng::new(seed);
    let mut data = Vec::with_capacity(features.as_slice().len());
    for row in features.row_iter() {
        let offset = rng.unit_vector(row.len());
        let moved: Vec<f64> = row.iter().zip(&offset).map(|(x, o)| x + noise * o).collect();
        let norm = l2_norm(&moved);
        data.extend(moved.iter().map(|x| if norm > 0.0 { x / norm } else { 0.0 }));
    }
    FeatureMatrix::new(features.rows(), features.cols(), data)
}

/// Grid, boxes and cluster roles of a fixture, stored next to its tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub spec: FixtureSpec,
    pub grid: TokenGrid,
    pub query_cluster: usize,
    pub distractor_cluster: usize,
    pub query_box: GroundTruthBox,
    pub boxes: Vec<GroundTruthBox>,
}

impl Fixture {
    pub fn meta(&self, spec: &FixtureSpec) -> FixtureMeta {
        FixtureMeta {
            spec: *spec,
            grid: self.grid,
            query_cluster: self.query_cluster,
            distractor_cluster: self.distractor_cluster,
            query_box: self.query_box(),
            boxes: self.boxes.clone(),
        }
    }
}

pub const VISUAL_FILE: &str = "visual.fvlm";
pub const ATTENTION_FILE: &str = "attention.fvlm";
pub const TEXT_FILE: &str = "text.fvlm";
pub const PROJECTOR_FILE: &str = "projector.fvlm";
pub const META_FILE: &str = "fixture.json";

/// Writes the fixture tensors and `fixture.json` into `dir`, creating it if needed.
pub fn write_fixture(fx: &Fixture, spec: &FixtureSpec, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::File { path: dir.to_owned(), source })?;
    tensor::write_matrix(dir.join(VISUAL_FILE), &fx.visual)?;
    tensor::write_vector(dir.join(ATTENTION_FILE), &fx.attention)?;
    tensor::write_matrix(dir.join(TEXT_FILE), &fx.text)?;
    tensor::write_matrix(dir.join(PROJECTOR_FILE), fx.projector.weight())?;
    let mut json = serde_json::to_string_pretty(&fx.meta(spec))?;
    json.push('\n');
    report::write_text(&dir.join(META_FILE), &json)
}

pub fn read_fixture_meta(path: impl AsRef<Path>) -> Result<FixtureMeta> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::File { path: path.to_owned(), source })?;
    Ok(serde_json::from_str(&text)?)
}
