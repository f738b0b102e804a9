//! Shape containers, edge statistics and the (censored) Hausdorff distance.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::vec3::{self, Point};

/// Valence used for the k-nearest-neighbour edge graph when a shape carries no
/// triangle mesh.
pub const FALLBACK_NEIGHBOURS: usize = 6;

/// Percentile used for the censored Hausdorff distance.
pub const CENSORED_PERCENTILE: f64 = 0.95;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A discretized surface: points, an optional triangle mesh, optional per-point
/// annotations and the weights of its Dirac-measure representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    points: Vec<Point>,
    triangles: Option<Vec<[usize; 3]>>,
    boundary: Option<Vec<bool>>,
    leaflet: Option<Vec<i64>>,
    weights: Vec<f64>,
}

impl Shape {
    /// Creates a shape with uniform weights `1/m`.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a shape needs at least one point"));
        }
        if let Some(i) = points.iter().position(|p| !vec3::is_finite(p)) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        let m = points.len();
        Ok(Self {
            points,
            triangles: None,
            boundary: None,
            leaflet: None,
            weights: vec![1.0 / m as f64; m],
        })
    }

    pub fn with_triangles(mut self, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let m = self.points.len();
        if let Some((t, _)) = triangles
            .iter()
            .enumerate()
            .find(|(_, tri)| tri.iter().any(|&i| i >= m))
        {
            return Err(Error::invalid(format!(
                "triangle {t} references a point index outside [0, {m})"
            )));
        }
        self.triangles = Some(triangles);
        Ok(self)
    }

    pub fn with_boundary(mut self, boundary: Vec<bool>) -> Result<Self> {
        self.check_len(boundary.len(), "boundary flags")?;
        self.boundary = Some(boundary);
        Ok(self)
    }

    pub fn with_leaflet(mut self, leaflet: Vec<i64>) -> Result<Self> {
        self.check_len(leaflet.len(), "leaflet ids")?;
        self.leaflet = Some(leaflet);
        Ok(self)
    }

    /// Replaces the measure weights. They must be nonnegative and sum to one.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.check_len(weights.len(), "weights")?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        self.weights = weights;
        Ok(self)
    }

    fn check_len(&self, len: usize, what: &'static str) -> Result<()> {
        if len != self.points.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                actual: len,
                context: what,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn triangles(&self) -> Option<&[[usize; 3]]> {
        self.triangles.as_deref()
    }

    pub fn boundary(&self) -> Option<&[bool]> {
        self.boundary.as_deref()
    }

    pub fn leaflet(&self) -> Option<&[i64]> {
        self.leaflet.as_deref()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Returns a copy of this shape with its points replaced; mesh and
    /// annotations are kept.
    pub fn with_points(&self, points: Vec<Point>) -> Result<Self> {
        self.check_len(points.len(), "replacement points")?;
        if points.iter().any(|p| !vec3::is_finite(p)) {
            return Err(Error::invalid("replacement points must be finite"));
        }
        Ok(Self {
            points,
            ..self.clone()
        })
    }

    /// Unique undirected mesh edges `(i, j)` with `i < j`, or `None` without a mesh.
    pub fn mesh_edges(&self) -> Option<Vec<(usize, usize)>> {
        let triangles = self.triangles.as_ref()?;
        let mut edges = BTreeSet::new();
        for t in triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
        Some(edges.into_iter().collect())
    }
}

/// Where [`mean_edge_length_with`] takes its edges from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSource {
    /// Triangle mesh only; a shape without one is an error.
    MeshOnly,
    /// Triangle mesh if present, otherwise a symmetric k-NN graph.
    MeshOrKnn(usize),
}

/// Mean edge length, falling back to a 6-NN graph for raw point clouds.
pub fn mean_edge_length(shape: &Shape) -> Result<f64> {
    mean_edge_length_with(shape, EdgeSource::MeshOrKnn(FALLBACK_NEIGHBOURS))
}

pub fn mean_edge_length_with(shape: &Shape, source: EdgeSource) -> Result<f64> {
    let edges = match (shape.mesh_edges(), source) {
        (Some(edges), _) if !edges.is_empty() => edges,
        (_, EdgeSource::MeshOrKnn(k)) if shape.len() > 1 => {
            knn_edge_graph(shape.points(), k.min(shape.len() - 1))?
        }
        _ => return Err(Error::NoConnectivity),
    };
    mean_length_of_edges(shape.points(), &edges)
}

/// Arithmetic mean of the Euclidean lengths of the given edges.
pub fn mean_length_of_edges(points: &[Point], edges: &[(usize, usize)]) -> Result<f64> {
    if edges.is_empty() {
        return Err(Error::NoConnectivity);
    }
    let total: f64 = edges
        .iter()
        .map(|&(i, j)| vec3::dist(&points[i], &points[j]))
        .sum();
    Ok(total / edges.len() as f64)
}

/// Symmetric k-nearest-neighbour edge set: `(i, j)` with `i < j` is present when
/// either point lists the other among its `k` nearest. Ties go to the lower index.
pub fn knn_edge_graph(points: &[Point], k: usize) -> Result<Vec<(usize, usize)>> {
    let m = points.len();
    if k == 0 || k >= m {
        return Err(Error::invalid(format!(
            "k-NN graph needs 1 <= k < m (k = {k}, m = {m})"
        )));
    }
    let neighbours = parallel::map_indexed(m, |i| {
        let mut order: Vec<(f64, usize)> = (0..m)
            .filter(|&j| j != i)
            .map(|j| (vec3::dist_sq(&points[i], &points[j]), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(k);
        order.into_iter().map(|(_, j)| j).collect::<Vec<_>>()
    });
    let mut edges = BTreeSet::new();
    for (i, list) in neighbours.into_iter().enumerate() {
        for j in list {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    Ok(edges.into_iter().collect())
}

/// Result of a (possibly censored) Hausdorff distance evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffReport {
    pub value: f64,
    pub percentile: f64,
    pub directed_ab: f64,
    pub directed_ba: f64,
}

/// Hausdorff distance with the maximum over nearest-neighbour distances replaced
/// by their nearest-rank `percentile` quantile. `percentile = 1` is the exact
/// Hausdorff distance.
pub fn hausdorff(a: &Shape, b: &Shape, percentile: f64) -> Result<HausdorffReport> {
    hausdorff_points(a.points(), b.points(), percentile)
}

pub fn hausdorff_points(a: &[Point], b: &[Point], percentile: f64) -> Result<HausdorffReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("Hausdorff distance of an empty point set"));
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::invalid(format!(
            "percentile must lie in (0, 1], got {percentile}"
        )));
    }
    let directed_ab = directed(a, b, percentile);
    let directed_ba = directed(b, a, percentile);
    Ok(HausdorffReport {
        value: directed_ab.max(directed_ba),
        percentile,
        directed_ab,
        directed_ba,
    })
}

fn directed(from: &[Point], to: &[Point], percentile: f64) -> f64 {
    let mut nearest = parallel::map_indexed(from.len(), |i| {
        to.iter()
            .map(|q| vec3::dist_sq(&from[i], q))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    });
    nearest.sort_by(f64::total_cmp);
    nearest[nearest_rank(nearest.len(), percentile)]
}

/// Zero-based index of the nearest-rank quantile, i.e. `ceil(p * m) - 1`.
fn nearest_rank(m: usize, percentile: f64) -> usize {
    let rank = (percentile * m as f64).ceil() as usize;
    rank.clamp(1, m) - 1
}
