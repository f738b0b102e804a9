//! Isotropic strain intensity from triangle area ratios.
//!
//! For a triangle `T`, `q(T) = sqrt(area(phi(T)) / area(T))`. Vertex values are
//! `p = |q - 1|` averaged over incident triangles with template-area weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::vec3::{self, Point};

/// Template triangles below this fraction of the squared bounding-box
/// diagonal count as degenerate.
pub const DEGENERATE_AREA_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainField {
    pub per_triangle_q: Vec<f64>,
    pub per_vertex_p: Vec<f64>,
    /// Template triangles whose `q` was set to 1 because their area vanished.
    pub degenerate: Vec<bool>,
}

fn triangle_area(p: &[Point], t: &[usize; 3]) -> f64 {
    let e1 = vec3::sub(&p[t[1]], &p[t[0]]);
    let e2 = vec3::sub(&p[t[2]], &p[t[0]]);
    0.5 * vec3::norm(&vec3::cross(&e1, &e2))
}

fn bbox_diagonal_sq(points: &[Point]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for c in 0..3 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    vec3::dist_sq(&lo, &hi)
}

pub fn strain_field(template: &Shape, deformed: &[Point]) -> Result<StrainField> {
    let triangles = template
        .triangles()
        .ok_or_else(|| Error::invalid("strain needs a triangulated template"))?;
    if deformed.len() != template.len() {
        return Err(Error::DimensionMismatch {
            expected: template.len(),
            actual: deformed.len(),
            context: "deformed points",
        });
    }
    if !deformed.iter().all(vec3::is_finite) {
        return Err(Error::invalid("deformed points must be finite"));
    }
    let floor = DEGENERATE_AREA_FRACTION * bbox_diagonal_sq(template.points());
    let mut q = Vec::with_capacity(triangles.len());
    let mut degenerate = Vec::with_capacity(triangles.len());
    let mut areas = Vec::with_capacity(triangles.len());
    for t in triangles {
        let a0 = triangle_area(template.points(), t);
        if a0 < floor || a0 == 0.0 {
            q.push(1.0);
            degenerate.push(true);
        } else {
            q.push((triangle_area(deformed, t) / a0).sqrt());
            degenerate.push(false);
        }
        areas.push(a0);
    }

    let m = template.len();
    let mut num = vec![0.0; m];
    let mut den = vec![0.0; m];
    for ((t, qt), area) in triangles.iter().zip(&q).zip(&areas) {
        for &v in t {
            num[v] += area * (qt - 1.0).abs();
            den[v] += area;
        }
    }
    // vertices touching only zero-area triangles fall back to a plain mean
    let mut plain = vec![(0.0, 0usize); m];
    for (t, qt) in triangles.iter().zip(&q) {
        for &v in t {
            plain[v].0 += (qt - 1.0).abs();
            plain[v].1 += 1;
        }
    }
    let per_vertex_p = (0..m)
        .map(|v| {
            if den[v] > 0.0 {
                num[v] / den[v]
            } else if plain[v].1 > 0 {
                plain[v].0 / plain[v].1 as f64
            } else {
                0.0
            }
        })
        .collect();
    Ok(StrainField {
        per_triangle_q: q,
        per_vertex_p,
        degenerate,
    })
}
