//! Deterministic synthetic surfaces used as desk-scale test data.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::vec3::{self, Point};

/// Parameters shared by the synthetic generators.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Sphere radius (ignored by the other shapes).
    pub radius: f64,
    /// Ellipsoid semi-axes.
    pub axes: [f64; 3],
    /// Side length of the sheet.
    pub extent: f64,
    /// Curvature of the sheet, `z = bend * x^2`.
    pub bend: f64,
    /// In-plane jitter of the sheet grid, as a fraction of the grid spacing.
    pub jitter: f64,
    /// Translation applied after generation.
    pub translate: Point,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            radius: 1.0,
            axes: [1.0, 1.0, 1.0],
            extent: 2.0,
            bend: 0.25,
            jitter: 0.0,
            translate: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Sphere,
    Ellipsoid,
    Sheet,
}

pub fn generate(kind: SynthKind, m: usize, params: &SynthParams, seed: u64) -> Result<Shape> {
    if m < 4 {
        return Err(Error::invalid(format!("synthetic shapes need m >= 4, got {m}")));
    }
    let shape = match kind {
        SynthKind::Sphere => {
            if !(params.radius > 0.0) {
                return Err(Error::invalid("radius must be positive"));
            }
            ellipsoid(m, [params.radius; 3], seed)?
        }
        SynthKind::Ellipsoid => ellipsoid(m, params.axes, seed)?,
        SynthKind::Sheet => sheet(m, params, seed)?,
    };
    if params.translate == [0.0; 3] {
        return Ok(shape);
    }
    let moved = shape
        .points()
        .iter()
        .map(|p| vec3::add(p, &params.translate))
        .collect();
    shape.with_points(moved)
}

/// Unit-sphere Fibonacci lattice with `m` points.
pub fn fibonacci_sphere(m: usize) -> Vec<Point> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden * i as f64;
            [r * theta.cos(), r * theta.sin(), z]
        })
        .collect()
}

/// Fibonacci lattice, rotated by a seed-dependent rotation, mapped onto the
/// ellipsoid with the given semi-axes, triangulated by the convex hull of the
/// unit-sphere points. Equal axes give the sphere of that radius.
pub fn ellipsoid(m: usize, axes: [f64; 3], seed: u64) -> Result<Shape> {
    if axes.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::invalid("ellipsoid axes must be positive"));
    }
    let rotation = random_rotation(seed);
    let unit: Vec<Point> = fibonacci_sphere(m)
        .iter()
        .map(|p| apply(&rotation, p))
        .collect();
    let triangles = convex_hull(&unit)?;
    let points = unit
        .iter()
        .map(|p| {
            let mut q = [p[0] * axes[0], p[1] * axes[1], p[2] * axes[2]];
            // keep exact radius for spheres
            if axes[0] == axes[1] && axes[1] == axes[2] {
                let n = vec3::norm(p);
                q = vec3::scale(p, axes[0] / n);
            }
            q
        })
        .collect();
    Shape::new(points)?.with_triangles(triangles)
}

/// Bent rectangular sheet on an `nx x ny` grid with `nx = floor(sqrt(m))` and
/// `ny = floor(m / nx)`; each grid cell is split into two triangles and border
/// points are flagged as boundary.
pub fn sheet(m: usize, params: &SynthParams, seed: u64) -> Result<Shape> {
    if !(params.extent > 0.0) {
        return Err(Error::invalid("sheet extent must be positive"));
    }
    let nx = (m as f64).sqrt().floor() as usize;
    let ny = m / nx;
    let spacing_x = params.extent / (nx - 1) as f64;
    let spacing_y = params.extent / (ny - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(nx * ny);
    let mut boundary = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let on_border = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
            let (mut dx, mut dy) = (0.0, 0.0);
            if params.jitter > 0.0 && !on_border {
                dx = rng.gen_range(-1.0..1.0) * params.jitter * spacing_x;
                dy = rng.gen_range(-1.0..1.0) * params.jitter * spacing_y;
            }
            let x = -0.5 * params.extent + i as f64 * spacing_x + dx;
            let y = -0.5 * params.extent + j as f64 * spacing_y + dy;
            points.push([x, y, params.bend * x * x]);
            boundary.push(on_border);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = j * nx + i;
            triangles.push([v, v + 1, v + nx + 1]);
            triangles.push([v, v + nx + 1, v + nx]);
        }
    }
    Shape::new(points)?
        .with_triangles(triangles)?
        .with_boundary(boundary)
}

type Rotation = [[f64; 3]; 3];

fn random_rotation(seed: u64) -> Rotation {
    // uniform random unit quaternion (Shoemake)
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = 2.0 * std::f64::consts::PI;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    );
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn apply(r: &Rotation, p: &Point) -> Point {
    [vec3::dot(&r[0], p), vec3::dot(&r[1], p), vec3::dot(&r[2], p)]
}

/// Incremental 3D convex hull. Every input point must be a hull vertex (points
/// in convex position), which holds for samples of a sphere.
pub fn convex_hull(points: &[Point]) -> Result<Vec<[usize; 3]>> {
    let m = points.len();
    if m < 4 {
        return Err(Error::invalid("convex hull needs at least 4 points"));
    }
    let scale = points.iter().map(vec3::norm).fold(0.0, f64::max).max(1.0);
    let eps = 1e-12 * scale;

    let orient = |a: usize, b: usize, c: usize, p: &Point| -> f64 {
        let n = vec3::cross(&vec3::sub(&points[b], &points[a]), &vec3::sub(&points[c], &points[a]));
        vec3::dot(&n, &vec3::sub(p, &points[a]))
    };

    // initial tetrahedron
    let i0 = 0;
    let i1 = (1..m)
        .max_by(|&a, &b| {
            vec3::dist_sq(&points[a], &points[i0]).total_cmp(&vec3::dist_sq(&points[b], &points[i0]))
        })
        .unwrap();
    let line = vec3::sub(&points[i1], &points[i0]);
    let i2 = (0..m)
        .filter(|&i| i != i0 && i != i1)
        .max_by(|&a, &b| {
            let da = vec3::norm_sq(&vec3::cross(&line, &vec3::sub(&points[a], &points[i0])));
            let db = vec3::norm_sq(&vec3::cross(&line, &vec3::sub(&points[b], &points[i0])));
            da.total_cmp(&db)
        })
        .unwrap();
    let i3 = (0..m)
        .filter(|&i| i != i0 && i != i1 && i != i2)
        .max_by(|&a, &b| {
            orient(i0, i1, i2, &points[a])
                .abs()
                .total_cmp(&orient(i0, i1, i2, &points[b]).abs())
        })
        .unwrap();
    if orient(i0, i1, i2, &points[i3]).abs() <= eps {
        return Err(Error::invalid("convex hull of coplanar points"));
    }

    let mut faces: Vec<[usize; 3]> = if orient(i0, i1, i2, &points[i3]) < 0.0 {
        vec![[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]]
    } else {
        vec![[i0, i2, i1], [i0, i1, i3], [i1, i2, i3], [i2, i0, i3]]
    };

    for p in 0..m {
        if p == i0 || p == i1 || p == i2 || p == i3 {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| orient(f[0], f[1], f[2], &points[p]) > eps)
            .collect();
        if !visible.iter().any(|&v| v) {
            return Err(Error::invalid(format!(
                "point {p} is not in convex position; cannot triangulate by hull"
            )));
        }
        let mut owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
        for (fi, f) in faces.iter().enumerate() {
            for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                owner.insert(e, fi);
            }
        }
        let mut next = Vec::with_capacity(faces.len() + 2);
        let mut added = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            if !visible[fi] {
                next.push(*f);
                continue;
            }
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let twin = owner[&(b, a)];
                if !visible[twin] {
                    added.push([a, b, p]);
                }
            }
        }
        next.extend(added);
        faces = next;
    }
    Ok(faces)
}
