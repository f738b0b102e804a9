//! Small fixed-size vector helpers for points in R^3.

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm_sq(a: &Point) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &Point, b: &Point) -> f64 {
    norm_sq(&sub(a, b))
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn is_finite(a: &Point) -> bool {
    a.iter().all(|c| c.is_finite())
}

/// Flat-vector helpers shared by the solvers.
pub mod flat {
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    /// `y += alpha * x`
    pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn max_abs(a: &[f64]) -> f64 {
        a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
