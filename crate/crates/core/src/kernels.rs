//! Gaussian kernels, Gram operators and bandwidth policies.
//!
//! The velocity kernel uses the normalized Gaussian
//! `(2 pi)^{-3/2} sigma^{-3} exp(-|u - v|^2 / (2 sigma^2))`. The kernel distance
//! between shapes uses the plain exponential without the prefactor; the
//! dropped constant is absorbed by the distance weight `alpha`.
//!
//! Vectors of per-point coefficients are stored coordinate-major: all `x`
//! components, then all `y`, then all `z`, so a Gram block acts as `I_3 (x) K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Shape};
use crate::linsolve::{cholesky_spd, CholeskyFactor, DenseMatrix};
use crate::parallel;
use crate::vec3::{self, Point};

/// Largest anchor count for which a dense Gram matrix is cached.
pub const MAX_DENSE_POINTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    sigma: f64,
    normalized: bool,
}

impl GaussianKernel {
    pub fn new(sigma: f64, normalized: bool) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("kernel bandwidth must be positive, got {sigma}")));
        }
        Ok(Self { sigma, normalized })
    }

    /// Normalized kernel, as used for the velocity field.
    pub fn velocity(sigma: f64) -> Result<Self> {
        Self::new(sigma, true)
    }

    /// Unnormalized kernel, as used in the shape distance.
    pub fn distance(sigma: f64) -> Result<Self> {
        Self::new(sigma, false)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Value at zero distance.
    pub fn peak(&self) -> f64 {
        if self.normalized {
            (2.0 * std::f64::consts::PI).powf(-1.5) * self.sigma.powi(-3)
        } else {
            1.0
        }
    }

    #[inline]
    pub fn eval_sq(&self, dist_sq: f64) -> f64 {
        self.peak() * (-0.5 * dist_sq / (self.sigma * self.sigma)).exp()
    }

    #[inline]
    pub fn eval(&self, u: &Point, v: &Point) -> f64 {
        self.eval_sq(vec3::dist_sq(u, v))
    }
}

/// Gram matrix `K[x]` of a kernel at a fixed set of anchor points, applied
/// per coordinate. Optionally caches the dense matrix.
#[derive(Debug, Clone)]
pub struct GramOperator {
    points: Vec<Point>,
    kernel: GaussianKernel,
    dense: Option<DenseMatrix>,
}

impl GramOperator {
    /// Matrix-free operator; kernel entries are evaluated on every product.
    pub fn matrix_free(points: Vec<Point>, kernel: GaussianKernel) -> Self {
        Self {
            points,
            kernel,
            dense: None,
        }
    }

    /// Operator with the dense Gram matrix assembled once.
    pub fn assembled(points: Vec<Point>, kernel: GaussianKernel) -> Result<Self> {
        if points.len() > MAX_DENSE_POINTS {
            return Err(Error::invalid(format!(
                "dense Gram matrix requested for {} points (limit {MAX_DENSE_POINTS})",
                points.len()
            )));
        }
        let dense = assemble(&points, &kernel);
        Ok(Self {
            points,
            kernel,
            dense: Some(dense),
        })
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

    pub fn kernel(&self) -> &GaussianKernel {
        &self.kernel
    }

    /// The dense Gram matrix, assembling it if it is not cached.
    pub fn dense(&self) -> DenseMatrix {
        match &self.dense {
            Some(d) => d.clone(),
            None => assemble(&self.points, &self.kernel),
        }
    }

    /// `out_l = sum_k ker(x^k, x^l) coeffs_k` for each coordinate, with
    /// coordinate-major `coeffs` of length `3m`.
    pub fn matvec(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let m = self.len();
        if coeffs.len() != 3 * m {
            return Err(Error::DimensionMismatch {
                expected: 3 * m,
                actual: coeffs.len(),
                context: "Gram operator coefficients",
            });
        }
        let rows: Vec<[f64; 3]> = parallel::map_indexed(m, |l| {
            let mut acc = [0.0; 3];
            for k in 0..m {
                let kv = match &self.dense {
                    Some(d) => d.get(l, k),
                    None => self.kernel.eval(&self.points[l], &self.points[k]),
                };
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += kv * coeffs[c * m + k];
                }
            }
            acc
        });
        let mut out = vec![0.0; 3 * m];
        for (l, row) in rows.iter().enumerate() {
            for c in 0..3 {
                out[c * m + l] = row[c];
            }
        }
        Ok(out)
    }

    /// Cholesky factor of `scale * K + shift * I`.
    pub fn shifted_cholesky(&self, scale: f64, shift: f64) -> Result<CholeskyFactor> {
        cholesky_spd(&self.dense().scaled(scale).shifted(shift))
    }
}

fn assemble(points: &[Point], kernel: &GaussianKernel) -> DenseMatrix {
    let m = points.len();
    let rows = parallel::map_indexed(m, |i| {
        (0..m)
            .map(|j| kernel.eval(&points[i], &points[j]))
            .collect::<Vec<_>>()
    });
    // kernel.eval is symmetric in its arguments bit for bit, so K is exactly symmetric
    DenseMatrix::from_row_major(m, rows.concat()).expect("square by construction")
}

/// Velocity bandwidth `tau_v * 2^{-1/2} * mean_edge_length(template)`.
pub fn sigma_v_policy(template: &Shape, tau_v: f64) -> Result<f64> {
    if !(tau_v > 0.0) {
        return Err(Error::invalid(format!("tau_v must be positive, got {tau_v}")));
    }
    Ok(tau_v * std::f64::consts::FRAC_1_SQRT_2 * geometry::mean_edge_length(template)?)
}

/// Distance bandwidth `max(h_1, tau_s * hausdorff(template, target) / 2)` with
/// `h_1` the mean edge length of the target and the exact Hausdorff distance.
pub fn sigma_s_policy(template: &Shape, target: &Shape, tau_s: f64) -> Result<f64> {
    if !(tau_s > 0.0) {
        return Err(Error::invalid(format!("tau_s must be positive, got {tau_s}")));
    }
    if !(0.75..=6.0).contains(&tau_s) {
        log::warn!("tau_s = {tau_s} is outside the tested range [0.75, 6]");
    }
    let h_target = geometry::mean_edge_length(target)?;
    let dist = geometry::hausdorff(template, target, 1.0)?.value;
    Ok(h_target.max(tau_s * dist / 2.0))
}
