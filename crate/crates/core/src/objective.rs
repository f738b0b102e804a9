//! Kinetic energy of the control and kernel distance between point measures.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::kernels::GramOperator;
use crate::parallel;
use crate::trajectory::{ControlTrajectory, TimeGrid, Trajectory};
use crate::vec3::{self, Point};

/// `B = I_3 (x) K[x_0]` applied to every control block.
///
/// The reported energy is `h a^T B a`. The quadratic used inside the
/// optimizer is `(c/2) a^T B a`, so its gradient is `c B a` and its Hessian
/// `c B`; `c = 2h` makes both agree.
#[derive(Debug, Clone)]
pub struct KineticEnergyOperator {
    gram: Arc<GramOperator>,
    grid: TimeGrid,
    scale: f64,
}

impl KineticEnergyOperator {
    pub fn new(gram: Arc<GramOperator>, grid: TimeGrid, scale: Option<f64>) -> Result<Self> {
        let scale = scale.unwrap_or(2.0 * grid.step());
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("kinetic scale must be positive, got {scale}")));
        }
        Ok(Self { gram, grid, scale })
    }

    pub fn gram(&self) -> &GramOperator {
        &self.gram
    }

    pub fn gram_arc(&self) -> &Arc<GramOperator> {
        &self.gram
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `B a`, block by block.
    pub fn apply_b(&self, a: &ControlTrajectory) -> Result<Trajectory> {
        self.check(a)?;
        let mut out = Trajectory::zeros(a.block_count(), a.points_per_block());
        for j in 0..a.block_count() {
            let ba = self.gram.matvec(a.block(j))?;
            out.block_mut(j).copy_from_slice(&ba);
        }
        Ok(out)
    }

    /// `h a^T B a`.
    pub fn kinetic_energy(&self, a: &ControlTrajectory) -> Result<f64> {
        Ok(self.grid.step() * a.dot(&self.apply_b(a)?))
    }

    /// `(c/2) a^T B a`.
    pub fn quadratic(&self, a: &ControlTrajectory) -> Result<f64> {
        Ok(0.5 * self.scale * a.dot(&self.apply_b(a)?))
    }

    /// `c B a`.
    pub fn gradient(&self, a: &ControlTrajectory) -> Result<Trajectory> {
        let mut g = self.apply_b(a)?;
        g.as_mut_slice().iter_mut().for_each(|v| *v *= self.scale);
        Ok(g)
    }

    fn check(&self, a: &ControlTrajectory) -> Result<()> {
        if a.points_per_block() != self.gram.len() {
            return Err(Error::DimensionMismatch {
                expected: self.gram.len(),
                actual: a.points_per_block(),
                context: "kinetic energy controls",
            });
        }
        if a.block_count() != self.grid.control_blocks() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.control_blocks(),
                actual: a.block_count(),
                context: "kinetic energy control blocks",
            });
        }
        Ok(())
    }
}

/// Squared RKHS distance between the weighted Dirac measures of a moving
/// point set `z` and a fixed target, with the unnormalized Gaussian
/// `exp(-|d|^2 / (2 sigma^2))`:
///
/// `(alpha/2) (phi(z,z) - 2 phi(z,y) + phi(y,y))`,
/// `phi(a,b) = sum_k sum_l w_k w_l exp(-|a_k - b_l|^2 / (2 sigma^2))`.
#[derive(Debug, Clone)]
pub struct KernelDistance {
    target: Vec<Point>,
    target_weights: Vec<f64>,
    source_weights: Vec<f64>,
    sigma: f64,
    alpha: f64,
    target_self: f64,
}

impl KernelDistance {
    pub fn new(
        target: Vec<Point>,
        target_weights: Vec<f64>,
        source_weights: Vec<f64>,
        sigma: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma_s must be positive, got {sigma}")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if target.is_empty() || source_weights.is_empty() {
            return Err(Error::invalid("kernel distance needs non-empty point sets"));
        }
        if target_weights.len() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: target.len(),
                actual: target_weights.len(),
                context: "target weights",
            });
        }
        if target_weights
            .iter()
            .chain(&source_weights)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::invalid("measure weights must be finite and nonnegative"));
        }
        let mut kd = Self {
            target,
            target_weights,
            source_weights,
            sigma,
            alpha,
            target_self: 0.0,
        };
        kd.target_self = kd.phi(&kd.target, &kd.target_weights, &kd.target, &kd.target_weights);
        Ok(kd)
    }

    /// Measures taken from the shapes' weights. Points flagged as boundary
    /// have their weight multiplied by `boundary_weight`.
    pub fn from_shapes(template: &Shape, target: &Shape, sigma: f64, alpha: f64, boundary_weight: f64) -> Result<Self> {
        if !(boundary_weight > 0.0) || !boundary_weight.is_finite() {
            return Err(Error::invalid(format!(
                "boundary weight must be positive, got {boundary_weight}"
            )));
        }
        Self::new(
            target.points().to_vec(),
            boundary_scaled(target, boundary_weight),
            boundary_scaled(template, boundary_weight),
            sigma,
            alpha,
        )
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn target(&self) -> &[Point] {
        &self.target
    }

    pub fn source_len(&self) -> usize {
        self.source_weights.len()
    }

    fn expo(&self, d_sq: f64) -> f64 {
        (-d_sq / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn phi(&self, a: &[Point], wa: &[f64], b: &[Point], wb: &[f64]) -> f64 {
        let rows = parallel::map_indexed(a.len(), |k| {
            let mut acc = 0.0;
            for (bl, wl) in b.iter().zip(wb) {
                acc += wl * self.expo(vec3::dist_sq(&a[k], bl));
            }
            wa[k] * acc
        });
        rows.iter().sum()
    }

    fn check(&self, z: &[Point]) -> Result<()> {
        if z.len() != self.source_weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.source_weights.len(),
                actual: z.len(),
                context: "kernel distance source points",
            });
        }
        Ok(())
    }

    pub fn value(&self, z: &[Point]) -> Result<f64> {
        self.check(z)?;
        let p = &self.source_weights;
        let zz = self.phi(z, p, z, p);
        let zy = self.phi(z, p, &self.target, &self.target_weights);
        Ok(0.5 * self.alpha * (zz - 2.0 * zy + self.target_self))
    }

    pub fn gradient(&self, z: &[Point]) -> Result<Vec<Point>> {
        self.check(z)?;
        let p = &self.source_weights;
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        Ok(parallel::map_indexed(z.len(), |k| {
            // d/dz_k phi(z,z) = -(2/s^2) p_k sum_l p_l e (z_k - z_l)
            let mut self_term = [0.0; 3];
            for (zl, pl) in z.iter().zip(p) {
                let d = vec3::sub(&z[k], zl);
                let e = pl * self.expo(vec3::norm_sq(&d));
                for c in 0..3 {
                    self_term[c] += e * d[c];
                }
            }
            // d/dz_k phi(z,y) = -(1/s^2) p_k sum_l q_l e (z_k - y_l)
            let mut cross_term = [0.0; 3];
            for (yl, ql) in self.target.iter().zip(&self.target_weights) {
                let d = vec3::sub(&z[k], yl);
                let e = ql * self.expo(vec3::norm_sq(&d));
                for c in 0..3 {
                    cross_term[c] += e * d[c];
                }
            }
            let f = 0.5 * self.alpha * p[k] * inv_s2;
            [0, 1, 2].map(|c| f * (-2.0 * self_term[c] + 2.0 * cross_term[c]))
        }))
    }

    /// Hessian of [`value`](Self::value) at `z` applied to `v`, assembled on
    /// the fly from 3x3 blocks `e (d d^T / s^4 - I / s^2)`.
    pub fn hessian_matvec(&self, z: &[Point], v: &[Point]) -> Result<Vec<Point>> {
        self.check(z)?;
        self.check(v)?;
        let p = &self.source_weights;
        let s2 = self.sigma * self.sigma;
        let block = |d: &Point, e: f64, w: &Point| -> Point {
            let dw = vec3::dot(d, w) / (s2 * s2);
            [0, 1, 2].map(|c| e * (d[c] * dw - w[c] / s2))
        };
        Ok(parallel::map_indexed(z.len(), |k| {
            let mut self_term = [0.0; 3];
            for l in 0..z.len() {
                if l == k {
                    continue;
                }
                let d = vec3::sub(&z[k], &z[l]);
                let e = p[l] * self.expo(vec3::norm_sq(&d));
                let r = block(&d, e, &vec3::sub(&v[k], &v[l]));
                for c in 0..3 {
                    self_term[c] += r[c];
                }
            }
            let mut cross_term = [0.0; 3];
            for (yl, ql) in self.target.iter().zip(&self.target_weights) {
                let d = vec3::sub(&z[k], yl);
                let e = ql * self.expo(vec3::norm_sq(&d));
                let r = block(&d, e, &v[k]);
                for c in 0..3 {
                    cross_term[c] += r[c];
                }
            }
            let f = 0.5 * self.alpha * p[k];
            [0, 1, 2].map(|c| f * (2.0 * self_term[c] - 2.0 * cross_term[c]))
        }))
    }
}

fn boundary_scaled(shape: &Shape, factor: f64) -> Vec<f64> {
    match shape.boundary() {
        Some(flags) if factor != 1.0 => shape
            .weights()
            .iter()
            .zip(flags)
            .map(|(w, b)| if *b { w * factor } else { *w })
            .collect(),
        _ => shape.weights().to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::GaussianKernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, m: usize) -> Vec<Point> {
        (0..m)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect()
    }

    fn uniform(m: usize) -> Vec<f64> {
        vec![1.0 / m as f64; m]
    }

    #[test]
    fn kinetic_single_point() {
        let grid = TimeGrid::new(1).unwrap();
        let gram = Arc::new(GramOperator::matrix_free(vec![[0.0; 3]], GaussianKernel::velocity(1.0).unwrap()));
        let op = KineticEnergyOperator::new(gram, grid, None).unwrap();
        let a = Trajectory::from_vec(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let kappa = (2.0 * std::f64::consts::PI).powf(-1.5);
        assert!((op.kinetic_energy(&a).unwrap() - 0.5 * kappa).abs() < 1e-16);
        assert!((0.5 * kappa - 0.0317468).abs() < 1e-7);
        assert_eq!(op.kinetic_energy(&Trajectory::zeros(1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn kinetic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = TimeGrid::new(3).unwrap();
        let gram = Arc::new(GramOperator::assembled(cloud(&mut rng, 5), GaussianKernel::velocity(0.7).unwrap()).unwrap());
        let op = KineticEnergyOperator::new(gram, grid, None).unwrap();
        let a = Trajectory::from_vec(3, 5, (0..45).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let g = op.gradient(&a).unwrap();
        let eps = 1e-6;
        for i in 0..45 {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap.as_mut_slice()[i] += eps;
            am.as_mut_slice()[i] -= eps;
            let fd = (op.quadratic(&ap).unwrap() - op.quadratic(&am).unwrap()) / (2.0 * eps);
            assert!((fd - g.as_slice()[i]).abs() < 1e-8);
        }
        // with c = 2h the optimizer quadratic is the reported energy
        assert!((op.quadratic(&a).unwrap() - op.kinetic_energy(&a).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn distance_single_point_closed_form() {
        let kd = KernelDistance::new(vec![[0.0; 3]], vec![1.0], vec![1.0], 1.0, 1.0).unwrap();
        let z = [[1.0, 0.0, 0.0]];
        let expected = 1.0 - (-0.5f64).exp();
        assert!((kd.value(&z).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.3934693).abs() < 1e-7);
        let g = kd.gradient(&z).unwrap()[0];
        assert!((g[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((g[0] - 0.60653).abs() < 1e-5);
        assert_eq!(g[1], 0.0);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn distance_vanishes_at_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = cloud(&mut rng, 12);
        let kd = KernelDistance::new(y.clone(), uniform(12), uniform(12), 0.8, 1.5).unwrap();
        assert!(kd.value(&y).unwrap().abs() < 1e-14);
        let g = kd.gradient(&y).unwrap();
        assert!(g.iter().flatten().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn distance_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = cloud(&mut rng, 8);
        let z = cloud(&mut rng, 8);
        let kd = KernelDistance::new(y, uniform(8), uniform(8), 0.6, 1.0).unwrap();
        let mut zr = z.clone();
        zr.reverse();
        let a = kd.value(&z).unwrap();
        assert!((a - kd.value(&zr).unwrap()).abs() < 1e-14 * a.max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &sigma in &[0.5, 1.0, 2.0] {
            let y = cloud(&mut rng, 10);
            let z = cloud(&mut rng, 10);
            let kd = KernelDistance::new(y, uniform(10), uniform(10), sigma, 1.0).unwrap();
            let g = kd.gradient(&z).unwrap();
            let step = 1e-5;
            let mut err = 0.0f64;
            let mut norm = 0.0f64;
            for k in 0..10 {
                for c in 0..3 {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[k][c] += step;
                    zm[k][c] -= step;
                    let fd = (kd.value(&zp).unwrap() - kd.value(&zm).unwrap()) / (2.0 * step);
                    err += (fd - g[k][c]).powi(2);
                    norm += g[k][c].powi(2);
                }
            }
            assert!(err.sqrt() <= 1e-6 * norm.sqrt(), "sigma {sigma}: {}", err.sqrt() / norm.sqrt());
        }
    }

    #[test]
    fn hessian_is_symmetric_and_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = cloud(&mut rng, 9);
        let z = cloud(&mut rng, 7);
        let kd = KernelDistance::new(y, uniform(9), uniform(7), 0.9, 2.0).unwrap();
        let v = cloud(&mut rng, 7);
        let w = cloud(&mut rng, 7);
        let hv = kd.hessian_matvec(&z, &v).unwrap();
        let hw = kd.hessian_matvec(&z, &w).unwrap();
        let dot = |a: &[Point], b: &[Point]| a.iter().zip(b).map(|(p, q)| vec3::dot(p, q)).sum::<f64>();
        let (l, r) = (dot(&hv, &w), dot(&v, &hw));
        assert!((l - r).abs() <= 1e-12 * l.abs().max(1.0));

        let step = 1e-5;
        let shift = |s: f64| z.iter().zip(&v).map(|(a, b)| vec3::add(a, &vec3::scale(b, s))).collect::<Vec<_>>();
        let gp = kd.gradient(&shift(step)).unwrap();
        let gm = kd.gradient(&shift(-step)).unwrap();
        let mut err = 0.0f64;
        let mut norm = 0.0f64;
        for k in 0..7 {
            for c in 0..3 {
                let fd = (gp[k][c] - gm[k][c]) / (2.0 * step);
                err += (fd - hv[k][c]).powi(2);
                norm += hv[k][c].powi(2);
            }
        }
        assert!(err.sqrt() <= 1e-5 * norm.sqrt());
        assert!(kd.hessian_matvec(&z, &vec![[0.0; 3]; 7]).unwrap().iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn boundary_weight_scales_flagged_points() {
        let t = Shape::new(vec![[0.0; 3], [1.0, 0.0, 0.0]])
            .unwrap()
            .with_boundary(vec![true, false])
            .unwrap();
        assert_eq!(boundary_scaled(&t, 4.0), vec![2.0, 0.5]);
        assert_eq!(boundary_scaled(&t, 1.0), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KernelDistance::new(vec![[0.0; 3]], vec![1.0], vec![1.0], 0.0, 1.0).is_err());
        assert!(KernelDistance::new(vec![[0.0; 3]], vec![1.0], vec![1.0], 1.0, -1.0).is_err());
        let kd = KernelDistance::new(vec![[0.0; 3]], vec![1.0], vec![1.0], 1.0, 1.0).unwrap();
        assert!(kd.value(&[[0.0; 3], [1.0; 3]]).is_err());
    }
}
