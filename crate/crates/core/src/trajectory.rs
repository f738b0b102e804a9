//! Time grid, state/control trajectories, forward-Euler rollout and the
//! matrix-free Euler constraint operators.
//!
//! The discrete flow satisfies `G^x x + G^a a = q` with
//!
//! ```text
//! (G^x x)_1     = x(t^1)                      (G^a a)_1     = 0
//! (G^x x)_{j+1} = x(t^{j+1}) - x(t^j)         (G^a a)_{j+1} = -h B^j a(t^j)
//! q = (x_0, 0, ..., 0)
//! ```
//!
//! for `j = 1..n`, where `B^j = I_3 (x) K` is the Gram block at the configured
//! kernel anchors. Controls have `n` blocks: the control at the last time
//! point never enters the recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{GaussianKernel, GramOperator};
use crate::vec3::{flat, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("time grid needs n >= 1 cells"));
        }
        Ok(Self { n })
    }

    /// Number of cells; there are `n + 1` time points.
    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn state_blocks(&self) -> usize {
        self.n + 1
    }

    pub fn control_blocks(&self) -> usize {
        self.n
    }

    /// Step size `1 / (n + 1)`.
    pub fn step(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    /// `t^j = (j - 1) h` for `j = 1..n+1`, zero-based here.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|j| j as f64 * self.step()).collect()
    }
}

/// A time-blocked vector: `blocks` blocks of `m` points in R^3, each stored
/// coordinate-major (`[x_1..x_m, y_1..y_m, z_1..z_m]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    m: usize,
    blocks: usize,
    data: Vec<f64>,
}

/// `n + 1` blocks.
pub type StateTrajectory = Trajectory;
/// `n` blocks.
pub type ControlTrajectory = Trajectory;

impl Trajectory {
    pub fn zeros(blocks: usize, m: usize) -> Self {
        Self {
            m,
            blocks,
            data: vec![0.0; blocks * 3 * m],
        }
    }

    pub fn from_vec(blocks: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != blocks * 3 * m {
            return Err(Error::DimensionMismatch {
                expected: blocks * 3 * m,
                actual: data.len(),
                context: "trajectory data",
            });
        }
        Ok(Self { m, blocks, data })
    }

    /// Every block equal to `points`.
    pub fn constant(points: &[Point], blocks: usize) -> Self {
        let block = points_to_block(points);
        let mut data = Vec::with_capacity(blocks * block.len());
        for _ in 0..blocks {
            data.extend_from_slice(&block);
        }
        Self {
            m: points.len(),
            blocks,
            data,
        }
    }

    pub fn points_per_block(&self) -> usize {
        self.m
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn block_len(&self) -> usize {
        3 * self.m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, j: usize) -> &[f64] {
        let len = self.block_len();
        &self.data[j * len..(j + 1) * len]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut [f64] {
        let len = self.block_len();
        &mut self.data[j * len..(j + 1) * len]
    }

    pub fn block_points(&self, j: usize) -> Vec<Point> {
        block_to_points(self.block(j))
    }

    pub fn set_block_points(&mut self, j: usize, points: &[Point]) {
        self.block_mut(j).copy_from_slice(&points_to_block(points));
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same shape as `other`.
    pub fn conforms(&self, other: &Trajectory) -> bool {
        self.m == other.m && self.blocks == other.blocks
    }

    pub fn dot(&self, other: &Trajectory) -> f64 {
        flat::dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        flat::norm(&self.data)
    }

    pub fn zip_map(&self, other: &Trajectory, f: impl Fn(f64, f64) -> f64) -> Trajectory {
        debug_assert!(self.conforms(other));
        Trajectory {
            m: self.m,
            blocks: self.blocks,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn sub(&self, other: &Trajectory) -> Trajectory {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Trajectory) -> Trajectory {
        self.zip_map(other, |a, b| a + b)
    }

    fn expect_shape(&self, blocks: usize, m: usize, context: &'static str) -> Result<()> {
        if self.m != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.m,
                context,
            });
        }
        if self.blocks != blocks {
            return Err(Error::DimensionMismatch {
                expected: blocks,
                actual: self.blocks,
                context,
            });
        }
        Ok(())
    }
}

pub fn points_to_block(points: &[Point]) -> Vec<f64> {
    let m = points.len();
    let mut out = vec![0.0; 3 * m];
    for (k, p) in points.iter().enumerate() {
        for c in 0..3 {
            out[c * m + k] = p[c];
        }
    }
    out
}

pub fn block_to_points(block: &[f64]) -> Vec<Point> {
    let m = block.len() / 3;
    (0..m)
        .map(|k| [block[k], block[m + k], block[2 * m + k]])
        .collect()
}

/// Which Gram matrices enter the Euler steps.
#[derive(Debug, Clone, Copy)]
pub enum KernelAnchors<'a> {
    /// `K[x_0]` for every step, which makes the constraint linear.
    Frozen(&'a GramOperator),
    /// `K[x(t^j)]` for step `j`, evaluated at the given states.
    StateDependent {
        kernel: GaussianKernel,
        states: &'a Trajectory,
    },
}

impl KernelAnchors<'_> {
    fn apply(&self, j: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
        match self {
            KernelAnchors::Frozen(gram) => gram.matvec(coeffs),
            KernelAnchors::StateDependent { kernel, states } => {
                GramOperator::matrix_free(states.block_points(j), *kernel).matvec(coeffs)
            }
        }
    }
}

/// Kernel policy for [`rollout`].
#[derive(Debug, Clone, Copy)]
pub enum RolloutMode<'a> {
    /// Gram matrix at `x_0` for every step.
    Frozen(&'a GramOperator),
    /// Gram matrix re-evaluated at the current state.
    Faithful(GaussianKernel),
}

/// Forward Euler: `x(t^{j+1}) = x(t^j) + h B^j a(t^j)`, `x(t^1) = x_0`.
pub fn rollout(
    x0: &[Point],
    a: &ControlTrajectory,
    mode: RolloutMode<'_>,
    grid: &TimeGrid,
) -> Result<StateTrajectory> {
    let m = x0.len();
    a.expect_shape(grid.control_blocks(), m, "rollout controls")?;
    if let RolloutMode::Frozen(gram) = mode {
        if gram.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: gram.len(),
                context: "rollout Gram anchors",
            });
        }
    }
    let h = grid.step();
    let mut x = Trajectory::zeros(grid.state_blocks(), m);
    x.block_mut(0).copy_from_slice(&points_to_block(x0));
    for j in 0..grid.control_blocks() {
        let velocity = match mode {
            RolloutMode::Frozen(gram) => gram.matvec(a.block(j))?,
            RolloutMode::Faithful(kernel) => {
                GramOperator::matrix_free(x.block_points(j), kernel).matvec(a.block(j))?
            }
        };
        let (head, tail) = x.data.split_at_mut((j + 1) * 3 * m);
        let prev = &head[j * 3 * m..];
        for ((next, p), v) in tail[..3 * m].iter_mut().zip(prev).zip(&velocity) {
            *next = p + h * v;
        }
    }
    Ok(x)
}

/// Right-hand side `q = (x_0, 0, ..., 0)`.
pub fn constraint_rhs(x0: &[Point], grid: &TimeGrid) -> Trajectory {
    let mut q = Trajectory::zeros(grid.state_blocks(), x0.len());
    q.block_mut(0).copy_from_slice(&points_to_block(x0));
    q
}

pub fn apply_gx(x: &StateTrajectory) -> Trajectory {
    let mut out = x.clone();
    for j in (1..x.blocks).rev() {
        let len = x.block_len();
        let (head, tail) = out.data.split_at_mut(j * len);
        for (o, prev) in tail[..len].iter_mut().zip(&x.data[(j - 1) * len..j * len]) {
            *o -= prev;
        }
        let _ = head;
    }
    out
}

pub fn apply_gx_t(v: &Trajectory) -> StateTrajectory {
    // (G^x)^T v: block j gets v_j - v_{j+1}, last block gets v_{n+1}
    let mut out = v.clone();
    let len = v.block_len();
    for j in 0..v.blocks.saturating_sub(1) {
        for (o, next) in out.data[j * len..(j + 1) * len]
            .iter_mut()
            .zip(&v.data[(j + 1) * len..(j + 2) * len])
        {
            *o -= next;
        }
    }
    out
}

pub fn apply_ga(
    anchors: KernelAnchors<'_>,
    a: &ControlTrajectory,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let m = a.m;
    a.expect_shape(grid.control_blocks(), m, "G^a controls")?;
    let h = grid.step();
    let mut out = Trajectory::zeros(grid.state_blocks(), m);
    for j in 0..grid.control_blocks() {
        let ba = anchors.apply(j, a.block(j))?;
        for (o, v) in out.block_mut(j + 1).iter_mut().zip(&ba) {
            *o = -h * v;
        }
    }
    Ok(out)
}

pub fn apply_ga_t(
    anchors: KernelAnchors<'_>,
    v: &Trajectory,
    grid: &TimeGrid,
) -> Result<ControlTrajectory> {
    let m = v.m;
    v.expect_shape(grid.state_blocks(), m, "G^a transpose input")?;
    let h = grid.step();
    let mut out = Trajectory::zeros(grid.control_blocks(), m);
    for j in 0..grid.control_blocks() {
        // B^j is symmetric
        let bv = anchors.apply(j, v.block(j + 1))?;
        for (o, b) in out.block_mut(j).iter_mut().zip(&bv) {
            *o = -h * b;
        }
    }
    Ok(out)
}

/// `G^x x + G^a a - q`.
pub fn constraint_residual(
    x: &StateTrajectory,
    a: &ControlTrajectory,
    anchors: KernelAnchors<'_>,
    x0: &[Point],
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let gx = apply_gx(x);
    let ga = apply_ga(anchors, a, grid)?;
    let q = constraint_rhs(x0, grid);
    Ok(gx.add(&ga).sub(&q))
}

/// The terminal block `x(t^{n+1})`.
pub fn observe_terminal(x: &StateTrajectory) -> Vec<Point> {
    x.block_points(x.blocks - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, m: usize) -> Vec<Point> {
        (0..m)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect()
    }

    fn random_traj(rng: &mut ChaCha8Rng, blocks: usize, m: usize) -> Trajectory {
        Trajectory::from_vec(blocks, m, (0..blocks * 3 * m).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(5).unwrap();
        assert_eq!(g.step(), 1.0 / 6.0);
        assert_eq!(g.times()[0], 0.0);
        assert_eq!(g.times().len(), 6);
        assert!(TimeGrid::new(0).is_err());
    }

    #[test]
    fn zero_control_rollout_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = random_points(&mut rng, 5);
        let grid = TimeGrid::new(3).unwrap();
        let kernel = GaussianKernel::velocity(0.8).unwrap();
        let a = Trajectory::zeros(3, 5);
        let x = rollout(&x0, &a, RolloutMode::Faithful(kernel), &grid).unwrap();
        for j in 0..4 {
            assert_eq!(x.block_points(j), x0);
        }
        assert_eq!(observe_terminal(&x), x0);
    }

    #[test]
    fn single_point_single_step() {
        let grid = TimeGrid::new(1).unwrap();
        let kernel = GaussianKernel::velocity(1.0).unwrap();
        let x0 = vec![[0.5, -1.0, 2.0]];
        let a = Trajectory::from_vec(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        let x = rollout(&x0, &a, RolloutMode::Faithful(kernel), &grid).unwrap();
        let kappa = (2.0 * std::f64::consts::PI).powf(-1.5);
        let end = observe_terminal(&x)[0];
        assert!((end[0] - (0.5 + 0.5 * kappa)).abs() < 1e-15);
        assert_eq!(end[1], -1.0);
        assert_eq!(end[2], 2.0);
    }

    #[test]
    fn rollout_rejects_wrong_control_shape() {
        let grid = TimeGrid::new(2).unwrap();
        let kernel = GaussianKernel::velocity(1.0).unwrap();
        let a = Trajectory::zeros(3, 2);
        assert!(rollout(&[[0.0; 3], [1.0; 3]], &a, RolloutMode::Faithful(kernel), &grid).is_err());
    }

    #[test]
    fn gx_of_constant_trajectory() {
        let pts = vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let x = Trajectory::constant(&pts, 4);
        let g = apply_gx(&x);
        assert_eq!(g.block_points(0), pts);
        for j in 1..4 {
            assert!(g.block(j).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ga_of_zero_is_zero() {
        let grid = TimeGrid::new(2).unwrap();
        let gram = GramOperator::matrix_free(vec![[0.0; 3], [1.0; 3]], GaussianKernel::velocity(1.0).unwrap());
        let out = apply_ga(KernelAnchors::Frozen(&gram), &Trajectory::zeros(2, 2), &grid).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rollout_satisfies_constraint_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let m = rng.gen_range(1..8);
            let n = rng.gen_range(1..5);
            let grid = TimeGrid::new(n).unwrap();
            let x0 = random_points(&mut rng, m);
            let kernel = GaussianKernel::velocity(rng.gen_range(0.3..1.5)).unwrap();
            let a = random_traj(&mut rng, n, m);
            let gram = GramOperator::assembled(x0.clone(), kernel).unwrap();

            let x = rollout(&x0, &a, RolloutMode::Frozen(&gram), &grid).unwrap();
            let r = constraint_residual(&x, &a, KernelAnchors::Frozen(&gram), &x0, &grid).unwrap();
            assert!(flat::max_abs(r.as_slice()) <= 1e-12);

            let x = rollout(&x0, &a, RolloutMode::Faithful(kernel), &grid).unwrap();
            let anchors = KernelAnchors::StateDependent { kernel, states: &x };
            let r = constraint_residual(&x, &a, anchors, &x0, &grid).unwrap();
            assert!(flat::max_abs(r.as_slice()) <= 1e-12);
        }
    }

    #[test]
    fn adjoint_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let m = rng.gen_range(1..7);
            let n = rng.gen_range(1..5);
            let grid = TimeGrid::new(n).unwrap();
            let kernel = GaussianKernel::velocity(rng.gen_range(0.3..1.5)).unwrap();
            let gram = GramOperator::assembled(random_points(&mut rng, m), kernel).unwrap();
            let states = random_traj(&mut rng, n + 1, m);

            let x = random_traj(&mut rng, n + 1, m);
            let v = random_traj(&mut rng, n + 1, m);
            let lhs = apply_gx(&x).dot(&v);
            let rhs = x.dot(&apply_gx_t(&v));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));

            let a = random_traj(&mut rng, n, m);
            for anchors in [
                KernelAnchors::Frozen(&gram),
                KernelAnchors::StateDependent { kernel, states: &states },
            ] {
                let lhs = apply_ga(anchors, &a, &grid).unwrap().dot(&v);
                let rhs = a.dot(&apply_ga_t(anchors, &v, &grid).unwrap());
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn operators_match_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (m, n) in [(1, 1), (3, 2), (4, 3), (6, 4)] {
            let grid = TimeGrid::new(n).unwrap();
            let kernel = GaussianKernel::velocity(0.9).unwrap();
            let x0 = random_points(&mut rng, m);
            let kmat: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| kernel.eval(&x0[i], &x0[j])).collect())
                .collect();
            let gram = GramOperator::matrix_free(x0.clone(), kernel);
            let len = 3 * m;
            let (rows, xcols, acols) = ((n + 1) * len, (n + 1) * len, n * len);
            // dense G^x
            let mut gx = vec![vec![0.0; xcols]; rows];
            for i in 0..rows {
                gx[i][i] = 1.0;
                if i >= len {
                    gx[i][i - len] = -1.0;
                }
            }
            // dense G^a: block (j+1, j) = -h I_3 (x) K
            let h = grid.step();
            let mut ga = vec![vec![0.0; acols]; rows];
            for j in 0..n {
                for c in 0..3 {
                    for l in 0..m {
                        for k in 0..m {
                            ga[(j + 1) * len + c * m + l][j * len + c * m + k] = -h * kmat[l][k];
                        }
                    }
                }
            }
            let x = random_traj(&mut rng, n + 1, m);
            let a = random_traj(&mut rng, n, m);
            let gx_x = apply_gx(&x);
            let ga_a = apply_ga(KernelAnchors::Frozen(&gram), &a, &grid).unwrap();
            for i in 0..rows {
                let ex: f64 = (0..xcols).map(|c| gx[i][c] * x.as_slice()[c]).sum();
                let ea: f64 = (0..acols).map(|c| ga[i][c] * a.as_slice()[c]).sum();
                assert!((gx_x.as_slice()[i] - ex).abs() <= 1e-12);
                assert!((ga_a.as_slice()[i] - ea).abs() <= 1e-12);
            }
            let v = random_traj(&mut rng, n + 1, m);
            let gxt = apply_gx_t(&v);
            let gat = apply_ga_t(KernelAnchors::Frozen(&gram), &v, &grid).unwrap();
            for c in 0..xcols {
                let e: f64 = (0..rows).map(|i| gx[i][c] * v.as_slice()[i]).sum();
                assert!((gxt.as_slice()[c] - e).abs() <= 1e-12);
            }
            for c in 0..acols {
                let e: f64 = (0..rows).map(|i| ga[i][c] * v.as_slice()[i]).sum();
                assert!((gat.as_slice()[c] - e).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn block_layout_round_trip() {
        let pts = vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert_eq!(points_to_block(&pts), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(block_to_points(&points_to_block(&pts)), pts);
    }
}
