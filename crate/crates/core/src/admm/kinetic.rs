//! Kinetic-energy subproblem
//!
//! ```text
//! min (c/2) a^T B a + (rho/2) |a - a~ - w|^2 + (rho/2) |x - x~ - u|^2
//! s.t. G^a a + G^x x = q
//! ```
//!
//! with frozen `B = I_3 (x) K[x_0]`. The objective is quadratic with Hessian
//! `M = diag(cB + rho I, rho I)`, so one projected Newton step solves it
//! exactly. With `g` the gradient at the current point and `r = G z - q`,
//! the multiplier solves `G M^{-1} G^T nu = G M^{-1} g - r` and the step is
//! `p = M^{-1} (G^T nu - g)`.
//!
//! The Schur complement `S = G M^{-1} G^T` is block tridiagonal with
//! diagonal `((1/rho) I, D, ..., D)`, `D = I_3 (x) (h^2 K (cK + rho I)^{-1} K
//! + (2/rho) I)` and off-diagonal blocks `-(1/rho) I`. The preconditioner keeps
//! the diagonal.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linsolve::{self, block_diag_apply_inverse, CholeskyFactor, DenseMatrix, DiagonalBlock, PcgConfig, PcgOutcome};
use crate::objective::KineticEnergyOperator;
use crate::trajectory::{self, KernelAnchors, Trajectory};
use crate::vec3::Point;

/// Current iterate of the six ADMM trajectories, borrowed.
#[derive(Debug, Clone, Copy)]
pub struct KineticInput<'a> {
    pub x: &'a Trajectory,
    pub a: &'a Trajectory,
    pub x_tilde: &'a Trajectory,
    pub a_tilde: &'a Trajectory,
    pub u: &'a Trajectory,
    pub w: &'a Trajectory,
}

#[derive(Debug, Clone)]
pub struct KineticStep {
    pub x: Trajectory,
    pub a: Trajectory,
    pub pcg_iterations: usize,
    pub pcg_relative_residual: f64,
}

#[derive(Debug, Clone)]
pub struct KineticSolver {
    energy: KineticEnergyOperator,
    x0: Vec<Point>,
    rho: f64,
    pcg: PcgConfig,
    control_factor: Arc<CholeskyFactor>,
    preconditioner: Vec<DiagonalBlock>,
}

impl KineticSolver {
    pub fn new(energy: KineticEnergyOperator, x0: Vec<Point>, rho: f64, pcg: PcgConfig) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        if x0.len() != energy.gram().len() {
            return Err(Error::DimensionMismatch {
                expected: energy.gram().len(),
                actual: x0.len(),
                context: "kinetic solver template",
            });
        }
        let control_factor = Arc::new(energy.gram().shifted_cholesky(energy.scale(), rho)?);
        let preconditioner = build_schur_preconditioner(&energy, rho)?;
        Ok(Self {
            energy,
            x0,
            rho,
            pcg,
            control_factor,
            preconditioner,
        })
    }

    pub fn energy(&self) -> &KineticEnergyOperator {
        &self.energy
    }

    fn anchors(&self) -> KernelAnchors<'_> {
        KernelAnchors::Frozen(self.energy.gram())
    }

    fn m(&self) -> usize {
        self.x0.len()
    }

    /// `G (a, x) = G^a a + G^x x`.
    pub fn apply_g(&self, a: &Trajectory, x: &Trajectory) -> Result<Trajectory> {
        let ga = trajectory::apply_ga(self.anchors(), a, self.energy.grid())?;
        Ok(ga.add(&trajectory::apply_gx(x)))
    }

    /// `G^T v = ((G^a)^T v, (G^x)^T v)`.
    pub fn apply_gt(&self, v: &Trajectory) -> Result<(Trajectory, Trajectory)> {
        let a = trajectory::apply_ga_t(self.anchors(), v, self.energy.grid())?;
        Ok((a, trajectory::apply_gx_t(v)))
    }

    /// `M^{-1} (ga, gx)`.
    pub fn apply_m_inverse(&self, ga: &Trajectory, gx: &Trajectory) -> (Trajectory, Trajectory) {
        let mut a = ga.clone();
        for seg in a.as_mut_slice().chunks_mut(self.m()) {
            self.control_factor.solve_in_place(seg);
        }
        let mut x = gx.clone();
        let inv = 1.0 / self.rho;
        x.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
        (a, x)
    }

    /// `S v = G M^{-1} G^T v` on a flat multiplier vector.
    pub fn apply_schur(&self, v: &[f64]) -> Result<Vec<f64>> {
        let grid = self.energy.grid();
        let v = Trajectory::from_vec(grid.state_blocks(), self.m(), v.to_vec())?;
        let (ga, gx) = self.apply_gt(&v)?;
        let (ma, mx) = self.apply_m_inverse(&ga, &gx);
        Ok(self.apply_g(&ma, &mx)?.into_vec())
    }

    /// Inverse of the block-diagonal preconditioner.
    pub fn apply_preconditioner(&self, v: &[f64]) -> Result<Vec<f64>> {
        block_diag_apply_inverse(&self.preconditioner, v)
    }

    pub fn preconditioner_blocks(&self) -> &[DiagonalBlock] {
        &self.preconditioner
    }

    /// Solves `S nu = b` with the configured PCG settings.
    pub fn solve_schur(&self, b: &[f64], preconditioned: bool, cfg: &PcgConfig) -> Result<PcgOutcome> {
        let failure = std::cell::RefCell::new(None);
        let apply = |v: &[f64], out: &mut [f64]| match self.apply_schur(v) {
            Ok(r) => out.copy_from_slice(&r),
            Err(e) => {
                out.iter_mut().for_each(|o| *o = f64::NAN);
                failure.borrow_mut().get_or_insert(e);
            }
        };
        // block sizes always match, so the preconditioner cannot fail here
        let precond = |r: &[f64]| self.apply_preconditioner(r).unwrap_or_else(|_| r.to_vec());
        let outcome = linsolve::pcg(
            apply,
            b,
            if preconditioned { Some(&precond as &dyn Fn(&[f64]) -> Vec<f64>) } else { None },
            cfg,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        outcome
    }

    /// One exact solve of the subproblem around the given iterate.
    pub fn solve(&self, s: KineticInput<'_>) -> Result<KineticStep> {
        let rho = self.rho;
        let mut g_a = self.energy.gradient(s.a)?;
        for (((g, a), at), w) in g_a
            .as_mut_slice()
            .iter_mut()
            .zip(s.a.as_slice())
            .zip(s.a_tilde.as_slice())
            .zip(s.w.as_slice())
        {
            *g += rho * (a - at - w);
        }
        let mut g_x = s.x.sub(s.x_tilde);
        for (g, u) in g_x.as_mut_slice().iter_mut().zip(s.u.as_slice()) {
            *g = rho * (*g - u);
        }
        let residual = trajectory::constraint_residual(s.x, s.a, self.anchors(), &self.x0, self.energy.grid())?;

        let (ma, mx) = self.apply_m_inverse(&g_a, &g_x);
        let rhs = self.apply_g(&ma, &mx)?.sub(&residual);
        let outcome = self.solve_schur(rhs.as_slice(), true, &self.pcg)?;
        let nu = Trajectory::from_vec(self.energy.grid().state_blocks(), self.m(), outcome.solution)?;

        let (ta, tx) = self.apply_gt(&nu)?;
        let (pa, px) = self.apply_m_inverse(&ta.sub(&g_a), &tx.sub(&g_x));
        Ok(KineticStep {
            a: s.a.add(&pa),
            x: s.x.add(&px),
            pcg_iterations: outcome.iterations,
            pcg_relative_residual: outcome.relative_residual,
        })
    }
}

/// Diagonal blocks of the Schur complement: `(1/rho) I` for the first block
/// row and `I_3 (x) (h^2 K (cK + rho I)^{-1} K + (2/rho) I)` for the others.
pub fn build_schur_preconditioner(energy: &KineticEnergyOperator, rho: f64) -> Result<Vec<DiagonalBlock>> {
    let gram = energy.gram();
    let m = gram.len();
    let h = energy.grid().step();
    let k = gram.dense();
    let shifted = gram.shifted_cholesky(energy.scale(), rho)?;
    // X = (cK + rho I)^{-1} K, column by column
    let mut x = DenseMatrix::zeros(m);
    for j in 0..m {
        let col: Vec<f64> = (0..m).map(|i| k.get(i, j)).collect();
        let sol = shifted.solve(&col);
        for i in 0..m {
            x.set(i, j, sol[i]);
        }
    }
    let kx = DenseMatrix::from_fn(m, |i, j| (0..m).map(|l| k.get(i, l) * x.get(l, j)).sum::<f64>());
    let d = DenseMatrix::from_fn(m, |i, j| {
        let sym = 0.5 * (kx.get(i, j) + kx.get(j, i));
        h * h * sym + if i == j { 2.0 / rho } else { 0.0 }
    });
    let factor = Arc::new(linsolve::cholesky_spd(&d)?);
    let mut blocks = vec![DiagonalBlock::Scalar { value: 1.0 / rho, size: 3 * m }];
    blocks.extend((0..energy.grid().cells()).map(|_| DiagonalBlock::Kron3(factor.clone())));
    Ok(blocks)
}
