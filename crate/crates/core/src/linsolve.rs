//! Iterative and small dense linear algebra.
//!
//! [`pcg`] is a preconditioned conjugate gradient solver with a
//! negative-curvature guard, so that it can be used inside Newton-Krylov
//! iterations on indefinite Hessians. The dense helpers cover the symmetric
//! positive definite blocks that show up in the KKT solves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::flat;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: data.len(),
                context: "dense matrix data",
            });
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| flat::dot(self.row(i), x)).collect()
    }

    /// `self + shift * I`
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] += shift;
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: DenseMatrix,
}

/// Factors a symmetric positive definite matrix.
pub fn cholesky_spd(a: &DenseMatrix) -> Result<CholeskyFactor> {
    let n = a.dim();
    let scale = a.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    if a.max_asymmetry() > 1e-10 * scale {
        return Err(Error::invalid("cholesky_spd: matrix is not symmetric"));
    }
    let mut l = DenseMatrix::zeros(n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > 0.0) {
            return Err(Error::NotSpd {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(CholeskyFactor { l })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let row = self.l.row(i);
            let s = flat::dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
    }
}

/// Solves `A x = rhs` given the Cholesky factor of `A`.
pub fn solve_with_factor(factor: &CholeskyFactor, rhs: &[f64]) -> Vec<f64> {
    factor.solve(rhs)
}

/// One diagonal block of a block-diagonal operator.
#[derive(Debug, Clone)]
pub enum DiagonalBlock {
    /// Dense SPD block, given by its factor.
    Factored(Arc<CholeskyFactor>),
    /// `I_3 (x) A` for an SPD `A`: the factor is applied to each of three
    /// contiguous coordinate segments.
    Kron3(Arc<CholeskyFactor>),
    /// `value * I_size`.
    Scalar { value: f64, size: usize },
}

impl DiagonalBlock {
    pub fn size(&self) -> usize {
        match self {
            DiagonalBlock::Factored(f) => f.dim(),
            DiagonalBlock::Kron3(f) => 3 * f.dim(),
            DiagonalBlock::Scalar { size, .. } => *size,
        }
    }

    fn apply_inverse_in_place(&self, v: &mut [f64]) {
        match self {
            DiagonalBlock::Factored(f) => f.solve_in_place(v),
            DiagonalBlock::Kron3(f) => {
                for seg in v.chunks_mut(f.dim()) {
                    f.solve_in_place(seg);
                }
            }
            DiagonalBlock::Scalar { value, .. } => {
                let inv = 1.0 / value;
                v.iter_mut().for_each(|x| *x *= inv);
            }
        }
    }
}

/// Applies the inverse of `diag(blocks)` to a stacked vector.
pub fn block_diag_apply_inverse(blocks: &[DiagonalBlock], v: &[f64]) -> Result<Vec<f64>> {
    let total: usize = blocks.iter().map(DiagonalBlock::size).sum();
    if total != v.len() {
        return Err(Error::DimensionMismatch {
            expected: total,
            actual: v.len(),
            context: "block-diagonal inverse",
        });
    }
    let mut out = v.to_vec();
    let mut offset = 0;
    for block in blocks {
        let size = block.size();
        block.apply_inverse_in_place(&mut out[offset..offset + size]);
        offset += size;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcgConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            rel_tolerance: 1e-4,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcgTermination {
    Converged,
    MaxIterations,
    NegativeCurvature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub termination: PcgTermination,
}

/// Preconditioned conjugate gradients for `A x = b`, starting from `x = 0`.
///
/// `apply_a` writes `A v` into its second argument; `precond`, when given,
/// returns `P^{-1} r`. If a search direction with `p^T A p <= 0` is met, the
/// current iterate is returned when at least one step was taken, otherwise the
/// preconditioned steepest-descent direction `P^{-1} b`.
pub fn pcg<A>(
    apply_a: A,
    b: &[f64],
    precond: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    cfg: &PcgConfig,
) -> Result<PcgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    if !(cfg.rel_tolerance > 0.0) || cfg.max_iterations == 0 {
        return Err(Error::invalid("pcg needs rel_tolerance > 0 and max_iterations >= 1"));
    }
    let n = b.len();
    let b_norm = flat::norm(b);
    if !b_norm.is_finite() {
        return Err(breakdown(0, "right-hand side is not finite"));
    }
    if b_norm == 0.0 {
        return Ok(PcgOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            termination: PcgTermination::Converged,
        });
    }
    let apply_p = |r: &[f64]| match precond {
        Some(p) => p(r),
        None => r.to_vec(),
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = apply_p(&r);
    let mut p = z.clone();
    let mut rz = flat::dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;

    for it in 0..cfg.max_iterations {
        apply_a(&p, &mut ap);
        let curvature = flat::dot(&p, &ap);
        if !curvature.is_finite() {
            return Err(breakdown(it, format!("curvature p^T A p = {curvature}")));
        }
        if curvature <= 0.0 {
            // at it == 0 the direction is P^{-1} b
            let solution = if it == 0 { p } else { x };
            return Ok(PcgOutcome {
                solution,
                iterations: it,
                relative_residual: rel,
                termination: PcgTermination::NegativeCurvature,
            });
        }
        let step = rz / curvature;
        flat::axpy(step, &p, &mut x);
        flat::axpy(-step, &ap, &mut r);
        rel = flat::norm(&r) / b_norm;
        if !rel.is_finite() {
            return Err(breakdown(it + 1, format!("residual norm became {rel}")));
        }
        if rel <= cfg.rel_tolerance {
            return Ok(PcgOutcome {
                solution: x,
                iterations: it + 1,
                relative_residual: rel,
                termination: PcgTermination::Converged,
            });
        }
        z = apply_p(&r);
        let rz_next = flat::dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(PcgOutcome {
        solution: x,
        iterations: cfg.max_iterations,
        relative_residual: rel,
        termination: PcgTermination::MaxIterations,
    })
}

fn breakdown(iteration: usize, detail: impl Into<String>) -> Error {
    Error::NumericalBreakdown {
        solver: "pcg",
        iteration,
        detail: detail.into(),
    }
}
