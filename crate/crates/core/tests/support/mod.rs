//! Dense reference assemblies shared by the integration tests.
#![allow(dead_code)]

use diffeoflow::Point;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_points<R: Rng>(rng: &mut R, m: usize, half_width: f64) -> Vec<Point> {
    (0..m)
        .map(|_| [0, 1, 2].map(|_| rng.gen_range(-half_width..half_width)))
        .collect()
}

pub fn random_vec<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Normalized Gaussian Gram matrix, written out from the kernel formula.
pub fn gram(points: &[Point], sigma: f64) -> DMatrix<f64> {
    let m = points.len();
    let norm = (2.0 * std::f64::consts::PI).powf(-1.5) / sigma.powi(3);
    DMatrix::from_fn(m, m, |i, j| {
        let d2: f64 = (0..3).map(|c| (points[i][c] - points[j][c]).powi(2)).sum();
        norm * (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

/// `I_3 (x) K` in coordinate-major layout.
pub fn kron3(k: &DMatrix<f64>) -> DMatrix<f64> {
    let m = k.nrows();
    let mut out = DMatrix::zeros(3 * m, 3 * m);
    for c in 0..3 {
        out.view_mut((c * m, c * m), (m, m)).copy_from(k);
    }
    out
}

/// Constraint matrix `G = [G^a G^x]` for `n` cells with frozen Gram `k`.
pub fn constraint_matrix(k: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let d = 3 * k.nrows();
    let h = 1.0 / (n + 1) as f64;
    let b = kron3(k);
    let na = n * d;
    let mut g = DMatrix::zeros((n + 1) * d, na + (n + 1) * d);
    let eye = DMatrix::<f64>::identity(d, d);
    g.view_mut((0, na), (d, d)).copy_from(&eye);
    for j in 0..n {
        let row = (j + 1) * d;
        g.view_mut((row, j * d), (d, d)).copy_from(&(-h * &b));
        g.view_mut((row, na + (j + 1) * d), (d, d)).copy_from(&eye);
        g.view_mut((row, na + j * d), (d, d)).copy_from(&(-1.0 * &eye));
    }
    g
}

/// Hessian `diag(c B + rho I, rho I)` of the kinetic subproblem.
pub fn kinetic_hessian(k: &DMatrix<f64>, n: usize, c: f64, rho: f64) -> DMatrix<f64> {
    let d = 3 * k.nrows();
    let na = n * d;
    let total = na + (n + 1) * d;
    let mut hm = DMatrix::<f64>::identity(total, total) * rho;
    let block = kron3(k) * c + DMatrix::<f64>::identity(d, d) * rho;
    for j in 0..n {
        hm.view_mut((j * d, j * d), (d, d)).copy_from(&block);
    }
    hm
}

/// Solves the kinetic saddle-point system densely. `targets` holds
/// `a~ + w` followed by `x~ + u`; returns `(a, x)` stacked the same way.
pub fn kkt_solve(
    k: &DMatrix<f64>,
    n: usize,
    c: f64,
    rho: f64,
    targets: &[f64],
    x0_block: &[f64],
) -> Vec<f64> {
    let g = constraint_matrix(k, n);
    let hm = kinetic_hessian(k, n, c, rho);
    let (rows, cols) = g.shape();
    let mut kkt = DMatrix::zeros(cols + rows, cols + rows);
    kkt.view_mut((0, 0), (cols, cols)).copy_from(&hm);
    kkt.view_mut((0, cols), (cols, rows)).copy_from(&g.transpose());
    kkt.view_mut((cols, 0), (rows, cols)).copy_from(&g);
    let mut rhs = DVector::zeros(cols + rows);
    for (i, t) in targets.iter().enumerate() {
        rhs[i] = rho * t;
    }
    for (i, q) in x0_block.iter().enumerate() {
        rhs[cols + i] = *q;
    }
    let sol = kkt.lu().solve(&rhs).expect("KKT matrix is nonsingular");
    sol.as_slice()[..cols].to_vec()
}

/// Dense Schur complement `G M^{-1} G^T`.
pub fn schur(k: &DMatrix<f64>, n: usize, c: f64, rho: f64) -> DMatrix<f64> {
    let g = constraint_matrix(k, n);
    let hm = kinetic_hessian(k, n, c, rho);
    let hinv = hm.try_inverse().expect("M is SPD");
    &g * hinv * g.transpose()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}
