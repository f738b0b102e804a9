mod support;

use std::sync::Arc;

use diffeoflow::admm::{KineticInput, KineticSolver};
use diffeoflow::linsolve::PcgConfig;
use diffeoflow::objective::KineticEnergyOperator;
use diffeoflow::trajectory::{self, points_to_block, KernelAnchors};
use diffeoflow::{GaussianKernel, GramOperator, Point, TimeGrid, Trajectory};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TIGHT: PcgConfig = PcgConfig {
    rel_tolerance: 1e-14,
    max_iterations: 2000,
};

fn solver(points: &[Point], sigma: f64, n: usize, rho: f64, pcg: PcgConfig) -> KineticSolver {
    let gram = GramOperator::matrix_free(points.to_vec(), GaussianKernel::velocity(sigma).unwrap());
    let energy = KineticEnergyOperator::new(Arc::new(gram), TimeGrid::new(n).unwrap(), None).unwrap();
    KineticSolver::new(energy, points.to_vec(), rho, pcg).unwrap()
}

fn traj(rng: &mut ChaCha8Rng, blocks: usize, m: usize) -> Trajectory {
    Trajectory::from_vec(blocks, m, support::random_vec(rng, blocks * 3 * m)).unwrap()
}

#[test]
fn schur_solution_matches_dense_saddle_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..10 {
        let m = rng.gen_range(2..=6);
        let n = rng.gen_range(1..=3);
        let sigma = rng.gen_range(0.3..1.5);
        let rho = rng.gen_range(0.2..5.0);
        let x0 = support::random_points(&mut rng, m, 1.0);
        let s = solver(&x0, sigma, n, rho, TIGHT);

        let (x, a) = (traj(&mut rng, n + 1, m), traj(&mut rng, n, m));
        let (xt, at) = (traj(&mut rng, n + 1, m), traj(&mut rng, n, m));
        let (u, w) = (traj(&mut rng, n + 1, m), traj(&mut rng, n, m));
        let step = s
            .solve(KineticInput { x: &x, a: &a, x_tilde: &xt, a_tilde: &at, u: &u, w: &w })
            .unwrap();

        let k = support::gram(&x0, sigma);
        let c = 2.0 / (n + 1) as f64;
        let targets: Vec<f64> = at.add(&w).into_vec().into_iter().chain(xt.add(&u).into_vec()).collect();
        let dense = support::kkt_solve(&k, n, c, rho, &targets, &points_to_block(&x0));
        let ours: Vec<f64> = step.a.as_slice().iter().chain(step.x.as_slice()).copied().collect();
        let err = support::rel_diff(&ours, &dense);
        assert!(err <= 1e-8, "trial {trial}: relative error {err:e}");
    }
}

#[test]
fn kinetic_step_satisfies_constraint() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, n) = (8, 4);
    let x0 = support::random_points(&mut rng, m, 1.0);
    let s = solver(&x0, 0.8, n, 1.0, TIGHT);
    let z = |rng: &mut ChaCha8Rng, b| traj(rng, b, m);
    let (x, a, xt, at, u, w) = (z(&mut rng, n + 1), z(&mut rng, n), z(&mut rng, n + 1), z(&mut rng, n), z(&mut rng, n + 1), z(&mut rng, n));
    let step = s
        .solve(KineticInput { x: &x, a: &a, x_tilde: &xt, a_tilde: &at, u: &u, w: &w })
        .unwrap();
    let r = trajectory::constraint_residual(
        &step.x,
        &step.a,
        KernelAnchors::Frozen(s.energy().gram()),
        &x0,
        s.energy().grid(),
    )
    .unwrap();
    assert!(r.as_slice().iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn large_rho_projects_the_targets() {
    // with rho dominating c B the step is the Euclidean projection of the
    // targets onto the constraint set
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, n) = (4, 2);
    let x0 = support::random_points(&mut rng, m, 1.0);
    let rho = 1e8;
    let s = solver(&x0, 0.7, n, rho, TIGHT);
    let zeros = |b| Trajectory::zeros(b, m);
    let (xt, at) = (traj(&mut rng, n + 1, m), traj(&mut rng, n, m));
    let step = s
        .solve(KineticInput { x: &zeros(n + 1), a: &zeros(n), x_tilde: &xt, a_tilde: &at, u: &zeros(n + 1), w: &zeros(n) })
        .unwrap();

    let k = support::gram(&x0, 0.7);
    let g = support::constraint_matrix(&k, n);
    let t = DVector::from_iterator(
        at.as_slice().len() + xt.as_slice().len(),
        at.as_slice().iter().chain(xt.as_slice()).copied(),
    );
    let mut q = DVector::zeros(g.nrows());
    for (i, v) in points_to_block(&x0).iter().enumerate() {
        q[i] = *v;
    }
    let ggt = &g * g.transpose();
    let lambda = ggt.lu().solve(&(&g * &t - q)).unwrap();
    let proj = &t - g.transpose() * lambda;
    let ours: Vec<f64> = step.a.as_slice().iter().chain(step.x.as_slice()).copied().collect();
    assert!(support::rel_diff(&ours, proj.as_slice()) < 1e-6);
}

#[test]
fn preconditioner_is_the_schur_block_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (m, n, sigma, rho) in [(3, 1, 0.5, 1.0), (5, 3, 1.2, 0.3), (6, 2, 0.8, 4.0)] {
        let x0 = support::random_points(&mut rng, m, 1.0);
        let s = solver(&x0, sigma, n, rho, TIGHT);
        let k = support::gram(&x0, sigma);
        let full = support::schur(&k, n, 2.0 / (n + 1) as f64, rho);
        let d = 3 * m;
        let mut block_diag = full.clone() * 0.0;
        for j in 0..=n {
            block_diag
                .view_mut((j * d, j * d), (d, d))
                .copy_from(&full.view((j * d, j * d), (d, d)));
        }
        let v = support::random_vec(&mut rng, (n + 1) * d);
        let expected = block_diag.lu().solve(&DVector::from_vec(v.clone())).unwrap();
        let ours = s.apply_preconditioner(&v).unwrap();
        assert!(support::rel_diff(&ours, expected.as_slice()) < 1e-10);

        // matrix-free Schur operator agrees with the dense product
        let sv = s.apply_schur(&v).unwrap();
        let dense_sv = &full * DVector::from_vec(v);
        assert!(support::rel_diff(&sv, dense_sv.as_slice()) < 1e-12);
    }
}

#[test]
fn vanishing_kernel_leaves_two_over_rho() {
    // far-apart points and a tiny bandwidth make B ~ 0, so every block past
    // the first is (2 / rho) I
    let x0: Vec<Point> = (0..4).map(|i| [10.0 * i as f64, 0.0, 0.0]).collect();
    let rho = 2.5;
    let s = solver(&x0, 0.05, 3, rho, TIGHT);
    let v: Vec<f64> = (0..48).map(|i| i as f64 - 7.0).collect();
    let out = s.apply_preconditioner(&v).unwrap();
    let h = 0.25;
    let peak = (2.0 * std::f64::consts::PI).powf(-1.5) / 0.05f64.powi(3);
    // the self term h^2 K (cK + rho)^{-1} K survives on the diagonal
    let self_term = h * h * peak * peak / (2.0 * h * peak + rho);
    for (i, (o, vi)) in out.iter().zip(&v).enumerate() {
        let expected = if i < 12 { rho * vi } else { vi / (2.0 / rho + self_term) };
        assert!((o - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{i}: {o} vs {expected}");
    }
}

#[test]
fn preconditioning_reduces_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let m = 50;
    let x0: Vec<Point> = (0..m).map(|_| [0, 1, 2].map(|_| rng.gen_range(0.0..1.0))).collect();
    let cfg = PcgConfig { rel_tolerance: 1e-4, max_iterations: 10_000 };
    let s = solver(&x0, 0.15, 5, 1.0, cfg);
    let b = support::random_vec(&mut rng, 6 * 3 * m);
    let plain = s.solve_schur(&b, false, &cfg).unwrap();
    let pre = s.solve_schur(&b, true, &cfg).unwrap();
    assert!(
        (pre.iterations as f64) <= 0.7 * plain.iterations as f64,
        "preconditioned {} vs plain {}",
        pre.iterations,
        plain.iterations
    );
}
