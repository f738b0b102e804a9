//! Distance subproblem.
//!
//! Blocks without data have explicit minimizers `a~ = a - w` and
//! `x~_j = x_j - u_j`. A data block solves the proximal problem
//! `min_z dist(z) + (rho/2) |z - y|^2` with `y = x_j - u_j` by inexact Newton
//! with Armijo backtracking.

use crate::admm::config::NewtonConfig;
use crate::error::Result;
use crate::linsolve::{self, PcgConfig};
use crate::objective::KernelDistance;
use crate::trajectory::{block_to_points, points_to_block, Trajectory};
use crate::vec3::{self, Point};

/// A kernel distance attached to one state block.
#[derive(Debug, Clone)]
pub struct DataTerm {
    pub block: usize,
    pub distance: KernelDistance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub solution: Vec<Point>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub initial_gradient_norm: f64,
    pub line_search_failed: bool,
}

fn unflatten(v: &[f64]) -> Vec<Point> {
    v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Minimizes `dist(z) + (rho/2) |z - y|^2`, starting at `z = y`.
pub fn newton_prox(kd: &KernelDistance, y: &[Point], rho: f64, cfg: &NewtonConfig) -> Result<NewtonReport> {
    let objective = |z: &[Point]| -> Result<f64> {
        let prox: f64 = z.iter().zip(y).map(|(a, b)| vec3::dist_sq(a, b)).sum();
        Ok(kd.value(z)? + 0.5 * rho * prox)
    };
    let gradient = |z: &[Point]| -> Result<Vec<f64>> {
        let g = kd.gradient(z)?;
        Ok(g.iter()
            .zip(z.iter().zip(y))
            .flat_map(|(gk, (zk, yk))| [0, 1, 2].map(|c| gk[c] + rho * (zk[c] - yk[c])))
            .collect())
    };

    let mut z = y.to_vec();
    let mut f = objective(&z)?;
    let mut g = gradient(&z)?;
    let g0 = vec3::flat::norm(&g);
    let stop = cfg.gradient_tolerance * g0.max(1.0);
    let mut g_norm = g0;
    let mut iterations = 0;
    let mut line_search_failed = false;

    while iterations < cfg.max_iterations && g_norm > stop {
        let forcing = (g_norm / g0).min(cfg.forcing_cap);
        let z_ref = &z;
        let apply = |v: &[f64], out: &mut [f64]| match kd.hessian_matvec(z_ref, &unflatten(v)) {
            Ok(hv) => {
                for ((o, h), vi) in out.iter_mut().zip(hv.iter().flatten()).zip(v) {
                    *o = h + rho * vi;
                }
            }
            // dimensions always agree; NaN makes pcg report a breakdown
            Err(_) => out.iter_mut().for_each(|o| *o = f64::NAN),
        };
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let pcg_cfg = PcgConfig {
            rel_tolerance: forcing,
            max_iterations: cfg.pcg_max_iterations,
        };
        let mut step = linsolve::pcg(apply, &neg_g, None, &pcg_cfg)?.solution;
        let mut slope = vec3::flat::dot(&g, &step);
        if !(slope < 0.0) {
            step = neg_g;
            slope = -g_norm * g_norm;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<Point> = z
                .iter()
                .zip(unflatten(&step))
                .map(|(zk, sk)| vec3::add(zk, &vec3::scale(&sk, t)))
                .collect();
            let f_trial = objective(&trial)?;
            if f_trial <= f + cfg.armijo * t * slope {
                accepted = Some((trial, f_trial));
                break;
            }
            t *= cfg.backtrack;
        }
        iterations += 1;
        match accepted {
            Some((trial, f_trial)) => {
                z = trial;
                f = f_trial;
                g = gradient(&z)?;
                g_norm = vec3::flat::norm(&g);
            }
            None => {
                log::warn!(
                    "line search failed after {} backtracks (|g| = {g_norm:e}); keeping the current point",
                    cfg.max_backtracks
                );
                line_search_failed = true;
                break;
            }
        }
    }
    Ok(NewtonReport {
        solution: z,
        iterations,
        gradient_norm: g_norm,
        initial_gradient_norm: g0,
        line_search_failed,
    })
}

/// Returns `(x~, a~)` and one Newton report per data term.
pub fn solve_distance_subproblem(
    x: &Trajectory,
    a: &Trajectory,
    u: &Trajectory,
    w: &Trajectory,
    terms: &[DataTerm],
    rho: f64,
    cfg: &NewtonConfig,
) -> Result<(Trajectory, Trajectory, Vec<NewtonReport>)> {
    let a_tilde = a.sub(w);
    let mut x_tilde = x.sub(u);
    let mut reports = Vec::with_capacity(terms.len());
    for term in terms {
        let y = block_to_points(x_tilde.block(term.block));
        let report = newton_prox(&term.distance, &y, rho, cfg)?;
        x_tilde
            .block_mut(term.block)
            .copy_from_slice(&points_to_block(&report.solution));
        reports.push(report);
    }
    Ok((x_tilde, a_tilde, reports))
}
