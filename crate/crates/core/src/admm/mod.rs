//! Consensus ADMM for the discrete matching problem.
//!
//! The primal pair `(x, a)` carries the kinetic energy and the Euler
//! constraint, the consensus pair `(x~, a~)` carries the kernel distance, and
//! `(u, w)` are the scaled duals for `x` and `a`. One outer iteration runs the
//! kinetic subproblem, the distance subproblem and the dual update, then
//! evaluates the stopping conditions.
//!
//! Both the kinetic energy and the constraint use the Gram matrix frozen at the
//! template, which keeps the kinetic subproblem linear. The reported state is
//! the rollout of the final control with the state-dependent kernel; its
//! distance to the frozen-kernel state is recorded as
//! [`RegistrationResult::frozen_faithful_gap`].

pub mod config;
pub mod distance;
pub mod kinetic;
pub mod stopping;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{NewtonConfig, PcgSettings, SolverConfig, StoppingMode};
pub use distance::{newton_prox, solve_distance_subproblem, DataTerm, NewtonReport};
pub use kinetic::{build_schur_preconditioner, KineticInput, KineticSolver, KineticStep};
pub use stopping::{check_stopping, Condition, StoppingRule, Termination};

use crate::error::{Error, Result};
use crate::geometry::{self, Shape};
use crate::kernels::{self, GaussianKernel, GramOperator};
use crate::objective::{KernelDistance, KineticEnergyOperator};
use crate::strain::{strain_field, StrainField};
use crate::trajectory::{self, RolloutMode, TimeGrid, Trajectory};
use crate::vec3::{flat, Point};

/// One row of the convergence log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Censored Hausdorff distance of the terminal state to the final target.
    pub hausdorff_censored: f64,
    /// `hausdorff_censored` relative to its value before the first iteration.
    pub hausdorff_rel: f64,
    pub primal_norm: f64,
    pub primal_rel: f64,
    pub dual_norm: f64,
    pub dual_rel: f64,
    pub t_kinetic_s: f64,
    pub t_distance_s: f64,
    /// Censored Hausdorff distance of each data block to its frame; empty for
    /// pairwise registration.
    pub frame_hausdorff: Vec<f64>,
    pub kkt_pcg_iterations: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// The configuration actually used, with the bandwidths filled in.
    pub config: SolverConfig,
    pub sigma_v: f64,
    pub sigma_s: f64,
    pub eps_haus: f64,
    /// State block of every data term; the last entry is the final target.
    pub data_blocks: Vec<usize>,
    pub control: Trajectory,
    /// Rollout of `control` with the state-dependent kernel.
    pub state: Trajectory,
    /// Primal state of the last kinetic subproblem (frozen kernel).
    pub frozen_state: Trajectory,
    /// Largest coordinate difference between `state` and `frozen_state`.
    pub frozen_faithful_gap: f64,
    /// `h a^T B a` with the frozen Gram matrix.
    pub kinetic_energy: f64,
    pub initial_hausdorff: f64,
    /// Last logged censored Hausdorff distance.
    pub final_hausdorff: f64,
    /// Censored Hausdorff distance of the terminal block of `state`.
    pub final_hausdorff_faithful: f64,
    pub termination: Termination,
    pub log: Vec<IterationRecord>,
    /// Strain of the template mesh under the computed map, if the template
    /// has triangles.
    pub strain: Option<StrainField>,
    pub runtime_s: f64,
}

impl RegistrationResult {
    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn terminal_points(&self) -> Vec<Point> {
        trajectory::observe_terminal(&self.state)
    }
}

/// `(u, w) += (x~, a~) - (x, a)`.
pub fn dual_update(
    u: &mut Trajectory,
    w: &mut Trajectory,
    x: &Trajectory,
    a: &Trajectory,
    x_tilde: &Trajectory,
    a_tilde: &Trajectory,
) {
    for ((ui, xi), xti) in u.as_mut_slice().iter_mut().zip(x.as_slice()).zip(x_tilde.as_slice()) {
        *ui += xti - xi;
    }
    for ((wi, ai), ati) in w.as_mut_slice().iter_mut().zip(a.as_slice()).zip(a_tilde.as_slice()) {
        *wi += ati - ai;
    }
}

/// Norms of `r_prim = (a, x) - (a~, x~)` and `r_dual = rho ((a~, x~) -
/// previous)`; the dual residual is 0 without a previous consensus pair.
pub fn residuals(
    x: &Trajectory,
    a: &Trajectory,
    x_tilde: &Trajectory,
    a_tilde: &Trajectory,
    previous: Option<(&Trajectory, &Trajectory)>,
    rho: f64,
) -> (f64, f64) {
    let pair_norm = |p: &Trajectory, q: &Trajectory, r: &Trajectory, s: &Trajectory| {
        let d1 = flat::sub(p.as_slice(), q.as_slice());
        let d2 = flat::sub(r.as_slice(), s.as_slice());
        (flat::dot(&d1, &d1) + flat::dot(&d2, &d2)).sqrt()
    };
    let primal = pair_norm(a, a_tilde, x, x_tilde);
    let dual = match previous {
        Some((xp, ap)) => rho * pair_norm(a_tilde, ap, x_tilde, xp),
        None => 0.0,
    };
    (primal, dual)
}

/// Value at iteration 2, else iteration 1, else 1.
fn reference_value(values: &[f64]) -> f64 {
    [values.get(1), values.first()]
        .into_iter()
        .flatten()
        .copied()
        .find(|v| *v > 0.0)
        .unwrap_or(1.0)
}

/// Pairwise registration of `template` onto `target`.
pub fn register(template: &Shape, target: &Shape, cfg: &SolverConfig) -> Result<RegistrationResult> {
    cfg.validate()?;
    run(template, &[(cfg.n, target)], cfg.clone())
}

/// Registration through a sequence of frames; `frames[0]` is the template.
///
/// With three or more frames the number of time cells equals the number of
/// frames and frame `i` is attached to state block `round(i n / (n_f - 1))`
/// (zero-based), so the last frame sits on the terminal block. Two frames
/// reduce to [`register`].
pub fn register_multiframe(frames: &[Shape], cfg: &SolverConfig) -> Result<RegistrationResult> {
    match frames.len() {
        0 | 1 => Err(Error::invalid("multi-frame registration needs at least two frames")),
        2 => register(&frames[0], &frames[1], cfg),
        nf => {
            let mut cfg = cfg.clone();
            if cfg.n != nf {
                log::info!("using n = {nf} time cells for {nf} frames");
            }
            cfg.n = nf;
            cfg.validate()?;
            let targets: Vec<(usize, &Shape)> = (1..nf)
                .map(|i| (frame_block(i, nf, cfg.n), &frames[i]))
                .collect();
            run(&frames[0], &targets, cfg)
        }
    }
}

/// Zero-based state block of frame `i` out of `nf` frames on `n` cells.
pub fn frame_block(i: usize, nf: usize, n: usize) -> usize {
    ((i * n) as f64 / (nf - 1) as f64).round() as usize
}

fn run(template: &Shape, targets: &[(usize, &Shape)], mut cfg: SolverConfig) -> Result<RegistrationResult> {
    let start = Instant::now();
    let grid = TimeGrid::new(cfg.n)?;
    let final_target = targets.last().expect("at least one target").1;
    let m = template.len();

    let sigma_v = match cfg.sigma_v {
        Some(s) => s,
        None => kernels::sigma_v_policy(template, cfg.tau_v)?,
    };
    let sigma_s = match cfg.sigma_s {
        Some(s) => s,
        None => kernels::sigma_s_policy(template, final_target, cfg.tau_s)?,
    };
    cfg.sigma_v = Some(sigma_v);
    cfg.sigma_s = Some(sigma_s);
    let eps_haus = cfg.tau_haus * geometry::mean_edge_length(final_target)?;
    let percentile = cfg.hausdorff_percentile;

    let kernel = GaussianKernel::velocity(sigma_v)?;
    let gram = Arc::new(GramOperator::assembled(template.points().to_vec(), kernel)?);
    let energy = KineticEnergyOperator::new(gram, grid, cfg.kinetic_scale)?;
    let solver = KineticSolver::new(energy, template.points().to_vec(), cfg.rho, cfg.kkt_pcg)?;
    let terms = targets
        .iter()
        .map(|(block, shape)| {
            Ok(DataTerm {
                block: *block,
                distance: KernelDistance::from_shapes(template, shape, sigma_s, cfg.alpha, cfg.boundary_weight)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rule = StoppingRule {
        mode: cfg.stopping,
        eps_haus,
        eps_prim: cfg.eps_prim,
        eps_dual: cfg.eps_dual,
        n_iter: cfg.n_iter,
    };

    let mut a = Trajectory::zeros(grid.control_blocks(), m);
    let mut x = Trajectory::constant(template.points(), grid.state_blocks());
    let mut a_tilde = a.clone();
    let mut x_tilde = x.clone();
    let mut u = Trajectory::zeros(grid.state_blocks(), m);
    let mut w = Trajectory::zeros(grid.control_blocks(), m);

    let initial_hausdorff = geometry::hausdorff_points(template.points(), final_target.points(), percentile)?.value;
    let mut log: Vec<IterationRecord> = Vec::new();
    let mut hausdorff_trace = Vec::new();
    let mut termination = None;

    for k in 1.. {
        let t0 = Instant::now();
        let step = solver.solve(KineticInput {
            x: &x,
            a: &a,
            x_tilde: &x_tilde,
            a_tilde: &a_tilde,
            u: &u,
            w: &w,
        });
        let step = match step {
            Ok(s) if s.x.is_finite() && s.a.is_finite() => s,
            Ok(_) => {
                termination = Some(breakdown(k, "kinetic subproblem produced non-finite values".into()));
                break;
            }
            Err(e) => {
                termination = Some(breakdown(k, format!("kinetic subproblem: {e}")));
                break;
            }
        };
        let t_kinetic = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let (xt_new, at_new, reports) =
            match solve_distance_subproblem(&step.x, &step.a, &u, &w, &terms, cfg.rho, &cfg.newton) {
                Ok(r) => r,
                Err(e) => {
                    termination = Some(breakdown(k, format!("distance subproblem: {e}")));
                    break;
                }
            };
        let t_distance = t1.elapsed().as_secs_f64();
        if !xt_new.is_finite() {
            termination = Some(breakdown(k, "distance subproblem produced non-finite values".into()));
            break;
        }

        x = step.x;
        a = step.a;
        let previous = (k > 1).then_some((&x_tilde, &a_tilde));
        let (primal_norm, dual_norm) = residuals(&x, &a, &xt_new, &at_new, previous, cfg.rho);
        dual_update(&mut u, &mut w, &x, &a, &xt_new, &at_new);
        x_tilde = xt_new;
        a_tilde = at_new;

        let terminal = trajectory::observe_terminal(&x);
        let hd = geometry::hausdorff_points(&terminal, final_target.points(), percentile)?.value;
        let frame_hausdorff = if targets.len() > 1 {
            targets
                .iter()
                .map(|(block, shape)| {
                    Ok(geometry::hausdorff_points(&x.block_points(*block), shape.points(), percentile)?.value)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        hausdorff_trace.push(hd);
        let (t_kinetic_s, t_distance_s) = if cfg.record_timings { (t_kinetic, t_distance) } else { (0.0, 0.0) };
        log.push(IterationRecord {
            iter: k,
            hausdorff_censored: hd,
            hausdorff_rel: if initial_hausdorff > 0.0 { hd / initial_hausdorff } else { 0.0 },
            primal_norm,
            primal_rel: 0.0,
            dual_norm,
            dual_rel: 0.0,
            t_kinetic_s,
            t_distance_s,
            frame_hausdorff,
            kkt_pcg_iterations: step.pcg_iterations,
            newton_iterations: reports.iter().map(|r| r.iterations).sum(),
        });
        log::debug!(
            "iter {k}: hausdorff {hd:.6e} primal {primal_norm:.3e} dual {dual_norm:.3e} pcg {}",
            step.pcg_iterations
        );

        let fired = check_stopping(&rule, k, &hausdorff_trace, primal_norm, dual_norm);
        if let Some(&first) = fired.first() {
            termination = Some(Termination {
                condition: first,
                fired,
                detail: None,
            });
            break;
        }
    }

    let primal_ref = reference_value(&log.iter().map(|r| r.primal_norm).collect::<Vec<_>>());
    let dual_ref = reference_value(&log.iter().map(|r| r.dual_norm).collect::<Vec<_>>());
    for r in &mut log {
        r.primal_rel = r.primal_norm / primal_ref;
        r.dual_rel = r.dual_norm / dual_ref;
    }

    let state = trajectory::rollout(template.points(), &a, RolloutMode::Faithful(kernel), &grid)?;
    let frozen_faithful_gap = flat::max_abs(&flat::sub(state.as_slice(), x.as_slice()));
    let terminal = trajectory::observe_terminal(&state);
    let final_hausdorff_faithful = geometry::hausdorff_points(&terminal, final_target.points(), percentile)?.value;
    let strain = match template.triangles() {
        Some(_) if terminal.iter().all(crate::vec3::is_finite) => Some(strain_field(template, &terminal)?),
        _ => None,
    };
    log::info!("frozen/state-dependent rollout gap: {frozen_faithful_gap:.3e}");

    Ok(RegistrationResult {
        sigma_v,
        sigma_s,
        eps_haus,
        data_blocks: targets.iter().map(|(b, _)| *b).collect(),
        kinetic_energy: solver.energy().kinetic_energy(&a)?,
        final_hausdorff: log.last().map_or(initial_hausdorff, |r| r.hausdorff_censored),
        config: cfg,
        control: a,
        state,
        frozen_state: x,
        frozen_faithful_gap,
        initial_hausdorff,
        final_hausdorff_faithful,
        termination: termination.expect("loop exits with a termination"),
        log,
        strain,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

fn breakdown(iteration: usize, detail: String) -> Termination {
    log::error!("iteration {iteration}: {detail}");
    Termination {
        condition: Condition::Breakdown,
        fired: vec![Condition::Breakdown],
        detail: Some(format!("iteration {iteration}: {detail}")),
    }
}
