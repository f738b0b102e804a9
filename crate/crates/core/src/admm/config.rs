use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::linsolve::PcgConfig as PcgSettings;

/// Inexact Newton settings for the data-block proximal problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Stop once `|g| <= gradient_tolerance * max(1, |g_0|)`.
    pub gradient_tolerance: f64,
    /// Forcing-term cap: inner PCG runs to `min(|g|/|g_0|, forcing_cap)`.
    pub forcing_cap: f64,
    pub pcg_max_iterations: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            gradient_tolerance: 1e-8,
            forcing_cap: 0.25,
            pcg_max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingMode {
    /// Conditions C1 to C5.
    #[default]
    Full,
    /// Only the iteration cap (C5).
    IterationCapOnly,
}

/// Solver settings. Every field has a default, so a partial JSON object is a
/// valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Number of time cells.
    pub n: usize,
    pub alpha: f64,
    pub rho: f64,
    pub tau_v: f64,
    pub tau_s: f64,
    /// Explicit velocity bandwidth; overrides the `tau_v` policy.
    pub sigma_v: Option<f64>,
    /// Explicit distance bandwidth; overrides the `tau_s` policy.
    pub sigma_s: Option<f64>,
    pub eps_prim: f64,
    pub eps_dual: f64,
    pub tau_haus: f64,
    pub hausdorff_percentile: f64,
    pub n_iter: usize,
    pub kkt_pcg: PcgSettings,
    pub newton: NewtonConfig,
    /// Hessian scale `c` of the kinetic quadratic; `None` means `2h`.
    pub kinetic_scale: Option<f64>,
    /// Weight multiplier for boundary-flagged points in the distance term.
    pub boundary_weight: f64,
    pub stopping: StoppingMode,
    /// Fill the per-iteration timing columns. Off by default so logs are
    /// reproducible bit for bit.
    pub record_timings: bool,
    /// Recorded for reproducibility; the solver itself draws no random numbers.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 5,
            alpha: 1.0,
            rho: 1.0,
            tau_v: 6.0,
            tau_s: 1.0,
            sigma_v: None,
            sigma_s: None,
            eps_prim: 1e-3,
            eps_dual: 1e-3,
            tau_haus: 0.5,
            hausdorff_percentile: crate::geometry::CENSORED_PERCENTILE,
            n_iter: 100,
            kkt_pcg: PcgSettings::default(),
            newton: NewtonConfig::default(),
            kinetic_scale: None,
            boundary_weight: 1.0,
            stopping: StoppingMode::Full,
            record_timings: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("rho", self.rho),
            ("tau_v", self.tau_v),
            ("tau_s", self.tau_s),
            ("eps_prim", self.eps_prim),
            ("eps_dual", self.eps_dual),
            ("tau_haus", self.tau_haus),
            ("boundary_weight", self.boundary_weight),
            ("kkt_pcg.rel_tolerance", self.kkt_pcg.rel_tolerance),
            ("newton.armijo", self.newton.armijo),
            ("newton.gradient_tolerance", self.newton.gradient_tolerance),
            ("newton.forcing_cap", self.newton.forcing_cap),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("sigma_v", self.sigma_v), ("sigma_s", self.sigma_s), ("kinetic_scale", self.kinetic_scale)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
                }
            }
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.n_iter == 0 {
            return Err(Error::invalid("n_iter must be at least 1"));
        }
        if self.kkt_pcg.max_iterations == 0 || self.newton.pcg_max_iterations == 0 {
            return Err(Error::invalid("PCG iteration caps must be at least 1"));
        }
        if !(self.hausdorff_percentile > 0.0 && self.hausdorff_percentile <= 1.0) {
            return Err(Error::invalid(format!(
                "hausdorff_percentile must lie in (0, 1], got {}",
                self.hausdorff_percentile
            )));
        }
        if !(self.newton.backtrack > 0.0 && self.newton.backtrack < 1.0) {
            return Err(Error::invalid(format!(
                "newton.backtrack must lie in (0, 1), got {}",
                self.newton.backtrack
            )));
        }
        if !(self.newton.armijo < 1.0) {
            return Err(Error::invalid("newton.armijo must be below 1"));
        }
        Ok(())
    }
}
