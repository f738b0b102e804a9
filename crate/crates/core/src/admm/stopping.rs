use serde::{Deserialize, Serialize};

use crate::admm::config::StoppingMode;

/// Why the outer loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Censored Hausdorff distance below `eps_haus`.
    C1,
    /// Hausdorff distance stagnated over the last five changes.
    C2,
    /// Primal residual below `eps_prim`.
    C3,
    /// Dual residual below `eps_dual`.
    C4,
    /// Iteration cap reached.
    C5,
    /// A subproblem failed; the result holds the last good iterate.
    Breakdown,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C3 => "C3",
            Condition::C4 => "C4",
            Condition::C5 => "C5",
            Condition::Breakdown => "breakdown",
        }
    }

    /// C1 to C4.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Condition::C1 | Condition::C2 | Condition::C3 | Condition::C4)
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    /// First condition in C1..C5 order that fired.
    pub condition: Condition,
    pub fired: Vec<Condition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Termination {
    pub fn is_convergence(&self) -> bool {
        self.condition.is_convergence()
    }
}

/// Thresholds for [`check_stopping`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub mode: StoppingMode,
    pub eps_haus: f64,
    pub eps_prim: f64,
    pub eps_dual: f64,
    pub n_iter: usize,
}

/// Number of Hausdorff values needed before the stagnation test applies.
pub const STAGNATION_WINDOW: usize = 6;

/// Evaluates C1..C5 after `iteration` completed iterations. `hausdorff`
/// holds one value per completed iteration.
pub fn check_stopping(
    rule: &StoppingRule,
    iteration: usize,
    hausdorff: &[f64],
    primal_norm: f64,
    dual_norm: f64,
) -> Vec<Condition> {
    let mut fired = Vec::new();
    if rule.mode == StoppingMode::Full {
        if let Some(&last) = hausdorff.last() {
            if last < rule.eps_haus {
                fired.push(Condition::C1);
            }
        }
        if hausdorff.len() >= STAGNATION_WINDOW {
            let tail = &hausdorff[hausdorff.len() - STAGNATION_WINDOW..];
            let change: f64 = tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
            if change < rule.eps_haus / 1e3 {
                fired.push(Condition::C2);
            }
        }
        if primal_norm < rule.eps_prim {
            fired.push(Condition::C3);
        }
        // the dual residual is zero by definition on the first iteration
        if iteration >= 2 && dual_norm < rule.eps_dual {
            fired.push(Condition::C4);
        }
    }
    if iteration >= rule.n_iter {
        fired.push(Condition::C5);
    }
    fired
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule() -> StoppingRule {
        StoppingRule {
            mode: StoppingMode::Full,
            eps_haus: 0.1,
            eps_prim: 1e-3,
            eps_dual: 1e-3,
            n_iter: 100,
        }
    }

    #[test]
    fn zero_distance_fires_c1() {
        assert_eq!(check_stopping(&rule(), 1, &[0.0], 1.0, 0.0), vec![Condition::C1]);
    }

    #[test]
    fn cap_fires_c5() {
        assert_eq!(check_stopping(&rule(), 100, &[1.0], 1.0, 1.0), vec![Condition::C5]);
        assert_eq!(check_stopping(&rule(), 101, &[1.0], 1.0, 1.0), vec![Condition::C5]);
        assert!(check_stopping(&rule(), 99, &[1.0], 1.0, 1.0).is_empty());
    }

    #[test]
    fn stagnation_needs_six_values() {
        let five = [2.0; 5];
        assert!(check_stopping(&rule(), 5, &five, 1.0, 1.0).is_empty());
        let six = [2.0; 6];
        assert_eq!(check_stopping(&rule(), 6, &six, 1.0, 1.0), vec![Condition::C2]);
        let moving = [2.0, 2.0, 2.0, 2.0, 2.0, 2.001];
        assert!(check_stopping(&rule(), 6, &moving, 1.0, 1.0).is_empty());
        // only the last six values count
        let old_motion = [9.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0];
        assert_eq!(check_stopping(&rule(), 7, &old_motion, 1.0, 1.0), vec![Condition::C2]);
    }

    #[test]
    fn residual_conditions() {
        assert_eq!(check_stopping(&rule(), 1, &[1.0], 1e-4, 0.0), vec![Condition::C3]);
        assert_eq!(check_stopping(&rule(), 2, &[1.0, 1.0], 1.0, 1e-4), vec![Condition::C4]);
    }

    #[test]
    fn cap_only_mode_ignores_convergence() {
        let r = StoppingRule { mode: StoppingMode::IterationCapOnly, ..rule() };
        assert!(check_stopping(&r, 6, &[0.0; 6], 0.0, 0.0).is_empty());
        assert_eq!(check_stopping(&r, 100, &[0.0], 0.0, 0.0), vec![Condition::C5]);
    }
}
